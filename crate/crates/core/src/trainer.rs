//! Self-supervised training: HR in-plane patches paired with their
//! simulated LR counterparts, optimized with Adam under a one-cycle
//! learning rate schedule.

use crate::acquisition::{degrade_1d, AcquisitionSpec};
use crate::error::Error;
use crate::grid::GridSpec1D;
use crate::nn::{mse, mse_grad, Adam, SRNetwork, SRNetworkConfig};
use crate::profile::SliceProfile;
use crate::volume::Volume;
use crate::Result;
use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Minimum in-patch intensity standard deviation before a patch
/// position is re-drawn (normalized intensity units).
const PATCH_STD_THRESHOLD: f64 = 0.01;
const PATCH_MAX_RETRIES: usize = 16;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_patches: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub hr_patch_rows: usize,
    pub hr_patch_cols: usize,
    pub seed: u64,
    pub channels: usize,
    pub blocks: usize,
    pub expansion: f64,
}

impl TrainConfig {
    /// Defaults for a given ratio: 1,000,000 patches, batch 128,
    /// lr 1e-3, patches round(8 r) x 8, 16 blocks of 256 channels.
    pub fn for_ratio(ratio: f64) -> TrainConfig {
        TrainConfig {
            total_patches: 1_000_000,
            batch_size: 128,
            lr_max: 1e-3,
            hr_patch_rows: (8.0 * ratio).round() as usize,
            hr_patch_cols: 8,
            seed: 0,
            channels: 256,
            blocks: 16,
            expansion: 2.0,
        }
    }

    pub fn steps(&self) -> usize {
        self.total_patches.div_ceil(self.batch_size)
    }

    pub fn network_config(&self, ratio: f64) -> SRNetworkConfig {
        SRNetworkConfig {
            channels: self.channels,
            blocks: self.blocks,
            expansion: self.expansion,
            ratio,
            seed: self.seed,
        }
    }
}

/// An HR in-plane patch and its simulated LR counterpart.
#[derive(Debug, Clone)]
pub struct PatchPair {
    /// (hr_patch_rows, hr_patch_cols), rows along the degraded axis.
    pub hr: Array2<f64>,
    /// (round(hr_rows / r), cols).
    pub lr: Array2<f64>,
    /// In-plane volume axis the degradation ran along.
    pub source_axis: usize,
}

/// Deterministic patch stream over the volume's in-plane slices.
pub struct PatchSampler<'a> {
    volume: &'a Volume,
    spec: &'a AcquisitionSpec,
    profile: &'a SliceProfile,
    rows: usize,
    cols: usize,
    through: usize,
    in_plane: [usize; 2],
    hr_grid: GridSpec1D,
    rng: ChaCha8Rng,
}

impl<'a> PatchSampler<'a> {
    pub fn new(
        volume: &'a Volume,
        spec: &'a AcquisitionSpec,
        profile: &'a SliceProfile,
        config: &TrainConfig,
    ) -> Result<PatchSampler<'a>> {
        let through = volume.through_axis_or_err()?;
        let in_plane = volume.in_plane_axes()?;
        let shape = volume.shape();
        let rows = config.hr_patch_rows;
        let cols = config.hr_patch_cols;
        for &axis in &in_plane {
            if shape[axis] < rows.max(cols) {
                return Err(Error::VolumeTooSmall(format!(
                    "in-plane extent {} along axis {axis} is below the patch size {}x{}",
                    shape[axis],
                    rows,
                    cols
                )));
            }
        }
        // Patches are cut from in-plane lines, which carry the HR
        // spacing; the profile lives on the same grid.
        let hr_spacing = volume.spacing[in_plane[0]];
        let other = volume.spacing[in_plane[1]];
        if (hr_spacing - other).abs() / hr_spacing > 1e-6 {
            return Err(Error::InvalidVolume(format!(
                "in-plane spacings differ ({hr_spacing} vs {other}); training assumes isotropic in-plane sampling"
            )));
        }
        let hr_grid = GridSpec1D::new(rows, hr_spacing, 0.0)?;
        Ok(PatchSampler {
            volume,
            spec,
            profile,
            rows,
            cols,
            through,
            in_plane,
            hr_grid,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    fn extract(&self, slice_idx: usize, row_axis: usize, r0: usize, c0: usize) -> Array2<f64> {
        let col_axis = if row_axis == self.in_plane[0] {
            self.in_plane[1]
        } else {
            self.in_plane[0]
        };
        Array2::from_shape_fn((self.rows, self.cols), |(r, c)| {
            let mut idx = [0usize; 3];
            idx[self.through] = slice_idx;
            idx[row_axis] = r0 + r;
            idx[col_axis] = c0 + c;
            self.volume.data[idx]
        })
    }

    /// Next patch pair. Positions are re-drawn up to 16 times while
    /// the HR patch is flat; the last draw is accepted regardless.
    pub fn next_pair(&mut self) -> PatchPair {
        let shape = self.volume.shape();
        let n_slices = shape[self.through];
        let mut hr = Array2::zeros((0, 0));
        let mut row_axis = self.in_plane[0];
        for attempt in 0..=PATCH_MAX_RETRIES {
            let slice_idx = self.rng.gen_range(0..n_slices);
            row_axis = self.in_plane[self.rng.gen_range(0..2usize)];
            let col_axis = if row_axis == self.in_plane[0] {
                self.in_plane[1]
            } else {
                self.in_plane[0]
            };
            let r0 = self.rng.gen_range(0..=shape[row_axis] - self.rows);
            let c0 = self.rng.gen_range(0..=shape[col_axis] - self.cols);
            hr = self.extract(slice_idx, row_axis, r0, c0);
            if attempt == PATCH_MAX_RETRIES || patch_std(&hr) > PATCH_STD_THRESHOLD {
                break;
            }
        }
        let lr = self.degrade(&hr);
        PatchPair {
            hr,
            lr,
            source_axis: row_axis,
        }
    }

    fn degrade(&self, hr: &Array2<f64>) -> Array2<f64> {
        let mut line = vec![0.0f64; self.rows];
        let mut lr: Option<Array2<f64>> = None;
        for c in 0..self.cols {
            for (r, v) in line.iter_mut().enumerate() {
                *v = hr[[r, c]];
            }
            let (out, _) = degrade_1d(&line, self.profile, self.spec, &self.hr_grid)
                .expect("patch geometry validated at construction");
            let lr = lr.get_or_insert_with(|| Array2::zeros((out.len(), self.cols)));
            for (r, v) in out.into_iter().enumerate() {
                lr[[r, c]] = v;
            }
        }
        lr.expect("at least one column")
    }
}

fn patch_std(patch: &Array2<f64>) -> f64 {
    let n = patch.len() as f64;
    let mean = patch.sum() / n;
    (patch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Draw `count` patch pairs (deterministic given the config seed).
pub fn sample_patches(
    volume: &Volume,
    spec: &AcquisitionSpec,
    profile: &SliceProfile,
    config: &TrainConfig,
    count: usize,
) -> Result<Vec<PatchPair>> {
    let mut sampler = PatchSampler::new(volume, spec, profile, config)?;
    Ok((0..count).map(|_| sampler.next_pair()).collect())
}

/// One-cycle learning rate: cosine ramp to `lr_max` over the first
/// 30% of steps, cosine anneal down afterwards. The peak step hits
/// `lr_max` exactly; the first and last steps sit well below
/// `lr_max / 10`.
pub fn one_cycle_lr(step: usize, total_steps: usize, lr_max: f64) -> f64 {
    let initial = lr_max / 25.0;
    let final_lr = lr_max / 1e4;
    if total_steps <= 1 {
        return lr_max;
    }
    let peak = ((total_steps - 1) as f64 * 0.3).round() as usize;
    if step <= peak {
        if peak == 0 {
            return lr_max;
        }
        let p = step as f64 / peak as f64;
        initial + (lr_max - initial) * (1.0 - (std::f64::consts::PI * p).cos()) / 2.0
    } else {
        let p = (step - peak) as f64 / (total_steps - 1 - peak) as f64;
        final_lr + (lr_max - final_lr) * (1.0 + (std::f64::consts::PI * p).cos()) / 2.0
    }
}

/// Per-step training record, one log line each.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

impl StepRecord {
    pub fn log_line(&self) -> String {
        format!("step={} lr={:e} loss={:e}", self.step, self.lr, self.loss)
    }
}

/// Train the SR network on self-supervised patch pairs. Returns the
/// trained network and the per-step loss records.
pub fn train(
    volume: &Volume,
    spec: &AcquisitionSpec,
    profile: &SliceProfile,
    config: &TrainConfig,
) -> Result<(SRNetwork<f32>, Vec<StepRecord>)> {
    if spec.ratio <= 1.0 {
        return Err(Error::InvalidSpec(format!(
            "training requires ratio > 1, got {}",
            spec.ratio
        )));
    }
    let mut sampler = PatchSampler::new(volume, spec, profile, config)?;
    let mut net = SRNetwork::<f32>::build(config.network_config(spec.ratio))?;
    let mut adam = Adam::<f32>::new();
    let steps = config.steps();
    let mut records = Vec::with_capacity(steps);

    let lr_rows = (config.hr_patch_rows as f64 / spec.ratio).round() as usize;
    let hr_rows = config.hr_patch_rows;
    let cols = config.hr_patch_cols;

    for step in 0..steps {
        let lr_rate = one_cycle_lr(step, steps, config.lr_max);
        let mut lr_batch = Array4::<f32>::zeros((config.batch_size, 1, lr_rows, cols));
        let mut hr_batch = Array4::<f32>::zeros((config.batch_size, 1, hr_rows, cols));
        for b in 0..config.batch_size {
            let pair = sampler.next_pair();
            debug_assert_eq!(pair.lr.dim().0, lr_rows);
            for r in 0..lr_rows {
                for c in 0..cols {
                    lr_batch[[b, 0, r, c]] = pair.lr[[r, c]] as f32;
                }
            }
            for r in 0..hr_rows {
                for c in 0..cols {
                    hr_batch[[b, 0, r, c]] = pair.hr[[r, c]] as f32;
                }
            }
        }
        let pred = net.forward_train(&lr_batch)?;
        let loss = mse(&pred, &hr_batch)? as f64;
        if !loss.is_finite() {
            let n = lr_batch.len() as f64;
            let batch_mean = lr_batch.iter().map(|&v| v as f64).sum::<f64>() / n;
            let batch_max = lr_batch.iter().fold(0.0f64, |a, &b| a.max((b as f64).abs()));
            return Err(Error::NonFiniteLoss {
                step,
                lr: lr_rate,
                batch_mean,
                batch_max,
            });
        }
        net.zero_grad();
        net.backward(&mse_grad(&pred, &hr_batch));
        adam.step(&mut net.params_mut(), lr_rate as f32);
        records.push(StepRecord {
            step,
            lr: lr_rate,
            loss,
        });
    }
    Ok((net, records))
}
