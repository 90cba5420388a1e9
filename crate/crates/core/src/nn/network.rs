//! The slice-to-slice SR model: a wide-activation residual CNN whose
//! head upsamples the LR axis by ceil(r) with a 1D sub-pixel shuffle
//! and then FOV-aware resamples to the exact (possibly non-integer)
//! target row count. A cubic-upsampled copy of the input is added as
//! a global residual, so the convolutional body learns only the
//! correction on top of interpolation.

use super::conv::Conv2d;
use super::Scalar;
use crate::error::Error;
use crate::grid::{resample_1d, GridSpec1D};
use crate::interp::{Boundary, InterpKernel};
use crate::Result;
use ndarray::{s, Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Training patches are 8 LR rows tall; smaller inputs are rejected.
pub const MIN_INPUT_ROWS: usize = 8;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SRNetworkConfig {
    pub channels: usize,
    pub blocks: usize,
    pub expansion: f64,
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SRNetworkConfig {
    fn default() -> Self {
        SRNetworkConfig {
            channels: 256,
            blocks: 16,
            expansion: 2.0,
            ratio: 1.0,
            seed: 0,
        }
    }
}

impl SRNetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.blocks == 0 {
            return Err(Error::InvalidConfig("channels and blocks must be positive".into()));
        }
        if !(self.ratio >= 1.0 && self.ratio.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ratio must be >= 1, got {}",
                self.ratio
            )));
        }
        let expanded = self.channels as f64 * self.expansion;
        if (expanded - expanded.round()).abs() > 1e-9 || expanded < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "channels * expansion must be a positive integer, got {expanded}"
            )));
        }
        Ok(())
    }

    /// Integer shuffle factor ceil(r).
    pub fn up_factor(&self) -> usize {
        (self.ratio.ceil() as usize).max(1)
    }

    pub fn expanded_channels(&self) -> usize {
        (self.channels as f64 * self.expansion).round() as usize
    }
}

struct ResBlock<F> {
    conv1: Conv2d<F>,
    conv2: Conv2d<F>,
    mask: Option<Array4<F>>,
}

impl<F: Scalar> ResBlock<F> {
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let mut t = self.conv1.forward(x);
        let mask = t.mapv(|v| if v > F::zero() { F::one() } else { F::zero() });
        t.zip_mut_with(&mask, |v, &m| *v = *v * m);
        if train {
            self.mask = Some(mask);
        }
        let t = self.conv2.forward(&t);
        x + &t
    }

    fn apply(&self, x: &Array4<F>) -> Array4<F> {
        let mut t = self.conv1.apply(x);
        t.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
        x + &self.conv2.apply(&t)
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let mut g = self.conv2.backward(grad);
        let mask = self.mask.take().expect("backward without forward");
        g.zip_mut_with(&mask, |v, &m| *v = *v * m);
        grad + &self.conv1.backward(&g)
    }
}

pub struct SRNetwork<F> {
    pub config: SRNetworkConfig,
    head: Conv2d<F>,
    blocks: Vec<ResBlock<F>>,
    tail: Conv2d<F>,
    cache: Option<ForwardCache<F>>,
}

struct ForwardCache<F> {
    down: Array2<F>,
    rows_in: usize,
    cols: usize,
    batch: usize,
}

/// Dense matrix applying an FOV-aware 1D resampling to the row axis,
/// built column-by-column from unit impulses so it is exactly linear
/// in the input line.
fn resample_matrix<F: Scalar>(
    input: &GridSpec1D,
    output: &GridSpec1D,
    kernel: InterpKernel,
) -> Array2<F> {
    let mut m = Array2::<F>::zeros((output.count(), input.count()));
    let mut e = vec![0.0f64; input.count()];
    for j in 0..input.count() {
        e[j] = 1.0;
        let col = resample_1d(&e, input, output, kernel, Boundary::Reflect)
            .expect("grid counts match by construction");
        e[j] = 0.0;
        for (i, v) in col.into_iter().enumerate() {
            m[[i, j]] = F::from_f64_(v);
        }
    }
    m
}

/// Output row count for `rows_in` LR rows at the configured ratio.
pub fn output_rows(rows_in: usize, ratio: f64) -> usize {
    (rows_in as f64 * ratio).round() as usize
}

impl<F: Scalar> SRNetwork<F> {
    /// Build the network topology with variance-preserving init
    /// seeded from the config.
    pub fn build(config: SRNetworkConfig) -> Result<SRNetwork<F>> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c = config.channels;
        let e = config.expanded_channels();
        let head = Conv2d::new(1, c, 1.0, &mut rng);
        let blocks = (0..config.blocks)
            .map(|_| ResBlock {
                conv1: Conv2d::new(c, e, 1.0, &mut rng),
                conv2: Conv2d::new(e, c, 1.0, &mut rng),
                mask: None,
            })
            .collect();
        // Small tail init keeps the initial output near the
        // interpolation baseline supplied by the global residual.
        let tail = Conv2d::new(c, config.up_factor(), 0.1, &mut rng);
        Ok(SRNetwork {
            config,
            head,
            blocks,
            tail,
            cache: None,
        })
    }

    /// Grids for the head: the post-shuffle row grid (index units)
    /// and the exact-ratio target grid.
    fn head_grids(&self, rows_in: usize) -> (GridSpec1D, GridSpec1D) {
        let k = self.config.up_factor();
        let shuffle = GridSpec1D::new(rows_in * k, 1.0, 0.0).expect("valid grid");
        let target = shuffle
            .derive_output_grid(k as f64 / self.config.ratio)
            .expect("ratio >= 1 keeps the grid non-empty");
        (shuffle, target)
    }

    /// Grids for the global residual: LR input rows to target rows.
    fn residual_grids(&self, rows_in: usize) -> (GridSpec1D, GridSpec1D) {
        let input = GridSpec1D::new(rows_in, 1.0, 0.0).expect("valid grid");
        let target = input
            .derive_output_grid(1.0 / self.config.ratio)
            .expect("ratio >= 1 keeps the grid non-empty");
        (input, target)
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows < MIN_INPUT_ROWS {
            return Err(Error::InvalidConfig(format!(
                "input has {rows} rows, below the minimum of {MIN_INPUT_ROWS}"
            )));
        }
        Ok(())
    }

    /// Training forward pass over a batch (b, 1, rows, cols); caches
    /// intermediates for `backward`.
    pub fn forward_train(&mut self, x: &Array4<F>) -> Result<Array4<F>> {
        let (b, c, h, w) = x.dim();
        assert_eq!(c, 1);
        self.check_rows(h)?;
        let mut f = self.head.forward(x);
        for block in &mut self.blocks {
            f = block.forward(&f, true);
        }
        let d = self.tail.forward(&f); // (b, K, h, w)
        let s_arr = shuffle_rows(&d);

        let (shuffle_grid, target) = self.head_grids(h);
        let down = resample_matrix::<F>(&shuffle_grid, &target, InterpKernel::Linear);
        let (in_grid, res_target) = self.residual_grids(h);
        let res_m = resample_matrix::<F>(&in_grid, &res_target, InterpKernel::CubicBSpline);

        let h_out = target.count();
        let mut out = Array4::<F>::zeros((b, 1, h_out, w));
        for bi in 0..b {
            let detail = down.dot(&s_arr.slice(s![bi, 0, .., ..]));
            let res = res_m.dot(&x.slice(s![bi, 0, .., ..]));
            out.slice_mut(s![bi, 0, .., ..]).assign(&(&detail + &res));
        }
        self.cache = Some(ForwardCache {
            down,
            rows_in: h,
            cols: w,
            batch: b,
        });
        Ok(out)
    }

    /// Backprop of `grad` (matching the forward output shape) into
    /// parameter gradients.
    pub fn backward(&mut self, grad: &Array4<F>) {
        let cache = self.cache.take().expect("backward without forward");
        let (b, w) = (cache.batch, cache.cols);
        let h = cache.rows_in;
        let k = self.config.up_factor();
        let mut g_d = Array4::<F>::zeros((b, k, h, w));
        for bi in 0..b {
            let g_s: Array2<F> = cache.down.t().dot(&grad.slice(s![bi, 0, .., ..])); // (h*k, w)
            for hi in 0..h {
                for ki in 0..k {
                    let row = g_s.slice(s![hi * k + ki, ..]);
                    g_d.slice_mut(s![bi, ki, hi, ..]).assign(&row);
                }
            }
        }
        let mut g = self.tail.backward(&g_d);
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g);
        }
        self.head.backward(&g);
    }

    /// Inference forward on a single 2D slice (LR axis first).
    pub fn infer(&self, slice: &Array2<F>) -> Result<Array2<F>> {
        let detail = self.infer_detail(slice)?;
        let (in_grid, target) = self.residual_grids(slice.dim().0);
        let res_m = resample_matrix::<F>(&in_grid, &target, InterpKernel::CubicBSpline);
        Ok(&detail + &res_m.dot(slice))
    }

    /// Inference forward returning only the learned detail (no global
    /// residual); the caller supplies the interpolated baseline.
    pub fn infer_detail(&self, slice: &Array2<F>) -> Result<Array2<F>> {
        let (h, w) = slice.dim();
        self.check_rows(h)?;
        let x = slice
            .to_owned()
            .into_shape_with_order((1, 1, h, w))
            .expect("reshape");
        let mut f = self.head.apply(&x);
        for block in &self.blocks {
            f = block.apply(&f);
        }
        let d = self.tail.apply(&f);
        let s_arr = shuffle_rows(&d);
        let (shuffle_grid, target) = self.head_grids(h);
        let down = resample_matrix::<F>(&shuffle_grid, &target, InterpKernel::Linear);
        Ok(down.dot(&s_arr.slice(s![0, 0, .., ..])))
    }

    pub fn zero_grad(&mut self) {
        self.head.zero_grad();
        for b in &mut self.blocks {
            b.conv1.zero_grad();
            b.conv2.zero_grad();
        }
        self.tail.zero_grad();
    }

    /// Zero every learnable parameter (the output then equals the
    /// interpolation baseline exactly).
    pub fn zero_params(&mut self) {
        for p in self.params_mut() {
            for v in p.value {
                *v = F::zero();
            }
        }
    }

    /// Named read-only parameter tensors in a fixed order.
    pub fn params(&self) -> Vec<(String, Vec<usize>, Vec<F>)> {
        let mut out = Vec::new();
        let push2 =
            |out: &mut Vec<(String, Vec<usize>, Vec<F>)>, name: String, a: &Array2<F>| {
                out.push((name, a.shape().to_vec(), a.iter().copied().collect()));
            };
        push2(&mut out, "head.weight".into(), &self.head.weight);
        out.push((
            "head.bias".into(),
            vec![self.head.bias.len()],
            self.head.bias.to_vec(),
        ));
        for (i, b) in self.blocks.iter().enumerate() {
            push2(&mut out, format!("block{i}.conv1.weight"), &b.conv1.weight);
            out.push((
                format!("block{i}.conv1.bias"),
                vec![b.conv1.bias.len()],
                b.conv1.bias.to_vec(),
            ));
            push2(&mut out, format!("block{i}.conv2.weight"), &b.conv2.weight);
            out.push((
                format!("block{i}.conv2.bias"),
                vec![b.conv2.bias.len()],
                b.conv2.bias.to_vec(),
            ));
        }
        push2(&mut out, "tail.weight".into(), &self.tail.weight);
        out.push((
            "tail.bias".into(),
            vec![self.tail.bias.len()],
            self.tail.bias.to_vec(),
        ));
        out
    }

    /// Mutable (value, gradient) slices for every parameter tensor,
    /// in the same fixed order as `params`.
    pub fn params_mut(&mut self) -> Vec<ParamMut<'_, F>> {
        let mut out = Vec::new();
        out.push(ParamMut {
            value: self.head.weight.as_slice_mut().expect("standard layout"),
            grad: self.head.grad_weight.as_slice_mut().expect("standard layout"),
        });
        out.push(ParamMut {
            value: self.head.bias.as_slice_mut().expect("standard layout"),
            grad: self.head.grad_bias.as_slice_mut().expect("standard layout"),
        });
        for b in &mut self.blocks {
            out.push(ParamMut {
                value: b.conv1.weight.as_slice_mut().expect("standard layout"),
                grad: b.conv1.grad_weight.as_slice_mut().expect("standard layout"),
            });
            out.push(ParamMut {
                value: b.conv1.bias.as_slice_mut().expect("standard layout"),
                grad: b.conv1.grad_bias.as_slice_mut().expect("standard layout"),
            });
            out.push(ParamMut {
                value: b.conv2.weight.as_slice_mut().expect("standard layout"),
                grad: b.conv2.grad_weight.as_slice_mut().expect("standard layout"),
            });
            out.push(ParamMut {
                value: b.conv2.bias.as_slice_mut().expect("standard layout"),
                grad: b.conv2.grad_bias.as_slice_mut().expect("standard layout"),
            });
        }
        out.push(ParamMut {
            value: self.tail.weight.as_slice_mut().expect("standard layout"),
            grad: self.tail.grad_weight.as_slice_mut().expect("standard layout"),
        });
        out.push(ParamMut {
            value: self.tail.bias.as_slice_mut().expect("standard layout"),
            grad: self.tail.grad_bias.as_slice_mut().expect("standard layout"),
        });
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, _, v)| v.len()).sum()
    }

    /// Convert parameters to a network of a different float type.
    pub fn cast<G: Scalar>(&self) -> SRNetwork<G> {
        let mut net = SRNetwork::<G>::build(self.config).expect("config already validated");
        let src = self.params();
        for (dst, (_, _, vals)) in net.params_mut().into_iter().zip(src.iter()) {
            for (d, s) in dst.value.iter_mut().zip(vals.iter()) {
                *d = G::from_f64_(s.to_f64_());
            }
        }
        net
    }
}

pub struct ParamMut<'a, F> {
    pub value: &'a mut [F],
    pub grad: &'a mut [F],
}

/// (b, k, h, w) -> (b, 1, h*k, w); channel k fills row offset k of
/// each k-group.
fn shuffle_rows<F: Scalar>(d: &Array4<F>) -> Array4<F> {
    let (b, k, h, w) = d.dim();
    let mut out = Array4::<F>::zeros((b, 1, h * k, w));
    for bi in 0..b {
        for ki in 0..k {
            for hi in 0..h {
                out.slice_mut(s![bi, 0, hi * k + ki, ..])
                    .assign(&d.slice(s![bi, ki, hi, ..]));
            }
        }
    }
    out
}

/// Mean squared error.
pub fn mse<F: Scalar>(pred: &Array4<F>, target: &Array4<F>) -> Result<F> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = F::from_usize(pred.len()).unwrap();
    let mut acc = F::zero();
    for (a, b) in pred.iter().zip(target.iter()) {
        let d = *a - *b;
        acc = acc + d * d;
    }
    Ok(acc / n)
}

/// Gradient of `mse` with respect to `pred`.
pub fn mse_grad<F: Scalar>(pred: &Array4<F>, target: &Array4<F>) -> Array4<F> {
    let n = F::from_usize(pred.len()).unwrap();
    let two = F::from_f64_(2.0);
    let mut g = pred - target;
    g.mapv_inplace(|v| two * v / n);
    g
}
