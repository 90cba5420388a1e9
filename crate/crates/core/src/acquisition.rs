//! Forward model of the 2D multi-slice acquisition: slice-profile
//! convolution followed by FOV-aware subsampling by the slice
//! separation ratio, plus the simulation harness built on it.

use crate::error::Error;
use crate::grid::{resample_1d, GridSpec1D};
use crate::interp::{Boundary, InterpKernel};
use crate::profile::{make_profile, profile_shape, SliceProfile};
use crate::volume::Volume;
use crate::Result;
use ndarray::{Array3, Axis};
use serde::{Deserialize, Serialize};

/// Slice geometry: thickness (profile FWHM), gap, HR target spacing,
/// and the derived separation and ratio.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub thickness: f64,
    pub gap: f64,
    pub hr_spacing: f64,
    pub lr_separation: f64,
    pub ratio: f64,
}

impl AcquisitionSpec {
    pub fn new(thickness: f64, gap: f64, hr_spacing: f64) -> Result<AcquisitionSpec> {
        if !(thickness > 0.0 && thickness.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "thickness must be positive, got {thickness}"
            )));
        }
        if !(gap >= 0.0 && gap.is_finite()) {
            return Err(Error::InvalidSpec(format!("gap must be non-negative, got {gap}")));
        }
        if !(hr_spacing > 0.0 && hr_spacing.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "hr spacing must be positive, got {hr_spacing}"
            )));
        }
        let lr_separation = thickness + gap;
        Ok(AcquisitionSpec {
            thickness,
            gap,
            hr_spacing,
            lr_separation,
            ratio: lr_separation / hr_spacing,
        })
    }

    /// Separation given directly (e.g. from file metadata) rather than
    /// as thickness + gap; the gap is the remainder.
    pub fn from_separation(separation: f64, thickness: f64, hr_spacing: f64) -> Result<AcquisitionSpec> {
        let gap = separation - thickness;
        if gap < -1e-9 {
            return Err(Error::InvalidSpec(format!(
                "separation {separation} is below thickness {thickness}"
            )));
        }
        AcquisitionSpec::new(thickness, gap.max(0.0), hr_spacing)
    }
}

/// Convolve with the profile taps using reflect boundary handling.
fn convolve_reflect(signal: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = signal.len() as i64;
    let center = (taps.len() / 2) as i64;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                let mut j = i + k as i64 - center;
                if n > 1 {
                    let period = 2 * (n - 1);
                    j = j.rem_euclid(period);
                    if j >= n {
                        j = period - j;
                    }
                } else {
                    j = 0;
                }
                acc += t * signal[j as usize];
            }
            acc
        })
        .collect()
}

/// The 1D forward model: blur by the slice profile, then FOV-aware
/// resample to the LR separation. Returns the LR signal and its grid.
pub fn degrade_1d(
    signal: &[f64],
    profile: &SliceProfile,
    spec: &AcquisitionSpec,
    input_grid: &GridSpec1D,
) -> Result<(Vec<f64>, GridSpec1D)> {
    if signal.len() != input_grid.count() {
        return Err(Error::LengthMismatch {
            signal: signal.len(),
            grid: input_grid.count(),
        });
    }
    let rel = (profile.tap_spacing() - input_grid.spacing()).abs() / input_grid.spacing();
    if rel > 1e-9 {
        return Err(Error::TapSpacingMismatch {
            tap_spacing: profile.tap_spacing(),
            grid_spacing: input_grid.spacing(),
        });
    }
    let blurred = convolve_reflect(signal, profile.taps());
    let out_spacing = spec.lr_separation * (input_grid.spacing() / spec.hr_spacing);
    let out_grid = input_grid.derive_output_grid(out_spacing)?;
    let lr = resample_1d(
        &blurred,
        input_grid,
        &out_grid,
        InterpKernel::Linear,
        Boundary::Reflect,
    )?;
    Ok((lr, out_grid))
}

/// Simulate a 2D multi-slice acquisition of an isotropic HR volume
/// along `axis` with the default profile (gaussian, FWHM = thickness).
pub fn simulate_acquisition(hr: &Volume, thickness: f64, gap: f64, axis: usize) -> Result<Volume> {
    if axis > 2 {
        return Err(Error::InvalidAxis { axis });
    }
    let hr_spacing = hr.spacing[axis];
    if thickness < hr_spacing {
        return Err(Error::ThicknessBelowSpacing {
            thickness,
            spacing: hr_spacing,
        });
    }
    let spec = AcquisitionSpec::new(thickness, gap, hr_spacing)?;
    let profile = make_profile(
        profile_shape("gaussian").unwrap(),
        thickness,
        21,
        hr_spacing,
    )?;
    simulate_with_profile(hr, &spec, &profile, axis)
}

/// Per-line forward model along `axis` with an explicit profile.
pub fn simulate_with_profile(
    hr: &Volume,
    spec: &AcquisitionSpec,
    profile: &SliceProfile,
    axis: usize,
) -> Result<Volume> {
    let in_grid = GridSpec1D::new(hr.data.len_of(Axis(axis)), hr.spacing[axis], 0.0)?;
    let out_spacing = spec.lr_separation * (in_grid.spacing() / spec.hr_spacing);
    let out_grid = in_grid.derive_output_grid(out_spacing)?;

    let mut shape = hr.shape();
    shape[axis] = out_grid.count();
    let mut out = Array3::<f64>::zeros(shape);

    let mut line = vec![0.0f64; in_grid.count()];
    for (lane_in, mut lane_out) in hr
        .data
        .lanes(Axis(axis))
        .into_iter()
        .zip(out.lanes_mut(Axis(axis)))
    {
        for (dst, src) in line.iter_mut().zip(lane_in.iter()) {
            *dst = *src;
        }
        let (lr, _) = degrade_1d(&line, profile, spec, &in_grid)?;
        for (dst, src) in lane_out.iter_mut().zip(lr) {
            *dst = src;
        }
    }

    let mut spacing = hr.spacing;
    spacing[axis] = spec.lr_separation;
    let mut vol = Volume::new(out, spacing, Some(axis))?;
    vol.intensity_scale = hr.intensity_scale;
    vol.disk_dtype = hr.disk_dtype;
    Ok(vol)
}
