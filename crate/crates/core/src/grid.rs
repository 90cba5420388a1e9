//! FOV-aware 1D sample grids and resampling.
//!
//! A grid places `count` samples with exact `spacing` symmetrically
//! about a fixed world-coordinate FOV `center`. Deriving an output
//! grid keeps the center and the requested spacing exactly and rounds
//! only the sample count, so the FOV extent may drift by at most one
//! output spacing. This differs from zoom-style schemes (which adjust
//! the spacing) and extent-anchored schemes (which shift the center).

use crate::error::Error;
use crate::interp::{Boundary, InterpKernel};
use crate::volume::Volume;
use crate::Result;
use ndarray::{Array3, Axis};

/// Samples on a fixed 1D world coordinate line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec1D {
    count: usize,
    spacing: f64,
    center: f64,
}

impl GridSpec1D {
    pub fn new(count: usize, spacing: f64, center: f64) -> Result<GridSpec1D> {
        if count < 1 {
            return Err(Error::InvalidGrid("count must be >= 1".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::InvalidGrid(format!("center must be finite, got {center}")));
        }
        Ok(GridSpec1D {
            count,
            spacing,
            center,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// World position of the first sample.
    pub fn first(&self) -> f64 {
        self.center - (self.spacing / 2.0) * (self.count as f64 - 1.0)
    }

    /// World position of sample `i`.
    pub fn position(&self, i: usize) -> f64 {
        self.first() + self.spacing * i as f64
    }

    /// FOV extent `[first - spacing/2, last + spacing/2]`.
    pub fn extent(&self) -> (f64, f64) {
        let half = self.spacing / 2.0;
        (self.first() - half, self.position(self.count - 1) + half)
    }

    /// Extent width `count * spacing`.
    pub fn extent_width(&self) -> f64 {
        self.count as f64 * self.spacing
    }

    /// Grid with the requested spacing, identical FOV center, and
    /// `N' = round(N * d_in / d_new)` samples (half rounds away from
    /// zero).
    pub fn derive_output_grid(&self, new_spacing: f64) -> Result<GridSpec1D> {
        if !(new_spacing > 0.0 && new_spacing.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "new spacing must be positive and finite, got {new_spacing}"
            )));
        }
        let count = (self.count as f64 * self.spacing / new_spacing).round();
        if count < 1.0 {
            return Err(Error::EmptyGrid {
                spacing: new_spacing,
            });
        }
        GridSpec1D::new(count as usize, new_spacing, self.center)
    }
}

/// Evaluate `signal` (sampled on `input`) at the positions of `output`.
pub fn resample_1d(
    signal: &[f64],
    input: &GridSpec1D,
    output: &GridSpec1D,
    kernel: InterpKernel,
    boundary: Boundary,
) -> Result<Vec<f64>> {
    if signal.len() != input.count() {
        return Err(Error::LengthMismatch {
            signal: signal.len(),
            grid: input.count(),
        });
    }
    let strategy = kernel.strategy();
    let coeffs = strategy.prefilter(signal);
    let first = input.first();
    let inv = 1.0 / input.spacing();
    Ok((0..output.count())
        .map(|i| {
            let t = (output.position(i) - first) * inv;
            strategy.eval(&coeffs, t, boundary)
        })
        .collect())
}

/// FOV-aware resampling of every line of `volume` along `axis`.
///
/// The axis spacing metadata is updated to `new_spacing`; all other
/// axes are untouched. Uses reflect boundary handling.
pub fn resample_along_axis(
    volume: &Volume,
    axis: usize,
    new_spacing: f64,
    kernel: InterpKernel,
) -> Result<Volume> {
    if axis > 2 {
        return Err(Error::InvalidAxis { axis });
    }
    let in_grid = GridSpec1D::new(volume.data.len_of(Axis(axis)), volume.spacing[axis], 0.0)?;
    let out_grid = in_grid.derive_output_grid(new_spacing)?;

    let mut shape = [
        volume.data.len_of(Axis(0)),
        volume.data.len_of(Axis(1)),
        volume.data.len_of(Axis(2)),
    ];
    shape[axis] = out_grid.count();
    let mut out = Array3::<f64>::zeros(shape);

    let mut line = vec![0.0f64; in_grid.count()];
    for (lane_in, mut lane_out) in volume
        .data
        .lanes(Axis(axis))
        .into_iter()
        .zip(out.lanes_mut(Axis(axis)))
    {
        for (dst, src) in line.iter_mut().zip(lane_in.iter()) {
            *dst = *src;
        }
        let res = resample_1d(&line, &in_grid, &out_grid, kernel, Boundary::Reflect)?;
        for (dst, src) in lane_out.iter_mut().zip(res) {
            *dst = src;
        }
    }

    let mut spacing = volume.spacing;
    spacing[axis] = new_spacing;
    Ok(Volume {
        data: out,
        spacing,
        through_axis: volume.through_axis,
        intensity_scale: volume.intensity_scale,
        disk_dtype: volume.disk_dtype,
    })
}
