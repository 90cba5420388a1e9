//! 3D scalar volumes with per-axis physical spacing.

use crate::error::Error;
use crate::Result;
use ndarray::Array3;

/// On-disk sample type, preserved across load/save.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiskDtype {
    F32,
    F64,
}

/// 3D scalar image with voxel spacing in mm and a designated
/// low-resolution (through-plane) axis when one is known.
#[derive(Debug, Clone)]
pub struct Volume {
    pub data: Array3<f64>,
    /// Per-axis voxel spacing in mm.
    pub spacing: [f64; 3],
    /// Low-resolution axis; `None` when inference was ambiguous.
    pub through_axis: Option<usize>,
    /// Normalization factor recorded by `normalize`, inverted on save.
    pub intensity_scale: f64,
    pub disk_dtype: DiskDtype,
}

impl Volume {
    pub fn new(data: Array3<f64>, spacing: [f64; 3], through_axis: Option<usize>) -> Result<Volume> {
        for s in spacing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidVolume(format!("non-positive spacing {s}")));
            }
        }
        if let Some(a) = through_axis {
            if a > 2 {
                return Err(Error::InvalidAxis { axis: a });
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidVolume("data contains non-finite values".into()));
        }
        Ok(Volume {
            data,
            spacing,
            through_axis,
            intensity_scale: 1.0,
            disk_dtype: DiskDtype::F64,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    pub fn through_axis_or_err(&self) -> Result<usize> {
        self.through_axis.ok_or(Error::AmbiguousAxis)
    }

    /// The two axes orthogonal to the through-plane axis.
    pub fn in_plane_axes(&self) -> Result<[usize; 2]> {
        let t = self.through_axis_or_err()?;
        let axes: Vec<usize> = (0..3).filter(|&a| a != t).collect();
        Ok([axes[0], axes[1]])
    }

    /// Infer the through-plane axis as the strictly largest spacing.
    pub fn infer_through_axis(spacing: &[f64; 3]) -> Option<usize> {
        let mut best = 0;
        for a in 1..3 {
            if spacing[a] > spacing[best] {
                best = a;
            }
        }
        let strict = (0..3).all(|a| a == best || spacing[a] < spacing[best]);
        strict.then_some(best)
    }

    /// Scale intensities by the 99.9th-percentile value, recording the
    /// factor in `intensity_scale`. No-op on an all-zero volume.
    pub fn normalize(&mut self) {
        let mut vals: Vec<f64> = self.data.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((vals.len() as f64 - 1.0) * 0.999).round() as usize;
        let p = vals[idx];
        if p > 0.0 {
            self.data.mapv_inplace(|v| v / p);
            self.intensity_scale *= p;
        }
    }

    /// Undo `normalize` using the recorded factor.
    pub fn denormalize(&mut self) {
        if self.intensity_scale != 1.0 {
            let s = self.intensity_scale;
            self.data.mapv_inplace(|v| v * s);
            self.intensity_scale = 1.0;
        }
    }
}
