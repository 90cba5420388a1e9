//! Slice selection profiles: parametric construction and file I/O.
//!
//! A profile is a discrete low-pass kernel whose taps live on the HR
//! grid. Parametric shapes are registered by name; externally
//! estimated profiles (e.g. from an adversarial profile estimator)
//! are loaded from the text format documented at `save_profile`.

use crate::error::Error;
use crate::Result;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Discrete slice profile with tap spacing and measured FWHM (mm).
#[derive(Debug, Clone)]
pub struct SliceProfile {
    taps: Vec<f64>,
    tap_spacing: f64,
    fwhm: f64,
    has_negative: bool,
}

impl SliceProfile {
    /// Normalizes the taps to sum 1; negative taps are flagged, not
    /// rejected.
    pub fn from_taps(taps: Vec<f64>, tap_spacing: f64) -> Result<SliceProfile> {
        if taps.len() % 2 == 0 {
            return Err(Error::InvalidProfile(format!(
                "tap count must be odd, got {}",
                taps.len()
            )));
        }
        if !(tap_spacing > 0.0 && tap_spacing.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "tap spacing must be positive, got {tap_spacing}"
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidProfile("non-finite tap value".into()));
        }
        let sum: f64 = taps.iter().sum();
        if sum.abs() < 1e-12 {
            return Err(Error::InvalidProfile("taps sum to zero".into()));
        }
        let taps: Vec<f64> = taps.iter().map(|t| t / sum).collect();
        let has_negative = taps.iter().any(|&t| t < 0.0);
        if has_negative {
            log::warn!("slice profile has negative taps");
        }
        let fwhm = measure_fwhm(&taps, tap_spacing);
        Ok(SliceProfile {
            taps,
            tap_spacing,
            fwhm,
            has_negative,
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn tap_spacing(&self) -> f64 {
        self.tap_spacing
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm
    }

    pub fn has_negative_taps(&self) -> bool {
        self.has_negative
    }
}

/// FWHM of the tap envelope. Crossings are bracketed between
/// adjacent taps and refined by bisection on the cubic-interpolated
/// envelope; pure linear interpolation overshoots noticeably at
/// coarse tap spacings.
fn measure_fwhm(taps: &[f64], spacing: f64) -> f64 {
    let n = taps.len();
    let (imax, &vmax) = taps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    let half = vmax / 2.0;
    let kernel = crate::interp::InterpKernel::CubicBSpline.strategy();
    let coeffs = kernel.prefilter(taps);
    let cross = |mut lo: f64, mut hi: f64| {
        // Invariant: envelope(hi) >= half >= envelope(lo).
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if kernel.eval(&coeffs, mid, crate::interp::Boundary::Reflect) >= half {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut left = imax as f64 - 0.5;
    for i in (0..imax).rev() {
        if taps[i] <= half {
            left = cross(i as f64, (i + 1) as f64);
            break;
        }
        if i == 0 {
            left = -0.5;
        }
    }
    let mut right = imax as f64 + 0.5;
    for i in imax + 1..n {
        if taps[i] <= half {
            right = cross(i as f64, (i - 1) as f64);
            break;
        }
        if i == n - 1 {
            right = n as f64 - 0.5;
        }
    }
    (right - left) * spacing
}

/// Parametric profile shape, registered by name.
pub trait ProfileShape: Send + Sync {
    fn name(&self) -> &'static str;

    /// Unnormalized tap weight for the cell centered at `pos` with
    /// width `cell` for a profile of the given FWHM (all mm).
    fn tap(&self, fwhm: f64, pos: f64, cell: f64) -> f64;
}

struct Gaussian;

impl ProfileShape for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn tap(&self, fwhm: f64, pos: f64, _cell: f64) -> f64 {
        let sigma = fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
        (-pos * pos / (2.0 * sigma * sigma)).exp()
    }
}

struct Rect;

impl ProfileShape for Rect {
    fn name(&self) -> &'static str {
        "rect"
    }

    fn tap(&self, fwhm: f64, pos: f64, cell: f64) -> f64 {
        // Fractional overlap of the tap cell with [-fwhm/2, fwhm/2].
        let lo = (pos - cell / 2.0).max(-fwhm / 2.0);
        let hi = (pos + cell / 2.0).min(fwhm / 2.0);
        ((hi - lo) / cell).max(0.0)
    }
}

static GAUSSIAN: Gaussian = Gaussian;
static RECT: Rect = Rect;

pub fn shape_registry() -> [&'static dyn ProfileShape; 2] {
    [&GAUSSIAN, &RECT]
}

pub fn profile_shape(name: &str) -> Option<&'static dyn ProfileShape> {
    shape_registry().into_iter().find(|s| s.name() == name)
}

/// Build a parametric profile sampled at `taps` positions spaced
/// `tap_spacing_mm` apart on the HR grid, normalized to sum 1.
pub fn make_profile(
    shape: &dyn ProfileShape,
    fwhm_mm: f64,
    taps: usize,
    tap_spacing_mm: f64,
) -> Result<SliceProfile> {
    if taps % 2 == 0 || taps == 0 {
        return Err(Error::InvalidProfile(format!(
            "tap count must be odd and positive, got {taps}"
        )));
    }
    if !(fwhm_mm > 0.0 && fwhm_mm.is_finite()) {
        return Err(Error::InvalidProfile(format!("fwhm must be positive, got {fwhm_mm}")));
    }
    if (taps as f64) * tap_spacing_mm < fwhm_mm {
        return Err(Error::InvalidProfile(format!(
            "fwhm {fwhm_mm} mm exceeds the filter support {} mm",
            taps as f64 * tap_spacing_mm
        )));
    }
    let center = (taps - 1) as f64 / 2.0;
    let values: Vec<f64> = (0..taps)
        .map(|i| shape.tap(fwhm_mm, (i as f64 - center) * tap_spacing_mm, tap_spacing_mm))
        .collect();
    SliceProfile::from_taps(values, tap_spacing_mm)
}

/// Load a profile from the text format; renormalizes with a warning
/// if the stored taps did not sum to 1.
pub fn load_profile(path: &Path) -> Result<SliceProfile> {
    let malformed = |reason: &str| Error::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    };
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| malformed("empty file"))??;
    let spacing: f64 = header
        .strip_prefix("# tap_spacing_mm=")
        .ok_or_else(|| malformed("first line must be '# tap_spacing_mm=<decimal>'"))?
        .trim()
        .parse()
        .map_err(|_| malformed("unparseable tap spacing"))?;
    let mut taps = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| malformed(&format!("unparseable tap value '{line}'")))?;
        taps.push(v);
    }
    let sum: f64 = taps.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        log::warn!(
            "profile {} sums to {sum}, renormalizing",
            path.display()
        );
    }
    SliceProfile::from_taps(taps, spacing)
}

/// Write the profile text format: a `# tap_spacing_mm=` header line
/// followed by one tap value per line, 17 significant digits.
pub fn save_profile(profile: &SliceProfile, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# tap_spacing_mm={:.16e}", profile.tap_spacing())?;
    for t in profile.taps() {
        writeln!(f, "{t:.16e}")?;
    }
    Ok(())
}
