//! 1D interpolation kernels behind a common trait, registered by name.
//!
//! A kernel turns a sampled line into coefficients once (`prefilter`)
//! and is then evaluated at arbitrary fractional index positions.
//! The cubic B-spline variant prefilters so that it interpolates
//! (reproduces the samples exactly) rather than approximates.

use crate::error::Error;
use crate::Result;

/// How positions outside the input extent are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Mirror about the edge sample centers.
    Reflect,
    /// Out-of-range samples contribute zero.
    Zero,
}

/// Named interpolation kernel selectable at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpKernel {
    Nearest,
    Linear,
    CubicBSpline,
}

impl InterpKernel {
    pub fn from_name(name: &str) -> Option<InterpKernel> {
        registry()
            .iter()
            .find(|k| k.name() == name)
            .map(|k| match k.name() {
                "nearest" => InterpKernel::Nearest,
                "linear" => InterpKernel::Linear,
                _ => InterpKernel::CubicBSpline,
            })
    }

    pub fn name(&self) -> &'static str {
        self.strategy().name()
    }

    /// Resolve to the registered strategy implementation.
    pub fn strategy(&self) -> &'static dyn Kernel1D {
        match self {
            InterpKernel::Nearest => &NEAREST,
            InterpKernel::Linear => &LINEAR,
            InterpKernel::CubicBSpline => &CUBIC_BSPLINE,
        }
    }
}

/// Interpolation strategy: prefilter a line, then evaluate anywhere.
pub trait Kernel1D: Send + Sync {
    fn name(&self) -> &'static str;

    /// Convert samples into interpolation coefficients.
    fn prefilter(&self, samples: &[f64]) -> Vec<f64> {
        samples.to_vec()
    }

    /// Evaluate at fractional index `t` (0 = first sample).
    fn eval(&self, coeffs: &[f64], t: f64, boundary: Boundary) -> f64;
}

static NEAREST: Nearest = Nearest;
static LINEAR: Linear = Linear;
static CUBIC_BSPLINE: CubicBSpline = CubicBSpline;

/// All registered kernels.
pub fn registry() -> [&'static dyn Kernel1D; 3] {
    [&NEAREST, &LINEAR, &CUBIC_BSPLINE]
}

pub fn kernel_names() -> Vec<&'static str> {
    registry().iter().map(|k| k.name()).collect()
}

/// Fetch a coefficient at a possibly out-of-range index.
fn fetch(coeffs: &[f64], i: i64, boundary: Boundary) -> f64 {
    let n = coeffs.len() as i64;
    if (0..n).contains(&i) {
        return coeffs[i as usize];
    }
    match boundary {
        Boundary::Zero => 0.0,
        Boundary::Reflect => {
            if n == 1 {
                return coeffs[0];
            }
            // Mirror about sample centers 0 and n-1 (period 2n-2).
            let period = 2 * (n - 1);
            let mut m = i.rem_euclid(period);
            if m >= n {
                m = period - m;
            }
            coeffs[m as usize]
        }
    }
}

struct Nearest;

impl Kernel1D for Nearest {
    fn name(&self) -> &'static str {
        "nearest"
    }

    fn eval(&self, coeffs: &[f64], t: f64, boundary: Boundary) -> f64 {
        fetch(coeffs, t.round() as i64, boundary)
    }
}

struct Linear;

impl Kernel1D for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn eval(&self, coeffs: &[f64], t: f64, boundary: Boundary) -> f64 {
        let i0 = t.floor();
        let f = t - i0;
        let i0 = i0 as i64;
        (1.0 - f) * fetch(coeffs, i0, boundary) + f * fetch(coeffs, i0 + 1, boundary)
    }
}

struct CubicBSpline;

/// Cubic B-spline basis value at offset `u`.
fn bspline3(u: f64) -> f64 {
    let a = u.abs();
    if a < 1.0 {
        (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0
    } else if a < 2.0 {
        let b = 2.0 - a;
        b * b * b / 6.0
    } else {
        0.0
    }
}

impl Kernel1D for CubicBSpline {
    fn name(&self) -> &'static str {
        "cubic-bspline"
    }

    /// Recursive prefilter (mirror boundary) so evaluation at integer
    /// positions reproduces the input samples.
    fn prefilter(&self, samples: &[f64]) -> Vec<f64> {
        let n = samples.len();
        if n < 2 {
            return samples.to_vec();
        }
        let z: f64 = 3f64.sqrt() - 2.0;
        let gain = 6.0;
        let mut c: Vec<f64> = samples.iter().map(|v| v * gain).collect();

        // Causal initialization for mirror boundary conditions:
        // truncated geometric sum when the signal is long enough,
        // otherwise the exact closed form over the mirrored period.
        let horizon = (1e-17f64.ln() / z.abs().ln()).ceil() as usize;
        c[0] = if horizon < n {
            let mut sum = c[0];
            let mut zk = 1.0;
            for item in c.iter().take(horizon).skip(1) {
                zk *= z;
                sum += zk * item;
            }
            sum
        } else {
            let iz = 1.0 / z;
            let mut zk = z;
            let mut z2k = z.powi(n as i32 - 1);
            let mut sum = c[0] + z2k * c[n - 1];
            z2k *= z2k * iz;
            for item in c.iter().take(n - 1).skip(1) {
                sum += (zk + z2k) * item;
                zk *= z;
                z2k *= iz;
            }
            sum / (1.0 - zk * zk)
        };
        for k in 1..n {
            c[k] += z * c[k - 1];
        }
        c[n - 1] = (z / (z * z - 1.0)) * (c[n - 1] + z * c[n - 2]);
        for k in (0..n - 1).rev() {
            c[k] = z * (c[k + 1] - c[k]);
        }
        c
    }

    fn eval(&self, coeffs: &[f64], t: f64, boundary: Boundary) -> f64 {
        let base = t.floor() as i64;
        let mut v = 0.0;
        for k in (base - 1)..=(base + 2) {
            let w = bspline3(t - k as f64);
            if w != 0.0 {
                v += w * fetch(coeffs, k, boundary);
            }
        }
        v
    }
}

impl std::str::FromStr for InterpKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InterpKernel::from_name(s).ok_or_else(|| {
            Error::InvalidGrid(format!(
                "unknown kernel '{s}' (known: {})",
                kernel_names().join(", ")
            ))
        })
    }
}
