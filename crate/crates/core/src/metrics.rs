//! Reference-based evaluation: PSNR, SSIM, and consistency Dice.

use crate::error::Error;
use crate::io::LabelVolume;
use crate::volume::Volume;
use crate::Result;
use ndarray::{Array3, ArrayView3};
use std::collections::BTreeMap;

fn check_shapes(a: [usize; 3], b: [usize; 3]) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "axis sizes {}x{}x{} vs {}x{}x{}",
            a[0], a[1], a[2], b[0], b[1], b[2]
        )));
    }
    Ok(())
}

fn data_range(reference: &ArrayView3<f64>) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in reference.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// Peak signal-to-noise ratio in dB; the data range comes from the
/// reference volume. Identical inputs give +infinity.
pub fn psnr(reference: &Volume, test: &Volume) -> Result<f64> {
    check_shapes(reference.shape(), test.shape())?;
    let n = reference.data.len() as f64;
    let mse: f64 = reference
        .data
        .iter()
        .zip(test.data.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let range = data_range(&reference.data.view());
    Ok(10.0 * (range * range / mse).log10())
}

const SSIM_WINDOW: usize = 7;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Moving window sums over `w`-wide windows along every axis
/// (valid mode: each dimension shrinks by `w - 1`).
fn box_sum_3d(arr: &Array3<f64>, w: usize) -> Array3<f64> {
    let mut cur = arr.clone();
    for axis in 0..3 {
        let shape = cur.dim();
        let dims = [shape.0, shape.1, shape.2];
        let mut out_dims = dims;
        out_dims[axis] = dims[axis] - (w - 1);
        let mut out = Array3::<f64>::zeros((out_dims[0], out_dims[1], out_dims[2]));
        for (lane, mut lane_out) in cur
            .lanes(ndarray::Axis(axis))
            .into_iter()
            .zip(out.lanes_mut(ndarray::Axis(axis)))
        {
            let mut acc: f64 = lane.iter().take(w).sum();
            lane_out[0] = acc;
            for i in 1..lane.len() - (w - 1) {
                acc += lane[i + w - 1] - lane[i - 1];
                lane_out[i] = acc;
            }
        }
        cur = out;
    }
    cur
}

/// Mean local SSIM over a sliding uniform 7x7x7 window.
pub fn ssim(reference: &Volume, test: &Volume) -> Result<f64> {
    check_shapes(reference.shape(), test.shape())?;
    let shape = reference.shape();
    if shape.iter().any(|&d| d < SSIM_WINDOW) {
        return Err(Error::ShapeMismatch(format!(
            "volume {}x{}x{} smaller than the {SSIM_WINDOW}^3 SSIM window",
            shape[0], shape[1], shape[2]
        )));
    }
    let x = &reference.data;
    let y = &test.data;
    let n = (SSIM_WINDOW * SSIM_WINDOW * SSIM_WINDOW) as f64;
    let sum_x = box_sum_3d(x, SSIM_WINDOW);
    let sum_y = box_sum_3d(y, SSIM_WINDOW);
    let sum_xx = box_sum_3d(&(x * x), SSIM_WINDOW);
    let sum_yy = box_sum_3d(&(y * y), SSIM_WINDOW);
    let sum_xy = box_sum_3d(&(x * y), SSIM_WINDOW);

    let range = data_range(&x.view());
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);

    let mut total = 0.0;
    let mut count = 0usize;
    for (((( &sx, &sy), &sxx), &syy), &sxy) in sum_x
        .iter()
        .zip(sum_y.iter())
        .zip(sum_xx.iter())
        .zip(sum_yy.iter())
        .zip(sum_xy.iter())
    {
        let mx = sx / n;
        let my = sy / n;
        let vx = sxx / n - mx * mx;
        let vy = syy / n - my * my;
        let cov = sxy / n - mx * my;
        let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
        total += s;
        count += 1;
    }
    Ok(total / count as f64)
}

/// Consistency Dice: per-label overlap between two label volumes plus
/// the mean over labels present in either. A label absent from both
/// is reported as `None` and excluded from the mean; background (0)
/// is never scored.
pub fn cdsc(
    labels_hr: &LabelVolume,
    labels_sr: &LabelVolume,
) -> Result<(BTreeMap<i64, Option<f64>>, f64)> {
    check_shapes(labels_hr.shape(), labels_sr.shape())?;
    let mut counts: BTreeMap<i64, (u64, u64, u64)> = BTreeMap::new(); // (|A|, |B|, |A∩B|)
    for (&a, &b) in labels_hr.data.iter().zip(labels_sr.data.iter()) {
        if a != 0 {
            counts.entry(a).or_default().0 += 1;
        }
        if b != 0 {
            counts.entry(b).or_default().1 += 1;
        }
        if a != 0 && a == b {
            counts.entry(a).or_default().2 += 1;
        }
    }
    let mut per_label = BTreeMap::new();
    let mut total = 0.0;
    let mut scored = 0usize;
    for (label, (na, nb, ni)) in counts {
        if na + nb == 0 {
            per_label.insert(label, None);
            continue;
        }
        let d = 2.0 * ni as f64 / (na + nb) as f64;
        per_label.insert(label, Some(d));
        total += d;
        scored += 1;
    }
    let mean = if scored == 0 { f64::NAN } else { total / scored as f64 };
    Ok((per_label, mean))
}

/// Render the key-value metrics report.
pub fn format_report(
    psnr_db: Option<f64>,
    ssim: Option<f64>,
    cdsc: Option<&(BTreeMap<i64, Option<f64>>, f64)>,
) -> String {
    let mut out = String::new();
    if let Some(p) = psnr_db {
        if p.is_infinite() {
            out.push_str("psnr_db=inf\n");
        } else {
            out.push_str(&format!("psnr_db={p:.6}\n"));
        }
    }
    if let Some(s) = ssim {
        out.push_str(&format!("ssim={s:.6}\n"));
    }
    if let Some((per_label, mean)) = cdsc {
        out.push_str(&format!("cdsc_mean={mean:.6}\n"));
        for (label, d) in per_label {
            match d {
                Some(d) => out.push_str(&format!("cdsc_{label}={d:.6}\n")),
                None => out.push_str(&format!("cdsc_{label}=undefined\n")),
            }
        }
    }
    out
}
