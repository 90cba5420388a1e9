//! Desk-scale experiment harness: trains the toy configuration on the
//! structured phantom and reports PSNR/SSIM against the cubic
//! baseline. Args: [seed] [total_patches]

use ndarray::Array3;
use std::time::Instant;
use tpsr::acquisition::{simulate_acquisition, AcquisitionSpec};
use tpsr::grid::{resample_1d, GridSpec1D};
use tpsr::inference::{baseline_interpolate, super_resolve, Provenance};
use tpsr::interp::{Boundary, InterpKernel};
use tpsr::metrics::{psnr, ssim};
use tpsr::phantom;
use tpsr::profile::{make_profile, profile_shape};
use tpsr::trainer::{train, TrainConfig};
use tpsr::volume::Volume;

fn align(vol: &Volume, target_len: usize) -> Volume {
    let axis = vol.through_axis_or_err().unwrap();
    let n = vol.shape()[axis];
    let in_grid = GridSpec1D::new(n, vol.spacing[axis], 0.0).unwrap();
    let out_grid = GridSpec1D::new(target_len, 1.0, 0.0).unwrap();
    let mut shape = vol.shape();
    shape[axis] = target_len;
    let mut out = Array3::<f64>::zeros(shape);
    let mut line = vec![0.0; n];
    for (lane_in, mut lane_out) in vol
        .data
        .lanes(ndarray::Axis(axis))
        .into_iter()
        .zip(out.lanes_mut(ndarray::Axis(axis)))
    {
        for (dst, src) in line.iter_mut().zip(lane_in.iter()) {
            *dst = *src;
        }
        let res = resample_1d(&line, &in_grid, &out_grid, InterpKernel::CubicBSpline, Boundary::Reflect)
            .unwrap();
        for (dst, src) in lane_out.iter_mut().zip(res) {
            *dst = src;
        }
    }
    let mut spacing = vol.spacing;
    spacing[axis] = 1.0;
    Volume::new(out, spacing, vol.through_axis).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let patches: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(50_000);

    let gt = phantom::structured(64, 7);
    let lr = simulate_acquisition(&gt, 4.0, 1.0, 2).unwrap();
    let spec = AcquisitionSpec::new(4.0, 1.0, 1.0).unwrap();
    let profile = make_profile(profile_shape("gaussian").unwrap(), 4.0, 21, 1.0).unwrap();

    let mut lrn = lr.clone();
    lrn.normalize();
    let mut cfg = TrainConfig::for_ratio(spec.ratio);
    cfg.total_patches = patches;
    cfg.batch_size = 64;
    cfg.channels = 32;
    cfg.blocks = 4;
    cfg.seed = seed;

    let t0 = Instant::now();
    let (net, records) = train(&lrn, &spec, &profile, &cfg).unwrap();
    let t_train = t0.elapsed().as_secs_f64();

    let prov = Provenance {
        spec,
        profile: "gaussian".into(),
        network: net.config,
        seed,
    };
    let t1 = Instant::now();
    let mut sr = super_resolve(&lrn, &net, &spec, prov).unwrap().volume;
    sr.denormalize();
    let t_infer = t1.elapsed().as_secs_f64();
    let base = baseline_interpolate(&lr, &spec).unwrap();

    let sr_a = align(&sr, 64);
    let base_a = align(&base, 64);
    println!(
        "seed {seed}: psnr {:.3} vs {:.3}, ssim {:.4} vs {:.4}, train {:.1}s, infer {:.1}s, final loss {:.3e}",
        psnr(&gt, &sr_a).unwrap(),
        psnr(&gt, &base_a).unwrap(),
        ssim(&gt, &sr_a).unwrap(),
        ssim(&gt, &base_a).unwrap(),
        t_train,
        t_infer,
        records.last().unwrap().loss,
    );
}
