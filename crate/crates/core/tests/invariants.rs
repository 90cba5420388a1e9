//! Property tests for the grid and forward-model contracts.

use proptest::prelude::*;
use tpsr::acquisition::{degrade_1d, AcquisitionSpec};
use tpsr::grid::{resample_1d, GridSpec1D};
use tpsr::interp::{Boundary, InterpKernel};
use tpsr::nn::output_rows;
use tpsr::profile::{make_profile, profile_shape};

proptest! {
    /// The derived grid keeps the FOV center bit-exactly.
    #[test]
    fn derived_grid_preserves_center(
        n in 1usize..200,
        d in 0.1f64..10.0,
        c in -100.0f64..100.0,
        d_new in 0.1f64..10.0,
    ) {
        let g = GridSpec1D::new(n, d, c).unwrap();
        if let Ok(out) = g.derive_output_grid(d_new) {
            prop_assert_eq!(out.center(), c);
            prop_assert_eq!(out.spacing(), d_new);
        }
    }

    /// Rounding the count drifts the FOV extent by at most one output
    /// spacing.
    #[test]
    fn extent_drift_bounded_by_new_spacing(
        n in 1usize..200,
        d in 0.1f64..10.0,
        d_new in 0.1f64..10.0,
    ) {
        let g = GridSpec1D::new(n, d, 0.0).unwrap();
        if let Ok(out) = g.derive_output_grid(d_new) {
            let drift = (out.extent_width() - g.extent_width()).abs();
            prop_assert!(drift <= d_new / 2.0 + 1e-9,
                "drift {} exceeds half the new spacing {}", drift, d_new);
        }
    }

    /// Deriving back to the original spacing recovers the count up to
    /// the rounding error: the intermediate count is off by at most
    /// half a sample, which maps back through the spacing ratio.
    #[test]
    fn round_trip_count_bounded_by_rounding(
        n in 2usize..200,
        d in 0.1f64..10.0,
        d_new in 0.1f64..10.0,
    ) {
        let g = GridSpec1D::new(n, d, 0.0).unwrap();
        if let Ok(mid) = g.derive_output_grid(d_new) {
            let back = mid.derive_output_grid(d).unwrap();
            let diff = (back.count() as f64 - n as f64).abs();
            let bound = 0.5 * d_new / d + 0.5;
            prop_assert!(diff <= bound + 1e-9,
                "count {} -> {} (bound {})", n, back.count(), bound);
        }
    }

    /// Every kernel reproduces constants under resampling.
    #[test]
    fn resampling_preserves_constants(
        n in 2usize..64,
        d_new in 0.2f64..5.0,
        value in -100.0f64..100.0,
        kernel_idx in 0usize..3,
    ) {
        let kernel = [InterpKernel::Nearest, InterpKernel::Linear, InterpKernel::CubicBSpline][kernel_idx];
        let g = GridSpec1D::new(n, 1.0, 0.0).unwrap();
        if let Ok(out) = g.derive_output_grid(d_new) {
            let sig = vec![value; n];
            let res = resample_1d(&sig, &g, &out, kernel, Boundary::Reflect).unwrap();
            for v in res {
                prop_assert!((v - value).abs() < 1e-8 * value.abs().max(1.0));
            }
        }
    }

    /// The forward model emits round(n / r) samples and never exceeds
    /// the input magnitude for non-negative profiles.
    #[test]
    fn degrade_count_and_energy(
        n in 21usize..80,
        thickness in 1.0f64..5.0,
        gap in 0.0f64..2.0,
    ) {
        let spec = AcquisitionSpec::new(thickness, gap, 1.0).unwrap();
        let profile = make_profile(profile_shape("gaussian").unwrap(), thickness, 21, 1.0).unwrap();
        let grid = GridSpec1D::new(n, 1.0, 0.0).unwrap();
        let sig: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.9).sin()).collect();
        if let Ok((lr, out_grid)) = degrade_1d(&sig, &profile, &spec, &grid) {
            let expect = (n as f64 / spec.ratio).round() as usize;
            prop_assert_eq!(lr.len(), expect);
            prop_assert_eq!(out_grid.count(), expect);
            let hr_max = sig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let lr_max = lr.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            prop_assert!(lr_max <= hr_max + 1e-9);
        }
    }

    /// The network output-row contract matches the grid rule.
    #[test]
    fn output_rows_matches_grid_rule(
        n in 8usize..64,
        r in 1.0f64..8.0,
    ) {
        let g = GridSpec1D::new(n, 1.0, 0.0).unwrap();
        let out = g.derive_output_grid(1.0 / r).unwrap();
        prop_assert_eq!(output_rows(n, r), out.count());
    }
}
