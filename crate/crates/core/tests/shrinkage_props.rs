use proptest::prelude::*;
use sphereshrink::minimax_audit::{probe_monotone, MonotoneProperty, MONOTONE_TOL};
use sphereshrink::numerics::geometric_grid;
use sphereshrink::radial_models::{Family, RadialDensity};
use sphereshrink::shrinkage::{
    phi_limit, phi_star, phi_star_sorted, phi_star_unit, RadialMultiplier, ShrinkageProfile,
};

fn builtins(p: usize) -> Vec<RadialDensity> {
    vec![
        RadialDensity::gaussian(p),
        RadialDensity::new(
            Family::PolyExp {
                alpha: 2.0,
                beta: 1.0,
            },
            p,
        )
        .unwrap(),
        RadialDensity::new(
            Family::PolyExp {
                alpha: 4.0,
                beta: 1.0,
            },
            p,
        )
        .unwrap(),
        RadialDensity::new(Family::MixtureDiff { a: 0.5, b: 0.5 }, p).unwrap(),
        RadialDensity::new(Family::MixtureDiff { a: 0.9, b: 0.5 }, p).unwrap(),
    ]
}

#[test]
fn unit_and_cumulative_forms_agree() {
    for p in [3usize, 5, 8] {
        for m in builtins(p) {
            for r in [0.05, 0.7, 3.0, 9.0] {
                let a = phi_star(&m, r).unwrap();
                let b = phi_star_unit(&m, r).unwrap();
                assert!((a - b).abs() <= 1e-10 * a, "{} r={r}", m.id());
            }
        }
    }
}

#[test]
fn conditional_monotonicity_of_ratio() {
    for p in [3usize, 4, 6] {
        for m in builtins(p) {
            let certified = probe_monotone(
                &m,
                MonotoneProperty::FOverT2fNonincreasing,
                None,
                MONOTONE_TOL,
            )
            .verdict
            .holds();
            if !certified {
                continue;
            }
            let grid = geometric_grid(1e-2, m.effective_support(), 200);
            let phi = phi_star_sorted(&m, &grid).unwrap();
            for j in 1..grid.len() {
                let prev = phi[j - 1] / (grid[j - 1] * grid[j - 1]);
                let cur = phi[j] / (grid[j] * grid[j]);
                assert!(cur <= prev + 1e-10, "{} at {}", m.id(), grid[j]);
            }
        }
    }
}

#[test]
fn estimate_examples() {
    let prof = ShrinkageProfile::new(&RadialDensity::gaussian(5)).unwrap();
    assert_eq!(prof.estimate(&[0.0; 5]), vec![0.0; 5]);
    let x = [10.0, 0.0, 0.0, 0.0, 0.0];
    let k = prof.estimate(&x)[0] / 10.0;
    assert!((k - 0.97).abs() < 0.002);
    assert!((prof.limit_value() - 3.0).abs() < 1e-12);
}

#[test]
fn poly_exp_limit_formula() {
    let (alpha, beta) = (3.0, 0.7);
    for p in [3usize, 6] {
        let m = RadialDensity::new(Family::PolyExp { alpha, beta }, p).unwrap();
        let pf = p as f64;
        let want = (pf - 2.0) * (pf + alpha) / (2.0 * beta * pf);
        assert!((phi_limit(&m).unwrap() - want).abs() < 1e-12 * want);
    }
    let m = RadialDensity::new(Family::MixtureDiff { a: 0.6, b: 0.3 }, 4).unwrap();
    let want = 2.0 * (1.0 - 0.6 * 0.3f64.powi(3)) / (1.0 - 0.6 * 0.3f64.powi(2));
    assert!((phi_limit(&m).unwrap() - want).abs() < 1e-12 * want);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phi_star_nondecreasing_and_bounded(alpha in 0.0f64..8.0, beta in 0.25f64..4.0, p in 3usize..9) {
        let m = RadialDensity::new(Family::PolyExp { alpha, beta }, p).unwrap();
        let grid = geometric_grid(1e-2 * m.scale(), m.effective_support(), 60);
        let phi = phi_star_sorted(&m, &grid).unwrap();
        for j in 0..grid.len() {
            prop_assert!(phi[j] > 0.0);
            prop_assert!(phi[j] / (grid[j] * grid[j]) < 1.0);
            if j > 0 {
                prop_assert!(phi[j] >= phi[j - 1] - 1e-10);
            }
        }
    }

    #[test]
    fn rotation_equivariance(a in 0.05f64..1.0, b in 0.05f64..0.95, theta in 0.0f64..6.283, x0 in -5.0f64..5.0, x1 in -5.0f64..5.0) {
        let m = RadialDensity::new(Family::MixtureDiff { a, b }, 3).unwrap();
        let prof = ShrinkageProfile::new(&m).unwrap();
        let x = [x0, x1, 0.7];
        let (s, c) = theta.sin_cos();
        let rot = |v: &[f64]| vec![c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]];
        let lhs = prof.estimate(&rot(&x));
        let rhs = rot(&prof.estimate(&x));
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() < 1e-12 * (1.0 + l.abs()));
        }
        let k = prof.multiplier((x0 * x0 + x1 * x1 + 0.49).sqrt());
        prop_assert!((0.0..1.0).contains(&k));
    }
}
