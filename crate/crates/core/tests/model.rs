use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use superres::model::*;
use superres::synth;

fn brute_force_violations(xs: &[f64], n: usize, factor: f64) -> (Vec<(usize, usize)>, usize) {
    let threshold = factor * PI / n as f64;
    let mut pairs = Vec::new();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            if (xs[i].acos() - xs[j].acos()).abs() < threshold - 1e-12 {
                pairs.push((i, j));
            }
        }
    }
    let edge = (2.0 * PI / n as f64).cos();
    let outside = xs.iter().filter(|&&x| x.abs() > edge + 1e-12).count();
    (pairs, outside)
}

#[test]
fn window_edges_are_admissible() {
    let n = 64;
    let (lo, hi) = separation_window(n);
    let r = check_separation(&[lo, hi], n).unwrap();
    assert!(r.satisfied, "{r:?}");
    assert!(r.below_theorem_degree);
    assert!(!check_separation(&[1.0], n).unwrap().satisfied);
}

#[test]
fn out_of_domain_locations_are_rejected() {
    assert!(cheb_distance(1.5, 0.0).is_err());
    assert!(check_separation(&[0.0, -1.1], 128).is_err());
}

#[test]
fn step_derivative_has_tv_of_jumps() {
    let s = Spline::from_real(0, vec![-0.5, 0.25], vec![vec![1.0], vec![-2.0], vec![0.5]]).unwrap();
    let SplineDerivative::Diracs(d) = spline_distributional_derivative(&s) else {
        panic!("degree 0 differentiates to a Dirac train");
    };
    assert_eq!(d.len(), 2);
    assert!((tv_norm(&d) - 5.5).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cheb_distance_is_a_metric(x in -1.0f64..=1.0, y in -1.0f64..=1.0, z in -1.0f64..=1.0) {
        let dxy = cheb_distance(x, y).unwrap();
        prop_assert_eq!(dxy, cheb_distance(y, x).unwrap());
        prop_assert_eq!(cheb_distance(x, x).unwrap(), 0.0);
        if x != y {
            prop_assert!(dxy > 0.0);
        }
        prop_assert!(cheb_distance(x, z).unwrap() <= dxy + cheb_distance(y, z).unwrap() + 1e-15);
    }

    #[test]
    fn separation_matches_double_loop(
        xs in prop::collection::vec(-1.0f64..=1.0, 0..50),
        n in 4usize..200,
        factor in 0.5f64..6.0,
    ) {
        let report = check_separation_with(&xs, n, factor).unwrap();
        let (pairs, outside) = brute_force_violations(&xs, n, factor);
        prop_assert_eq!(&report.pair_violations, &pairs);
        prop_assert_eq!(report.domain_violations.len(), outside);
        prop_assert_eq!(report.satisfied, pairs.is_empty() && outside == 0);
    }

    #[test]
    fn step_tv_is_sum_of_jumps(values in prop::collection::vec(-3.0f64..3.0, 1..8)) {
        let m = values.len() - 1;
        let knots: Vec<f64> = (1..=m).map(|i| -1.0 + 2.0 * i as f64 / (m + 1) as f64).collect();
        let s = Spline::from_real(0, knots, values.iter().map(|&v| vec![v]).collect()).unwrap();
        let expected: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        match spline_distributional_derivative(&s) {
            SplineDerivative::Diracs(d) => prop_assert!((tv_norm(&d) - expected).abs() <= 1e-14 * expected.max(1.0)),
            SplineDerivative::Spline(_) => prop_assert!(false, "degree 0 must give Diracs"),
        }
    }

    #[test]
    fn derivative_spline_matches_finite_differences(seed in any::<u64>(), r in 1usize..=4, m in 1usize..=4) {
        let mut rng = synth::rng(seed);
        let s = synth::random_spline(&mut rng, r, m, 32, 4.0).unwrap();
        let SplineDerivative::Spline(d) = spline_distributional_derivative(&s) else {
            panic!("degree >= 1 differentiates to a spline");
        };
        let h = 1e-6;
        for i in 0..200 {
            let x = -0.999 + 1.998 * i as f64 / 199.0;
            if s.knots().iter().any(|k| (k - x).abs() < 4.0 * h) {
                continue;
            }
            let fd = (eval_spline(&s, x + h).unwrap() - eval_spline(&s, x - h).unwrap()) / (2.0 * h);
            let exact = eval_spline(&d, x).unwrap();
            prop_assert!((fd - exact).norm() <= 1e-5, "x = {x}: {fd} vs {exact}");
        }
    }

    #[test]
    fn scaling_a_measure_scales_its_tv(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = synth::rng(seed);
        let m = synth::complex_spikes(&mut rng, 5, 64, 4.0).unwrap();
        let c = Complex64::new(a, b);
        let scaled = m.scaled(c);
        prop_assert!((tv_norm(&scaled) - c.norm() * tv_norm(&m)).abs() <= 1e-12 * tv_norm(&m).max(1.0) * c.norm().max(1.0));
    }
}
