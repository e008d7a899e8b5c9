use num_complex::Complex64;
use proptest::prelude::*;
use superres::basis::*;
use superres::model::*;
use superres::spike::*;
use superres::synth;

fn max_errors(got: &DiracMeasure, truth: &DiracMeasure) -> (f64, f64) {
    assert_eq!(got.len(), truth.len(), "support size {} vs {}", got.len(), truth.len());
    got.atoms().iter().zip(truth.atoms()).fold((0.0f64, 0.0f64), |(l, w), (a, b)| {
        (
            l.max(cheb_distance(a.location, b.location).unwrap()),
            w.max((a.weight - b.weight).norm() / b.weight.norm()),
        )
    })
}

#[test]
fn round_trip_in_every_basis() {
    for (kind, n, m) in [(BasisKind::Chebyshev, 128, 10), (BasisKind::Legendre, 128, 10), (BasisKind::Monomial, 20, 3)] {
        for seed in 0..5 {
            let mut rng = synth::rng(seed);
            let truth = synth::complex_spikes(&mut rng, m, n, 4.0).unwrap();
            let y = moments_of_dirac(&truth, BasisSpec::new(kind, n));
            let got = recover_spikes(&y, &SolverOptions::default()).unwrap();
            let (l, w) = max_errors(&got, &truth);
            assert!(l <= 1e-8 && w <= 1e-6, "{kind} seed {seed}: location {l:e}, weight {w:e}");
        }
    }
}

#[test]
fn zero_moments_give_the_empty_measure() {
    let y = MomentVector::zeros(BasisSpec::chebyshev(32));
    assert!(recover_spikes(&y, &SolverOptions::default()).unwrap().is_empty());
    assert!(tv_lp_recover(&y, &SolverOptions::lp()).unwrap().is_empty());
}

#[test]
fn too_many_atoms_for_the_pencil() {
    let mut rng = synth::rng(3);
    let truth = synth::complex_spikes(&mut rng, 6, 64, 4.0).unwrap();
    let y = moments_of_dirac(&truth, BasisSpec::chebyshev(64));
    let s = recast_moments(&y).unwrap();
    let opts = SolverOptions { max_model_order: Some(2), ..SolverOptions::default() };
    assert!(matches!(matrix_pencil(&s, &opts), Err(superres::Error::OrderEstimation { .. })));
}

#[test]
fn lp_refuses_complex_moments() {
    let mut rng = synth::rng(5);
    let truth = synth::complex_spikes(&mut rng, 3, 32, 4.0).unwrap();
    let y = moments_of_dirac(&truth, BasisSpec::chebyshev(32));
    assert!(matches!(tv_lp_recover(&y, &SolverOptions::lp()), Err(superres::Error::InvalidInput(_))));
}

#[test]
fn lp_recovers_nonnegative_pairs_without_separation() {
    let n = 64;
    let g = 16 * n + 1;
    let grid = lp_grid(g);
    // one grid-t apart is pi / N, a quarter of the separation threshold
    let truth = DiracMeasure::from_real([(grid[400].cos(), 1.0), (grid[416].cos(), 0.7)]).unwrap();
    let y = moments_of_dirac(&truth, BasisSpec::chebyshev(n));
    let opts = SolverOptions { lp_nonnegative: true, ..SolverOptions::lp() };
    let got = tv_lp_recover(&y, &opts).unwrap();
    let (l, w) = max_errors(&got, &truth);
    assert!(l <= 1e-6 && w <= 1e-6, "{got:?}");
}

#[test]
fn random_input_is_inconsistent() {
    let n = 32;
    let values: Vec<f64> = (0..=n).map(|k| ((k * 7919 % 101) as f64 / 50.0) - 1.0).collect();
    let y = MomentVector::from_real(BasisSpec::chebyshev(n), &values).unwrap();
    match recover_spikes(&y, &SolverOptions::default()) {
        Err(superres::Error::RecoveryInconsistent { .. }) | Err(superres::Error::IllPosed(_)) => {}
        other => panic!("expected an inconsistency, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pencil_is_basis_invariant(seed in any::<u64>(), m in 1usize..=8) {
        let n = 128;
        let mut rng = synth::rng(seed);
        let truth = synth::complex_spikes(&mut rng, m, n, 4.0).unwrap();
        let opts = SolverOptions::default();
        let a = recover_spikes(&moments_of_dirac(&truth, BasisSpec::chebyshev(n)), &opts).unwrap();
        let b = recover_spikes(&moments_of_dirac(&truth, BasisSpec::legendre(n)), &opts).unwrap();
        let (l, w) = max_errors(&a, &b);
        prop_assert!(l <= 1e-8 && w <= 1e-8, "location {l:e}, weight {w:e}");
    }

    #[test]
    fn pencil_is_scale_equivariant(seed in any::<u64>(), m in 1usize..=8, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let scale = Complex64::new(re, im);
        prop_assume!(scale.norm() > 1e-3);
        let n = 64;
        let mut rng = synth::rng(seed);
        let truth = synth::complex_spikes(&mut rng, m, n, 4.0).unwrap();
        let y = moments_of_dirac(&truth, BasisSpec::chebyshev(n));
        let opts = SolverOptions::default();
        let base = recover_spikes(&y, &opts).unwrap();
        let scaled = recover_spikes(&y.scaled(scale), &opts).unwrap();
        prop_assert_eq!(base.len(), scaled.len());
        for (p, q) in base.atoms().iter().zip(scaled.atoms()) {
            prop_assert!((p.location - q.location).abs() <= 1e-9);
            prop_assert!((p.weight * scale - q.weight).norm() <= 1e-9 * scale.norm());
        }
    }

    #[test]
    fn lp_never_beats_the_truth(seed in any::<u64>(), m in 1usize..=6) {
        let n = 48;
        let g = 16 * n + 1;
        let mut rng = synth::rng(seed);
        let truth = synth::grid_spikes(&mut rng, m, n, 4.0, g, false).unwrap();
        let y = moments_of_dirac(&truth, BasisSpec::chebyshev(n));
        let sol = tv_lp_solve(&y, &SolverOptions::lp()).unwrap();
        prop_assert!(sol.objective <= tv_norm(&truth) + 1e-7);
        let fwd = moments_of_dirac(&sol.measure, BasisSpec::chebyshev(n));
        let err: f64 = fwd.values().iter().zip(y.values()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-7 * y.norm());
        let (l, w) = max_errors(&sol.measure, &truth);
        prop_assert!(l <= 1e-6 && w <= 1e-6);
    }
}
