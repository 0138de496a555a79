use num_complex::Complex64;
use proptest::prelude::*;

use specobs::evolution;
use specobs::linalg::{self, CMatrix};
use specobs::spectral::{self, SpectralSystem, StateVector};

fn system_and_state() -> impl Strategy<Value = (SpectralSystem, StateVector)> {
    (2usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05f64..80.0, n),
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n),
            prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n),
        )
            .prop_map(move |(mut eigs, b, z)| {
                eigs.sort_by(f64::total_cmp);
                let b = CMatrix::from_fn(n, n, |j, k| {
                    let (re, im) = b[j * n + k];
                    Complex64::new(re, im)
                });
                let g = b.adjoint() * &b;
                let g = CMatrix::from_fn(n, n, |j, k| 0.5 * (g[(j, k)] + g[(k, j)].conj()));
                let mut z: Vec<Complex64> = z.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
                z[0] += Complex64::new(1.0, 0.0);
                (SpectralSystem::new(eigs, g, "prop").unwrap(), StateVector::new(z))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frequency_is_scale_invariant((sys, z) in system_and_state(), re in -5.0f64..5.0, im in 0.1f64..5.0) {
        let a = spectral::frequency(&z, &sys).unwrap();
        let b = spectral::frequency(&z.scaled(Complex64::new(re, im)), &sys).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn frequency_within_spectrum((sys, z) in system_and_state()) {
        let l = spectral::frequency(&z, &sys).unwrap();
        let e = sys.eigenvalues();
        prop_assert!(e[0] <= l && l <= e[e.len() - 1]);
    }

    #[test]
    fn residual_nonnegative_and_routes_agree((sys, z) in system_and_state()) {
        let fr = spectral::frequency_report(&z, &sys).unwrap();
        prop_assert!(fr.residual >= -1e-12 * fr.lambda_z.powi(2));
        let direct = spectral::residual_direct(&z, &sys).unwrap();
        prop_assert!((fr.residual - direct).abs() <= 1e-10 * fr.lambda_z.powi(2));
    }

    #[test]
    fn key_identity_holds((sys, z) in system_and_state(), lambda in -100.0f64..200.0) {
        prop_assert!(spectral::key_identity_gap(&z, lambda, &sys).unwrap() <= 1e-10);
    }

    #[test]
    fn shifted_norm_minimized_at_frequency((sys, z) in system_and_state(), offset in -10.0f64..10.0) {
        let l = spectral::frequency(&z, &sys).unwrap();
        let at = spectral::shifted_norm_sq(&z, sys.eigenvalues(), l);
        let off = spectral::shifted_norm_sq(&z, sys.eigenvalues(), l + offset);
        prop_assert!(off >= at * (1.0 - 1e-12));
    }

    #[test]
    fn integral_time_additivity((sys, z) in system_and_state(), t1 in 0.01f64..5.0, t2 in 0.01f64..5.0) {
        let whole = evolution::observability_integral(&z, &sys, t1 + t2).unwrap();
        let head = evolution::observability_integral(&z, &sys, t1).unwrap();
        let tail = evolution::observability_integral(&z.evolve(sys.eigenvalues(), t1), &sys, t2).unwrap();
        prop_assert!((whole - head - tail).abs() <= 1e-10 * whole);
        prop_assert!(head <= whole && head >= 0.0);
    }

    #[test]
    fn kernel_form_is_psd((sys, _z) in system_and_state(), t in 0.001f64..20.0) {
        let eigs = linalg::hermitian_eigenvalues(&evolution::kernel_form(&sys, t).unwrap()).unwrap();
        let top = eigs.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        prop_assert!(eigs[0] >= -1e-10 * top);
    }

    #[test]
    fn admissibility_with_sharp_constant((sys, z) in system_and_state(), t in 0.01f64..10.0) {
        let c = evolution::sharp_admissibility_constant(&sys, t).unwrap();
        let rep = evolution::admissibility_check(&z, &sys, t, c).unwrap();
        prop_assert!(rep.margin >= -1e-10 * c * z.norm_sq());
    }
}

#[test]
fn eigenvector_and_group_residuals_vanish() {
    let sys = SpectralSystem::new(vec![1.0, 4.0, 4.0, 9.0], CMatrix::identity(4, 4), "groups").unwrap();
    for k in 0..4 {
        assert_eq!(spectral::residual(&StateVector::basis(4, k), &sys).unwrap(), 0.0);
    }
    let z = StateVector::new(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(0.3, -1.1),
        Complex64::new(2.0, 0.7),
        Complex64::new(0.0, 0.0),
    ]);
    assert!(spectral::residual(&z, &sys).unwrap().abs() <= 1e-14);
}

#[test]
fn margin_non_decreasing_in_time_for_basis_state() {
    use specobs::coercivity::DecayFunction;
    use specobs::window;
    let sys = SpectralSystem::from_real(vec![1.0, 2.5], &[1.0, 0.2, 0.2, 0.5], "two").unwrap();
    let th = window::theta_constants(&window::cutoff_profile().unwrap()).unwrap();
    let psi = DecayFunction::constant(0.1).unwrap();
    let eps = DecayFunction::constant(0.5).unwrap();
    let z = StateVector::basis(2, 0);
    let t_min = window::solve_observation_time(1.0, &eps, &th).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for i in 0..20 {
        let t = t_min * (1.0 + 0.5 * i as f64);
        let rep = evolution::weak_observability_check(&z, &sys, t, &psi, &eps, &th).unwrap();
        assert!(rep.applicable);
        assert!(rep.margin >= prev);
        prev = rep.margin;
    }
    assert!(prev > 0.0);
}
