use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specobs::coercivity::{self, DecayFunction, CLASS_CHECK_GRID};
use specobs::linalg::{self, CMatrix};
use specobs::spectral::{self, SpectralSystem, StateVector};
use specobs::square::{self, BoundaryPatch, GammaSpec, Side};

fn patch_system(n_max: u64) -> SpectralSystem {
    let gamma = GammaSpec::new(vec![BoundaryPatch::new(Side::Bottom, PI / 4.0, PI / 2.0).unwrap()]).unwrap();
    square::build_square_system(n_max, &gamma).unwrap()
}

#[test]
fn cluster_supported_states_stay_near_center() {
    let sys = patch_system(120);
    let mut r = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..2000 {
        let lambda = r.random_range(0.0..130.0);
        let beta = r.random_range(0.05..3.0);
        let idx = coercivity::enumerate_cluster(&sys, lambda, beta).unwrap();
        if idx.is_empty() {
            continue;
        }
        let z = StateVector::random_supported(sys.dim(), &idx, &mut r);
        let fr = spectral::frequency_report(&z, &sys).unwrap();
        assert!((fr.lambda_z - lambda).abs() < beta);
        assert!(fr.residual < 2.0 * beta * beta);
        assert!(fr.residual < beta * beta);
    }
}

#[test]
fn cluster_minimum_matches_sampling() {
    let sys = patch_system(400);
    let mut r = ChaCha8Rng::seed_from_u64(22);
    let mut checked = [0usize; 4];
    for (center, idx) in sys.eigenvalue_groups() {
        let size = idx.len();
        if !(2..=3).contains(&size) || checked[size] >= 3 {
            continue;
        }
        checked[size] += 1;
        let (min_eig, _) = coercivity::cluster_min_coercivity(&sys, &idx).unwrap();
        let g = linalg::submatrix(sys.gram(), &idx);
        let mut sampled = f64::INFINITY;
        for _ in 0..100_000 {
            let v = StateVector::random(size, &mut r);
            sampled = sampled.min(linalg::quadratic_form(&g, &v.coefficients) / v.norm_sq());
        }
        assert!(sampled >= min_eig - 1e-10, "center {center}");
        assert!(sampled - min_eig <= 1e-3, "center {center}: sampled {sampled} vs {min_eig}");
    }
    assert!(checked[2] > 0 && checked[3] > 0);
}

#[test]
fn shift_property_from_eigenvalue_centers() {
    let sys = patch_system(150);
    let eps = 0.5;
    let lambda_max = *sys.eigenvalues().last().unwrap();
    let reports = coercivity::coercivity_scan(&sys, eps, lambda_max).unwrap();
    let psi = coercivity::fit_psi_envelope(&reports).unwrap();
    let mut scanned = 0;
    for i in 0..3000 {
        let lambda = 0.05 * i as f64;
        let idx = coercivity::enumerate_cluster(&sys, lambda, eps / 2.0).unwrap();
        if idx.is_empty() {
            continue;
        }
        scanned += 1;
        let (m, _) = coercivity::cluster_min_coercivity(&sys, &idx).unwrap();
        assert!(m >= psi.eval(lambda + eps / 2.0) * (1.0 - 1e-10), "λ = {lambda}");
    }
    assert!(scanned > 100);
}

#[test]
fn transformed_certificates_are_admissible_decay_functions() {
    let sys = patch_system(80);
    let lambda_max = *sys.eigenvalues().last().unwrap();
    let p = coercivity::certificate_pipeline(&sys, 0.5, lambda_max).unwrap();
    for f in [&p.spectral.epsilon, &p.spectral.psi] {
        f.check_class(&CLASS_CHECK_GRID).unwrap();
        let vals: Vec<f64> = CLASS_CHECK_GRID.iter().map(|&l| f.eval(l)).collect();
        assert!(vals.iter().all(|&v| v > 0.0));
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    }
    let back = coercivity::spectral_to_weak(&p.spectral, lambda_max).unwrap();
    assert!(matches!(back.epsilon, DecayFunction::Constant { .. }));
}

#[test]
fn partially_unobserved_system_is_not_weakly_coercive() {
    let n = 3;
    let mut g = CMatrix::zeros(n, n);
    g[(0, 0)] = Complex64::new(1.0, 0.0);
    g[(2, 2)] = Complex64::new(1.0, 0.0);
    let sys = SpectralSystem::new(vec![1.0, 5.0, 9.0], g, "gap").unwrap();
    let err = coercivity::certificate_pipeline(&sys, 0.5, 9.0).unwrap_err();
    assert!(matches!(err, specobs::Error::NotWeaklyCoercive { .. }), "{err}");
}

#[test]
fn violation_search_is_deterministic() {
    let sys = patch_system(60);
    let lambda_max = *sys.eigenvalues().last().unwrap();
    let p = coercivity::certificate_pipeline(&sys, 0.5, lambda_max).unwrap();
    let mut inflated = p.spectral.clone();
    inflated.psi = DecayFunction::Scaled { factor: 10.0, inner: Box::new(p.spectral.psi.clone()) };
    let a = coercivity::spectral_coercivity_violation_search(&sys, &inflated, 3000, 99).unwrap().unwrap();
    let b = coercivity::spectral_coercivity_violation_search(&sys, &inflated, 3000, 99).unwrap().unwrap();
    assert_eq!(a.trial, b.trial);
    assert_eq!(a.deficit.to_bits(), b.deficit.to_bits());
    assert_eq!(a.z.coefficients, b.z.coefficients);
}
