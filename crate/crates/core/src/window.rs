//! The time cutoff `χ(s) = (1−|s|)e^{−2|s|}` on `(−1, 1)`, its Fourier
//! transform, the constants derived from it, and the frequency-domain
//! quantities of a windowed trajectory `x(t) = χ(t/T) e^{itA} z0`.
//!
//! Fourier convention: `χ̂(τ) = ∫ χ(s) e^{−iτs} ds`, so `χ̂_T(s) = T·χ̂(Ts)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::coercivity::DecayFunction;
use crate::error::{domain, Error, Result};
use crate::quadrature::{self, QuadOptions};
use crate::spectral::{self, SpectralSystem, StateVector};

/// Lower Fourier bound constant, `4/(3π)`.
pub const KAPPA1: f64 = 4.0 / (3.0 * PI);
/// Upper Fourier bound constant.
pub const KAPPA2: f64 = 6.0;

pub fn chi(s: f64) -> f64 {
    let a = s.abs();
    if a < 1.0 {
        (1.0 - a) * (-2.0 * a).exp()
    } else {
        0.0
    }
}

/// `χ̇(s) = −sign(s)(3 − 2|s|)e^{−2|s|}` on `(−1, 1)`; 0 at the kink and outside.
pub fn chi_dot(s: f64) -> f64 {
    let a = s.abs();
    if a < 1.0 && s != 0.0 {
        -s.signum() * (3.0 - 2.0 * a) * (-2.0 * a).exp()
    } else {
        0.0
    }
}

/// Closed form `χ̂(τ) = 2 Re[(a − 1 + e^{−a})/a²]`, `a = 2 + iτ`.
pub fn chi_hat(tau: f64) -> f64 {
    let a = Complex64::new(2.0, tau);
    let num = a - 1.0 + (-a).exp();
    2.0 * (num / (a * a)).re
}

/// `χ̂_T(s) = T·χ̂(Ts)`.
pub fn chi_hat_scaled(t: f64, s: f64) -> f64 {
    t * chi_hat(t * s)
}

/// `χ̂(τ)` by adaptive quadrature of `2∫₀¹ (1−s)e^{−2s} cos(τs) ds`.
pub fn chi_hat_quadrature(tau: f64, abs_tol: f64) -> Result<f64> {
    let r = quadrature::integrate(
        |s| (1.0 - s) * (-2.0 * s).exp() * (tau * s).cos(),
        0.0,
        1.0,
        QuadOptions { abs_tol: abs_tol / 2.0, rel_tol: 0.0, max_intervals: 100_000 },
    )?;
    Ok(2.0 * r.value)
}

/// Norms of the cutoff and the Fourier bound constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CutoffProfile {
    pub l2_norm_sq: f64,
    pub l2_deriv_norm_sq: f64,
    pub linf_norm: f64,
    pub linf_deriv_norm: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

pub fn cutoff_profile() -> Result<CutoffProfile> {
    let opts = QuadOptions::abs(1e-12);
    let breaks = [-1.0, 0.0, 1.0];
    let l2_norm_sq = quadrature::integrate_with_breaks(|s| chi(s).powi(2), &breaks, opts)?.value;
    let l2_deriv_norm_sq = quadrature::integrate_with_breaks(|s| chi_dot(s).powi(2), &breaks, opts)?.value;
    // |χ| and |χ̇| are both maximal at the kink s = 0 (the latter one-sided)
    let samples = (0..=20_000).map(|i| i as f64 / 20_000.0);
    let linf_norm = samples.clone().map(chi).fold(0.0, f64::max);
    let linf_deriv_norm = samples
        .map(|a| (3.0 - 2.0 * a) * (-2.0 * a).exp())
        .fold(0.0, f64::max);
    Ok(CutoffProfile {
        l2_norm_sq,
        l2_deriv_norm_sq,
        linf_norm,
        linf_deriv_norm,
        kappa1: KAPPA1,
        kappa2: KAPPA2,
    })
}

/// Which norm of `χ̇` enters the denominator of θ₁.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum Theta1Variant {
    /// `4‖χ‖²_{L²}/‖χ̇‖²_{L²}`
    #[default]
    L2,
    /// `4‖χ‖²_{L²}/‖χ̇‖²_{L∞}`
    LInf,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaConstants {
    pub c0: f64,
    pub c0_prime: f64,
    pub theta0: f64,
    /// θ₁ in the active variant.
    pub theta1: f64,
    pub theta1_l2: f64,
    pub theta1_linf: f64,
    pub theta2: f64,
    pub variant: Theta1Variant,
}

impl ThetaConstants {
    pub fn with_variant(mut self, variant: Theta1Variant) -> Self {
        self.variant = variant;
        self.theta1 = match variant {
            Theta1Variant::L2 => self.theta1_l2,
            Theta1Variant::LInf => self.theta1_linf,
        };
        self
    }
}

pub fn theta_constants(profile: &CutoffProfile) -> Result<ThetaConstants> {
    let p = profile;
    if !(p.kappa2 > p.kappa1 && p.kappa1 > 0.0 && p.l2_norm_sq > 0.0 && p.l2_deriv_norm_sq > 0.0) {
        return domain("invalid cutoff profile");
    }
    let c0 = 8.0 * p.kappa2 / p.kappa1 + p.kappa1 / p.kappa2 + 6.0;
    let c0_prime = (p.l2_deriv_norm_sq / p.l2_norm_sq).sqrt();
    let theta0 = c0_prime.max(8.0 + c0);
    let theta1_l2 = 4.0 * p.l2_norm_sq / p.l2_deriv_norm_sq;
    let theta1_linf = 4.0 * p.l2_norm_sq / p.linf_deriv_norm.powi(2);
    let theta2 = 4.0 * p.l2_norm_sq / p.linf_norm.powi(2);
    Ok(ThetaConstants {
        c0,
        c0_prime,
        theta0,
        theta1: theta1_l2,
        theta1_l2,
        theta1_linf,
        theta2,
        variant: Theta1Variant::L2,
    })
}

/// `λ(x̂(τ)) = Σ λ_k w_k / Σ w_k` with `w_k = |χ̂_T(τ − λ_k)|² |z_k|²`.
pub fn windowed_frequency(z0: &StateVector, sys: &SpectralSystem, t: f64, tau: f64) -> Result<f64> {
    sys.check_dim(z0)?;
    z0.nonzero_norm_sq()?;
    if !(t > 0.0) {
        return domain(format!("window length must be positive, got {t}"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (c, &l) in z0.coefficients.iter().zip(sys.eigenvalues()) {
        let w = chi_hat(t * (tau - l)).powi(2) * c.norm_sqr();
        num += l * w;
        den += w;
    }
    if !(den > 0.0) {
        return Err(Error::Numeric("windowed weights underflow".into()));
    }
    let eigs = sys.eigenvalues();
    Ok((num / den).clamp(eigs[0], eigs[eigs.len() - 1]))
}

const MAX_DOUBLINGS: usize = 200;

/// Unique positive root of `T·ε(θ₀(1/T + λ₀)) = θ₁`, by bisection.
pub fn solve_observation_time(lambda0: f64, eps: &DecayFunction, th: &ThetaConstants) -> Result<f64> {
    if !(lambda0 >= 0.0 && lambda0.is_finite()) {
        return domain(format!("frequency must be non-negative, got {lambda0}"));
    }
    eps.validate()?;
    let g = |t: f64| t * eps.eval(th.theta0 * (1.0 / t + lambda0)) - th.theta1;

    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    let mut n = 0;
    while g(lo) >= 0.0 {
        lo /= 2.0;
        n += 1;
        if n > MAX_DOUBLINGS {
            return Err(Error::Numeric("observation-time bracket: lower end not found".into()));
        }
    }
    n = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        n += 1;
        if n > MAX_DOUBLINGS {
            return Err(Error::Numeric("observation-time bracket: upper end not found".into()));
        }
    }
    // the bracketed map must be increasing for the root to be unique
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=64 {
        let t = lo * (hi / lo).powf(i as f64 / 64.0);
        let v = g(t);
        if v < prev - 1e-12 * th.theta1 {
            return Err(Error::Numeric(format!("T·ε(θ₀(1/T+λ₀)) decreases near T = {t}")));
        }
        prev = v;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g(lo).abs() <= g(hi).abs() { lo } else { hi })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlancherelReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`
    pub margin: f64,
}

/// Fraction of `∫|χ̂_T|²` captured by `[−R, R]` for a mode at `λ_k`, after
/// normalizing by the full integral `2πT‖χ‖²`.
fn captured_fraction(t: f64, r: f64, lambda_k: f64, l2_norm_sq: f64) -> Result<f64> {
    let a = t * (-r - lambda_k);
    let b = t * (r - lambda_k);
    let mut breaks = vec![a];
    if a < 0.0 && 0.0 < b {
        breaks.push(0.0);
    }
    breaks.push(b);
    let q = quadrature::integrate_with_breaks(
        |u| chi_hat(u).powi(2),
        &breaks,
        QuadOptions { abs_tol: 1e-13, rel_tol: 1e-13, max_intervals: 50_000 },
    )?;
    Ok(q.value / (2.0 * PI * l2_norm_sq))
}

/// Compares `(1 − (c₀′/T + λ(z0))/R)‖z0‖²` with the normalized windowed
/// energy `(2πT‖χ‖²)⁻¹ ∫_{−R}^{R} ‖x̂(τ)‖² dτ`, `‖x̂(τ)‖² = Σ|χ̂_T(τ−λ_k)|²|z_k|²`.
///
/// Each mode's contribution is integrated separately, which places the
/// refinement at every `λ_k`. The normalization makes the right side tend to
/// `‖z0‖²` as `R → ∞`.
pub fn plancherel_lowerbound_check(
    z0: &StateVector,
    sys: &SpectralSystem,
    t: f64,
    r: f64,
    profile: &CutoffProfile,
    th: &ThetaConstants,
) -> Result<PlancherelReport> {
    let norm_sq = z0.nonzero_norm_sq()?;
    let lz = spectral::frequency(z0, sys)?;
    if !(t > 0.0) {
        return domain(format!("window length must be positive, got {t}"));
    }
    let threshold = th.c0_prime / t + lz;
    if !(r > threshold) {
        return domain(format!("R = {r} must exceed c0'/T + λ(z0) = {threshold}"));
    }
    let lhs = (1.0 - threshold / r) * norm_sq;
    let mut rhs = 0.0;
    for (c, &l) in z0.coefficients.iter().zip(sys.eigenvalues()) {
        let w = c.norm_sqr();
        if w > 0.0 {
            rhs += w * captured_fraction(t, r, l, profile.l2_norm_sq)?;
        }
    }
    Ok(PlancherelReport { lhs, rhs, margin: rhs - lhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_values() {
        assert_eq!(chi(0.0), 1.0);
        assert_eq!(chi(1.0), 0.0);
        assert_eq!(chi(-1.0), 0.0);
        assert!((chi(0.5) - 0.5 * (-1.0f64).exp()).abs() < 1e-16);
        assert!((chi(0.5) - 0.183_939_720_585_721_2).abs() < 1e-15);
    }

    #[test]
    fn chi_dot_matches_finite_differences() {
        for s in [-0.9, -0.4, -0.01, 0.02, 0.3, 0.77] {
            let h = 1e-6;
            let fd = (chi(s + h) - chi(s - h)) / (2.0 * h);
            assert!((fd - chi_dot(s)).abs() < 1e-8, "s = {s}");
        }
    }

    #[test]
    fn chi_hat_at_zero() {
        // 2∫₀¹(1−s)e^{−2s}ds = (1 + e^{−2})/2
        let exact = (1.0 + (-2.0f64).exp()) / 2.0;
        assert!((chi_hat(0.0) - exact).abs() < 1e-15);
        assert!((chi_hat(0.0) - 0.567_667_641_618_306_4).abs() < 1e-15);
    }

    #[test]
    fn chi_hat_is_even() {
        for tau in [0.3, 1.0, 5.5, 40.0] {
            assert!((chi_hat(tau) - chi_hat(-tau)).abs() < 1e-16);
        }
    }

    #[test]
    fn chi_hat_decay_profile() {
        for tau in [0.0, 1.0, -1.0, 5.0, -5.0, 20.0, -20.0, 100.0, -100.0] {
            assert!(chi_hat(tau).abs() * (1.0 + tau * tau) >= KAPPA1, "τ = {tau}");
        }
        // τ²χ̂(τ) → 6 − 2e⁻²cos τ, so the upper constant 6 is exceeded near odd multiples of π
        let e2 = (-2.0f64).exp();
        for k in [31.0, 63.0, 127.0] {
            let tau = k * PI;
            let v = tau * tau * chi_hat(tau);
            assert!((v - (6.0 + 2.0 * e2)).abs() < 0.05, "τ = {tau}: {v}");
            assert!((1.0 + tau * tau) * chi_hat(tau).abs() > KAPPA2);
        }
        let tau = 64.0 * PI;
        assert!((tau * tau * chi_hat(tau) - (6.0 - 2.0 * e2)).abs() < 0.05);
    }

    #[test]
    fn theta_constants_arithmetic() {
        let p = cutoff_profile().unwrap();
        let th = theta_constants(&p).unwrap();
        let c0 = 36.0 * PI + 2.0 / (9.0 * PI) + 6.0;
        assert!((th.c0 - c0).abs() < 1e-12);
        assert!((th.c0 - 119.17).abs() < 0.01);
        assert_eq!(th.theta0, 8.0 + th.c0);
        assert!((th.theta2 - 4.0 * p.l2_norm_sq).abs() < 1e-15);
        assert_eq!(p.linf_norm, 1.0);
        assert_eq!(p.linf_deriv_norm, 3.0);
        let linf = th.with_variant(Theta1Variant::LInf);
        assert!((linf.theta1 - 4.0 * p.l2_norm_sq / 9.0).abs() < 1e-15);
    }

    #[test]
    fn observation_time_constant_epsilon() {
        let th = theta_constants(&cutoff_profile().unwrap()).unwrap();
        let eps = DecayFunction::constant(0.01).unwrap();
        let t = solve_observation_time(3.0, &eps, &th).unwrap();
        assert!((t - th.theta1 / 0.01).abs() < 1e-12 * t);
    }

    #[test]
    fn observation_time_rejects_negative_frequency() {
        let th = theta_constants(&cutoff_profile().unwrap()).unwrap();
        let eps = DecayFunction::constant(0.01).unwrap();
        assert!(solve_observation_time(-1.0, &eps, &th).is_err());
    }

    #[test]
    fn windowed_frequency_of_eigenvector() {
        let sys = SpectralSystem::from_real(vec![1.0, 4.0, 9.0], &[1., 0., 0., 0., 1., 0., 0., 0., 1.], "")
            .unwrap();
        let z = StateVector::basis(3, 1);
        for (t, tau) in [(0.1, -3.0), (1.0, 4.0), (10.0, 60.0)] {
            assert_eq!(windowed_frequency(&z, &sys, t, tau).unwrap(), 4.0);
        }
        assert!(windowed_frequency(&z, &sys, 0.0, 1.0).is_err());
    }

    #[test]
    fn plancherel_precondition() {
        let sys = SpectralSystem::from_real(vec![1.0, 4.0], &[1., 0., 0., 1.], "").unwrap();
        let p = cutoff_profile().unwrap();
        let th = theta_constants(&p).unwrap();
        let z = StateVector::basis(2, 0);
        assert!(plancherel_lowerbound_check(&z, &sys, 1.0, th.c0_prime + 0.5, &p, &th).is_err());
    }
}
