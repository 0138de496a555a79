//! Observability integrals `∫₀ᵀ ‖C e^{itA} z0‖²_Y dt` in closed form, the
//! admissibility inequality, and the weak observability inequality.

use num_complex::Complex64;
use serde::Serialize;

use crate::coercivity::DecayFunction;
use crate::error::{domain, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::quadrature::{self, QuadOptions};
use crate::spectral::{self, SpectralSystem, StateVector};
use crate::window::{self, ThetaConstants};

const TIE_TOL: f64 = 1e-12;
const SERIES_CUTOFF: f64 = 1e-4;

/// `∫₀ᵀ e^{iΔt} dt`.
pub fn time_kernel(delta: f64, t: f64) -> Complex64 {
    if delta.abs() < TIE_TOL {
        return Complex64::new(t, 0.0);
    }
    let x = delta * t;
    if x.abs() < SERIES_CUTOFF {
        // T · Σ (ix)^n/(n+1)!, truncated where the next term is below 1e-20·T
        let ix = Complex64::new(0.0, x);
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..6 {
            term *= ix / (n as f64 + 1.0);
            sum += term;
        }
        return sum * t;
    }
    (Complex64::from_polar(1.0, x) - 1.0) / Complex64::new(0.0, delta)
}

/// Hermitian form `H_jk = G_jk ∫₀ᵀ e^{i(λ_k−λ_j)t} dt`, so that the
/// observability integral of `z0` is `z0* H z0`.
pub fn kernel_form(sys: &SpectralSystem, t: f64) -> Result<CMatrix> {
    if !(t > 0.0) {
        return domain(format!("time horizon must be positive, got {t}"));
    }
    let eigs = sys.eigenvalues();
    let g = sys.gram();
    Ok(CMatrix::from_fn(sys.dim(), sys.dim(), |j, k| {
        g[(j, k)] * time_kernel(eigs[k] - eigs[j], t)
    }))
}

/// Closed-form `∫₀ᵀ ‖Cz(t)‖²_Y dt`.
pub fn observability_integral(z0: &StateVector, sys: &SpectralSystem, t: f64) -> Result<f64> {
    sys.check_dim(z0)?;
    let h = kernel_form(sys, t)?;
    let v = z0.coefficients.dotc(&(&h * &z0.coefficients));
    if v.im.abs() > 1e-10 * v.re.abs() + 1e-300 {
        return Err(Error::Numeric(format!(
            "observability integral has imaginary part {:e} against real part {:e}",
            v.im, v.re
        )));
    }
    Ok(v.re.max(0.0))
}

/// The same integral by adaptive quadrature in time.
pub fn observability_integral_quadrature(
    z0: &StateVector,
    sys: &SpectralSystem,
    t: f64,
    rel_tol: f64,
) -> Result<f64> {
    sys.check_dim(z0)?;
    if !(t > 0.0) {
        return domain(format!("time horizon must be positive, got {t}"));
    }
    let eigs = sys.eigenvalues();
    let g = sys.gram();
    let energy = |s: f64| {
        let zt = z0.evolve(eigs, s).coefficients;
        zt.dotc(&(g * &zt)).re
    };
    // split so each piece carries a bounded number of oscillations
    let spread = eigs[eigs.len() - 1] - eigs[0];
    let pieces = ((spread * t / 20.0).ceil() as usize).clamp(1, 10_000);
    let breaks: Vec<f64> = (0..=pieces).map(|i| t * i as f64 / pieces as f64).collect();
    let r = quadrature::integrate_with_breaks(
        energy,
        &breaks,
        QuadOptions { abs_tol: 1e-300, rel_tol, max_intervals: 200_000 },
    )?;
    Ok(r.value)
}

/// Largest eigenvalue of the kernel form: the sharpest `C_T` on the truncated model.
pub fn sharp_admissibility_constant(sys: &SpectralSystem, t: f64) -> Result<f64> {
    let h = kernel_form(sys, t)?;
    Ok(linalg::hermitian_max_eig(&h)?.0.max(0.0))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdmissibilityReport {
    /// `C_T‖z0‖² − ∫₀ᵀ‖Cz(t)‖²dt`
    pub margin: f64,
    /// Truncation-dependent sharp constant.
    pub sharp_constant: f64,
}

pub fn admissibility_check(z0: &StateVector, sys: &SpectralSystem, t: f64, c_t: f64) -> Result<AdmissibilityReport> {
    if !(t > 0.0 && c_t > 0.0) {
        return domain("admissibility check needs T > 0 and C_T > 0");
    }
    let integral = observability_integral(z0, sys, t)?;
    Ok(AdmissibilityReport {
        margin: c_t * z0.norm_sq() - integral,
        sharp_constant: sharp_admissibility_constant(sys, t)?,
    })
}

/// Outcome of one weak observability evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObservabilityReport {
    #[serde(rename = "T")]
    pub t: f64,
    pub lambda_z0: f64,
    pub integral: f64,
    /// `θ₂ ψ(θ₀(1/T + λ(z0))) ‖z0‖²`
    pub lhs: f64,
    pub t_min: f64,
    /// `integral − lhs`
    pub margin: f64,
    pub applicable: bool,
    /// Time-quadrature re-evaluation, filled only when an applicable margin is negative.
    pub diagnostic_integral: Option<f64>,
}

pub fn weak_observability_check(
    z0: &StateVector,
    sys: &SpectralSystem,
    t: f64,
    psi: &DecayFunction,
    eps: &DecayFunction,
    th: &ThetaConstants,
) -> Result<ObservabilityReport> {
    let norm_sq = z0.nonzero_norm_sq()?;
    if !(t > 0.0) {
        return domain(format!("time horizon must be positive, got {t}"));
    }
    let lambda_z0 = spectral::frequency(z0, sys)?;
    let integral = observability_integral(z0, sys, t)?;
    let lhs = th.theta2 * psi.eval(th.theta0 * (1.0 / t + lambda_z0)) * norm_sq;
    let t_min = window::solve_observation_time(lambda_z0, eps, th)?;
    let applicable = t >= t_min;
    let margin = integral - lhs;
    let diagnostic_integral = if applicable && margin < 0.0 {
        Some(observability_integral_quadrature(z0, sys, t, 1e-13)?)
    } else {
        None
    };
    Ok(ObservabilityReport { t, lambda_z0, integral, lhs, t_min, margin, applicable, diagnostic_integral })
}
