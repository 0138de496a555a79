//! Spectrally represented systems `ż = iAz`, `y = Cz`.
//!
//! A system is reduced to the eigenvalues of `A` (on the first `N_max`
//! modes) and the Gram matrix `G_jk = <Cφ_j, Cφ_k>_Y` of the observed
//! eigenfunctions. States are coefficient vectors in the orthonormal
//! eigenbasis, so every X-norm is a plain ℓ² sum and every Y-norm is a
//! Hermitian form in `G`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::linalg::{self, CMatrix, CVector};

/// Tolerance for Hermitian symmetry of the Gram matrix (absolute).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative tolerance for positive semidefiniteness of the Gram matrix.
pub const PSD_REL_TOL: f64 = 1e-10;
/// States with squared norm below this are treated as zero.
pub const ZERO_NORM_SQ: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct SpectralSystem {
    eigenvalues: Vec<f64>,
    gram: CMatrix,
    pub label: String,
}

impl SpectralSystem {
    /// Validates and builds a system. Eigenvalues must be strictly positive and
    /// sorted non-decreasing; repeats are allowed. The Gram matrix must be
    /// Hermitian to [`HERMITIAN_TOL`] and positive semidefinite to [`PSD_REL_TOL`].
    pub fn new(eigenvalues: Vec<f64>, gram: CMatrix, label: impl Into<String>) -> Result<Self> {
        let n = eigenvalues.len();
        if n == 0 {
            return Err(Error::InvalidSystem("no modes".into()));
        }
        if gram.nrows() != n {
            return Err(Error::Shape { expected: n, got: gram.nrows() });
        }
        if gram.ncols() != n {
            return Err(Error::Shape { expected: n, got: gram.ncols() });
        }
        if let Some(k) = eigenvalues.iter().position(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidSystem(format!(
                "eigenvalue {k} = {} is not strictly positive",
                eigenvalues[k]
            )));
        }
        if let Some(k) = eigenvalues.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidSystem(format!(
                "eigenvalues not sorted: λ[{k}] = {} > λ[{}] = {}",
                eigenvalues[k],
                k + 1,
                eigenvalues[k + 1]
            )));
        }
        let (defect, j, k) = linalg::hermitian_defect(&gram);
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidSystem(format!(
                "gram not Hermitian at ({j},{k}): |G_jk - conj(G_kj)| = {defect:e}"
            )));
        }
        let spectrum = linalg::hermitian_eigenvalues(&gram)?;
        let lo = spectrum[0];
        let hi = spectrum[n - 1];
        if lo < -PSD_REL_TOL * hi.max(0.0) {
            return Err(Error::InvalidSystem(format!(
                "gram not positive semidefinite: smallest eigenvalue {lo:e}, largest {hi:e}"
            )));
        }
        Ok(Self { eigenvalues, gram, label: label.into() })
    }

    /// System with real symmetric Gram given row-major.
    pub fn from_real(eigenvalues: Vec<f64>, gram: &[f64], label: impl Into<String>) -> Result<Self> {
        let n = eigenvalues.len();
        if gram.len() != n * n {
            return Err(Error::Shape { expected: n * n, got: gram.len() });
        }
        let g = CMatrix::from_fn(n, n, |j, k| Complex64::new(gram[j * n + k], 0.0));
        Self::new(eigenvalues, g, label)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    /// `‖Cz‖²_Y = z* G z`.
    pub fn observed_energy(&self, z: &StateVector) -> Result<f64> {
        self.check_dim(z)?;
        Ok(linalg::quadratic_form(&self.gram, &z.coefficients).max(0.0))
    }

    /// Distinct eigenvalues with the indices carrying each of them.
    pub fn eigenvalue_groups(&self) -> Vec<(f64, Vec<usize>)> {
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            match groups.last_mut() {
                Some((v, idx)) if same_eigenvalue(*v, l) => idx.push(k),
                _ => groups.push((l, vec![k])),
            }
        }
        groups
    }

    pub(crate) fn check_dim(&self, z: &StateVector) -> Result<()> {
        if z.dim() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), got: z.dim() });
        }
        Ok(())
    }
}

pub(crate) fn same_eigenvalue(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Coefficients of a state in the eigenbasis of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coefficients: CVector,
}

impl StateVector {
    pub fn new(coefficients: Vec<Complex64>) -> Self {
        Self { coefficients: CVector::from_vec(coefficients) }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Unit coefficient on mode `k`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut c = CVector::zeros(dim);
        c[k] = Complex64::new(1.0, 0.0);
        Self { coefficients: c }
    }

    /// Independent standard complex Gaussian coefficients.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let c = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::new(c)
    }

    /// Random coefficients on `support`, zero elsewhere.
    pub fn random_supported<R: Rng + ?Sized>(dim: usize, support: &[usize], rng: &mut R) -> Self {
        let mut c = CVector::zeros(dim);
        for &k in support {
            c[k] = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        Self { coefficients: c }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// `‖z‖²_X = Σ |z_k|²`.
    pub fn norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { coefficients: &self.coefficients * factor }
    }

    /// Applies the group: coefficient k picks up `e^{iλ_k t}`.
    pub fn evolve(&self, eigenvalues: &[f64], t: f64) -> Self {
        let c = self
            .coefficients
            .iter()
            .zip(eigenvalues)
            .map(|(z, &l)| z * Complex64::from_polar(1.0, l * t))
            .collect();
        Self::new(c)
    }

    pub(crate) fn nonzero_norm_sq(&self) -> Result<f64> {
        let n = self.norm_sq();
        if !(n >= ZERO_NORM_SQ) {
            return domain("state vector is zero");
        }
        Ok(n)
    }
}

/// A-frequency, residual and norm of one state.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrequencyReport {
    pub lambda_z: f64,
    pub residual: f64,
    pub norm_sq: f64,
}

fn weighted_moments(z: &StateVector, sys: &SpectralSystem) -> Result<(f64, f64, f64)> {
    sys.check_dim(z)?;
    let norm_sq = z.nonzero_norm_sq()?;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (c, &l) in z.coefficients.iter().zip(sys.eigenvalues()) {
        let w = c.norm_sqr();
        m1 += l * w;
        m2 += l * l * w;
    }
    Ok((norm_sq, m1, m2))
}

/// The A-frequency `λ(z) = Σ λ_k |z_k|² / Σ |z_k|²`.
pub fn frequency(z: &StateVector, sys: &SpectralSystem) -> Result<f64> {
    let (n, m1, _) = weighted_moments(z, sys)?;
    let lo = sys.eigenvalues()[0];
    let hi = sys.eigenvalues()[sys.dim() - 1];
    Ok((m1 / n).clamp(lo, hi))
}

/// `‖Az‖²/‖z‖² − λ(z)²`, from the first two spectral moments.
pub fn residual(z: &StateVector, sys: &SpectralSystem) -> Result<f64> {
    let (n, m1, m2) = weighted_moments(z, sys)?;
    let lz = m1 / n;
    Ok(m2 / n - lz * lz)
}

/// `‖(A − λ(z)I)z‖²/‖z‖²`, evaluated term by term.
pub fn residual_direct(z: &StateVector, sys: &SpectralSystem) -> Result<f64> {
    let lz = frequency(z, sys)?;
    Ok(shifted_norm_sq(z, sys.eigenvalues(), lz) / z.norm_sq())
}

/// `‖(A − λI)z‖²_X`.
pub fn shifted_norm_sq(z: &StateVector, eigenvalues: &[f64], lambda: f64) -> f64 {
    z.coefficients
        .iter()
        .zip(eigenvalues)
        .map(|(c, &l)| (l - lambda).powi(2) * c.norm_sqr())
        .sum()
}

pub fn frequency_report(z: &StateVector, sys: &SpectralSystem) -> Result<FrequencyReport> {
    let (norm_sq, m1, m2) = weighted_moments(z, sys)?;
    let lambda_z = m1 / norm_sq;
    Ok(FrequencyReport {
        lambda_z,
        residual: (m2 / norm_sq - lambda_z * lambda_z).max(0.0),
        norm_sq,
    })
}

/// Relative gap in `‖(A−λI)z‖² = (λ−λ(z))²‖z‖² + ‖(A−λ(z)I)z‖²`.
///
/// Both sides are evaluated independently; returns 0 when both vanish.
pub fn key_identity_gap(z: &StateVector, lambda: f64, sys: &SpectralSystem) -> Result<f64> {
    sys.check_dim(z)?;
    let norm_sq = z.nonzero_norm_sq()?;
    let lz = frequency(z, sys)?;
    let lhs = shifted_norm_sq(z, sys.eigenvalues(), lambda);
    let rhs = (lambda - lz).powi(2) * norm_sq + shifted_norm_sq(z, sys.eigenvalues(), lz);
    let diff = (lhs - rhs).abs();
    if lhs == 0.0 {
        // both sides vanish exactly when z is an eigenvector at λ
        return Ok(if rhs <= f64::EPSILON * norm_sq * lambda.abs().max(1.0).powi(2) {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(diff / lhs)
}
