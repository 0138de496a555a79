//! Dirichlet Laplacian on `(0, π)²` observed through the normal derivative on
//! a boundary set Γ.
//!
//! Modes are `φ_{p,q}(x) = (2/(π√(p²+q²))) sin(p x₁) sin(q x₂)`, normalized in
//! `H¹₀`, with eigenvalue `p² + q²`; `p` is the `x₁` frequency and `q` the
//! `x₂` frequency. On each side the outward normal derivative is a single
//! sine in arc length:
//!
//! | side   | trace of `φ_{p,q}`                          |
//! |--------|---------------------------------------------|
//! | Bottom | `−2q/(π√N) · sin(p s)`                      |
//! | Top    | `(−1)^q · 2q/(π√N) · sin(p s)`              |
//! | Left   | `−2p/(π√N) · sin(q s)`                      |
//! | Right  | `(−1)^p · 2p/(π√N) · sin(q s)`              |
//!
//! `Y = L²(Γ)` over a union of patches is the sum of per-patch integrals, so
//! no cross-side products arise.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coercivity::{self, DecayFunction};
use crate::error::{domain, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::spectral::SpectralSystem;

/// Cluster radius for the integer spectrum of the square.
pub const SQUARE_CLUSTER_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SquareMode {
    pub p: u32,
    pub q: u32,
}

impl SquareMode {
    pub fn new(p: u32, q: u32) -> Self {
        Self { p, q }
    }

    pub fn eigenvalue(&self) -> u64 {
        let (p, q) = (self.p as u64, self.q as u64);
        p * p + q * q
    }

    /// `2/(π√(p²+q²))`
    pub fn normalization(&self) -> f64 {
        2.0 / (PI * (self.eigenvalue() as f64).sqrt())
    }

    /// Trace on `side` as `(amplitude, frequency)` of `amplitude · sin(frequency · s)`.
    pub fn trace(&self, side: Side) -> (f64, u32) {
        let c = self.normalization();
        let parity = |k: u32| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        match side {
            Side::Bottom => (-c * self.q as f64, self.p),
            Side::Top => (parity(self.q) * c * self.q as f64, self.p),
            Side::Left => (-c * self.p as f64, self.q),
            Side::Right => (parity(self.p) * c * self.p as f64, self.q),
        }
    }

    pub fn swapped(&self) -> Self {
        Self { p: self.q, q: self.p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `x₂ = 0`, arc length `x₁`
    Bottom,
    /// `x₁ = 0`, arc length `x₂`
    Left,
    /// `x₂ = π`, arc length `x₁`
    Top,
    /// `x₁ = π`, arc length `x₂`
    Right,
}

impl Side {
    /// The side obtained by exchanging `x₁` and `x₂`.
    pub fn transposed(self) -> Self {
        match self {
            Side::Bottom => Side::Left,
            Side::Left => Side::Bottom,
            Side::Top => Side::Right,
            Side::Right => Side::Top,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPatch {
    pub side: Side,
    pub alpha: f64,
    pub beta: f64,
}

impl BoundaryPatch {
    pub fn new(side: Side, alpha: f64, beta: f64) -> Result<Self> {
        let patch = Self { side, alpha, beta };
        patch.validate()?;
        Ok(patch)
    }

    pub fn full(side: Side) -> Self {
        Self { side, alpha: 0.0, beta: PI }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.alpha && self.alpha < self.beta && self.beta <= PI) {
            return domain(format!(
                "patch on {:?} needs 0 ≤ α < β ≤ π, got ({}, {})",
                self.side, self.alpha, self.beta
            ));
        }
        Ok(())
    }
}

/// The observed part Γ of the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub patches: Vec<BoundaryPatch>,
}

impl GammaSpec {
    pub fn new(patches: Vec<BoundaryPatch>) -> Result<Self> {
        let g = Self { patches };
        g.validate()?;
        Ok(g)
    }

    pub fn full_side(side: Side) -> Self {
        Self { patches: vec![BoundaryPatch::full(side)] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patches.is_empty() {
            return domain("Γ needs at least one patch");
        }
        for p in &self.patches {
            p.validate()?;
        }
        for side in [Side::Bottom, Side::Left, Side::Top, Side::Right] {
            let mut on_side: Vec<&BoundaryPatch> = self.patches.iter().filter(|p| p.side == side).collect();
            on_side.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
            if let Some(w) = on_side.windows(2).find(|w| w[1].alpha < w[0].beta) {
                return domain(format!(
                    "overlapping patches on {side:?}: ({}, {}) and ({}, {})",
                    w[0].alpha, w[0].beta, w[1].alpha, w[1].beta
                ));
            }
        }
        Ok(())
    }

    /// The side all patches lie on, if there is exactly one.
    pub fn single_side(&self) -> Option<Side> {
        let first = self.patches.first()?.side;
        self.patches.iter().all(|p| p.side == first).then_some(first)
    }

    pub fn transposed(&self) -> Self {
        Self {
            patches: self
                .patches
                .iter()
                .map(|p| BoundaryPatch { side: p.side.transposed(), ..*p })
                .collect(),
        }
    }
}

/// `∫_α^β sin(p x) sin(p′ x) dx` from the antiderivative.
pub fn sine_product_integral(p: u32, p_prime: u32, alpha: f64, beta: f64) -> f64 {
    if p == p_prime {
        let k = p as f64;
        let f = |x: f64| x / 2.0 - (2.0 * k * x).sin() / (4.0 * k);
        f(beta) - f(alpha)
    } else {
        let d = p as f64 - p_prime as f64;
        let s = p as f64 + p_prime as f64;
        let f = |x: f64| (d * x).sin() / (2.0 * d) - (s * x).sin() / (2.0 * s);
        f(beta) - f(alpha)
    }
}

/// `⟨Cφ_a, Cφ_b⟩_{L²(Γ)}`.
pub fn gram_entry(a: SquareMode, b: SquareMode, gamma: &GammaSpec) -> f64 {
    gamma
        .patches
        .iter()
        .map(|patch| {
            let (ca, fa) = a.trace(patch.side);
            let (cb, fb) = b.trace(patch.side);
            ca * cb * sine_product_integral(fa, fb, patch.alpha, patch.beta)
        })
        .sum()
}

/// Gram matrix of the given modes.
pub fn cluster_gram(modes: &[SquareMode], gamma: &GammaSpec) -> CMatrix {
    let n = modes.len();
    let mut g = CMatrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let v = gram_entry(modes[j], modes[k], gamma);
            g[(j, k)] = v.into();
            g[(k, j)] = v.into();
        }
    }
    g
}

/// All `(p, q)`, `p, q ≥ 1`, with `p² + q² = n`, sorted by `p`.
pub fn lattice_circle(n: u64) -> Result<Vec<SquareMode>> {
    if n < 2 {
        return domain(format!("lattice circle needs N ≥ 2, got {n}"));
    }
    Ok((1..=n.isqrt())
        .filter_map(|p| {
            let rest = n - p * p;
            let q = rest.isqrt();
            (q >= 1 && q * q == rest).then(|| SquareMode::new(p as u32, q as u32))
        })
        .collect())
}

/// Every mode with eigenvalue `≤ n_max`, ordered by eigenvalue then `(p, q)`.
pub fn square_modes(n_max_eigenvalue: u64) -> Vec<SquareMode> {
    (2..=n_max_eigenvalue)
        .flat_map(|n| lattice_circle(n).expect("n ≥ 2"))
        .collect()
}

/// Spectral data of the square observed on Γ, truncated at eigenvalue `n_max`.
pub fn build_square_system(n_max_eigenvalue: u64, gamma: &GammaSpec) -> Result<SpectralSystem> {
    if n_max_eigenvalue < 2 {
        return domain(format!("n_max_eigenvalue must be ≥ 2, got {n_max_eigenvalue}"));
    }
    gamma.validate()?;
    let modes = square_modes(n_max_eigenvalue);
    let n = modes.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| (0..n).map(|k| if k < j { 0.0 } else { gram_entry(modes[j], modes[k], gamma) }).collect())
        .collect();
    let g = CMatrix::from_fn(n, n, |j, k| if k >= j { rows[j][k] } else { rows[k][j] }.into());
    let eigenvalues = modes.iter().map(|m| m.eigenvalue() as f64).collect();
    SpectralSystem::new(eigenvalues, g, format!("square n_max={n_max_eigenvalue}"))
}

/// Coercivity data of one lattice circle.
#[derive(Debug, Clone, Serialize)]
pub struct CircleRow {
    pub n: u64,
    pub size: usize,
    pub min_eig: f64,
    /// `N · min_eig`
    pub scaled_min_eig: f64,
    /// Smallest generalized eigenvalue of `(G, diag(w²/N))`, `w` the
    /// coefficient of the normal trace on the observed side.
    pub generalized_min_eig: Option<f64>,
}

fn circle_row(n: u64, modes: &[SquareMode], gamma: &GammaSpec, side: Option<Side>) -> Result<CircleRow> {
    let g = cluster_gram(modes, gamma);
    let (min_eig, _) = linalg::hermitian_min_eig(&g)?;
    let min_eig = min_eig.max(0.0);
    let generalized_min_eig = match side {
        Some(side) => {
            let scale: Vec<f64> = modes
                .iter()
                .map(|m| {
                    let w = match side {
                        Side::Bottom | Side::Top => m.q,
                        Side::Left | Side::Right => m.p,
                    } as f64;
                    (n as f64).sqrt() / w
                })
                .collect();
            let h = CMatrix::from_fn(modes.len(), modes.len(), |a, b| g[(a, b)] * scale[a] * scale[b]);
            Some(linalg::hermitian_min_eig(&h)?.0)
        }
        None => None,
    };
    Ok(CircleRow { n, size: modes.len(), min_eig, scaled_min_eig: n as f64 * min_eig, generalized_min_eig })
}

/// One row per nonempty lattice circle `2 ≤ N ≤ n_max`, sorted by `N`.
pub fn circle_scan(gamma: &GammaSpec, n_max_eigenvalue: u64) -> Result<Vec<CircleRow>> {
    gamma.validate()?;
    let side = gamma.single_side();
    let mut rows = (2..=n_max_eigenvalue)
        .into_par_iter()
        .filter_map(|n| {
            let modes = lattice_circle(n).expect("n ≥ 2");
            (!modes.is_empty()).then(|| circle_row(n, &modes, gamma, side))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.n);
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaGammaFit {
    /// `min_N N·μ_N`
    pub delta_hat: f64,
    pub argmin_n: u64,
    /// `min_N` of the generalized eigenvalue.
    pub delta_generalized: f64,
    pub rows: Vec<CircleRow>,
}

/// Scans every nonempty lattice circle `N ≤ n_max` for Γ on a single side.
pub fn delta_gamma_fit(gamma: &GammaSpec, n_max_eigenvalue: u64) -> Result<DeltaGammaFit> {
    gamma.validate()?;
    if gamma.single_side().is_none() {
        return domain("δ_Γ fit needs Γ on a single side");
    }
    let rows = circle_scan(gamma, n_max_eigenvalue)?;
    let best = rows
        .iter()
        .min_by(|a, b| a.scaled_min_eig.total_cmp(&b.scaled_min_eig))
        .ok_or_else(|| Error::Domain(format!("no nonempty cluster with N ≤ {n_max_eigenvalue}")))?;
    let delta_generalized = rows
        .iter()
        .filter_map(|r| r.generalized_min_eig)
        .fold(f64::INFINITY, f64::min);
    Ok(DeltaGammaFit {
        delta_hat: best.scaled_min_eig,
        argmin_n: best.n,
        delta_generalized,
        rows: rows.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionIReport {
    pub rows: Vec<CircleRow>,
    pub min_mu: f64,
    /// `max_N |μ_N − 2/π|`
    pub max_deviation: f64,
    pub fitted_psi: DecayFunction,
}

/// Γ = two full touching sides (bottom and left).
pub fn two_touching_sides() -> GammaSpec {
    GammaSpec { patches: vec![BoundaryPatch::full(Side::Bottom), BoundaryPatch::full(Side::Left)] }
}

pub fn assumption_i_check(n_max_eigenvalue: u64) -> Result<AssumptionIReport> {
    if n_max_eigenvalue < 2 {
        return domain(format!("n_max_eigenvalue must be ≥ 2, got {n_max_eigenvalue}"));
    }
    let rows = circle_scan(&two_touching_sides(), n_max_eigenvalue)?;
    let target = 2.0 / PI;
    let min_mu = rows.iter().map(|r| r.min_eig).fold(f64::INFINITY, f64::min);
    let max_deviation = rows.iter().map(|r| (r.min_eig - target).abs()).fold(0.0, f64::max);
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.min_eig)).collect();
    let fitted_psi = coercivity::fit_psi_envelope_from_minima(&points)?;
    Ok(AssumptionIReport { rows, min_mu, max_deviation, fitted_psi })
}

/// Smallest `q` over the circle `p² + q² = n` (`None` for an empty circle).
pub fn min_q_on_circle(n: u64) -> Option<u32> {
    lattice_circle(n).ok()?.iter().map(|m| m.q).min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};

    #[test]
    fn lattice_circles() {
        assert_eq!(lattice_circle(2).unwrap(), vec![SquareMode::new(1, 1)]);
        assert_eq!(lattice_circle(25).unwrap(), vec![SquareMode::new(3, 4), SquareMode::new(4, 3)]);
        assert!(lattice_circle(3).unwrap().is_empty());
        assert_eq!(
            lattice_circle(50).unwrap(),
            vec![SquareMode::new(1, 7), SquareMode::new(5, 5), SquareMode::new(7, 1)]
        );
        assert!(lattice_circle(1).is_err());
    }

    #[test]
    fn sine_products() {
        assert!((sine_product_integral(3, 3, 0.0, PI) - PI / 2.0).abs() < 1e-15);
        assert!(sine_product_integral(2, 5, 0.0, PI).abs() < 1e-15);
        // ∫₀^{π/2} sin x sin 2x dx = 2/3
        assert!((sine_product_integral(1, 2, 0.0, PI / 2.0) - 2.0 / 3.0).abs() < 1e-15);
        for (p, pp, a, b) in [(1, 2, 0.0, PI / 2.0), (4, 4, 0.3, 2.2), (7, 3, PI / 4.0, PI / 2.0)] {
            let q = integrate(
                |x| (p as f64 * x).sin() * (pp as f64 * x).sin(),
                a,
                b,
                QuadOptions::abs(1e-14),
            )
            .unwrap();
            assert!((q.value - sine_product_integral(p, pp, a, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_system() {
        let sys = build_square_system(2, &GammaSpec::full_side(Side::Bottom)).unwrap();
        assert_eq!(sys.eigenvalues(), &[2.0]);
        assert!(build_square_system(1, &GammaSpec::full_side(Side::Bottom)).is_err());
    }

    #[test]
    fn bottom_full_side_gram() {
        let modes = square_modes(30);
        let sys = build_square_system(30, &GammaSpec::full_side(Side::Bottom)).unwrap();
        for (j, a) in modes.iter().enumerate() {
            for (k, b) in modes.iter().enumerate() {
                let g = sys.gram()[(j, k)].re;
                if a.p != b.p {
                    assert!(g.abs() < 1e-15);
                }
                if j == k {
                    let n = a.eigenvalue() as f64;
                    assert!((g - 2.0 * (a.q as f64).powi(2) / (PI * n)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn half_bottom_patch_single_mode() {
        let gamma = GammaSpec::new(vec![BoundaryPatch::new(Side::Bottom, 0.0, PI / 2.0).unwrap()]).unwrap();
        let g = gram_entry(SquareMode::new(1, 1), SquareMode::new(1, 1), &gamma);
        assert!((g - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn invalid_gamma() {
        assert!(BoundaryPatch::new(Side::Top, 1.0, 1.0).is_err());
        assert!(BoundaryPatch::new(Side::Top, -0.1, 1.0).is_err());
        let overlapping = GammaSpec::new(vec![
            BoundaryPatch::new(Side::Left, 0.0, 1.0).unwrap(),
            BoundaryPatch::new(Side::Left, 0.5, 2.0).unwrap(),
        ]);
        assert!(overlapping.is_err());
        assert!(GammaSpec::new(vec![]).is_err());
    }

    #[test]
    fn transposition_symmetry() {
        let gamma = GammaSpec::new(vec![
            BoundaryPatch::new(Side::Bottom, 0.2, 1.9).unwrap(),
            BoundaryPatch::new(Side::Right, 0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let t = gamma.transposed();
        let modes = square_modes(40);
        for a in &modes {
            for b in &modes {
                let lhs = gram_entry(*a, *b, &gamma);
                let rhs = gram_entry(a.swapped(), b.swapped(), &t);
                assert!((lhs - rhs).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn assumption_i_small() {
        let rep = assumption_i_check(50).unwrap();
        assert!(rep.max_deviation < 1e-12);
        assert!(rep.fitted_psi.is_constant());
        assert!((rep.rows[0].min_eig - 2.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn delta_fit_bottom_full_side() {
        let fit = delta_gamma_fit(&GammaSpec::full_side(Side::Bottom), 100).unwrap();
        assert!((fit.delta_hat - 2.0 / PI).abs() < 1e-13);
        let row = fit.rows.iter().find(|r| r.n == 50).unwrap();
        assert!((row.min_eig - 2.0 / (50.0 * PI)).abs() < 1e-15);
        assert!(delta_gamma_fit(&two_touching_sides(), 100).is_err());
    }
}
