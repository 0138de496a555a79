//! Spectral coercivity: clusters, Gram minima, certificates and the
//! transforms between weak and full spectral coercivity.
//!
//! A cluster `N_ε(λ)` is the set of modes with `|λ − λ_k| < ε` (strict). The
//! weak property asks for `‖Cz‖² ≥ ψ(λ)‖z‖²` on every cluster subspace; the
//! full property asks for the same bound, at `λ(z)`, on every state whose
//! residual `‖Az‖²/‖z‖² − λ(z)²` is below `ε(λ(z))`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::spectral::{self, SpectralSystem, StateVector};

/// Cluster minima at or below this are treated as zero.
pub const MIN_EIG_FLOOR: f64 = 1e-14;
/// Tolerance of the resolvent-inequality verdict, relative to `‖z‖²`.
pub const RESOLVENT_TOL: f64 = 1e-9;

/// Positive, non-increasing function on `[0, ∞)`.
///
/// The three parametric forms are what the envelope fit produces; the
/// composite forms carry the exact output of certificate transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DecayFunction {
    Constant { c: f64 },
    /// `c / (1 + λ)^p`
    PowerLaw { c: f64, p: f64 },
    /// `c · e^{−aλ}`
    Exponential { c: f64, a: f64 },
    /// `c / (offset + slope·λ)`
    InverseAffine { c: f64, slope: f64, offset: f64 },
    /// `factor · inner(λ)`
    Scaled { factor: f64, inner: Box<DecayFunction> },
    /// `inner(λ + shift)`
    Shifted { shift: f64, inner: Box<DecayFunction> },
    /// `½ (2M/ψ(λ) + 1/ε)⁻¹`
    BetaTransform { m: f64, epsilon: f64, psi: Box<DecayFunction> },
}

impl DecayFunction {
    pub fn constant(c: f64) -> Result<Self> {
        let f = Self::Constant { c };
        f.validate()?;
        Ok(f)
    }

    pub fn power_law(c: f64, p: f64) -> Result<Self> {
        let f = Self::PowerLaw { c, p };
        f.validate()?;
        Ok(f)
    }

    pub fn exponential(c: f64, a: f64) -> Result<Self> {
        let f = Self::Exponential { c, a };
        f.validate()?;
        Ok(f)
    }

    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::PowerLaw { c, p } => c / (1.0 + lambda).powf(*p),
            Self::Exponential { c, a } => c * (-a * lambda).exp(),
            Self::InverseAffine { c, slope, offset } => c / (offset + slope * lambda),
            Self::Scaled { factor, inner } => factor * inner.eval(lambda),
            Self::Shifted { shift, inner } => inner.eval(lambda + shift),
            Self::BetaTransform { m, epsilon, psi } => {
                0.5 / (2.0 * m / psi.eval(lambda) + 1.0 / epsilon)
            }
        }
    }

    /// Parameter constraints that make the function positive and non-increasing.
    pub fn validate(&self) -> Result<()> {
        let ok = |cond: bool, what: &str| if cond { Ok(()) } else { domain(what.to_string()) };
        match self {
            Self::Constant { c } => ok(c.is_finite() && *c > 0.0, "constant needs c > 0"),
            Self::PowerLaw { c, p } => ok(
                c.is_finite() && *c > 0.0 && p.is_finite() && *p >= 0.0,
                "power law needs c > 0, p ≥ 0",
            ),
            Self::Exponential { c, a } => ok(
                c.is_finite() && *c > 0.0 && a.is_finite() && *a >= 0.0,
                "exponential needs c > 0, a ≥ 0",
            ),
            Self::InverseAffine { c, slope, offset } => ok(
                *c > 0.0 && *slope >= 0.0 && *offset > 0.0 && (c + slope + offset).is_finite(),
                "inverse affine needs c > 0, slope ≥ 0, offset > 0",
            ),
            Self::Scaled { factor, inner } => {
                ok(factor.is_finite() && *factor > 0.0, "scale factor must be > 0")?;
                inner.validate()
            }
            Self::Shifted { shift, inner } => {
                ok(shift.is_finite() && *shift >= 0.0, "shift must be ≥ 0")?;
                inner.validate()
            }
            Self::BetaTransform { m, epsilon, psi } => {
                ok(m.is_finite() && *m > 0.0, "M must be > 0")?;
                ok(epsilon.is_finite() && *epsilon > 0.0, "ε must be > 0")?;
                psi.validate()
            }
        }
    }

    /// True when the function does not depend on λ.
    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::PowerLaw { p, .. } => *p == 0.0,
            Self::Exponential { a, .. } => *a == 0.0,
            Self::InverseAffine { slope, .. } => *slope == 0.0,
            Self::Scaled { inner, .. } | Self::Shifted { inner, .. } => inner.is_constant(),
            Self::BetaTransform { psi, .. } => psi.is_constant(),
        }
    }

    /// Checks positivity and monotonicity on a grid, not just parameters.
    pub fn check_class(&self, grid: &[f64]) -> Result<()> {
        self.validate()?;
        let mut prev = f64::INFINITY;
        for &l in grid {
            let v = self.eval(l);
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("decay function not positive at λ = {l}: {v}"));
            }
            if v > prev * (1.0 + 1e-14) {
                return domain(format!("decay function increases at λ = {l}"));
            }
            prev = v;
        }
        Ok(())
    }
}

/// Grid used to spot-check membership of transform outputs.
pub const CLASS_CHECK_GRID: [f64; 5] = [0.0, 1.0, 10.0, 1e3, 1e6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    Spectral,
    WeakSpectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityCertificate {
    pub epsilon: DecayFunction,
    pub psi: DecayFunction,
    pub kind: CertificateKind,
    pub provenance: String,
}

impl CoercivityCertificate {
    pub fn new(
        epsilon: DecayFunction,
        psi: DecayFunction,
        kind: CertificateKind,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        epsilon.validate()?;
        psi.validate()?;
        if kind == CertificateKind::WeakSpectral && !matches!(epsilon, DecayFunction::Constant { .. }) {
            return domain("a weak spectral certificate needs a constant ε");
        }
        Ok(Self { epsilon, psi, kind, provenance: provenance.into() })
    }

    fn weak_epsilon(&self) -> Result<f64> {
        match (&self.kind, &self.epsilon) {
            (CertificateKind::WeakSpectral, DecayFunction::Constant { c }) => Ok(*c),
            _ => domain("expected a weak spectral certificate"),
        }
    }
}

/// One cluster `N_ε(center)` with its Gram minimum.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterReport {
    pub center: f64,
    pub epsilon: f64,
    pub indices: Vec<usize>,
    pub min_eig: f64,
    #[serde(skip)]
    pub min_vec: CVector,
}

/// All `k` with `|λ − λ_k| < ε`.
pub fn enumerate_cluster(sys: &SpectralSystem, lambda: f64, epsilon: f64) -> Result<Vec<usize>> {
    if !(epsilon > 0.0) {
        return domain(format!("cluster radius must be positive, got {epsilon}"));
    }
    let eigs = sys.eigenvalues();
    // sorted: binary search the window, then apply the strict test exactly
    let start = eigs.partition_point(|&l| l <= lambda - epsilon);
    Ok((start..eigs.len())
        .take_while(|&k| eigs[k] < lambda + epsilon)
        .filter(|&k| (lambda - eigs[k]).abs() < epsilon)
        .collect())
}

/// Smallest eigenvalue of `G` restricted to `indices`, with its eigenvector
/// embedded in the full mode space (unit X-norm).
pub fn cluster_min_coercivity(sys: &SpectralSystem, indices: &[usize]) -> Result<(f64, CVector)> {
    if indices.is_empty() {
        return domain("empty cluster");
    }
    if let Some(&k) = indices.iter().find(|&&k| k >= sys.dim()) {
        return domain(format!("mode index {k} out of range"));
    }
    let sub = linalg::submatrix(sys.gram(), indices);
    let (mu, v) = linalg::hermitian_min_eig(&sub)?;
    let mut full = CVector::zeros(sys.dim());
    for (a, &k) in indices.iter().enumerate() {
        full[k] = v[a];
    }
    Ok((mu.max(0.0), full))
}

/// One clustered report per distinct eigenvalue `≤ lambda_max`, sorted by center.
pub fn coercivity_scan(sys: &SpectralSystem, epsilon: f64, lambda_max: f64) -> Result<Vec<ClusterReport>> {
    if !(epsilon > 0.0) {
        return domain(format!("cluster radius must be positive, got {epsilon}"));
    }
    let centers: Vec<f64> = sys
        .eigenvalue_groups()
        .into_iter()
        .map(|(l, _)| l)
        .filter(|&l| l <= lambda_max)
        .collect();
    let mut reports = centers
        .par_iter()
        .map(|&center| {
            let indices = enumerate_cluster(sys, center, epsilon)?;
            let (min_eig, min_vec) = cluster_min_coercivity(sys, &indices)?;
            Ok(ClusterReport { center, epsilon, indices, min_eig, min_vec })
        })
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(reports)
}

// Minimal acceptable ratio of the envelope constant fitted on all clusters to
// the one fitted on the lower half of the clusters.
const ENVELOPE_STABILITY: f64 = 0.75;

fn envelope_constant(points: &[(f64, f64)], p: f64) -> f64 {
    points
        .iter()
        .map(|&(center, min_eig)| min_eig * (1.0 + center).powf(p))
        .fold(f64::INFINITY, f64::min)
}

/// Fits `ψ(λ) = c/(1+λ)^p`, `p ∈ {0, 1, 2}`, below every cluster minimum.
///
/// `c` is the tightest constant for the given `p`. The smallest `p` is taken
/// whose constant does not collapse as the scan range grows (the constant from
/// all clusters stays within a factor 0.75 of the one from the lower half);
/// otherwise `p = 2`.
pub fn fit_psi_envelope(reports: &[ClusterReport]) -> Result<DecayFunction> {
    let points: Vec<(f64, f64)> = reports.iter().map(|r| (r.center, r.min_eig)).collect();
    fit_psi_envelope_from_minima(&points)
}

/// [`fit_psi_envelope`] on bare `(center, min_eig)` pairs.
pub fn fit_psi_envelope_from_minima(points: &[(f64, f64)]) -> Result<DecayFunction> {
    if points.is_empty() {
        return domain("no cluster reports to fit");
    }
    if let Some(&(center, min_eig)) = points.iter().find(|p| !(p.1 > MIN_EIG_FLOOR)) {
        return Err(Error::NotWeaklyCoercive { center, min_eig });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = &sorted[..sorted.len().div_ceil(2)];

    let mut chosen = (0.0, 2.0);
    for p in [0.0, 1.0, 2.0] {
        let c_all = envelope_constant(&sorted, p);
        if c_all >= ENVELOPE_STABILITY * envelope_constant(half, p) || p == 2.0 {
            chosen = (c_all * (1.0 - 1e-12), p);
            break;
        }
    }
    let psi = if chosen.1 == 0.0 {
        DecayFunction::constant(chosen.0)?
    } else {
        DecayFunction::power_law(chosen.0, chosen.1)?
    };
    if let Some(&(center, _)) = sorted.iter().find(|&&(c, m)| psi.eval(c) > m) {
        return Err(Error::Numeric(format!("envelope exceeds cluster minimum at center {center}")));
    }
    Ok(psi)
}

/// Weak certificate read off an eigenvalue-centered scan: the constant ε of
/// the scan and the fitted envelope.
pub fn weak_certificate_from_scan(reports: &[ClusterReport], psi: DecayFunction) -> Result<CoercivityCertificate> {
    let eps = reports.first().map(|r| r.epsilon).ok_or_else(|| Error::Domain("no reports".into()))?;
    CoercivityCertificate::new(
        DecayFunction::Constant { c: eps },
        psi,
        CertificateKind::WeakSpectral,
        "eigenvalue-centered cluster scan with fitted power-law envelope",
    )
}

/// Extends a weak certificate valid at eigenvalue centers to arbitrary
/// centers: `(ε, ψ) ↦ (ε/2, ψ(· + ε/2))`.
pub fn recenter_weak_certificate(cert: &CoercivityCertificate) -> Result<CoercivityCertificate> {
    let eps = cert.weak_epsilon()?;
    CoercivityCertificate::new(
        DecayFunction::Constant { c: eps / 2.0 },
        DecayFunction::Shifted { shift: eps / 2.0, inner: Box::new(cert.psi.clone()) },
        CertificateKind::WeakSpectral,
        format!("recentered ({})", cert.provenance),
    )
}

/// Weak → full spectral coercivity given the admissibility constant `M`:
/// `ε̃(λ) = ½(2M/ψ(λ) + 1/ε)⁻¹`, `ψ̃(λ) = ψ(λ)/4`.
pub fn weak_to_spectral(cert: &CoercivityCertificate, m: f64) -> Result<CoercivityCertificate> {
    let eps = cert.weak_epsilon()?;
    if !(m > 0.0 && m.is_finite()) {
        return domain(format!("admissibility constant must be positive, got {m}"));
    }
    let epsilon = DecayFunction::BetaTransform { m, epsilon: eps, psi: Box::new(cert.psi.clone()) };
    let psi = DecayFunction::Scaled { factor: 0.25, inner: Box::new(cert.psi.clone()) };
    epsilon.check_class(&CLASS_CHECK_GRID)?;
    psi.check_class(&CLASS_CHECK_GRID)?;
    CoercivityCertificate::new(
        epsilon,
        psi,
        CertificateKind::Spectral,
        format!("weak-to-spectral transform, M = {m:.15e} ({})", cert.provenance),
    )
}

/// Full → weak spectral coercivity on centers up to `lambda_max`: the cluster
/// radius is `β = √(ε(λ_max)/2)·(1 − 1e−9)`, so that `2β² < ε` there.
pub fn spectral_to_weak(cert: &CoercivityCertificate, lambda_max: f64) -> Result<CoercivityCertificate> {
    if cert.kind != CertificateKind::Spectral {
        return domain("expected a spectral certificate");
    }
    let beta = (cert.epsilon.eval(lambda_max) / 2.0).sqrt() * (1.0 - 1e-9);
    CoercivityCertificate::new(
        DecayFunction::Constant { c: beta },
        cert.psi.clone(),
        CertificateKind::WeakSpectral,
        format!("spectral-to-weak on centers ≤ {lambda_max} ({})", cert.provenance),
    )
}

/// The two ε candidates for one-sided partial observation with `ψ(λ) = δ/λ`
/// and cluster radius ½: `(1/((4M/δ)λ + 1), 1/((4M/δ)λ + 4))`.
/// Only the second is what the β transform yields.
pub fn one_sided_epsilon_pair(delta: f64, m: f64) -> Result<(DecayFunction, DecayFunction)> {
    if !(delta > 0.0 && m > 0.0) {
        return domain("δ and M must be positive");
    }
    let slope = 4.0 * m / delta;
    Ok((
        DecayFunction::InverseAffine { c: 1.0, slope, offset: 1.0 },
        DecayFunction::InverseAffine { c: 1.0, slope, offset: 4.0 },
    ))
}

/// Grid of `n` log-spaced points on `[λ_1/2, 2λ_max]` plus midpoints between
/// consecutive distinct eigenvalues, sorted and deduplicated.
pub fn default_lambda_grid(sys: &SpectralSystem, n: usize) -> Vec<f64> {
    let eigs = sys.eigenvalues();
    let lo = eigs[0] / 2.0;
    let hi = 2.0 * eigs[eigs.len() - 1];
    let mut grid: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            lo * (hi / lo).powf(t)
        })
        .collect();
    let groups = sys.eigenvalue_groups();
    grid.extend(groups.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)));
    sort_dedup(grid)
}

/// The default grid plus the cluster boundaries `λ_k ± ε`, where the
/// excluded-mode distances are smallest.
pub fn admissibility_grid(sys: &SpectralSystem, epsilon: f64, n: usize) -> Vec<f64> {
    let mut grid = default_lambda_grid(sys, n);
    for (l, _) in sys.eigenvalue_groups() {
        grid.push(l + epsilon);
        if l - epsilon >= 0.0 {
            grid.push(l - epsilon);
        }
    }
    sort_dedup(grid)
}

fn sort_dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Squared truncated admissibility constant:
/// `max_λ λ_max(D⁻¹ G|_V D⁻¹)`, `D = diag(λ_k − λ)` over `k ∉ N_ε(λ)`.
pub fn estimate_admissibility(sys: &SpectralSystem, epsilon: f64, lambda_grid: &[f64]) -> Result<f64> {
    if !(epsilon > 0.0) {
        return domain(format!("cluster radius must be positive, got {epsilon}"));
    }
    if lambda_grid.is_empty() {
        return domain("empty λ grid");
    }
    let values = lambda_grid
        .par_iter()
        .map(|&lambda| admissibility_at(sys, epsilon, lambda))
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

fn admissibility_at(sys: &SpectralSystem, epsilon: f64, lambda: f64) -> Result<f64> {
    let eigs = sys.eigenvalues();
    let kept: Vec<usize> = (0..sys.dim()).filter(|&k| (lambda - eigs[k]).abs() >= epsilon).collect();
    if kept.is_empty() {
        return domain(format!("cluster at λ = {lambda} covers every mode"));
    }
    let g = sys.gram();
    let h = CMatrix::from_fn(kept.len(), kept.len(), |a, b| {
        let (j, k) = (kept[a], kept[b]);
        g[(j, k)] / ((eigs[j] - lambda) * (eigs[k] - lambda))
    });
    let (top, _) = linalg::hermitian_max_eig(&h)?;
    Ok(top.max(0.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventRow {
    pub lambda: f64,
    pub observation_bound: f64,
    pub resolvent_bound: f64,
    /// `min(bounds) − ‖z‖²`
    pub margin: f64,
    /// `max(bounds) − ‖z‖²`
    pub margin_max_form: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventReport {
    pub lambda_z: f64,
    pub residual: f64,
    pub norm_sq: f64,
    pub rows: Vec<ResolventRow>,
    /// Every `margin ≥ −1e−9‖z‖²`.
    pub passes: bool,
    /// Every `margin_max_form ≥ −1e−9‖z‖²`.
    pub passes_max_form: bool,
}

impl ResolventReport {
    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }
    pub fn worst_margin_max_form(&self) -> f64 {
        self.rows.iter().map(|r| r.margin_max_form).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates `‖z‖² ≤ ‖Cz‖²/ψ(λ(z))` and `‖z‖² ≤ ‖(A−λ)z‖²/((λ−λ(z))² + ε(λ(z)))`
/// across a λ grid.
///
/// `passes` requires both bounds (the min form); `passes_max_form` requires
/// either one, which is what full spectral coercivity implies for every state.
pub fn resolvent_check(
    sys: &SpectralSystem,
    z: &StateVector,
    lambda_grid: &[f64],
    cert: &CoercivityCertificate,
) -> Result<ResolventReport> {
    if cert.kind != CertificateKind::Spectral {
        return domain("resolvent check needs a spectral certificate");
    }
    let fr = spectral::frequency_report(z, sys)?;
    let observed = sys.observed_energy(z)?;
    let obs_bound = observed / cert.psi.eval(fr.lambda_z);
    let eps = cert.epsilon.eval(fr.lambda_z);
    let tol = -RESOLVENT_TOL * fr.norm_sq;
    let rows: Vec<ResolventRow> = lambda_grid
        .iter()
        .map(|&lambda| {
            let shifted = spectral::shifted_norm_sq(z, sys.eigenvalues(), lambda);
            let res_bound = shifted / ((lambda - fr.lambda_z).powi(2) + eps);
            ResolventRow {
                lambda,
                observation_bound: obs_bound,
                resolvent_bound: res_bound,
                margin: obs_bound.min(res_bound) - fr.norm_sq,
                margin_max_form: obs_bound.max(res_bound) - fr.norm_sq,
            }
        })
        .collect();
    let passes = rows.iter().all(|r| r.margin >= tol);
    let passes_max_form = rows.iter().all(|r| r.margin_max_form >= tol);
    Ok(ResolventReport {
        lambda_z: fr.lambda_z,
        residual: fr.residual,
        norm_sq: fr.norm_sq,
        rows,
        passes,
        passes_max_form,
    })
}

/// A state violating a spectral certificate.
#[derive(Debug, Clone)]
pub struct Violation {
    pub z: StateVector,
    pub lambda_z: f64,
    pub residual: f64,
    pub epsilon_at: f64,
    /// `‖Cz‖²/‖z‖²`
    pub observed_ratio: f64,
    pub psi_at: f64,
    /// `ψ(λ(z)) − ‖Cz‖²/‖z‖²`, positive for a violation.
    pub deficit: f64,
    pub trial: usize,
}

fn evaluate_candidate(
    sys: &SpectralSystem,
    cert: &CoercivityCertificate,
    z: StateVector,
    trial: usize,
) -> Option<Violation> {
    let fr = spectral::frequency_report(&z, sys).ok()?;
    let epsilon_at = cert.epsilon.eval(fr.lambda_z);
    if !(fr.residual < epsilon_at) {
        return None;
    }
    let observed_ratio = sys.observed_energy(&z).ok()? / fr.norm_sq;
    let psi_at = cert.psi.eval(fr.lambda_z);
    let deficit = psi_at - observed_ratio;
    (deficit > 0.0).then_some(Violation {
        z,
        lambda_z: fr.lambda_z,
        residual: fr.residual,
        epsilon_at,
        observed_ratio,
        psi_at,
        deficit,
        trial,
    })
}

fn worse(a: Option<Violation>, b: Option<Violation>) -> Option<Violation> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.deficit > a.deficit || (b.deficit == a.deficit && b.trial < a.trial) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

const SEARCH_CHUNK: usize = 256;

/// Randomized search for a state with `residual(z) < ε(λ(z))` and
/// `‖Cz‖² < ψ(λ(z))‖z‖²`. Returns the worst violator (largest deficit).
///
/// Candidates: the Gram minimizer of every eigenvalue group, then `trials`
/// random states, each supported on a cluster around a random eigenvalue
/// (complex Gaussian, half of them seeded from the group minimizer) plus a
/// perturbation of relative size `10^{−u}`, `u ~ U[1, 6]`, on up to five
/// neighboring modes. Deterministic given `seed`.
pub fn spectral_coercivity_violation_search(
    sys: &SpectralSystem,
    cert: &CoercivityCertificate,
    trials: usize,
    seed: u64,
) -> Result<Option<Violation>> {
    if cert.kind != CertificateKind::Spectral {
        return domain("violation search needs a spectral certificate");
    }
    let groups = sys.eigenvalue_groups();
    let minimizers = groups
        .iter()
        .map(|(_, idx)| cluster_min_coercivity(sys, idx).map(|(_, v)| v))
        .collect::<Result<Vec<CVector>>>()?;

    let mut worst = None;
    for v in &minimizers {
        worst = worse(worst, evaluate_candidate(sys, cert, StateVector { coefficients: v.clone() }, 0));
    }

    let chunks: Vec<usize> = (0..trials.div_ceil(SEARCH_CHUNK)).collect();
    let found = chunks
        .par_iter()
        .map(|&chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let mut local = None;
            let end = ((chunk + 1) * SEARCH_CHUNK).min(trials);
            for trial in chunk * SEARCH_CHUNK..end {
                let z = random_near_cluster(sys, cert, &groups, &minimizers, &mut rng);
                local = worse(local, evaluate_candidate(sys, cert, z, trial + 1));
            }
            local
        })
        .reduce(|| None, worse);
    Ok(worse(worst, found))
}

fn random_near_cluster<R: Rng>(
    sys: &SpectralSystem,
    cert: &CoercivityCertificate,
    groups: &[(f64, Vec<usize>)],
    minimizers: &[CVector],
    rng: &mut R,
) -> StateVector {
    let n = sys.dim();
    let g = rng.random_range(0..groups.len());
    let center = groups[g].0;
    let mut z = if rng.random_bool(0.5) {
        StateVector { coefficients: minimizers[g].clone() }
    } else {
        let width = (cert.epsilon.eval(center) / 2.0).sqrt();
        let mut support = enumerate_cluster(sys, center, width.max(1e-300)).unwrap_or_default();
        if support.is_empty() {
            support = groups[g].1.clone();
        }
        StateVector::random_supported(n, &support, rng)
    };
    let norm = z.norm_sq().sqrt();
    let lo = *groups[g].1.first().expect("nonempty group");
    let hi = *groups[g].1.last().expect("nonempty group");
    let count = rng.random_range(1..=5usize);
    let magnitude = 10f64.powf(-rng.random_range(1.0..6.0)) * norm;
    for _ in 0..count {
        let offset = rng.random_range(1..=3usize);
        let k = if rng.random_bool(0.5) { lo.checked_sub(offset) } else { Some(hi + offset) };
        if let Some(k) = k.filter(|&k| k < n) {
            let dir = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
            z.coefficients[k] += dir * magnitude;
        }
    }
    z
}

/// Output of the scan → fit → recenter → transform chain.
#[derive(Debug, Clone)]
pub struct CertificatePipeline {
    pub reports: Vec<ClusterReport>,
    pub fitted_psi: DecayFunction,
    pub weak: CoercivityCertificate,
    pub recentered: CoercivityCertificate,
    pub admissibility_sq: f64,
    pub spectral: CoercivityCertificate,
}

/// Builds a spectral certificate from cluster data alone.
pub fn certificate_pipeline(sys: &SpectralSystem, epsilon: f64, lambda_max: f64) -> Result<CertificatePipeline> {
    let reports = coercivity_scan(sys, epsilon, lambda_max)?;
    let fitted_psi = fit_psi_envelope(&reports)?;
    let weak = weak_certificate_from_scan(&reports, fitted_psi.clone())?;
    let recentered = recenter_weak_certificate(&weak)?;
    let eps_r = recentered.weak_epsilon()?;
    let grid = admissibility_grid(sys, eps_r, 512);
    let admissibility_sq = estimate_admissibility(sys, eps_r, &grid)?;
    // a zero constant (unobserved complement) still admits any positive M
    let m = admissibility_sq.sqrt().max(f64::MIN_POSITIVE.sqrt());
    let spectral = weak_to_spectral(&recentered, m)?;
    Ok(CertificatePipeline { reports, fitted_psi, weak, recentered, admissibility_sq, spectral })
}
