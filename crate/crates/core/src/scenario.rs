//! Scenario orchestration: one pipeline per [`Scenario`], each producing
//! tables and pass/fail verdicts in a [`ReportBundle`].
//!
//! Random states come from a single `ChaCha8Rng` seeded with `cfg.seed` and
//! are drawn sequentially, so reports do not depend on the thread count.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coercivity::{self, CertificatePipeline, DecayFunction};
use crate::config::{RunConfig, Scenario, SystemConfig};
use crate::error::Error;
use crate::evolution;
use crate::report::{human, Cell, ReportBundle, Table};
use crate::spectral::{self, SpectralSystem, StateVector};
use crate::square::{self, GammaSpec};
use crate::window::{self, Theta1Variant};

/// Standard τ grid for the cutoff transform.
pub const CUTOFF_GRID_POINTS: usize = 4001;
pub const CUTOFF_GRID_HALF_WIDTH: f64 = 200.0;
pub const CUTOFF_TOL: f64 = 1e-9;
/// Points of the λ grid used by the resolvent scan.
pub const RESOLVENT_GRID_POINTS: usize = 200;
/// Factor applied to ψ to produce a certificate that must be refuted.
pub const INFLATION_FACTOR: f64 = 10.0;
/// Horizon for the admissibility scenario when `T` is not configured.
pub const DEFAULT_ADMISSIBILITY_T: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
#[error("scenario {scenario}: {source}")]
pub struct ScenarioError {
    pub scenario: Scenario,
    #[source]
    pub source: Error,
}

type SResult<T> = std::result::Result<T, Error>;

pub fn run_scenario(cfg: &RunConfig) -> Result<ReportBundle, ScenarioError> {
    let wrap = |source| ScenarioError { scenario: cfg.scenario, source };
    let mut bundle = ReportBundle::new(cfg).map_err(wrap)?;
    match cfg.scenario {
        Scenario::VerifyCutoff => verify_cutoff(&mut bundle),
        Scenario::CoercivityScan => coercivity_scan(cfg, &mut bundle),
        Scenario::ResolventScan => resolvent_scan(cfg, &mut bundle),
        Scenario::WeakObservability => weak_observability(cfg, &mut bundle),
        Scenario::AssumptionI => assumption_i(cfg, &mut bundle),
        Scenario::AssumptionIiIii => assumption_ii_iii(cfg, &mut bundle),
        Scenario::Admissibility => admissibility(cfg, &mut bundle),
    }
    .map_err(wrap)?;
    Ok(bundle)
}

/// The spectral system a configuration describes.
pub fn build_system(cfg: &RunConfig) -> SResult<SpectralSystem> {
    match &cfg.system {
        SystemConfig::Square { gamma, n_max_eigenvalue } => square::build_square_system(*n_max_eigenvalue, gamma),
        SystemConfig::Custom { eigenvalues, .. } => {
            SpectralSystem::new(eigenvalues.clone(), cfg.system.custom_gram().expect("custom"), "custom")
        }
    }
}

pub fn cutoff_grid() -> Vec<f64> {
    let n = CUTOFF_GRID_POINTS;
    (0..n)
        .map(|i| -CUTOFF_GRID_HALF_WIDTH + 2.0 * CUTOFF_GRID_HALF_WIDTH * i as f64 / (n - 1) as f64)
        .collect()
}

fn verify_cutoff(b: &mut ReportBundle) -> SResult<()> {
    let grid = cutoff_grid();
    let quad = grid
        .par_iter()
        .map(|&tau| window::chi_hat_quadrature(tau, 1e-14))
        .collect::<SResult<Vec<f64>>>()?;
    let mut t = Table::new("cutoff_transform", &["tau", "chi_hat", "chi_hat_quadrature", "scaled_abs"]);
    let (mut lo, mut hi, mut max_diff) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let (mut argmax, mut argmin) = (0.0, 0.0);
    for (&tau, &q) in grid.iter().zip(&quad) {
        let c = window::chi_hat(tau);
        let scaled = (1.0 + tau * tau) * c.abs();
        if scaled > hi {
            hi = scaled;
            argmax = tau;
        }
        if scaled < lo {
            lo = scaled;
            argmin = tau;
        }
        max_diff = max_diff.max((c - q).abs());
        t.push(vec![tau.into(), c.into(), q.into(), scaled.into()]);
    }
    b.tables.push(t);
    let (k1, k2) = (window::KAPPA1, window::KAPPA2);
    b.verdict(
        "cutoff_sandwich",
        lo >= k1 - CUTOFF_TOL && hi <= k2 + CUTOFF_TOL,
        format!(
            "(1+τ²)|χ̂| ranges over [{} at τ={}, {} at τ={}]; band [{}, {}]",
            human(lo),
            human(argmin),
            human(hi),
            human(argmax),
            human(k1),
            human(k2)
        ),
    );
    let zero_exact = (1.0 + (-2.0f64).exp()) / 2.0;
    let zero_quad = window::chi_hat_quadrature(0.0, 1e-15)?;
    b.verdict(
        "chi_hat_zero",
        (window::chi_hat(0.0) - zero_exact).abs() <= 1e-12 && (zero_quad - zero_exact).abs() <= 1e-12,
        format!("χ̂(0) = {}, quadrature {}", human(window::chi_hat(0.0)), human(zero_quad)),
    );
    b.verdict(
        "closed_form_vs_quadrature",
        max_diff <= CUTOFF_TOL,
        format!("max |closed form − quadrature| = {max_diff:.3e}"),
    );
    Ok(())
}

fn scan_points(cfg: &RunConfig, sys: Option<&SpectralSystem>) -> SResult<Vec<(f64, usize, f64)>> {
    match (&cfg.system, sys) {
        (SystemConfig::Square { gamma, n_max_eigenvalue }, _) => Ok(square::circle_scan(gamma, *n_max_eigenvalue)?
            .into_iter()
            .map(|r| (r.n as f64, r.size, r.min_eig))
            .collect()),
        (SystemConfig::Custom { .. }, Some(sys)) => {
            let lambda_max = *sys.eigenvalues().last().expect("nonempty");
            Ok(coercivity::coercivity_scan(sys, cfg.epsilon_cluster, lambda_max)?
                .into_iter()
                .map(|r| (r.center, r.indices.len(), r.min_eig))
                .collect())
        }
        (SystemConfig::Custom { .. }, None) => unreachable!("custom scan needs the system"),
    }
}

fn coercivity_scan(cfg: &RunConfig, b: &mut ReportBundle) -> SResult<()> {
    let sys = match cfg.system {
        SystemConfig::Custom { .. } => Some(build_system(cfg)?),
        SystemConfig::Square { .. } => None,
    };
    let points = scan_points(cfg, sys.as_ref())?;
    let mut t = Table::new("clusters", &["N", "size", "mu_N", "N_mu_N"]);
    for &(n, size, mu) in &points {
        let label = match cfg.system {
            SystemConfig::Square { .. } => Cell::Int(n as i64),
            SystemConfig::Custom { .. } => Cell::Num(n),
        };
        t.push(vec![label, size.into(), mu.into(), (n * mu).into()]);
    }
    b.tables.push(t);
    let (argmin, delta_hat) = points
        .iter()
        .map(|&(n, _, mu)| (n, n * mu))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Domain("no nonempty cluster".into()))?;
    b.verdict(
        "delta_hat_positive",
        delta_hat > coercivity::MIN_EIG_FLOOR,
        format!("δ̂ = min N·μ_N = {} at N = {argmin}", human(delta_hat)),
    );
    let minima: Vec<(f64, f64)> = points.iter().map(|&(n, _, mu)| (n, mu)).collect();
    match coercivity::fit_psi_envelope_from_minima(&minima) {
        Ok(psi) => b.verdict("psi_envelope", true, serde_json::to_string(&psi).expect("serializes")),
        Err(e) => b.verdict("psi_envelope", false, e.to_string()),
    }
    Ok(())
}

fn pipeline_or_verdict(sys: &SpectralSystem, cfg: &RunConfig, b: &mut ReportBundle) -> SResult<Option<CertificatePipeline>> {
    let lambda_max = *sys.eigenvalues().last().expect("nonempty");
    match coercivity::certificate_pipeline(sys, cfg.epsilon_cluster, lambda_max) {
        Ok(p) => {
            let mut t = Table::new("certificate", &["stage", "epsilon", "psi"]);
            for (stage, c) in [("weak", &p.weak), ("recentered", &p.recentered), ("spectral", &p.spectral)] {
                t.push(vec![
                    stage.into(),
                    serde_json::to_string(&c.epsilon).expect("serializes").into(),
                    serde_json::to_string(&c.psi).expect("serializes").into(),
                ]);
            }
            t.push(vec!["admissibility_M_sq".into(), p.admissibility_sq.into(), "".into()]);
            b.tables.push(t);
            b.verdict("certificate_pipeline", true, format!("M² = {}", human(p.admissibility_sq)));
            Ok(Some(p))
        }
        Err(e @ Error::NotWeaklyCoercive { .. }) => {
            b.verdict("certificate_pipeline", false, e.to_string());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn random_states(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<StateVector> {
    (0..count).map(|_| StateVector::random(dim, rng)).collect()
}

fn resolvent_scan(cfg: &RunConfig, b: &mut ReportBundle) -> SResult<()> {
    let sys = build_system(cfg)?;
    let Some(p) = pipeline_or_verdict(&sys, cfg, b)? else { return Ok(()) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let states = random_states(sys.dim(), cfg.trials, &mut rng);
    let base_grid = coercivity::default_lambda_grid(&sys, RESOLVENT_GRID_POINTS);
    let reports = states
        .par_iter()
        .map(|z| {
            let mut grid = base_grid.clone();
            grid.push(spectral::frequency(z, &sys)?);
            coercivity::resolvent_check(&sys, z, &grid, &p.spectral)
        })
        .collect::<SResult<Vec<_>>>()?;
    let mut t = Table::new(
        "resolvent",
        &["trial", "lambda_z", "residual", "norm_sq", "worst_margin", "worst_margin_max_form", "passes", "passes_max_form"],
    );
    for (i, r) in reports.iter().enumerate() {
        t.push(vec![
            i.into(),
            r.lambda_z.into(),
            r.residual.into(),
            r.norm_sq.into(),
            r.worst_margin().into(),
            r.worst_margin_max_form().into(),
            r.passes.into(),
            r.passes_max_form.into(),
        ]);
    }
    b.tables.push(t);
    let fails = reports.iter().filter(|r| !r.passes).count();
    let fails_max = reports.iter().filter(|r| !r.passes_max_form).count();
    b.verdict("resolvent_min_form", fails == 0, format!("{fails} of {} states with a negative margin", reports.len()));
    b.verdict(
        "resolvent_max_form",
        fails_max == 0,
        format!("{fails_max} of {} states with a negative margin", reports.len()),
    );

    let mut vt = Table::new(
        "violation_search",
        &["certificate", "found", "trial", "lambda_z", "residual", "epsilon_at", "observed_ratio", "psi_at", "deficit"],
    );
    let mut inflated = p.spectral.clone();
    inflated.psi = DecayFunction::Scaled { factor: INFLATION_FACTOR, inner: Box::new(p.spectral.psi.clone()) };
    let mut outcomes = Vec::new();
    for (label, cert) in [("pipeline", &p.spectral), ("inflated", &inflated)] {
        let v = coercivity::spectral_coercivity_violation_search(&sys, cert, cfg.search_trials, cfg.seed)?;
        match &v {
            Some(v) => vt.push(vec![
                label.into(),
                true.into(),
                v.trial.into(),
                v.lambda_z.into(),
                v.residual.into(),
                v.epsilon_at.into(),
                v.observed_ratio.into(),
                v.psi_at.into(),
                v.deficit.into(),
            ]),
            None => vt.push(vec![
                label.into(),
                false.into(),
                Cell::Text(String::new()),
                Cell::Text(String::new()),
                Cell::Text(String::new()),
                Cell::Text(String::new()),
                Cell::Text(String::new()),
                Cell::Text(String::new()),
                Cell::Text(String::new()),
            ]),
        }
        outcomes.push(v);
    }
    b.tables.push(vt);
    b.verdict(
        "no_violation",
        outcomes[0].is_none(),
        match &outcomes[0] {
            None => format!("no counterexample in {} trials", cfg.search_trials),
            Some(v) => format!("counterexample at trial {} with deficit {}", v.trial, human(v.deficit)),
        },
    );
    b.verdict(
        "inflated_psi_caught",
        outcomes[1].is_some(),
        match &outcomes[1] {
            Some(v) => format!("ψ×{INFLATION_FACTOR} refuted at trial {} with deficit {}", v.trial, human(v.deficit)),
            None => format!("ψ×{INFLATION_FACTOR} survived {} trials", cfg.search_trials),
        },
    );
    Ok(())
}

fn weak_observability(cfg: &RunConfig, b: &mut ReportBundle) -> SResult<()> {
    let sys = build_system(cfg)?;
    let Some(p) = pipeline_or_verdict(&sys, cfg, b)? else { return Ok(()) };
    let th = window::theta_constants(&window::cutoff_profile()?)?;
    let th_inf = th.with_variant(Theta1Variant::LInf);
    let (psi, eps) = (&p.spectral.psi, &p.spectral.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let states = random_states(sys.dim(), cfg.trials, &mut rng);
    let rows = states
        .par_iter()
        .map(|z| {
            let lambda = spectral::frequency(z, &sys)?;
            let t = match cfg.t {
                Some(t) => t,
                None => 2.0 * window::solve_observation_time(lambda, eps, &th)?,
            };
            let l2 = evolution::weak_observability_check(z, &sys, t, psi, eps, &th)?;
            let linf = evolution::weak_observability_check(z, &sys, t, psi, eps, &th_inf)?;
            Ok((l2, linf))
        })
        .collect::<SResult<Vec<_>>>()?;
    let mut t = Table::new(
        "observability",
        &[
            "trial",
            "lambda_z0",
            "T",
            "integral",
            "lhs",
            "margin",
            "T_min_l2",
            "applicable_l2",
            "T_min_linf",
            "applicable_linf",
            "diagnostic_integral",
        ],
    );
    for (i, (l2, linf)) in rows.iter().enumerate() {
        t.push(vec![
            i.into(),
            l2.lambda_z0.into(),
            l2.t.into(),
            l2.integral.into(),
            l2.lhs.into(),
            l2.margin.into(),
            l2.t_min.into(),
            l2.applicable.into(),
            linf.t_min.into(),
            linf.applicable.into(),
            l2.diagnostic_integral.into(),
        ]);
    }
    b.tables.push(t);
    for (name, pick) in [("weak_observability_l2", 0usize), ("weak_observability_linf", 1)] {
        let reps: Vec<_> = rows.iter().map(|r| if pick == 0 { &r.0 } else { &r.1 }).collect();
        let applicable: Vec<_> = reps.iter().filter(|r| r.applicable).collect();
        let negative = applicable.iter().filter(|r| r.margin < 0.0).count();
        let worst = applicable.iter().map(|r| r.margin / r.integral.max(f64::MIN_POSITIVE)).fold(f64::INFINITY, f64::min);
        let pass = negative == 0 && (pick == 1 || !applicable.is_empty());
        b.verdict(
            name,
            pass,
            format!(
                "{negative} negative margins among {} applicable of {} states; worst relative margin {}",
                applicable.len(),
                reps.len(),
                human(worst)
            ),
        );
    }
    Ok(())
}

fn assumption_i(cfg: &RunConfig, b: &mut ReportBundle) -> SResult<()> {
    let n_max = square_n_max(cfg)?;
    let rep = square::assumption_i_check(n_max)?;
    let mut t = Table::new("clusters", &["N", "size", "mu_N", "deviation"]);
    let target = 2.0 / PI;
    for r in &rep.rows {
        t.push(vec![r.n.into(), r.size.into(), r.min_eig.into(), (r.min_eig - target).abs().into()]);
    }
    b.tables.push(t);
    b.verdict(
        "cluster_minima_equal_2_over_pi",
        rep.max_deviation <= 1e-10,
        format!("max |μ_N − 2/π| = {:.3e} over {} clusters", rep.max_deviation, rep.rows.len()),
    );
    b.verdict(
        "psi_constant",
        rep.fitted_psi.is_constant(),
        serde_json::to_string(&rep.fitted_psi).expect("serializes"),
    );
    Ok(())
}

fn square_n_max(cfg: &RunConfig) -> SResult<u64> {
    match &cfg.system {
        SystemConfig::Square { n_max_eigenvalue, .. } => Ok(*n_max_eigenvalue),
        SystemConfig::Custom { .. } => Err(Error::Domain("this scenario needs a square system".into())),
    }
}

fn square_gamma(cfg: &RunConfig) -> SResult<&GammaSpec> {
    match &cfg.system {
        SystemConfig::Square { gamma, .. } => Ok(gamma),
        SystemConfig::Custom { .. } => Err(Error::Domain("this scenario needs a square system".into())),
    }
}

fn assumption_ii_iii(cfg: &RunConfig, b: &mut ReportBundle) -> SResult<()> {
    let gamma = square_gamma(cfg)?;
    let fit = square::delta_gamma_fit(gamma, square_n_max(cfg)?)?;
    let full_bottom = *gamma == GammaSpec::full_side(square::Side::Bottom);
    let mut t = Table::new("clusters", &["N", "size", "mu_N", "N_mu_N", "generalized_min_eig", "closed_form_N_mu_N"]);
    let mut closed_dev = 0.0f64;
    for r in &fit.rows {
        let closed = full_bottom
            .then(|| square::min_q_on_circle(r.n).map(|q| 2.0 * (q as f64).powi(2) / PI))
            .flatten();
        if let Some(c) = closed {
            closed_dev = closed_dev.max((c - r.scaled_min_eig).abs() / c);
        }
        t.push(vec![
            r.n.into(),
            r.size.into(),
            r.min_eig.into(),
            r.scaled_min_eig.into(),
            r.generalized_min_eig.into(),
            closed.into(),
        ]);
    }
    b.tables.push(t);
    b.verdict(
        "delta_hat_positive",
        fit.delta_hat > coercivity::MIN_EIG_FLOOR,
        format!("δ̂ = {} at N = {}", human(fit.delta_hat), fit.argmin_n),
    );
    if full_bottom {
        b.verdict(
            "closed_form_2qmin2_over_pi",
            closed_dev <= 1e-10,
            format!("max relative deviation {closed_dev:.3e}"),
        );
    }
    b.verdict(
        "generalized_restatement_with_delta_hat",
        fit.delta_generalized >= fit.delta_hat * (1.0 - 1e-10),
        format!("min generalized eigenvalue {} vs δ̂ {}", human(fit.delta_generalized), human(fit.delta_hat)),
    );
    b.verdict(
        "generalized_restatement_positive",
        fit.delta_generalized > coercivity::MIN_EIG_FLOOR,
        format!("min generalized eigenvalue {}", human(fit.delta_generalized)),
    );
    Ok(())
}

fn admissibility(cfg: &RunConfig, b: &mut ReportBundle) -> SResult<()> {
    let sys = build_system(cfg)?;
    let horizon = cfg.t.unwrap_or(DEFAULT_ADMISSIBILITY_T);
    let grid = coercivity::admissibility_grid(&sys, cfg.epsilon_cluster, 512);
    let m_sq = coercivity::estimate_admissibility(&sys, cfg.epsilon_cluster, &grid)?;
    let c_t = evolution::sharp_admissibility_constant(&sys, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let states = random_states(sys.dim(), cfg.trials, &mut rng);
    let reps = states
        .par_iter()
        .map(|z| {
            let integral = evolution::observability_integral(z, &sys, horizon)?;
            let rep = evolution::admissibility_check(z, &sys, horizon, c_t)?;
            Ok((z.norm_sq(), integral, rep))
        })
        .collect::<SResult<Vec<_>>>()?;
    let mut t = Table::new("admissibility", &["trial", "norm_sq", "integral", "C_T_norm_sq", "margin"]);
    for (i, (n, integral, rep)) in reps.iter().enumerate() {
        t.push(vec![i.into(), (*n).into(), (*integral).into(), (c_t * n).into(), rep.margin.into()]);
    }
    b.tables.push(t);
    let mut s = Table::new("admissibility_constants", &["name", "value"]);
    s.push(vec!["T".into(), horizon.into()]);
    s.push(vec!["C_T".into(), c_t.into()]);
    s.push(vec!["M_sq".into(), m_sq.into()]);
    b.tables.push(s);
    let negative = reps.iter().filter(|(n, _, r)| r.margin < -1e-10 * c_t * n).count();
    b.verdict(
        "admissibility_bound",
        negative == 0,
        format!("C_T = {} at T = {}; {negative} of {} states exceed it", human(c_t), human(horizon), reps.len()),
    );
    b.verdict("admissibility_m_finite", m_sq.is_finite(), format!("M² = {}", human(m_sq)));
    Ok(())
}
