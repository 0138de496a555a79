//! Run configuration, read from TOML.
//!
//! ```toml
//! scenario = "coercivity_scan"
//! epsilon_cluster = 0.5
//! trials = 100
//! seed = 7
//! T = 2.0
//! output_path = "out"
//!
//! [system]
//! kind = "square"
//! n_max_eigenvalue = 200
//! gamma = [{ side = "bottom", alpha = 0.0, beta = "pi" }]
//! ```
//!
//! A custom system gives `eigenvalues = [...]`, `gram = [[...], ...]` (real
//! part, row-major) and optionally `gram_imag` of the same shape. Patch
//! endpoints accept numbers or `pi` expressions (`"pi"`, `"pi/4"`, `"3pi/4"`,
//! `"0.5*pi"`).

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::spectral::HERMITIAN_TOL;
use crate::square::{BoundaryPatch, GammaSpec, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    VerifyCutoff,
    CoercivityScan,
    ResolventScan,
    WeakObservability,
    #[serde(rename = "assumption_i")]
    AssumptionI,
    #[serde(rename = "assumption_ii_iii")]
    AssumptionIiIii,
    Admissibility,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::VerifyCutoff => "verify_cutoff",
            Scenario::CoercivityScan => "coercivity_scan",
            Scenario::ResolventScan => "resolvent_scan",
            Scenario::WeakObservability => "weak_observability",
            Scenario::AssumptionI => "assumption_i",
            Scenario::AssumptionIiIii => "assumption_ii_iii",
            Scenario::Admissibility => "admissibility",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    Square { gamma: GammaSpec, n_max_eigenvalue: u64 },
    Custom { eigenvalues: Vec<f64>, gram_re: Vec<Vec<f64>>, gram_im: Vec<Vec<f64>> },
}

impl SystemConfig {
    pub fn custom_gram(&self) -> Option<CMatrix> {
        match self {
            SystemConfig::Custom { gram_re, gram_im, .. } => {
                let n = gram_re.len();
                Some(CMatrix::from_fn(n, n, |j, k| Complex64::new(gram_re[j][k], gram_im[j][k])))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub scenario: Scenario,
    pub epsilon_cluster: f64,
    pub trials: usize,
    pub search_trials: usize,
    pub seed: u64,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// Excluded from the config hash: where a report lands does not change it.
    #[serde(skip)]
    pub output_path: Option<String>,
}

impl RunConfig {
    /// Default run on the square with the full bottom side observed.
    pub fn default_for(scenario: Scenario) -> Self {
        Self {
            system: SystemConfig::Square {
                gamma: GammaSpec::full_side(Side::Bottom),
                n_max_eigenvalue: 50,
            },
            scenario,
            epsilon_cluster: 0.5,
            trials: 100,
            search_trials: 10_000,
            seed: 0,
            t: None,
            output_path: None,
        }
    }
}

/// Configuration errors; each kind maps to its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid configuration: {0}")]
    Invariant(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Endpoint {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPatch {
    side: Side,
    alpha: Endpoint,
    beta: Endpoint,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawSystem {
    Square {
        n_max_eigenvalue: i64,
        gamma: Vec<RawPatch>,
    },
    Custom {
        eigenvalues: Vec<f64>,
        gram: Vec<Vec<f64>>,
        gram_imag: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    scenario: Option<Scenario>,
    epsilon_cluster: Option<f64>,
    trials: Option<i64>,
    search_trials: Option<i64>,
    seed: Option<u64>,
    #[serde(rename = "T")]
    t: Option<f64>,
    output_path: Option<String>,
}

/// 1-based line of the first line defining `key`, for error messages.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.starts_with(key) && l[key.len()..].trim_start().starts_with('=')
    })
    .map(|i| i + 1)
}

fn anchored(text: &str, key: &str, msg: String) -> String {
    match line_of(text, key) {
        Some(line) => format!("line {line} ({key}): {msg}"),
        None => format!("{key}: {msg}"),
    }
}

fn parse_endpoint(e: &Endpoint) -> Result<f64, String> {
    match e {
        Endpoint::Number(x) => Ok(*x),
        Endpoint::Expr(s) => parse_pi_expr(s),
    }
}

/// `pi`, `k*pi`, `kpi`, `pi/m`, `k*pi/m`, or a plain number.
pub fn parse_pi_expr(s: &str) -> Result<f64, String> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot read '{s}' as a number or multiple of pi");
    let Some(pos) = compact.find("pi") else {
        return compact.parse::<f64>().map_err(|_| bad());
    };
    let (head, tail) = (&compact[..pos], &compact[pos + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().map_err(|_| bad())? };
    let divisor = match tail {
        "" => 1.0,
        t => t.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    if divisor == 0.0 {
        return Err(bad());
    }
    Ok(factor * PI / divisor)
}

pub fn load_config_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    load_config(&text)
}

/// Parses and validates a configuration document.
pub fn load_config(text: &str) -> Result<RunConfig, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))?;
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| ConfigError::Schema(e.to_string().trim_end().to_string()))?;

    let defaults = RunConfig::default_for(raw.scenario.unwrap_or(Scenario::CoercivityScan));
    let system = match raw.system {
        RawSystem::Square { n_max_eigenvalue, gamma } => {
            if n_max_eigenvalue < 2 {
                return Err(ConfigError::Invariant(anchored(
                    text,
                    "n_max_eigenvalue",
                    format!("must be ≥ 2, got {n_max_eigenvalue}"),
                )));
            }
            let mut patches = Vec::with_capacity(gamma.len());
            for (i, p) in gamma.iter().enumerate() {
                let alpha = parse_endpoint(&p.alpha)
                    .map_err(|m| ConfigError::Schema(anchored(text, "gamma", format!("patch {i}: {m}"))))?;
                let beta = parse_endpoint(&p.beta)
                    .map_err(|m| ConfigError::Schema(anchored(text, "gamma", format!("patch {i}: {m}"))))?;
                patches.push(BoundaryPatch { side: p.side, alpha, beta });
            }
            let gamma = GammaSpec { patches };
            gamma
                .validate()
                .map_err(|e| ConfigError::Invariant(anchored(text, "gamma", e.to_string())))?;
            SystemConfig::Square { gamma, n_max_eigenvalue: n_max_eigenvalue as u64 }
        }
        RawSystem::Custom { eigenvalues, gram, gram_imag } => {
            let n = eigenvalues.len();
            if n == 0 {
                return Err(ConfigError::Invariant(anchored(text, "eigenvalues", "no modes".into())));
            }
            let gram_imag = gram_imag.unwrap_or_else(|| vec![vec![0.0; n]; n]);
            for (name, m) in [("gram", &gram), ("gram_imag", &gram_imag)] {
                if m.len() != n || m.iter().any(|row| row.len() != n) {
                    return Err(ConfigError::Invariant(anchored(
                        text,
                        name,
                        format!("must be {n}×{n} to match the eigenvalue count"),
                    )));
                }
            }
            for j in 0..n {
                for k in j..n {
                    let djk = Complex64::new(gram[j][k], gram_imag[j][k]);
                    let dkj = Complex64::new(gram[k][j], gram_imag[k][j]);
                    if (djk - dkj.conj()).norm() > HERMITIAN_TOL {
                        return Err(ConfigError::Schema(anchored(
                            text,
                            "gram",
                            format!("entry ({j},{k}) is not Hermitian: {djk} vs conj({dkj})"),
                        )));
                    }
                }
            }
            if let Some(k) = eigenvalues.iter().position(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(ConfigError::Invariant(anchored(
                    text,
                    "eigenvalues",
                    format!("eigenvalue {k} must be strictly positive"),
                )));
            }
            if let Some(k) = eigenvalues.windows(2).position(|w| w[1] < w[0]) {
                return Err(ConfigError::Invariant(anchored(
                    text,
                    "eigenvalues",
                    format!("must be sorted non-decreasing (index {})", k + 1),
                )));
            }
            SystemConfig::Custom { eigenvalues, gram_re: gram, gram_im: gram_imag }
        }
    };

    let trials = raw.trials.unwrap_or(defaults.trials as i64);
    if trials < 1 {
        return Err(ConfigError::Invariant(anchored(text, "trials", format!("must be ≥ 1, got {trials}"))));
    }
    let search_trials = raw.search_trials.unwrap_or(defaults.search_trials as i64);
    if search_trials < 1 {
        return Err(ConfigError::Invariant(anchored(
            text,
            "search_trials",
            format!("must be ≥ 1, got {search_trials}"),
        )));
    }
    let epsilon_cluster = raw.epsilon_cluster.unwrap_or(defaults.epsilon_cluster);
    if !(epsilon_cluster > 0.0 && epsilon_cluster.is_finite()) {
        return Err(ConfigError::Invariant(anchored(
            text,
            "epsilon_cluster",
            format!("must be positive, got {epsilon_cluster}"),
        )));
    }
    if let Some(t) = raw.t {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ConfigError::Invariant(anchored(text, "T", format!("must be positive, got {t}"))));
        }
    }
    Ok(RunConfig {
        system,
        scenario: defaults.scenario,
        epsilon_cluster,
        trials: trials as usize,
        search_trials: search_trials as usize,
        seed: raw.seed.unwrap_or(defaults.seed),
        t: raw.t,
        output_path: raw.output_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scenario = "coercivity_scan"

[system]
kind = "square"
n_max_eigenvalue = 50
gamma = [{ side = "bottom", alpha = 0.0, beta = "pi" }]
"#;

    #[test]
    fn minimal_square_config() {
        let cfg = load_config(MINIMAL).unwrap();
        assert_eq!(cfg.scenario, Scenario::CoercivityScan);
        assert_eq!(cfg.epsilon_cluster, 0.5);
        match cfg.system {
            SystemConfig::Square { gamma, n_max_eigenvalue } => {
                assert_eq!(n_max_eigenvalue, 50);
                assert_eq!(gamma, GammaSpec::full_side(Side::Bottom));
            }
            _ => panic!("expected square"),
        }
    }

    #[test]
    fn non_hermitian_gram_names_offender() {
        let text = r#"
[system]
kind = "custom"
eigenvalues = [1.0, 2.0, 3.0]
gram = [[1.0, 0.0, 0.2], [0.0, 1.0, 0.0], [0.3, 0.0, 1.0]]
"#;
        match load_config(text) {
            Err(ConfigError::Schema(msg)) => {
                assert!(msg.contains("(0,2)"), "{msg}");
                assert!(msg.starts_with("line 5"), "{msg}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn n_max_one_is_invariant_violation() {
        let text = MINIMAL.replace("n_max_eigenvalue = 50", "n_max_eigenvalue = 1");
        match load_config(&text) {
            Err(ConfigError::Invariant(msg)) => assert!(msg.starts_with("line 6"), "{msg}"),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_and_schema_errors_are_distinct() {
        assert!(matches!(load_config("system = [unclosed"), Err(ConfigError::Parse(_))));
        let unknown = format!("{MINIMAL}\nbogus = 3\n");
        assert!(matches!(load_config(&unknown), Err(ConfigError::Schema(_))));
        let wrong_type = MINIMAL.replace("n_max_eigenvalue = 50", "n_max_eigenvalue = \"fifty\"");
        assert!(matches!(load_config(&wrong_type), Err(ConfigError::Schema(_))));
    }

    #[test]
    fn pi_expressions() {
        assert_eq!(parse_pi_expr("pi").unwrap(), PI);
        assert_eq!(parse_pi_expr("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_pi_expr("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_pi_expr("0.5 * pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_pi_expr("1.25").unwrap(), 1.25);
        assert!(parse_pi_expr("pi/0").is_err());
        assert!(parse_pi_expr("tau").is_err());
    }

    #[test]
    fn zero_trials_rejected() {
        let text = format!("trials = 0\n{MINIMAL}");
        assert!(matches!(load_config(&text), Err(ConfigError::Invariant(_))));
    }
}
