//! Report bundles and their JSON / CSV encodings.
//!
//! Output is a pure function of the bundle: no timestamps, no host data, and
//! every table is emitted in the row order the scenario produced.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::Result;
use crate::window::{self, Theta1Variant};

pub const TOOLKIT: &str = "specobs";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Bumped whenever a scenario's CSV columns change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) if x.is_finite() => s.serialize_f64(*x),
            Cell::Num(x) => s.serialize_str(&format_num(*x)),
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}
impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Text(String::new()), Cell::Num)
    }
}

/// 17 significant digits, which round-trips every f64.
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format_num(*x),
                    Cell::Int(i) => i.to_string(),
                    Cell::Bool(b) => b.to_string(),
                    Cell::Text(t) => csv_field(t),
                })
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsBlock {
    pub kappa1: f64,
    pub kappa2: f64,
    pub c0: f64,
    pub c0_prime: f64,
    pub theta0: f64,
    pub theta1_l2: f64,
    pub theta1_linf: f64,
    pub theta2: f64,
    pub theta1_default: Theta1Variant,
}

impl ConstantsBlock {
    pub fn compute() -> Result<Self> {
        let th = window::theta_constants(&window::cutoff_profile()?)?;
        Ok(Self {
            kappa1: window::KAPPA1,
            kappa2: window::KAPPA2,
            c0: th.c0,
            c0_prime: th.c0_prime,
            theta0: th.theta0,
            theta1_l2: th.theta1_l2,
            theta1_linf: th.theta1_linf,
            theta2: th.theta2,
            theta1_default: Theta1Variant::default(),
        })
    }

    fn table(&self) -> Table {
        let mut t = Table::new("constants", &["name", "value"]);
        for (k, v) in [
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("c0", self.c0),
            ("c0_prime", self.c0_prime),
            ("theta0", self.theta0),
            ("theta1_l2", self.theta1_l2),
            ("theta1_linf", self.theta1_linf),
            ("theta2", self.theta2),
        ] {
            t.push(vec![k.into(), v.into()]);
        }
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub toolkit: String,
    pub version: String,
    pub csv_schema: u32,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub constants: ConstantsBlock,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
}

impl ReportBundle {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            toolkit: TOOLKIT.into(),
            version: VERSION.into(),
            csv_schema: CSV_SCHEMA_VERSION,
            scenario: cfg.scenario.name().into(),
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            constants: ConstantsBlock::compute()?,
            tables: Vec::new(),
            verdicts: Vec::new(),
        })
    }

    pub fn verdict(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict { name: name.into(), pass, detail: detail.into() });
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    fn verdict_table(&self) -> Table {
        let mut t = Table::new("verdicts", &["name", "pass", "detail"]);
        for v in &self.verdicts {
            t.push(vec![v.name.as_str().into(), v.pass.into(), v.detail.as_str().into()]);
        }
        t
    }

    /// Every table as `(file name, contents)`, including constants and verdicts.
    pub fn csv_files(&self) -> Vec<(String, String)> {
        let mut meta = Table::new("meta", &["key", "value"]);
        for (k, v) in [
            ("toolkit", self.toolkit.clone()),
            ("version", self.version.clone()),
            ("csv_schema", self.csv_schema.to_string()),
            ("scenario", self.scenario.clone()),
            ("config_hash", self.config_hash.clone()),
            ("seed", self.seed.to_string()),
        ] {
            meta.push(vec![k.into(), v.into()]);
        }
        let mut files = vec![
            ("meta.csv".to_string(), meta.to_csv()),
            ("constants.csv".to_string(), self.constants.table().to_csv()),
        ];
        files.extend(self.tables.iter().map(|t| (format!("{}.csv", t.name), t.to_csv())));
        files.push(("verdicts.csv".to_string(), self.verdict_table().to_csv()));
        files
    }

    /// Single-stream CSV: each table preceded by a `# name` line.
    pub fn to_csv_stream(&self) -> String {
        self.csv_files()
            .into_iter()
            .map(|(name, body)| format!("# {}\n{body}", name.trim_end_matches(".csv")))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Short human summary, numbers rounded to 6 significant digits.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} scenario={} config={}", self.toolkit, self.version, self.scenario, &self.config_hash[..12]);
        for v in &self.verdicts {
            let _ = writeln!(s, "  [{}] {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
        }
        s
    }

    pub fn write_dir(&self, dir: &Path, structured: bool) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        if structured {
            std::fs::write(dir.join("report.json"), self.to_json())
        } else {
            for (name, body) in self.csv_files() {
                std::fs::write(dir.join(name), body)?;
            }
            Ok(())
        }
    }
}

/// 6 significant digits for human-facing text.
pub fn human(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// SHA-256 of the canonical JSON encoding of the effective configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;

    #[test]
    fn numbers_round_trip() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 2.0 / std::f64::consts::PI, 1e-300, -7.25e12] {
            assert_eq!(format_num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_num(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quotes_and_header() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![Cell::Int(3), Cell::Text("x, \"y\"".into())]);
        assert_eq!(t.to_csv(), "a,b\n3,\"x, \"\"y\"\"\"\n");
        assert_eq!(Table::new("e", &["only"]).to_csv(), "only\n");
    }

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig::default_for(Scenario::AssumptionI);
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn human_rounding() {
        assert_eq!(human(2.0 / std::f64::consts::PI), "0.636620");
        assert_eq!(human(119.1701234), "119.170");
        assert_eq!(human(1.23456789e-7), "1.23457e-7");
    }

    #[test]
    fn constants_block_values() {
        let c = ConstantsBlock::compute().unwrap();
        assert!((c.kappa1 - 4.0 / (3.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((c.c0 - (8.0 * c.kappa2 / c.kappa1 + c.kappa1 / c.kappa2 + 6.0)).abs() < 1e-12);
        assert!(c.theta0 >= 8.0 + c.c0);
    }
}
