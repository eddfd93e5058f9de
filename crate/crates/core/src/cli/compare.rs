//! Column-wise comparison of two result records.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::record::ResultRecord;
use crate::error::{Error, Result};

/// Round-off allowance added to sigma comparisons, relative to the larger magnitude (floor 1).
const ROUNDOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    /// `|a - b| / max(|a|, |b|) <= r`.
    Relative(f64),
    /// `|a - b| <= x`.
    Absolute(f64),
    /// `|a - b| <= k * sqrt(err_a^2 + err_b^2)`, errors from `<column>_err`.
    Sigma(f64),
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tolerance::Relative(x) => write!(f, "rel={x}"),
            Tolerance::Absolute(x) => write!(f, "abs={x}"),
            Tolerance::Sigma(x) => write!(f, "sigma={x}"),
        }
    }
}

fn parse_tolerance(s: &str) -> Result<Tolerance> {
    let bad = || Error::Config {
        location: "tolerance".into(),
        reason: format!("expected rel=X, abs=X or sigma=X, got `{s}`"),
    };
    let (kind, value) = s.split_once('=').ok_or_else(bad)?;
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    if !(value >= 0.0) {
        return Err(bad());
    }
    match kind.trim() {
        "rel" => Ok(Tolerance::Relative(value)),
        "abs" => Ok(Tolerance::Absolute(value)),
        "sigma" => Ok(Tolerance::Sigma(value)),
        _ => Err(bad()),
    }
}

/// Default tolerance plus per-column overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub default: Tolerance,
    pub columns: BTreeMap<String, Tolerance>,
}

impl ToleranceSpec {
    pub fn uniform(t: Tolerance) -> Self {
        Self {
            default: t,
            columns: BTreeMap::new(),
        }
    }

    /// `rel=0.01` or `c_norm:sigma=3;mu_fit:rel=0.1;*:rel=0`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut spec = Self::uniform(Tolerance::Relative(0.0));
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once(':') {
                Some((col, tol)) if col.trim() == "*" => spec.default = parse_tolerance(tol)?,
                Some((col, tol)) => {
                    spec.columns.insert(col.trim().to_string(), parse_tolerance(tol)?);
                }
                None => spec.default = parse_tolerance(part)?,
            }
        }
        Ok(spec)
    }

    pub fn for_column(&self, col: &str) -> Tolerance {
        self.columns.get(col).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub column: String,
    pub max_relative_deviation: f64,
    pub max_sigma_deviation: Option<f64>,
    pub worst_row: usize,
    pub tolerance: Tolerance,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub columns: Vec<ColumnReport>,
    pub passed: bool,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.columns {
            write!(
                f,
                "{:<4} {:<20} max_rel={:.3e}",
                if c.passed { "ok" } else { "FAIL" },
                c.column,
                c.max_relative_deviation
            )?;
            if let Some(s) = c.max_sigma_deviation {
                write!(f, " max_sigma={s:.3}")?;
            }
            writeln!(f, " tol={} worst_row={}", c.tolerance, c.worst_row)?;
        }
        write!(f, "{}", if self.passed { "PASS" } else { "FAIL" })
    }
}

fn is_error_column(c: &str) -> bool {
    c.ends_with("_err")
}

fn value_columns(r: &ResultRecord) -> Vec<&str> {
    r.columns
        .iter()
        .map(String::as_str)
        .filter(|c| !is_error_column(c))
        .collect()
}

/// Compares every value column. Schemas match when the non-error columns
/// agree in name and order and the row counts agree; `*_err` columns are
/// optional and count as zero when missing.
pub fn compare(a: &ResultRecord, b: &ResultRecord, spec: &ToleranceSpec) -> Result<CompareReport> {
    let (ca, cb) = (value_columns(a), value_columns(b));
    if ca != cb {
        return Err(Error::Schema(format!("columns differ: {ca:?} vs {cb:?}")));
    }
    if a.rows.len() != b.rows.len() {
        return Err(Error::Schema(format!("row counts differ: {} vs {}", a.rows.len(), b.rows.len())));
    }
    let zeros = vec![0.0; a.rows.len()];
    let mut reports = Vec::new();
    for col in ca {
        let va = a.column(col).expect("value column exists");
        let vb = b.column(col).expect("value column exists");
        let ea = a.column(&format!("{col}_err")).unwrap_or_else(|| zeros.clone());
        let eb = b.column(&format!("{col}_err")).unwrap_or_else(|| zeros.clone());
        let tolerance = spec.for_column(col);
        let mut max_rel = 0.0f64;
        let mut max_sigma: Option<f64> = None;
        let mut worst_row = 0;
        let mut worst_score = 0.0f64;
        let mut passed = true;
        for i in 0..va.len() {
            let (x, y) = (va[i], vb[i]);
            if x.is_nan() && y.is_nan() {
                continue;
            }
            let diff = (x - y).abs();
            let scale = x.abs().max(y.abs());
            let rel = if diff == 0.0 { 0.0 } else { diff / scale };
            let sigma = (ea[i].powi(2) + eb[i].powi(2)).sqrt();
            let sig_dev = if diff == 0.0 { 0.0 } else { diff / sigma };
            max_rel = max_rel.max(if rel.is_nan() { f64::INFINITY } else { rel });
            let (ok, score) = match tolerance {
                Tolerance::Relative(r) => (rel <= r, rel),
                Tolerance::Absolute(t) => (diff <= t, diff),
                Tolerance::Sigma(k) => {
                    max_sigma = Some(max_sigma.unwrap_or(0.0).max(sig_dev));
                    (diff <= k * sigma + ROUNDOFF * scale.max(1.0), sig_dev)
                }
            };
            if !ok {
                passed = false;
            }
            if !(score <= worst_score) {
                worst_score = score;
                worst_row = i;
            }
        }
        reports.push(ColumnReport {
            column: col.to_string(),
            max_relative_deviation: max_rel,
            max_sigma_deviation: max_sigma,
            worst_row,
            tolerance,
            passed,
        });
    }
    let passed = reports.iter().all(|r| r.passed);
    Ok(CompareReport {
        columns: reports,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::record::{Provenance, RNG_SCHEME};

    fn record(columns: &[&str], rows: Vec<Vec<f64>>) -> ResultRecord {
        ResultRecord {
            scenario: "x".into(),
            config: BTreeMap::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows,
            fits: BTreeMap::new(),
            references: BTreeMap::new(),
            checks: vec![],
            notes: vec![],
            grids: vec![],
            provenance: Provenance {
                code_version: String::new(),
                seed: 0,
                rng: RNG_SCHEME.into(),
                threads: 0,
                started_unix_ms: 0,
                wall_clock_seconds: 0.0,
            },
        }
    }

    #[test]
    fn self_comparison_passes_at_zero() {
        let r = record(&["t", "c"], vec![vec![0.0, 0.0], vec![1.0, 0.5]]);
        let rep = compare(&r, &r, &ToleranceSpec::uniform(Tolerance::Relative(0.0))).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.columns[1].max_relative_deviation, 0.0);
    }

    #[test]
    fn relative_and_sigma_modes() {
        let a = record(&["t", "c"], vec![vec![1.0, 1.0], vec![2.0, 2.0]]);
        let b = record(&["t", "c", "c_err"], vec![vec![1.0, 1.05, 0.02], vec![2.0, 2.0, 0.02]]);
        let rel = compare(&a, &b, &ToleranceSpec::parse("rel=0.06").unwrap()).unwrap();
        assert!(rel.passed);
        let rel = compare(&a, &b, &ToleranceSpec::parse("rel=0.01").unwrap()).unwrap();
        assert!(!rel.passed);
        assert_eq!(rel.columns[1].worst_row, 0);
        let sig = compare(&a, &b, &ToleranceSpec::parse("t:rel=0;c:sigma=3").unwrap()).unwrap();
        assert!(sig.passed);
        assert!((sig.columns[1].max_sigma_deviation.unwrap() - 2.5).abs() < 1e-9);
        let sig = compare(&a, &b, &ToleranceSpec::parse("c:sigma=2").unwrap()).unwrap();
        assert!(!sig.passed);
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let a = record(&["t", "c"], vec![vec![1.0, 1.0]]);
        let b = record(&["t", "d"], vec![vec![1.0, 1.0]]);
        assert!(matches!(compare(&a, &b, &ToleranceSpec::parse("rel=1").unwrap()), Err(Error::Schema(_))));
        let c = record(&["t", "c"], vec![vec![1.0, 1.0], vec![2.0, 1.0]]);
        assert!(matches!(compare(&a, &c, &ToleranceSpec::parse("rel=1").unwrap()), Err(Error::Schema(_))));
    }

    #[test]
    fn bad_spec_rejected() {
        assert!(ToleranceSpec::parse("within=3").is_err());
        assert!(ToleranceSpec::parse("rel=-1").is_err());
    }
}
