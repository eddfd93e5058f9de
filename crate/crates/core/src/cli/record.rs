//! Result records and their CSV / JSON encodings.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::otoc::FitResult;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const RNG_SCHEME: &str = "ChaCha8Rng::seed_from_u64(seed) with stream (purpose << 48) | index";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    /// Relative check `|measured / reference - 1| <= tolerance`.
    pub fn relative(name: impl Into<String>, measured: f64, reference: f64, tolerance: f64) -> Self {
        let passed = ((measured - reference) / reference).abs() <= tolerance;
        Self {
            name: name.into(),
            measured,
            reference,
            tolerance,
            passed,
        }
    }

    /// Absolute check `|measured - reference| <= tolerance`.
    pub fn absolute(name: impl Into<String>, measured: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            reference,
            tolerance,
            passed: (measured - reference).abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
    pub seed: u64,
    pub rng: String,
    pub threads: usize,
    pub started_unix_ms: u128,
    pub wall_clock_seconds: f64,
}

/// Husimi grid at one time, rows indexed by momentum and columns by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub t: usize,
    pub raw_sum: f64,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario: String,
    pub config: BTreeMap<String, String>,
    pub columns: Vec<String>,
    #[serde(deserialize_with = "rows_with_nan")]
    pub rows: Vec<Vec<f64>>,
    pub fits: BTreeMap<String, FitResult>,
    pub references: BTreeMap<String, f64>,
    pub checks: Vec<CheckOutcome>,
    pub notes: Vec<String>,
    pub grids: Vec<GridRecord>,
    pub provenance: Provenance,
}

/// serde_json writes non-finite floats as `null`; read them back as NaN.
fn rows_with_nan<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
    let rows: Vec<Vec<Option<f64>>> = Deserialize::deserialize(d)?;
    Ok(rows
        .into_iter()
        .map(|r| r.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
        .collect())
}

impl ResultRecord {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Column data with `#` metadata lines. Contains nothing run-dependent
    /// besides the data, so reruns with the same config produce identical bytes.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(&format!("# scenario = {}\n", self.scenario));
        out.push_str(&format!("# code_version = {CODE_VERSION}\n"));
        out.push_str(&format!("# rng = {RNG_SCHEME}\n"));
        for (k, v) in &self.config {
            out.push_str(&format!("# config.{k} = {v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Schema(e.to_string()))?);
        Ok(out)
    }

    /// Reads a CSV written by [`ResultRecord::to_csv`]; fits and provenance
    /// are not part of the CSV and come back empty.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        let mut config = BTreeMap::new();
        let mut scenario = String::new();
        let mut seed = 0;
        let mut body = String::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    let (k, v) = (k.trim(), v.trim().to_string());
                    if k == "scenario" {
                        scenario = v;
                    } else if let Some(key) = k.strip_prefix("config.") {
                        if key == "seed" {
                            seed = v.parse().unwrap_or(0);
                        }
                        config.insert(key.to_string(), v);
                    }
                }
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|e| Error::Schema(format!("{}: row {}: `{x}`: {e}", path.display(), i + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self {
            scenario,
            config,
            columns,
            rows,
            fits: BTreeMap::new(),
            references: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            grids: Vec::new(),
            provenance: Provenance {
                code_version: String::new(),
                seed,
                rng: RNG_SCHEME.into(),
                threads: 0,
                started_unix_ms: 0,
                wall_clock_seconds: 0.0,
            },
        })
    }

    pub fn from_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Loads either encoding, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(path),
            _ => Self::from_csv(path),
        }
    }

    /// Writes `<dir>/<scenario>_<stamp>.csv`, `.json`, and one CSV per Husimi grid.
    pub fn write(&self, dir: &Path) -> Result<WrittenFiles> {
        fs::create_dir_all(dir)?;
        let stem = unique_stem(dir, &self.scenario, self.provenance.started_unix_ms);
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&csv_path, self.to_csv()?)?;
        let mut grid_paths = Vec::new();
        for g in &self.grids {
            let path = dir.join(format!("{stem}_husimi_t{}.csv", g.t));
            let mut f = fs::File::create(&path)?;
            writeln!(f, "# t = {}", g.t)?;
            writeln!(f, "# rows = p index, columns = q index, sum = N")?;
            writeln!(f, "# raw_sum = {}", g.raw_sum)?;
            for row in &g.values {
                let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                writeln!(f, "{}", line.join(","))?;
            }
            grid_paths.push(path);
        }
        fs::write(&json_path, serde_json::to_string_pretty(self)?)?;
        Ok(WrittenFiles {
            csv: csv_path,
            json: json_path,
            grids: grid_paths,
        })
    }
}

#[derive(Debug, Clone)]
pub struct WrittenFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub grids: Vec<PathBuf>,
}

fn unique_stem(dir: &Path, scenario: &str, stamp: u128) -> String {
    let base = format!("{scenario}_{stamp}");
    let mut stem = base.clone();
    let mut k = 1;
    while dir.join(format!("{stem}.csv")).exists() {
        stem = format!("{base}_{k}");
        k += 1;
    }
    stem
}
