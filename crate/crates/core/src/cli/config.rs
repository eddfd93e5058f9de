//! Flat `key = value` experiment configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{SystemParams, DEFAULT_ALPHA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    RotorOtoc,
    RmtOtoc,
    RateScan,
    ClassicalLyapunov,
    Husimi,
    PrSeries,
    SameSubspace,
    GueOtoc,
    WeakChaos,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 9] = [
        ScenarioKind::RotorOtoc,
        ScenarioKind::RmtOtoc,
        ScenarioKind::RateScan,
        ScenarioKind::ClassicalLyapunov,
        ScenarioKind::Husimi,
        ScenarioKind::PrSeries,
        ScenarioKind::SameSubspace,
        ScenarioKind::GueOtoc,
        ScenarioKind::WeakChaos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::RotorOtoc => "rotor_otoc",
            ScenarioKind::RmtOtoc => "rmt_otoc",
            ScenarioKind::RateScan => "rate_scan",
            ScenarioKind::ClassicalLyapunov => "classical_lyapunov",
            ScenarioKind::Husimi => "husimi",
            ScenarioKind::PrSeries => "pr_series",
            ScenarioKind::SameSubspace => "same_subspace",
            ScenarioKind::GueOtoc => "gue_otoc",
            ScenarioKind::WeakChaos => "weak_chaos",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                format!("unknown scenario `{s}`; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    Cosine,
    Gue,
}

impl FromStr for ObservableKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cosine" => Ok(ObservableKind::Cosine),
            "gue" => Ok(ObservableKind::Gue),
            _ => Err(format!("unknown observable `{s}`; expected cosine or gue")),
        }
    }
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObservableKind::Cosine => "cosine",
            ObservableKind::Gue => "gue",
        })
    }
}

/// Where a raw value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override(usize),
    Flag(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(l) => write!(f, "line {l}"),
            Origin::Override(i) => write!(f, "--set #{}", i + 1),
            Origin::Flag(name) => write!(f, "--{name}"),
        }
    }
}

/// Unvalidated key/value pairs; later insertions win.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    /// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = split_pair(content).map_err(|reason| Error::Config {
                location: format!("line {line_no}"),
                reason,
            })?;
            if let Some((_, first)) = raw.entries.get(&key) {
                return Err(Error::Config {
                    location: format!("line {line_no}"),
                    reason: format!("duplicate key `{key}` (first set at {first})"),
                });
            }
            raw.entries.insert(key, (value, Origin::Line(line_no)));
        }
        Ok(raw)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, pair: &str, index: usize) -> Result<()> {
        let (key, value) = split_pair(pair).map_err(|reason| Error::Config {
            location: Origin::Override(index).to_string(),
            reason,
        })?;
        self.entries.insert(key, (value, Origin::Override(index)));
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: String, origin: Origin) {
        self.entries.insert(key.to_string(), (value, origin));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn origin(&self, key: &str) -> String {
        self.entries
            .get(key)
            .map_or_else(|| "default".to_string(), |(_, o)| o.to_string())
    }
}

fn split_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (key, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected `key = value`, got `{s}`"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err("empty key".into());
    }
    Ok((key.to_string(), value.trim().to_string()))
}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "n",
    "k1",
    "k2",
    "b",
    "nb",
    "alpha",
    "epsilon",
    "steps",
    "probes",
    "samples",
    "ensemble",
    "seed",
    "observables",
    "lyapunov_window",
    "relaxation_window",
    "power_window",
    "nb_values",
    "q0",
    "p0",
    "husimi_times",
    "out",
    "threads",
    "check_tolerance",
];

/// Fully resolved experiment description; every field has a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub k1: f64,
    pub k2: f64,
    pub b: f64,
    pub alpha: f64,
    /// RMT interaction strength.
    pub epsilon: f64,
    pub steps: usize,
    /// Random probes for the stochastic trace; 0 selects exact dense traces.
    pub probes: usize,
    pub samples: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub observables: ObservableKind,
    pub lyapunov_window: Option<(usize, usize)>,
    pub relaxation_window: Option<(usize, usize)>,
    pub power_window: Option<(usize, usize)>,
    /// Coupling values of a rate scan, in units of `1/N`.
    pub nb_values: Vec<f64>,
    pub q0: f64,
    pub p0: f64,
    pub husimi_times: Vec<usize>,
    pub out: PathBuf,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub check_tolerance: Option<f64>,
}

impl ExperimentConfig {
    pub fn defaults(scenario: ScenarioKind) -> Self {
        let n = 64;
        let mut c = ExperimentConfig {
            scenario,
            n,
            k1: 9.0,
            k2: 10.0,
            b: 1.0 / n as f64,
            alpha: DEFAULT_ALPHA,
            epsilon: 0.1,
            steps: 25,
            probes: 0,
            samples: 100,
            ensemble: 100_000,
            seed: 1,
            observables: ObservableKind::Cosine,
            lyapunov_window: None,
            relaxation_window: None,
            power_window: None,
            nb_values: vec![0.25, 0.5, 1.0, 2.0, 3.0, 4.0],
            q0: 0.7,
            p0: 0.3,
            husimi_times: vec![0, 2, 5, 10, 25],
            out: PathBuf::from("results"),
            threads: 0,
            check_tolerance: None,
        };
        match scenario {
            ScenarioKind::RmtOtoc => {
                c.n = 16;
                c.steps = 12;
            }
            ScenarioKind::ClassicalLyapunov => {
                c.steps = 5;
                c.b = 0.05;
                c.lyapunov_window = Some((2, 5));
            }
            ScenarioKind::SameSubspace => {
                c.n = 32;
                c.b = 2.0 / 32.0;
            }
            ScenarioKind::GueOtoc => c.observables = ObservableKind::Gue,
            ScenarioKind::WeakChaos => {
                c.n = 64;
                c.k1 = 0.5;
                c.k2 = 0.7;
                c.b = 6.0 / 64.0;
                c.steps = 50;
                c.observables = ObservableKind::Gue;
                c.power_window = Some((5, 50));
            }
            _ => {}
        }
        c
    }

    /// Resolves scenario defaults, then applies every raw value.
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        for key in raw.entries.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config {
                    location: raw.origin(key),
                    reason: format!("unknown key `{key}`"),
                });
            }
        }
        let scenario: ScenarioKind = match raw.get("scenario") {
            Some(s) => field(raw, "scenario", s.parse())?,
            None => {
                return Err(Error::Config {
                    location: "config".into(),
                    reason: "missing required key `scenario`".into(),
                })
            }
        };
        let mut c = Self::defaults(scenario);
        let mut b_set = false;
        for (key, (value, _)) in &raw.entries {
            let v = value.as_str();
            match key.as_str() {
                "scenario" => {}
                "n" => c.n = field(raw, key, v.parse())?,
                "k1" => c.k1 = field(raw, key, v.parse())?,
                "k2" => c.k2 = field(raw, key, v.parse())?,
                "alpha" => c.alpha = field(raw, key, v.parse())?,
                "epsilon" => c.epsilon = field(raw, key, v.parse())?,
                "steps" => c.steps = field(raw, key, v.parse())?,
                "probes" => c.probes = field(raw, key, v.parse())?,
                "samples" => c.samples = field(raw, key, v.parse())?,
                "ensemble" => c.ensemble = field(raw, key, v.parse())?,
                "seed" => c.seed = field(raw, key, v.parse())?,
                "observables" => c.observables = field(raw, key, v.parse())?,
                "lyapunov_window" => c.lyapunov_window = field(raw, key, parse_window(v))?,
                "relaxation_window" => c.relaxation_window = field(raw, key, parse_window(v))?,
                "power_window" => c.power_window = field(raw, key, parse_window(v))?,
                "nb_values" => c.nb_values = field(raw, key, parse_list(v))?,
                "q0" => c.q0 = field(raw, key, v.parse())?,
                "p0" => c.p0 = field(raw, key, v.parse())?,
                "husimi_times" => c.husimi_times = field(raw, key, parse_list(v))?,
                "out" => c.out = PathBuf::from(v),
                "threads" => c.threads = field(raw, key, v.parse())?,
                "check_tolerance" => {
                    c.check_tolerance = if v == "none" {
                        None
                    } else {
                        Some(field(raw, key, v.parse())?)
                    }
                }
                "b" | "nb" => {}
                _ => unreachable!("checked against KNOWN_KEYS"),
            }
        }
        match (raw.get("b"), raw.get("nb")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    location: raw.origin("nb"),
                    reason: "set either `b` or `nb`, not both".into(),
                })
            }
            (Some(v), None) => {
                c.b = field(raw, "b", v.parse())?;
                b_set = true;
            }
            (None, Some(v)) => {
                let nb: f64 = field(raw, "nb", v.parse())?;
                c.b = nb / c.n as f64;
                b_set = true;
            }
            (None, None) => {}
        }
        if !b_set && raw.get("n").is_some() && scenario != ScenarioKind::ClassicalLyapunov {
            // keep the default coupling at the same multiple of 1/N
            let nb = Self::defaults(scenario).b * Self::defaults(scenario).n as f64;
            c.b = nb / c.n as f64;
        }
        c.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let key = name.to_lowercase();
                Error::Config {
                    location: format!("field `{key}` ({})", raw.origin(&key)),
                    reason,
                }
            }
            other => other,
        })?;
        Ok(c)
    }

    pub fn system_params(&self) -> SystemParams {
        let mut p = SystemParams::new(self.n, self.k1, self.k2, self.b);
        p.alpha = self.alpha;
        p.epsilon = self.epsilon;
        p
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::invalid;
        let needs_rotor = !matches!(self.scenario, ScenarioKind::ClassicalLyapunov | ScenarioKind::RmtOtoc);
        if needs_rotor {
            self.system_params().validate()?;
        }
        if self.steps == 0 {
            return Err(invalid("steps", "need at least one step"));
        }
        if self.probes != 0 && self.probes < 16 {
            return Err(invalid("probes", format!("use 0 (dense) or at least 16, got {}", self.probes)));
        }
        for (name, w) in [
            ("lyapunov_window", self.lyapunov_window),
            ("relaxation_window", self.relaxation_window),
            ("power_window", self.power_window),
        ] {
            if let Some((a, b)) = w {
                if a >= b || b > self.steps {
                    return Err(invalid(name, format!("({a}, {b}) must satisfy a < b <= steps = {}", self.steps)));
                }
            }
        }
        if self.scenario == ScenarioKind::RateScan && self.nb_values.is_empty() {
            return Err(invalid("nb_values", "rate scan needs at least one coupling"));
        }
        if let Some(t) = self.husimi_times.iter().find(|&&t| t > self.steps) {
            if self.scenario == ScenarioKind::Husimi {
                return Err(invalid("husimi_times", format!("t = {t} exceeds steps = {}", self.steps)));
            }
        }
        if let Some(tol) = self.check_tolerance {
            if !(tol > 0.0) {
                return Err(invalid("check_tolerance", format!("must be positive, got {tol}")));
            }
        }
        Ok(())
    }

    /// Every resolved field as `key = value` text that parses back to `self`.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let window = |w: Option<(usize, usize)>| w.map_or("auto".to_string(), |(a, b)| format!("{a},{b}"));
        let list = |v: &[String]| v.join(",");
        vec![
            ("scenario".into(), self.scenario.to_string()),
            ("n".into(), self.n.to_string()),
            ("k1".into(), self.k1.to_string()),
            ("k2".into(), self.k2.to_string()),
            ("b".into(), self.b.to_string()),
            ("alpha".into(), self.alpha.to_string()),
            ("epsilon".into(), self.epsilon.to_string()),
            ("steps".into(), self.steps.to_string()),
            ("probes".into(), self.probes.to_string()),
            ("samples".into(), self.samples.to_string()),
            ("ensemble".into(), self.ensemble.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("observables".into(), self.observables.to_string()),
            ("lyapunov_window".into(), window(self.lyapunov_window)),
            ("relaxation_window".into(), window(self.relaxation_window)),
            ("power_window".into(), window(self.power_window)),
            (
                "nb_values".into(),
                list(&self.nb_values.iter().map(|x| x.to_string()).collect::<Vec<_>>()),
            ),
            ("q0".into(), self.q0.to_string()),
            ("p0".into(), self.p0.to_string()),
            (
                "husimi_times".into(),
                list(&self.husimi_times.iter().map(|x| x.to_string()).collect::<Vec<_>>()),
            ),
            ("out".into(), self.out.display().to_string()),
            ("threads".into(), self.threads.to_string()),
            (
                "check_tolerance".into(),
                self.check_tolerance.map_or("none".to_string(), |t| t.to_string()),
            ),
        ]
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn field<T, E: fmt::Display>(raw: &RawConfig, key: &str, parsed: std::result::Result<T, E>) -> Result<T> {
    parsed.map_err(|e| Error::Config {
        location: format!("field `{key}` ({})", raw.origin(key)),
        reason: format!("cannot parse `{}`: {e}", raw.get(key).unwrap_or("")),
    })
}

fn parse_window(s: &str) -> std::result::Result<Option<(usize, usize)>, String> {
    if s == "auto" {
        return Ok(None);
    }
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok(Some((
            a.parse().map_err(|e| format!("{e}"))?,
            b.parse().map_err(|e| format!("{e}"))?,
        ))),
        _ => Err("expected `auto` or `start,end`".into()),
    }
}

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|e| format!("`{x}`: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(&RawConfig::parse(text)?)
    }

    #[test]
    fn parses_comments_and_defaults() {
        let c = resolve("# rate scan\nscenario = rotor_otoc  # inline\n\nn = 16\nk1=9\n").unwrap();
        assert_eq!(c.scenario, ScenarioKind::RotorOtoc);
        assert_eq!(c.n, 16);
        assert_eq!(c.k2, 10.0);
        assert_eq!(c.b, 1.0 / 16.0);
        assert_eq!(c.alpha, DEFAULT_ALPHA);
    }

    #[test]
    fn line_diagnostics() {
        let err = resolve("scenario = rotor_otoc\nn 16\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = resolve("scenario = rotor_otoc\nn = sixteen\n").unwrap_err().to_string();
        assert!(err.contains("field `n`") && err.contains("line 2"), "{err}");
        let err = resolve("scenario = rotor_otoc\ncolour = red\n").unwrap_err().to_string();
        assert!(err.contains("unknown key `colour`"), "{err}");
        let err = resolve("scenario = dance\n").unwrap_err().to_string();
        assert!(err.contains("unknown scenario"), "{err}");
        let err = resolve("scenario = rotor_otoc\nn = 1\n").unwrap_err().to_string();
        assert!(err.contains("field `n`"), "{err}");
        let err = resolve("scenario = rotor_otoc\nn = 4\nn = 8\n").unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn override_wins() {
        let mut raw = RawConfig::parse("scenario = rotor_otoc\nn = 16\n").unwrap();
        raw.apply_override("n=8", 0).unwrap();
        raw.apply_override("nb = 2", 1).unwrap();
        let c = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(c.n, 8);
        assert_eq!(c.b, 0.25);
        assert!(raw.apply_override("novalue", 2).unwrap_err().to_string().contains("--set #3"));
    }

    #[test]
    fn b_and_nb_conflict() {
        assert!(resolve("scenario = rotor_otoc\nb = 0.1\nnb = 2\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        for kind in ScenarioKind::ALL {
            let mut c = ExperimentConfig::defaults(kind);
            c.lyapunov_window = Some((2, 4));
            c.check_tolerance = Some(0.1);
            let back = resolve(&c.to_text()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn windows_validated() {
        assert!(resolve("scenario = rotor_otoc\nlyapunov_window = 4,2\n").is_err());
        assert!(resolve("scenario = rotor_otoc\nsteps = 10\nrelaxation_window = 4,20\n").is_err());
        let c = resolve("scenario = rotor_otoc\nrelaxation_window = 4,20\n").unwrap();
        assert_eq!(c.relaxation_window, Some((4, 20)));
    }
}
