use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    ThreePhase,
    MaxWeight,
    StandardBatching,
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "three-phase" | "three_phase" => Ok(Self::ThreePhase),
            "maxweight" | "max-weight" => Ok(Self::MaxWeight),
            "standard-batching" | "standard_batching" | "batching" => Ok(Self::StandardBatching),
            other => Err(format!(
                "unknown policy {other:?} (three-phase, maxweight, standard-batching)"
            )),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ThreePhase => "three-phase",
            Self::MaxWeight => "maxweight",
            Self::StandardBatching => "standard-batching",
        })
    }
}

/// How `f_n` is chosen for each `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FnRule {
    /// `f_n = n`.
    EqualsN,
    /// `f_n = n * factor`.
    Multiple(u64),
    /// One value per entry of `n_list`.
    Explicit(Vec<u64>),
}

impl FromStr for FnRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "n" {
            return Ok(Self::EqualsN);
        }
        if let Some(k) = s.strip_prefix("n*").or_else(|| s.strip_prefix("n *")) {
            return k
                .trim()
                .parse()
                .map(Self::Multiple)
                .map_err(|e| format!("bad fn_rule multiple {k:?}: {e}"));
        }
        parse_list(s).map(Self::Explicit)
    }
}

impl fmt::Display for FnRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EqualsN => f.write_str("n"),
            Self::Multiple(k) => write!(f, "n*{k}"),
            Self::Explicit(v) => f.write_str(&join(v)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalMode {
    Bernoulli,
    /// No arrivals at all; a stub for plumbing checks.
    None,
}

impl FromStr for ArrivalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bernoulli" => Ok(Self::Bernoulli),
            "none" | "zero" => Ok(Self::None),
            other => Err(format!("unknown arrivals mode {other:?} (bernoulli, none)")),
        }
    }
}

/// Experiment configuration.
///
/// File format: one `key = value` per line, lists comma-separated, `#`
/// starts a comment. Every key can also be set from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub policy: PolicyKind,
    pub n_list: Vec<usize>,
    pub fn_rule: FnRule,
    pub c_b: f64,
    pub c_d: f64,
    pub c_s: f64,
    /// Service periods per run; a run lasts `periods * b + d` slots.
    pub periods: u64,
    pub seeds: Vec<u64>,
    /// Allow constants outside the sufficient conditions.
    pub relaxed: bool,
    pub out_dir: PathBuf,
    pub snapshot_period_boundaries: bool,
    /// Standard-batching window; `None` uses the three-phase `b`.
    pub sb_batch: Option<u64>,
    /// Replications run concurrently; 0 lets the thread pool decide.
    pub threads: usize,
    pub arrivals: ArrivalMode,
    /// Check `Q = A - S` after every slot.
    pub check_conservation: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policy: PolicyKind::ThreePhase,
            n_list: vec![25],
            fn_rule: FnRule::EqualsN,
            c_b: 31.0,
            c_d: 141.0,
            c_s: 30.0,
            periods: 10,
            seeds: vec![1, 2, 3, 4, 5],
            relaxed: false,
            out_dir: PathBuf::from("out"),
            snapshot_period_boundaries: false,
            sb_batch: None,
            threads: 1,
            arrivals: ArrivalMode::Bernoulli,
            check_conservation: true,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "policy",
    "n_list",
    "fn_rule",
    "c_b",
    "c_d",
    "c_s",
    "periods",
    "seeds",
    "relaxed",
    "out_dir",
    "snapshot_period_boundaries",
    "sb_batch",
    "threads",
    "arrivals",
    "check_conservation",
];

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|e| format!("bad list entry {t:?}: {e}"))
        })
        .collect()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(format!("expected a boolean, got {other:?}")),
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("bad number {s:?}: {e}"))
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "policy" => self.policy = v.parse()?,
            "n_list" => self.n_list = parse_list(v)?,
            "fn_rule" => self.fn_rule = v.parse()?,
            "c_b" => self.c_b = parse_num(v)?,
            "c_d" => self.c_d = parse_num(v)?,
            "c_s" => self.c_s = parse_num(v)?,
            "periods" => self.periods = parse_num(v)?,
            "seeds" => self.seeds = parse_list(v)?,
            "relaxed" => self.relaxed = parse_bool(v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "snapshot_period_boundaries" => self.snapshot_period_boundaries = parse_bool(v)?,
            "sb_batch" => {
                let b: u64 = parse_num(v)?;
                self.sb_batch = (b > 0).then_some(b);
            }
            "threads" => self.threads = parse_num(v)?,
            "arrivals" => self.arrivals = v.parse()?,
            "check_conservation" => self.check_conservation = parse_bool(v)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            cfg.set(key, value)
                .map_err(|msg| HarnessError::Config { line: idx + 1, msg })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// `(n, f_n)` pairs in `n_list` order.
    pub fn points(&self) -> Result<Vec<(usize, u64)>, HarnessError> {
        let fns: Vec<u64> = match &self.fn_rule {
            FnRule::EqualsN => self.n_list.iter().map(|&n| n as u64).collect(),
            FnRule::Multiple(k) => self.n_list.iter().map(|&n| n as u64 * k).collect(),
            FnRule::Explicit(v) => {
                if v.len() != self.n_list.len() {
                    return Err(HarnessError::Invalid(format!(
                        "fn_rule lists {} values for {} entries of n_list",
                        v.len(),
                        self.n_list.len()
                    )));
                }
                v.clone()
            }
        };
        Ok(self.n_list.iter().copied().zip(fns).collect())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_list.is_empty() {
            return Err(HarnessError::Invalid("n_list is empty".into()));
        }
        if self.periods < 1 {
            return Err(HarnessError::Invalid("periods must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Invalid("seeds is empty".into()));
        }
        for (n, f) in self.points()? {
            if f < n as u64 {
                return Err(HarnessError::Invalid(format!("f_n = {f} < n = {n}")));
            }
        }
        Ok(())
    }

    /// Canonical file form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("policy", self.policy.to_string());
        kv("n_list", join(&self.n_list));
        kv("fn_rule", self.fn_rule.to_string());
        kv("c_b", self.c_b.to_string());
        kv("c_d", self.c_d.to_string());
        kv("c_s", self.c_s.to_string());
        kv("periods", self.periods.to_string());
        kv("seeds", join(&self.seeds));
        kv("relaxed", self.relaxed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv(
            "snapshot_period_boundaries",
            self.snapshot_period_boundaries.to_string(),
        );
        kv("sb_batch", self.sb_batch.unwrap_or(0).to_string());
        kv("threads", self.threads.to_string());
        kv(
            "arrivals",
            match self.arrivals {
                ArrivalMode::Bernoulli => "bernoulli",
                ArrivalMode::None => "none",
            }
            .into(),
        );
        kv("check_conservation", self.check_conservation.to_string());
        s
    }
}
