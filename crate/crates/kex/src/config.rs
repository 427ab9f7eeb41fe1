//! Experiment configuration: defaults, TOML files and command-line
//! overrides, applied in that order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kex_core::enumerate::{EnumerationLimits, DEFAULT_CANDIDATE_BUDGET};
use kex_core::learn::{QueueMeasure, RuleFamily, UpdateRule};
use kex_core::pool::PoolConfig;
use serde::{Deserialize, Serialize};

use crate::error::KexError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Myopic,
    Kpd,
    Learned,
}

impl FromStr for SchemeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "myopic" | "myop" => Ok(SchemeChoice::Myopic),
            "kpd" => Ok(SchemeChoice::Kpd),
            "learned" => Ok(SchemeChoice::Learned),
            other => Err(format!("unknown scheme `{other}` (expected myopic, kpd or learned)")),
        }
    }
}

/// The quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Altruist penalty.
    #[serde(rename = "W")]
    Penalty,
    /// Cycle cap.
    #[serde(rename = "C")]
    CycleCap,
    /// Chain cap.
    #[serde(rename = "P")]
    ChainCap,
    /// Altruist arrival rate.
    #[serde(rename = "lambda_a")]
    AltruistRate,
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "W" | "w" => Ok(SweepAxis::Penalty),
            "C" | "c" => Ok(SweepAxis::CycleCap),
            "P" | "p" => Ok(SweepAxis::ChainCap),
            "lambda_a" | "lambda" | "ndad-rate" | "ndad_rate" => Ok(SweepAxis::AltruistRate),
            other => Err(format!("unknown sweep axis `{other}` (expected W, C, P or lambda_a)")),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Penalty => "W",
            SweepAxis::CycleCap => "C",
            SweepAxis::ChainCap => "P",
            SweepAxis::AltruistRate => "lambda_a",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format `{other}` (expected csv, json or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSection {
    /// `Lin(a)` or `Exp(a)`.
    pub rule: String,
    pub outer_iterations: usize,
    /// Periods at the end of each run whose queues are pooled; 1 uses the
    /// final snapshot only.
    pub queue_window: u32,
    /// Use the decreasing form `(a+1) - a e^x` for `Exp`.
    pub literal_exp: bool,
}

impl Default for LearningSection {
    fn default() -> Self {
        LearningSection { rule: "Lin(1)".into(), outer_iterations: 50, queue_window: 1, literal_exp: false }
    }
}

impl LearningSection {
    pub fn update_rule(&self) -> Result<UpdateRule, KexError> {
        let mut rule =
            parse_rule(&self.rule).ok_or_else(|| KexError::Config(format!("bad update rule `{}`", self.rule)))?;
        if self.literal_exp && rule.family == RuleFamily::Exp {
            rule.family = RuleFamily::ExpLiteral;
        }
        Ok(rule)
    }

    pub fn queue_measure(&self) -> QueueMeasure {
        if self.queue_window <= 1 {
            QueueMeasure::FinalSnapshot
        } else {
            QueueMeasure::TrailingMean(self.queue_window)
        }
    }
}

/// Parses `Lin(1)`, `exp(3.5)` and the like.
pub fn parse_rule(s: &str) -> Option<UpdateRule> {
    let s = s.trim();
    let open = s.find('(')?;
    let inner = s[open + 1..].strip_suffix(')')?;
    let a: f64 = inner.trim().parse().ok()?;
    if !(a > 0.0 && a.is_finite()) {
        return None;
    }
    match s[..open].trim().to_ascii_lowercase().as_str() {
        "lin" => Some(UpdateRule::lin(a)),
        "exp" => Some(UpdateRule::exp(a)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: SchemeChoice,
    /// Row label in reports; defaults to the scheme name.
    pub label: Option<String>,
    pub weights_file: Option<PathBuf>,
    /// W. Unset means 0, or the value in the weights file for a learned
    /// scheme.
    pub altruist_penalty: Option<f64>,
    pub max_cycle: usize,
    pub max_chain: usize,
    pub pair_rate: f64,
    pub ndad_rate: f64,
    /// O, A, B, AB.
    pub blood_dist: [f64; 4],
    pub band_dist: [f64; 5],
    pub periods: u32,
    pub replications: usize,
    pub seed: u64,
    pub candidate_budget: usize,
    /// Per matching round; 0 disables the limit.
    pub round_timeout_secs: f64,
    /// Queue per cPRA group used to scale welfare scores; defaults to the
    /// KPD reference queue.
    pub fairness_baseline: Option<[f64; 5]>,
    pub sweep: Option<SweepSpec>,
    pub learning: LearningSection,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let pool = PoolConfig::default();
        ExperimentConfig {
            scheme: SchemeChoice::Myopic,
            label: None,
            weights_file: None,
            altruist_penalty: None,
            max_cycle: 5,
            max_chain: 5,
            pair_rate: pool.pair_rate,
            ndad_rate: pool.ndad_rate,
            blood_dist: pool.blood_dist,
            band_dist: pool.band_dist,
            periods: pool.periods,
            replications: 50,
            seed: 1,
            candidate_budget: DEFAULT_CANDIDATE_BUDGET,
            round_timeout_secs: 60.0,
            fairness_baseline: None,
            sweep: None,
            learning: LearningSection::default(),
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, KexError> {
        toml::from_str(text).map_err(|e| KexError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, KexError> {
        let text = std::fs::read_to_string(path).map_err(|e| KexError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, KexError> {
        toml::to_string(self).map_err(|e| KexError::Config(e.to_string()))
    }

    pub fn pool(&self) -> PoolConfig {
        PoolConfig {
            pair_rate: self.pair_rate,
            ndad_rate: self.ndad_rate,
            blood_dist: self.blood_dist,
            band_dist: self.band_dist,
            periods: self.periods,
        }
    }

    pub fn limits(&self) -> EnumerationLimits {
        EnumerationLimits {
            max_cycle: self.max_cycle,
            max_chain: self.max_chain,
            candidate_budget: self.candidate_budget,
        }
    }

    pub fn validate(&self) -> Result<(), KexError> {
        self.pool().validate().map_err(|e| KexError::Config(e.to_string()))?;
        if self.replications == 0 {
            return Err(KexError::Config("replications must be at least 1".into()));
        }
        if self.scheme == SchemeChoice::Learned && self.weights_file.is_none() {
            return Err(KexError::Config("a learned scheme needs a weights file".into()));
        }
        if !(self.round_timeout_secs >= 0.0) {
            return Err(KexError::Config("round timeout must be non-negative".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(KexError::Config("sweep needs at least one value".into()));
            }
        }
        Ok(())
    }
}

/// Values given on the command line; `None` leaves the loaded value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scheme: Option<SchemeChoice>,
    pub weights_file: Option<PathBuf>,
    pub altruist_penalty: Option<f64>,
    pub max_cycle: Option<usize>,
    pub max_chain: Option<usize>,
    pub pair_rate: Option<f64>,
    pub ndad_rate: Option<f64>,
    pub periods: Option<u32>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = &self.$field { cfg.$target = v.clone().into(); })*
            };
        }
        set!(
            scheme => scheme,
            max_cycle => max_cycle,
            max_chain => max_chain,
            pair_rate => pair_rate,
            ndad_rate => ndad_rate,
            periods => periods,
            replications => replications,
            seed => seed,
            out_dir => out_dir,
            format => format,
        );
        if let Some(path) = &self.weights_file {
            cfg.weights_file = Some(path.clone());
        }
        if let Some(w) = self.altruist_penalty {
            cfg.altruist_penalty = Some(w);
        }
    }
}
