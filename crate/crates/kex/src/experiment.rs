//! Replicated experiments and sweeps.
//!
//! Replication `i` always runs on `replication_seed(base, i)`, whatever is
//! being varied, so rows of a sweep share their random numbers.

use kex_core::enumerate::EnumerationLimits;
use kex_core::fairness::{GroupProfile, WelfareScores};
use kex_core::pool::PoolConfig;
use kex_core::random::replication_seed;
use kex_core::sim::{simulate, ReplicationOutcome, SimulationConfig};
use kex_core::{Scheme, SchemeKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SchemeChoice, SweepAxis};
use crate::deadline::Deadline;
use crate::error::KexError;
use crate::formats::parse_weights;

/// A fully resolved experiment: the scheme is built and any weight file read.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub label: String,
    pub scheme: Scheme,
    pub pool: PoolConfig,
    pub limits: EnumerationLimits,
    pub replications: usize,
    pub seed: u64,
    pub round_timeout_secs: f64,
    pub baseline_queue: [f64; 5],
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, KexError> {
        cfg.validate()?;
        let scheme = match cfg.scheme {
            SchemeChoice::Myopic => Scheme::myopic().with_penalty(cfg.altruist_penalty.unwrap_or(0.0)),
            SchemeChoice::Kpd => Scheme::kpd().with_penalty(cfg.altruist_penalty.unwrap_or(0.0)),
            SchemeChoice::Learned => {
                let path = cfg.weights_file.as_ref().expect("validated");
                let text = std::fs::read_to_string(path).map_err(|e| KexError::io(path, e))?;
                let scheme = Scheme::learned(parse_weights(&text)?);
                match cfg.altruist_penalty {
                    Some(w) => scheme.with_penalty(w),
                    None => scheme,
                }
            }
        };
        Ok(Experiment {
            label: cfg.label.clone().unwrap_or_else(|| default_label(&scheme)),
            scheme,
            pool: cfg.pool(),
            limits: cfg.limits(),
            replications: cfg.replications,
            seed: cfg.seed,
            round_timeout_secs: cfg.round_timeout_secs,
            baseline_queue: cfg.fairness_baseline.unwrap_or(kex_core::fairness::KPD_REFERENCE_QUEUE),
        })
    }

    /// Copy with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self, KexError> {
        let mut out = self.clone();
        let cap = |min: usize| -> Result<usize, KexError> {
            if value.fract() != 0.0 || value < min as f64 {
                return Err(KexError::Config(format!("{axis} must be an integer >= {min}, got {value}")));
            }
            Ok(value as usize)
        };
        match axis {
            SweepAxis::Penalty => out.scheme.ndad_penalty = value,
            SweepAxis::CycleCap => out.limits.max_cycle = cap(2)?,
            SweepAxis::ChainCap => out.limits.max_chain = cap(0)?,
            SweepAxis::AltruistRate => out.pool.ndad_rate = value,
        }
        Ok(out)
    }
}

fn default_label(scheme: &Scheme) -> String {
    match scheme.kind {
        SchemeKind::Myopic => "Myopic".into(),
        SchemeKind::KpdPoints => "KPD".into(),
        SchemeKind::Learned(_) => "Learned".into(),
    }
}

fn pct(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMetrics {
    pub patients_arrived: u64,
    pub ndads_arrived: u64,
    pub matches: u64,
    pub match_pct: f64,
    /// Months, over matched patients.
    pub wait_recipient: Option<f64>,
    /// Months, over all patients.
    pub wait_all: Option<f64>,
    pub ndads_used: u64,
    pub altruist_usage_pct: f64,
    pub paths: u64,
    /// Index = patients in the cycle.
    pub cycles_by_length: Vec<u64>,
    /// Index = patients in the chain.
    pub paths_by_length: Vec<u64>,
    pub patients_in_paths: u64,
    pub patients_in_cycles: u64,
    pub path_match_pct: f64,
    pub cycle_match_pct: f64,
    pub queue_by_band: [u32; 5],
    pub ndads_waiting: u32,
    pub welfare: WelfareScores,
    pub fairness: WelfareScores,
    /// Some group ended with an empty queue and was counted as one.
    pub floored: bool,
}

impl ReplicationMetrics {
    pub fn from_outcome(out: &ReplicationOutcome, baseline: &WelfareScores) -> Self {
        let (welfare, utilities) = WelfareScores::compute(&GroupProfile::from_counts(out.final_queue.by_band));
        let matched = out.patients_matched as f64;
        ReplicationMetrics {
            patients_arrived: out.patients_arrived,
            ndads_arrived: out.ndads_arrived,
            matches: out.patients_matched,
            match_pct: pct(matched, out.patients_arrived as f64),
            wait_recipient: out.mean_recipient_wait,
            wait_all: out.mean_wait,
            ndads_used: out.ndads_used,
            altruist_usage_pct: pct(out.ndads_used as f64, out.ndads_arrived as f64),
            paths: out.chains_by_length.iter().sum(),
            cycles_by_length: out.cycles_by_length.clone(),
            paths_by_length: out.chains_by_length.clone(),
            patients_in_paths: out.patients_in_chains,
            patients_in_cycles: out.patients_in_cycles,
            path_match_pct: pct(out.patients_in_chains as f64, matched),
            cycle_match_pct: pct(out.patients_in_cycles as f64, matched),
            queue_by_band: out.final_queue.by_band,
            ndads_waiting: out.final_queue.ndads,
            fairness: welfare.scaled(baseline).expect("baseline scores are positive"),
            welfare,
            floored: utilities.any_floored(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    pub metrics: Option<ReplicationMetrics>,
    pub error: Option<String>,
}

/// Group welfare and its baseline-scaled fairness measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessPair {
    pub welfare: WelfareScores,
    pub fairness: WelfareScores,
}

/// Means over the replications that completed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub completed: usize,
    pub participants: f64,
    pub patients_arrived: f64,
    pub ndads_arrived: f64,
    pub matches: f64,
    pub match_pct: f64,
    pub wait_recipient: Option<f64>,
    pub wait_all: Option<f64>,
    pub ndads_used: f64,
    pub altruist_usage_pct: f64,
    pub paths: f64,
    pub cycles_by_length: Vec<f64>,
    pub paths_by_length: Vec<f64>,
    pub patients_in_paths: f64,
    pub patients_in_cycles: f64,
    pub path_match_pct: f64,
    pub queue_by_band: [f64; 5],
    /// Scores averaged over replications.
    pub fairness_mean_of_scores: Option<FairnessPair>,
    /// Scores of the averaged queue.
    pub fairness_of_mean_queue: Option<FairnessPair>,
}

fn mean<'a>(xs: impl Iterator<Item = f64> + 'a) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn mean_opt(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = xs.flatten().collect();
    (!present.is_empty()).then(|| mean(present.into_iter()))
}

fn mean_vec(rows: &[&ReplicationMetrics], get: impl Fn(&ReplicationMetrics) -> &[u64]) -> Vec<f64> {
    let len = rows.iter().map(|r| get(r).len()).max().unwrap_or(0);
    (0..len).map(|i| mean(rows.iter().map(|r| get(r).get(i).copied().unwrap_or(0) as f64))).collect()
}

fn mean_scores(xs: impl Iterator<Item = WelfareScores> + Clone) -> WelfareScores {
    WelfareScores {
        utilitarian: mean(xs.clone().map(|s| s.utilitarian)),
        nash: mean(xs.clone().map(|s| s.nash)),
        egalitarian: mean(xs.map(|s| s.egalitarian)),
    }
}

impl Summary {
    pub fn from_replications(rows: &[&ReplicationMetrics], baseline: &WelfareScores) -> Self {
        if rows.is_empty() {
            return Summary::default();
        }
        let m = |f: fn(&ReplicationMetrics) -> f64| mean(rows.iter().map(|r| f(r)));
        let mut queue = [0.0; 5];
        for (j, q) in queue.iter_mut().enumerate() {
            *q = mean(rows.iter().map(|r| f64::from(r.queue_by_band[j])));
        }
        let of_queue = WelfareScores::compute(&GroupProfile::new(queue)).0;
        Summary {
            completed: rows.len(),
            participants: m(|r| (r.patients_arrived + r.ndads_arrived) as f64),
            patients_arrived: m(|r| r.patients_arrived as f64),
            ndads_arrived: m(|r| r.ndads_arrived as f64),
            matches: m(|r| r.matches as f64),
            match_pct: m(|r| r.match_pct),
            wait_recipient: mean_opt(rows.iter().map(|r| r.wait_recipient)),
            wait_all: mean_opt(rows.iter().map(|r| r.wait_all)),
            ndads_used: m(|r| r.ndads_used as f64),
            altruist_usage_pct: m(|r| r.altruist_usage_pct),
            paths: m(|r| r.paths as f64),
            cycles_by_length: mean_vec(rows, |r| &r.cycles_by_length),
            paths_by_length: mean_vec(rows, |r| &r.paths_by_length),
            patients_in_paths: m(|r| r.patients_in_paths as f64),
            patients_in_cycles: m(|r| r.patients_in_cycles as f64),
            path_match_pct: m(|r| r.path_match_pct),
            queue_by_band: queue,
            fairness_mean_of_scores: Some(FairnessPair {
                welfare: mean_scores(rows.iter().map(|r| r.welfare)),
                fairness: mean_scores(rows.iter().map(|r| r.fairness)),
            }),
            fairness_of_mean_queue: Some(FairnessPair {
                welfare: of_queue,
                fairness: of_queue.scaled(baseline).expect("baseline scores are positive"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub scheme: String,
    pub penalty: f64,
    pub max_cycle: usize,
    pub max_chain: usize,
    pub pair_rate: f64,
    pub ndad_rate: f64,
    pub periods: u32,
    pub base_seed: u64,
    pub replications: Vec<ReplicationResult>,
    pub summary: Summary,
    /// False if any replication aborted.
    pub complete: bool,
    pub warnings: Vec<String>,
}

fn run_one(exp: &Experiment, sim: &SimulationConfig, index: usize, baseline: &WelfareScores) -> ReplicationResult {
    let seed = replication_seed(exp.seed, index as u64);
    let deadline = Deadline::from_secs(exp.round_timeout_secs);
    match simulate(sim, seed, &deadline) {
        Ok(out) => ReplicationResult {
            index,
            seed,
            metrics: Some(ReplicationMetrics::from_outcome(&out, baseline)),
            error: None,
        },
        Err(e) => ReplicationResult { index, seed, metrics: None, error: Some(e.to_string()) },
    }
}

/// Runs every replication in parallel; results are folded in index order, so
/// the report does not depend on scheduling.
pub fn run_experiment(exp: &Experiment) -> Result<RunReport, KexError> {
    let sim = SimulationConfig::new(exp.pool.clone(), exp.limits, exp.scheme.clone());
    sim.validate().map_err(|e| KexError::Config(e.to_string()))?;
    let baseline = WelfareScores::compute(&GroupProfile::new(exp.baseline_queue)).0;
    let results: Vec<ReplicationResult> =
        (0..exp.replications).into_par_iter().map(|i| run_one(exp, &sim, i, &baseline)).collect();

    let mut warnings = Vec::new();
    for r in &results {
        if let Some(e) = &r.error {
            warnings.push(format!("replication {} (seed {}) aborted: {e}", r.index, r.seed));
        }
        if let Some(m) = &r.metrics {
            if m.floored {
                let empty: Vec<String> =
                    (0..5).filter(|&j| m.queue_by_band[j] == 0).map(|j| format!("G{}", j + 1)).collect();
                warnings.push(format!("replication {}: empty queue in {} counted as one", r.index, empty.join(", ")));
            }
        }
    }
    let done: Vec<&ReplicationMetrics> = results.iter().filter_map(|r| r.metrics.as_ref()).collect();
    Ok(RunReport {
        label: exp.label.clone(),
        scheme: exp.scheme.name().into(),
        penalty: exp.scheme.ndad_penalty,
        max_cycle: exp.limits.max_cycle,
        max_chain: exp.limits.max_chain,
        pair_rate: exp.pool.pair_rate,
        ndad_rate: exp.pool.ndad_rate,
        periods: exp.pool.periods,
        base_seed: exp.seed,
        summary: Summary::from_replications(&done, &baseline),
        complete: done.len() == results.len(),
        replications: results,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: RunReport,
    /// Change in matches over change in altruists since the previous row
    /// (altruist-rate sweeps only).
    pub marginal_matches_per_altruist: Option<f64>,
    /// Paths per arrived altruist (altruist-rate sweeps only).
    pub donors_per_altruist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn complete(&self) -> bool {
        self.rows.iter().all(|r| r.report.complete)
    }
}

/// One experiment per value, all on the same replication seeds. Values must
/// be sorted, in either direction.
pub fn run_sweep(base: &Experiment, axis: SweepAxis, values: &[f64]) -> Result<SweepReport, KexError> {
    if values.is_empty() {
        return Err(KexError::Config("sweep needs at least one value".into()));
    }
    let ascending = values.windows(2).all(|w| w[0] <= w[1]);
    let descending = values.windows(2).all(|w| w[0] >= w[1]);
    if !(ascending || descending) {
        return Err(KexError::Config("sweep values must be sorted".into()));
    }
    let mut rows: Vec<SweepRow> = Vec::with_capacity(values.len());
    for &value in values {
        let report = run_experiment(&base.with_axis(axis, value)?)?;
        let (mut marginal, mut donors) = (None, None);
        if axis == SweepAxis::AltruistRate {
            let s = &report.summary;
            if s.ndads_arrived > 0.0 {
                donors = Some(s.paths / s.ndads_arrived);
            }
            if let Some(prev) = rows.last() {
                let p = &prev.report.summary;
                let d_altruists = s.ndads_arrived - p.ndads_arrived;
                if d_altruists != 0.0 {
                    marginal = Some((s.matches - p.matches) / d_altruists);
                }
            }
        }
        rows.push(SweepRow { value, report, marginal_matches_per_altruist: marginal, donors_per_altruist: donors });
    }
    Ok(SweepReport { axis, rows })
}
