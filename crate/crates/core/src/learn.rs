//! Weight learning: repeated simulations whose end-of-run queue composition
//! pushes pair-type weights up for types that pile up in the queue.
//!
//! With `x = que / pop` (queue share over population share of a type), the
//! raw weight is `f(x)` and the table is rescaled so its minimum is exactly 1.

use alloc::vec::Vec;

use crate::enumerate::EnumerationLimits;
use crate::error::LearnError;
use crate::model::PairType;
use crate::pool::{population_proportion, PoolConfig, QueueComposition};
use crate::random::replication_seed;
use crate::sim::{Simulation, SimulationConfig};
use crate::solver::{Interrupt, NoInterrupt, SolverOptions};
use crate::weights::{Scheme, WeightTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RuleFamily {
    /// `f(x) = 1 + x/a`
    Lin,
    /// `f(x) = (a+1) - a e^{-x}`: increasing, `f(0) = 1`, bounded by `a+1`.
    Exp,
    /// `f(x) = (a+1) - a e^{x}`. Decreasing in `x`; kept only for auditing.
    ExpLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UpdateRule {
    pub family: RuleFamily,
    pub a: f64,
}

impl UpdateRule {
    pub fn lin(a: f64) -> Self {
        UpdateRule { family: RuleFamily::Lin, a }
    }

    pub fn exp(a: f64) -> Self {
        UpdateRule { family: RuleFamily::Exp, a }
    }

    /// Raw (unscaled) weight for ratio `x`.
    pub fn raw(&self, x: f64) -> f64 {
        match self.family {
            RuleFamily::Lin => 1.0 + x / self.a,
            RuleFamily::Exp => (self.a + 1.0) - self.a * libm::exp(-x),
            RuleFamily::ExpLiteral => (self.a + 1.0) - self.a * libm::exp(x),
        }
    }

    /// The seven standard rules: Lin(1), Lin(2), Exp(1), Exp(3), ..., Exp(9).
    pub fn standard() -> [UpdateRule; 7] {
        [Self::lin(1.0), Self::lin(2.0), Self::exp(1.0), Self::exp(3.0), Self::exp(5.0), Self::exp(7.0), Self::exp(9.0)]
    }
}

impl core::fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let name = match self.family {
            RuleFamily::Lin => "Lin",
            RuleFamily::Exp => "Exp",
            RuleFamily::ExpLiteral => "ExpLiteral",
        };
        write!(f, "{name}({})", self.a)
    }
}

/// Raw weights `f(que/pop)` divided by their minimum.
pub fn scaled_weights(rule: &UpdateRule, que: &[f64], pop: &[f64]) -> Result<Vec<f64>, LearnError> {
    let mut raw = Vec::with_capacity(que.len());
    for (type_index, (&q, &p)) in que.iter().zip(pop).enumerate() {
        if !(p > 0.0) {
            return Err(LearnError::ZeroPopulation { type_index });
        }
        let x = q / p;
        if !x.is_finite() {
            return Err(LearnError::NonFiniteRatio { type_index });
        }
        raw.push(rule.raw(x));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0 && min.is_finite()) {
        return Err(LearnError::NonPositiveMinimum { min });
    }
    for w in &mut raw {
        *w /= min;
    }
    Ok(raw)
}

/// One update over all 80 pair types; the penalty is carried through.
pub fn update_weights(
    rule: &UpdateRule,
    que: &[f64; PairType::COUNT],
    pop: &[f64; PairType::COUNT],
    ndad_penalty: f64,
) -> Result<WeightTable, LearnError> {
    let scaled = scaled_weights(rule, que, pop)?;
    let mut pair_weight = [0.0; PairType::COUNT];
    pair_weight.copy_from_slice(&scaled);
    Ok(WeightTable { pair_weight, ndad_penalty })
}

/// Population share of every pair type under `cfg`.
pub fn population_proportions(cfg: &PoolConfig) -> [f64; PairType::COUNT] {
    let mut pop = [0.0; PairType::COUNT];
    for ty in PairType::all() {
        pop[ty.index()] = population_proportion(cfg, ty);
    }
    pop
}

/// How the queue share of each type is measured at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum QueueMeasure {
    /// Composition of the pool after the last period.
    FinalSnapshot,
    /// Type counts summed over the last `n` periods, then normalized.
    TrailingMean(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub outer_iterations: usize,
    pub pool: PoolConfig,
    pub limits: EnumerationLimits,
    pub ndad_penalty: f64,
    pub seed: u64,
    pub queue_measure: QueueMeasure,
    pub solver: SolverOptions,
}

impl LearningConfig {
    pub fn new(pool: PoolConfig, limits: EnumerationLimits, ndad_penalty: f64, seed: u64) -> Self {
        LearningConfig {
            outer_iterations: 50,
            pool,
            limits,
            ndad_penalty,
            seed,
            queue_measure: QueueMeasure::FinalSnapshot,
            solver: SolverOptions::default(),
        }
    }
}

/// Summary of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iteration: usize,
    pub patients_arrived: u64,
    pub patients_matched: u64,
    pub final_queue_pairs: u32,
    pub max_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningOutcome {
    pub table: WeightTable,
    /// Queue shares that produced `table`.
    pub last_queue: [f64; PairType::COUNT],
    pub iterations: Vec<IterationRecord>,
}

fn proportions(counts: &[u64; PairType::COUNT]) -> [f64; PairType::COUNT] {
    let total: u64 = counts.iter().sum();
    let mut out = [0.0; PairType::COUNT];
    if total > 0 {
        for (o, &c) in out.iter_mut().zip(counts) {
            *o = c as f64 / total as f64;
        }
    }
    out
}

fn accumulate(into: &mut [u64; PairType::COUNT], q: &QueueComposition) {
    for (acc, &c) in into.iter_mut().zip(&q.by_type) {
        *acc += u64::from(c);
    }
}

/// Runs the learning loop and returns the final table.
pub fn run_learning(cfg: &LearningConfig, rule: &UpdateRule) -> Result<LearningOutcome, LearnError> {
    run_learning_with(cfg, rule, &NoInterrupt)
}

pub fn run_learning_with(
    cfg: &LearningConfig,
    rule: &UpdateRule,
    interrupt: &dyn Interrupt,
) -> Result<LearningOutcome, LearnError> {
    let pop = population_proportions(&cfg.pool);
    let mut table = WeightTable { ndad_penalty: cfg.ndad_penalty, ..WeightTable::ones() };
    let mut last_queue = [0.0; PairType::COUNT];
    let mut iterations = Vec::with_capacity(cfg.outer_iterations);
    for iteration in 0..cfg.outer_iterations {
        let sim_cfg = SimulationConfig {
            pool: cfg.pool.clone(),
            limits: cfg.limits,
            scheme: Scheme::learned(table.clone()),
            solver: cfg.solver,
        };
        let fail = |source| LearnError::Simulation { iteration, source };
        let mut sim =
            Simulation::new(&sim_cfg, replication_seed(cfg.seed, iteration as u64)).map_err(|e| fail(e.into()))?;
        let window = match cfg.queue_measure {
            QueueMeasure::FinalSnapshot => 1,
            QueueMeasure::TrailingMean(n) => n.max(1),
        };
        let mut counts = [0u64; PairType::COUNT];
        while !sim.is_finished() {
            sim.step(interrupt).map_err(fail)?;
            if sim.period() + window > cfg.pool.periods {
                accumulate(&mut counts, &sim.pool().queue_composition());
            }
        }
        last_queue = proportions(&counts);
        let outcome = sim.finish();
        table = update_weights(rule, &last_queue, &pop, cfg.ndad_penalty)?;
        iterations.push(IterationRecord {
            iteration,
            patients_arrived: outcome.patients_arrived,
            patients_matched: outcome.patients_matched,
            final_queue_pairs: outcome.final_queue.pairs(),
            max_weight: table.pair_weight.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    Ok(LearningOutcome { table, last_queue, iterations })
}
