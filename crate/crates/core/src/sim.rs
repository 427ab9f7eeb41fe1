//! One replication of the dynamic exchange: each period admits arrivals,
//! builds the exchange graph, enumerates candidates, solves the packing and
//! clears the matched nodes.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use crate::compat::{build_graph, CompatibilityCache};
use crate::enumerate::{enumerate_all, EnumerationLimits};
use crate::error::{ConfigError, SimError};
use crate::model::{CandidateKind, ExchangeGraph, Selection};
use crate::pool::{arrivals, Pool, PoolConfig, QueueComposition};
use crate::random::{mix64, stream, STREAM_CROSSMATCH, STREAM_NDADS, STREAM_PAIRS};
use crate::solver::{solve_with, Interrupt, NoInterrupt, PackingInstance, SolverOptions};
use crate::weights::Scheme;

/// Everything that defines a replication except its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub pool: PoolConfig,
    pub limits: EnumerationLimits,
    pub scheme: Scheme,
    pub solver: SolverOptions,
}

impl SimulationConfig {
    pub fn new(pool: PoolConfig, limits: EnumerationLimits, scheme: Scheme) -> Self {
        SimulationConfig { pool, limits, scheme, solver: SolverOptions::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pool.validate()?;
        if !self.scheme.ndad_penalty.is_finite() {
            return Err(ConfigError::Invalid("altruist penalty must be finite"));
        }
        if self.limits.candidate_budget == 0 {
            return Err(ConfigError::Invalid("candidate budget must be positive"));
        }
        Ok(())
    }
}

/// Per-period snapshot taken after removal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeriodRecord {
    pub period: u32,
    pub arrived_pairs: u32,
    pub arrived_ndads: u32,
    pub arcs: usize,
    pub candidates: usize,
    pub matched_patients: usize,
    pub cycles: usize,
    pub chains: usize,
    pub objective: f64,
    pub waiting_pairs: usize,
    pub waiting_ndads: usize,
    pub solver_nodes: u64,
}

/// Totals of a finished replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub seed: u64,
    pub periods: u32,
    pub patients_arrived: u64,
    pub ndads_arrived: u64,
    pub patients_matched: u64,
    pub ndads_used: u64,
    /// Selected cycles indexed by number of pairs.
    pub cycles_by_length: Vec<u64>,
    /// Selected chains indexed by number of patients.
    pub chains_by_length: Vec<u64>,
    pub patients_in_cycles: u64,
    pub patients_in_chains: u64,
    pub mean_recipient_wait: Option<f64>,
    pub mean_wait: Option<f64>,
    pub final_queue: QueueComposition,
    pub history: Vec<PeriodRecord>,
}

/// Stepwise simulation state for one replication.
#[derive(Clone)]
pub struct Simulation<'a> {
    cfg: &'a SimulationConfig,
    seed: u64,
    pool: Pool,
    cache: CompatibilityCache,
    pair_rng: ChaCha8Rng,
    ndad_rng: ChaCha8Rng,
    crossmatch_seed: u64,
    next_id: u32,
    period: u32,
    cycles_by_length: Vec<u64>,
    chains_by_length: Vec<u64>,
    history: Vec<PeriodRecord>,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a SimulationConfig, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(Simulation {
            cfg,
            seed,
            pool: Pool::new(),
            cache: CompatibilityCache::new(),
            pair_rng: stream(seed, STREAM_PAIRS),
            ndad_rng: stream(seed, STREAM_NDADS),
            crossmatch_seed: mix64(seed ^ STREAM_CROSSMATCH),
            next_id: 0,
            period: 0,
            cycles_by_length: alloc::vec![0; cfg.limits.max_cycle.max(1) + 1],
            chains_by_length: alloc::vec![0; cfg.limits.max_chain + 1],
            history: Vec::new(),
        })
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn is_finished(&self) -> bool {
        self.period >= self.cfg.pool.periods
    }

    pub fn pool(&self) -> &Pool {
        &self.pool
    }

    pub fn history(&self) -> &[PeriodRecord] {
        &self.history
    }

    /// Draws and admits this period's arrivals.
    pub fn admit_arrivals(&mut self) -> (u32, u32) {
        let arr = arrivals(&self.cfg.pool, self.period, &mut self.pair_rng, &mut self.ndad_rng, &mut self.next_id);
        let counts = (arr.pairs.len() as u32, arr.ndads.len() as u32);
        self.pool.admit(arr);
        counts
    }

    /// Exchange graph and packing instance over the current pool.
    pub fn build_instance(&mut self) -> Result<(ExchangeGraph, PackingInstance), SimError> {
        let period = self.period;
        let graph = build_graph(&self.pool, &mut self.cache, self.crossmatch_seed);
        let candidates = enumerate_all(&graph, &self.cfg.limits, &self.cfg.scheme)
            .map_err(|source| SimError::Enumeration { period, source })?;
        let instance =
            PackingInstance::from_graph(&graph, candidates).map_err(|source| SimError::Solve { period, source })?;
        Ok((graph, instance))
    }

    /// Runs one full period.
    pub fn step(&mut self, interrupt: &dyn Interrupt) -> Result<PeriodRecord, SimError> {
        let period = self.period;
        let (arrived_pairs, arrived_ndads) = self.admit_arrivals();
        let (graph, instance) = self.build_instance()?;
        interrupt.round_started();
        let solution =
            solve_with(&instance, &self.cfg.solver, interrupt).map_err(|source| SimError::Solve { period, source })?;
        let removed = self
            .pool
            .remove_matched(&solution.selection, period)
            .map_err(|source| SimError::Pool { period, source })?;
        self.cache.forget(&removed);
        let (cycles, chains) = self.tally(&solution.selection);
        let record = PeriodRecord {
            period,
            arrived_pairs,
            arrived_ndads,
            arcs: graph.arcs().len(),
            candidates: instance.candidates().len(),
            matched_patients: solution.selection.transplants(),
            cycles,
            chains,
            objective: solution.selection.objective,
            waiting_pairs: self.pool.pair_count(),
            waiting_ndads: self.pool.ndad_count(),
            solver_nodes: solution.stats.nodes,
        };
        self.history.push(record.clone());
        self.period += 1;
        Ok(record)
    }

    fn tally(&mut self, selection: &Selection) -> (usize, usize) {
        let mut cycles = 0;
        let mut chains = 0;
        for c in &selection.candidates {
            let n = c.transplants();
            match c.kind {
                CandidateKind::Cycle => {
                    cycles += 1;
                    self.cycles_by_length[n] += 1;
                }
                CandidateKind::Chain => {
                    chains += 1;
                    self.chains_by_length[n] += 1;
                }
            }
        }
        (cycles, chains)
    }

    pub fn finish(self) -> ReplicationOutcome {
        let horizon = self.period;
        let ledger = self.pool.ledger();
        let weighted = |v: &[u64]| v.iter().enumerate().map(|(len, n)| len as u64 * n).sum::<u64>();
        ReplicationOutcome {
            seed: self.seed,
            periods: horizon,
            patients_arrived: self.pool.pairs_arrived(),
            ndads_arrived: self.pool.ndads_arrived(),
            patients_matched: self.pool.pairs_matched(),
            ndads_used: self.pool.ndads_used(),
            patients_in_cycles: weighted(&self.cycles_by_length),
            patients_in_chains: weighted(&self.chains_by_length),
            mean_recipient_wait: ledger.mean_recipient_wait(),
            mean_wait: ledger.mean_wait(horizon),
            final_queue: self.pool.queue_composition(),
            cycles_by_length: self.cycles_by_length,
            chains_by_length: self.chains_by_length,
            history: self.history,
        }
    }
}

/// Runs every configured period for one seed.
pub fn simulate(cfg: &SimulationConfig, seed: u64, interrupt: &dyn Interrupt) -> Result<ReplicationOutcome, SimError> {
    let mut sim = Simulation::new(cfg, seed)?;
    while !sim.is_finished() {
        sim.step(interrupt)?;
    }
    Ok(sim.finish())
}

/// [`simulate`] without an interrupt.
pub fn simulate_uninterrupted(cfg: &SimulationConfig, seed: u64) -> Result<ReplicationOutcome, SimError> {
    simulate(cfg, seed, &NoInterrupt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk(scheme: Scheme) -> SimulationConfig {
        let pool = PoolConfig { pair_rate: 8.0, ndad_rate: 1.0, periods: 8, ..PoolConfig::default() };
        SimulationConfig::new(pool, EnumerationLimits::new(3, 3), scheme)
    }

    #[test]
    fn zero_periods_is_empty() {
        let mut cfg = desk(Scheme::myopic());
        cfg.pool.periods = 0;
        let out = simulate_uninterrupted(&cfg, 1).unwrap();
        assert_eq!(out.patients_arrived, 0);
        assert_eq!(out.patients_matched, 0);
        assert!(out.history.is_empty());
        assert_eq!(out.mean_wait, None);
    }

    #[test]
    fn conservation_and_determinism() {
        let cfg = desk(Scheme::myopic_plus());
        let a = simulate_uninterrupted(&cfg, 42).unwrap();
        let b = simulate_uninterrupted(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.patients_arrived, a.patients_matched + u64::from(a.final_queue.pairs()));
        assert_eq!(a.patients_matched, a.patients_in_cycles + a.patients_in_chains);
        let chains: u64 = a.chains_by_length.iter().sum();
        assert_eq!(chains, a.ndads_used);
        assert!(a.ndads_used <= a.ndads_arrived);
        assert_eq!(a.ndads_arrived, a.ndads_used + u64::from(a.final_queue.ndads));
        assert!(a.patients_matched > 0);
    }

    #[test]
    fn arrivals_do_not_depend_on_decisions() {
        let a = simulate_uninterrupted(&desk(Scheme::myopic()), 7).unwrap();
        let b = simulate_uninterrupted(&desk(Scheme::kpd_plus()), 7).unwrap();
        let arrivals =
            |o: &ReplicationOutcome| o.history.iter().map(|r| (r.arrived_pairs, r.arrived_ndads)).collect::<Vec<_>>();
        assert_eq!(arrivals(&a), arrivals(&b));
    }
}
