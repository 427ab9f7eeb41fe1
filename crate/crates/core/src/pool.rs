//! The dynamic waiting pool: Poisson arrivals, removal of matched nodes,
//! the wait-time ledger and queue-composition snapshots.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::error::{ConfigError, PoolError};
use crate::model::{
    pair_type_of, BloodType, CpraBand, NdadNode, Node, NodeId, PairNode, PairType, Selection, CPRA_BANDS,
};
use crate::random::{categorical, poisson, uniform};

/// Months per matching period.
pub const MONTHS_PER_PERIOD: f64 = 4.0;

/// Arrival process parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoolConfig {
    /// Mean pair arrivals per period.
    pub pair_rate: f64,
    /// Mean altruist arrivals per period.
    pub ndad_rate: f64,
    /// Blood group probabilities indexed by [`BloodType::index`] (O, A, B, AB).
    pub blood_dist: [f64; 4],
    /// cPRA band probabilities, band 1 first.
    pub band_dist: [f64; 5],
    pub periods: u32,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            pair_rate: 37.0,
            ndad_rate: 4.5625,
            // P(A, B, AB, O) = (0.46, 0.42, 0.09, 0.03), stored in O, A, B, AB order
            blood_dist: [0.03, 0.46, 0.42, 0.09],
            band_dist: [0.24, 0.29, 0.24, 0.10, 0.13],
            periods: 50,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        check_rate("pair", self.pair_rate)?;
        check_rate("altruist", self.ndad_rate)?;
        check_dist("blood", &self.blood_dist)?;
        check_dist("cPRA band", &self.band_dist)
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::InvalidRate { name, value })
    }
}

fn check_dist(name: &'static str, probs: &[f64]) -> Result<(), ConfigError> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(ConfigError::InvalidProbability { name });
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(ConfigError::DistributionSum { name, sum });
    }
    Ok(())
}

/// Share of pair type `ty` in the arriving population.
pub fn population_proportion(cfg: &PoolConfig, ty: PairType) -> f64 {
    cfg.blood_dist[ty.donor_blood.index()]
        * cfg.blood_dist[ty.patient_blood.index()]
        * cfg.band_dist[usize::from(ty.band - 1)]
}

/// Fresh nodes for one period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Arrivals {
    pub pairs: Vec<PairNode>,
    pub ndads: Vec<NdadNode>,
}

/// Draws one period of arrivals. Pair counts and attributes come from
/// `pair_rng`, altruists from `ndad_rng`; ids are taken from `next_id`,
/// pairs first.
pub fn arrivals<R: RngCore + ?Sized, S: RngCore + ?Sized>(
    cfg: &PoolConfig,
    period: u32,
    pair_rng: &mut R,
    ndad_rng: &mut S,
    next_id: &mut u32,
) -> Arrivals {
    let n_pairs = poisson(pair_rng, cfg.pair_rate);
    let mut pairs = Vec::with_capacity(n_pairs as usize);
    for _ in 0..n_pairs {
        let donor_blood = BloodType::ALL[categorical(pair_rng, &cfg.blood_dist)];
        let patient_blood = BloodType::ALL[categorical(pair_rng, &cfg.blood_dist)];
        let band = &CPRA_BANDS[categorical(pair_rng, &cfg.band_dist)];
        let cpra = sample_cpra(pair_rng, band);
        pairs.push(PairNode { id: take_id(next_id), donor_blood, patient_blood, cpra, arrival_period: period });
    }
    let n_ndads = poisson(ndad_rng, cfg.ndad_rate);
    let ndads = (0..n_ndads)
        .map(|_| NdadNode {
            id: take_id(next_id),
            donor_blood: BloodType::ALL[categorical(ndad_rng, &cfg.blood_dist)],
            arrival_period: period,
        })
        .collect();
    Arrivals { pairs, ndads }
}

fn sample_cpra<R: RngCore + ?Sized>(rng: &mut R, band: &CpraBand) -> f64 {
    let u = uniform(rng);
    (band.lower + u * (band.upper - band.lower)).min(band.upper)
}

fn take_id(next_id: &mut u32) -> NodeId {
    let id = NodeId(*next_id);
    *next_id += 1;
    id
}

/// Arrival and match periods of every patient that entered the pool.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WaitLedger {
    records: BTreeMap<NodeId, WaitRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaitRecord {
    pub arrival_period: u32,
    pub match_period: Option<u32>,
}

impl WaitLedger {
    pub fn get(&self, id: NodeId) -> Option<&WaitRecord> {
        self.records.get(&id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn matched(&self) -> impl Iterator<Item = (NodeId, &WaitRecord)> {
        self.records.iter().filter(|(_, r)| r.match_period.is_some()).map(|(id, r)| (*id, r))
    }

    pub fn records(&self) -> impl Iterator<Item = (NodeId, &WaitRecord)> {
        self.records.iter().map(|(id, r)| (*id, r))
    }

    /// Mean wait in months over matched patients, or `None` if nobody matched.
    pub fn mean_recipient_wait(&self) -> Option<f64> {
        let waits: Vec<u32> =
            self.records.values().filter_map(|r| r.match_period.map(|m| m - r.arrival_period)).collect();
        mean_months(&waits)
    }

    /// Mean wait in months over all patients; those still waiting count up
    /// to `horizon`.
    pub fn mean_wait(&self, horizon: u32) -> Option<f64> {
        let waits: Vec<u32> =
            self.records.values().map(|r| r.match_period.unwrap_or(horizon).saturating_sub(r.arrival_period)).collect();
        mean_months(&waits)
    }
}

fn mean_months(periods: &[u32]) -> Option<f64> {
    if periods.is_empty() {
        return None;
    }
    let total: u64 = periods.iter().map(|&p| u64::from(p)).sum();
    Some(MONTHS_PER_PERIOD * total as f64 / periods.len() as f64)
}

/// Waiting-pool counts by pair type and by cPRA band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueComposition {
    pub by_type: [u32; PairType::COUNT],
    pub by_band: [u32; 5],
    pub ndads: u32,
}

impl Default for QueueComposition {
    fn default() -> Self {
        QueueComposition { by_type: [0; PairType::COUNT], by_band: [0; 5], ndads: 0 }
    }
}

impl QueueComposition {
    pub fn pairs(&self) -> u32 {
        self.by_band.iter().sum()
    }

    /// Per-type proportions of the waiting pairs; all zero for an empty queue.
    pub fn type_proportions(&self) -> [f64; PairType::COUNT] {
        let total = self.pairs();
        let mut out = [0.0; PairType::COUNT];
        if total > 0 {
            for (o, &c) in out.iter_mut().zip(&self.by_type) {
                *o = f64::from(c) / f64::from(total);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Waiting<T> {
    node: T,
    /// Class-local arrival index; keys crossmatch draws independently of the
    /// shared id counter.
    key: u64,
}

const PAIR_KEY: u64 = 0;
const NDAD_KEY: u64 = 1 << 63;

/// Everything currently waiting, plus arrival totals and the wait ledger.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pool {
    pairs: BTreeMap<NodeId, Waiting<PairNode>>,
    ndads: BTreeMap<NodeId, Waiting<NdadNode>>,
    ledger: WaitLedger,
    pairs_arrived: u64,
    ndads_arrived: u64,
    pairs_matched: u64,
    ndads_used: u64,
}

impl Pool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn admit(&mut self, arrivals: Arrivals) {
        for p in arrivals.pairs {
            let key = PAIR_KEY | self.pairs_arrived;
            self.pairs_arrived += 1;
            self.ledger.records.insert(p.id, WaitRecord { arrival_period: p.arrival_period, match_period: None });
            self.pairs.insert(p.id, Waiting { node: p, key });
        }
        for a in arrivals.ndads {
            let key = NDAD_KEY | self.ndads_arrived;
            self.ndads_arrived += 1;
            self.ndads.insert(a.id, Waiting { node: a, key });
        }
    }

    /// Removes every node used by `selection`, recording `period` as the
    /// match period of each recipient. Fails without side effects if any id
    /// is not waiting.
    pub fn remove_matched(&mut self, selection: &Selection, period: u32) -> Result<Vec<NodeId>, PoolError> {
        let ids: Vec<NodeId> = selection.node_ids().collect();
        if let Some(missing) = ids.iter().find(|id| !self.pairs.contains_key(id) && !self.ndads.contains_key(id)) {
            return Err(PoolError::UnknownId(*missing));
        }
        for id in &ids {
            if self.pairs.remove(id).is_some() {
                self.pairs_matched += 1;
                if let Some(r) = self.ledger.records.get_mut(id) {
                    r.match_period = Some(period);
                }
            } else if self.ndads.remove(id).is_some() {
                self.ndads_used += 1;
            }
        }
        Ok(ids)
    }

    pub fn queue_composition(&self) -> QueueComposition {
        let mut q = QueueComposition::default();
        for w in self.pairs.values() {
            let ty = pair_type_of(&w.node);
            q.by_type[ty.index()] += 1;
            q.by_band[usize::from(ty.band - 1)] += 1;
        }
        q.ndads = self.ndads.len() as u32;
        q
    }

    pub fn waiting_pairs(&self) -> impl Iterator<Item = &PairNode> {
        self.pairs.values().map(|w| &w.node)
    }

    pub fn waiting_ndads(&self) -> impl Iterator<Item = &NdadNode> {
        self.ndads.values().map(|w| &w.node)
    }

    pub(crate) fn waiting_pairs_keyed(&self) -> impl Iterator<Item = (&PairNode, u64)> {
        self.pairs.values().map(|w| (&w.node, w.key))
    }

    /// All waiting nodes in id order with their crossmatch keys.
    pub(crate) fn waiting_nodes(&self) -> impl Iterator<Item = (Node, u64)> + '_ {
        let mut out: Vec<(Node, u64)> = self
            .pairs
            .values()
            .map(|w| (Node::Pair(w.node), w.key))
            .chain(self.ndads.values().map(|w| (Node::Ndad(w.node), w.key)))
            .collect();
        out.sort_by_key(|(n, _)| n.id());
        out.into_iter()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn ndad_count(&self) -> usize {
        self.ndads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty() && self.ndads.is_empty()
    }

    pub fn ledger(&self) -> &WaitLedger {
        &self.ledger
    }

    pub fn pairs_arrived(&self) -> u64 {
        self.pairs_arrived
    }

    pub fn ndads_arrived(&self) -> u64 {
        self.ndads_arrived
    }

    pub fn pairs_matched(&self) -> u64 {
        self.pairs_matched
    }

    pub fn ndads_used(&self) -> u64 {
        self.ndads_used
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Candidate, CandidateKind};
    use crate::random::stream;
    use alloc::vec;

    fn pair(id: u32, cpra: f64) -> PairNode {
        PairNode { id: NodeId(id), donor_blood: BloodType::A, patient_blood: BloodType::A, cpra, arrival_period: 0 }
    }

    fn pool_of(pairs: Vec<PairNode>, ndads: Vec<NdadNode>) -> Pool {
        let mut pool = Pool::new();
        pool.admit(Arrivals { pairs, ndads });
        pool
    }

    fn two_cycle(a: u32, b: u32) -> Selection {
        Selection {
            candidates: vec![Candidate { kind: CandidateKind::Cycle, nodes: vec![NodeId(a), NodeId(b)], weight: 2.0 }],
            objective: 2.0,
        }
    }

    #[test]
    fn default_config_is_valid() {
        PoolConfig::default().validate().unwrap();
        let mut bad = PoolConfig::default();
        bad.blood_dist[0] += 1e-9;
        assert!(matches!(bad.validate(), Err(ConfigError::DistributionSum { .. })));
        bad = PoolConfig { pair_rate: -1.0, ..PoolConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_rates_bring_nobody() {
        let cfg = PoolConfig { pair_rate: 0.0, ndad_rate: 0.0, ..PoolConfig::default() };
        let (mut a, mut b) = (stream(1, 1), stream(1, 2));
        let mut next = 0;
        for period in 0..20 {
            assert_eq!(arrivals(&cfg, period, &mut a, &mut b, &mut next), Arrivals::default());
        }
        assert_eq!(next, 0);
    }

    #[test]
    fn arrivals_respect_band_intervals_and_ids() {
        let cfg = PoolConfig::default();
        let (mut a, mut b) = (stream(4, 1), stream(4, 2));
        let mut next = 0;
        let mut last = None;
        for period in 0..10 {
            let arr = arrivals(&cfg, period, &mut a, &mut b, &mut next);
            for p in &arr.pairs {
                let band = CpraBand::get(pair_type_of(p).band).unwrap();
                assert!(band.contains(p.cpra), "{} outside band {}", p.cpra, band.index);
                assert_eq!(p.arrival_period, period);
            }
            let ids: Vec<u32> = arr.pairs.iter().map(|p| p.id.0).chain(arr.ndads.iter().map(|n| n.id.0)).collect();
            for id in ids {
                assert!(last.is_none_or(|l| id == l + 1));
                last = Some(id);
            }
        }
    }

    #[test]
    fn population_proportions() {
        let cfg = PoolConfig::default();
        let total: f64 = PairType::all().map(|t| population_proportion(&cfg, t)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let t = PairType { donor_blood: BloodType::A, patient_blood: BloodType::A, band: 2 };
        assert!((population_proportion(&cfg, t) - 0.061364).abs() < 1e-12);
        let custom = PoolConfig { band_dist: [0.5, 0.5, 0.0, 0.0, 0.0], ..cfg };
        let t5 = PairType { band: 5, ..t };
        assert_eq!(population_proportion(&custom, t5), 0.0);
    }

    #[test]
    fn remove_matched_updates_pool_and_ledger() {
        let mut pool = pool_of(vec![pair(0, 0.0), pair(1, 0.0), pair(2, 0.0)], vec![]);
        let before = pool.clone();
        pool.remove_matched(&Selection::empty(), 3).unwrap();
        assert_eq!(pool, before);

        pool.remove_matched(&two_cycle(0, 1), 3).unwrap();
        assert_eq!(pool.pair_count(), 1);
        assert_eq!(pool.ledger().matched().count(), 2);
        assert_eq!(pool.ledger().get(NodeId(0)).unwrap().match_period, Some(3));
        assert_eq!(pool.ledger().get(NodeId(2)).unwrap().match_period, None);
    }

    #[test]
    fn removing_everything_empties_pool() {
        let ndad = NdadNode { id: NodeId(2), donor_blood: BloodType::O, arrival_period: 0 };
        let mut pool = pool_of(vec![pair(0, 0.0), pair(1, 0.0)], vec![ndad]);
        let sel = Selection {
            candidates: vec![Candidate {
                kind: CandidateKind::Chain,
                nodes: vec![NodeId(2), NodeId(0), NodeId(1)],
                weight: 2.0,
            }],
            objective: 2.0,
        };
        pool.remove_matched(&sel, 0).unwrap();
        assert!(pool.is_empty());
        assert_eq!(pool.ndads_used(), 1);
        assert_eq!(pool.pairs_matched(), 2);
    }

    #[test]
    fn unknown_id_is_a_hard_failure() {
        let mut pool = pool_of(vec![pair(0, 0.0), pair(1, 0.0)], vec![]);
        let before = pool.clone();
        assert_eq!(pool.remove_matched(&two_cycle(0, 7), 1), Err(PoolError::UnknownId(NodeId(7))));
        assert_eq!(pool, before);
    }

    #[test]
    fn queue_composition_counts() {
        assert_eq!(Pool::new().queue_composition(), QueueComposition::default());
        let pool = pool_of(vec![pair(0, 0.98), pair(1, 0.99)], vec![]);
        let q = pool.queue_composition();
        assert_eq!(q.by_band, [0, 0, 0, 0, 2]);
        let ty = PairType { donor_blood: BloodType::A, patient_blood: BloodType::A, band: 5 };
        assert_eq!(q.by_type[ty.index()], 2);
        assert_eq!(q.type_proportions()[ty.index()], 1.0);
    }

    #[test]
    fn wait_times_in_months() {
        let mut pool = Pool::new();
        let mut p0 = pair(0, 0.0);
        let mut p1 = pair(1, 0.0);
        let mut p2 = pair(2, 0.0);
        p0.arrival_period = 0;
        p1.arrival_period = 1;
        p2.arrival_period = 2;
        pool.admit(Arrivals { pairs: vec![p0, p1, p2], ndads: vec![] });
        pool.remove_matched(&two_cycle(0, 1), 3).unwrap();
        // recipients waited 3 and 2 periods
        assert_eq!(pool.ledger().mean_recipient_wait(), Some(4.0 * 2.5));
        // node 2 still waits at horizon 5: 3 periods
        assert_eq!(pool.ledger().mean_wait(5), Some(4.0 * 8.0 / 3.0));
        assert_eq!(Pool::new().ledger().mean_wait(5), None);
    }
}
