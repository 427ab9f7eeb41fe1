//! ABO compatibility and crossmatch arc generation.
//!
//! A blood-compatible (donor, patient) encounter is rejected with
//! probability equal to the patient's cPRA. The verdict is sampled once,
//! when the later of the two nodes arrives, and reused for as long as both
//! nodes wait.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand_core::RngCore;

use crate::model::{BloodType, ExchangeGraph, Node, NodeId, PairNode};
use crate::pool::Pool;
use crate::random::{bernoulli, KeyedRng};

/// O gives to everyone, AB receives from everyone, otherwise groups must match.
pub fn blood_compatible(donor: BloodType, patient: BloodType) -> bool {
    donor == BloodType::O || donor == patient || patient == BloodType::AB
}

/// Memoized crossmatch verdicts keyed by (donor node, patient node).
#[derive(Debug, Clone, Default)]
pub struct CompatibilityCache {
    decided: BTreeMap<(NodeId, NodeId), bool>,
}

impl CompatibilityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, donor: NodeId, patient: NodeId) -> Option<bool> {
        self.decided.get(&(donor, patient)).copied()
    }

    pub fn len(&self) -> usize {
        self.decided.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decided.is_empty()
    }

    /// Drops every verdict involving a node that left the pool.
    pub fn forget(&mut self, gone: &[NodeId]) {
        if gone.is_empty() {
            return;
        }
        let mut gone = gone.to_vec();
        gone.sort_unstable();
        self.decided.retain(|(d, p), _| gone.binary_search(d).is_err() && gone.binary_search(p).is_err());
    }
}

/// Whether the arc donor → patient exists. Draws from `rng` only on a cache
/// miss for a blood-compatible encounter.
pub fn sample_arc<R: RngCore + ?Sized>(
    rng: &mut R,
    donor: &Node,
    patient: &PairNode,
    cache: &mut CompatibilityCache,
) -> bool {
    if donor.id() == patient.id || !blood_compatible(donor.donor_blood(), patient.patient_blood) {
        return false;
    }
    *cache.decided.entry((donor.id(), patient.id)).or_insert_with(|| bernoulli(rng, 1.0 - patient.cpra))
}

/// Builds the exchange graph over everything waiting in `pool`.
///
/// Each cache miss draws from its own stream keyed by
/// `(crossmatch_seed, donor key, patient key)`, so a verdict does not depend
/// on which other nodes happen to be waiting.
pub fn build_graph(pool: &Pool, cache: &mut CompatibilityCache, crossmatch_seed: u64) -> ExchangeGraph {
    let donors: Vec<(Node, u64)> = pool.waiting_nodes().collect();
    let mut arcs = Vec::new();
    for (donor, donor_key) in &donors {
        for (patient, patient_key) in pool.waiting_pairs_keyed() {
            if donor.id() == patient.id {
                continue;
            }
            let mut rng = KeyedRng::new(crossmatch_seed, *donor_key, patient_key);
            if sample_arc(&mut rng, donor, patient, cache) {
                arcs.push((donor.id(), patient.id));
            }
        }
    }
    let nodes = donors.into_iter().map(|(n, _)| n).collect();
    ExchangeGraph::new(nodes, arcs).expect("pool ids are unique and arcs only enter pairs")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NdadNode;
    use crate::random::stream;
    use BloodType::*;

    fn pair(id: u32, donor: BloodType, patient: BloodType, cpra: f64) -> PairNode {
        PairNode { id: NodeId(id), donor_blood: donor, patient_blood: patient, cpra, arrival_period: 0 }
    }

    #[test]
    fn compatibility_table() {
        assert!(blood_compatible(O, A));
        assert!(!blood_compatible(AB, O));
        assert!(blood_compatible(B, B));
        // exactly the nine arrows of the ABO diagram
        let count = BloodType::ALL
            .iter()
            .flat_map(|d| BloodType::ALL.iter().map(move |p| (*d, *p)))
            .filter(|(d, p)| blood_compatible(*d, *p))
            .count();
        assert_eq!(count, 9);
        for p in BloodType::ALL {
            assert!(blood_compatible(O, p));
            assert!(blood_compatible(p, AB));
        }
        assert!(!blood_compatible(A, B));
        assert!(!blood_compatible(B, A));
        assert!(!blood_compatible(A, O));
    }

    #[test]
    fn cpra_extremes() {
        let mut rng = stream(1, 3);
        let donor = Node::Pair(pair(1, O, A, 0.0));
        for i in 0..200 {
            let mut cache = CompatibilityCache::new();
            assert!(sample_arc(&mut rng, &donor, &pair(100 + i, A, A, 0.0), &mut cache));
            assert!(!sample_arc(&mut rng, &donor, &pair(500 + i, A, A, 1.0), &mut cache));
        }
        let mut cache = CompatibilityCache::new();
        for i in 0..200 {
            assert!(!sample_arc(&mut rng, &donor, &pair(1000 + i, B, A, 1.0), &mut cache));
        }
    }

    #[test]
    fn incompatible_blood_never_draws() {
        struct Panic;
        impl RngCore for Panic {
            fn next_u32(&mut self) -> u32 {
                panic!("drew")
            }
            fn next_u64(&mut self) -> u64 {
                panic!("drew")
            }
            fn fill_bytes(&mut self, _: &mut [u8]) {
                panic!("drew")
            }
        }
        let mut cache = CompatibilityCache::new();
        let donor = Node::Pair(pair(1, AB, A, 0.0));
        assert!(!sample_arc(&mut Panic, &donor, &pair(2, A, O, 0.0), &mut cache));
        assert!(cache.is_empty());
    }

    #[test]
    fn verdicts_are_memoized() {
        let mut rng = stream(2, 3);
        let mut cache = CompatibilityCache::new();
        let donor = Node::Ndad(NdadNode { id: NodeId(0), donor_blood: O, arrival_period: 0 });
        let patients: Vec<_> = (1..200).map(|i| pair(i, A, A, 0.5)).collect();
        let first: Vec<bool> = patients.iter().map(|p| sample_arc(&mut rng, &donor, p, &mut cache)).collect();
        let again: Vec<bool> = patients.iter().map(|p| sample_arc(&mut rng, &donor, p, &mut cache)).collect();
        assert_eq!(first, again);
        cache.forget(&[NodeId(0)]);
        assert!(cache.is_empty());
    }
}
