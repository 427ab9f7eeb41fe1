//! Property checks for enumeration, fairness and the simulation loop.

use std::collections::BTreeSet;

use kex_core::enumerate::{enumerate_all, EnumerationLimits};
use kex_core::fairness::{power_mean, GroupProfile, WelfareScores};
use kex_core::model::BAND_ALPHAS;
use kex_core::pool::PoolConfig;
use kex_core::sim::{simulate_uninterrupted, SimulationConfig};
use kex_core::{BloodType, CandidateKind, ExchangeGraph, NdadNode, Node, NodeId, PairNode, Scheme};
use proptest::prelude::*;

fn graph_from(n_ndads: u32, n_pairs: u32, arc_bits: &[bool]) -> ExchangeGraph {
    let n = n_ndads + n_pairs;
    let mut nodes = Vec::new();
    for id in 0..n {
        if id < n_ndads {
            nodes.push(Node::Ndad(NdadNode { id: NodeId(id), donor_blood: BloodType::O, arrival_period: 0 }));
        } else {
            nodes.push(Node::Pair(PairNode {
                id: NodeId(id),
                donor_blood: BloodType::A,
                patient_blood: BloodType::O,
                cpra: 0.3,
                arrival_period: 0,
            }));
        }
    }
    let mut arcs = Vec::new();
    let mut bit = 0;
    for t in 0..n {
        for h in n_ndads..n {
            if t != h {
                if arc_bits[bit % arc_bits.len()] {
                    arcs.push((NodeId(t), NodeId(h)));
                }
                bit += 1;
            }
        }
    }
    ExchangeGraph::new(nodes, arcs).unwrap()
}

/// Every node sequence of distinct nodes, checked arc by arc.
fn naive_counts(g: &ExchangeGraph, max_cycle: usize, max_chain: usize) -> (BTreeSet<Vec<u32>>, BTreeSet<Vec<u32>>) {
    let pairs: Vec<u32> = g.pairs().map(|p| p.id.0).collect();
    let mut cycles = BTreeSet::new();
    let mut chains = BTreeSet::new();
    fn extend(seq: &mut Vec<u32>, pool: &[u32], max: usize, out: &mut Vec<Vec<u32>>) {
        out.push(seq.clone());
        if seq.len() == max {
            return;
        }
        for &p in pool {
            if !seq.contains(&p) {
                seq.push(p);
                extend(seq, pool, max, out);
                seq.pop();
            }
        }
    }
    let path_ok = |s: &[u32]| s.windows(2).all(|w| g.has_arc(NodeId(w[0]), NodeId(w[1])));
    for &start in &pairs {
        let mut seqs = Vec::new();
        extend(&mut vec![start], &pairs, max_cycle, &mut seqs);
        for s in seqs {
            if s.len() >= 2 && path_ok(&s) && g.has_arc(NodeId(*s.last().unwrap()), NodeId(s[0])) {
                let m = s.iter().position(|x| x == s.iter().min().unwrap()).unwrap();
                let mut rot = s[m..].to_vec();
                rot.extend_from_slice(&s[..m]);
                cycles.insert(rot);
            }
        }
    }
    for n in g.ndads() {
        let mut seqs = Vec::new();
        extend(&mut vec![n.id.0], &pairs, max_chain + 1, &mut seqs);
        for s in seqs {
            if s.len() >= 2 && path_ok(&s) {
                chains.insert(s);
            }
        }
    }
    (cycles, chains)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn enumeration_matches_naive_listing(
        n_ndads in 0u32..3,
        n_pairs in 1u32..7,
        bits in prop::collection::vec(any::<bool>(), 1..64),
        c in 2usize..5,
        p in 0usize..4,
    ) {
        let g = graph_from(n_ndads, n_pairs, &bits);
        let all = enumerate_all(&g, &EnumerationLimits::new(c, p), &Scheme::myopic()).unwrap();
        let got_cycles: BTreeSet<Vec<u32>> = all.iter().filter(|x| x.kind == CandidateKind::Cycle)
            .map(|x| x.nodes.iter().map(|n| n.0).collect()).collect();
        let got_chains: BTreeSet<Vec<u32>> = all.iter().filter(|x| x.kind == CandidateKind::Chain)
            .map(|x| x.nodes.iter().map(|n| n.0).collect()).collect();
        let (cycles, chains) = naive_counts(&g, c, p);
        prop_assert_eq!(all.len(), got_cycles.len() + got_chains.len(), "duplicates emitted");
        prop_assert_eq!(got_cycles, cycles);
        prop_assert_eq!(got_chains, chains);
    }

    #[test]
    fn power_mean_is_homogeneous(
        u in prop::array::uniform5(1e-4f64..1.0),
        c in 0.01f64..100.0,
        rho in prop::sample::select(vec![f64::NEG_INFINITY, -5.0, -1.0, -1e-3, 0.0, 0.5, 1.0, 3.0, f64::INFINITY]),
    ) {
        let a = power_mean(&u, &BAND_ALPHAS, rho).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| x * c).collect();
        let b = power_mean(&scaled, &BAND_ALPHAS, rho).unwrap();
        prop_assert!(((b - c * a) / (c * a)).abs() < 1e-9, "{} vs {}", b, c * a);
    }

    #[test]
    fn power_mean_is_monotone(
        u in prop::array::uniform5(1e-4f64..1.0),
        j in 0usize..5,
        bump in 0.0f64..1.0,
        rho in prop::sample::select(vec![f64::NEG_INFINITY, -5.0, -1.0, 0.0, 1.0, 3.0, f64::INFINITY]),
    ) {
        let a = power_mean(&u, &BAND_ALPHAS, rho).unwrap();
        let mut v = u;
        v[j] += bump;
        let b = power_mean(&v, &BAND_ALPHAS, rho).unwrap();
        prop_assert!(b >= a * (1.0 - 1e-12));
    }

    #[test]
    fn log_space_nash_equals_direct_product(u in prop::array::uniform5(1e-3f64..10.0)) {
        let nash = power_mean(&u, &BAND_ALPHAS, 0.0).unwrap();
        let direct: f64 = u.iter().zip(BAND_ALPHAS).map(|(x, a)| x.powf(a)).product();
        prop_assert!(((nash - direct) / direct).abs() < 1e-9);
    }
}

#[test]
fn welfare_ordering_of_special_cases() {
    let profile = GroupProfile::new([47.78, 72.14, 89.24, 55.42, 118.42]);
    let (s, _) = WelfareScores::compute(&profile);
    assert!(s.egalitarian <= s.nash && s.nash <= s.utilitarian);
}

#[test]
fn replication_conservation_across_schemes() {
    let pool = PoolConfig { pair_rate: 10.0, ndad_rate: 1.5, periods: 12, ..PoolConfig::default() };
    for scheme in [Scheme::myopic(), Scheme::myopic_plus(), Scheme::kpd(), Scheme::kpd_plus()] {
        let cfg = SimulationConfig::new(pool.clone(), EnumerationLimits::new(3, 4), scheme);
        let out = simulate_uninterrupted(&cfg, 99).unwrap();
        assert_eq!(out.patients_arrived, out.patients_matched + u64::from(out.final_queue.pairs()));
        let chains: u64 = out.chains_by_length.iter().sum();
        assert!(chains <= out.ndads_arrived);
        assert_eq!(out.history.len(), 12);
    }
}
