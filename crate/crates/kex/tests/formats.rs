//! Weight tables, exported instances and JSON reports survive a write/read
//! cycle unchanged.

use kex::formats::{parse_instance, parse_weights, write_instance, write_weights, InstanceFile};
use kex::report::to_json;
use kex::{run_experiment, Experiment, ExperimentConfig, RunReport};
use kex_core::enumerate::EnumerationLimits;
use kex_core::pool::PoolConfig;
use kex_core::sim::{Simulation, SimulationConfig};
use kex_core::solver::{solve, NoInterrupt};
use kex_core::{Node, PairType, Scheme, WeightTable};
use proptest::prelude::*;

proptest! {
    #[test]
    fn weights_round_trip_bit_exact(
        weights in prop::collection::vec(-1e6f64..1e6, PairType::COUNT),
        w in -1e3f64..1e3,
    ) {
        let mut table = WeightTable::ones();
        table.pair_weight.copy_from_slice(&weights);
        table.ndad_penalty = w;
        let text = write_weights(&table);
        let back = parse_weights(&text).unwrap();
        for (a, b) in back.pair_weight.iter().zip(&table.pair_weight) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back.ndad_penalty.to_bits(), w.to_bits());
        prop_assert_eq!(write_weights(&back), text);
    }
}

fn mid_run_instance(seed: u64) -> InstanceFile {
    let pool = PoolConfig { pair_rate: 10.0, ndad_rate: 1.5, periods: 6, ..PoolConfig::default() };
    let cfg = SimulationConfig::new(pool, EnumerationLimits::new(3, 3), Scheme::kpd().with_penalty(-2.0));
    let mut sim = Simulation::new(&cfg, seed).unwrap();
    for _ in 0..3 {
        sim.step(&NoInterrupt).unwrap();
    }
    sim.admit_arrivals();
    let (graph, inst) = sim.build_instance().unwrap();
    InstanceFile::new(&graph, inst.candidates())
}

#[test]
fn instance_round_trip_keeps_the_optimum() {
    for seed in 0..5 {
        let file = mid_run_instance(seed);
        assert!(!file.candidates.is_empty());
        let text = write_instance(&file);
        let back = parse_instance(&text).unwrap();
        assert_eq!(write_instance(&back), text);
        assert_eq!(back.candidates, file.candidates);
        // only arrival periods are lost
        let strip = |n: &Node| match n {
            Node::Pair(p) => (p.id, p.donor_blood, Some((p.patient_blood, p.cpra.to_bits()))),
            Node::Ndad(d) => (d.id, d.donor_blood, None),
        };
        assert!(back.nodes.iter().map(strip).eq(file.nodes.iter().map(strip)));
        let a = solve(&file.to_packing().unwrap()).unwrap();
        let b = solve(&back.to_packing().unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn report_json_round_trip() {
    let cfg = ExperimentConfig {
        pair_rate: 6.0,
        ndad_rate: 1.0,
        periods: 5,
        replications: 3,
        max_cycle: 3,
        max_chain: 3,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&Experiment::from_config(&cfg).unwrap()).unwrap();
    let text = to_json(&report).unwrap();
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}
