//! Weighting schemes that turn arcs into scores.
//!
//! A node weight is realized on the arc delivering the kidney to that node,
//! so every scheme is expressed as an arc weight. Chains additionally carry
//! the altruist penalty `W` once.

use crate::model::{pair_type_of, BloodType, Candidate, CandidateKind, ExchangeGraph, Node, PairNode, PairType};

/// Learned weights for the 80 pair types plus the altruist penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub pair_weight: [f64; PairType::COUNT],
    pub ndad_penalty: f64,
}

impl WeightTable {
    /// All pair weights 1, penalty 0.
    pub fn ones() -> Self {
        WeightTable { pair_weight: [1.0; PairType::COUNT], ndad_penalty: 0.0 }
    }

    pub fn weight(&self, ty: PairType) -> f64 {
        self.pair_weight[ty.index()]
    }

    pub fn min_weight(&self) -> f64 {
        self.pair_weight.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Default for WeightTable {
    fn default() -> Self {
        Self::ones()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    /// One point per transplant.
    Myopic,
    /// Expert point system restricted to blood group and cPRA attributes.
    KpdPoints,
    Learned(WeightTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub kind: SchemeKind,
    /// Added once to every chain.
    pub ndad_penalty: f64,
}

impl Scheme {
    pub fn myopic() -> Self {
        Scheme { kind: SchemeKind::Myopic, ndad_penalty: 0.0 }
    }

    pub fn kpd() -> Self {
        Scheme { kind: SchemeKind::KpdPoints, ndad_penalty: 0.0 }
    }

    /// Myopic with W = -2.
    pub fn myopic_plus() -> Self {
        Scheme { kind: SchemeKind::Myopic, ndad_penalty: -2.0 }
    }

    /// KPD points with W = -150.
    pub fn kpd_plus() -> Self {
        Scheme { kind: SchemeKind::KpdPoints, ndad_penalty: -150.0 }
    }

    /// Learned table, using the penalty stored in the table.
    pub fn learned(table: WeightTable) -> Self {
        let ndad_penalty = table.ndad_penalty;
        Scheme { kind: SchemeKind::Learned(table), ndad_penalty }
    }

    pub fn with_penalty(mut self, w: f64) -> Self {
        self.ndad_penalty = w;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SchemeKind::Myopic => "myopic",
            SchemeKind::KpdPoints => "kpd",
            SchemeKind::Learned(_) => "learned",
        }
    }

    /// Score of the transplant donor → patient.
    pub fn arc_weight(&self, donor: BloodType, patient: &PairNode) -> f64 {
        match &self.kind {
            SchemeKind::Myopic => 1.0,
            SchemeKind::KpdPoints => kpd_points(donor, patient),
            SchemeKind::Learned(table) => table.weight(pair_type_of(patient)),
        }
    }
}

/// Points for the modelled subset of the KPD scoring table.
fn kpd_points(donor: BloodType, patient: &PairNode) -> f64 {
    let mut points = 100.0;
    if patient.cpra >= 0.80 {
        points += 125.0;
    }
    match (donor, patient.patient_blood) {
        (BloodType::O, BloodType::O) => points += 75.0,
        (d, p) if d == p => points += 5.0,
        _ => {}
    }
    points
}

/// Arc weight with nodes as stored in a graph.
pub fn arc_weight(scheme: &Scheme, donor: &Node, patient: &PairNode) -> f64 {
    scheme.arc_weight(donor.donor_blood(), patient)
}

/// Sum of arc weights along the candidate (including a cycle's closing
/// arc), plus the penalty for a chain. Returns `None` if the candidate names
/// nodes missing from `graph` or has an altruist as a recipient.
pub fn candidate_weight(scheme: &Scheme, graph: &ExchangeGraph, candidate: &Candidate) -> Option<f64> {
    let mut total = 0.0;
    for (tail, head) in candidate.arcs() {
        let donor = graph.node(tail)?;
        let patient = graph.node(head)?.as_pair()?;
        total += arc_weight(scheme, donor, patient);
    }
    if candidate.kind == CandidateKind::Chain {
        total += scheme.ndad_penalty;
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NdadNode, NodeId};
    use alloc::vec;
    use alloc::vec::Vec;
    use BloodType::*;

    fn pair(id: u32, donor: BloodType, patient: BloodType, cpra: f64) -> PairNode {
        PairNode { id: NodeId(id), donor_blood: donor, patient_blood: patient, cpra, arrival_period: 0 }
    }

    #[test]
    fn kpd_examples() {
        let kpd = Scheme::kpd();
        assert_eq!(kpd.arc_weight(O, &pair(0, A, O, 0.90)), 300.0);
        assert_eq!(kpd.arc_weight(A, &pair(0, B, A, 0.10)), 105.0);
        assert_eq!(kpd.arc_weight(AB, &pair(0, B, AB, 0.10)), 105.0);
        assert_eq!(kpd.arc_weight(O, &pair(0, B, A, 0.10)), 100.0);
        // threshold is on the exact value, not the band
        assert_eq!(kpd.arc_weight(A, &pair(0, A, AB, 0.80)), 225.0);
        assert_eq!(kpd.arc_weight(A, &pair(0, A, AB, 0.79)), 100.0);
    }

    #[test]
    fn myopic_is_one() {
        for d in BloodType::ALL {
            for p in BloodType::ALL {
                assert_eq!(Scheme::myopic().arc_weight(d, &pair(0, A, p, 0.5)), 1.0);
            }
        }
    }

    #[test]
    fn learned_uses_patient_type() {
        let mut table = WeightTable::ones();
        let p = pair(0, B, A, 0.3);
        table.pair_weight[pair_type_of(&p).index()] = 2.5;
        assert_eq!(Scheme::learned(table).arc_weight(O, &p), 2.5);
    }

    fn line_graph(patients: u32) -> ExchangeGraph {
        let mut nodes: Vec<Node> = (1..=patients).map(|i| Node::Pair(pair(i, A, A, 0.0))).collect();
        nodes.push(Node::Ndad(NdadNode { id: NodeId(0), donor_blood: O, arrival_period: 0 }));
        let mut arcs: Vec<_> = (0..patients).map(|i| (NodeId(i), NodeId(i + 1))).collect();
        arcs.push((NodeId(2), NodeId(1)));
        ExchangeGraph::new(nodes, arcs).unwrap()
    }

    #[test]
    fn candidate_weights() {
        let g = line_graph(3);
        let cycle = Candidate { kind: CandidateKind::Cycle, nodes: vec![NodeId(1), NodeId(2)], weight: 0.0 };
        assert_eq!(candidate_weight(&Scheme::myopic(), &g, &cycle), Some(2.0));
        let plus = Scheme::myopic().with_penalty(-2.0);
        let chain1 = Candidate { kind: CandidateKind::Chain, nodes: vec![NodeId(0), NodeId(1)], weight: 0.0 };
        assert_eq!(candidate_weight(&plus, &g, &chain1), Some(-1.0));
        let chain3 = Candidate {
            kind: CandidateKind::Chain,
            nodes: vec![NodeId(0), NodeId(1), NodeId(2), NodeId(3)],
            weight: 0.0,
        };
        assert_eq!(candidate_weight(&plus, &g, &chain3), Some(1.0));
        // with W = 0 and myopic weights the weight counts transplants
        assert_eq!(candidate_weight(&Scheme::myopic(), &g, &chain3), Some(3.0));
    }

    #[test]
    fn presets() {
        assert_eq!(Scheme::kpd_plus().ndad_penalty, -150.0);
        assert_eq!(Scheme::myopic_plus().ndad_penalty, -2.0);
        assert_eq!(Scheme::kpd().ndad_penalty, 0.0);
    }
}
