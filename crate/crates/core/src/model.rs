//! Domain types for the exchange graph: nodes, pair types, arcs, candidates
//! and selections, plus the structural feasibility check shared by the
//! enumerator, the solver and the tests.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::error::GraphError;

/// ABO blood group. The derived order (O < A < B < AB) is the canonical
/// serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BloodType {
    O,
    A,
    B,
    AB,
}

impl BloodType {
    pub const ALL: [BloodType; 4] = [BloodType::O, BloodType::A, BloodType::B, BloodType::AB];

    /// Position in [`BloodType::ALL`].
    pub const fn index(self) -> usize {
        match self {
            BloodType::O => 0,
            BloodType::A => 1,
            BloodType::B => 2,
            BloodType::AB => 3,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            BloodType::O => "O",
            BloodType::A => "A",
            BloodType::B => "B",
            BloodType::AB => "AB",
        }
    }

    pub fn parse(s: &str) -> Option<BloodType> {
        match s {
            "O" => Some(BloodType::O),
            "A" => Some(BloodType::A),
            "B" => Some(BloodType::B),
            "AB" => Some(BloodType::AB),
            _ => None,
        }
    }
}

impl fmt::Display for BloodType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the five cPRA intervals patients are grouped into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpraBand {
    /// 1-based band number.
    pub index: u8,
    pub lower: f64,
    pub upper: f64,
    /// Share of the patient population in this band.
    pub alpha: f64,
}

/// The five cPRA bands, ordered by index.
pub const CPRA_BANDS: [CpraBand; 5] = [
    CpraBand { index: 1, lower: 0.0, upper: 0.0, alpha: 0.24 },
    CpraBand { index: 2, lower: 0.01, upper: 0.50, alpha: 0.29 },
    CpraBand { index: 3, lower: 0.51, upper: 0.94, alpha: 0.24 },
    CpraBand { index: 4, lower: 0.95, upper: 0.96, alpha: 0.10 },
    CpraBand { index: 5, lower: 0.97, upper: 1.0, alpha: 0.13 },
];

/// Population shares of the five bands, in band order.
pub const BAND_ALPHAS: [f64; 5] = [0.24, 0.29, 0.24, 0.10, 0.13];

impl CpraBand {
    /// Band for a 1-based index.
    pub fn get(index: u8) -> Option<&'static CpraBand> {
        CPRA_BANDS.get(usize::from(index).wrapping_sub(1))
    }

    /// Band containing `cpra`.
    ///
    /// Bands are closed intervals tested lowest index first. The gaps between
    /// printed interval ends (e.g. (0, 0.01) or (0.50, 0.51)) fall into the
    /// next band up, which makes the mapping total on [0, 1].
    pub fn of(cpra: f64) -> &'static CpraBand {
        for band in &CPRA_BANDS {
            if cpra <= band.upper {
                return band;
            }
        }
        &CPRA_BANDS[4]
    }

    pub fn contains(&self, cpra: f64) -> bool {
        cpra >= self.lower && cpra <= self.upper
    }
}

/// Node identifier. Pairs and altruists share one counter, assigned in
/// arrival order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A patient together with their incompatible donor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairNode {
    pub id: NodeId,
    pub donor_blood: BloodType,
    pub patient_blood: BloodType,
    pub cpra: f64,
    pub arrival_period: u32,
}

/// A non-directed altruistic donor. Only ever the source of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdadNode {
    pub id: NodeId,
    pub donor_blood: BloodType,
    pub arrival_period: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Pair(PairNode),
    Ndad(NdadNode),
}

impl Node {
    pub fn id(&self) -> NodeId {
        match self {
            Node::Pair(p) => p.id,
            Node::Ndad(n) => n.id,
        }
    }

    pub fn donor_blood(&self) -> BloodType {
        match self {
            Node::Pair(p) => p.donor_blood,
            Node::Ndad(n) => n.donor_blood,
        }
    }

    pub fn arrival_period(&self) -> u32 {
        match self {
            Node::Pair(p) => p.arrival_period,
            Node::Ndad(n) => n.arrival_period,
        }
    }

    pub fn as_pair(&self) -> Option<&PairNode> {
        match self {
            Node::Pair(p) => Some(p),
            Node::Ndad(_) => None,
        }
    }

    pub fn is_ndad(&self) -> bool {
        matches!(self, Node::Ndad(_))
    }
}

/// Donor blood × patient blood × cPRA band: 80 values in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairType {
    pub donor_blood: BloodType,
    pub patient_blood: BloodType,
    /// 1-based cPRA band.
    pub band: u8,
}

impl PairType {
    pub const COUNT: usize = 80;

    /// Dense index in 0..80, ordered donor blood, then patient blood, then band.
    pub fn index(&self) -> usize {
        (self.donor_blood.index() * 4 + self.patient_blood.index()) * 5 + usize::from(self.band - 1)
    }

    pub fn from_index(index: usize) -> Option<PairType> {
        if index >= Self::COUNT {
            return None;
        }
        Some(PairType {
            donor_blood: BloodType::ALL[index / 20],
            patient_blood: BloodType::ALL[(index / 5) % 4],
            band: (index % 5) as u8 + 1,
        })
    }

    /// All 80 types in index order.
    pub fn all() -> impl Iterator<Item = PairType> {
        (0..Self::COUNT).filter_map(PairType::from_index)
    }
}

impl fmt::Display for PairType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.donor_blood, self.patient_blood, self.band)
    }
}

/// Type of a waiting pair; the band is chosen by [`CpraBand::of`].
pub fn pair_type_of(node: &PairNode) -> PairType {
    PairType { donor_blood: node.donor_blood, patient_blood: node.patient_blood, band: CpraBand::of(node.cpra).index }
}

/// Directed compatibility graph for one matching period.
///
/// Nodes are kept sorted by id; `out` holds successor positions (into
/// `nodes`) in increasing id order.
#[derive(Debug, Clone, Default)]
pub struct ExchangeGraph {
    nodes: Vec<Node>,
    arcs: Vec<(NodeId, NodeId)>,
    out: Vec<Vec<u32>>,
}

impl ExchangeGraph {
    /// Builds a graph, rejecting arcs into altruists, self-arcs, duplicates
    /// and arcs naming unknown nodes.
    pub fn new(mut nodes: Vec<Node>, mut arcs: Vec<(NodeId, NodeId)>) -> Result<Self, GraphError> {
        nodes.sort_by_key(Node::id);
        for w in nodes.windows(2) {
            if w[0].id() == w[1].id() {
                return Err(GraphError::DuplicateNode(w[0].id()));
            }
        }
        arcs.sort_unstable();
        let mut out = alloc::vec![Vec::new(); nodes.len()];
        let position = |id: NodeId| nodes.binary_search_by_key(&id, Node::id).ok();
        for (i, &(tail, head)) in arcs.iter().enumerate() {
            if i > 0 && arcs[i - 1] == (tail, head) {
                return Err(GraphError::DuplicateArc(tail, head));
            }
            if tail == head {
                return Err(GraphError::SelfArc(tail));
            }
            let t = position(tail).ok_or(GraphError::UnknownNode(tail))?;
            let h = position(head).ok_or(GraphError::UnknownNode(head))?;
            if nodes[h].is_ndad() {
                return Err(GraphError::ArcIntoAltruist(tail, head));
            }
            out[t].push(h as u32);
        }
        Ok(ExchangeGraph { nodes, arcs, out })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Arcs sorted by (tail, head).
    pub fn arcs(&self) -> &[(NodeId, NodeId)] {
        &self.arcs
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PairNode> {
        self.nodes.iter().filter_map(Node::as_pair)
    }

    pub fn ndads(&self) -> impl Iterator<Item = &NdadNode> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Ndad(a) => Some(a),
            Node::Pair(_) => None,
        })
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.position(id).map(|i| &self.nodes[i])
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, Node::id).ok()
    }

    pub fn has_arc(&self, tail: NodeId, head: NodeId) -> bool {
        self.arcs.binary_search(&(tail, head)).is_ok()
    }

    /// Successor positions of the node at `position`, ascending.
    pub fn successors(&self, position: usize) -> &[u32] {
        &self.out[position]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CandidateKind {
    Cycle,
    Chain,
}

impl CandidateKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            CandidateKind::Cycle => "cycle",
            CandidateKind::Chain => "chain",
        }
    }
}

/// A feasible exchange: a cycle of pairs, or a chain headed by an altruist.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub kind: CandidateKind,
    /// Cycles start at their smallest id; chains start at the altruist.
    pub nodes: Vec<NodeId>,
    pub weight: f64,
}

impl Candidate {
    /// Number of patients receiving a kidney.
    pub fn transplants(&self) -> usize {
        match self.kind {
            CandidateKind::Cycle => self.nodes.len(),
            CandidateKind::Chain => self.nodes.len().saturating_sub(1),
        }
    }

    /// Donor → recipient arcs, including a cycle's closing arc.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        let n = self.nodes.len();
        let count = match self.kind {
            CandidateKind::Cycle => n,
            CandidateKind::Chain => n.saturating_sub(1),
        };
        (0..count).map(move |i| (self.nodes[i], self.nodes[(i + 1) % n]))
    }

    /// Structural check against `graph` with cycle cap `max_cycle` and chain
    /// cap `max_chain` (both counted in patients).
    pub fn is_feasible(&self, graph: &ExchangeGraph, max_cycle: usize, max_chain: usize) -> bool {
        let mut seen = BTreeSet::new();
        if !self.nodes.iter().all(|id| seen.insert(*id)) {
            return false;
        }
        let is_pair = |id: &NodeId| matches!(graph.node(*id), Some(Node::Pair(_)));
        let shape_ok = match self.kind {
            CandidateKind::Cycle => (2..=max_cycle).contains(&self.nodes.len()) && self.nodes.iter().all(is_pair),
            CandidateKind::Chain => {
                let patients = self.nodes.len().saturating_sub(1);
                (1..=max_chain).contains(&patients)
                    && matches!(graph.node(self.nodes[0]), Some(Node::Ndad(_)))
                    && self.nodes[1..].iter().all(is_pair)
            }
        };
        shape_ok && self.arcs().all(|(t, h)| graph.has_arc(t, h))
    }
}

/// A node-disjoint set of candidates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Selection {
    pub candidates: Vec<Candidate>,
    pub objective: f64,
}

impl Selection {
    pub fn empty() -> Self {
        Selection::default()
    }

    pub fn transplants(&self) -> usize {
        self.candidates.iter().map(Candidate::transplants).sum()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.candidates.iter().flat_map(|c| c.nodes.iter().copied())
    }
}

/// True iff every candidate is structurally feasible in `graph` under the
/// caps and no node is used twice.
pub fn validate_selection(graph: &ExchangeGraph, selection: &Selection, max_cycle: usize, max_chain: usize) -> bool {
    let mut used = BTreeSet::new();
    selection
        .candidates
        .iter()
        .all(|c| c.is_feasible(graph, max_cycle, max_chain) && c.nodes.iter().all(|id| used.insert(*id)))
}
