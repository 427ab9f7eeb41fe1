//! Exhaustive generation of feasible cycles and chains.
//!
//! Output is in canonical order: all cycles, then all chains, each sorted by
//! node-id sequence. Cycles start at their smallest id. Chains are emitted
//! prefix-closed, so the solver may stop a chain at any length.

use alloc::vec::Vec;

use crate::error::EnumerationError;
use crate::model::{Candidate, CandidateKind, ExchangeGraph, Node, NodeId};
use crate::weights::Scheme;

pub const DEFAULT_CANDIDATE_BUDGET: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnumerationLimits {
    /// Maximum pairs in a cycle.
    pub max_cycle: usize,
    /// Maximum patients in a chain; 0 disables chains.
    pub max_chain: usize,
    pub candidate_budget: usize,
}

impl EnumerationLimits {
    pub fn new(max_cycle: usize, max_chain: usize) -> Self {
        EnumerationLimits { max_cycle, max_chain, candidate_budget: DEFAULT_CANDIDATE_BUDGET }
    }
}

struct Walker<'a> {
    graph: &'a ExchangeGraph,
    scheme: &'a Scheme,
    budget: usize,
    emitted: usize,
    on_path: Vec<bool>,
    path: Vec<u32>,
    out: Vec<Candidate>,
}

impl<'a> Walker<'a> {
    fn new(graph: &'a ExchangeGraph, scheme: &'a Scheme, budget: usize, already: usize) -> Self {
        Walker {
            graph,
            scheme,
            budget,
            emitted: already,
            on_path: alloc::vec![false; graph.node_count()],
            path: Vec::new(),
            out: Vec::new(),
        }
    }

    fn node(&self, pos: u32) -> &'a Node {
        &self.graph.nodes()[pos as usize]
    }

    fn arc_weight(&self, tail: u32, head: u32) -> f64 {
        let patient = self.node(head).as_pair().expect("arc heads are pairs");
        self.scheme.arc_weight(self.node(tail).donor_blood(), patient)
    }

    fn emit(&mut self, kind: CandidateKind, weight: f64) -> Result<(), EnumerationError> {
        if self.emitted >= self.budget {
            return Err(EnumerationError::BudgetExceeded { reached: self.emitted });
        }
        self.emitted += 1;
        let nodes: Vec<NodeId> = self.path.iter().map(|&p| self.node(p).id()).collect();
        self.out.push(Candidate { kind, nodes, weight });
        Ok(())
    }

    /// Extends a cycle rooted at `start` whose current last node is on the
    /// path; only nodes after `start` in id order are visited.
    fn cycles_from(&mut self, start: u32, max_cycle: usize, weight: f64) -> Result<(), EnumerationError> {
        let last = *self.path.last().expect("path is rooted");
        if self.path.len() >= 2 && self.graph.successors(last as usize).binary_search(&start).is_ok() {
            let closed = weight + self.arc_weight(last, start);
            self.emit(CandidateKind::Cycle, closed)?;
        }
        if self.path.len() == max_cycle {
            return Ok(());
        }
        for &next in self.graph.successors(last as usize) {
            if next <= start || self.on_path[next as usize] {
                continue;
            }
            let w = weight + self.arc_weight(last, next);
            self.push(next);
            let r = self.cycles_from(start, max_cycle, w);
            self.pop();
            r?;
        }
        Ok(())
    }

    fn chains_from(&mut self, max_chain: usize, weight: f64) -> Result<(), EnumerationError> {
        let last = *self.path.last().expect("path is rooted");
        for &next in self.graph.successors(last as usize) {
            if self.on_path[next as usize] {
                continue;
            }
            let w = weight + self.arc_weight(last, next);
            self.push(next);
            let mut r = self.emit(CandidateKind::Chain, w + self.scheme.ndad_penalty);
            if r.is_ok() && self.path.len() - 1 < max_chain {
                r = self.chains_from(max_chain, w);
            }
            self.pop();
            r?;
        }
        Ok(())
    }

    fn push(&mut self, pos: u32) {
        self.on_path[pos as usize] = true;
        self.path.push(pos);
    }

    fn pop(&mut self) {
        if let Some(p) = self.path.pop() {
            self.on_path[p as usize] = false;
        }
    }
}

/// Every simple cycle of 2..=`max_cycle` pairs, each exactly once.
pub fn enumerate_cycles(
    graph: &ExchangeGraph,
    max_cycle: usize,
    scheme: &Scheme,
    budget: usize,
) -> Result<Vec<Candidate>, EnumerationError> {
    if max_cycle < 2 {
        return Err(EnumerationError::CycleCapTooSmall(max_cycle));
    }
    let mut walker = Walker::new(graph, scheme, budget, 0);
    for (pos, node) in graph.nodes().iter().enumerate() {
        if node.is_ndad() {
            continue;
        }
        walker.push(pos as u32);
        let r = walker.cycles_from(pos as u32, max_cycle, 0.0);
        walker.pop();
        r?;
    }
    Ok(walker.out)
}

/// Every simple path from an altruist through 1..=`max_chain` pairs.
pub fn enumerate_chains(
    graph: &ExchangeGraph,
    max_chain: usize,
    scheme: &Scheme,
    budget: usize,
) -> Result<Vec<Candidate>, EnumerationError> {
    chains_with_offset(graph, max_chain, scheme, budget, 0)
}

fn chains_with_offset(
    graph: &ExchangeGraph,
    max_chain: usize,
    scheme: &Scheme,
    budget: usize,
    already: usize,
) -> Result<Vec<Candidate>, EnumerationError> {
    let mut walker = Walker::new(graph, scheme, budget, already);
    if max_chain == 0 {
        return Ok(walker.out);
    }
    for (pos, node) in graph.nodes().iter().enumerate() {
        if !node.is_ndad() {
            continue;
        }
        walker.push(pos as u32);
        let r = walker.chains_from(max_chain, 0.0);
        walker.pop();
        r?;
    }
    Ok(walker.out)
}

/// Cycles followed by chains, sharing one candidate budget. A cycle cap
/// below 2 disables cycles.
pub fn enumerate_all(
    graph: &ExchangeGraph,
    limits: &EnumerationLimits,
    scheme: &Scheme,
) -> Result<Vec<Candidate>, EnumerationError> {
    let mut out = if limits.max_cycle >= 2 {
        enumerate_cycles(graph, limits.max_cycle, scheme, limits.candidate_budget)?
    } else {
        Vec::new()
    };
    let chains = chains_with_offset(graph, limits.max_chain, scheme, limits.candidate_budget, out.len())?;
    out.extend(chains);
    Ok(out)
}
