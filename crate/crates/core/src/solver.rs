//! Exact maximum-weight node-disjoint packing of enumerated candidates.
//!
//! Ties are broken deterministically: among selections whose weights agree
//! (within a tolerance scaled to the instance), prefer more transplants,
//! then the lexicographically smallest sorted candidate index set.
//!
//! [`solve`] is a depth-first branch and bound over candidates in index
//! order, trying inclusion before exclusion. That visiting order enumerates
//! selections in exactly the tie-break order, so equal-key selections found
//! later are pruned instead of explored. Independent components of the
//! candidate/node incidence structure are solved separately and combined.
//! [`brute_force`] checks every subset with an explicit comparator and
//! shares nothing with the search beyond the tolerance rule.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::SolveError;
use crate::lp::{dual_bound, solve_packing};
use crate::model::{Candidate, ExchangeGraph, NodeId, Selection};
use crate::random::mix64;

/// Largest instance [`brute_force`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 25;

/// Candidates plus the node universe they are drawn from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PackingInstance {
    candidates: Vec<Candidate>,
    universe: Vec<NodeId>,
}

impl PackingInstance {
    /// Validates that weights are finite and every referenced node is in
    /// `universe`.
    pub fn new(candidates: Vec<Candidate>, mut universe: Vec<NodeId>) -> Result<Self, SolveError> {
        universe.sort_unstable();
        universe.dedup();
        for (index, c) in candidates.iter().enumerate() {
            if !c.weight.is_finite() {
                return Err(SolveError::NonFiniteWeight { index, weight: c.weight });
            }
            if let Some(node) = c.nodes.iter().find(|n| universe.binary_search(n).is_err()) {
                return Err(SolveError::UnknownNode { index, node: *node });
            }
        }
        Ok(PackingInstance { candidates, universe })
    }

    /// Instance over every node of `graph`.
    pub fn from_graph(graph: &ExchangeGraph, candidates: Vec<Candidate>) -> Result<Self, SolveError> {
        Self::new(candidates, graph.nodes().iter().map(|n| n.id()).collect())
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn universe(&self) -> &[NodeId] {
        &self.universe
    }

    pub fn into_parts(self) -> (Vec<Candidate>, Vec<NodeId>) {
        (self.candidates, self.universe)
    }

    /// Weight tolerance: far above the rounding error of any packing sum,
    /// far below any meaningful weight difference.
    pub fn tolerance(&self) -> f64 {
        let max_abs = self.candidates.iter().map(|c| c.weight.abs()).fold(1.0, f64::max);
        1e-10 * max_abs * self.universe.len().max(1) as f64
    }

    /// Selection made of the given candidate indices (ascending), with the
    /// objective summed in index order.
    pub fn selection_of(&self, indices: &[usize]) -> Selection {
        let candidates: Vec<Candidate> = indices.iter().map(|&i| self.candidates[i].clone()).collect();
        let objective = candidates.iter().fold(0.0, |acc, c| acc + c.weight);
        Selection { candidates, objective }
    }
}

/// External stop signal, polled during search.
pub trait Interrupt {
    fn should_stop(&self) -> bool;

    /// Called before each matching round; time-based guards reset here.
    fn round_started(&self) {}
}

/// Never stops.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoInterrupt;

impl Interrupt for NoInterrupt {
    fn should_stop(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverOptions {
    /// Abort after this many search nodes.
    pub node_limit: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveStats {
    pub nodes: u64,
    pub components: usize,
    /// Candidates left after dropping strictly harmful ones.
    pub useful_candidates: usize,
}

/// An optimal selection with its candidate indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Ascending candidate indices.
    pub indices: Vec<usize>,
    pub selection: Selection,
    pub stats: SolveStats,
}

/// Comparison key of a selection.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    weight: f64,
    transplants: usize,
}

fn compare(a: Key, b: Key, eps: f64) -> Ordering {
    if a.weight > b.weight + eps {
        Ordering::Greater
    } else if a.weight < b.weight - eps {
        Ordering::Less
    } else {
        a.transplants.cmp(&b.transplants)
    }
}

/// Optimal selection with default options.
pub fn solve(instance: &PackingInstance) -> Result<Selection, SolveError> {
    solve_with(instance, &SolverOptions::default(), &NoInterrupt).map(|s| s.selection)
}

/// Exhaustive search over every node-disjoint subset; refuses more than
/// [`BRUTE_FORCE_LIMIT`] candidates.
pub fn brute_force(instance: &PackingInstance) -> Result<Selection, SolveError> {
    let n = instance.candidates.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(SolveError::TooLarge { count: n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut oracle = Oracle {
        cands: &instance.candidates,
        eps: instance.tolerance(),
        members: Vec::with_capacity(n),
        used: Vec::new(),
        best_key: Key { weight: 0.0, transplants: 0 },
        best: Vec::new(),
    };
    oracle.visit(0);
    Ok(instance.selection_of(&oracle.best))
}

struct Oracle<'a> {
    cands: &'a [Candidate],
    eps: f64,
    members: Vec<usize>,
    used: Vec<NodeId>,
    best_key: Key,
    best: Vec<usize>,
}

impl Oracle<'_> {
    /// Scores the current subset, then extends it by every later candidate
    /// that fits.
    fn visit(&mut self, from: usize) {
        let key = Key {
            weight: self.members.iter().fold(0.0, |acc, &i| acc + self.cands[i].weight),
            transplants: self.members.iter().map(|&i| self.cands[i].transplants()).sum(),
        };
        let better = match compare(key, self.best_key, self.eps) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.members < self.best,
        };
        if better {
            self.best_key = key;
            self.best.clone_from(&self.members);
        }
        for i in from..self.cands.len() {
            let nodes = &self.cands[i].nodes;
            if nodes.iter().any(|v| self.used.contains(v)) {
                continue;
            }
            self.used.extend_from_slice(nodes);
            self.members.push(i);
            self.visit(i + 1);
            self.members.pop();
            self.used.truncate(self.used.len() - nodes.len());
        }
    }
}

/// Branch and bound with explicit limits.
pub fn solve_with(
    instance: &PackingInstance,
    options: &SolverOptions,
    interrupt: &dyn Interrupt,
) -> Result<Solution, SolveError> {
    let eps = instance.tolerance();
    let cands = &instance.candidates;
    let universe = &instance.universe;
    let dense = |id: &NodeId| universe.binary_search(id).expect("validated") as u32;

    // A candidate below -eps lowers the weight of any selection holding it.
    let useful: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].weight >= -eps).collect();
    let useful = drop_dominated(cands, useful, eps, &dense);

    let mut dsu = Dsu::new(universe.len());
    for &i in &useful {
        let nodes = &cands[i].nodes;
        for w in nodes.windows(2) {
            dsu.union(dense(&w[0]), dense(&w[1]));
        }
    }
    // Components in order of their first candidate.
    let mut comp_of_root: Vec<Option<usize>> = alloc::vec![None; universe.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &i in &useful {
        let Some(first) = cands[i].nodes.first() else { continue };
        let root = dsu.find(dense(first)) as usize;
        let c = *comp_of_root[root].get_or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        components[c].push(i);
    }

    let mut stats =
        SolveStats { components: components.len(), useful_candidates: useful.len(), ..SolveStats::default() };
    let mut indices = Vec::new();
    for members in &components {
        let found = solve_component(cands, members, eps, options, interrupt, &mut stats.nodes)?;
        indices.extend(found.iter().map(|&k| members[k]));
    }
    indices.sort_unstable();
    let selection = instance.selection_of(&indices);
    Ok(Solution { indices, selection, stats })
}

/// Drops candidates beaten by another over the same node set: one heavier
/// beyond the tolerance, or one with a smaller index and no less weight.
/// Swapping such a candidate out never makes a selection worse or
/// lexicographically larger. Orientations of one cycle and orderings of one
/// chain are the common case.
fn drop_dominated(cands: &[Candidate], useful: Vec<usize>, eps: f64, dense: &dyn Fn(&NodeId) -> u32) -> Vec<usize> {
    // order-independent, so no sorting is needed just to hash
    let hash = |i: usize| {
        cands[i].nodes.iter().fold(cands[i].nodes.len() as u64, |h, v| h.wrapping_add(mix64(u64::from(dense(v)))))
    };
    let mut keyed: Vec<(u64, usize)> = useful.iter().map(|&i| (hash(i), i)).collect();
    keyed.sort_unstable();
    let mut keep = Vec::with_capacity(keyed.len());
    for run in keyed.chunk_by(|a, b| a.0 == b.0) {
        if let [(_, i)] = run {
            keep.push(*i);
            continue;
        }
        let mut sets: Vec<(Vec<u32>, usize)> = run
            .iter()
            .map(|&(_, i)| {
                let mut set: Vec<u32> = cands[i].nodes.iter().map(dense).collect();
                set.sort_unstable();
                (set, i)
            })
            .collect();
        sets.sort_unstable();
        for group in sets.chunk_by(|a, b| a.0 == b.0) {
            let best = group.iter().map(|&(_, i)| cands[i].weight).fold(f64::NEG_INFINITY, f64::max);
            let mut earlier = f64::NEG_INFINITY;
            for &(_, i) in group {
                let w = cands[i].weight;
                if w >= best - eps && w > earlier {
                    keep.push(i);
                }
                earlier = earlier.max(w);
            }
        }
    }
    keep.sort_unstable();
    keep
}

struct Dsu {
    parent: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Search data for one component. Candidates are addressed by their
/// position `k` in the component's member list.
struct ComponentSearch {
    weight: Vec<f64>,
    transplants: Vec<usize>,
    /// Local node ids per candidate.
    nodes: Vec<Vec<u32>>,
    /// Per local node: positions of candidates holding it, ascending.
    holders: Vec<Vec<u32>>,
    /// Per local node: suffix maxima of weight per node and transplants per
    /// node over `holders`, with a trailing 0 sentinel.
    suffix_weight: Vec<Vec<f64>>,
    suffix_transplants: Vec<Vec<f64>>,
    eps: f64,
    /// Multiplier on weight when bounding transplants among completions that
    /// keep a required weight.
    lambda: f64,
}

#[derive(Clone, Copy)]
enum Threshold {
    /// Accept anything not worse.
    Floor(Key),
    /// Accept only strict improvement.
    Incumbent(Key),
}

impl Threshold {
    fn key(&self) -> Key {
        match self {
            Threshold::Floor(k) | Threshold::Incumbent(k) => *k,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Keep improving until nothing better can exist.
    Optimize,
    /// Stop at the first acceptable leaf.
    FirstReaching,
}

struct Relaxation {
    duals: Vec<f64>,
    primal: Vec<f64>,
}

struct Scratch {
    seen: Vec<bool>,
    touched: Vec<u32>,
    row_of: Vec<u32>,
}

impl Scratch {
    fn new(rows: usize) -> Self {
        Scratch { seen: alloc::vec![false; rows], touched: Vec::new(), row_of: alloc::vec![u32::MAX; rows] }
    }
}

/// Exact search on one component, in two passes. The first finds the
/// optimal key with candidates ordered by the root relaxation, which usually
/// reaches the optimum straight away. The second walks candidates in index
/// order and stops at the first selection with that key, which is the
/// smallest index set among the optima.
fn solve_component(
    cands: &[Candidate],
    members: &[usize],
    eps: f64,
    options: &SolverOptions,
    interrupt: &dyn Interrupt,
    nodes: &mut u64,
) -> Result<Vec<usize>, SolveError> {
    let indexed = ComponentSearch::new(cands, members, eps);
    let all: Vec<usize> = (0..members.len()).collect();
    let mut scratch = Scratch::new(indexed.holders.len());
    let root = indexed.relax(&all, &|k| indexed.weight[k], &mut scratch);

    let reduced: Vec<f64> = all.iter().map(|&k| indexed.column_dual(&root.duals, k) - indexed.weight[k]).collect();
    let mut order = all;
    order.sort_by(|&a, &b| {
        root.primal[b].total_cmp(&root.primal[a]).then(reduced[a].total_cmp(&reduced[b])).then(a.cmp(&b))
    });
    let guided_members: Vec<usize> = order.iter().map(|&k| members[k]).collect();
    let guided = ComponentSearch::new(cands, &guided_members, eps);
    let mut first = Dfs::new(&guided, Mode::Optimize, Threshold::Floor(guided.greedy()), options, interrupt, nodes);
    first.node(0, 0.0, 0, None)?;
    let Some(target) = first.found else { return Ok(Vec::new()) };
    let mut fallback: Vec<usize> = first.best.iter().map(|&p| order[p]).collect();

    let mut second = Dfs::new(&indexed, Mode::FirstReaching, Threshold::Floor(target), options, interrupt, nodes);
    second.node(0, 0.0, 0, Some((&root, true)))?;
    if second.found.is_some() {
        Ok(second.best)
    } else {
        // only reachable through tolerance effects between the passes
        fallback.sort_unstable();
        Ok(fallback)
    }
}

impl ComponentSearch {
    fn new(cands: &[Candidate], members: &[usize], eps: f64) -> Self {
        let mut local: BTreeMap<NodeId, u32> = BTreeMap::new();
        let mut nodes = Vec::with_capacity(members.len());
        for &i in members {
            let ln: Vec<u32> = cands[i]
                .nodes
                .iter()
                .map(|id| {
                    let next = local.len() as u32;
                    *local.entry(*id).or_insert(next)
                })
                .collect();
            nodes.push(ln);
        }
        let weight: Vec<f64> = members.iter().map(|&i| cands[i].weight).collect();
        let transplants: Vec<usize> = members.iter().map(|&i| cands[i].transplants()).collect();
        let mut holders = alloc::vec![Vec::new(); local.len()];
        for (k, ln) in nodes.iter().enumerate() {
            for &v in ln {
                holders[v as usize].push(k as u32);
            }
        }
        let suffix = |share: &dyn Fn(usize) -> f64| -> Vec<Vec<f64>> {
            holders
                .iter()
                .map(|hs| {
                    let mut s = alloc::vec![0.0f64; hs.len() + 1];
                    for j in (0..hs.len()).rev() {
                        s[j] = s[j + 1].max(share(hs[j] as usize));
                    }
                    s
                })
                .collect()
        };
        let suffix_weight = suffix(&|k| weight[k].max(0.0) / nodes[k].len() as f64);
        let suffix_transplants = suffix(&|k| transplants[k] as f64 / nodes[k].len() as f64);
        let smallest = weight.iter().copied().filter(|&w| w > eps).fold(f64::INFINITY, f64::min);
        let lambda = if smallest.is_finite() { 4.0 * local.len() as f64 / smallest } else { 0.0 };
        ComponentSearch { weight, transplants, nodes, holders, suffix_weight, suffix_transplants, eps, lambda }
    }

    /// Upper bounds on the weight and transplants still obtainable from
    /// candidates at positions >= `from` over free nodes.
    fn bound(&self, from: usize, used: &[bool]) -> (f64, f64) {
        let mut w = 0.0;
        let mut t = 0.0;
        for (v, hs) in self.holders.iter().enumerate() {
            if used[v] {
                continue;
            }
            let j = hs.partition_point(|&k| (k as usize) < from);
            w += self.suffix_weight[v][j];
            t += self.suffix_transplants[v][j];
        }
        (w, t)
    }

    /// Greedy by weight (then position) for an initial floor.
    fn greedy(&self) -> Key {
        let mut order: Vec<usize> = (0..self.nodes.len()).filter(|&k| self.weight[k] > self.eps).collect();
        order.sort_by(|&a, &b| self.weight[b].total_cmp(&self.weight[a]).then(a.cmp(&b)));
        let mut used = alloc::vec![false; self.holders.len()];
        let mut chosen = Vec::new();
        for k in order {
            if self.nodes[k].iter().all(|&v| !used[v as usize]) {
                for &v in &self.nodes[k] {
                    used[v as usize] = true;
                }
                chosen.push(k);
            }
        }
        chosen.sort_unstable();
        Key {
            weight: chosen.iter().fold(0.0, |acc, &k| acc + self.weight[k]),
            transplants: chosen.iter().map(|&k| self.transplants[k]).sum(),
        }
    }

    /// Live candidates at positions >= `from`: none of their nodes used.
    fn live(&self, from: usize, used: &[bool], out: &mut Vec<usize>) {
        out.clear();
        out.extend((from..self.nodes.len()).filter(|&k| self.nodes[k].iter().all(|&v| !used[v as usize])));
    }

    fn column_dual(&self, duals: &[f64], k: usize) -> f64 {
        self.nodes[k].iter().map(|&v| duals[v as usize].max(0.0)).sum()
    }

    fn lp_bound(&self, duals: &[f64], live: &[usize], cost: &dyn Fn(usize) -> f64, scratch: &mut Scratch) -> f64 {
        let cols = live.iter().map(|&k| (self.nodes[k].as_slice(), cost(k)));
        let b = dual_bound(duals, cols, &mut scratch.seen, &mut scratch.touched);
        // covers summation error only; must stay well below the weight
        // tolerance so ties are recognised
        b + 1e-12 * (1.0 + b.abs())
    }

    /// Solves the relaxation over `live` and returns duals per local node and
    /// primal values per position.
    ///
    /// Column generation: the simplex sees a working set seeded with the
    /// best few candidates per node, and candidates pricing out positive
    /// against its duals are added until none is left. If the round limit
    /// is hit the duals still give a valid, if weaker, bound.
    fn relax(&self, live: &[usize], cost: &dyn Fn(usize) -> f64, scratch: &mut Scratch) -> Relaxation {
        const SEED_PER_ROW: usize = 3;
        const MAX_ROUNDS: usize = 200;

        let mut rows: Vec<u32> = Vec::new();
        for &k in live {
            for &v in &self.nodes[k] {
                if scratch.row_of[v as usize] == u32::MAX {
                    scratch.row_of[v as usize] = rows.len() as u32;
                    rows.push(v);
                }
            }
        }
        let costs: Vec<f64> = live.iter().map(|&k| cost(k)).collect();

        // seed: per row, the live candidates with the highest cost per node
        let mut top: Vec<[(f64, usize); SEED_PER_ROW]> =
            alloc::vec![[(f64::NEG_INFINITY, usize::MAX); SEED_PER_ROW]; rows.len()];
        for (i, &k) in live.iter().enumerate() {
            let share = costs[i] / self.nodes[k].len() as f64;
            for &v in &self.nodes[k] {
                let slot = &mut top[scratch.row_of[v as usize] as usize];
                if share > slot[SEED_PER_ROW - 1].0 {
                    slot[SEED_PER_ROW - 1] = (share, i);
                    slot.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
                }
            }
        }
        let mut in_set = alloc::vec![false; live.len()];
        let mut working: Vec<usize> = Vec::new();
        for &(_, i) in top.iter().flatten() {
            if i != usize::MAX && !in_set[i] {
                in_set[i] = true;
                working.push(i);
            }
        }
        let batch = 2 * rows.len() + 50;

        let mut sol;
        let mut rounds = 0;
        loop {
            let cols: Vec<Vec<u32>> = working
                .iter()
                .map(|&i| self.nodes[live[i]].iter().map(|&v| scratch.row_of[v as usize]).collect())
                .collect();
            let col_refs: Vec<&[u32]> = cols.iter().map(|c| c.as_slice()).collect();
            let wc: Vec<f64> = working.iter().map(|&i| costs[i]).collect();
            sol = solve_packing(rows.len(), &col_refs, &wc, 20 * (rows.len() + working.len()) + 100);
            rounds += 1;
            if rounds >= MAX_ROUNDS {
                break;
            }
            let mut violated: Vec<(f64, usize)> = Vec::new();
            for (i, &k) in live.iter().enumerate() {
                if in_set[i] {
                    continue;
                }
                let covered: f64 = self.nodes[k].iter().map(|&v| sol.duals[scratch.row_of[v as usize] as usize]).sum();
                let d = costs[i] - covered;
                if d > 1e-9 * (1.0 + costs[i].abs()) {
                    violated.push((d, i));
                }
            }
            if violated.is_empty() {
                break;
            }
            if violated.len() > batch {
                violated.select_nth_unstable_by(batch, |a, b| b.0.total_cmp(&a.0));
                violated.truncate(batch);
            }
            for &(_, i) in &violated {
                in_set[i] = true;
                working.push(i);
            }
        }

        let mut duals = alloc::vec![0.0; self.holders.len()];
        for (r, &v) in rows.iter().enumerate() {
            duals[v as usize] = sol.duals[r];
            scratch.row_of[v as usize] = u32::MAX;
        }
        let mut primal = alloc::vec![0.0; self.nodes.len()];
        for (j, &i) in working.iter().enumerate() {
            primal[live[i]] = sol.primal[j];
        }
        Relaxation { duals, primal }
    }
}

/// Depth-first search over positions, including before skipping, so leaves
/// come in lexicographic order of their position sets.
struct Dfs<'a> {
    comp: &'a ComponentSearch,
    mode: Mode,
    threshold: Threshold,
    options: &'a SolverOptions,
    interrupt: &'a dyn Interrupt,
    nodes: &'a mut u64,
    used: Vec<bool>,
    chosen: Vec<usize>,
    scratch: Scratch,
    best: Vec<usize>,
    found: Option<Key>,
}

const INTEGRAL: f64 = 1e-7;

impl<'a> Dfs<'a> {
    fn new(
        comp: &'a ComponentSearch,
        mode: Mode,
        threshold: Threshold,
        options: &'a SolverOptions,
        interrupt: &'a dyn Interrupt,
        nodes: &'a mut u64,
    ) -> Self {
        let rows = comp.holders.len();
        Dfs {
            comp,
            mode,
            threshold,
            options,
            interrupt,
            nodes,
            used: alloc::vec![false; rows],
            chosen: Vec::new(),
            scratch: Scratch::new(rows),
            best: Vec::new(),
            found: None,
        }
    }

    fn cannot_reach(&self, upper_weight: f64, upper_transplants: f64) -> bool {
        let eps = self.comp.eps;
        // transplant counts are integers; the bound is a sum of fractions
        let t_cap = libm::floor(upper_transplants + 1e-9) as usize;
        match self.threshold {
            Threshold::Floor(key) => {
                upper_weight < key.weight - eps || (upper_weight <= key.weight + eps && t_cap < key.transplants)
            }
            Threshold::Incumbent(key) => {
                upper_weight < key.weight - eps || (upper_weight <= key.weight + eps && t_cap <= key.transplants)
            }
        }
    }

    fn in_tie_band(&self, upper_weight: f64) -> bool {
        upper_weight <= self.threshold.key().weight + self.comp.eps
    }

    /// Bound on transplants still obtainable among completions of `live`
    /// that keep the threshold weight, from `t.x <= (t + lambda w).x -
    /// lambda need` for any `lambda >= 0`.
    fn transplant_bound(&mut self, live: &[usize], weight: f64) -> (Relaxation, f64) {
        let comp = self.comp;
        let lambda = comp.lambda;
        let cost = |k: usize| comp.transplants[k] as f64 + lambda * comp.weight[k];
        let r = comp.relax(live, &cost, &mut self.scratch);
        let dl = comp.lp_bound(&r.duals, live, &cost, &mut self.scratch);
        let need = self.threshold.key().weight - 2.0 * comp.eps - weight;
        let tb = dl - lambda * need + 1e-9 * (1.0 + (lambda * need).abs());
        (r, tb)
    }

    fn leaf(&mut self, weight: f64, transplants: usize) {
        let key = Key { weight, transplants };
        let accept = match self.threshold {
            Threshold::Floor(f) => compare(key, f, self.comp.eps) != Ordering::Less,
            Threshold::Incumbent(b) => compare(key, b, self.comp.eps) == Ordering::Greater,
        };
        if accept {
            self.threshold = Threshold::Incumbent(key);
            self.best.clone_from(&self.chosen);
            self.found = Some(key);
        }
    }

    fn done(&self) -> bool {
        self.mode == Mode::FirstReaching && self.found.is_some()
    }

    /// Explores every selection extending `chosen` by positions >= `pos`.
    /// `parent` is a relaxation of an ancestor, flagged if it is optimal for
    /// this node as well.
    fn node(
        &mut self,
        pos: usize,
        weight: f64,
        transplants: usize,
        parent: Option<(&Relaxation, bool)>,
    ) -> Result<(), SolveError> {
        *self.nodes += 1;
        if (*self.nodes - 1) & 0x3f == 0 && self.interrupt.should_stop() {
            return Err(SolveError::Interrupted { nodes: *self.nodes });
        }
        if self.options.node_limit.is_some_and(|limit| *self.nodes > limit) {
            return Err(SolveError::Interrupted { nodes: *self.nodes });
        }
        let comp = self.comp;
        let mut live = Vec::new();
        comp.live(pos, &self.used, &mut live);
        if live.is_empty() {
            self.leaf(weight, transplants);
            return Ok(());
        }
        let t_now = transplants as f64;
        let (cw, ct) = comp.bound(live[0], &self.used);
        if self.cannot_reach(weight + cw, t_now + ct) {
            return Ok(());
        }

        let weight_of = |k: usize| comp.weight[k];
        let fresh;
        let relax = match parent {
            Some((r, true)) => r,
            Some((r, false)) => {
                let inherited = comp.lp_bound(&r.duals, &live, &weight_of, &mut self.scratch);
                if self.cannot_reach(weight + inherited.min(cw), t_now + ct) {
                    return Ok(());
                }
                fresh = comp.relax(&live, &weight_of, &mut self.scratch);
                &fresh
            }
            None => {
                fresh = comp.relax(&live, &weight_of, &mut self.scratch);
                &fresh
            }
        };
        let dw = comp.lp_bound(&relax.duals, &live, &weight_of, &mut self.scratch);
        let bw = dw.min(cw);
        if self.cannot_reach(weight + bw, t_now + ct) {
            return Ok(());
        }

        let mut bt = ct;
        let mut lagrange: Option<(Relaxation, f64)> = None;
        if self.in_tie_band(weight + bw) {
            let (r, tb) = self.transplant_bound(&live, weight);
            bt = bt.min(tb);
            if self.cannot_reach(weight + bw, t_now + bt) {
                return Ok(());
            }
            lagrange = Some((r, tb));
        }

        // The relaxation stays optimal for a child if the child's candidate
        // is integral at 1 and every candidate skipped so far is at 0.
        let mut exact = true;
        for &k in &live {
            if self.done() {
                break;
            }
            let x = relax.primal[k];
            // Including k costs at least its reduced cost against the bound.
            let reduced = comp.column_dual(&relax.duals, k) - comp.weight[k];
            let child_w = weight + dw - reduced.max(0.0);
            let mut child_t = t_now + ct;
            if let Some((r, tb)) = &lagrange {
                let cost = comp.transplants[k] as f64 + comp.lambda * comp.weight[k];
                let reduced_t = comp.column_dual(&r.duals, k) - cost;
                child_t = child_t.min(t_now + tb - reduced_t.max(0.0));
            }
            if !self.cannot_reach(child_w, child_t) {
                for &v in &comp.nodes[k] {
                    self.used[v as usize] = true;
                }
                self.chosen.push(k);
                let child_exact = exact && x >= 1.0 - INTEGRAL;
                let result = self.node(
                    k + 1,
                    weight + comp.weight[k],
                    transplants + comp.transplants[k],
                    Some((relax, child_exact)),
                );
                self.chosen.pop();
                for &v in &comp.nodes[k] {
                    self.used[v as usize] = false;
                }
                result?;
                // a new incumbent may have put this node in the tie band
                if lagrange.is_none() && self.in_tie_band(weight + bw) {
                    let (r, tb) = self.transplant_bound(&live, weight);
                    bt = bt.min(tb);
                    lagrange = Some((r, tb));
                }
                if self.cannot_reach(weight + bw, t_now + bt) {
                    break;
                }
            }
            exact &= x <= INTEGRAL;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CandidateKind;
    use alloc::vec;

    fn cand(kind: CandidateKind, ids: &[u32], weight: f64) -> Candidate {
        Candidate { kind, nodes: ids.iter().map(|&i| NodeId(i)).collect(), weight }
    }

    fn cycle(ids: &[u32], weight: f64) -> Candidate {
        cand(CandidateKind::Cycle, ids, weight)
    }

    fn instance(cands: Vec<Candidate>) -> PackingInstance {
        let mut universe: Vec<NodeId> = cands.iter().flat_map(|c| c.nodes.clone()).collect();
        universe.push(NodeId(99));
        PackingInstance::new(cands, universe).unwrap()
    }

    #[test]
    fn single_cycle() {
        let inst = instance(vec![cycle(&[0, 1], 2.0)]);
        let sel = solve(&inst).unwrap();
        assert_eq!(sel.objective, 2.0);
        assert_eq!(sel.candidates.len(), 1);
        assert_eq!(brute_force(&inst).unwrap(), sel);
    }

    #[test]
    fn negative_chain_is_never_chosen() {
        let inst = instance(vec![cand(CandidateKind::Chain, &[0, 1], -1.0)]);
        let sel = solve(&inst).unwrap();
        assert_eq!(sel, Selection::empty());
        assert_eq!(brute_force(&inst).unwrap(), sel);
    }

    #[test]
    fn three_cycle_beats_overlapping_two_cycles() {
        let inst = instance(vec![cycle(&[0, 1], 2.0), cycle(&[1, 2], 2.0), cycle(&[0, 1, 2], 3.0)]);
        let sel = solve(&inst).unwrap();
        assert_eq!(sel.objective, 3.0);
        assert_eq!(sel.candidates[0].nodes.len(), 3);
        assert_eq!(brute_force(&inst).unwrap(), sel);
    }

    #[test]
    fn empty_instance() {
        let inst = PackingInstance::new(vec![], vec![]).unwrap();
        assert_eq!(solve(&inst).unwrap(), Selection::empty());
        assert_eq!(brute_force(&inst).unwrap(), Selection::empty());
    }

    #[test]
    fn tie_prefers_more_transplants() {
        // chain 3 patients with W=-1 weighs 2, same as a 2-cycle on other nodes
        let inst = instance(vec![cycle(&[0, 1], 2.0), cand(CandidateKind::Chain, &[5, 0, 2, 3], 2.0)]);
        let sel = solve(&inst).unwrap();
        assert_eq!(sel.transplants(), 3);
        assert_eq!(brute_force(&inst).unwrap(), sel);
    }

    #[test]
    fn tie_prefers_smallest_index_set() {
        let inst = instance(vec![cycle(&[0, 1], 2.0), cycle(&[1, 2], 2.0), cycle(&[2, 3], 2.0), cycle(&[3, 4], 2.0)]);
        let sol = solve_with(&inst, &SolverOptions::default(), &NoInterrupt).unwrap();
        assert_eq!(sol.indices, vec![0, 2]);
        assert_eq!(brute_force(&inst).unwrap(), sol.selection);
    }

    #[test]
    fn zero_weight_candidate_adds_transplants() {
        let inst = instance(vec![cycle(&[0, 1], 2.0), cand(CandidateKind::Chain, &[7, 2, 3], 0.0)]);
        let sel = solve(&inst).unwrap();
        assert_eq!(sel.candidates.len(), 2);
        assert_eq!(brute_force(&inst).unwrap(), sel);
    }

    #[test]
    fn rejects_bad_instances() {
        let err = PackingInstance::new(vec![cycle(&[0, 1], f64::NAN)], vec![NodeId(0), NodeId(1)]).unwrap_err();
        assert!(matches!(err, SolveError::NonFiniteWeight { index: 0, .. }));
        let err = PackingInstance::new(vec![cycle(&[0, 4], 1.0)], vec![NodeId(0)]).unwrap_err();
        assert_eq!(err, SolveError::UnknownNode { index: 0, node: NodeId(4) });
        let big = instance((0..30).map(|i| cycle(&[2 * i, 2 * i + 1], 2.0)).collect());
        assert!(matches!(brute_force(&big), Err(SolveError::TooLarge { count: 30, .. })));
    }

    #[test]
    fn node_limit_fails_loudly() {
        let cands = (0..20u32).flat_map(|i| (i + 1..20).map(move |j| cycle(&[i, j], 2.0))).collect();
        let inst = instance(cands);
        let opts = SolverOptions { node_limit: Some(3) };
        assert!(matches!(solve_with(&inst, &opts, &NoInterrupt), Err(SolveError::Interrupted { .. })));
    }

    #[test]
    fn interrupt_is_honoured() {
        struct Stop;
        impl Interrupt for Stop {
            fn should_stop(&self) -> bool {
                true
            }
        }
        let cands: Vec<_> = (0..40u32).flat_map(|i| (i + 1..40).map(move |j| cycle(&[i, j], 2.0))).collect();
        let inst = instance(cands);
        let r = solve_with(&inst, &SolverOptions::default(), &Stop);
        assert!(matches!(r, Err(SolveError::Interrupted { .. })));
    }

    #[test]
    fn independent_components_combine() {
        let inst =
            instance(vec![cycle(&[10, 11], 2.0), cycle(&[0, 1], 2.0), cycle(&[11, 12, 13], 3.0), cycle(&[1, 2], 2.0)]);
        let sol = solve_with(&inst, &SolverOptions::default(), &NoInterrupt).unwrap();
        assert_eq!(sol.stats.components, 2);
        assert_eq!(sol.indices, vec![1, 2]);
        assert_eq!(brute_force(&inst).unwrap(), sol.selection);
    }
}
