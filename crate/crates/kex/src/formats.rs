//! Line-based text formats: weight tables and exported packing instances.
//!
//! Floats are written with `Display`, which prints the shortest decimal that
//! parses back to the same `f64`, so writing a parsed file reproduces it
//! byte for byte.

use std::fmt::Write as _;

use kex_core::model::{Candidate, CandidateKind, NdadNode, Node, NodeId, PairNode, PairType};
use kex_core::solver::PackingInstance;
use kex_core::{BloodType, ExchangeGraph, SolveError, WeightTable};

use crate::error::KexError;

const WEIGHTS: &str = "weight file";
const INSTANCE: &str = "instance file";

/// Lines that carry data: trimmed, without blanks and `#` comments, with
/// 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(what: &'static str, line: usize, s: &str) -> Result<f64, KexError> {
    let v: f64 = s.parse().map_err(|_| KexError::parse(what, line, format!("bad number `{s}`")))?;
    if !v.is_finite() {
        return Err(KexError::parse(what, line, format!("non-finite number `{s}`")));
    }
    Ok(v)
}

fn parse_blood(what: &'static str, line: usize, s: &str) -> Result<BloodType, KexError> {
    BloodType::parse(s).ok_or_else(|| KexError::parse(what, line, format!("bad blood type `{s}`")))
}

pub fn write_weights(table: &WeightTable) -> String {
    let mut out = String::from("# donor patient band weight\n");
    for ty in PairType::all() {
        writeln!(out, "{ty} {}", table.weight(ty)).unwrap();
    }
    writeln!(out, "W {}", table.ndad_penalty).unwrap();
    out
}

/// Every one of the 80 pair types must appear exactly once, plus one `W`
/// line.
pub fn parse_weights(text: &str) -> Result<WeightTable, KexError> {
    let mut weights: [Option<f64>; PairType::COUNT] = [None; PairType::COUNT];
    let mut penalty = None;
    let mut last_line = 0;
    for (line, l) in data_lines(text) {
        last_line = line;
        let fields: Vec<&str> = l.split_whitespace().collect();
        match fields.as_slice() {
            ["W", w] => {
                if penalty.replace(parse_f64(WEIGHTS, line, w)?).is_some() {
                    return Err(KexError::parse(WEIGHTS, line, "second W line"));
                }
            }
            [donor, patient, band, w] => {
                let band: u8 = band
                    .parse()
                    .ok()
                    .filter(|b| (1..=5).contains(b))
                    .ok_or_else(|| KexError::parse(WEIGHTS, line, format!("bad band `{band}`")))?;
                let ty = PairType {
                    donor_blood: parse_blood(WEIGHTS, line, donor)?,
                    patient_blood: parse_blood(WEIGHTS, line, patient)?,
                    band,
                };
                let w = parse_f64(WEIGHTS, line, w)?;
                if weights[ty.index()].replace(w).is_some() {
                    return Err(KexError::parse(WEIGHTS, line, format!("type `{ty}` listed twice")));
                }
            }
            _ => {
                return Err(KexError::parse(
                    WEIGHTS,
                    line,
                    format!("expected `donor patient band weight` or `W value`, got `{l}`"),
                ))
            }
        }
    }
    let mut pair_weight = [0.0; PairType::COUNT];
    for (i, w) in weights.iter().enumerate() {
        pair_weight[i] = w.ok_or_else(|| {
            KexError::parse(WEIGHTS, last_line, format!("missing type `{}`", PairType::from_index(i).unwrap()))
        })?;
    }
    let ndad_penalty = penalty.ok_or_else(|| KexError::parse(WEIGHTS, last_line, "missing W line"))?;
    Ok(WeightTable { pair_weight, ndad_penalty })
}

/// Nodes and candidates of one matching round. Arrival periods are not part
/// of the format and read back as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub nodes: Vec<Node>,
    pub candidates: Vec<Candidate>,
}

impl InstanceFile {
    pub fn new(graph: &ExchangeGraph, candidates: &[Candidate]) -> Self {
        InstanceFile { nodes: graph.nodes().to_vec(), candidates: candidates.to_vec() }
    }

    pub fn to_packing(&self) -> Result<PackingInstance, SolveError> {
        PackingInstance::new(self.candidates.clone(), self.nodes.iter().map(Node::id).collect())
    }
}

pub fn write_instance(inst: &InstanceFile) -> String {
    let pairs = inst.nodes.iter().filter(|n| !n.is_ndad()).count();
    let ndads = inst.nodes.len() - pairs;
    let mut out = String::new();
    writeln!(out, "{pairs} {ndads} {}", inst.candidates.len()).unwrap();
    for node in &inst.nodes {
        match node {
            Node::Pair(p) => writeln!(out, "{} pair {} {} {}", p.id, p.donor_blood, p.patient_blood, p.cpra),
            Node::Ndad(n) => writeln!(out, "{} ndad {} - -", n.id, n.donor_blood),
        }
        .unwrap();
    }
    for c in &inst.candidates {
        write!(out, "{} {}", c.kind.as_str(), c.weight).unwrap();
        for id in &c.nodes {
            write!(out, " {id}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn parse_count(line: usize, s: &str) -> Result<usize, KexError> {
    s.parse().map_err(|_| KexError::parse(INSTANCE, line, format!("bad count `{s}`")))
}

fn parse_id(line: usize, s: &str) -> Result<NodeId, KexError> {
    s.parse().map(NodeId).map_err(|_| KexError::parse(INSTANCE, line, format!("bad node id `{s}`")))
}

pub fn parse_instance(text: &str) -> Result<InstanceFile, KexError> {
    let mut lines = data_lines(text);
    let (line, header) = lines.next().ok_or_else(|| KexError::parse(INSTANCE, 1, "empty file"))?;
    let counts: Vec<&str> = header.split_whitespace().collect();
    let [n, m, k] = counts.as_slice() else {
        return Err(KexError::parse(INSTANCE, line, "header must be `N M K`"));
    };
    let (n, m, k) = (parse_count(line, n)?, parse_count(line, m)?, parse_count(line, k)?);

    let mut nodes = Vec::with_capacity(n + m);
    for _ in 0..n + m {
        let (line, l) = lines.next().ok_or_else(|| KexError::parse(INSTANCE, line, "too few node lines"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        let node = match f.as_slice() {
            [id, "pair", donor, patient, cpra] => {
                let cpra = parse_f64(INSTANCE, line, cpra)?;
                if !(0.0..=1.0).contains(&cpra) {
                    return Err(KexError::parse(INSTANCE, line, format!("cpra {cpra} outside [0, 1]")));
                }
                Node::Pair(PairNode {
                    id: parse_id(line, id)?,
                    donor_blood: parse_blood(INSTANCE, line, donor)?,
                    patient_blood: parse_blood(INSTANCE, line, patient)?,
                    cpra,
                    arrival_period: 0,
                })
            }
            [id, "ndad", donor, "-", "-"] => Node::Ndad(NdadNode {
                id: parse_id(line, id)?,
                donor_blood: parse_blood(INSTANCE, line, donor)?,
                arrival_period: 0,
            }),
            _ => return Err(KexError::parse(INSTANCE, line, format!("bad node line `{l}`"))),
        };
        nodes.push(node);
    }
    let pairs = nodes.iter().filter(|x| !x.is_ndad()).count();
    if pairs != n {
        return Err(KexError::parse(INSTANCE, line, format!("header promises {n} pairs, found {pairs}")));
    }

    let mut candidates = Vec::with_capacity(k);
    for _ in 0..k {
        let (line, l) = lines.next().ok_or_else(|| KexError::parse(INSTANCE, line, "too few candidate lines"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() < 4 {
            return Err(KexError::parse(INSTANCE, line, format!("bad candidate line `{l}`")));
        }
        let kind = match f[0] {
            "cycle" => CandidateKind::Cycle,
            "chain" => CandidateKind::Chain,
            other => return Err(KexError::parse(INSTANCE, line, format!("bad candidate kind `{other}`"))),
        };
        let weight = parse_f64(INSTANCE, line, f[1])?;
        let nodes = f[2..].iter().map(|s| parse_id(line, s)).collect::<Result<_, _>>()?;
        candidates.push(Candidate { kind, nodes, weight });
    }
    if let Some((line, _)) = lines.next() {
        return Err(KexError::parse(INSTANCE, line, "trailing data after the last candidate"));
    }
    Ok(InstanceFile { nodes, candidates })
}
