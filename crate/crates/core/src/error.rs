use crate::model::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("arc {0}->{1} appears twice")]
    DuplicateArc(NodeId, NodeId),
    #[error("self-arc on node {0}")]
    SelfArc(NodeId),
    #[error("arc references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("arc {0}->{1} points into an altruistic donor")]
    ArcIntoAltruist(NodeId, NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnumerationError {
    #[error("candidate budget exceeded after {reached} candidates")]
    BudgetExceeded { reached: usize },
    #[error("cycle cap must be at least 2, got {0}")]
    CycleCapTooSmall(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("candidate {index} references node {node} outside the universe")]
    UnknownNode { index: usize, node: NodeId },
    #[error("candidate {index} has non-finite weight {weight}")]
    NonFiniteWeight { index: usize, weight: f64 },
    #[error("search interrupted after {nodes} branch-and-bound nodes")]
    Interrupted { nodes: u64 },
    #[error("brute force refused: {count} candidates exceeds the limit of {limit}")]
    TooLarge { count: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PoolError {
    #[error("node {0} is not waiting in the pool")]
    UnknownId(NodeId),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{name} distribution sums to {sum}, expected 1")]
    DistributionSum { name: &'static str, sum: f64 },
    #[error("{name} has a negative or non-finite entry")]
    InvalidProbability { name: &'static str },
    #[error("{name} rate must be finite and non-negative, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("{0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("non-finite queue/population ratio for type index {type_index}")]
    NonFiniteRatio { type_index: usize },
    #[error("population proportion of type index {type_index} is zero")]
    ZeroPopulation { type_index: usize },
    #[error("update produced a non-positive minimum raw weight {min}")]
    NonPositiveMinimum { min: f64 },
    #[error("learning iteration {iteration} failed: {source}")]
    Simulation { iteration: usize, source: SimError },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FairnessError {
    #[error("utility {value} of group {group} must be positive for rho <= 0")]
    NonPositiveUtility { group: usize, value: f64 },
    #[error("baseline score must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("utilities and weights differ in length")]
    LengthMismatch,
}

/// Failure of one matching period inside a simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("period {period}: {source}")]
    Enumeration { period: u32, source: EnumerationError },
    #[error("period {period}: {source}")]
    Solve { period: u32, source: SolveError },
    #[error("period {period}: {source}")]
    Pool { period: u32, source: PoolError },
    #[error(transparent)]
    Config(#[from] ConfigError),
}
