//! Core engine for dynamic kidney exchange experiments.
//!
//! The crate is `no_std` with `alloc`. It covers pool dynamics, compatibility
//! sampling, cycle/chain enumeration, an exact branch-and-bound packing
//! solver, weighting schemes, weight learning and group-fairness scores.
//! File formats, the CLI and parallel orchestration live in the `kex` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod compat;
pub mod enumerate;
pub mod error;
pub mod fairness;
pub mod learn;
mod lp;
pub mod model;
pub mod pool;
pub mod random;
pub mod sim;
pub mod solver;
pub mod weights;

pub use error::{
    ConfigError, EnumerationError, FairnessError, GraphError, LearnError, PoolError, SimError, SolveError,
};
pub use model::{
    BloodType, Candidate, CandidateKind, CpraBand, ExchangeGraph, NdadNode, Node, NodeId, PairNode, PairType, Selection,
};
pub use weights::{Scheme, SchemeKind, WeightTable};
