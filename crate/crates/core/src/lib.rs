//! Consistent multiple graph matching for multi-attributed graphs.
//!
//! Every graph pair is modeled as a multi-layer association graph (one layer
//! per attribute channel). Random walkers on each pair are reweighted toward
//! one-to-one, confident and cycle-consistent candidates; the last two come
//! from synchronizing layer confidences and reweight vectors across all pairs.
//!
//! Module map:
//! - [`model`]: graphs, assignments, pair affinities, problem validation
//! - [`kernels`]: Sinkhorn, Hungarian, symmetric eigenpairs
//! - [`affinity`]: attribute kernels, supra-adjacency, walker transitions
//! - [`walkers`]: single-pair RRWM and multi-layer MLRWM
//! - [`sync`]: layer confidence and permutation synchronization
//! - [`engine`]: the synchronized multi-graph solver
//! - [`synthgen`]: seeded synthetic problems
//! - [`metrics`], [`bench`]: scoring and experiment sweeps
//! - [`io`]: JSON problem and solution documents

pub mod affinity;
pub mod bench;
pub mod engine;
pub mod error;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod sync;
pub mod synthgen;
pub mod walkers;

pub use affinity::{AffinityConfig, Kernel};
pub use engine::{objective, solve, solve_with, MLSyncParams, SolveReport};
pub use error::{Error, Result};
pub use model::{
    compose, validate_problem, Assignment, AttributedGraph, GroundTruth, PairAffinity, ProblemSet,
};
pub use synthgen::{generate_problem, SynthConfig};
pub use walkers::{mlrwm, rrwm, WalkerParams};
