//! Bayesian entity alignment for attribute-rich, event-driven fact graphs.
//!
//! A fact graph is bipartite: event hubs (publications, transactions) connect
//! to entity nodes (people, organizations, keywords) through predicate-labeled
//! edges, and every edge is one fact. Given two such graphs, [`engine::eat`]
//! scores the probability that an ambiguous entity in the first graph is a
//! noisy observation of an entity in the second, using a Dirichlet-categorical
//! model over rarity-weighted attribute matches in the two nodes'
//! neighborhoods. [`pipeline::heat`] runs that scorer in configured stages,
//! merging confident alignments after each stage so that later stages see
//! cleaner neighborhoods.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, parallel scoring
//! and the command-line front end live in the `heat` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod engine;
pub mod eval;
pub mod graph;
pub mod matchers;
pub mod pipeline;
pub mod synth;

pub use engine::{
    eat, eat_with, AlignmentMatrix, AlignmentRow, Candidate, CandidateScore, EngineError,
    Executor, PriorSpec, Sequential,
};
pub use eval::{precision_recall, precision_recall_log, EvalError, EvalPoint, EvalReport, GroundTruth};
pub use graph::{
    Attributes, EntityNode, EventHub, FactGraph, FactTriple, GraphError, NodeId, RawGraph,
};
pub use matchers::{
    AttributeExtractorSpec, ConstraintSpec, ConstraintVariant, IndicatorSpec, Normalization,
};
pub use pipeline::{heat, merge_nodes, run_stage, HeatRun, MergeRecord, StageConfig, UnifiedGraph};
pub use synth::{generate_synthetic, SynthSpec, SyntheticPair};
