//! Community recommendation over social networks.
//!
//! The model scores user-community pairs with embeddings produced by three
//! disentangled encoders on top of shared randomly initialized user vectors:
//! a modularity-propagation encoder over the social graph, a closeness
//! aggregation encoder built from neighborhood-similarity feature maps, and
//! a collaborative encoder over observed memberships. A mutual-exclusion
//! step suppresses redundancy between the social and collaborative views
//! before fusion, and training combines pairwise ranking with a clustering
//! divergence, both differentiated analytically end to end.

pub mod embedding;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod fme;
pub mod graph;
pub mod io;
pub mod membership;
pub mod metrics;
pub mod model;
pub mod operator;
pub mod sparse;
pub mod synth;

pub use embedding::Embedding;
pub use error::{CasoError, Result};
pub use eval::{
    cross_validate, evaluate, split_memberships, RankingMetrics, SplitResult,
};
pub use graph::{build_social_graph, BuiltGraph, IdMap, SocialGraph};
pub use io::{load_checkpoint, load_dataset, save_checkpoint, Checkpoint, DatasetBundle, RunConfig};
pub use membership::MembershipNetwork;
pub use model::{fit, Ablations, FitOutcome, ModelState, RecomputeMode, TrainingConfig};
pub use operator::{modularity_operator, normalized_adjacency, LinearOperator};
pub use synth::{generate_planted_partition, SynthData, SynthSpec};
