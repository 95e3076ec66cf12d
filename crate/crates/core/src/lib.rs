//! Simulation and analysis of model collapse in networks of generative models
//! that share a growing pool of synthetic samples.
//!
//! The crate is organised bottom-up:
//!
//! * [`gmm`] holds the fixed Gaussian component bank and per-model mixture weights.
//! * [`update`] is the recursive mixture-weight update with its positive floor.
//! * [`pool`] is the shared append-only sample pool.
//! * [`sim`] runs the network of models over time and records trajectories.
//! * [`metrics`] computes mean embeddings, distance matrices, Frobenius norms and
//!   classical MDS projections.
//! * [`theory`] predicts the expected contraction of inter-model weight gaps and
//!   checks the simulator against it.
//! * [`trace`] loads recorded embedding traces and runs the same metrics on them.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod gmm;
pub mod metrics;
pub mod pool;
pub mod rng;
pub mod sim;
pub mod theory;
pub mod trace;
pub mod update;

pub use error::{Error, Result};
pub use gmm::{init_weights, BankParams, ComponentBank, GmmModel, MixtureWeights};
pub use metrics::{
    cmds_project, distance_matrix, frobenius_norm, mean_embedding, CmdsProjection, DistanceMatrix,
};
pub use pool::{retrieval_count, Origin, SamplePool};
pub use sim::{run, run_replicates, ScheduleRule, SimConfig, SimState, StepRecord, Trajectory};
pub use theory::{
    mean_field_weight, predicted_gap, predicted_multiplier, verify_contraction, ContractionReport,
    VerifyOptions,
};
pub use trace::{analyze_trace, load_trace, EmbeddingTrace, ResponseRecord, TraceAnalysis};
pub use update::{
    apply_point, ownership, schedule_from_k, update_weights, OwnershipVector, UpdateOutcome,
    UpdateSchedule,
};

/// Default positive floor for mixture weights.
pub const DEFAULT_EPSILON: f64 = 1e-6;
