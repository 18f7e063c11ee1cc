//! Team stability metrics for consecutive cooperative learning activities.
//!
//! The crate turns team rosters and individual scores into a co-membership
//! network, measures how stable each student's partnerships stay across the
//! ordered activities, and relates that stability to learning scores with
//! ordinary least squares.
//!
//! Modules, bottom-up:
//!
//! - [`ingest`]: roster and score parsing, validation, the canonical [`Cohort`].
//! - [`network`]: cooperation counts, per-activity adjacency, relation strength
//!   and degree centrality.
//! - [`stability`]: time-damped centrality, the stability factor and the
//!   per-student results table.
//! - [`stats`]: OLS fitting with t/F diagnostics and the distribution tails
//!   they need.
//! - [`synth`]: seeded synthetic cohorts and score generation.

pub mod ingest;
pub mod network;
pub mod special;
pub mod stability;
pub mod stats;
pub mod synth;

pub use ingest::{
    Activity, Cohort, Diagnostic, IndividualScoreRecord, IngestError, Severity, StudentId,
    TeamRecord,
};
pub use network::{ActivityAdjacency, CooperationCounts, Memberships, NetworkError};
pub use stability::{DampingConfig, Precision, StabilityError, StabilityRow};
pub use stats::{RegressionInput, RegressionResult, StatsError};
pub use synth::{PolicyKind, ScoreModel, SynthError, TeamingPolicy};
