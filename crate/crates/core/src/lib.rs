//! Compositional reentrancy analysis for a small contract language.
//!
//! The pipeline decomposes a program into four factors (external call,
//! state update, dependency, ordering), combines them with a boolean rule or
//! a smooth log-sum-exp score, and optionally fuses per-factor feature
//! vectors with a gated classifier trained under a Jacobian alignment
//! penalty. Synthetic labeled corpora come from rule-driven generators that
//! are checked by structural validators.

pub mod datagen;
pub mod factors;
pub mod fusion;
pub mod harness;
pub mod ir_ingest;
pub mod linalg;
pub mod minisol;
pub mod num;
pub mod scoring;

pub use num::Scalar;

pub type ScoreParams = scoring::ScoreParams<f64>;
pub type SoftScore = scoring::SoftScore<f64>;
pub type BranchFeatures = fusion::BranchFeatures<f64>;
pub type FusionModel = fusion::FusionModel<f64>;
pub type FusionModelF32 = fusion::FusionModel<f32>;
pub type GateParams = fusion::GateParams<f64>;
pub type HeadParams = fusion::HeadParams<f64>;
