//! Batch tooling around the library: metrics, run configuration, the
//! class-prior shift experiment and the `revul` command line.

pub mod cli;
pub mod config;
pub mod metrics;
pub mod prior_shift;

pub use config::RunConfig;
pub use metrics::{auroc, compute_metrics, MetricsError, MetricsOptions, MetricsReport};
pub use prior_shift::{run_prior_shift_experiment, PriorShiftConfig, PriorShiftReport, Trajectory};

use crate::datagen::LabeledSample;
use crate::factors::{analyze, AnalysisOptions, FactorSet};
use crate::fusion::{extract_branch_features, BranchFeatures, CheckpointError, FusionError};
use crate::ir_ingest::IrError;
use crate::minisol::{ParseError, ProgramUnit};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{path}: {err}")]
    Parse { path: String, err: ParseError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Config(String),
}

pub fn factors_of(src: &str, opts: &AnalysisOptions) -> Result<FactorSet, ParseError> {
    Ok(analyze(&ProgramUnit::parse(src)?, opts))
}

/// Features and task-positive labels, in input order.
pub fn dataset(
    samples: &[LabeledSample],
    opts: &AnalysisOptions,
) -> Result<Vec<(BranchFeatures<f64>, bool)>, HarnessError> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let fs =
                factors_of(&s.source, opts).map_err(|err| HarnessError::Parse { path: format!("sample {i}"), err })?;
            Ok((extract_branch_features(&fs), s.positive()))
        })
        .collect()
}
