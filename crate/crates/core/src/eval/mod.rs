//! Synthetic corpus, metrics and the technique ablation.

pub mod ablation;
pub mod fixtures;
pub mod metrics;
pub mod synth;

use thiserror::Error;

pub use ablation::{parse_groups, run_ablation, EvalReport, EvalSettings, GroupConfig, RunRecord};
pub use metrics::MetricError;
pub use synth::{gen_synthetic_corpus, generate, Difficulty, EvalQuery, GroundTruth, SynthConfig, SynthCorpus};

use crate::corpus::CorpusError;
use crate::pipeline::{Corpus, PipelineError};
use crate::po::PriorityTable;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid group list `{0}`")]
    BadGroups(String),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("no queries to evaluate")]
    NoQueries,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Indexes a generated corpus with the default priorities.
pub fn build_corpus(synth: &SynthCorpus, chunk_chars: usize) -> Result<Corpus, EvalError> {
    Ok(Corpus::from_docs(synth.docs()?, &PriorityTable::default(), chunk_chars)?)
}
