//! Scaling metrics, statistics and the synthetic corpus used to measure them.

mod corpus;
mod histogram;
mod stats;

use thiserror::Error;

pub use corpus::{generate_corpus, ClassManifest, Corpus, CorpusManifest, CorpusSpec};
pub use histogram::operator_histogram;
pub use stats::{
    coefficient_of_variation, linear_fit, percent_improvement, speedup, trial_stats, FitResult,
    ScalingCurve, TrialSet, TrialStats,
};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("scaling curve has no single-worker point")]
    MissingBaseline,
    #[error("duration of zero cannot be divided by")]
    ZeroDuration,
    #[error("baseline duration must be positive")]
    NonPositiveBaseline,
    #[error("need at least two trials, got {0}")]
    TooFewTrials(usize),
    #[error("linear fit needs at least two distinct x values")]
    DegenerateFit,
    #[error("invalid corpus spec: {0}")]
    InvalidCorpusSpec(String),
    #[error("corpus generator produced an unusable program: {0}")]
    Generator(String),
}
