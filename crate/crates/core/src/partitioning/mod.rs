//! Splitting an analysis task into partitions, running one partition as a
//! subtask, and reducing partial results.

mod reduce;
mod strategy;
mod subtask;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minilang::{SourceProgram, DEFAULT_STEP_LIMIT};
use crate::mutation::{CompactMutants, MutationError, MutationOperator};

pub use reduce::{reduce, Aggregate, CombinedResult, DurationUnit};
pub use strategy::make_partitions;
pub use subtask::{
    run_subtask, run_subtask_with, PartialResult, Phase, PhaseDurations, SubtaskOptions,
};

/// The (C, T, O) triple plus the per-test step limit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskParameters {
    pub classes: Vec<String>,
    /// Qualified test names, `Class.test`.
    pub tests: Vec<String>,
    pub operators: Vec<MutationOperator>,
    pub step_limit: u64,
}

impl TaskParameters {
    /// Every class, every test and all seven operators.
    pub fn all(program: &SourceProgram) -> Self {
        TaskParameters {
            classes: program.classes.iter().map(|c| c.name.clone()).collect(),
            tests: program
                .tests()
                .iter()
                .map(|&t| program.qualified_name(t))
                .collect(),
            operators: MutationOperator::ALL.to_vec(),
            step_limit: DEFAULT_STEP_LIMIT,
        }
    }

    pub fn validate(&self) -> Result<(), PartitionError> {
        fn unique<T: std::hash::Hash + Eq + fmt::Debug>(
            what: &'static str,
            items: &[T],
        ) -> Result<(), PartitionError> {
            if items.is_empty() {
                return Err(PartitionError::InvalidParameters(format!(
                    "no {what} given"
                )));
            }
            let mut seen = HashSet::new();
            for item in items {
                if !seen.insert(item) {
                    return Err(PartitionError::InvalidParameters(format!(
                        "duplicate {what} {item:?}"
                    )));
                }
            }
            Ok(())
        }
        unique("classes", &self.classes)?;
        unique("tests", &self.tests)?;
        unique("operators", &self.operators)?;
        if self.step_limit == 0 {
            return Err(PartitionError::InvalidParameters(
                "step limit must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DistributionStrategy {
    ByOperator,
    ByClass,
    ByMutantEqual { target_partitions: usize },
}

impl DistributionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            DistributionStrategy::ByOperator => "by-operator",
            DistributionStrategy::ByClass => "by-class",
            DistributionStrategy::ByMutantEqual { .. } => "by-mutant-equal",
        }
    }

    /// Parse a strategy name; `target_partitions` is only used for
    /// by-mutant-equal.
    pub fn parse(name: &str, target_partitions: usize) -> Result<Self, PartitionError> {
        match name {
            "by-operator" => Ok(DistributionStrategy::ByOperator),
            "by-class" => Ok(DistributionStrategy::ByClass),
            "by-mutant-equal" => Ok(DistributionStrategy::ByMutantEqual { target_partitions }),
            other => Err(PartitionError::UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for DistributionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionStrategy {
    type Err = PartitionError;

    /// Accepts `by-mutant-equal:K`; bare `by-mutant-equal` means K = 1.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some((name, k)) => {
                let k = k
                    .parse()
                    .map_err(|_| PartitionError::UnknownStrategy(s.to_string()))?;
                Self::parse(name, k)
            }
            None => Self::parse(s, 1),
        }
    }
}

/// One unit of work.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub partition_id: u32,
    pub classes: Vec<String>,
    pub tests: Vec<String>,
    pub operators: Vec<MutationOperator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_mutants: Option<CompactMutants>,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("invalid task parameters: {0}")]
    InvalidParameters(String),
    #[error("unknown distribution strategy `{0}`")]
    UnknownStrategy(String),
    #[error("target partition count must be at least 1")]
    ZeroPartitions,
    #[error("no mutants to distribute")]
    NoMutants,
    #[error("partition {0} reported more than once")]
    DuplicatePartition(u32),
    #[error("partitions missing from the result: {0:?}")]
    MissingPartitions(Vec<u32>),
    #[error("unexpected partition {0}")]
    UnexpectedPartition(u32),
    #[error("mutant {0} reported by more than one partition")]
    DuplicateMutant(u32),
    #[error(transparent)]
    Mutation(#[from] MutationError),
}
