//! Mutant generation, application and execution, scoring, and the two
//! auxiliary phases (identifier resolution and dependency analysis).

mod deps;
mod encoding;
mod execute;
mod generate;
mod lines;
mod operators;
mod resolve;
mod score;

use thiserror::Error;

pub use deps::{class_call_graph, dependency_distance, DependencyMatrix};
pub use encoding::CompactMutants;
pub use execute::{execute_mutant, execute_mutant_with, ExecutionMode, MutantStatus, Verdict};
pub use generate::{apply_mutant, catalog_size, generate_mutants, mutant_catalog, Mutant};
pub use lines::{mutable_lines, mutable_lines_per_class};
pub use operators::{MutationOperator, UnknownOperator};
pub use resolve::{resolve_identifiers, ResolvedParameters};
pub use score::{mutation_score, ScorePair};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum MutationError {
    #[error("stale mutant {mutant_id} at node {node_id}: {reason}")]
    StaleMutant {
        mutant_id: u32,
        node_id: u32,
        reason: String,
    },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown test `{0}`")]
    UnknownTest(String),
    #[error("`{0}` is not a test function")]
    NotATest(String),
    #[error("cannot score an empty list of mutants")]
    EmptyStatuses,
    #[error("mutant list was generated from program {expected}, not {actual}")]
    HashMismatch { expected: String, actual: String },
    #[error("malformed compact mutant list: {0}")]
    Encoding(String),
}
