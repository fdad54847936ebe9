//! Running partitioned jobs: a deterministic discrete-event simulator, the
//! serial reference engine, and a real master/worker runtime over TCP.

mod assignment;
mod cost;
mod master;
pub mod protocol;
mod sim;
mod worker;

use thiserror::Error;

use crate::minilang::{run_all_tests, ExecutionStatus, ParseError, SourceProgram};
use crate::mutation::{resolve_identifiers, MutationError};
use crate::partitioning::{
    run_subtask, CombinedResult, Partition, PartitionError, SubtaskOptions, TaskParameters,
};

pub use assignment::AssignmentTable;
pub use cost::CostModel;
pub use master::{run_real_job, RealCluster};
pub use protocol::ProtocolError;
pub use sim::{
    list_schedule, schedule_partials, simulate_job, subtask_cost, ScheduleTrace, SimulatedCluster,
    TraceEntry,
};
pub use worker::{worker_serve, WorkerExit, WorkerOptions};

#[derive(Debug, Error)]
pub enum JobError {
    #[error("invalid job: {0}")]
    Config(String),
    #[error("{path}:{error}")]
    Parse { path: String, error: ParseError },
    #[error("baseline tests fail on the original program: {}", format_failures(.0))]
    BaselineFailed(Vec<(String, ExecutionStatus)>),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error("cluster failure: {0}")]
    Cluster(String),
    #[error("all workers failed; unfinished partitions: {0:?}")]
    AllWorkersFailed(Vec<u32>),
    #[error("job timed out; unfinished partitions: {0:?}")]
    Timeout(Vec<u32>),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl JobError {
    /// Process exit status for this failure: 2 invalid configuration,
    /// 3 program does not parse, 4 baseline tests fail, 5 cluster failure,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Config(_) | JobError::Partition(_) => 2,
            JobError::Mutation(
                MutationError::UnknownClass(_)
                | MutationError::UnknownTest(_)
                | MutationError::NotATest(_),
            ) => 2,
            JobError::Parse { .. } => 3,
            JobError::BaselineFailed(_) => 4,
            JobError::Cluster(_)
            | JobError::AllWorkersFailed(_)
            | JobError::Timeout(_)
            | JobError::Protocol(_) => 5,
            JobError::Mutation(_) | JobError::Io(_) => 1,
        }
    }
}

fn format_failures(failures: &[(String, ExecutionStatus)]) -> String {
    failures
        .iter()
        .map(|(name, status)| format!("{name} ({status})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Refuse to analyse a program that does not pass the task's own tests.
pub fn check_baseline(program: &SourceProgram, params: &TaskParameters) -> Result<(), JobError> {
    params.validate()?;
    let resolved = resolve_identifiers(program, params)?;
    let failures: Vec<_> = run_all_tests(program, &resolved.tests, params.step_limit)
        .into_iter()
        .filter(|(_, o)| !o.passed())
        .map(|(id, o)| (program.test_name(id), o.status))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(JobError::BaselineFailed(failures))
    }
}

/// The reference engine: the whole task as one subtask in this process.
/// Its verdicts are the oracle every distributed run must reproduce.
pub fn run_serial(
    program: &SourceProgram,
    params: &TaskParameters,
    cost: &CostModel,
    options: &SubtaskOptions,
) -> Result<CombinedResult, JobError> {
    check_baseline(program, params)?;
    let whole = Partition {
        partition_id: 0,
        classes: params.classes.clone(),
        tests: params.tests.clone(),
        operators: params.operators.clone(),
        explicit_mutants: None,
    };
    let partial = run_subtask(&whole, program, params.step_limit, cost, options)?;
    let (combined, _) = schedule_partials(vec![partial], 1, cost)?;
    Ok(combined)
}
