use serde::{Deserialize, Serialize};

use super::{apply_mutant, Mutant, MutationError, MutationOperator};
use crate::minilang::{run_function, ExecutionStatus, SourceProgram, TestId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Killed,
    Survived,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantStatus {
    pub mutant_id: u32,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub killing_test: Option<TestId>,
    /// How the killing test failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kill_status: Option<ExecutionStatus>,
    pub tests_executed: u32,
    pub execution_steps: u64,
    pub operator: MutationOperator,
    pub class_name: String,
}

/// How many tests to run against each mutant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionMode {
    /// Stop at the first failing test.
    #[default]
    FirstKill,
    /// Run every test regardless; slow, used as an oracle for `FirstKill`.
    Exhaustive,
}

/// Run `tests` in ascending id order against `mutant`. Any non-passing
/// outcome (failed assertion, runtime error, step limit) kills the mutant.
pub fn execute_mutant(
    program: &SourceProgram,
    mutant: &Mutant,
    tests: &[TestId],
    step_limit: u64,
) -> Result<MutantStatus, MutationError> {
    execute_mutant_with(program, mutant, tests, step_limit, ExecutionMode::FirstKill)
}

pub fn execute_mutant_with(
    program: &SourceProgram,
    mutant: &Mutant,
    tests: &[TestId],
    step_limit: u64,
    mode: ExecutionMode,
) -> Result<MutantStatus, MutationError> {
    let mutated = apply_mutant(program, mutant)?;
    let mut ids = tests.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut status = MutantStatus {
        mutant_id: mutant.mutant_id,
        verdict: Verdict::Survived,
        killing_test: None,
        kill_status: None,
        tests_executed: 0,
        execution_steps: 0,
        operator: mutant.operator,
        class_name: mutant.class_name.clone(),
    };
    for id in ids {
        let outcome = run_function(&mutated, mutated.tests()[id as usize], step_limit);
        status.tests_executed += 1;
        status.execution_steps += outcome.steps;
        if outcome.status != ExecutionStatus::Passed && status.killing_test.is_none() {
            status.verdict = Verdict::Killed;
            status.killing_test = Some(id);
            status.kill_status = Some(outcome.status);
            if mode == ExecutionMode::FirstKill {
                break;
            }
        }
    }
    Ok(status)
}
