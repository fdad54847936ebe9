use serde::{Deserialize, Serialize};

use super::{MutationError, MutationOperator};
use crate::minilang::{SourceProgram, TestId};
use crate::partitioning::TaskParameters;

/// Task parameters with names replaced by program indices, in parameter order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub classes: Vec<usize>,
    pub tests: Vec<TestId>,
    pub operators: Vec<MutationOperator>,
}

/// Map the class and test names of `params` onto `program`. Tests are named
/// `Class.function` and must be test functions.
pub fn resolve_identifiers(
    program: &SourceProgram,
    params: &TaskParameters,
) -> Result<ResolvedParameters, MutationError> {
    let classes = params
        .classes
        .iter()
        .map(|name| {
            program
                .class_index(name)
                .ok_or_else(|| MutationError::UnknownClass(name.clone()))
        })
        .collect::<Result<_, _>>()?;
    let tests = params
        .tests
        .iter()
        .map(|name| {
            let r = program
                .resolve_function(name)
                .ok_or_else(|| MutationError::UnknownTest(name.clone()))?;
            program
                .test_id(r)
                .ok_or_else(|| MutationError::NotATest(name.clone()))
        })
        .collect::<Result<_, _>>()?;
    Ok(ResolvedParameters {
        classes,
        tests,
        operators: params.operators.clone(),
    })
}
