use super::{MutationError, MutationOperator};
use crate::minilang::{print_program_lines, NodeId, NodeRef, SourceProgram};

/// Canonical-form lines of `class_name` holding at least one node that some
/// operator can mutate. Headers, braces and blank lines never count.
pub fn mutable_lines(program: &SourceProgram, class_name: &str) -> Result<usize, MutationError> {
    let class = program
        .class_index(class_name)
        .ok_or_else(|| MutationError::UnknownClass(class_name.to_string()))?;
    Ok(mutable_lines_per_class(program)[class])
}

/// [`mutable_lines`] for every class at once, in declaration order.
pub fn mutable_lines_per_class(program: &SourceProgram) -> Vec<usize> {
    let mut applicable = vec![false; program.node_count() as usize];
    program.walk(|r, node: NodeRef<'_>| {
        if !program.function(r).is_test {
            applicable[node.id() as usize] =
                MutationOperator::ALL.iter().any(|op| op.applies_to(node));
        }
    });
    let mut counts = vec![0; program.classes.len()];
    for line in print_program_lines(program) {
        if let Some(class) = line.class {
            if line.nodes.iter().any(|&n: &NodeId| applicable[n as usize]) {
                counts[class] += 1;
            }
        }
    }
    counts
}
