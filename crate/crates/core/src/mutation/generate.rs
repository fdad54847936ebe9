use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{MutationError, MutationOperator};
use crate::minilang::{
    find_in_block_mut, print_node, Expr, FnRef, NodeId, NodeMut, NodeRef, SourceProgram, Stmt,
};

/// One injected fault.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    /// Rank in the whole-program catalog, so ids agree however the
    /// program's mutants are split up.
    pub mutant_id: u32,
    pub class_name: String,
    pub function_name: String,
    pub node_id: NodeId,
    pub byte_offset: u32,
    pub operator: MutationOperator,
    pub original_snippet: String,
    pub mutated_snippet: String,
}

/// Every mutant of the program: all non-test functions, all operators,
/// ordered by class, node id, operator id. Since node ids are assigned in
/// declaration order, this is also (node_id, operator) order.
pub fn mutant_catalog(program: &SourceProgram) -> Vec<Mutant> {
    let mut out = Vec::new();
    program.walk(|r, node| {
        let func = program.function(r);
        if func.is_test {
            return;
        }
        for op in MutationOperator::ALL {
            if op.applies_to(node) {
                out.push(Mutant {
                    mutant_id: out.len() as u32,
                    class_name: program.classes[r.class as usize].name.clone(),
                    function_name: func.name.clone(),
                    node_id: node.id(),
                    byte_offset: node.span().offset,
                    operator: op,
                    original_snippet: print_node(node),
                    mutated_snippet: mutated_snippet(node, op),
                });
            }
        }
    });
    out
}

/// Number of mutants in the catalog, without rendering snippets.
pub fn catalog_size(program: &SourceProgram) -> usize {
    let mut n = 0;
    program.walk(|r, node| {
        if !program.function(r).is_test {
            n += MutationOperator::ALL
                .iter()
                .filter(|op| op.applies_to(node))
                .count();
        }
    });
    n
}

fn mutated_snippet(node: NodeRef<'_>, op: MutationOperator) -> String {
    match node {
        NodeRef::Expr(e) => {
            let mut copy: Expr = e.clone();
            op.apply(NodeMut::Expr(&mut copy));
            print_node(NodeRef::Expr(&copy))
        }
        NodeRef::Stmt(s) => {
            let mut copy: Stmt = s.clone();
            op.apply(NodeMut::Stmt(&mut copy));
            print_node(NodeRef::Stmt(&copy))
        }
    }
}

/// Mutants of `classes` (indices into `program.classes`) under `operators`,
/// in catalog order.
pub fn generate_mutants(
    program: &SourceProgram,
    classes: &[usize],
    operators: &[MutationOperator],
) -> Vec<Mutant> {
    let class_names: HashSet<&str> = classes
        .iter()
        .map(|&c| program.classes[c].name.as_str())
        .collect();
    let ops: HashSet<MutationOperator> = operators.iter().copied().collect();
    mutant_catalog(program)
        .into_iter()
        .filter(|m| class_names.contains(m.class_name.as_str()) && ops.contains(&m.operator))
        .collect()
}

/// A copy of `program` with `mutant` injected. The original is unchanged and
/// the copy shares every function except the mutated one.
pub fn apply_mutant(
    program: &SourceProgram,
    mutant: &Mutant,
) -> Result<SourceProgram, MutationError> {
    let stale = |reason: &str| MutationError::StaleMutant {
        mutant_id: mutant.mutant_id,
        node_id: mutant.node_id,
        reason: reason.to_string(),
    };
    if mutant.node_id >= program.node_count() {
        return Err(stale("node id out of range"));
    }
    let r: FnRef = program
        .locate(mutant.node_id)
        .ok_or_else(|| stale("node id not found"))?;
    let original = program.function(r);
    if original.is_test {
        return Err(stale("node belongs to a test function"));
    }
    let mut func = original.clone();
    let node = find_in_block_mut(&mut func.body, mutant.node_id)
        .ok_or_else(|| stale("node id not found"))?;
    let offset = match &node {
        NodeMut::Expr(e) => e.span.offset,
        NodeMut::Stmt(s) => s.span.offset,
    };
    if offset != mutant.byte_offset {
        return Err(stale("byte offset does not match node"));
    }
    if !mutant.operator.apply(node) {
        return Err(stale("operator does not apply to node"));
    }
    Ok(program.with_function(r, func))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{parse_program, print_program, same_structure};

    fn single(body: &str, sig: &str, ops: &[MutationOperator]) -> Vec<Mutant> {
        let p = parse_program(&format!("class A {{ fn f({sig} {{ {body} }} }}")).unwrap();
        generate_mutants(&p, &[0], ops)
    }

    #[test]
    fn invert_negs_example() {
        let ms = single(
            "return -i;",
            "i: int) -> int",
            &[MutationOperator::InvertNegs],
        );
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].original_snippet, "-i");
        assert_eq!(ms[0].mutated_snippet, "i");
    }

    #[test]
    fn math_example() {
        let ms = single(
            "return a + b;",
            "a: int, b: int) -> int",
            &[MutationOperator::Math],
        );
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].mutated_snippet, "a - b");
    }

    #[test]
    fn return_vals_example() {
        let ms = single("return true;", ") -> bool", &[MutationOperator::ReturnVals]);
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].original_snippet, "return true");
        assert_eq!(ms[0].mutated_snippet, "return false");
    }

    #[test]
    fn return_vals_on_expressions() {
        let ms = single(
            "return a < b;",
            "a: int, b: int) -> bool",
            &[MutationOperator::ReturnVals],
        );
        assert_eq!(ms[0].mutated_snippet, "return !(a < b)");
        let ms = single(
            "return a - b;",
            "a: int, b: int) -> int",
            &[MutationOperator::ReturnVals],
        );
        assert_eq!(ms[0].mutated_snippet, "return a - b + 1");
    }

    #[test]
    fn if_with_increment_yields_three() {
        let ms = single(
            "if (x < y) { x += 1; }",
            "x: int, y: int)",
            &MutationOperator::ALL,
        );
        let got: Vec<_> = ms
            .iter()
            .map(|m| (m.operator, m.mutated_snippet.as_str()))
            .collect();
        assert_eq!(
            got,
            vec![
                (MutationOperator::ConditionalsBoundary, "x <= y"),
                (MutationOperator::NegateConditionals, "x >= y"),
                (MutationOperator::Increments, "x -= 1"),
            ]
        );
    }

    #[test]
    fn tests_are_never_mutated() {
        let p = parse_program(
            "class A { fn f(a: int) -> int { return a + 1; } test fn t() { assert A.f(1) - 2 == 0; } }",
        )
        .unwrap();
        let ms = mutant_catalog(&p);
        assert!(ms.iter().all(|m| m.function_name == "f"));
        assert_eq!(ms.len(), catalog_size(&p));
    }

    #[test]
    fn apply_changes_exactly_one_node() {
        let p =
            parse_program("class A { fn f(a: int, b: int) -> int { let c = -a; return c + b; } }")
                .unwrap();
        let before = print_program(&p);
        for m in mutant_catalog(&p) {
            let q = apply_mutant(&p, &m).unwrap();
            assert_eq!(print_program(&p), before);
            assert!(!same_structure(&p, &q));
            let after = print_program(&q);
            let diff: Vec<_> = before
                .lines()
                .zip(after.lines())
                .filter(|(a, b)| a != b)
                .collect();
            assert_eq!(diff.len(), 1, "{m:?}");
            assert!(diff[0].1.contains(m.mutated_snippet.as_str()), "{m:?}");
        }
    }

    #[test]
    fn stale_mutants_are_rejected() {
        let p = parse_program("class A { fn f(a: int) -> int { return a + 1; } }").unwrap();
        let mut m = mutant_catalog(&p)[0].clone();
        m.node_id = 9999;
        assert!(matches!(
            apply_mutant(&p, &m),
            Err(MutationError::StaleMutant { .. })
        ));
        let mut m = mutant_catalog(&p)[0].clone();
        m.operator = MutationOperator::InvertNegs;
        assert!(apply_mutant(&p, &m).is_err());
        let mut m = mutant_catalog(&p)[0].clone();
        m.byte_offset += 1;
        assert!(apply_mutant(&p, &m).is_err());
    }

    #[test]
    fn byte_offset_points_at_node() {
        let src = "class A { fn f(a: int) -> int { return -a; } }";
        let p = parse_program(src).unwrap();
        let ms = mutant_catalog(&p);
        let inv = ms
            .iter()
            .find(|m| m.operator == MutationOperator::InvertNegs)
            .unwrap();
        assert_eq!(&src[inv.byte_offset as usize..][..2], "-a");
    }
}
