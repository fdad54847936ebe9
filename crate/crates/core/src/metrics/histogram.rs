use std::collections::BTreeMap;

use crate::mutation::MutationOperator;
use crate::partitioning::CombinedResult;

/// Mutant count per operator, with every operator present.
pub fn operator_histogram(result: &CombinedResult) -> BTreeMap<MutationOperator, u64> {
    let mut counts: BTreeMap<MutationOperator, u64> =
        MutationOperator::ALL.iter().map(|&op| (op, 0)).collect();
    for s in &result.statuses {
        *counts.entry(s.operator).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{run_serial, CostModel};
    use crate::minilang::parse_canonical;
    use crate::partitioning::TaskParameters;

    #[test]
    fn single_function_histogram() {
        let p = parse_canonical(
            "class A { fn f(a: int, b: int) -> int { return a + b; } test fn t() { assert A.f(1, 2) == 3; } }",
        )
        .unwrap();
        let r = run_serial(
            &p,
            &TaskParameters::all(&p),
            &CostModel::default(),
            &Default::default(),
        )
        .unwrap();
        let h = operator_histogram(&r);
        assert_eq!(h.len(), 7);
        assert_eq!(h[&MutationOperator::Math], 1);
        assert_eq!(h[&MutationOperator::ReturnVals], 1);
        assert_eq!(h.values().sum::<u64>(), 2);
        assert_eq!(h[&MutationOperator::InvertNegs], 0);
        assert_eq!(h, r.per_operator_counts);
    }
}
