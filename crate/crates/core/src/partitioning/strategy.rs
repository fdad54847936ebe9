use super::{DistributionStrategy, Partition, PartitionError, TaskParameters};
use crate::minilang::SourceProgram;
use crate::mutation::{generate_mutants, resolve_identifiers, CompactMutants};

/// Split a task into partitions with ids `0..n`.
///
/// by-operator yields one partition per operator, by-class one per class.
/// by-mutant-equal generates the task's mutants on the spot and deals them
/// round-robin into `min(k, |M|)` chunks whose sizes differ by at most one.
/// Dealing rather than slicing spreads each class's mutants over every
/// chunk, so chunk execution costs stay close even when test cost grows
/// along the generation order.
pub fn make_partitions(
    params: &TaskParameters,
    strategy: DistributionStrategy,
    program: &SourceProgram,
) -> Result<Vec<Partition>, PartitionError> {
    params.validate()?;
    let partition = |id: usize, classes: Vec<String>, operators| Partition {
        partition_id: id as u32,
        classes,
        tests: params.tests.clone(),
        operators,
        explicit_mutants: None,
    };
    match strategy {
        DistributionStrategy::ByOperator => Ok(params
            .operators
            .iter()
            .enumerate()
            .map(|(i, &op)| partition(i, params.classes.clone(), vec![op]))
            .collect()),
        DistributionStrategy::ByClass => Ok(params
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| partition(i, vec![c.clone()], params.operators.clone()))
            .collect()),
        DistributionStrategy::ByMutantEqual { target_partitions } => {
            if target_partitions == 0 {
                return Err(PartitionError::ZeroPartitions);
            }
            let resolved = resolve_identifiers(program, params)?;
            let mutants = generate_mutants(program, &resolved.classes, &resolved.operators);
            if mutants.is_empty() {
                return Err(PartitionError::NoMutants);
            }
            let k = target_partitions.min(mutants.len());
            let mut chunks = vec![Vec::new(); k];
            for (i, m) in mutants.into_iter().enumerate() {
                chunks[i % k].push(m);
            }
            Ok(chunks
                .into_iter()
                .enumerate()
                .map(|(i, chunk)| Partition {
                    explicit_mutants: Some(CompactMutants::encode(program, &chunk)),
                    ..partition(i, params.classes.clone(), params.operators.clone())
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse_canonical;
    use crate::mutation::MutationOperator;

    fn program() -> SourceProgram {
        // 10 mutants: five MATH sites, five RETURN_VALS sites.
        let mut src = String::from("class A {");
        for i in 0..5 {
            src.push_str(&format!(" fn f{i}(a: int) -> int {{ return a + {i}; }}"));
        }
        src.push_str(" test fn t() { assert A.f0(1) == 1; } }");
        parse_canonical(&src).unwrap()
    }

    #[test]
    fn by_operator_and_by_class_counts() {
        let p = program();
        let params = TaskParameters::all(&p);
        let parts = make_partitions(&params, DistributionStrategy::ByOperator, &p).unwrap();
        assert_eq!(parts.len(), 7);
        assert!(parts
            .iter()
            .all(|q| q.operators.len() == 1 && q.classes == params.classes));
        let parts = make_partitions(&params, DistributionStrategy::ByClass, &p).unwrap();
        assert_eq!(parts.len(), 1);
    }

    #[test]
    fn equal_chunks_differ_by_at_most_one() {
        let p = program();
        let params = TaskParameters::all(&p);
        let parts = make_partitions(
            &params,
            DistributionStrategy::ByMutantEqual {
                target_partitions: 4,
            },
            &p,
        )
        .unwrap();
        let sizes: Vec<u32> = parts
            .iter()
            .map(|q| q.explicit_mutants.as_ref().unwrap().count)
            .collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
    }

    #[test]
    fn more_chunks_than_mutants() {
        let p = program();
        let params = TaskParameters::all(&p);
        let parts = make_partitions(
            &params,
            DistributionStrategy::ByMutantEqual {
                target_partitions: 64,
            },
            &p,
        )
        .unwrap();
        assert_eq!(parts.len(), 10);
    }

    #[test]
    fn empty_mutant_set_is_an_error() {
        let p = program();
        let mut params = TaskParameters::all(&p);
        params.operators = vec![MutationOperator::Increments];
        let err = make_partitions(
            &params,
            DistributionStrategy::ByMutantEqual {
                target_partitions: 2,
            },
            &p,
        )
        .unwrap_err();
        assert_eq!(err, PartitionError::NoMutants);
    }

    #[test]
    fn invalid_parameters() {
        let p = program();
        let mut params = TaskParameters::all(&p);
        params.operators.push(MutationOperator::Math);
        assert!(make_partitions(&params, DistributionStrategy::ByClass, &p).is_err());
        params.operators.clear();
        assert!(make_partitions(&params, DistributionStrategy::ByClass, &p).is_err());
    }

    #[test]
    fn strategy_names_parse() {
        assert_eq!(
            "by-class".parse::<DistributionStrategy>().unwrap(),
            DistributionStrategy::ByClass
        );
        assert_eq!(
            "by-mutant-equal:8".parse::<DistributionStrategy>().unwrap(),
            DistributionStrategy::ByMutantEqual {
                target_partitions: 8
            }
        );
        assert!("by-line".parse::<DistributionStrategy>().is_err());
    }
}
