use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Partition, PartitionError, TaskParameters};
use crate::cluster::CostModel;
use crate::minilang::{SourceProgram, TestId};
use crate::mutation::{
    catalog_size, dependency_distance, execute_mutant_with, generate_mutants, resolve_identifiers,
    ExecutionMode, Mutant, MutantStatus, MutationError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Scan,
    DependencyAnalysis,
    Generation,
    Execution,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::Scan,
        Phase::DependencyAnalysis,
        Phase::Generation,
        Phase::Execution,
    ];
}

/// Virtual time spent in each phase of one subtask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PhaseDurations {
    pub scan: u64,
    pub dependency_analysis: u64,
    pub generation: u64,
    pub execution: u64,
}

impl PhaseDurations {
    pub fn get(&self, phase: Phase) -> u64 {
        match phase {
            Phase::Scan => self.scan,
            Phase::DependencyAnalysis => self.dependency_analysis,
            Phase::Generation => self.generation,
            Phase::Execution => self.execution,
        }
    }

    pub fn total(&self) -> u64 {
        self.scan + self.dependency_analysis + self.generation + self.execution
    }

    pub fn add(&mut self, other: &PhaseDurations) {
        self.scan += other.scan;
        self.dependency_analysis += other.dependency_analysis;
        self.generation += other.generation;
        self.execution += other.execution;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialResult {
    pub partition_id: u32,
    pub worker_id: u32,
    pub statuses: Vec<MutantStatus>,
    pub phase_durations: PhaseDurations,
    /// Wall-clock time of the subtask in milliseconds, real mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SubtaskOptions {
    /// Charge nothing for (and skip) the scan and dependency-analysis
    /// phases, modelling an engine that does them once per job.
    pub skip_redundant_phases: bool,
    /// Mutants executed concurrently inside the subtask. Step accounting is
    /// identical for any value.
    pub parallelism: usize,
    pub mode: ExecutionMode,
}

impl Default for SubtaskOptions {
    fn default() -> Self {
        SubtaskOptions {
            skip_redundant_phases: false,
            parallelism: 1,
            mode: ExecutionMode::FirstKill,
        }
    }
}

/// Execute one partition: scan, dependency analysis, generation (or
/// rehydration of explicit mutants), execution.
pub fn run_subtask(
    partition: &Partition,
    program: &SourceProgram,
    step_limit: u64,
    cost: &CostModel,
    options: &SubtaskOptions,
) -> Result<PartialResult, PartitionError> {
    run_subtask_with(partition, program, step_limit, cost, options, |m, tests| {
        execute_mutant_with(program, m, tests, step_limit, options.mode)
    })
}

/// [`run_subtask`] with the per-mutant execution supplied by the caller,
/// e.g. a lookup into statuses computed earlier for the same test set.
pub fn run_subtask_with<F>(
    partition: &Partition,
    program: &SourceProgram,
    step_limit: u64,
    cost: &CostModel,
    options: &SubtaskOptions,
    execute: F,
) -> Result<PartialResult, PartitionError>
where
    F: Fn(&Mutant, &[TestId]) -> Result<MutantStatus, MutationError> + Sync,
{
    let n_classes = program.classes.len() as u64;
    let mut phases = PhaseDurations::default();

    let params = TaskParameters {
        classes: partition.classes.clone(),
        tests: partition.tests.clone(),
        operators: partition.operators.clone(),
        step_limit,
    };
    let resolved = resolve_identifiers(program, &params)?;
    if !options.skip_redundant_phases {
        phases.scan = cost.scan_cost * n_classes;
        dependency_distance(program);
        phases.dependency_analysis = cost.depanalysis_cost * n_classes * n_classes;
    }

    let mutants = match &partition.explicit_mutants {
        Some(compact) => {
            let mutants = compact.decode(program)?;
            phases.generation = cost.generation_cost * mutants.len() as u64;
            mutants
        }
        None => {
            // Mutant ids are catalog ranks, so generation walks the whole
            // program whatever the partition's share of it.
            phases.generation = cost.generation_cost * catalog_size(program) as u64;
            generate_mutants(program, &resolved.classes, &resolved.operators)
        }
    };

    let run = |m| execute(m, &resolved.tests);
    let statuses: Vec<MutantStatus> = if options.parallelism > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallelism)
            .build()
            .expect("thread pool");
        pool.install(|| mutants.par_iter().map(run).collect::<Result<_, _>>())?
    } else {
        mutants.iter().map(run).collect::<Result<_, _>>()?
    };
    phases.execution = statuses.iter().map(|s| s.execution_steps).sum();

    Ok(PartialResult {
        partition_id: partition.partition_id,
        worker_id: 0,
        statuses,
        phase_durations: phases,
        wall_ms: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::{parse_canonical, DEFAULT_STEP_LIMIT};
    use crate::mutation::{MutationOperator, Verdict};
    use crate::partitioning::{make_partitions, DistributionStrategy};

    const SRC: &str = "
        class Calc {
            fn add(a: int, b: int) -> int { return a + b; }
            fn neg(a: int) -> int { return -a; }
            test fn t() { assert Calc.add(2, 3) == 5; assert Calc.neg(2) == -2; }
        }
        class Dead {
            fn f(a: int) -> int { if (a > 1) { return a * 2; } return a; }
        }";

    #[test]
    fn operator_partition_only_has_that_operator() {
        let p = parse_canonical(SRC).unwrap();
        let params = TaskParameters::all(&p);
        let parts = make_partitions(&params, DistributionStrategy::ByOperator, &p).unwrap();
        let r = run_subtask(
            &parts[0],
            &p,
            DEFAULT_STEP_LIMIT,
            &CostModel::default(),
            &Default::default(),
        )
        .unwrap();
        assert!(!r.statuses.is_empty());
        assert!(r
            .statuses
            .iter()
            .all(|s| s.operator == MutationOperator::Math));
    }

    #[test]
    fn untested_class_survives() {
        let p = parse_canonical(SRC).unwrap();
        let params = TaskParameters::all(&p);
        let parts = make_partitions(&params, DistributionStrategy::ByClass, &p).unwrap();
        let r = run_subtask(
            &parts[1],
            &p,
            DEFAULT_STEP_LIMIT,
            &CostModel::default(),
            &Default::default(),
        )
        .unwrap();
        assert!(!r.statuses.is_empty());
        assert!(r.statuses.iter().all(|s| s.verdict == Verdict::Survived));
    }

    #[test]
    fn explicit_chunk_charges_rehydration_only() {
        let p = parse_canonical(SRC).unwrap();
        let params = TaskParameters::all(&p);
        let total = catalog_size(&p) as u64;
        let parts = make_partitions(
            &params,
            DistributionStrategy::ByMutantEqual {
                target_partitions: 2,
            },
            &p,
        )
        .unwrap();
        let cost = CostModel::default();
        let chunk = &parts[0];
        let n = chunk.explicit_mutants.as_ref().unwrap().count as u64;
        let r = run_subtask(chunk, &p, DEFAULT_STEP_LIMIT, &cost, &Default::default()).unwrap();
        assert_eq!(r.statuses.len() as u64, n);
        assert_eq!(r.phase_durations.generation, n * cost.generation_cost);

        let whole = make_partitions(&params, DistributionStrategy::ByClass, &p).unwrap();
        let g = run_subtask(
            &whole[0],
            &p,
            DEFAULT_STEP_LIMIT,
            &cost,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(g.phase_durations.generation, total * cost.generation_cost);
        assert!(g.phase_durations.generation > r.phase_durations.generation);
    }

    #[test]
    fn skipping_redundant_phases_and_parallelism() {
        let p = parse_canonical(SRC).unwrap();
        let params = TaskParameters::all(&p);
        let parts = make_partitions(&params, DistributionStrategy::ByClass, &p).unwrap();
        let cost = CostModel::default();
        let serial = run_subtask(
            &parts[0],
            &p,
            DEFAULT_STEP_LIMIT,
            &cost,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(serial.phase_durations.scan, 200);
        assert_eq!(serial.phase_durations.dependency_analysis, 20);
        let opts = SubtaskOptions {
            skip_redundant_phases: true,
            parallelism: 3,
            ..Default::default()
        };
        let fast = run_subtask(&parts[0], &p, DEFAULT_STEP_LIMIT, &cost, &opts).unwrap();
        assert_eq!(fast.phase_durations.scan, 0);
        assert_eq!(fast.phase_durations.dependency_analysis, 0);
        assert_eq!(fast.statuses, serial.statuses);
        assert_eq!(
            fast.phase_durations.execution,
            serial.phase_durations.execution
        );
    }

    #[test]
    fn stale_chunk_is_rejected() {
        let p = parse_canonical(SRC).unwrap();
        let params = TaskParameters::all(&p);
        let mut parts = make_partitions(
            &params,
            DistributionStrategy::ByMutantEqual {
                target_partitions: 1,
            },
            &p,
        )
        .unwrap();
        parts[0].explicit_mutants.as_mut().unwrap().program_hash = "0".repeat(64);
        assert!(run_subtask(
            &parts[0],
            &p,
            DEFAULT_STEP_LIMIT,
            &CostModel::default(),
            &Default::default()
        )
        .is_err());
    }
}
