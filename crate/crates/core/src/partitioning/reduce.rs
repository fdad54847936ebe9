use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{PartialResult, PartitionError};
use crate::mutation::{MutantStatus, MutationOperator, ScorePair, Verdict};

/// The merged outcome of every subtask of a job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedResult {
    /// Sorted by mutant id.
    pub statuses: Vec<MutantStatus>,
    pub score: ScorePair,
    /// Mutants per operator; every operator has an entry.
    pub per_operator_counts: BTreeMap<MutationOperator, u64>,
    pub per_class_counts: BTreeMap<String, u64>,
    /// Virtual time for simulated and serial runs, milliseconds for real ones.
    pub total_duration: u64,
    pub duration_unit: DurationUnit,
    /// Sorted by partition id.
    pub partials: Vec<PartialResult>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DurationUnit {
    Virtual,
    Milliseconds,
}

impl CombinedResult {
    pub fn verdicts(&self) -> BTreeMap<u32, Verdict> {
        self.statuses
            .iter()
            .map(|s| (s.mutant_id, s.verdict))
            .collect()
    }
}

/// Partial results gathered so far, keyed by partition. Merging two
/// aggregates over disjoint partitions is commutative and associative, and
/// [`Aggregate::default`] is the identity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aggregate {
    partials: BTreeMap<u32, PartialResult>,
}

impl Aggregate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.partials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partials.is_empty()
    }

    pub fn contains(&self, partition_id: u32) -> bool {
        self.partials.contains_key(&partition_id)
    }

    pub fn insert(&mut self, partial: PartialResult) -> Result<(), PartitionError> {
        let id = partial.partition_id;
        if self.partials.insert(id, partial).is_some() {
            return Err(PartitionError::DuplicatePartition(id));
        }
        Ok(())
    }

    pub fn merge(mut self, other: Aggregate) -> Result<Aggregate, PartitionError> {
        for partial in other.partials.into_values() {
            self.insert(partial)?;
        }
        Ok(self)
    }

    /// Combine, checking that partitions `0..expected` are all present.
    pub fn finish(self, expected: u32) -> Result<CombinedResult, PartitionError> {
        if let Some(&id) = self.partials.keys().find(|&&id| id >= expected) {
            return Err(PartitionError::UnexpectedPartition(id));
        }
        let missing: Vec<u32> = (0..expected)
            .filter(|id| !self.partials.contains_key(id))
            .collect();
        if !missing.is_empty() {
            return Err(PartitionError::MissingPartitions(missing));
        }
        let partials: Vec<PartialResult> = self.partials.into_values().collect();

        let mut statuses: Vec<MutantStatus> = partials
            .iter()
            .flat_map(|p| p.statuses.iter().cloned())
            .collect();
        statuses.sort_by_key(|s| s.mutant_id);
        let mut seen = HashSet::new();
        for s in &statuses {
            if !seen.insert(s.mutant_id) {
                return Err(PartitionError::DuplicateMutant(s.mutant_id));
            }
        }

        let killed = statuses
            .iter()
            .filter(|s| s.verdict == Verdict::Killed)
            .count() as u64;
        let score = ScorePair::from_counts(killed, statuses.len() as u64 - killed);
        let mut per_operator_counts: BTreeMap<MutationOperator, u64> =
            MutationOperator::ALL.iter().map(|&op| (op, 0)).collect();
        let mut per_class_counts = BTreeMap::new();
        for s in &statuses {
            *per_operator_counts.entry(s.operator).or_default() += 1;
            *per_class_counts.entry(s.class_name.clone()).or_default() += 1;
        }

        let mut busy: BTreeMap<u32, u64> = BTreeMap::new();
        for p in &partials {
            *busy.entry(p.worker_id).or_default() += p.phase_durations.total();
        }
        let total_duration = busy.values().copied().max().unwrap_or(0);

        Ok(CombinedResult {
            statuses,
            score,
            per_operator_counts,
            per_class_counts,
            total_duration,
            duration_unit: DurationUnit::Virtual,
            partials,
        })
    }
}

/// Combine partial results covering partitions `0..expected` exactly once.
pub fn reduce(
    partials: impl IntoIterator<Item = PartialResult>,
    expected: u32,
) -> Result<CombinedResult, PartitionError> {
    let mut agg = Aggregate::new();
    for p in partials {
        agg.insert(p)?;
    }
    agg.finish(expected)
}
