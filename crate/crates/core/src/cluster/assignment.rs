use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::JobError;
use crate::partitioning::{Aggregate, PartialResult, PartitionError};

/// The master's view of a job: queued, in-flight and finished partitions,
/// and which workers are still alive. Owned by a single coordinator.
#[derive(Clone, Debug)]
pub struct AssignmentTable {
    total: u32,
    queue: VecDeque<u32>,
    in_flight: BTreeMap<u32, Vec<u32>>,
    failed: BTreeSet<u32>,
    workers: u32,
    results: Aggregate,
}

/// What happened to an arriving partial result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arrival {
    Accepted,
    /// The partition already has a result; the first one wins.
    Duplicate,
}

impl AssignmentTable {
    /// Partitions `0..partitions` queued in order, for `workers` workers.
    pub fn new(partitions: u32, workers: u32) -> Self {
        AssignmentTable {
            total: partitions,
            queue: (0..partitions).collect(),
            in_flight: BTreeMap::new(),
            failed: BTreeSet::new(),
            workers,
            results: Aggregate::new(),
        }
    }

    /// Hand the next queued partition to `worker`.
    pub fn assign_next(&mut self, worker: u32) -> Option<u32> {
        if self.failed.contains(&worker) {
            return None;
        }
        let pid = self.queue.pop_front()?;
        self.in_flight.entry(worker).or_default().push(pid);
        Some(pid)
    }

    pub fn in_flight(&self, worker: u32) -> &[u32] {
        self.in_flight.get(&worker).map_or(&[], Vec::as_slice)
    }

    pub fn queued(&self) -> Vec<u32> {
        self.queue.iter().copied().collect()
    }

    pub fn record_result(
        &mut self,
        worker: u32,
        partial: PartialResult,
    ) -> Result<Arrival, PartitionError> {
        let pid = partial.partition_id;
        if pid >= self.total {
            return Err(PartitionError::UnexpectedPartition(pid));
        }
        if let Some(list) = self.in_flight.get_mut(&worker) {
            list.retain(|&p| p != pid);
        }
        if self.results.contains(pid) {
            return Ok(Arrival::Duplicate);
        }
        // A reassigned partition may still be queued or in flight elsewhere.
        self.queue.retain(|&p| p != pid);
        self.results.insert(partial)?;
        Ok(Arrival::Accepted)
    }

    /// Put `worker`'s in-flight partitions back at the head of the queue,
    /// in their original order, and stop assigning to it. Fails once no
    /// live worker remains while work is unfinished.
    pub fn reassign_on_failure(&mut self, worker: u32) -> Result<Vec<u32>, JobError> {
        self.failed.insert(worker);
        let mut returned = self.in_flight.remove(&worker).unwrap_or_default();
        returned.retain(|&p| !self.results.contains(p));
        for &pid in returned.iter().rev() {
            self.queue.push_front(pid);
        }
        if self.live_workers() == 0 && !self.is_complete() {
            return Err(JobError::AllWorkersFailed(self.unfinished()));
        }
        Ok(returned)
    }

    pub fn live_workers(&self) -> u32 {
        self.workers - self.failed.len() as u32
    }

    pub fn is_failed(&self, worker: u32) -> bool {
        self.failed.contains(&worker)
    }

    pub fn is_complete(&self) -> bool {
        self.results.len() as u32 == self.total
    }

    pub fn unfinished(&self) -> Vec<u32> {
        (0..self.total)
            .filter(|&p| !self.results.contains(p))
            .collect()
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn into_results(self) -> Aggregate {
        self.results
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitioning::PhaseDurations;

    fn partial(pid: u32, worker: u32) -> PartialResult {
        PartialResult {
            partition_id: pid,
            worker_id: worker,
            statuses: Vec::new(),
            phase_durations: PhaseDurations::default(),
            wall_ms: None,
        }
    }

    #[test]
    fn failed_partition_requeued_at_head() {
        let mut t = AssignmentTable::new(4, 2);
        assert_eq!(t.assign_next(0), Some(0));
        assert_eq!(t.assign_next(1), Some(1));
        assert_eq!(t.reassign_on_failure(0).unwrap(), vec![0]);
        assert_eq!(t.queued(), vec![0, 2, 3]);
        assert_eq!(t.assign_next(0), None);
        assert_eq!(t.assign_next(1), Some(0));
    }

    #[test]
    fn late_duplicate_is_discarded() {
        let mut t = AssignmentTable::new(2, 2);
        t.assign_next(0);
        t.reassign_on_failure(0).unwrap();
        t.assign_next(1);
        assert_eq!(
            t.record_result(1, partial(0, 1)).unwrap(),
            Arrival::Accepted
        );
        let mut late = partial(0, 0);
        late.phase_durations.execution = 99;
        assert_eq!(t.record_result(0, late).unwrap(), Arrival::Duplicate);
        t.assign_next(1);
        t.record_result(1, partial(1, 1)).unwrap();
        assert!(t.is_complete());
        let combined = t.into_results().finish(2).unwrap();
        assert_eq!(combined.partials[0].phase_durations.execution, 0);
    }

    #[test]
    fn all_workers_failing_aborts() {
        let mut t = AssignmentTable::new(3, 2);
        t.assign_next(0);
        t.assign_next(1);
        t.record_result(1, partial(1, 1)).unwrap();
        t.reassign_on_failure(1).unwrap();
        match t.reassign_on_failure(0) {
            Err(JobError::AllWorkersFailed(unfinished)) => assert_eq!(unfinished, vec![0, 2]),
            other => panic!("{other:?}"),
        }
    }
}
