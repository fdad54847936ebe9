use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{check_baseline, CostModel, JobError};
use crate::minilang::SourceProgram;
use crate::partitioning::{
    make_partitions, reduce, run_subtask, CombinedResult, DistributionStrategy, PartialResult,
    SubtaskOptions, TaskParameters,
};

/// One scheduled subtask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub partition_id: u32,
    pub start: u64,
    pub end: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    /// `timelines[w]` lists worker `w`'s subtasks in start order.
    pub timelines: Vec<Vec<TraceEntry>>,
    pub makespan: u64,
}

impl ScheduleTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// CSV with header `worker,partition,start,end`, ordered by worker then
    /// start time.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["worker", "partition", "start", "end"])?;
        for (worker, timeline) in self.timelines.iter().enumerate() {
            for e in timeline {
                w.write_record([
                    worker.to_string(),
                    e.partition_id.to_string(),
                    e.start.to_string(),
                    e.end.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Total busy time of each worker.
    pub fn busy(&self) -> Vec<u64> {
        self.timelines
            .iter()
            .map(|t| t.iter().map(|e| e.end - e.start).sum())
            .collect()
    }
}

/// Virtual cost of running a partial's subtask, excluding broadcast.
pub fn subtask_cost(partial: &PartialResult, cost: &CostModel) -> u64 {
    cost.subtask_startup + partial.phase_durations.total()
}

/// Greedy pull-based list scheduling: tasks are taken in order, each by the
/// worker that becomes idle first (lowest index on ties). A worker pays
/// `broadcast` once, on its first task.
pub fn list_schedule(task_costs: &[u64], workers: usize, broadcast: u64) -> ScheduleTrace {
    assert!(workers >= 1, "at least one worker is required");
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        (0..workers).map(|w| Reverse((0, w))).collect();
    let mut timelines = vec![Vec::new(); workers];
    let mut makespan = 0;
    for (pid, &cost) in task_costs.iter().enumerate() {
        let Reverse((free, w)) = heap.pop().expect("heap holds every worker");
        let charge = if timelines[w].is_empty() {
            broadcast
        } else {
            0
        };
        let end = free + charge + cost;
        timelines[w].push(TraceEntry {
            partition_id: pid as u32,
            start: free,
            end,
        });
        makespan = makespan.max(end);
        heap.push(Reverse((end, w)));
    }
    ScheduleTrace {
        timelines,
        makespan,
    }
}

/// Schedule already computed partials (indexed by partition id) on
/// `workers` simulated workers, and reduce them with the makespan as the
/// job duration.
pub fn schedule_partials(
    mut partials: Vec<PartialResult>,
    workers: usize,
    cost: &CostModel,
) -> Result<(CombinedResult, ScheduleTrace), JobError> {
    partials.sort_by_key(|p| p.partition_id);
    let costs: Vec<u64> = partials.iter().map(|p| subtask_cost(p, cost)).collect();
    let trace = list_schedule(&costs, workers, cost.broadcast_per_worker);
    for (w, timeline) in trace.timelines.iter().enumerate() {
        for e in timeline {
            partials[e.partition_id as usize].worker_id = w as u32;
        }
    }
    let n = partials.len() as u32;
    let mut combined = reduce(partials, n)?;
    combined.total_duration = trace.makespan;
    Ok((combined, trace))
}

/// Simulation settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedCluster {
    pub workers: usize,
    pub cost_model: CostModel,
}

/// Run every partition (in this process) and schedule the results on a
/// virtual cluster. Deterministic: the same inputs give the same trace.
pub fn simulate_job(
    program: &SourceProgram,
    params: &TaskParameters,
    strategy: DistributionStrategy,
    cluster: &SimulatedCluster,
    options: &SubtaskOptions,
) -> Result<(CombinedResult, ScheduleTrace), JobError> {
    if cluster.workers == 0 {
        return Err(JobError::Config(
            "a cluster needs at least one worker".into(),
        ));
    }
    check_baseline(program, params)?;
    let partitions = make_partitions(params, strategy, program)?;
    let partials = partitions
        .iter()
        .map(|p| run_subtask(p, program, params.step_limit, &cluster.cost_model, options))
        .collect::<Result<Vec<_>, _>>()?;
    schedule_partials(partials, cluster.workers, &cluster.cost_model)
}
