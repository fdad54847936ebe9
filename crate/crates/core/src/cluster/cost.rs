use serde::{Deserialize, Serialize};

/// Virtual-time charges layered on top of measured interpreter steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Fixed cost of launching any subtask.
    pub subtask_startup: u64,
    /// Shipping the program to a worker, charged on its first assignment.
    pub broadcast_per_worker: u64,
    /// Per class on the classpath, per subtask.
    pub scan_cost: u64,
    /// Per ordered pair of classes, per subtask.
    pub depanalysis_cost: u64,
    /// Per mutant generated or rehydrated.
    pub generation_cost: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            subtask_startup: 50_000,
            broadcast_per_worker: 10_000,
            scan_cost: 100,
            depanalysis_cost: 5,
            generation_cost: 20,
        }
    }
}

impl CostModel {
    /// All constants zero: only interpreter steps count.
    pub fn zero() -> Self {
        CostModel {
            subtask_startup: 0,
            broadcast_per_worker: 0,
            scan_cost: 0,
            depanalysis_cost: 0,
            generation_cost: 0,
        }
    }
}
