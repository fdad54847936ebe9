use serde::{Deserialize, Serialize};

use super::{MutantStatus, MutationError, Verdict};

/// Kill counts and the two scores derived from them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub killed: u64,
    pub live: u64,
    /// k / l; `None` when no mutant survived.
    pub ratio_killed_to_live: Option<f64>,
    /// k / (k + l), the headline score.
    pub ratio_killed_to_total: f64,
}

impl ScorePair {
    pub fn from_counts(killed: u64, live: u64) -> Self {
        let total = killed + live;
        ScorePair {
            killed,
            live,
            ratio_killed_to_live: (live > 0).then(|| killed as f64 / live as f64),
            ratio_killed_to_total: if total == 0 {
                0.0
            } else {
                killed as f64 / total as f64
            },
        }
    }
}

pub fn mutation_score(statuses: &[MutantStatus]) -> Result<ScorePair, MutationError> {
    if statuses.is_empty() {
        return Err(MutationError::EmptyStatuses);
    }
    let killed = statuses
        .iter()
        .filter(|s| s.verdict == Verdict::Killed)
        .count() as u64;
    Ok(ScorePair::from_counts(
        killed,
        statuses.len() as u64 - killed,
    ))
}
