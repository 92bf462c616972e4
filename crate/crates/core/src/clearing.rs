//! Minimum clearance time and optimal clearing schedules.
//!
//! A queue matrix with largest row or column sum `L` can be emptied in
//! exactly `L` slots with no arrivals, and no faster. The plan is built by
//! padding the matrix up to an `L`-regular one (all row and column sums
//! equal to `L`), then repeatedly peeling a perfect matching off its
//! support. Each peeled matching is emitted as a block repeated as many
//! times as its smallest cell allows.

use thiserror::Error;

use crate::matching;
use crate::switch::{QueueMatrix, Schedule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClearingError {
    #[error("target length {target} is below the minimum clearance time {min}")]
    BelowMinimum { target: u64, min: u64 },
    #[error("matrix row/column sums are not all equal to a positive value")]
    NotRegular,
    #[error("no perfect matching on the support of a regular matrix")]
    NoPerfectMatching,
}

/// Largest row or column sum.
pub fn min_clearance_time(q: &QueueMatrix) -> u64 {
    let r = q.row_sums().into_iter().max().unwrap_or(0);
    let c = q.col_sums().into_iter().max().unwrap_or(0);
    r.max(c)
}

/// Smallest-effort padding of `q` to a matrix whose rows and columns all sum
/// to `target`.
///
/// Rows are visited in order; each deficient row is topped up against the
/// first columns that still have a deficit, adding the smaller of the two
/// deficits at once.
pub fn pad_to_regular(q: &QueueMatrix, target: u64) -> Result<QueueMatrix, ClearingError> {
    let min = min_clearance_time(q);
    if target < min {
        return Err(ClearingError::BelowMinimum { target, min });
    }
    let mut m = q.clone();
    let mut row_def: Vec<u64> = q.row_sums().iter().map(|r| target - r).collect();
    let mut col_def: Vec<u64> = q.col_sums().iter().map(|c| target - c).collect();
    let mut j = 0;
    for (i, def) in row_def.iter_mut().enumerate() {
        while *def > 0 {
            while col_def[j] == 0 {
                j += 1;
            }
            let add = (*def).min(col_def[j]);
            m.add(i, j, add);
            *def -= add;
            col_def[j] -= add;
        }
    }
    debug_assert!(col_def.iter().all(|&c| c == 0));
    Ok(m)
}

fn regular_sum(m: &QueueMatrix) -> Option<u64> {
    let rows = m.row_sums();
    let cols = m.col_sums();
    let l = rows[0];
    (l > 0 && rows.iter().chain(&cols).all(|&s| s == l)).then_some(l)
}

/// A full permutation supported on the positive entries of a sum-regular
/// matrix.
pub fn extract_perfect_matching(m: &QueueMatrix) -> Result<Schedule, ClearingError> {
    regular_sum(m).ok_or(ClearingError::NotRegular)?;
    perfect_matching_on_support(m, None)
}

fn perfect_matching_on_support(
    m: &QueueMatrix,
    hint: Option<&[Option<usize>]>,
) -> Result<Schedule, ClearingError> {
    let n = m.n();
    let adj = matching::support_graph(n, |i, j| m.get(i, j) > 0);
    let assign = matching::max_cardinality(&adj, n, hint);
    if assign.iter().any(Option::is_none) {
        return Err(ClearingError::NoPerfectMatching);
    }
    Ok(Schedule::from_assignment(assign).expect("matching output is a valid schedule"))
}

/// One schedule applied for `repeat` consecutive slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleBlock {
    pub schedule: Schedule,
    pub repeat: u64,
}

/// Optimal clearing plan for a queue matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClearancePlan {
    length: u64,
    blocks: Vec<ScheduleBlock>,
}

impl ClearancePlan {
    /// Number of slots the plan takes; equals the minimum clearance time.
    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn blocks(&self) -> &[ScheduleBlock] {
        &self.blocks
    }

    /// The flat slot-by-slot schedule sequence.
    pub fn iter(&self) -> impl Iterator<Item = &Schedule> + '_ {
        expand(&self.blocks)
    }

    pub fn schedules(&self) -> Vec<Schedule> {
        self.iter().cloned().collect()
    }

    /// The first `slots` schedules of the plan, still in block form.
    pub fn prefix(&self, slots: u64) -> Vec<ScheduleBlock> {
        let mut left = slots;
        let mut out = Vec::new();
        for b in &self.blocks {
            if left == 0 {
                break;
            }
            let take = b.repeat.min(left);
            out.push(ScheduleBlock {
                schedule: b.schedule.clone(),
                repeat: take,
            });
            left -= take;
        }
        out
    }
}

/// Flattens schedule blocks into one schedule per slot.
pub fn expand(blocks: &[ScheduleBlock]) -> impl Iterator<Item = &Schedule> + '_ {
    blocks
        .iter()
        .flat_map(|b| std::iter::repeat_n(&b.schedule, b.repeat as usize))
}

/// Builds an optimal clearing plan for `q`.
pub fn clearing_plan(q: &QueueMatrix) -> ClearancePlan {
    let length = min_clearance_time(q);
    let mut blocks = Vec::new();
    if length == 0 {
        return ClearancePlan { length, blocks };
    }
    let mut m = pad_to_regular(q, length).expect("target equals the minimum");
    let n = q.n();
    let mut hint: Option<Vec<Option<usize>>> = None;
    let mut left = length;
    while left > 0 {
        let perm = perfect_matching_on_support(&m, hint.as_deref())
            .expect("regular matrices always have a perfect matching on their support");
        let repeat = perm.pairs().map(|(i, j)| m.get(i, j)).min().unwrap_or(0);
        debug_assert!(repeat > 0);
        let mut next_hint = vec![None; n];
        for (i, j) in perm.pairs() {
            let v = m.get(i, j) - repeat;
            m.set(i, j, v);
            if v > 0 {
                next_hint[i] = Some(j);
            }
        }
        hint = Some(next_hint);
        left -= repeat;
        blocks.push(ScheduleBlock {
            schedule: perm,
            repeat,
        });
    }
    debug_assert!(m.is_zero());
    ClearancePlan { length, blocks }
}

/// Serves `q` with `blocks` (no arrivals), returning what is left.
pub fn replay(q: &QueueMatrix, blocks: &[ScheduleBlock]) -> QueueMatrix {
    let mut rest = q.clone();
    for b in blocks {
        for (i, j) in b.schedule.pairs() {
            let v = rest.get(i, j);
            rest.set(i, j, v.saturating_sub(b.repeat));
        }
    }
    rest
}

/// Clearing plan cut off after `budget` slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedClear {
    /// First `min(L, budget)` slots of the optimal plan.
    pub blocks: Vec<ScheduleBlock>,
    pub slots: u64,
    /// Packets of `q` still queued after those slots.
    pub residual: u64,
    /// Untruncated minimum clearance time `L`.
    pub full_length: u64,
}

impl TruncatedClear {
    pub fn iter(&self) -> impl Iterator<Item = &Schedule> + '_ {
        expand(&self.blocks)
    }
}

pub fn truncated_clear(q: &QueueMatrix, budget: u64) -> TruncatedClear {
    let plan = clearing_plan(q);
    let slots = plan.length().min(budget);
    let blocks = plan.prefix(slots);
    let residual = if slots == plan.length() {
        0
    } else {
        replay(q, &blocks).total()
    };
    TruncatedClear {
        blocks,
        slots,
        residual,
        full_length: plan.length(),
    }
}
