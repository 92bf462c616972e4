//! Scheduling policies.
//!
//! [`ThreePhase`] is the batching policy that starts serving a batch `d`
//! slots after it begins to arrive: round-robin over cyclic shifts while the
//! batch is still arriving, an optimal clearing plan once it has fully
//! arrived, then a short backlog-clearing phase. [`MaxWeight`] and
//! [`StandardBatching`] are baselines.

mod baselines;
mod ledger;
mod params;
mod phase;
mod three_phase;

pub use baselines::{
    backlog_schedule, maxweight_schedule, BatchingParams, MaxWeight, StandardBatching,
};
pub use ledger::{BatchLedger, Class};
pub use params::{
    derive_params, evaluate_params, Infeasibility, ParamError, ParamEvaluation, PolicyParams,
};
pub use phase::{phase_of, round_robin_schedule, Phase, PhaseTag};
pub use three_phase::ThreePhase;

use crate::clearing::ScheduleBlock;
use crate::switch::{ClassAccounting, Schedule, SwitchState};

/// Which packets a slot's schedule may serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Service {
    Nothing,
    WholeQueue,
    Class(Class),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotDecision {
    pub schedule: Schedule,
    pub service: Service,
    /// Class that receives this slot's arrivals; `None` for classless
    /// policies.
    pub arrivals_to: Option<Class>,
}

/// Per-period summary emitted by the batching policies when a service
/// period ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodReport {
    pub period: u64,
    /// `B_k`: backlog when the period started.
    pub backlog_start: u64,
    /// `U_k`: packets of batch `k` left unserved after normal clearing.
    pub newly_backlogged: u64,
    /// `B_{k+1}`: backlog when the period ended.
    pub backlog_end: u64,
    /// Residual predicted by truncating the clearing plan; equals `U_k` when
    /// the batch classes were accounted correctly.
    pub planned_residual: u64,
    /// Minimum clearance time of the batch when clearing started.
    pub clearance_time: u64,
    /// Budget the clearing plan was truncated to.
    pub clearing_budget: u64,
    /// Slots reserved for serving only the backlog, when the policy has such
    /// a phase.
    pub backlog_slots: Option<u64>,
    /// Matched-but-idle service during the period.
    pub wasted: u64,
}

pub trait Policy: ClassAccounting + Send {
    fn name(&self) -> &'static str;

    /// Decides the schedule for slot `state.tau()` and routes service and
    /// arrivals for it.
    fn begin_slot(&mut self, state: &SwitchState) -> SlotDecision;

    /// Bookkeeping after the slot completed (`state.tau()` has advanced).
    fn end_slot(&mut self, state: &SwitchState) -> Option<PeriodReport>;

    fn ledger(&self) -> Option<&BatchLedger> {
        None
    }
}

/// Lazily walks a block-form schedule sequence one slot at a time.
#[derive(Debug, Clone, Default)]
pub(crate) struct PlanCursor {
    blocks: Vec<ScheduleBlock>,
    block: usize,
    used: u64,
}

impl PlanCursor {
    pub(crate) fn new(blocks: Vec<ScheduleBlock>) -> Self {
        Self {
            blocks,
            block: 0,
            used: 0,
        }
    }

    pub(crate) fn next_schedule(&mut self) -> Option<&Schedule> {
        while self.block < self.blocks.len() && self.used >= self.blocks[self.block].repeat {
            self.block += 1;
            self.used = 0;
        }
        let b = self.blocks.get(self.block)?;
        self.used += 1;
        Some(&b.schedule)
    }
}
