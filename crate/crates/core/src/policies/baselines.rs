use crate::clearing::truncated_clear;
use crate::matching;
use crate::switch::{ClassAccounting, QueueMatrix, Schedule, SwitchState};

use super::ledger::{BatchLedger, Class};
use super::{PeriodReport, PlanCursor, Policy, Service, SlotDecision};

/// Maximum-cardinality matching on the positive cells of `backlog`.
///
/// Any maximum matching is maximal, so at least one backlogged packet is
/// served whenever one exists.
pub fn backlog_schedule(backlog: &QueueMatrix) -> Schedule {
    let n = backlog.n();
    if backlog.is_zero() {
        return Schedule::empty(n);
    }
    let adj = matching::support_graph(n, |i, j| backlog.get(i, j) > 0);
    Schedule::from_assignment(matching::max_cardinality(&adj, n, None))
        .expect("matching output is a valid schedule")
}

/// Schedule maximizing the total matched queue length. Ties go to the
/// lexicographically smallest 0/1 matrix in row-major order.
pub fn maxweight_schedule(q: &QueueMatrix) -> Schedule {
    Schedule::from_assignment(matching::max_weight_lexmin(q.n(), q.cells()))
        .expect("matching output is a valid schedule")
}

/// MaxWeight: every slot, serve the max-weight matching of the full queues.
pub struct MaxWeight {
    n: usize,
}

impl MaxWeight {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl ClassAccounting for MaxWeight {}

impl Policy for MaxWeight {
    fn name(&self) -> &'static str {
        "maxweight"
    }

    fn begin_slot(&mut self, state: &SwitchState) -> SlotDecision {
        debug_assert_eq!(state.n(), self.n);
        SlotDecision {
            schedule: maxweight_schedule(state.queues()),
            service: Service::WholeQueue,
            arrivals_to: None,
        }
    }

    fn end_slot(&mut self, _state: &SwitchState) -> Option<PeriodReport> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchingParams {
    pub n: usize,
    /// Length of each arrival window and of each drain window.
    pub batch_len: u64,
}

/// Standard batching with a fixed batch length.
///
/// Batch `k` arrives during slots `kB+1 ..= (k+1)B` and is not touched until
/// it has fully arrived. It is then drained during the next `B` slots by an
/// optimal clearing plan; once the plan is exhausted the remaining slots of
/// the window serve the backlog. Whatever is left of the batch at the end of
/// its drain window is backlogged.
pub struct StandardBatching {
    params: BatchingParams,
    ledger: BatchLedger,
    window: Option<(u64, u64)>,
    plan: PlanCursor,
    planned_residual: u64,
    clearance_time: u64,
    wasted_at_start: u64,
}

impl StandardBatching {
    pub fn new(params: BatchingParams) -> Self {
        assert!(params.batch_len >= 1, "batch length must be positive");
        Self {
            params,
            ledger: BatchLedger::new(params.n),
            window: None,
            plan: PlanCursor::default(),
            planned_residual: 0,
            clearance_time: 0,
            wasted_at_start: 0,
        }
    }

    pub fn params(&self) -> &BatchingParams {
        &self.params
    }
}

impl ClassAccounting for StandardBatching {
    #[inline]
    fn eligible(&self, i: usize, j: usize, queued: u64) -> u64 {
        self.ledger.eligible(i, j, queued)
    }

    #[inline]
    fn on_served(&mut self, i: usize, j: usize) {
        self.ledger.on_served(i, j)
    }

    #[inline]
    fn on_arrival(&mut self, i: usize, j: usize) {
        self.ledger.on_arrival(i, j)
    }
}

impl Policy for StandardBatching {
    fn name(&self) -> &'static str {
        "standard-batching"
    }

    fn begin_slot(&mut self, state: &SwitchState) -> SlotDecision {
        let n = self.params.n;
        let len = self.params.batch_len;
        let tau = state.tau();
        if tau <= len {
            self.window = None;
            self.ledger.route(None, Class::Current);
            return SlotDecision {
                schedule: Schedule::empty(n),
                service: Service::Nothing,
                arrivals_to: Some(Class::Current),
            };
        }
        let since = tau - len - 1;
        let (k, m) = (since / len, since % len + 1);
        self.window = Some((k, m));
        if m == 1 {
            debug_assert_eq!(self.ledger.k, k);
            self.ledger.backlog_start = self.ledger.backlog.total();
            self.wasted_at_start = state.wasted_service();
            let t = truncated_clear(&self.ledger.batch_cur, len);
            self.planned_residual = t.residual;
            self.clearance_time = t.full_length;
            self.plan = PlanCursor::new(t.blocks);
        }
        let (schedule, class) = match self.plan.next_schedule() {
            Some(s) => (s.clone(), Class::Current),
            None => (backlog_schedule(&self.ledger.backlog), Class::Backlog),
        };
        self.ledger.route(Some(class), Class::Next);
        SlotDecision {
            schedule,
            service: Service::Class(class),
            arrivals_to: Some(Class::Next),
        }
    }

    fn end_slot(&mut self, state: &SwitchState) -> Option<PeriodReport> {
        let (k, m) = self.window?;
        if m != self.params.batch_len {
            return None;
        }
        let u = self.ledger.backlog_current();
        let report = PeriodReport {
            period: k,
            backlog_start: self.ledger.backlog_start,
            newly_backlogged: u,
            backlog_end: self.ledger.backlog.total(),
            planned_residual: self.planned_residual,
            clearance_time: self.clearance_time,
            clearing_budget: self.params.batch_len,
            backlog_slots: None,
            wasted: state.wasted_service() - self.wasted_at_start,
        };
        self.ledger.promote();
        Some(report)
    }

    fn ledger(&self) -> Option<&BatchLedger> {
        Some(&self.ledger)
    }
}
