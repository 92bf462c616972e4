use crate::clearing::truncated_clear;
use crate::switch::{ClassAccounting, Schedule, SwitchState};

use super::baselines::backlog_schedule;
use super::ledger::{BatchLedger, Class};
use super::params::PolicyParams;
use super::phase::{phase_of, round_robin_schedule, Phase, PhaseTag};
use super::{PeriodReport, PlanCursor, Policy, Service, SlotDecision};

/// Three-phase batching policy.
///
/// Batch `k` arrives during slots `kb+1 ..= (k+1)b`. Its service period
/// starts `d` slots in: round-robin over the `n` cyclic shifts until the
/// batch has fully arrived, then an optimal clearing plan truncated to
/// `ell` slots, then `r` slots in which only backlogged packets are served.
/// Whatever the clearing phase leaves behind joins the backlog.
pub struct ThreePhase {
    params: PolicyParams,
    ledger: BatchLedger,
    shifts: Vec<Schedule>,
    tag: PhaseTag,
    plan: PlanCursor,
    planned_residual: u64,
    clearance_time: u64,
    wasted_at_start: u64,
}

impl ThreePhase {
    pub fn new(params: PolicyParams) -> Self {
        let n = params.n;
        Self {
            params,
            ledger: BatchLedger::new(n),
            shifts: (1..=n).map(|m| round_robin_schedule(m, n)).collect(),
            tag: PhaseTag {
                period: 0,
                phase: Phase::PreService,
                slot_in_phase: 0,
            },
            plan: PlanCursor::default(),
            planned_residual: 0,
            clearance_time: 0,
            wasted_at_start: 0,
        }
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    /// Phase of the slot most recently started.
    pub fn current_phase(&self) -> PhaseTag {
        self.tag
    }
}

impl ClassAccounting for ThreePhase {
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

impl Policy for ThreePhase {
    fn name(&self) -> &'static str {
        "three-phase"
    }

    fn begin_slot(&mut self, state: &SwitchState) -> SlotDecision {
        let n = self.params.n;
        self.tag = phase_of(state.tau(), &self.params);
        let m = self.tag.slot_in_phase;
        let (schedule, service, arrivals_to) = match self.tag.phase {
            Phase::PreService => (Schedule::empty(n), Service::Nothing, Class::Current),
            Phase::RoundRobin => {
                if m == 1 {
                    debug_assert_eq!(self.ledger.k, self.tag.period);
                    self.ledger.backlog_start = self.ledger.backlog.total();
                    self.wasted_at_start = state.wasted_service();
                }
                let s = self.shifts[((m - 1) % n as u64) as usize].clone();
                (s, Service::Class(Class::Current), Class::Current)
            }
            Phase::NormalClearing => {
                if m == 1 {
                    // Batch k has fully arrived; plan once from this snapshot.
                    let t = truncated_clear(&self.ledger.batch_cur, self.params.ell);
                    self.planned_residual = t.residual;
                    self.clearance_time = t.full_length;
                    self.plan = PlanCursor::new(t.blocks);
                }
                let s = self
                    .plan
                    .next_schedule()
                    .cloned()
                    .unwrap_or_else(|| Schedule::empty(n));
                (s, Service::Class(Class::Current), Class::Next)
            }
            Phase::BacklogClearing => (
                backlog_schedule(&self.ledger.backlog),
                Service::Class(Class::Backlog),
                Class::Next,
            ),
        };
        let serve = match service {
            Service::Class(c) => Some(c),
            _ => None,
        };
        self.ledger.route(serve, arrivals_to);
        SlotDecision {
            schedule,
            service,
            arrivals_to: Some(arrivals_to),
        }
    }

    fn end_slot(&mut self, state: &SwitchState) -> Option<PeriodReport> {
        let m = self.tag.slot_in_phase;
        match self.tag.phase {
            Phase::NormalClearing if m == self.params.ell => {
                let u = self.ledger.backlog_current();
                self.ledger.newly_backlogged = Some(u);
                None
            }
            Phase::BacklogClearing if m == self.params.r => {
                let report = PeriodReport {
                    period: self.ledger.k,
                    backlog_start: self.ledger.backlog_start,
                    newly_backlogged: self.ledger.newly_backlogged.unwrap_or(0),
                    backlog_end: self.ledger.backlog.total(),
                    planned_residual: self.planned_residual,
                    clearance_time: self.clearance_time,
                    clearing_budget: self.params.ell,
                    backlog_slots: Some(self.params.r),
                    wasted: state.wasted_service() - self.wasted_at_start,
                };
                self.ledger.promote();
                self.ledger.backlog_start = report.backlog_end;
                Some(report)
            }
            _ => None,
        }
    }

    fn ledger(&self) -> Option<&BatchLedger> {
        Some(&self.ledger)
    }
}
