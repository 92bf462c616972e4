use crate::bounds::total_queue_bound;
use crate::policies::{
    derive_params, BatchingParams, MaxWeight, PeriodReport, Policy, PolicyParams, StandardBatching,
    ThreePhase,
};
use crate::switch::{
    ArrivalConfig, ArrivalSource, BernoulliArrivals, NoArrivals, QueueMatrix, SwitchState,
};

use super::config::{ArrivalMode, ExperimentConfig, PolicyKind};
use super::monitors::{BatchEvents, BatchMonitor};
use super::HarnessError;

/// Violation messages kept per record; the count is always exact.
pub const MAX_VIOLATION_MESSAGES: usize = 64;

/// Per-period scalars. `W`/`H` are observed for every policy; the backlog
/// fields exist only for policies that report periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodRow {
    pub k: u64,
    pub w: bool,
    pub h: bool,
    pub report: Option<PeriodReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean_total_queue: f64,
    pub max_total_queue: u64,
    /// Mean of `B_k` over reported periods; 0 when none were reported.
    pub time_avg_backlog: f64,
    pub frac_uk_pos: f64,
    pub frac_w: f64,
    pub frac_h: f64,
    pub wasted_service: u64,
    pub bound_3nd: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub policy: PolicyKind,
    pub n: usize,
    pub f_n: u64,
    pub seed: u64,
    pub params: PolicyParams,
    /// Total queued packets at the start of each slot `1 ..= horizon`.
    pub series: Vec<u64>,
    pub periods: Vec<PeriodRow>,
    /// Queue matrices at the end of each reported period, when enabled.
    pub snapshots: Vec<(u64, QueueMatrix)>,
    pub summary: Summary,
    /// Slots at which `Q = A - S` failed; included in `violation_count`.
    pub conservation_violations: u64,
    pub violation_count: u64,
    pub violations: Vec<String>,
}

impl MetricsRecord {
    pub fn horizon(&self) -> u64 {
        self.series.len() as u64
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count == 0
    }
}

/// Slots simulated per run: `periods` full service periods of the
/// three-phase policy, `periods * b + d`. Baselines use the same horizon.
pub fn horizon(params: &PolicyParams, periods: u64) -> u64 {
    periods * params.b + params.d
}

/// Independent arrival stream for `(n, f_n)`; shared by all policies so
/// that they see identical arrivals for a given seed.
pub fn arrival_stream(n: usize, f_n: u64) -> u64 {
    ((n as u64) << 32) | (f_n & 0xffff_ffff)
}

pub fn params_for(
    cfg: &ExperimentConfig,
    n: usize,
    f_n: u64,
) -> Result<PolicyParams, HarnessError> {
    let p = derive_params(n, f_n, cfg.c_b, cfg.c_d, cfg.c_s)?;
    if !p.constraints_ok && !cfg.relaxed {
        return Err(crate::policies::ParamError::ConstraintsViolated.into());
    }
    Ok(p)
}

fn build_policy(cfg: &ExperimentConfig, p: &PolicyParams) -> Box<dyn Policy> {
    match cfg.policy {
        PolicyKind::ThreePhase => Box::new(ThreePhase::new(*p)),
        PolicyKind::MaxWeight => Box::new(MaxWeight::new(p.n)),
        PolicyKind::StandardBatching => Box::new(StandardBatching::new(BatchingParams {
            n: p.n,
            batch_len: cfg.sb_batch.unwrap_or(p.b),
        })),
    }
}

fn build_source(
    cfg: &ExperimentConfig,
    n: usize,
    f_n: u64,
    seed: u64,
) -> Result<Box<dyn ArrivalSource>, HarnessError> {
    Ok(match cfg.arrivals {
        ArrivalMode::Bernoulli => {
            let a = ArrivalConfig::from_gap(n, f_n, seed)?;
            Box::new(BernoulliArrivals::from_config(&a, arrival_stream(n, f_n)))
        }
        ArrivalMode::None => Box::new(NoArrivals),
    })
}

struct Violations {
    count: u64,
    messages: Vec<String>,
}

impl Violations {
    fn push(&mut self, msg: String) {
        self.count += 1;
        if self.messages.len() < MAX_VIOLATION_MESSAGES {
            self.messages.push(msg);
        }
    }
}

/// Checks applied to every period report of a batching policy.
fn check_report(
    r: &PeriodReport,
    n: usize,
    batch_len: u64,
    events: Option<BatchEvents>,
    three_phase: bool,
    v: &mut Violations,
) {
    let k = r.period;
    let u = r.newly_backlogged;
    if u != r.planned_residual {
        v.push(format!(
            "period {k}: U_k = {u} but the truncated plan leaves {}",
            r.planned_residual
        ));
    }
    if r.clearance_time <= r.clearing_budget && u != 0 {
        v.push(format!(
            "period {k}: U_k = {u} although clearance time {} fits budget {}",
            r.clearance_time, r.clearing_budget
        ));
    }
    let cap = (n * n) as u64 * batch_len;
    if u > cap {
        v.push(format!(
            "period {k}: U_k = {u} exceeds n^2 * batch length = {cap}"
        ));
    }
    if let Some(slots) = r.backlog_slots {
        let limit = (r.backlog_start + u).saturating_sub(slots);
        if r.backlog_end > limit {
            v.push(format!(
                "period {k}: B_(k+1) = {} > max(0, B_k + U_k - r) = {limit}",
                r.backlog_end
            ));
        }
    }
    if three_phase {
        if let Some(e) = events {
            if !e.w && !e.h && u != 0 {
                v.push(format!("period {k}: W = H = 0 but U_k = {u}"));
            }
        }
    }
}

/// Runs one replication of `cfg.policy` at `(n, f_n)` with `seed`.
///
/// Invariant failures are collected in the record rather than aborting the
/// run; only parameter and dimension errors are returned as `Err`.
pub fn run_replication(
    cfg: &ExperimentConfig,
    n: usize,
    f_n: u64,
    seed: u64,
) -> Result<MetricsRecord, HarnessError> {
    let params = params_for(cfg, n, f_n)?;
    let mut policy = build_policy(cfg, &params);
    let mut source = build_source(cfg, n, f_n, seed)?;
    run_with(cfg, params, policy.as_mut(), source.as_mut(), seed)
}

/// Runs a replication with an explicit policy and arrival source.
pub fn run_with(
    cfg: &ExperimentConfig,
    params: PolicyParams,
    policy: &mut dyn Policy,
    source: &mut dyn ArrivalSource,
    seed: u64,
) -> Result<MetricsRecord, HarnessError> {
    let n = params.n;
    let t_end = horizon(&params, cfg.periods);
    let three_phase = policy.name() == "three-phase";
    let batch_len = match cfg.policy {
        PolicyKind::StandardBatching => cfg.sb_batch.unwrap_or(params.b),
        _ => params.b,
    };
    let mut state = SwitchState::new(n);
    let mut monitor = BatchMonitor::new(n, params.b, params.d, params.s);
    let mut series = Vec::with_capacity(t_end as usize);
    let mut events: Vec<BatchEvents> = Vec::new();
    let mut reports: Vec<PeriodReport> = Vec::new();
    let mut snapshots = Vec::new();
    let mut v = Violations {
        count: 0,
        messages: Vec::new(),
    };
    let mut conservation_violations = 0;

    for _ in 0..t_end {
        series.push(state.total_queued());
        let decision = policy.begin_slot(&state);
        let tau = state.tau();
        let outcome = state.advance_slot(&decision.schedule, policy, source)?;
        if outcome.served + outcome.wasted > n as u64 {
            v.push(format!("slot {tau}: more than n connections used"));
        }
        if cfg.check_conservation {
            if let Err(e) = state.check_conservation() {
                conservation_violations += 1;
                v.push(e.to_string());
            }
        }
        if let Some(e) = monitor.observe(state.last_arrivals()) {
            events.push(e);
        }
        if let Some(r) = policy.end_slot(&state) {
            let ev = events.get(r.period as usize).copied();
            check_report(&r, n, batch_len, ev, three_phase, &mut v);
            if let Some(ledger) = policy.ledger() {
                if !ledger.consistent_with(state.queues()) {
                    v.push(format!(
                        "period {}: class ledger disagrees with queues",
                        r.period
                    ));
                }
            }
            if cfg.snapshot_period_boundaries {
                snapshots.push((r.period, state.queues().clone()));
            }
            reports.push(r);
        }
    }

    let periods: Vec<PeriodRow> = (0..cfg.periods)
        .map(|k| {
            let e = events.get(k as usize);
            PeriodRow {
                k,
                w: e.is_some_and(|e| e.w),
                h: e.is_some_and(|e| e.h),
                report: reports.iter().find(|r| r.period == k).copied(),
            }
        })
        .collect();
    let summary = summarize(&series, &periods, &params, state.wasted_service());
    Ok(MetricsRecord {
        policy: cfg.policy,
        n,
        f_n: params.f_n,
        seed,
        params,
        series,
        periods,
        snapshots,
        summary,
        conservation_violations,
        violation_count: v.count,
        violations: v.messages,
    })
}

fn summarize(series: &[u64], periods: &[PeriodRow], p: &PolicyParams, wasted: u64) -> Summary {
    let len = series.len().max(1) as f64;
    let sum: u128 = series.iter().map(|&x| x as u128).sum();
    let reported: Vec<&PeriodReport> = periods.iter().filter_map(|r| r.report.as_ref()).collect();
    let frac = |count: usize, of: usize| {
        if of == 0 {
            0.0
        } else {
            count as f64 / of as f64
        }
    };
    Summary {
        mean_total_queue: sum as f64 / len,
        max_total_queue: series.iter().copied().max().unwrap_or(0),
        time_avg_backlog: if reported.is_empty() {
            0.0
        } else {
            reported.iter().map(|r| r.backlog_start as f64).sum::<f64>() / reported.len() as f64
        },
        frac_uk_pos: frac(
            reported.iter().filter(|r| r.newly_backlogged > 0).count(),
            reported.len(),
        ),
        frac_w: frac(periods.iter().filter(|r| r.w).count(), periods.len()),
        frac_h: frac(periods.iter().filter(|r| r.h).count(), periods.len()),
        wasted_service: wasted,
        bound_3nd: total_queue_bound(p.n as u64, p.d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switch::ScriptedArrivals;

    fn relaxed(n: usize, periods: u64) -> ExperimentConfig {
        ExperimentConfig {
            n_list: vec![n],
            c_b: 4.0,
            c_d: 3.0,
            c_s: 1.0,
            periods,
            seeds: vec![1],
            relaxed: true,
            ..Default::default()
        }
    }

    #[test]
    fn zero_arrivals_keep_switch_empty() {
        let cfg = ExperimentConfig {
            arrivals: ArrivalMode::None,
            ..relaxed(3, 3)
        };
        let r = run_replication(&cfg, 3, 3, 1).unwrap();
        assert!(r.series.iter().all(|&x| x == 0));
        assert_eq!(r.summary.mean_total_queue, 0.0);
        assert!(r.is_clean(), "{:?}", r.violations);
        // Every batch is empty, so W fires and H does not.
        assert!(r.periods.iter().all(|p| p.w && !p.h));
    }

    #[test]
    fn strict_mode_rejects_relaxed_constants() {
        let cfg = ExperimentConfig {
            relaxed: false,
            ..relaxed(3, 1)
        };
        assert!(matches!(
            run_replication(&cfg, 3, 3, 1),
            Err(HarnessError::Param(
                crate::policies::ParamError::ConstraintsViolated
            ))
        ));
    }

    #[test]
    fn series_length_and_periods() {
        let cfg = relaxed(3, 4);
        let r = run_replication(&cfg, 3, 3, 9).unwrap();
        assert_eq!(r.horizon(), 4 * r.params.b + r.params.d);
        assert_eq!(r.periods.len(), 4);
        assert!(r.periods.iter().all(|p| p.report.is_some()));
        assert!(r.is_clean(), "{:?}", r.violations);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = relaxed(4, 3);
        let a = run_replication(&cfg, 4, 4, 5).unwrap();
        let b = run_replication(&cfg, 4, 4, 5).unwrap();
        let c = run_replication(&cfg, 4, 4, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn policies_share_arrivals() {
        let mut cfg = relaxed(3, 3);
        let tp = run_replication(&cfg, 3, 3, 2).unwrap();
        cfg.policy = PolicyKind::MaxWeight;
        let mw = run_replication(&cfg, 3, 3, 2).unwrap();
        cfg.policy = PolicyKind::StandardBatching;
        let sb = run_replication(&cfg, 3, 3, 2).unwrap();
        // W/H depend only on arrivals.
        let flags = |r: &MetricsRecord| r.periods.iter().map(|p| (p.w, p.h)).collect::<Vec<_>>();
        assert_eq!(flags(&tp), flags(&mw));
        assert_eq!(flags(&tp), flags(&sb));
        for r in [&tp, &mw, &sb] {
            assert!(r.is_clean(), "{}: {:?}", r.policy, r.violations);
        }
    }

    #[test]
    fn flooded_batch_is_backlogged_and_matches_plan() {
        // A dense first batch overwhelms ell = 11 slots at (3, 3, 4, 3, 1).
        let cfg = relaxed(3, 3);
        let p = params_for(&cfg, 3, 3).unwrap();
        assert_eq!((p.b, p.d, p.s, p.ell, p.r), (40, 18, 33, 11, 7));
        let script = (0..p.b).map(|_| vec![1u8; 9]).collect::<Vec<_>>();
        let mut policy = ThreePhase::new(p);
        let mut src = ScriptedArrivals::new(script);
        let r = run_with(&cfg, p, &mut policy, &mut src, 0).unwrap();
        assert!(r.is_clean(), "{:?}", r.violations);
        let first = r.periods[0].report.unwrap();
        assert!(first.newly_backlogged > 0);
        assert_eq!(first.newly_backlogged, first.planned_residual);
        assert!(r.periods[0].h);
        assert!(r.summary.frac_uk_pos > 0.0);
    }
}
