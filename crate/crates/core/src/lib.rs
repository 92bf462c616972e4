//! Simulation of an `n x n` input-queued switch under batch scheduling.
//!
//! Queue dynamics use integer packet counts. Analytical bounds and fits are
//! generic over [`Real`]; the aliases below fix them to `f64`.

pub mod bounds;
pub mod clearing;
pub mod harness;
pub mod matching;
pub mod policies;
pub mod scalar;
pub mod switch;

pub use bounds::{BoundsError, Envelope, GG1Params};
pub use clearing::{
    clearing_plan, min_clearance_time, replay, truncated_clear, ClearancePlan, ClearingError,
    ScheduleBlock, TruncatedClear,
};
pub use harness::{
    run_replication, sweep_and_fit, ExperimentConfig, HarnessError, MetricsRecord, PolicyKind,
    SweepResult,
};
pub use policies::{
    derive_params, evaluate_params, maxweight_schedule, MaxWeight, ParamError, Policy,
    PolicyParams, StandardBatching, ThreePhase,
};
pub use scalar::Real;
pub use switch::{ArrivalConfig, QueueMatrix, Schedule, SlotOutcome, SwitchError, SwitchState};

/// G/G/1 parameters in double precision.
pub type Gg1 = GG1Params<f64>;
/// Growth envelope in double precision.
pub type Envelope64 = Envelope<f64>;
