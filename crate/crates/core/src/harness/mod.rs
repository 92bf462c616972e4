//! Experiment orchestration: replications, arrival-event monitors, sweeps
//! with exponent fits, and CSV output.

mod config;
mod monitors;
mod output;
mod run;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ArrivalMode, ExperimentConfig, FnRule, PolicyKind, CONFIG_KEYS};
pub use monitors::{monitor_h, monitor_w, BatchEvents, BatchMonitor};
pub use output::{
    read_sweep_csv, write_fit_csv, write_periods_csv, write_series_csv, write_snapshots,
    write_summary_csv, write_sweep_csv, PERIOD_COLUMNS, SUMMARY_COLUMNS, SWEEP_COLUMNS,
};
pub use run::{
    arrival_stream, horizon, params_for, run_replication, run_with, MetricsRecord, PeriodRow,
    Summary, MAX_VIOLATION_MESSAGES,
};
pub use sweep::{
    aggregate, fit_points, fit_power_law, par_map, sweep_and_fit, PowerFit, SweepPoint,
    SweepResult, SweepRow,
};

use crate::policies::ParamError;
use crate::switch::SwitchError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Csv { path: PathBuf, msg: String },
}
