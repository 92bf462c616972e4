//! CSV writers and readers. Column order is fixed; floats are written in
//! shortest round-trip form so files are byte-stable.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::run::MetricsRecord;
use super::sweep::{PowerFit, SweepPoint, SweepRow};
use super::HarnessError;

pub const SWEEP_COLUMNS: [&str; 12] = [
    "n",
    "f_n",
    "seed",
    "mean_total_queue",
    "max_total_queue",
    "time_avg_B",
    "frac_Uk_pos",
    "frac_Wk",
    "frac_Hk",
    "wasted_service",
    "bound_3nd",
    "envelope_value",
];

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "n",
    "f_n",
    "seeds",
    "mean_total_queue",
    "max_total_queue",
    "std_error",
    "envelope_value",
    "ratio",
];

pub const PERIOD_COLUMNS: [&str; 10] = [
    "k",
    "W_k",
    "H_k",
    "B_k",
    "U_k",
    "B_next",
    "planned_residual",
    "clearance_time",
    "clearing_budget",
    "wasted_service",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Csv {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<(), HarnessError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn flag(b: bool) -> String {
    (b as u8).to_string()
}

fn sweep_fields(r: &SweepRow) -> Vec<String> {
    vec![
        r.n.to_string(),
        r.f_n.to_string(),
        r.seed.to_string(),
        r.mean_total_queue.to_string(),
        r.max_total_queue.to_string(),
        r.time_avg_b.to_string(),
        r.frac_uk_pos.to_string(),
        r.frac_wk.to_string(),
        r.frac_hk.to_string(),
        r.wasted_service.to_string(),
        r.bound_3nd.to_string(),
        r.envelope_value.to_string(),
    ]
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<(), HarnessError> {
    write_table(path, &SWEEP_COLUMNS, rows.iter().map(sweep_fields))
}

pub fn write_summary_csv(points: &[SweepPoint], path: &Path) -> Result<(), HarnessError> {
    write_table(
        path,
        &SUMMARY_COLUMNS,
        points.iter().map(|p| {
            vec![
                p.n.to_string(),
                p.f_n.to_string(),
                p.seeds.to_string(),
                p.mean_total_queue.to_string(),
                p.max_total_queue.to_string(),
                p.std_error.to_string(),
                p.envelope_value.to_string(),
                p.ratio.to_string(),
            ]
        }),
    )
}

/// Writes the fit, or a header-only file when there is none.
pub fn write_fit_csv(fit: Option<&PowerFit>, path: &Path) -> Result<(), HarnessError> {
    write_table(
        path,
        &["alpha", "intercept", "points"],
        fit.map(|f| {
            vec![
                f.alpha.to_string(),
                f.intercept.to_string(),
                f.points.to_string(),
            ]
        }),
    )
}

pub fn write_series_csv(record: &MetricsRecord, path: &Path) -> Result<(), HarnessError> {
    write_table(
        path,
        &["tau", "total_queue"],
        record
            .series
            .iter()
            .enumerate()
            .map(|(i, q)| vec![(i + 1).to_string(), q.to_string()]),
    )
}

/// Per-period scalars; backlog columns are empty for policies without
/// periods.
pub fn write_periods_csv(record: &MetricsRecord, path: &Path) -> Result<(), HarnessError> {
    write_table(
        path,
        &PERIOD_COLUMNS,
        record.periods.iter().map(|p| {
            let mut row = vec![p.k.to_string(), flag(p.w), flag(p.h)];
            match &p.report {
                Some(r) => row.extend([
                    r.backlog_start.to_string(),
                    r.newly_backlogged.to_string(),
                    r.backlog_end.to_string(),
                    r.planned_residual.to_string(),
                    r.clearance_time.to_string(),
                    r.clearing_budget.to_string(),
                    r.wasted.to_string(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 7)),
            }
            row
        }),
    )
}

/// Queue matrices at period ends: a `period k` line, then the matrix in
/// its text form, then a blank line.
pub fn write_snapshots(record: &MetricsRecord, path: &Path) -> Result<(), HarnessError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    for (k, q) in &record.snapshots {
        writeln!(f, "period {k}\n{q}").map_err(io_err(path))?;
    }
    Ok(())
}

fn field<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    line: u64,
    idx: usize,
) -> Result<T, HarnessError> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|_| HarnessError::Csv {
        path: path.to_path_buf(),
        msg: format!(
            "line {line}: bad value {raw:?} in column {}",
            SWEEP_COLUMNS[idx]
        ),
    })
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?;
    if header.iter().ne(SWEEP_COLUMNS.iter().copied()) {
        return Err(HarnessError::Csv {
            path: path.to_path_buf(),
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(SweepRow {
            n: field(path, &rec, line, 0)?,
            f_n: field(path, &rec, line, 1)?,
            seed: field(path, &rec, line, 2)?,
            mean_total_queue: field(path, &rec, line, 3)?,
            max_total_queue: field(path, &rec, line, 4)?,
            time_avg_b: field(path, &rec, line, 5)?,
            frac_uk_pos: field(path, &rec, line, 6)?,
            frac_wk: field(path, &rec, line, 7)?,
            frac_hk: field(path, &rec, line, 8)?,
            wasted_service: field(path, &rec, line, 9)?,
            bound_3nd: field(path, &rec, line, 10)?,
            envelope_value: field(path, &rec, line, 11)?,
        });
    }
    Ok(rows)
}
