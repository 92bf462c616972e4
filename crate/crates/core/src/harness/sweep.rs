use rayon::prelude::*;

use crate::bounds::growth_envelope;

use super::config::ExperimentConfig;
use super::run::{run_replication, MetricsRecord};
use super::HarnessError;

/// One replication's line in the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub f_n: u64,
    pub seed: u64,
    pub mean_total_queue: f64,
    pub max_total_queue: u64,
    pub time_avg_b: f64,
    pub frac_uk_pos: f64,
    pub frac_wk: f64,
    pub frac_hk: f64,
    pub wasted_service: u64,
    pub bound_3nd: u64,
    /// `n^1.5 f_n ln f_n`, the growth envelope with unit constant.
    pub envelope_value: f64,
}

impl SweepRow {
    pub fn from_record(r: &MetricsRecord) -> Self {
        let s = &r.summary;
        Self {
            n: r.n,
            f_n: r.f_n,
            seed: r.seed,
            mean_total_queue: s.mean_total_queue,
            max_total_queue: s.max_total_queue,
            time_avg_b: s.time_avg_backlog,
            frac_uk_pos: s.frac_uk_pos,
            frac_wk: s.frac_w,
            frac_hk: s.frac_h,
            wasted_service: s.wasted_service,
            bound_3nd: s.bound_3nd,
            envelope_value: growth_envelope(r.n as u64, r.f_n, 1.0f64).value,
        }
    }
}

/// Across-seed aggregate for one `(n, f_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub f_n: u64,
    pub seeds: usize,
    /// Mean over seeds of each run's time-average total queue.
    pub mean_total_queue: f64,
    pub max_total_queue: u64,
    /// Standard error of `mean_total_queue` across seeds; 0 for one seed.
    pub std_error: f64,
    pub envelope_value: f64,
    /// `mean_total_queue / envelope_value`.
    pub ratio: f64,
}

/// Least-squares fit of `ln y = alpha ln x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub alpha: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub points: Vec<SweepPoint>,
    pub fit: Option<PowerFit>,
    /// Why the fit is missing, when it is.
    pub notice: Option<String>,
    pub violation_count: u64,
    pub violations: Vec<String>,
}

/// Fits a power law through `(x, y)` pairs. Needs two distinct positive
/// `x` values; pairs with non-positive coordinates are rejected.
pub fn fit_power_law(xy: &[(f64, f64)]) -> Result<PowerFit, String> {
    if let Some(&(x, y)) = xy.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(format!("cannot take logs of point ({x}, {y})"));
    }
    let pts: Vec<(f64, f64)> = xy.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if pts.len() < 2 || sxx <= 0.0 {
        return Err(format!(
            "exponent fit needs at least 2 distinct n values, got {}",
            {
                let mut xs: Vec<f64> = xy.iter().map(|p| p.0).collect();
                xs.sort_by(f64::total_cmp);
                xs.dedup();
                xs.len()
            }
        ));
    }
    let alpha = sxy / sxx;
    Ok(PowerFit {
        alpha,
        intercept: my - alpha * mx,
        points: pts.len(),
    })
}

/// Groups rows by `(n, f_n)` in first-appearance order.
pub fn aggregate(rows: &[SweepRow]) -> Vec<SweepPoint> {
    let mut keys: Vec<(usize, u64)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.n, r.f_n)) {
            keys.push((r.n, r.f_n));
        }
    }
    keys.into_iter()
        .map(|(n, f_n)| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.n == n && r.f_n == f_n).collect();
            let k = group.len() as f64;
            let mean = group.iter().map(|r| r.mean_total_queue).sum::<f64>() / k;
            let std_error = if group.len() > 1 {
                let var = group
                    .iter()
                    .map(|r| (r.mean_total_queue - mean).powi(2))
                    .sum::<f64>()
                    / (k - 1.0);
                (var / k).sqrt()
            } else {
                0.0
            };
            let envelope_value = growth_envelope(n as u64, f_n, 1.0f64).value;
            SweepPoint {
                n,
                f_n,
                seeds: group.len(),
                mean_total_queue: mean,
                max_total_queue: group.iter().map(|r| r.max_total_queue).max().unwrap_or(0),
                std_error,
                envelope_value,
                ratio: mean / envelope_value,
            }
        })
        .collect()
}

/// Fit of mean total queue against `n` over the aggregated points.
pub fn fit_points(points: &[SweepPoint]) -> Result<PowerFit, String> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.n as f64, p.mean_total_queue))
        .collect();
    fit_power_law(&xy)
}

/// Runs `f` over `items` on a pool of `threads` workers (0 picks the
/// default), returning results in input order.
pub fn par_map<T, R, F>(threads: usize, items: &[T], f: F) -> Result<Vec<R>, HarnessError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Runs every `(n, f_n, seed)` replication of `cfg` and fits the growth
/// exponent of the mean total queue in `n`.
///
/// Rows come back in `(n_list, seeds)` order whatever the thread count, so
/// the output is independent of scheduling.
pub fn sweep_and_fit(cfg: &ExperimentConfig) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    let tasks: Vec<(usize, u64, u64)> = cfg
        .points()?
        .into_iter()
        .flat_map(|(n, f)| cfg.seeds.iter().map(move |&s| (n, f, s)))
        .collect();
    let results = par_map(cfg.threads, &tasks, |&(n, f, s)| {
        run_replication(cfg, n, f, s).map(|r| {
            let msgs: Vec<String> = r
                .violations
                .iter()
                .map(|m| format!("n={n} f_n={f} seed={s}: {m}"))
                .collect();
            (SweepRow::from_record(&r), r.violation_count, msgs)
        })
    })?;
    let mut rows = Vec::with_capacity(results.len());
    let mut violation_count = 0;
    let mut violations = Vec::new();
    for res in results {
        let (row, count, msgs) = res?;
        rows.push(row);
        violation_count += count;
        violations.extend(msgs);
    }
    let points = aggregate(&rows);
    let (fit, notice) = match fit_points(&points) {
        Ok(f) => (Some(f), None),
        Err(msg) => (None, Some(msg)),
    };
    Ok(SweepResult {
        rows,
        points,
        fit,
        notice,
        violation_count,
        violations,
    })
}
