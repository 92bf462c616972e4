//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::HashMap;
use std::time::Instant;

use iqswitch::bounds::{chernoff_lower, chernoff_upper, kingman_bound, lindley_step, GG1Params};
use iqswitch::clearing::{clearing_plan, min_clearance_time};
use iqswitch::harness::{
    aggregate, fit_points, par_map, run_replication, sweep_and_fit, write_fit_csv,
    write_summary_csv, write_sweep_csv, ExperimentConfig, FnRule, MetricsRecord, PolicyKind,
    SweepRow,
};
use iqswitch::policies::maxweight_schedule;
use iqswitch::switch::{is_valid_schedule, replication_rng};
use iqswitch::QueueMatrix;
use rand::distributions::{Bernoulli, Distribution};
use rand::Rng;

const C1_MATRICES: usize = 1000;
const C1_MAX_N: usize = 16;
const C1_MAX_ENTRY: u64 = 20;
const C2_MAX_N: usize = 3;
const C2_MAX_TOTAL: u64 = 6;
const C4_MATRICES: usize = 500;
const C4_MAX_ENTRY: u64 = 20;
const C5_SAMPLES: u32 = 100_000;
const C5_SE_MULT: f64 = 3.0;
const C6_SLOTS: u64 = 1_000_000;
const C7_N: usize = 25;
const C7_PERIODS: u64 = 10;
const C7_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const C8_NS: [usize; 3] = [25, 36, 49];
const C8_SEEDS: [u64; 3] = [1, 2, 3];
const C8_PERIODS: u64 = 3;
const C8_MAX_RATIO_SPREAD: f64 = 3.0;
const C8_MAX_ALPHA: f64 = 2.5 + 0.5;
const C10_WIDTHS: [usize; 3] = [1, 2, 4];
/// Pure-arithmetic slack for float comparisons.
const EPS: f64 = 1e-12;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Conservation bookkeeping over every simulation this suite runs.
#[derive(Default)]
struct Tally {
    runs: u64,
    slots: u64,
    violations: u64,
}

impl Tally {
    fn add(&mut self, r: &MetricsRecord) {
        self.runs += 1;
        self.slots += r.horizon();
        self.violations += r.conservation_violations;
    }
}

fn default_config(policy: PolicyKind, periods: u64, seeds: &[u64]) -> ExperimentConfig {
    ExperimentConfig {
        policy,
        n_list: vec![C7_N],
        fn_rule: FnRule::EqualsN,
        c_b: 31.0,
        c_d: 141.0,
        c_s: 30.0,
        periods,
        seeds: seeds.to_vec(),
        relaxed: false,
        threads: 0,
        ..Default::default()
    }
}

fn line_max(q: &QueueMatrix) -> u64 {
    let n = q.n();
    let rows = (0..n).map(|i| (0..n).map(|j| q.get(i, j)).sum::<u64>());
    let cols = (0..n).map(|j| (0..n).map(|i| q.get(i, j)).sum::<u64>());
    rows.chain(cols).max().unwrap_or(0)
}

fn c1_clearing_optimality() -> Verdict {
    let mut rng = replication_rng(1, 1);
    let mut ok = 0;
    let mut first_bad = None;
    for idx in 0..C1_MATRICES {
        let n = rng.gen_range(2..=C1_MAX_N);
        let q = QueueMatrix::from_fn(n, |_, _| rng.gen_range(0..=C1_MAX_ENTRY));
        let l = line_max(&q);
        let plan = clearing_plan(&q);
        let mut left = q.clone();
        let mut slots = 0u64;
        let mut valid = true;
        for s in plan.iter() {
            slots += 1;
            valid &= is_valid_schedule(&s.to_matrix());
            for (i, j) in s.pairs() {
                if left.get(i, j) > 0 {
                    left.dec(i, j);
                }
            }
        }
        if plan.length() == l && slots == l && valid && left.is_zero() {
            ok += 1;
        } else if first_bad.is_none() {
            first_bad = Some(idx);
        }
    }
    verdict(
        ok == C1_MATRICES,
        format!(
            "{ok}/{C1_MATRICES} random matrices cleared in exactly max line sum slots{}",
            first_bad.map_or(String::new(), |i| format!(", first failure #{i}"))
        ),
    )
}

fn brute_clear_time(q: &QueueMatrix, memo: &mut HashMap<Vec<u64>, u64>) -> u64 {
    if q.is_zero() {
        return 0;
    }
    if let Some(&v) = memo.get(q.cells()) {
        return v;
    }
    let n = q.n();
    let mut best = u64::MAX;
    // Enumerate every nonempty matching on the positive cells.
    type Frame = (usize, Vec<bool>, Vec<(usize, usize)>);
    let mut stack: Vec<Frame> = vec![(0, vec![false; n], vec![])];
    while let Some((i, used, pick)) = stack.pop() {
        if i == n {
            if !pick.is_empty() {
                let mut next = q.clone();
                for &(a, b) in &pick {
                    next.dec(a, b);
                }
                best = best.min(1 + brute_clear_time(&next, memo));
            }
            continue;
        }
        stack.push((i + 1, used.clone(), pick.clone()));
        for j in 0..n {
            if !used[j] && q.get(i, j) > 0 {
                let mut u = used.clone();
                u[j] = true;
                let mut p = pick.clone();
                p.push((i, j));
                stack.push((i + 1, u, p));
            }
        }
    }
    memo.insert(q.cells().to_vec(), best);
    best
}

/// Calls `f` on every `n x n` matrix whose entries sum to at most `max_total`.
fn for_each_matrix(n: usize, max_total: u64, f: &mut impl FnMut(&QueueMatrix)) {
    fn go(cells: &mut Vec<u64>, idx: usize, left: u64, n: usize, f: &mut impl FnMut(&QueueMatrix)) {
        if idx == cells.len() {
            f(&QueueMatrix::from_fn(n, |i, j| cells[i * n + j]));
            return;
        }
        for v in 0..=left {
            cells[idx] = v;
            go(cells, idx + 1, left - v, n, f);
        }
        cells[idx] = 0;
    }
    go(&mut vec![0; n * n], 0, max_total, n, f);
}

fn c2_clearing_lower_bound() -> Verdict {
    let mut checked = 0u64;
    let mut bad = 0u64;
    for n in 1..=C2_MAX_N {
        let mut memo = HashMap::new();
        for_each_matrix(n, C2_MAX_TOTAL, &mut |q| {
            checked += 1;
            if brute_clear_time(q, &mut memo) != min_clearance_time(q) {
                bad += 1;
            }
        });
    }
    verdict(
        bad == 0,
        format!("{checked} matrices with n <= {C2_MAX_N}, total <= {C2_MAX_TOTAL}; {bad} cleared faster than the max line sum"),
    )
}

fn c3_conservation(tally: &mut Tally) -> Verdict {
    // Small runs of every policy on top of the large runs already tallied.
    for policy in [
        PolicyKind::ThreePhase,
        PolicyKind::MaxWeight,
        PolicyKind::StandardBatching,
    ] {
        let cfg = ExperimentConfig {
            policy,
            n_list: vec![4],
            c_b: 4.0,
            c_d: 3.0,
            c_s: 1.0,
            periods: 120,
            relaxed: true,
            ..Default::default()
        };
        for seed in [1, 2] {
            match run_replication(&cfg, 4, 4, seed) {
                Ok(r) => tally.add(&r),
                Err(e) => return verdict(false, format!("{policy} run failed: {e}")),
            }
        }
    }
    verdict(
        tally.violations == 0,
        format!(
            "{} violations of Q = A - S over {} slots in {} runs (three-phase, maxweight, standard batching)",
            tally.violations, tally.slots, tally.runs
        ),
    )
}

fn all_matchings(n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut stack = vec![(0usize, vec![false; n], Vec::new())];
    while let Some((i, used, pick)) = stack.pop() {
        if i == n {
            out.push(pick);
            continue;
        }
        stack.push((i + 1, used.clone(), pick.clone()));
        for j in 0..n {
            if !used[j] {
                let mut u = used.clone();
                u[j] = true;
                let mut p = pick.clone();
                p.push((i, j));
                stack.push((i + 1, u, p));
            }
        }
    }
    out
}

fn c4_maxweight_oracle() -> Verdict {
    let all = all_matchings(4);
    let mut rng = replication_rng(4, 4);
    let mut ok = 0;
    for _ in 0..C4_MATRICES {
        let q = QueueMatrix::from_fn(4, |_, _| rng.gen_range(0..=C4_MAX_ENTRY));
        let best = all
            .iter()
            .map(|m| m.iter().map(|&(i, j)| q.get(i, j)).sum::<u64>())
            .max()
            .unwrap();
        if maxweight_schedule(&q).weight(&q) == best {
            ok += 1;
        }
    }
    verdict(
        ok == C4_MATRICES,
        format!(
            "{ok}/{C4_MATRICES} 4x4 matrices match the optimum over all {} matchings",
            all.len()
        ),
    )
}

fn c5_concentration() -> Verdict {
    let mut points = 0;
    let mut failures = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for (k, &m) in [100u32, 1000].iter().enumerate() {
        for (l, &p) in [0.1f64, 0.3, 0.5].iter().enumerate() {
            let dist = Bernoulli::new(p).unwrap();
            let mut rng = replication_rng(5, (k * 3 + l) as u64);
            let draws: Vec<u32> = (0..C5_SAMPLES)
                .map(|_| (0..m).map(|_| dist.sample(&mut rng) as u32).sum())
                .collect();
            let mean = m as f64 * p;
            let sigma = (mean * (1.0 - p)).sqrt();
            for mult in [0.5, 1.0, 2.0, 3.0] {
                let x = mult * sigma;
                let tails = [
                    (
                        "lower",
                        chernoff_lower(mean, x).unwrap(),
                        draws.iter().filter(|&&v| v as f64 <= mean - x).count(),
                    ),
                    (
                        "upper",
                        chernoff_upper(mean, x).unwrap(),
                        draws.iter().filter(|&&v| v as f64 >= mean + x).count(),
                    ),
                ];
                for (side, bound, hits) in tails {
                    points += 1;
                    let freq = hits as f64 / C5_SAMPLES as f64;
                    let se = (freq * (1.0 - freq) / C5_SAMPLES as f64).sqrt();
                    let margin = bound + C5_SE_MULT * se - freq;
                    worst_margin = worst_margin.min(margin);
                    if margin < 0.0 {
                        failures.push(format!("m={m} p={p} x={mult}sd {side}: {freq} > {bound}"));
                    }
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{}/{points} grid points (both tails) within bound + {C5_SE_MULT} SE; smallest margin {worst_margin:.4}{}",
            points - failures.len(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

/// Integer-valued arrivals and service for the G/G/1 oracle.
#[derive(Clone, Copy)]
enum Law {
    Binomial(u32, f64),
    Constant(u64),
}

impl Law {
    fn mean(self) -> f64 {
        match self {
            Law::Binomial(k, p) => k as f64 * p,
            Law::Constant(c) => c as f64,
        }
    }

    fn second_moment(self) -> f64 {
        match self {
            Law::Binomial(k, p) => k as f64 * p * (1.0 - p) + (k as f64 * p).powi(2),
            Law::Constant(c) => (c * c) as f64,
        }
    }

    fn sample<R: Rng>(self, rng: &mut R) -> u64 {
        match self {
            Law::Binomial(k, p) => (0..k).filter(|_| rng.gen_bool(p)).count() as u64,
            Law::Constant(c) => c,
        }
    }
}

fn c6_kingman() -> Verdict {
    use Law::*;
    let cases = [
        (Binomial(1, 0.3), Constant(1)),
        (Binomial(1, 0.1), Binomial(1, 0.2)),
        (Binomial(1, 0.3), Binomial(1, 0.4)),
        (Binomial(1, 0.5), Binomial(1, 0.6)),
        (Binomial(1, 0.7), Binomial(1, 0.8)),
        (Binomial(1, 0.85), Binomial(1, 0.9)),
        (Binomial(2, 0.4), Constant(1)),
        (Binomial(3, 0.3), Constant(1)),
        (Binomial(4, 0.45), Constant(2)),
        (Binomial(5, 0.5), Constant(3)),
    ];
    let mut lines = Vec::new();
    let mut all = true;
    for (idx, &(x, y)) in cases.iter().enumerate() {
        let p = GG1Params::new(x.mean(), x.second_moment(), y.mean(), y.second_moment()).unwrap();
        let bound = kingman_bound(&p).unwrap();
        let mut rng = replication_rng(6, idx as u64);
        let (mut z, mut sum) = (0u64, 0u128);
        for _ in 0..C6_SLOTS {
            sum += z as u128;
            z = lindley_step(z, x.sample(&mut rng), y.sample(&mut rng));
        }
        let avg = sum as f64 / C6_SLOTS as f64;
        let pass = avg <= bound + EPS;
        all &= pass;
        lines.push(format!(
            "{:.3}<={:.3}{}",
            avg,
            bound,
            if pass { "" } else { "!" }
        ));
    }
    verdict(
        all,
        format!(
            "10 parameterizations, time-average vs bound: {}",
            lines.join(" ")
        ),
    )
}

struct C7 {
    verdict: Verdict,
    means: Vec<f64>,
}

fn c7_policy_correctness(tally: &mut Tally) -> C7 {
    let cfg = default_config(PolicyKind::ThreePhase, C7_PERIODS, &C7_SEEDS);
    let runs = par_map(cfg.threads, &C7_SEEDS, |&s| {
        run_replication(&cfg, C7_N, C7_N as u64, s)
    })
    .and_then(|v| v.into_iter().collect::<Result<Vec<_>, _>>());
    let runs = match runs {
        Ok(r) => r,
        Err(e) => {
            return C7 {
                verdict: verdict(false, format!("run failed: {e}")),
                means: vec![],
            }
        }
    };
    let mut events = 0;
    let mut backlog = 0;
    let mut missing = 0;
    let mut other = 0;
    for r in &runs {
        tally.add(r);
        for p in &r.periods {
            events += (p.w || p.h) as u32;
            match &p.report {
                Some(rep) => {
                    backlog += (rep.newly_backlogged > 0
                        || rep.backlog_start > 0
                        || rep.backlog_end > 0) as u32
                }
                None => missing += 1,
            }
        }
        other += r.violation_count;
    }
    let horizon = runs[0].series.len();
    let mut worst = 0.0f64;
    for t in 0..horizon {
        let m = runs.iter().map(|r| r.series[t] as f64).sum::<f64>() / runs.len() as f64;
        worst = worst.max(m);
    }
    let bound = runs[0].summary.bound_3nd;
    let p = runs[0].params;
    let pass = events == 0 && backlog == 0 && missing == 0 && other == 0 && worst <= bound as f64;
    C7 {
        verdict: verdict(
            pass,
            format!(
                "n=f_n={C7_N} b={} d={}, {} seeds x {C7_PERIODS} periods: W/H events {events}, periods with backlog {backlog}, unreported periods {missing}, invariant violations {other}; max across-seed mean {worst:.0} <= 3nd {bound}",
                p.b, p.d, runs.len()
            ),
        ),
        means: runs.iter().map(|r| r.summary.mean_total_queue).collect(),
    }
}

fn c8_scaling(tally: &mut Tally) -> Verdict {
    let mut cfg = default_config(PolicyKind::ThreePhase, C8_PERIODS, &C8_SEEDS);
    cfg.n_list = C8_NS.to_vec();
    let tasks: Vec<(usize, u64)> = C8_NS
        .iter()
        .flat_map(|&n| C8_SEEDS.iter().map(move |&s| (n, s)))
        .collect();
    let res = par_map(cfg.threads, &tasks, |&(n, s)| {
        run_replication(&cfg, n, n as u64, s).map(|r| {
            // Keep only what the tally and the table need.
            let row = SweepRow::from_record(&r);
            (
                row,
                r.horizon(),
                r.conservation_violations,
                r.violation_count,
            )
        })
    });
    let res = match res.and_then(|v| v.into_iter().collect::<Result<Vec<_>, _>>()) {
        Ok(v) => v,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    let mut rows = Vec::new();
    let mut violations = 0;
    for (row, slots, cons, all) in res {
        tally.runs += 1;
        tally.slots += slots;
        tally.violations += cons;
        violations += all;
        rows.push(row);
    }
    let points = aggregate(&rows);
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    let spread = hi / lo;
    let fit = match fit_points(&points) {
        Ok(f) => f,
        Err(e) => return verdict(false, e),
    };
    let table = points
        .iter()
        .map(|p| {
            format!(
                "n={} mean={:.0}+-{:.0} ratio={:.4}",
                p.n, p.mean_total_queue, p.std_error, p.ratio
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        spread <= C8_MAX_RATIO_SPREAD && fit.alpha <= C8_MAX_ALPHA && violations == 0,
        format!(
            "{table}; ratio spread {spread:.3} (<= {C8_MAX_RATIO_SPREAD}), alpha {:.3} (<= {C8_MAX_ALPHA}), invariant violations {violations}",
            fit.alpha
        ),
    )
}

fn c9_baseline_ordering(tally: &mut Tally, three_phase_means: &[f64]) -> Verdict {
    let cfg = default_config(PolicyKind::StandardBatching, C7_PERIODS, &C7_SEEDS);
    let runs = par_map(cfg.threads, &C7_SEEDS, |&s| {
        run_replication(&cfg, C7_N, C7_N as u64, s)
    })
    .and_then(|v| v.into_iter().collect::<Result<Vec<_>, _>>());
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("run failed: {e}")),
    };
    if three_phase_means.len() != runs.len() {
        return verdict(false, "three-phase runs missing".into());
    }
    runs.iter().for_each(|r| tally.add(r));
    let sb: Vec<f64> = runs.iter().map(|r| r.summary.mean_total_queue).collect();
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (tp, sbm) = (avg(three_phase_means), avg(&sb));
    let paired = three_phase_means
        .iter()
        .zip(&sb)
        .filter(|(a, b)| a < b)
        .count();
    verdict(
        tp < sbm,
        format!(
            "time-average total queue, same {} seeds: three-phase {tp:.0} vs standard batching {sbm:.0} (lower in {paired}/{} paired runs)",
            sb.len(),
            sb.len()
        ),
    )
}

fn c10_determinism() -> Verdict {
    let cfg = ExperimentConfig {
        policy: PolicyKind::ThreePhase,
        n_list: vec![3, 4, 5],
        fn_rule: FnRule::EqualsN,
        c_b: 4.0,
        c_d: 3.0,
        c_s: 1.0,
        periods: 30,
        seeds: vec![1, 2, 3, 4],
        relaxed: true,
        ..Default::default()
    };
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return verdict(false, format!("tempdir: {e}")),
    };
    let mut outputs: Vec<Vec<u8>> = Vec::new();
    for (k, &w) in C10_WIDTHS.iter().chain(&[C10_WIDTHS[0]]).enumerate() {
        let run = || -> Result<Vec<u8>, iqswitch::HarnessError> {
            let res = sweep_and_fit(&ExperimentConfig {
                threads: w,
                ..cfg.clone()
            })?;
            let sub = dir.path().join(format!("run{k}"));
            std::fs::create_dir_all(&sub).map_err(|source| iqswitch::HarnessError::Io {
                path: sub.clone(),
                source,
            })?;
            write_sweep_csv(&res.rows, &sub.join("sweep.csv"))?;
            write_summary_csv(&res.points, &sub.join("summary.csv"))?;
            write_fit_csv(res.fit.as_ref(), &sub.join("fit.csv"))?;
            let mut bytes = Vec::new();
            for f in ["sweep.csv", "summary.csv", "fit.csv"] {
                bytes.extend(std::fs::read(sub.join(f)).map_err(|source| {
                    iqswitch::HarnessError::Io {
                        path: sub.join(f),
                        source,
                    }
                })?);
            }
            Ok(bytes)
        };
        match run() {
            Ok(b) => outputs.push(b),
            Err(e) => return verdict(false, format!("sweep failed: {e}")),
        }
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        identical,
        format!(
            "{} sweeps at widths {:?} then {}: CSV outputs ({} bytes) {}",
            outputs.len(),
            C10_WIDTHS,
            C10_WIDTHS[0],
            outputs[0].len(),
            if identical {
                "byte-identical"
            } else {
                "differ"
            }
        ),
    )
}

fn timed<T>(id: u32, f: impl FnOnce() -> T) -> (T, f64) {
    eprintln!("acceptance: running criterion {id}");
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn main() {
    let mut tally = Tally::default();
    let mut results: Vec<(u32, &str, Verdict, f64)> = Vec::new();

    let (v, s) = timed(1, c1_clearing_optimality);
    results.push((1, "clearing optimality", v, s));
    let (v, s) = timed(2, c2_clearing_lower_bound);
    results.push((2, "clearing lower bound", v, s));
    let (v, s) = timed(4, c4_maxweight_oracle);
    results.push((4, "maxweight oracle", v, s));
    let (v, s) = timed(5, c5_concentration);
    results.push((5, "concentration dominance", v, s));
    let (v, s) = timed(6, c6_kingman);
    results.push((6, "kingman dominance", v, s));
    let (c7, s) = timed(7, || c7_policy_correctness(&mut tally));
    results.push((7, "policy correctness at n = 25", c7.verdict, s));
    let (v, s) = timed(8, || c8_scaling(&mut tally));
    results.push((8, "scaling property", v, s));
    let (v, s) = timed(9, || c9_baseline_ordering(&mut tally, &c7.means));
    results.push((9, "baseline ordering", v, s));
    let (v, s) = timed(10, c10_determinism);
    results.push((10, "determinism", v, s));
    let (v, s) = timed(3, || c3_conservation(&mut tally));
    results.push((3, "conservation", v, s));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, v, secs) in &results {
        failed += !v.pass as u32;
        println!(
            "criterion {id:>2} [{name}]: {} ({secs:.1} s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() as u32 - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
