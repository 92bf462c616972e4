use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use iqswitch::bounds::{
    chernoff_lower, chernoff_upper, growth_envelope, kingman_bound, total_queue_bound,
};
use iqswitch::clearing::{clearing_plan, replay};
use iqswitch::harness::{
    par_map, params_for, run_replication, sweep_and_fit, write_fit_csv, write_periods_csv,
    write_series_csv, write_snapshots, write_summary_csv, write_sweep_csv, ExperimentConfig,
    MetricsRecord, SweepRow,
};
use iqswitch::policies::{evaluate_params, PolicyParams};
use iqswitch::{Gg1, QueueMatrix};

/// `println!` that exits quietly once the reader closes the pipe.
macro_rules! say {
    ($($arg:tt)*) => {
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            panic!("writing to stdout: {e}");
        }
    };
}

/// Input-queued switch simulator.
#[derive(Parser, Debug)]
#[command(name = "iqswitch", version)]
struct Cli {
    /// Print every invariant violation and extra diagnostics.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run each (n, f_n, seed) replication and write per-run CSVs.
    Simulate(ConfigArgs),
    /// Run a sweep, write the sweep table and fit the growth exponent.
    Sweep(ConfigArgs),
    /// Print the minimum clearance time and an optimal schedule sequence.
    Clear {
        /// Matrix file: one row per line, comma-separated counts.
        file: PathBuf,
        /// Replay the schedules and report the residual.
        #[arg(long)]
        verify: bool,
    },
    /// Print the analytical bounds for each configured (n, f_n).
    Bounds(ConfigArgs),
    /// Evaluate the policy parameters and report feasibility.
    ValidateParams {
        #[arg(long)]
        n: usize,
        #[arg(long = "f_n")]
        f_n: u64,
        #[arg(long = "c_b")]
        c_b: f64,
        #[arg(long = "c_d")]
        c_d: f64,
        #[arg(long = "c_s")]
        c_s: f64,
    },
}

/// Config file plus per-key overrides; flag names match the file keys.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long = "n_list")]
    n_list: Option<String>,
    #[arg(long = "fn_rule")]
    fn_rule: Option<String>,
    #[arg(long = "c_b")]
    c_b: Option<String>,
    #[arg(long = "c_d")]
    c_d: Option<String>,
    #[arg(long = "c_s")]
    c_s: Option<String>,
    #[arg(long)]
    periods: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    relaxed: Option<String>,
    #[arg(long = "out_dir")]
    out_dir: Option<String>,
    #[arg(long = "snapshot_period_boundaries", num_args = 0..=1, default_missing_value = "true")]
    snapshot_period_boundaries: Option<String>,
    #[arg(long = "sb_batch")]
    sb_batch: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    arrivals: Option<String>,
    #[arg(long = "check_conservation", num_args = 0..=1, default_missing_value = "true")]
    check_conservation: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> [(&'static str, &Option<String>); 15] {
        [
            ("policy", &self.policy),
            ("n_list", &self.n_list),
            ("fn_rule", &self.fn_rule),
            ("c_b", &self.c_b),
            ("c_d", &self.c_d),
            ("c_s", &self.c_s),
            ("periods", &self.periods),
            ("seeds", &self.seeds),
            ("relaxed", &self.relaxed),
            ("out_dir", &self.out_dir),
            (
                "snapshot_period_boundaries",
                &self.snapshot_period_boundaries,
            ),
            ("sb_batch", &self.sb_batch),
            ("threads", &self.threads),
            ("arrivals", &self.arrivals),
            ("check_conservation", &self.check_conservation),
        ]
    }

    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|e| anyhow!("--{key}: {e}"))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Failure classes mapped to exit codes 1 and 2.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(runtime)
}

fn report_violations(violations: &[String], count: u64, verbose: bool) -> CmdResult {
    if count == 0 {
        return Ok(());
    }
    let shown = if verbose {
        violations.len()
    } else {
        violations.len().min(5)
    };
    for v in &violations[..shown] {
        eprintln!("violation: {v}");
    }
    Err(runtime(anyhow!("{count} invariant violation(s)")))
}

fn run_stem(r: &MetricsRecord) -> String {
    format!("{}_n{}_f{}_seed{}", r.policy, r.n, r.f_n, r.seed)
}

fn cmd_simulate(args: &ConfigArgs, verbose: bool) -> CmdResult {
    let cfg = args.load().map_err(usage)?;
    let points = cfg.points().map_err(usage)?;
    for &(n, f) in &points {
        params_for(&cfg, n, f).map_err(usage)?;
    }
    let tasks: Vec<(usize, u64, u64)> = points
        .iter()
        .flat_map(|&(n, f)| cfg.seeds.iter().map(move |&s| (n, f, s)))
        .collect();
    let records = par_map(cfg.threads, &tasks, |&(n, f, s)| {
        run_replication(&cfg, n, f, s)
    })
    .map_err(runtime)?
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(runtime)?;
    ensure_dir(&cfg.out_dir)?;
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut count = 0;
    for r in &records {
        let stem = run_stem(r);
        let dir = &cfg.out_dir;
        write_series_csv(r, &dir.join(format!("{stem}_series.csv"))).map_err(runtime)?;
        write_periods_csv(r, &dir.join(format!("{stem}_periods.csv"))).map_err(runtime)?;
        if cfg.snapshot_period_boundaries {
            write_snapshots(r, &dir.join(format!("{stem}_snapshots.txt"))).map_err(runtime)?;
        }
        let s = &r.summary;
        say!(
            "policy={} n={} f_n={} seed={} mean_total_queue={} max_total_queue={} bound_3nd={} \
             time_avg_B={} frac_Uk_pos={} frac_Wk={} frac_Hk={} wasted_service={} constraints_ok={} \
             invariant_violations={}",
            r.policy,
            r.n,
            r.f_n,
            r.seed,
            s.mean_total_queue,
            s.max_total_queue,
            s.bound_3nd,
            s.time_avg_backlog,
            s.frac_uk_pos,
            s.frac_w,
            s.frac_h,
            s.wasted_service,
            r.params.constraints_ok,
            r.violation_count
        );
        if verbose {
            say!("  params: {}", r.params);
        }
        rows.push(SweepRow::from_record(r));
        count += r.violation_count;
        violations.extend(r.violations.iter().map(|v| format!("{stem}: {v}")));
    }
    write_sweep_csv(&rows, &cfg.out_dir.join("simulate.csv")).map_err(runtime)?;
    report_violations(&violations, count, verbose)
}

fn cmd_sweep(args: &ConfigArgs, verbose: bool) -> CmdResult {
    let cfg = args.load().map_err(usage)?;
    for (n, f) in cfg.points().map_err(usage)? {
        params_for(&cfg, n, f).map_err(usage)?;
    }
    let res = sweep_and_fit(&cfg).map_err(runtime)?;
    ensure_dir(&cfg.out_dir)?;
    write_sweep_csv(&res.rows, &cfg.out_dir.join("sweep.csv")).map_err(runtime)?;
    write_summary_csv(&res.points, &cfg.out_dir.join("sweep_summary.csv")).map_err(runtime)?;
    write_fit_csv(res.fit.as_ref(), &cfg.out_dir.join("fit.csv")).map_err(runtime)?;
    say!("n,f_n,seeds,mean_total_queue,max_total_queue,std_error,envelope_value,ratio");
    for p in &res.points {
        say!(
            "{},{},{},{},{},{},{},{}",
            p.n,
            p.f_n,
            p.seeds,
            p.mean_total_queue,
            p.max_total_queue,
            p.std_error,
            p.envelope_value,
            p.ratio
        );
    }
    match (&res.fit, &res.notice) {
        (Some(f), _) => say!(
            "alpha = {} intercept = {} (points = {})",
            f.alpha,
            f.intercept,
            f.points
        ),
        (None, Some(msg)) => say!("fit omitted: {msg}"),
        (None, None) => {}
    }
    report_violations(&res.violations, res.violation_count, verbose)
}

fn format_assignment(s: &iqswitch::Schedule) -> String {
    s.assignment()
        .iter()
        .map(|o| o.map_or("-".to_string(), |j| j.to_string()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_clear(file: &Path, verify: bool) -> CmdResult {
    let text = std::fs::read_to_string(file)
        .with_context(|| format!("reading {}", file.display()))
        .map_err(usage)?;
    let q: QueueMatrix = text
        .parse()
        .with_context(|| format!("parsing {}", file.display()))
        .map_err(usage)?;
    let plan = clearing_plan(&q);
    say!("L = {}", plan.length());
    say!("# each line: repeat count, then the output port of inputs 0..n-1 (- if idle)");
    for b in plan.blocks() {
        say!("{} x {}", b.repeat, format_assignment(&b.schedule));
    }
    if verify {
        let left = replay(&q, plan.blocks());
        say!("residual = {}", left.total());
        if !left.is_zero() {
            return Err(runtime(anyhow!(
                "clearing plan left {} packets",
                left.total()
            )));
        }
    }
    Ok(())
}

/// Union bound on the early-arrival event and its per-event maximum.
fn w_bounds(p: &PolicyParams) -> (f64, f64) {
    let n = p.n as f64;
    let mut worst: f64 = 0.0;
    for t in p.d..p.b {
        let mean = p.rho * t as f64 / n;
        let x = mean - (t - p.d) as f64 / n - 1.0;
        let b = if x > 0.0 {
            chernoff_lower(mean, x).unwrap_or(1.0)
        } else {
            1.0
        };
        worst = worst.max(b);
    }
    (worst, (n * n * (p.b - p.d) as f64 * worst).min(1.0))
}

/// Union bound on the batch-size event and its per-line value.
fn h_bounds(p: &PolicyParams) -> (f64, f64) {
    let mean = p.rho * p.b as f64;
    let x = p.s as f64 - mean;
    let line = if x > 0.0 {
        chernoff_upper(mean, x).unwrap_or(1.0)
    } else {
        1.0
    };
    (line, (2.0 * p.n as f64 * line).min(1.0))
}

fn cmd_bounds(args: &ConfigArgs) -> CmdResult {
    let cfg = args.load().map_err(usage)?;
    for (n, f) in cfg.points().map_err(usage)? {
        let p = params_for(&cfg, n, f).map_err(usage)?;
        let fl = f as f64;
        let target = 1.0 / (2.0 * fl.powi(13));
        let (w_one, w_union) = w_bounds(&p);
        let (h_one, h_union) = h_bounds(&p);
        let lambda = fl.powi(-7);
        let kingman = Gg1::new(lambda, 1.0 / fl, 1.0, 1.0)
            .and_then(|g| kingman_bound(&g))
            .map_err(runtime)?;
        let env = growth_envelope(n as u64, f, 1.0f64);
        say!("# n = {n}, f_n = {f}");
        let rows: Vec<(&str, String)> = vec![
            ("b", p.b.to_string()),
            ("d", p.d.to_string()),
            ("s", p.s.to_string()),
            ("ell", p.ell.to_string()),
            ("r", p.r.to_string()),
            ("rho", p.rho.to_string()),
            ("constraints_ok", p.constraints_ok.to_string()),
            (
                "total_queue_bound_3nd",
                total_queue_bound(n as u64, p.d).to_string(),
            ),
            ("envelope_n1.5_f_ln_f", env.value.to_string()),
            ("w_event_max_single", w_one.to_string()),
            ("w_event_union", w_union.to_string()),
            ("h_event_single_line", h_one.to_string()),
            ("h_event_union", h_union.to_string()),
            ("event_target_1/(2f^13)", target.to_string()),
            ("backlog_kingman", kingman.to_string()),
            (
                "backlog_kingman_without_cross_term",
                ((1.0 / fl + 1.0) / (2.0 * (1.0 - lambda))).to_string(),
            ),
        ];
        for (k, v) in rows {
            say!("{k:<36} {v}");
        }
    }
    Ok(())
}

fn cmd_validate(n: usize, f_n: u64, c_b: f64, c_d: f64, c_s: f64) -> CmdResult {
    let e = evaluate_params(n, f_n, c_b, c_d, c_s).map_err(usage)?;
    say!("n = {}", e.n);
    say!("f_n = {}", e.f_n);
    say!("rho = {}", e.rho);
    say!("b = {}", e.b);
    say!("d = {}", e.d);
    say!("s = {}", e.s);
    say!(
        "ell = {}  (closed form: >= c_ell sqrt(n) f_n ln f_n = {:.3}, c_ell = {:.6})",
        e.ell,
        e.ell_lower_closed_form(),
        e.c_ell()
    );
    say!(
        "r = {}  (closed form: c_r f_n ln f_n = {:.3}, c_r = {:.6})",
        e.r,
        e.r_closed_form(),
        e.c_r()
    );
    say!("constraints_ok = {}", e.constraints_ok);
    match e.infeasibility() {
        None => say!("verdict: feasible"),
        Some(why) => say!("verdict: infeasible ({why})"),
    }
    Ok(())
}

/// Error chain joined by ": ", skipping causes already quoted by their parent.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let verbose = cli.verbose;
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, verbose),
        Command::Sweep(a) => cmd_sweep(a, verbose),
        Command::Clear { file, verify } => cmd_clear(file, *verify),
        Command::Bounds(a) => cmd_bounds(a),
        Command::ValidateParams {
            n,
            f_n,
            c_b,
            c_d,
            c_s,
        } => cmd_validate(*n, *f_n, *c_b, *c_d, *c_s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", render(&e));
            ExitCode::from(2)
        }
    }
}
