//! Command-line front end: parse instances, run the router (fixed-W or
//! sweep), query the exact oracle, compare update variants on seeded suites,
//! and measure parallel speedup. Emits JSON or CSV reports.
//!
//! Exit codes: 0 success, 1 bad usage, 2 instance parse error,
//! 3 infeasible at the starting W (the report is still written).

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use lagroute::lagrangian::{StepSchedule, UpdateMethod};
use lagroute::netlist::{generate_random, parse_instance, Instance};
use lagroute::oracle::{exact_route, OracleLimits};
use lagroute::router::{measure_speedup, run, RouterConfig};

use report::{OutputFormat, Report};

#[derive(Parser)]
#[command(name = "lagroute", version, about = "Grid router with Lagrangian-relaxed channel-width constraints")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Route an instance at a fixed channel width (or sweep with --sweep).
    Route(RouteOpts),
    /// Route an instance, sweeping W down to the smallest feasible value.
    Sweep(RouteOpts),
    /// Solve a tiny instance exactly and emit fixture values.
    Oracle(OracleOpts),
    /// Compare update variants on a seeded synthetic suite.
    Bench(BenchOpts),
    /// Measure wall time and speedup across thread counts.
    Speedup(SpeedupOpts),
}

#[derive(Args, Clone)]
struct RouteOpts {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "primal-dual")]
    method: String,
    #[arg(long, default_value = "kkt")]
    step: String,
    #[arg(long, default_value_t = 0.6)]
    beta: f64,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// Starting channel width; defaults to the instance's width directive.
    #[arg(long)]
    w_init: Option<usize>,
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    warm_start_lambda: bool,
    /// Worker threads; falls back to LAGROUTE_THREADS, then 1.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Include the full per-iteration history in the report.
    #[arg(long)]
    history: bool,
}

#[derive(Args)]
struct OracleOpts {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct BenchOpts {
    /// Seed range, e.g. 1..20 (inclusive).
    #[arg(long, default_value = "1..10")]
    seeds: String,
    /// Grid dimensions, e.g. 30x30.
    #[arg(long, default_value = "30x30")]
    grid: String,
    #[arg(long, default_value_t = 200)]
    nets: usize,
    /// Terminals per net, e.g. 2..4 (inclusive).
    #[arg(long, default_value = "2..4")]
    terminals: String,
    /// Comma-separated variants: method or method+step.
    #[arg(long, default_value = "primal-dual+kkt,projected+paralar")]
    compare: String,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct SpeedupOpts {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "1,2,3,4")]
    threads_list: String,
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    #[arg(long, default_value = "primal-dual")]
    method: String,
    #[arg(long, default_value = "kkt")]
    step: String,
    #[arg(long)]
    w_init: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output on "error"
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Instance(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Instance(String),
}

impl From<lagroute::Error> for CliError {
    fn from(e: lagroute::Error) -> Self {
        match e {
            lagroute::Error::Parse { .. } | lagroute::Error::InvalidInstance(_) => {
                CliError::Instance(e.to_string())
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode, CliError> {
    match cmd {
        Command::Route(opts) => run_route(opts),
        Command::Sweep(mut opts) => {
            opts.sweep = true;
            run_route(opts)
        }
        Command::Oracle(opts) => run_oracle(opts),
        Command::Bench(opts) => run_bench(opts),
        Command::Speedup(opts) => run_speedup(opts),
    }
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Instance(format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text)
        .map_err(|e| CliError::Instance(format!("{}: {e}", path.display())))
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var("LAGROUTE_THREADS") {
        Ok(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("bad LAGROUTE_THREADS value '{v}'"))),
        Err(_) => Ok(1),
    }
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn build_config(opts: &RouteOpts, inst: &Instance) -> Result<RouterConfig, CliError> {
    let method: UpdateMethod = opts.method.parse()?;
    let step: StepSchedule = opts.step.parse()?;
    Ok(RouterConfig {
        method,
        step,
        beta: opts.beta,
        max_iterations: opts.iterations,
        w_init: Some(opts.w_init.unwrap_or(inst.w_init)),
        w_sweep: opts.sweep,
        warm_start_lambda: opts.warm_start_lambda,
        thread_count: resolve_threads(opts.threads)?,
        seed: opts.seed,
        ..Default::default()
    })
}

fn run_route(opts: RouteOpts) -> Result<ExitCode, CliError> {
    let inst = load_instance(&opts.instance)?;
    let cfg = build_config(&opts, &inst)?;
    let name = opts
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());

    let start = Instant::now();
    let sol = run(&inst, &cfg)?;
    let wall = start.elapsed().as_secs_f64();

    let mut report = Report::new(&name, &inst, &cfg);
    report.push_solution(&name, &cfg, &sol, wall);
    if opts.history {
        report.history = Some(sol.history.clone());
    }
    write_output(opts.report.as_deref(), &report.render(opts.format))?;

    eprintln!(
        "{name}: wirelength={} channel_width={} violation={} delay_proxy={} ({:.3}s)",
        sol.wirelength, sol.channel_width, sol.total_violation, sol.delay_proxy, wall
    );
    if sol.infeasible_at_w_init {
        eprintln!("{name}: infeasible at starting W");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_oracle(opts: OracleOpts) -> Result<ExitCode, CliError> {
    let inst = load_instance(&opts.instance)?;
    let exact = exact_route(&inst, &OracleLimits::default())?;
    let name = opts
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let mut report = Report::new(&name, &inst, &RouterConfig::default());
    report.set_oracle(&exact);
    write_output(opts.report.as_deref(), &report.render(opts.format))?;
    eprintln!(
        "{name}: optimal_wirelength={} min_channel_width={}",
        exact.optimal_wirelength, exact.min_channel_width
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_range(s: &str, what: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = s.split("..").collect();
    let err = || CliError::Usage(format!("bad {what} range '{s}', expected A..B"));
    match parts.as_slice() {
        [a, b] => {
            let lo = a.parse().map_err(|_| err())?;
            let hi = b.parse().map_err(|_| err())?;
            if lo > hi {
                return Err(err());
            }
            Ok((lo, hi))
        }
        [a] => {
            let v = a.parse().map_err(|_| err())?;
            Ok((v, v))
        }
        _ => Err(err()),
    }
}

fn parse_variant(s: &str) -> Result<(UpdateMethod, StepSchedule), CliError> {
    match s.split_once('+') {
        Some((m, st)) => Ok((m.parse()?, st.parse()?)),
        None => Ok((s.parse()?, StepSchedule::Kkt)),
    }
}

fn run_bench(opts: BenchOpts) -> Result<ExitCode, CliError> {
    let (seed_lo, seed_hi) = parse_range(&opts.seeds, "seed")?;
    let (tmin, tmax) = parse_range(&opts.terminals, "terminals")?;
    let (rows, cols) = opts
        .grid
        .split_once('x')
        .and_then(|(r, c)| Some((r.parse().ok()?, c.parse().ok()?)))
        .ok_or_else(|| CliError::Usage(format!("bad grid '{}', expected RxC", opts.grid)))?;
    let variants: Vec<(UpdateMethod, StepSchedule)> = opts
        .compare
        .split(',')
        .map(parse_variant)
        .collect::<Result<_, _>>()?;
    if variants.is_empty() {
        return Err(CliError::Usage("no variants to compare".into()));
    }
    let threads = resolve_threads(opts.threads)?;

    let suite_name = format!(
        "suite seeds={}..{} grid={rows}x{cols} nets={}",
        seed_lo, seed_hi, opts.nets
    );
    let mut report: Option<Report> = None;
    for seed in seed_lo..=seed_hi {
        let inst = generate_random(rows, cols, opts.nets, (tmin, tmax), seed as u64)?;
        for &(method, step) in &variants {
            let cfg = RouterConfig {
                method,
                step,
                max_iterations: opts.iterations,
                w_init: None, // start from the multiplier-free channel width
                w_sweep: true,
                thread_count: threads,
                seed: seed as u64,
                ..Default::default()
            };
            let report = report.get_or_insert_with(|| Report::new(&suite_name, &inst, &cfg));
            let start = Instant::now();
            let sol = run(&inst, &cfg)?;
            let wall = start.elapsed().as_secs_f64();
            let row_name = format!("seed{seed}:{method}+{step}");
            report.push_solution(&row_name, &cfg, &sol, wall);
            eprintln!(
                "{row_name}: achieved_w={:?} wirelength={} violation={}",
                sol.achieved_w, sol.wirelength, sol.total_violation
            );
        }
    }
    let report = report.expect("at least one seed");
    write_output(opts.report.as_deref(), &report.render(opts.format))?;
    Ok(ExitCode::SUCCESS)
}

fn run_speedup(opts: SpeedupOpts) -> Result<ExitCode, CliError> {
    let inst = load_instance(&opts.instance)?;
    let thread_counts: Vec<usize> = opts
        .threads_list
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad thread count '{t}'")))
        })
        .collect::<Result<_, _>>()?;
    let cfg = RouterConfig {
        method: opts.method.parse()?,
        step: opts.step.parse()?,
        max_iterations: opts.iterations,
        w_init: Some(opts.w_init.unwrap_or(inst.w_init)),
        ..Default::default()
    };
    let table = measure_speedup(&inst, &cfg, &thread_counts)?;
    if !table.metrics_identical {
        return Err(CliError::Usage(
            "metrics differed across thread counts".into(),
        ));
    }
    let name = opts
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let mut report = Report::new(&name, &inst, &cfg);
    report.speedup = Some(table.rows.clone());
    write_output(opts.report.as_deref(), &report.render(opts.format))?;
    for row in &table.rows {
        eprintln!(
            "{name}: threads={} wall={:.3}s speedup={:.2}",
            row.threads, row.wall_time_s, row.speedup
        );
    }
    Ok(ExitCode::SUCCESS)
}
