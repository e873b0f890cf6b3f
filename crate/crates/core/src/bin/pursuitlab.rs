//! Command-line front end: single recoveries, rate sweeps, critical
//! sparsity extraction, theory constants, and exact isometry diagnostics.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use pursuitlab::algo::{run_algorithm_traced, StoppingCriteria, TraceOptions};
use pursuitlab::harness::{
    export_results, find_critical_sparsity, run_rate_curve, ExperimentPlan, ExportFormat, Method,
    DEFAULT_SUCCESS_TOLERANCE,
};
use pursuitlab::linalg::norm2;
use pursuitlab::problem::{build_instance, MeasurementInstance, SignalKind};
use pursuitlab::rng::RngStream;
use pursuitlab::theory::{
    convergence_constants, delta_max, exact_ric, mu_admissible_range, sampled_ric,
};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pursuitlab",
    version,
    about = "Sparse-recovery laboratory: pursuit algorithms, rate sweeps, isometry diagnostics"
)]
struct Cli {
    /// Worker threads for trial-level parallelism (default: available
    /// cores; PURSUITLAB_WORKERS is honored when the flag is absent).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one recovery on an exported instance file.
    Recover(RecoverArgs),
    /// Sweep sparsity levels and record exact-reconstruction rates.
    Rate(SweepArgs),
    /// Like `rate`, additionally extracting the critical sparsity.
    Critical(SweepArgs),
    /// Print contraction/noise constants and admissible weight ranges.
    Theory(TheoryArgs),
    /// Exact (or sampled) restricted isometry constant of an instance.
    Ric(RicArgs),
    /// Generate and export one measurement instance.
    Gen(GenArgs),
}

#[derive(Args)]
struct RecoverArgs {
    /// Instance container produced by `gen` (or the library).
    #[arg(long)]
    instance: PathBuf,
    /// Algorithm, in mini-grammar form (`stp`, `stp:mu=2.5`, `l1`).
    #[arg(long)]
    algo: String,
    /// Target sparsity; defaults to the instance's ground-truth sparsity.
    #[arg(long)]
    s: Option<usize>,
    /// Shorthand for `:mu=...` on the chosen algorithm.
    #[arg(long)]
    mu: Option<f64>,
    /// Write a JSON-lines iteration trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Residual tolerance relative to the observation norm.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    /// Signal class: gaussian or cars.
    #[arg(long, value_enum, default_value_t = SignalArg::Gaussian)]
    signal: SignalArg,
    /// Comma-separated roster, e.g. "sp,htp,stp:mu=2.5,stp:mu=3,l1".
    #[arg(long)]
    algos: String,
    #[arg(long)]
    smin: usize,
    #[arg(long)]
    smax: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Master seed; required so runs are reproducible by construction.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Relative l2 error below which a trial counts as exact recovery.
    #[arg(long, default_value_t = DEFAULT_SUCCESS_TOLERANCE)]
    success_tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    mu: f64,
    /// Order-3s isometry constant to evaluate at.
    #[arg(long)]
    delta: f64,
    /// Write a CSV grid of delta_max over a weight sweep here.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    grid_min: f64,
    #[arg(long, default_value_t = 3.5)]
    grid_max: f64,
    #[arg(long, default_value_t = 0.1)]
    grid_step: f64,
}

#[derive(Args)]
struct RicArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    order: usize,
    /// Enumerate every support (the default when --samples is absent).
    #[arg(long)]
    exhaustive: bool,
    /// Number of random supports for sampled mode.
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for sampled mode.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, value_enum, default_value_t = SignalArg::Gaussian)]
    signal: SignalArg,
    /// Noise norm relative to the clean observation (0 = noiseless).
    #[arg(long, default_value_t = 0.0)]
    noise_level: f64,
    #[arg(long)]
    seed: u64,
    /// Stream id, so one seed can generate many instances.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalArg {
    Gaussian,
    Cars,
}

impl From<SignalArg> for SignalKind {
    fn from(v: SignalArg) -> Self {
        match v {
            SignalArg::Gaussian => SignalKind::Gaussian,
            SignalArg::Cars => SignalKind::Cars,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(e: impl ToString) -> Self {
        CliError::Usage(e.to_string())
    }

    fn runtime(e: impl ToString) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let workers = cli.workers.or_else(|| {
        std::env::var("PURSUITLAB_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let pool = match build_pool(workers) {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let outcome = pool.install(|| match cli.command {
        Command::Recover(args) => cmd_recover(args),
        Command::Rate(args) => cmd_sweep(args, false),
        Command::Critical(args) => cmd_sweep(args, true),
        Command::Theory(args) => cmd_theory(args),
        Command::Ric(args) => cmd_ric(args),
        Command::Gen(args) => cmd_gen(args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err("workers must be at least 1".to_string());
        }
        builder = builder.num_threads(w);
    }
    builder.build().map_err(|e| e.to_string())
}

fn cmd_recover(args: RecoverArgs) -> Result<(), CliError> {
    let mut item = args.algo.clone();
    if let Some(mu) = args.mu {
        if item.contains(':') {
            item.push_str(&format!(",mu={mu}"));
        } else {
            item.push_str(&format!(":mu={mu}"));
        }
    }
    let methods = Method::parse_list(&item).map_err(CliError::usage)?;
    if methods.len() != 1 {
        return Err(CliError::Usage("--algo expects a single algorithm".into()));
    }
    let method = methods.into_iter().next().unwrap();
    let inst = MeasurementInstance::load(&args.instance).map_err(CliError::runtime)?;
    let s = match (args.s, inst.truth.as_ref()) {
        (Some(s), _) => s,
        (None, Some(t)) => t.sparsity(),
        (None, None) => {
            return Err(CliError::Usage(
                "--s is required for instances without ground truth".into(),
            ))
        }
    };
    let stop = StoppingCriteria {
        max_iterations: args.max_iter,
        residual_tolerance: args.tol,
        native_rule_enabled: false,
    };
    println!(
        "{}",
        serde_json::json!({
            "command": "recover",
            "instance": args.instance.display().to_string(),
            "algorithm": method.display_name(),
            "s": s,
            "seed": inst.seed,
            "stop": {"max_iterations": stop.max_iterations, "residual_tolerance": stop.residual_tolerance},
        })
    );

    let y_norm = norm2(&inst.y);
    match method {
        Method::Pursuit(spec) => {
            let res = run_algorithm_traced(&spec, &inst, s, &stop, TraceOptions::default())
                .map_err(CliError::runtime)?;
            if let Some(path) = &args.trace {
                write_trace(path, &res.trace).map_err(CliError::runtime)?;
            }
            report_recovery(
                &inst,
                &res.estimate,
                res.iterations,
                res.converged,
                res.final_relative_residual(y_norm),
            );
        }
        Method::L1(cfg) => {
            if args.trace.is_some() {
                return Err(CliError::Usage(
                    "--trace applies to iterative pursuits, not l1".into(),
                ));
            }
            let res = pursuitlab::l1::basis_pursuit(&inst.phi, &inst.y, &cfg)
                .map_err(CliError::runtime)?;
            report_recovery(
                &inst,
                &res.estimate,
                res.iterations,
                res.converged,
                res.feasibility_gap,
            );
        }
    }
    Ok(())
}

fn report_recovery(
    inst: &MeasurementInstance,
    estimate: &[f64],
    iterations: usize,
    converged: bool,
    relative_residual: f64,
) {
    let relative_error = inst.truth.as_ref().map(|t| {
        let diff: f64 = estimate
            .iter()
            .zip(t.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        diff / t.norm()
    });
    println!(
        "{}",
        serde_json::json!({
            "iterations": iterations,
            "converged": converged,
            "relative_residual": relative_residual,
            "relative_error": relative_error,
        })
    );
}

fn write_trace(
    path: &PathBuf,
    trace: &[pursuitlab::algo::IterationRecord],
) -> pursuitlab::Result<()> {
    let io_err = |e: std::io::Error| pursuitlab::Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    for rec in trace {
        let line = serde_json::json!({
            "iteration": rec.iteration,
            "support": rec.support,
            "residual_norm": rec.residual_norm,
            "ls_rank_deficient": rec.ls_rank_deficient,
        });
        writeln!(w, "{line}").map_err(io_err)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, critical: bool) -> Result<(), CliError> {
    if args.step == 0 {
        return Err(CliError::Usage("--step must be at least 1".into()));
    }
    if args.smin == 0 || args.smin > args.smax {
        return Err(CliError::Usage(
            "--smin must be positive and no larger than --smax".into(),
        ));
    }
    if args.smax >= args.m {
        return Err(CliError::Usage(format!(
            "--smax ({}) must stay below --m ({}): sparsity cannot reach the measurement count",
            args.smax, args.m
        )));
    }
    let algorithms = Method::parse_list(&args.algos).map_err(CliError::usage)?;
    let sweep: Vec<usize> = (args.smin..=args.smax).step_by(args.step).collect();
    let plan = ExperimentPlan {
        m: args.m,
        n: args.n,
        signal_kind: args.signal.into(),
        sweep,
        trials: args.trials,
        algorithms,
        stop: StoppingCriteria {
            max_iterations: args.max_iter,
            residual_tolerance: args.tol,
            native_rule_enabled: false,
        },
        master_seed: args.seed,
        success_tolerance: args.success_tol,
    };
    plan.validate().map_err(CliError::usage)?;
    println!(
        "{}",
        serde_json::to_string(&serde_json::json!({
            "command": if critical { "critical" } else { "rate" },
            "plan": &plan,
        }))
        .expect("plan serializes")
    );

    let curves = run_rate_curve(&plan).map_err(CliError::runtime)?;
    let reports: Vec<_> = if critical {
        curves.iter().map(find_critical_sparsity).collect()
    } else {
        Vec::new()
    };
    let format = match args.format {
        FormatArg::Csv => ExportFormat::Csv,
        FormatArg::Json => ExportFormat::Json,
    };
    export_results(&plan, &curves, &reports, &args.out, format).map_err(CliError::runtime)?;
    if critical {
        for report in &reports {
            println!(
                "critical_sparsity {} = {} ({} trials)",
                report.algorithm.display_name(),
                report.critical_s,
                report.trials
            );
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_theory(args: TheoryArgs) -> Result<(), CliError> {
    if args.delta.is_nan() || args.delta < 0.0 || args.delta >= 1.0 {
        return Err(CliError::Usage("--delta must lie in [0, 1)".into()));
    }
    if args.mu.is_nan() || args.mu <= 0.0 {
        return Err(CliError::Usage("--mu must be positive".into()));
    }
    println!(
        "{}",
        serde_json::json!({"command": "theory", "mu": args.mu, "delta": args.delta})
    );
    let constants = convergence_constants(args.mu, args.delta).map_err(CliError::usage)?;
    let range = if args.delta > 0.0 {
        Some(mu_admissible_range(args.delta).map_err(CliError::runtime)?)
    } else {
        None
    };
    let dmax = delta_max(args.mu).map_err(CliError::runtime)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "mu": constants.mu,
            "delta3s": constants.delta3s,
            "rho": constants.rho,
            "tau": constants.tau,
            "mu_range": range,
            "delta_max": dmax,
        }))
        .expect("serializes")
    );
    if let Some(path) = &args.grid {
        if args.grid_step.is_nan()
            || args.grid_step <= 0.0
            || args.grid_min <= 0.0
            || args.grid_max < args.grid_min
        {
            return Err(CliError::Usage("bad grid bounds".into()));
        }
        let mut out = String::from("mu,delta_max\n");
        let steps = ((args.grid_max - args.grid_min) / args.grid_step).round() as usize;
        for i in 0..=steps {
            let mu = args.grid_min + i as f64 * args.grid_step;
            let dm = delta_max(mu).map_err(CliError::runtime)?;
            out.push_str(&format!("{mu},{dm}\n"));
        }
        std::fs::write(path, out).map_err(CliError::runtime)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_ric(args: RicArgs) -> Result<(), CliError> {
    if args.samples.is_some() && args.exhaustive {
        return Err(CliError::Usage(
            "--exhaustive and --samples are mutually exclusive".into(),
        ));
    }
    let inst = MeasurementInstance::load(&args.instance).map_err(CliError::runtime)?;
    println!(
        "{}",
        serde_json::json!({
            "command": "ric",
            "instance": args.instance.display().to_string(),
            "order": args.order,
            "mode": if args.samples.is_some() { "sampled" } else { "exhaustive" },
        })
    );
    let report = match args.samples {
        None => exact_ric(&inst.phi, args.order).map_err(CliError::runtime)?,
        Some(samples) => {
            let seed = args
                .seed
                .ok_or_else(|| CliError::Usage("--seed is required for sampled mode".into()))?;
            sampled_ric(&inst.phi, args.order, samples, RngStream::new(seed, 0))
                .map_err(CliError::runtime)?
        }
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("serializes")
    );
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    if args.s == 0 || args.s > args.m {
        return Err(CliError::Usage(
            "--s must be positive and at most --m".into(),
        ));
    }
    if args.m >= args.n {
        return Err(CliError::Usage("--m must be below --n".into()));
    }
    println!(
        "{}",
        serde_json::json!({
            "command": "gen",
            "m": args.m, "n": args.n, "s": args.s,
            "signal": SignalKind::from(args.signal).as_str(),
            "noise_level": args.noise_level,
            "seed": args.seed, "stream": args.stream,
        })
    );
    let inst = build_instance(
        args.m,
        args.n,
        args.s,
        args.signal.into(),
        args.noise_level,
        RngStream::new(args.seed, args.stream),
    )
    .map_err(CliError::runtime)?;
    inst.save(&args.out).map_err(CliError::runtime)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
