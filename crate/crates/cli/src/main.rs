mod config;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use qdmet::dmet::{BathCount, FragmentSpec, RdmBackend};
use qdmet::pipeline::{self, apply_method, fixture_name, read_golden, write_rows, Pipeline, ResultRow, RunSpec};
use qdmet::refine::{refine_parameters, select_regularizer_sinefit, KernelFamily, RefinementConfig};
use qdmet::simulator::Shots;
use qdmet::vqe::{EvalKind, OptHistory};

/// Embedding + variational eigensolver runs over FCIDUMP fixtures.
#[derive(Parser)]
#[command(name = "qdmet", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// One configuration at one geometry.
    #[command(args_override_self = true)]
    Run(RunArgs),
    /// Distances x methods (x seeds), one CSV row each.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Surrogate refinement of a saved optimizer history.
    #[command(args_override_self = true)]
    Refine(RefineArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Orbital groups, e.g. "0,1;2,3" (default: consecutive pairs).
    #[arg(long)]
    fragments: Option<String>,
    /// Bath orbitals per fragment: a count, or `auto` for all.
    #[arg(long, default_value = "auto")]
    bath_count: BathCount,
    /// `none`, `perth-like`, or a noise config file.
    #[arg(long, default_value = "none")]
    noise: String,
    /// `exact` or a shot count per measurement group.
    #[arg(long, default_value = "exact")]
    shots: Shots,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How fragment densities are measured: `noisy` or `noiseless`.
    #[arg(long, default_value = "noisy")]
    rdm_backend: RdmBackend,
    /// Refine VQE parameters with the surrogate model.
    #[arg(long)]
    refine: bool,
    /// Matern smoothness.
    #[arg(long, default_value_t = 5.5)]
    nu: f64,
    /// Surrogate regularizer.
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    /// Posterior standard deviation cap for refinement.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 10)]
    max_dmet_cycles: usize,
    #[arg(long, default_value_t = 200)]
    spsa_iterations: usize,
    /// Skip Z2 tapering.
    #[arg(long)]
    no_taper: bool,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Leave the wall-time column empty (byte-stable output).
    #[arg(long)]
    no_timing: bool,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; keys are flag names.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    fcidump: PathBuf,
    #[arg(long, default_value = "dmet-vqe")]
    pipeline: Pipeline,
    /// Write each fragment's optimizer history here.
    #[arg(long)]
    history_dir: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Directory holding `dX.XXX.fcidump` files and `golden.csv`.
    #[arg(long, default_value = "fixtures/h4")]
    fixtures: PathBuf,
    /// Comma-separated bond distances (default: every golden.csv entry).
    #[arg(long)]
    distances: Option<String>,
    /// Comma-separated presets: vqe, dmet-vqe, dmet-exact, bathK[+nlrdm][+pr].
    #[arg(long, default_value = "dmet-vqe,bath1,bath0")]
    methods: String,
    /// Comma-separated seeds (default: --seed).
    #[arg(long)]
    seeds: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct RefineArgs {
    /// History CSV written by `run --history-dir`.
    #[arg(long)]
    history: PathBuf,
    #[arg(long, default_value_t = 5.5)]
    nu: f64,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated candidate regularizers.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// How to pick from `--lambda-grid`.
    #[arg(long, value_enum, requires = "lambda_grid")]
    select_lambda: Option<LambdaSelection>,
    /// Coordinate scanned by the sine-fit test.
    #[arg(long, default_value_t = 0)]
    coord: usize,
    #[arg(long, default_value_t = 20)]
    sine_points: usize,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LambdaSelection {
    Sinefit,
    Reeval,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 1,
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn numerical(e: impl ToString) -> Failure {
    Failure::Numerical(e.to_string())
}

fn base_spec(fcidump: PathBuf, pipeline: Pipeline, m: &ModelArgs) -> Result<RunSpec, Failure> {
    let fragments = m.fragments.as_deref().map(FragmentSpec::parse_list).transpose().map_err(usage)?;
    Ok(RunSpec {
        fragments,
        bath: m.bath_count,
        noise: m.noise.clone(),
        shots: m.shots,
        seed: m.seed,
        rdm_backend: m.rdm_backend,
        refine: m.refine,
        nu: m.nu,
        lambda: m.lambda,
        c: m.c,
        max_cycles: m.max_dmet_cycles,
        spsa_iterations: m.spsa_iterations,
        taper: !m.no_taper,
        ..RunSpec::new(fcidump, pipeline)
    })
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    if jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build().map_err(numerical)
}

fn emit(rows: &[ResultRow], m: &ModelArgs) -> Outcome {
    match &m.out {
        Some(path) => write_rows(File::create(path).map_err(usage)?, rows, !m.no_timing),
        None => write_rows(io::stdout().lock(), rows, !m.no_timing),
    }
    .map_err(numerical)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| usage(format!("bad {what} `{}`", s.trim()))))
        .collect()
}

fn cmd_run(a: RunArgs) -> Outcome {
    let spec = base_spec(a.fcidump.clone(), a.pipeline, &a.model)?;
    spec.validate().map_err(usage)?;
    spec.noise_model().map_err(usage)?;
    if !a.fcidump.is_file() {
        return Err(usage(format!("fixture `{}` not found", a.fcidump.display())));
    }
    let outcome = pool(a.model.jobs)?.install(|| pipeline::run(&spec));
    let out = match outcome {
        Ok(o) => o,
        Err(e) => {
            let row = ResultRow::Failed {
                distance: qdmet::integrals::distance_from_file_name(&a.fcidump),
                method: spec.method_label(),
                seed: spec.seed,
                config_hash: spec.config_hash(),
                message: e.to_string(),
            };
            emit(&[row], &a.model)?;
            return Err(numerical(e));
        }
    };
    eprintln!(
        "{}: E = {:.10}  |E - E_FCI| = {:.3e}  cycles = {}  mu = {:.4}",
        out.method,
        out.energy,
        out.abs_error(),
        out.cycles,
        out.mu
    );
    if out.mu_warning {
        eprintln!("warning: chemical potential did not bracket the electron count");
    }
    if let Some(dir) = &a.history_dir {
        std::fs::create_dir_all(dir).map_err(usage)?;
        for (i, f) in out.fragments.iter().enumerate() {
            if let Some(h) = &f.history {
                let file = File::create(dir.join(format!("fragment{i}.csv"))).map_err(usage)?;
                h.write_csv(file).map_err(numerical)?;
            }
        }
    }
    emit(&[ResultRow::Ok(out)], &a.model)
}

fn sweep_distances(a: &SweepArgs) -> Result<Vec<f64>, Failure> {
    match &a.distances {
        Some(list) => parse_list(list, "distance"),
        None => {
            let golden = a.fixtures.join("golden.csv");
            let rows = read_golden(&golden)
                .map_err(|e| usage(format!("no --distances and `{}` unreadable: {e}", golden.display())))?;
            Ok(rows.iter().map(|r| r.distance).collect())
        }
    }
}

fn run_row(spec: &RunSpec, distance: f64) -> ResultRow {
    let failed = |message: String| ResultRow::Failed {
        distance: Some(distance),
        method: spec.method_label(),
        seed: spec.seed,
        config_hash: spec.config_hash(),
        message,
    };
    if !spec.fcidump.is_file() {
        return failed(format!("missing fixture {}", spec.fcidump.display()));
    }
    match pipeline::run(spec) {
        Ok(o) => {
            log::info!("{} at {distance:.3}: error {:.3e}", o.method, o.abs_error());
            ResultRow::Ok(o)
        }
        Err(e) => failed(e.to_string()),
    }
}

fn cmd_sweep(a: SweepArgs) -> Outcome {
    let distances = sweep_distances(&a)?;
    let seeds: Vec<u64> = match &a.seeds {
        Some(s) => parse_list(s, "seed")?,
        None => vec![a.model.seed],
    };
    let methods: Vec<&str> = a.methods.split(',').map(str::trim).collect();
    let base = base_spec(PathBuf::new(), Pipeline::DmetVqe, &a.model)?;
    base.noise_model().map_err(usage)?;
    let mut jobs = Vec::new();
    for &d in &distances {
        for m in &methods {
            for &seed in &seeds {
                let mut spec = apply_method(&base, m).map_err(usage)?;
                spec.fcidump = a.fixtures.join(fixture_name(d));
                spec.seed = seed;
                spec.validate().map_err(|e| usage(format!("method `{m}`: {e}")))?;
                jobs.push((spec, d));
            }
        }
    }
    let rows: Vec<ResultRow> = pool(a.model.jobs)?.install(|| jobs.par_iter().map(|(s, d)| run_row(s, *d)).collect());
    emit(&rows, &a.model)?;
    let failures = rows.iter().filter(|r| !r.is_ok()).count();
    if failures > 0 {
        return Err(numerical(format!("{failures} of {} rows failed", rows.len())));
    }
    Ok(())
}

fn cmd_refine(a: RefineArgs) -> Outcome {
    let family = KernelFamily::matern(a.nu).map_err(usage)?;
    let file = File::open(&a.history).map_err(|e| usage(format!("{}: {e}", a.history.display())))?;
    let history = OptHistory::read_csv(file).map_err(usage)?;
    if history.is_empty() {
        return Err(usage("history is empty"));
    }
    let mut lambda = a.lambda;
    if let Some(grid) = &a.lambda_grid {
        if let Some(LambdaSelection::Reeval) = a.select_lambda {
            return Err(usage("reeval needs fresh objective measurements; use the library API or `--select-lambda sinefit`"));
        }
        let grid: Vec<f64> = parse_list(grid, "lambda")?;
        let anchor = history
            .best_of(EvalKind::Iterate)
            .or_else(|| history.best())
            .map(|r| r.theta.clone())
            .expect("history is nonempty");
        let choice = select_regularizer_sinefit(&history, &grid, &anchor, a.coord, a.sine_points, family, true, a.seed)
            .map_err(numerical)?;
        for (l, s) in &choice.scores {
            eprintln!("sinefit lambda={l:e} error={s:.6e}");
        }
        lambda = choice.lambda;
    }
    let cfg = RefinementConfig { c: a.c, seed: a.seed, ..Default::default() };
    let r = refine_parameters(&history, family, lambda, &cfg).map_err(numerical)?;
    let mut stdout = io::stdout().lock();
    let names: Vec<String> = (0..r.theta.len()).map(|i| format!("theta_{i}")).collect();
    let theta: Vec<String> = r.theta.iter().map(|t| format!("{t:.10}")).collect();
    writeln!(stdout, "lambda,length_scale,mu,sigma,{}", names.join(",")).map_err(numerical)?;
    writeln!(stdout, "{lambda:e},{:.6},{:.10},{:.6e},{}", r.kernel.length_scale, r.mu, r.sigma, theta.join(","))
        .map_err(numerical)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args_os().map(|a| a.to_string_lossy().into_owned()).collect();
    let argv = match config::expand(argv, &Cli::command()) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Refine(a) => cmd_refine(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(msg) | Failure::Numerical(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
