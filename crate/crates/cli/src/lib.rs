//! Command-line front end: training, checking, evaluation, monitoring,
//! synthetic data and benchmarks.

pub mod bench;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ppstl::engine::{monitor, robustness, Verdict};
use ppstl::evaluate::{evaluate, evaluate_curve, write_curve_csv, write_verdicts_csv};
use ppstl::formula::{parse, Formula, Fragment};
use ppstl::trace::{batch, load_csv, synth_generate, write_csv, Dataset, NormalizationParams, SynthConfig, SynthMeta};
use ppstl::trainer::{load_pool, save_pool, train, PoolEntry, TrainConfig, TrainError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Parser)]
#[command(name = "ppstl", version, about = "Learn and monitor temporal failure-detection properties")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a pool of safety properties from labeled traces.
    Train(TrainArgs),
    /// Print robustness and verdicts of one formula on every trace.
    Check(CheckArgs),
    /// Score a pool on a labeled test set.
    Evaluate(EvaluateArgs),
    /// Stream pool verdicts per trace until the first decision.
    Monitor(MonitorArgs),
    /// Generate a dataset with a planted failure detector.
    Synth(SynthArgs),
    /// Time verdict-complete monitoring strategies.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Existing pool to extend.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long, default_value = "pool.jsonl")]
    pub out: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum At {
    First,
    Last,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub formula: String,
    #[arg(long)]
    pub data: PathBuf,
    /// Position the satisfaction verdict is read at; by default the last
    /// one for pure-past formulas and the first otherwise.
    #[arg(long, value_enum)]
    pub at: Option<At>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub norm: PathBuf,
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,
    /// Per-position pool verdicts as CSV.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Metrics after each training batch as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Name of one sampling step, used for preemptiveness.
    #[arg(long, default_value = "step")]
    pub unit: String,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Normalization parameters from training; raw values are used without it.
    #[arg(long)]
    pub norm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Pure-past detector over variables x0, x1, ...
    #[arg(long)]
    pub planted: String,
    #[arg(long, default_value_t = 40)]
    pub n_good: usize,
    #[arg(long, default_value_t = 20)]
    pub n_fail: usize,
    #[arg(long, default_value_t = 60)]
    pub len: usize,
    #[arg(long, default_value_t = 3)]
    pub arity: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value = "length")]
    pub mode: bench::Mode,
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000")]
    pub sweep: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "naive-prefix,incremental,vectorized")]
    pub strategies: Vec<bench::Strategy>,
    /// Seconds allowed per strategy and sweep point.
    #[arg(long, default_value_t = 180.0)]
    pub budget: f64,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Trace length when sweeping traces or formulas.
    #[arg(long, default_value_t = 1000)]
    pub len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable input; exit code 2.
    Usage(anyhow::Error),
    /// Anything else; exit code 1.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    /// True when the reader of stdout went away, e.g. `ppstl ... | head`.
    pub fn is_broken_pipe(&self) -> bool {
        let (CliError::Usage(e) | CliError::Runtime(e)) = self;
        e.chain()
            .filter_map(|c| c.downcast_ref::<std::io::Error>())
            .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

fn usage<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Check(a) => cmd_check(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Monitor(a) => cmd_monitor(&a, out),
        Command::Synth(a) => cmd_synth(&a),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_data(path: &Path, unit: &str) -> Result<Dataset<f64>, CliError> {
    load_csv(path, unit).with_context(|| format!("reading {}", path.display())).map_err(usage)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).with_context(|| format!("creating {}", path.display())).map_err(runtime)
}

fn read_norm(path: &Path, data: &Dataset<f64>) -> Result<NormalizationParams<f64>, CliError> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
    let norm: NormalizationParams<f64> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(usage)?;
    if norm.var_names != data.var_names {
        return Err(usage(anyhow::anyhow!(
            "variables {:?} of {} differ from the data header {:?}",
            norm.var_names,
            path.display(),
            data.var_names
        )));
    }
    Ok(norm)
}

fn read_pool(path: &Path, names: &[String]) -> Result<Vec<PoolEntry<f64>>, CliError> {
    load_pool(path, names).with_context(|| format!("reading {}", path.display())).map_err(usage)
}

pub fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let data = load_data(&a.data, "step")?;
    let text =
        std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display())).map_err(usage)?;
    let mut cfg = TrainConfig::from_toml(&text).with_context(|| format!("in {}", a.config.display())).map_err(usage)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let pool = match &a.pool {
        Some(p) => read_pool(p, &data.var_names)?,
        None => Vec::new(),
    };
    let outcome = train(&data, pool, &cfg).map_err(|e| match e {
        TrainError::PoolArity { .. } | TrainError::Config(_) => usage(e),
        e => runtime(e),
    })?;
    save_pool(&outcome.pool, &data.var_names, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))
        .map_err(runtime)?;

    let norm_path = sidecar(&a.out, ".norm.json");
    let norm = serde_json::to_string_pretty(&outcome.norm).map_err(runtime)?;
    std::fs::write(&norm_path, norm + "\n").with_context(|| format!("writing {}", norm_path.display())).map_err(runtime)?;

    let mut log = create(&sidecar(&a.out, ".log.jsonl"))?;
    for entry in &outcome.log {
        writeln!(log, "{}", serde_json::to_string(entry).map_err(runtime)?).map_err(runtime)?;
    }
    log.flush().map_err(runtime)?;

    let curve = evaluate_curve(&outcome.pool, &data, &outcome.norm).map_err(runtime)?;
    write_curve_csv(&curve, create(&sidecar(&a.out, ".curve.csv"))?).map_err(runtime)?;
    Ok(())
}

fn join<I: IntoIterator<Item = S>, S: std::fmt::Display>(items: I) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Unknown => "Unknown",
        Verdict::Top => "Top",
        Verdict::Bot => "Bot",
    }
}

pub fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let data = load_data(&a.data, "step")?;
    let f: Formula<f64> = parse(&a.formula, &data.var_names).map_err(usage)?;
    if data.traces.is_empty() {
        return Ok(());
    }
    let b = batch(data.traces.iter()).map_err(usage)?;
    let rob = robustness(std::slice::from_ref(&f), &b).map_err(usage)?;
    let monitored = match f.fragment() {
        Fragment::GppStl | Fragment::FppStl => Some(monitor(&f, &b).map_err(runtime)?),
        _ => None,
    };
    let at = a.at.unwrap_or(if f.is_pure_past() { At::Last } else { At::First });
    for (k, t) in data.traces.iter().enumerate() {
        let row = rob.row(0, k);
        let pos = match at {
            At::First => 0,
            At::Last => row.len() - 1,
        };
        writeln!(out, "trace {}", t.id).map_err(runtime)?;
        writeln!(out, "rob = [{}]", join(row)).map_err(runtime)?;
        if let Some(m) = &monitored {
            writeln!(out, "verdicts = [{}]", join(m[k].verdicts.iter().map(|&v| verdict_name(v)))).map_err(runtime)?;
        }
        writeln!(out, "sat = {}", row[pos] >= 0.0).map_err(runtime)?;
    }
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let data = load_data(&a.data, &a.unit)?;
    let norm = read_norm(&a.norm, &data)?;
    let pool = read_pool(&a.pool, &data.var_names)?;
    let report = evaluate(&pool, &data, &norm).map_err(usage)?;
    let mut w = create(&a.report)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(runtime)?;
    writeln!(w).and_then(|_| w.flush()).map_err(runtime)?;
    if let Some(path) = &a.verdicts {
        let normalized = norm.apply(&data).map_err(usage)?;
        write_verdicts_csv(&report, &normalized, create(path)?).map_err(runtime)?;
    }
    if let Some(path) = &a.curve {
        let curve = evaluate_curve(&pool, &data, &norm).map_err(runtime)?;
        write_curve_csv(&curve, create(path)?).map_err(runtime)?;
    }
    Ok(())
}

pub fn cmd_monitor(a: &MonitorArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let raw = load_data(&a.data, "step")?;
    let data = match &a.norm {
        Some(p) => read_norm(p, &raw)?.apply(&raw).map_err(usage)?,
        None => raw,
    };
    let pool = read_pool(&a.pool, &data.var_names)?;
    if pool.is_empty() || data.traces.is_empty() {
        return Ok(());
    }
    let b = batch(data.traces.iter()).map_err(usage)?;
    let mut first: Vec<Option<usize>> = vec![None; data.traces.len()];
    for e in &pool {
        for (k, m) in monitor(&e.formula, &b).map_err(usage)?.into_iter().enumerate() {
            first[k] = first[k].into_iter().chain(m.first_decision).min();
        }
    }
    writeln!(out, "trace_id,position,verdict").map_err(runtime)?;
    for (t, stop) in data.traces.iter().zip(first) {
        let end = stop.map_or(t.len(), |p| p + 1);
        for j in 0..end {
            let v = if Some(j) == stop { Verdict::Bot } else { Verdict::Unknown };
            writeln!(out, "{},{},{}", t.id, j, verdict_name(v)).map_err(runtime)?;
        }
    }
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let names: Vec<String> = (0..a.arity).map(|k| format!("x{k}")).collect();
    let planted: Formula<f64> = parse(&a.planted, &names).map_err(usage)?;
    let cfg = SynthConfig { arity: a.arity, n_good: a.n_good, n_fail: a.n_fail, len: a.len, ..SynthConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let data = synth_generate(&planted, &cfg, &mut rng).map_err(runtime)?;
    write_csv(&data, create(&a.out)?).map_err(runtime)?;
    let meta = SynthMeta { planted: planted.display(&names).to_string(), seed: a.seed, config: cfg };
    let meta_path = sidecar(&a.out, ".meta.json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta).map_err(runtime)? + "\n")
        .with_context(|| format!("writing {}", meta_path.display()))
        .map_err(runtime)?;
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.budget.is_finite() && a.budget > 0.0) {
        return Err(usage(anyhow::anyhow!("budget must be a positive number of seconds")));
    }
    let plan = bench::BenchPlan {
        mode: a.mode,
        sweep: a.sweep.clone(),
        strategies: a.strategies.clone(),
        budget: Duration::from_secs_f64(a.budget),
        reps: a.reps,
        base_len: a.len,
        seed: a.seed,
    };
    plan.validate().map_err(|e| usage(anyhow::anyhow!(e)))?;
    let rows = bench::run_bench(&plan);
    match &a.out {
        Some(p) => bench::write_rows(&rows, create(p)?).map_err(runtime)?,
        None => bench::write_rows(&rows, &mut *out).map_err(runtime)?,
    }
    Ok(())
}
