//! `dilemma`: single realizations, sweeps, event-log replay and perception
//! graph export. Results go to stdout as `key=value` lines; everything meant
//! for humans goes to stderr.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dilemma_core::eventlog::{self, EventLogWriter};
use dilemma_core::harness::{self, SweepSpec};
use dilemma_core::metrics::{export_perception_graph, write_perception_graph};
use dilemma_core::{
    ConfigError, ForgetCutoff, ForgettingStrategy, PayoffMatrix, Realization, RecommendationMode,
    SimConfig,
};

const SEED_ENV: &str = "DILEMMA_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "dilemma",
    version,
    about = "Iterated prisoner's dilemma with limited memory and recommendations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one realization and print its metrics.
    Run(RunArgs),
    /// Run a parameter grid and write a CSV plus JSON manifest.
    Sweep(SweepArgs),
    /// Recount metrics from an event log, optionally checking a run's output.
    Replay(ReplayArgs),
    /// Run one realization and write its final perception graph.
    Graph(GraphArgs),
}

#[derive(Args, Debug, Default)]
struct SimFlags {
    /// Population size (even) [default: 100]
    #[arg(long)]
    n: Option<usize>,
    /// Error rate [default: 0.1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Memory ratio M/N [default: 0.3]
    #[arg(long)]
    mu: Option<f64>,
    /// Optimism threshold, in [0, 1) [default: 0.5]
    #[arg(long)]
    alpha: Option<f64>,
    /// Tolerance, games observed before judging [default: 1]
    #[arg(long)]
    beta: Option<u32>,
    /// Forgetting strategy: FC, FR or FD [default: FC]
    #[arg(long)]
    forget: Option<ForgettingStrategy>,
    /// Cutoff for the FC/FD forgetting lists: neutral or alpha [default: neutral]
    #[arg(long)]
    forget_cutoff: Option<ForgetCutoff>,
    /// Average matchings per pair [default: 30]
    #[arg(long)]
    tau: Option<u32>,
    /// Payoff matrix as S,P,R,T [default: 0,1,3,5]
    #[arg(long)]
    payoffs: Option<PayoffMatrix>,
    /// Recommendation aggregation: pooled or legacy-mean [default: pooled]
    #[arg(long)]
    mode: Option<RecommendationMode>,
    /// RNG seed; falls back to $DILEMMA_SEED [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    sim: SimFlags,
    /// Write the match-by-match event log here
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[command(flatten)]
    sim: SimFlags,
    /// Edge list destination (CSV: source,target,t,c,d)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Memory ratios [default: 0.1,0.2,...,0.9]
    #[arg(long, value_delimiter = ',')]
    mus: Option<Vec<f64>>,
    /// Optimism thresholds [default: 0.0,0.1,...,0.9]
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Tolerances [default: 1,2,3]
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<u32>>,
    /// Forgetting strategies [default: FC,FR,FD]
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<ForgettingStrategy>>,
    /// Error rates [default: 0.1]
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Recommendation modes [default: pooled]
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<RecommendationMode>>,
    /// Realizations per cell [default: 30]
    #[arg(long)]
    realizations: Option<u32>,
    /// Base seed; falls back to $DILEMMA_SEED [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Cutoff for the FC/FD forgetting lists [default: neutral]
    #[arg(long)]
    forget_cutoff: Option<ForgetCutoff>,
    /// Population size [default: 100]
    #[arg(long)]
    n: Option<usize>,
    /// Average matchings per pair [default: 30]
    #[arg(long)]
    tau: Option<u32>,
    /// Payoff matrix as S,P,R,T [default: 0,1,3,5]
    #[arg(long)]
    payoffs: Option<PayoffMatrix>,
    /// Worker threads; results do not depend on it [default: all cores]
    #[arg(long)]
    jobs: Option<usize>,
    /// JSON sweep spec; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Result CSV destination
    #[arg(long)]
    out: PathBuf,
    /// Manifest destination [default: <out>.json]
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Event log written by `run --log`
    #[arg(long)]
    log: PathBuf,
    /// Saved stdout of the run that wrote the log
    #[arg(long)]
    expect: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
    Mismatch,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(flag: &str, err: ConfigError) -> Failure {
    Failure::Usage(format!("--{flag}: {err}"))
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            Failure::Usage(format!(
                "{SEED_ENV}: cannot parse {v:?} as an unsigned integer"
            ))
        }),
        Err(_) => Ok(None),
    }
}

/// Reads a JSON config and reports whether it sets `seed_key`.
fn load_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    seed_key: &str,
) -> Result<(T, bool), Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| Failure::Usage(format!("--config: {e:#}")))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("--config: {}: {e}", path.display())))?;
    let has_seed = value.get(seed_key).is_some();
    let parsed = serde_json::from_value(value)
        .map_err(|e| Failure::Usage(format!("--config: {}: {e}", path.display())))?;
    Ok((parsed, has_seed))
}

impl SimFlags {
    fn resolve(&self) -> Result<SimConfig, Failure> {
        let (mut c, config_seed) = match &self.config {
            Some(path) => load_json::<SimConfig>(path, "seed")?,
            None => (SimConfig::default(), false),
        };
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.mu {
            c.mu = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.beta {
            c.beta = v;
        }
        if let Some(v) = self.forget {
            c.forgetting = v;
        }
        if let Some(v) = self.forget_cutoff {
            c.forget_cutoff = v;
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.payoffs {
            c.payoffs = v;
        }
        if let Some(v) = self.mode {
            c.recommendation_mode = v;
        }
        match self.seed {
            Some(s) => c.seed = s,
            None if !config_seed => {
                if let Some(s) = env_seed()? {
                    c.seed = s;
                }
            }
            None => {}
        }
        c.validate().map_err(|e| {
            let flag = e.field().unwrap_or("config");
            usage(flag, e)
        })?;
        Ok(c)
    }
}

impl SweepArgs {
    fn resolve(&self) -> Result<SweepSpec, Failure> {
        let (mut s, config_seed) = match &self.config {
            Some(path) => load_json::<SweepSpec>(path, "base_seed")?,
            None => (SweepSpec::default(), false),
        };
        if let Some(v) = &self.mus {
            s.mus = v.clone();
        }
        if let Some(v) = &self.alphas {
            s.alphas = v.clone();
        }
        if let Some(v) = &self.betas {
            s.betas = v.clone();
        }
        if let Some(v) = &self.strategies {
            s.strategies = v.clone();
        }
        if let Some(v) = &self.epsilons {
            s.epsilons = v.clone();
        }
        if let Some(v) = &self.modes {
            s.modes = v.clone();
        }
        if let Some(v) = self.realizations {
            s.realizations = v;
        }
        if let Some(v) = self.forget_cutoff {
            s.forget_cutoff = v;
        }
        if let Some(v) = self.n {
            s.n = v;
        }
        if let Some(v) = self.tau {
            s.tau = v;
        }
        if let Some(v) = self.payoffs {
            s.payoffs = v;
        }
        match self.seed {
            Some(v) => s.base_seed = v,
            None if !config_seed => {
                if let Some(v) = env_seed()? {
                    s.base_seed = v;
                }
            }
            None => {}
        }
        if self.jobs == Some(0) {
            return Err(Failure::Usage("--jobs: must be at least 1".into()));
        }
        s.validate().map_err(|e| {
            let flag = match e.field() {
                Some("mu") => "mus",
                Some("alpha") => "alphas",
                Some("beta") => "betas",
                Some("epsilon") => "epsilons",
                Some(other) => other,
                None => "config",
            };
            usage(flag, e)
        })?;
        Ok(s)
    }
}

fn print_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (k, v) in pairs {
        writeln!(out, "{k}={v}")?;
    }
    out.flush()?;
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let config = args.sim.resolve()?;
    let mut realization = Realization::new(config).map_err(|e| Failure::Runtime(e.into()))?;
    match &args.log {
        None => realization.run_to_end(),
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let types = realization.world().types().to_vec();
            let mut writer =
                EventLogWriter::new(BufWriter::new(file), &types, &realization.config().payoffs)
                    .with_context(|| format!("writing {}", path.display()))?;
            let mut failed = None;
            realization.run_with(|ev| {
                if failed.is_none() {
                    if let Err(e) = writer.write(ev) {
                        failed = Some(e);
                    }
                }
            });
            if let Some(e) = failed {
                return Err(anyhow::Error::new(e)
                    .context(format!("writing {}", path.display()))
                    .into());
            }
            writer
                .finish()
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("event log written to {}", path.display());
        }
    }
    let result = realization.result();
    print_pairs(result.key_values())?;
    Ok(())
}

fn graph(args: &GraphArgs) -> Result<(), Failure> {
    let config = args.sim.resolve()?;
    let mut realization = Realization::new(config).map_err(|e| Failure::Runtime(e.into()))?;
    realization.run_to_end();
    let edges = export_perception_graph(realization.world());
    let path = &args.out;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    write_perception_graph(&edges, &mut out)
        .and_then(|_| out.flush())
        .with_context(|| format!("writing {}", path.display()))?;
    print_pairs([
        ("edges", edges.len().to_string()),
        ("out", path.display().to_string()),
    ])?;
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let spec = args.resolve()?;
    let manifest = args.manifest.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".json");
        PathBuf::from(p)
    });
    let total = spec.cell_count();
    eprintln!(
        "sweeping {total} cells x {} realizations",
        spec.realizations
    );
    let on_cell = |index: usize, row: &harness::ResultRow| {
        let p = &row.params;
        eprintln!(
            "cell {index}/{total}: mu={} alpha={} beta={} forget={} epsilon={} mode={}",
            p.mu, p.alpha, p.beta, p.forgetting, p.epsilon, p.mode
        );
    };
    let table = match args.jobs {
        Some(jobs) => harness::run_sweep_with_jobs(&spec, jobs, on_cell),
        None => harness::run_sweep(&spec, on_cell),
    }
    .map_err(|e| Failure::Runtime(e.into()))?;
    harness::write_results(&table, &spec, &args.out, &manifest)
        .map_err(|e| Failure::Runtime(e.into()))?;
    print_pairs([
        ("cells", table.rows.len().to_string()),
        ("realizations", spec.realizations.to_string()),
        ("base_seed", spec.base_seed.to_string()),
        ("out", args.out.display().to_string()),
        ("manifest", manifest.display().to_string()),
    ])?;
    Ok(())
}

fn replay(args: &ReplayArgs) -> Result<(), Failure> {
    let open = |path: &Path| {
        File::open(path)
            .map(BufReader::new)
            .with_context(|| format!("opening {}", path.display()))
    };
    let summary = eventlog::replay(open(&args.log)?)
        .with_context(|| format!("replaying {}", args.log.display()))?;
    let phi = summary
        .phi()
        .map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
    let mut pairs = vec![
        ("match_events", summary.match_events.to_string()),
        ("games_played", summary.games_played.to_string()),
        ("eta_cd", summary.eta_cd.to_string()),
        ("eta_dc", summary.eta_dc.to_string()),
        ("phi", phi),
        ("total_payoff", format!("{:.6}", summary.total_payoff())),
        ("payoff_mismatches", summary.payoff_mismatches.to_string()),
    ];
    let mut diffs = Vec::new();
    if let Some(path) = &args.expect {
        let expected = eventlog::parse_key_values(open(path)?)
            .with_context(|| format!("reading {}", path.display()))?;
        diffs = summary.compare(&expected);
        pairs.push(("agreement", diffs.is_empty().to_string()));
    } else if summary.payoff_mismatches > 0 {
        diffs.push(format!(
            "{} played games carry payoffs inconsistent with the matrix",
            summary.payoff_mismatches
        ));
    }
    print_pairs(pairs)?;
    if diffs.is_empty() {
        Ok(())
    } else {
        for d in &diffs {
            eprintln!("mismatch: {d}");
        }
        Err(Failure::Mismatch)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Replay(a) => replay(a),
        Command::Graph(a) => graph(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Mismatch) => ExitCode::from(3),
    }
}
