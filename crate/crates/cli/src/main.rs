use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hetnet_afra::afra::{self, Policy};
use hetnet_afra::ddnum;
use hetnet_afra::harness::{
    self, CompareReport, DdnumConfig, EngineConfig, GammaChoice,
};
use hetnet_afra::scenario::{generate_random, two_by_two_example, ScenarioParams};
use hetnet_afra::{Error, Topology};

const EXIT_CONFIG: u8 = 2;
const EXIT_TOPOLOGY: u8 = 3;
const EXIT_NO_GAMMA: u8 = 4;

#[derive(Parser)]
#[command(name = "afra", version, about = "Multi-RAT proportional-fair aggregation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random topology (or a named fixture) as JSON.
    Gen(GenArgs),
    /// Run the water-filling dynamics to equilibrium.
    RunAfra(RunAfraArgs),
    /// Run the dual-decomposition baseline.
    RunDdnum(RunDdnumArgs),
    /// Pick the baseline step size that reaches the target fastest.
    TuneGamma(TuneArgs),
    /// Step and message ratios of the baseline over the dynamics.
    Compare(CompareArgs),
    /// Convergence statistics over a grid of client and BS counts.
    Sweep(SweepArgs),
    /// Cross-check equilibria against the global optimum.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Random,
    Priority,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Random => Policy::RandomSequential,
            PolicyArg::Priority => Policy::PriorityByGain,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    /// Two clients, two BSs, many optimal allocations.
    TwoByTwo,
}

/// Where the topology comes from: a file, a fixture, or the generator.
#[derive(Args)]
struct TopoSource {
    #[arg(long, value_name = "PATH", conflicts_with = "fixture")]
    topo: Option<PathBuf>,
    #[arg(long, value_enum)]
    fixture: Option<Fixture>,
    /// Clients for a generated topology when no file or fixture is given.
    #[arg(long, default_value_t = 10)]
    clients: usize,
    #[arg(long, default_value_t = 10)]
    bss: usize,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "random")]
    policy: PolicyArg,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: usize,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig {
            epsilon: self.epsilon,
            policy: self.policy.into(),
            max_steps: self.max_steps,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    source: TopoSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunAfraArgs {
    #[command(flatten)]
    source: TopoSource,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also solve for the global optimum and report the gap to it.
    #[arg(long)]
    oracle: bool,
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy)]
enum GammaArg {
    Value(f64),
    Auto,
}

fn parse_gamma(s: &str) -> Result<GammaArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(GammaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(g) if g > 0.0 && g.is_finite() => Ok(GammaArg::Value(g)),
        _ => Err(format!("expected a positive number or `auto`, got `{s}`")),
    }
}

#[derive(Args)]
struct DdnumArgs {
    /// Explicit target potential; by default 95% of an AFRA run's equilibrium.
    #[arg(long)]
    target: Option<f64>,
    #[arg(long = "max-iterations", default_value_t = ddnum::DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
}

#[derive(Args)]
struct RunDdnumArgs {
    #[command(flatten)]
    source: TopoSource,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    ddnum: DdnumArgs,
    #[arg(long, value_parser = parse_gamma, default_value = "auto")]
    gamma: GammaArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    source: TopoSource,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    ddnum: DdnumArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 10)]
    clients: usize,
    #[arg(long, default_value_t = 10)]
    bss: usize,
    #[command(flatten)]
    engine: EngineArgs,
    #[command(flatten)]
    ddnum: DdnumArgs,
    #[arg(long, value_parser = parse_gamma, default_value = "auto")]
    gamma: GammaArg,
    /// First seed; runs use `seed..seed + seeds`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// Full per-seed report as JSON.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated client counts.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60,70,80,90,100")]
    clients: Vec<usize>,
    /// Comma-separated base-station counts.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    bss: Vec<usize>,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: TopoSource,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Topology(String),
    NoGamma,
    Runtime(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        let (code, msg) = match self {
            Failure::Config(m) => (EXIT_CONFIG, m),
            Failure::Topology(m) => (EXIT_TOPOLOGY, m),
            Failure::NoGamma => (EXIT_NO_GAMMA, Error::NoFeasibleGamma.to_string()),
            Failure::Runtime(m) => (1, m),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::EmptyTopology
            | Error::ZeroConnectivityClient { .. }
            | Error::NonPositiveWeight { .. }
            | Error::NegativeRate { .. }
            | Error::DimensionMismatch { .. }
            | Error::Format(_) => Failure::Topology(msg),
            Error::NoFeasibleGamma => Failure::NoGamma,
            Error::NoConvergence { .. } => Failure::Runtime(msg),
            _ => Failure::Config(msg),
        }
    }
}

type CliResult = Result<(), Failure>;

fn load_topology(source: &TopoSource, seed: u64) -> Result<Topology, Failure> {
    if let Some(path) = &source.topo {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Topology(format!("cannot read {}: {e}", path.display())))?;
        return Topology::from_json(&text).map_err(|e| Failure::Topology(e.to_string()));
    }
    match source.fixture {
        Some(Fixture::TwoByTwo) => Ok(two_by_two_example().topology),
        None => Ok(generate_random(&ScenarioParams::new(source.clients, source.bss, seed))?),
    }
}

fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn seed_list(first: u64, count: u64) -> Result<Vec<u64>, Failure> {
    if count == 0 {
        return Err(Failure::Config("--seeds must be at least 1".into()));
    }
    Ok((first..first + count).collect())
}

fn ddnum_config(args: &DdnumArgs, gamma: GammaArg) -> DdnumConfig {
    DdnumConfig {
        gamma: match gamma {
            GammaArg::Value(g) => GammaChoice::Fixed(g),
            GammaArg::Auto => GammaChoice::Auto,
        },
        target: args.target,
        max_iterations: args.max_iterations,
        ..DdnumConfig::default()
    }
}

fn gen(args: GenArgs) -> CliResult {
    let topo = load_topology(&args.source, args.seed)?;
    emit(args.out.as_deref(), &topo.to_json())
}

fn run_afra(args: RunAfraArgs) -> CliResult {
    let topo = load_topology(&args.source, args.seed)?;
    let engine = args.engine.config();
    let (run, summary) = harness::afra_summary(&topo, &engine, args.seed, args.oracle)?;
    if let Some(path) = &args.trace {
        emit(Some(path), &afra::trace_csv(&topo, run.trace()))?;
    }
    emit(args.summary.as_deref(), &summary.to_json())
}

fn run_ddnum(args: RunDdnumArgs) -> CliResult {
    let topo = load_topology(&args.source, args.seed)?;
    let config = ddnum_config(&args.ddnum, args.gamma);
    let target = harness::ddnum_target(&topo, &config, &args.engine.config(), args.seed)?;
    let run = harness::ddnum_run(&topo, &config, target)?;
    if let Some(path) = &args.trace {
        emit(Some(path), &ddnum::trace_csv(&topo, &run.trace))?;
    }
    emit(args.summary.as_deref(), &harness::ddnum_summary(&run, args.seed).to_json())
}

fn tune(args: TuneArgs) -> CliResult {
    let topo = load_topology(&args.source, args.seed)?;
    let config = ddnum_config(&args.ddnum, GammaArg::Auto);
    let target = harness::ddnum_target(&topo, &config, &args.engine.config(), args.seed)?;
    let run = harness::ddnum_run(&topo, &config, target)?;
    emit(args.out.as_deref(), &harness::ddnum_summary(&run, args.seed).to_json())
}

fn compare(args: CompareArgs) -> CliResult {
    let seeds = seed_list(args.seed, args.seeds)?;
    let scenario = ScenarioParams::new(args.clients, args.bss, args.seed);
    let config = ddnum_config(&args.ddnum, args.gamma);
    let report = harness::compare(&scenario, &args.engine.config(), &config, &seeds)?;
    println!("{}", CompareReport::TABLE_HEADER);
    println!("{}", report.table_row());
    if let Some(path) = &args.out {
        emit(Some(path), &harness::to_json(&report))?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> CliResult {
    let seeds = seed_list(args.seed, args.seeds)?;
    let cells: Vec<(usize, usize)> = args
        .bss
        .iter()
        .flat_map(|&m| args.clients.iter().map(move |&n| (n, m)))
        .collect();
    if cells.is_empty() {
        return Err(Failure::Config("empty sweep grid".into()));
    }
    let base = ScenarioParams::new(0, 0, args.seed);
    let rows = harness::sweep(&base, &cells, &args.engine.config(), &seeds)?;
    emit(args.out.as_deref(), &harness::sweep_table(&rows))
}

fn verify(args: VerifyArgs) -> CliResult {
    let seeds = seed_list(args.seed, args.seeds)?;
    let topo = load_topology(&args.source, args.seed)?;
    let report = harness::verify(&topo, &args.engine.config(), &seeds)?;
    emit(args.out.as_deref(), &harness::to_json(&report))?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Runtime("equilibrium checks failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::RunAfra(a) => run_afra(a),
        Command::RunDdnum(a) => run_ddnum(a),
        Command::TuneGamma(a) => tune(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}
