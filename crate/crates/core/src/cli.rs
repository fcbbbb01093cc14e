//! Command-line front end.
//!
//! Every command builds an [`OutputRecord`] and, for grid-shaped commands, a
//! table. Rendering picks one of them according to `--format`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analytic;
use crate::chains::ChainVariant;
use crate::decision::{self, AttractedRule, Axis, SweepCells, SweepMode, SweepPlan};
use crate::economics::{self, DosScenario, NetworkParams};
use crate::error::{Error, Result};
use crate::harness::{self, full_precision, CheckResult, TableId};
use crate::model::{
    rer, Actor, AttackerStrategy, MinerPower, PowerSplit, ProfitQuery, RushingAbility,
};
use crate::montecarlo::{simulate, SimConfig};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "FORKBENCH_SEED";
/// Seed used when neither the flag nor the environment provides one.
pub const DEFAULT_SEED: u64 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECKS_FAILED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(
    name = "forkbench",
    version,
    about = "Partial selfish mining revenue calculus and simulator"
)]
pub struct Cli {
    /// Flat TOML file whose keys mirror the flags; flags on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write the output to this file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form shares of every actor for one strategy.
    Profit(ProfitArgs),
    /// Monte Carlo run of one strategy.
    Simulate(SimulateArgs),
    /// Recompute one of the five reference grids.
    Tables(TablesArgs),
    /// Best strategy or minimal attracted power over an (alpha_a, gamma) grid.
    Sweep(SweepArgs),
    /// Greedy versus public mining for a single rational miner.
    Miner(MinerArgs),
    /// Attack economics calculators.
    #[command(subcommand)]
    Econ(EconCommand),
    /// Run the reproduction checks; exits with 3 if any fails.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: AttackerStrategy,
    #[arg(long)]
    pub alpha_a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha_i: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct ProfitArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Simulate a miner-tracking chain instead of the strategy's own one.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<ChainVariant>,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[arg(long, value_parser = parse_table)]
    pub table: TableId,
    #[arg(long, default_value_t = harness::DEFAULT_ROUNDS)]
    pub rounds: u64,
    /// Skip the simulation and report closed forms only.
    #[arg(long)]
    pub analytic_only: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Verdict,
    MinAlphaI,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `start:end`, or a single value.
    #[arg(long, value_parser = parse_range)]
    pub alpha_a_range: (f64, f64),
    /// `start:end`, or a single value.
    #[arg(long, value_parser = parse_range, default_value = "0")]
    pub gamma_range: (f64, f64),
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, conflicts_with = "rational_fraction")]
    pub alpha_i: Option<f64>,
    /// Attract this fraction of the non-attacker power.
    #[arg(long)]
    pub rational_fraction: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Verdict)]
    pub mode: ModeArg,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MinerArgs {
    #[arg(long)]
    pub alpha_a: f64,
    #[arg(long)]
    pub alpha_k: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, value_parser = parse_strategy, default_value = "psm")]
    pub attacker_strategy: AttackerStrategy,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    #[arg(long, default_value_t = NetworkParams::default().difficulty)]
    pub difficulty: f64,
    /// Average block interval in seconds.
    #[arg(long, default_value_t = NetworkParams::default().t_avg)]
    pub t_avg: f64,
    /// Probability that the network finds a block within one interval.
    #[arg(long, default_value_t = NetworkParams::default().p_e)]
    pub p_e: f64,
}

impl NetworkArgs {
    fn params(&self) -> Result<NetworkParams> {
        NetworkParams::new(self.difficulty, self.t_avg, self.p_e)
    }
}

#[derive(Debug, Subcommand)]
pub enum EconCommand {
    /// Network hashrate implied by the difficulty.
    Hashrate {
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Seconds needed to brute force the hidden bytes.
    SearchTime {
        #[arg(long)]
        bytes: u32,
        #[arg(long)]
        fraction: f64,
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Hidden bytes whose brute force takes the given time.
    Bytes {
        #[arg(long)]
        time: f64,
        #[arg(long)]
        fraction: f64,
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Probability of finding a block within the given time.
    FindProb {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        alpha_e: f64,
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Whether reneging on disclosure pays despite the collateral.
    Dos {
        /// Collateral in blocks.
        #[arg(long)]
        n: u32,
        /// Challenge period in seconds.
        #[arg(long)]
        tc: f64,
        #[arg(long)]
        alpha_a: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha_i: f64,
        #[command(flatten)]
        net: NetworkArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Tables,
    Equivalence,
    Headline,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = harness::DEFAULT_ROUNDS)]
    pub rounds: u64,
    /// Skip the simulated cells of the grids.
    #[arg(long)]
    pub analytic_only: bool,
    /// Random scenarios per chain variant in the equivalence suite.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

fn parse_strategy(s: &str) -> std::result::Result<AttackerStrategy, String> {
    s.parse()
}

fn parse_variant(s: &str) -> std::result::Result<ChainVariant, String> {
    s.parse()
}

fn parse_table(s: &str) -> std::result::Result<TableId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let number = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a number"))
    };
    match s.split_once(':') {
        Some((a, b)) => Ok((number(a)?, number(b)?)),
        None => number(s).map(|x| (x, x)),
    }
}

/// Machine-readable result of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub results: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub error_bounds: Option<BTreeMap<String, f64>>,
}

impl OutputRecord {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            params: BTreeMap::new(),
            results: BTreeMap::new(),
            seed: None,
            error_bounds: None,
        }
    }

    fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    fn result(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.results.insert(key.to_string(), value.into());
        self
    }
}

/// A cell of a plot-ready table.
#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    /// Decimals for numbers in text output.
    text_decimals: usize,
}

struct Output {
    record: OutputRecord,
    table: Option<Table>,
    /// Extra lines for text output, printed before the record.
    notes: Vec<String>,
    exit: i32,
}

impl From<OutputRecord> for Output {
    fn from(record: OutputRecord) -> Self {
        Self {
            record,
            table: None,
            notes: Vec::new(),
            exit: EXIT_OK,
        }
    }
}

/// Parses `args` (program name first), runs the command and writes its
/// output. Returns the process exit code.
pub fn run<I, T>(args: I, env_seed: Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match with_config(args) {
        Ok(a) => a,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let env_seed = match env_seed
        .map(|s| s.trim().parse::<u64>().map_err(|_| s))
        .transpose()
    {
        Ok(seed) => seed,
        Err(s) => {
            let _ = writeln!(err, "error: {SEED_ENV}={s:?} is not an unsigned integer");
            return EXIT_USAGE;
        }
    };
    let output = match execute(&cli.command, env_seed) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return if e.is_validation() {
                EXIT_USAGE
            } else {
                EXIT_INTERNAL
            };
        }
    };
    let rendered = render(&output, cli.format);
    let written = match &cli.out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => out
            .write_all(rendered.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_INTERNAL;
    }
    output.exit
}

/// Inserts the flags of a `--config` file right after the subcommand path,
/// skipping keys the subcommand does not accept and keys already given on
/// the command line.
fn with_config(args: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let strings: Vec<String> = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let Some(path) = config_path(&strings) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| format!("invalid config {}: {e}", path.display()))?;

    let (insert_at, accepted) = subcommand_flags(&strings);
    let given: Vec<&str> = strings
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let mut injected = Vec::new();
    for (key, value) in &table {
        let flag = key.replace('_', "-");
        if !accepted.contains(&flag) || given.contains(&flag.as_str()) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => injected.push(format!("--{flag}")),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => injected.extend([format!("--{flag}"), s.clone()]),
            toml::Value::Integer(i) => injected.extend([format!("--{flag}"), i.to_string()]),
            toml::Value::Float(x) => injected.extend([format!("--{flag}"), x.to_string()]),
            other => return Err(format!("config key `{key}` has unsupported value {other}")),
        }
    }
    let mut merged = args;
    let tail = merged.split_off(insert_at.min(merged.len()));
    merged.extend(injected.into_iter().map(OsString::from));
    merged.extend(tail);
    Ok(merged)
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    args.iter().enumerate().find_map(|(k, a)| {
        if a == "--config" {
            args.get(k + 1).map(PathBuf::from)
        } else {
            a.strip_prefix("--config=").map(PathBuf::from)
        }
    })
}

/// Position right after the subcommand path and the long flags accepted there.
fn subcommand_flags(args: &[String]) -> (usize, Vec<String>) {
    let root = Cli::command();
    let mut cmd = &root;
    let mut pos = 1;
    let mut k = 1;
    while k < args.len() {
        let a = &args[k];
        if a.starts_with("--") {
            let takes_value = !a.contains('=')
                && cmd
                    .get_arguments()
                    .any(|arg| arg.get_long() == Some(&a[2..]) && arg.get_action().takes_values());
            k += if takes_value { 2 } else { 1 };
            continue;
        }
        match cmd.find_subcommand(a) {
            Some(sub) => {
                cmd = sub;
                k += 1;
                pos = k;
            }
            None => break,
        }
    }
    let flags = cmd
        .get_arguments()
        .chain(root.get_arguments())
        .filter_map(|a| a.get_long())
        .map(String::from);
    (pos, flags.collect())
}

fn resolve_seed(flag: Option<u64>, env: Option<u64>) -> u64 {
    flag.or(env).unwrap_or(DEFAULT_SEED)
}

fn resolve_workers(flag: Option<usize>) -> usize {
    flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn execute(command: &Command, env_seed: Option<u64>) -> Result<Output> {
    match command {
        Command::Profit(a) => cmd_profit(a).map(Output::from),
        Command::Simulate(a) => cmd_simulate(a, env_seed).map(Output::from),
        Command::Tables(a) => cmd_tables(a, env_seed),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Miner(a) => cmd_miner(a).map(Output::from),
        Command::Econ(e) => cmd_econ(e).map(Output::from),
        Command::Check(a) => cmd_check(a, env_seed),
    }
}

fn scenario_query(s: &ScenarioArgs) -> Result<ProfitQuery> {
    ProfitQuery::new(
        PowerSplit::with_attracted(s.alpha_a, s.alpha_i)?,
        RushingAbility::new(s.gamma)?,
        s.strategy,
    )
}

fn scenario_params(record: OutputRecord, s: &ScenarioArgs) -> OutputRecord {
    record
        .param("strategy", s.strategy.name())
        .param("alpha_a", s.alpha_a)
        .param("alpha_i", s.alpha_i)
        .param("gamma", s.gamma)
}

fn cmd_profit(args: &ProfitArgs) -> Result<OutputRecord> {
    let q = scenario_query(&args.scenario)?;
    let shares = analytic::profits(&q)?;
    let mut record = scenario_params(OutputRecord::new("profit"), &args.scenario)
        .result("share_attacker", shares.share_attacker)
        .result("share_attracted", shares.share_attracted)
        .result("share_honest", shares.share_honest);
    // Undefined when the baseline earns nothing, e.g. a powerless attacker.
    let honest = analytic::honest_profit(&q.powers);
    if let Ok(r) = rer(shares.share_attacker, honest) {
        record = record.result("rer_vs_honest", r.value());
    }
    let selfish = analytic::selfish_profit(q.powers.alpha_a(), q.gamma)?;
    if let Ok(r) = rer(shares.share_attacker, selfish) {
        record = record.result("rer_vs_selfish", r.value());
    }
    Ok(record)
}

fn default_variant(strategy: AttackerStrategy) -> ChainVariant {
    match strategy {
        AttackerStrategy::Honest => ChainVariant::Honest,
        AttackerStrategy::Selfish => ChainVariant::Selfish,
        AttackerStrategy::Psm => ChainVariant::PsmAttacker,
        AttackerStrategy::Apsm => ChainVariant::ApsmAttacker,
    }
}

fn cmd_simulate(args: &SimulateArgs, env_seed: Option<u64>) -> Result<OutputRecord> {
    let s = &args.scenario;
    let variant = args.variant.unwrap_or_else(|| default_variant(s.strategy));
    let powers = PowerSplit::with_attracted(s.alpha_a, s.alpha_i)?;
    let gamma = RushingAbility::new(s.gamma)?;
    let seed = resolve_seed(args.run.seed, env_seed);
    let cfg = SimConfig {
        rounds: args.rounds,
        seed,
        workers: resolve_workers(args.run.workers),
        variant,
    };
    let report = simulate(&powers, gamma, &cfg)?;

    let mut record = scenario_params(OutputRecord::new("simulate"), s)
        .param("variant", variant.name())
        .param("rounds", args.rounds)
        .result("rounds_executed", report.rounds_executed)
        .result("batches", report.batches);
    let mut bounds = BTreeMap::new();
    for actor in [
        Actor::Attacker,
        Actor::Attracted,
        Actor::Honest,
        Actor::MinerK,
    ] {
        if actor == Actor::MinerK && !variant.tracks_miner_k() {
            continue;
        }
        let name = actor.name();
        record = record
            .result(&format!("share_{name}"), report.shares.get(actor))
            .result(&format!("mined_{name}"), report.mined.get(actor))
            .result(&format!("credited_{name}"), report.credited.get(actor))
            .result(&format!("orphaned_{name}"), report.orphaned.get(actor));
        bounds.insert(format!("share_{name}"), report.std_errors.get(actor));
        bounds.insert(
            format!("share_{name}_binomial"),
            report.binomial_std_errors.get(actor),
        );
    }
    record.seed = Some(seed);
    record.error_bounds = Some(bounds);
    Ok(record)
}

fn cmd_tables(args: &TablesArgs, env_seed: Option<u64>) -> Result<Output> {
    let seed = resolve_seed(args.run.seed, env_seed);
    let rounds = if args.analytic_only {
        0
    } else {
        SimConfig {
            rounds: args.rounds,
            seed,
            workers: 1,
            variant: ChainVariant::Honest,
        }
        .validate()?;
        args.rounds
    };
    let table = args.table;
    let rows = harness::table_rows(table, rounds, seed, resolve_workers(args.run.workers))?;

    let (fixed_name, fixed_value) = table.fixed();
    let mut record = OutputRecord::new("tables")
        .param("table", table.number())
        .param(fixed_name, fixed_value)
        .param("alpha_param", table.param_name())
        .param("units", "percent");
    if rounds > 0 {
        record = record.param("rounds", rounds);
        record.seed = Some(seed);
    }
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "gamma": r.gamma,
                "alpha_param": r.param,
                "simulated": r.simulated,
                "analytic": r.analytic,
                "abs_diff": r.simulated.map(|s| (s - r.analytic).abs()),
                "sigma": r.sigma,
                "published_simulated": r.published_simulated,
                "published_analytic": r.published_analytic,
            })
        })
        .collect();
    record = record.result("rows", json_rows);
    if rounds > 0 {
        let bounds = rows
            .iter()
            .map(|r| {
                (
                    format!("gamma={}/{}={}", r.gamma, table.param_name(), r.param),
                    r.sigma.unwrap_or(0.0),
                )
            })
            .collect();
        record.error_bounds = Some(bounds);
    }

    let opt = |x: Option<f64>| x.map_or(Cell::Empty, Cell::Num);
    let table_rows = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Num(r.gamma),
                Cell::Num(r.param),
                opt(r.simulated),
                Cell::Num(r.analytic),
                opt(r.simulated.map(|s| (s - r.analytic).abs())),
                opt(r.sigma),
                Cell::Num(r.published_simulated),
                Cell::Num(r.published_analytic),
            ]
        })
        .collect();
    Ok(Output {
        record,
        table: Some(Table {
            header: vec![
                "gamma",
                "alpha_param",
                "simulated",
                "analytic",
                "abs_diff",
                "sigma",
                "published_simulated",
                "published_analytic",
            ],
            rows: table_rows,
            text_decimals: 2,
        }),
        notes: Vec::new(),
        exit: EXIT_OK,
    })
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers).max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    pool.install(f)
}

fn cmd_sweep(args: &SweepArgs) -> Result<Output> {
    let attracted = match (args.alpha_i, args.rational_fraction) {
        (_, Some(f)) => AttractedRule::RationalFraction(f),
        (i, None) => AttractedRule::Fixed(i.unwrap_or(0.0)),
    };
    let plan = SweepPlan {
        alpha_a: Axis::new(args.alpha_a_range.0, args.alpha_a_range.1, args.step)?,
        gamma: Axis::new(args.gamma_range.0, args.gamma_range.1, args.step)?,
        attracted,
        mode: match args.mode {
            ModeArg::Verdict => SweepMode::Verdict,
            ModeArg::MinAlphaI => SweepMode::MinAlphaI,
        },
    };
    let grid = with_workers(args.workers, || decision::sweep(&plan))?;

    let mut record = OutputRecord::new("sweep")
        .param(
            "alpha_a_range",
            vec![args.alpha_a_range.0, args.alpha_a_range.1],
        )
        .param("gamma_range", vec![args.gamma_range.0, args.gamma_range.1])
        .param("step", args.step)
        .param(
            "mode",
            if plan.mode == SweepMode::Verdict {
                "verdict"
            } else {
                "min-alpha-i"
            },
        );
    record = match attracted {
        AttractedRule::Fixed(i) => record.param("alpha_i", i),
        AttractedRule::RationalFraction(f) => record.param("rational_fraction", f),
    };

    let table = match &grid.cells {
        SweepCells::Verdict(cells) => {
            let profit = |c: &decision::VerdictCell, s| c.verdict.profits.get(&s).copied();
            let rows = cells
                .iter()
                .map(|c| {
                    let mut row = vec![
                        Cell::Num(c.alpha_a),
                        Cell::Num(c.gamma),
                        Cell::Num(c.alpha_i),
                    ];
                    row.extend(
                        AttackerStrategy::ALL.map(|s| profit(c, s).map_or(Cell::Empty, Cell::Num)),
                    );
                    row.push(Cell::Text(c.verdict.best.name().to_string()));
                    row
                })
                .collect();
            let json_rows: Vec<Value> = cells
                .iter()
                .map(|c| {
                    json!({
                        "alpha_a": c.alpha_a,
                        "gamma": c.gamma,
                        "alpha_i": c.alpha_i,
                        "r_honest": profit(c, AttackerStrategy::Honest),
                        "r_selfish": profit(c, AttackerStrategy::Selfish),
                        "r_psm": profit(c, AttackerStrategy::Psm),
                        "r_apsm": profit(c, AttackerStrategy::Apsm),
                        "best": c.verdict.best.name(),
                    })
                })
                .collect();
            record = record.result("cells", json_rows);
            Table {
                header: vec![
                    "alpha_a",
                    "gamma",
                    "alpha_i",
                    "r_honest",
                    "r_selfish",
                    "r_psm",
                    "r_apsm",
                    "best",
                ],
                rows,
                text_decimals: 4,
            }
        }
        SweepCells::MinAlphaI(cells) => {
            let rows = cells
                .iter()
                .map(|c| {
                    vec![
                        Cell::Num(c.alpha_a),
                        Cell::Num(c.gamma),
                        c.min_alpha_i.map_or(Cell::Empty, Cell::Num),
                    ]
                })
                .collect();
            let json_rows: Vec<Value> = cells
                .iter()
                .map(|c| json!({ "alpha_a": c.alpha_a, "gamma": c.gamma, "min_alpha_i": c.min_alpha_i }))
                .collect();
            record = record.result("cells", json_rows);
            Table {
                header: vec!["alpha_a", "gamma", "min_alpha_i"],
                rows,
                text_decimals: 4,
            }
        }
    };
    Ok(Output {
        record,
        table: Some(table),
        notes: Vec::new(),
        exit: EXIT_OK,
    })
}

fn cmd_miner(args: &MinerArgs) -> Result<OutputRecord> {
    let k = MinerPower::new(args.alpha_k)?.paired_with(args.alpha_a)?;
    let g = RushingAbility::new(args.gamma)?;
    let strategy = args.attacker_strategy;
    let mut record = OutputRecord::new("miner")
        .param("alpha_a", args.alpha_a)
        .param("alpha_k", args.alpha_k)
        .param("gamma", args.gamma)
        .param("attacker_strategy", strategy.name());
    match strategy {
        AttackerStrategy::Psm => {
            record = record
                .result(
                    "greedy_share",
                    analytic::psm_miner_greedy_profit(args.alpha_a, k)?,
                )
                .result(
                    "public_share",
                    analytic::psm_miner_public_profit(args.alpha_a, k, g)?,
                )
                .result("rer", analytic::psm_miner_rer(args.alpha_a, k, g)?.value())
                .result("threshold", analytic::join_threshold(args.alpha_a, g)?);
        }
        AttackerStrategy::Apsm => {
            record = record
                .result(
                    "greedy_share",
                    analytic::apsm_miner_greedy_profit(args.alpha_a, k)?,
                )
                .result(
                    "public_share",
                    analytic::apsm_miner_public_profit(args.alpha_a, k, g)?,
                )
                .result("rer", analytic::apsm_miner_rer(args.alpha_a, k, g)?.value());
        }
        AttackerStrategy::Honest | AttackerStrategy::Selfish => {}
    }
    let verdict = decision::best_miner_strategy(args.alpha_a, k, g, strategy)?;
    Ok(record.result("verdict", verdict.to_string()))
}

fn net_params(record: OutputRecord, net: &NetworkParams) -> OutputRecord {
    record
        .param("difficulty", net.difficulty)
        .param("t_avg", net.t_avg)
        .param("p_e", net.p_e)
}

fn cmd_econ(command: &EconCommand) -> Result<OutputRecord> {
    Ok(match command {
        EconCommand::Hashrate { net } => {
            let net = net.params()?;
            net_params(OutputRecord::new("econ hashrate"), &net)
                .result("hashrate", economics::hashrate_from_difficulty(&net)?)
        }
        EconCommand::SearchTime {
            bytes,
            fraction,
            net,
        } => {
            let net = net.params()?;
            net_params(OutputRecord::new("econ search-time"), &net)
                .param("bytes", *bytes)
                .param("fraction", *fraction)
                .result(
                    "seconds",
                    economics::secret_search_time(*bytes, *fraction, &net)?,
                )
        }
        EconCommand::Bytes {
            time,
            fraction,
            net,
        } => {
            let net = net.params()?;
            net_params(OutputRecord::new("econ bytes"), &net)
                .param("time", *time)
                .param("fraction", *fraction)
                .result(
                    "hidden_bytes",
                    economics::required_hidden_bytes(*time, *fraction, &net)?,
                )
        }
        EconCommand::FindProb { t, alpha_e, net } => {
            let net = net.params()?;
            net_params(OutputRecord::new("econ find-prob"), &net)
                .param("t", *t)
                .param("alpha_e", *alpha_e)
                .result(
                    "probability",
                    economics::find_probability(*t, *alpha_e, &net)?,
                )
        }
        EconCommand::Dos {
            n,
            tc,
            alpha_a,
            alpha_i,
            net,
        } => {
            let net = net.params()?;
            let s = DosScenario {
                collateral_blocks: *n,
                challenge_period: *tc,
                powers: PowerSplit::with_attracted(*alpha_a, *alpha_i)?,
            };
            let v = economics::dos_viability(&s, &net)?;
            net_params(OutputRecord::new("econ dos"), &net)
                .param("n", *n)
                .param("tc", *tc)
                .param("alpha_a", *alpha_a)
                .param("alpha_i", *alpha_i)
                .result("viable", v.viable)
                .result("expected_blocks", v.expected_blocks)
                .result("threshold", v.threshold)
        }
    })
}

fn cmd_check(args: &CheckArgs, env_seed: Option<u64>) -> Result<Output> {
    let seed = resolve_seed(args.run.seed, env_seed);
    let rounds = if args.analytic_only {
        0
    } else {
        SimConfig {
            rounds: args.rounds,
            seed,
            workers: 1,
            variant: ChainVariant::Honest,
        }
        .validate()?;
        args.rounds
    };
    let workers = resolve_workers(args.run.workers);
    let mut checks: Vec<CheckResult> = Vec::new();
    if matches!(args.suite, Suite::All | Suite::Tables) {
        for table in TableId::ALL {
            checks.extend(harness::run_table_checks(table, rounds, seed, workers));
        }
    }
    if matches!(args.suite, Suite::All | Suite::Equivalence) {
        checks.extend(harness::run_equivalence_checks(args.points, seed));
    }
    if matches!(args.suite, Suite::All | Suite::Headline) {
        checks.extend(harness::run_headline_checks());
    }
    checks.sort_by(|a, b| a.id.cmp(&b.id));
    let failed = checks.iter().filter(|c| !c.pass).count();

    let mut record = OutputRecord::new("check")
        .param("suite", format!("{:?}", args.suite).to_lowercase())
        .param("points", args.points)
        .result("passed", checks.len() - failed)
        .result("failed", failed)
        .result(
            "checks",
            serde_json::to_value(&checks).map_err(|e| Error::Io(e.to_string()))?,
        );
    if rounds > 0 {
        record = record.param("rounds", rounds);
    }
    record.seed = Some(seed);

    let rows = checks
        .iter()
        .map(|c| {
            vec![
                Cell::Text(c.id.clone()),
                Cell::Num(c.expected),
                Cell::Text(c.source.to_string()),
                Cell::Num(c.computed),
                Cell::Num(c.tolerance),
                Cell::Text(c.pass.to_string()),
                Cell::Text(c.note.clone()),
            ]
        })
        .collect();
    let mut notes: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| {
            format!(
                "FAIL {} expected {} got {} (tolerance {}) {}",
                c.id, c.expected, c.computed, c.tolerance, c.note
            )
        })
        .collect();
    notes.push(harness::summary(&checks));
    Ok(Output {
        record,
        table: Some(Table {
            header: vec![
                "id",
                "expected",
                "source",
                "computed",
                "tolerance",
                "pass",
                "note",
            ],
            rows,
            text_decimals: 6,
        }),
        notes,
        exit: if failed == 0 {
            EXIT_OK
        } else {
            EXIT_CHECKS_FAILED
        },
    })
}

fn render(output: &Output, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&output.record).expect("records serialize");
            s.push('\n');
            s
        }
        Format::Csv => match &output.table {
            Some(t) => {
                let mut s = table_csv(t);
                if output.record.command == "check" {
                    s.push_str(output.notes.last().map_or("", String::as_str));
                    s.push('\n');
                }
                s
            }
            None => record_csv(&output.record),
        },
        Format::Text => match (&output.table, output.record.command.as_str()) {
            (_, "check") => output.notes.iter().map(|l| format!("{l}\n")).collect(),
            (Some(t), _) => table_text(t),
            (None, _) => record_text(&output.record),
        },
    }
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

fn table_csv(t: &Table) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(&t.header).expect("in-memory write");
        for row in &t.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(x) => full_precision(*x),
                Cell::Text(s) => s.clone(),
                Cell::Empty => String::new(),
            }))
            .expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    String::from_utf8(buf).expect("csv output is UTF-8")
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), full_precision),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Long format: one `section,key,value` row per entry, in a fixed order.
fn record_csv(r: &OutputRecord) -> String {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(["section", "key", "value"])
            .expect("in-memory write");
        w.write_record(["command", "command", &r.command])
            .expect("in-memory write");
        for (k, v) in &r.params {
            w.write_record(["params", k, &value_text(v)])
                .expect("in-memory write");
        }
        for (k, v) in &r.results {
            w.write_record(["results", k, &value_text(v)])
                .expect("in-memory write");
        }
        if let Some(seed) = r.seed {
            w.write_record(["seed", "seed", &seed.to_string()])
                .expect("in-memory write");
        }
        for (k, v) in r.error_bounds.iter().flatten() {
            w.write_record(["error_bounds", k, &full_precision(*v)])
                .expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    String::from_utf8(buf).expect("csv output is UTF-8")
}

fn text_number(key: &str, x: f64) -> String {
    if key.starts_with("rer") {
        format!("{:.2}%", x * 100.0)
    } else if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x}")
    } else {
        format!("{x:.6}")
    }
}

fn record_text(r: &OutputRecord) -> String {
    let mut s = format!("{}\n", r.command);
    for (k, v) in &r.params {
        let shown = match v {
            Value::String(text) => text.clone(),
            other => other.to_string(),
        };
        s.push_str(&format!("  {k}: {shown}\n"));
    }
    let mut line = |key: &str, v: &Value| {
        let shown = match v.as_f64() {
            Some(x) if !v.is_u64() => text_number(key, x),
            _ => value_text(v),
        };
        s.push_str(&format!("  {key}: {shown}\n"));
    };
    for (k, v) in &r.results {
        line(k, v);
    }
    if let Some(seed) = r.seed {
        s.push_str(&format!("  seed: {seed}\n"));
    }
    for (k, v) in r.error_bounds.iter().flatten() {
        s.push_str(&format!("  se({k}): {v:.6}\n"));
    }
    s
}

fn table_text(t: &Table) -> String {
    let cells: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| match c {
                    Cell::Num(x) => format!("{x:.*}", t.text_decimals),
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => "-".to_string(),
                })
                .collect()
        })
        .collect();
    let widths: Vec<usize> = t
        .header
        .iter()
        .enumerate()
        .map(|(k, h)| {
            cells
                .iter()
                .map(|r| r[k].len())
                .chain([h.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut s = String::new();
    let mut line = |fields: Vec<&str>| {
        let padded: Vec<String> = fields
            .iter()
            .zip(&widths)
            .map(|(f, w)| format!("{f:>w$}"))
            .collect();
        s.push_str(padded.join("  ").trim_end());
        s.push('\n');
    };
    line(t.header.clone());
    for row in &cells {
        line(row.iter().map(String::as_str).collect());
    }
    s
}

/// Reads an emitted JSON record back.
pub fn parse_record(json: &str) -> Result<OutputRecord> {
    serde_json::from_str(json).map_err(|e| Error::Parse {
        name: "output record",
        input: e.to_string(),
    })
}
