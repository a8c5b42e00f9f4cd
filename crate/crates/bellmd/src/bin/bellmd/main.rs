//! Command-line front end: attack curves, LP optima, simulation reports and
//! figure-data reproduction.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use bellmd::bell_model::Game;
use commands::{BudgetSpec, CurveParams, FigureId, FigureParams, LpParams, SimulateParams};
use output::OutFormat;

/// Environment variable capping internal parallelism.
const THREADS_ENV: &str = "BELLMD_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or domain errors in the request. Exit code 2.
    Usage(String),
    /// The LP solver failed or reported an unusable status. Exit code 4.
    Solver(String),
    /// I/O and serialization problems. Exit code 1.
    Io(anyhow::Error),
}

#[derive(Parser)]
#[command(
    name = "bellmd",
    version,
    about = "Adversarial Bell-test strategies under limited measurement dependence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical and quantum attack curves under the per-run max-prob level
    Curve(CurveArgs),
    /// Optimal correlated attacks at an L1 budget, by linear programming
    Lp(LpArgs),
    /// Monte-Carlo verification of an optimal CHSH profile
    Simulate(SimulateArgs),
    /// Emit the data series behind the standard figures
    Figure(FigureArgs),
}

#[derive(Args)]
struct CurveArgs {
    /// Game to evaluate (the curve command supports chsh)
    #[arg(long, value_parser = parse_game)]
    game: Option<Game>,
    /// Run count per block; repeat for several curves
    #[arg(long = "N")]
    n_runs: Vec<usize>,
    /// Measurement-dependence measure (P)
    #[arg(long)]
    measure: Option<String>,
    /// Evaluation grid start:stop:count
    #[arg(long)]
    grid: Option<String>,
    /// Also emit the quantum ceiling series
    #[arg(long)]
    quantum: bool,
    /// Also emit the infinite-run limit series
    #[arg(long)]
    asymptote: bool,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct LpArgs {
    /// Game: chsh or i3322
    #[arg(long, value_parser = parse_game)]
    game: Option<Game>,
    /// Run count per block
    #[arg(long = "N")]
    n_runs: Option<usize>,
    /// Single L1 budget
    #[arg(long)]
    m1: Option<f64>,
    /// Budget grid start:stop:count (alternative to --m1)
    #[arg(long = "m1-grid")]
    m1_grid: Option<String>,
    /// Points on the repeated-one-shot comparison curve
    #[arg(long, default_value_t = 200)]
    oneshot_points: usize,
    /// Dump the constraint system of the (single) budget program
    #[arg(long)]
    dump_lp: Option<PathBuf>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Runs per block
    #[arg(long = "N")]
    n_runs: Option<usize>,
    /// Per-run max-prob level in [1/4, 1/3]
    #[arg(long = "P")]
    p: Option<f64>,
    /// Number of simulated blocks
    #[arg(long)]
    trials: Option<u64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args)]
struct FigureArgs {
    /// Which figure dataset to produce
    #[arg(value_enum)]
    which: FigureId,
    /// Output directory
    #[arg(long, default_value = ".")]
    outdir: PathBuf,
    /// Override the number of curve points
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct IoArgs {
    /// Output path (stdout when omitted)
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// JSON file mirroring the flags; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_game(text: &str) -> Result<Game, String> {
    Game::from_name(&text.to_ascii_lowercase())
        .ok_or_else(|| format!("unknown game {text:?} (expected chsh or i3322)"))
}

/// File-based defaults for flags, one optional field per flag.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    game: Option<String>,
    #[serde(rename = "N")]
    n_runs: Option<serde_json::Value>,
    measure: Option<String>,
    grid: Option<String>,
    #[serde(rename = "m1")]
    m1: Option<f64>,
    #[serde(rename = "m1_grid")]
    m1_grid: Option<String>,
    #[serde(rename = "P")]
    p: Option<f64>,
    trials: Option<u64>,
    seed: Option<u64>,
    quantum: Option<bool>,
    asymptote: Option<bool>,
    output: Option<PathBuf>,
    format: Option<String>,
}

fn load_config(path: Option<&PathBuf>) -> Result<ConfigFile, CliError> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", p.display())))
        }
    }
}

fn config_n_list(value: &Option<serde_json::Value>) -> Result<Vec<usize>, CliError> {
    match value {
        None => Ok(Vec::new()),
        Some(serde_json::Value::Number(x)) => x
            .as_u64()
            .map(|v| vec![v as usize])
            .ok_or_else(|| CliError::Usage("config N must be a positive integer".into())),
        Some(serde_json::Value::Array(items)) => items
            .iter()
            .map(|item| {
                item.as_u64()
                    .map(|v| v as usize)
                    .ok_or_else(|| CliError::Usage("config N entries must be integers".into()))
            })
            .collect(),
        Some(other) => Err(CliError::Usage(format!(
            "config N must be an integer or an array, got {other}"
        ))),
    }
}

fn parse_format(text: &str) -> Result<OutFormat, CliError> {
    match text.to_ascii_lowercase().as_str() {
        "csv" => Ok(OutFormat::Csv),
        "json" => Ok(OutFormat::Json),
        other => Err(CliError::Usage(format!("unknown format {other:?}"))),
    }
}

/// Parse a `start:stop:count` grid with `count >= 2` and `start < stop`.
fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let usage = || CliError::Usage(format!("grid {text:?} is not start:stop:count"));
    if parts.len() != 3 {
        return Err(usage());
    }
    let start: f64 = parts[0].parse().map_err(|_| usage())?;
    let stop: f64 = parts[1].parse().map_err(|_| usage())?;
    let count: usize = parts[2].parse().map_err(|_| usage())?;
    if count < 2 {
        return Err(CliError::Usage(format!(
            "grid count must be at least 2, got {count}"
        )));
    }
    if !start.is_finite() || !stop.is_finite() || start >= stop {
        return Err(CliError::Usage(format!(
            "grid needs start < stop, got {start}..{stop}"
        )));
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

fn resolve_curve(args: CurveArgs) -> Result<CurveParams, CliError> {
    let cfg = load_config(args.io.config.as_ref())?;
    let game = match args.game {
        Some(g) => g,
        None => match &cfg.game {
            Some(name) => parse_game(name).map_err(CliError::Usage)?,
            None => Game::Chsh,
        },
    };
    if game != Game::Chsh {
        return Err(CliError::Usage(
            "the curve command evaluates the CHSH game".into(),
        ));
    }
    let measure = args
        .measure
        .or(cfg.measure)
        .unwrap_or_else(|| "P".to_string());
    if !measure.eq_ignore_ascii_case("p") {
        return Err(CliError::Usage(format!(
            "curve supports the max-prob measure (P), got {measure:?}"
        )));
    }
    let mut n_list = args.n_runs;
    if n_list.is_empty() {
        n_list = config_n_list(&cfg.n_runs)?;
    }
    let asymptote = args.asymptote || cfg.asymptote.unwrap_or(false);
    if n_list.is_empty() && !asymptote {
        return Err(CliError::Usage(
            "nothing to plot: pass --N at least once or --asymptote".into(),
        ));
    }
    let grid_text = args
        .grid
        .or(cfg.grid)
        .unwrap_or_else(|| format!("0.25:{}:200", 1.0 / 3.0));
    let grid = parse_grid(&grid_text)?;
    let format = match args.io.format {
        OutFormat::Csv => match &cfg.format {
            Some(text) if args_format_unset() => parse_format(text)?,
            _ => args.io.format,
        },
        other => other,
    };
    Ok(CurveParams {
        n_list,
        grid,
        quantum: args.quantum || cfg.quantum.unwrap_or(false),
        asymptote,
        output: args.io.output.or(cfg.output),
        format,
    })
}

// Clap cannot tell a defaulted flag from an explicit one without extra
// machinery; config formats only apply when the flag is at its default.
fn args_format_unset() -> bool {
    !std::env::args().any(|a| a == "--format")
}

fn resolve_lp(args: LpArgs) -> Result<LpParams, CliError> {
    let cfg = load_config(args.io.config.as_ref())?;
    let game = match args.game {
        Some(g) => g,
        None => match &cfg.game {
            Some(name) => parse_game(name).map_err(CliError::Usage)?,
            None => return Err(CliError::Usage("lp needs --game chsh|i3322".into())),
        },
    };
    let n_runs = args
        .n_runs
        .or_else(|| config_n_list(&cfg.n_runs).ok().and_then(|v| v.first().copied()))
        .ok_or_else(|| CliError::Usage("lp needs --N".into()))?;
    let m1 = args.m1.or(cfg.m1);
    let m1_grid = args.m1_grid.or(cfg.m1_grid);
    let budget = match (m1, m1_grid) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("pass either --m1 or --m1-grid, not both".into()))
        }
        (Some(value), None) => BudgetSpec::Single(value),
        (None, Some(text)) => BudgetSpec::Grid(parse_grid(&text)?),
        (None, None) => return Err(CliError::Usage("lp needs --m1 or --m1-grid".into())),
    };
    Ok(LpParams {
        game,
        n_runs,
        budget,
        oneshot_points: args.oneshot_points.max(2),
        dump_lp: args.dump_lp,
        output: args.io.output.or(cfg.output),
        format: args.io.format,
    })
}

fn resolve_simulate(args: SimulateArgs) -> Result<SimulateParams, CliError> {
    let cfg = load_config(args.io.config.as_ref())?;
    let n_runs = args
        .n_runs
        .or_else(|| config_n_list(&cfg.n_runs).ok().and_then(|v| v.first().copied()))
        .ok_or_else(|| CliError::Usage("simulate needs --N".into()))?;
    let p = args
        .p
        .or(cfg.p)
        .ok_or_else(|| CliError::Usage("simulate needs --P".into()))?;
    Ok(SimulateParams {
        n_runs,
        p,
        trials: args.trials.or(cfg.trials).unwrap_or(1_000_000),
        seed: args.seed.or(cfg.seed).unwrap_or(0xB311),
        output: args.io.output.or(cfg.output),
    })
}

fn configure_threads() {
    if let Ok(text) = std::env::var(THREADS_ENV) {
        if let Ok(threads) = text.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn run() -> Result<u8, CliError> {
    let cli = Cli::parse();
    configure_threads();
    match cli.command {
        Command::Curve(args) => commands::cmd_curve(&resolve_curve(args)?),
        Command::Lp(args) => commands::cmd_lp(&resolve_lp(args)?),
        Command::Simulate(args) => commands::cmd_simulate(&resolve_simulate(args)?),
        Command::Figure(args) => commands::cmd_figure(&FigureParams {
            which: args.which,
            outdir: args.outdir,
            points: args.points,
        }),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(4)
        }
        Err(CliError::Io(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
