//! Implementations of the CLI subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bellmd::bell_lp::{
    build_chsh_m1, build_imm22, chsh_one_shot_curve, imm22_one_shot_curve, interpolate_curve,
    m1_max, solve_chsh_m1_curve, solve_imm22_curve, LpCurvePoint,
};
use bellmd::bell_model::{chsh_outcome_table, Game, GameSpec};
use bellmd::chsh_analytic::{asymptotic_score, breakpoints, max_score, optimal_profile};
use bellmd::lp_core::LpStatus;
use bellmd::numfmt::fmt12;
use bellmd::quantum_adversary::sq_from_sc;
use bellmd::strategy_sim::estimate;

use crate::output::{companion_path, emit, int, num, opt_int, write_atomic, OutFormat, Table};
use crate::CliError;

type CmdResult = Result<u8, CliError>;

fn data_err(err: bellmd::Error) -> CliError {
    match err {
        bellmd::Error::Lp(inner) => CliError::Solver(inner.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------

pub struct CurveParams {
    pub n_list: Vec<usize>,
    pub grid: Vec<f64>,
    pub quantum: bool,
    pub asymptote: bool,
    pub output: Option<PathBuf>,
    pub format: OutFormat,
}

pub fn cmd_curve(params: &CurveParams) -> CmdResult {
    let with_kind = params.quantum;
    let columns = if with_kind {
        vec!["N", "P", "S", "lprime", "kind"]
    } else {
        vec!["N", "P", "S", "lprime"]
    };
    let mut table = Table::new(columns);
    let push = |table: &mut Table,
                n: Option<usize>,
                p: f64,
                s: f64,
                lprime: Option<usize>,
                kind: &str| {
        let mut row = vec![opt_int(n), num(p), num(s), opt_int(lprime)];
        if with_kind {
            row.push(kind.to_string());
        }
        table.push(row);
    };

    for &n in &params.n_list {
        let points = curve_points(n, &params.grid).map_err(data_err)?;
        for &(p, s, lprime) in &points {
            push(&mut table, Some(n), p, s, lprime, "classical");
        }
        if params.quantum {
            for &(p, s, lprime) in &points {
                let q = sq_from_sc(s).map_err(data_err)?;
                push(&mut table, Some(n), p, q, lprime, "quantum");
            }
        }
    }
    if params.asymptote {
        for &p in &params.grid {
            let s = asymptotic_score(p).map_err(data_err)?;
            push(&mut table, None, p, s, None, "classical");
        }
        if params.quantum {
            for &p in &params.grid {
                let s = asymptotic_score(p).map_err(data_err)?;
                let q = sq_from_sc(s).map_err(data_err)?;
                push(&mut table, None, p, q, None, "quantum");
            }
        }
    }

    emit(params.output.as_deref(), &table.render(params.format)).map_err(CliError::Io)?;
    Ok(0)
}

/// Grid points merged with the exact curve vertices, ascending in P.
fn curve_points(
    n: usize,
    grid: &[f64],
) -> bellmd::Result<Vec<(f64, f64, Option<usize>)>> {
    let curve = breakpoints(n)?;
    let lo = grid.first().copied().unwrap_or(0.25);
    let hi = grid.last().copied().unwrap_or(1.0 / 3.0);
    let mut points: Vec<(f64, f64, Option<usize>)> = Vec::new();
    for point in &curve.points {
        if point.p >= lo - 1e-12 && point.p <= hi + 1e-12 {
            points.push((point.p, point.s, point.lprime));
        }
    }
    for &p in grid {
        if points
            .iter()
            .any(|&(existing, _, _)| (existing - p).abs() < 1e-13)
        {
            continue;
        }
        points.push((p, max_score(n, p)?, None));
    }
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(points)
}

// ---------------------------------------------------------------------------
// lp
// ---------------------------------------------------------------------------

pub enum BudgetSpec {
    Single(f64),
    Grid(Vec<f64>),
}

pub struct LpParams {
    pub game: Game,
    pub n_runs: usize,
    pub budget: BudgetSpec,
    pub oneshot_points: usize,
    pub dump_lp: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: OutFormat,
}

fn lp_table(points: &[LpCurvePoint]) -> Table {
    let mut table = Table::new(vec!["game", "N", "M1", "S", "status"]);
    for point in points {
        let status = match point.status {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        };
        table.push(vec![
            point.game.name().to_string(),
            int(point.n_runs),
            num(point.m1),
            num(point.score),
            status.to_string(),
        ]);
    }
    table
}

fn oneshot_table(game: Game, n: usize, series: &[(f64, f64)]) -> Table {
    let mut table = Table::new(vec!["game", "N", "M1", "S", "status"]);
    for &(m1, s) in series {
        table.push(vec![
            game.name().to_string(),
            int(n),
            num(m1),
            num(s),
            "optimal".to_string(),
        ]);
    }
    table
}

pub fn cmd_lp(params: &LpParams) -> CmdResult {
    let spec = params.game.spec();
    let grid: Vec<f64> = match &params.budget {
        BudgetSpec::Single(m1) => vec![*m1],
        BudgetSpec::Grid(values) => values.clone(),
    };
    let solved = match params.game {
        Game::Chsh => solve_chsh_m1_curve(params.n_runs, &grid),
        Game::I3322 => solve_imm22_curve(&spec, params.n_runs, &grid),
    }
    .map_err(|e| match e {
        bellmd::Error::Lp(inner) => CliError::Solver(inner.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;
    if let Some(bad) = solved.iter().find(|p| p.status != LpStatus::Optimal) {
        return Err(CliError::Solver(format!(
            "budget {} for {} with N = {} came back {:?}",
            bad.m1, bad.game, bad.n_runs, bad.status
        )));
    }

    // The repeated-one-shot comparison series at matching budgets.
    let oneshot_curve = match params.game {
        Game::Chsh => chsh_one_shot_curve(params.n_runs, params.oneshot_points),
        Game::I3322 => imm22_one_shot_curve(&spec, params.n_runs, params.oneshot_points),
    }
    .map_err(data_err)?;
    let oneshot_series: Vec<(f64, f64)> = match &params.budget {
        BudgetSpec::Single(m1) => vec![(*m1, interpolate_curve(&oneshot_curve, *m1))],
        BudgetSpec::Grid(_) => oneshot_curve,
    };

    if let Some(dump) = &params.dump_lp {
        let mut buf = Vec::new();
        match params.game {
            Game::Chsh => build_chsh_m1(params.n_runs, grid[0])
                .map_err(data_err)?
                .lp
                .write_matrix_dump(&mut buf),
            Game::I3322 => build_imm22(&spec, params.n_runs, grid[0])
                .map_err(data_err)?
                .lp
                .write_matrix_dump(&mut buf),
        }
        .map_err(|e| CliError::Io(e.into()))?;
        write_atomic(dump, &String::from_utf8_lossy(&buf)).map_err(CliError::Io)?;
    }

    let main_table = lp_table(&solved);
    let side_table = oneshot_table(params.game, params.n_runs, &oneshot_series);
    match params.output.as_deref() {
        Some(path) => {
            write_atomic(path, &main_table.render(params.format)).map_err(CliError::Io)?;
            let side = companion_path(path, "oneshot");
            write_atomic(&side, &side_table.render(params.format)).map_err(CliError::Io)?;
        }
        None => {
            println!("# correlated attack");
            print!("{}", main_table.render(params.format));
            println!("# repeated one-shot attack");
            print!("{}", side_table.render(params.format));
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct SimulateParams {
    pub n_runs: usize,
    pub p: f64,
    pub trials: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

pub fn cmd_simulate(params: &SimulateParams) -> CmdResult {
    let profile = optimal_profile(params.n_runs, params.p).map_err(data_err)?;
    let table = chsh_outcome_table();
    let game = GameSpec::chsh();
    let report =
        estimate(&profile, &table, &game, params.trials, params.seed).map_err(data_err)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "CHSH simulation: N={} runs/block, P={}, trials={}, seed={}",
        report.n_runs,
        fmt12(params.p),
        report.trials,
        report.seed
    );
    let _ = writeln!(
        text,
        "  empirical S      {:>12.6} +- {:.6}",
        report.empirical_s, report.std_error
    );
    let _ = writeln!(text, "  analytic S       {:>12.6}", report.analytic_s);
    let _ = writeln!(
        text,
        "  max class mass   {:>12.6}",
        report.analytic_max_mass
    );
    for check in &report.checks {
        let _ = writeln!(
            text,
            "  {:32} observed {:.3e}  limit {:.3e}  {}",
            check.name,
            check.observed,
            check.limit,
            if check.passed { "ok" } else { "FAILED" }
        );
    }
    print!("{text}");

    if let Some(path) = &params.output {
        let mut json = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Io(e.into()))?;
        json.push('\n');
        write_atomic(path, &json).map_err(CliError::Io)?;
    }

    if report.all_checks_passed {
        Ok(0)
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("verification failed: {}", failed.join(", "));
        Ok(3)
    }
}

// ---------------------------------------------------------------------------
// figure
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
}

pub struct FigureParams {
    pub which: FigureId,
    pub outdir: PathBuf,
    pub points: Option<usize>,
}

pub fn cmd_figure(params: &FigureParams) -> CmdResult {
    std::fs::create_dir_all(&params.outdir)
        .map_err(|e| CliError::Io(e.into()))?;
    match params.which {
        FigureId::Fig1 => figure_one(&params.outdir, params.points.unwrap_or(200)),
        FigureId::Fig2 => figure_lp(
            &params.outdir,
            Game::Chsh,
            100,
            params.points.unwrap_or(41),
            200,
            "fig2",
        ),
        FigureId::Fig3 => figure_lp(
            &params.outdir,
            Game::I3322,
            10,
            params.points.unwrap_or(21),
            60,
            "fig3",
        ),
    }
}

/// Classical and quantum score curves against the per-run max-prob level,
/// for a spread of run counts plus the infinite-run limit.
fn figure_one(outdir: &Path, points: usize) -> CmdResult {
    let grid: Vec<f64> = (0..points)
        .map(|i| 0.25 + (1.0 / 3.0 - 0.25) * i as f64 / (points - 1) as f64)
        .collect();
    let params = CurveParams {
        n_list: vec![1, 2, 5, 20],
        grid,
        quantum: true,
        asymptote: true,
        output: Some(outdir.join("fig1_curves.csv")),
        format: OutFormat::Csv,
    };
    cmd_curve(&params)
}

/// Correlated-attack and repeated-one-shot budget curves.
fn figure_lp(
    outdir: &Path,
    game: Game,
    n: usize,
    points: usize,
    oneshot_points: usize,
    stem: &str,
) -> CmdResult {
    let cap = m1_max(&game.spec(), n).map_err(data_err)?;
    let grid: Vec<f64> = (0..points)
        .map(|i| cap * i as f64 / (points - 1) as f64)
        .collect();
    let params = LpParams {
        game,
        n_runs: n,
        budget: BudgetSpec::Grid(grid),
        oneshot_points,
        dump_lp: None,
        output: Some(outdir.join(format!("{stem}_correlated.csv"))),
        format: OutFormat::Csv,
    };
    cmd_lp(&params)?;
    // cmd_lp writes the companion as <stem>_correlated_oneshot.csv; give it
    // the figure's canonical name instead.
    let from = outdir.join(format!("{stem}_correlated_oneshot.csv"));
    let to = outdir.join(format!("{stem}_oneshot.csv"));
    std::fs::rename(&from, &to).map_err(|e| CliError::Io(e.into()))?;
    Ok(0)
}
