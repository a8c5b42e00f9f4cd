//! Linear programs for L1-constrained correlated attacks.
//!
//! The CHSH reduction packs the class masses `p`, the modulus variables `w`
//! and their two slack blocks `a`, `b` into `z = (p, w, a, b)` with
//! normalization, the `a`/`b` definitions and the budget `sum_k n_k w_k = M1`
//! as equality rows; maximizing the score means minimizing `c . z` with
//! `c = (-s, 0, 0, 0)` and mapping `S = -4 - 8 c . z`.
//!
//! Internally every variable is premultiplied by its class size so matrix
//! entries stay O(1); raw sizes like `3^k C(N,k)` would wreck conditioning
//! near `N = 100`.
//!
//! The same machinery generalizes to the three-setting game, where classes
//! carry a second index for runs landing on the unused settings pair and the
//! marginal-uniformity conditions collapse to `N + 1` aggregate rows. The
//! collapse needs every used pair to be covered with equal weight by the
//! optimal outcome rows; a per-run row distribution with that property is
//! derived at startup and verified, never assumed.
//!
//! Full-dimensional brute-force oracles over the raw conditionals `p(y|x)`
//! validate both reductions on small instances.

use std::io;

use rayon::prelude::*;
use serde::Serialize;

use crate::bell_model::{
    derive_outcome_table, ln_binomial, ln_class_member_count, ClassCounts, Game, GameSpec,
    MdKind, MdMeasure, OutcomeTable, StrategyProfile,
};
use crate::chsh_analytic::single_shot_score;
use crate::lp_core::{solve, LinearProgram, LpStatus};
use crate::{Error, Result};

/// Largest run count for the CHSH budget LP.
pub const MAX_LP_RUNS: usize = 1000;
/// Largest run count for the three-setting budget LP.
pub const MAX_IMM22_RUNS: usize = 100;
/// Cell budget `(m^2)^N * T^N` for the brute-force oracles.
pub const MAX_ORACLE_CELLS: u128 = 1_000_000;

/// Budget at which the score saturates: `2 (1 - ((correct + unused)/m^2)^N)`.
pub fn m1_max(game: &GameSpec, n: usize) -> Result<f64> {
    let counts = if game.settings() == 2 {
        ClassCounts::chsh()
    } else {
        ClassCounts::derive(game)?
    };
    let good = (counts.correct + counts.unused) as f64 / counts.pairs() as f64;
    Ok(2.0 * (1.0 - good.powi(n as i32)))
}

/// `ln n_k` for the CHSH class sizes `n_k = C(N,k) 3^k`.
fn ln_chsh_sizes(n: usize) -> Vec<f64> {
    let ln3 = 3.0f64.ln();
    let mut ln_n = vec![0.0; n + 1];
    for k in 0..n {
        ln_n[k + 1] = ln_n[k] + ln3 + ((n - k) as f64).ln() - ((k + 1) as f64).ln();
    }
    ln_n
}

// ---------------------------------------------------------------------------
// CHSH budget program
// ---------------------------------------------------------------------------

/// The CHSH attack LP at a fixed L1 budget.
#[derive(Clone, Debug)]
pub struct ChshM1Program {
    pub n_runs: usize,
    pub m1: f64,
    /// Budgets past [`m1_max`] stay solvable; the score saturates at 4.
    pub exceeds_m1_max: bool,
    pub lp: LinearProgram,
    ln_sizes: Vec<f64>,
}

/// Result of solving a budget program.
#[derive(Clone, Debug)]
pub struct BudgetSolution {
    pub status: LpStatus,
    pub score: f64,
    pub iterations: usize,
    pub profile: Option<StrategyProfile>,
}

/// Build the CHSH program for `N` runs at budget `m1`.
pub fn build_chsh_m1(n: usize, m1: f64) -> Result<ChshM1Program> {
    if !(1..=MAX_LP_RUNS).contains(&n) {
        return Err(Error::RunCountOutOfRange {
            n,
            lo: 1,
            hi: MAX_LP_RUNS,
        });
    }
    if !m1.is_finite() || m1 < 0.0 {
        return Err(Error::OutOfDomain {
            what: "l1 budget",
            value: m1,
            lo: 0.0,
            hi: 2.0,
        });
    }
    let ln_sizes = ln_chsh_sizes(n);
    let ln4 = 4.0f64.ln();
    // rho_k = n_k 4^-N, the binomial(N, 3/4) mass at k.
    let rho: Vec<f64> = ln_sizes
        .iter()
        .map(|&ln_nk| (ln_nk - n as f64 * ln4).exp())
        .collect();

    let width = n + 1;
    let cols = 4 * width;
    let block = |b: usize, k: usize| b * width + k;

    let mut objective = vec![0.0; cols];
    for k in 0..=n {
        // Scaled objective entry s_k / n_k = k / N.
        objective[block(0, k)] = -(k as f64) / n as f64;
    }

    let mut constraints = Vec::with_capacity(2 * width + 2);
    let mut rhs = Vec::with_capacity(2 * width + 2);

    let mut norm = vec![0.0; cols];
    for k in 0..=n {
        norm[block(0, k)] = 1.0;
    }
    constraints.push(norm);
    rhs.push(1.0);

    for k in 0..=n {
        let mut row = vec![0.0; cols];
        row[block(0, k)] = 1.0;
        row[block(1, k)] = -1.0;
        row[block(2, k)] = 1.0;
        constraints.push(row);
        rhs.push(rho[k]);
    }
    for k in 0..=n {
        let mut row = vec![0.0; cols];
        row[block(0, k)] = -1.0;
        row[block(1, k)] = -1.0;
        row[block(3, k)] = 1.0;
        constraints.push(row);
        rhs.push(-rho[k]);
    }

    let mut budget = vec![0.0; cols];
    for k in 0..=n {
        budget[block(1, k)] = 1.0;
    }
    constraints.push(budget);
    rhs.push(m1);

    let exceeds = m1 > m1_max(&GameSpec::chsh(), n)? + 1e-12;
    Ok(ChshM1Program {
        n_runs: n,
        m1,
        exceeds_m1_max: exceeds,
        lp: LinearProgram::new(objective, constraints, rhs)?,
        ln_sizes,
    })
}

/// Solve a CHSH budget program, mapping the objective back to the score and
/// unscaling the solution into a strategy profile.
pub fn solve_chsh_m1(program: &ChshM1Program) -> Result<BudgetSolution> {
    let solution = solve(&program.lp)?;
    if solution.status != LpStatus::Optimal {
        return Ok(BudgetSolution {
            status: solution.status,
            score: f64::NAN,
            iterations: solution.iterations,
            profile: None,
        });
    }
    let n = program.n_runs;
    let scaled = &solution.z[..=n];
    let total: f64 = scaled.iter().sum();
    let masses: Vec<f64> = scaled
        .iter()
        .zip(&program.ln_sizes)
        .map(|(&q, &ln_nk)| {
            let q = (q / total).max(0.0);
            if q == 0.0 {
                0.0
            } else {
                (q.ln() - ln_nk).exp()
            }
        })
        .collect();
    Ok(BudgetSolution {
        status: LpStatus::Optimal,
        score: -4.0 - 8.0 * solution.objective,
        iterations: solution.iterations,
        profile: Some(StrategyProfile::chsh(n, &masses)?),
    })
}

/// One point of a budget-score curve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LpCurvePoint {
    pub game: Game,
    pub n_runs: usize,
    pub m1: f64,
    pub score: f64,
    pub status: LpStatus,
}

impl Serialize for LpStatus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

/// Solve the CHSH program over a budget grid, one independent solver
/// instance per point.
pub fn solve_chsh_m1_curve(n: usize, grid: &[f64]) -> Result<Vec<LpCurvePoint>> {
    grid.par_iter()
        .map(|&m1| {
            let solved = solve_chsh_m1(&build_chsh_m1(n, m1)?)?;
            Ok(LpCurvePoint {
                game: Game::Chsh,
                n_runs: n,
                m1,
                score: solved.score,
                status: solved.status,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Repeated one-shot comparison curves
// ---------------------------------------------------------------------------

/// Block-level L1 value of `N` independent repetitions of the one-shot CHSH
/// attack with per-run level `p`, together with its (per-run) score.
pub fn chsh_one_shot_product_point(n: usize, p: f64) -> Result<(f64, f64)> {
    if !(0.25 - 1e-12..=1.0 / 3.0 + 1e-12).contains(&p) {
        return Err(Error::OutOfDomain {
            what: "per-run max-prob P",
            value: p,
            lo: 0.25,
            hi: 1.0 / 3.0,
        });
    }
    let p = p.clamp(0.25, 1.0 / 3.0);
    let ln_sizes = ln_chsh_sizes(n);
    let q = 1.0 - 3.0 * p;
    let ln_uniform = -(n as f64) * 4.0f64.ln();
    let mut m1 = 0.0f64;
    for (k, &ln_nk) in ln_sizes.iter().enumerate() {
        let ln_mass = if q <= 0.0 && k < n {
            f64::NEG_INFINITY
        } else {
            k as f64 * p.ln() + (n - k) as f64 * if k < n { q.ln() } else { 0.0 }
        };
        let scaled_mass = if ln_mass == f64::NEG_INFINITY {
            0.0
        } else {
            (ln_nk + ln_mass).exp()
        };
        let scaled_uniform = (ln_nk + ln_uniform).exp();
        m1 += (scaled_mass - scaled_uniform).abs();
    }
    Ok((m1, single_shot_score(p)?))
}

/// The repeated-one-shot comparison curve for CHSH on a per-run grid of
/// `points` levels.
pub fn chsh_one_shot_curve(n: usize, points: usize) -> Result<Vec<(f64, f64)>> {
    (0..points)
        .map(|i| {
            let p = 0.25 + (1.0 / 3.0 - 0.25) * i as f64 / (points - 1) as f64;
            chsh_one_shot_product_point(n, p)
        })
        .collect()
}

/// Interpolate a (budget, score) curve at a budget, clamping at the ends.
pub fn interpolate_curve(curve: &[(f64, f64)], m1: f64) -> f64 {
    let mut pts: Vec<(f64, f64)> = curve.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if m1 <= pts[0].0 {
        return pts[0].1;
    }
    if m1 >= pts[pts.len() - 1].0 {
        return pts[pts.len() - 1].1;
    }
    let i = pts.partition_point(|&(b, _)| b <= m1);
    let (x0, y0) = pts[i - 1];
    let (x1, y1) = pts[i];
    if x1 - x0 < 1e-300 {
        return y0;
    }
    y0 + (m1 - x0) * (y1 - y0) / (x1 - x0)
}

/// The repeated-one-shot comparison curve for the three-setting game: solve
/// the one-run program on a per-run budget grid and compose each optimum
/// `N`-fold as a product strategy.
pub fn imm22_one_shot_curve(game: &GameSpec, n: usize, points: usize) -> Result<Vec<(f64, f64)>> {
    let cap = m1_max(game, 1)?;
    let counts = ClassCounts::derive(game)?;
    let pairs = counts.pairs() as f64;
    (0..points)
        .map(|i| {
            let mu = cap * i as f64 / (points - 1) as f64;
            let solved = solve_imm22(&build_imm22(game, 1, mu)?)?;
            let profile = solved.profile.expect("one-run program is feasible");
            // Per-run class masses of the one-shot optimum.
            let q_correct = profile.mass(1, 0);
            let q_wrong = profile.mass(0, 0);
            let q_unused = profile.mass(0, 1);
            let ln_uniform = -(n as f64) * pairs.ln();
            let mut m1 = 0.0f64;
            for l in 0..=n {
                if counts.unused == 0 && l > 0 {
                    continue;
                }
                for k in 0..=(n - l) {
                    let ln_count = ln_class_member_count(&counts, n, k, l);
                    if ln_count == f64::NEG_INFINITY {
                        continue;
                    }
                    let ln_mass = ln_pow(q_correct, k)
                        + ln_pow(q_wrong, n - l - k)
                        + ln_pow(q_unused, l);
                    let scaled_mass = if ln_mass == f64::NEG_INFINITY {
                        0.0
                    } else {
                        (ln_count + ln_mass).exp()
                    };
                    m1 += (scaled_mass - (ln_count + ln_uniform).exp()).abs();
                }
            }
            Ok((m1, solved.score))
        })
        .collect()
}

fn ln_pow(base: f64, exponent: usize) -> f64 {
    if exponent == 0 {
        0.0
    } else if base <= 0.0 {
        f64::NEG_INFINITY
    } else {
        exponent as f64 * base.ln()
    }
}

// ---------------------------------------------------------------------------
// Row weighting for the class reduction
// ---------------------------------------------------------------------------

/// A per-run distribution over outcome rows giving every used settings pair
/// the same correct-answer coverage `h`. Uniform weights work for CHSH; the
/// three-setting table needs unequal weights because its raw coverage counts
/// differ between pairs.
#[derive(Clone, Debug)]
pub struct RowWeights {
    pub weights: Vec<f64>,
    pub coverage: f64,
}

/// Find coverage-equalizing row weights by a small feasibility LP.
pub fn coverage_equalizer(table: &OutcomeTable, game: &GameSpec) -> Result<RowWeights> {
    let t = table.len();
    let used: Vec<usize> = (0..game.pairs()).filter(|&y| game.is_used(y)).collect();
    let cols = t + 1; // weights plus the common coverage h
    let mut constraints = Vec::with_capacity(used.len() + 1);
    let mut rhs = Vec::with_capacity(used.len() + 1);
    for &y in &used {
        let mut row = vec![0.0; cols];
        for (x, outcome) in table.rows.iter().enumerate() {
            if outcome.is_correct(y) {
                row[x] = 1.0;
            }
        }
        row[t] = -1.0;
        constraints.push(row);
        rhs.push(0.0);
    }
    let mut norm = vec![0.0; cols];
    norm[..t].fill(1.0);
    constraints.push(norm);
    rhs.push(1.0);

    let lp = LinearProgram::new(vec![0.0; cols], constraints, rhs)?;
    let solution = solve(&lp)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::CoverageNotEqualizable);
    }
    let weights = solution.z[..t].to_vec();
    let coverage = solution.z[t];
    Ok(RowWeights { weights, coverage })
}

// ---------------------------------------------------------------------------
// Three-setting (and general m <= 3) budget program
// ---------------------------------------------------------------------------

/// The class-reduced budget LP for an `m <= 3` game.
#[derive(Clone, Debug)]
pub struct Imm22Program {
    pub game: Game,
    pub n_runs: usize,
    pub m1: f64,
    pub exceeds_m1_max: bool,
    /// Class labels `(k, l)` in column order of the `p` block.
    pub classes: Vec<(usize, usize)>,
    pub lp: LinearProgram,
    pub row_weights: RowWeights,
    counts: ClassCounts,
    ln_counts: Vec<f64>,
}

/// Build the class-reduced program. For `m = 2` the class set degenerates to
/// `l = 0` and the program matches [`build_chsh_m1`] up to the objective
/// normalization.
pub fn build_imm22(game: &GameSpec, n: usize, m1: f64) -> Result<Imm22Program> {
    let m = game.settings();
    if m > 3 {
        return Err(Error::UnsupportedGame {
            m,
            why: "the class reduction is specified for m <= 3",
        });
    }
    if !(1..=MAX_IMM22_RUNS).contains(&n) {
        return Err(Error::RunCountOutOfRange {
            n,
            lo: 1,
            hi: MAX_IMM22_RUNS,
        });
    }
    if !m1.is_finite() || m1 < 0.0 {
        return Err(Error::OutOfDomain {
            what: "l1 budget",
            value: m1,
            lo: 0.0,
            hi: 2.0,
        });
    }
    let table = derive_outcome_table(game)?;
    let counts = table.class_counts(game)?;
    let row_weights = coverage_equalizer(&table, game)?;
    // The coverage is pinned by row regularity: h = correct / used.
    let expected = counts.correct as f64 / (counts.correct + counts.wrong) as f64;
    debug_assert!((row_weights.coverage - expected).abs() < 1e-9);

    let mut classes = Vec::new();
    for l in 0..=n {
        if counts.unused == 0 && l > 0 {
            continue;
        }
        for k in 0..=(n - l) {
            classes.push((k, l));
        }
    }
    let c = classes.len();
    let cols = 4 * c;
    let pairs = counts.pairs() as f64;
    let ln_pairs = pairs.ln();

    let ln_counts: Vec<f64> = classes
        .iter()
        .map(|&(k, l)| ln_class_member_count(&counts, n, k, l))
        .collect();
    // gamma = count(k,l) (m^2)^-N, the multinomial reference mass.
    let gamma: Vec<f64> = ln_counts
        .iter()
        .map(|&ln_count| (ln_count - n as f64 * ln_pairs).exp())
        .collect();

    let mut objective = vec![0.0; cols];
    for (i, &(k, l)) in classes.iter().enumerate() {
        objective[i] = -((2 * k + l) as f64 - n as f64) / n as f64;
    }

    let mut constraints = Vec::new();
    let mut rhs = Vec::new();

    // Marginal-uniformity rows, one per unused-run count l:
    // sum_k Q_{k,l} = C(N,l) u^l used^(N-l) / (m^2)^N.
    let used = (counts.correct + counts.wrong) as f64;
    for l in 0..=n {
        if counts.unused == 0 && l > 0 {
            continue;
        }
        let mut row = vec![0.0; cols];
        let mut any = false;
        for (i, &(_, cl)) in classes.iter().enumerate() {
            if cl == l {
                row[i] = 1.0;
                any = true;
            }
        }
        if !any {
            continue;
        }
        let ln_beta = ln_binomial(n, l)
            + ln_pow(counts.unused as f64, l)
            + (n - l) as f64 * used.ln()
            - n as f64 * ln_pairs;
        constraints.push(row);
        rhs.push(ln_beta.exp());
    }

    for i in 0..c {
        let mut row = vec![0.0; cols];
        row[i] = 1.0;
        row[c + i] = -1.0;
        row[2 * c + i] = 1.0;
        constraints.push(row);
        rhs.push(gamma[i]);
    }
    for i in 0..c {
        let mut row = vec![0.0; cols];
        row[i] = -1.0;
        row[c + i] = -1.0;
        row[3 * c + i] = 1.0;
        constraints.push(row);
        rhs.push(-gamma[i]);
    }

    let mut budget = vec![0.0; cols];
    budget[c..2 * c].fill(1.0);
    constraints.push(budget);
    rhs.push(m1);

    let game_tag = game.game_tag().ok_or(Error::UnsupportedGame {
        m,
        why: "no serialization tag for this settings count",
    })?;
    let exceeds = m1 > m1_max(game, n)? + 1e-12;
    Ok(Imm22Program {
        game: game_tag,
        n_runs: n,
        m1,
        exceeds_m1_max: exceeds,
        classes,
        lp: LinearProgram::new(objective, constraints, rhs)?,
        row_weights,
        counts,
        ln_counts,
    })
}

/// Solve a class-reduced program; the score is `m^2` times the negated
/// objective.
pub fn solve_imm22(program: &Imm22Program) -> Result<BudgetSolution> {
    let solution = solve(&program.lp)?;
    if solution.status != LpStatus::Optimal {
        return Ok(BudgetSolution {
            status: solution.status,
            score: f64::NAN,
            iterations: solution.iterations,
            profile: None,
        });
    }
    let c = program.classes.len();
    let scaled = &solution.z[..c];
    let total: f64 = scaled.iter().sum();
    let mut masses = std::collections::BTreeMap::new();
    for ((&(k, l), &q), &ln_count) in program
        .classes
        .iter()
        .zip(scaled)
        .zip(&program.ln_counts)
    {
        let q = (q / total).max(0.0);
        let mass = if q == 0.0 || ln_count == f64::NEG_INFINITY {
            0.0
        } else {
            (q.ln() - ln_count).exp()
        };
        masses.insert((k, l), mass);
    }
    let pairs = program.counts.pairs() as f64;
    let score = pairs * -solution.objective;
    Ok(BudgetSolution {
        status: LpStatus::Optimal,
        score,
        iterations: solution.iterations,
        profile: Some(StrategyProfile::from_class_masses(
            program.game,
            program.n_runs,
            masses,
        )?),
    })
}

/// Solve the three-setting program over a budget grid.
pub fn solve_imm22_curve(game: &GameSpec, n: usize, grid: &[f64]) -> Result<Vec<LpCurvePoint>> {
    let tag = game.game_tag().ok_or(Error::UnsupportedGame {
        m: game.settings(),
        why: "no serialization tag for this settings count",
    })?;
    grid.par_iter()
        .map(|&m1| {
            let solved = solve_imm22(&build_imm22(game, n, m1)?)?;
            Ok(LpCurvePoint {
                game: tag,
                n_runs: n,
                m1,
                score: solved.score,
                status: solved.status,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

/// Outcome of a full-dimensional oracle solve, including the raw conditional
/// table for auditing.
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub game: Game,
    pub n_runs: usize,
    pub measure: MdMeasure,
    pub score: f64,
    pub status: LpStatus,
    pub iterations: usize,
    /// Hidden-string distribution used for the marginal constraints.
    pub p_x: Vec<f64>,
    /// Conditional settings-string distribution, rows indexed by hidden
    /// strings, columns by settings strings.
    pub conditional: Vec<Vec<f64>>,
    /// Measure value realized by the returned conditional.
    pub achieved: f64,
}

impl OracleReport {
    pub fn write_audit_json<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut *out, self)?;
        writeln!(out)
    }
}

fn pow_usize(base: usize, exp: usize) -> u128 {
    (base as u128).pow(exp as u32)
}

fn decode(mut index: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
}

/// Solve the un-reduced attack LP over all conditionals `p(y|x)` with a
/// uniform hidden-string distribution, the exact marginal constraints, and
/// the raw measure definition. Exponential in `N`; this is the validation
/// oracle for the reduced programs.
pub fn brute_force_oracle(
    game: &GameSpec,
    n: usize,
    measure: MdMeasure,
) -> Result<OracleReport> {
    let table = derive_outcome_table(game)?;
    let t = table.len();
    let pairs = game.pairs();
    let cells = pow_usize(t, n).saturating_mul(pow_usize(pairs, n));
    if cells > MAX_ORACLE_CELLS {
        return Err(Error::ExpansionTooLarge {
            cells,
            limit: MAX_ORACLE_CELLS,
        });
    }
    let n_x = pow_usize(t, n) as usize;
    let n_y = pow_usize(pairs, n) as usize;
    let n_cells = n_x * n_y;
    let uniform_y = (pairs as f64).recip().powi(n as i32);
    let p_x = vec![(t as f64).recip().powi(n as i32); n_x];

    // Per-cell score contribution (2k + l - N) / N weighted by m^2 p(x).
    let mut x_str = vec![0usize; n];
    let mut y_str = vec![0usize; n];
    let mut cell_score = vec![0.0; n_cells];
    for xi in 0..n_x {
        decode(xi, t, &mut x_str);
        for yi in 0..n_y {
            decode(yi, pairs, &mut y_str);
            let (k, l) = crate::bell_model::correct_count(&x_str, &y_str, &table, game)?;
            let per_run = (2 * k + l) as f64 - n as f64;
            cell_score[xi * n_y + yi] = game.weight() * p_x[xi] * per_run / n as f64;
        }
    }

    let cell = |xi: usize, yi: usize| xi * n_y + yi;
    let lp: LinearProgram = match measure.kind {
        MdKind::MaxProb => {
            // Variables: p cells then one slack per cap constraint.
            let cap = measure.value.powi(n as i32);
            let cols = 2 * n_cells;
            let mut objective = vec![0.0; cols];
            objective[..n_cells].copy_from_slice(&cell_score);
            for x in objective[..n_cells].iter_mut() {
                *x = -*x;
            }
            let mut constraints = Vec::with_capacity(n_x + n_y + n_cells);
            let mut rhs = Vec::with_capacity(n_x + n_y + n_cells);
            for xi in 0..n_x {
                let mut row = vec![0.0; cols];
                for yi in 0..n_y {
                    row[cell(xi, yi)] = 1.0;
                }
                constraints.push(row);
                rhs.push(1.0);
            }
            for yi in 0..n_y {
                let mut row = vec![0.0; cols];
                for xi in 0..n_x {
                    row[cell(xi, yi)] = 1.0;
                }
                constraints.push(row);
                rhs.push(n_x as f64 * uniform_y);
            }
            for i in 0..n_cells {
                let mut row = vec![0.0; cols];
                row[i] = 1.0;
                row[n_cells + i] = 1.0;
                constraints.push(row);
                rhs.push(cap);
            }
            LinearProgram::new(objective, constraints, rhs)?
        }
        MdKind::L1 => {
            // Variables: p, pos, neg cells, then one budget slack per x.
            let cols = 3 * n_cells + n_x;
            let mut objective = vec![0.0; cols];
            for i in 0..n_cells {
                objective[i] = -cell_score[i];
            }
            let mut constraints = Vec::with_capacity(n_x + n_y + n_cells + n_x);
            let mut rhs = Vec::with_capacity(n_x + n_y + n_cells + n_x);
            for xi in 0..n_x {
                let mut row = vec![0.0; cols];
                for yi in 0..n_y {
                    row[cell(xi, yi)] = 1.0;
                }
                constraints.push(row);
                rhs.push(1.0);
            }
            for yi in 0..n_y {
                let mut row = vec![0.0; cols];
                for xi in 0..n_x {
                    row[cell(xi, yi)] = 1.0;
                }
                constraints.push(row);
                rhs.push(n_x as f64 * uniform_y);
            }
            // p - pos + neg = uniform per cell.
            for i in 0..n_cells {
                let mut row = vec![0.0; cols];
                row[i] = 1.0;
                row[n_cells + i] = -1.0;
                row[2 * n_cells + i] = 1.0;
                constraints.push(row);
                rhs.push(uniform_y);
            }
            // Per-x budget: sum_y (pos + neg) + slack = M1.
            for xi in 0..n_x {
                let mut row = vec![0.0; cols];
                for yi in 0..n_y {
                    row[n_cells + cell(xi, yi)] = 1.0;
                    row[2 * n_cells + cell(xi, yi)] = 1.0;
                }
                row[3 * n_cells + xi] = 1.0;
                constraints.push(row);
                rhs.push(measure.value);
            }
            LinearProgram::new(objective, constraints, rhs)?
        }
    };

    let solution = solve(&lp)?;
    let game_tag = game.game_tag().ok_or(Error::UnsupportedGame {
        m: game.settings(),
        why: "no serialization tag for this settings count",
    })?;
    if solution.status != LpStatus::Optimal {
        return Ok(OracleReport {
            game: game_tag,
            n_runs: n,
            measure,
            score: f64::NAN,
            status: solution.status,
            iterations: solution.iterations,
            p_x,
            conditional: Vec::new(),
            achieved: f64::NAN,
        });
    }
    let conditional: Vec<Vec<f64>> = (0..n_x)
        .map(|xi| solution.z[xi * n_y..(xi + 1) * n_y].to_vec())
        .collect();
    let achieved = match measure.kind {
        MdKind::MaxProb => conditional
            .iter()
            .flatten()
            .fold(0.0f64, |a, &b| a.max(b))
            .powf(1.0 / n as f64),
        MdKind::L1 => conditional
            .iter()
            .map(|row| row.iter().map(|&p| (p - uniform_y).abs()).sum::<f64>())
            .fold(0.0f64, f64::max),
    };
    let score: f64 = conditional
        .iter()
        .enumerate()
        .map(|(xi, row)| {
            row.iter()
                .enumerate()
                .map(|(yi, &p)| cell_score[cell(xi, yi)] * p)
                .sum::<f64>()
        })
        .sum();
    Ok(OracleReport {
        game: game_tag,
        n_runs: n,
        measure,
        score,
        status: LpStatus::Optimal,
        iterations: solution.iterations,
        p_x,
        conditional,
        achieved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell_model::chsh_outcome_table;
    use crate::chsh_analytic::{max_score, optimal_profile};
    use crate::rng::CounterRng;

    #[test]
    fn m1_max_values() {
        let chsh = GameSpec::chsh();
        assert!((m1_max(&chsh, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((m1_max(&chsh, 100).unwrap() - 2.0 * (1.0 - 0.75f64.powi(100))).abs() < 1e-12);
        let i3322 = GameSpec::i3322();
        assert!((m1_max(&i3322, 1).unwrap() - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn chsh_program_shape() {
        let n = 5;
        let program = build_chsh_m1(n, 0.3).unwrap();
        assert_eq!(program.lp.n_cols(), 4 * (n + 1));
        assert_eq!(program.lp.n_rows(), 2 * (n + 1) + 2);
        // Scaled objective carries k/N on the mass block only.
        for k in 0..=n {
            assert!((program.lp.objective()[k] + k as f64 / n as f64).abs() < 1e-15);
        }
        assert!(program.lp.objective()[n + 1..].iter().all(|&c| c == 0.0));
        assert!(!program.exceeds_m1_max);
        assert!(build_chsh_m1(n, 1.99).unwrap().exceeds_m1_max);
        assert!(build_chsh_m1(0, 0.1).is_err());
        assert!(build_chsh_m1(2, -0.1).is_err());
    }

    #[test]
    fn chsh_endpoints() {
        let zero = solve_chsh_m1(&build_chsh_m1(1, 0.0).unwrap()).unwrap();
        assert_eq!(zero.status, LpStatus::Optimal);
        assert!((zero.score - 2.0).abs() < 1e-9);

        let full = solve_chsh_m1(&build_chsh_m1(1, 0.5).unwrap()).unwrap();
        assert!((full.score - 4.0).abs() < 1e-9);

        let n = 100;
        let cap = m1_max(&GameSpec::chsh(), n).unwrap();
        let sat = solve_chsh_m1(&build_chsh_m1(n, cap).unwrap()).unwrap();
        assert!((sat.score - 4.0).abs() < 1e-8);
        // The saturating attack concentrates all mass on the all-correct
        // class: p_N = 3^-N, everything else zero.
        let profile = sat.profile.unwrap();
        let p_n = profile.mass(n, 0);
        assert!((p_n * 3.0f64.powi(n as i32) - 1.0).abs() < 1e-6);
        let rest: f64 = profile
            .classes()
            .filter(|&(k, _, m)| k < n && m > 0.0)
            .map(|(k, l, m)| (ln_class_member_count(&ClassCounts::chsh(), n, k, l) + m.ln()).exp())
            .sum();
        assert!(rest.abs() < 1e-6);
    }

    #[test]
    fn chsh_curve_is_monotone_and_beats_repetition() {
        let n = 10;
        let cap = m1_max(&GameSpec::chsh(), n).unwrap();
        let grid: Vec<f64> = (0..=12).map(|i| cap * i as f64 / 12.0).collect();
        let curve = solve_chsh_m1_curve(n, &grid).unwrap();
        let one_shot = chsh_one_shot_curve(n, 200).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for point in &curve {
            assert_eq!(point.status, LpStatus::Optimal);
            assert!(point.score >= prev - 1e-9);
            prev = point.score;
            let repeated = interpolate_curve(&one_shot, point.m1);
            assert!(
                point.score >= repeated - 1e-7,
                "correlated {} below repetition {} at M1={}",
                point.score,
                repeated,
                point.m1
            );
        }
    }

    #[test]
    fn one_shot_product_endpoints() {
        for n in [1usize, 10, 100] {
            let (m0, s0) = chsh_one_shot_product_point(n, 0.25).unwrap();
            assert!(m0.abs() < 1e-12);
            assert!((s0 - 2.0).abs() < 1e-12);
            let (m1, s1) = chsh_one_shot_product_point(n, 1.0 / 3.0).unwrap();
            assert!((m1 - m1_max(&GameSpec::chsh(), n).unwrap()).abs() < 1e-9);
            assert!((s1 - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn coverage_weights_exist_for_both_games() {
        let chsh = GameSpec::chsh();
        let table = chsh_outcome_table();
        let rw = coverage_equalizer(&table, &chsh).unwrap();
        assert!((rw.coverage - 0.75).abs() < 1e-9);
        assert!((rw.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        let i3322 = GameSpec::i3322();
        let table3 = derive_outcome_table(&i3322).unwrap();
        // Raw counts are not homogeneous, so uniform weights cannot work...
        let raw = table3.coverage_counts(&i3322);
        let distinct: std::collections::BTreeSet<usize> =
            raw.iter().map(|&(_, c)| c).collect();
        assert!(distinct.len() > 1, "raw coverage {raw:?}");
        // ...but an equalizing weighting exists, pinned at h = 6/8.
        let rw3 = coverage_equalizer(&table3, &i3322).unwrap();
        assert!((rw3.coverage - 0.75).abs() < 1e-9);
        for &(y, _) in &raw {
            let covered: f64 = table3
                .rows
                .iter()
                .zip(&rw3.weights)
                .filter(|(row, _)| row.is_correct(y))
                .map(|(_, &w)| w)
                .sum();
            assert!((covered - 0.75).abs() < 1e-9, "pair {y}: {covered}");
        }
    }

    #[test]
    fn i3322_endpoints() {
        let game = GameSpec::i3322();
        let zero = solve_imm22(&build_imm22(&game, 1, 0.0).unwrap()).unwrap();
        assert_eq!(zero.status, LpStatus::Optimal);
        assert!((zero.score - 4.0).abs() < 1e-9, "got {}", zero.score);

        for n in [1usize, 2] {
            let cap = m1_max(&game, n).unwrap();
            let sat = solve_imm22(&build_imm22(&game, n, cap).unwrap()).unwrap();
            assert!((sat.score - 8.0).abs() < 1e-8, "N={n}: {}", sat.score);
        }
    }

    #[test]
    fn i3322_zero_budget_matches_uniform_enumeration() {
        // With a zero budget the conditional is pinned to 1/9 and the best
        // row simply maximizes (correct - wrong) over all sign assignments.
        let game = GameSpec::i3322();
        let mut best = i64::MIN;
        for bits in 0..32u32 {
            let mut a = [1i8; 3];
            let mut b = [1i8; 3];
            for t in 0..5 {
                let sign = if bits >> t & 1 == 0 { 1 } else { -1 };
                if t < 2 {
                    a[t + 1] = sign;
                } else {
                    b[t - 2] = sign;
                }
            }
            let mut net = 0i64;
            for (j, &aj) in a.iter().enumerate() {
                for (k, &bk) in b.iter().enumerate() {
                    net += game.alpha(j, k) as i64 * aj as i64 * bk as i64;
                }
            }
            best = best.max(net);
        }
        let expected = best as f64; // score is 9 * best / 9
        let zero = solve_imm22(&build_imm22(&game, 1, 0.0).unwrap()).unwrap();
        assert!((zero.score - expected).abs() < 1e-9);
    }

    #[test]
    fn imm22_with_two_settings_reduces_to_chsh() {
        let game = GameSpec::chsh();
        for n in [1usize, 3] {
            let cap = m1_max(&game, n).unwrap();
            for i in 0..=6 {
                let m1 = cap * i as f64 / 6.0;
                let a = solve_chsh_m1(&build_chsh_m1(n, m1).unwrap()).unwrap();
                let b = solve_imm22(&build_imm22(&game, n, m1).unwrap()).unwrap();
                assert!(
                    (a.score - b.score).abs() < 1e-9,
                    "N={n} M1={m1}: {} vs {}",
                    a.score,
                    b.score
                );
            }
        }
    }

    #[test]
    fn oracle_maxprob_matches_analytic() {
        let game = GameSpec::chsh();
        let report = brute_force_oracle(&game, 1, MdMeasure::max_prob(1.0 / 3.0).unwrap()).unwrap();
        assert!((report.score - 4.0).abs() < 1e-8);

        let p = 15.0f64.powf(-0.5);
        let report2 = brute_force_oracle(&game, 2, MdMeasure::max_prob(p).unwrap()).unwrap();
        assert!((report2.score - 2.4).abs() < 1e-8);
        assert!((report2.score - max_score(2, p).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn oracle_l1_zero_budget_is_classical() {
        let game = GameSpec::chsh();
        let report = brute_force_oracle(&game, 1, MdMeasure::l1(0.0).unwrap()).unwrap();
        assert!((report.score - 2.0).abs() < 1e-9);
        // Audit JSON is well-formed and carries the conditional table.
        let mut buf = Vec::new();
        report.write_audit_json(&mut buf).unwrap();
        let parsed: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(parsed["conditional"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn oracle_size_limit() {
        let game = GameSpec::chsh();
        assert!(matches!(
            brute_force_oracle(&game, 12, MdMeasure::l1(0.1).unwrap()),
            Err(Error::ExpansionTooLarge { .. })
        ));
    }

    #[test]
    fn reduced_matches_oracle_chsh_n1() {
        let cap = m1_max(&GameSpec::chsh(), 1).unwrap();
        for i in 0..=10 {
            let m1 = cap * i as f64 / 10.0;
            let reduced = solve_chsh_m1(&build_chsh_m1(1, m1).unwrap()).unwrap();
            let oracle =
                brute_force_oracle(&GameSpec::chsh(), 1, MdMeasure::l1(m1).unwrap()).unwrap();
            assert!(
                (reduced.score - oracle.score).abs() < 1e-8,
                "M1={m1}: reduced {} oracle {}",
                reduced.score,
                oracle.score
            );
        }
    }

    #[test]
    fn reduced_matches_oracle_chsh_n2_spot() {
        let cap = m1_max(&GameSpec::chsh(), 2).unwrap();
        for i in [0usize, 2, 5] {
            let m1 = cap * i as f64 / 5.0;
            let reduced = solve_chsh_m1(&build_chsh_m1(2, m1).unwrap()).unwrap();
            let oracle =
                brute_force_oracle(&GameSpec::chsh(), 2, MdMeasure::l1(m1).unwrap()).unwrap();
            assert!(
                (reduced.score - oracle.score).abs() < 1e-8,
                "M1={m1}: reduced {} oracle {}",
                reduced.score,
                oracle.score
            );
        }
    }

    #[test]
    fn reduced_matches_oracle_i3322_n1_spot() {
        let game = GameSpec::i3322();
        let cap = m1_max(&game, 1).unwrap();
        for i in [0usize, 1, 3] {
            let m1 = cap * i as f64 / 3.0;
            let reduced = solve_imm22(&build_imm22(&game, 1, m1).unwrap()).unwrap();
            let oracle = brute_force_oracle(&game, 1, MdMeasure::l1(m1).unwrap()).unwrap();
            assert!(
                (reduced.score - oracle.score).abs() < 1e-8,
                "M1={m1}: reduced {} oracle {}",
                reduced.score,
                oracle.score
            );
        }
    }

    #[test]
    fn active_budget_is_reproduced_by_the_profile() {
        for (n, steps) in [(1usize, 5usize), (3, 5)] {
            let cap = m1_max(&GameSpec::chsh(), n).unwrap();
            for i in 1..steps {
                let m1 = cap * i as f64 / steps as f64;
                let solved = solve_chsh_m1(&build_chsh_m1(n, m1).unwrap()).unwrap();
                if solved.score < 4.0 - 1e-6 {
                    let realized = solved
                        .profile
                        .unwrap()
                        .md_measure(MdKind::L1)
                        .unwrap()
                        .value;
                    assert!(
                        (realized - m1).abs() < 1e-7,
                        "N={n} budget {m1} realized {realized}"
                    );
                }
            }
        }
    }

    #[test]
    fn maxprob_profile_fits_inside_l1_budget() {
        for n in [1usize, 2, 3] {
            for i in 1..=5 {
                let p = 0.25 + (1.0 / 3.0 - 0.25) * i as f64 / 5.0;
                let profile = optimal_profile(n, p).unwrap();
                let m1 = profile.md_measure(MdKind::L1).unwrap().value;
                let score_p = profile.score().unwrap();
                let solved = solve_chsh_m1(&build_chsh_m1(n, m1).unwrap()).unwrap();
                assert!(
                    solved.score >= score_p - 1e-9,
                    "N={n} P={p}: L1 budget {m1} gives {} < {score_p}",
                    solved.score
                );
            }
        }
    }

    #[test]
    fn one_shot_slope_is_four() {
        // Measured relation between budget and score for one run, compared
        // against the full oracle.
        let cap = m1_max(&GameSpec::chsh(), 1).unwrap();
        let grid: Vec<f64> = (0..=8).map(|i| cap * i as f64 / 8.0).collect();
        for &m1 in &grid {
            let reduced = solve_chsh_m1(&build_chsh_m1(1, m1).unwrap()).unwrap();
            let expected = 2.0 + 4.0 * m1;
            assert!(
                (reduced.score - expected).abs() < 1e-9,
                "M1={m1}: {} vs 2 + 4 M1 = {expected}",
                reduced.score
            );
        }
    }

    #[test]
    fn solved_profiles_have_uniform_marginals() {
        let table = chsh_outcome_table();
        let solved = solve_chsh_m1(&build_chsh_m1(2, 0.07).unwrap()).unwrap();
        let profile = solved.profile.unwrap();
        let expansion = profile.expand(&table).unwrap();
        for y in 0..expansion.n_cols() {
            assert!((expansion.uniform_marginal(y) - 1.0 / 16.0).abs() < 1e-9);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn weak_duality_on_feasible_perturbations() {
        let n = 3;
        let budget = 0.4;
        let program = build_chsh_m1(n, budget).unwrap();
        let solved = solve_chsh_m1(&program).unwrap();
        let optimum = -(solved.score + 4.0) / 8.0; // back to objective units

        let ln_sizes = ln_chsh_sizes(n);
        let sizes: Vec<f64> = ln_sizes.iter().map(|&x| x.exp()).collect();
        let uniform = 0.25f64.powi(n as i32);
        let mut rng = CounterRng::new(0xFEA51B1E);
        for _ in 0..100 {
            // Random normalized profile, shrunk toward uniform until the
            // budget holds.
            let raw: Vec<f64> = (0..=n).map(|_| rng.next_f64() + 1e-6).collect();
            let total: f64 = raw.iter().zip(&sizes).map(|(r, s)| r * s).sum();
            let masses: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let m1_of: f64 = masses
                .iter()
                .zip(&sizes)
                .map(|(&p, &s)| s * (p - uniform).abs())
                .sum();
            let lambda = if m1_of > budget {
                budget / m1_of * 0.999
            } else {
                1.0
            };
            let mixed: Vec<f64> = masses
                .iter()
                .map(|&p| uniform + lambda * (p - uniform))
                .collect();
            // Assemble the full scaled variable vector.
            let mut z = vec![0.0; 4 * (n + 1)];
            let mut used = 0.0;
            for k in 0..=n {
                let scaled_p = mixed[k] * sizes[k];
                let scaled_dev = (mixed[k] - uniform).abs() * sizes[k];
                z[k] = scaled_p;
                z[n + 1 + k] = scaled_dev;
                used += scaled_dev;
            }
            // Park leftover budget on w_0 and fix the a/b blocks.
            z[n + 1] += budget - used;
            for k in 0..=n {
                let rho = sizes[k] * uniform;
                z[2 * (n + 1) + k] = z[n + 1 + k] - z[k] + rho;
                z[3 * (n + 1) + k] = z[n + 1 + k] + z[k] - rho;
                assert!(z[2 * (n + 1) + k] >= -1e-12);
                assert!(z[3 * (n + 1) + k] >= -1e-12);
            }
            let objective: f64 = program
                .lp
                .objective()
                .iter()
                .zip(&z)
                .map(|(c, zi)| c * zi)
                .sum();
            assert!(
                objective >= optimum - 1e-9,
                "feasible point beats the optimum: {objective} < {optimum}"
            );
        }
    }
}
