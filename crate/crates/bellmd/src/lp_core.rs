//! A small, deterministic, dense linear-programming solver.
//!
//! Solves equality-standard-form problems, minimize `c . z` subject to
//! `B z = v`, `z >= 0`, with a two-phase tableau simplex. Bland's rule is
//! always on: pivots are selected by smallest index, so degenerate vertices
//! cannot cycle and identical inputs yield bit-identical solutions.

use std::io;

/// Pivot elements smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;
/// Feasibility and optimality tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Cap on constraint-matrix entries.
pub const MAX_ENTRIES: usize = 10_000_000;
/// Hard safety cap on simplex iterations.
const MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LpError {
    #[error("dimension mismatch: |c| = {objective}, B is {rows}x{cols}, |v| = {rhs}")]
    DimensionMismatch {
        objective: usize,
        rows: usize,
        cols: usize,
        rhs: usize,
    },

    #[error("non-finite entry in the problem data")]
    NonFiniteEntry,

    #[error("problem too large: {entries} matrix entries exceed {limit}")]
    TooLarge { entries: usize, limit: usize },

    #[error("numerically singular basis: {0}")]
    SingularBasis(&'static str),

    #[error("iteration limit reached")]
    IterationLimit,
}

/// Standard-form problem data.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(
        objective: Vec<f64>,
        constraints: Vec<Vec<f64>>,
        rhs: Vec<f64>,
    ) -> Result<LinearProgram, LpError> {
        let cols = objective.len();
        let rows = constraints.len();
        if rhs.len() != rows || constraints.iter().any(|r| r.len() != cols) {
            return Err(LpError::DimensionMismatch {
                objective: cols,
                rows,
                cols: constraints.first().map_or(cols, Vec::len),
                rhs: rhs.len(),
            });
        }
        let entries = rows.saturating_mul(cols);
        if entries > MAX_ENTRIES {
            return Err(LpError::TooLarge {
                entries,
                limit: MAX_ENTRIES,
            });
        }
        let finite = objective.iter().all(|x| x.is_finite())
            && rhs.iter().all(|x| x.is_finite())
            && constraints.iter().flatten().all(|x| x.is_finite());
        if !finite {
            return Err(LpError::NonFiniteEntry);
        }
        Ok(LinearProgram {
            objective,
            constraints,
            rhs,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Vec<f64>] {
        &self.constraints
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Plain-text dump of `(c, B, v)` for external cross-checking. Each
    /// block starts with a `rows cols` line followed by row-major entries.
    pub fn write_matrix_dump<W: io::Write>(&self, out: &mut W) -> io::Result<()> {
        let write_row = |out: &mut W, row: &[f64]| -> io::Result<()> {
            let mut first = true;
            for x in row {
                if !first {
                    write!(out, " ")?;
                }
                write!(out, "{x:.17e}")?;
                first = false;
            }
            writeln!(out)
        };
        writeln!(out, "1 {}", self.n_cols())?;
        write_row(out, &self.objective)?;
        writeln!(out, "{} {}", self.n_rows(), self.n_cols())?;
        for row in &self.constraints {
            write_row(out, row)?;
        }
        writeln!(out, "{} 1", self.n_rows())?;
        for x in &self.rhs {
            writeln!(out, "{x:.17e}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (empty unless optimal).
    pub z: Vec<f64>,
    /// Objective value `c . z` (0 unless optimal).
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    /// `m` constraint rows, then the phase-2 cost row, then the phase-1
    /// cost row; each row ends with the rhs entry.
    rows: Vec<Vec<f64>>,
    /// Basic column per constraint row.
    basis: Vec<usize>,
    n_structural: usize,
    n_rows: usize,
    width: usize,
    iterations: usize,
}

impl Tableau {
    fn cost_row(&self, phase1: bool) -> usize {
        if phase1 {
            self.n_rows + 1
        } else {
            self.n_rows
        }
    }

    fn pivot(&mut self, row: usize, col: usize) -> Result<(), LpError> {
        let pivot = self.rows[row][col];
        if pivot.abs() < PIVOT_TOL {
            return Err(LpError::SingularBasis("pivot element vanished"));
        }
        let inv = 1.0 / pivot;
        for x in self.rows[row].iter_mut() {
            *x *= inv;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor == 0.0 {
                continue;
            }
            for (x, &p) in r.iter_mut().zip(&pivot_row) {
                *x -= factor * p;
            }
            // Keep the eliminated entry exactly zero.
            r[col] = 0.0;
        }
        self.basis[row] = col;
        self.iterations += 1;
        Ok(())
    }

    /// Bland entering rule: the lowest-index structural column with a
    /// negative reduced cost.
    fn entering(&self, phase1: bool) -> Option<usize> {
        let cost = &self.rows[self.cost_row(phase1)];
        (0..self.n_structural).find(|&j| cost[j] < -PIVOT_TOL)
    }

    /// Bland leaving rule: minimum ratio, ties broken by the smallest basic
    /// variable index.
    fn leaving(&self, col: usize) -> Option<usize> {
        let rhs_col = self.width - 1;
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.n_rows {
            let a = self.rows[i][col];
            if a > PIVOT_TOL {
                let ratio = self.rows[i][rhs_col] / a;
                let candidate = (ratio, self.basis[i], i);
                best = Some(match best {
                    None => candidate,
                    Some(current) => {
                        if candidate.0 < current.0 - 1e-12
                            || (candidate.0 < current.0 + 1e-12 && candidate.1 < current.1)
                        {
                            candidate
                        } else {
                            current
                        }
                    }
                });
            }
        }
        best.map(|(_, _, i)| i)
    }

    fn run_phase(&mut self, phase1: bool) -> Result<LpStatus, LpError> {
        while let Some(col) = self.entering(phase1) {
            if self.iterations >= MAX_ITERATIONS {
                return Err(LpError::IterationLimit);
            }
            match self.leaving(col) {
                Some(row) => self.pivot(row, col)?,
                None => return Ok(LpStatus::Unbounded),
            }
        }
        Ok(LpStatus::Optimal)
    }
}

/// Solve a standard-form LP with the two-phase simplex method.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let m = lp.n_rows();
    let n = lp.n_cols();

    // Sign-normalize so every rhs is non-negative.
    let mut body: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for (row, &v) in lp.constraints.iter().zip(&lp.rhs) {
        if v < 0.0 {
            body.push(row.iter().map(|x| -x).collect());
            rhs.push(-v);
        } else {
            body.push(row.clone());
            rhs.push(v);
        }
    }

    // Crash basis: reuse structural columns that are already unit vectors.
    let mut nonzero_count = vec![0usize; n];
    let mut nonzero_row = vec![usize::MAX; n];
    for (i, row) in body.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if x != 0.0 {
                nonzero_count[j] += 1;
                nonzero_row[j] = i;
            }
        }
    }
    let mut basis = vec![usize::MAX; m];
    for j in 0..n {
        if nonzero_count[j] == 1 {
            let i = nonzero_row[j];
            if basis[i] == usize::MAX && (body[i][j] - 1.0).abs() < 1e-14 {
                basis[i] = j;
            }
        }
    }

    let artificial_rows: Vec<usize> = (0..m).filter(|&i| basis[i] == usize::MAX).collect();
    let n_art = artificial_rows.len();
    let width = n + n_art + 1;

    let mut rows = vec![vec![0.0; width]; m + 2];
    for i in 0..m {
        rows[i][..n].copy_from_slice(&body[i]);
        rows[i][width - 1] = rhs[i];
    }
    for (a, &i) in artificial_rows.iter().enumerate() {
        rows[i][n + a] = 1.0;
        basis[i] = n + a;
    }

    // Phase-2 cost row: reduced costs of the original objective under the
    // crash basis.
    rows[m][..n].copy_from_slice(&lp.objective);
    for i in 0..m {
        let j = basis[i];
        if j < n {
            let c = lp.objective[j];
            if c != 0.0 {
                let basic = rows[i].clone();
                for (x, &b) in rows[m].iter_mut().zip(&basic) {
                    *x -= c * b;
                }
            }
        }
    }

    // Phase-1 cost row: minimize the sum of artificials.
    for &i in &artificial_rows {
        let basic = rows[i].clone();
        for (x, &b) in rows[m + 1].iter_mut().zip(&basic) {
            *x -= b;
        }
    }
    for a in 0..n_art {
        rows[m + 1][n + a] = 0.0;
    }

    let mut t = Tableau {
        rows,
        basis,
        n_structural: n,
        n_rows: m,
        width,
        iterations: 0,
    };

    if n_art > 0 {
        let status = t.run_phase(true)?;
        if status == LpStatus::Unbounded {
            return Err(LpError::SingularBasis("phase 1 reported unbounded"));
        }
        let infeasibility = -t.rows[m + 1][width - 1];
        if infeasibility > FEAS_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                z: Vec::new(),
                objective: 0.0,
                iterations: t.iterations,
            });
        }
        // Drive remaining artificials out of the basis where possible;
        // rows without any structural entry are redundant and stay put at
        // value zero.
        for i in 0..m {
            if t.basis[i] >= n {
                if let Some(col) = (0..n).find(|&j| t.rows[i][j].abs() > PIVOT_TOL) {
                    t.pivot(i, col)?;
                }
            }
        }
    }

    let status = t.run_phase(false)?;
    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            z: Vec::new(),
            objective: 0.0,
            iterations: t.iterations,
        });
    }

    let mut z = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            z[t.basis[i]] = t.rows[i][width - 1];
        }
    }
    if z.iter().any(|&x| x < -FEAS_TOL) {
        return Err(LpError::SingularBasis("negative basic value"));
    }
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    for (row, &v) in lp.constraints.iter().zip(&lp.rhs) {
        let lhs: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
        if (lhs - v).abs() > FEAS_TOL * scale {
            return Err(LpError::SingularBasis("solution fails feasibility check"));
        }
    }
    let objective = lp.objective.iter().zip(&z).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        z,
        objective,
        iterations: t.iterations,
    })
}
