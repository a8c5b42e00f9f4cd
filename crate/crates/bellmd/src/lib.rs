//! Optimal adversarial strategies for Bell tests under limited measurement
//! dependence.
//!
//! A Bell test run by two honest parties assumes their measurement choices
//! are random. An adversary who pre-programs both the devices and the random
//! number generators can correlate the two and fake a violation. This crate
//! quantifies how far such an attack can go when the degree of correlation
//! (the "measurement dependence", MD) is bounded, for attacks correlated
//! across blocks of `N` runs:
//!
//! * [`bell_model`] - games, deterministic outcome tables, symmetry-reduced
//!   strategy profiles, and the two MD measures (max conditional probability
//!   `P` and the L1 deviation `M1`).
//! * [`chsh_analytic`] - closed-form optimal CHSH attacks under `P`: the
//!   single-shot law, the N-run breakpoint curve, and the large-N bound.
//! * [`quantum_adversary`] - the quantum ceiling for a given classical
//!   attack level.
//! * [`lp_core`] - a small dense two-phase simplex solver.
//! * [`bell_lp`] - LP formulations of the `M1`-constrained attacks for CHSH
//!   and the three-setting game, plus full-dimensional brute-force oracles.
//! * [`strategy_sim`] - Monte-Carlo execution of a strategy profile with
//!   honest-looking statistics checks.
//!
//! The `bellmd` binary exposes curve generation, LP solves, simulation and
//! figure-data reproduction on the command line.

pub mod bell_lp;
pub mod bell_model;
pub mod chsh_analytic;
pub mod lp_core;
pub mod numfmt;
pub mod quantum_adversary;
pub mod rng;
pub mod strategy_sim;

pub use bell_model::{GameSpec, MdKind, MdMeasure, OutcomeTable, StrategyProfile};
pub use chsh_analytic::{BreakpointCurve, CurvePoint};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("hidden-variable and settings strings differ in length ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },

    #[error("index {value} out of range for {what} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("profile is not normalized: class masses sum to {sum}")]
    Unnormalized { sum: f64 },

    #[error("profile contains a negative class mass ({mass} for class ({k},{l}))")]
    NegativeMass { k: usize, l: usize, mass: f64 },

    #[error("enumeration refused: m = {m} exceeds the supported settings count {limit}")]
    EnumerationTooLarge { m: usize, limit: usize },

    #[error("expansion size {cells} exceeds the limit {limit}")]
    ExpansionTooLarge { cells: u128, limit: u128 },

    #[error("{what} = {value} outside the domain [{lo}, {hi}]")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("run count N = {n} outside the supported range [{lo}, {hi}]")]
    RunCountOutOfRange { n: usize, lo: usize, hi: usize },

    #[error("per-run masses underflow f64 for N = {n} at P = {p}")]
    MassUnderflow { n: usize, p: f64 },

    #[error("game with m = {m} settings is not supported here: {why}")]
    UnsupportedGame { m: usize, why: &'static str },

    #[error(
        "outcome rows are not regular: row {row} answers {got} used pairs correctly, expected {expected}"
    )]
    InhomogeneousRows {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("no row weighting equalizes settings-pair coverage; class reduction is invalid")]
    CoverageNotEqualizable,

    #[error("linear program error: {0}")]
    Lp(#[from] lp_core::LpError),

    #[error("measure kind {found} is not valid here: {why}")]
    WrongMeasure { found: &'static str, why: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;
