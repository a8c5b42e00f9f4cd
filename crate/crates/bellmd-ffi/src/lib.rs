//! C ABI over the `bellmd` library.
//!
//! Every function returns a [`BellmdStatus`]; results come back through out
//! pointers, written only on success. Heap objects cross the boundary as
//! opaque handles with explicit `_free` functions. The matching declarations
//! live in `include/bellmd.h`, kept in sync by `tests/header_sync.rs`.
//!
//! All entry points taking pointers are `unsafe`: the caller must pass
//! either null (where documented) or pointers valid for the access, and
//! handles must come from the matching `_new` and not be used after `_free`.
//! Null pointers are detected and reported, dangling ones cannot be.
//!
//! Thread safety: handles are immutable after construction and may be shared
//! across threads; the last-error message is thread-local.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bellmd::bell_lp::{build_chsh_m1, build_imm22, m1_max, solve_chsh_m1, solve_imm22};
use bellmd::bell_model::{chsh_outcome_table, Game, GameSpec, MdKind, StrategyProfile};
use bellmd::chsh_analytic::{
    asymptotic_bound_p, asymptotic_score, breakpoints, max_score, optimal_profile,
    single_shot_score, BreakpointCurve,
};
use bellmd::lp_core::LpStatus;
use bellmd::quantum_adversary::sq_from_sc;
use bellmd::strategy_sim::estimate;

/// Result codes for every FFI entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BellmdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    SizeLimit = 4,
    Solver = 5,
    Internal = 6,
}

/// Game selectors for functions shared between the two games.
pub const BELLMD_GAME_CHSH: u32 = 0;
pub const BELLMD_GAME_I3322: u32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: BellmdStatus, message: &str) -> BellmdStatus {
    set_error(message);
    status
}

fn map_error(err: &bellmd::Error) -> BellmdStatus {
    match err {
        bellmd::Error::OutOfDomain { .. }
        | bellmd::Error::RunCountOutOfRange { .. }
        | bellmd::Error::MassUnderflow { .. } => BellmdStatus::Domain,
        bellmd::Error::ExpansionTooLarge { .. } | bellmd::Error::EnumerationTooLarge { .. } => {
            BellmdStatus::SizeLimit
        }
        bellmd::Error::Lp(_) => BellmdStatus::Solver,
        _ => BellmdStatus::InvalidArgument,
    }
}

unsafe fn from_result<T>(result: bellmd::Result<T>, out: *mut T) -> BellmdStatus {
    if out.is_null() {
        return fail(BellmdStatus::NullPointer, "null output pointer");
    }
    match result {
        Ok(value) => {
            out.write(value);
            BellmdStatus::Ok
        }
        Err(err) => fail(map_error(&err), &err.to_string()),
    }
}

fn guarded(body: impl FnOnce() -> BellmdStatus) -> BellmdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(BellmdStatus::Internal, "internal panic"),
    }
}

fn game_from_code(code: u32) -> Option<Game> {
    match code {
        BELLMD_GAME_CHSH => Some(Game::Chsh),
        BELLMD_GAME_I3322 => Some(Game::I3322),
        _ => None,
    }
}

/// Copy the last error message for this thread into `buffer` (truncating,
/// always NUL-terminated when `capacity > 0`) and return the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buffer` must be null or valid for writing `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn bellmd_last_error_message(
    buffer: *mut c_char,
    capacity: usize,
) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let copy = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, copy);
            *buffer.add(copy) = 0;
        }
        bytes.len()
    })
}

// ---------------------------------------------------------------------------
// Scalar evaluations
// ---------------------------------------------------------------------------

/// Optimal single-run score at per-run level `p`: `24p - 4`, saturating at 4.
///
/// # Safety
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_single_shot_score(p: f64, out: *mut f64) -> BellmdStatus {
    guarded(|| unsafe { from_result(single_shot_score(p), out) })
}

/// Optimal `n`-run correlated score at per-run level `p`.
///
/// # Safety
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_max_score(n: u32, p: f64, out: *mut f64) -> BellmdStatus {
    guarded(|| unsafe { from_result(max_score(n as usize, p), out) })
}

/// Minimal per-run level faking score `s` with unbounded correlation.
///
/// # Safety
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_asymptotic_bound_p(s: f64, out: *mut f64) -> BellmdStatus {
    guarded(|| unsafe { from_result(asymptotic_bound_p(s), out) })
}

/// Infinite-run score ceiling at per-run level `p` (inverse of the bound).
///
/// # Safety
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_asymptotic_score(p: f64, out: *mut f64) -> BellmdStatus {
    guarded(|| unsafe { from_result(asymptotic_score(p), out) })
}

/// Quantum ceiling paired with a classical optimum `s_c`.
///
/// # Safety
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_sq_from_sc(s_c: f64, out: *mut f64) -> BellmdStatus {
    guarded(|| unsafe { from_result(sq_from_sc(s_c), out) })
}

/// L1 budget at which the score of `game` saturates for `n` runs.
///
/// # Safety
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_m1_max(game: u32, n: u32, out: *mut f64) -> BellmdStatus {
    guarded(|| {
        let Some(game) = game_from_code(game) else {
            return fail(BellmdStatus::InvalidArgument, "unknown game code");
        };
        unsafe { from_result(m1_max(&game.spec(), n as usize), out) }
    })
}

// ---------------------------------------------------------------------------
// Budget LP solves
// ---------------------------------------------------------------------------

fn lp_status_error(status: LpStatus) -> BellmdStatus {
    fail(
        BellmdStatus::Solver,
        match status {
            LpStatus::Infeasible => "linear program is infeasible",
            LpStatus::Unbounded => "linear program is unbounded",
            LpStatus::Optimal => "unexpected optimal status",
        },
    )
}

/// Optimal correlated score for `game` over `n` runs at L1 budget `m1`.
///
/// # Safety
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_solve_m1(
    game: u32,
    n: u32,
    m1: f64,
    out: *mut f64,
) -> BellmdStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BellmdStatus::NullPointer, "null output pointer");
        }
        let Some(game) = game_from_code(game) else {
            return fail(BellmdStatus::InvalidArgument, "unknown game code");
        };
        let solved = match game {
            Game::Chsh => build_chsh_m1(n as usize, m1).and_then(|p| solve_chsh_m1(&p)),
            Game::I3322 => {
                build_imm22(&game.spec(), n as usize, m1).and_then(|p| solve_imm22(&p))
            }
        };
        match solved {
            Ok(solution) if solution.status == LpStatus::Optimal => {
                unsafe { out.write(solution.score) };
                BellmdStatus::Ok
            }
            Ok(solution) => lp_status_error(solution.status),
            Err(err) => fail(map_error(&err), &err.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Breakpoint curves (opaque handle)
// ---------------------------------------------------------------------------

/// Opaque curve of optimal-attack vertices.
pub struct BellmdCurve(BreakpointCurve);

/// Build the vertex curve for `n` runs. Release with [`bellmd_curve_free`].
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn bellmd_curve_new(
    n: u32,
    out: *mut *mut BellmdCurve,
) -> BellmdStatus {
    guarded(|| {
        let boxed = breakpoints(n as usize).map(|c| Box::into_raw(Box::new(BellmdCurve(c))));
        unsafe { from_result(boxed, out) }
    })
}

/// Number of vertices (`n + 1`).
///
/// # Safety
/// `curve` must be a live handle from [`bellmd_curve_new`] or null; `out`
/// must be null or valid for writing one `usize`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_curve_len(
    curve: *const BellmdCurve,
    out: *mut usize,
) -> BellmdStatus {
    if curve.is_null() || out.is_null() {
        return fail(BellmdStatus::NullPointer, "null curve or output pointer");
    }
    out.write((*curve).0.points.len());
    BellmdStatus::Ok
}

/// Vertex coordinates: per-run level, score and the threshold class index
/// (`SIZE_MAX` when the point is not a vertex).
///
/// # Safety
/// `curve` must be a live handle or null; the out pointers must be null or
/// valid for writing.
#[no_mangle]
pub unsafe extern "C" fn bellmd_curve_point(
    curve: *const BellmdCurve,
    index: usize,
    out_p: *mut f64,
    out_s: *mut f64,
    out_lprime: *mut usize,
) -> BellmdStatus {
    if curve.is_null() || out_p.is_null() || out_s.is_null() || out_lprime.is_null() {
        return fail(BellmdStatus::NullPointer, "null pointer argument");
    }
    let points = &(*curve).0.points;
    let Some(point) = points.get(index) else {
        return fail(BellmdStatus::InvalidArgument, "vertex index out of range");
    };
    out_p.write(point.p);
    out_s.write(point.s);
    out_lprime.write(point.lprime.unwrap_or(usize::MAX));
    BellmdStatus::Ok
}

/// Release a curve handle. Null is a no-op.
///
/// # Safety
/// `curve` must be null or a handle from [`bellmd_curve_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bellmd_curve_free(curve: *mut BellmdCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

// ---------------------------------------------------------------------------
// Strategy profiles (opaque handle)
// ---------------------------------------------------------------------------

/// Opaque optimal CHSH strategy profile.
pub struct BellmdProfile(StrategyProfile);

/// Build the optimal `n`-run profile at per-run level `p`. Release with
/// [`bellmd_profile_free`].
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn bellmd_profile_new(
    n: u32,
    p: f64,
    out: *mut *mut BellmdProfile,
) -> BellmdStatus {
    guarded(|| {
        let boxed =
            optimal_profile(n as usize, p).map(|pr| Box::into_raw(Box::new(BellmdProfile(pr))));
        unsafe { from_result(boxed, out) }
    })
}

/// Expected score of the profile.
///
/// # Safety
/// `profile` must be a live handle or null; `out` must be null or valid for
/// writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_profile_score(
    profile: *const BellmdProfile,
    out: *mut f64,
) -> BellmdStatus {
    guarded(|| {
        if profile.is_null() {
            return fail(BellmdStatus::NullPointer, "null profile handle");
        }
        unsafe { from_result((*profile).0.score(), out) }
    })
}

/// Measurement-dependence value of the profile: per-run max-prob level when
/// `use_l1` is zero, the block L1 value otherwise.
///
/// # Safety
/// `profile` must be a live handle or null; `out` must be null or valid for
/// writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_profile_md(
    profile: *const BellmdProfile,
    use_l1: u8,
    out: *mut f64,
) -> BellmdStatus {
    guarded(|| {
        if profile.is_null() {
            return fail(BellmdStatus::NullPointer, "null profile handle");
        }
        let kind = if use_l1 == 0 { MdKind::MaxProb } else { MdKind::L1 };
        let measured = unsafe { &(*profile).0 }.md_measure(kind).map(|m| m.value);
        unsafe { from_result(measured, out) }
    })
}

/// Member mass of the class with `k` correct runs.
///
/// # Safety
/// `profile` must be a live handle or null; `out` must be null or valid for
/// writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn bellmd_profile_mass(
    profile: *const BellmdProfile,
    k: usize,
    out: *mut f64,
) -> BellmdStatus {
    if profile.is_null() || out.is_null() {
        return fail(BellmdStatus::NullPointer, "null pointer argument");
    }
    out.write((*profile).0.mass(k, 0));
    BellmdStatus::Ok
}

/// Serialize the profile as JSON into `buffer` (truncating, NUL-terminated
/// when `capacity > 0`) and return the full length in bytes.
///
/// # Safety
/// `profile` must be a live handle or null; `buffer` must be null or valid
/// for writing `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn bellmd_profile_to_json(
    profile: *const BellmdProfile,
    buffer: *mut c_char,
    capacity: usize,
) -> usize {
    if profile.is_null() {
        return 0;
    }
    let json = (*profile).0.to_json();
    let bytes = json.as_bytes();
    if !buffer.is_null() && capacity > 0 {
        let copy = bytes.len().min(capacity - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, copy);
        *buffer.add(copy) = 0;
    }
    bytes.len()
}

/// Release a profile handle. Null is a no-op.
///
/// # Safety
/// `profile` must be null or a handle from [`bellmd_profile_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn bellmd_profile_free(profile: *mut BellmdProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Flat simulation summary for the C side.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BellmdSimSummary {
    pub trials: u64,
    pub seed: u64,
    pub empirical_s: f64,
    pub std_error: f64,
    pub analytic_s: f64,
    pub worst_marginal_deviation: f64,
    pub worst_outcome_bias: f64,
    /// 1 when every 4-sigma check passed.
    pub all_checks_passed: u8,
}

/// Run the Monte-Carlo verification of the optimal `n`-run profile at
/// per-run level `p`.
///
/// # Safety
/// `out` must be null or valid for writing one [`BellmdSimSummary`].
#[no_mangle]
pub unsafe extern "C" fn bellmd_simulate_chsh(
    n: u32,
    p: f64,
    trials: u64,
    seed: u64,
    out: *mut BellmdSimSummary,
) -> BellmdStatus {
    guarded(|| {
        let run = optimal_profile(n as usize, p).and_then(|profile| {
            estimate(
                &profile,
                &chsh_outcome_table(),
                &GameSpec::chsh(),
                trials,
                seed,
            )
        });
        let summary = run.map(|report| BellmdSimSummary {
            trials: report.trials,
            seed: report.seed,
            empirical_s: report.empirical_s,
            std_error: report.std_error,
            analytic_s: report.analytic_s,
            worst_marginal_deviation: report.checks[1].observed,
            worst_outcome_bias: report.checks[2].observed,
            all_checks_passed: report.all_checks_passed as u8,
        });
        unsafe { from_result(summary, out) }
    })
}
