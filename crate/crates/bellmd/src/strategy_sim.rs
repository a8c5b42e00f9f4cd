//! Monte-Carlo execution of a CHSH strategy profile.
//!
//! Each trial plays one `N`-run block: a hidden string is drawn uniformly,
//! a settings string is drawn from the profile's class distribution, and
//! the pre-programmed outcomes are emitted with a fair global sign flip so
//! the outcome marginals stay centered. The estimator checks that the
//! attack delivers its predicted score while the per-run settings
//! frequencies look uniform to the honest parties.

use rayon::prelude::*;
use serde::Serialize;

use crate::bell_model::{Game, GameSpec, OutcomeTable, StrategyProfile};
use crate::rng::CounterRng;
use crate::{Error, Result};

/// Minimum trial count accepted by [`estimate`].
pub const MIN_TRIALS: u64 = 1_000;

/// Blocks per parallel chunk. Partial statistics are folded in chunk order,
/// so reports are identical for any thread count.
const CHUNK: u64 = 16_384;

/// RNG draws reserved per block; a block consumes at most `3N + 3`.
fn stride(n_runs: usize) -> u64 {
    4 * n_runs as u64 + 8
}

/// One sampled block.
#[derive(Clone, Debug)]
pub struct Block {
    pub x: Vec<u8>,
    pub y: Vec<u8>,
    pub alice: Vec<i8>,
    pub bob: Vec<i8>,
    pub sign: i8,
}

/// A single verification statistic with its pass threshold.
#[derive(Clone, Debug, Serialize)]
pub struct SimCheck {
    pub name: String,
    pub observed: f64,
    pub limit: f64,
    pub passed: bool,
}

/// Full simulation summary.
#[derive(Clone, Debug, Serialize)]
pub struct SimReport {
    pub trials: u64,
    pub n_runs: usize,
    pub seed: u64,
    pub empirical_s: f64,
    /// Sample standard deviation of the per-block score over sqrt(trials).
    pub std_error: f64,
    pub analytic_s: f64,
    /// Largest class member mass of the profile (block-level max-prob).
    pub analytic_max_mass: f64,
    /// Per run position, the frequency of each of the four settings pairs.
    pub marginal_freq: Vec<[f64; 4]>,
    pub outcome_mean_alice: Vec<f64>,
    pub outcome_mean_bob: Vec<f64>,
    pub checks: Vec<SimCheck>,
    pub all_checks_passed: bool,
}

/// Cumulative class distribution for fast inverse sampling.
struct ClassSampler {
    cumulative: Vec<(f64, usize)>,
}

impl ClassSampler {
    fn new(profile: &StrategyProfile) -> ClassSampler {
        let counts = profile.class_counts();
        let n = profile.n_runs();
        let mut acc = 0.0;
        let mut cumulative = Vec::new();
        for (k, l, mass) in profile.classes() {
            debug_assert_eq!(l, 0, "CHSH classes have no unused runs");
            if mass <= 0.0 {
                continue;
            }
            let ln_count = crate::bell_model::ln_class_member_count(&counts, n, k, l);
            acc += (ln_count + mass.ln()).exp();
            cumulative.push((acc, k));
        }
        ClassSampler { cumulative }
    }

    fn draw(&self, u: f64) -> usize {
        let total = self.cumulative.last().map_or(1.0, |&(c, _)| c);
        let target = u * total;
        for &(c, k) in &self.cumulative {
            if target < c {
                return k;
            }
        }
        self.cumulative.last().map_or(0, |&(_, k)| k)
    }
}

fn require_chsh(profile: &StrategyProfile, table: &OutcomeTable) -> Result<()> {
    if profile.game() != Game::Chsh || table.settings() != 2 || table.len() != 4 {
        return Err(Error::UnsupportedGame {
            m: table.settings(),
            why: "the simulator covers the CHSH game",
        });
    }
    profile.validate()
}

/// Sample one block from the profile.
///
/// The hidden string is uniform; a class `k` is drawn with its total mass,
/// the `k` correct run positions are a uniform subset, each correct run
/// picks uniformly among its three correct settings pairs, and the single
/// wrong alternative is forced elsewhere. A fair sign flip conjugates all
/// outcomes.
pub fn sample_block(
    profile: &StrategyProfile,
    table: &OutcomeTable,
    rng: &mut CounterRng,
) -> Result<Block> {
    require_chsh(profile, table)?;
    let sampler = ClassSampler::new(profile);
    Ok(sample_block_with(profile.n_runs(), &sampler, table, rng))
}

fn sample_block_with(
    n: usize,
    sampler: &ClassSampler,
    table: &OutcomeTable,
    rng: &mut CounterRng,
) -> Block {
    let mut x = vec![0u8; n];
    for slot in x.iter_mut() {
        *slot = rng.below(4) as u8;
    }
    let k = sampler.draw(rng.next_f64());

    // Floyd's algorithm: uniform k-subset of run positions.
    let mut correct = vec![false; n];
    for j in (n - k)..n {
        let t = rng.below(j as u64 + 1) as usize;
        if correct[t] {
            correct[j] = true;
        } else {
            correct[t] = true;
        }
    }

    let mut y = vec![0u8; n];
    for run in 0..n {
        let wrong = 3 - x[run];
        if correct[run] {
            let mut pick = rng.below(3) as u8;
            // The t-th settings pair other than the wrong one.
            for candidate in 0..4u8 {
                if candidate == wrong {
                    continue;
                }
                if pick == 0 {
                    y[run] = candidate;
                    break;
                }
                pick -= 1;
            }
        } else {
            y[run] = wrong;
        }
    }

    let sign = rng.sign();
    let mut alice = vec![0i8; n];
    let mut bob = vec![0i8; n];
    for run in 0..n {
        let row = &table.rows[x[run] as usize];
        let j = (y[run] >> 1) as usize;
        let kk = (y[run] & 1) as usize;
        alice[run] = sign * row.a[j];
        bob[run] = sign * row.b[kk];
    }
    Block {
        x,
        y,
        alice,
        bob,
        sign,
    }
}

#[derive(Clone)]
struct Partial {
    sum_s: f64,
    sum_s2: f64,
    y_counts: Vec<[u64; 4]>,
    a_sum: Vec<i64>,
    b_sum: Vec<i64>,
}

impl Partial {
    fn new(n: usize) -> Partial {
        Partial {
            sum_s: 0.0,
            sum_s2: 0.0,
            y_counts: vec![[0; 4]; n],
            a_sum: vec![0; n],
            b_sum: vec![0; n],
        }
    }

    fn absorb(&mut self, other: &Partial) {
        self.sum_s += other.sum_s;
        self.sum_s2 += other.sum_s2;
        for (a, b) in self.y_counts.iter_mut().zip(&other.y_counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.a_sum.iter_mut().zip(&other.a_sum) {
            *a += b;
        }
        for (a, b) in self.b_sum.iter_mut().zip(&other.b_sum) {
            *a += b;
        }
    }
}

/// Run `trials` blocks and assemble the verification report.
pub fn estimate(
    profile: &StrategyProfile,
    table: &OutcomeTable,
    game: &GameSpec,
    trials: u64,
    seed: u64,
) -> Result<SimReport> {
    if game.settings() != 2 {
        return Err(Error::UnsupportedGame {
            m: game.settings(),
            why: "the simulator covers the CHSH game",
        });
    }
    require_chsh(profile, table)?;
    if trials < MIN_TRIALS {
        return Err(Error::IndexOutOfRange {
            what: "trial count",
            value: trials as usize,
            limit: MIN_TRIALS as usize,
        });
    }
    let n = profile.n_runs();
    let sampler = ClassSampler::new(profile);
    let analytic_s = profile.score()?;
    let per_block_stride = stride(n);

    let n_chunks = trials.div_ceil(CHUNK);
    let partials: Vec<Partial> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            let mut part = Partial::new(n);
            for block_idx in lo..hi {
                let mut rng = CounterRng::with_counter(seed, block_idx * per_block_stride);
                let block = sample_block_with(n, &sampler, table, &mut rng);
                debug_assert!(rng.counter() - block_idx * per_block_stride <= per_block_stride);
                let mut score = 0.0;
                for run in 0..n {
                    let y = block.y[run];
                    part.y_counts[run][y as usize] += 1;
                    part.a_sum[run] += block.alice[run] as i64;
                    part.b_sum[run] += block.bob[run] as i64;
                    let alpha = if y == 3 { -1.0 } else { 1.0 };
                    score += alpha * block.alice[run] as f64 * block.bob[run] as f64;
                }
                let s = 4.0 * score / n as f64;
                part.sum_s += s;
                part.sum_s2 += s * s;
            }
            part
        })
        .collect();

    let mut total = Partial::new(n);
    for part in &partials {
        total.absorb(part);
    }

    let t = trials as f64;
    let empirical_s = total.sum_s / t;
    let variance = ((total.sum_s2 - t * empirical_s * empirical_s) / (t - 1.0)).max(0.0);
    let std_error = (variance / t).sqrt();
    let marginal_freq: Vec<[f64; 4]> = total
        .y_counts
        .iter()
        .map(|c| [0, 1, 2, 3].map(|y| c[y] as f64 / t))
        .collect();
    let outcome_mean_alice: Vec<f64> = total.a_sum.iter().map(|&s| s as f64 / t).collect();
    let outcome_mean_bob: Vec<f64> = total.b_sum.iter().map(|&s| s as f64 / t).collect();

    // Verification checks at 4 sigma. A tiny absolute allowance covers
    // round-off in the analytic reference when the sampler is exact.
    let mut checks = Vec::new();
    checks.push(SimCheck {
        name: "score within 4 standard errors".to_string(),
        observed: (empirical_s - analytic_s).abs(),
        limit: 4.0 * std_error + 1e-9,
        passed: (empirical_s - analytic_s).abs() <= 4.0 * std_error + 1e-9,
    });
    let marginal_sigma = (0.25 * 0.75 / t).sqrt();
    let worst_marginal = marginal_freq
        .iter()
        .flat_map(|row| row.iter())
        .map(|&f| (f - 0.25).abs())
        .fold(0.0f64, f64::max);
    checks.push(SimCheck {
        name: "settings marginals uniform".to_string(),
        observed: worst_marginal,
        limit: 4.0 * marginal_sigma,
        passed: worst_marginal <= 4.0 * marginal_sigma,
    });
    let outcome_sigma = t.sqrt().recip();
    let worst_outcome = outcome_mean_alice
        .iter()
        .chain(&outcome_mean_bob)
        .map(|&m| m.abs())
        .fold(0.0f64, f64::max);
    checks.push(SimCheck {
        name: "outcome signs balanced".to_string(),
        observed: worst_outcome,
        limit: 4.0 * outcome_sigma,
        passed: worst_outcome <= 4.0 * outcome_sigma,
    });

    let all_checks_passed = checks.iter().all(|c| c.passed);
    Ok(SimReport {
        trials,
        n_runs: n,
        seed,
        empirical_s,
        std_error,
        analytic_s,
        analytic_max_mass: profile.max_member_mass(),
        marginal_freq,
        outcome_mean_alice,
        outcome_mean_bob,
        checks,
        all_checks_passed,
    })
}
