//! Domain types for Bell games under limited measurement dependence.
//!
//! A game is played over `N`-run blocks. The adversary pre-programs a
//! deterministic outcome row for every run (the hidden variable) and skews
//! the distribution of measurement-settings strings conditioned on those
//! rows. By symmetry the conditional distribution only depends on how many
//! runs answer correctly (`k`) and how many runs query an unused settings
//! pair (`l`), so strategies collapse to a small map of class masses.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Maximum settings count accepted by [`derive_outcome_table`].
pub const MAX_DERIVE_SETTINGS: usize = 4;

/// Cell budget for [`StrategyProfile::expand`].
pub const MAX_EXPANSION_CELLS: u128 = 10_000_000;

// ---------------------------------------------------------------------------
// Games
// ---------------------------------------------------------------------------

/// Named games with a symmetry-reduced strategy representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Game {
    #[serde(rename = "chsh")]
    Chsh,
    #[serde(rename = "i3322")]
    I3322,
}

impl Game {
    pub fn name(self) -> &'static str {
        match self {
            Game::Chsh => "chsh",
            Game::I3322 => "i3322",
        }
    }

    pub fn spec(self) -> GameSpec {
        match self {
            Game::Chsh => GameSpec::new(2),
            Game::I3322 => GameSpec::new(3),
        }
    }

    pub fn from_name(name: &str) -> Option<Game> {
        match name {
            "chsh" => Some(Game::Chsh),
            "i3322" => Some(Game::I3322),
            _ => None,
        }
    }
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A two-party, `m`-setting, two-outcome correlation game.
///
/// The score weights correlator `(j, k)` by `alpha[j][k]`, which is `+1` for
/// `j + k < m`, `-1` for `j + k = m` and `0` (pair unused) for `j + k > m`.
/// `m = 2` is the CHSH game, where `alpha[j][k] = (-1)^(j*k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    m: usize,
    alpha: Vec<Vec<i8>>,
    weight: f64,
}

impl GameSpec {
    pub fn new(m: usize) -> GameSpec {
        assert!(m >= 2, "a Bell game needs at least two settings per party");
        let alpha = (0..m)
            .map(|j| {
                (0..m)
                    .map(|k| {
                        if j + k < m {
                            1
                        } else if j + k == m {
                            -1
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect();
        GameSpec {
            m,
            alpha,
            weight: (m * m) as f64,
        }
    }

    pub fn chsh() -> GameSpec {
        GameSpec::new(2)
    }

    pub fn i3322() -> GameSpec {
        GameSpec::new(3)
    }

    /// Settings per party.
    pub fn settings(&self) -> usize {
        self.m
    }

    /// Number of settings pairs, `m^2`.
    pub fn pairs(&self) -> usize {
        self.m * self.m
    }

    /// Score prefactor `m^2`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn alpha(&self, j: usize, k: usize) -> i8 {
        self.alpha[j][k]
    }

    /// Coefficient for a flat settings-pair index `y = m*j + k`.
    pub fn alpha_at(&self, y: usize) -> i8 {
        self.alpha[y / self.m][y % self.m]
    }

    pub fn is_used(&self, y: usize) -> bool {
        self.alpha_at(y) != 0
    }

    pub fn used_pairs(&self) -> usize {
        (0..self.pairs()).filter(|&y| self.is_used(y)).count()
    }

    pub fn unused_pairs(&self) -> usize {
        self.pairs() - self.used_pairs()
    }

    pub fn game_tag(&self) -> Option<Game> {
        match self.m {
            2 => Some(Game::Chsh),
            3 => Some(Game::I3322),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Outcome tables
// ---------------------------------------------------------------------------

/// One deterministic assignment of outcomes to every setting of both parties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeRow {
    /// Alice's outcome per setting `j`, entries in {-1, +1}.
    pub a: Vec<i8>,
    /// Bob's outcome per setting `k`, entries in {-1, +1}.
    pub b: Vec<i8>,
    /// `correct[y]` says whether pair `y = m*j + k` is used and answered
    /// correctly, i.e. `a[j] * b[k] == alpha[j][k] != 0`.
    pub correct: Vec<bool>,
}

impl OutcomeRow {
    fn build(game: &GameSpec, a: Vec<i8>, b: Vec<i8>) -> OutcomeRow {
        let m = game.settings();
        let correct = (0..m * m)
            .map(|y| {
                let alpha = game.alpha_at(y);
                alpha != 0 && a[y / m] as i16 * b[y % m] as i16 == alpha as i16
            })
            .collect();
        OutcomeRow { a, b, correct }
    }

    pub fn is_correct(&self, y: usize) -> bool {
        self.correct[y]
    }

    pub fn correct_pairs(&self) -> usize {
        self.correct.iter().filter(|&&c| c).count()
    }

    /// Bitmask over pair indices with the correct ones set.
    fn correct_mask(&self) -> u32 {
        self.correct
            .iter()
            .enumerate()
            .fold(0, |acc, (y, &c)| if c { acc | (1 << y) } else { acc })
    }
}

/// Per-run option counts shared by every row of an optimal table: how many
/// settings pairs a single run can answer correctly, answer wrongly, or hit
/// an unused pair with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassCounts {
    pub correct: u64,
    pub wrong: u64,
    pub unused: u64,
}

impl ClassCounts {
    /// Derive the counts for a game from its optimal outcome table.
    pub fn derive(game: &GameSpec) -> Result<ClassCounts> {
        derive_outcome_table(game)?.class_counts(game)
    }

    pub fn chsh() -> ClassCounts {
        ClassCounts {
            correct: 3,
            wrong: 1,
            unused: 0,
        }
    }

    pub fn pairs(&self) -> u64 {
        self.correct + self.wrong + self.unused
    }
}

/// The set of outcome rows achieving the maximal per-run number of correctly
/// answered used pairs, conjugate (globally negated) rows suppressed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeTable {
    m: usize,
    pub rows: Vec<OutcomeRow>,
}

impl OutcomeTable {
    pub fn settings(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-run option counts, verifying that every row realizes the same
    /// (correct, wrong, unused) split.
    pub fn class_counts(&self, game: &GameSpec) -> Result<ClassCounts> {
        let used = game.used_pairs();
        let expected = self.rows[0].correct_pairs();
        for (i, row) in self.rows.iter().enumerate() {
            let got = row.correct_pairs();
            if got != expected {
                return Err(Error::InhomogeneousRows {
                    row: i,
                    got,
                    expected,
                });
            }
        }
        Ok(ClassCounts {
            correct: expected as u64,
            wrong: (used - expected) as u64,
            unused: game.unused_pairs() as u64,
        })
    }

    /// For each used pair, the number of rows answering it correctly.
    pub fn coverage_counts(&self, game: &GameSpec) -> Vec<(usize, usize)> {
        (0..game.pairs())
            .filter(|&y| game.is_used(y))
            .map(|y| {
                let c = self.rows.iter().filter(|r| r.is_correct(y)).count();
                (y, c)
            })
            .collect()
    }
}

/// The four CHSH rows, in the canonical order (ascending correct-pair mask).
/// Row `x` answers every settings pair except `y = 3 - x` correctly.
pub fn chsh_outcome_table() -> OutcomeTable {
    let game = GameSpec::chsh();
    let raw: [([i8; 2], [i8; 2]); 4] = [
        ([1, 1], [1, 1]),
        ([1, -1], [1, 1]),
        ([1, 1], [1, -1]),
        ([1, -1], [-1, 1]),
    ];
    let rows = raw
        .iter()
        .map(|(a, b)| OutcomeRow::build(&game, a.to_vec(), b.to_vec()))
        .collect();
    OutcomeTable { m: 2, rows }
}

/// Brute-force the optimal outcome rows for a game: enumerate all sign
/// assignments with `a[0] = +1` (the conjugate of every row is equivalent)
/// and keep those maximizing the number of correctly answered used pairs.
/// Rows are sorted by ascending correct-pair mask, which reproduces the
/// canonical CHSH order for `m = 2`.
pub fn derive_outcome_table(game: &GameSpec) -> Result<OutcomeTable> {
    let m = game.settings();
    if m > MAX_DERIVE_SETTINGS {
        return Err(Error::EnumerationTooLarge {
            m,
            limit: MAX_DERIVE_SETTINGS,
        });
    }
    let free = 2 * m - 1;
    let mut best = 0usize;
    let mut rows: Vec<OutcomeRow> = Vec::new();
    for bits in 0..(1u32 << free) {
        let mut a = vec![1i8; m];
        let mut b = vec![1i8; m];
        for t in 0..free {
            let sign = if bits >> t & 1 == 0 { 1 } else { -1 };
            if t < m - 1 {
                a[t + 1] = sign;
            } else {
                b[t - (m - 1)] = sign;
            }
        }
        let row = OutcomeRow::build(game, a, b);
        let score = row.correct_pairs();
        match score.cmp(&best) {
            std::cmp::Ordering::Greater => {
                best = score;
                rows = vec![row];
            }
            std::cmp::Ordering::Equal => rows.push(row),
            std::cmp::Ordering::Less => {}
        }
    }
    rows.sort_by_key(|r| r.correct_mask());
    Ok(OutcomeTable { m, rows })
}

/// Count, for an `N`-run block, how many runs answer a used pair correctly
/// (`k`) and how many runs query an unused pair (`l`).
pub fn correct_count(
    x: &[usize],
    y: &[usize],
    table: &OutcomeTable,
    game: &GameSpec,
) -> Result<(usize, usize)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let pairs = game.pairs();
    let mut correct = 0;
    let mut unused = 0;
    for (&xn, &yn) in x.iter().zip(y) {
        if xn >= table.len() {
            return Err(Error::IndexOutOfRange {
                what: "hidden-variable row",
                value: xn,
                limit: table.len(),
            });
        }
        if yn >= pairs {
            return Err(Error::IndexOutOfRange {
                what: "settings pair",
                value: yn,
                limit: pairs,
            });
        }
        if !game.is_used(yn) {
            unused += 1;
        } else if table.rows[xn].is_correct(yn) {
            correct += 1;
        }
    }
    Ok((correct, unused))
}

// ---------------------------------------------------------------------------
// Exact combinatorics
// ---------------------------------------------------------------------------

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut res = BigUint::one();
    for i in 0..k {
        res = res * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    res
}

/// Natural log of the binomial coefficient, `-inf` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut acc = 0.0;
    for i in 0..k {
        acc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    acc
}

/// Number of CHSH settings strings giving exactly `k` correct answers for a
/// fixed hidden string: `C(N, k) * 3^k`.
pub fn class_size(n: usize, k: usize) -> Result<BigUint> {
    if k > n {
        return Err(Error::IndexOutOfRange {
            what: "correct-answer count",
            value: k,
            limit: n,
        });
    }
    Ok(binomial(n, k) * BigUint::from(3usize).pow(k as u32))
}

/// Member count of class `(k, l)` for general per-run option counts:
/// `C(N, l) * C(N-l, k) * correct^k * wrong^(N-l-k) * unused^l`.
pub fn class_member_count(counts: &ClassCounts, n: usize, k: usize, l: usize) -> BigUint {
    if l > n || k > n - l {
        return BigUint::zero();
    }
    if counts.unused == 0 && l > 0 {
        return BigUint::zero();
    }
    let mut res = binomial(n, l) * binomial(n - l, k);
    res *= BigUint::from(counts.correct).pow(k as u32);
    res *= BigUint::from(counts.wrong).pow((n - l - k) as u32);
    if l > 0 {
        res *= BigUint::from(counts.unused).pow(l as u32);
    }
    res
}

/// Natural log of [`class_member_count`], `-inf` for empty classes.
pub fn ln_class_member_count(counts: &ClassCounts, n: usize, k: usize, l: usize) -> f64 {
    if l > n || k > n - l {
        return f64::NEG_INFINITY;
    }
    if counts.unused == 0 && l > 0 {
        return f64::NEG_INFINITY;
    }
    if counts.wrong == 0 && n - l - k > 0 {
        return f64::NEG_INFINITY;
    }
    let mut acc = ln_binomial(n, l) + ln_binomial(n - l, k);
    acc += k as f64 * (counts.correct as f64).ln();
    if n - l - k > 0 {
        acc += (n - l - k) as f64 * (counts.wrong as f64).ln();
    }
    if l > 0 {
        acc += l as f64 * (counts.unused as f64).ln();
    }
    acc
}

// ---------------------------------------------------------------------------
// Measurement-dependence measures
// ---------------------------------------------------------------------------

/// Which measure quantifies the adversary's grip on the settings choices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MdKind {
    /// Largest conditional settings probability, reported per run.
    MaxProb,
    /// L1 distance of the conditional settings distribution from uniform,
    /// maximized over hidden variables.
    L1,
}

impl MdKind {
    pub fn name(self) -> &'static str {
        match self {
            MdKind::MaxProb => "max_prob",
            MdKind::L1 => "l1",
        }
    }
}

/// A measure evaluation. For `MaxProb` the value is the per-run equivalent
/// `P`, i.e. the N-th root of the largest class member mass; for `L1` it is
/// the block-level L1 deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdMeasure {
    pub kind: MdKind,
    pub value: f64,
}

impl MdMeasure {
    pub fn max_prob(value: f64) -> Result<MdMeasure> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::OutOfDomain {
                what: "max-prob measure",
                value,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(MdMeasure {
            kind: MdKind::MaxProb,
            value,
        })
    }

    pub fn l1(value: f64) -> Result<MdMeasure> {
        if !(0.0..2.0).contains(&value) {
            return Err(Error::OutOfDomain {
                what: "l1 measure",
                value,
                lo: 0.0,
                hi: 2.0,
            });
        }
        Ok(MdMeasure {
            kind: MdKind::L1,
            value,
        })
    }
}

// ---------------------------------------------------------------------------
// Strategy profiles
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ClassMassJson {
    k: usize,
    l: usize,
    mass: f64,
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    game: Game,
    #[serde(rename = "N")]
    n_runs: usize,
    classes: Vec<ClassMassJson>,
}

/// Symmetry-reduced conditional settings distribution for an `N`-run block.
///
/// `masses[(k, l)]` is the probability of one individual settings string in
/// class `(k, l)`; the class total is the member mass times the class size.
/// For CHSH every class has `l = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile {
    game: Game,
    n_runs: usize,
    counts: ClassCounts,
    masses: BTreeMap<(usize, usize), f64>,
}

impl StrategyProfile {
    /// Build a profile from explicit class member masses.
    pub fn from_class_masses(
        game: Game,
        n_runs: usize,
        masses: BTreeMap<(usize, usize), f64>,
    ) -> Result<StrategyProfile> {
        let counts = match game {
            Game::Chsh => ClassCounts::chsh(),
            Game::I3322 => ClassCounts::derive(&game.spec())?,
        };
        let profile = StrategyProfile {
            game,
            n_runs,
            counts,
            masses,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// CHSH profile from masses indexed by the correct-answer count `k`.
    pub fn chsh(n_runs: usize, masses_by_k: &[f64]) -> Result<StrategyProfile> {
        let map = masses_by_k
            .iter()
            .enumerate()
            .map(|(k, &mass)| ((k, 0), mass))
            .collect();
        StrategyProfile::from_class_masses(Game::Chsh, n_runs, map)
    }

    /// The measurement-independent profile: every settings string gets mass
    /// `(m^2)^(-N)` exactly.
    pub fn uniform(game: Game, n_runs: usize) -> Result<StrategyProfile> {
        let pairs = game.spec().pairs() as f64;
        let mass = pairs.recip().powi(n_runs as i32);
        let counts = match game {
            Game::Chsh => ClassCounts::chsh(),
            Game::I3322 => ClassCounts::derive(&game.spec())?,
        };
        let mut masses = BTreeMap::new();
        for l in 0..=n_runs {
            if counts.unused == 0 && l > 0 {
                continue;
            }
            for k in 0..=(n_runs - l) {
                masses.insert((k, l), mass);
            }
        }
        Ok(StrategyProfile {
            game,
            n_runs,
            counts,
            masses,
        })
    }

    pub fn game(&self) -> Game {
        self.game
    }

    pub fn n_runs(&self) -> usize {
        self.n_runs
    }

    pub fn class_counts(&self) -> ClassCounts {
        self.counts
    }

    /// Member mass of class `(k, l)`, zero when absent.
    pub fn mass(&self, k: usize, l: usize) -> f64 {
        self.masses.get(&(k, l)).copied().unwrap_or(0.0)
    }

    pub fn classes(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.masses.iter().map(|(&(k, l), &m)| (k, l, m))
    }

    /// Largest member mass, the raw block-level max-prob value `P_(N)`.
    pub fn max_member_mass(&self) -> f64 {
        self.masses.values().fold(0.0f64, |a, &b| a.max(b))
    }

    fn ln_member_count(&self, k: usize, l: usize) -> f64 {
        ln_class_member_count(&self.counts, self.n_runs, k, l)
    }

    /// Sum of class-size-weighted member masses; 1 for a normalized profile.
    pub fn normalization_sum(&self) -> f64 {
        self.masses
            .iter()
            .map(|(&(k, l), &mass)| {
                if mass == 0.0 {
                    0.0
                } else {
                    (self.ln_member_count(k, l) + mass.ln()).exp()
                }
            })
            .sum()
    }

    /// Check non-negative masses and normalization to 1e-9.
    pub fn validate(&self) -> Result<()> {
        for (&(k, l), &mass) in &self.masses {
            if mass < 0.0 {
                return Err(Error::NegativeMass { k, l, mass });
            }
        }
        let sum = self.normalization_sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized { sum });
        }
        Ok(())
    }

    /// Expected game score of the profile.
    ///
    /// Each run contributes `+1` when a used pair is answered correctly,
    /// `-1` when answered wrongly and `0` on an unused pair, so a class
    /// `(k, l)` string scores `2k + l - N` out of `N`, weighted by `m^2`.
    /// For CHSH this reduces to `S = (8/N) * sum_k k p_k 3^k C(N,k) - 4`.
    pub fn score(&self) -> Result<f64> {
        self.validate()?;
        let n = self.n_runs as f64;
        let weight = self.game.spec().weight();
        let mut acc = 0.0;
        for (&(k, l), &mass) in &self.masses {
            if mass == 0.0 {
                continue;
            }
            let per_run = (2 * k + l) as f64 - n;
            acc += per_run * (self.ln_member_count(k, l) + mass.ln()).exp();
        }
        Ok(weight * acc / n)
    }

    /// Evaluate a measurement-dependence measure on the profile.
    pub fn md_measure(&self, kind: MdKind) -> Result<MdMeasure> {
        self.validate()?;
        match kind {
            MdKind::MaxProb => {
                let raw = self.max_member_mass();
                MdMeasure::max_prob(raw.powf(1.0 / self.n_runs as f64))
            }
            MdKind::L1 => {
                let pairs = self.game.spec().pairs() as f64;
                let uniform = pairs.recip().powi(self.n_runs as i32);
                let ln_uniform_total = -(self.n_runs as f64) * pairs.ln();
                let mut acc = 0.0;
                // Classes absent from the map hold zero mass and contribute
                // their full uniform reference weight.
                for l in 0..=self.n_runs {
                    if self.counts.unused == 0 && l > 0 {
                        continue;
                    }
                    for k in 0..=(self.n_runs - l) {
                        let dev = (self.mass(k, l) - uniform).abs();
                        if dev == 0.0 {
                            continue;
                        }
                        let ln_count = self.ln_member_count(k, l);
                        if ln_count == f64::NEG_INFINITY {
                            continue;
                        }
                        // count * |mass - uniform|, computed as
                        // count*uniform * |mass/uniform - 1| to keep the
                        // large-count small-mass product stable.
                        acc += (ln_count + ln_uniform_total).exp() * (dev / uniform);
                    }
                }
                MdMeasure::l1(acc.min(2.0 - f64::EPSILON))
            }
        }
    }

    /// Expand to the explicit conditional distribution `p(y | x)`.
    pub fn expand(&self, table: &OutcomeTable) -> Result<ExpandedDistribution> {
        let game = self.game.spec();
        let rows = (table.len() as u128)
            .checked_pow(self.n_runs as u32)
            .unwrap_or(u128::MAX);
        let cols = (game.pairs() as u128)
            .checked_pow(self.n_runs as u32)
            .unwrap_or(u128::MAX);
        let cells = rows.saturating_mul(cols);
        if cells > MAX_EXPANSION_CELLS {
            return Err(Error::ExpansionTooLarge {
                cells,
                limit: MAX_EXPANSION_CELLS,
            });
        }
        self.validate()?;
        let rows = rows as usize;
        let cols = cols as usize;
        let mut probs = vec![0.0; rows * cols];
        let mut x = vec![0usize; self.n_runs];
        let mut y = vec![0usize; self.n_runs];
        for (xi, row) in probs.chunks_mut(cols).enumerate() {
            decode_string(xi, table.len(), &mut x);
            for (yi, cell) in row.iter_mut().enumerate() {
                decode_string(yi, game.pairs(), &mut y);
                let (k, l) = correct_count(&x, &y, table, &game)?;
                *cell = self.mass(k, l);
            }
        }
        Ok(ExpandedDistribution {
            n_rows: rows,
            n_cols: cols,
            probs,
        })
    }

    pub fn to_json(&self) -> String {
        let classes = self
            .masses
            .iter()
            .map(|(&(k, l), &mass)| ClassMassJson { k, l, mass })
            .collect();
        serde_json::to_string_pretty(&ProfileJson {
            game: self.game,
            n_runs: self.n_runs,
            classes,
        })
        .expect("profile serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<StrategyProfile> {
        let raw: ProfileJson = serde_json::from_str(text).map_err(|_| Error::Unnormalized {
            sum: f64::NAN,
        })?;
        let masses = raw
            .classes
            .into_iter()
            .map(|c| ((c.k, c.l), c.mass))
            .collect();
        StrategyProfile::from_class_masses(raw.game, raw.n_runs, masses)
    }
}

/// Decode a flat string index into per-run digits, most significant first.
fn decode_string(mut index: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
}

/// Explicit conditional distribution over settings strings given hidden
/// strings, row-major.
#[derive(Clone, Debug)]
pub struct ExpandedDistribution {
    n_rows: usize,
    n_cols: usize,
    probs: Vec<f64>,
}

impl ExpandedDistribution {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.probs[x * self.n_cols + y]
    }

    pub fn row_sum(&self, x: usize) -> f64 {
        self.probs[x * self.n_cols..(x + 1) * self.n_cols]
            .iter()
            .sum()
    }

    /// Settings-string marginal under hidden-string weights `w`.
    pub fn marginal(&self, y: usize, weights: &[f64]) -> f64 {
        (0..self.n_rows)
            .map(|x| weights[x] * self.prob(x, y))
            .sum()
    }

    /// Marginal under uniform hidden-string weights.
    pub fn uniform_marginal(&self, y: usize) -> f64 {
        (0..self.n_rows).map(|x| self.prob(x, y)).sum::<f64>() / self.n_rows as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Restate the CHSH win condition from scratch: outcomes must agree
    /// unless both parties use their second setting.
    fn chsh_win(a: &[i8], b: &[i8], j: usize, k: usize) -> bool {
        if j == 1 && k == 1 {
            a[j] != b[k]
        } else {
            a[j] == b[k]
        }
    }

    #[test]
    fn chsh_spec_uses_all_pairs() {
        let game = GameSpec::chsh();
        assert_eq!(game.used_pairs(), 4);
        assert_eq!(game.unused_pairs(), 0);
        assert_eq!(game.weight(), 4.0);
        for j in 0..2 {
            for k in 0..2 {
                let expected = if j == 1 && k == 1 { -1 } else { 1 };
                assert_eq!(game.alpha(j, k), expected);
            }
        }
    }

    #[test]
    fn chsh_table_matches_reference_rows() {
        let table = chsh_outcome_table();
        assert_eq!(table.len(), 4);
        assert_eq!((&table.rows[0].a[..], &table.rows[0].b[..]), (&[1, 1][..], &[1, 1][..]));
        assert_eq!(
            (&table.rows[3].a[..], &table.rows[3].b[..]),
            (&[1, -1][..], &[-1, 1][..])
        );
        // Independent recheck of every correctness mask from the win rule.
        for row in &table.rows {
            let mut correct = 0;
            for j in 0..2 {
                for k in 0..2 {
                    let win = chsh_win(&row.a, &row.b, j, k);
                    assert_eq!(win, row.is_correct(2 * j + k));
                    correct += win as usize;
                }
            }
            assert_eq!(correct, 3);
        }
        // Row x answers exactly the pair 3 - x wrongly.
        for (x, row) in table.rows.iter().enumerate() {
            assert!(!row.is_correct(3 - x));
        }
    }

    #[test]
    fn derived_chsh_table_equals_reference() {
        let table = derive_outcome_table(&GameSpec::chsh()).unwrap();
        assert_eq!(table, chsh_outcome_table());
    }

    #[test]
    fn derived_i3322_rows_answer_six_of_eight() {
        let game = GameSpec::i3322();
        let table = derive_outcome_table(&game).unwrap();
        assert_eq!(game.used_pairs(), 8);
        assert_eq!(game.unused_pairs(), 1);
        for row in &table.rows {
            assert_eq!(row.correct_pairs(), 6);
        }
        let counts = table.class_counts(&game).unwrap();
        assert_eq!(
            counts,
            ClassCounts {
                correct: 6,
                wrong: 2,
                unused: 1
            }
        );
    }

    #[test]
    fn derive_refuses_large_games() {
        assert!(matches!(
            derive_outcome_table(&GameSpec::new(5)),
            Err(Error::EnumerationTooLarge { m: 5, .. })
        ));
    }

    #[test]
    fn correct_count_examples() {
        let game = GameSpec::chsh();
        let table = chsh_outcome_table();
        assert_eq!(correct_count(&[0], &[3], &table, &game).unwrap(), (0, 0));
        assert_eq!(correct_count(&[0, 0], &[0, 1], &table, &game).unwrap(), (2, 0));

        let game3 = GameSpec::i3322();
        let table3 = derive_outcome_table(&game3).unwrap();
        for x in 0..table3.len() {
            // Pair (2, 2) has flat index 8 and is the unused one.
            assert_eq!(correct_count(&[x], &[8], &table3, &game3).unwrap(), (0, 1));
        }

        assert!(matches!(
            correct_count(&[0, 1], &[0], &table, &game),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            correct_count(&[9], &[0], &table, &game),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn class_size_examples() {
        assert_eq!(class_size(1, 1).unwrap(), BigUint::from(3u32));
        assert_eq!(class_size(2, 2).unwrap(), BigUint::from(9u32));
        assert_eq!(class_size(4, 2).unwrap(), BigUint::from(54u32));
        assert!(class_size(2, 3).is_err());
    }

    #[test]
    fn class_size_counts_enumerated_strings() {
        // Independent oracle: enumerate all settings strings for a fixed
        // hidden string and bucket them by correct-answer count.
        let game = GameSpec::chsh();
        let table = chsh_outcome_table();
        let n = 4;
        let x = vec![0usize; n];
        let mut buckets = vec![0u64; n + 1];
        let mut y = vec![0usize; n];
        for yi in 0..4usize.pow(n as u32) {
            decode_string(yi, 4, &mut y);
            let (k, _) = correct_count(&x, &y, &table, &game).unwrap();
            buckets[k] += 1;
        }
        for (k, &count) in buckets.iter().enumerate() {
            assert_eq!(BigUint::from(count), class_size(n, k).unwrap());
        }
        assert_eq!(buckets[2], 54);
    }

    #[test]
    fn class_sizes_sum_to_4_pow_n() {
        for n in 1..=20 {
            let total: BigUint = (0..=n).map(|k| class_size(n, k).unwrap()).sum();
            assert_eq!(total, BigUint::from(4u32).pow(n as u32));
        }
    }

    #[test]
    fn score_examples() {
        let p = StrategyProfile::chsh(1, &[0.0, 1.0 / 3.0]).unwrap();
        assert!((p.score().unwrap() - 4.0).abs() < 1e-12);

        let uniform = StrategyProfile::uniform(Game::Chsh, 1).unwrap();
        assert!((uniform.score().unwrap() - 2.0).abs() < 1e-12);

        let p2 = StrategyProfile::chsh(2, &[0.0, 1.0 / 15.0, 1.0 / 15.0]).unwrap();
        assert!((p2.score().unwrap() - 2.4).abs() < 1e-12);
    }

    #[test]
    fn score_rejects_unnormalized() {
        let masses: BTreeMap<_, _> = [((0usize, 0usize), 0.5f64)].into_iter().collect();
        assert!(matches!(
            StrategyProfile::from_class_masses(Game::Chsh, 1, masses),
            Err(Error::Unnormalized { .. })
        ));
    }

    #[test]
    fn md_examples() {
        let p = StrategyProfile::chsh(1, &[0.0, 1.0 / 3.0]).unwrap();
        let md = p.md_measure(MdKind::MaxProb).unwrap();
        assert!((md.value - 1.0 / 3.0).abs() < 1e-15);
        let m1 = p.md_measure(MdKind::L1).unwrap();
        assert!((m1.value - 0.5).abs() < 1e-12);

        let uniform = StrategyProfile::uniform(Game::Chsh, 1).unwrap();
        assert_eq!(uniform.md_measure(MdKind::L1).unwrap().value, 0.0);
    }

    #[test]
    fn uniform_max_prob_is_exact() {
        for n in 1..=8 {
            let uniform = StrategyProfile::uniform(Game::Chsh, n).unwrap();
            assert_eq!(uniform.max_member_mass(), 0.25f64.powi(n as i32));
        }
    }

    #[test]
    fn expansion_reproduces_one_shot_attack() {
        let table = chsh_outcome_table();
        let p = StrategyProfile::chsh(1, &[0.0, 1.0 / 3.0]).unwrap();
        let ex = p.expand(&table).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                let expected = if x + y == 3 { 0.0 } else { 1.0 / 3.0 };
                assert!((ex.prob(x, y) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn expansion_rows_normalize_and_marginals_are_uniform() {
        let table = chsh_outcome_table();
        let p = 15.0f64.powf(-0.5);
        let profile = StrategyProfile::chsh(2, &[0.0, p * p, p * p]).unwrap();
        let ex = profile.expand(&table).unwrap();
        for x in 0..ex.n_rows() {
            assert!((ex.row_sum(x) - 1.0).abs() < 1e-12);
        }
        for y in 0..ex.n_cols() {
            // Column sums equal 1, i.e. uniform marginal 4^-N times 4^N rows.
            let col: f64 = (0..ex.n_rows()).map(|x| ex.prob(x, y)).sum();
            assert!((col - 1.0).abs() < 1e-12, "column {y} sums to {col}");
        }
    }

    #[test]
    fn expansion_respects_size_limit() {
        let table = chsh_outcome_table();
        let uniform = StrategyProfile::uniform(Game::Chsh, 20).unwrap();
        assert!(matches!(
            uniform.expand(&table),
            Err(Error::ExpansionTooLarge { .. })
        ));
    }

    #[test]
    fn profile_json_round_trip() {
        let p = StrategyProfile::chsh(2, &[0.0, 1.0 / 15.0, 1.0 / 15.0]).unwrap();
        let text = p.to_json();
        let back = StrategyProfile::from_json(&text).unwrap();
        assert_eq!(p, back);
        assert!(text.contains("\"game\": \"chsh\""));
    }

    /// Score computed from the expanded distribution by direct evaluation of
    /// the correlator sum, independent of the class bookkeeping.
    fn expanded_score(profile: &StrategyProfile, table: &OutcomeTable, game: &GameSpec) -> f64 {
        let ex = profile.expand(table).unwrap();
        let n = profile.n_runs();
        let mut x = vec![0usize; n];
        let mut y = vec![0usize; n];
        let mut acc = 0.0;
        for xi in 0..ex.n_rows() {
            decode_string(xi, table.len(), &mut x);
            for yi in 0..ex.n_cols() {
                decode_string(yi, game.pairs(), &mut y);
                let mut block = 0.0;
                for run in 0..n {
                    let row = &table.rows[x[run]];
                    let j = y[run] / game.settings();
                    let k = y[run] % game.settings();
                    block += game.alpha(j, k) as f64 * row.a[j] as f64 * row.b[k] as f64;
                }
                acc += ex.prob(xi, yi) * block / n as f64;
            }
        }
        game.weight() * acc / ex.n_rows() as f64
    }

    #[test]
    fn class_score_matches_expanded_score_chsh() {
        let game = GameSpec::chsh();
        let table = chsh_outcome_table();
        let profiles = [
            StrategyProfile::uniform(Game::Chsh, 3).unwrap(),
            StrategyProfile::chsh(2, &[0.0, 1.0 / 15.0, 1.0 / 15.0]).unwrap(),
            StrategyProfile::chsh(3, &[0.01, 0.02, 0.02, (1.0 - 0.01 - 9.0 * 0.02 - 27.0 * 0.02) / 27.0])
                .unwrap(),
        ];
        for profile in &profiles {
            let direct = expanded_score(profile, &table, &game);
            assert!(
                (profile.score().unwrap() - direct).abs() < 1e-12,
                "profile {profile:?}"
            );
        }
    }

    #[test]
    fn class_score_matches_expanded_score_i3322() {
        let game = GameSpec::i3322();
        let table = derive_outcome_table(&game).unwrap();
        let uniform = StrategyProfile::uniform(Game::I3322, 1).unwrap();
        let direct = expanded_score(&uniform, &table, &game);
        assert!((uniform.score().unwrap() - direct).abs() < 1e-12);
        assert!((direct - 4.0).abs() < 1e-12);
    }

    mod proptests {
        use super::*;
        use num_traits::ToPrimitive;
        use proptest::prelude::*;

        fn random_chsh_profile(n: usize) -> impl Strategy<Value = StrategyProfile> {
            proptest::collection::vec(1e-3f64..1.0, n + 1).prop_map(move |raw| {
                // Normalize raw weights into class masses.
                let total: f64 = raw
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * class_size(n, k).unwrap().to_f64().unwrap())
                    .sum();
                let masses: Vec<f64> = raw.iter().map(|w| w / total).collect();
                StrategyProfile::chsh(n, &masses).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn expanded_score_agrees(profile in (1usize..=3).prop_flat_map(random_chsh_profile)) {
                let game = GameSpec::chsh();
                let table = chsh_outcome_table();
                let direct = expanded_score(&profile, &table, &game);
                prop_assert!((profile.score().unwrap() - direct).abs() < 1e-12);
            }

            #[test]
            fn expanded_marginals_uniform(profile in (1usize..=3).prop_flat_map(random_chsh_profile)) {
                let table = chsh_outcome_table();
                let ex = profile.expand(&table).unwrap();
                let expected = 0.25f64.powi(profile.n_runs() as i32);
                for y in 0..ex.n_cols() {
                    prop_assert!((ex.uniform_marginal(y) - expected).abs() < 1e-12);
                }
            }
        }
    }
}
