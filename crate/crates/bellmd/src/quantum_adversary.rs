//! Quantum ceiling for CHSH under measurement dependence.
//!
//! A correlated classical attack skews the per-run settings marginals to a
//! common weight `R` on the first three pairs and `1 - 3R` on the last. An
//! adversary with quantum devices facing the same marginals can reach
//! `4 (1 - 2R)^(3/2) / sqrt(1 - 3R)` while `R < 3/10`; past that point the
//! deterministic strategy is already optimal. Eliminating `R` through the
//! classical score `S_C = 4 (6R - 1)` gives the curve pairing used by the
//! CLI.

use crate::bell_model::{Game, StrategyProfile};
use crate::{Error, Result};

/// Common marginal weight of the three equally-likely settings pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasR(f64);

impl BiasR {
    pub fn new(r: f64) -> Result<BiasR> {
        if !r.is_finite() || !(0.25 - 1e-12..=1.0 / 3.0 + 1e-12).contains(&r) {
            return Err(Error::OutOfDomain {
                what: "marginal bias R",
                value: r,
                lo: 0.25,
                hi: 1.0 / 3.0,
            });
        }
        Ok(BiasR(r.clamp(0.25, 1.0 / 3.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Weight of the remaining settings pair, `1 - 3R`.
    pub fn last_pair(self) -> f64 {
        1.0 - 3.0 * self.0
    }
}

/// Marginal bias induced by a CHSH profile:
/// `R = sum_k 3^(k-1) (k/N) C(N,k) p_k`, equivalently `(S_C + 4) / 24`.
pub fn bias_from_profile(profile: &StrategyProfile) -> Result<BiasR> {
    if profile.game() != Game::Chsh {
        return Err(Error::UnsupportedGame {
            m: profile.game().spec().settings(),
            why: "marginal bias reduction applies to the CHSH game",
        });
    }
    let s = profile.score()?;
    BiasR::new((s + 4.0) / 24.0)
}

/// Largest expected score a quantum strategy reaches at bias `R`.
pub fn quantum_max(r: BiasR) -> f64 {
    let r = r.value();
    if r < 0.3 {
        4.0 * (1.0 - 2.0 * r).powf(1.5) / (1.0 - 3.0 * r).sqrt()
    } else {
        4.0 * (6.0 * r - 1.0)
    }
}

/// Quantum ceiling as a function of the classical optimum `S_C`:
/// `S_Q = 2 (8 - S_C)^(3/2) / (3 sqrt(6 (4 - S_C)))` below `16/5`, identity
/// above (the two strategies coincide there; this branch also avoids the
/// vanishing denominator near `S_C = 4`).
pub fn sq_from_sc(s_c: f64) -> Result<f64> {
    if !s_c.is_finite() || !(2.0 - 1e-12..=4.0 + 1e-12).contains(&s_c) {
        return Err(Error::OutOfDomain {
            what: "classical score S_C",
            value: s_c,
            lo: 2.0,
            hi: 4.0,
        });
    }
    let s_c = s_c.clamp(2.0, 4.0);
    if s_c >= 16.0 / 5.0 {
        Ok(s_c)
    } else {
        Ok(2.0 * (8.0 - s_c).powf(1.5) / (3.0 * (6.0 * (4.0 - s_c)).sqrt()))
    }
}
