//! Survival analysis for the nested random-walk program that is not
//! almost-surely terminating.
//!
//! With `x = 1` at the outer head, an outer iteration runs the inner walk
//! `x := x + r` for `y + 1` steps (frozen once `x` reaches 2), then
//! `x := x - 1` and `y := 4y`. The run survives the iteration exactly when the
//! walk reached 2, which resets `x` to 1. The closed form counts `ŷ = y`
//! steps, so it underestimates survival slightly and stays a floor.

use num_traits::ToPrimitive;
use rand::Rng;
use rayon::prelude::*;

use super::bounds::{barrier_absorption_f64, nontermination_lower_bound};
use super::{run_rng, wilson_interval};
use crate::error::{Error, Result};
use crate::Rat;

#[derive(Clone, Debug, PartialEq)]
pub struct CeReport {
    pub y0: i64,
    pub k: u32,
    pub runs: u64,
    pub bound: Rat,
    /// Closed-form absorption probability for `ŷ = y0·4^i`, `i < k`.
    pub absorption: Vec<f64>,
    pub survived: u64,
    pub frequency: f64,
    /// Binomial standard deviation of `frequency`.
    pub sigma: f64,
    pub wilson: (f64, f64),
    /// Whether `frequency ≥ bound − 3σ`.
    pub agrees: bool,
}

/// Whether a fair ±1 walk from 1 reaches 2 within `steps` steps.
pub fn walk_hits_two(steps: u64, rng: &mut impl Rng) -> bool {
    let mut x: i64 = 1;
    let mut left = steps;
    while left > 0 {
        let gap = 2 - x;
        if gap > 64 && left >= 64 {
            // Sixty-four steps cannot close a gap wider than 64.
            let bits: u64 = rng.random();
            x += 2 * i64::from(bits.count_ones()) - 64;
            left -= 64;
        } else {
            x += if rng.random::<bool>() { 1 } else { -1 };
            left -= 1;
            if x == 2 {
                return true;
            }
        }
    }
    false
}

/// Number of outer iterations survived, up to `k`, by one run.
pub fn surviving_iterations(y0: i64, k: u32, rng: &mut impl Rng) -> u32 {
    let mut y = y0 as u64;
    for i in 0..k {
        if !walk_hits_two(y + 1, rng) {
            return i;
        }
        y *= 4;
    }
    k
}

pub fn analyze_ce(y0: i64, k: u32, runs: u64, seed: u64) -> Result<CeReport> {
    let bound = nontermination_lower_bound(y0, k)?;
    if k > 0 && (y0 as u64).checked_mul(4u64.checked_pow(k - 1).unwrap_or(u64::MAX)).is_none_or(|y| y >= 1 << 62) {
        return Err(Error::Domain(format!("y0 * 4^{} overflows the walk length", k - 1)));
    }
    let absorption = (0..k).map(|i| barrier_absorption_f64(y0 as f64 * 4f64.powi(i as i32))).collect();
    let survived = (0..runs)
        .into_par_iter()
        .filter(|&r| surviving_iterations(y0, k, &mut run_rng(seed, r)) == k)
        .count() as u64;
    let frequency = if runs == 0 { 1.0 } else { survived as f64 / runs as f64 };
    let sigma = if runs == 0 { 0.0 } else { (frequency * (1.0 - frequency) / runs as f64).sqrt() };
    let agrees = frequency >= bound.to_f64().unwrap_or(1.0) - 3.0 * sigma;
    Ok(CeReport { y0, k, runs, bound, absorption, survived, frequency, sigma, wilson: wilson_interval(survived, runs, 1.96), agrees })
}
