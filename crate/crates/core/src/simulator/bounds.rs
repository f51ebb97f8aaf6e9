//! Exact and outward-rounded numeric bounds.
//!
//! Transcendental quantities are bracketed by dyadic rationals with 128
//! fractional bits; every rounding step goes in the direction that keeps the
//! reported value a valid bound.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::Rat;

const BITS: u32 = 128;
/// Above this exponent the Hoeffding bound is reported as `2^-1024`.
const MAX_EXPONENT: i64 = 1024;

fn two_pow(k: u32) -> BigInt {
    BigInt::one() << k
}

fn floor_dyadic(x: &Rat) -> Rat {
    let scale = two_pow(BITS);
    Rat::new((x * Rat::from_integer(scale.clone())).floor().to_integer(), scale)
}

fn ceil_dyadic(x: &Rat) -> Rat {
    let scale = two_pow(BITS);
    Rat::new((x * Rat::from_integer(scale.clone())).ceil().to_integer(), scale)
}

fn int(n: i64) -> Rat {
    Rat::from_integer(n.into())
}

/// Lower bound on `exp(t)` for `t ≥ 0`.
fn exp_lower(t: &Rat) -> Rat {
    debug_assert!(!t.is_negative());
    // Halve until the Taylor series converges fast, then square back up.
    let half = Rat::new(1.into(), 2.into());
    let mut u = t.clone();
    let mut squarings = 0;
    while u > half {
        u /= int(2);
        squarings += 1;
    }
    let mut sum = Rat::one();
    let mut term = Rat::one();
    for k in 1..=48 {
        term = floor_dyadic(&(&term * &u / int(k)));
        sum += &term;
    }
    let mut v = floor_dyadic(&sum);
    for _ in 0..squarings {
        v = floor_dyadic(&(&v * &v));
    }
    v
}

/// Dyadic upper bound on Euler's number.
pub fn e_upper() -> Rat {
    // Σ_{k≤K} 1/k! plus the tail, which is below 2/(K+1)!.
    let k_max = 40;
    let mut sum = Rat::zero();
    let mut fact = BigInt::one();
    for k in 0..=k_max {
        if k > 0 {
            fact *= k;
        }
        sum += Rat::new(BigInt::one(), fact.clone());
    }
    fact *= k_max + 1;
    ceil_dyadic(&(sum + Rat::new(2.into(), fact)))
}

/// Partial sum of the arctan series for `1/q` with `terms` terms.
fn atan_inv_partial(q: i64, terms: u32) -> Rat {
    let x = Rat::new(1.into(), q.into());
    let x2 = &x * &x;
    let mut pow = x;
    let mut sum = Rat::zero();
    for k in 0..terms {
        let t = &pow / int(2 * k as i64 + 1);
        if k % 2 == 0 {
            sum += t;
        } else {
            sum -= t;
        }
        pow *= &x2;
    }
    sum
}

/// Dyadic lower bound on π from Machin's formula.
pub fn pi_lower() -> Rat {
    // Partial sums of an alternating series with decreasing terms bracket
    // the limit: an even number of terms gives a lower bound, odd an upper.
    let lo5 = atan_inv_partial(5, 60);
    let hi239 = atan_inv_partial(239, 21);
    floor_dyadic(&(int(16) * lo5 - int(4) * hi239))
}

fn sqrt_lower(n: i64) -> Rat {
    let scaled = BigInt::from(n) << (2 * BITS);
    Rat::new(scaled.sqrt(), two_pow(BITS))
}

/// Probability that a fair ±1 walk started at 1 hits 2 within `y_hat` steps.
///
/// Equals `1 − C(ŷ, ŷ/2) / 2^ŷ` for even `ŷ ≥ 2`.
pub fn barrier_absorption_prob(y_hat: u64) -> Result<Rat> {
    if y_hat < 2 || y_hat % 2 == 1 {
        return Err(Error::Domain(format!("barrier horizon must be even and at least 2, got {y_hat}")));
    }
    let n = y_hat as u32;
    let mut binom = BigInt::one();
    for i in 0..(n / 2) {
        binom = binom * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    Ok(Rat::one() - Rat::new(binom, two_pow(n)))
}

/// Floating-point `1 − C(ŷ, ŷ/2)/2^ŷ` for any even `ŷ`, via a Stirling series
/// for large horizons.
pub fn barrier_absorption_f64(y_hat: f64) -> f64 {
    if y_hat <= 64.0 {
        let n = y_hat as u32;
        let mut p = 1.0f64;
        for i in 0..(n / 2) {
            p *= f64::from(n - i) / f64::from(i + 1) / 4.0;
        }
        return 1.0 - p;
    }
    // C(2m, m)/4^m = exp(-ln(π m)/2 - 1/(8m) + 1/(192 m^3) - ...)
    let m = y_hat / 2.0;
    1.0 - (-(std::f64::consts::PI * m).ln() / 2.0 - 1.0 / (8.0 * m) + 1.0 / (192.0 * m * m * m)).exp()
}

/// The constant `d = e / (π √y0)`, rounded up.
pub fn escape_constant(y0: i64) -> Result<Rat> {
    if y0 <= 0 || y0 % 2 == 1 {
        return Err(Error::Domain(format!("y0 must be even and positive, got {y0}")));
    }
    Ok(ceil_dyadic(&(e_upper() / (pi_lower() * sqrt_lower(y0)))))
}

/// Lower bound `Π_{i<k} (1 − d/2^i)` on the probability that the
/// counterexample program is still running after `k` outer iterations.
pub fn nontermination_lower_bound(y0: i64, k: u32) -> Result<Rat> {
    let d = escape_constant(y0)?;
    if d >= Rat::one() {
        return Err(Error::Domain(format!("d = {d} is not below 1 for y0 = {y0}")));
    }
    let mut prod = Rat::one();
    for i in 0..k {
        prod *= Rat::one() - &d / Rat::from_integer(two_pow(i));
    }
    Ok(prod)
}

/// Upper bound on `exp(−2(λ + nε)² / (n (b − a)²))`, the Hoeffding tail for a
/// supermartingale with increments in `[a, b]` and drift at most `−ε`.
pub fn hoeffding_bound(n: u64, lambda: &Rat, a: &Rat, b: &Rat, epsilon: &Rat) -> Rat {
    assert!(b > a, "hoeffding_bound needs a < b");
    let shift = lambda + epsilon * Rat::from_integer(n.into());
    if !shift.is_positive() {
        return Rat::one();
    }
    if n == 0 {
        // X_0 − X_0 = 0 never reaches a positive λ.
        return Rat::zero();
    }
    let width = b - a;
    let t = int(2) * &shift * &shift / (Rat::from_integer(n.into()) * &width * &width);
    if t > int(MAX_EXPONENT) {
        return Rat::new(1.into(), two_pow(MAX_EXPONENT as u32));
    }
    ceil_dyadic(&(Rat::one() / exp_lower(&t))).min(Rat::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn constants_bracket_float_values() {
        let e = e_upper().to_f64().unwrap();
        let pi = pi_lower().to_f64().unwrap();
        assert!((e - std::f64::consts::E).abs() < 1e-15);
        assert!((pi - std::f64::consts::PI).abs() < 1e-15);
        assert!(e_upper() > Rat::new(271828182845904523u64.into(), 100000000000000000u64.into()));
        assert!(pi_lower() < Rat::new(314159265358979324u64.into(), 100000000000000000u64.into()));
        assert!(pi_lower() > Rat::new(314159265358979323u64.into(), 100000000000000000u64.into()));
    }

    #[test]
    fn exp_lower_is_tight() {
        for t in [0.0f64, 0.25, 1.0, 3.5, 40.0] {
            let r = Rat::from_float(t).unwrap();
            let v = exp_lower(&r).to_f64().unwrap();
            assert!(v <= t.exp() * (1.0 + 1e-12) && v >= t.exp() * (1.0 - 1e-12), "{t}");
        }
    }

    #[test]
    fn sqrt_is_lower() {
        let s = sqrt_lower(2);
        assert!(&s * &s <= int(2));
        let eps = Rat::new(1.into(), two_pow(BITS));
        assert!((&s + &eps) * (&s + &eps) > int(2));
    }
}
