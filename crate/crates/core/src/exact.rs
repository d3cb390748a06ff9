//! Rational helpers for the exact verification paths.
//!
//! Every finite `f64` is a dyadic rational, but weights read from JSON such as
//! `0.1111111111111111` are meant to be `1/9`. [`recover`] finds the simple
//! rational behind such a float so exact comparisons do not trip on rounding.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Largest denominator [`recover`] will consider.
pub const MAX_DENOMINATOR: u64 = 1 << 40;

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Exact dyadic value of a finite float.
pub fn from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Smallest-denominator rational (via continued fractions) that rounds to
/// `x` within a few ulps, provided its denominator is at most `max_den`.
pub fn recover(x: f64, max_den: u64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(BigRational::zero());
    }
    let tol = 4.0 * f64::EPSILON * x.abs();
    let target = from_f64(x.abs());
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rest = target.clone();
    for _ in 0..64 {
        let a = rest.floor().to_integer();
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if k2 > BigInt::from(max_den) {
            return None;
        }
        let approx = BigRational::new(h2.clone(), k2.clone());
        if (to_f64(&approx) - x.abs()).abs() <= tol {
            return Some(if x < 0.0 { -approx } else { approx });
        }
        let frac = &rest - BigRational::from_integer(a);
        if frac.is_zero() {
            return None;
        }
        rest = frac.recip();
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
    }
    None
}

/// Recovers every entry; succeeds only when all entries are simple rationals
/// that are nonnegative and sum to exactly one.
pub fn recover_distribution(weights: &[f64]) -> Option<Vec<BigRational>> {
    let exact: Option<Vec<_>> = weights.iter().map(|&w| recover(w, MAX_DENOMINATOR)).collect();
    let exact = exact?;
    if exact.iter().any(|w| w.is_negative()) {
        return None;
    }
    let total: BigRational = exact.iter().sum();
    total.is_one().then_some(exact)
}

/// Sum with a fixed pairwise reduction tree, independent of how the input
/// was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_simple_fractions() {
        assert_eq!(recover(1.0 / 9.0, MAX_DENOMINATOR), Some(ratio(1, 9)));
        assert_eq!(recover(4.0 / 3.0, MAX_DENOMINATOR), Some(ratio(4, 3)));
        assert_eq!(recover(-0.75, MAX_DENOMINATOR), Some(ratio(-3, 4)));
        assert_eq!(recover(0.0, MAX_DENOMINATOR), Some(int(0)));
        assert_eq!(recover(1.0 / 3125.0, MAX_DENOMINATOR), Some(ratio(1, 3125)));
    }

    #[test]
    fn rejects_irrational_looking_floats() {
        assert_eq!(recover(std::f64::consts::PI, 1000), None);
        assert_eq!(recover(f64::NAN, 1000), None);
    }

    #[test]
    fn distribution_must_sum_to_one() {
        assert!(recover_distribution(&[0.25, 0.75]).is_some());
        assert!(recover_distribution(&[1.0 / 3.0; 3]).is_some());
        assert!(recover_distribution(&[0.5, 0.4]).is_none());
        assert!(recover_distribution(&[1.5, -0.5]).is_none());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }
}
