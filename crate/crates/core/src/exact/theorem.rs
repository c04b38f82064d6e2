use num_bigint::BigInt;
use num_traits::{One, Pow, Signed};

use super::rational::{integer, Rational};
use super::restricted::restricted_q;
use crate::error::{Error, Result};

fn check_r(r: &Rational) -> Result<()> {
    if r.is_positive() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("r must be positive, got {r}")))
    }
}

/// Fixation probability of a single mutant in a well-mixed population of
/// `n`: `(1 - 1/r) / (1 - 1/r^n)`, and `1/n` at `r = 1`.
pub fn classic_moran(n: u32, r: &Rational) -> Result<Rational> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("population must be at least 2, got {n}")));
    }
    check_r(r)?;
    if r.is_one() {
        return Ok(Rational::new(BigInt::one(), BigInt::from(n)));
    }
    let inv = r.recip();
    let one = Rational::one();
    Ok((&one - &inv) / (&one - Pow::pow(&inv, n)))
}

pub fn classic_moran_f64(n: u32, r: f64) -> f64 {
    if r == 1.0 {
        1.0 / n as f64
    } else {
        (1.0 - 1.0 / r) / (1.0 - r.powi(-(n as i32)))
    }
}

/// `h(r) = 2r^5 / (1 + r + 2r^5)`, the large-superstar limit of `q`.
pub fn limit_h(r: &Rational) -> Result<Rational> {
    check_r(r)?;
    let two_r5 = Pow::pow(r, 5u32) * integer(2);
    Ok(&two_r5 / (Rational::one() + r + &two_r5))
}

/// `j(r) = (2r^5 + r + 1) / (r + 1)`.
pub fn j_of_r(r: &Rational) -> Result<Rational> {
    check_r(r)?;
    let one = Rational::one();
    Ok((Pow::pow(r, 5u32) * integer(2) + r + &one) / (r + &one))
}

pub fn limit_h_f64(r: f64) -> f64 {
    let two_r5 = 2.0 * r.powi(5);
    two_r5 / (1.0 + r + two_r5)
}

pub fn j_of_r_f64(r: f64) -> f64 {
    (2.0 * r.powi(5) + r + 1.0) / (r + 1.0)
}

/// Probability that the initial mutant misses every reservoir vertex:
/// `(1 + 3l) / (1 + l(m + 3))` on a `k = 5` superstar.
pub fn p_fail(leaves: u64, reservoir: u64) -> Result<Rational> {
    if leaves == 0 || reservoir == 0 {
        return Err(Error::InvalidParameter("leaves and reservoir must be at least 1".into()));
    }
    Ok(Rational::new(
        BigInt::from(1 + 3 * leaves),
        BigInt::from(1 + leaves * (reservoir + 3)),
    ))
}

/// Upper bound `p + q` on the fixation probability of a `k = 5` superstar.
/// Not clamped: small superstars can give values above 1.
pub fn theorem_bound(leaves: u64, reservoir: u64, r: &Rational) -> Result<Rational> {
    Ok(p_fail(leaves, reservoir)? + restricted_q(leaves, reservoir, r)?)
}

/// `r^6 - r^5 - r - 1`, positive exactly when `j(r) < r^5` for `r > 0`.
pub fn crossover_poly(r: f64) -> f64 {
    r.powi(6) - r.powi(5) - r - 1.0
}

pub const CROSSOVER_TOLERANCE: f64 = 1e-9;

/// Root in `(1, 2)` of `r^6 - r^5 - r - 1`, by bisection. Above it the
/// limit `1 - 1/j(r)` lies below `1 - r^-5`; between 1 and the root it lies
/// above.
pub fn crossover_root() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    debug_assert!(crossover_poly(lo) < 0.0 && crossover_poly(hi) > 0.0);
    while hi - lo > CROSSOVER_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if crossover_poly(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rational::rational;

    #[test]
    fn classic_small_cases() {
        assert_eq!(classic_moran(2, &rational(2, 1)).unwrap(), rational(2, 3));
        assert_eq!(classic_moran(3, &rational(2, 1)).unwrap(), rational(4, 7));
        assert_eq!(classic_moran(5, &rational(1, 1)).unwrap(), rational(1, 5));
        assert!(classic_moran(1, &rational(2, 1)).is_err());
        assert!(classic_moran(3, &rational(0, 1)).is_err());
        assert!((classic_moran_f64(3, 2.0) - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn limits_at_two_and_one() {
        assert_eq!(limit_h(&rational(2, 1)).unwrap(), rational(64, 67));
        assert_eq!(j_of_r(&rational(2, 1)).unwrap(), rational(67, 3));
        assert_eq!(limit_h(&rational(1, 1)).unwrap(), rational(1, 2));
        assert_eq!(j_of_r(&rational(1, 1)).unwrap(), rational(2, 1));
        assert!((limit_h_f64(2.0) - 64.0 / 67.0).abs() < 1e-15);
        assert!((j_of_r_f64(2.0) - 67.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn p_fail_values() {
        assert_eq!(p_fail(1, 1).unwrap(), rational(4, 5));
        assert_eq!(p_fail(200, 200).unwrap(), rational(601, 40601));
        assert!(p_fail(0, 3).is_err());
    }

    #[test]
    fn crossover_bracket() {
        let root = crossover_root();
        assert!(root > 1.41 && root < 1.42, "{root}");
        assert!(crossover_poly(1.41) < 0.0 && crossover_poly(1.42) > 0.0);
    }
}
