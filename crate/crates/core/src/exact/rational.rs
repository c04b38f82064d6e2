use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn integer(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, an integer, or a decimal such as `1.1`, `-0.25` or `2.5e-3`,
/// exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: BigInt = format!("0{int_part}{frac_part}").parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(all * Pow::pow(&ten, scale as u32))
    } else {
        Rational::new(all, Pow::pow(&ten, (-scale) as u32))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Exact value of a finite float.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::InvalidParameter(format!("{x} is not finite")))
}

/// `p/q ≈ 0.571428…` style rendering with `digits` decimals.
pub fn format_decimal(x: &Rational, digits: usize) -> String {
    let negative = x.is_negative();
    let x = x.abs();
    let scale = Pow::pow(&BigInt::from(10), digits as u32);
    let scaled = (&x * Rational::from_integer(scale.clone())).round().to_integer();
    let int = &scaled / &scale;
    let frac = &scaled % &scale;
    let sign = if negative && !scaled.is_zero() { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = digits)
    }
}

pub fn is_positive(x: &Rational) -> bool {
    x.is_positive()
}

pub fn one() -> Rational {
    Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_forms() {
        assert_eq!(parse_rational("4/7").unwrap(), rational(4, 7));
        assert_eq!(parse_rational(" 8/14 ").unwrap(), rational(4, 7));
        assert_eq!(parse_rational("2").unwrap(), rational(2, 1));
        assert_eq!(parse_rational("1.1").unwrap(), rational(11, 10));
        assert_eq!(parse_rational("-0.25").unwrap(), rational(-1, 4));
        assert_eq!(parse_rational(".5").unwrap(), rational(1, 2));
        assert_eq!(parse_rational("1e6").unwrap(), rational(1_000_000, 1));
        assert_eq!(parse_rational("2.5e-3").unwrap(), rational(1, 400));
        for bad in ["", "x", "1/0", "1.2.3", "e5", "1/2/3", "--1"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(format_decimal(&rational(4, 7), 6), "0.571429");
        assert_eq!(format_decimal(&rational(64, 67), 3), "0.955");
        assert_eq!(format_decimal(&rational(-1, 8), 2), "-0.13");
        assert_eq!(format_decimal(&rational(3, 1), 0), "3");
    }

    #[test]
    fn float_round_trip() {
        assert_eq!(from_f64(0.375).unwrap(), rational(3, 8));
        assert!(from_f64(f64::NAN).is_err());
        assert_eq!(to_f64(&rational(1, 4)), 0.25);
    }
}
