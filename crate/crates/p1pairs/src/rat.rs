//! Exact rational scalars.
//!
//! Everything downstream computes over `Rat`; there is no floating point
//! anywhere in the crate. Serialization uses the string form `"p/q"`
//! (or `"p"` when the denominator is 1).

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

pub fn rat_frac(num: i64, den: i64) -> Rat {
    assert!(den != 0, "zero denominator");
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_zero() -> Rat {
    BigRational::zero()
}

pub fn rat_one() -> Rat {
    BigRational::one()
}

/// Render as `"p/q"`, or `"p"` when q = 1.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    // tolerate the unicode minus sign that shows up in hand-written files
    let s = s.replace('\u{2212}', "-");
    match s.split_once('/') {
        Some((num, den)) => {
            let n: BigInt = num.trim().parse().map_err(|e| format!("bad numerator {num:?}: {e}"))?;
            let d: BigInt = den.trim().parse().map_err(|e| format!("bad denominator {den:?}: {e}"))?;
            if d.is_zero() {
                return Err(format!("zero denominator in {s:?}"));
            }
            Ok(BigRational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|e| format!("bad rational {s:?}: {e}"))?;
            Ok(BigRational::from_integer(n))
        }
    }
}

pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactness() {
        // (a/b)·(b/a) = 1 for nonzero a, b
        for a in [-7i64, -1, 2, 9] {
            for b in [1i64, 3, -5] {
                let x = rat_frac(a, b);
                let y = rat_frac(b, a);
                assert_eq!(x * y, rat_one());
            }
        }
    }

    #[test]
    fn parse_format_roundtrip() {
        for s in ["0", "-3", "2/3", "-17/5"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(format_rat(&r), s);
        }
        assert_eq!(parse_rat("4/2").unwrap(), rat(2));
        assert_eq!(parse_rat("\u{2212}2/3").unwrap(), rat_frac(-2, 3));
        assert!(parse_rat("1/0").is_err());
    }
}
