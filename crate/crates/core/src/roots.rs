//! Bracketed bisection followed by a Newton polish.

use crate::error::{Error, Result};

/// Root of a continuous `f` on `[lo, hi]` where `f(lo)` and `f(hi)` have opposite
/// signs. Bisection narrows the bracket to `~1e-15` relative width, then a single
/// safeguarded Newton step (kept only if it stays in the bracket) polishes it.
pub fn bisect_newton<F, D>(f: F, df: D, lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::BracketFailure {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let sa = fa.signum();
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || (b - a) <= 1e-15 * mid.abs().max(1e-300) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    let x = 0.5 * (a + b);
    let d = df(x);
    if d != 0.0 && d.is_finite() {
        let polished = x - f(x) / d;
        if polished >= a && polished <= b && f(polished).abs() <= f(x).abs() {
            return Ok(polished);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt2() {
        let r = bisect_newton(|x| x * x - 2.0, |x| 2.0 * x, 0.0, 3.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reports_bad_bracket() {
        let e = bisect_newton(|x| x * x + 1.0, |x| 2.0 * x, -1.0, 1.0).unwrap_err();
        match e {
            Error::BracketFailure { f_lo, f_hi, .. } => {
                assert_eq!(f_lo, 2.0);
                assert_eq!(f_hi, 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
