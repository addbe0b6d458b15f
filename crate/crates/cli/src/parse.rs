use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use wach_core::padics::{PadicElt, PadicParams};

use crate::CliError;

pub fn ratio(s: &str) -> Result<Ratio<BigInt>, CliError> {
    let bad = || CliError::Usage(format!("not a rational number: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Ratio::new(n, d))
        }
        None => Ok(Ratio::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn ratio_i64(s: &str) -> Result<Ratio<i64>, CliError> {
    let r = ratio(s)?;
    match (r.numer().to_i64(), r.denom().to_i64()) {
        (Some(n), Some(d)) => Ok(Ratio::new(n, d)),
        _ => Err(CliError::Usage(format!("{s:?} is too large"))),
    }
}

pub fn integer(s: &str) -> Result<BigInt, CliError> {
    let r = ratio(s)?;
    if !r.is_integer() {
        return Err(CliError::Usage(format!("expected an integer, got {s}")));
    }
    Ok(r.to_integer())
}

pub fn small(s: &str) -> Result<i64, CliError> {
    integer(s)?.to_i64().ok_or_else(|| CliError::Usage(format!("{s:?} is too large")))
}

/// A rational with `p`-unit denominator, or `pi`-adic digits `u0:u1:...`.
pub fn element(params: &PadicParams, s: &str) -> Result<PadicElt, CliError> {
    if s.contains(':') {
        let mut digits = Vec::new();
        for d in s.split(':') {
            let d: BigInt = d.trim().parse().map_err(|_| CliError::Usage(format!("bad digit in {s:?}")))?;
            if d < BigInt::zero() || &d >= params.p() {
                return Err(CliError::Usage(format!("digit {d} out of range in {s:?}")));
            }
            digits.push(d);
        }
        return Ok(PadicElt::from_digits(params, digits, params.prec_pi()));
    }
    let r = ratio(s)?;
    Ok(PadicElt::from_ratio(params, r.numer().clone(), r.denom().clone())?)
}

/// `lo..hi` (inclusive) or a single integer.
pub fn range(s: &str) -> Result<(i64, i64), CliError> {
    match s.split_once("..") {
        Some((a, b)) => {
            let (lo, hi) = (small(a)?, small(b.trim_start_matches('='))?);
            if lo > hi {
                return Err(CliError::Usage(format!("empty range {s}")));
            }
            Ok((lo, hi))
        }
        None => {
            let k = small(s)?;
            Ok((k, k))
        }
    }
}

/// Renders an element as a signed integer when `e = 1`, else as `pi`-digits.
pub fn render(x: &PadicElt) -> String {
    if x.params().e() == 1 {
        x.residue_signed().to_string()
    } else {
        let d: Vec<String> = x.digits().iter().map(|d| d.to_string()).collect();
        d.join(":")
    }
}
