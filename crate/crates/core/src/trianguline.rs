//! Weight-side utilities: `psi_alpha`, the characters `delta^(s)`, the weight
//! hypothesis, the first weight reduction, the ball Lipschitz bound and `n = m + r`.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::deform::{deform_trace, DeformCertificate, DeformError};
use crate::padics::{pexp, plog, teichmuller_decompose, FracElt, PadicElt, PadicError, PadicParams, Val};
use crate::wach::{is_zero_ap, p_power_elt, WachData};

#[derive(Debug, Error)]
pub enum TriError {
    #[error("alpha must lie in 1 + pZ_p")]
    DomainError,
    #[error("ball norm |g|_r exceeds 1 at coefficient {index}")]
    NormViolation { index: usize },
    #[error("v(a_p) must be positive and finite")]
    NonpositiveValuation,
    #[error("weight hypothesis fails: k = {k} < {need}")]
    StarFails { k: i64, need: BigInt },
    #[error("the two evaluations of psi disagree: {exp_path} vs {binomial_path}")]
    PathDisagreement { exp_path: String, binomial_path: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

fn check_one_plus_p(alpha: &PadicElt) -> Result<i64, TriError> {
    let e = alpha.params().e();
    match (alpha - &PadicElt::one(alpha.params())).val() {
        Val::Exact(t) if t >= e => Ok(t),
        Val::AtLeast(c) => Ok(c),
        _ => Err(TriError::DomainError),
    }
}

/// `n!` split as `(v_p(n!), unit part)`.
fn factorial_parts(params: &PadicParams, n: i64) -> (i64, PadicElt) {
    let p = params.p();
    let mut v = 0;
    let mut u = BigInt::one();
    for i in 2..=n {
        let mut b = BigInt::from(i);
        while (&b % p).is_zero() {
            b /= p;
            v += 1;
        }
        u *= b;
    }
    (v, PadicElt::from_int(params, u))
}

/// `x / n!` for `x` known to be divisible.
fn div_factorial(x: &PadicElt, n: i64) -> Result<PadicElt, PadicError> {
    let (v, u) = factorial_parts(x.params(), n);
    x.div_pi_pow(x.params().e() * v)?.div_unit(&u)
}

/// `psi_alpha(s) = exp(s log alpha)` with the coefficients `c_n = (log alpha)^n / n!`.
#[derive(Clone, Debug)]
pub struct PsiMap {
    pub alpha: PadicElt,
    pub log_alpha: PadicElt,
    pub coeffs: Vec<PadicElt>,
}

impl PsiMap {
    pub fn new(alpha: &PadicElt, n_max: usize) -> Result<Self, TriError> {
        check_one_plus_p(alpha)?;
        let log_alpha = plog(alpha)?;
        let params = alpha.params();
        let ext = params.with_prec(params.prec_pi() + params.e() * (n_max as i64 + 2));
        let l = log_alpha.reparam(&ext);
        let mut coeffs = Vec::with_capacity(n_max + 1);
        let mut pw = PadicElt::one(&ext);
        for n in 0..=n_max as i64 {
            if n > 0 {
                pw = &pw * &l;
            }
            coeffs.push(div_factorial(&pw, n)?.reparam(params));
        }
        Ok(PsiMap { alpha: alpha.clone(), log_alpha, coeffs })
    }
}

fn binomial_path(alpha: &PadicElt, s: &PadicElt, t: i64) -> Result<PadicElt, TriError> {
    let params = alpha.params();
    let e = params.e();
    let target = alpha.cap().min(s.cap());
    let mut n_max = 1;
    while n_max * t < target {
        n_max += 1;
    }
    let (vfact, _) = factorial_parts(params, n_max);
    let ext = params.with_prec(params.prec_pi() + e * (vfact + 2));
    let y = (alpha - &PadicElt::one(params)).reparam(&ext);
    let ss = s.reparam(&ext);
    let mut acc = PadicElt::one(&ext);
    let mut num = PadicElt::one(&ext);
    let mut ypow = PadicElt::one(&ext);
    for n in 1..=n_max {
        num = &num * &(&ss - &PadicElt::from_int(&ext, n - 1));
        ypow = &ypow * &y;
        let c = div_factorial(&num, n)?;
        acc = &acc + &(&c * &ypow);
    }
    Ok(acc.reparam(params).with_cap(target.min(acc.cap())))
}

/// `alpha^s` evaluated both as `exp(s log alpha)` and as `sum C(s, n) (alpha - 1)^n`.
pub fn psi_eval(alpha: &PadicElt, s: &PadicElt) -> Result<PadicElt, TriError> {
    let t = check_one_plus_p(alpha)?;
    let params = alpha.params();
    if t >= alpha.cap() {
        return Ok(PadicElt::one(params).with_cap(alpha.cap()));
    }
    let y = s * &plog(alpha)?;
    let exp_path = if y.is_zero_at_cap() { PadicElt::one(params).with_cap(y.cap()) } else { pexp(&y)? };
    let bin = binomial_path(alpha, s, t)?;
    let cap = exp_path.cap().min(bin.cap());
    let (a, b) = (exp_path.with_cap(cap), bin.with_cap(cap));
    if !a.eq_to_cap(&b) {
        return Err(TriError::PathDisagreement { exp_path: a.to_string(), binomial_path: b.to_string() });
    }
    Ok(a)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoeffReport {
    pub n_max: usize,
    pub v_log_alpha: String,
    /// `v(c_n) = n v(log alpha) - v_p(n!)`, in `pi`-units.
    pub valuations: Vec<i64>,
    pub all_nonnegative: bool,
    pub positive_for_n_ge_1: bool,
    /// Computed coefficients whose valuation matches the exact formula.
    pub numeric_agreement: usize,
    pub gouvea_samples: usize,
    pub gouvea_ok: bool,
}

/// Bounds on `c_n` for `n <= n_max`, plus the composition criterion on sampled `s`.
pub fn coeff_bound_check(alpha: &PadicElt, n_max: usize, samples: &[PadicElt]) -> Result<CoeffReport, TriError> {
    check_one_plus_p(alpha)?;
    let params = alpha.params();
    let e = params.e();
    let l = plog(alpha)?;
    let vl = l.val();
    let valuations: Vec<i64> = match vl {
        Val::Exact(v) => (0..=n_max as i64).map(|n| n * v - e * factorial_parts(params, n).0).collect(),
        Val::AtLeast(_) => (0..=n_max as i64).map(|n| if n == 0 { 0 } else { i64::MAX }).collect(),
    };
    let all_nonnegative = valuations.iter().all(|v| *v >= 0);
    let positive_for_n_ge_1 = valuations.iter().skip(1).all(|v| *v > 0);

    let numeric = PsiMap::new(alpha, n_max.min(40))?;
    let numeric_agreement = numeric
        .coeffs
        .iter()
        .enumerate()
        .filter(|(n, c)| match c.val() {
            Val::Exact(v) => v == valuations[*n],
            Val::AtLeast(cap) => cap <= valuations[*n],
        })
        .count();

    let pm1: i64 = (params.p() - 1u32).try_into().unwrap_or(i64::MAX);
    let mut gouvea_ok = true;
    for s in samples {
        let g = s * &l;
        let gv = g.val().bound();
        // single-term inner series: |b_1 s| <= |g(s)|, and g(s) inside the exp disk
        let term_ok = (s.val().bound() + vl.bound()).min(g.cap()) >= gv.min(g.cap());
        let disk_ok = gv * pm1 > e;
        gouvea_ok &= term_ok && disk_ok;
    }
    Ok(CoeffReport {
        n_max,
        v_log_alpha: vl.render(e),
        valuations,
        all_nonnegative,
        positive_for_n_ge_1,
        numeric_agreement,
        gouvea_samples: samples.len(),
        gouvea_ok,
    })
}

/// `delta^(s)_{k, a_p}(x) = mu_{1/a_p}(x) omega(x)^(1-k) psi_<x>(s)`.
#[derive(Clone, Debug)]
pub struct TriCharacter {
    pub k: i64,
    pub a_p: PadicElt,
    pub s: PadicElt,
}

pub fn char_eval(chr: &TriCharacter, x: &FracElt) -> Result<FracElt, TriError> {
    let parts = teichmuller_decompose(x)?;
    let inv_ap = FracElt::from_padic(&chr.a_p).inv()?;
    let mu = inv_ap.pow_i(parts.v)?;
    let om = FracElt::from_padic(&parts.omega).pow_i(1 - chr.k)?;
    let psi = FracElt::from_padic(&psi_eval(&parts.angle, &chr.s)?);
    Ok(mu.mul(&om).mul(&psi))
}

/// Smallest `k` with `k >= (3 v(a_p) + m) / (1 - p/(p-1)^2) + 1`.
pub fn hypothesis_star(p: &BigInt, v_ap: &Ratio<BigInt>, m: &Ratio<BigInt>) -> Result<BigInt, TriError> {
    if !v_ap.is_positive() {
        return Err(TriError::NonpositiveValuation);
    }
    if !m.is_positive() {
        return Err(TriError::InvalidInput(format!("level m = {m} must be positive")));
    }
    let pm1 = p - BigInt::one();
    let factor = Ratio::one() - Ratio::new(p.clone(), &pm1 * &pm1);
    if !factor.is_positive() {
        return Err(TriError::InvalidInput(format!("p = {p} gives a nonpositive factor")));
    }
    let bound = (Ratio::from_integer(BigInt::from(3)) * v_ap + m) / factor + Ratio::one();
    Ok(bound.ceil().to_integer())
}

pub const WEIGHT_STEP_NOTE: &str = "first weight-side reduction only; the rigid family, the closed immersion \
and the existence of the radius r are outside what this tool computes";

/// Deforms `a_p` to `a_p + p^(k-1)/a_p` at level `m`, refusing below the weight threshold.
pub fn weight_step(w: &WachData, m: Ratio<i64>) -> Result<(WachData, DeformCertificate), TriError> {
    if is_zero_ap(&w.a_p) {
        return Err(TriError::NonpositiveValuation);
    }
    let params = &w.params;
    let e = params.e();
    let v = w.a_p.val().to_ratio(e);
    let v_big = Ratio::new(BigInt::from(*v.numer()), BigInt::from(*v.denom()));
    let m_big = Ratio::new(BigInt::from(*m.numer()), BigInt::from(*m.denom()));
    let need = hypothesis_star(params.p(), &v_big, &m_big)?;
    if BigInt::from(w.k) < need {
        return Err(TriError::StarFails { k: w.k, need });
    }
    let eps = p_power_elt(params, w.k - 1).div_exact(&w.a_p)?;
    let a_new = &w.a_p + &eps;
    let (w2, mut cert) = deform_trace(w, &a_new, m)?;
    cert.notes.push(WEIGHT_STEP_NOTE.into());
    Ok((w2, cert))
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub r: i64,
    /// `-log_p |g|_r`, in `pi`-units.
    pub norm_val: String,
    pub pairs: usize,
    /// Smallest `v(g(x) - g(y)) - (v(x - y) - r + v_r(g))` among determinate pairs.
    pub min_margin: Option<i64>,
    pub equality_witnessed: bool,
    pub violations: usize,
    pub indeterminate: usize,
    pub ok: bool,
}

/// Checks `|g(x) - g(y)| <= p^r |g|_r |x - y|` for `g = sum a_n T^n` on `|x|, |y| <= p^(-r)`.
pub fn lipschitz_check(
    coeffs: &[FracElt],
    r: i64,
    pairs: &[(PadicElt, PadicElt)],
) -> Result<LipschitzReport, TriError> {
    if r < 0 {
        return Err(TriError::InvalidInput("r must be nonnegative".into()));
    }
    let params = match (coeffs.first(), pairs.first()) {
        (Some(c), _) => c.params().clone(),
        (None, Some((x, _))) => x.params().clone(),
        _ => return Err(TriError::InvalidInput("empty input".into())),
    };
    let e = params.e();
    let mut b = Vec::with_capacity(coeffs.len());
    for (n, a) in coeffs.iter().enumerate() {
        let scaled = a.mul(&FracElt::from_padic(&p_power_elt(&params, r * n as i64)));
        let scaled = if r * n as i64 == 0 { a.clone() } else { scaled };
        b.push(scaled.to_padic().map_err(|_| TriError::NormViolation { index: n })?);
    }
    let norm = b.iter().fold(Val::AtLeast(params.prec_pi()), |acc, x| acc.min(x.val()));
    let nv = norm.bound();
    let eval = |x: &PadicElt| -> Result<PadicElt, TriError> {
        if x.val().bound() < e * r {
            return Err(TriError::InvalidInput(format!("sample {x} outside the ball of radius p^-{r}")));
        }
        let t = x.div_pi_pow(e * r)?;
        let mut acc = PadicElt::zero(&params);
        for c in b.iter().rev() {
            acc = &(&acc * &t) + c;
        }
        Ok(acc)
    };
    let mut min_margin: Option<i64> = None;
    let (mut violations, mut indeterminate, mut equality) = (0, 0, false);
    for (x, y) in pairs {
        let dx = x - y;
        let dg = &eval(x)? - &eval(y)?;
        let rhs = match dx.val() {
            Val::Exact(v) => v - e * r + nv,
            Val::AtLeast(_) => {
                indeterminate += 1;
                continue;
            }
        };
        match dg.val() {
            Val::Exact(v) => {
                let margin = v - rhs;
                if margin < 0 {
                    violations += 1;
                }
                equality |= margin == 0;
                min_margin = Some(min_margin.map_or(margin, |m| m.min(margin)));
            }
            Val::AtLeast(c) if c >= rhs => {}
            Val::AtLeast(_) => indeterminate += 1,
        }
    }
    Ok(LipschitzReport {
        r,
        norm_val: norm.render(e),
        pairs: pairs.len(),
        min_margin,
        equality_witnessed: equality,
        violations,
        indeterminate,
        ok: violations == 0,
    })
}

/// `n = m + r`: weights with `k' - k` in `p^(m+r)(p-1)Z` agree mod `p^m`.
pub fn radius_to_level(r: i64, m: Ratio<i64>) -> Result<Ratio<i64>, TriError> {
    if r < 1 {
        return Err(TriError::InvalidInput(format!("radius r = {r} must be at least 1")));
    }
    if m <= Ratio::zero() {
        return Err(TriError::InvalidInput(format!("level m = {m} must be positive")));
    }
    Ok(m + Ratio::from_integer(r))
}
