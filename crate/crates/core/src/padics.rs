//! Capped-precision arithmetic in `O_E = Z_p[pi]/(pi^e - p)`.
//!
//! Precision is absolute and measured in powers of `pi`. Every element carries
//! its own cap, and caps only shrink under arithmetic.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PadicError {
    #[error("p = {0} is not an odd prime")]
    NotOddPrime(BigInt),
    #[error("ramification index must be at least 1, got {0}")]
    BadRamification(i64),
    #[error("precision cap must be at least 1, got {0}")]
    BadPrecision(i64),
    #[error("operands belong to different rings or precisions")]
    ParamMismatch,
    #[error("division by a non-unit (valuation {0:?})")]
    DivisionByNonUnit(Val),
    #[error("not divisible by pi^{need}: valuation is {have:?}")]
    NotDivisible { need: i64, have: Val },
    #[error("zero input")]
    ZeroInput,
    #[error("only e = 1 is supported for this operation")]
    RamifiedUnsupported,
    #[error("argument outside the convergence domain")]
    OutOfConvergenceDomain,
    #[error("Hensel criterion fails: v(f(seed)) = {f_val:?}, v(f'(seed)) = {df_val:?}")]
    HenselCriterionFails { f_val: Val, df_val: Val },
    #[error("Newton polygon slopes are not distinct")]
    SlopesNotDistinct,
    #[error("denominator {0} is not prime to p")]
    NonUnitDenominator(BigInt),
}

/// Valuation in units of `pi` (so `v(p) = e`).
///
/// `AtLeast(c)` is the zero-at-precision sentinel: every digit below `pi^c`
/// vanishes, nothing more is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Val {
    Exact(i64),
    AtLeast(i64),
}

impl Val {
    /// Certified lower bound.
    pub fn bound(self) -> i64 {
        match self {
            Val::Exact(v) | Val::AtLeast(v) => v,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Val::Exact(_))
    }

    pub fn is_zero_at_cap(self) -> bool {
        matches!(self, Val::AtLeast(_))
    }

    /// Valuation of a minimum over a family.
    pub fn min(self, other: Val) -> Val {
        match self.bound().cmp(&other.bound()) {
            std::cmp::Ordering::Less => self,
            std::cmp::Ordering::Greater => other,
            std::cmp::Ordering::Equal => {
                if self.is_exact() {
                    self
                } else {
                    other
                }
            }
        }
    }

    pub fn shift(self, s: i64) -> Val {
        match self {
            Val::Exact(v) => Val::Exact(v + s),
            Val::AtLeast(v) => Val::AtLeast(v + s),
        }
    }

    /// Value in `p`-units, i.e. divided by `e`.
    pub fn to_ratio(self, e: i64) -> Ratio<i64> {
        Ratio::new(self.bound(), e)
    }

    pub fn render(self, e: i64) -> String {
        let r = self.to_ratio(e);
        match self {
            Val::Exact(_) => r.to_string(),
            Val::AtLeast(_) => format!(">={r}"),
        }
    }
}

struct ParamsInner {
    p: BigInt,
    e: i64,
    prec_pi: i64,
    pows: Vec<BigInt>,
}

/// Ring parameters: prime, ramification index, global precision cap.
#[derive(Clone)]
pub struct PadicParams(Arc<ParamsInner>);

impl PadicParams {
    pub fn new(p: impl Into<BigInt>, e: i64, prec_pi: i64) -> Result<Self, PadicError> {
        let p = p.into();
        if !is_odd_prime(&p) {
            return Err(PadicError::NotOddPrime(p));
        }
        if e < 1 {
            return Err(PadicError::BadRamification(e));
        }
        if prec_pi < 1 {
            return Err(PadicError::BadPrecision(prec_pi));
        }
        Ok(Self::build(p, e, prec_pi))
    }

    fn build(p: BigInt, e: i64, prec_pi: i64) -> Self {
        let n = (prec_pi + e - 1) / e + 2;
        let mut pows = Vec::with_capacity(n as usize);
        let mut acc = BigInt::one();
        for _ in 0..n {
            pows.push(acc.clone());
            acc *= &p;
        }
        PadicParams(Arc::new(ParamsInner { p, e, prec_pi, pows }))
    }

    pub fn p(&self) -> &BigInt {
        &self.0.p
    }

    pub fn e(&self) -> i64 {
        self.0.e
    }

    pub fn prec_pi(&self) -> i64 {
        self.0.prec_pi
    }

    /// Same ring, different global cap.
    pub fn with_prec(&self, prec_pi: i64) -> Self {
        if prec_pi == self.prec_pi() {
            return self.clone();
        }
        Self::build(self.p().clone(), self.e(), prec_pi.max(1))
    }

    pub fn same_ring(&self, other: &PadicParams) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.e() == other.e() && self.p() == other.p())
    }

    pub fn p_pow(&self, t: i64) -> BigInt {
        if t <= 0 {
            return BigInt::one();
        }
        match self.0.pows.get(t as usize) {
            Some(v) => v.clone(),
            None => num_traits::pow(self.p().clone(), t as usize),
        }
    }

    /// `p^ceil((cap - j)/e)`: modulus for the `pi^j` component at absolute cap `cap`.
    fn digit_modulus(&self, cap: i64, j: i64) -> BigInt {
        let span = cap - j;
        if span <= 0 {
            return BigInt::one();
        }
        self.p_pow((span + self.e() - 1) / self.e())
    }

    /// `v_p(n)` for a nonzero integer.
    pub fn vp(&self, n: &BigInt) -> i64 {
        vp(n, self.p())
    }
}

impl PartialEq for PadicParams {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.e() == other.e()
                && self.prec_pi() == other.prec_pi()
                && self.p() == other.p())
    }
}

impl Eq for PadicParams {}

impl fmt::Debug for PadicParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PadicParams(p={}, e={}, prec_pi={})", self.p(), self.e(), self.prec_pi())
    }
}

/// `v_p(n)`; `n` must be nonzero.
pub fn vp(n: &BigInt, p: &BigInt) -> i64 {
    debug_assert!(!n.is_zero());
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        m = q;
        v += 1;
    }
}

/// Largest `t` with `p^t <= n` (0 for `n < p`).
pub fn ilog(p: &BigInt, n: i64) -> i64 {
    let n = BigInt::from(n.max(1));
    let mut t = 0;
    let mut acc = p.clone();
    while acc <= n {
        acc *= p;
        t += 1;
    }
    t
}

/// Deterministic Miller-Rabin on the first twelve prime bases; rejects 2.
pub fn is_odd_prime(n: &BigInt) -> bool {
    const SMALL: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let two = BigInt::from(2);
    if *n <= two || n.is_even() {
        return false;
    }
    for &q in &SMALL {
        let q = BigInt::from(q);
        if *n == q {
            return true;
        }
        if (n % &q).is_zero() {
            return false;
        }
    }
    let one = BigInt::one();
    let nm1 = n - &one;
    let mut d = nm1.clone();
    let mut s = 0;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in &SMALL {
        let mut x = BigInt::from(a).modpow(&d, n);
        if x == one || x == nm1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == nm1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let g = a.extended_gcd(m);
    if !g.gcd.is_one() {
        return None;
    }
    Some(g.x.mod_floor(m))
}

/// Element of `O_E` known modulo `pi^cap`.
#[derive(Clone, PartialEq, Eq)]
pub struct PadicElt {
    params: PadicParams,
    digits: Vec<BigInt>,
    cap: i64,
}

impl PadicElt {
    /// `sum digits[j] pi^j` modulo `pi^cap`; the cap is clamped to `[0, prec_pi]`.
    pub fn from_digits(params: &PadicParams, mut digits: Vec<BigInt>, cap: i64) -> Self {
        let e = params.e() as usize;
        digits.resize(e, BigInt::zero());
        let cap = cap.clamp(0, params.prec_pi());
        let mut x = PadicElt { params: params.clone(), digits, cap };
        x.reduce();
        x
    }

    pub fn from_int(params: &PadicParams, n: impl Into<BigInt>) -> Self {
        Self::from_digits(params, vec![n.into()], params.prec_pi())
    }

    /// `num/den` with `den` prime to `p`.
    pub fn from_ratio(
        params: &PadicParams,
        num: impl Into<BigInt>,
        den: impl Into<BigInt>,
    ) -> Result<Self, PadicError> {
        let den = den.into();
        if den.is_zero() || (&den % params.p()).is_zero() {
            return Err(PadicError::NonUnitDenominator(den));
        }
        let m = params.digit_modulus(params.prec_pi(), 0);
        let inv = mod_inverse(&den.mod_floor(&m), &m)
            .ok_or_else(|| PadicError::NonUnitDenominator(den.clone()))?;
        Ok(Self::from_int(params, num.into() * inv))
    }

    pub fn zero(params: &PadicParams) -> Self {
        Self::from_int(params, 0)
    }

    pub fn one(params: &PadicParams) -> Self {
        Self::from_int(params, 1)
    }

    pub fn uniformizer(params: &PadicParams) -> Self {
        if params.e() == 1 {
            Self::from_int(params, params.p().clone())
        } else {
            Self::from_digits(params, vec![BigInt::zero(), BigInt::one()], params.prec_pi())
        }
    }

    fn reduce(&mut self) {
        for (j, d) in self.digits.iter_mut().enumerate() {
            let m = self.params.digit_modulus(self.cap, j as i64);
            *d = d.mod_floor(&m);
        }
    }

    pub fn params(&self) -> &PadicParams {
        &self.params
    }

    pub fn digits(&self) -> &[BigInt] {
        &self.digits
    }

    pub fn cap(&self) -> i64 {
        self.cap
    }

    /// Lower the cap (never raises it).
    pub fn with_cap(&self, cap: i64) -> Self {
        Self::from_digits(&self.params, self.digits.clone(), cap.min(self.cap))
    }

    /// Treat the stored representative as exact at the full global cap.
    pub fn as_exact(&self) -> Self {
        Self::from_digits(&self.params, self.digits.clone(), self.params.prec_pi())
    }

    /// Move into a ring with the same `p, e` and another global cap.
    pub fn reparam(&self, params: &PadicParams) -> Self {
        assert!(self.params.same_ring(params), "reparam across rings");
        Self::from_digits(params, self.digits.clone(), self.cap)
    }

    pub fn val(&self) -> Val {
        let e = self.params.e();
        let mut best: Option<i64> = None;
        for (j, d) in self.digits.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            let v = e * vp(d, self.params.p()) + j as i64;
            best = Some(best.map_or(v, |b| b.min(v)));
        }
        match best {
            Some(v) if v < self.cap => Val::Exact(v),
            _ => Val::AtLeast(self.cap),
        }
    }

    pub fn is_unit(&self) -> bool {
        self.val() == Val::Exact(0)
    }

    pub fn is_zero_at_cap(&self) -> bool {
        self.val().is_zero_at_cap()
    }

    /// `self == other` modulo the smaller of the two caps.
    pub fn eq_to_cap(&self, other: &PadicElt) -> bool {
        (self - other).is_zero_at_cap()
    }

    /// Integer representative of digit 0; for `e = 1` this is the element itself.
    pub fn residue(&self) -> &BigInt {
        &self.digits[0]
    }

    /// Symmetric representative of digit 0, in `(-M/2, M/2]`.
    pub fn residue_signed(&self) -> BigInt {
        let m = self.params.digit_modulus(self.cap, 0);
        let r = self.digits[0].clone();
        if &r * 2 > m {
            r - m
        } else {
            r
        }
    }

    fn check(&self, other: &PadicElt) -> Result<(), PadicError> {
        if self.params == other.params {
            Ok(())
        } else {
            Err(PadicError::ParamMismatch)
        }
    }

    pub fn checked_add(&self, other: &PadicElt) -> Result<Self, PadicError> {
        self.check(other)?;
        let digits = self.digits.iter().zip(&other.digits).map(|(a, b)| a + b).collect();
        Ok(Self::from_digits(&self.params, digits, self.cap.min(other.cap)))
    }

    pub fn checked_sub(&self, other: &PadicElt) -> Result<Self, PadicError> {
        self.check(other)?;
        let digits = self.digits.iter().zip(&other.digits).map(|(a, b)| a - b).collect();
        Ok(Self::from_digits(&self.params, digits, self.cap.min(other.cap)))
    }

    pub fn checked_mul(&self, other: &PadicElt) -> Result<Self, PadicError> {
        self.check(other)?;
        let e = self.params.e() as usize;
        let mut out = vec![BigInt::zero(); e];
        for (i, a) in self.digits.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.digits.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let t = a * b;
                if i + j < e {
                    out[i + j] += t;
                } else {
                    out[i + j - e] += t * self.params.p();
                }
            }
        }
        let cap = (self.cap + other.val().bound())
            .min(other.cap + self.val().bound())
            .min(self.params.prec_pi());
        Ok(Self::from_digits(&self.params, out, cap))
    }

    /// Inverse of a unit, by Newton iteration `z <- z(2 - uz)`.
    pub fn inv(&self) -> Result<Self, PadicError> {
        let v = self.val();
        if v != Val::Exact(0) {
            return Err(PadicError::DivisionByNonUnit(v));
        }
        let p = self.params.p();
        let m = self.params.digit_modulus(self.cap, 0);
        if self.params.e() == 1 {
            let z = mod_inverse(&self.digits[0], &m).expect("unit residue");
            return Ok(Self::from_digits(&self.params, vec![z], self.cap));
        }
        let z0 = mod_inverse(&self.digits[0].mod_floor(p), p).expect("unit residue");
        let mut z = Self::from_digits(&self.params, vec![z0], self.cap);
        let two = Self::from_int(&self.params, 2);
        let mut good = 1;
        while good < self.cap {
            z = &z * &(&two - &(self * &z));
            good *= 2;
        }
        Ok(z.with_cap(self.cap))
    }

    pub fn div_unit(&self, y: &PadicElt) -> Result<Self, PadicError> {
        self.check(y)?;
        let yi = y.inv()?;
        Ok((self * &yi).with_cap(self.cap.min(y.cap)))
    }

    /// Exact multiplication by `pi^s`.
    pub fn mul_pi_pow(&self, s: i64) -> Self {
        assert!(s >= 0);
        let e = self.params.e();
        let (q, r) = (s / e, s % e);
        let mut d = self.digits.clone();
        for _ in 0..r {
            let top = d.pop().expect("e >= 1") * self.params.p();
            d.insert(0, top);
        }
        let pq = self.params.p_pow(q);
        for x in d.iter_mut() {
            *x *= &pq;
        }
        Self::from_digits(&self.params, d, (self.cap + s).min(self.params.prec_pi()))
    }

    /// Exact division by `pi^s`; the cap drops by `s`.
    pub fn div_pi_pow(&self, s: i64) -> Result<Self, PadicError> {
        assert!(s >= 0);
        let v = self.val();
        if v.is_exact() && v.bound() < s {
            return Err(PadicError::NotDivisible { need: s, have: v });
        }
        let cap = (self.cap - s).max(0);
        if v.is_zero_at_cap() {
            return Ok(Self::from_digits(&self.params, vec![], cap));
        }
        let e = self.params.e();
        let (q, r) = (s / e, s % e);
        let pq = self.params.p_pow(q);
        let mut d: Vec<BigInt> = self.digits.iter().map(|x| x / &pq).collect();
        for _ in 0..r {
            let low = d.remove(0) / self.params.p();
            d.push(low);
        }
        Ok(Self::from_digits(&self.params, d, cap))
    }

    /// Exact division by `y = pi^s u`: cap becomes `min(cap_x, cap_y) - s`.
    pub fn div_exact(&self, y: &PadicElt) -> Result<Self, PadicError> {
        self.check(y)?;
        let s = match y.val() {
            Val::Exact(s) => s,
            v => return Err(PadicError::DivisionByNonUnit(v)),
        };
        let num = self.div_pi_pow(s)?;
        let den = y.div_pi_pow(s)?;
        num.div_unit(&den)
    }

    pub fn pow(&self, n: u64) -> Self {
        let mut result = Self::one(&self.params);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn pow_big(&self, n: &BigUint) -> Self {
        let mut result = Self::one(&self.params);
        for i in (0..n.bits()).rev() {
            result = &result * &result;
            if n.bit(i) {
                result = &result * self;
            }
        }
        result
    }
}

impl fmt::Debug for PadicElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PadicElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.params.e() == 1 {
            write!(f, "{} + O({}^{})", self.digits[0], self.params.p(), self.cap)
        } else {
            let parts: Vec<String> = self.digits.iter().map(|d| d.to_string()).collect();
            write!(f, "[{}] + O(pi^{})", parts.join(", "), self.cap)
        }
    }
}

impl<'a> Add for &'a PadicElt {
    type Output = PadicElt;
    fn add(self, rhs: &'a PadicElt) -> PadicElt {
        self.checked_add(rhs).expect("parameter mismatch in add")
    }
}

impl<'a> Sub for &'a PadicElt {
    type Output = PadicElt;
    fn sub(self, rhs: &'a PadicElt) -> PadicElt {
        self.checked_sub(rhs).expect("parameter mismatch in sub")
    }
}

impl<'a> Mul for &'a PadicElt {
    type Output = PadicElt;
    fn mul(self, rhs: &'a PadicElt) -> PadicElt {
        self.checked_mul(rhs).expect("parameter mismatch in mul")
    }
}

impl Neg for &PadicElt {
    type Output = PadicElt;
    fn neg(self) -> PadicElt {
        let digits = self.digits.iter().map(|d| -d).collect();
        PadicElt::from_digits(&self.params, digits, self.cap)
    }
}

/// Element of `E = O_E[1/p]`, stored as `pi^shift * unit`.
///
/// A zero-at-precision value keeps `shift = 0` and a vanishing `unit`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FracElt {
    shift: i64,
    unit: PadicElt,
}

impl FracElt {
    pub fn from_padic(x: &PadicElt) -> Self {
        match x.val() {
            Val::Exact(v) => FracElt { shift: v, unit: x.div_pi_pow(v).expect("valuation known") },
            Val::AtLeast(_) => FracElt { shift: 0, unit: x.clone() },
        }
    }

    pub fn from_ratio(
        params: &PadicParams,
        num: impl Into<BigInt>,
        den: impl Into<BigInt>,
    ) -> Result<Self, PadicError> {
        let (mut num, mut den) = (num.into(), den.into());
        if den.is_zero() {
            return Err(PadicError::ZeroInput);
        }
        if num.is_zero() {
            return Ok(Self::from_padic(&PadicElt::zero(params)));
        }
        let (a, b) = (vp(&num, params.p()), vp(&den, params.p()));
        num /= params.p_pow(a);
        den /= params.p_pow(b);
        let unit = PadicElt::from_ratio(params, num, den)?;
        Ok(FracElt { shift: params.e() * (a - b), unit })
    }

    pub fn params(&self) -> &PadicParams {
        self.unit.params()
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    pub fn unit(&self) -> &PadicElt {
        &self.unit
    }

    pub fn is_zero(&self) -> bool {
        self.unit.is_zero_at_cap()
    }

    pub fn val(&self) -> Val {
        self.unit.val().shift(self.shift)
    }

    pub fn mul(&self, other: &FracElt) -> FracElt {
        if self.is_zero() || other.is_zero() {
            let z = PadicElt::zero(self.params());
            return FracElt { shift: 0, unit: z.with_cap(0) };
        }
        FracElt { shift: self.shift + other.shift, unit: &self.unit * &other.unit }
    }

    pub fn inv(&self) -> Result<FracElt, PadicError> {
        if self.is_zero() {
            return Err(PadicError::ZeroInput);
        }
        Ok(FracElt { shift: -self.shift, unit: self.unit.inv()? })
    }

    pub fn pow_i(&self, n: i64) -> Result<FracElt, PadicError> {
        let base = if n < 0 { self.inv()? } else { self.clone() };
        let m = n.unsigned_abs();
        Ok(FracElt { shift: base.shift * m as i64, unit: base.unit.pow(m) })
    }

    /// Back into `O_E`; fails for negative valuation.
    pub fn to_padic(&self) -> Result<PadicElt, PadicError> {
        if self.is_zero() {
            return Ok(self.unit.clone());
        }
        if self.shift < 0 {
            return Err(PadicError::NotDivisible { need: 0, have: Val::Exact(self.shift) });
        }
        Ok(self.unit.mul_pi_pow(self.shift))
    }

    /// Equality to the relative precision of the units.
    pub fn eq_to_cap(&self, other: &FracElt) -> bool {
        if self.is_zero() || other.is_zero() {
            return self.is_zero() && other.is_zero();
        }
        self.shift == other.shift && self.unit.eq_to_cap(&other.unit)
    }
}

impl fmt::Display for FracElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pi^{} * ({})", self.shift, self.unit)
    }
}

/// `x = p^v * omega * angle` with `omega^(p-1) = 1` and `angle` in `1 + pZ_p`.
#[derive(Clone, Debug)]
pub struct TeichmullerParts {
    pub v: i64,
    pub omega: PadicElt,
    pub angle: PadicElt,
}

/// Teichmuller representative of a unit: the stationary limit of `u^(p^n)`.
pub fn teichmuller(u: &PadicElt) -> Result<PadicElt, PadicError> {
    if u.params().e() != 1 {
        return Err(PadicError::RamifiedUnsupported);
    }
    let v = u.val();
    if v != Val::Exact(0) {
        return Err(PadicError::DivisionByNonUnit(v));
    }
    let p = u.params().p().to_biguint().expect("positive prime");
    let mut w = u.clone();
    loop {
        let next = w.pow_big(&p);
        if next == w {
            return Ok(w);
        }
        w = next;
    }
}

pub fn teichmuller_decompose(x: &FracElt) -> Result<TeichmullerParts, PadicError> {
    if x.params().e() != 1 {
        return Err(PadicError::RamifiedUnsupported);
    }
    if x.is_zero() {
        return Err(PadicError::ZeroInput);
    }
    let omega = teichmuller(x.unit())?;
    let angle = x.unit().div_unit(&omega)?;
    Ok(TeichmullerParts { v: x.shift(), omega, angle })
}

fn guard_params(params: &PadicParams, target: i64) -> PadicParams {
    let e = params.e();
    let guard = e * (ilog(params.p(), 4 * target.max(1) + 4 * e) + 3);
    params.with_prec(params.prec_pi() + guard)
}

/// `log_p(x) = sum (-1)^(n+1) (x-1)^n / n` for `x` in `1 + m_E`.
pub fn plog(x: &PadicElt) -> Result<PadicElt, PadicError> {
    let params = x.params().clone();
    let e = params.e();
    let y0 = x - &PadicElt::one(&params);
    let t = match y0.val() {
        Val::Exact(t) if t >= 1 => t,
        Val::AtLeast(c) => return Ok(PadicElt::zero(&params).with_cap(c)),
        _ => return Err(PadicError::OutOfConvergenceDomain),
    };
    let ext = guard_params(&params, y0.cap());
    let y = y0.reparam(&ext);
    let mut acc = PadicElt::zero(&ext);
    let mut ypow = PadicElt::one(&ext);
    let mut n: i64 = 1;
    loop {
        ypow = &ypow * &y;
        let nb = BigInt::from(n);
        let s = vp(&nb, params.p());
        if n * t - e * s < acc.cap() {
            let unit = PadicElt::from_int(&ext, &nb / params.p_pow(s));
            let term = ypow.div_pi_pow(e * s)?.div_unit(&unit)?;
            acc = if n % 2 == 1 { &acc + &term } else { &acc - &term };
        }
        if n >= 2 * e && n * t - e * (ilog(params.p(), n) + 1) >= acc.cap() {
            break;
        }
        n += 1;
    }
    Ok(acc.reparam(&params))
}

/// `exp_p(y) = sum y^n / n!` for `v(y) > 1/(p-1)`.
pub fn pexp(y: &PadicElt) -> Result<PadicElt, PadicError> {
    let params = y.params().clone();
    let e = params.e();
    let pm1 = (params.p() - 1u32).to_i64().ok_or(PadicError::OutOfConvergenceDomain)?;
    let t = y.val().bound();
    if t * (pm1) <= e {
        return Err(PadicError::OutOfConvergenceDomain);
    }
    if y.is_zero_at_cap() {
        return Ok(PadicElt::one(&params).with_cap(y.cap()));
    }
    let ext = guard_params(&params, y.cap());
    let yy = y.reparam(&ext);
    let mut acc = PadicElt::one(&ext);
    let mut term = PadicElt::one(&ext);
    let mut n: i64 = 1;
    loop {
        let nb = BigInt::from(n);
        let s = vp(&nb, params.p());
        let unit = PadicElt::from_int(&ext, &nb / params.p_pow(s));
        term = (&term * &yy).div_pi_pow(e * s)?.div_unit(&unit)?;
        let lower = n * t - e * ((n - 1) / pm1);
        if lower >= acc.cap() {
            break;
        }
        acc = &acc + &term;
        n += 1;
    }
    Ok(acc.reparam(&params))
}

/// `c2 T^2 + c1 T + c0` over `O_E`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub c2: PadicElt,
    pub c1: PadicElt,
    pub c0: PadicElt,
}

impl Quadratic {
    pub fn monic(c1: PadicElt, c0: PadicElt) -> Self {
        let one = PadicElt::one(c1.params());
        Quadratic { c2: one, c1, c0 }
    }

    pub fn eval(&self, t: &PadicElt) -> PadicElt {
        &(&(&(&self.c2 * t) + &self.c1) * t) + &self.c0
    }

    pub fn deriv_eval(&self, t: &PadicElt) -> PadicElt {
        let two = PadicElt::from_int(t.params(), 2);
        &(&two * &(&self.c2 * t)) + &self.c1
    }

    fn coeff_cap(&self) -> i64 {
        self.c2.cap().min(self.c1.cap()).min(self.c0.cap())
    }

    fn reparam(&self, params: &PadicParams) -> Self {
        Quadratic {
            c2: self.c2.reparam(params).as_exact(),
            c1: self.c1.reparam(params).as_exact(),
            c0: self.c0.reparam(params).as_exact(),
        }
    }
}

/// Newton-Hensel root near `seed`, requiring `v(f(seed)) > 2 v(f'(seed))`.
///
/// The returned cap is `min(coefficient caps, prec) - v(f'(root))`.
pub fn hensel_root(f: &Quadratic, seed: &PadicElt) -> Result<PadicElt, PadicError> {
    let params = seed.params().clone();
    let f_val = f.eval(seed).val();
    let df_val = f.deriv_eval(seed).val();
    let s = match df_val {
        Val::Exact(s) if f_val.bound() > 2 * s => s,
        _ => return Err(PadicError::HenselCriterionFails { f_val, df_val }),
    };
    let target = f.coeff_cap().min(seed.cap()).min(params.prec_pi());
    let ext = params.with_prec(params.prec_pi() + 2 * s + 2 * params.e());
    let g = f.reparam(&ext);
    let mut r = seed.reparam(&ext).as_exact();
    for _ in 0..(2 * ilog(&BigInt::from(2), ext.prec_pi()) + 8) {
        let fr = g.eval(&r);
        if fr.val().bound() >= target {
            let root = r.with_cap(target - s);
            return Ok(root.reparam(&params));
        }
        let step = fr.div_exact(&g.deriv_eval(&r))?;
        r = (&r - &step).as_exact();
    }
    Err(PadicError::HenselCriterionFails { f_val, df_val })
}

/// Slopes `(v(t), v(d) - v(t))` of `T^2 - tT + d` in `pi`-units, when distinct.
pub fn newton_slopes(trace: &PadicElt, det: &PadicElt) -> Result<(i64, i64), PadicError> {
    match (trace.val(), det.val()) {
        (Val::Exact(vt), Val::Exact(vd)) if 2 * vt < vd => Ok((vt, vd - vt)),
        _ => Err(PadicError::SlopesNotDistinct),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharTag {
    MuZ,
    ChiPower,
    OmegaPower,
    Product,
}

/// Character of `Q_p^x`: `x = p^v u  |->  z^v * u^chi_exp * omega(u)^omega_exp`.
#[derive(Clone, Debug)]
pub struct QpMultChar {
    pub value_at_p: FracElt,
    pub chi_exponent: i64,
    pub omega_exponent: i64,
    pub tag: CharTag,
}

impl QpMultChar {
    /// `mu_z(p) = z`, trivial on units.
    pub fn mu(z: FracElt) -> Self {
        QpMultChar { value_at_p: z, chi_exponent: 0, omega_exponent: 0, tag: CharTag::MuZ }
    }

    pub fn chi_power(params: &PadicParams, n: i64) -> Self {
        let one = FracElt::from_padic(&PadicElt::one(params));
        QpMultChar { value_at_p: one, chi_exponent: n, omega_exponent: 0, tag: CharTag::ChiPower }
    }

    pub fn omega_power(params: &PadicParams, n: i64) -> Self {
        let one = FracElt::from_padic(&PadicElt::one(params));
        QpMultChar { value_at_p: one, chi_exponent: 0, omega_exponent: n, tag: CharTag::OmegaPower }
    }

    pub fn product(&self, other: &QpMultChar) -> Self {
        QpMultChar {
            value_at_p: self.value_at_p.mul(&other.value_at_p),
            chi_exponent: self.chi_exponent + other.chi_exponent,
            omega_exponent: self.omega_exponent + other.omega_exponent,
            tag: CharTag::Product,
        }
    }

    pub fn eval(&self, x: &FracElt) -> Result<FracElt, PadicError> {
        let parts = teichmuller_decompose(x)?;
        let mut out = self.value_at_p.pow_i(parts.v)?;
        if self.chi_exponent != 0 {
            out = out.mul(&FracElt::from_padic(x.unit()).pow_i(self.chi_exponent)?);
        }
        if self.omega_exponent != 0 {
            out = out.mul(&FracElt::from_padic(&parts.omega).pow_i(self.omega_exponent)?);
        }
        Ok(out)
    }
}

/// `|n|` as `i64`, for small integer inputs given as `BigInt`.
pub fn small(n: &BigInt) -> Option<i64> {
    n.abs().to_i64().map(|m| if n.is_negative() { -m } else { m })
}
