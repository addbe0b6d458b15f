//! Truncated power series `O_E[[x]] / x^N`, the substitutions
//! `f |-> f((1+x)^c - 1)`, and 2x2 matrices over both scalars and series.

use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::padics::{PadicElt, PadicError, PadicParams, Val};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("exponent has positive valuation and is not a nonnegative integer")]
    NonUnitExponent,
    #[error("binomial coefficient of degree {n} is not integral at working precision")]
    NonIntegralBinomial { n: usize },
    #[error("determinant is not a unit series")]
    NonInvertibleDeterminant,
    #[error(transparent)]
    Padic(#[from] PadicError),
}

/// `sum coeffs[i] x^i` modulo `x^N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PadicSeries {
    params: PadicParams,
    coeffs: Vec<PadicElt>,
}

impl PadicSeries {
    pub fn from_coeffs(params: &PadicParams, mut coeffs: Vec<PadicElt>, n: usize) -> Self {
        coeffs.truncate(n);
        while coeffs.len() < n {
            coeffs.push(PadicElt::zero(params));
        }
        PadicSeries { params: params.clone(), coeffs }
    }

    pub fn from_ints(params: &PadicParams, ints: &[i64], n: usize) -> Self {
        let coeffs = ints.iter().map(|&c| PadicElt::from_int(params, c)).collect();
        Self::from_coeffs(params, coeffs, n)
    }

    pub fn zero(params: &PadicParams, n: usize) -> Self {
        Self::from_coeffs(params, vec![], n)
    }

    pub fn constant(c: &PadicElt, n: usize) -> Self {
        Self::from_coeffs(c.params(), vec![c.clone()], n)
    }

    pub fn one(params: &PadicParams, n: usize) -> Self {
        Self::constant(&PadicElt::one(params), n)
    }

    /// The variable `x`.
    pub fn x(params: &PadicParams, n: usize) -> Self {
        Self::monomial(&PadicElt::one(params), 1, n)
    }

    pub fn monomial(c: &PadicElt, deg: usize, n: usize) -> Self {
        let params = c.params();
        let mut coeffs = vec![PadicElt::zero(params); deg.min(n)];
        coeffs.push(c.clone());
        Self::from_coeffs(params, coeffs, n)
    }

    pub fn params(&self) -> &PadicParams {
        &self.params
    }

    pub fn prec_x(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, i: usize) -> &PadicElt {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[PadicElt] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, i: usize, c: PadicElt) {
        self.coeffs[i] = c;
    }

    pub fn eval0(&self) -> PadicElt {
        self.coeffs[0].clone()
    }

    pub fn is_unit(&self) -> bool {
        self.coeffs[0].is_unit()
    }

    pub fn scale(&self, c: &PadicElt) -> Self {
        PadicSeries {
            params: self.params.clone(),
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Multiply by `x^j` and truncate.
    pub fn shift(&self, j: usize) -> Self {
        let n = self.prec_x();
        let mut coeffs = vec![PadicElt::zero(&self.params); j.min(n)];
        coeffs.extend(self.coeffs.iter().take(n.saturating_sub(j)).cloned());
        PadicSeries { params: self.params.clone(), coeffs }
    }

    /// Zero out every coefficient of degree `>= k`.
    pub fn truncate_deg(&self, k: usize) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| if i < k { c.clone() } else { PadicElt::zero(&self.params) })
            .collect();
        PadicSeries { params: self.params.clone(), coeffs }
    }

    /// Minimum coefficient valuation; zero-at-cap coefficients count as their cap.
    pub fn min_val(&self) -> Val {
        self.coeffs.iter().map(|c| c.val()).fold(Val::AtLeast(i64::MAX), Val::min)
    }

    pub fn min_cap(&self) -> i64 {
        self.coeffs.iter().map(|c| c.cap()).min().unwrap_or(0)
    }

    pub fn eq_to_cap(&self, other: &PadicSeries) -> bool {
        (self - other).min_val().is_zero_at_cap()
    }

    pub fn reparam(&self, params: &PadicParams) -> Self {
        PadicSeries {
            params: params.clone(),
            coeffs: self.coeffs.iter().map(|c| c.reparam(params)).collect(),
        }
    }

    pub fn with_cap(&self, cap: i64) -> Self {
        PadicSeries {
            params: self.params.clone(),
            coeffs: self.coeffs.iter().map(|c| c.with_cap(cap)).collect(),
        }
    }

    pub fn pow(&self, m: u64) -> Self {
        let mut out = Self::one(&self.params, self.prec_x());
        for _ in 0..m {
            out = &out * self;
        }
        out
    }

    /// Inverse of a series with unit constant term.
    pub fn inv(&self) -> Result<Self, SeriesError> {
        let n = self.prec_x();
        let c0 = self.coeffs[0].inv().map_err(|_| SeriesError::NonInvertibleDeterminant)?;
        let mut g: Vec<PadicElt> = Vec::with_capacity(n);
        g.push(c0.clone());
        for m in 1..n {
            let mut acc = PadicElt::zero(&self.params);
            for i in 1..=m {
                acc = &acc + &(&self.coeffs[i] * &g[m - i]);
            }
            g.push(&(-&acc) * &c0);
        }
        Ok(PadicSeries { params: self.params.clone(), coeffs: g })
    }

    /// Exact quotient `self / d` computed bottom-up; precision is lost at each
    /// division by `d(0)`.
    pub fn div_exact(&self, d: &PadicSeries) -> Result<Self, SeriesError> {
        let n = self.prec_x();
        let mut g: Vec<PadicElt> = Vec::with_capacity(n);
        for m in 0..n {
            let mut acc = self.coeffs[m].clone();
            for i in 1..=m {
                acc = &acc - &(&d.coeffs[i] * &g[m - i]);
            }
            let q = if acc.is_zero_at_cap() {
                let s = d.coeffs[0].val().bound();
                PadicElt::zero(&self.params).with_cap((acc.cap().min(d.coeffs[0].cap()) - s).max(0))
            } else {
                acc.div_exact(&d.coeffs[0])?
            };
            g.push(q);
        }
        Ok(PadicSeries { params: self.params.clone(), coeffs: g })
    }
}

impl<'a> Add for &'a PadicSeries {
    type Output = PadicSeries;
    fn add(self, rhs: &'a PadicSeries) -> PadicSeries {
        assert_eq!(self.prec_x(), rhs.prec_x(), "x-precision mismatch");
        PadicSeries {
            params: self.params.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub for &'a PadicSeries {
    type Output = PadicSeries;
    fn sub(self, rhs: &'a PadicSeries) -> PadicSeries {
        assert_eq!(self.prec_x(), rhs.prec_x(), "x-precision mismatch");
        PadicSeries {
            params: self.params.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul for &'a PadicSeries {
    type Output = PadicSeries;
    fn mul(self, rhs: &'a PadicSeries) -> PadicSeries {
        assert_eq!(self.prec_x(), rhs.prec_x(), "x-precision mismatch");
        let n = self.prec_x();
        let coeffs = (0..n)
            .map(|m| {
                let mut acc = &self.coeffs[0] * &rhs.coeffs[m];
                for i in 1..=m {
                    acc = &acc + &(&self.coeffs[i] * &rhs.coeffs[m - i]);
                }
                acc
            })
            .collect();
        PadicSeries { params: self.params.clone(), coeffs }
    }
}

impl Neg for &PadicSeries {
    type Output = PadicSeries;
    fn neg(self) -> PadicSeries {
        PadicSeries { params: self.params.clone(), coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

/// Exponent `c` in `(1+x)^c`.
#[derive(Clone, Debug)]
pub enum Exponent {
    /// Rational integer; binomials are computed exactly.
    Int(BigInt),
    /// Element of `Z_p` (or `O_E`); binomials by falling factorials with explicit loss.
    Padic(PadicElt),
}

/// `C(c, i)` for `i < n`.
pub fn binomial_coeffs(
    params: &PadicParams,
    c: &Exponent,
    n: usize,
) -> Result<Vec<PadicElt>, SeriesError> {
    let mut out = Vec::with_capacity(n);
    match c {
        Exponent::Int(c) => {
            if c.is_negative() && (c % params.p()).is_zero() {
                return Err(SeriesError::NonUnitExponent);
            }
            let mut b = BigInt::one();
            for i in 0..n {
                if i > 0 {
                    let (q, r) = (b * (c - BigInt::from(i - 1))).div_rem(&BigInt::from(i));
                    debug_assert!(r.is_zero());
                    b = q;
                }
                out.push(PadicElt::from_int(params, b.clone()));
            }
        }
        Exponent::Padic(c) => {
            if c.val() != Val::Exact(0) {
                return Err(SeriesError::NonUnitExponent);
            }
            let c = c.reparam(params);
            let mut b = PadicElt::one(params);
            for i in 0..n {
                if i > 0 {
                    let num = &b * &(&c - &PadicElt::from_int(params, (i - 1) as i64));
                    let ib = BigInt::from(i);
                    let s = params.vp(&ib);
                    let unit = PadicElt::from_int(params, &ib / params.p_pow(s));
                    b = num
                        .div_pi_pow(params.e() * s)
                        .map_err(|_| SeriesError::NonIntegralBinomial { n: i })?
                        .div_unit(&unit)?;
                }
                out.push(b.clone());
            }
        }
    }
    Ok(out)
}

/// Precomputed images `((1+x)^c - 1)^i` of the monomials `x^i`.
#[derive(Clone, Debug)]
pub struct Substitution {
    powers: Vec<PadicSeries>,
}

impl Substitution {
    pub fn new(params: &PadicParams, n: usize, c: &Exponent) -> Result<Self, SeriesError> {
        let mut b = binomial_coeffs(params, c, n)?;
        if n > 0 {
            b[0] = PadicElt::zero(params);
        }
        let base = PadicSeries::from_coeffs(params, b, n);
        let mut powers = Vec::with_capacity(n);
        let mut acc = PadicSeries::one(params, n);
        for _ in 0..n {
            let next = &acc * &base;
            powers.push(acc);
            acc = next;
        }
        Ok(Substitution { powers })
    }

    /// Image of `x^i`.
    pub fn power(&self, i: usize) -> &PadicSeries {
        &self.powers[i]
    }

    pub fn apply(&self, f: &PadicSeries) -> PadicSeries {
        let n = f.prec_x();
        assert_eq!(n, self.powers.len(), "x-precision mismatch");
        let params = f.params();
        let coeffs = (0..n)
            .map(|j| {
                let mut acc = PadicElt::zero(params);
                for i in 0..=j {
                    acc = &acc + &(f.coeff(i) * self.powers[i].coeff(j));
                }
                acc
            })
            .collect();
        PadicSeries::from_coeffs(params, coeffs, n)
    }
}

pub fn substitute_onepx_power(f: &PadicSeries, c: &Exponent) -> Result<PadicSeries, SeriesError> {
    Ok(Substitution::new(f.params(), f.prec_x(), c)?.apply(f))
}

/// `phi(f) = f((1+x)^p - 1)`.
pub fn frobenius(f: &PadicSeries) -> PadicSeries {
    substitute_onepx_power(f, &Exponent::Int(f.params().p().clone())).expect("p is a valid exponent")
}

/// `gamma(f) = f((1+x)^chi - 1)` for a unit `chi`.
pub fn gamma_act(f: &PadicSeries, chi_gamma: &PadicElt) -> Result<PadicSeries, SeriesError> {
    substitute_onepx_power(f, &Exponent::Padic(chi_gamma.clone()))
}

/// `Q = ((1+x)^p - 1)/x`.
pub fn cyclotomic_q(params: &PadicParams, n: usize) -> PadicSeries {
    let b = binomial_coeffs(params, &Exponent::Int(params.p().clone()), n + 1)
        .expect("p is a valid exponent");
    PadicSeries::from_coeffs(params, b[1..].to_vec(), n)
}

/// Cached `phi` and `gamma` for one `(params, N, chi)`.
#[derive(Clone, Debug)]
pub struct Actions {
    pub phi: Substitution,
    pub gamma: Substitution,
    pub chi: BigInt,
}

impl Actions {
    pub fn new(params: &PadicParams, n: usize, chi: &BigInt) -> Result<Self, SeriesError> {
        Ok(Actions {
            phi: Substitution::new(params, n, &Exponent::Int(params.p().clone()))?,
            gamma: Substitution::new(params, n, &Exponent::Int(chi.clone()))?,
            chi: chi.clone(),
        })
    }
}

/// 2x2 matrix over `O_E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat2(pub [[PadicElt; 2]; 2]);

impl Mat2 {
    pub fn new(a: PadicElt, b: PadicElt, c: PadicElt, d: PadicElt) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn from_ints(params: &PadicParams, m: [[i64; 2]; 2]) -> Self {
        Mat2(m.map(|row| row.map(|v| PadicElt::from_int(params, v))))
    }

    pub fn identity(params: &PadicParams) -> Self {
        Self::from_ints(params, [[1, 0], [0, 1]])
    }

    pub fn zero(params: &PadicParams) -> Self {
        Self::from_ints(params, [[0, 0], [0, 0]])
    }

    pub fn params(&self) -> &PadicParams {
        self.0[0][0].params()
    }

    pub fn get(&self, i: usize, j: usize) -> &PadicElt {
        &self.0[i][j]
    }

    pub fn map(&self, f: impl Fn(&PadicElt) -> PadicElt) -> Self {
        Mat2([
            [f(&self.0[0][0]), f(&self.0[0][1])],
            [f(&self.0[1][0]), f(&self.0[1][1])],
        ])
    }

    pub fn try_map(
        &self,
        f: impl Fn(&PadicElt) -> Result<PadicElt, PadicError>,
    ) -> Result<Self, PadicError> {
        Ok(Mat2([
            [f(&self.0[0][0])?, f(&self.0[0][1])?],
            [f(&self.0[1][0])?, f(&self.0[1][1])?],
        ]))
    }

    pub fn scale(&self, c: &PadicElt) -> Self {
        self.map(|a| a * c)
    }

    pub fn det(&self) -> PadicElt {
        let m = &self.0;
        &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0])
    }

    pub fn trace(&self) -> PadicElt {
        &self.0[0][0] + &self.0[1][1]
    }

    pub fn adj(&self) -> Self {
        let m = &self.0;
        Mat2::new(m[1][1].clone(), -&m[0][1], -&m[1][0], m[0][0].clone())
    }

    pub fn min_val(&self) -> Val {
        self.0.iter().flatten().map(|c| c.val()).fold(Val::AtLeast(i64::MAX), Val::min)
    }

    pub fn min_cap(&self) -> i64 {
        self.0.iter().flatten().map(|c| c.cap()).min().unwrap_or(0)
    }

    pub fn eq_to_cap(&self, other: &Mat2) -> bool {
        (self - other).min_val().is_zero_at_cap()
    }

    pub fn reparam(&self, params: &PadicParams) -> Self {
        self.map(|a| a.reparam(params))
    }
}

impl<'a> Add for &'a Mat2 {
    type Output = Mat2;
    fn add(self, rhs: &'a Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [&a[0][0] + &b[0][0], &a[0][1] + &b[0][1]],
            [&a[1][0] + &b[1][0], &a[1][1] + &b[1][1]],
        ])
    }
}

impl<'a> Sub for &'a Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: &'a Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        Mat2([
            [&a[0][0] - &b[0][0], &a[0][1] - &b[0][1]],
            [&a[1][0] - &b[1][0], &a[1][1] - &b[1][1]],
        ])
    }
}

impl<'a> Mul for &'a Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: &'a Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let e = |i: usize, j: usize| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j]);
        Mat2([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }
}

impl Neg for &Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.map(|a| -a)
    }
}

/// 2x2 matrix over truncated series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixSeries(pub [[PadicSeries; 2]; 2]);

impl MatrixSeries {
    pub fn new(a: PadicSeries, b: PadicSeries, c: PadicSeries, d: PadicSeries) -> Self {
        MatrixSeries([[a, b], [c, d]])
    }

    pub fn constant(m: &Mat2, n: usize) -> Self {
        MatrixSeries(m.0.clone().map(|row| row.map(|c| PadicSeries::constant(&c, n))))
    }

    pub fn identity(params: &PadicParams, n: usize) -> Self {
        Self::constant(&Mat2::identity(params), n)
    }

    pub fn zero(params: &PadicParams, n: usize) -> Self {
        Self::constant(&Mat2::zero(params), n)
    }

    pub fn params(&self) -> &PadicParams {
        self.0[0][0].params()
    }

    pub fn prec_x(&self) -> usize {
        self.0[0][0].prec_x()
    }

    pub fn entry(&self, i: usize, j: usize) -> &PadicSeries {
        &self.0[i][j]
    }

    pub fn map(&self, f: impl Fn(&PadicSeries) -> PadicSeries) -> Self {
        MatrixSeries([
            [f(&self.0[0][0]), f(&self.0[0][1])],
            [f(&self.0[1][0]), f(&self.0[1][1])],
        ])
    }

    /// Coefficient matrix of `x^j`.
    pub fn coeff(&self, j: usize) -> Mat2 {
        Mat2([
            [self.0[0][0].coeff(j).clone(), self.0[0][1].coeff(j).clone()],
            [self.0[1][0].coeff(j).clone(), self.0[1][1].coeff(j).clone()],
        ])
    }

    pub fn set_coeff(&mut self, j: usize, m: &Mat2) {
        for i in 0..2 {
            for k in 0..2 {
                self.0[i][k].set_coeff(j, m.0[i][k].clone());
            }
        }
    }

    pub fn eval0(&self) -> Mat2 {
        self.coeff(0)
    }

    pub fn det(&self) -> PadicSeries {
        let m = &self.0;
        &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0])
    }

    pub fn adj(&self) -> Self {
        let m = &self.0;
        MatrixSeries::new(m[1][1].clone(), -&m[0][1], -&m[1][0], m[0][0].clone())
    }

    /// `adj(A) / det(A)` when `det(A)` is a unit series.
    pub fn inv_unit_det(&self) -> Result<Self, SeriesError> {
        let dinv = self.det().inv()?;
        Ok(self.adj().map(|s| s * &dinv))
    }

    pub fn scale(&self, c: &PadicElt) -> Self {
        self.map(|s| s.scale(c))
    }

    pub fn scale_series(&self, f: &PadicSeries) -> Self {
        self.map(|s| s * f)
    }

    /// Multiply by a constant matrix on the left.
    pub fn left_mul_const(&self, m: &Mat2) -> Self {
        let a = &m.0;
        let b = &self.0;
        let e = |i: usize, j: usize| &b[0][j].scale(&a[i][0]) + &b[1][j].scale(&a[i][1]);
        MatrixSeries([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    /// Multiply by a constant matrix on the right.
    pub fn right_mul_const(&self, m: &Mat2) -> Self {
        let a = &self.0;
        let b = &m.0;
        let e = |i: usize, j: usize| &a[i][0].scale(&b[0][j]) + &a[i][1].scale(&b[1][j]);
        MatrixSeries([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    pub fn shift(&self, j: usize) -> Self {
        self.map(|s| s.shift(j))
    }

    pub fn truncate_deg(&self, k: usize) -> Self {
        self.map(|s| s.truncate_deg(k))
    }

    pub fn apply(&self, sub: &Substitution) -> Self {
        self.map(|s| sub.apply(s))
    }

    pub fn frobenius(&self) -> Self {
        self.map(frobenius)
    }

    pub fn gamma(&self, chi_gamma: &PadicElt) -> Result<Self, SeriesError> {
        let sub = Substitution::new(self.params(), self.prec_x(), &Exponent::Padic(chi_gamma.clone()))?;
        Ok(self.apply(&sub))
    }

    pub fn min_val(&self) -> Val {
        self.0.iter().flatten().map(|s| s.min_val()).fold(Val::AtLeast(i64::MAX), Val::min)
    }

    pub fn min_cap(&self) -> i64 {
        self.0.iter().flatten().map(|s| s.min_cap()).min().unwrap_or(0)
    }

    pub fn eq_to_cap(&self, other: &MatrixSeries) -> bool {
        (self - other).min_val().is_zero_at_cap()
    }

    pub fn reparam(&self, params: &PadicParams) -> Self {
        self.map(|s| s.reparam(params))
    }

    pub fn with_cap(&self, cap: i64) -> Self {
        self.map(|s| s.with_cap(cap))
    }
}

impl<'a> Add for &'a MatrixSeries {
    type Output = MatrixSeries;
    fn add(self, rhs: &'a MatrixSeries) -> MatrixSeries {
        let (a, b) = (&self.0, &rhs.0);
        MatrixSeries([
            [&a[0][0] + &b[0][0], &a[0][1] + &b[0][1]],
            [&a[1][0] + &b[1][0], &a[1][1] + &b[1][1]],
        ])
    }
}

impl<'a> Sub for &'a MatrixSeries {
    type Output = MatrixSeries;
    fn sub(self, rhs: &'a MatrixSeries) -> MatrixSeries {
        let (a, b) = (&self.0, &rhs.0);
        MatrixSeries([
            [&a[0][0] - &b[0][0], &a[0][1] - &b[0][1]],
            [&a[1][0] - &b[1][0], &a[1][1] - &b[1][1]],
        ])
    }
}

impl<'a> Mul for &'a MatrixSeries {
    type Output = MatrixSeries;
    fn mul(self, rhs: &'a MatrixSeries) -> MatrixSeries {
        let (a, b) = (&self.0, &rhs.0);
        let e = |i: usize, j: usize| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j]);
        MatrixSeries([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }
}
