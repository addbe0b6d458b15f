//! Wach-module matrix data `(P, G)`, the axiom checker, seed constructors and
//! the on-disk format.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::padics::{PadicElt, PadicError, PadicParams, Val};
use crate::series::{cyclotomic_q, Actions, Mat2, MatrixSeries, PadicSeries, SeriesError};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum WachError {
    #[error("linear system at x-order {order} is singular at working precision")]
    SeedSingular { order: usize },
    #[error("no integral gamma-matrix: solution at x-order {order} has valuation {val}")]
    SeedNonIntegral { order: usize, val: String },
    #[error("Neumann series did not converge at x-order {order}")]
    NeumannDivergence { order: usize },
    #[error("precision exhausted in {stage}: {detail}")]
    PrecisionExhausted { stage: String, detail: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("malformed file at {position}: {reason}")]
    MalformedFile { position: String, reason: String },
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// One Wach module in a fixed basis: `P = Mat(phi)`, `G = Mat(gamma)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WachData {
    pub params: PadicParams,
    pub k: i64,
    pub a_p: PadicElt,
    pub p_mat: MatrixSeries,
    pub g_mat: MatrixSeries,
    pub chi_gamma: PadicElt,
    pub prec_x: usize,
}

impl WachData {
    /// `chi(gamma)` as the rational integer it stands for.
    pub fn chi_int(&self) -> BigInt {
        self.chi_gamma.residue().clone()
    }

    pub fn actions(&self) -> Result<Actions, WachError> {
        Ok(Actions::new(&self.params, self.prec_x, &self.chi_int())?)
    }

    /// `P phi(G) - G gamma(P)`.
    pub fn defect(&self, actions: &Actions) -> MatrixSeries {
        commutation_defect(&self.p_mat, &self.g_mat, actions)
    }
}

pub fn commutation_defect(p_mat: &MatrixSeries, g_mat: &MatrixSeries, actions: &Actions) -> MatrixSeries {
    let lhs = p_mat * &g_mat.apply(&actions.phi);
    let rhs = g_mat * &p_mat.apply(&actions.gamma);
    &lhs - &rhs
}

/// `((0, -1), (Q^(k-1), a_p))`.
pub fn companion_matrix(params: &PadicParams, k: i64, a_p: &PadicElt, n: usize) -> MatrixSeries {
    let q = cyclotomic_q(params, n);
    MatrixSeries::new(
        PadicSeries::zero(params, n),
        PadicSeries::constant(&PadicElt::from_int(params, -1), n),
        q.pow((k - 1) as u64),
        PadicSeries::constant(a_p, n),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    /// Minimum valuation over all coefficients of `P phi(G) - G gamma(P)`, in `pi`-units.
    pub commutation_defect_val: Val,
    /// Smallest cap among the defect coefficients.
    pub certified_cap: i64,
    pub det_unit_ok: bool,
    pub gamma_trivial_ok: bool,
    pub charpoly_ok: bool,
    pub prec_x: usize,
    pub pass: bool,
}

pub fn check_axioms(w: &WachData) -> Result<AxiomReport, WachError> {
    let actions = w.actions()?;
    let defect = w.defect(&actions);
    let dval = defect.min_val();
    let certified_cap = defect.min_cap();

    let p0 = w.p_mat.eval0();
    let pk = PadicElt::from_int(&w.params, w.params.p_pow(w.k - 1));
    let charpoly_ok = p0.trace().eq_to_cap(&w.a_p) && p0.det().eq_to_cap(&pk);
    let gamma_trivial_ok = w.g_mat.eval0().eq_to_cap(&Mat2::identity(&w.params));

    let qk = cyclotomic_q(&w.params, w.prec_x).pow((w.k - 1) as u64);
    let det_unit_ok = match w.p_mat.det().div_exact(&qk) {
        Ok(u) => u.coeff(0).is_unit(),
        Err(_) => false,
    };

    let pass = det_unit_ok
        && gamma_trivial_ok
        && charpoly_ok
        && dval.is_zero_at_cap()
        && certified_cap > 0;
    Ok(AxiomReport {
        commutation_defect_val: dval,
        certified_cap,
        det_unit_ok,
        gamma_trivial_ok,
        charpoly_ok,
        prec_x: w.prec_x,
        pass,
    })
}

/// Solves `p^j P0 X - X P0 = rhs` by Cramer's rule on the 4x4 system.
pub(crate) fn solve_sylvester_dense(p0: &Mat2, j: usize, rhs: &Mat2) -> Result<Mat2, WachError> {
    let params = p0.params().clone();
    let pj = PadicElt::from_int(&params, params.p_pow(j as i64));
    let delta = |a: usize, b: usize| if a == b { 1 } else { 0 };
    let mut m: Vec<Vec<PadicElt>> = Vec::with_capacity(4);
    for row in 0..4 {
        let (a, b) = (row / 2, row % 2);
        let mut line = Vec::with_capacity(4);
        for col in 0..4 {
            let (c, d) = (col / 2, col % 2);
            let mut v = PadicElt::zero(&params);
            if b == d {
                v = &v + &(&pj * p0.get(a, c));
            }
            if delta(a, c) == 1 {
                v = &v - p0.get(d, b);
            }
            line.push(v);
        }
        m.push(line);
    }
    let det = det_n(&m);
    let s = match det.val() {
        Val::Exact(s) => s,
        Val::AtLeast(_) => return Err(WachError::SeedSingular { order: j }),
    };
    let b: Vec<PadicElt> = (0..4).map(|r| rhs.get(r / 2, r % 2).clone()).collect();
    let mut x = Vec::with_capacity(4);
    for i in 0..4 {
        // Cramer: replace column i by the right-hand side.
        let mi: Vec<Vec<PadicElt>> = m
            .iter()
            .enumerate()
            .map(|(r, line)| {
                let mut l = line.clone();
                l[i] = b[r].clone();
                l
            })
            .collect();
        let num = det_n(&mi);
        let xi = match num.div_pi_pow(s) {
            Ok(v) => v,
            Err(_) => {
                let have = num.val().bound() - s;
                return Err(WachError::SeedNonIntegral {
                    order: j,
                    val: Val::Exact(have).render(params.e()),
                });
            }
        };
        x.push(xi.div_unit(&det.div_pi_pow(s)?)?);
    }
    Ok(Mat2::new(x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone()))
}

fn det_n(m: &[Vec<PadicElt>]) -> PadicElt {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let params = m[0][0].params();
    let mut acc = PadicElt::zero(params);
    for c in 0..n {
        if m[0][c].is_zero_at_cap() && m[0][c].cap() == params.prec_pi() {
            continue;
        }
        let minor: Vec<Vec<PadicElt>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(i, _)| *i != c).map(|(_, v)| v.clone()).collect())
            .collect();
        let t = &m[0][c] * &det_n(&minor);
        acc = if c % 2 == 0 { &acc + &t } else { &acc - &t };
    }
    acc
}

/// Solves `p^j P0 X - X P0 = -D` for `j >= k` by the Neumann series of
/// `X = D P0^{-1} + p^j P0 X P0^{-1}`, where `det P0 = p^(k-1) u0`.
pub(crate) fn solve_sylvester_neumann(
    p0: &Mat2,
    u0: &PadicElt,
    k: i64,
    j: usize,
    d: &Mat2,
) -> Result<Mat2, WachError> {
    let params = p0.params().clone();
    let e = params.e();
    let adj = p0.adj();
    let u0inv = u0.inv()?;
    let lifted = (d * &adj).try_map(|a| a.div_pi_pow(e * (k - 1)));
    let y = match lifted {
        Ok(y) => y.scale(&u0inv),
        Err(_) => {
            let v = (d * &adj).min_val().bound() - e * (k - 1);
            return Err(WachError::SeedNonIntegral { order: j, val: Val::Exact(v).render(e) });
        }
    };
    let factor = PadicElt::from_int(&params, params.p_pow(j as i64 - k + 1)).mul(&u0inv);
    let mut x = y.clone();
    let mut term = y;
    let limit = params.prec_pi() / e.max(1) + 8;
    for _ in 0..limit {
        if term.min_val().is_zero_at_cap() {
            return Ok(x);
        }
        term = (&(p0 * &term) * &adj).scale(&factor);
        x = &x + &term;
    }
    if term.min_val().is_zero_at_cap() {
        return Ok(x);
    }
    Err(WachError::NeumannDivergence { order: j })
}

trait ScalarMul {
    fn mul(&self, other: &PadicElt) -> PadicElt;
}

impl ScalarMul for PadicElt {
    fn mul(&self, other: &PadicElt) -> PadicElt {
        self * other
    }
}

/// Order-by-order solve for the gamma-matrix: starting from `g_init`, whose
/// defect vanishes below `x^j_start`, adds `x^j S_j` for `j = j_start..N-1`.
///
/// Returns the corrected matrix and the list of corrections `S_j`.
pub(crate) fn gamma_solve(
    p_mat: &MatrixSeries,
    g_init: &MatrixSeries,
    j_start: usize,
    k: i64,
    actions: &Actions,
) -> Result<(MatrixSeries, Vec<(usize, Mat2)>), WachError> {
    let params = p_mat.params().clone();
    let n = p_mat.prec_x();
    let e = params.e();
    let p0 = p_mat.eval0();
    let u0 = p0.det().div_pi_pow(e * (k - 1)).map_err(|_| {
        WachError::InvalidInput("det P(0) is not divisible by p^(k-1)".into())
    })?;
    if !u0.is_unit() {
        return Err(WachError::InvalidInput("det P(0) / p^(k-1) is not a unit".into()));
    }
    let gamma_p = p_mat.apply(&actions.gamma);
    let mut g = g_init.clone();
    let mut defect = commutation_defect(p_mat, &g, actions);
    let mut log = Vec::new();
    for j in j_start..n {
        let dj = defect.coeff(j);
        let s = if (j as i64) < k {
            solve_sylvester_dense(&p0, j, &(-&dj))?
        } else {
            solve_sylvester_neumann(&p0, &u0, k, j, &dj)?
        };
        let mut gj = g.coeff(j);
        gj = &gj + &s;
        g.set_coeff(j, &gj);
        let phi_part = MatrixSeries::constant(&s, n).scale_series(actions.phi.power(j));
        let delta = &(p_mat * &phi_part) - &gamma_p.left_mul_const(&s).shift(j);
        defect = &defect + &delta;
        log.push((j, s));
    }
    Ok((g, log))
}

/// Runs `job` at increasing internal precision until every output cap reaches
/// the target, then projects back.
pub(crate) fn with_guard<T>(
    params: &PadicParams,
    base_extra: i64,
    stage: &str,
    mut job: impl FnMut(&PadicParams) -> Result<(T, i64), WachError>,
    project: impl Fn(&T, &PadicParams) -> T,
) -> Result<T, WachError> {
    let target = params.prec_pi();
    let mut extra = base_extra.max(params.e());
    let mut last = 0;
    for _ in 0..4 {
        let ext = params.with_prec(target + extra);
        match job(&ext) {
            Ok((value, cap)) => {
                if cap >= target {
                    return Ok(project(&value, params));
                }
                last = cap;
            }
            Err(WachError::SeedSingular { .. }) => {}
            Err(e) => return Err(e),
        }
        extra *= 2;
    }
    Err(WachError::PrecisionExhausted {
        stage: stage.into(),
        detail: format!("best cap {last} below target {target}"),
    })
}

fn validate_seed_inputs(params: &PadicParams, k: i64, a_p: &PadicElt, n: usize) -> Result<(), WachError> {
    if k < 2 {
        return Err(WachError::InvalidInput(format!("weight k = {k} must be at least 2")));
    }
    if a_p.val().bound() < 1 {
        return Err(WachError::InvalidInput("a_p must have positive valuation".into()));
    }
    if n < 2 {
        return Err(WachError::InvalidInput("x-precision must be at least 2".into()));
    }
    if !a_p.params().same_ring(params) {
        return Err(PadicError::ParamMismatch.into());
    }
    Ok(())
}

/// Seed with `P` in companion form, solving for `G` order by order.
pub fn seed_companion(
    params: &PadicParams,
    k: i64,
    a_p: &PadicElt,
    chi_gamma: &BigInt,
    n: usize,
) -> Result<WachData, WachError> {
    validate_seed_inputs(params, k, a_p, n)?;
    let extra = params.e() * (4 * k + 16);
    let stage = "seed_companion";
    let g_mat = with_guard(
        params,
        extra,
        stage,
        |ext| {
            let actions = Actions::new(ext, n, chi_gamma)?;
            let a = a_p.reparam(ext).as_exact();
            let p_mat = companion_matrix(ext, k, &a, n);
            let (g, _) = gamma_solve(&p_mat, &MatrixSeries::identity(ext, n), 1, k, &actions)?;
            let cap = g.min_cap();
            Ok((g, cap))
        },
        |g, target| g.reparam(target),
    )?;
    Ok(WachData {
        params: params.clone(),
        k,
        a_p: a_p.clone(),
        p_mat: companion_matrix(params, k, a_p, n),
        g_mat,
        chi_gamma: PadicElt::from_int(params, chi_gamma.clone()),
        prec_x: n,
    })
}

/// Companion seed with `a_p = 0`.
pub fn seed_ap_zero(
    params: &PadicParams,
    k: i64,
    chi_gamma: &BigInt,
    n: usize,
) -> Result<WachData, WachError> {
    seed_companion(params, k, &PadicElt::zero(params), chi_gamma, n)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EltFile {
    pub digits: Vec<String>,
    pub cap: String,
}

type SeriesFile = Vec<EltFile>;
type MatrixFile = [[SeriesFile; 2]; 2];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WachFile {
    pub format_version: String,
    pub p: String,
    pub e: String,
    pub k: String,
    pub prec_pi: String,
    pub prec_x: String,
    pub chi_gamma: EltFile,
    pub a_p: EltFile,
    #[serde(rename = "P")]
    pub p_mat: MatrixFile,
    #[serde(rename = "G")]
    pub g_mat: MatrixFile,
}

pub fn elt_to_file(x: &PadicElt) -> EltFile {
    EltFile { digits: x.digits().iter().map(|d| d.to_string()).collect(), cap: x.cap().to_string() }
}

fn matrix_to_file(m: &MatrixSeries) -> MatrixFile {
    m.0.clone().map(|row| row.map(|s| s.coeffs().iter().map(elt_to_file).collect()))
}

impl WachData {
    pub fn to_file(&self) -> WachFile {
        WachFile {
            format_version: FORMAT_VERSION.into(),
            p: self.params.p().to_string(),
            e: self.params.e().to_string(),
            k: self.k.to_string(),
            prec_pi: self.params.prec_pi().to_string(),
            prec_x: self.prec_x.to_string(),
            chi_gamma: elt_to_file(&self.chi_gamma),
            a_p: elt_to_file(&self.a_p),
            p_mat: matrix_to_file(&self.p_mat),
            g_mat: matrix_to_file(&self.g_mat),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("serializable") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, WachError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|err| WachError::MalformedFile {
            position: format!("line {} column {}", err.line(), err.column()),
            reason: err.to_string(),
        })?;
        match value.get("format_version").and_then(|v| v.as_str()) {
            Some(FORMAT_VERSION) => {}
            Some(other) => {
                return Err(WachError::VersionMismatch {
                    found: other.into(),
                    expected: FORMAT_VERSION.into(),
                })
            }
            None => return Err(malformed("format_version", "missing or not a string")),
        }
        let file: WachFile = serde_json::from_value(value)
            .map_err(|err| malformed("document", &err.to_string()))?;
        Self::from_file(&file)
    }

    pub fn from_file(f: &WachFile) -> Result<Self, WachError> {
        let p = parse_big(&f.p, "p")?;
        let e = parse_i64(&f.e, "e")?;
        let prec_pi = parse_i64(&f.prec_pi, "prec_pi")?;
        let params = PadicParams::new(p, e, prec_pi).map_err(|err| malformed("p/e/prec_pi", &err.to_string()))?;
        let k = parse_i64(&f.k, "k")?;
        if k < 2 {
            return Err(malformed("k", "weight must be at least 2"));
        }
        let prec_x = parse_i64(&f.prec_x, "prec_x")?;
        if prec_x < 1 {
            return Err(malformed("prec_x", "must be positive"));
        }
        let n = prec_x as usize;
        let chi_gamma = parse_elt(&params, &f.chi_gamma, "chi_gamma")?;
        let a_p = parse_elt(&params, &f.a_p, "a_p")?;
        let p_mat = parse_matrix(&params, &f.p_mat, n, "P")?;
        let g_mat = parse_matrix(&params, &f.g_mat, n, "G")?;
        Ok(WachData { params, k, a_p, p_mat, g_mat, chi_gamma, prec_x: n })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), WachError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WachError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

fn malformed(position: &str, reason: &str) -> WachError {
    WachError::MalformedFile { position: position.into(), reason: reason.into() }
}

fn parse_big(s: &str, at: &str) -> Result<BigInt, WachError> {
    s.parse::<BigInt>().map_err(|_| malformed(at, &format!("not a base-10 integer: {s:?}")))
}

fn parse_i64(s: &str, at: &str) -> Result<i64, WachError> {
    s.parse::<i64>().map_err(|_| malformed(at, &format!("not a base-10 integer: {s:?}")))
}

fn parse_elt(params: &PadicParams, f: &EltFile, at: &str) -> Result<PadicElt, WachError> {
    if f.digits.len() != params.e() as usize {
        return Err(malformed(at, &format!("expected {} digits, found {}", params.e(), f.digits.len())));
    }
    let cap = parse_i64(&f.cap, &format!("{at}.cap"))?;
    if cap < 0 || cap > params.prec_pi() {
        return Err(malformed(&format!("{at}.cap"), "cap outside [0, prec_pi]"));
    }
    let mut digits = Vec::with_capacity(f.digits.len());
    for (i, d) in f.digits.iter().enumerate() {
        digits.push(parse_big(d, &format!("{at}.digits[{i}]"))?);
    }
    let x = PadicElt::from_digits(params, digits.clone(), cap);
    if x.digits() != digits.as_slice() {
        return Err(malformed(at, "digits are not reduced modulo their precision"));
    }
    Ok(x)
}

fn parse_matrix(
    params: &PadicParams,
    m: &MatrixFile,
    n: usize,
    at: &str,
) -> Result<MatrixSeries, WachError> {
    let mut entries: Vec<PadicSeries> = Vec::with_capacity(4);
    for (i, row) in m.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            let here = format!("{at}[{i}][{j}]");
            if s.len() != n {
                return Err(malformed(&here, &format!("expected {n} coefficients, found {}", s.len())));
            }
            let coeffs = s
                .iter()
                .enumerate()
                .map(|(t, c)| parse_elt(params, c, &format!("{here}[{t}]")))
                .collect::<Result<Vec<_>, _>>()?;
            entries.push(PadicSeries::from_coeffs(params, coeffs, n));
        }
    }
    let mut it = entries.into_iter();
    let mut next = || it.next().expect("four entries");
    Ok(MatrixSeries::new(next(), next(), next(), next()))
}

/// `p^(k-1)` as an element.
pub fn p_power_elt(params: &PadicParams, t: i64) -> PadicElt {
    if t <= 0 {
        return PadicElt::one(params);
    }
    PadicElt::from_int(params, params.p_pow(t))
}

/// Zero test for `a_p` used by seed dispatch.
pub fn is_zero_ap(a_p: &PadicElt) -> bool {
    a_p.digits().iter().all(|d| d.is_zero())
}
