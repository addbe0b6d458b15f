//! Trace-side deformation: `alpha`, the `H0` constructions, the `H`
//! recursion, gamma correction, the certified pipeline and the converse bound.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::padics::{hensel_root, newton_slopes, PadicElt, PadicError, PadicParams, Quadratic, Val};
use crate::series::{Actions, Mat2, MatrixSeries, SeriesError};
use crate::wach::{
    check_axioms, commutation_defect, elt_to_file, gamma_solve, p_power_elt, seed_ap_zero, seed_companion,
    AxiomReport, EltFile, WachData, WachError,
};

#[derive(Debug, Error)]
pub enum DeformError {
    #[error("chi(gamma) = {chi} is not a topological generator of Z_{p}^x")]
    NotAGenerator { p: BigInt, chi: BigInt },
    #[error("Newton polygon slopes are not distinct")]
    SlopesNotDistinct,
    #[error("valuation floor unreachable: v = {have}, need {need}")]
    ValuationFloorUnreachable { have: String, need: String },
    #[error("{stage} floor violated at index {index}: v = {val}, floor {floor}")]
    FloorViolated { stage: String, index: usize, val: String, floor: String },
    #[error("precision exhausted in {stage}: {detail}")]
    PrecisionExhausted { stage: String, detail: String },
    #[error("initial defect is not divisible by x^k (order {order})")]
    DefectNotDivisible { order: usize },
    #[error("Neumann series diverged at order {order}")]
    NeumannDivergence { order: usize },
    #[error("bound violated: v(a_p - a'_p) = {lhs} < {rhs}")]
    BoundViolated { lhs: String, rhs: String },
    #[error("precondition fails: {0}")]
    PreconditionFails(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{stage}: {source}")]
    InStage {
        stage: String,
        #[source]
        source: Box<DeformError>,
    },
    #[error(transparent)]
    Wach(#[from] WachError),
    #[error(transparent)]
    Padic(#[from] PadicError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

impl DeformError {
    /// Innermost error, past any stage labels.
    pub fn root(&self) -> &DeformError {
        match self {
            DeformError::InStage { source, .. } => source.root(),
            other => other,
        }
    }

    fn at(stage: &str) -> impl FnOnce(DeformError) -> DeformError + '_ {
        move |source| match source {
            DeformError::BoundViolated { .. } | DeformError::InStage { .. } => source,
            other => DeformError::InStage { stage: stage.into(), source: Box::new(other) },
        }
    }
}

/// `alpha(r) = sum_{j <= r} v(1 - chi^j)`, with the per-step valuations.
#[derive(Clone, Debug)]
pub struct AlphaTable {
    pub p: BigInt,
    pub chi_gamma: BigInt,
    /// `values[r] = alpha(r)` for `0 <= r <= r_max`.
    pub values: Vec<i64>,
    /// `steps[j - 1] = v(1 - chi^j)`.
    pub steps: Vec<i64>,
}

impl AlphaTable {
    pub fn get(&self, r: i64) -> i64 {
        self.values[r.max(0) as usize]
    }

    pub fn r_max(&self) -> i64 {
        self.values.len() as i64 - 1
    }
}

/// `sum_{n >= 1} floor(r / (p^(n-1) (p-1)))`.
pub fn alpha_floor(p: &BigInt, r: i64) -> i64 {
    let r = BigInt::from(r);
    let mut d = p - 1u32;
    let mut acc = BigInt::zero();
    while d <= r {
        acc += &r / &d;
        d *= p;
    }
    acc.to_i64().expect("small")
}

fn prime_factors(mut n: BigInt) -> Vec<BigInt> {
    let mut out = Vec::new();
    let mut q = BigInt::from(2);
    while &q * &q <= n {
        if (&n % &q).is_zero() {
            out.push(q.clone());
            while (&n % &q).is_zero() {
                n /= &q;
            }
        }
        q += 1;
    }
    if n > BigInt::one() {
        out.push(n);
    }
    out
}

/// `chi mod p` generates `(Z/p)^x` and `chi^(p-1) != 1 mod p^2`.
pub fn is_generator(p: &BigInt, chi: &BigInt) -> bool {
    let pm1 = p - 1u32;
    let c = chi.mod_floor(p);
    if c.is_zero() {
        return false;
    }
    for q in prime_factors(pm1.clone()) {
        if c.modpow(&(&pm1 / &q), p).is_one() {
            return false;
        }
    }
    let p2 = p * p;
    !chi.mod_floor(&p2).modpow(&pm1, &p2).is_one()
}

/// Smallest integer `>= 2` that is a primitive root modulo `p^2`.
pub fn default_chi(p: &BigInt) -> BigInt {
    let mut c = BigInt::from(2);
    while !is_generator(p, &c) {
        c += 1;
    }
    c
}

pub fn alpha(p: &BigInt, r_max: i64, chi: &BigInt) -> Result<AlphaTable, DeformError> {
    if !is_generator(p, chi) {
        return Err(DeformError::NotAGenerator { p: p.clone(), chi: chi.clone() });
    }
    let r_max = r_max.max(0);
    let mut depth = 3 + crate::padics::ilog(p, r_max.max(1));
    let mut steps = Vec::with_capacity(r_max as usize);
    let mut j = 1;
    while j <= r_max {
        let m = num_traits::pow(p.clone(), depth as usize);
        let x = (chi.modpow(&BigInt::from(j), &m) - 1u32).mod_floor(&m);
        if x.is_zero() {
            depth *= 2;
            continue;
        }
        steps.push(crate::padics::vp(&x, p));
        j += 1;
    }
    let mut values = vec![0];
    for s in &steps {
        values.push(values.last().unwrap() + s);
    }
    for (r, v) in values.iter().enumerate() {
        assert_eq!(*v, alpha_floor(p, r as i64), "alpha product and floor forms disagree at r = {r}");
    }
    Ok(AlphaTable { p: p.clone(), chi_gamma: chi.clone(), values, steps })
}

/// `m - alpha(k-1)`, defined when `m >= alpha(k-1)`.
pub fn converse_bound(k: i64, m: Ratio<i64>, table: &AlphaTable) -> Result<Ratio<i64>, DeformError> {
    let a = Ratio::from_integer(table.get(k - 1));
    if m < a {
        return Err(DeformError::PreconditionFails(format!("m = {m} < alpha(k-1) = {a}")));
    }
    Ok(m - a)
}

/// Converts a level in `(1/e)Z` to `pi`-units.
pub fn level_to_pi(m: Ratio<i64>, e: i64) -> Result<i64, DeformError> {
    let scaled = m * Ratio::from_integer(e);
    if !scaled.is_integer() {
        return Err(DeformError::InvalidInput(format!("level {m} is not in (1/{e})Z")));
    }
    Ok(scaled.to_integer())
}

#[derive(Clone, Debug)]
pub struct Diagonalization {
    pub y: Mat2,
    pub det_y: PadicElt,
    pub lambda: PadicElt,
    pub mu: PadicElt,
    pub delta: PadicElt,
}

fn eigenvector(p0: &Mat2, nu: &PadicElt) -> Result<[PadicElt; 2], DeformError> {
    let (a, b, c, d) = (p0.get(0, 0), p0.get(0, 1), p0.get(1, 0), p0.get(1, 1));
    let c1 = [b.clone(), nu - a];
    let c2 = [nu - d, c.clone()];
    let v = |x: &[PadicElt; 2]| x[0].val().min(x[1].val());
    let pick = if v(&c1).bound() <= v(&c2).bound() { c1 } else { c2 };
    let s = match v(&pick) {
        Val::Exact(s) => s,
        Val::AtLeast(_) => return Err(DeformError::SlopesNotDistinct),
    };
    let prim = [pick[0].div_pi_pow(s)?, pick[1].div_pi_pow(s)?];
    let lead = if prim[0].is_unit() { prim[0].clone() } else { prim[1].clone() };
    Ok([prim[0].div_unit(&lead)?, prim[1].div_unit(&lead)?])
}

/// Eigenbasis `Y` with `P0 Y = Y diag(lambda, mu)`.
pub fn diagonalize(p0: &Mat2) -> Result<Diagonalization, DeformError> {
    let params = p0.params().clone();
    let t = p0.trace();
    let d = p0.det();
    newton_slopes(&t, &d).map_err(|_| DeformError::SlopesNotDistinct)?;
    let f = Quadratic::monic(-&t, d.clone());
    let lambda = hensel_root(&f, &t)?;
    let mu = hensel_root(&f, &PadicElt::zero(&params))?;
    let vl = eigenvector(p0, &lambda)?;
    let vm = eigenvector(p0, &mu)?;
    let y = Mat2::new(vl[0].clone(), vm[0].clone(), vl[1].clone(), vm[1].clone());
    let diag = Mat2::new(lambda.clone(), PadicElt::zero(&params), PadicElt::zero(&params), mu.clone());
    if !(p0 * &y).eq_to_cap(&(&y * &diag)) {
        return Err(DeformError::PrecisionExhausted {
            stage: "diagonalize".into(),
            detail: "conjugation check failed at working precision".into(),
        });
    }
    let delta = &lambda - &mu;
    Ok(Diagonalization { det_y: y.det(), y, lambda, mu, delta })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum H0Path {
    Zero,
    Triangular,
    Eigenbasis,
}

fn is_companion(p0: &Mat2) -> bool {
    let params = p0.params();
    p0.get(0, 0).is_zero_at_cap() && p0.get(0, 1).eq_to_cap(&PadicElt::from_int(params, -1))
}

/// `H0` with `det(Id + H0) = 1`, `Tr(H0 P0) = eps` and entries of valuation `>= floor` (pi-units).
pub fn build_h0(p0: &Mat2, eps: &PadicElt, floor: i64) -> Result<(Mat2, H0Path), DeformError> {
    let params = p0.params().clone();
    let e = params.e();
    if eps.is_zero_at_cap() {
        if eps.cap() < floor {
            return Err(DeformError::PrecisionExhausted {
                stage: "build_h0".into(),
                detail: format!("eps known only to {}", Val::AtLeast(eps.cap()).render(e)),
            });
        }
        return Ok((Mat2::zero(&params), H0Path::Zero));
    }
    let ve = eps.val().bound();
    let unreachable = |need: i64| DeformError::ValuationFloorUnreachable {
        have: Val::Exact(ve).render(e),
        need: Val::Exact(need).render(e),
    };
    if is_companion(p0) {
        if ve < floor {
            return Err(unreachable(floor));
        }
        let z = PadicElt::zero(&params);
        return Ok((Mat2::new(z.clone(), z.clone(), -eps, z), H0Path::Triangular));
    }
    let dz = diagonalize(p0)?;
    let vd = dz.delta.val().bound();
    if ve < 2 * vd + floor {
        return Err(unreachable(2 * vd + floor));
    }
    let f = Quadratic { c2: dz.lambda.clone(), c1: &dz.delta - eps, c0: -eps };
    let a = hensel_root(&f, &PadicElt::zero(&params))?;
    let b = (-&a).div_unit(&(&PadicElt::one(&params) + &a))?;
    let z = PadicElt::zero(&params);
    let diag = Mat2::new(a, z.clone(), z, b);
    let num = &(&dz.y * &diag) * &dz.y.adj();
    let h0 = num.try_map(|x| x.div_exact(&dz.det_y))?;
    Ok((h0, H0Path::Eigenbasis))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FloorEntry {
    pub index: usize,
    pub val: String,
    /// False when `val` is only a lower bound set by the precision cap.
    pub exact: bool,
    pub floor: String,
    pub ok: bool,
}

fn floor_entry(index: usize, v: Val, floor: i64, e: i64) -> FloorEntry {
    FloorEntry { index, val: v.render(e), exact: v.is_exact(), floor: Val::Exact(floor).render(e), ok: v.bound() >= floor }
}

/// Lifts `H0` to `H` of degree `< k` with `HG = G gamma(H) mod x^k`.
///
/// Returns `H` and `v(H_r)` against the floor `alpha(k-1) - alpha(r) + m`.
pub fn extend_h(
    h0: &Mat2,
    g: &MatrixSeries,
    k: i64,
    m_pi: i64,
    table: &AlphaTable,
    actions: &Actions,
) -> Result<(MatrixSeries, Vec<FloorEntry>), DeformError> {
    let params = g.params().clone();
    let e = params.e();
    let n = g.prec_x();
    let kk = (k as usize).min(n);
    let floor = |r: usize| e * (table.get(k - 1) - table.get(r as i64)) + m_pi;
    let mut hs: Vec<Mat2> = vec![h0.clone()];
    let mut gamma_h: Vec<Mat2> = vec![h0.clone()];
    let mut log = vec![floor_entry(0, h0.min_val(), floor(0), e)];
    if !log[0].ok {
        return Err(DeformError::FloorViolated {
            stage: "extend_h".into(),
            index: 0,
            val: log[0].val.clone(),
            floor: log[0].floor.clone(),
        });
    }
    let gpow = |i: usize, r: usize| actions.gamma.power(i).coeff(r).clone();
    for r in 1..kk {
        let mut rhs = Mat2::zero(&params);
        for (i, h) in hs.iter().enumerate() {
            rhs = &rhs + &h.scale(&gpow(i, r));
        }
        for (h, gh) in gamma_h.iter().enumerate() {
            rhs = &rhs + &(&g.coeff(r - h) * gh);
        }
        for (i, h) in hs.iter().enumerate() {
            rhs = &rhs - &(h * &g.coeff(r - i));
        }
        let chi_r = PadicElt::from_int(&params, actions.chi.pow(r as u32));
        let c = &PadicElt::one(&params) - &chi_r;
        let fl = floor(r);
        let hr = match rhs.try_map(|x| x.div_exact(&c)) {
            Ok(h) => h,
            Err(_) => {
                let v = rhs.min_val().bound() - c.val().bound();
                return Err(DeformError::FloorViolated {
                    stage: "extend_h".into(),
                    index: r,
                    val: Val::Exact(v).render(e),
                    floor: Val::Exact(fl).render(e),
                });
            }
        };
        let v = hr.min_val();
        let entry = floor_entry(r, v, fl, e);
        if !entry.ok {
            if v.is_exact() {
                return Err(DeformError::FloorViolated {
                    stage: "extend_h".into(),
                    index: r,
                    val: entry.val,
                    floor: entry.floor,
                });
            }
            return Err(DeformError::PrecisionExhausted {
                stage: "extend_h".into(),
                detail: format!("H_{r} known only to {}", entry.val),
            });
        }
        log.push(entry);
        hs.push(hr);
        let mut gh = Mat2::zero(&params);
        for (i, h) in hs.iter().enumerate() {
            gh = &gh + &h.scale(&gpow(i, r));
        }
        gamma_h.push(gh);
    }
    let mut h = MatrixSeries::zero(&params, n);
    for (r, m) in hs.iter().enumerate() {
        h.set_coeff(r, m);
    }
    let check = &(&h * g) - &(g * &h.apply(&actions.gamma));
    if !check.truncate_deg(kk).min_val().is_zero_at_cap() {
        return Err(DeformError::PrecisionExhausted {
            stage: "extend_h".into(),
            detail: "HG - G gamma(H) does not vanish mod x^k at working precision".into(),
        });
    }
    Ok((h, log))
}

/// Corrects `G` to `G'` with `P' phi(G') = G' gamma(P')`, adding `x^j S_j` for `j >= k`.
pub fn correct_gamma(
    pp: &MatrixSeries,
    g: &MatrixSeries,
    k: i64,
    m_pi: i64,
    actions: &Actions,
) -> Result<(MatrixSeries, Vec<FloorEntry>), DeformError> {
    let e = pp.params().e();
    let n = pp.prec_x();
    let defect = commutation_defect(pp, g, actions);
    for j in 0..(k as usize).min(n) {
        if !defect.coeff(j).min_val().is_zero_at_cap() {
            return Err(DeformError::DefectNotDivisible { order: j });
        }
    }
    let (g_new, steps) = gamma_solve(pp, g, k as usize, k, actions).map_err(|err| match err {
        WachError::NeumannDivergence { order } => DeformError::NeumannDivergence { order },
        WachError::SeedNonIntegral { order, .. } => DeformError::DefectNotDivisible { order },
        other => DeformError::Wach(other),
    })?;
    let log = steps.iter().map(|(j, s)| floor_entry(*j, s.min_val(), m_pi, e)).collect();
    Ok((g_new, log))
}

#[derive(Clone, Debug, Serialize)]
pub struct CertInputs {
    pub p: String,
    pub e: i64,
    pub k: i64,
    pub a_p: EltFile,
    pub a_p_new: EltFile,
    pub m: String,
    pub prec_pi: i64,
    pub prec_x: usize,
    pub chi_gamma: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub v_diff: String,
    pub v_ap: String,
    pub alpha_k_minus_1: i64,
    pub required: String,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdicts {
    pub p_congruent: bool,
    pub g_congruent: bool,
    pub min_val_p_diff: String,
    pub min_val_g_diff: String,
    pub charpoly_ok: bool,
    pub h_floors_ok: bool,
    pub iteration_floors_ok: bool,
    pub axioms_ok: bool,
    pub axioms: AxiomReport,
}

/// Audit trail of one deformation run.
#[derive(Clone, Debug, Serialize)]
pub struct DeformCertificate {
    pub format_version: String,
    pub inputs: CertInputs,
    pub bound_check: BoundCheck,
    pub h0_path: H0Path,
    pub h_valuations: Vec<FloorEntry>,
    pub iteration_log: Vec<FloorEntry>,
    pub verdicts: Verdicts,
    pub pass: bool,
    pub output: Option<String>,
    pub notes: Vec<String>,
}

impl DeformCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

/// Working precision demanded of a deformation at level `m_pi`.
pub fn precision_budget(e: i64, m_pi: i64, k: i64, alpha_km1: i64) -> i64 {
    m_pi + e * (2 * alpha_km1 + k + 8)
}

/// Budget plus room for `v(a_p)` and for the loss of about `e/(p-1)` per
/// x-order in the gamma correction.
pub fn recommended_prec(p: &BigInt, e: i64, k: i64, v_ap_pi: i64, m_pi: i64, n: usize, alpha_km1: i64) -> i64 {
    let pm1 = (p - 1u32).to_i64().unwrap_or(i64::MAX);
    precision_budget(e, m_pi, k, alpha_km1) + 2 * v_ap_pi + 8 * e + e * (n as i64 + pm1 - 1) / pm1
}

struct Deformed {
    p_new: MatrixSeries,
    g_new: MatrixSeries,
    path: H0Path,
    h_log: Vec<FloorEntry>,
    s_log: Vec<FloorEntry>,
}

fn deform_core(
    p_mat: &MatrixSeries,
    g_mat: &MatrixSeries,
    k: i64,
    eps: &PadicElt,
    m_pi: i64,
    table: &AlphaTable,
    actions: &Actions,
) -> Result<Deformed, DeformError> {
    let params = p_mat.params().clone();
    let e = params.e();
    let floor = e * table.get(k - 1) + m_pi;
    let (h0, path) = build_h0(&p_mat.eval0(), eps, floor).map_err(DeformError::at("build_h0"))?;
    let (h, h_log) = extend_h(&h0, g_mat, k, m_pi, table, actions).map_err(DeformError::at("extend_h"))?;
    let id = MatrixSeries::identity(&params, p_mat.prec_x());
    let p_new = &(&id + &h) * p_mat;
    let (g_new, s_log) =
        correct_gamma(&p_new, g_mat, k, m_pi, actions).map_err(DeformError::at("correct_gamma"))?;
    Ok(Deformed { p_new, g_new, path, h_log, s_log })
}

fn guard_for(params: &PadicParams, k: i64) -> PadicParams {
    params.with_prec(params.prec_pi() + params.e() * (k + 8))
}

/// Deforms `W` from `a_p` to `a'_p` at level `m`, refusing outside
/// `v(a_p - a'_p) >= 2 v(a_p) + alpha(k-1) + m`.
pub fn deform_trace(
    w: &WachData,
    a_new: &PadicElt,
    m: Ratio<i64>,
) -> Result<(WachData, DeformCertificate), DeformError> {
    let params = w.params.clone();
    let e = params.e();
    let k = w.k;
    let m_pi = level_to_pi(m, e)?;
    if m_pi < 1 {
        return Err(DeformError::InvalidInput(format!("level m = {m} must be positive")));
    }
    if !a_new.params().same_ring(&params) {
        return Err(PadicError::ParamMismatch.into());
    }
    let a_new = a_new.reparam(&params);
    let chi = w.chi_int();
    let table = alpha(params.p(), k - 1, &chi)?;
    let ak = table.get(k - 1);

    let v_ap = w.a_p.val();
    let eps = &a_new - &w.a_p;
    let v_diff = eps.val();
    let required = match v_ap {
        Val::Exact(v) => 2 * v + e * ak + m_pi,
        Val::AtLeast(_) => {
            return Err(DeformError::BoundViolated { lhs: v_diff.render(e), rhs: "infinity (a_p = 0)".into() })
        }
    };
    if v_diff.bound() < required {
        if v_diff.is_exact() {
            return Err(DeformError::BoundViolated {
                lhs: v_diff.render(e),
                rhs: Val::Exact(required).render(e),
            });
        }
        return Err(DeformError::PrecisionExhausted {
            stage: "bound_check".into(),
            detail: format!("a_p - a'_p known only to {}", v_diff.render(e)),
        });
    }
    let budget = precision_budget(e, m_pi, k, ak);
    if params.prec_pi() < budget {
        return Err(DeformError::PrecisionExhausted {
            stage: "budget".into(),
            detail: format!("prec_pi = {} below budget {budget}", params.prec_pi()),
        });
    }

    let input_report = check_axioms(w)?;
    if !input_report.pass {
        return Err(DeformError::InvalidInput("input module fails check_axioms".into()));
    }

    let ext = guard_for(&params, k);
    let actions = Actions::new(&ext, w.prec_x, &chi)?;
    let d = deform_core(
        &w.p_mat.reparam(&ext),
        &w.g_mat.reparam(&ext),
        k,
        &eps.reparam(&ext),
        m_pi,
        &table,
        &actions,
    )?;
    let w_new = WachData {
        params: params.clone(),
        k,
        a_p: a_new.clone(),
        p_mat: d.p_new.reparam(&params),
        g_mat: d.g_new.reparam(&params),
        chi_gamma: w.chi_gamma.clone(),
        prec_x: w.prec_x,
    };

    let dp = (&w_new.p_mat - &w.p_mat).min_val();
    let dg = (&w_new.g_mat - &w.g_mat).min_val();
    let p0 = w_new.p_mat.eval0();
    let charpoly_ok =
        p0.trace().eq_to_cap(&a_new) && p0.det().eq_to_cap(&p_power_elt(&params, k - 1));
    let axioms = check_axioms(&w_new)?;
    let h_floors_ok = d.h_log.iter().all(|x| x.ok);
    let iteration_floors_ok = d.s_log.iter().all(|x| x.ok);
    let verdicts = Verdicts {
        p_congruent: dp.bound() >= m_pi,
        g_congruent: dg.bound() >= m_pi,
        min_val_p_diff: dp.render(e),
        min_val_g_diff: dg.render(e),
        charpoly_ok,
        h_floors_ok,
        iteration_floors_ok,
        axioms_ok: axioms.pass,
        axioms,
    };
    let pass = verdicts.p_congruent
        && verdicts.g_congruent
        && verdicts.charpoly_ok
        && verdicts.h_floors_ok
        && verdicts.iteration_floors_ok
        && verdicts.axioms_ok;
    if !pass {
        let starved = |v: &Val| !v.is_exact() && v.bound() < m_pi;
        let log_starved = d.s_log.iter().chain(d.h_log.iter()).any(|x| !x.ok && !x.exact);
        let defect = verdicts.axioms.commutation_defect_val;
        if starved(&dp) || starved(&dg) || log_starved || (!defect.is_exact() && defect.bound() < m_pi) {
            return Err(DeformError::PrecisionExhausted {
                stage: "verdicts".into(),
                detail: format!(
                    "caps fell below the level over x-precision {} (certified defect cap {}); raise prec_pi",
                    w.prec_x,
                    defect.render(e)
                ),
            });
        }
    }
    let cert = DeformCertificate {
        format_version: crate::wach::FORMAT_VERSION.into(),
        inputs: CertInputs {
            p: params.p().to_string(),
            e,
            k,
            a_p: elt_to_file(&w.a_p),
            a_p_new: elt_to_file(&a_new),
            m: m.to_string(),
            prec_pi: params.prec_pi(),
            prec_x: w.prec_x,
            chi_gamma: chi.to_string(),
        },
        bound_check: BoundCheck {
            v_diff: v_diff.render(e),
            v_ap: v_ap.render(e),
            alpha_k_minus_1: ak,
            required: Val::Exact(required).render(e),
            ok: true,
        },
        h0_path: d.path,
        h_valuations: d.h_log,
        iteration_log: d.s_log,
        verdicts,
        pass,
        output: None,
        notes: vec![format!(
            "congruences certified on the matrix side, in the given basis, to x-precision {}",
            w.prec_x
        )],
    };
    Ok((w_new, cert))
}

/// Builds a module for `a_p` by deforming the `a_p = 0` companion seed with the
/// triangular `H0`; needs `v(a_p) >= alpha(k-1)`.
pub fn seed_from_zero(
    params: &PadicParams,
    k: i64,
    a_p: &PadicElt,
    chi_gamma: &BigInt,
    n: usize,
) -> Result<WachData, DeformError> {
    let e = params.e();
    let table = alpha(params.p(), k - 1, chi_gamma)?;
    let ak = e * table.get(k - 1);
    let va = match a_p.val() {
        Val::Exact(v) => v,
        Val::AtLeast(_) => return Ok(seed_ap_zero(params, k, chi_gamma, n)?),
    };
    if va < ak {
        return Err(DeformError::PreconditionFails(format!(
            "v(a_p) = {} < alpha(k-1) = {}",
            Val::Exact(va).render(e),
            table.get(k - 1)
        )));
    }
    let m0 = va - ak;
    let target = params.prec_pi();
    let mut extra = e * (2 * k + 16);
    let mut best = 0;
    for _ in 0..4 {
        let ext = params.with_prec(target + extra);
        let w0 = seed_ap_zero(&ext, k, chi_gamma, n)?;
        let actions = Actions::new(&ext, n, chi_gamma)?;
        let a = a_p.reparam(&ext).as_exact();
        let d = deform_core(&w0.p_mat, &w0.g_mat, k, &a, m0, &table, &actions)
            .map_err(DeformError::at("seed_from_zero"))?;
        let cap = d.p_new.min_cap().min(d.g_new.min_cap());
        if cap >= target {
            return Ok(WachData {
                params: params.clone(),
                k,
                a_p: a_p.clone(),
                p_mat: d.p_new.reparam(params),
                g_mat: d.g_new.reparam(params),
                chi_gamma: PadicElt::from_int(params, chi_gamma.clone()),
                prec_x: n,
            });
        }
        best = cap;
        extra *= 2;
    }
    Err(DeformError::PrecisionExhausted {
        stage: "seed_from_zero".into(),
        detail: format!("best cap {best} below target {target}"),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMethod {
    Companion,
    ApZero,
    FromZero,
}

/// Companion solve first; on non-integrality, the deformation-from-zero route.
pub fn seed_auto(
    params: &PadicParams,
    k: i64,
    a_p: &PadicElt,
    chi_gamma: &BigInt,
    n: usize,
) -> Result<(WachData, SeedMethod), DeformError> {
    if crate::wach::is_zero_ap(a_p) {
        return Ok((seed_ap_zero(params, k, chi_gamma, n)?, SeedMethod::ApZero));
    }
    match seed_companion(params, k, a_p, chi_gamma, n) {
        Ok(w) => Ok((w, SeedMethod::Companion)),
        Err(WachError::SeedNonIntegral { order, val }) => match seed_from_zero(params, k, a_p, chi_gamma, n) {
            Ok(w) => Ok((w, SeedMethod::FromZero)),
            Err(DeformError::PreconditionFails(why)) => Err(DeformError::Wach(WachError::SeedNonIntegral {
                order,
                val: format!("{val}; deformation from a_p = 0 unavailable: {why}"),
            })),
            Err(other) => Err(other),
        },
        Err(other) => Err(other.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::PadicSeries;

    fn r3(prec: i64) -> PadicParams {
        PadicParams::new(3, 1, prec).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let t = alpha(&3.into(), 6, &2.into()).unwrap();
        assert_eq!(t.get(2), 1);
        assert_eq!(t.get(6), 4);
        assert_eq!(t.steps, vec![0, 1, 0, 1, 0, 2]);
        let t5 = alpha(&5.into(), 20, &2.into()).unwrap();
        assert_eq!(t5.get(20), 6);
        assert_eq!(alpha_floor(&3.into(), 16), 10);
        assert!(matches!(alpha(&5.into(), 4, &BigInt::from(4)), Err(DeformError::NotAGenerator { .. })));
        assert!(!is_generator(&3.into(), &10.into()));
        assert_eq!(default_chi(&3.into()), 2.into());
        assert_eq!(default_chi(&5.into()), 2.into());
        assert_eq!(default_chi(&7.into()), 3.into());
    }

    #[test]
    fn converse_examples() {
        let t = alpha(&3.into(), 10, &2.into()).unwrap();
        assert_eq!(converse_bound(4, Ratio::from_integer(3), &t).unwrap(), Ratio::from_integer(2));
        assert_eq!(converse_bound(4, Ratio::from_integer(1), &t).unwrap(), Ratio::from_integer(0));
        assert_eq!(converse_bound(2, Ratio::from_integer(1), &t).unwrap(), Ratio::from_integer(1));
        assert!(converse_bound(7, Ratio::from_integer(1), &t).is_err());
    }

    #[test]
    fn diagonalize_examples() {
        let p = r3(20);
        let d = diagonalize(&Mat2::from_ints(&p, [[1, 0], [0, 3]])).unwrap();
        assert!(d.y.eq_to_cap(&Mat2::identity(&p)));
        assert!(d.delta.eq_to_cap(&PadicElt::from_int(&p, -2)));
        let p0 = Mat2::from_ints(&p, [[0, -1], [27, 3]]);
        let d = diagonalize(&p0).unwrap();
        assert_eq!(d.lambda.val(), Val::Exact(1));
        assert_eq!(d.mu.val(), Val::Exact(2));
        assert!(matches!(diagonalize(&Mat2::identity(&p)), Err(DeformError::SlopesNotDistinct)));
    }

    #[test]
    fn h0_examples() {
        let p = r3(20);
        let p0 = Mat2::from_ints(&p, [[0, -1], [27, 3]]);
        let eps = PadicElt::from_int(&p, 81);
        let (h0, path) = build_h0(&p0, &eps, 2).unwrap();
        assert_eq!(path, H0Path::Triangular);
        assert!(h0.eq_to_cap(&Mat2::from_ints(&p, [[0, 0], [-81, 0]])));
        assert!((&h0 * &p0).trace().eq_to_cap(&eps));
        assert!((&Mat2::identity(&p) + &h0).det().eq_to_cap(&PadicElt::one(&p)));
        let (z, path) = build_h0(&p0, &PadicElt::zero(&p), 2).unwrap();
        assert_eq!(path, H0Path::Zero);
        assert!(z.min_val().is_zero_at_cap());

        let p3 = r3(3);
        let dg = Mat2::from_ints(&p3, [[1, 0], [0, 3]]);
        let (h0, path) = build_h0(&dg, &PadicElt::from_int(&p3, 9), 0).unwrap();
        assert_eq!(path, H0Path::Eigenbasis);
        assert!(h0.with_cap_eq(&Mat2::from_ints(&p3, [[9, 0], [0, 18]])));
    }

    trait CapEq {
        fn with_cap_eq(&self, other: &Mat2) -> bool;
    }
    impl CapEq for Mat2 {
        fn with_cap_eq(&self, other: &Mat2) -> bool {
            self.eq_to_cap(other)
        }
    }

    #[test]
    fn extend_h_examples() {
        let p = r3(20);
        let n = 8;
        let actions = Actions::new(&p, n, &2.into()).unwrap();
        let t = alpha(&3.into(), 4, &2.into()).unwrap();
        let c = 27;
        let h0 = Mat2::from_ints(&p, [[0, 0], [c, 0]]);
        let mut g = MatrixSeries::identity(&p, n);
        g.set_coeff(1, &Mat2::from_ints(&p, [[0, 1], [0, 0]]));
        let (h, _) = extend_h(&h0, &g, 2, 1, &t, &actions).unwrap();
        assert!(h.coeff(1).eq_to_cap(&Mat2::from_ints(&p, [[-c, 0], [0, c]])));
        let (h, _) = extend_h(&h0, &MatrixSeries::identity(&p, n), 4, 1, &t, &actions).unwrap();
        assert!(h.eq_to_cap(&MatrixSeries::constant(&h0, n)));
        let (h, _) = extend_h(&Mat2::zero(&p), &g, 4, 1, &t, &actions).unwrap();
        assert!(h.min_val().is_zero_at_cap());
    }

    #[test]
    fn correct_gamma_identity_when_defect_is_zero() {
        let p = r3(30);
        let w = seed_companion(&p, 2, &PadicElt::from_int(&p, 3), &2.into(), 12).unwrap();
        let actions = w.actions().unwrap();
        let (g2, log) = correct_gamma(&w.p_mat, &w.g_mat, 2, 1, &actions).unwrap();
        assert!(g2.eq_to_cap(&w.g_mat));
        assert!(log.iter().all(|x| x.ok));
    }

    #[test]
    fn single_correction_step_kills_order_k() {
        let p = r3(40);
        let n = 12;
        let k = 2;
        let w = seed_companion(&p, k, &PadicElt::from_int(&p, 3), &2.into(), n).unwrap();
        let actions = w.actions().unwrap();
        let t = alpha(&3.into(), k, &2.into()).unwrap();
        let eps = PadicElt::from_int(&p, 27);
        let (h0, _) = build_h0(&w.p_mat.eval0(), &eps, 1).unwrap();
        let (h, _) = extend_h(&h0, &w.g_mat, k, 1, &t, &actions).unwrap();
        let pp = &(&MatrixSeries::identity(&p, n) + &h) * &w.p_mat;
        let d = commutation_defect(&pp, &w.g_mat, &actions);
        let p0 = pp.eval0();
        let u0 = p0.det().div_pi_pow(k - 1).unwrap();
        let s = crate::wach::solve_sylvester_neumann(&p0, &u0, k, k as usize, &d.coeff(k as usize)).unwrap();
        let mut g2 = w.g_mat.clone();
        g2.set_coeff(k as usize, &(&w.g_mat.coeff(k as usize) + &s));
        let d2 = commutation_defect(&pp, &g2, &actions);
        assert!(!d.coeff(k as usize).min_val().is_zero_at_cap());
        assert!(d2.coeff(k as usize).min_val().is_zero_at_cap());
        let _ = PadicSeries::zero(&p, n);
    }

    #[test]
    fn theorem_a_desk_run() {
        let p = r3(40);
        let a = PadicElt::from_int(&p, 3);
        let (w, method) = seed_auto(&p, 4, &a, &2.into(), 32).unwrap();
        assert_eq!(method, SeedMethod::FromZero);
        let (w2, cert) = deform_trace(&w, &PadicElt::from_int(&p, 84), Ratio::from_integer(1)).unwrap();
        assert!(cert.pass, "{}", cert.to_json());
        assert!(w2.p_mat.eval0().trace().eq_to_cap(&PadicElt::from_int(&p, 84)));
        let err = deform_trace(&w, &PadicElt::from_int(&p, 30), Ratio::from_integer(1)).unwrap_err();
        assert!(matches!(err, DeformError::BoundViolated { .. }), "{err}");
    }

    #[test]
    fn identity_deformation() {
        let p = r3(40);
        let a = PadicElt::from_int(&p, 3);
        let w = seed_companion(&p, 2, &a, &2.into(), 16).unwrap();
        let (w2, cert) = deform_trace(&w, &a, Ratio::from_integer(1)).unwrap();
        assert!(cert.pass);
        assert_eq!(cert.h0_path, H0Path::Zero);
        assert!(w2.p_mat.eq_to_cap(&w.p_mat));
        assert!(w2.g_mat.eq_to_cap(&w.g_mat));
    }

    #[test]
    fn ap_zero_seed_is_refused() {
        let p = r3(40);
        let w = seed_ap_zero(&p, 3, &2.into(), 16).unwrap();
        let err = deform_trace(&w, &PadicElt::from_int(&p, 81), Ratio::from_integer(1)).unwrap_err();
        assert!(matches!(err, DeformError::BoundViolated { .. }));
    }
}
