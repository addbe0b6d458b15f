use std::path::Path;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use wach_core::deform::{alpha, converse_bound, deform_trace, level_to_pi};
use wach_core::padics::{PadicElt, Val};

use crate::{out_dir, parse, seed, write, CliError, Ring};

#[derive(Clone, Debug, Serialize)]
pub struct ScanPlan {
    pub p: String,
    pub e: i64,
    pub k_range: (i64, i64),
    pub ap: Vec<String>,
    pub m: String,
    pub prec_pi: Option<String>,
    pub prec_x: Option<String>,
    pub chi_gamma: Option<String>,
    pub out: String,
    pub jobs: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct Row {
    k: i64,
    a_p: String,
    #[serde(rename = "a'_p")]
    a_p_new: String,
    m: String,
    bound_ok: String,
    cert_pass: String,
    min_defect_val: String,
    converse_threshold: String,
    status: String,
}

fn unit_for(seed: u64, index: usize, p: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index as u64);
    loop {
        let u: u64 = rng.gen_range(1..p * p * p);
        if !u.is_multiple_of(p) {
            return u;
        }
    }
}

fn point(plan: &ScanPlan, ring: &Ring, index: usize, k: i64, ap: &str) -> Row {
    let mut row = Row {
        k,
        a_p: ap.to_string(),
        a_p_new: String::new(),
        m: plan.m.clone(),
        bound_ok: String::new(),
        cert_pass: String::new(),
        min_defect_val: String::new(),
        converse_threshold: String::new(),
        status: String::new(),
    };
    if let Err(err) = fill(plan, ring, index, k, ap, &mut row) {
        row.status = format!("{}: {err}", err.kind());
    }
    row
}

fn fill(plan: &ScanPlan, ring: &Ring, index: usize, k: i64, ap: &str, row: &mut Row) -> Result<(), CliError> {
    let m = parse::ratio_i64(&plan.m)?;
    let setup = ring.setup(k, ap, m)?;
    let params = &setup.params;
    let e = params.e();
    let a = parse::element(params, ap)?;
    let table = alpha(params.p(), k - 1, &setup.chi)?;
    row.converse_threshold = match converse_bound(k, m, &table) {
        Ok(t) => t.to_string(),
        Err(_) => "n/a".into(),
    };
    let required = match a.val() {
        Val::Exact(v) => 2 * v + e * table.get(k - 1) + level_to_pi(m, e)?,
        Val::AtLeast(_) => {
            row.a_p_new = parse::render(&a);
            row.bound_ok = "false".into();
            row.status = "refused: a_p = 0".into();
            return Ok(());
        }
    };
    let p_small = params.p().to_u64().ok_or_else(|| CliError::Usage("p too large for scan".into()))?;
    let u = PadicElt::from_int(params, BigInt::from(unit_for(plan.seed, index, p_small)));
    let a_new = &a + &u.mul_pi_pow(required);
    row.a_p_new = parse::render(&a_new);
    row.bound_ok = "true".into();
    let (w, _) = seed(&setup, k, ap)?;
    let (_, cert) = deform_trace(&w, &a_new, m)?;
    row.cert_pass = cert.pass.to_string();
    row.min_defect_val = cert.verdicts.axioms.commutation_defect_val.render(e);
    row.status = if cert.pass { "ok" } else { "fail" }.into();
    Ok(())
}

pub fn run(plan: &ScanPlan, ring: &Ring, out: &Path) -> Result<u8, CliError> {
    let mut grid = Vec::new();
    for k in plan.k_range.0..=plan.k_range.1 {
        for a in &plan.ap {
            grid.push((k, a.clone()));
        }
    }
    if grid.is_empty() {
        return Err(CliError::Usage("empty scan grid".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let rows: Vec<Row> = pool.install(|| {
        grid.par_iter().enumerate().map(|(i, (k, a))| point(plan, ring, i, *k, a)).collect()
    });

    out_dir(out)?;
    write(&out.join("plan.json"), &(serde_json::to_string_pretty(plan).expect("serializable") + "\n"))?;
    let mut csv = csv::Writer::from_path(out.join("results.csv"))?;
    for r in &rows {
        csv.serialize(r)?;
    }
    csv.flush().map_err(|source| CliError::Io { context: "writing results.csv".into(), source })?;

    let passed = rows.iter().filter(|r| r.status == "ok").count();
    println!("scan: {} points, {} certified, {} not", rows.len(), passed, rows.len() - passed);
    Ok(if passed == rows.len() { 0 } else { 1 })
}
