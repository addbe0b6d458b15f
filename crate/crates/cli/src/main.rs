//! `wachcert`: seed, verify, deform and scan Wach-module data from the command line.

mod parse;
mod scan;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_rational::Ratio;
use thiserror::Error;
use wach_core::deform::{self, alpha, default_chi, deform_trace, seed_auto, DeformError};
use wach_core::padics::{PadicError, PadicParams, Val};
use wach_core::trianguline::{self, TriError};
use wach_core::wach::{check_axioms, WachData, WachError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error(transparent)]
    Tri(#[from] TriError),
    #[error(transparent)]
    Wach(#[from] WachError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

fn wach_code(e: &WachError) -> u8 {
    match e {
        WachError::PrecisionExhausted { .. } => 3,
        WachError::SeedSingular { .. } | WachError::SeedNonIntegral { .. } => 4,
        WachError::Io(_) | WachError::MalformedFile { .. } | WachError::VersionMismatch { .. } => 5,
        _ => 1,
    }
}

fn deform_code(e: &DeformError) -> u8 {
    match e.root() {
        DeformError::BoundViolated { .. } => 2,
        DeformError::PrecisionExhausted { .. } => 3,
        DeformError::Wach(w) => wach_code(w),
        _ => 1,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Padic(_) => 1,
            CliError::Io { .. } | CliError::Csv(_) => 5,
            CliError::Deform(e) => deform_code(e),
            CliError::Tri(TriError::StarFails { .. }) | CliError::Tri(TriError::NonpositiveValuation) => 2,
            CliError::Tri(TriError::Deform(e)) => deform_code(e),
            CliError::Tri(_) => 1,
            CliError::Wach(e) => wach_code(e),
        }
    }

    /// Short tag for tabular output.
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "refused",
            3 => "precision",
            4 => "seed",
            5 => "io",
            _ => "error",
        }
    }
}

#[derive(Parser)]
#[command(name = "wachcert", version, about = "Congruence certificates for Wach modules of crystalline representations")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Ring {
    /// Odd prime.
    #[arg(long)]
    p: String,
    /// Ramification index of the coefficient field.
    #[arg(long, default_value = "1")]
    e: String,
    /// Working precision in powers of the uniformizer.
    #[arg(long = "prec-pi")]
    prec_pi: Option<String>,
    /// Power-series truncation order in x.
    #[arg(long = "prec-x")]
    prec_x: Option<String>,
    /// Integer value of the cyclotomic character at gamma.
    #[arg(long = "chi-gamma")]
    chi_gamma: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Builds a Wach module for (k, a_p) and writes it as JSON.
    Seed {
        #[command(flatten)]
        ring: Ring,
        #[arg(long)]
        k: String,
        #[arg(long)]
        ap: String,
        #[arg(long, default_value = "1")]
        m: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Checks the Wach-module axioms of a stored module.
    Verify {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deforms a_p to a'_p and certifies the congruence mod p^m.
    Deform {
        #[command(flatten)]
        ring: Ring,
        #[arg(long)]
        k: String,
        #[arg(long)]
        ap: String,
        #[arg(long = "ap-new")]
        ap_new: String,
        #[arg(long, default_value = "1")]
        m: String,
        /// Directory receiving certificate.json and module.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints alpha(r).
    Alpha {
        #[arg(long)]
        p: String,
        #[arg(long)]
        r: String,
        #[arg(long = "chi-gamma")]
        chi_gamma: Option<String>,
    },
    /// Evaluates psi_alpha(s) = alpha^s in Z_p.
    Psi {
        #[arg(long)]
        p: String,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        s: String,
        #[arg(long = "prec-pi", default_value = "20")]
        prec_pi: String,
        /// Also bound the coefficients c_n for n up to this order.
        #[arg(long)]
        coeffs: Option<String>,
    },
    /// Smallest weight satisfying the weight hypothesis.
    Star {
        #[arg(long)]
        p: String,
        #[arg(long = "v-ap")]
        v_ap: String,
        #[arg(long, default_value = "1")]
        m: String,
    },
    /// Runs the first weight-side reduction a_p -> a_p + p^(k-1)/a_p.
    Weightstep {
        #[command(flatten)]
        ring: Ring,
        #[arg(long)]
        k: String,
        #[arg(long)]
        ap: String,
        #[arg(long, default_value = "1")]
        m: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a grid of deformations in parallel and writes results.csv and plan.json.
    Scan {
        #[command(flatten)]
        ring: Ring,
        /// Weight range such as 2..6.
        #[arg(long)]
        k: String,
        /// Comma-separated list of a_p values.
        #[arg(long)]
        ap: String,
        #[arg(long, default_value = "1")]
        m: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "1")]
        jobs: String,
        #[arg(long, default_value = "0")]
        seed: String,
    },
}

pub struct Setup {
    pub params: PadicParams,
    pub chi: BigInt,
    pub prec_x: usize,
}

impl Ring {
    fn p(&self) -> Result<BigInt, CliError> {
        parse::integer(&self.p)
    }

    fn e(&self) -> Result<i64, CliError> {
        parse::small(&self.e)
    }

    fn chi(&self, p: &BigInt) -> Result<BigInt, CliError> {
        match &self.chi_gamma {
            Some(c) => parse::integer(c),
            None => Ok(default_chi(p)),
        }
    }

    /// Resolves precisions: explicit flags win, else the deformation budget plus margin.
    pub fn setup(&self, k: i64, ap: &str, m: Ratio<i64>) -> Result<Setup, CliError> {
        let p = self.p()?;
        let e = self.e()?;
        let chi = self.chi(&p)?;
        let prec_x = match &self.prec_x {
            Some(n) => usize::try_from(parse::small(n)?).map_err(|_| CliError::Usage("--prec-x must be positive".into()))?,
            None => (2 * k).max(32) as usize,
        };
        let prec_pi = match &self.prec_pi {
            Some(n) => parse::small(n)?,
            None => default_prec(&p, e, k, ap, m, &chi, prec_x)?,
        };
        Ok(Setup { params: PadicParams::new(p, e, prec_pi)?, chi, prec_x })
    }
}

pub fn default_prec(p: &BigInt, e: i64, k: i64, ap: &str, m: Ratio<i64>, chi: &BigInt, n: usize) -> Result<i64, CliError> {
    let probe = PadicParams::new(p.clone(), e, 4096)?;
    let va = match parse::element(&probe, ap)?.val() {
        Val::Exact(v) => v,
        Val::AtLeast(_) => 0,
    };
    let m_pi = deform::level_to_pi(m, e)?.max(1);
    let table = alpha(p, k - 1, chi)?;
    Ok(deform::recommended_prec(p, e, k, va, m_pi, n, table.get(k - 1)))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { context: format!("writing {}", path.display()), source })
}

fn out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { context: format!("creating {}", dir.display()), source })
}

fn seed(setup: &Setup, k: i64, ap: &str) -> Result<(WachData, deform::SeedMethod), CliError> {
    if k < 2 {
        return Err(CliError::Usage("--k must be at least 2".into()));
    }
    let a = parse::element(&setup.params, ap)?;
    Ok(seed_auto(&setup.params, k, &a, &setup.chi, setup.prec_x)?)
}

fn cert_summary(cert: &deform::DeformCertificate) {
    let v = &cert.verdicts;
    println!("h0 path: {:?}", cert.h0_path);
    println!("v(P' - P) = {}, v(G' - G) = {}", v.min_val_p_diff, v.min_val_g_diff);
    println!(
        "charpoly {}, H floors {}, iteration floors {}, axioms {}",
        ok(v.charpoly_ok),
        ok(v.h_floors_ok),
        ok(v.iteration_floors_ok),
        ok(v.axioms_ok)
    );
    println!("certificate: {}", if cert.pass { "PASS" } else { "FAIL" });
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn emit_deformation(
    w2: &WachData,
    cert: &mut deform::DeformCertificate,
    out: &Option<PathBuf>,
) -> Result<u8, CliError> {
    if let Some(dir) = out {
        out_dir(dir)?;
        cert.output = Some("module.json".into());
        write(&dir.join("module.json"), &w2.to_json())?;
        write(&dir.join("certificate.json"), &cert.to_json())?;
    }
    cert_summary(cert);
    Ok(if cert.pass { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.cmd {
        Cmd::Seed { ring, k, ap, m, out } => {
            let k = parse::small(&k)?;
            let setup = ring.setup(k, &ap, parse::ratio_i64(&m)?)?;
            let (w, method) = seed(&setup, k, &ap)?;
            let report = check_axioms(&w)?;
            write(&out, &w.to_json())?;
            println!("seed method: {method:?}");
            println!("defect valuation {}, pass {}", report.commutation_defect_val.render(w.params.e()), report.pass);
            Ok(if report.pass { 0 } else { 1 })
        }
        Cmd::Verify { file, out } => {
            let w = WachData::load(&file)?;
            let report = check_axioms(&w)?;
            let json = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
            match out {
                Some(path) => write(&path, &json)?,
                None => print!("{json}"),
            }
            println!("verify: {}", if report.pass { "PASS" } else { "FAIL" });
            Ok(if report.pass { 0 } else { 1 })
        }
        Cmd::Deform { ring, k, ap, ap_new, m, out } => {
            let k = parse::small(&k)?;
            let m = parse::ratio_i64(&m)?;
            let setup = ring.setup(k, &ap, m)?;
            let a_new = parse::element(&setup.params, &ap_new)?;
            let (w, method) = seed(&setup, k, &ap)?;
            println!("seed method: {method:?}");
            let (w2, mut cert) = deform_trace(&w, &a_new, m)?;
            emit_deformation(&w2, &mut cert, &out)
        }
        Cmd::Alpha { p, r, chi_gamma } => {
            let p = parse::integer(&p)?;
            let chi = match chi_gamma {
                Some(c) => parse::integer(&c)?,
                None => default_chi(&p),
            };
            let r = parse::small(&r)?;
            println!("{}", alpha(&p, r, &chi)?.get(r));
            Ok(0)
        }
        Cmd::Psi { p, alpha: a, s, prec_pi, coeffs } => {
            let params = PadicParams::new(parse::integer(&p)?, 1, parse::small(&prec_pi)?)?;
            let a = parse::element(&params, &a)?;
            let s = parse::element(&params, &s)?;
            let v = trianguline::psi_eval(&a, &s)?;
            println!("{} (mod p^{})", parse::render(&v), v.cap());
            if let Some(n) = coeffs {
                let n = usize::try_from(parse::small(&n)?).map_err(|_| CliError::Usage("--coeffs".into()))?;
                let rep = trianguline::coeff_bound_check(&a, n, &[s])?;
                println!("{}", serde_json::to_string(&rep).expect("serializable"));
                return Ok(if rep.all_nonnegative && rep.gouvea_ok { 0 } else { 1 });
            }
            Ok(0)
        }
        Cmd::Star { p, v_ap, m } => {
            let k = trianguline::hypothesis_star(&parse::integer(&p)?, &parse::ratio(&v_ap)?, &parse::ratio(&m)?)?;
            println!("{k}");
            Ok(0)
        }
        Cmd::Weightstep { ring, k, ap, m, out } => {
            let k = parse::small(&k)?;
            let m = parse::ratio_i64(&m)?;
            let p = ring.p()?;
            let e = ring.e()?;
            let probe = PadicParams::new(p.clone(), e, 4096)?;
            let va = parse::element(&probe, &ap)?.val();
            if let Val::Exact(v) = va {
                let v = Ratio::new(BigInt::from(v), BigInt::from(e));
                let m_big = Ratio::new(BigInt::from(*m.numer()), BigInt::from(*m.denom()));
                let need = trianguline::hypothesis_star(&p, &v, &m_big)?;
                if BigInt::from(k) < need {
                    return Err(TriError::StarFails { k, need }.into());
                }
            } else {
                return Err(TriError::NonpositiveValuation.into());
            }
            let setup = ring.setup(k, &ap, m)?;
            let (w, method) = seed(&setup, k, &ap)?;
            println!("seed method: {method:?}");
            let (w2, mut cert) = trianguline::weight_step(&w, m)?;
            emit_deformation(&w2, &mut cert, &out)
        }
        Cmd::Scan { ring, k, ap, m, out, jobs, seed } => {
            let plan = scan::ScanPlan {
                p: ring.p.clone(),
                e: ring.e()?,
                k_range: parse::range(&k)?,
                ap: ap.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
                m: parse::ratio_i64(&m)?.to_string(),
                prec_pi: ring.prec_pi.clone(),
                prec_x: ring.prec_x.clone(),
                chi_gamma: ring.chi_gamma.clone(),
                out: out.display().to_string(),
                jobs: usize::try_from(parse::small(&jobs)?.max(1)).unwrap_or(1),
                seed: u64::try_from(parse::small(&seed)?).map_err(|_| CliError::Usage("--seed must be >= 0".into()))?,
            };
            scan::run(&plan, &ring, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
