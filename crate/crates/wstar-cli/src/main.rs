mod input;
mod report;

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use wstar::algebra::{orbit_invariant, spectral_groups, BlockAlgebra, NormalFunctional};
use wstar::groupoid::Composability;
use wstar::matrix::{self, frobenius, CMat};
use wstar::suites::{run_suite, Suite, SuiteConfig};
use wstar::symplectic::{feynman_amplitude, CVec};
use wstar::{Error, ToleranceProfile};

use input::{parse_blocks, read_spec, InputError};

#[derive(Parser)]
#[command(name = "wstar", version, about = "Numerical checks for groupoids and Poisson structures on finite-dimensional W*-algebras")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Polar decomposition a = u·h of a square matrix.
    Polar {
        file: PathBuf,
        /// Matrix to decompose when the file holds several.
        #[arg(long)]
        matrix: Option<String>,
        /// Relative rank cutoff.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run one or more verification suites.
    Verify {
        #[arg(required = true)]
        suites: Vec<String>,
        #[arg(long, default_value = "2")]
        algebra: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pass threshold for the maximum residual (overrides the suite default).
        #[arg(long)]
        tol: Option<f64>,
        /// Write CSV report rows here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Repair near-composable pairs instead of rejecting them.
        #[arg(long)]
        repair: bool,
        /// Record wall time in the report (makes reports differ between runs).
        #[arg(long)]
        timing: bool,
    },
    /// Transition amplitude along a chain of unit vectors, one per column.
    Amplitude {
        file: PathBuf,
        #[arg(long)]
        matrix: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Coadjoint orbit data of a positive density.
    Orbit {
        file: PathBuf,
        /// Block sizes "n1,n2,..."; defaults to the blocks listed in the file.
        #[arg(long)]
        algebra: Option<String>,
        #[arg(long)]
        matrix: Option<String>,
        /// Relative rank cutoff.
        #[arg(long)]
        tol: Option<f64>,
    },
}

/// Exit statuses: 0 pass, 1 parse error, 2 domain error or failed suite, 3 usage error.
enum Failure {
    Parse(String),
    Domain(String),
    Usage(String),
    SuiteFailed,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Parse(_) => 1,
            Self::Domain(_) | Self::SuiteFailed => 2,
            Self::Usage(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownSuite(_) | Error::InvalidTrials | Error::InvalidTolerance(_) | Error::InvalidAlgebra(_) => {
                Self::Usage(e.to_string())
            }
            _ => Self::Domain(e.to_string()),
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        match e {
            InputError::Selection(m) => Self::Usage(m),
            InputError::Io(m) | InputError::Parse(m) => Self::Parse(m),
        }
    }
}

fn rank_tol(tol: Option<f64>) -> Result<ToleranceProfile, Failure> {
    let mut t = ToleranceProfile::default();
    if let Some(r) = tol {
        t.rank_rel_tol = r;
        t.validate()?;
    }
    Ok(t)
}

fn algebra(s: &str) -> Result<BlockAlgebra, Failure> {
    Ok(BlockAlgebra::new(parse_blocks(s).map_err(Failure::Usage)?)?)
}

/// Rounds away sub-display noise so that -1e-17 prints as 0.
fn clean(x: f64) -> f64 {
    if x.abs() < 5e-10 {
        0.0
    } else {
        x
    }
}

fn fmt_complex(z: Complex64) -> String {
    let (re, im) = (clean(z.re), clean(z.im));
    if im == 0.0 {
        format!("{re:.6}")
    } else {
        format!("{re:.6}{im:+.6}i")
    }
}

fn print_matrix(name: &str, m: &CMat) {
    println!("{name} =");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>22}", fmt_complex(m[(i, j)]))).collect();
        println!("  [{} ]", row.join(""));
    }
}

fn cmd_polar(file: PathBuf, name: Option<String>, tol: Option<f64>) -> Result<(), Failure> {
    let tol = rank_tol(tol)?;
    let a = read_spec(&file)?.matrix(name.as_deref())?;
    let sv = matrix::svd(&a)?;
    let cutoff = tol.cutoff(sv.sigma_max());
    // refuse rank decisions that sit in the guard band
    sv.partial_inverse(cutoff)?;
    let p = sv.polar(cutoff);
    print_matrix("u", &p.u);
    print_matrix("h", &p.h);
    let uu = p.u.adjoint() * &p.u;
    println!("rank = {}", p.rank);
    println!("reconstruction |u h - a|      = {}", report::sci(frobenius(&(&p.u * &p.h - &a))));
    println!("partial isometry |u u* u - u| = {}", report::sci(frobenius(&(&p.u * &uu - &p.u))));
    println!("support |u* u - supp(h)|      = {}", report::sci(frobenius(&(&uu - sv.right_support(cutoff)))));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    names: Vec<String>,
    alg: String,
    trials: usize,
    seed: u64,
    tol: Option<f64>,
    report_path: Option<PathBuf>,
    repair: bool,
    timing: bool,
) -> Result<(), Failure> {
    let suites = names.iter().map(|n| n.parse::<Suite>()).collect::<Result<Vec<_>, _>>()?;
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Failure::Usage(format!("--tol must be a positive number, got {t}")));
        }
    }
    let mut cfg = SuiteConfig::new(algebra(&alg)?, trials, seed);
    cfg.threshold = tol;
    cfg.mode = if repair { Composability::Repair } else { Composability::Strict };
    let mut outcomes = Vec::new();
    for s in suites {
        let o = run_suite(s, &cfg)?;
        println!("{}", report::summary_line(&o));
        outcomes.push(o);
    }
    if let Some(path) = report_path {
        let f = File::create(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        report::write_csv(BufWriter::new(f), &outcomes, timing)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if outcomes.iter().all(|o| o.pass) {
        Ok(())
    } else {
        Err(Failure::SuiteFailed)
    }
}

fn cmd_amplitude(file: PathBuf, name: Option<String>, tol: Option<f64>) -> Result<(), Failure> {
    let tol = rank_tol(tol)?;
    let m = read_spec(&file)?.matrix(name.as_deref())?;
    let chain: Vec<CVec> = m.column_iter().map(|c| c.clone_owned()).collect();
    let (amp, prob) = feynman_amplitude(&chain, &tol)?;
    println!("vectors     = {}", chain.len());
    println!("amplitude   = {}", fmt_complex(amp));
    println!("probability = {prob:.6}");
    Ok(())
}

fn cmd_orbit(file: PathBuf, alg: Option<String>, name: Option<String>, tol: Option<f64>) -> Result<(), Failure> {
    let tol = rank_tol(tol)?;
    let spec = read_spec(&file)?;
    let alg = match (alg, &spec.blocks) {
        (Some(s), Some(b)) => {
            let a = algebra(&s)?;
            if a.block_dims() != b.as_slice() {
                return Err(Failure::Usage(format!("--algebra \"{s}\" disagrees with the file's blocks {b:?}")));
            }
            a
        }
        (Some(s), None) => algebra(&s)?,
        (None, Some(b)) => BlockAlgebra::new(b.clone())?,
        (None, None) => return Err(Failure::Usage("no block structure: pass --algebra or list blocks in the file".into())),
    };
    let d = alg.from_ambient(&spec.matrix(name.as_deref())?, &tol)?;
    if !d.is_hermitian(&tol) {
        return Err(Error::NotHermitian { residual: d.hermiticity_residual() }.into());
    }
    let rho = NormalFunctional::new(d);
    let inv = orbit_invariant(&rho, &tol)?;
    let stab: usize = spectral_groups(&rho, &tol)?.iter().map(|g| g.multiplicity().pow(2)).sum();
    for (k, (spec, n)) in inv.iter().zip(alg.block_dims()).enumerate() {
        let vals: Vec<String> = spec.iter().map(|&l| format!("{:.6}", clean(l))).collect();
        println!("block {k} (M{n}): spectrum {{{}}}, support rank {}", vals.join(", "), spec.len());
    }
    let ranks: Vec<String> = inv.iter().map(|s| s.len().to_string()).collect();
    println!("support ranks = [{}]", ranks.join(", "));
    println!("stabilizer dimension = {stab}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Polar { file, matrix, tol } => cmd_polar(file, matrix, tol),
        Cmd::Verify { suites, algebra, trials, seed, tol, report, repair, timing } => {
            cmd_verify(suites, algebra, trials, seed, tol, report, repair, timing)
        }
        Cmd::Amplitude { file, matrix, tol } => cmd_amplitude(file, matrix, tol),
        Cmd::Orbit { file, algebra, matrix, tol } => cmd_orbit(file, algebra, matrix, tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Parse(m) => eprintln!("parse error: {m}"),
                Failure::Domain(m) => eprintln!("error: {m}"),
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::SuiteFailed => eprintln!("verification failed: a residual exceeded its tolerance"),
            }
            ExitCode::from(f.code())
        }
    }
}
