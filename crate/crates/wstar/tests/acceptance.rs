//! Acceptance run: one PASS/FAIL line per criterion. The exit status is nonzero
//! if any check fails other than those marked as a known float64 limit.
//! Thresholds and trial counts are pinned below.

use std::process::ExitCode;

use rayon::prelude::*;
use wstar::algebra::{BlockAlgebra, NormalFunctional};
use wstar::charts::{family_dgamma0, fd_exterior_derivative, random_p0_point, LeftLeftFamily, LeftRightFamily, SurfaceFamily};
use wstar::sampling::{self, trial_rng};
use wstar::suites::{charts_residuals, exactness_ratio, run_suite, ChartResiduals, Suite, SuiteConfig, EXACTNESS_RATIO_BAND, EXACTNESS_RATIO_STEP};
use wstar::symplectic::{calibrate_kappa, KAPPA};
use wstar::{Error, ToleranceProfile};

const SEED: u64 = 20_240_607;

type Criterion = fn() -> Result<Vec<Check>, Error>;

struct Check {
    label: String,
    value: f64,
    bound: f64,
    pass: bool,
    /// Failure is a documented floating-point limit and does not change the exit status.
    known_limit: bool,
}

impl Check {
    fn at_most(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { label: label.into(), value, bound, pass: value <= bound, known_limit: false }
    }

    fn holds(label: impl Into<String>, ok: bool) -> Self {
        Self { label: label.into(), value: f64::from(u8::from(!ok)), bound: 0.0, pass: ok, known_limit: false }
    }

    fn known_limit(mut self) -> Self {
        self.known_limit = true;
        self
    }

    fn show(&self) -> String {
        if self.bound == 0.0 && (self.value == 0.0 || self.value == 1.0) {
            let tag = match (self.pass, self.known_limit) {
                (true, _) => "ok",
                (false, false) => "violated",
                (false, true) => "violated (known float64 limit)",
            };
            format!("{} {}", self.label, tag)
        } else {
            format!("{} {:.3e} (bound {:.0e})", self.label, self.value, self.bound)
        }
    }
}

fn alg(dims: &[usize]) -> BlockAlgebra {
    BlockAlgebra::new(dims.to_vec()).expect("valid block dims")
}

fn suite(s: Suite, dims: &[usize], trials: usize) -> Result<Check, Error> {
    let out = run_suite(s, &SuiteConfig::new(alg(dims), trials, SEED))?;
    let label = format!("{}[{}]x{}", s.name(), dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("+"), trials);
    Ok(Check::at_most(label, out.max_residual, out.tolerance))
}

fn groupoid_axioms() -> Result<Vec<Check>, Error> {
    [&[2][..], &[3], &[2, 3]].iter().map(|d| suite(Suite::GroupoidAxioms, d, 500)).collect()
}

fn intertwining() -> Result<Vec<Check>, Error> {
    [&[2][..], &[3], &[2, 3]].iter().map(|d| suite(Suite::Intertwining, d, 500)).collect()
}

fn multiplicativity() -> Result<Vec<Check>, Error> {
    [&[2][..], &[3], &[2, 2]].iter().map(|d| suite(Suite::Multiplicativity, d, 1000)).collect()
}

fn exactness() -> Result<Vec<Check>, Error> {
    let tol = ToleranceProfile::default();
    let mut out = vec![suite(Suite::Exactness, &[3], 500)?, suite(Suite::Exactness, &[2, 2], 500)?];
    let a = alg(&[3]);
    let ratios = |h: f64| -> Result<Vec<f64>, Error> {
        let mut r: Vec<f64> = (0..200u64).into_par_iter().map(|k| exactness_ratio(&a, SEED, k, h, &tol)).collect::<Result<_, _>>()?;
        r.sort_by(f64::total_cmp);
        Ok(r)
    };
    let (lo, hi) = EXACTNESS_RATIO_BAND;
    let coarse = ratios(EXACTNESS_RATIO_STEP)?;
    let (min, max) = (coarse[0], coarse[coarse.len() - 1]);
    out.push(Check::holds(format!("ratio at h={EXACTNESS_RATIO_STEP:.0e} in [{min:.3}, {max:.3}]"), lo <= min && max <= hi));
    // at the production step the roundoff of the central difference (~1e-14/h) exceeds
    // the truncation error (~2h²), so the ratio is noise there
    let fine = ratios(tol.fd_step)?;
    let inside = fine.iter().filter(|r| (lo..=hi).contains(*r)).count();
    let label = format!("ratio at h={:.0e}: median {:.2}, {inside}/200 in band", tol.fd_step, fine[100]);
    out.push(Check::holds(label, inside == fine.len()).known_limit());
    Ok(out)
}

fn dual_pair() -> Result<Vec<Check>, Error> {
    Ok(vec![suite(Suite::DualPair, &[2, 3], 200)?, suite(Suite::DualPair, &[4], 200)?])
}

fn poisson_map() -> Result<Vec<Check>, Error> {
    Ok(vec![suite(Suite::PoissonMap, &[2, 3], 500)?, suite(Suite::PoissonMap, &[3], 500)?])
}

fn fd_exterior(trials: u64) -> Result<f64, Error> {
    let tol = ToleranceProfile::default();
    let a = alg(&[4]);
    let worst = (0..trials)
        .into_par_iter()
        .map(|k| -> Result<f64, Error> {
            let mut rng = trial_rng(SEED, k);
            let p0 = sampling::projection(&mut rng, &a, &[2]);
            let rho0 = NormalFunctional::new(sampling::positive_on(&mut rng, &p0, 0.5, 2.0));
            let u0 = random_p0_point(&mut rng, &p0, &tol)?.element().clone();
            let lr = LeftRightFamily {
                u0: u0.clone(),
                a: sampling::anti_hermitian(&mut rng, &a),
                b: p0.element() * sampling::anti_hermitian(&mut rng, &a) * p0.element(),
            };
            let ll = LeftLeftFamily { u0, a1: sampling::anti_hermitian(&mut rng, &a), a2: sampling::anti_hermitian(&mut rng, &a) };
            let mut m = 0.0_f64;
            for fam in [&lr as &dyn SurfaceFamily, &ll] {
                m = m.max((fd_exterior_derivative(&rho0, fam, 1e-4)? - family_dgamma0(&rho0, fam, &tol)?).abs());
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

fn orbit_form() -> Result<Vec<Check>, Error> {
    Ok(vec![
        suite(Suite::OrbitForm, &[2, 3], 500)?,
        Check::at_most("fd d(Gamma0) at step 1e-4", fd_exterior(200)?, 1e-6),
        suite(Suite::Degeneracy, &[3], 200)?,
        suite(Suite::Degeneracy, &[2, 2], 200)?,
    ])
}

fn kks_fs() -> Result<Vec<Check>, Error> {
    let cal = calibrate_kappa();
    Ok(vec![
        Check::holds(format!("kappa calibrated to {} (pairing ratio {})", cal.kappa, cal.pairing_ratio), cal.kappa == KAPPA),
        suite(Suite::Kks, &[2, 3], 500)?,
        suite(Suite::FubiniStudy, &[4], 500)?,
    ])
}

fn modular_flow() -> Result<Vec<Check>, Error> {
    Ok(vec![suite(Suite::ModularFlow, &[2, 3], 200)?, suite(Suite::ModularFlow, &[3], 200)?])
}

fn charts() -> Result<Vec<Check>, Error> {
    let tol = ToleranceProfile::default();
    let mut checks = Vec::new();
    for dims in [&[3][..], &[4], &[2, 3]] {
        let a = alg(dims);
        let r = (0..500u64)
            .into_par_iter()
            .map(|k| charts_residuals(&mut trial_rng(SEED, k), &a, &tol))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(ChartResiduals::default(), ChartResiduals::merge);
        let tag = format!("{dims:?}");
        checks.push(Check::at_most(format!("round trips {tag}"), r.round_trip, 1e-9));
        checks.push(Check::at_most(format!("cocycle {tag}"), r.cocycle, 1e-9));
        checks.push(Check::at_most(format!("J fixed point {tag}"), r.fixed_point, 1e-9));
        checks.push(Check::at_most(format!("transition vs composite {tag}"), r.transition, 1e-10));
    }
    Ok(checks)
}

fn orbit_structure() -> Result<Vec<Check>, Error> {
    Ok(vec![suite(Suite::OrbitStructure, &[2, 3], 1000)?, suite(Suite::OrbitStructure, &[1, 2, 2], 1000)?])
}

fn conditional_expectation() -> Result<Vec<Check>, Error> {
    Ok(vec![suite(Suite::ConditionalExpectation, &[2, 3], 500)?, suite(Suite::ConditionalExpectation, &[4], 500)?])
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 12] = [
        ("groupoid axioms", groupoid_axioms),
        ("isomorphism intertwining", intertwining),
        ("multiplicativity", multiplicativity),
        ("exactness", exactness),
        ("dual pair", dual_pair),
        ("poisson map", poisson_map),
        ("orbit form", orbit_form),
        ("kks and fubini-study", kks_fs),
        ("modular flow", modular_flow),
        ("charts", charts),
        ("orbit structure", orbit_structure),
        ("conditional expectation", conditional_expectation),
    ];
    let (mut failed, mut unexpected) = (0, 0);
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (pass, surprise, detail) = match run() {
            Ok(checks) => (
                checks.iter().all(|c| c.pass),
                checks.iter().any(|c| !c.pass && !c.known_limit),
                checks.iter().map(Check::show).collect::<Vec<_>>().join("; "),
            ),
            Err(e) => (false, true, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        unexpected += usize::from(surprise);
        println!("{:>2} {} {}: {}", i + 1, if pass { "PASS" } else { "FAIL" }, name, detail);
    }
    println!("{} of {} criteria passed; {} failing for reasons other than a known float64 limit", criteria.len() - failed, criteria.len(), unexpected);
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
