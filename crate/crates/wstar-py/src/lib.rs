//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers (row-major), vectors as flat lists.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use wstar::algebra::{self, orbit_invariant, spectral_groups, NormalFunctional};
use wstar::groupoid::Composability;
use wstar::matrix::{self, CMat};
use wstar::suites::{self, Suite, SuiteConfig};
use wstar::symplectic::{self, CVec};
use wstar::ToleranceProfile;

create_exception!(wstar_py, WstarError, PyValueError);

type Rows = Vec<Vec<Complex64>>;

fn err(e: wstar::Error) -> PyErr {
    WstarError::new_err(e.to_string())
}

fn to_mat(rows: Rows) -> PyResult<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(WstarError::new_err("ragged matrix: rows have different lengths"));
    }
    Ok(CMat::from_fn(n, m, |i, j| rows[i][j]))
}

fn from_mat(a: &CMat) -> Rows {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn profile(rank_rel_tol: Option<f64>) -> PyResult<ToleranceProfile> {
    let mut t = ToleranceProfile::default();
    if let Some(r) = rank_rel_tol {
        t.rank_rel_tol = r;
        t.validate().map_err(err)?;
    }
    Ok(t)
}

/// Block algebra M_{n1} ⊕ … ⊕ M_{nk}.
#[pyclass(name = "BlockAlgebra", frozen)]
struct PyBlockAlgebra(algebra::BlockAlgebra);

#[pymethods]
impl PyBlockAlgebra {
    #[new]
    fn new(dims: Vec<usize>) -> PyResult<Self> {
        algebra::BlockAlgebra::new(dims).map(Self).map_err(err)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.block_dims().to_vec()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.0.ambient_dim()
    }

    /// Real dimension of the algebra.
    #[getter]
    fn real_dim(&self) -> usize {
        2 * self.0.complex_dim()
    }

    fn __repr__(&self) -> String {
        format!("BlockAlgebra({:?})", self.0.block_dims())
    }
}

/// Result of one verification suite.
#[pyclass(name = "SuiteOutcome", frozen, get_all)]
struct PySuiteOutcome {
    suite: String,
    trials: usize,
    seed: u64,
    max_residual: f64,
    tolerance: f64,
    passed: bool,
    seconds: f64,
}

#[pymethods]
impl PySuiteOutcome {
    fn __repr__(&self) -> String {
        format!(
            "SuiteOutcome(suite={:?}, trials={}, seed={}, max_residual={:.5e}, tolerance={:.5e}, passed={})",
            self.suite,
            self.trials,
            self.seed,
            self.max_residual,
            self.tolerance,
            if self.passed { "True" } else { "False" }
        )
    }
}

/// Polar decomposition a = u·h; returns (u, h, rank).
#[pyfunction]
#[pyo3(signature = (a, rank_rel_tol=None))]
fn polar(a: Rows, rank_rel_tol: Option<f64>) -> PyResult<(Rows, Rows, usize)> {
    let tol = profile(rank_rel_tol)?;
    let p = matrix::polar_decompose(&to_mat(a)?, &tol).map_err(err)?;
    Ok((from_mat(&p.u), from_mat(&p.h), p.rank))
}

/// Moore–Penrose inverse, refused when the rank decision is ambiguous.
#[pyfunction]
#[pyo3(signature = (a, rank_rel_tol=None))]
fn partial_inverse(a: Rows, rank_rel_tol: Option<f64>) -> PyResult<Rows> {
    let tol = profile(rank_rel_tol)?;
    Ok(from_mat(&matrix::partial_inverse(&to_mat(a)?, &tol).map_err(err)?))
}

/// Orbit data of a positive block-diagonal density: (spectra per block, support ranks, stabilizer dimension).
#[pyfunction]
#[pyo3(signature = (alg, density, rank_rel_tol=None))]
fn orbit(alg: &PyBlockAlgebra, density: Rows, rank_rel_tol: Option<f64>) -> PyResult<(Vec<Vec<f64>>, Vec<usize>, usize)> {
    let tol = profile(rank_rel_tol)?;
    let d = alg.0.from_ambient(&to_mat(density)?, &tol).map_err(err)?;
    if !d.is_hermitian(&tol) {
        return Err(err(wstar::Error::NotHermitian { residual: d.hermiticity_residual() }));
    }
    let rho = NormalFunctional::new(d);
    let inv = orbit_invariant(&rho, &tol).map_err(err)?;
    let stab = spectral_groups(&rho, &tol).map_err(err)?.iter().map(|g| g.multiplicity().pow(2)).sum();
    let ranks = inv.iter().map(Vec::len).collect();
    Ok((inv, ranks, stab))
}

/// Amplitude Π⟨ψ_k|ψ_{k+1}⟩ along a chain of unit vectors and its probability.
#[pyfunction]
fn feynman_amplitude(vectors: Rows) -> PyResult<(Complex64, f64)> {
    let chain: Vec<CVec> = vectors.into_iter().map(CVec::from_vec).collect();
    symplectic::feynman_amplitude(&chain, &ToleranceProfile::default()).map_err(err)
}

/// Fubini–Study form at ψ on tangent vectors x, y, scaled by r.
#[pyfunction]
#[pyo3(signature = (psi, x, y, r=1.0))]
fn fubini_study_form(psi: Vec<Complex64>, x: Vec<Complex64>, y: Vec<Complex64>, r: f64) -> f64 {
    symplectic::fubini_study_form(&CVec::from_vec(psi), &CVec::from_vec(x), &CVec::from_vec(y), r)
}

/// (kappa, pairing ratio) fixed by the reference configuration.
#[pyfunction]
fn calibrate_kappa() -> (f64, f64) {
    let c = symplectic::calibrate_kappa();
    (c.kappa, c.pairing_ratio)
}

#[pyfunction]
fn suite_names() -> Vec<&'static str> {
    Suite::ALL.iter().map(Suite::name).collect()
}

/// Runs a named verification suite; the GIL is released while trials run.
#[pyfunction]
#[pyo3(signature = (name, dims, trials=100, seed=0, threshold=None, repair=false))]
fn run_suite(
    py: Python<'_>,
    name: &str,
    dims: Vec<usize>,
    trials: usize,
    seed: u64,
    threshold: Option<f64>,
    repair: bool,
) -> PyResult<PySuiteOutcome> {
    let suite: Suite = name.parse().map_err(err)?;
    let mut cfg = SuiteConfig::new(algebra::BlockAlgebra::new(dims).map_err(err)?, trials, seed);
    cfg.threshold = threshold;
    cfg.mode = if repair { Composability::Repair } else { Composability::Strict };
    let o = py.detach(|| suites::run_suite(suite, &cfg)).map_err(err)?;
    Ok(PySuiteOutcome {
        suite: o.suite.name().to_string(),
        trials: o.trials,
        seed: o.seed,
        max_residual: o.max_residual,
        tolerance: o.tolerance,
        passed: o.pass,
        seconds: o.elapsed.as_secs_f64(),
    })
}

#[pymodule]
fn wstar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WstarError", m.py().get_type::<WstarError>())?;
    m.add_class::<PyBlockAlgebra>()?;
    m.add_class::<PySuiteOutcome>()?;
    m.add_function(wrap_pyfunction!(polar, m)?)?;
    m.add_function(wrap_pyfunction!(partial_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(orbit, m)?)?;
    m.add_function(wrap_pyfunction!(feynman_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(fubini_study_form, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(suite_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
