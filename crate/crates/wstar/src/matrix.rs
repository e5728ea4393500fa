//! Dense complex kernels: Hermitian eigensolves, SVD-based polar factors,
//! supports, spectral functions and the guarded partial inverse.

use faer::{Mat, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::ToleranceProfile;

pub type CMat = DMatrix<Complex64>;

/// Retained singular values must clear the cutoff by this factor.
pub const GUARD_BAND: f64 = 10.0;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn check_finite(a: &CMat) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_square(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch(format!("expected square, got {}x{}", a.nrows(), a.ncols())));
    }
    Ok(())
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(values.len(), values.iter().map(|&v| c(v, 0.0))))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigen {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// V f(Λ) V* summed over eigenvalues strictly above `cutoff`.
    pub fn apply_above(&self, cutoff: f64, f: impl Fn(f64) -> Complex64) -> CMat {
        let n = self.vectors.nrows();
        let mut out = CMat::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            if lam > cutoff {
                let v = self.vectors.column(k);
                out += v * v.adjoint() * f(lam);
            }
        }
        out
    }

    pub fn count_above(&self, cutoff: f64) -> usize {
        self.values.iter().filter(|&&l| l > cutoff).count()
    }
}

pub fn hermitian_eig(h: &CMat, tol: &ToleranceProfile) -> Result<Eigen> {
    check_square(h)?;
    check_finite(h)?;
    let residual = frobenius(&(h - h.adjoint()));
    if residual > tol.residual_tol * (1.0 + frobenius(h)) {
        return Err(Error::NotHermitian { residual });
    }
    hermitian_eig_unchecked(h)
}

/// Symmetrises before solving; callers vouch for hermiticity.
pub(crate) fn hermitian_eig_unchecked(h: &CMat) -> Result<Eigen> {
    let n = h.nrows();
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: CMat::zeros(0, 0) });
    }
    let sym = Mat::<Complex64>::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let eig = sym.self_adjoint_eigen(Side::Lower).map_err(|_| Error::NoConvergence)?;
    let (lam, vecs) = (eig.S().column_vector(), eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lam[b].re.total_cmp(&lam[a].re));
    let values = order.iter().map(|&k| lam[k].re).collect();
    let vectors = CMat::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok(Eigen { values, vectors })
}

/// Full SVD a = U diag(s) V*, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self, cutoff: f64) -> usize {
        self.s.iter().filter(|&&x| x > cutoff).count()
    }

    /// Smallest singular value above the cutoff, if any.
    pub fn smallest_retained(&self, cutoff: f64) -> Option<f64> {
        self.s.iter().copied().rfind(|&x| x > cutoff)
    }

    pub fn left_support(&self, cutoff: f64) -> CMat {
        let r = self.rank(cutoff);
        let ur = self.u.columns(0, r);
        ur * ur.adjoint()
    }

    pub fn right_support(&self, cutoff: f64) -> CMat {
        let r = self.rank(cutoff);
        let vr = self.v.columns(0, r);
        vr * vr.adjoint()
    }

    pub fn polar(&self, cutoff: f64) -> Polar {
        let r = self.rank(cutoff);
        let ur = self.u.columns(0, r);
        let vr = self.v.columns(0, r);
        let sr = real_diag(&self.s[..r]);
        Polar { u: ur * vr.adjoint(), h: vr * sr * vr.adjoint(), rank: r }
    }

    /// Moore–Penrose inverse under the cutoff, refused inside the guard band.
    pub fn partial_inverse(&self, cutoff: f64) -> Result<CMat> {
        if let Some(smallest) = self.smallest_retained(cutoff) {
            if smallest < GUARD_BAND * cutoff {
                return Err(Error::NotPartiallyInvertible { smallest, cutoff });
            }
        }
        let r = self.rank(cutoff);
        let ur = self.u.columns(0, r);
        let vr = self.v.columns(0, r);
        let inv: Vec<f64> = self.s[..r].iter().map(|x| 1.0 / x).collect();
        Ok(vr * real_diag(&inv) * ur.adjoint())
    }
}

pub fn svd(a: &CMat) -> Result<Svd> {
    check_square(a)?;
    check_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Svd { u: CMat::zeros(0, 0), s: vec![], v: CMat::zeros(0, 0) });
    }
    let m = Mat::<Complex64>::from_fn(n, n, |i, j| a[(i, j)]);
    let dec = m.svd().map_err(|_| Error::NoConvergence)?;
    let (u, v, sv) = (dec.U(), dec.V(), dec.S().column_vector());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sv[j].re.total_cmp(&sv[i].re));
    Ok(Svd {
        u: CMat::from_fn(n, n, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&k| sv[k].re).collect(),
        v: CMat::from_fn(n, n, |i, j| v[(i, order[j])]),
    })
}

#[derive(Debug, Clone)]
pub struct Polar {
    pub u: CMat,
    pub h: CMat,
    pub rank: usize,
}

pub fn polar_decompose(a: &CMat, tol: &ToleranceProfile) -> Result<Polar> {
    let sv = svd(a)?;
    Ok(sv.polar(tol.cutoff(sv.sigma_max())))
}

pub fn partial_inverse(a: &CMat, tol: &ToleranceProfile) -> Result<CMat> {
    let sv = svd(a)?;
    sv.partial_inverse(tol.cutoff(sv.sigma_max()))
}

pub fn left_support(a: &CMat, tol: &ToleranceProfile) -> Result<CMat> {
    let sv = svd(a)?;
    Ok(sv.left_support(tol.cutoff(sv.sigma_max())))
}

pub fn right_support(a: &CMat, tol: &ToleranceProfile) -> Result<CMat> {
    let sv = svd(a)?;
    Ok(sv.right_support(tol.cutoff(sv.sigma_max())))
}

/// Eigen-decomposition with a positivity check: λ_min ≥ −residual_tol·max(1, λ_max).
pub fn positive_eig(h: &CMat, tol: &ToleranceProfile) -> Result<Eigen> {
    let eig = hermitian_eig(h, tol)?;
    check_positive(&eig, tol)?;
    Ok(eig)
}

pub(crate) fn check_positive(eig: &Eigen, tol: &ToleranceProfile) -> Result<()> {
    let scale = eig.max_abs().max(1.0);
    if let Some(&min_eig) = eig.values.last() {
        if min_eig < -tol.residual_tol * scale {
            return Err(Error::NotPositive { min_eig });
        }
    }
    Ok(())
}

fn eig_cutoff(eig: &Eigen, tol: &ToleranceProfile) -> f64 {
    tol.cutoff(eig.values.first().copied().unwrap_or(0.0).max(0.0))
}

pub fn support_projection(h: &CMat, tol: &ToleranceProfile) -> Result<CMat> {
    let eig = positive_eig(h, tol)?;
    Ok(eig.apply_above(eig_cutoff(&eig, tol), |_| c(1.0, 0.0)))
}

pub fn matrix_sqrt(h: &CMat, tol: &ToleranceProfile) -> Result<CMat> {
    let eig = positive_eig(h, tol)?;
    Ok(eig.apply_above(eig_cutoff(&eig, tol), |l| c(l.sqrt(), 0.0)))
}

/// log h on support(h), zero elsewhere.
pub fn matrix_log_restricted(h: &CMat, tol: &ToleranceProfile) -> Result<CMat> {
    let eig = positive_eig(h, tol)?;
    Ok(eig.apply_above(eig_cutoff(&eig, tol), |l| c(l.ln(), 0.0)))
}

/// h^{it}: unitary on support(h), zero off it.
pub fn matrix_imaginary_power(h: &CMat, t: f64, tol: &ToleranceProfile) -> Result<CMat> {
    let eig = positive_eig(h, tol)?;
    Ok(eig.apply_above(eig_cutoff(&eig, tol), |l| imaginary_power_scalar(l, t)))
}

#[inline]
pub(crate) fn imaginary_power_scalar(l: f64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t * l.ln())
}

/// e^{t·a} for anti-Hermitian a, through the Hermitian generator −i·a.
pub fn exp_anti_hermitian(a: &CMat, t: f64) -> Result<CMat> {
    let k = a * c(0.0, -1.0);
    let eig = hermitian_eig_unchecked(&k)?;
    Ok(eig.apply_above(f64::NEG_INFINITY, |l| Complex64::from_polar(1.0, t * l)))
}

/// e^{t·h} for Hermitian h.
pub fn exp_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let eig = hermitian_eig_unchecked(h)?;
    Ok(eig.apply_above(f64::NEG_INFINITY, |l| c((t * l).exp(), 0.0)))
}

/// Real null space of a real linear map: returns (rank, basis columns of the kernel).
pub fn real_null_space(a: &DMatrix<f64>, rank_rel_tol: f64) -> Result<(usize, DMatrix<f64>)> {
    let (m, n) = a.shape();
    if n == 0 {
        return Ok((0, DMatrix::zeros(0, 0)));
    }
    // the full SVD exposes all n right singular vectors; pad s with zeros past min(m, n)
    let dec = Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]).svd().map_err(|_| Error::NoConvergence)?;
    let (v, sv) = (dec.V(), dec.S().column_vector());
    let s: Vec<f64> = (0..n).map(|k| if k < sv.nrows() { sv[k] } else { 0.0 }).collect();
    let smax = s.iter().fold(0.0_f64, |acc, &x| acc.max(x));
    let cutoff = rank_rel_tol * smax;
    let keep: Vec<usize> = (0..n).filter(|&k| s[k] <= cutoff).collect();
    let rank = n - keep.len();
    let basis = DMatrix::from_fn(n, keep.len(), |i, j| v[(i, keep[j])]);
    Ok((rank, basis))
}

/// Singular values of a real matrix, descending.
pub fn real_singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Ok(vec![]);
    }
    let m = Mat::<f64>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    let sv = m.singular_values().map_err(|_| Error::NoConvergence)?;
    let mut s = sv;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}
