//! Block algebras M = M_{n1} ⊕ … ⊕ M_{nm}, their elements, projections,
//! partial isometries and normal functionals (densities under the trace pairing).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{self, c, check_finite, frobenius, CMat, Eigen, Svd};
use crate::tolerance::ToleranceProfile;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockAlgebra {
    dims: Arc<[usize]>,
}

impl BlockAlgebra {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidAlgebra("at least one block is required".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidAlgebra("block dimensions must be positive".into()));
        }
        Ok(Self { dims: dims.into() })
    }

    pub fn full(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Complex dimension Σ n_k².
    pub fn complex_dim(&self) -> usize {
        self.dims.iter().map(|n| n * n).sum()
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement { algebra: self.clone(), blocks: self.dims.iter().map(|&n| CMat::zeros(n, n)).collect() }
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement { algebra: self.clone(), blocks: self.dims.iter().map(|&n| CMat::identity(n, n)).collect() }
    }

    pub fn element(&self, blocks: Vec<CMat>) -> Result<AlgebraElement> {
        if blocks.len() != self.dims.len() {
            return Err(Error::ShapeMismatch(format!("expected {} blocks, got {}", self.dims.len(), blocks.len())));
        }
        for (b, &n) in blocks.iter().zip(self.dims.iter()) {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::ShapeMismatch(format!("block {}x{} where {n}x{n} expected", b.nrows(), b.ncols())));
            }
            check_finite(b)?;
        }
        Ok(AlgebraElement { algebra: self.clone(), blocks })
    }

    /// Reads a block-diagonal N×N matrix; off-block entries must vanish to residual_tol.
    pub fn from_ambient(&self, m: &CMat, tol: &ToleranceProfile) -> Result<AlgebraElement> {
        let n = self.ambient_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::ShapeMismatch(format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols())));
        }
        check_finite(m)?;
        let el = self.element(
            self.offsets().map(|(off, k)| m.view((off, off), (k, k)).clone_owned()).collect(),
        )?;
        let off_block = frobenius(&(m - el.embed()));
        if off_block > tol.residual_tol {
            return Err(Error::ShapeMismatch(format!("matrix is not block-diagonal (off-block norm {off_block:.3e})")));
        }
        Ok(el)
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.dims.iter().scan(0, |off, &n| {
            let o = *off;
            *off += n;
            Some((o, n))
        })
    }

    pub fn matrix_unit(&self, block: usize, i: usize, j: usize) -> AlgebraElement {
        let mut z = self.zero();
        z.blocks[block][(i, j)] = c(1.0, 0.0);
        z
    }

    /// Real basis {E_ij, i·E_ij} over all blocks.
    pub fn real_basis(&self) -> Vec<AlgebraElement> {
        let mut out = Vec::with_capacity(2 * self.complex_dim());
        for (k, &n) in self.dims.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let e = self.matrix_unit(k, i, j);
                    out.push(e.scale(c(0.0, 1.0)));
                    out.push(e);
                }
            }
        }
        out
    }

    /// Element built from real coordinates (inverse of `AlgebraElement::realify`).
    pub fn from_real(&self, coords: &[f64]) -> AlgebraElement {
        let mut z = self.zero();
        let mut it = coords.chunks(2);
        for b in z.blocks.iter_mut() {
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    let p = it.next().expect("coordinate vector too short");
                    b[(i, j)] = c(p[0], p[1]);
                }
            }
        }
        z
    }
}

impl fmt::Display for BlockAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|n| format!("M{n}")).collect();
        write!(f, "{}", parts.join("+"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    algebra: BlockAlgebra,
    blocks: Vec<CMat>,
}

impl AlgebraElement {
    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMat {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    pub fn same_algebra(&self, other: &Self) -> Result<()> {
        if self.algebra == other.algebra {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        Self { algebra: self.algebra.clone(), blocks: self.blocks.iter().map(f).collect() }
    }

    pub fn try_map(&self, f: impl Fn(&CMat) -> Result<CMat>) -> Result<Self> {
        Ok(Self { algebra: self.algebra.clone(), blocks: self.blocks.iter().map(f).collect::<Result<_>>()? })
    }

    fn zip(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Self {
        assert_eq!(self.algebra, other.algebra, "operands live in different algebras");
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().zip(other.blocks.iter()).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map(|b| b.adjoint())
    }

    pub fn scale(&self, z: Complex64) -> Self {
        self.map(|b| b * z)
    }

    pub fn scale_re(&self, x: f64) -> Self {
        self.scale(c(x, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    /// Hilbert–Schmidt inner product Tr(self*·other), antilinear in self.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.algebra, other.algebra, "operands live in different algebras");
        self.blocks
            .iter()
            .zip(other.blocks.iter())
            .map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>())
            .sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).norm()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn embed(&self) -> CMat {
        let n = self.algebra.ambient_dim();
        let mut m = CMat::zeros(n, n);
        for ((off, k), b) in self.algebra.offsets().zip(self.blocks.iter()) {
            m.view_mut((off, off), (k, k)).copy_from(b);
        }
        m
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.dist(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: &ToleranceProfile) -> bool {
        self.hermiticity_residual() <= tol.residual_tol * (1.0 + self.norm())
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_re(0.5)
    }

    pub fn anti_hermitian_part(&self) -> Self {
        (self - &self.adjoint()).scale_re(0.5)
    }

    /// Real coordinates (Re, Im of every entry, block by block, row-major).
    pub fn realify(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.algebra.complex_dim());
        for b in &self.blocks {
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    out.push(b[(i, j)].re);
                    out.push(b[(i, j)].im);
                }
            }
        }
        out
    }

    pub fn svds(&self) -> Result<Vec<Svd>> {
        self.blocks.iter().map(matrix::svd).collect()
    }

    pub fn eigs(&self, tol: &ToleranceProfile) -> Result<Vec<Eigen>> {
        if !self.is_hermitian(tol) {
            return Err(Error::NotHermitian { residual: self.hermiticity_residual() });
        }
        self.blocks.iter().map(matrix::hermitian_eig_unchecked).collect()
    }

    /// Polar decomposition with a single rank decision for the whole element.
    pub fn polar(&self, tol: &ToleranceProfile) -> Result<(Self, Self)> {
        let svds = self.svds()?;
        let cut = global_cutoff(&svds, tol);
        let parts: Vec<_> = svds.iter().map(|s| s.polar(cut)).collect();
        Ok((
            self.with_blocks(parts.iter().map(|p| p.u.clone()).collect()),
            self.with_blocks(parts.into_iter().map(|p| p.h).collect()),
        ))
    }

    pub fn left_support(&self, tol: &ToleranceProfile) -> Result<Self> {
        let svds = self.svds()?;
        let cut = global_cutoff(&svds, tol);
        Ok(self.with_blocks(svds.iter().map(|s| s.left_support(cut)).collect()))
    }

    pub fn right_support(&self, tol: &ToleranceProfile) -> Result<Self> {
        let svds = self.svds()?;
        let cut = global_cutoff(&svds, tol);
        Ok(self.with_blocks(svds.iter().map(|s| s.right_support(cut)).collect()))
    }

    /// Groupoid inverse |x|⁻¹u* (Moore–Penrose under the guarded cutoff).
    pub fn partial_inverse(&self, tol: &ToleranceProfile) -> Result<Self> {
        let svds = self.svds()?;
        let cut = global_cutoff(&svds, tol);
        Ok(self.with_blocks(svds.iter().map(|s| s.partial_inverse(cut)).collect::<Result<_>>()?))
    }

    /// Rank decision shared by all blocks, for projections and products of projections
    /// the scale is at least 1.
    pub fn block_ranks(&self, tol: &ToleranceProfile) -> Result<Vec<usize>> {
        let svds = self.svds()?;
        let cut = global_cutoff(&svds, tol);
        Ok(svds.iter().map(|s| s.rank(cut)).collect())
    }

    /// f applied to the positive spectrum above the global cutoff.
    pub fn positive_calculus(&self, tol: &ToleranceProfile, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let eigs = self.eigs(tol)?;
        let cut = positive_cutoff(&eigs, tol)?;
        Ok(self.with_blocks(eigs.iter().map(|e| e.apply_above(cut, &f)).collect()))
    }

    pub fn support_projection(&self, tol: &ToleranceProfile) -> Result<Self> {
        self.positive_calculus(tol, |_| c(1.0, 0.0))
    }

    pub fn sqrt(&self, tol: &ToleranceProfile) -> Result<Self> {
        self.positive_calculus(tol, |l| c(l.sqrt(), 0.0))
    }

    pub fn imaginary_power(&self, t: f64, tol: &ToleranceProfile) -> Result<Self> {
        self.positive_calculus(tol, |l| matrix::imaginary_power_scalar(l, t))
    }

    pub fn exp_anti_hermitian(&self, t: f64) -> Result<Self> {
        self.try_map(|b| matrix::exp_anti_hermitian(b, t))
    }

    pub fn exp_hermitian(&self, t: f64) -> Result<Self> {
        self.try_map(|b| matrix::exp_hermitian(b, t))
    }

    fn with_blocks(&self, blocks: Vec<CMat>) -> Self {
        Self { algebra: self.algebra.clone(), blocks }
    }
}

pub(crate) fn global_cutoff(svds: &[Svd], tol: &ToleranceProfile) -> f64 {
    tol.cutoff(svds.iter().map(Svd::sigma_max).fold(0.0, f64::max))
}

fn positive_cutoff(eigs: &[Eigen], tol: &ToleranceProfile) -> Result<f64> {
    let lmax = eigs.iter().flat_map(|e| e.values.first().copied()).fold(0.0_f64, f64::max);
    for e in eigs {
        if let Some(&min_eig) = e.values.last() {
            if min_eig < -tol.residual_tol * lmax.max(1.0) {
                return Err(Error::NotPositive { min_eig });
            }
        }
    }
    Ok(tol.cutoff(lmax))
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:expr) => {
        impl $tr<&AlgebraElement> for &AlgebraElement {
            type Output = AlgebraElement;
            fn $m(self, rhs: &AlgebraElement) -> AlgebraElement {
                self.zip(rhs, $f)
            }
        }
        impl $tr<AlgebraElement> for AlgebraElement {
            type Output = AlgebraElement;
            fn $m(self, rhs: AlgebraElement) -> AlgebraElement {
                self.zip(&rhs, $f)
            }
        }
        impl $tr<&AlgebraElement> for AlgebraElement {
            type Output = AlgebraElement;
            fn $m(self, rhs: &AlgebraElement) -> AlgebraElement {
                self.zip(rhs, $f)
            }
        }
        impl $tr<AlgebraElement> for &AlgebraElement {
            type Output = AlgebraElement;
            fn $m(self, rhs: AlgebraElement) -> AlgebraElement {
                self.zip(&rhs, $f)
            }
        }
    };
}

binop!(Add, add, |a, b| a + b);
binop!(Sub, sub, |a, b| a - b);
binop!(Mul, mul, |a, b| a * b);

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.map(|b| -b)
    }
}

impl Neg for AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        -&self
    }
}

/// Orthogonal projection p = p² = p*.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection(AlgebraElement);

impl Projection {
    pub fn new(p: AlgebraElement, tol: &ToleranceProfile) -> Result<Self> {
        let residual = (&p * &p).dist(&p).max(p.hermiticity_residual());
        if residual > tol.residual_tol {
            return Err(Error::NotProjection { residual });
        }
        Ok(Self(p))
    }

    pub fn zero(alg: &BlockAlgebra) -> Self {
        Self(alg.zero())
    }

    pub fn identity(alg: &BlockAlgebra) -> Self {
        Self(alg.identity())
    }

    pub fn element(&self) -> &AlgebraElement {
        &self.0
    }

    pub fn into_element(self) -> AlgebraElement {
        self.0
    }

    pub fn complement(&self) -> Self {
        Self(&self.0.algebra.identity() - &self.0)
    }

    /// Rank of each block, read from the trace.
    pub fn block_ranks(&self) -> Vec<usize> {
        self.0.blocks.iter().map(|b| b.trace().re.round().max(0.0) as usize).collect()
    }

    /// Orthonormal basis of the range of each block (columns).
    pub fn range_bases(&self) -> Vec<CMat> {
        self.0
            .blocks
            .iter()
            .map(|b| {
                let e = matrix::hermitian_eig_unchecked(b).expect("projection eigensolve");
                let r = e.count_above(0.5);
                e.vectors.columns(0, r).clone_owned()
            })
            .collect()
    }
}

/// Partial isometry with cached supports r(u) = u*u and l(u) = uu*.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialIsometry {
    u: AlgebraElement,
    right: Projection,
    left: Projection,
}

impl PartialIsometry {
    pub fn new(u: AlgebraElement, tol: &ToleranceProfile) -> Result<Self> {
        let right = &u.adjoint() * &u;
        let left = &u * &u.adjoint();
        let residual = (&u * &right).dist(&u);
        if residual > tol.residual_tol {
            return Err(Error::NotPartialIsometry { residual });
        }
        let right = Projection::new(right, tol).map_err(|_| Error::NotPartialIsometry { residual })?;
        let left = Projection::new(left, tol).map_err(|_| Error::NotPartialIsometry { residual })?;
        Ok(Self { u, right, left })
    }

    pub fn from_projection(p: &Projection) -> Self {
        Self { u: p.0.clone(), right: p.clone(), left: p.clone() }
    }

    pub fn element(&self) -> &AlgebraElement {
        &self.u
    }

    pub fn right_support(&self) -> &Projection {
        &self.right
    }

    pub fn left_support(&self) -> &Projection {
        &self.left
    }

    pub fn adjoint(&self) -> Self {
        Self { u: self.u.adjoint(), right: self.left.clone(), left: self.right.clone() }
    }
}

/// Normal functional φ(x) = Tr(d·x).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFunctional {
    density: AlgebraElement,
}

impl NormalFunctional {
    pub fn new(density: AlgebraElement) -> Self {
        Self { density }
    }

    pub fn density(&self) -> &AlgebraElement {
        &self.density
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        self.density.algebra()
    }

    pub fn apply(&self, x: &AlgebraElement) -> Complex64 {
        (&self.density * x).trace()
    }

    /// φ*(x) = conj φ(x*), density d*.
    pub fn conj(&self) -> Self {
        Self { density: self.density.adjoint() }
    }

    pub fn is_hermitian(&self, tol: &ToleranceProfile) -> bool {
        self.density.is_hermitian(tol)
    }

    pub fn is_positive(&self, tol: &ToleranceProfile) -> bool {
        self.density.eigs(tol).and_then(|e| positive_cutoff(&e, tol)).is_ok()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.density.dist(&other.density)
    }

    /// Support σ_*(φ) of a positive functional.
    pub fn support(&self, tol: &ToleranceProfile) -> Result<Projection> {
        Ok(Projection(self.density.support_projection(tol)?))
    }
}

/// φ = u|φ| with density(|φ|) = (d*d)^{1/2} and u*u = support(|φ|).
pub fn functional_polar(phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<(PartialIsometry, NormalFunctional)> {
    let (u, h) = phi.density.polar(tol)?;
    let right = Projection(&u.adjoint() * &u);
    let left = Projection(&u * &u.adjoint());
    Ok((PartialIsometry { u, right, left }, NormalFunctional::new(h)))
}

/// (σ_l, σ_r) = (uu*, u*u).
pub fn supports(phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<(Projection, Projection)> {
    let (u, _) = functional_polar(phi, tol)?;
    Ok((u.left.clone(), u.right.clone()))
}

fn same_algebra(p: &Projection, q: &Projection) -> Result<()> {
    p.0.same_algebra(&q.0)
}

pub fn mvn_equivalent(p: &Projection, q: &Projection) -> Result<bool> {
    same_algebra(p, q)?;
    Ok(p.block_ranks() == q.block_ranks())
}

/// Witness u with u*u = p and uu* = q.
pub fn mvn_witness(p: &Projection, q: &Projection) -> Result<PartialIsometry> {
    if !mvn_equivalent(p, q)? {
        return Err(Error::SupportMismatch { residual: 1.0 });
    }
    let blocks = p.range_bases().iter().zip(q.range_bases().iter()).map(|(vp, vq)| vq * vp.adjoint()).collect();
    let u = p.0.with_blocks(blocks);
    Ok(PartialIsometry { u, right: p.clone(), left: q.clone() })
}

/// Independent route: equal blockwise ranks of p, q and of 1−p, 1−q, counted as
/// eigenvalues above ½ (a relative cutoff would count the roundoff left in 1−p
/// for p = 1 as rank).
pub fn unitary_equivalent(p: &Projection, q: &Projection) -> Result<bool> {
    same_algebra(p, q)?;
    let rank = |x: &AlgebraElement| -> Result<Vec<usize>> {
        x.blocks
            .iter()
            .map(|b| Ok(matrix::hermitian_eig_unchecked(b)?.values.iter().filter(|&&l| l > 0.5).count()))
            .collect()
    };
    let (pc, qc) = (p.complement(), q.complement());
    Ok(rank(&p.0)? == rank(&q.0)? && rank(&pc.0)? == rank(&qc.0)?)
}

/// Spectral projections of a positive density on its support, grouped by gaps.
#[derive(Debug, Clone)]
pub struct SpectralGroup {
    pub block: usize,
    pub value: f64,
    /// Orthonormal eigenvectors spanning the eigenspace.
    pub vectors: CMat,
}

impl SpectralGroup {
    pub fn multiplicity(&self) -> usize {
        self.vectors.ncols()
    }
}

pub fn spectral_groups(rho: &NormalFunctional, tol: &ToleranceProfile) -> Result<Vec<SpectralGroup>> {
    let eigs = rho.density.eigs(tol)?;
    let cut = positive_cutoff(&eigs, tol)?;
    let lmax = eigs.iter().flat_map(|e| e.values.first().copied()).fold(0.0_f64, f64::max);
    let gap = tol.rank_rel_tol * lmax;
    let mut out = Vec::new();
    for (k, e) in eigs.iter().enumerate() {
        let mut start = 0;
        let kept = e.count_above(cut);
        while start < kept {
            let mut end = start + 1;
            while end < kept && e.values[end - 1] - e.values[end] <= gap {
                end += 1;
            }
            let value = e.values[start..end].iter().sum::<f64>() / (end - start) as f64;
            out.push(SpectralGroup { block: k, value, vectors: e.vectors.columns(start, end - start).clone_owned() });
            start = end;
        }
    }
    Ok(out)
}

fn group_projection(alg: &BlockAlgebra, g: &SpectralGroup) -> AlgebraElement {
    let mut z = alg.zero();
    z.blocks[g.block] = &g.vectors * g.vectors.adjoint();
    z
}

/// Real basis of {x ∈ p₀Mp₀ : xd = dx}: V E_ab V* and i·V E_ab V* per eigenspace.
pub fn centralizer_basis(rho: &NormalFunctional, tol: &ToleranceProfile) -> Result<Vec<AlgebraElement>> {
    let alg = rho.algebra().clone();
    let mut out = Vec::new();
    for g in spectral_groups(rho, tol)? {
        let m = g.multiplicity();
        for a in 0..m {
            for b in 0..m {
                let mut z = alg.zero();
                z.blocks[g.block] = g.vectors.column(a) * g.vectors.column(b).adjoint();
                out.push(z.scale(c(0.0, 1.0)));
                out.push(z);
            }
        }
    }
    Ok(out)
}

/// Pinching onto the centralizer: Σ q_i (p₀xp₀) q_i.
pub fn conditional_expectation(rho: &NormalFunctional, x: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    rho.density.same_algebra(x)?;
    let alg = rho.algebra();
    let mut out = alg.zero();
    for g in spectral_groups(rho, tol)? {
        let q = group_projection(alg, &g);
        out = out + &q * x * &q;
    }
    Ok(out)
}

/// σ_t(x) = d^{it}·x·d^{−it} read through the support corner.
pub fn modular_automorphism(rho: &NormalFunctional, t: f64, x: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    rho.density.same_algebra(x)?;
    let dit = rho.density.imaginary_power(t, tol)?;
    Ok(&dit * x * dit.adjoint())
}

/// Density d ↦ u·d·u*, requiring u*u = σ_*(ρ).
pub fn coadjoint_apply(u: &PartialIsometry, rho: &NormalFunctional, tol: &ToleranceProfile) -> Result<NormalFunctional> {
    u.u.same_algebra(&rho.density)?;
    let support = rho.support(tol)?;
    let mismatch = u.right.0.dist(&support.0);
    if mismatch > tol.residual_tol {
        return Err(Error::NotComposable { mismatch });
    }
    Ok(NormalFunctional::new(&u.u * &rho.density * u.u.adjoint()))
}

/// Per-block descending nonzero spectra.
pub fn orbit_invariant(rho: &NormalFunctional, tol: &ToleranceProfile) -> Result<Vec<Vec<f64>>> {
    let eigs = rho.density.eigs(tol)?;
    let cut = positive_cutoff(&eigs, tol)?;
    Ok(eigs.iter().map(|e| e.values.iter().copied().filter(|&l| l > cut).collect()).collect())
}

pub fn orbit_equivalent(r1: &NormalFunctional, r2: &NormalFunctional, tol: &ToleranceProfile) -> Result<bool> {
    r1.density.same_algebra(&r2.density)?;
    let (a, b) = (orbit_invariant(r1, tol)?, orbit_invariant(r2, tol)?);
    Ok(spectra_match(&a, &b, tol.residual_tol))
}

pub(crate) fn spectra_match(a: &[Vec<f64>], b: &[Vec<f64>], eps: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.len() == y.len() && x.iter().zip(y).all(|(l, m)| (l - m).abs() <= eps * l.abs().max(m.abs()).max(1.0))
        })
}

/// Unitary w with w·d₁·w* = d₂ built from matched eigenbases; None if the spectra differ.
pub fn orbit_conjugator(r1: &NormalFunctional, r2: &NormalFunctional, tol: &ToleranceProfile) -> Result<Option<AlgebraElement>> {
    if !orbit_equivalent(r1, r2, tol)? {
        return Ok(None);
    }
    let e1 = r1.density.eigs(tol)?;
    let e2 = r2.density.eigs(tol)?;
    Ok(Some(r1.density.with_blocks(e1.iter().zip(e2.iter()).map(|(a, b)| &b.vectors * a.vectors.adjoint()).collect())))
}

/// Real matrix of a real-linear map on the algebra, columns = images of the real basis.
pub(crate) fn realify_map(basis: &[AlgebraElement], f: impl Fn(&AlgebraElement) -> Vec<f64>) -> DMatrix<f64> {
    let cols: Vec<Vec<f64>> = basis.iter().map(f).collect();
    let rows = cols.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Real basis of the corner p₀Mp₀ from an orthonormal frame of p₀.
pub fn corner_basis(p: &Projection) -> Vec<AlgebraElement> {
    let alg = p.0.algebra().clone();
    let mut out = Vec::new();
    for (k, v) in p.range_bases().iter().enumerate() {
        for a in 0..v.ncols() {
            for b in 0..v.ncols() {
                let mut z = alg.zero();
                z.blocks[k] = v.column(a) * v.column(b).adjoint();
                out.push(z.scale(c(0.0, 1.0)));
                out.push(z);
            }
        }
    }
    out
}

/// Real dimensions (centralizer, kernel of E_ρ on the corner, corner) computed
/// independently: the first from multiplicities, the second from a numerical null space.
pub fn expectation_splitting_dims(rho: &NormalFunctional, tol: &ToleranceProfile) -> Result<(usize, usize, usize)> {
    let groups = spectral_groups(rho, tol)?;
    let centralizer = 2 * groups.iter().map(|g| g.multiplicity().pow(2)).sum::<usize>();
    let corner = corner_basis(&rho.support(tol)?);
    let map = realify_map(&corner, |b| conditional_expectation(rho, b, tol).expect("pinching").realify());
    let (_, ker) = matrix::real_null_space(&map, tol.rank_rel_tol.max(1e-10))?;
    Ok((centralizer, ker.ncols(), corner.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn m2() -> BlockAlgebra {
        BlockAlgebra::full(2).unwrap()
    }

    fn el(alg: &BlockAlgebra, rows: &[&[f64]]) -> AlgebraElement {
        let n = rows.len();
        alg.element(vec![CMat::from_fn(n, n, |i, j| c(rows[i][j], 0.0))]).unwrap()
    }

    fn diag(alg: &BlockAlgebra, d: &[f64]) -> AlgebraElement {
        alg.element(vec![matrix::real_diag(d)]).unwrap()
    }

    #[test]
    fn algebra_construction() {
        assert!(BlockAlgebra::new(vec![]).is_err());
        assert!(BlockAlgebra::new(vec![2, 0]).is_err());
        let a = BlockAlgebra::new(vec![2, 3]).unwrap();
        assert_eq!(a.ambient_dim(), 5);
        assert_eq!(a.complex_dim(), 13);
        assert_eq!(a.real_basis().len(), 26);
        let x = a.real_basis()[7].clone() + a.identity();
        assert_eq!(a.from_ambient(&x.embed(), &tol()).unwrap(), x);
        let mut m = x.embed();
        m[(0, 4)] = c(1.0, 0.0);
        assert!(a.from_ambient(&m, &tol()).is_err());
        assert_eq!(a.from_real(&x.realify()), x);
    }

    #[test]
    fn functional_polar_examples() {
        let a = m2();
        let (u, h) = functional_polar(&NormalFunctional::new(diag(&a, &[0.0, 2.0])), &tol()).unwrap();
        assert!(u.element().dist(&diag(&a, &[0.0, 1.0])) < 1e-14);
        assert!(h.density().dist(&diag(&a, &[0.0, 2.0])) < 1e-14);

        let phi = NormalFunctional::new(el(&a, &[&[0.0, 2.0], &[0.0, 0.0]]));
        let (u, h) = functional_polar(&phi, &tol()).unwrap();
        assert!(u.element().dist(&el(&a, &[&[0.0, 1.0], &[0.0, 0.0]])) < 1e-14);
        assert!(h.density().dist(&diag(&a, &[0.0, 2.0])) < 1e-14);
        let (l, r) = supports(&phi, &tol()).unwrap();
        assert!(l.element().dist(&diag(&a, &[1.0, 0.0])) < 1e-14);
        assert!(r.element().dist(&diag(&a, &[0.0, 1.0])) < 1e-14);

        let (u, h) = functional_polar(&NormalFunctional::new(a.zero()), &tol()).unwrap();
        assert_eq!(u.element().norm(), 0.0);
        assert_eq!(h.density().norm(), 0.0);

        let (l, r) = supports(&NormalFunctional::new(a.identity()), &tol()).unwrap();
        assert!(l.element().dist(&a.identity()) < 1e-14 && r.element().dist(&a.identity()) < 1e-14);
    }

    #[test]
    fn equivalence_examples() {
        let t = tol();
        let a = m2();
        let p = Projection::new(diag(&a, &[1.0, 0.0]), &t).unwrap();
        let q = Projection::new(diag(&a, &[0.0, 1.0]), &t).unwrap();
        assert!(mvn_equivalent(&p, &q).unwrap() && unitary_equivalent(&p, &q).unwrap());
        assert!(!mvn_equivalent(&p, &Projection::identity(&a)).unwrap());
        let w = mvn_witness(&p, &q).unwrap();
        assert!((&w.element().adjoint() * w.element()).dist(p.element()) < 1e-14);

        let b = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mk = |d1: &[f64], d2: &[f64]| {
            Projection::new(b.element(vec![matrix::real_diag(d1), matrix::real_diag(d2)]).unwrap(), &t).unwrap()
        };
        assert!(mvn_equivalent(&mk(&[1.0, 0.0], &[1.0, 1.0, 0.0]), &mk(&[0.0, 1.0], &[0.0, 1.0, 1.0])).unwrap());
        let m3 = BlockAlgebra::full(3).unwrap();
        let r1 = Projection::new(diag(&m3, &[1.0, 0.0, 0.0]), &t).unwrap();
        let r2 = Projection::new(diag(&m3, &[1.0, 1.0, 0.0]), &t).unwrap();
        assert!(!unitary_equivalent(&r1, &r2).unwrap());
        assert!(unitary_equivalent(&r1, &r1).unwrap());
        assert_eq!(mvn_equivalent(&p, &r1), Err(Error::AlgebraMismatch));
    }

    #[test]
    fn centralizer_dimensions() {
        let t = tol();
        let m3 = BlockAlgebra::full(3).unwrap();
        let rho = NormalFunctional::new(diag(&m3, &[0.25, 0.25, 0.5]));
        assert_eq!(centralizer_basis(&rho, &t).unwrap().len(), 2 * 5);
        let rho = NormalFunctional::new(diag(&m3, &[1.0, 2.0, 3.0]));
        let basis = centralizer_basis(&rho, &t).unwrap();
        assert_eq!(basis.len(), 6);
        for b in &basis {
            assert!(b.commutator(rho.density()).norm() < 1e-14);
        }
        let rho = NormalFunctional::new(m3.identity());
        assert_eq!(centralizer_basis(&rho, &t).unwrap().len(), 18);
        assert_eq!(expectation_splitting_dims(&NormalFunctional::new(diag(&m3, &[0.25, 0.25, 0.5])), &t).unwrap(), (10, 8, 18));
    }

    #[test]
    fn conditional_expectation_examples() {
        let t = tol();
        let a = m2();
        let rho = NormalFunctional::new(diag(&a, &[1.0, 2.0]));
        let x = el(&a, &[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(conditional_expectation(&rho, &x, &t).unwrap().norm() < 1e-14);
        let y = diag(&a, &[3.0, -1.0]);
        assert!(conditional_expectation(&rho, &y, &t).unwrap().dist(&y) < 1e-14);
        let tr = NormalFunctional::new(a.identity().scale_re(0.5));
        assert!(conditional_expectation(&tr, &x, &t).unwrap().dist(&x) < 1e-14);
    }

    #[test]
    fn modular_automorphism_examples() {
        let t = tol();
        let a = m2();
        let (p, q) = (0.3, 1.7);
        let rho = NormalFunctional::new(diag(&a, &[p, q]));
        let x = el(&a, &[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(modular_automorphism(&rho, 0.0, &x, &t).unwrap().dist(&x) < 1e-14);
        let s = 0.9;
        let want = x.scale(Complex64::from_polar(1.0, s * (p / q).ln()));
        assert!(modular_automorphism(&rho, s, &x, &t).unwrap().dist(&want) < 1e-14);
        assert!(modular_automorphism(&rho, s, rho.density(), &t).unwrap().dist(rho.density()) < 1e-14);
    }

    #[test]
    fn coadjoint_and_orbits() {
        let t = tol();
        let a = m2();
        let rho = NormalFunctional::new(diag(&a, &[0.0, 3.0]));
        let u = PartialIsometry::new(el(&a, &[&[0.0, 1.0], &[0.0, 0.0]]), &t).unwrap();
        let out = coadjoint_apply(&u, &rho, &t).unwrap();
        assert!(out.density().dist(&diag(&a, &[3.0, 0.0])) < 1e-14);
        let unit = PartialIsometry::from_projection(&rho.support(&t).unwrap());
        assert!(coadjoint_apply(&unit, &rho, &t).unwrap().dist(&rho) < 1e-14);
        let bad = PartialIsometry::from_projection(&Projection::identity(&a));
        assert!(matches!(coadjoint_apply(&bad, &rho, &t), Err(Error::NotComposable { .. })));

        assert!(orbit_equivalent(&rho, &out, &t).unwrap());
        assert!(!orbit_equivalent(
            &NormalFunctional::new(diag(&a, &[1.0, 2.0])),
            &NormalFunctional::new(diag(&a, &[1.0, 3.0])),
            &t
        )
        .unwrap());
        assert_eq!(orbit_invariant(&rho, &t).unwrap(), vec![vec![3.0]]);
        let w = orbit_conjugator(&rho, &out, &t).unwrap().unwrap();
        assert!((&w * rho.density() * w.adjoint()).dist(out.density()) < 1e-14);
        assert!(matches!(
            orbit_invariant(&NormalFunctional::new(diag(&a, &[1.0, -1.0])), &t),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn full_rank_projections_are_unitarily_equivalent() {
        let a = BlockAlgebra::new(vec![1, 2, 2]).unwrap();
        let mut rng = crate::sampling::trial_rng(116, 0);
        for _ in 0..50 {
            let p = crate::sampling::projection(&mut rng, &a, &[1, 2, 2]);
            let q = crate::sampling::projection(&mut rng, &a, &[1, 2, 2]);
            assert!(unitary_equivalent(&p, &q).unwrap());
            assert!(mvn_equivalent(&p, &q).unwrap());
        }
    }
}
