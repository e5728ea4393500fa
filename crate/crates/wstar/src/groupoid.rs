//! Executable groupoids: partial isometries, partially invertible elements,
//! the predual groupoid and the coadjoint action groupoid, together with the
//! maps connecting them and a randomized axiom checker.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::algebra::{
    coadjoint_apply, functional_polar, orbit_equivalent, orbit_invariant, spectral_groups, AlgebraElement, BlockAlgebra,
    NormalFunctional, PartialIsometry, Projection, SpectralGroup,
};
use crate::error::{Error, Result};
use crate::matrix::{c, CMat};
use crate::sampling;
use crate::standard::{StandardGroupoid, StandardVector};
use crate::tolerance::ToleranceProfile;

/// How composition treats a source/target mismatch inside tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Composability {
    #[default]
    Strict,
    /// Replace the left factor's source data by the right factor's target first.
    Repair,
}

pub trait Groupoid {
    type Arrow: Clone;
    type Object: Clone;

    fn source(&self, a: &Self::Arrow) -> Result<Self::Object>;
    fn target(&self, a: &Self::Arrow) -> Result<Self::Object>;
    /// a·b, defined when source(a) = target(b).
    fn compose(&self, a: &Self::Arrow, b: &Self::Arrow) -> Result<Self::Arrow>;
    fn inverse(&self, a: &Self::Arrow) -> Result<Self::Arrow>;
    fn unit(&self, x: &Self::Object) -> Result<Self::Arrow>;
    fn arrow_distance(&self, a: &Self::Arrow, b: &Self::Arrow) -> f64;
    fn object_distance(&self, x: &Self::Object, y: &Self::Object) -> f64;
}

pub(crate) fn check_mismatch(mismatch: f64, tol: &ToleranceProfile, mode: Composability) -> Result<bool> {
    if mismatch <= tol.residual_tol {
        Ok(false)
    } else if mode == Composability::Repair {
        Ok(true)
    } else {
        Err(Error::NotComposable { mismatch })
    }
}

/// 𝒰(M) ⇉ 𝓛(M).
#[derive(Debug, Clone, Copy, Default)]
pub struct PartialIsometryGroupoid {
    pub tol: ToleranceProfile,
    pub mode: Composability,
}

impl Groupoid for PartialIsometryGroupoid {
    type Arrow = PartialIsometry;
    type Object = Projection;

    fn source(&self, u: &PartialIsometry) -> Result<Projection> {
        Ok(u.right_support().clone())
    }

    fn target(&self, u: &PartialIsometry) -> Result<Projection> {
        Ok(u.left_support().clone())
    }

    fn compose(&self, u: &PartialIsometry, v: &PartialIsometry) -> Result<PartialIsometry> {
        let mismatch = u.right_support().element().dist(v.left_support().element());
        let left = if check_mismatch(mismatch, &self.tol, self.mode)? {
            u.element() * v.left_support().element()
        } else {
            u.element().clone()
        };
        PartialIsometry::new(&left * v.element(), &self.tol)
    }

    fn inverse(&self, u: &PartialIsometry) -> Result<PartialIsometry> {
        Ok(u.adjoint())
    }

    fn unit(&self, p: &Projection) -> Result<PartialIsometry> {
        Ok(PartialIsometry::from_projection(p))
    }

    fn arrow_distance(&self, a: &PartialIsometry, b: &PartialIsometry) -> f64 {
        a.element().dist(b.element())
    }

    fn object_distance(&self, x: &Projection, y: &Projection) -> f64 {
        x.element().dist(y.element())
    }
}

/// 𝒢(M) ⇉ 𝓛(M): partially invertible elements.
#[derive(Debug, Clone, Copy, Default)]
pub struct PartiallyInvertibleGroupoid {
    pub tol: ToleranceProfile,
    pub mode: Composability,
}

impl PartiallyInvertibleGroupoid {
    fn supports(&self, x: &AlgebraElement) -> Result<(Projection, Projection)> {
        // the guard band decides partial invertibility
        x.partial_inverse(&self.tol)?;
        let l = Projection::new(x.left_support(&self.tol)?, &self.tol)?;
        let r = Projection::new(x.right_support(&self.tol)?, &self.tol)?;
        Ok((l, r))
    }
}

impl Groupoid for PartiallyInvertibleGroupoid {
    type Arrow = AlgebraElement;
    type Object = Projection;

    fn source(&self, x: &AlgebraElement) -> Result<Projection> {
        Ok(self.supports(x)?.1)
    }

    fn target(&self, x: &AlgebraElement) -> Result<Projection> {
        Ok(self.supports(x)?.0)
    }

    fn compose(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
        let rx = self.source(x)?;
        let ly = self.target(y)?;
        let mismatch = rx.element().dist(ly.element());
        let left = if check_mismatch(mismatch, &self.tol, self.mode)? { x * ly.element() } else { x.clone() };
        let xy = &left * y;
        xy.partial_inverse(&self.tol)?;
        Ok(xy)
    }

    fn inverse(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        x.partial_inverse(&self.tol)
    }

    fn unit(&self, p: &Projection) -> Result<AlgebraElement> {
        Ok(p.element().clone())
    }

    fn arrow_distance(&self, a: &AlgebraElement, b: &AlgebraElement) -> f64 {
        a.dist(b)
    }

    fn object_distance(&self, x: &Projection, y: &Projection) -> f64 {
        x.element().dist(y.element())
    }
}

/// The involution 𝒥(x) = ι(x)* on 𝒢(M); its fixed points are the partial isometries.
pub fn involution_j(x: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    Ok(x.partial_inverse(tol)?.adjoint())
}

/// M_* ⇉ M_*^+ with s(φ) = |φ|, t(φ) = u|φ|u*.
#[derive(Debug, Clone, Copy, Default)]
pub struct PredualGroupoid {
    pub tol: ToleranceProfile,
    pub mode: Composability,
}

impl Groupoid for PredualGroupoid {
    type Arrow = NormalFunctional;
    type Object = NormalFunctional;

    fn source(&self, phi: &NormalFunctional) -> Result<NormalFunctional> {
        Ok(functional_polar(phi, &self.tol)?.1)
    }

    fn target(&self, phi: &NormalFunctional) -> Result<NormalFunctional> {
        let (u, abs) = functional_polar(phi, &self.tol)?;
        Ok(NormalFunctional::new(u.element() * abs.density() * u.element().adjoint()))
    }

    fn compose(&self, p1: &NormalFunctional, p2: &NormalFunctional) -> Result<NormalFunctional> {
        let (u1, a1) = functional_polar(p1, &self.tol)?;
        let (u2, a2) = functional_polar(p2, &self.tol)?;
        let t2 = u2.element() * a2.density() * u2.element().adjoint();
        let mismatch = a1.density().dist(&t2);
        if check_mismatch(mismatch, &self.tol, self.mode)? {
            // repaired left factor u1·t(φ2); its polar factor is u1 restricted to supp t(φ2)
            let repaired = NormalFunctional::new(u1.element() * &t2);
            let (ur, _) = functional_polar(&repaired, &self.tol)?;
            return Ok(NormalFunctional::new(ur.element() * u2.element() * a2.density()));
        }
        Ok(NormalFunctional::new(u1.element() * u2.element() * a2.density()))
    }

    fn inverse(&self, phi: &NormalFunctional) -> Result<NormalFunctional> {
        Ok(phi.conj())
    }

    fn unit(&self, rho: &NormalFunctional) -> Result<NormalFunctional> {
        Ok(rho.clone())
    }

    fn arrow_distance(&self, a: &NormalFunctional, b: &NormalFunctional) -> f64 {
        a.dist(b)
    }

    fn object_distance(&self, x: &NormalFunctional, y: &NormalFunctional) -> f64 {
        x.dist(y)
    }
}

/// Arrow (u, ρ) of the coadjoint action groupoid, u*u = σ_*(ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct CoadjointArrow {
    pub u: PartialIsometry,
    pub rho: NormalFunctional,
}

impl CoadjointArrow {
    pub fn new(u: PartialIsometry, rho: NormalFunctional, tol: &ToleranceProfile) -> Result<Self> {
        let support = rho.support(tol)?;
        let residual = u.right_support().element().dist(support.element());
        if residual > tol.residual_tol {
            return Err(Error::InvalidArrow(format!("u*u differs from the support of rho by {residual:.3e}")));
        }
        Ok(Self { u, rho })
    }

    pub fn target_density(&self) -> AlgebraElement {
        self.u.element() * self.rho.density() * self.u.element().adjoint()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CoadjointGroupoid {
    pub tol: ToleranceProfile,
    pub mode: Composability,
}

impl Groupoid for CoadjointGroupoid {
    type Arrow = CoadjointArrow;
    type Object = NormalFunctional;

    fn source(&self, a: &CoadjointArrow) -> Result<NormalFunctional> {
        Ok(a.rho.clone())
    }

    fn target(&self, a: &CoadjointArrow) -> Result<NormalFunctional> {
        Ok(NormalFunctional::new(a.target_density()))
    }

    fn compose(&self, a: &CoadjointArrow, b: &CoadjointArrow) -> Result<CoadjointArrow> {
        let tb = b.target_density();
        let mismatch = a.rho.density().dist(&tb);
        let u = if check_mismatch(mismatch, &self.tol, self.mode)? {
            a.u.element() * b.u.left_support().element()
        } else {
            a.u.element().clone()
        };
        CoadjointArrow::new(PartialIsometry::new(&u * b.u.element(), &self.tol)?, b.rho.clone(), &self.tol)
    }

    fn inverse(&self, a: &CoadjointArrow) -> Result<CoadjointArrow> {
        Ok(CoadjointArrow { u: a.u.adjoint(), rho: NormalFunctional::new(a.target_density()) })
    }

    fn unit(&self, rho: &NormalFunctional) -> Result<CoadjointArrow> {
        Ok(CoadjointArrow { u: PartialIsometry::from_projection(&rho.support(&self.tol)?), rho: rho.clone() })
    }

    fn arrow_distance(&self, a: &CoadjointArrow, b: &CoadjointArrow) -> f64 {
        a.u.element().dist(b.u.element()).max(a.rho.dist(&b.rho))
    }

    fn object_distance(&self, x: &NormalFunctional, y: &NormalFunctional) -> f64 {
        x.dist(y)
    }
}

/// Ξ(u, ρ): the functional with density u·d_ρ.
pub fn iso_xi(a: &CoadjointArrow) -> NormalFunctional {
    NormalFunctional::new(a.u.element() * a.rho.density())
}

/// Ξ⁻¹ through the functional polar decomposition.
pub fn iso_xi_inv(phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<CoadjointArrow> {
    let (u, abs) = functional_polar(phi, tol)?;
    Ok(CoadjointArrow { u, rho: abs })
}

/// Orbit of ρ₀ represented by its invariant.
#[derive(Debug, Clone)]
pub struct OrbitDescriptor {
    pub base: NormalFunctional,
    pub support: Projection,
    pub spectra: Vec<Vec<f64>>,
}

impl OrbitDescriptor {
    pub fn new(base: NormalFunctional, tol: &ToleranceProfile) -> Result<Self> {
        let spectra = orbit_invariant(&base, tol)?;
        let support = base.support(tol)?;
        Ok(Self { base, support, spectra })
    }

    pub fn contains(&self, rho: &NormalFunctional, tol: &ToleranceProfile) -> Result<bool> {
        orbit_equivalent(&self.base, rho, tol)
    }
}

/// Lie algebra of the stabilizer U_ρ₀: anti-Hermitian corner elements commuting with d.
#[derive(Debug, Clone)]
pub struct StabilizerData {
    pub basis: Vec<AlgebraElement>,
    pub groups: Vec<SpectralGroup>,
}

impl StabilizerData {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Element Σ c_k b_k of the Lie algebra.
    pub fn combination(&self, coeffs: &[f64]) -> AlgebraElement {
        let alg = self.basis.first().map(|b| b.algebra().clone());
        match alg {
            None => panic!("empty stabilizer basis"),
            Some(alg) => self.basis.iter().zip(coeffs).fold(alg.zero(), |acc, (b, &x)| acc + b.scale_re(x)),
        }
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, alg: &BlockAlgebra) -> AlgebraElement {
        if self.basis.is_empty() {
            return alg.zero();
        }
        let coeffs: Vec<f64> = (0..self.basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        self.combination(&coeffs)
    }
}

/// Hermitian basis of M_m: E_aa, E_ab + E_ba, i(E_ab − E_ba).
fn hermitian_basis(m: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(m * m);
    for a in 0..m {
        for b in a..m {
            if a == b {
                let mut e = CMat::zeros(m, m);
                e[(a, a)] = c(1.0, 0.0);
                out.push(e);
            } else {
                let mut s = CMat::zeros(m, m);
                s[(a, b)] = c(1.0, 0.0);
                s[(b, a)] = c(1.0, 0.0);
                out.push(s);
                let mut t = CMat::zeros(m, m);
                t[(a, b)] = c(0.0, 1.0);
                t[(b, a)] = c(0.0, -1.0);
                out.push(t);
            }
        }
    }
    out
}

pub fn stabilizer_lie_algebra(rho: &NormalFunctional, tol: &ToleranceProfile) -> Result<StabilizerData> {
    let groups = spectral_groups(rho, tol)?;
    let alg = rho.algebra().clone();
    let mut basis = Vec::new();
    for g in &groups {
        for h in hermitian_basis(g.multiplicity()) {
            let mut z = alg.zero();
            let mut blocks = z.clone().into_blocks();
            blocks[g.block] = &g.vectors * h * g.vectors.adjoint() * c(0.0, 1.0);
            z = alg.element(blocks)?;
            basis.push(z);
        }
    }
    Ok(StabilizerData { basis, groups })
}

/// Ψ(u, v) = (u·v*, v·ρ₀·v*) for u, v ∈ P₀.
pub fn gauge_iso_psi(
    u: &PartialIsometry,
    v: &PartialIsometry,
    rho0: &NormalFunctional,
    tol: &ToleranceProfile,
) -> Result<CoadjointArrow> {
    let p0 = rho0.support(tol)?;
    let residual = u.right_support().element().dist(p0.element()).max(v.right_support().element().dist(p0.element()));
    if residual > tol.residual_tol {
        return Err(Error::SupportMismatch { residual });
    }
    let w = PartialIsometry::new(u.element() * v.element().adjoint(), tol)?;
    let rho = coadjoint_apply(v, rho0, tol)?;
    CoadjointArrow::new(w, rho, tol)
}

/// Max residuals of the groupoid laws.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AxiomResiduals {
    pub associativity: f64,
    pub unit: f64,
    pub inverse: f64,
    pub source_target: f64,
}

impl AxiomResiduals {
    pub fn max(&self) -> f64 {
        self.associativity.max(self.unit).max(self.inverse).max(self.source_target)
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            associativity: self.associativity.max(o.associativity),
            unit: self.unit.max(o.unit),
            inverse: self.inverse.max(o.inverse),
            source_target: self.source_target.max(o.source_target),
        }
    }
}

/// Evaluates every law on a composable chain a·b·c.
pub fn check_axioms<G: Groupoid>(g: &G, a: &G::Arrow, b: &G::Arrow, c3: &G::Arrow) -> Result<AxiomResiduals> {
    let ab = g.compose(a, b)?;
    let bc = g.compose(b, c3)?;
    let associativity = g.arrow_distance(&g.compose(&ab, c3)?, &g.compose(a, &bc)?);

    let mut unit = 0.0_f64;
    let mut inverse = 0.0_f64;
    let mut st = 0.0_f64;
    for x in [a, b, c3] {
        let (s, t) = (g.source(x)?, g.target(x)?);
        let (us, ut) = (g.unit(&s)?, g.unit(&t)?);
        unit = unit.max(g.arrow_distance(&g.compose(&ut, x)?, x)).max(g.arrow_distance(&g.compose(x, &us)?, x));
        let xi = g.inverse(x)?;
        inverse = inverse
            .max(g.arrow_distance(&g.compose(&xi, x)?, &us))
            .max(g.arrow_distance(&g.compose(x, &xi)?, &ut))
            .max(g.arrow_distance(&g.inverse(&xi)?, x));
        st = st
            .max(g.object_distance(&g.source(&xi)?, &t))
            .max(g.object_distance(&g.target(&xi)?, &s))
            .max(g.object_distance(&g.source(&us)?, &s))
            .max(g.object_distance(&g.target(&us)?, &s));
    }
    for (x, y, xy) in [(a, b, &ab), (b, c3, &bc)] {
        st = st
            .max(g.object_distance(&g.source(xy)?, &g.source(y)?))
            .max(g.object_distance(&g.target(xy)?, &g.target(x)?));
    }
    Ok(AxiomResiduals { associativity, unit, inverse, source_target: st })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupoidKind {
    PartialIsometry,
    PartiallyInvertible,
    Predual,
    Coadjoint,
    Standard,
}

impl GroupoidKind {
    pub const ALL: [GroupoidKind; 5] = [
        GroupoidKind::PartialIsometry,
        GroupoidKind::PartiallyInvertible,
        GroupoidKind::Predual,
        GroupoidKind::Coadjoint,
        GroupoidKind::Standard,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            GroupoidKind::PartialIsometry => "partial-isometry",
            GroupoidKind::PartiallyInvertible => "partially-invertible",
            GroupoidKind::Predual => "predual",
            GroupoidKind::Coadjoint => "coadjoint",
            GroupoidKind::Standard => "standard",
        }
    }
}

impl fmt::Display for GroupoidKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupoidKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

/// Four projections of equal blockwise rank and the three partial isometries
/// p0 → p1 → p2 → p3 between them, returned as (u1, u2, u3) so that u1·u2·u3 composes.
pub fn sample_pi_chain<R: Rng + ?Sized>(
    rng: &mut R,
    alg: &BlockAlgebra,
    tol: &ToleranceProfile,
) -> Result<(Projection, [PartialIsometry; 3])> {
    let mut r = sampling::ranks(rng, alg, 0);
    if r.iter().all(|&k| k == 0) {
        r[0] = 1;
    }
    let ps: Vec<Projection> = (0..4).map(|_| sampling::projection(rng, alg, &r)).collect();
    let u3 = sampling::partial_isometry(rng, &ps[0], &ps[1], tol)?;
    let u2 = sampling::partial_isometry(rng, &ps[1], &ps[2], tol)?;
    let u1 = sampling::partial_isometry(rng, &ps[2], &ps[3], tol)?;
    Ok((ps[0].clone(), [u1, u2, u3]))
}

pub fn sample_coadjoint_chain<R: Rng + ?Sized>(
    rng: &mut R,
    alg: &BlockAlgebra,
    tol: &ToleranceProfile,
) -> Result<[CoadjointArrow; 3]> {
    let (p0, [u1, u2, u3]) = sample_pi_chain(rng, alg, tol)?;
    let rho3 = NormalFunctional::new(sampling::positive_on(rng, &p0, 0.5, 2.0));
    let rho2 = coadjoint_apply(&u3, &rho3, tol)?;
    let rho1 = coadjoint_apply(&u2, &rho2, tol)?;
    Ok([
        CoadjointArrow::new(u1, rho1, tol)?,
        CoadjointArrow::new(u2, rho2, tol)?,
        CoadjointArrow::new(u3, rho3, tol)?,
    ])
}

fn run_chain(kind: GroupoidKind, alg: &BlockAlgebra, seed: u64, trial: u64, tol: &ToleranceProfile, mode: Composability) -> Result<AxiomResiduals> {
    let mut rng = sampling::trial_rng(seed, trial);
    match kind {
        GroupoidKind::PartialIsometry => {
            let (_, [a, b, c3]) = sample_pi_chain(&mut rng, alg, tol)?;
            check_axioms(&PartialIsometryGroupoid { tol: *tol, mode }, &a, &b, &c3)
        }
        GroupoidKind::PartiallyInvertible => {
            let (_, us) = sample_pi_chain(&mut rng, alg, tol)?;
            let xs: Vec<AlgebraElement> = us
                .iter()
                .map(|u| u.element() * sampling::positive_on(&mut rng, u.right_support(), 0.5, 2.0))
                .collect();
            check_axioms(&PartiallyInvertibleGroupoid { tol: *tol, mode }, &xs[0], &xs[1], &xs[2])
        }
        GroupoidKind::Predual => {
            let arrows = sample_coadjoint_chain(&mut rng, alg, tol)?;
            let [a, b, c3] = arrows.map(|a| iso_xi(&a));
            check_axioms(&PredualGroupoid { tol: *tol, mode }, &a, &b, &c3)
        }
        GroupoidKind::Coadjoint => {
            let [a, b, c3] = sample_coadjoint_chain(&mut rng, alg, tol)?;
            check_axioms(&CoadjointGroupoid { tol: *tol, mode }, &a, &b, &c3)
        }
        GroupoidKind::Standard => {
            let (p0, [u1, u2, u3]) = sample_pi_chain(&mut rng, alg, tol)?;
            let xi3 = sampling::positive_on(&mut rng, &p0, 0.5, 2.0);
            let xi2 = u3.element() * &xi3 * u3.element().adjoint();
            let xi1 = u2.element() * &xi2 * u2.element().adjoint();
            let g3 = StandardVector::new(u3.element() * &xi3);
            let g2 = StandardVector::new(u2.element() * &xi2);
            let g1 = StandardVector::new(u1.element() * &xi1);
            check_axioms(&StandardGroupoid { tol: *tol, mode }, &g1, &g2, &g3)
        }
    }
}

#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub kind: GroupoidKind,
    pub trials: usize,
    pub seed: u64,
    pub residuals: AxiomResiduals,
}

/// Runs `trials` independent chains; deterministic in `seed`.
pub fn axiom_check(
    kind: GroupoidKind,
    alg: &BlockAlgebra,
    trials: usize,
    seed: u64,
    tol: &ToleranceProfile,
) -> Result<AxiomReport> {
    axiom_check_with_mode(kind, alg, trials, seed, tol, Composability::Strict)
}

pub fn axiom_check_with_mode(
    kind: GroupoidKind,
    alg: &BlockAlgebra,
    trials: usize,
    seed: u64,
    tol: &ToleranceProfile,
    mode: Composability,
) -> Result<AxiomReport> {
    if trials == 0 {
        return Err(Error::InvalidTrials);
    }
    let residuals = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_chain(kind, alg, seed, t, tol, mode))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(AxiomResiduals::default(), AxiomResiduals::merge);
    Ok(AxiomReport { kind, trials, seed, residuals })
}

/// Max deviation of Ξ from a groupoid morphism on a composable pair a·b.
pub fn xi_intertwining_residual(a: &CoadjointArrow, b: &CoadjointArrow, tol: &ToleranceProfile) -> Result<f64> {
    let cg = CoadjointGroupoid { tol: *tol, mode: Composability::Strict };
    let pg = PredualGroupoid { tol: *tol, mode: Composability::Strict };
    let (xa, xb) = (iso_xi(a), iso_xi(b));
    let mut r = iso_xi(&cg.compose(a, b)?).dist(&pg.compose(&xa, &xb)?);
    r = r.max(iso_xi(&cg.inverse(a)?).dist(&pg.inverse(&xa)?));
    r = r.max(pg.source(&xa)?.dist(&cg.source(a)?));
    r = r.max(pg.target(&xa)?.dist(&cg.target(a)?));
    r = r.max(iso_xi(&cg.unit(&a.rho)?).dist(&pg.unit(&a.rho)?));
    let back = iso_xi_inv(&xa, tol)?;
    r = r.max(cg.arrow_distance(&back, a));
    Ok(r)
}

/// Max deviation of Ψ from a groupoid isomorphism on u, v, w ∈ P₀ and g ∈ U_ρ₀.
pub fn psi_intertwining_residual(
    u: &PartialIsometry,
    v: &PartialIsometry,
    w: &PartialIsometry,
    g: &AlgebraElement,
    rho0: &NormalFunctional,
    tol: &ToleranceProfile,
) -> Result<f64> {
    let cg = CoadjointGroupoid { tol: *tol, mode: Composability::Strict };
    let psi = |a: &PartialIsometry, b: &PartialIsometry| gauge_iso_psi(a, b, rho0, tol);
    let uv = psi(u, v)?;
    let mut r = cg.arrow_distance(&cg.compose(&uv, &psi(v, w)?)?, &psi(u, w)?);
    r = r.max(cg.arrow_distance(&psi(v, u)?, &cg.inverse(&uv)?));
    r = r.max(cg.source(&uv)?.dist(&coadjoint_apply(v, rho0, tol)?));
    r = r.max(cg.target(&uv)?.dist(&coadjoint_apply(u, rho0, tol)?));
    r = r.max(cg.arrow_distance(&psi(u, u)?, &cg.unit(&coadjoint_apply(u, rho0, tol)?)?));
    let ug = PartialIsometry::new(u.element() * g, tol)?;
    let vg = PartialIsometry::new(v.element() * g, tol)?;
    r = r.max(cg.arrow_distance(&psi(&ug, &vg)?, &uv));
    Ok(r)
}

/// Element of U_ρ₀ ⊂ U(p₀Mp₀): exponential of a stabilizer generator, cut to the corner.
pub fn stabilizer_group_element<R: Rng + ?Sized>(
    rng: &mut R,
    stab: &StabilizerData,
    p0: &Projection,
) -> Result<AlgebraElement> {
    let alg = p0.element().algebra();
    let x = stab.random_element(rng, alg);
    Ok(x.exp_anti_hermitian(1.0)? * p0.element())
}
