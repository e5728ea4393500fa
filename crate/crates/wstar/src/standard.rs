//! The standard form of a block algebra: H = M with the Hilbert–Schmidt inner
//! product, J = adjoint, P = positive cone, plus the expectation maps, the
//! standard groupoid, the dual-pair fibre geometry and the modular machinery.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{
    orbit_invariant, AlgebraElement, BlockAlgebra, NormalFunctional, PartialIsometry, Projection,
};
use crate::error::{Error, Result};
use crate::groupoid::{check_mismatch, sample_pi_chain, CoadjointArrow, Composability, Groupoid};
use crate::matrix;
use crate::sampling;
use crate::tolerance::ToleranceProfile;

/// A vector of the standard Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardVector(AlgebraElement);

impl StandardVector {
    pub fn new(gamma: AlgebraElement) -> Self {
        Self(gamma)
    }

    pub fn vector(&self) -> &AlgebraElement {
        &self.0
    }

    pub fn into_vector(self) -> AlgebraElement {
        self.0
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        self.0.algebra()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        self.0.dist(&other.0)
    }
}

impl From<AlgebraElement> for StandardVector {
    fn from(x: AlgebraElement) -> Self {
        Self(x)
    }
}

/// Tr(γ₁*·γ₂).
pub fn hs_inner(a: &AlgebraElement, b: &AlgebraElement) -> Result<Complex64> {
    a.same_algebra(b)?;
    Ok(a.inner(b))
}

/// ω(δ₁, δ₂) = 2·Im⟨δ₁|δ₂⟩.
pub fn symplectic_omega(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    Ok(2.0 * hs_inner(a, b)?.im)
}

pub fn conjugation_j(g: &AlgebraElement) -> AlgebraElement {
    g.adjoint()
}

pub fn cone_member(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<bool> {
    if !g.is_hermitian(tol) {
        return Ok(false);
    }
    let min = g.hermitian_part().eigs(tol)?.iter().flat_map(|e| e.values.last().copied()).fold(f64::INFINITY, f64::min);
    Ok(min >= -tol.residual_tol)
}

/// Density γγ*.
pub fn expectation_e(g: &AlgebraElement) -> NormalFunctional {
    NormalFunctional::new(g * g.adjoint())
}

/// Density γ*γ.
pub fn expectation_eprime(g: &AlgebraElement) -> NormalFunctional {
    NormalFunctional::new(g.adjoint() * g)
}

/// [M′γ] = support(γγ*).
pub fn momentum_mu(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<Projection> {
    Projection::new(g.left_support(tol)?, tol)
}

/// [Mγ] = support(γ*γ), acting from the right.
pub fn momentum_mu_prime(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<Projection> {
    Projection::new(g.right_support(tol)?, tol)
}

/// Principal square root of a positive density, as a cone vector.
pub fn std_unit(phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<StandardVector> {
    Ok(StandardVector(phi.density().sqrt(tol)?))
}

/// γ₁∙γ₂ = u₁·u₂·|γ₂|.
pub fn std_mul(g1: &AlgebraElement, g2: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    StandardGroupoid { tol: *tol, mode: Composability::Strict }
        .compose(&StandardVector(g1.clone()), &StandardVector(g2.clone()))
        .map(StandardVector::into_vector)
}

/// H ⇉ P with s(γ) = γ*γ, t(γ) = γγ*, inverse J.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardGroupoid {
    pub tol: ToleranceProfile,
    pub mode: Composability,
}

impl Groupoid for StandardGroupoid {
    type Arrow = StandardVector;
    type Object = NormalFunctional;

    fn source(&self, g: &StandardVector) -> Result<NormalFunctional> {
        Ok(expectation_eprime(&g.0))
    }

    fn target(&self, g: &StandardVector) -> Result<NormalFunctional> {
        Ok(expectation_e(&g.0))
    }

    fn compose(&self, a: &StandardVector, b: &StandardVector) -> Result<StandardVector> {
        let mismatch = expectation_eprime(&a.0).dist(&expectation_e(&b.0));
        // u₁·u₂ = u₁·l(γ₂)·u₂, so repair needs no extra work
        check_mismatch(mismatch, &self.tol, self.mode)?;
        let (u1, _) = a.0.polar(&self.tol)?;
        let (u2, h2) = b.0.polar(&self.tol)?;
        Ok(StandardVector(u1 * u2 * h2))
    }

    fn inverse(&self, g: &StandardVector) -> Result<StandardVector> {
        Ok(StandardVector(conjugation_j(&g.0)))
    }

    fn unit(&self, phi: &NormalFunctional) -> Result<StandardVector> {
        std_unit(phi, &self.tol)
    }

    fn arrow_distance(&self, a: &StandardVector, b: &StandardVector) -> f64 {
        a.dist(b)
    }

    fn object_distance(&self, x: &NormalFunctional, y: &NormalFunctional) -> f64 {
        x.dist(y)
    }
}

/// Φ(u, ρ) = u·d_ρ^{1/2}.
pub fn iso_phi(a: &CoadjointArrow, tol: &ToleranceProfile) -> Result<StandardVector> {
    Ok(StandardVector(a.u.element() * a.rho.density().sqrt(tol)?))
}

/// Φ⁻¹(γ) = (polar factor of γ, E(|γ|)).
pub fn iso_phi_inv(g: &StandardVector, tol: &ToleranceProfile) -> Result<CoadjointArrow> {
    let (u, h) = g.0.polar(tol)?;
    CoadjointArrow::new(PartialIsometry::new(u, tol)?, expectation_e(&h), tol)
}

/// β(u)ξ = u·ξ·u*, requiring u*u = support(ξ).
pub fn beta_action(u: &PartialIsometry, xi: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    let support = xi.support_projection(tol)?;
    let mismatch = u.right_support().element().dist(&support);
    if mismatch > tol.residual_tol {
        return Err(Error::NotComposable { mismatch });
    }
    Ok(u.element() * xi * u.element().adjoint())
}

/// Real basis of H ordered like `AlgebraElement::realify` (Re, Im per entry).
fn coordinate_basis(alg: &BlockAlgebra) -> Vec<AlgebraElement> {
    let n = 2 * alg.complex_dim();
    (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            alg.from_real(&e)
        })
        .collect()
}

fn kernel_of(alg: &BlockAlgebra, f: impl Fn(&AlgebraElement) -> Vec<f64>, tol: &ToleranceProfile) -> Result<Vec<AlgebraElement>> {
    let basis = coordinate_basis(alg);
    let cols: Vec<Vec<f64>> = basis.iter().map(f).collect();
    let rows = cols.first().map_or(0, Vec::len);
    let map = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
    let (_, ker) = matrix::real_null_space(&map, tol.rank_rel_tol)?;
    Ok(ker.column_iter().map(|v| alg.from_real(v.as_slice())).collect())
}

fn nonzero_base(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<()> {
    if g.norm() <= tol.residual_tol {
        Err(Error::DegenerateBase)
    } else {
        Ok(())
    }
}

/// Tangent space at γ of the fibre of E: {δ : δγ* + γδ* = 0, (1 − l(γ))δ = 0}.
pub fn fiber_kernel_e(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<Vec<AlgebraElement>> {
    nonzero_base(g, tol)?;
    let off = g.algebra().identity() - g.left_support(tol)?;
    let ga = g.adjoint();
    kernel_of(
        g.algebra(),
        |d| {
            let mut v = (d * &ga + g * d.adjoint()).realify();
            v.extend((&off * d).realify());
            v
        },
        tol,
    )
}

/// Tangent space at γ of the fibre of E′: {δ : γ*δ + δ*γ = 0, δ(1 − r(γ)) = 0}.
pub fn fiber_kernel_eprime(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<Vec<AlgebraElement>> {
    nonzero_base(g, tol)?;
    let off = g.algebra().identity() - g.right_support(tol)?;
    let ga = g.adjoint();
    kernel_of(
        g.algebra(),
        |d| {
            let mut v = (&ga * d + d.adjoint() * g).realify();
            v.extend((d * &off).realify());
            v
        },
        tol,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPairReport {
    pub kernel_e_dim: usize,
    pub kernel_eprime_dim: usize,
    pub max_pairing: f64,
}

/// max |ω(v, w)| over v ∈ Ker TE, w ∈ Ker TE′.
pub fn dual_pair_orthogonality_check(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<DualPairReport> {
    let ke = fiber_kernel_e(g, tol)?;
    let kp = fiber_kernel_eprime(g, tol)?;
    let mut max_pairing = 0.0_f64;
    for v in &ke {
        for w in &kp {
            max_pairing = max_pairing.max(symplectic_omega(v, w)?.abs());
        }
    }
    Ok(DualPairReport { kernel_e_dim: ke.len(), kernel_eprime_dim: kp.len(), max_pairing })
}

/// Cached spectral data of a positive density d for Δ, S and the modular flow.
#[derive(Debug, Clone)]
pub struct ModularData {
    rho: NormalFunctional,
    support: Projection,
    sqrt: AlgebraElement,
    inv: AlgebraElement,
    inv_sqrt: AlgebraElement,
}

impl ModularData {
    /// Requires a nonzero positive density; Δ and S act on its support corner.
    pub fn new(rho: NormalFunctional, tol: &ToleranceProfile) -> Result<Self> {
        let support = rho.support(tol)?;
        if support.block_ranks().iter().all(|&r| r == 0) {
            return Err(Error::NotFaithful);
        }
        let d = rho.density();
        let sqrt = d.sqrt(tol)?;
        let inv = d.positive_calculus(tol, |l| Complex64::new(1.0 / l, 0.0))?;
        let inv_sqrt = d.positive_calculus(tol, |l| Complex64::new(l.sqrt().recip(), 0.0))?;
        Ok(Self { rho, support, sqrt, inv, inv_sqrt })
    }

    /// Like `new` but rejects densities without full support.
    pub fn faithful(rho: NormalFunctional, tol: &ToleranceProfile) -> Result<Self> {
        let m = Self::new(rho, tol)?;
        if !m.is_faithful() {
            return Err(Error::NotFaithful);
        }
        Ok(m)
    }

    pub fn is_faithful(&self) -> bool {
        self.support.block_ranks() == self.rho.algebra().block_dims()
    }

    pub fn functional(&self) -> &NormalFunctional {
        &self.rho
    }

    pub fn support(&self) -> &Projection {
        &self.support
    }

    /// Cyclic vector Ω = d^{1/2}.
    pub fn omega_vector(&self) -> &AlgebraElement {
        &self.sqrt
    }

    /// Δγ = d·γ·d†.
    pub fn delta(&self, g: &AlgebraElement) -> AlgebraElement {
        self.rho.density() * g * &self.inv
    }

    /// Δ^{1/2}γ = d^{1/2}·γ·(d^{1/2})†.
    pub fn delta_sqrt(&self, g: &AlgebraElement) -> AlgebraElement {
        &self.sqrt * g * &self.inv_sqrt
    }

    /// S = J∘Δ^{1/2}, so that S(x·Ω) = x*·Ω.
    pub fn tomita_s(&self, g: &AlgebraElement) -> AlgebraElement {
        conjugation_j(&self.delta_sqrt(g))
    }

    pub fn flow_unitary(&self, t: f64, tol: &ToleranceProfile) -> Result<AlgebraElement> {
        self.rho.density().imaginary_power(t, tol)
    }

    /// u_t(γ) = d^{it}·γ·d^{−it}.
    pub fn canonical_implementation(&self, t: f64, g: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
        let dit = self.flow_unitary(t, tol)?;
        Ok(&dit * g * dit.adjoint())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlowReport {
    pub product: f64,
    pub orbit: f64,
    pub omega: f64,
    pub cone: f64,
    pub conjugation: f64,
    pub composition: f64,
}

impl FlowReport {
    pub fn max(&self) -> f64 {
        [self.product, self.orbit, self.omega, self.cone, self.conjugation, self.composition].into_iter().fold(0.0, f64::max)
    }

    pub fn merge(self, o: Self) -> Self {
        Self {
            product: self.product.max(o.product),
            orbit: self.orbit.max(o.orbit),
            omega: self.omega.max(o.omega),
            cone: self.cone.max(o.cone),
            conjugation: self.conjugation.max(o.conjugation),
            composition: self.composition.max(o.composition),
        }
    }
}

fn spectra_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return f64::INFINITY;
    }
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(l, m)| (l - m).abs())).fold(0.0, f64::max)
}

/// Distance of γ from the cone: non-hermiticity plus negative spectral mass.
pub fn cone_defect(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<f64> {
    let min = g.hermitian_part().eigs(tol)?.iter().flat_map(|e| e.values.last().copied()).fold(f64::INFINITY, f64::min);
    Ok(g.hermiticity_residual() + (-min).max(0.0))
}

/// Composable standard arrows γ₁ = u₁·(u₂ξu₂*), γ₂ = u₂·ξ, so s(γ₁) = t(γ₂).
pub fn sample_composable_pair<R: Rng + ?Sized>(
    rng: &mut R,
    alg: &BlockAlgebra,
    tol: &ToleranceProfile,
) -> Result<(AlgebraElement, AlgebraElement)> {
    let (_, [u1, u2, _]) = sample_pi_chain(rng, alg, tol)?;
    let xi = sampling::positive_on(rng, u2.right_support(), 0.5, 2.0);
    let t2 = u2.element() * &xi * u2.element().adjoint();
    Ok((u1.element() * t2, u2.element() * xi))
}

/// Checks that u_t is a groupoid automorphism preserving ω, P, J and orbit
/// invariants, and that u_s∘u_t = u_{s+t}, over `samples` random instances.
pub fn flow_automorphism_check<R: Rng + ?Sized>(
    md: &ModularData,
    t: f64,
    rng: &mut R,
    samples: usize,
    tol: &ToleranceProfile,
) -> Result<FlowReport> {
    if samples == 0 {
        return Err(Error::InvalidTrials);
    }
    if !md.is_faithful() {
        return Err(Error::NotFaithful);
    }
    let alg = md.functional().algebra().clone();
    let ut = |g: &AlgebraElement| md.canonical_implementation(t, g, tol);
    let mut rep = FlowReport::default();
    for _ in 0..samples {
        let (g1, g2) = sample_composable_pair(rng, &alg, tol)?;
        let lhs = ut(&std_mul(&g1, &g2, tol)?)?;
        let rhs = std_mul(&ut(&g1)?, &ut(&g2)?, tol)?;
        let g = sampling::gaussian(rng, &alg);
        let (d1, d2) = (sampling::gaussian(rng, &alg), sampling::gaussian(rng, &alg));
        let omega = (symplectic_omega(&ut(&d1)?, &ut(&d2)?)? - symplectic_omega(&d1, &d2)?).abs();
        let orbit = spectra_distance(
            &orbit_invariant(&expectation_e(&ut(&g)?), tol)?,
            &orbit_invariant(&expectation_e(&g), tol)?,
        );
        let xi = &g * g.adjoint();
        let cone = cone_defect(&ut(&xi)?, tol)?;
        let conjugation = ut(&conjugation_j(&g))?.dist(&conjugation_j(&ut(&g)?));
        let s = rng.random_range(-2.0..2.0);
        let composition = md
            .canonical_implementation(s, &ut(&g)?, tol)?
            .dist(&md.canonical_implementation(s + t, &g, tol)?);
        rep = rep.merge(FlowReport { product: lhs.dist(&rhs), orbit, omega, cone, conjugation, composition });
    }
    Ok(rep)
}

/// E∘std_unit = id on P_* and std_unit∘E = id on P.
pub fn sqrt_homeomorphism_residual(xi: &AlgebraElement, tol: &ToleranceProfile) -> Result<f64> {
    let phi = NormalFunctional::new(xi.clone());
    let a = expectation_e(std_unit(&phi, tol)?.vector()).dist(&phi);
    let b = std_unit(&expectation_e(xi), tol)?.vector().dist(xi);
    Ok(a.max(b))
}

/// γ = u|γ| = (u|γ|u*)·u.
pub fn polar_components_residual(g: &AlgebraElement, tol: &ToleranceProfile) -> Result<f64> {
    let (u, h) = g.polar(tol)?;
    let h_left = &u * &h * u.adjoint();
    Ok(g.dist(&(&h_left * &u)).max(h_left.dist(&(g * g.adjoint()).sqrt(tol)?)))
}

/// For E(γ₁) = E(γ₂): the partial isometry w = γ₁†γ₂ with ww* = r(γ₁) and γ₂ = γ₁·w.
pub fn transport_witness(g1: &AlgebraElement, g2: &AlgebraElement, tol: &ToleranceProfile) -> Result<PartialIsometry> {
    let residual = expectation_e(g1).dist(&expectation_e(g2));
    if residual > tol.residual_tol {
        return Err(Error::SupportMismatch { residual });
    }
    let w = PartialIsometry::new(g1.partial_inverse(tol)? * g2, tol)?;
    let residual = (g1 * w.element()).dist(g2);
    if residual > tol.residual_tol {
        return Err(Error::SupportMismatch { residual });
    }
    Ok(w)
}

/// P± = ½(1 ± J).
pub fn j_split(g: &AlgebraElement) -> (AlgebraElement, AlgebraElement) {
    (g.hermitian_part(), g.anti_hermitian_part())
}

/// Idempotence of P± plus |ω| on H₊×H₊ and H₋×H₋.
pub fn splitting_residual(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    let (ap, am) = j_split(a);
    let (bp, bm) = j_split(b);
    let idem = j_split(&ap).0.dist(&ap).max(j_split(&am).1.dist(&am));
    let recombine = (&ap + &am).dist(a);
    Ok(idem.max(recombine).max(symplectic_omega(&ap, &bp)?.abs()).max(symplectic_omega(&am, &bm)?.abs()))
}

/// Max deviation of Φ from a groupoid isomorphism on a composable pair a·b.
pub fn phi_intertwining_residual(a: &CoadjointArrow, b: &CoadjointArrow, tol: &ToleranceProfile) -> Result<f64> {
    use crate::groupoid::CoadjointGroupoid;
    let cg = CoadjointGroupoid { tol: *tol, mode: Composability::Strict };
    let sg = StandardGroupoid { tol: *tol, mode: Composability::Strict };
    let (pa, pb) = (iso_phi(a, tol)?, iso_phi(b, tol)?);
    let mut r = iso_phi(&cg.compose(a, b)?, tol)?.dist(&sg.compose(&pa, &pb)?);
    r = r.max(iso_phi(&cg.inverse(a)?, tol)?.dist(&sg.inverse(&pa)?));
    // objects: a positive functional ρ corresponds to the cone point d^{1/2}; s, t compare E-images
    r = r.max(sg.source(&pa)?.dist(&NormalFunctional::new(a.rho.density().clone())));
    r = r.max(sg.target(&pa)?.dist(&cg.target(a)?));
    r = r.max(iso_phi(&cg.unit(&a.rho)?, tol)?.dist(&sg.unit(&a.rho)?));
    r = r.max(cg.arrow_distance(&iso_phi_inv(&pa, tol)?, a));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::coadjoint_apply;
    use crate::groupoid::sample_coadjoint_chain;
    use crate::matrix::{c, real_diag};

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn m2() -> BlockAlgebra {
        BlockAlgebra::full(2).unwrap()
    }

    fn diag(alg: &BlockAlgebra, d: &[f64]) -> AlgebraElement {
        alg.element(vec![real_diag(d)]).unwrap()
    }

    fn e(alg: &BlockAlgebra, i: usize, j: usize) -> AlgebraElement {
        alg.matrix_unit(0, i, j)
    }

    #[test]
    fn omega_normalization() {
        let a = BlockAlgebra::full(1).unwrap();
        let one = a.identity();
        assert_eq!(symplectic_omega(&one, &one.scale(c(0.0, 1.0))).unwrap(), 2.0);
        assert_eq!(symplectic_omega(&one, &one).unwrap(), 0.0);
        assert!(matches!(symplectic_omega(&one, &m2().identity()), Err(Error::ShapeMismatch(_) | Error::AlgebraMismatch)));
    }

    #[test]
    fn j_reverses_omega_and_fixes_cone() {
        let mut rng = sampling::trial_rng(3, 0);
        let a = BlockAlgebra::new(vec![2, 3]).unwrap();
        for _ in 0..20 {
            let (x, y) = (sampling::gaussian(&mut rng, &a), sampling::gaussian(&mut rng, &a));
            let lhs = symplectic_omega(&conjugation_j(&x), &conjugation_j(&y)).unwrap();
            assert!((lhs + symplectic_omega(&x, &y).unwrap()).abs() < 1e-12);
            let p = &x * x.adjoint();
            assert!(cone_member(&p, &tol()).unwrap());
            assert!(conjugation_j(&p).dist(&p) < 1e-15);
        }
        assert!(!cone_member(&m2().identity().scale(c(0.0, 1.0)), &tol()).unwrap());
    }

    #[test]
    fn expectation_and_momentum_examples() {
        let t = tol();
        let a = m2();
        let rho = diag(&a, &[2.0, 3.0]);
        assert!(expectation_e(&rho).density().dist(&diag(&a, &[4.0, 9.0])) < 1e-15);
        let g = e(&a, 0, 1);
        assert!(expectation_e(&g).density().dist(&diag(&a, &[1.0, 0.0])) < 1e-15);
        assert!(expectation_eprime(&g).density().dist(&diag(&a, &[0.0, 1.0])) < 1e-15);
        assert!(expectation_e(&a.zero()).density().norm() == 0.0);
        assert!(momentum_mu(&diag(&a, &[2.0, 0.0]), &t).unwrap().element().dist(&diag(&a, &[1.0, 0.0])) < 1e-15);
        let mu = momentum_mu(&g, &t).unwrap();
        assert!(mu.element().dist(&diag(&a, &[1.0, 0.0])) < 1e-15);
        assert!((mu.element() * &g).dist(&g) < 1e-15);
    }

    #[test]
    fn expectation_is_equivariant() {
        let t = tol();
        let alg = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mut rng = sampling::trial_rng(9, 0);
        for _ in 0..20 {
            let (_, [_, u, _]) = sample_pi_chain(&mut rng, &alg, &t).unwrap();
            let g = u.right_support().element() * sampling::gaussian(&mut rng, &alg);
            let lhs = expectation_e(&(u.element() * &g));
            let rhs = coadjoint_apply(&u, &expectation_e(&g), &t).unwrap();
            assert!(lhs.dist(&rhs) < 1e-12);
            let mu = momentum_mu(&(u.element() * &g), &t).unwrap();
            let mu0 = momentum_mu(&g, &t).unwrap();
            assert!(mu.element().dist(&(u.element() * mu0.element() * u.element().adjoint())) < 1e-9);
        }
    }

    #[test]
    fn std_mul_example() {
        let a = m2();
        let g2 = e(&a, 0, 1).scale_re(2.0);
        let g1 = e(&a, 1, 0).scale_re(2.0);
        assert!(std_mul(&g1, &g2, &tol()).unwrap().dist(&diag(&a, &[0.0, 2.0])) < 1e-14);
        assert!(matches!(std_mul(&g2, &g2, &tol()), Err(Error::NotComposable { .. })));
        let sg = StandardGroupoid::default();
        let g = StandardVector::new(g2.clone());
        let unit_t = sg.unit(&sg.target(&g).unwrap()).unwrap();
        assert!(sg.compose(&unit_t, &g).unwrap().dist(&g) < 1e-14);
        let jg = sg.inverse(&g).unwrap();
        assert!(sg.compose(&jg, &g).unwrap().dist(&sg.unit(&sg.source(&g).unwrap()).unwrap()) < 1e-14);
        assert!(sg.compose(&g, &jg).unwrap().dist(&unit_t) < 1e-14);
        assert!(conjugation_j(unit_t.vector()).dist(unit_t.vector()) < 1e-15);
    }

    #[test]
    fn phi_examples_and_intertwining() {
        let t = tol();
        let a = m2();
        let rho = NormalFunctional::new(diag(&a, &[0.0, 9.0]));
        let arrow = CoadjointArrow::new(PartialIsometry::new(e(&a, 0, 1), &t).unwrap(), rho.clone(), &t).unwrap();
        assert!(iso_phi(&arrow, &t).unwrap().vector().dist(&e(&a, 0, 1).scale_re(3.0)) < 1e-14);
        let unit = CoadjointArrow::new(PartialIsometry::new(diag(&a, &[0.0, 1.0]), &t).unwrap(), rho, &t).unwrap();
        assert!(iso_phi(&unit, &t).unwrap().vector().dist(&diag(&a, &[0.0, 3.0])) < 1e-14);

        let alg = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mut rng = sampling::trial_rng(11, 0);
        for _ in 0..20 {
            let [a1, a2, _] = sample_coadjoint_chain(&mut rng, &alg, &t).unwrap();
            assert!(phi_intertwining_residual(&a1, &a2, &t).unwrap() < 1e-10);
        }
    }

    #[test]
    fn beta_examples() {
        let t = tol();
        let a = m2();
        let xi = diag(&a, &[0.0, 2.0]);
        let u = PartialIsometry::new(e(&a, 0, 1), &t).unwrap();
        assert!(beta_action(&u, &xi, &t).unwrap().dist(&diag(&a, &[2.0, 0.0])) < 1e-15);
        let s = PartialIsometry::new(diag(&a, &[0.0, 1.0]), &t).unwrap();
        assert!(beta_action(&s, &xi, &t).unwrap().dist(&xi) < 1e-15);
        assert!(beta_action(&u.adjoint(), &xi, &t).is_err());
        let b = beta_action(&u, &xi, &t).unwrap();
        assert!(conjugation_j(&b).dist(&b) < 1e-15);
        let lhs = expectation_e(&b);
        let rhs = coadjoint_apply(&u, &expectation_e(&xi), &t).unwrap();
        assert!(lhs.dist(&rhs) < 1e-14);
    }

    #[test]
    fn fibre_kernels() {
        let t = tol();
        let a = m2();
        let r = dual_pair_orthogonality_check(&a.identity(), &t).unwrap();
        assert_eq!((r.kernel_e_dim, r.kernel_eprime_dim), (4, 4));
        assert!(r.max_pairing < 1e-12);
        for k in fiber_kernel_e(&a.identity(), &t).unwrap() {
            assert!((&k + &k.adjoint()).norm() < 1e-12);
        }
        let r = dual_pair_orthogonality_check(&e(&a, 0, 1), &t).unwrap();
        assert!(r.max_pairing < 1e-12);
        assert!(matches!(dual_pair_orthogonality_check(&a.zero(), &t), Err(Error::DegenerateBase)));
    }

    #[test]
    fn fibre_kernels_are_tangent_to_fibres() {
        let t = tol();
        let alg = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mut rng = sampling::trial_rng(4, 0);
        for _ in 0..10 {
            let r = sampling::ranks(&mut rng, &alg, 1);
            let p = sampling::projection(&mut rng, &alg, &r);
            let g = sampling::gaussian(&mut rng, &alg) * p.element();
            let e0 = expectation_e(&g);
            for k in fiber_kernel_e(&g, &t).unwrap() {
                let h = 1e-6;
                let moved = expectation_e(&(&g + &k.scale_re(h)));
                assert!(moved.dist(&e0) < 1e-9);
            }
            assert!(dual_pair_orthogonality_check(&g, &t).unwrap().max_pairing < 1e-10);
        }
    }

    #[test]
    fn modular_examples() {
        let t = tol();
        let a = m2();
        let (x, y) = (2.0_f64, 5.0_f64);
        let md = ModularData::faithful(NormalFunctional::new(diag(&a, &[x, y])), &t).unwrap();
        let g = e(&a, 0, 1);
        assert!(md.canonical_implementation(0.0, &g, &t).unwrap().dist(&g) < 1e-15);
        let s = 0.7;
        let want = g.scale(Complex64::from_polar(1.0, s * (x / y).ln()));
        assert!(md.canonical_implementation(s, &g, &t).unwrap().dist(&want) < 1e-14);

        let md = ModularData::faithful(NormalFunctional::new(diag(&a, &[1.0, 4.0])), &t).unwrap();
        let lhs = md.tomita_s(&(&g * md.omega_vector()));
        assert!(lhs.dist(&(e(&a, 1, 0) * diag(&a, &[1.0, 2.0]))) < 1e-14);
        assert!(md.delta(&g).dist(&g.scale_re(0.25)) < 1e-15);

        assert!(matches!(ModularData::faithful(NormalFunctional::new(diag(&a, &[1.0, 0.0])), &t), Err(Error::NotFaithful)));
        assert!(matches!(ModularData::new(NormalFunctional::new(a.zero()), &t), Err(Error::NotFaithful)));
    }

    #[test]
    fn trace_has_trivial_flow() {
        let t = tol();
        let a = BlockAlgebra::full(3).unwrap();
        let md = ModularData::faithful(NormalFunctional::new(a.identity().scale_re(0.4)), &t).unwrap();
        let g = sampling::gaussian(&mut sampling::trial_rng(1, 1), &a);
        assert!(md.canonical_implementation(2.3, &g, &t).unwrap().dist(&g) < 1e-14);
    }

    #[test]
    fn flow_is_an_automorphism() {
        let t = tol();
        let a = BlockAlgebra::full(3).unwrap();
        let mut rng = sampling::trial_rng(2, 0);
        let rho = sampling::density(&mut rng, &a, &[3], 0.2, 2.0);
        let md = ModularData::faithful(rho, &t).unwrap();
        for s in [0.0, 0.3, -1.7] {
            let r = flow_automorphism_check(&md, s, &mut rng, 30, &t).unwrap();
            assert!(r.max() < 1e-9, "{s}: {r:?}");
        }
        let zero = flow_automorphism_check(&md, 0.0, &mut rng, 5, &t).unwrap();
        assert!(zero.product < 1e-12 && zero.omega < 1e-12);
    }

    #[test]
    fn tomita_s_matches_its_definition() {
        let t = tol();
        let a = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mut rng = sampling::trial_rng(5, 0);
        let md = ModularData::faithful(sampling::density(&mut rng, &a, &[2, 3], 0.2, 2.0), &t).unwrap();
        for _ in 0..20 {
            let x = sampling::gaussian(&mut rng, &a);
            let lhs = md.tomita_s(&(&x * md.omega_vector()));
            assert!(lhs.dist(&(x.adjoint() * md.omega_vector())) < 1e-10);
        }
    }

    #[test]
    fn standard_form_invariants() {
        let t = tol();
        let a = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mut rng = sampling::trial_rng(8, 0);
        for _ in 0..20 {
            let r = sampling::ranks(&mut rng, &a, 1);
            let p = sampling::projection(&mut rng, &a, &r);
            let xi = sampling::positive_on(&mut rng, &p, 0.5, 2.0);
            assert!(sqrt_homeomorphism_residual(&xi, &t).unwrap() < 1e-10);
            let g = sampling::gaussian(&mut rng, &a) * p.element();
            assert!(polar_components_residual(&g, &t).unwrap() < 1e-10);
            // transport along the fibre of E
            let q = sampling::projection(&mut rng, &a, &r);
            let rg = Projection::new(g.right_support(&t).unwrap(), &t).unwrap();
            let w0 = sampling::partial_isometry(&mut rng, &q, &rg, &t).unwrap();
            let g2 = &g * w0.element();
            let w = transport_witness(&g, &g2, &t).unwrap();
            assert!(w.element().dist(w0.element()) < 1e-9);
            let (x, y) = (sampling::gaussian(&mut rng, &a), sampling::gaussian(&mut rng, &a));
            assert!(splitting_residual(&x, &y).unwrap() < 1e-12);
        }
    }

    #[test]
    fn action_on_h_is_free() {
        let t = tol();
        let a = BlockAlgebra::full(3).unwrap();
        let mut rng = sampling::trial_rng(6, 0);
        let g = sampling::gaussian(&mut rng, &a) * sampling::projection(&mut rng, &a, &[2]).element();
        let mu = momentum_mu(&g, &t).unwrap();
        let u = PartialIsometry::from_projection(&mu);
        assert!((u.element() * &g).dist(&g) < 1e-12);
        // a different partial isometry with the same source moves γ
        let v = sampling::partial_isometry(&mut rng, &mu, &mu, &t).unwrap();
        assert!((v.element() * &g).dist(&g) > 1e-6);
    }
}
