//! Poisson and symplectic checks: Lie–Poisson and canonical brackets,
//! Hamiltonian fields, the orbit form, KKS and Fubini–Study agreement, the
//! multiplicativity/exactness identities and the degeneracy radical.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{AlgebraElement, BlockAlgebra, NormalFunctional, PartialIsometry, Projection};
use crate::charts::{dgamma0, P0Tangent};
use crate::error::{Error, Result};
use crate::groupoid::stabilizer_lie_algebra;
use crate::matrix::{self, c, CMat};
use crate::sampling;
use crate::standard::{std_mul, symplectic_omega, ModularData};
use crate::tolerance::ToleranceProfile;

pub type CVec = DVector<Complex64>;

/// The constant κ in ω(a₁γ₀, a₂γ₀) = κ·2·Im Tr(γ₀γ₀*·a₁a₂).
pub const KAPPA: f64 = -1.0;

/// Hermitian basis of the algebra, orthogonal for Tr(ab): E_aa, E_ab+E_ba, i(E_ab−E_ba).
pub fn hermitian_basis(alg: &BlockAlgebra) -> Vec<AlgebraElement> {
    let mut out = Vec::new();
    for (k, &n) in alg.block_dims().iter().enumerate() {
        for a in 0..n {
            out.push(alg.matrix_unit(k, a, a));
            for b in a + 1..n {
                let (e, f) = (alg.matrix_unit(k, a, b), alg.matrix_unit(k, b, a));
                out.push(&e + &f);
                out.push((e - f).scale(c(0.0, 1.0)));
            }
        }
    }
    out
}

/// A smooth real function on Hermitian functionals, identified with their densities.
pub trait Observable: Sync {
    fn value(&self, d: &AlgebraElement) -> f64;

    /// df(φ) ∈ M^h with f(φ + εψ) = f(φ) + ε·Tr(ψ·df) + o(ε).
    fn differential(&self, d: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
        fd_differential(self, d, tol.fd_step)
    }
}

/// Central differences along the Hermitian basis.
pub fn fd_differential<O: Observable + ?Sized>(f: &O, d: &AlgebraElement, h: f64) -> Result<AlgebraElement> {
    let alg = d.algebra();
    let mut out = alg.zero();
    for b in hermitian_basis(alg) {
        let step = b.scale_re(h);
        let slope = (f.value(&(d + &step)) - f.value(&(d - &step))) / (2.0 * h);
        let norm = b.inner(&b).re;
        out = out + b.scale_re(slope / norm);
    }
    Ok(out)
}

/// f_X(φ) = Tr(d·X).
#[derive(Debug, Clone)]
pub struct LinearObservable(pub AlgebraElement);

impl Observable for LinearObservable {
    fn value(&self, d: &AlgebraElement) -> f64 {
        (d * &self.0).trace().re
    }

    fn differential(&self, _: &AlgebraElement, _: &ToleranceProfile) -> Result<AlgebraElement> {
        Ok(self.0.clone())
    }
}

/// The Casimir Tr(d).
#[derive(Debug, Clone, Copy)]
pub struct TraceObservable;

impl Observable for TraceObservable {
    fn value(&self, d: &AlgebraElement) -> f64 {
        d.trace().re
    }

    fn differential(&self, d: &AlgebraElement, _: &ToleranceProfile) -> Result<AlgebraElement> {
        Ok(d.algebra().identity())
    }
}

/// f·g with the product rule.
pub struct ProductObservable<'a>(pub &'a dyn Observable, pub &'a dyn Observable);

impl Observable for ProductObservable<'_> {
    fn value(&self, d: &AlgebraElement) -> f64 {
        self.0.value(d) * self.1.value(d)
    }

    fn differential(&self, d: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
        Ok(self.0.differential(d, tol)?.scale_re(self.1.value(d)) + self.1.differential(d, tol)?.scale_re(self.0.value(d)))
    }
}

/// Any closure, differentiated numerically.
pub struct FnObservable<F: Fn(&AlgebraElement) -> f64 + Sync>(pub F);

impl<F: Fn(&AlgebraElement) -> f64 + Sync> Observable for FnObservable<F> {
    fn value(&self, d: &AlgebraElement) -> f64 {
        (self.0)(d)
    }
}

fn hermitian_differential(f: &dyn Observable, d: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    let df = f.differential(d, tol)?;
    let residual = df.hermiticity_residual();
    if residual > tol.residual_tol * df.norm().max(1.0) {
        return Err(Error::NotHermitianDifferential { residual });
    }
    Ok(df.hermitian_part())
}

fn strip_imaginary(z: Complex64, scale: f64, tol: &ToleranceProfile) -> Result<f64> {
    if z.im.abs() > tol.residual_tol * scale.max(1.0) {
        return Err(Error::NotHermitianDifferential { residual: z.im.abs() });
    }
    Ok(z.re)
}

/// {f, g}(φ) = −i·Tr(d·[df, dg]).
pub fn lp_bracket(f: &dyn Observable, g: &dyn Observable, phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<f64> {
    let d = phi.density();
    let (df, dg) = (hermitian_differential(f, d, tol)?, hermitian_differential(g, d, tol)?);
    let z = (d * df.commutator(&dg)).trace() * c(0.0, -1.0);
    strip_imaginary(z, d.norm() * df.norm() * dg.norm(), tol)
}

/// X_f(φ) = i·[df, d].
pub fn hamiltonian_field(f: &dyn Observable, phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    let d = phi.density();
    let df = hermitian_differential(f, d, tol)?;
    Ok(df.commutator(d).scale(c(0.0, 1.0)))
}

/// |{f,g} − Tr(X_f·dg)|.
pub fn field_duality_residual(f: &dyn Observable, g: &dyn Observable, phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<f64> {
    let lhs = lp_bracket(f, g, phi, tol)?;
    let rhs = (hamiltonian_field(f, phi, tol)? * hermitian_differential(g, phi.density(), tol)?).trace();
    Ok((lhs - rhs.re).abs().max(rhs.im.abs()))
}

/// Bracket of linear observables is linear: {f_X, f_Y} = f_{−i[X,Y]}.
pub fn linear_bracket(x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
    x.commutator(y).scale(c(0.0, -1.0))
}

/// Cyclic sum of {f_X, {f_Y, f_Z}} at φ.
pub fn jacobi_residual(x: &AlgebraElement, y: &AlgebraElement, z: &AlgebraElement, phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<f64> {
    let term = |a: &AlgebraElement, b: &AlgebraElement, cc: &AlgebraElement| -> Result<f64> {
        lp_bracket(&LinearObservable(a.clone()), &LinearObservable(linear_bracket(b, cc)), phi, tol)
    };
    Ok((term(x, y, z)? + term(y, z, x)? + term(z, x, y)?).abs())
}

/// |{f, g·h} − g{f,h} − h{f,g}|.
pub fn leibniz_residual(f: &dyn Observable, g: &dyn Observable, h: &dyn Observable, phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<f64> {
    let d = phi.density();
    let gh = ProductObservable(g, h);
    let lhs = lp_bracket(f, &gh, phi, tol)?;
    let rhs = g.value(d) * lp_bracket(f, h, phi, tol)? + h.value(d) * lp_bracket(f, g, phi, tol)?;
    Ok((lhs - rhs).abs())
}

/// ‖X_{{f_X,f_Y}} − [X_{f_X}, X_{f_Y}]‖ for linear observables, with the vector-field
/// bracket [V, W](d) = DW(d)[V(d)] − DV(d)[W(d)]; for linear fields DV_X(d)[w] = i[X, w].
pub fn field_morphism_residual(x: &AlgebraElement, y: &AlgebraElement, phi: &NormalFunctional, tol: &ToleranceProfile) -> Result<f64> {
    let i = c(0.0, 1.0);
    let vx = hamiltonian_field(&LinearObservable(x.clone()), phi, tol)?;
    let vy = hamiltonian_field(&LinearObservable(y.clone()), phi, tol)?;
    let bracket = y.commutator(&vx).scale(i) - x.commutator(&vy).scale(i);
    let lhs = hamiltonian_field(&LinearObservable(linear_bracket(x, y)), phi, tol)?;
    Ok(lhs.dist(&bracket))
}

/// A smooth real function on H.
pub trait HilbertObservable: Sync {
    fn value(&self, g: &AlgebraElement) -> f64;

    /// ∇F with Re⟨∇F|w⟩ = dF(γ)(w).
    fn gradient(&self, g: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
        fd_gradient(self, g, tol.fd_step)
    }
}

pub fn fd_gradient<F: HilbertObservable + ?Sized>(f: &F, g: &AlgebraElement, h: f64) -> Result<AlgebraElement> {
    let alg = g.algebra();
    let n = 2 * alg.complex_dim();
    let mut coords = vec![0.0; n];
    for (k, slot) in coords.iter_mut().enumerate() {
        let mut e = vec![0.0; n];
        e[k] = h;
        let step = alg.from_real(&e);
        *slot = (f.value(&(g + &step)) - f.value(&(g - &step))) / (2.0 * h);
    }
    Ok(alg.from_real(&coords))
}

/// F(γ) = Tr(γγ*·X) = f_X(E(γ)).
#[derive(Debug, Clone)]
pub struct PullbackE(pub AlgebraElement);

impl HilbertObservable for PullbackE {
    fn value(&self, g: &AlgebraElement) -> f64 {
        (g * g.adjoint() * &self.0).trace().re
    }

    fn gradient(&self, g: &AlgebraElement, _: &ToleranceProfile) -> Result<AlgebraElement> {
        Ok((&self.0 * g).scale_re(2.0))
    }
}

/// G(γ) = Tr(γ*γ·Y) = f_Y(E′(γ)).
#[derive(Debug, Clone)]
pub struct PullbackEprime(pub AlgebraElement);

impl HilbertObservable for PullbackEprime {
    fn value(&self, g: &AlgebraElement) -> f64 {
        (g.adjoint() * g * &self.0).trace().re
    }

    fn gradient(&self, g: &AlgebraElement, _: &ToleranceProfile) -> Result<AlgebraElement> {
        Ok((g * &self.0).scale_re(2.0))
    }
}

/// Any closure on H, differentiated numerically.
pub struct FnHilbertObservable<F: Fn(&AlgebraElement) -> f64 + Sync>(pub F);

impl<F: Fn(&AlgebraElement) -> f64 + Sync> HilbertObservable for FnHilbertObservable<F> {
    fn value(&self, g: &AlgebraElement) -> f64 {
        (self.0)(g)
    }
}

/// X_F = −(i/2)·∇F, the field with ω(X_F, w) = dF(w).
pub fn hilbert_field(f: &dyn HilbertObservable, g: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    Ok(f.gradient(g, tol)?.scale(c(0.0, -0.5)))
}

/// {F, G}_ω(γ) = ω(X_F, X_G).
pub fn canonical_bracket(f: &dyn HilbertObservable, g: &dyn HilbertObservable, gamma: &AlgebraElement, tol: &ToleranceProfile) -> Result<f64> {
    symplectic_omega(&hilbert_field(f, gamma, tol)?, &hilbert_field(g, gamma, tol)?)
}

/// |ω(X_F, w) − dF(w)| with dF(w) from central differences.
pub fn hilbert_field_residual(f: &dyn HilbertObservable, gamma: &AlgebraElement, w: &AlgebraElement, tol: &ToleranceProfile) -> Result<f64> {
    let h = tol.fd_step;
    let df = (f.value(&(gamma + w.scale_re(h))) - f.value(&(gamma - w.scale_re(h)))) / (2.0 * h);
    Ok((symplectic_omega(&hilbert_field(f, gamma, tol)?, w)? - df).abs())
}

/// |{F_X, F_Y}_ω(γ) − {f_X, f_Y}(E(γ))| for the quadratic pullbacks.
pub fn poisson_map_residual(x: &AlgebraElement, y: &AlgebraElement, gamma: &AlgebraElement, tol: &ToleranceProfile) -> Result<f64> {
    let lhs = canonical_bracket(&PullbackE(x.clone()), &PullbackE(y.clone()), gamma, tol)?;
    let phi = NormalFunctional::new(gamma * gamma.adjoint());
    let rhs = lp_bracket(&LinearObservable(x.clone()), &LinearObservable(y.clone()), &phi, tol)?;
    Ok((lhs - rhs).abs())
}

/// {f_X∘E, f_Y∘E′}_ω(γ): zero because left and right multiplications commute.
pub fn commutant_bracket_check(x: &AlgebraElement, y: &AlgebraElement, gamma: &AlgebraElement, tol: &ToleranceProfile) -> Result<f64> {
    canonical_bracket(&PullbackE(x.clone()), &PullbackEprime(y.clone()), gamma, tol)
}

/// Orbit 2-form at u ∈ P₀ on two tangents; equal to dΓ₀.
pub fn orbit_form(rho0: &NormalFunctional, a: &P0Tangent, b: &P0Tangent, tol: &ToleranceProfile) -> Result<f64> {
    dgamma0(rho0, a, b, tol)
}

/// Change of the orbit form when each tangent is shifted by u·s_j with s_j in the stabilizer.
pub fn lift_independence_residual(
    rho0: &NormalFunctional,
    a: &P0Tangent,
    b: &P0Tangent,
    s1: &AlgebraElement,
    s2: &AlgebraElement,
    tol: &ToleranceProfile,
) -> Result<f64> {
    let u = a.u.element();
    let a2 = P0Tangent::new(a.u.clone(), &a.du + u * s1, tol)?;
    let b2 = P0Tangent::new(b.u.clone(), &b.du + u * s2, tol)?;
    Ok((orbit_form(rho0, &a2, &b2, tol)? - orbit_form(rho0, a, b, tol)?).abs())
}

/// Change of the orbit form under left translation by a unitary w.
pub fn left_translation_residual(
    rho0: &NormalFunctional,
    a: &P0Tangent,
    b: &P0Tangent,
    w: &PartialIsometry,
    tol: &ToleranceProfile,
) -> Result<f64> {
    let wu = PartialIsometry::new(w.element() * a.u.element(), tol)?;
    let a2 = P0Tangent::new(wu.clone(), w.element() * &a.du, tol)?;
    let b2 = P0Tangent::new(wu, w.element() * &b.du, tol)?;
    Ok((orbit_form(rho0, &a2, &b2, tol)? - orbit_form(rho0, a, b, tol)?).abs())
}

/// Change of the orbit form when base, point and tangents are all moved by the
/// modular flow x ↦ d^{it}·x·d^{−it} of a faithful density.
pub fn flow_orbit_form_residual(
    md: &ModularData,
    t: f64,
    rho0: &NormalFunctional,
    a: &P0Tangent,
    b: &P0Tangent,
    tol: &ToleranceProfile,
) -> Result<f64> {
    let w = md.flow_unitary(t, tol)?;
    let mv = |x: &AlgebraElement| &w * x * w.adjoint();
    let rho_t = NormalFunctional::new(mv(rho0.density()));
    let u_t = PartialIsometry::new(mv(a.u.element()), tol)?;
    let a2 = P0Tangent::new(u_t.clone(), mv(&a.du), tol)?;
    let b2 = P0Tangent::new(u_t, mv(&b.du), tol)?;
    Ok((orbit_form(&rho_t, &a2, &b2, tol)? - orbit_form(rho0, a, b, tol)?).abs())
}

/// Real basis of T_uP₀: u·x (x anti-Hermitian in the p₀ corner) and (1−uu*)·w·p₀.
pub fn p0_tangent_basis(u: &PartialIsometry) -> Vec<AlgebraElement> {
    let alg = u.element().algebra().clone();
    let p0 = u.right_support();
    let q = u.left_support().complement();
    let mut out = Vec::new();
    for (k, (v, w)) in p0.range_bases().iter().zip(q.range_bases()).enumerate() {
        let put = |m: CMat| {
            let mut blocks = alg.zero().into_blocks();
            blocks[k] = m;
            alg.element(blocks).expect("finite")
        };
        let r = v.ncols();
        for a in 0..r {
            for bb in a..r {
                let e = v.column(a) * v.column(bb).adjoint();
                if a == bb {
                    out.push(u.element() * put(e * c(0.0, 1.0)));
                } else {
                    let f = v.column(bb) * v.column(a).adjoint();
                    out.push(u.element() * put(&e - &f));
                    out.push(u.element() * put((&e + &f) * c(0.0, 1.0)));
                }
            }
        }
        for i in 0..w.ncols() {
            for a in 0..r {
                let e = w.column(i) * v.column(a).adjoint();
                out.push(put(e.clone()));
                out.push(put(e * c(0.0, 1.0)));
            }
        }
    }
    out
}

/// max |dΓ₀(u·x, e)| over a basis e of T_uP₀; zero iff [x, d] = 0.
pub fn vertical_pairing_defect(rho0: &NormalFunctional, u: &PartialIsometry, x: &AlgebraElement, tol: &ToleranceProfile) -> Result<f64> {
    let v = P0Tangent::new(u.clone(), u.element() * x, tol)?;
    let mut m = 0.0_f64;
    for e in p0_tangent_basis(u) {
        m = m.max(orbit_form(rho0, &v, &P0Tangent::new(u.clone(), e, tol)?, tol)?.abs());
    }
    Ok(m)
}

/// Both sides of the KKS comparison for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KksSample {
    /// ω(a₁γ₀, a₂γ₀).
    pub omega: f64,
    /// 2·Im Tr(γ₀γ₀*·a₁a₂).
    pub kks: f64,
    /// Re of the pairing ⟨2i·E(γ₀), [a₁,a₂]⟩ = 2i·Tr(γ₀γ₀*[a₁,a₂]).
    pub commutator_pairing: f64,
}

pub fn kks_sample(g0: &AlgebraElement, a1: &AlgebraElement, a2: &AlgebraElement) -> Result<KksSample> {
    let omega = symplectic_omega(&(a1 * g0), &(a2 * g0))?;
    let rho = g0 * g0.adjoint();
    let kks = 2.0 * (&rho * a1 * a2).trace().im;
    let commutator_pairing = ((&rho * a1.commutator(a2)).trace() * c(0.0, 2.0)).re;
    Ok(KksSample { omega, kks, commutator_pairing })
}

/// |ω(a₁γ₀, a₂γ₀) − κ·2·Im Tr(γ₀γ₀*·a₁a₂)|.
pub fn kks_check(g0: &AlgebraElement, a1: &AlgebraElement, a2: &AlgebraElement, kappa: f64) -> Result<f64> {
    let s = kks_sample(g0, a1, a2)?;
    Ok((s.omega - kappa * s.kks).abs())
}

/// κ and the ratio ω / Re Tr(2iγ₀[a₁,a₂]), measured on γ₀ = diag(1,0), a₁ = iσ_x, a₂ = iσ_y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub kappa: f64,
    pub pairing_ratio: f64,
}

pub fn calibrate_kappa() -> Calibration {
    let alg = BlockAlgebra::full(2).expect("M2");
    let g0 = alg.matrix_unit(0, 0, 0);
    let sx = alg.matrix_unit(0, 0, 1) + alg.matrix_unit(0, 1, 0);
    let sy = (alg.matrix_unit(0, 1, 0) - alg.matrix_unit(0, 0, 1)).scale(c(0.0, 1.0));
    let s = kks_sample(&g0, &sx.scale(c(0.0, 1.0)), &sy.scale(c(0.0, 1.0))).expect("same algebra");
    Calibration { kappa: s.omega / s.kks, pairing_ratio: s.omega / s.commutator_pairing }
}

/// Base point (u₁, u₂, ξ₂) of a composable pair γ₁ = u₁u₂ξ₂u₂*, γ₂ = u₂ξ₂.
#[derive(Debug, Clone)]
pub struct ComposableFamily {
    pub u1: AlgebraElement,
    pub u2: AlgebraElement,
    pub xi2: AlgebraElement,
}

/// Generators of the curves u_j(t) = e^{t·a_j}u_j e^{t·b_j}, ξ₂(t) = e^{t·h₂}ξ₂e^{t·h₂},
/// with b₁ = −a₂ so that composability holds along the curve.
#[derive(Debug, Clone)]
pub struct FamilyDirection {
    pub a1: AlgebraElement,
    pub a2: AlgebraElement,
    pub b2: AlgebraElement,
    pub h2: AlgebraElement,
}

impl ComposableFamily {
    pub fn new(u1: AlgebraElement, u2: AlgebraElement, xi2: AlgebraElement, tol: &ToleranceProfile) -> Result<Self> {
        let fam = Self { u1, u2, xi2 };
        fam.validate(tol)?;
        Ok(fam)
    }

    fn validate(&self, tol: &ToleranceProfile) -> Result<()> {
        let s1 = self.u1.adjoint() * &self.u1;
        let t2 = &self.u2 * self.u2.adjoint();
        let s2 = self.u2.adjoint() * &self.u2;
        let r = s1.dist(&t2);
        if r > tol.residual_tol {
            return Err(Error::InvalidFamily(format!("u1*u1 differs from u2u2* by {r:.3e}")));
        }
        let r = s2.dist(&self.xi2.support_projection(tol)?);
        if r > tol.residual_tol {
            return Err(Error::InvalidFamily(format!("u2*u2 differs from support(xi2) by {r:.3e}")));
        }
        PartialIsometry::new(self.u1.clone(), tol).map_err(|e| Error::InvalidFamily(e.to_string()))?;
        Ok(())
    }

    pub fn source_projection(&self) -> AlgebraElement {
        self.u2.adjoint() * &self.u2
    }

    pub fn gammas(&self) -> (AlgebraElement, AlgebraElement, AlgebraElement) {
        let t = &self.u2 * &self.xi2;
        (&self.u1 * &t * self.u2.adjoint(), t.clone(), &self.u1 * t)
    }

    /// The family moved to parameter t along the direction.
    pub fn at(&self, dir: &FamilyDirection, t: f64) -> Result<Self> {
        let b1 = -&dir.a2;
        let eh = dir.h2.exp_hermitian(t)?;
        Ok(Self {
            u1: dir.a1.exp_anti_hermitian(t)? * &self.u1 * b1.exp_anti_hermitian(t)?,
            u2: dir.a2.exp_anti_hermitian(t)? * &self.u2 * dir.b2.exp_anti_hermitian(t)?,
            xi2: &eh * &self.xi2 * &eh,
        })
    }

    /// Analytic tangents (γ̇₁, γ̇₂, d/dt(γ₁∙γ₂)) at t = 0.
    pub fn tangents(&self, dir: &FamilyDirection) -> (AlgebraElement, AlgebraElement, AlgebraElement) {
        let (u1, u2, xi) = (&self.u1, &self.u2, &self.xi2);
        let du1 = &dir.a1 * u1 - u1 * &dir.a2;
        let du2 = &dir.a2 * u2 + u2 * &dir.b2;
        let dxi = &dir.h2 * xi + xi * &dir.h2;
        let u2a = u2.adjoint();
        let g1 = &du1 * u2 * xi * &u2a + u1 * &du2 * xi * &u2a + u1 * u2 * &dxi * &u2a + u1 * u2 * xi * du2.adjoint();
        let g2 = &du2 * xi + u2 * &dxi;
        let g12 = &du1 * u2 * xi + u1 * &du2 * xi + u1 * u2 * &dxi;
        (g1, g2, g12)
    }
}

impl FamilyDirection {
    pub fn zero(alg: &BlockAlgebra) -> Self {
        Self { a1: alg.zero(), a2: alg.zero(), b2: alg.zero(), h2: alg.zero() }
    }
}

/// Random family with unit-scale data: u₂: p₀ → p₁, u₁: p₁ → p₂, ξ₂ on p₀.
pub fn random_family<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra, tol: &ToleranceProfile) -> Result<ComposableFamily> {
    let (p0, [u1, u2, _]) = crate::groupoid::sample_pi_chain(rng, alg, tol)?;
    let _ = p0;
    let xi = sampling::positive_on(rng, u2.right_support(), 0.5, 2.0);
    ComposableFamily::new(u1.element().clone(), u2.element().clone(), xi, tol)
}

/// Random corner-constrained direction data of unit operator norm.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, fam: &ComposableFamily) -> FamilyDirection {
    let alg = fam.u1.algebra().clone();
    let p0 = fam.source_projection();
    let corner = |x: AlgebraElement| &p0 * x * &p0;
    FamilyDirection {
        a1: sampling::anti_hermitian(rng, &alg),
        a2: sampling::anti_hermitian(rng, &alg),
        b2: corner(sampling::anti_hermitian(rng, &alg)),
        h2: corner(sampling::hermitian(rng, &alg)),
    }
}

/// |ω(δ₁,δ₁′) + ω(δ₂,δ₂′) − ω(δ₁₂,δ₁₂′)|.
pub fn multiplicativity_residual(fam: &ComposableFamily, d1: &FamilyDirection, d2: &FamilyDirection) -> Result<f64> {
    let (a1, a2, a12) = fam.tangents(d1);
    let (b1, b2, b12) = fam.tangents(d2);
    Ok((symplectic_omega(&a1, &b1)? + symplectic_omega(&a2, &b2)? - symplectic_omega(&a12, &b12)?).abs())
}

/// |⟨γ₁|γ̇₁⟩ + ⟨γ₂|γ̇₂⟩ − ⟨γ₁₂|γ̇₁₂⟩ − d/dt(½‖ξ₂‖²)| at t = 0, with γ̇₁₂ from
/// central differences of the groupoid product at step h.
pub fn exactness_residual(fam: &ComposableFamily, dir: &FamilyDirection, h: f64, tol: &ToleranceProfile) -> Result<f64> {
    let (g1, g2, g12) = fam.gammas();
    let (d1, d2, _) = fam.tangents(dir);
    let product = |t: f64| -> Result<AlgebraElement> {
        let f = fam.at(dir, t)?;
        let (a, b, _) = f.gammas();
        std_mul(&a, &b, tol)
    };
    let d12 = (product(h)? - product(-h)?).scale_re(0.5 / h);
    let dxi = &dir.h2 * &fam.xi2 + &fam.xi2 * &dir.h2;
    let energy = (&fam.xi2 * dxi).trace().re;
    let sum = g1.inner(&d1) + g2.inner(&d2) - g12.inner(&d12);
    Ok((sum - c(energy, 0.0)).norm())
}

/// Degeneracy report for Ψ*ω on T_{(u,v)}(P₀×P₀).
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    /// |Ψ*ω − (2Im⟨u̇γ₀|u̇′γ₀⟩ − 2Im⟨v̇γ₀|v̇′γ₀⟩)| over basis pairs.
    pub split_residual: f64,
    /// |κ·Ψ*ω − (orbit_form(u-legs) − orbit_form(v-legs))| over basis pairs.
    pub leaf_residual: f64,
    /// max pairing of stabilizer directions (u·x, 0), (0, v·y) with the basis.
    pub radical_pairing: f64,
    /// Real dimension of the numerical radical of the Gram matrix.
    pub radical_dim: usize,
    /// 2 × real dimension of the stabilizer.
    pub expected_radical_dim: usize,
    /// Smallest singular value of the Gram matrix above the radical.
    pub min_complement_singular_value: f64,
}

/// Checks the pulled-back form of (u, v) ↦ u·γ₀·v* on P₀×P₀.
pub fn degeneracy_kernel_check(g0: &AlgebraElement, u: &PartialIsometry, v: &PartialIsometry, tol: &ToleranceProfile) -> Result<DegeneracyReport> {
    let rho0 = NormalFunctional::new(g0 * g0);
    let p0 = rho0.support(tol)?;
    let residual = u.right_support().element().dist(p0.element()).max(v.right_support().element().dist(p0.element()));
    if residual > tol.residual_tol {
        return Err(Error::SupportMismatch { residual });
    }
    let (ue, ve) = (u.element(), v.element());
    let push = |du: &AlgebraElement, dv: &AlgebraElement| du * g0 * ve.adjoint() + ue * g0 * dv.adjoint();
    let (tu, tv) = (p0_tangent_basis(u), p0_tangent_basis(v));
    let zero = g0.algebra().zero();
    let basis: Vec<(AlgebraElement, AlgebraElement)> =
        tu.iter().map(|x| (x.clone(), zero.clone())).chain(tv.iter().map(|y| (zero.clone(), y.clone()))).collect();
    let images: Vec<AlgebraElement> = basis.iter().map(|(a, b)| push(a, b)).collect();
    let n = basis.len();
    let legs = |base: &PartialIsometry, xs: &[AlgebraElement]| -> Result<Vec<P0Tangent>> {
        xs.iter().map(|x| P0Tangent::new(base.clone(), x.clone(), tol)).collect()
    };
    let (lu, lv) = (legs(u, &tu)?, legs(v, &tv)?);
    // orbit_form(u-legs) − orbit_form(v-legs); legs of the other factor vanish
    let leaf_value = |i: usize, j: usize| -> Result<f64> {
        let m = tu.len();
        match (i < m, j < m) {
            (true, true) => orbit_form(&rho0, &lu[i], &lu[j], tol),
            (false, false) => Ok(-orbit_form(&rho0, &lv[i - m], &lv[j - m], tol)?),
            _ => Ok(0.0),
        }
    };
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let (mut split, mut leaf) = (0.0_f64, 0.0_f64);
    for i in 0..n {
        for j in 0..n {
            let w = symplectic_omega(&images[i], &images[j])?;
            gram[(i, j)] = w;
            let (ui, vi) = &basis[i];
            let (uj, vj) = &basis[j];
            let s = symplectic_omega(&(ui * g0), &(uj * g0))? - symplectic_omega(&(vi * g0), &(vj * g0))?;
            split = split.max((w - s).abs());
            leaf = leaf.max((KAPPA * w - leaf_value(i, j)?).abs());
        }
    }
    let stab = stabilizer_lie_algebra(&rho0, tol)?;
    let mut radical_pairing = 0.0_f64;
    for x in &stab.basis {
        for dir in [push(&(ue * x), &zero), push(&zero, &(ve * x))] {
            for img in &images {
                radical_pairing = radical_pairing.max(symplectic_omega(&dir, img)?.abs());
            }
        }
    }
    let sv = matrix::real_singular_values(&gram)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = tol.cutoff(smax).max(tol.residual_tol);
    let radical_dim = sv.iter().filter(|&&s| s <= cut).count();
    let min_complement_singular_value = sv.iter().copied().filter(|&s| s > cut).fold(f64::INFINITY, f64::min);
    Ok(DegeneracyReport {
        split_residual: split,
        leaf_residual: leaf,
        radical_pairing,
        radical_dim,
        expected_radical_dim: 2 * stab.dim(),
        min_complement_singular_value,
    })
}

fn check_unit(v: &CVec, tol: &ToleranceProfile) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > tol.residual_tol {
        return Err(Error::NotUnitVector { norm });
    }
    Ok(())
}

/// Standard Fubini–Study form with scale r at ψ: 2r·Im⟨P⊥X|P⊥Y⟩.
pub fn fubini_study_form(psi: &CVec, x: &CVec, y: &CVec, r: f64) -> f64 {
    let perp = |v: &CVec| v - psi * psi.dotc(v);
    2.0 * r * perp(x).dotc(&perp(y)).im
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FubiniStudyComparison {
    pub orbit_value: f64,
    pub fs_value: f64,
    pub residual: f64,
}

/// Orbit form of ρ₀ = r|δ⟩⟨δ| at the base lift u = |δ⟩⟨δ| on the tangents
/// |X⟩⟨δ|, |Y⟩⟨δ|, against κ·r·2·Im⟨X|Y⟩.
pub fn fubini_study_compare(r: f64, delta: &CVec, x: &CVec, y: &CVec, tol: &ToleranceProfile) -> Result<FubiniStudyComparison> {
    check_unit(delta, tol)?;
    let n = delta.len();
    let alg = BlockAlgebra::full(n)?;
    let el = |m: CMat| alg.element(vec![m]);
    let p = el(delta * delta.adjoint())?;
    let rho0 = NormalFunctional::new(p.scale_re(r));
    let u = PartialIsometry::new(p, tol)?;
    let perp = |v: &CVec| v - delta * delta.dotc(v);
    let tx = P0Tangent::new(u.clone(), el(perp(x) * delta.adjoint())?, tol)?;
    let ty = P0Tangent::new(u, el(perp(y) * delta.adjoint())?, tol)?;
    let orbit_value = orbit_form(&rho0, &tx, &ty, tol)?;
    let fs_value = KAPPA * fubini_study_form(delta, x, y, r);
    Ok(FubiniStudyComparison { orbit_value, fs_value, residual: (orbit_value - fs_value).abs() })
}

/// |ω(dΨ(X₁,X₂), dΨ(Y₁,Y₂)) − (FS_r(ψ₁;X₁,Y₁) − FS_r(ψ₂;X₂,Y₂))| for the pair-groupoid
/// arrow r^{1/2}|ψ₁⟩⟨ψ₂|; tangents must satisfy Re⟨ψ_j|X_j⟩ = 0.
pub fn pair_groupoid_residual(
    r: f64,
    psi: (&CVec, &CVec),
    x: (&CVec, &CVec),
    y: (&CVec, &CVec),
    tol: &ToleranceProfile,
) -> Result<f64> {
    check_unit(psi.0, tol)?;
    check_unit(psi.1, tol)?;
    let alg = BlockAlgebra::full(psi.0.len())?;
    let s = r.sqrt();
    let push = |a: &CVec, b: &CVec| alg.element(vec![(a * psi.1.adjoint() + psi.0 * b.adjoint()) * c(s, 0.0)]);
    let w = symplectic_omega(&push(x.0, x.1)?, &push(y.0, y.1)?)?;
    let fs = fubini_study_form(psi.0, x.0, y.0, r) - fubini_study_form(psi.1, x.1, y.1, r);
    Ok((w - fs).abs())
}

/// Random unit vector and a tangent X with Re⟨ψ|X⟩ = 0.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVec {
    let g = sampling::gaussian_matrix(rng, n);
    let v = g.column(0).clone_owned();
    let norm = v.norm();
    v / c(norm, 0.0)
}

pub fn random_sphere_tangent<R: Rng + ?Sized>(rng: &mut R, psi: &CVec) -> CVec {
    let g = sampling::gaussian_matrix(rng, psi.len()).column(0).clone_owned();
    let along = psi.dotc(&g);
    &g - psi * c(along.re, 0.0)
}

/// Π⟨δ_k|δ_{k+1}⟩ and its modulus squared.
pub fn feynman_amplitude(chain: &[CVec], tol: &ToleranceProfile) -> Result<(Complex64, f64)> {
    if chain.len() < 2 {
        return Err(Error::InvalidFamily("an amplitude needs at least two vectors".into()));
    }
    for v in chain {
        check_unit(v, tol)?;
        if v.len() != chain[0].len() {
            return Err(Error::ShapeMismatch(format!("vector lengths {} and {}", v.len(), chain[0].len())));
        }
    }
    let amp = chain.windows(2).map(|w| w[0].dotc(&w[1])).fold(c(1.0, 0.0), |a, b| a * b);
    Ok((amp, amp.norm_sqr()))
}

/// Positive density on a random projection of the given ranks plus a random point of P₀.
pub fn random_orbit_point<R: Rng + ?Sized>(
    rng: &mut R,
    alg: &BlockAlgebra,
    tol: &ToleranceProfile,
) -> Result<(NormalFunctional, PartialIsometry)> {
    let ranks = sampling::proper_ranks(rng, alg);
    let p0: Projection = sampling::projection(rng, alg, &ranks);
    let rho0 = NormalFunctional::new(sampling::positive_on(rng, &p0, 0.5, 2.0));
    let u = crate::charts::random_p0_point(rng, &p0, tol)?;
    Ok((rho0, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::random_p0_tangent;
    use crate::matrix::real_diag;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn m2() -> BlockAlgebra {
        BlockAlgebra::full(2).unwrap()
    }

    fn pauli(alg: &BlockAlgebra) -> (AlgebraElement, AlgebraElement) {
        let sx = alg.matrix_unit(0, 0, 1) + alg.matrix_unit(0, 1, 0);
        let sy = (alg.matrix_unit(0, 1, 0) - alg.matrix_unit(0, 0, 1)).scale(c(0.0, 1.0));
        (sx, sy)
    }

    fn vec2(a: Complex64, b: Complex64) -> CVec {
        CVec::from_vec(vec![a, b])
    }

    #[test]
    fn lp_bracket_examples() {
        let t = tol();
        let a = m2();
        let (sx, sy) = pauli(&a);
        let phi = NormalFunctional::new(a.element(vec![real_diag(&[1.0, 0.0])]).unwrap());
        let (fx, fy) = (LinearObservable(sx.clone()), LinearObservable(sy));
        assert!((lp_bracket(&fx, &fy, &phi, &t).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(lp_bracket(&fx, &fx, &phi, &t).unwrap(), 0.0);
        assert!(lp_bracket(&fx, &TraceObservable, &phi, &t).unwrap().abs() < 1e-15);
        let field = hamiltonian_field(&fx, &phi, &t).unwrap();
        let want = (a.matrix_unit(0, 1, 0) - a.matrix_unit(0, 0, 1)).scale(c(0.0, 1.0));
        assert!(field.dist(&want) < 1e-15);
        assert!(hamiltonian_field(&TraceObservable, &phi, &t).unwrap().norm() < 1e-15);
        let bad = LinearObservable(sx.scale(c(0.0, 1.0)));
        assert!(matches!(lp_bracket(&bad, &fx, &phi, &t), Err(Error::NotHermitianDifferential { .. })));
    }

    #[test]
    fn field_is_tangent_to_the_orbit() {
        let t = tol();
        let a = BlockAlgebra::full(3).unwrap();
        let mut rng = sampling::trial_rng(1, 0);
        let phi = sampling::separated_density(&mut rng, &a, &[3], 0.3);
        let f = LinearObservable(sampling::hermitian(&mut rng, &a));
        let field = hamiltonian_field(&f, &phi, &t).unwrap();
        let eps = 1e-6;
        let moved = NormalFunctional::new(phi.density() + field.scale_re(eps));
        let (s0, s1) = (crate::algebra::orbit_invariant(&phi, &t).unwrap(), crate::algebra::orbit_invariant(&moved, &t).unwrap());
        let drift = s0[0].iter().zip(&s1[0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-10, "{drift}");
    }

    #[test]
    fn bracket_identities() {
        let t = tol();
        let a = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mut rng = sampling::trial_rng(2, 0);
        for _ in 0..20 {
            let phi = NormalFunctional::new(sampling::hermitian(&mut rng, &a));
            let (x, y, z) = (sampling::hermitian(&mut rng, &a), sampling::hermitian(&mut rng, &a), sampling::hermitian(&mut rng, &a));
            assert!(jacobi_residual(&x, &y, &z, &phi, &t).unwrap() < 1e-10);
            let (fx, fy, fz) = (LinearObservable(x.clone()), LinearObservable(y.clone()), LinearObservable(z));
            assert!(leibniz_residual(&fx, &fy, &fz, &phi, &t).unwrap() < 1e-8);
            assert!(field_duality_residual(&fx, &fy, &phi, &t).unwrap() < 1e-12);
            assert!(field_morphism_residual(&x, &y, &phi, &t).unwrap() < 1e-8);
        }
    }

    #[test]
    fn fd_differential_matches_analytic() {
        let t = tol();
        let a = BlockAlgebra::new(vec![2, 2]).unwrap();
        let mut rng = sampling::trial_rng(3, 0);
        let x = sampling::hermitian(&mut rng, &a);
        let d = sampling::hermitian(&mut rng, &a);
        let xc = x.clone();
        let f = FnObservable(move |d: &AlgebraElement| (d * &xc).trace().re.powi(2));
        let want = x.scale_re(2.0 * (&d * &x).trace().re);
        assert!(f.differential(&d, &t).unwrap().dist(&want) < 1e-8);
    }

    #[test]
    fn canonical_bracket_properties() {
        let t = tol();
        let a = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mut rng = sampling::trial_rng(4, 0);
        for _ in 0..20 {
            let g = sampling::gaussian(&mut rng, &a);
            let (x, y) = (sampling::hermitian(&mut rng, &a), sampling::hermitian(&mut rng, &a));
            let fx = PullbackE(x.clone());
            assert_eq!(canonical_bracket(&fx, &fx, &g, &t).unwrap(), 0.0);
            assert!(poisson_map_residual(&x, &y, &g, &t).unwrap() < 1e-10);
            let w = sampling::gaussian(&mut rng, &a);
            assert!(hilbert_field_residual(&fx, &g, &w, &t).unwrap() < 1e-8);
            assert!(commutant_bracket_check(&x, &y, &g, &t).unwrap().abs() < 1e-10);
            let norm = PullbackE(a.identity());
            assert!(canonical_bracket(&norm, &PullbackEprime(y.clone()), &g, &t).unwrap().abs() < 1e-10);
            assert!(canonical_bracket(&norm, &PullbackE(y), &g, &t).unwrap().abs() < 1e-10);
            let xc = x.clone();
            let numeric = FnHilbertObservable(move |g: &AlgebraElement| (g * g.adjoint() * &xc).trace().re);
            assert!(numeric.gradient(&g, &t).unwrap().dist(&fx.gradient(&g, &t).unwrap()) < 1e-8);
        }
        let i = a.identity();
        let (x, y) = (sampling::hermitian(&mut rng, &a), sampling::hermitian(&mut rng, &a));
        assert!(commutant_bracket_check(&x, &y, &i, &t).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kappa_calibration() {
        let cal = calibrate_kappa();
        assert_eq!(cal.kappa, KAPPA);
        assert_eq!(cal.pairing_ratio, 0.5);
        let a = BlockAlgebra::full(3).unwrap();
        let mut rng = sampling::trial_rng(5, 0);
        for _ in 0..20 {
            let g = sampling::gaussian(&mut rng, &a);
            let g0 = &g * g.adjoint();
            let (a1, a2) = (sampling::anti_hermitian(&mut rng, &a), sampling::anti_hermitian(&mut rng, &a));
            assert!(kks_check(&g0, &a1, &a2, cal.kappa).unwrap() < 1e-12);
            assert!(kks_check(&g0, &a1, &a1, cal.kappa).unwrap() < 1e-13);
            let s = kks_sample(&g0, &a1, &a2).unwrap();
            assert!((s.omega - cal.pairing_ratio * s.commutator_pairing).abs() < 1e-12);
        }
        let d1 = a.element(vec![real_diag(&[1.0, 2.0, 3.0])]).unwrap().scale(c(0.0, 1.0));
        let d2 = a.element(vec![real_diag(&[-1.0, 0.5, 2.0])]).unwrap().scale(c(0.0, 1.0));
        let s = kks_sample(&a.identity(), &d1, &d2).unwrap();
        assert!(s.omega.abs() < 1e-15 && s.kks.abs() < 1e-15);
    }

    #[test]
    fn orbit_form_properties() {
        let t = tol();
        let a = BlockAlgebra::new(vec![2, 3]).unwrap();
        let mut rng = sampling::trial_rng(6, 0);
        for _ in 0..20 {
            let (rho0, u) = random_orbit_point(&mut rng, &a, &t).unwrap();
            let (x, y) = (random_p0_tangent(&mut rng, &u, &t).unwrap(), random_p0_tangent(&mut rng, &u, &t).unwrap());
            let stab = stabilizer_lie_algebra(&rho0, &t).unwrap();
            let (s1, s2) = (stab.random_element(&mut rng, &a), stab.random_element(&mut rng, &a));
            assert!(lift_independence_residual(&rho0, &x, &y, &s1, &s2, &t).unwrap() < 1e-10);
            let w = PartialIsometry::new(sampling::unitary(&mut rng, &a), &t).unwrap();
            assert!(left_translation_residual(&rho0, &x, &y, &w, &t).unwrap() < 1e-10);
            for s in &stab.basis {
                assert!(vertical_pairing_defect(&rho0, &u, s, &t).unwrap() < 1e-10);
            }
            let p0 = u.right_support().element();
            let generic = p0 * sampling::anti_hermitian(&mut rng, &a) * p0;
            if generic.commutator(rho0.density()).norm() > 1e-3 {
                assert!(vertical_pairing_defect(&rho0, &u, &generic, &t).unwrap() > 1e-6);
            }
            let md = ModularData::faithful(sampling::density(&mut rng, &a, &[2, 3], 0.2, 2.0), &t).unwrap();
            assert!(flow_orbit_form_residual(&md, 1.7, &rho0, &x, &y, &t).unwrap() < 1e-9);
        }
    }

    #[test]
    fn tangent_basis_dimension() {
        let t = tol();
        let a = BlockAlgebra::full(4).unwrap();
        let mut rng = sampling::trial_rng(7, 0);
        let p0 = sampling::projection(&mut rng, &a, &[2]);
        let u = crate::charts::random_p0_point(&mut rng, &p0, &t).unwrap();
        let basis = p0_tangent_basis(&u);
        assert_eq!(basis.len(), 4 + 2 * 2 * 2);
        for b in &basis {
            P0Tangent::new(u.clone(), b.clone(), &t).unwrap();
        }
        let map = crate::algebra::realify_map(&basis, |b| b.realify());
        assert_eq!(matrix::real_null_space(&map, 1e-10).unwrap().0, basis.len());
    }

    #[test]
    fn multiplicativity_holds() {
        let t = tol();
        for dims in [vec![2], vec![3], vec![2, 2]] {
            let a = BlockAlgebra::new(dims).unwrap();
            let mut rng = sampling::trial_rng(8, 0);
            for _ in 0..20 {
                let fam = random_family(&mut rng, &a, &t).unwrap();
                let (d1, d2) = (random_direction(&mut rng, &fam), random_direction(&mut rng, &fam));
                assert!(multiplicativity_residual(&fam, &d1, &d2).unwrap() < 1e-9);
                let z = FamilyDirection::zero(&a);
                assert_eq!(multiplicativity_residual(&fam, &z, &d2).unwrap(), 0.0);
                // the tangents are derivatives of the curves
                let h = 1e-6;
                let (p, m) = (fam.at(&d1, h).unwrap().gammas(), fam.at(&d1, -h).unwrap().gammas());
                let (g1, g2, _) = fam.tangents(&d1);
                assert!((p.0 - m.0).scale_re(0.5 / h).dist(&g1) < 1e-7);
                assert!((p.1 - m.1).scale_re(0.5 / h).dist(&g2) < 1e-7);
            }
        }
    }

    #[test]
    fn family_guards() {
        let t = tol();
        let a = m2();
        let e12 = a.matrix_unit(0, 0, 1);
        let xi = a.element(vec![real_diag(&[1.0, 0.0])]).unwrap();
        assert!(matches!(ComposableFamily::new(e12.clone(), e12, xi, &t), Err(Error::InvalidFamily(_))));
    }

    #[test]
    fn exactness_converges_quadratically() {
        let t = tol();
        let a = BlockAlgebra::full(3).unwrap();
        let mut rng = sampling::trial_rng(9, 0);
        for _ in 0..10 {
            let fam = random_family(&mut rng, &a, &t).unwrap();
            let dir = random_direction(&mut rng, &fam);
            assert!(exactness_residual(&fam, &dir, 1e-5, &t).unwrap() < 1e-7);
            let (r1, r2) = (exactness_residual(&fam, &dir, 1e-2, &t).unwrap(), exactness_residual(&fam, &dir, 5e-3, &t).unwrap());
            assert!((3.5..4.5).contains(&(r1 / r2)), "{r1} {r2}");
            assert!(exactness_residual(&fam, &FamilyDirection::zero(&a), 1e-5, &t).unwrap() < 1e-12);
            let still = FamilyDirection { h2: a.zero(), ..dir };
            assert!(exactness_residual(&fam, &still, 1e-5, &t).unwrap() < 1e-7);
        }
    }

    #[test]
    fn degeneracy_radical_is_the_stabilizer() {
        let t = tol();
        let a = BlockAlgebra::full(3).unwrap();
        let mut rng = sampling::trial_rng(10, 0);
        for ranks in [[2], [3], [1]] {
            let rho = sampling::separated_density(&mut rng, &a, &ranks, 0.3);
            let g0 = rho.density().sqrt(&t).unwrap();
            let p0 = rho.support(&t).unwrap();
            let u = crate::charts::random_p0_point(&mut rng, &p0, &t).unwrap();
            let v = crate::charts::random_p0_point(&mut rng, &p0, &t).unwrap();
            let rep = degeneracy_kernel_check(&g0, &u, &v, &t).unwrap();
            assert!(rep.split_residual < 1e-12 && rep.leaf_residual < 1e-12 && rep.radical_pairing < 1e-12, "{rep:?}");
            assert_eq!(rep.radical_dim, rep.expected_radical_dim);
            assert_eq!(rep.expected_radical_dim, 2 * ranks[0]);
            assert!(rep.min_complement_singular_value > 1e-7);
        }
        let g0 = a.identity().scale_re(0.5);
        let u = PartialIsometry::from_projection(&Projection::identity(&a));
        let rep = degeneracy_kernel_check(&g0, &u, &u, &t).unwrap();
        assert_eq!(rep.radical_dim, 18);
    }

    #[test]
    fn fubini_study_examples() {
        let t = tol();
        let (o, i) = (c(0.0, 0.0), c(1.0, 0.0));
        let e1 = vec2(i, o);
        let e2 = vec2(o, i);
        let ie2 = vec2(o, c(0.0, 1.0));
        let r = fubini_study_compare(1.0, &e1, &e2, &ie2, &t).unwrap();
        assert!((r.fs_value - 2.0 * KAPPA).abs() < 1e-15 && r.residual < 1e-15);
        assert!(fubini_study_compare(1.0, &e1, &e2, &e2, &t).unwrap().orbit_value.abs() < 1e-15);
        assert!(matches!(fubini_study_compare(1.0, &vec2(i, i), &e2, &e2, &t), Err(Error::NotUnitVector { .. })));
        let mut rng = sampling::trial_rng(11, 0);
        for _ in 0..20 {
            let n = 4;
            let d = random_unit_vector(&mut rng, n);
            let (x, y) = (random_sphere_tangent(&mut rng, &d), random_sphere_tangent(&mut rng, &d));
            let base = fubini_study_compare(1.0, &d, &x, &y, &t).unwrap();
            for r in [0.5, 1.0, 2.0] {
                let cmp = fubini_study_compare(r, &d, &x, &y, &t).unwrap();
                assert!(cmp.residual < 1e-12);
                assert!((cmp.orbit_value - r * base.orbit_value).abs() < 1e-12);
            }
            let (p1, p2) = (random_unit_vector(&mut rng, n), random_unit_vector(&mut rng, n));
            let xs = (random_sphere_tangent(&mut rng, &p1), random_sphere_tangent(&mut rng, &p2));
            let ys = (random_sphere_tangent(&mut rng, &p1), random_sphere_tangent(&mut rng, &p2));
            let res = pair_groupoid_residual(1.5, (&p1, &p2), (&xs.0, &xs.1), (&ys.0, &ys.1), &t).unwrap();
            assert!(res < 1e-12);
        }
    }

    #[test]
    fn amplitude_examples() {
        let t = tol();
        let (o, i) = (c(0.0, 0.0), c(1.0, 0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let chain = [vec2(i, o), vec2(c(s, 0.0), c(s, 0.0)), vec2(o, i)];
        let (amp, prob) = feynman_amplitude(&chain, &t).unwrap();
        assert!((amp - c(0.5, 0.0)).norm() < 1e-15 && (prob - 0.25).abs() < 1e-15);
        let (amp, _) = feynman_amplitude(&[vec2(i, o), vec2(i, o), vec2(i, o)], &t).unwrap();
        assert_eq!(amp, c(1.0, 0.0));
        assert_eq!(feynman_amplitude(&[vec2(i, o), vec2(o, i)], &t).unwrap().0, c(0.0, 0.0));
        assert!(matches!(feynman_amplitude(&[vec2(i, i), vec2(i, o)], &t), Err(Error::NotUnitVector { .. })));
        // phases change the amplitude only by an overall phase
        let mut rng = sampling::trial_rng(12, 0);
        let chain: Vec<CVec> = (0..5).map(|_| random_unit_vector(&mut rng, 3)).collect();
        let phased: Vec<CVec> = chain.iter().enumerate().map(|(k, v)| v * Complex64::from_polar(1.0, 0.7 * k as f64)).collect();
        let (a1, p1) = feynman_amplitude(&chain, &t).unwrap();
        let (a2, p2) = feynman_amplitude(&phased, &t).unwrap();
        assert!((p1 - p2).abs() < 1e-14 && (a1.norm() - a2.norm()).abs() < 1e-14);
        let (left, _) = feynman_amplitude(&chain[..3], &t).unwrap();
        let (right, _) = feynman_amplitude(&chain[2..], &t).unwrap();
        assert!((left * right - a1).norm() < 1e-14);
    }
}
