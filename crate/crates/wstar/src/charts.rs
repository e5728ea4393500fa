//! Local charts of the projection lattice, of 𝒢(M) and 𝒰(M), the bundle chart
//! on P₀, and the connection/curvature forms and Γ₀, dΓ₀ on P₀.

use rand::Rng;

use crate::algebra::{AlgebraElement, NormalFunctional, PartialIsometry, Projection};
use crate::error::{Error, Result};
use crate::matrix::c;
use crate::sampling;
use crate::tolerance::ToleranceProfile;

/// Result of a chart-domain test; `ambiguous` flags a guard-band rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChartMembership {
    pub member: bool,
    pub ambiguous: bool,
}

/// Moore–Penrose inverse of a product of projections (or a small perturbation of
/// one) with supports; the rank scale is max(σ_max, 1) so that nearly orthogonal
/// pairs are not promoted to full rank.
struct ScaledInverse {
    inverse: AlgebraElement,
    left: AlgebraElement,
    right: AlgebraElement,
}

fn scaled_inverse(x: &AlgebraElement, tol: &ToleranceProfile) -> Result<ScaledInverse> {
    let svds = x.svds()?;
    let smax = svds.iter().map(|s| s.sigma_max()).fold(0.0, f64::max);
    let cut = tol.cutoff(smax.max(1.0));
    let blocks = |f: &dyn Fn(&crate::matrix::Svd) -> Result<crate::matrix::CMat>| -> Result<AlgebraElement> {
        x.algebra().element(svds.iter().map(f).collect::<Result<_>>()?)
    };
    Ok(ScaledInverse {
        inverse: blocks(&|s| s.partial_inverse(cut))?,
        left: blocks(&|s| Ok(s.left_support(cut)))?,
        right: blocks(&|s| Ok(s.right_support(cut)))?,
    })
}

/// q ∈ Π_p: pq is partially invertible with left support p and right support q.
pub fn chart_domain_member(p: &Projection, q: &Projection, tol: &ToleranceProfile) -> ChartMembership {
    let no = ChartMembership { member: false, ambiguous: false };
    if p.block_ranks() != q.block_ranks() {
        return no;
    }
    match scaled_inverse(&(p.element() * q.element()), tol) {
        Err(Error::NotPartiallyInvertible { .. }) => ChartMembership { member: false, ambiguous: true },
        Err(_) => no,
        Ok(s) => {
            let ok = s.left.dist(p.element()) <= tol.residual_tol && s.right.dist(q.element()) <= tol.residual_tol;
            ChartMembership { member: ok, ambiguous: false }
        }
    }
}

fn require_domain(p: &Projection, q: &Projection, tol: &ToleranceProfile) -> Result<()> {
    if chart_domain_member(p, q, tol).member {
        Ok(())
    } else {
        Err(Error::NotInDomain)
    }
}

/// x_p = (pq)†, the local section of the target map over Π_p.
pub fn sigma_p(p: &Projection, q: &Projection, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    require_domain(p, q, tol)?;
    Ok(scaled_inverse(&(p.element() * q.element()), tol)?.inverse)
}

/// y_p = (pq)† − p ∈ (1−p)Mp.
pub fn phi_p(p: &Projection, q: &Projection, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    Ok(sigma_p(p, q, tol)? - p.element())
}

fn check_corner(p: &Projection, y: &AlgebraElement, tol: &ToleranceProfile) -> Result<()> {
    let cp = p.complement();
    let residual = (cp.element() * y * p.element()).dist(y);
    if residual > tol.residual_tol * y.norm().max(1.0) {
        return Err(Error::NotInDomain);
    }
    Ok(())
}

/// q = left support of p + y.
pub fn phi_p_inv(p: &Projection, y: &AlgebraElement, tol: &ToleranceProfile) -> Result<Projection> {
    check_corner(p, y, tol)?;
    let s = scaled_inverse(&(p.element() + y), tol)?;
    Projection::new(s.left, tol)
}

/// y_{p′} = (b + d·y)(a + c·y)† with a = p′p, b = (1−p′)p, c = p′(1−p), d = (1−p′)(1−p).
pub fn transition_l(p: &Projection, p2: &Projection, y: &AlgebraElement, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    let q = phi_p_inv(p, y, tol)?;
    if !chart_domain_member(p2, &q, tol).member {
        return Err(Error::NotInOverlap);
    }
    let (pp, qq) = (p.element(), p2.element());
    let (np, nq) = (p.complement(), p2.complement());
    let a = qq * pp;
    let b = nq.element() * pp;
    let cc = qq * np.element();
    let d = nq.element() * np.element();
    let inv = (a + &cc * y).partial_inverse(tol).map_err(|_| Error::NotInOverlap)?;
    Ok((b + d * y) * inv)
}

/// Coordinates (y_p, middle, ỹ_p̃) of a point of 𝒢(M) or 𝒰(M).
#[derive(Debug, Clone)]
pub struct GroupoidChartPoint {
    pub y: AlgebraElement,
    pub middle: AlgebraElement,
    pub y_tilde: AlgebraElement,
}

fn supports(x: &AlgebraElement, tol: &ToleranceProfile) -> Result<(Projection, Projection)> {
    x.partial_inverse(tol)?;
    Ok((Projection::new(x.left_support(tol)?, tol)?, Projection::new(x.right_support(tol)?, tol)?))
}

/// (φ_p(l(x)), p·x·x_p̃, φ_p̃(r(x))) with x_p̃ = σ_p̃(r(x)).
pub fn chart_g(p: &Projection, pt: &Projection, x: &AlgebraElement, tol: &ToleranceProfile) -> Result<GroupoidChartPoint> {
    let (l, r) = supports(x, tol)?;
    let xt = sigma_p(pt, &r, tol)?;
    Ok(GroupoidChartPoint {
        y: phi_p(p, &l, tol)?,
        middle: p.element() * x * xt,
        y_tilde: phi_p(pt, &r, tol)?,
    })
}

/// x = (p + y)·z·(p̃·q̃) with q̃ = φ_p̃⁻¹(ỹ).
pub fn chart_g_inv(p: &Projection, pt: &Projection, coords: &GroupoidChartPoint, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    let qt = phi_p_inv(pt, &coords.y_tilde, tol)?;
    Ok((p.element() + &coords.y) * &coords.middle * (pt.element() * qt.element()))
}

/// Polar factor of σ_p(q): a partial isometry from p onto q.
pub fn u_p(p: &Projection, q: &Projection, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    Ok(sigma_p(p, q, tol)?.polar(tol)?.0)
}

/// (φ_p(l(x)), u_p(l)*·x·u_p̃(r), φ_p̃(r(x))); the middle coordinate of a partial
/// isometry is a partial isometry from p̃ onto p.
pub fn chart_theta(p: &Projection, pt: &Projection, x: &AlgebraElement, tol: &ToleranceProfile) -> Result<GroupoidChartPoint> {
    let (l, r) = supports(x, tol)?;
    Ok(GroupoidChartPoint {
        y: phi_p(p, &l, tol)?,
        middle: u_p(p, &l, tol)?.adjoint() * x * u_p(pt, &r, tol)?,
        y_tilde: phi_p(pt, &r, tol)?,
    })
}

pub fn chart_theta_inv(p: &Projection, pt: &Projection, coords: &GroupoidChartPoint, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    let q = phi_p_inv(p, &coords.y, tol)?;
    let qt = phi_p_inv(pt, &coords.y_tilde, tol)?;
    Ok(u_p(p, &q, tol)? * &coords.middle * u_p(pt, &qt, tol)?.adjoint())
}

/// Transition between two G-charts, as the composite of the chart maps.
pub fn transition_g(
    from: (&Projection, &Projection),
    to: (&Projection, &Projection),
    coords: &GroupoidChartPoint,
    tol: &ToleranceProfile,
) -> Result<GroupoidChartPoint> {
    let x = chart_g_inv(from.0, from.1, coords, tol)?;
    chart_g(to.0, to.1, &x, tol).map_err(|e| if e == Error::NotInDomain { Error::NotInOverlap } else { e })
}

/// 𝒥 read in Θ-coordinates: (y, m, ỹ) ↦ (y, (m†)*, ỹ).
pub fn involution_in_theta(coords: &GroupoidChartPoint, tol: &ToleranceProfile) -> Result<GroupoidChartPoint> {
    Ok(GroupoidChartPoint {
        y: coords.y.clone(),
        middle: coords.middle.partial_inverse(tol)?.adjoint(),
        y_tilde: coords.y_tilde.clone(),
    })
}

/// Bundle chart on P₀: (u(pu)† − p, (p·uu*·p)^{−1/2}·p·u).
pub fn theta_p0(p: &Projection, u: &PartialIsometry, tol: &ToleranceProfile) -> Result<(AlgebraElement, AlgebraElement)> {
    let q = u.left_support();
    require_domain(p, q, tol)?;
    let y = u.element() * scaled_inverse(&(p.element() * u.element()), tol)?.inverse - p.element();
    let pqp = p.element() * q.element() * p.element();
    let inv_sqrt = pqp.positive_calculus(tol, |l| c(l.sqrt().recip(), 0.0))?;
    Ok((y, inv_sqrt * p.element() * u.element()))
}

/// u = u_p(φ_p⁻¹(y))·m.
pub fn theta_p0_inv(p: &Projection, y: &AlgebraElement, m: &AlgebraElement, tol: &ToleranceProfile) -> Result<PartialIsometry> {
    let q = phi_p_inv(p, y, tol)?;
    PartialIsometry::new(u_p(p, &q, tol)? * m, tol)
}

/// A tangent vector to P₀ at u.
#[derive(Debug, Clone)]
pub struct P0Tangent {
    pub u: PartialIsometry,
    pub du: AlgebraElement,
}

impl P0Tangent {
    /// Checks u̇·p₀ = u̇ and u*u̇ anti-Hermitian.
    pub fn new(u: PartialIsometry, du: AlgebraElement, tol: &ToleranceProfile) -> Result<Self> {
        let p0 = u.right_support().element();
        let scale = du.norm().max(1.0);
        let r1 = (&du * p0).dist(&du);
        if r1 > tol.residual_tol * scale {
            return Err(Error::InvalidTangent(format!("direction leaves the source corner by {r1:.3e}")));
        }
        let x = u.element().adjoint() * &du;
        let r2 = (&x + x.adjoint()).norm();
        if r2 > tol.residual_tol * scale {
            return Err(Error::InvalidTangent(format!("u*du is not anti-Hermitian ({r2:.3e})")));
        }
        Ok(Self { u, du })
    }

    /// Vertical part of the tangent, u·x for x = u*u̇.
    pub fn vertical(&self) -> AlgebraElement {
        let u = self.u.element();
        u * u.adjoint() * &self.du
    }

    pub fn horizontal(&self) -> AlgebraElement {
        let u = self.u.element();
        &self.du - u * u.adjoint() * &self.du
    }
}

/// (u̇ʰ, u̇ᵛ) = ((1−uu*)u̇, uu*u̇).
pub fn hv_split(t: &P0Tangent) -> (AlgebraElement, AlgebraElement) {
    (t.horizontal(), t.vertical())
}

/// α(u)(u̇) = u*u̇.
pub fn connection_alpha(t: &P0Tangent) -> AlgebraElement {
    t.u.element().adjoint() * &t.du
}

fn same_base(a: &P0Tangent, b: &P0Tangent, tol: &ToleranceProfile) -> Result<()> {
    let d = a.u.element().dist(b.u.element());
    if d > tol.residual_tol {
        return Err(Error::InvalidTangent(format!("tangents at different base points ({d:.3e})")));
    }
    Ok(())
}

/// Ω(u)(u̇₁, u̇₂) = ½(u̇₁*(1−uu*)u̇₂ − u̇₂*(1−uu*)u̇₁).
pub fn curvature_omega(a: &P0Tangent, b: &P0Tangent, tol: &ToleranceProfile) -> Result<AlgebraElement> {
    same_base(a, b, tol)?;
    let u = a.u.element();
    let q = u.algebra().identity() - u * u.adjoint();
    Ok((a.du.adjoint() * &q * &b.du - b.du.adjoint() * &q * &a.du).scale_re(0.5))
}

fn check_base(rho0: &NormalFunctional, t: &P0Tangent, tol: &ToleranceProfile) -> Result<()> {
    let p0 = rho0.support(tol)?;
    let residual = t.u.right_support().element().dist(p0.element());
    if residual > tol.residual_tol {
        return Err(Error::SupportMismatch { residual });
    }
    Ok(())
}

fn real_part(z: num_complex::Complex64, scale: f64, tol: &ToleranceProfile) -> Result<f64> {
    if z.im.abs() > tol.residual_tol * scale.max(1.0) {
        return Err(Error::InvalidTangent(format!("form value has imaginary part {:.3e}", z.im)));
    }
    Ok(z.re)
}

/// Γ₀(u)(u̇) = i·Tr(d·u*u̇).
pub fn gamma0(rho0: &NormalFunctional, t: &P0Tangent, tol: &ToleranceProfile) -> Result<f64> {
    check_base(rho0, t, tol)?;
    let v = (rho0.density() * connection_alpha(t)).trace() * c(0.0, 1.0);
    real_part(v, rho0.density().norm() * t.du.norm(), tol)
}

/// dΓ₀(u)(u̇₁, u̇₂) = i·Tr(d(u̇₁ʰ*u̇₂ʰ − u̇₂ʰ*u̇₁ʰ)) − i·Tr(d[x₁, x₂]), x_j = u*u̇_j.
pub fn dgamma0(rho0: &NormalFunctional, a: &P0Tangent, b: &P0Tangent, tol: &ToleranceProfile) -> Result<f64> {
    same_base(a, b, tol)?;
    check_base(rho0, a, tol)?;
    let d = rho0.density();
    let (h1, h2) = (a.horizontal(), b.horizontal());
    let (x1, x2) = (connection_alpha(a), connection_alpha(b));
    let horizontal = (d * (h1.adjoint() * &h2 - h2.adjoint() * &h1)).trace();
    let vertical = (d * x1.commutator(&x2)).trace();
    let v = (horizontal - vertical) * c(0.0, 1.0);
    real_part(v, d.norm() * a.du.norm() * b.du.norm(), tol)
}

/// Two-parameter family in P₀ with its analytic partial derivatives.
pub trait SurfaceFamily {
    /// (u(s,t), ∂_s u, ∂_t u).
    fn eval(&self, s: f64, t: f64) -> Result<(AlgebraElement, AlgebraElement, AlgebraElement)>;
}

/// u(s,t) = e^{s·a}·u₀·e^{t·b}, a anti-Hermitian, b anti-Hermitian in the p₀ corner.
pub struct LeftRightFamily {
    pub u0: AlgebraElement,
    pub a: AlgebraElement,
    pub b: AlgebraElement,
}

impl SurfaceFamily for LeftRightFamily {
    fn eval(&self, s: f64, t: f64) -> Result<(AlgebraElement, AlgebraElement, AlgebraElement)> {
        let u = self.a.exp_anti_hermitian(s)? * &self.u0 * self.b.exp_anti_hermitian(t)?;
        Ok((u.clone(), &self.a * &u, &u * &self.b))
    }
}

/// u(s,t) = e^{s·a₁}·e^{t·a₂}·u₀ with both generators on the whole algebra.
pub struct LeftLeftFamily {
    pub u0: AlgebraElement,
    pub a1: AlgebraElement,
    pub a2: AlgebraElement,
}

impl SurfaceFamily for LeftLeftFamily {
    fn eval(&self, s: f64, t: f64) -> Result<(AlgebraElement, AlgebraElement, AlgebraElement)> {
        let e1 = self.a1.exp_anti_hermitian(s)?;
        let inner = self.a2.exp_anti_hermitian(t)? * &self.u0;
        let u = &e1 * &inner;
        Ok((u.clone(), &self.a1 * &u, &e1 * &self.a2 * inner))
    }
}

fn gamma0_raw(rho0: &NormalFunctional, u: &AlgebraElement, du: &AlgebraElement) -> f64 {
    ((rho0.density() * u.adjoint() * du).trace() * c(0.0, 1.0)).re
}

/// dΓ₀(∂_s, ∂_t) at (0,0) = ∂_s Γ₀(∂_t u) − ∂_t Γ₀(∂_s u), by central differences
/// with one Richardson step.
pub fn fd_exterior_derivative(rho0: &NormalFunctional, fam: &dyn SurfaceFamily, h: f64) -> Result<f64> {
    let central = |h: f64| -> Result<f64> {
        let g_t = |s: f64| -> Result<f64> {
            let (u, _, dt) = fam.eval(s, 0.0)?;
            Ok(gamma0_raw(rho0, &u, &dt))
        };
        let g_s = |t: f64| -> Result<f64> {
            let (u, ds, _) = fam.eval(0.0, t)?;
            Ok(gamma0_raw(rho0, &u, &ds))
        };
        Ok((g_t(h)? - g_t(-h)?) / (2.0 * h) - (g_s(h)? - g_s(-h)?) / (2.0 * h))
    };
    let (d1, d2) = (central(h)?, central(h / 2.0)?);
    Ok((4.0 * d2 - d1) / 3.0)
}

/// dΓ₀ on the two coordinate tangents of the family at (0,0).
pub fn family_dgamma0(rho0: &NormalFunctional, fam: &dyn SurfaceFamily, tol: &ToleranceProfile) -> Result<f64> {
    let (u, ds, dt) = fam.eval(0.0, 0.0)?;
    let u = PartialIsometry::new(u, tol)?;
    let a = P0Tangent::new(u.clone(), ds, tol)?;
    let b = P0Tangent::new(u, dt, tol)?;
    dgamma0(rho0, &a, &b, tol)
}

/// Random coordinate y ∈ (1−p)Mp with operator norm `scale`.
pub fn random_coordinate<R: Rng + ?Sized>(rng: &mut R, p: &Projection, scale: f64) -> AlgebraElement {
    let alg = p.element().algebra();
    let g = p.complement().element() * sampling::gaussian(rng, alg) * p.element();
    let n = g.svds().expect("svd").iter().map(|s| s.sigma_max()).fold(0.0, f64::max);
    if n > 0.0 {
        g.scale_re(scale / n)
    } else {
        g
    }
}

/// Random element of P₀ = {u : u*u = p₀}.
pub fn random_p0_point<R: Rng + ?Sized>(rng: &mut R, p0: &Projection, tol: &ToleranceProfile) -> Result<PartialIsometry> {
    let target = sampling::projection(rng, p0.element().algebra(), &p0.block_ranks());
    sampling::partial_isometry(rng, p0, &target, tol)
}

/// Random tangent u·x + (1−uu*)·w·p₀ at u ∈ P₀ with x anti-Hermitian in the corner.
pub fn random_p0_tangent<R: Rng + ?Sized>(rng: &mut R, u: &PartialIsometry, tol: &ToleranceProfile) -> Result<P0Tangent> {
    let alg = u.element().algebra().clone();
    let p0 = u.right_support().element();
    let x = p0 * sampling::anti_hermitian(rng, &alg) * p0;
    let w = sampling::gaussian(rng, &alg);
    let uu = u.element() * u.element().adjoint();
    let horizontal = (alg.identity() - uu) * w * p0;
    P0Tangent::new(u.clone(), u.element() * x + horizontal, tol)
}
