//! Seeded random generators for algebra elements, projections, partial
//! isometries and densities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{AlgebraElement, BlockAlgebra, NormalFunctional, PartialIsometry, Projection};
use crate::error::Result;
use crate::matrix::{self, c, CMat};
use crate::tolerance::ToleranceProfile;

/// Independent generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(s * re, s * im)
    })
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra) -> AlgebraElement {
    let blocks = alg.block_dims().iter().map(|&n| gaussian_matrix(rng, n)).collect();
    alg.element(blocks).expect("gaussian blocks are finite")
}

fn unit_op_norm(x: AlgebraElement) -> AlgebraElement {
    let s = x.svds().expect("svd").iter().map(|s| s.sigma_max()).fold(0.0, f64::max);
    if s > 0.0 {
        x.scale_re(1.0 / s)
    } else {
        x
    }
}

/// Hermitian element of unit operator norm.
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra) -> AlgebraElement {
    unit_op_norm(gaussian(rng, alg).hermitian_part())
}

/// Anti-Hermitian element of unit operator norm.
pub fn anti_hermitian<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra) -> AlgebraElement {
    unit_op_norm(gaussian(rng, alg).anti_hermitian_part())
}

/// Unitary from the polar factor of a Gaussian element.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra) -> AlgebraElement {
    loop {
        let g = gaussian(rng, alg);
        let tol = ToleranceProfile::default();
        if g.block_ranks(&tol).expect("svd") == alg.block_dims() {
            return g.polar(&tol).expect("polar").0;
        }
    }
}

/// Random block ranks, each at least `min` and at most n_k.
pub fn ranks<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra, min: usize) -> Vec<usize> {
    alg.block_dims().iter().map(|&n| rng.random_range(min.min(n)..=n)).collect()
}

/// Nonzero ranks that leave room for a nontrivial complement when possible.
pub fn proper_ranks<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra) -> Vec<usize> {
    alg.block_dims().iter().map(|&n| if n > 1 { rng.random_range(1..n) } else { 1 }).collect()
}

pub fn projection<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra, ranks: &[usize]) -> Projection {
    let w = unitary(rng, alg);
    let blocks = w
        .blocks()
        .iter()
        .zip(ranks)
        .map(|(u, &r)| {
            let v = u.columns(0, r);
            v * v.adjoint()
        })
        .collect();
    Projection::new(alg.element(blocks).expect("finite"), &ToleranceProfile::default()).expect("projection")
}

/// Partial isometry with prescribed source and target (equal blockwise ranks):
/// the polar factor of q·g·p for Gaussian g.
pub fn partial_isometry<R: Rng + ?Sized>(
    rng: &mut R,
    source: &Projection,
    target: &Projection,
    tol: &ToleranceProfile,
) -> Result<PartialIsometry> {
    let alg = source.element().algebra().clone();
    loop {
        let g = gaussian(rng, &alg);
        let x = target.element() * &g * source.element();
        if x.block_ranks(tol)? != source.block_ranks() {
            continue;
        }
        // keep the factor well conditioned
        let smin = x.svds()?.iter().zip(source.block_ranks()).filter(|(_, r)| *r > 0).map(|(s, r)| s.s[r - 1]).fold(f64::INFINITY, f64::min);
        if smin < 1e-3 {
            continue;
        }
        return PartialIsometry::new(x.polar(tol)?.0, tol);
    }
}

/// Positive element supported exactly on `support`, eigenvalues drawn from [lo, hi].
pub fn positive_on<R: Rng + ?Sized>(rng: &mut R, support: &Projection, lo: f64, hi: f64) -> AlgebraElement {
    let alg = support.element().algebra().clone();
    let blocks = support
        .range_bases()
        .iter()
        .map(|v| {
            let r = v.ncols();
            let w = if r > 0 { unitary(rng, &BlockAlgebra::full(r).unwrap()).into_blocks().remove(0) } else { CMat::zeros(0, 0) };
            let lam: Vec<f64> = (0..r).map(|_| rng.random_range(lo..hi)).collect();
            let f = v * w;
            &f * matrix::real_diag(&lam) * f.adjoint()
        })
        .collect();
    alg.element(blocks).expect("finite")
}

/// Positive functional with support of the given ranks and spectrum in [lo, hi].
pub fn density<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra, ranks: &[usize], lo: f64, hi: f64) -> NormalFunctional {
    let p = projection(rng, alg, ranks);
    NormalFunctional::new(positive_on(rng, &p, lo, hi))
}

/// Positive functional whose eigenvalues on the support are pairwise separated
/// by at least `gap` (distinct spectrum, trivial multiplicities).
pub fn separated_density<R: Rng + ?Sized>(rng: &mut R, alg: &BlockAlgebra, ranks: &[usize], gap: f64) -> NormalFunctional {
    let p = projection(rng, alg, ranks);
    let blocks = p
        .range_bases()
        .iter()
        .map(|v| {
            let r = v.ncols();
            let mut lam: Vec<f64> = Vec::with_capacity(r);
            let mut x = 0.3 + rng.random_range(0.0..0.2);
            for _ in 0..r {
                lam.push(x);
                x += gap + rng.random_range(0.0..0.3);
            }
            v * matrix::real_diag(&lam) * v.adjoint()
        })
        .collect();
    NormalFunctional::new(alg.element(blocks).expect("finite"))
}
