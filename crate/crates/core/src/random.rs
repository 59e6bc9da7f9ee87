//! Random matrices and quantum objects for instance generation and tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{HermMatrix, C64};
use crate::quantum::{DensityMatrix, Effect};

/// Complex standard Gaussian with `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// `n x k` matrix with orthonormal columns spanning a Haar-random
/// `k`-dimensional subspace of `C^n`.
pub fn isometry<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> DMatrix<C64> {
    let g = ginibre(rng, n, k);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the phase of each column so the distribution is unitarily invariant.
    for j in 0..k {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        if norm > 0.0 {
            let phase = rjj / norm;
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Haar-random unitary.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<C64> {
    isometry(rng, d, d)
}

/// Projector onto a Haar-random `rank`-dimensional subspace.
pub fn projector<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> Effect {
    let v = isometry(rng, d, rank);
    Effect::from_herm_unchecked(HermMatrix::hermitize(&v * v.adjoint()))
}

/// Haar-random unit vector.
pub fn pure_state_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..d).map(|_| complex_gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermMatrix {
    HermMatrix::hermitize(ginibre(rng, d, d))
}

pub fn psd<R: Rng + ?Sized>(rng: &mut R, d: usize) -> HermMatrix {
    let g = ginibre(rng, d, d);
    HermMatrix::hermitize(&g * g.adjoint())
}

/// Density matrix drawn from the Hilbert-Schmidt measure.
pub fn density_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    DensityMatrix::from_unnormalized(psd(rng, d)).expect("Ginibre product has positive trace")
}

pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    DensityMatrix::from_herm_unchecked(HermMatrix::outer(&pure_state_vector(rng, d)))
}

/// Effect with a Haar-random eigenbasis and eigenvalues uniform in `[0, 1]`.
pub fn effect<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Effect {
    let u = unitary(rng, d);
    let mut scaled = u.clone();
    for j in 0..d {
        let lam: f64 = rng.random();
        for i in 0..d {
            scaled[(i, j)] *= lam;
        }
    }
    Effect::from_herm_unchecked(HermMatrix::hermitize(scaled * u.adjoint()))
}

/// Effect `E` with `Tr(E rho) >= 1 - eps`.
///
/// Half the draws are tight: `E = (1-s) I + s P` for a random projector `P`
/// with `s` chosen so that `Tr(E rho) = 1 - eps` exactly.
pub fn high_acceptance_effect<R: Rng + ?Sized>(rng: &mut R, rho: &DensityMatrix, eps: f64) -> Effect {
    let d = rho.dim();
    let (r, tight) = if rng.random_bool(0.5) {
        let rank = rng.random_range(0..d);
        (projector(rng, d, rank), true)
    } else {
        (effect(rng, d), false)
    };
    let miss = 1.0 - r.accept_prob_unchecked(rho);
    let s = if tight && miss > eps {
        eps / miss
    } else {
        rng.random::<f64>() * eps
    };
    let mixed = HermMatrix::identity(d)
        .scale(1.0 - s)
        .add(&r.as_herm().scale(s))
        .expect("same dimension");
    Effect::from_herm_unchecked(mixed)
}

/// Effect `E` with `Tr(E rho) = v` exactly, built from a random effect `R`:
/// `E = (v/r) R` if `v <= r = Tr(R rho)`, else `E = R + (v-r)/(1-r) (I - R)`.
pub fn effect_with_acceptance<R: Rng + ?Sized>(rng: &mut R, rho: &DensityMatrix, v: f64) -> Effect {
    let d = rho.dim();
    let v = v.clamp(0.0, 1.0);
    loop {
        let r_eff = effect(rng, d);
        let r = r_eff.accept_prob_unchecked(rho);
        let h = if v <= r && r > 0.0 {
            r_eff.as_herm().scale(v / r)
        } else if r < 1.0 {
            let s = (v - r) / (1.0 - r);
            r_eff.as_herm().add(&r_eff.complement().as_herm().scale(s)).expect("same dimension")
        } else {
            continue;
        };
        return Effect::from_herm_unchecked(h);
    }
}
