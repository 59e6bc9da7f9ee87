//! Dense complex Hermitian linear algebra.
//!
//! Tensor factors are laid out most-significant-first: in a product of `q`
//! registers of dimension `d`, register 0 varies slowest, so basis index
//! `x` has digits `x = x_0 d^{q-1} + ... + x_{q-1}`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Hermiticity tolerance applied when a matrix is constructed.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Tolerance for validity checks after arithmetic.
pub const POST_ARITH_TOL: f64 = 1e-8;
/// Eigenvalues below `-NOT_PSD_TOL` make a square root fail.
pub const NOT_PSD_TOL: f64 = 1e-6;

pub const DEFAULT_DIM_CAP: usize = 4096;

/// Hard cap on the dimension of any materialized matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimCap(pub usize);

impl Default for DimCap {
    fn default() -> Self {
        DimCap(DEFAULT_DIM_CAP)
    }
}

impl DimCap {
    pub fn check(self, requested: u128) -> Result<usize> {
        if requested > self.0 as u128 {
            Err(Error::Capacity { requested, cap: self.0 })
        } else {
            Ok(requested as usize)
        }
    }

    /// Checks `d^q` without overflowing.
    pub fn check_power(self, d: usize, q: usize) -> Result<usize> {
        self.check(saturating_pow(d, q))
    }
}

pub(crate) fn saturating_pow(d: usize, q: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..q {
        acc = acc.saturating_mul(d as u128);
    }
    acc
}

/// A square complex matrix equal to its own conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix {
    inner: DMatrix<C64>,
}

/// Eigenvalues in ascending order with the matching unitary eigenvector matrix.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl Spectrum {
    pub fn reconstruct(&self) -> HermMatrix {
        self.map(|x| x)
    }

    /// `V f(diag) V^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        HermMatrix::hermitize(scaled * self.eigenvectors.adjoint())
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

impl HermMatrix {
    /// Wraps `m`, rejecting non-square or non-Hermitian input.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        if worst > CONSTRUCTION_TOL {
            return Err(Error::Invalid {
                kind: "Hermitian matrix",
                violation: format!("asymmetry {worst:e}"),
            });
        }
        Ok(Self::hermitize(m))
    }

    /// Projects onto the Hermitian part, `(m + m^dagger) / 2`. Used after
    /// arithmetic that is Hermitian in exact arithmetic.
    pub(crate) fn hermitize(m: DMatrix<C64>) -> Self {
        let adj = m.adjoint();
        HermMatrix {
            inner: (m + adj).unscale(2.0),
        }
    }

    /// Wraps `m` trusting the caller that it is Hermitian.
    pub(crate) fn from_hermitian_unchecked(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        HermMatrix { inner: m }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        HermMatrix { inner: m }
    }

    /// Builds a Hermitian matrix from real row-major entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let m = DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0));
        Self::new(m)
    }

    pub fn identity(d: usize) -> Self {
        HermMatrix {
            inner: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        HermMatrix {
            inner: DMatrix::zeros(d, d),
        }
    }

    /// `|v><v|` (not normalized).
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        HermMatrix {
            inner: DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj()),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.inner[(i, i)].re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        HermMatrix {
            inner: self.inner.scale(s),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(HermMatrix {
            inner: &self.inner + &other.inner,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(HermMatrix {
            inner: &self.inner - &other.inner,
        })
    }

    /// `Tr(self * other)`, real for Hermitian arguments.
    pub fn trace_product(&self, other: &Self) -> Result<f64> {
        same_dim(self, other)?;
        let a = self.inner.as_slice();
        let b = other.inner.as_slice();
        // Tr(AB) = sum_ij A_ij B_ji = sum_ij A_ij conj(B_ij)
        Ok(a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum())
    }

    /// `K * self * K` for Hermitian `K`.
    pub fn sandwich(&self, k: &HermMatrix) -> Result<Self> {
        same_dim(self, k)?;
        Ok(Self::hermitize(&k.inner * &self.inner * &k.inner))
    }

    pub fn eigen(&self) -> Spectrum {
        let n = self.dim();
        if n == 0 {
            return Spectrum {
                eigenvalues: Vec::new(),
                eigenvectors: DMatrix::zeros(0, 0),
            };
        }
        let eig = self.inner.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(Ordering::Equal)
        });
        let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Spectrum {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.inner[(i, j)].norm() <= tol))
    }

    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.inner[(i, i)].re).collect()
    }

    /// Row-major `[re, im]` pairs, the JSON layout used for replay files.
    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let z = self.inner[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter("matrix rows must be square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            C64::new(rows[i][j][0], rows[i][j][1])
        }))
    }
}

impl fmt::Display for HermMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.inner)
    }
}

fn same_dim(a: &HermMatrix, b: &HermMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        })
    } else {
        Ok(())
    }
}

/// Kronecker product `a ⊗ b`, with `a` as the slower-varying factor.
pub fn tensor_product(a: &HermMatrix, b: &HermMatrix, cap: DimCap) -> Result<HermMatrix> {
    cap.check(a.dim() as u128 * b.dim() as u128)?;
    Ok(HermMatrix {
        inner: a.inner.kronecker(&b.inner),
    })
}

/// `a^{⊗n}`; `n = 0` gives the 1×1 identity.
pub fn tensor_power(a: &HermMatrix, n: usize, cap: DimCap) -> Result<HermMatrix> {
    cap.check_power(a.dim(), n)?;
    let mut acc = HermMatrix::identity(1);
    for _ in 0..n {
        acc = tensor_product(&acc, a, cap)?;
    }
    Ok(acc)
}

/// `(1/q) Σ_r Tr_{all registers but r}(state)` for a state on `q` registers
/// of dimension `d`.
pub fn average_single_register_trace(state: &HermMatrix, d: usize, q: usize) -> Result<HermMatrix> {
    let n = state.dim();
    let expected = saturating_pow(d, q);
    if q == 0 || d == 0 || expected != n as u128 {
        return Err(Error::DimensionMismatch {
            expected: usize::try_from(expected).unwrap_or(usize::MAX),
            found: n,
        });
    }
    let data = state.inner.as_slice();
    let mut out = DMatrix::<C64>::zeros(d, d);
    for r in 0..q {
        let stride = d.pow((q - 1 - r) as u32);
        for x in 0..n {
            let a = (x / stride) % d;
            let base = x - a * stride;
            for b in 0..d {
                let y = base + b * stride;
                // column-major: (x, y) lives at x + y * n
                out[(a, b)] += data[x + y * n];
            }
        }
    }
    Ok(HermMatrix::hermitize(out.unscale(q as f64)))
}

/// Principal square root of a PSD matrix. Eigenvalues in `[-1e-6, 0)` are
/// clamped to zero.
pub fn herm_sqrt(a: &HermMatrix) -> Result<HermMatrix> {
    let spec = a.eigen();
    if spec.min() < -NOT_PSD_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: spec.min(),
        });
    }
    Ok(spec.map(|x| x.max(0.0).sqrt()))
}

/// Half the sum of absolute eigenvalues of `rho - sigma`.
pub fn trace_distance(rho: &HermMatrix, sigma: &HermMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    // Always diagonalize the difference in one canonical orientation so the
    // result is bitwise symmetric in its arguments.
    let (a, b) = if canonical_cmp(rho, sigma) == Ordering::Greater {
        (sigma, rho)
    } else {
        (rho, sigma)
    };
    let diff = a.sub(b)?;
    Ok(0.5 * diff.eigen().eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

fn canonical_cmp(a: &HermMatrix, b: &HermMatrix) -> Ordering {
    for (x, y) in a.inner.iter().zip(b.inner.iter()) {
        let o = x
            .re
            .total_cmp(&y.re)
            .then_with(|| x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// The two classes of quantum object a Hermitian matrix can represent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectKind {
    State,
    Effect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Invariant {
    TraceNotOne,
    NegativeEigenvalue,
    EigenvalueAboveOne,
}

/// Which invariant failed and by how much.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub invariant: Invariant,
    pub amount: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.invariant {
            Invariant::TraceNotOne => "trace differs from 1",
            Invariant::NegativeEigenvalue => "eigenvalue below 0",
            Invariant::EigenvalueAboveOne => "eigenvalue above 1",
        };
        write!(f, "{what} by {:e}", self.amount)
    }
}

/// Checks a state (PSD, unit trace) or an effect (spectrum in `[0, 1]`),
/// all within `1e-8`.
pub fn validate(m: &HermMatrix, kind: ObjectKind) -> std::result::Result<(), Violation> {
    let spec = m.eigen();
    match kind {
        ObjectKind::State => {
            let dev = (m.trace() - 1.0).abs();
            if dev > POST_ARITH_TOL {
                return Err(Violation {
                    invariant: Invariant::TraceNotOne,
                    amount: dev,
                });
            }
            if spec.min() < -POST_ARITH_TOL {
                return Err(Violation {
                    invariant: Invariant::NegativeEigenvalue,
                    amount: -spec.min(),
                });
            }
        }
        ObjectKind::Effect => {
            if spec.min() < -POST_ARITH_TOL {
                return Err(Violation {
                    invariant: Invariant::NegativeEigenvalue,
                    amount: -spec.min(),
                });
            }
            if spec.max() > 1.0 + POST_ARITH_TOL {
                return Err(Violation {
                    invariant: Invariant::EigenvalueAboveOne,
                    amount: spec.max() - 1.0,
                });
            }
        }
    }
    Ok(())
}

/// Applies `u` to register `r` of every column: `(I ⊗ .. ⊗ u ⊗ .. ⊗ I) m`.
fn apply_left_all_registers(m: &mut DMatrix<C64>, u: &DMatrix<C64>, d: usize, q: usize) {
    let n = m.nrows();
    let cols = m.ncols();
    let data = m.as_mut_slice();
    let mut scratch = vec![C64::new(0.0, 0.0); d];
    for r in 0..q {
        let stride = d.pow((q - 1 - r) as u32);
        for c in 0..cols {
            let col = &mut data[c * n..(c + 1) * n];
            for x in 0..n {
                if !(x / stride).is_multiple_of(d) {
                    continue;
                }
                for (a, s) in scratch.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..d {
                        acc += u[(a, b)] * col[x + b * stride];
                    }
                    *s = acc;
                }
                for (a, s) in scratch.iter().enumerate() {
                    col[x + a * stride] = *s;
                }
            }
        }
    }
}

/// `W m W^dagger` with `W = u^{⊗q}`, without forming `W`.
pub(crate) fn conjugate_local_unitary(m: &HermMatrix, u: &DMatrix<C64>, d: usize, q: usize) -> HermMatrix {
    let mut x = m.inner.clone();
    apply_left_all_registers(&mut x, u, d, q);
    // W m W^† = (W (W m)^†)^† since m is Hermitian.
    let mut y = x.adjoint();
    apply_left_all_registers(&mut y, u, d, q);
    HermMatrix::hermitize(y.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_tensor_identity() {
        let i2 = HermMatrix::identity(2);
        let p = tensor_product(&i2, &i2, DimCap::default()).unwrap();
        assert_eq!(p.max_abs_diff(&HermMatrix::identity(4)), 0.0);
    }

    #[test]
    fn basis_projector_tensor() {
        let a = HermMatrix::from_real_diagonal(&[1.0, 0.0]);
        let b = HermMatrix::from_real_diagonal(&[0.0, 1.0]);
        let p = tensor_product(&a, &b, DimCap::default()).unwrap();
        let want = HermMatrix::from_real_diagonal(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(p.max_abs_diff(&want), 0.0);
    }

    #[test]
    fn tensor_trace_is_multiplicative() {
        let mut rng = crate::rng::from_seed(3);
        for _ in 0..20 {
            let a = random::hermitian(&mut rng, 2);
            let b = random::hermitian(&mut rng, 2);
            let p = tensor_product(&a, &b, DimCap::default()).unwrap();
            // direct oracle: diagonal of kron is the product of diagonals
            let mut direct = 0.0;
            for i in 0..2 {
                for k in 0..2 {
                    direct += (a.get(i, i) * b.get(k, k)).re;
                }
            }
            assert!((p.trace() - direct).abs() < 1e-12);
            assert!((p.trace() - a.trace() * b.trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_capacity_error() {
        let a = HermMatrix::identity(64);
        assert!(tensor_product(&a, &a, DimCap::default()).is_ok());
        let err = tensor_product(&a, &HermMatrix::identity(65), DimCap::default()).unwrap_err();
        assert!(matches!(err, Error::Capacity { requested: 4160, cap: 4096 }));
    }

    #[test]
    fn product_state_reduces_to_factor() {
        let mut rng = crate::rng::from_seed(4);
        let rho = random::density_matrix(&mut rng, 2);
        let big = tensor_power(rho.as_herm(), 3, DimCap::default()).unwrap();
        let red = average_single_register_trace(&big, 2, 3).unwrap();
        assert!(red.max_abs_diff(rho.as_herm()) < 1e-12);
    }

    #[test]
    fn maximally_mixed_reduces_to_maximally_mixed() {
        let big = HermMatrix::identity(16).scale(1.0 / 16.0);
        let red = average_single_register_trace(&big, 2, 4).unwrap();
        assert!(red.max_abs_diff(&HermMatrix::identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn bell_state_marginal_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = HermMatrix::outer(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let red = average_single_register_trace(&bell, 2, 2).unwrap();
        // by hand: Tr_B |Φ+><Φ+| = Tr_A |Φ+><Φ+| = I/2
        assert!(red.max_abs_diff(&HermMatrix::identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn asymmetric_partial_traces_are_averaged() {
        // |0><0| ⊗ |1><1|: register 0 marginal |0><0|, register 1 marginal |1><1|
        let a = HermMatrix::from_real_diagonal(&[1.0, 0.0]);
        let b = HermMatrix::from_real_diagonal(&[0.0, 1.0]);
        let p = tensor_product(&a, &b, DimCap::default()).unwrap();
        let red = average_single_register_trace(&p, 2, 2).unwrap();
        assert!(red.max_abs_diff(&HermMatrix::identity(2).scale(0.5)) < 1e-15);
        assert!(average_single_register_trace(&p, 2, 3).is_err());
        assert!(average_single_register_trace(&p, 3, 1).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let i = HermMatrix::identity(3);
        assert!(herm_sqrt(&i).unwrap().max_abs_diff(&i) < 1e-12);
        let d = HermMatrix::from_real_diagonal(&[4.0, 9.0]);
        let want = HermMatrix::from_real_diagonal(&[2.0, 3.0]);
        assert!(herm_sqrt(&d).unwrap().max_abs_diff(&want) < 1e-12);
        let bad = HermMatrix::from_real_diagonal(&[1.0, -0.1]);
        assert!(matches!(herm_sqrt(&bad), Err(Error::NotPsd { .. })));
        let tiny_negative = HermMatrix::from_real_diagonal(&[1.0, -1e-9]);
        let r = herm_sqrt(&tiny_negative).unwrap();
        assert!(r.get(1, 1).norm() < 1e-12);
    }

    #[test]
    fn random_psd_sqrt_reconstructs() {
        let mut rng = crate::rng::from_seed(5);
        for d in [2, 3, 5, 8] {
            let a = random::psd(&mut rng, d);
            let r = herm_sqrt(&a).unwrap();
            let sq = HermMatrix::hermitize(r.matrix() * r.matrix());
            assert!(sq.max_abs_diff(&a) < 1e-8);
            assert!(r.eigen().min() > -1e-10);
        }
    }

    #[test]
    fn trace_distance_examples() {
        let mut rng = crate::rng::from_seed(6);
        let rho = random::density_matrix(&mut rng, 3);
        assert!(trace_distance(rho.as_herm(), rho.as_herm()).unwrap().abs() < 1e-12);
        let z0 = HermMatrix::from_real_diagonal(&[1.0, 0.0]);
        let z1 = HermMatrix::from_real_diagonal(&[0.0, 1.0]);
        assert!((trace_distance(&z0, &z1).unwrap() - 1.0).abs() < 1e-12);
        let mixed = HermMatrix::from_real_diagonal(&[0.5, 0.5]);
        // total variation distance between (1/2, 1/2) and (1, 0)
        let tvd = 0.5 * ((0.5f64 - 1.0).abs() + (0.5f64 - 0.0).abs());
        assert!((trace_distance(&mixed, &z0).unwrap() - tvd).abs() < 1e-12);
        assert!(trace_distance(&z0, &HermMatrix::identity(3)).is_err());
    }

    #[test]
    fn validate_examples() {
        assert!(validate(&HermMatrix::identity(2).scale(0.5), ObjectKind::State).is_ok());
        let bad = HermMatrix::from_real_diagonal(&[1.5, -0.5]);
        let v = validate(&bad, ObjectKind::Effect).unwrap_err();
        assert_eq!(v.invariant, Invariant::NegativeEigenvalue);
        assert!((v.amount - 0.5).abs() < 1e-12);
        let above = HermMatrix::from_real_diagonal(&[1.5, 0.5]);
        assert_eq!(
            validate(&above, ObjectKind::Effect).unwrap_err().invariant,
            Invariant::EigenvalueAboveOne
        );
        let untraced = HermMatrix::from_real_diagonal(&[0.7, 0.7]);
        assert_eq!(
            validate(&untraced, ObjectKind::State).unwrap_err().invariant,
            Invariant::TraceNotOne
        );
        let mut rng = crate::rng::from_seed(8);
        for rank in 1..4 {
            let p = random::projector(&mut rng, 4, rank);
            let spec = p.as_herm().eigen();
            // eigenvalue oracle: rank-many ones, the rest zeros
            for (k, l) in spec.eigenvalues.iter().enumerate() {
                let want = if k >= 4 - rank { 1.0 } else { 0.0 };
                assert!((l - want).abs() < 1e-10);
            }
            assert!(validate(p.as_herm(), ObjectKind::Effect).is_ok());
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(HermMatrix::new(m).is_err());
    }

    #[test]
    fn local_unitary_matches_explicit_kronecker() {
        let mut rng = crate::rng::from_seed(9);
        let u = random::unitary(&mut rng, 2);
        let rho = random::density_matrix(&mut rng, 8);
        let fast = conjugate_local_unitary(rho.as_herm(), &u, 2, 3);
        let w = u.kronecker(&u).kronecker(&u);
        let slow = &w * rho.as_herm().matrix() * w.adjoint();
        assert!((fast.matrix() - slow).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }
}
