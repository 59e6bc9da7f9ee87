//! States, effects, collapse maps and amplified threshold measurements.
//!
//! Measurements collapse through the Kraus pair `{sqrt(E), sqrt(I - E)}`.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, conjugate_local_unitary, validate, DimCap, HermMatrix, ObjectKind, C64,
};

/// Branch probabilities at or below this are never conditioned on.
pub const DEGENERATE_BRANCH: f64 = 1e-12;

/// A PSD unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(HermMatrix);

impl DensityMatrix {
    pub fn new(h: HermMatrix) -> Result<Self> {
        validate(&h, ObjectKind::State).map_err(|v| Error::Invalid {
            kind: "density matrix",
            violation: v.to_string(),
        })?;
        Ok(DensityMatrix(h))
    }

    /// `h / Tr(h)` without a spectral check.
    pub fn from_unnormalized(h: HermMatrix) -> Result<Self> {
        let tr = h.trace();
        if tr <= DEGENERATE_BRANCH {
            return Err(Error::DegenerateBranch { probability: tr });
        }
        Ok(DensityMatrix(h.scale(1.0 / tr)))
    }

    pub(crate) fn from_herm_unchecked(h: HermMatrix) -> Self {
        DensityMatrix(h)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(HermMatrix::identity(d).scale(1.0 / d as f64))
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(HermMatrix::from_real_diagonal(probs))
    }

    /// `|v><v|` for a vector normalized here.
    pub fn pure(v: &[C64]) -> Result<Self> {
        Self::from_unnormalized(HermMatrix::outer(v))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_herm(&self) -> &HermMatrix {
        &self.0
    }

    pub fn tensor_power(&self, n: usize, cap: DimCap) -> Result<DensityMatrix> {
        Ok(DensityMatrix(linalg::tensor_power(&self.0, n, cap)?))
    }

    /// Projects the spectrum onto `[0, inf)` and renormalizes; used to repair
    /// drift after long chains of collapses.
    pub fn clamped(&self) -> DensityMatrix {
        let h = self.0.eigen().map(|x| x.max(0.0));
        let tr = h.trace();
        DensityMatrix(h.scale(1.0 / tr))
    }

    pub fn is_diagonal(&self) -> bool {
        self.0.is_diagonal(1e-12)
    }
}

/// A Hermitian matrix with spectrum in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Effect(HermMatrix);

impl Effect {
    pub fn new(h: HermMatrix) -> Result<Self> {
        validate(&h, ObjectKind::Effect).map_err(|v| Error::Invalid {
            kind: "effect",
            violation: v.to_string(),
        })?;
        Ok(Effect(h))
    }

    pub(crate) fn from_herm_unchecked(h: HermMatrix) -> Self {
        Effect(h)
    }

    pub fn identity(d: usize) -> Self {
        Effect(HermMatrix::identity(d))
    }

    pub fn zero(d: usize) -> Self {
        Effect(HermMatrix::zeros(d))
    }

    pub fn from_diagonal(vals: &[f64]) -> Result<Self> {
        Self::new(HermMatrix::from_real_diagonal(vals))
    }

    /// Projector onto the normalized span of `v`.
    pub fn projector(v: &[C64]) -> Result<Self> {
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidParameter("zero vector".into()));
        }
        Ok(Effect(HermMatrix::outer(v).scale(1.0 / norm2)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_herm(&self) -> &HermMatrix {
        &self.0
    }

    /// `I - E`.
    pub fn complement(&self) -> Effect {
        Effect(HermMatrix::identity(self.dim()).sub(&self.0).expect("same dimension"))
    }

    pub fn is_diagonal(&self) -> bool {
        self.0.is_diagonal(1e-12)
    }

    pub(crate) fn accept_prob_unchecked(&self, rho: &DensityMatrix) -> f64 {
        self.0
            .trace_product(rho.as_herm())
            .expect("caller checked dimensions")
            .clamp(0.0, 1.0)
    }

    /// Precomputes both Kraus operators.
    pub fn instrument(&self) -> Instrument {
        let spec = self.0.eigen();
        Instrument {
            effect: self.clone(),
            accept: spec.map(|x| x.clamp(0.0, 1.0).sqrt()),
            reject: spec.map(|x| (1.0 - x.clamp(0.0, 1.0)).sqrt()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Accept,
    Reject,
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub accepted: bool,
    pub probability: f64,
    pub post_state: DensityMatrix,
}

/// An effect together with its Kraus pair.
#[derive(Clone, Debug)]
pub struct Instrument {
    effect: Effect,
    accept: HermMatrix,
    reject: HermMatrix,
}

impl Instrument {
    pub fn effect(&self) -> &Effect {
        &self.effect
    }

    pub fn apply(&self, rho: &DensityMatrix, branch: Branch) -> Result<MeasurementOutcome> {
        check_dims(self.effect.dim(), rho.dim())?;
        let p_acc = self.effect.accept_prob_unchecked(rho);
        let (probability, kraus) = match branch {
            Branch::Accept => (p_acc, &self.accept),
            Branch::Reject => (1.0 - p_acc, &self.reject),
        };
        if probability <= DEGENERATE_BRANCH {
            return Err(Error::DegenerateBranch { probability });
        }
        let post = rho.as_herm().sandwich(kraus)?.scale(1.0 / probability);
        Ok(MeasurementOutcome {
            accepted: branch == Branch::Accept,
            probability,
            post_state: DensityMatrix(post),
        })
    }

    /// Samples an outcome and collapses. Branches of probability at most
    /// `1e-12` are never selected.
    pub fn measure<R: Rng + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> Result<MeasurementOutcome> {
        check_dims(self.effect.dim(), rho.dim())?;
        let p = self.effect.accept_prob_unchecked(rho);
        let accept = if p <= DEGENERATE_BRANCH {
            false
        } else if 1.0 - p <= DEGENERATE_BRANCH {
            true
        } else {
            rng.random::<f64>() < p
        };
        self.apply(rho, if accept { Branch::Accept } else { Branch::Reject })
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// `Tr(E rho)` clamped to `[0, 1]`.
pub fn accept_prob(e: &Effect, rho: &DensityMatrix) -> Result<f64> {
    check_dims(e.dim(), rho.dim())?;
    Ok(e.accept_prob_unchecked(rho))
}

pub fn apply_effect(e: &Effect, rho: &DensityMatrix, branch: Branch) -> Result<MeasurementOutcome> {
    e.instrument().apply(rho, branch)
}

/// Applies every effect in order, conditioning on acceptance each time.
/// Returns the probability that all accept and the final state.
pub fn sequential_accept_all(effects: &[Effect], rho: &DensityMatrix) -> Result<(f64, DensityMatrix)> {
    let mut prob = 1.0;
    let mut state = rho.clone();
    for e in effects {
        let out = apply_effect(e, &state, Branch::Accept)?;
        prob *= out.probability;
        state = out.post_state;
    }
    Ok((prob, state))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtLeast,
    AtMost,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AtLeast => "at_least",
            Direction::AtMost => "at_most",
        })
    }
}

/// Exact `Pr[Binomial(n, p) >= t]` or `Pr[Binomial(n, p) <= t]`.
pub fn binomial_tail(n: usize, p: f64, t: usize, direction: Direction) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let qualifies = |k: usize| match direction {
        Direction::AtLeast => k >= t,
        Direction::AtMost => k <= t,
    };
    if p == 0.0 {
        return if qualifies(0) { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if qualifies(n) { 1.0 } else { 0.0 };
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut ln_choose = 0.0f64;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if qualifies(k) {
            total += (ln_choose + k as f64 * lp + (n - k) as f64 * lq).exp();
        }
    }
    total.clamp(0.0, 1.0)
}

/// Applies a base effect to each of `registers` registers and thresholds the
/// number of acceptances.
#[derive(Clone, Debug)]
pub struct ThresholdEffect {
    base: Effect,
    registers: usize,
    threshold: usize,
    direction: Direction,
}

impl ThresholdEffect {
    pub fn new(base: Effect, registers: usize, threshold: usize, direction: Direction) -> Result<Self> {
        if registers == 0 {
            return Err(Error::InvalidParameter("threshold effect needs at least one register".into()));
        }
        if threshold > registers {
            return Err(Error::InvalidParameter(format!(
                "threshold {threshold} exceeds register count {registers}"
            )));
        }
        Ok(ThresholdEffect {
            base,
            registers,
            threshold,
            direction,
        })
    }

    pub fn base(&self) -> &Effect {
        &self.base
    }

    pub fn registers(&self) -> usize {
        self.registers
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Acceptance probability on `rho^{⊗n}` when the base effect accepts
    /// `rho` with probability `p`.
    pub fn accept_prob_product(&self, p: f64) -> f64 {
        binomial_tail(self.registers, p, self.threshold, self.direction)
    }

    fn qualifies(&self, count: usize) -> bool {
        match self.direction {
            Direction::AtLeast => count >= self.threshold,
            Direction::AtMost => count <= self.threshold,
        }
    }

    /// Base eigenbasis `V` and the diagonal of the operator in the `V^{⊗n}`
    /// basis.
    fn eigen_weights(&self) -> (DMatrix<C64>, Vec<f64>) {
        let spec = self.base.as_herm().eigen();
        let lam: Vec<f64> = spec.eigenvalues.iter().map(|l| l.clamp(0.0, 1.0)).collect();
        let d = lam.len();
        let n = self.registers;
        let total = d.pow(n as u32);
        let mut weights = Vec::with_capacity(total);
        let mut dist = vec![0.0f64; n + 1];
        for x in 0..total {
            dist.iter_mut().for_each(|v| *v = 0.0);
            dist[0] = 1.0;
            let mut rest = x;
            let mut stride = total / d;
            for used in 0..n {
                let digit = rest / stride;
                rest %= stride;
                stride = (stride / d).max(1);
                let l = lam[digit];
                for k in (0..=used + 1).rev() {
                    let stay = dist[k] * (1.0 - l);
                    let up = if k > 0 { dist[k - 1] * l } else { 0.0 };
                    dist[k] = stay + up;
                }
            }
            let g: f64 = (0..=n).filter(|&k| self.qualifies(k)).map(|k| dist[k]).sum();
            weights.push(g.clamp(0.0, 1.0));
        }
        (spec.eigenvectors, weights)
    }

    fn check_state_dim(&self, state: &HermMatrix) -> Result<()> {
        let want = linalg::saturating_pow(self.base.dim(), self.registers);
        if want != state.dim() as u128 {
            return Err(Error::DimensionMismatch {
                expected: usize::try_from(want).unwrap_or(usize::MAX),
                found: state.dim(),
            });
        }
        Ok(())
    }

    /// `Tr(F state)` for a state on `n` registers, without materializing `F`.
    pub fn expectation(&self, state: &DensityMatrix) -> Result<f64> {
        self.check_state_dim(state.as_herm())?;
        let (v, g) = self.eigen_weights();
        let rotated = conjugate_local_unitary(state.as_herm(), &v.adjoint(), self.base.dim(), self.registers);
        Ok((0..g.len())
            .map(|x| g[x] * rotated.get(x, x).re)
            .sum::<f64>()
            .clamp(0.0, 1.0))
    }

    /// Accept branch of the canonical collapse: `(sqrt(F) rho sqrt(F) / p, p)`
    /// with `p = Tr(F rho)`. Works in the eigenbasis of `F`, which is the
    /// `n`-fold tensor power of the base eigenbasis.
    pub fn postselect(&self, state: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
        self.check_state_dim(state.as_herm())?;
        let (v, g) = self.eigen_weights();
        let d = self.base.dim();
        let n = self.registers;
        let mut rotated = conjugate_local_unitary(state.as_herm(), &v.adjoint(), d, n).into_matrix();
        let p: f64 = (0..g.len()).map(|x| g[x] * rotated[(x, x)].re).sum();
        if p <= DEGENERATE_BRANCH {
            return Err(Error::DegeneratePostselection { probability: p });
        }
        let roots: Vec<f64> = g.iter().map(|x| x.sqrt()).collect();
        let dim = g.len();
        for j in 0..dim {
            for i in 0..dim {
                rotated[(i, j)] *= roots[i] * roots[j] / p;
            }
        }
        let back = conjugate_local_unitary(&HermMatrix::from_hermitian_unchecked(rotated), &v, d, n);
        Ok((DensityMatrix(back), p.min(1.0)))
    }

    /// Threshold in the opposite direction whose operator is `I - self`.
    pub fn complement(&self) -> Option<ThresholdEffect> {
        let (threshold, direction) = match self.direction {
            Direction::AtLeast => (self.threshold.checked_sub(1)?, Direction::AtMost),
            Direction::AtMost => {
                if self.threshold >= self.registers {
                    return None;
                }
                (self.threshold + 1, Direction::AtLeast)
            }
        };
        Some(ThresholdEffect {
            base: self.base.clone(),
            registers: self.registers,
            threshold,
            direction,
        })
    }

    pub fn materialize(&self, cap: DimCap) -> Result<Effect> {
        materialize_threshold(self, cap)
    }
}

/// `Σ_{count <= t}` of tensor products of `e` and `I - e` over `n` registers,
/// built by dynamic programming over registers with count-indexed partial
/// operators. Counts above `t` are dropped as they arise.
fn at_most_operator(e: &DMatrix<C64>, n: usize, t: usize) -> DMatrix<C64> {
    let d = e.nrows();
    let ie = DMatrix::<C64>::identity(d, d) - e;
    let mut buckets = vec![DMatrix::<C64>::identity(1, 1)];
    for _ in 0..n {
        let len = (buckets.len() + 1).min(t + 1);
        let mut next = Vec::with_capacity(len);
        for k in 0..len {
            let dim = buckets[0].nrows() * d;
            let mut acc = DMatrix::<C64>::zeros(dim, dim);
            if k < buckets.len() {
                acc += buckets[k].kronecker(&ie);
            }
            if k >= 1 && k - 1 < buckets.len() {
                acc += buckets[k - 1].kronecker(e);
            }
            next.push(acc);
        }
        buckets = next;
    }
    let dim = buckets[0].nrows();
    buckets
        .into_iter()
        .fold(DMatrix::zeros(dim, dim), |acc, b| acc + b)
}

/// The exact POVM element of a threshold measurement.
pub fn materialize_threshold(te: &ThresholdEffect, cap: DimCap) -> Result<Effect> {
    let dim = cap.check_power(te.base.dim(), te.registers)?;
    let n = te.registers;
    let t = te.threshold;
    let e = te.base.as_herm().matrix();
    let ie = te.base.complement();
    // Counting rejections instead of acceptances swaps E and I - E; pick
    // whichever formulation keeps fewer buckets alive.
    let m = match te.direction {
        Direction::AtMost => {
            if t >= n {
                DMatrix::identity(dim, dim)
            } else if t < n - t {
                at_most_operator(e, n, t)
            } else {
                // count <= t  <=>  not (rejections <= n - t - 1)
                DMatrix::identity(dim, dim) - at_most_operator(ie.as_herm().matrix(), n, n - t - 1)
            }
        }
        Direction::AtLeast => {
            if t == 0 {
                DMatrix::identity(dim, dim)
            } else if n - t < t {
                // count >= t  <=>  rejections <= n - t
                at_most_operator(ie.as_herm().matrix(), n, n - t)
            } else {
                DMatrix::identity(dim, dim) - at_most_operator(e, n, t - 1)
            }
        }
    };
    Ok(Effect(HermMatrix::hermitize(m)))
}

/// A measurement that can be handed to the search and OR procedures, acting
/// on `arity()` copies of the unknown state at a time.
#[derive(Clone, Debug)]
pub enum Measurement {
    Plain(Effect),
    Amplified(ThresholdEffect),
    /// Never accepts. Used for padding and for refinement effects whose
    /// threshold is out of range.
    Never { dim: usize, arity: usize },
}

impl Measurement {
    pub fn arity(&self) -> usize {
        match self {
            Measurement::Plain(_) => 1,
            Measurement::Amplified(te) => te.registers(),
            Measurement::Never { arity, .. } => *arity,
        }
    }

    /// Dimension of a single copy it acts on.
    pub fn copy_dim(&self) -> usize {
        match self {
            Measurement::Plain(e) => e.dim(),
            Measurement::Amplified(te) => te.base().dim(),
            Measurement::Never { dim, .. } => *dim,
        }
    }

    pub fn is_never(&self) -> bool {
        matches!(self, Measurement::Never { .. })
    }

    /// Acceptance probability on `rho^{⊗arity}`.
    pub fn accept_prob(&self, rho: &DensityMatrix) -> Result<f64> {
        match self {
            Measurement::Plain(e) => accept_prob(e, rho),
            Measurement::Amplified(te) => Ok(te.accept_prob_product(accept_prob(te.base(), rho)?)),
            Measurement::Never { dim, .. } => {
                check_dims(*dim, rho.dim())?;
                Ok(0.0)
            }
        }
    }

    /// The POVM element on the joint space of `arity` copies.
    pub fn materialize(&self, cap: DimCap) -> Result<Effect> {
        match self {
            Measurement::Plain(e) => Ok(e.clone()),
            Measurement::Amplified(te) => te.materialize(cap),
            Measurement::Never { dim, arity } => Ok(Effect::zero(cap.check_power(*dim, *arity)?)),
        }
    }
}
