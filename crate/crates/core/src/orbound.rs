//! The control-qubit OR test, the random-order variant, and the amplified
//! OR decision procedure.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::CopySource;
use crate::linalg::{DimCap, HermMatrix, C64};
use crate::numeric::ceil_snap;
use crate::quantum::{DensityMatrix, Effect, Measurement, DEGENERATE_BRANCH};

/// How measurement back-action on copies of the unknown state is simulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    /// Joint density matrix of all copies involved, evolved exactly.
    ExactTensor,
    /// Sampled measurement trajectories with collapse.
    PerCopyCollapse,
    /// Exact outcome statistics of fresh copies; no joint state is formed.
    FreshCopyStatistical,
}

impl fmt::Display for FidelityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FidelityMode::ExactTensor => "exact_tensor",
            FidelityMode::PerCopyCollapse => "per_copy_collapse",
            FidelityMode::FreshCopyStatistical => "fresh_copy_statistical",
        })
    }
}

impl FromStr for FidelityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_tensor" => Ok(FidelityMode::ExactTensor),
            "per_copy_collapse" => Ok(FidelityMode::PerCopyCollapse),
            "fresh_copy_statistical" => Ok(FidelityMode::FreshCopyStatistical),
            other => Err(Error::Config(format!("unknown fidelity mode `{other}`"))),
        }
    }
}

pub const DEFAULT_C_OR: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrBoundParams {
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub ell: usize,
    pub rounds: usize,
    pub c_or: f64,
}

impl OrBoundParams {
    /// `ell = ceil(c_or ln(max(m, 2)) / eps^2)`, `rounds = ceil(48 ln(1/delta))`.
    pub fn derive(m: usize, c: f64, epsilon: f64, delta: f64, c_or: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= c && c <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < epsilon <= c <= 1, got epsilon={epsilon}, c={c}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1)")));
        }
        if c_or <= 0.0 {
            return Err(Error::InvalidParameter("C_or must be positive".into()));
        }
        let ell = ceil_snap(c_or * (m.max(2) as f64).ln() / (epsilon * epsilon)) as usize;
        let rounds = ceil_snap(48.0 * (1.0 / delta).ln()) as usize;
        Ok(OrBoundParams {
            c,
            epsilon,
            delta,
            ell: ell.max(1),
            rounds: rounds.max(1),
            c_or,
        })
    }

    pub fn with_ell(mut self, ell: usize) -> Self {
        self.ell = ell.max(1);
        self
    }

    /// Per-register acceptance count needed: `ceil((c - eps/2) ell)`.
    pub fn threshold(&self) -> usize {
        let t = ceil_snap((self.c - self.epsilon / 2.0) * self.ell as f64);
        t.clamp(0.0, self.ell as f64) as usize
    }

    /// Copies consumed by one decision with measurements of the given arity.
    pub fn copies(&self, arity: usize) -> u64 {
        (self.ell * self.rounds * arity) as u64
    }

    /// Case (i) iff `accepting_rounds >= rounds / 16`.
    pub fn decide(&self, accepting_rounds: usize) -> OrCase {
        if accepting_rounds * 16 >= self.rounds {
            OrCase::CaseI
        } else {
            OrCase::CaseII
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrCase {
    /// Some measurement accepts with probability at least `c`.
    CaseI,
    /// All measurements accept with probability at most `c - epsilon`.
    CaseII,
}

#[derive(Clone, Debug)]
pub struct OrTestOutcome {
    pub accepted: bool,
    pub exact_accept_prob: Option<f64>,
    pub post_state: Option<DensityMatrix>,
}

/// Control-qubit state stored as the four `n x n` system blocks of a
/// `2n x 2n` joint matrix, control most significant.
struct Blocks {
    s00: DMatrix<C64>,
    s01: DMatrix<C64>,
    s11: DMatrix<C64>,
}

fn tr(m: &DMatrix<C64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

fn tr_prod(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

impl Blocks {
    fn plus(rho: &DensityMatrix) -> Self {
        let half = rho.as_herm().matrix().unscale(2.0);
        Blocks {
            s00: half.clone(),
            s01: half.clone(),
            s11: half,
        }
    }

    fn trace(&self) -> f64 {
        tr(&self.s00) + tr(&self.s11)
    }

    /// Unnormalized weight of the conditional measurement accepting.
    fn accept_weight(&self, e: &DMatrix<C64>) -> f64 {
        tr_prod(e, &self.s11).max(0.0)
    }

    /// System operator left when the conditional measurement accepts.
    fn accept_state(&self, sqrt_e: &DMatrix<C64>) -> DMatrix<C64> {
        sqrt_e * &self.s11 * sqrt_e
    }

    /// Continue branch: `|0><0| ⊗ I + |1><1| ⊗ K`.
    fn continue_with(&mut self, k: &DMatrix<C64>) {
        self.s01 = &self.s01 * k;
        self.s11 = k * &self.s11 * k;
    }

    /// `<-| sigma |->`, the system operator on the `-` outcome.
    fn minus_state(&self) -> DMatrix<C64> {
        let s10 = self.s01.adjoint();
        (&self.s00 + &self.s11 - &self.s01 - s10).unscale(2.0)
    }

    /// Replaces the control by `|+>` after a `+` outcome.
    fn collapse_plus(&mut self) {
        let s10 = self.s01.adjoint();
        let y = (&self.s00 + &self.s11 + &self.s01 + s10).unscale(4.0);
        self.s00 = y.clone();
        self.s01 = y.clone();
        self.s11 = y;
    }

    fn rescale(&mut self, s: f64) {
        self.s00.unscale_mut(s);
        self.s01.unscale_mut(s);
        self.s11.unscale_mut(s);
    }
}

struct Prepared {
    e: DMatrix<C64>,
    sqrt_e: DMatrix<C64>,
    k: DMatrix<C64>,
}

fn prepare(effects: &[Effect], dim: usize) -> Result<Vec<Prepared>> {
    effects
        .iter()
        .map(|e| {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.dim(),
                });
            }
            let spec = e.as_herm().eigen();
            Ok(Prepared {
                e: e.as_herm().matrix().clone(),
                sqrt_e: spec.map(|x| x.clamp(0.0, 1.0).sqrt()).into_matrix(),
                k: spec.map(|x| (1.0 - x.clamp(0.0, 1.0)).sqrt()).into_matrix(),
            })
        })
        .collect()
}

fn check_cadence(cadence: usize) -> Result<()> {
    if cadence == 0 {
        Err(Error::InvalidParameter("control check cadence must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn is_check_step(i: usize, len: usize, cadence: usize) -> bool {
    (i + 1).is_multiple_of(cadence) || i + 1 == len
}

/// Exact acceptance probability of the control-qubit OR test, measuring the
/// control after every `cadence` conditional applications and after the
/// last one.
pub fn hlm_accept_probability(effects: &[Effect], rho: &DensityMatrix, cadence: usize, cap: DimCap) -> Result<f64> {
    check_cadence(cadence)?;
    cap.check(2 * rho.dim() as u128)?;
    let prepared = prepare(effects, rho.dim())?;
    let mut blocks = Blocks::plus(rho);
    let mut accept = 0.0;
    for (i, p) in prepared.iter().enumerate() {
        accept += blocks.accept_weight(&p.e);
        blocks.continue_with(&p.k);
        if is_check_step(i, prepared.len(), cadence) {
            accept += tr(&blocks.minus_state()).max(0.0);
            blocks.collapse_plus();
        }
    }
    Ok(accept.clamp(0.0, 1.0))
}

/// Samples one trajectory of the control-qubit OR test. Returns the outcome
/// and, on acceptance, the normalized system state left behind.
fn hlm_trajectory<R: Rng + ?Sized>(
    prepared: &[Prepared],
    rho: &DensityMatrix,
    cadence: usize,
    rng: &mut R,
) -> (bool, Option<DensityMatrix>) {
    let mut blocks = Blocks::plus(rho);
    let finish = |m: DMatrix<C64>| {
        let h = HermMatrix::hermitize(m);
        DensityMatrix::from_unnormalized(h).ok()
    };
    for (i, p) in prepared.iter().enumerate() {
        let total = blocks.trace();
        let w = blocks.accept_weight(&p.e);
        if w / total > DEGENERATE_BRANCH && rng.random::<f64>() * total < w {
            return (true, finish(blocks.accept_state(&p.sqrt_e)));
        }
        blocks.continue_with(&p.k);
        if is_check_step(i, prepared.len(), cadence) {
            let total = blocks.trace();
            let minus = blocks.minus_state();
            let wm = tr(&minus).max(0.0);
            if wm / total > DEGENERATE_BRANCH && rng.random::<f64>() * total < wm {
                return (true, finish(minus));
            }
            blocks.collapse_plus();
        }
        let total = blocks.trace();
        if total > 0.0 {
            blocks.rescale(total);
        }
    }
    (false, None)
}

/// Control-qubit OR test with the control measured after every conditional
/// application.
pub fn hlm_or_test<R: Rng + ?Sized>(
    effects: &[Effect],
    rho: &DensityMatrix,
    mode: FidelityMode,
    cap: DimCap,
    rng: &mut R,
) -> Result<OrTestOutcome> {
    hlm_or_test_with_cadence(effects, rho, mode, cap, 1, rng)
}

/// Control-qubit OR test measuring the control every `cadence` steps.
///
/// `ExactTensor` reports the exact acceptance probability alongside one
/// sampled trajectory; `PerCopyCollapse` only samples.
pub fn hlm_or_test_with_cadence<R: Rng + ?Sized>(
    effects: &[Effect],
    rho: &DensityMatrix,
    mode: FidelityMode,
    cap: DimCap,
    cadence: usize,
    rng: &mut R,
) -> Result<OrTestOutcome> {
    check_cadence(cadence)?;
    if mode == FidelityMode::FreshCopyStatistical {
        return Err(Error::ModeUnsupported {
            operation: "hlm_or_test",
            mode: mode.to_string(),
        });
    }
    cap.check(2 * rho.dim() as u128)?;
    let exact = if mode == FidelityMode::ExactTensor {
        Some(hlm_accept_probability(effects, rho, cadence, cap)?)
    } else {
        None
    };
    let prepared = prepare(effects, rho.dim())?;
    let (accepted, post_state) = hlm_trajectory(&prepared, rho, cadence, rng);
    Ok(OrTestOutcome {
        accepted,
        exact_accept_prob: exact,
        post_state,
    })
}

/// Probability that at least one effect accepts when they are applied in the
/// given order with collapse on rejection.
pub fn sequential_any_accept_probability(effects: &[Effect], rho: &DensityMatrix) -> Result<f64> {
    let mut unnormalized = rho.as_herm().clone();
    for e in effects {
        let k = crate::linalg::herm_sqrt(&e.complement().as_herm().clone())?;
        unnormalized = unnormalized.sandwich(&k)?;
    }
    Ok((1.0 - unnormalized.trace()).clamp(0.0, 1.0))
}

/// Applies the effects in a random order and accepts if any accepts. No
/// soundness guarantee is claimed; this exists for empirical comparison.
///
/// `PerCopyCollapse` samples a collapse trajectory; the other modes sample
/// from the exact probability for the drawn order.
pub fn aaronson_or_test<R: Rng + ?Sized>(
    effects: &[Effect],
    rho: &DensityMatrix,
    mode: FidelityMode,
    rng: &mut R,
) -> Result<bool> {
    let mut order: Vec<&Effect> = effects.iter().collect();
    order.shuffle(rng);
    match mode {
        FidelityMode::PerCopyCollapse => {
            let mut state = rho.clone();
            for e in order {
                let out = e.instrument().measure(&state, rng)?;
                if out.accepted {
                    return Ok(true);
                }
                state = out.post_state;
            }
            Ok(false)
        }
        FidelityMode::ExactTensor | FidelityMode::FreshCopyStatistical => {
            let ordered: Vec<Effect> = order.into_iter().cloned().collect();
            let p = sequential_any_accept_probability(&ordered, rho)?;
            Ok(rng.random::<f64>() < p)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrDecision {
    pub case: OrCase,
    pub accepting_rounds: usize,
    pub rounds: usize,
    pub copies: u64,
}

/// Decides whether some measurement accepts with probability at least `c` or
/// all accept with probability at most `c - epsilon`.
///
/// Each round dispenses `ell * arity` fresh copies under `phase` and runs the
/// OR test on the amplified measurements.
pub fn or_bound_decide(
    effects: &[Measurement],
    source: &mut CopySource,
    params: &OrBoundParams,
    phase: &str,
) -> Result<OrDecision> {
    let arity = effects.first().map(|m| m.arity()).unwrap_or(1);
    let threshold = params.threshold();
    let mut accepting = 0;
    for _ in 0..params.rounds {
        let batch = source.dispense((params.ell * arity) as u64, phase)?;
        if batch.or_test(effects, params.ell, threshold)? {
            accepting += 1;
        }
    }
    Ok(OrDecision {
        case: params.decide(accepting),
        accepting_rounds: accepting,
        rounds: params.rounds,
        copies: params.copies(arity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tensor_product;
    use crate::random;
    use crate::rng::from_seed;

    /// Direct `2n x 2n` evolution with explicit Kraus operators.
    fn joint_oracle(effects: &[Effect], rho: &DensityMatrix) -> f64 {
        let n = rho.dim();
        let plus = HermMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        let minus = HermMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]).unwrap();
        let p1 = HermMatrix::from_real_diagonal(&[0.0, 1.0]);
        let p0 = HermMatrix::from_real_diagonal(&[1.0, 0.0]);
        let cap = DimCap::default();
        let mut sigma = tensor_product(&plus, rho.as_herm(), cap).unwrap().into_matrix();
        let id = HermMatrix::identity(n);
        let mut acc = 0.0;
        for e in effects {
            let sq = crate::linalg::herm_sqrt(e.as_herm()).unwrap();
            let k = crate::linalg::herm_sqrt(e.complement().as_herm()).unwrap();
            let a = tensor_product(&p1, &sq, cap).unwrap().into_matrix();
            let b = tensor_product(&p0, &id, cap).unwrap().into_matrix() + tensor_product(&p1, &k, cap).unwrap().into_matrix();
            acc += tr(&(&a * &sigma * a.adjoint()));
            sigma = &b * &sigma * b.adjoint();
            let pm = tensor_product(&minus, &id, cap).unwrap().into_matrix();
            let pp = tensor_product(&plus, &id, cap).unwrap().into_matrix();
            acc += tr(&(&pm * &sigma * &pm));
            sigma = &pp * &sigma * &pp;
        }
        acc
    }

    /// Reduced single-register recursion.
    fn reduced_oracle(effects: &[Effect], rho: &DensityMatrix) -> f64 {
        let mut tau = rho.as_herm().clone();
        let mut acc = 0.0;
        for e in effects {
            let k = crate::linalg::herm_sqrt(e.complement().as_herm()).unwrap();
            let id = HermMatrix::identity(rho.dim());
            let plus = id.add(&k).unwrap().scale(0.5);
            let minus = id.sub(&k).unwrap().scale(0.5);
            acc += 0.5 * e.as_herm().trace_product(&tau).unwrap();
            acc += tau.sandwich(&minus).unwrap().trace();
            tau = tau.sandwich(&plus).unwrap();
        }
        acc
    }

    #[test]
    fn exact_probability_matches_oracles() {
        let mut rng = from_seed(21);
        for _ in 0..10 {
            let rho = random::density_matrix(&mut rng, 3);
            let effects: Vec<Effect> = (0..3).map(|_| random::effect(&mut rng, 3)).collect();
            let p = hlm_accept_probability(&effects, &rho, 1, DimCap::default()).unwrap();
            assert!((p - joint_oracle(&effects, &rho)).abs() < 1e-10);
            assert!((p - reduced_oracle(&effects, &rho)).abs() < 1e-10);
        }
    }

    #[test]
    fn certain_effect_meets_lower_bound() {
        let rho = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let e = Effect::from_diagonal(&[1.0, 0.0]).unwrap();
        let p = hlm_accept_probability(&[e], &rho, 1, DimCap::default()).unwrap();
        assert!(p >= 1.0 / 7.0);
    }

    #[test]
    fn zero_effects_never_accept() {
        let mut rng = from_seed(22);
        let rho = random::density_matrix(&mut rng, 2);
        let zeros = vec![Effect::zero(2); 4];
        let out = hlm_or_test(&zeros, &rho, FidelityMode::ExactTensor, DimCap::default(), &mut rng).unwrap();
        assert_eq!(out.exact_accept_prob, Some(0.0));
        assert!(!out.accepted);
    }

    #[test]
    fn statistical_mode_is_rejected() {
        let mut rng = from_seed(23);
        let rho = DensityMatrix::maximally_mixed(2);
        let err = hlm_or_test(&[Effect::identity(2)], &rho, FidelityMode::FreshCopyStatistical, DimCap::default(), &mut rng);
        assert!(matches!(err, Err(Error::ModeUnsupported { .. })));
    }

    #[test]
    fn monte_carlo_matches_exact_probability() {
        let mut rng = from_seed(24);
        let rho = random::density_matrix(&mut rng, 2);
        let effects: Vec<Effect> = (0..3).map(|_| random::effect(&mut rng, 2)).collect();
        let exact = hlm_accept_probability(&effects, &rho, 1, DimCap::default()).unwrap();
        let runs = 2000;
        let hits = (0..runs)
            .filter(|_| {
                hlm_or_test(&effects, &rho, FidelityMode::PerCopyCollapse, DimCap::default(), &mut rng)
                    .unwrap()
                    .accepted
            })
            .count();
        let freq = hits as f64 / runs as f64;
        let sigma = (exact * (1.0 - exact) / runs as f64).sqrt();
        assert!((freq - exact).abs() <= 3.0 * sigma, "freq {freq} exact {exact}");
    }

    #[test]
    fn cadence_changes_but_bounds_probability() {
        let mut rng = from_seed(25);
        let rho = random::density_matrix(&mut rng, 2);
        let effects: Vec<Effect> = (0..4).map(|_| random::effect(&mut rng, 2)).collect();
        for cadence in 1..=4 {
            let p = hlm_accept_probability(&effects, &rho, cadence, DimCap::default()).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(hlm_accept_probability(&effects, &rho, 0, DimCap::default()).is_err());
    }

    #[test]
    fn aaronson_trivial_cases() {
        let mut rng = from_seed(26);
        let rho = random::density_matrix(&mut rng, 2);
        for mode in [FidelityMode::PerCopyCollapse, FidelityMode::ExactTensor] {
            assert!(aaronson_or_test(&vec![Effect::identity(2); 3], &rho, mode, &mut rng).unwrap());
            assert!(!aaronson_or_test(&vec![Effect::zero(2); 3], &rho, mode, &mut rng).unwrap());
        }
    }

    #[test]
    fn params_arithmetic() {
        let p = OrBoundParams::derive(8, 0.9, 0.4, 0.1, DEFAULT_C_OR).unwrap();
        assert_eq!(p.ell, (4.0 * 8f64.ln() / 0.16).ceil() as usize);
        assert_eq!(p.rounds, (48.0 * 10f64.ln()).ceil() as usize);
        assert_eq!(p.threshold(), (0.7 * p.ell as f64).ceil() as usize);
        assert_eq!(p.copies(3), (p.ell * p.rounds * 3) as u64);
        assert!(OrBoundParams::derive(8, 0.3, 0.4, 0.1, 4.0).is_err());
        assert_eq!(p.decide(p.rounds.div_ceil(16)), OrCase::CaseI);
        assert_eq!(p.decide(p.rounds.div_ceil(16) - 1), OrCase::CaseII);
    }

    #[test]
    fn identity_is_case_one() {
        let params = OrBoundParams::derive(1, 1.0, 0.5, 0.1, DEFAULT_C_OR).unwrap();
        let mut wins = 0;
        for t in 0..200 {
            let mut src = CopySource::new(
                DensityMatrix::maximally_mixed(2),
                FidelityMode::FreshCopyStatistical,
                crate::rng::substream(5, t),
            );
            let d = or_bound_decide(&[Measurement::Plain(Effect::identity(2))], &mut src, &params, "or-round").unwrap();
            wins += (d.case == OrCase::CaseI) as usize;
            assert_eq!(src.ledger().consumed(), params.copies(1));
        }
        assert!(wins as f64 >= 0.9 * 200.0);
    }

    #[test]
    fn exact_mode_or_round_runs_on_joint_state() {
        let params = OrBoundParams::derive(2, 0.9, 0.5, 0.3, DEFAULT_C_OR).unwrap().with_ell(3);
        let mut src = CopySource::new(
            DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap(),
            FidelityMode::ExactTensor,
            from_seed(27),
        );
        let effects = [
            Measurement::Plain(Effect::from_diagonal(&[1.0, 0.0]).unwrap()),
            Measurement::Plain(Effect::zero(2)),
        ];
        let d = or_bound_decide(&effects, &mut src, &params, "or-round").unwrap();
        assert_eq!(d.case, OrCase::CaseI);
        assert_eq!(src.ledger().consumed(), (3 * params.rounds) as u64);
    }
}
