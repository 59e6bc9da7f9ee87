//! Shadow tomography by postselected refinement of a classically stored
//! amplified hypothesis, and the promise-gap decision procedure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{CopyLedger, CopySource};
use crate::linalg::{average_single_register_trace, DimCap};
use crate::numeric::{ceil_snap, count_in_range, floor_snap};
use crate::quantum::{accept_prob, DensityMatrix, Direction, Effect, Measurement, ThresholdEffect};
use crate::search::{copy_bound, gentle_search, SearchParams, DEFAULT_C_SEARCH};
use crate::orbound::DEFAULT_C_OR;

/// Bar at which the search looks for a refinement.
pub const SEARCH_BAR: f64 = 5.0 / 6.0;
/// Search gap; the verification bar is `SEARCH_BAR - SEARCH_GAP = 2/3`.
pub const SEARCH_GAP: f64 = 1.0 / 6.0;

/// Formula constants, echoed into every report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c_q: f64,
    pub c_t: f64,
    pub c_gap: f64,
    pub c_or: f64,
    pub c_search: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            c_q: 4.0,
            c_t: 8.0,
            c_gap: 8.0,
            c_or: DEFAULT_C_OR,
            c_search: DEFAULT_C_SEARCH,
        }
    }
}

impl Constants {
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("C_q".to_string(), self.c_q),
            ("C_T".to_string(), self.c_t),
            ("C_gap".to_string(), self.c_gap),
            ("C_or".to_string(), self.c_or),
            ("C_search".to_string(), self.c_search),
        ])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub q: Option<usize>,
    pub cap: Option<DimCap>,
    pub constants: Option<Constants>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowParams {
    pub d: usize,
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub q: usize,
    /// `q` from the formula, before any override.
    pub q_derived: usize,
    pub beta: f64,
    pub t_bound: usize,
    /// Copy bound of a single search, in single-copy applications.
    pub ell_search: u64,
    /// `t_bound * q * ell_search`.
    pub k_pred: u64,
    /// Set when `q` was overridden below the derived value, which voids the
    /// accuracy guarantee.
    pub non_theoretical: bool,
    pub constants: Constants,
    pub cap: DimCap,
}

fn ln_d(d: usize) -> f64 {
    (d.max(3) as f64).ln()
}

/// Derives `q`, `beta`, the iteration bound and the predicted copy count.
pub fn derive_params(d: usize, m: usize, epsilon: f64, delta: f64, overrides: Overrides) -> Result<ShadowParams> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need epsilon, delta in (0, 1), got {epsilon}, {delta}"
        )));
    }
    if d < 2 || m == 0 {
        return Err(Error::InvalidParameter(format!("need D >= 2 and M >= 1, got D={d}, M={m}")));
    }
    let constants = overrides.constants.unwrap_or_default();
    let cap = overrides.cap.unwrap_or_default();
    let loglog = ln_d(d).ln().max(1.0);
    let q_derived = ceil_snap(constants.c_q / (epsilon * epsilon) * (loglog + (1.0 / epsilon).ln())) as usize;
    let q = overrides.q.unwrap_or(q_derived);
    if q == 0 {
        return Err(Error::InvalidParameter("q must be at least 1".into()));
    }
    cap.check_power(d, q)?;
    let beta = delta * epsilon.powi(4) / ln_d(d).powi(2);
    let t_bound = ceil_snap(constants.c_t * q as f64 * (d as f64).ln() / epsilon) as usize;
    let ell_search = copy_bound(2 * m, SEARCH_GAP, beta, constants.c_search).ceil() as u64;
    Ok(ShadowParams {
        d,
        m,
        epsilon,
        delta,
        q,
        q_derived,
        beta,
        t_bound,
        ell_search,
        k_pred: t_bound as u64 * q as u64 * ell_search,
        non_theoretical: q < q_derived,
        constants,
        cap,
    })
}

/// The amplified hypothesis and its single-register marginal.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    amplified: DensityMatrix,
    reduced: DensityMatrix,
    iteration: usize,
    postselection_probability: f64,
    d: usize,
    q: usize,
}

impl Hypothesis {
    /// The maximally mixed state on `q` registers.
    pub fn initial(d: usize, q: usize, cap: DimCap) -> Result<Self> {
        let dim = cap.check_power(d, q)?;
        Ok(Hypothesis {
            amplified: DensityMatrix::maximally_mixed(dim),
            reduced: DensityMatrix::maximally_mixed(d),
            iteration: 0,
            postselection_probability: 1.0,
            d,
            q,
        })
    }

    pub fn amplified(&self) -> &DensityMatrix {
        &self.amplified
    }

    pub fn reduced(&self) -> &DensityMatrix {
        &self.reduced
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn postselection_probability(&self) -> f64 {
        self.postselection_probability
    }
}

/// Refinement measurements for one effect. `None` marks a threshold outside
/// `[0, q]`, whose measurement never accepts.
#[derive(Clone, Debug)]
pub struct RefinementPair {
    pub plus: Option<ThresholdEffect>,
    pub minus: Option<ThresholdEffect>,
}

impl RefinementPair {
    fn to_measurements(&self, d: usize, q: usize) -> [Measurement; 2] {
        let wrap = |t: &Option<ThresholdEffect>| match t {
            Some(te) => Measurement::Amplified(te.clone()),
            None => Measurement::Never { dim: d, arity: q },
        };
        [wrap(&self.plus), wrap(&self.minus)]
    }
}

/// `+`: at least `ceil((v + 3 eps/4) q)` of `q` accept.
/// `-`: at most `floor((v - 3 eps/4) q)` accept.
pub fn build_refinement_effects(e: &Effect, hypothesis_value: f64, params: &ShadowParams) -> Result<RefinementPair> {
    if !(-1e-9..=1.0 + 1e-9).contains(&hypothesis_value) {
        return Err(Error::InvalidParameter(format!("hypothesis value {hypothesis_value} outside [0, 1]")));
    }
    let q = params.q;
    let shift = 0.75 * params.epsilon;
    let plus = count_in_range(ceil_snap((hypothesis_value + shift) * q as f64), q)
        .map(|t| ThresholdEffect::new(e.clone(), q, t, Direction::AtLeast))
        .transpose()?;
    let minus = count_in_range(floor_snap((hypothesis_value - shift) * q as f64), q)
        .map(|t| ThresholdEffect::new(e.clone(), q, t, Direction::AtMost))
        .transpose()?;
    Ok(RefinementPair { plus, minus })
}

/// The postselection effect `F_t` for a chosen index and sign.
pub fn postselection_effect(e: &Effect, hypothesis_value: f64, sign: Sign, params: &ShadowParams) -> Result<ThresholdEffect> {
    let q = params.q;
    let shift = 0.25 * params.epsilon;
    let (raw, dir) = match sign {
        Sign::Plus => (ceil_snap((hypothesis_value + shift) * q as f64), Direction::AtLeast),
        Sign::Minus => (floor_snap((hypothesis_value - shift) * q as f64), Direction::AtMost),
    };
    let t = raw.clamp(0.0, q as f64) as usize;
    ThresholdEffect::new(e.clone(), q, t, dir)
}

/// Conditions the amplified hypothesis on `f` accepting.
pub fn postselect_hypothesis(h: &Hypothesis, f: &ThresholdEffect) -> Result<Hypothesis> {
    let (amplified, p) = f.postselect(&h.amplified)?;
    let reduced = DensityMatrix::from_unnormalized(average_single_register_trace(amplified.as_herm(), h.d, h.q)?)?;
    Ok(Hypothesis {
        amplified,
        reduced,
        iteration: h.iteration + 1,
        postselection_probability: h.postselection_probability * p,
        d: h.d,
        q: h.q,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// 0-based effect index.
    pub index: usize,
    pub sign: Sign,
    pub p_before: f64,
    pub p_after: f64,
    pub copies_debited: u64,
    pub bar_values: Vec<f64>,
    pub hypothesis_value: f64,
    pub threshold: usize,
}

impl IterationRecord {
    /// Markov bound on the ratio `p_after / p_before`.
    pub fn markov_bound(&self, epsilon: f64) -> f64 {
        let v = self.hypothesis_value;
        match self.sign {
            Sign::Plus => v / (v + epsilon / 4.0),
            Sign::Minus => (1.0 - v) / (1.0 - v + epsilon / 4.0),
        }
    }

    pub fn satisfies_markov(&self, epsilon: f64) -> bool {
        self.p_after <= self.p_before * self.markov_bound(epsilon) + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub iterations: Vec<IterationRecord>,
    pub halt_reason: String,
    #[serde(rename = "T")]
    pub t: usize,
    /// Copies used by the last search, which found nothing and ended the run.
    pub final_search_copies: u64,
    pub p_final: f64,
    /// `0.9 / D^q`; falling below it is reported, not treated as an error.
    pub p_floor: f64,
}

impl Transcript {
    pub fn total_debited(&self) -> u64 {
        self.iterations.iter().map(|r| r.copies_debited).sum::<u64>() + self.final_search_copies
    }

    pub fn markov_holds(&self, epsilon: f64) -> bool {
        self.iterations.iter().all(|r| r.satisfies_markov(epsilon))
    }

    pub fn p_floor_holds(&self) -> bool {
        self.p_final >= self.p_floor
    }
}

#[derive(Clone, Debug)]
pub struct ShadowRun {
    pub estimates: Vec<f64>,
    pub transcript: Transcript,
    pub ledger: CopyLedger,
    pub hypothesis: Hypothesis,
}

/// Estimates `Tr(E_i rho)` for every effect using copies from `source`.
///
/// Each iteration searches the `2M` refinement measurements (the `+` and
/// `-` measurement of effect `i` at positions `2i` and `2i + 1`). If nothing
/// is found the current hypothesis values are returned; otherwise the
/// hypothesis is postselected on the matching `F_t`.
pub fn run_shadow_tomography(effects: &[Effect], params: &ShadowParams, source: &mut CopySource) -> Result<ShadowRun> {
    if effects.len() != params.m {
        return Err(Error::DimensionMismatch {
            expected: params.m,
            found: effects.len(),
        });
    }
    if let Some(e) = effects.iter().find(|e| e.dim() != params.d) {
        return Err(Error::DimensionMismatch {
            expected: params.d,
            found: e.dim(),
        });
    }
    let search = SearchParams::new(2 * params.m, SEARCH_BAR, SEARCH_GAP, params.beta)?.with_c_or(params.constants.c_or);
    let bar_values: Vec<f64> = (0..=search.levels).map(|k| search.bar(k)).collect();
    let mut h = Hypothesis::initial(params.d, params.q, params.cap)?;
    let mut records = Vec::new();
    loop {
        let values: Vec<f64> = effects
            .iter()
            .map(|e| accept_prob(e, &h.reduced))
            .collect::<Result<_>>()?;
        let mut list = Vec::with_capacity(2 * params.m);
        for (e, &v) in effects.iter().zip(&values) {
            list.extend(build_refinement_effects(e, v, params)?.to_measurements(params.d, params.q));
        }
        let outcome = gentle_search(&list, source, &search)?;
        let Some(pos) = outcome.found else {
            let p_final = h.postselection_probability;
            let transcript = Transcript {
                t: records.len(),
                iterations: records,
                halt_reason: "no-refinement-found".into(),
                final_search_copies: outcome.copies,
                p_final,
                p_floor: 0.9 / (params.d as f64).powi(params.q as i32),
            };
            return Ok(ShadowRun {
                estimates: values,
                transcript,
                ledger: source.ledger().clone(),
                hypothesis: h,
            });
        };
        if records.len() >= params.t_bound {
            return Err(Error::IterationBoundExceeded { bound: params.t_bound });
        }
        let (index, sign) = (pos / 2, if pos % 2 == 0 { Sign::Plus } else { Sign::Minus });
        let f = postselection_effect(&effects[index], values[index], sign, params)?;
        let next = postselect_hypothesis(&h, &f)?;
        records.push(IterationRecord {
            iteration: h.iteration,
            index,
            sign,
            p_before: h.postselection_probability,
            p_after: next.postselection_probability,
            copies_debited: outcome.copies,
            bar_values: bar_values.clone(),
            hypothesis_value: values[index],
            threshold: f.threshold(),
        });
        h = next;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapDecision {
    Above,
    Below,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapOutcome {
    pub decisions: Vec<GapDecision>,
    pub k: usize,
    pub thresholds: Vec<usize>,
}

/// `k = ceil(c_gap ln(M / delta) / eps^2)`.
pub fn gap_copies(m: usize, epsilon: f64, delta: f64, c_gap: f64) -> usize {
    (ceil_snap(c_gap * (m as f64 / delta).ln() / (epsilon * epsilon)) as usize).max(1)
}

/// Decides `Tr(E_i rho) >= c_i` versus `<= c_i - eps` for every `i`, by
/// applying "at least `ceil((c_i - eps/2) k)` of `k` accept" to one shared
/// batch of `k` copies, one effect after another.
pub fn run_promise_gap(
    effects: &[Effect],
    thresholds: &[f64],
    epsilon: f64,
    delta: f64,
    c_gap: f64,
    source: &mut CopySource,
) -> Result<GapOutcome> {
    if effects.len() != thresholds.len() {
        return Err(Error::DimensionMismatch {
            expected: effects.len(),
            found: thresholds.len(),
        });
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need epsilon in (0, 1] and delta in (0, 1), got {epsilon}, {delta}"
        )));
    }
    let k = gap_copies(effects.len(), epsilon, delta, c_gap);
    let mut tests = Vec::with_capacity(effects.len());
    let mut cutoffs = Vec::with_capacity(effects.len());
    for (e, &c) in effects.iter().zip(thresholds) {
        let t = ceil_snap((c - epsilon / 2.0) * k as f64).clamp(0.0, k as f64) as usize;
        cutoffs.push(t);
        tests.push(ThresholdEffect::new(e.clone(), k, t, Direction::AtLeast)?);
    }
    let results = source.dispense(k as u64, "gap-test")?.sequential_thresholds(&tests)?;
    Ok(GapOutcome {
        decisions: results
            .into_iter()
            .map(|a| if a { GapDecision::Above } else { GapDecision::Below })
            .collect(),
        k,
        thresholds: cutoffs,
    })
}
