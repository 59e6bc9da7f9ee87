//! Copy dispensing and accounting.
//!
//! A [`CopySource`] owns the unknown state. Procedures under test only see
//! it through [`CopySource::dispense`], which debits the ledger and returns a
//! [`CopyBatch`] whose measurement semantics follow the source's
//! [`FidelityMode`]. Validation code reads the state through the separately
//! named [`CopySource::ground_truth`].

use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DimCap;
use crate::orbound::{hlm_or_test, FidelityMode};
use crate::quantum::{accept_prob, DensityMatrix, Effect, Instrument, Measurement, ThresholdEffect};
use crate::rng::SimRng;

/// Monotone count of consumed copies with per-phase attribution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyLedger {
    budget: Option<u64>,
    consumed: u64,
    attribution: BTreeMap<String, u64>,
}

impl CopyLedger {
    pub fn new(budget: Option<u64>) -> Self {
        CopyLedger {
            budget,
            ..Default::default()
        }
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn attribution(&self) -> &BTreeMap<String, u64> {
        &self.attribution
    }

    /// Sum of attributed counts whose phase label starts with `prefix`.
    pub fn phase_total(&self, prefix: &str) -> u64 {
        self.attribution
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v)
            .sum()
    }

    fn debit(&mut self, n: u64, phase: &str) -> Result<()> {
        if let Some(budget) = self.budget {
            if self.consumed.saturating_add(n) > budget {
                return Err(Error::BudgetExhausted {
                    requested: n,
                    consumed: self.consumed,
                    budget,
                    attribution: self.attribution.clone(),
                });
            }
        }
        if n > 0 {
            self.consumed += n;
            *self.attribution.entry(phase.to_string()).or_insert(0) += n;
        }
        Ok(())
    }
}

/// Holds the unknown state and hands out copies of it.
#[derive(Debug)]
pub struct CopySource {
    truth: DensityMatrix,
    ledger: CopyLedger,
    mode: FidelityMode,
    rng: SimRng,
    cap: DimCap,
}

impl CopySource {
    pub fn new(truth: DensityMatrix, mode: FidelityMode, rng: SimRng) -> Self {
        CopySource {
            truth,
            ledger: CopyLedger::default(),
            mode,
            rng,
            cap: DimCap::default(),
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.ledger.budget = Some(budget);
        self
    }

    pub fn with_cap(mut self, cap: DimCap) -> Self {
        self.cap = cap;
        self
    }

    pub fn dim(&self) -> usize {
        self.truth.dim()
    }

    pub fn mode(&self) -> FidelityMode {
        self.mode
    }

    pub fn cap(&self) -> DimCap {
        self.cap
    }

    pub fn ledger(&self) -> &CopyLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> CopyLedger {
        self.ledger
    }

    /// Debits `n` copies under `phase` and returns them.
    pub fn dispense(&mut self, n: u64, phase: &str) -> Result<CopyBatch<'_>> {
        self.ledger.debit(n, phase)?;
        Ok(CopyBatch {
            copies: n,
            truth: &self.truth,
            mode: self.mode,
            cap: self.cap,
            rng: &mut self.rng,
        })
    }

    /// Randomness for classical post-processing. Does not touch the state.
    pub(crate) fn classical_rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    /// Validation-only access to the hidden state. Procedures under test
    /// must not call this.
    pub fn ground_truth(&self) -> GroundTruth<'_> {
        GroundTruth(&self.truth)
    }
}

/// Read access to the hidden state, for validation code only.
pub struct GroundTruth<'a>(&'a DensityMatrix);

impl GroundTruth<'_> {
    pub fn state(&self) -> &DensityMatrix {
        self.0
    }

    pub fn accept_prob(&self, e: &Effect) -> Result<f64> {
        accept_prob(e, self.0)
    }

    pub fn measurement_accept_prob(&self, m: &Measurement) -> Result<f64> {
        m.accept_prob(self.0)
    }
}

/// `copies` fresh copies of the unknown state.
pub struct CopyBatch<'a> {
    copies: u64,
    truth: &'a DensityMatrix,
    mode: FidelityMode,
    cap: DimCap,
    rng: &'a mut SimRng,
}

fn sample_binomial(rng: &mut SimRng, n: u64, p: f64) -> u64 {
    let p = p.clamp(0.0, 1.0);
    Binomial::new(n, p).expect("p clamped to [0, 1]").sample(rng)
}

impl CopyBatch<'_> {
    pub fn len(&self) -> u64 {
        self.copies
    }

    pub fn is_empty(&self) -> bool {
        self.copies == 0
    }

    fn check_split(&self, arity: usize, groups: usize, operation: &str) -> Result<()> {
        if self.copies != (arity * groups) as u64 {
            return Err(Error::InvalidParameter(format!(
                "{operation} needs {groups} groups of {arity} copies, batch has {}",
                self.copies
            )));
        }
        Ok(())
    }

    /// Applies `m` to consecutive groups of `m.arity()` copies and returns
    /// the number of acceptances. Each group is a fresh product state, so the
    /// count is exactly binomial in every fidelity mode.
    pub fn count_accepts(self, m: &Measurement) -> Result<u64> {
        let arity = m.arity() as u64;
        if arity == 0 || !self.copies.is_multiple_of(arity) {
            return Err(Error::InvalidParameter(format!(
                "batch of {} copies does not split into groups of {arity}",
                self.copies
            )));
        }
        let p = m.accept_prob(self.truth)?;
        Ok(sample_binomial(self.rng, self.copies / arity, p))
    }

    /// One round of the amplified OR test: each measurement `m_i` is turned
    /// into "at least `threshold` of `registers` applications accept" and the
    /// batch (of `registers * arity` copies) is tested against the OR of
    /// those operators.
    ///
    /// In `FreshCopyStatistical` mode the back-action between the amplified
    /// tests is not modeled: the round accepts iff some `i` has an
    /// independent `Binomial(registers, p_i)` count reaching the threshold.
    /// The other modes run the control-qubit OR test on the joint state.
    pub fn or_test(self, effects: &[Measurement], registers: usize, threshold: usize) -> Result<bool> {
        let Some(first) = effects.first() else {
            return Ok(false);
        };
        let arity = first.arity();
        if effects.iter().any(|m| m.arity() != arity) {
            return Err(Error::InvalidParameter("OR test measurements differ in arity".into()));
        }
        self.check_split(arity, registers, "OR test")?;
        match self.mode {
            FidelityMode::FreshCopyStatistical => {
                for m in effects {
                    if m.is_never() {
                        continue;
                    }
                    let p = m.accept_prob(self.truth)?;
                    if sample_binomial(self.rng, registers as u64, p) >= threshold as u64 {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            FidelityMode::ExactTensor | FidelityMode::PerCopyCollapse => {
                let joint = self.truth.tensor_power(arity * registers, self.cap)?;
                let mut amplified = Vec::with_capacity(effects.len());
                for m in effects {
                    let base = m.materialize(self.cap)?;
                    let te = ThresholdEffect::new(base, registers, threshold, crate::quantum::Direction::AtLeast)?;
                    amplified.push(te.materialize(self.cap)?);
                }
                let out = hlm_or_test(&amplified, &joint, self.mode, self.cap, self.rng)?;
                Ok(out.accepted)
            }
        }
    }

    /// Applies each threshold test in order to the same batch of copies,
    /// which must equal each test's register count.
    ///
    /// `PerCopyCollapse` measures every copy with the base effect,
    /// collapses it, and thresholds the count classically. `ExactTensor`
    /// applies the materialized operators to the joint state.
    /// `FreshCopyStatistical` draws independent binomial counts.
    pub fn sequential_thresholds(self, tests: &[ThresholdEffect]) -> Result<Vec<bool>> {
        for t in tests {
            self.check_split(1, t.registers(), "sequential threshold test")?;
        }
        match self.mode {
            FidelityMode::FreshCopyStatistical => tests
                .iter()
                .map(|t| {
                    let p = accept_prob(t.base(), self.truth)?;
                    let count = sample_binomial(self.rng, self.copies, p) as usize;
                    Ok(match t.direction() {
                        crate::quantum::Direction::AtLeast => count >= t.threshold(),
                        crate::quantum::Direction::AtMost => count <= t.threshold(),
                    })
                })
                .collect(),
            FidelityMode::PerCopyCollapse => {
                let mut copies = vec![self.truth.clone(); self.copies as usize];
                let mut out = Vec::with_capacity(tests.len());
                for t in tests {
                    let inst: Instrument = t.base().instrument();
                    let mut count = 0usize;
                    for c in copies.iter_mut() {
                        let o = inst.measure(c, self.rng)?;
                        count += o.accepted as usize;
                        *c = o.post_state;
                    }
                    out.push(match t.direction() {
                        crate::quantum::Direction::AtLeast => count >= t.threshold(),
                        crate::quantum::Direction::AtMost => count <= t.threshold(),
                    });
                }
                Ok(out)
            }
            FidelityMode::ExactTensor => {
                let mut joint = self.truth.tensor_power(self.copies as usize, self.cap)?;
                let mut out = Vec::with_capacity(tests.len());
                for t in tests {
                    let inst = t.materialize(self.cap)?.instrument();
                    let o = inst.measure(&joint, self.rng)?;
                    out.push(o.accepted);
                    joint = o.post_state;
                }
                Ok(out)
            }
        }
    }

    /// Computational-basis measurement of every copy. Only valid when the
    /// hidden state is diagonal, where it yields i.i.d. classical samples.
    pub fn classical_samples(self) -> Result<Vec<usize>> {
        if !self.truth.is_diagonal() {
            return Err(Error::InvalidParameter(
                "classical samples need a diagonal state".into(),
            ));
        }
        let probs: Vec<f64> = self.truth.as_herm().real_diagonal().iter().map(|p| p.max(0.0)).collect();
        let dist = WeightedIndex::new(&probs)
            .map_err(|e| Error::InvalidParameter(format!("bad distribution: {e}")))?;
        Ok((0..self.copies).map(|_| dist.sample(self.rng)).collect())
    }
}

/// Consumed copies against a prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub consumed: u64,
    pub predicted: u64,
    pub ratio: f64,
    pub within_bound: bool,
    pub attribution: BTreeMap<String, u64>,
    pub constants: BTreeMap<String, f64>,
}

pub fn report(ledger: &CopyLedger, predicted: u64, constants: BTreeMap<String, f64>) -> LedgerReport {
    let consumed = ledger.consumed();
    let ratio = match (consumed, predicted) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        (c, p) => c as f64 / p as f64,
    };
    LedgerReport {
        consumed,
        predicted,
        ratio,
        within_bound: consumed <= predicted,
        attribution: ledger.attribution().clone(),
        constants,
    }
}

impl LedgerReport {
    /// One `phase,copies` row per attributed phase.
    pub fn write_phase_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phase", "copies"])?;
        for (phase, n) in &self.attribution {
            out.write_record([phase.as_str(), &n.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn source(mode: FidelityMode) -> CopySource {
        CopySource::new(DensityMatrix::maximally_mixed(2), mode, from_seed(1))
    }

    #[test]
    fn zero_dispense_is_free() {
        let mut s = source(FidelityMode::FreshCopyStatistical);
        s.dispense(0, "x").unwrap();
        assert_eq!(s.ledger().consumed(), 0);
        assert!(s.ledger().attribution().is_empty());
    }

    #[test]
    fn dispenses_add_up() {
        let mut s = source(FidelityMode::FreshCopyStatistical);
        s.dispense(3, "a").unwrap();
        s.dispense(4, "b").unwrap();
        assert_eq!(s.ledger().consumed(), 7);
        assert_eq!(s.ledger().attribution()["a"], 3);
        assert_eq!(s.ledger().attribution()["b"], 4);
    }

    #[test]
    fn budget_is_enforced_with_snapshot() {
        let mut s = source(FidelityMode::FreshCopyStatistical).with_budget(10);
        s.dispense(2, "a").unwrap();
        match s.dispense(9, "b") {
            Err(Error::BudgetExhausted {
                requested,
                consumed,
                budget,
                attribution,
            }) => {
                assert_eq!((requested, consumed, budget), (9, 2, 10));
                assert_eq!(attribution["a"], 2);
            }
            other => panic!("unexpected {:?}", other.map(|b| b.len())),
        }
        assert_eq!(s.ledger().consumed(), 2);
        let mut fresh = source(FidelityMode::FreshCopyStatistical).with_budget(10);
        assert!(fresh.dispense(11, "x").is_err());
    }

    #[test]
    fn report_conventions() {
        let l = CopyLedger::default();
        let r = report(&l, 0, BTreeMap::new());
        assert_eq!(r.ratio, 1.0);
        assert!(r.within_bound);
        let mut s = source(FidelityMode::FreshCopyStatistical);
        s.dispense(5, "or-round").unwrap();
        let r = report(s.ledger(), 8, BTreeMap::new());
        assert!(r.within_bound);
        assert!((r.ratio - 0.625).abs() < 1e-15);
        let mut buf = Vec::new();
        r.write_phase_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "phase,copies\nor-round,5\n");
    }

    #[test]
    fn count_accepts_matches_probability() {
        let mut s = source(FidelityMode::FreshCopyStatistical);
        let e = Effect::from_diagonal(&[1.0, 0.0]).unwrap();
        let n = 20_000;
        let k = s.dispense(n, "x").unwrap().count_accepts(&Measurement::Plain(e)).unwrap();
        let freq = k as f64 / n as f64;
        // 4 sigma for p = 1/2
        assert!((freq - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn classical_samples_need_diagonal_state() {
        let truth = DensityMatrix::from_diagonal(&[0.0, 1.0, 0.0]).unwrap();
        let mut s = CopySource::new(truth, FidelityMode::PerCopyCollapse, from_seed(2));
        assert_eq!(s.dispense(5, "x").unwrap().classical_samples().unwrap(), vec![1; 5]);
        let mut rng = from_seed(3);
        let pure = crate::random::pure_state(&mut rng, 2);
        let mut s = CopySource::new(pure, FidelityMode::PerCopyCollapse, from_seed(2));
        assert!(s.dispense(5, "x").unwrap().classical_samples().is_err());
    }
}
