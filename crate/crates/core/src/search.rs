//! Gentle binary search for a measurement with high acceptance probability.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::CopySource;
use crate::numeric::ceil_snap;
use crate::orbound::{or_bound_decide, OrBoundParams, OrCase, DEFAULT_C_OR};
use crate::quantum::Measurement;

pub const DEFAULT_C_SEARCH: f64 = 256.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub c: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Gap lost per level, `epsilon / levels`.
    pub alpha: f64,
    /// Failure budget per level, `delta / levels`.
    pub beta: f64,
    /// `log2` of the padded list length.
    pub levels: usize,
    pub c_or: f64,
    /// Reuse one pool of classical samples across all levels. Only valid
    /// for diagonal states and diagonal plain effects.
    pub reuse_copies: bool,
}

impl SearchParams {
    /// Parameters for a list of `m` measurements. With `m = 1` there are no
    /// levels and `alpha = epsilon`, `beta = delta`.
    pub fn new(m: usize, c: f64, epsilon: f64, delta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("search over an empty list".into()));
        }
        if !(epsilon > 0.0 && epsilon <= c && c <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < epsilon <= c <= 1, got epsilon={epsilon}, c={c}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1)")));
        }
        let levels = m.next_power_of_two().trailing_zeros() as usize;
        let div = levels.max(1) as f64;
        Ok(SearchParams {
            c,
            epsilon,
            delta,
            alpha: epsilon / div,
            beta: delta / div,
            levels,
            c_or: DEFAULT_C_OR,
            reuse_copies: false,
        })
    }

    pub fn with_c_or(mut self, c_or: f64) -> Self {
        self.c_or = c_or;
        self
    }

    pub fn with_reuse(mut self, reuse: bool) -> Self {
        self.reuse_copies = reuse;
        self
    }

    /// Acceptance bar used at level `k`: `c - k alpha`.
    pub fn bar(&self, k: usize) -> f64 {
        self.c - k as f64 * self.alpha
    }

    /// Bar for the closing verification, `c - epsilon`.
    pub fn verification_bar(&self) -> f64 {
        self.c - self.epsilon
    }

    /// Gap for the closing verification, `min(epsilon, bar)`.
    pub fn verification_gap(&self) -> f64 {
        self.epsilon.min(self.verification_bar())
    }

    fn level_params(&self, k: usize, half: usize) -> Result<OrBoundParams> {
        OrBoundParams::derive(half, self.bar(k), self.alpha, self.beta, self.c_or)
    }
}

/// Copy bound `c_search * L^4 / eps^2 * (ln L + ln(1/delta))` with
/// `L = max(log2 m, 1)`, in applications of single-copy measurements.
pub fn copy_bound(m: usize, epsilon: f64, delta: f64, c_search: f64) -> f64 {
    let l = (m.max(2) as f64).log2().ceil().max(1.0);
    c_search * l.powi(4) / (epsilon * epsilon) * (l.ln() + (1.0 / delta).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub bar: f64,
    pub gap: f64,
    pub candidates: usize,
    pub ell: usize,
    pub rounds: usize,
    pub accepting_rounds: usize,
    pub case: OrCase,
    pub copies: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRecord {
    pub bar: f64,
    pub gap: f64,
    pub applications: u64,
    pub accepts: u64,
    pub confirmed: bool,
    pub copies: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Index into the caller's list (0-based), if one was confirmed.
    pub found: Option<usize>,
    pub copies: u64,
    pub levels: Vec<LevelRecord>,
    pub verification: Option<VerifyRecord>,
}

/// Estimates the acceptance probability of `m` from
/// `ceil(32 ln(1/beta) / gap^2)` fresh applications and confirms iff the
/// empirical mean is at least `bar - gap/2`.
pub fn verify_candidate(
    m: &Measurement,
    source: &mut CopySource,
    bar: f64,
    gap: f64,
    beta: f64,
) -> Result<VerifyRecord> {
    if !(gap > 0.0 && gap <= bar + 1e-12) {
        return Err(Error::InvalidParameter(format!("need 0 < gap <= bar, got gap={gap}, bar={bar}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta {beta} outside (0, 1)")));
    }
    let applications = ceil_snap(32.0 * (1.0 / beta).ln() / (gap * gap)).max(1.0) as u64;
    let copies = applications * m.arity() as u64;
    let accepts = source.dispense(copies, "verification")?.count_accepts(m)?;
    let mean = accepts as f64 / applications as f64;
    Ok(VerifyRecord {
        bar,
        gap,
        applications,
        accepts,
        confirmed: mean >= bar - gap / 2.0,
        copies,
    })
}

/// Finds `j` with acceptance probability at least `c - epsilon`, assuming
/// some measurement reaches `c`. The list is padded with never-accepting
/// measurements to a power of two; padding is never returned.
///
/// Each level halves the candidate set using an OR decision on the first
/// half at gap `alpha` and failure budget `beta`. The survivor is then
/// checked by [`verify_candidate`]; failure yields `found = None`.
pub fn gentle_search(effects: &[Measurement], source: &mut CopySource, params: &SearchParams) -> Result<SearchOutcome> {
    let m = effects.len();
    if m == 0 {
        return Err(Error::InvalidParameter("search over an empty list".into()));
    }
    let arity = effects[0].arity();
    if effects.iter().any(|e| e.arity() != arity) {
        return Err(Error::InvalidParameter("search measurements differ in arity".into()));
    }
    let padded = m.next_power_of_two();
    let mut list: Vec<Measurement> = effects.to_vec();
    list.resize(
        padded,
        Measurement::Never {
            dim: effects[0].copy_dim(),
            arity,
        },
    );

    let start = source.ledger().consumed();
    let pool = if params.reuse_copies {
        Some(shared_pool(&list, source, params)?)
    } else {
        None
    };

    let (mut lo, mut hi) = (0usize, padded);
    let mut levels = Vec::with_capacity(params.levels);
    for k in 0..params.levels {
        let half = (hi - lo) / 2;
        let or_params = params.level_params(k, half)?;
        let first = &list[lo..lo + half];
        let before = source.ledger().consumed();
        let (case, accepting) = match &pool {
            Some(samples) => pooled_decision(first, samples, &or_params, source)?,
            None => {
                let d = or_bound_decide(first, source, &or_params, &format!("search-level-{k}"))?;
                (d.case, d.accepting_rounds)
            }
        };
        levels.push(LevelRecord {
            level: k,
            bar: params.bar(k),
            gap: params.alpha,
            candidates: hi - lo,
            ell: or_params.ell,
            rounds: or_params.rounds,
            accepting_rounds: accepting,
            case,
            copies: source.ledger().consumed() - before,
        });
        match case {
            OrCase::CaseI => hi = lo + half,
            OrCase::CaseII => lo += half,
        }
    }

    let candidate = lo;
    let verification = if candidate < m {
        Some(verify_candidate(
            &list[candidate],
            source,
            params.verification_bar(),
            params.verification_gap(),
            params.beta,
        )?)
    } else {
        None
    };
    let found = verification
        .as_ref()
        .filter(|v| v.confirmed)
        .map(|_| candidate);
    Ok(SearchOutcome {
        found,
        copies: source.ledger().consumed() - start,
        levels,
        verification,
    })
}

/// Draws one pool of classical samples large enough for every level.
fn shared_pool(list: &[Measurement], source: &mut CopySource, params: &SearchParams) -> Result<Vec<usize>> {
    for m in list {
        match m {
            Measurement::Plain(e) if e.is_diagonal() => {}
            Measurement::Never { arity: 1, .. } => {}
            _ => {
                return Err(Error::InvalidParameter(
                    "copy reuse needs diagonal single-copy effects".into(),
                ))
            }
        }
    }
    let mut size = 0usize;
    let mut span = list.len();
    for k in 0..params.levels {
        let p = params.level_params(k, span / 2)?;
        size = size.max(p.ell * p.rounds);
        span /= 2;
    }
    source.dispense(size as u64, "search-shared")?.classical_samples()
}

fn pooled_decision(
    first: &[Measurement],
    samples: &[usize],
    params: &OrBoundParams,
    source: &mut CopySource,
) -> Result<(OrCase, usize)> {
    let threshold = params.threshold();
    let rng = source.classical_rng();
    let mut accepting = 0;
    for r in 0..params.rounds {
        let block = &samples[r * params.ell..(r + 1) * params.ell];
        let hit = first.iter().any(|m| match m {
            Measurement::Plain(e) => {
                let count = block
                    .iter()
                    .filter(|&&x| rng.random::<f64>() < e.as_herm().get(x, x).re)
                    .count();
                count >= threshold
            }
            _ => false,
        });
        accepting += hit as usize;
    }
    Ok((params.decide(accepting), accepting))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbound::FidelityMode;
    use crate::quantum::{DensityMatrix, Effect};
    use crate::rng::substream;

    #[test]
    fn level_bookkeeping() {
        let p = SearchParams::new(8, 0.9, 0.5, 0.1).unwrap();
        assert_eq!(p.levels, 3);
        assert!((p.alpha * 3.0 - 0.5).abs() < 1e-12);
        assert!((p.beta * 3.0 - 0.1).abs() < 1e-12);
        assert!((p.bar(3) - 0.4).abs() < 1e-12);
        let p = SearchParams::new(5, 0.9, 0.5, 0.1).unwrap();
        assert_eq!(p.levels, 3);
        assert!(SearchParams::new(0, 0.9, 0.5, 0.1).is_err());
    }

    #[test]
    fn single_identity_is_found() {
        let params = SearchParams::new(1, 1.0, 0.5, 0.1).unwrap();
        let mut src = CopySource::new(
            DensityMatrix::maximally_mixed(2),
            FidelityMode::FreshCopyStatistical,
            substream(1, 0),
        );
        let out = gentle_search(&[Measurement::Plain(Effect::identity(2))], &mut src, &params).unwrap();
        assert_eq!(out.found, Some(0));
        assert!(out.levels.is_empty());
        assert_eq!(out.copies, src.ledger().consumed());
    }

    #[test]
    fn verify_trivial_cases() {
        let mut src = CopySource::new(
            DensityMatrix::maximally_mixed(2),
            FidelityMode::FreshCopyStatistical,
            substream(2, 0),
        );
        let yes = verify_candidate(&Measurement::Plain(Effect::identity(2)), &mut src, 0.6, 0.2, 0.05).unwrap();
        assert!(yes.confirmed);
        let no = verify_candidate(&Measurement::Plain(Effect::zero(2)), &mut src, 0.6, 0.2, 0.05).unwrap();
        assert!(!no.confirmed);
        assert!(verify_candidate(&Measurement::Plain(Effect::zero(2)), &mut src, 0.1, 0.2, 0.05).is_err());
        assert_eq!(src.ledger().attribution()["verification"], yes.copies + no.copies);
    }

    #[test]
    fn verify_confirms_above_bar() {
        // Tr(E rho) = bar + gap
        let (bar, gap, beta) = (0.5, 0.2, 0.05);
        let e = Effect::from_diagonal(&[bar + gap, bar + gap]).unwrap();
        let mut confirmed = 0;
        for t in 0..200 {
            let mut src = CopySource::new(
                DensityMatrix::maximally_mixed(2),
                FidelityMode::FreshCopyStatistical,
                substream(3, t),
            );
            confirmed += verify_candidate(&Measurement::Plain(e.clone()), &mut src, bar, gap, beta)
                .unwrap()
                .confirmed as usize;
        }
        assert!(confirmed as f64 >= (1.0 - beta) * 200.0);
    }

    #[test]
    fn padding_is_never_returned() {
        // Three zero effects padded to four: every candidate fails.
        let params = SearchParams::new(3, 0.9, 0.5, 0.1).unwrap();
        for t in 0..20 {
            let mut src = CopySource::new(
                DensityMatrix::maximally_mixed(2),
                FidelityMode::FreshCopyStatistical,
                substream(4, t),
            );
            let effects = vec![Measurement::Plain(Effect::zero(2)); 3];
            let out = gentle_search(&effects, &mut src, &params).unwrap();
            assert_eq!(out.found, None);
        }
    }

    #[test]
    fn reuse_flag_finds_planted_diagonal_effect() {
        let rho = DensityMatrix::from_diagonal(&[0.25; 4]).unwrap();
        let mut effects: Vec<Measurement> = (0..4)
            .map(|i| {
                let mut d = [0.0; 4];
                d[i] = 1.0;
                Measurement::Plain(Effect::from_diagonal(&d).unwrap())
            })
            .collect();
        effects[2] = Measurement::Plain(Effect::from_diagonal(&[1.0, 1.0, 1.0, 0.0]).unwrap());
        let params = SearchParams::new(4, 0.75, 0.4, 0.1).unwrap().with_reuse(true);
        let mut hits = 0;
        for t in 0..30 {
            let mut src = CopySource::new(rho.clone(), FidelityMode::FreshCopyStatistical, substream(6, t));
            let out = gentle_search(&effects, &mut src, &params).unwrap();
            hits += (out.found == Some(2)) as usize;
            assert!(src.ledger().attribution().contains_key("search-shared"));
        }
        assert!(hits >= 27, "hits {hits}");
    }

    #[test]
    fn reuse_rejects_non_diagonal() {
        let mut rng = crate::rng::from_seed(7);
        let e = crate::random::effect(&mut rng, 2);
        let params = SearchParams::new(2, 0.9, 0.5, 0.1).unwrap().with_reuse(true);
        let mut src = CopySource::new(
            DensityMatrix::maximally_mixed(2),
            FidelityMode::FreshCopyStatistical,
            substream(7, 0),
        );
        assert!(gentle_search(&[Measurement::Plain(e.clone()), Measurement::Plain(e)], &mut src, &params).is_err());
    }

    #[test]
    fn copy_bound_shape() {
        let b = copy_bound(8, 0.5, 0.1, DEFAULT_C_SEARCH);
        assert!((b - 256.0 * 81.0 / 0.25 * (3f64.ln() + 10f64.ln())).abs() < 1e-6);
        // L is clamped at 1 so the log term never vanishes entirely
        assert!(copy_bound(1, 0.5, 0.1, 1.0) > 0.0);
    }
}
