//! Hard instances for the lower bounds and experiments on them.
//!
//! Classical instance: `K` random half-size subsets `S_i` of `[N]`, with
//! `D_i` putting mass `1/2 + 3 eps` uniformly on `S_i` and the rest
//! uniformly off it. Quantum instance: `K` Haar-random rank-`N/2`
//! projectors `P_i` and states `sigma_i = (1 - 6 eps) I/N + 6 eps (2/N) P_i`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::CopySource;
use crate::linalg::HermMatrix;
use crate::orbound::FidelityMode;
use crate::quantum::{accept_prob, DensityMatrix, Effect, Measurement};
use crate::random;
use crate::rng::{from_seed, substream, SimRng};

pub const REJECTION_LIMIT: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalHardInstance {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    /// Sorted members of each `S_i`.
    pub subsets: Vec<Vec<usize>>,
    pub distributions: Vec<Vec<f64>>,
}

impl ClassicalHardInstance {
    /// Diagonal indicator effects of the subsets.
    pub fn effects(&self) -> Vec<Effect> {
        self.subsets.iter().map(|s| indicator(self.n, s)).collect()
    }

    pub fn state(&self, i: usize) -> DensityMatrix {
        DensityMatrix::from_herm_unchecked(HermMatrix::from_real_diagonal(&self.distributions[i]))
    }

    /// `Pr_{D_i}[x in S_j]`.
    pub fn acceptance(&self, i: usize, j: usize) -> f64 {
        self.subsets[j].iter().map(|&x| self.distributions[i][x]).sum()
    }
}

fn indicator(n: usize, members: &[usize]) -> Effect {
    let mut d = vec![0.0; n];
    for &x in members {
        d[x] = 1.0;
    }
    Effect::from_herm_unchecked(HermMatrix::from_real_diagonal(&d))
}

fn check_common(n: usize, k: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("N must be even and at least 2, got {n}")));
    }
    if k < 2 {
        return Err(Error::InvalidParameter(format!("K must be at least 2, got {k}")));
    }
    Ok(())
}

/// Rejection-samples `k` subsets of size `n/2` until every pair satisfies
/// `||S_i ∩ S_j| - n/4| <= n/24`. That tolerance keeps every off-diagonal
/// acceptance within `eps/2` of `1/2`.
pub fn gen_classical_hard_instance(n: usize, k: usize, epsilon: f64, seed: u64) -> Result<ClassicalHardInstance> {
    check_common(n, k)?;
    if !(0.0..=1.0 / 6.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside [0, 1/6]")));
    }
    let mut rng = from_seed(seed);
    let half = n / 2;
    let tol = n as f64 / 24.0;
    for _ in 0..REJECTION_LIMIT {
        let subsets: Vec<Vec<usize>> = (0..k)
            .map(|_| {
                let mut s = sample(&mut rng, n, half).into_vec();
                s.sort_unstable();
                s
            })
            .collect();
        let ok = (0..k).all(|i| {
            (i + 1..k).all(|j| {
                let inter = subsets[i].iter().filter(|x| subsets[j].binary_search(x).is_ok()).count();
                (inter as f64 - n as f64 / 4.0).abs() <= tol + 1e-12
            })
        });
        if ok {
            let on = (0.5 + 3.0 * epsilon) / half as f64;
            let off = (0.5 - 3.0 * epsilon) / half as f64;
            let distributions = subsets
                .iter()
                .map(|s| {
                    let mut d = vec![off; n];
                    for &x in s {
                        d[x] = on;
                    }
                    d
                })
                .collect();
            return Ok(ClassicalHardInstance {
                n,
                k,
                epsilon,
                subsets,
                distributions,
            });
        }
    }
    Err(Error::RejectionLimit { attempts: REJECTION_LIMIT })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationStrategy {
    EmpiricalMean,
    LearnDistribution,
}

/// Estimates `E[f_i]` for every diagonal effect from classical samples.
pub fn classical_estimate_all(samples: &[usize], effects: &[Effect], strategy: EstimationStrategy) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    let n = samples.len() as f64;
    match strategy {
        EstimationStrategy::EmpiricalMean => Ok(effects
            .iter()
            .map(|e| samples.iter().map(|&x| e.as_herm().get(x, x).re).sum::<f64>() / n)
            .collect()),
        EstimationStrategy::LearnDistribution => {
            let dim = effects.first().map(|e| e.dim()).unwrap_or(0);
            let mut hist = vec![0.0; dim];
            for &x in samples {
                if x >= dim {
                    return Err(Error::InvalidParameter(format!("sample {x} outside [0, {dim})")));
                }
                hist[x] += 1.0 / n;
            }
            let learned = DensityMatrix::from_herm_unchecked(HermMatrix::from_real_diagonal(&hist));
            effects.iter().map(|e| accept_prob(e, &learned)).collect()
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuantumHardInstance {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub projectors: Vec<Effect>,
    pub sigmas: Vec<DensityMatrix>,
}

impl QuantumHardInstance {
    /// `Tr(P_j sigma_i)`.
    pub fn acceptance(&self, i: usize, j: usize) -> f64 {
        accept_prob(&self.projectors[j], &self.sigmas[i]).expect("dimensions agree")
    }

    /// `Tr(P_j rho_i)` with `rho_i = (2/N) P_i`.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        2.0 / self.n as f64
            * self.projectors[i]
                .as_herm()
                .trace_product(self.projectors[j].as_herm())
                .expect("dimensions agree")
    }

    pub fn to_json(&self) -> QuantumHardInstanceJson {
        QuantumHardInstanceJson {
            n: self.n,
            k: self.k,
            epsilon: self.epsilon,
            projectors: self.projectors.iter().map(|p| p.as_herm().to_pairs()).collect(),
        }
    }

    pub fn from_json(j: &QuantumHardInstanceJson) -> Result<Self> {
        let projectors = j
            .projectors
            .iter()
            .map(|rows| Effect::new(HermMatrix::from_pairs(rows)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(build_quantum(j.n, j.epsilon, projectors))
    }
}

/// Replay format: matrices as row-major `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumHardInstanceJson {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub projectors: Vec<Vec<Vec<[f64; 2]>>>,
}

fn build_quantum(n: usize, epsilon: f64, projectors: Vec<Effect>) -> QuantumHardInstance {
    let mixed = HermMatrix::identity(n).scale((1.0 - 6.0 * epsilon) / n as f64);
    let sigmas = projectors
        .iter()
        .map(|p| {
            let s = mixed.add(&p.as_herm().scale(12.0 * epsilon / n as f64)).expect("same dimension");
            DensityMatrix::from_herm_unchecked(s)
        })
        .collect();
    QuantumHardInstance {
        n,
        k: projectors.len(),
        epsilon,
        projectors,
        sigmas,
    }
}

/// Rejection-samples `k` Haar-random rank-`n/2` projectors until every pair
/// satisfies `|Tr(P_i rho_j) - 1/2| <= 1/12`.
pub fn gen_quantum_hard_instance(n: usize, k: usize, epsilon: f64, seed: u64) -> Result<QuantumHardInstance> {
    check_common(n, k)?;
    if !(0.0..=1.0 / 12.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside [0, 1/12]")));
    }
    let mut rng = from_seed(seed);
    for _ in 0..REJECTION_LIMIT {
        let projectors: Vec<Effect> = (0..k).map(|_| random::projector(&mut rng, n, n / 2)).collect();
        let overlap = |i: usize, j: usize| {
            2.0 / n as f64 * projectors[i].as_herm().trace_product(projectors[j].as_herm()).expect("same dim")
        };
        let ok = (0..k).all(|i| (i + 1..k).all(|j| (overlap(i, j) - 0.5).abs() <= 1.0 / 12.0));
        if ok {
            return Ok(build_quantum(n, epsilon, projectors));
        }
    }
    Err(Error::RejectionLimit { attempts: REJECTION_LIMIT })
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    h(p) + h(1.0 - p)
}

/// Shannon entropy in bits of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.as_herm().eigen().eigenvalues)
}

/// `log2 N - (1 - H2(1/2 + 3 eps))`.
pub fn closed_form_entropy(n: usize, epsilon: f64) -> f64 {
    (n as f64).log2() - (1.0 - binary_entropy(0.5 + 3.0 * epsilon))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub closed_form: f64,
    /// Entropy of the first member computed from its distribution or
    /// spectrum.
    pub direct: f64,
    /// `log2 N - closed_form`.
    pub deficit: f64,
    /// Largest `|direct_i - closed_form|` over all members.
    pub max_mismatch: f64,
}

impl EntropyReport {
    /// Bound on the information `t` samples carry about the index:
    /// `t * deficit` bits.
    pub fn information_bound(&self, t: usize) -> f64 {
        t as f64 * self.deficit
    }
}

pub trait HardInstance {
    fn support(&self) -> usize;
    fn bias(&self) -> f64;
    fn member_entropies(&self) -> Vec<f64>;
}

impl HardInstance for ClassicalHardInstance {
    fn support(&self) -> usize {
        self.n
    }
    fn bias(&self) -> f64 {
        self.epsilon
    }
    fn member_entropies(&self) -> Vec<f64> {
        self.distributions.iter().map(|d| shannon_entropy(d)).collect()
    }
}

impl HardInstance for QuantumHardInstance {
    fn support(&self) -> usize {
        self.n
    }
    fn bias(&self) -> f64 {
        self.epsilon
    }
    fn member_entropies(&self) -> Vec<f64> {
        self.sigmas.iter().map(von_neumann_entropy).collect()
    }
}

pub fn entropy_report<I: HardInstance>(instance: &I) -> EntropyReport {
    let closed_form = closed_form_entropy(instance.support(), instance.bias());
    let direct = instance.member_entropies();
    EntropyReport {
        closed_form,
        direct: direct[0],
        deficit: (instance.support() as f64).log2() - closed_form,
        max_mismatch: direct.iter().map(|d| (d - closed_form).abs()).fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HlwSummary {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    /// `max |x - 1/2|` over trials.
    pub max_deviation: f64,
    /// Fraction of trials with `|x - 1/4| > 1/20`.
    pub tail_quarter: f64,
    /// Fraction of trials with `|x - 1/2| > 1/20`.
    pub tail_half: f64,
    /// Fraction of trials with `|x - mean| > 1/20`.
    pub tail_empirical: f64,
}

/// Samples `x = Tr(P_T rho_S)` for Haar-random half-dimensional subspaces
/// `S`, with `T` spanned by the first `n/2` basis vectors and
/// `rho_S = P_S / (n/2)`.
pub fn hlw_overlap_experiment(n: usize, trials: usize, seed: u64) -> Result<HlwSummary> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("N must be even, got {n}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let mut rng = from_seed(seed);
    let half = n / 2;
    let xs: Vec<f64> = (0..trials)
        .map(|_| {
            let v = random::isometry(&mut rng, n, half);
            let diag: f64 = (0..half).map(|i| (0..half).map(|j| v[(i, j)].norm_sqr()).sum::<f64>()).sum();
            diag / half as f64
        })
        .collect();
    let t = trials as f64;
    let mean = xs.iter().sum::<f64>() / t;
    let frac = |c: f64| xs.iter().filter(|&&x| (x - c).abs() > 0.05).count() as f64 / t;
    Ok(HlwSummary {
        n,
        trials,
        mean,
        max_deviation: xs.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max),
        tail_quarter: frac(0.25),
        tail_half: frac(0.5),
        tail_empirical: frac(mean),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identification {
    pub truth: usize,
    pub guess: usize,
    pub success: bool,
}

/// Either kind of hard instance, for [`identify_index`].
#[derive(Clone, Copy, Debug)]
pub enum HardFamily<'a> {
    Classical(&'a ClassicalHardInstance),
    Quantum(&'a QuantumHardInstance),
}

impl HardFamily<'_> {
    fn k(&self) -> usize {
        match self {
            HardFamily::Classical(c) => c.k,
            HardFamily::Quantum(q) => q.k,
        }
    }

    fn acceptance(&self, i: usize, j: usize) -> f64 {
        match self {
            HardFamily::Classical(c) => c.acceptance(i, j),
            HardFamily::Quantum(q) => q.acceptance(i, j),
        }
    }

    fn estimates(&self, truth: usize, t: usize, rng: SimRng) -> Result<Vec<f64>> {
        match self {
            HardFamily::Classical(c) => {
                let mut src = CopySource::new(c.state(truth), FidelityMode::FreshCopyStatistical, rng);
                let samples = src.dispense(t as u64, "identify")?.classical_samples()?;
                classical_estimate_all(&samples, &c.effects(), EstimationStrategy::EmpiricalMean)
            }
            HardFamily::Quantum(q) => {
                let mut src = CopySource::new(q.sigmas[truth].clone(), FidelityMode::FreshCopyStatistical, rng);
                // Copies are split round-robin across the K measurements.
                (0..q.k)
                    .map(|j| {
                        let share = t / q.k + usize::from(j < t % q.k);
                        let m = Measurement::Plain(q.projectors[j].clone());
                        let accepts = src.dispense(share as u64, "identify")?.count_accepts(&m)?;
                        Ok(accepts as f64 / share as f64)
                    })
                    .collect()
            }
        }
    }
}

/// Draws a uniform hidden index, observes `t` samples or copies from the
/// matching member, and guesses the index whose exact acceptance signature
/// is closest in max-norm to the estimates. With `t = 0` the guess is
/// uniform.
pub fn identify_index(family: HardFamily<'_>, t: usize, seed: u64) -> Result<Identification> {
    let k = family.k();
    let mut rng = substream(seed, 0);
    let truth = rng.random_range(0..k);
    let guess = if t == 0 {
        rng.random_range(0..k)
    } else {
        let est = family.estimates(truth, t, substream(seed, 1))?;
        let score = |i: usize| {
            (0..k)
                .filter(|&j| est[j].is_finite())
                .map(|j| (est[j] - family.acceptance(i, j)).abs())
                .fold(0.0, f64::max)
        };
        (0..k)
            .min_by(|&a, &b| score(a).total_cmp(&score(b)))
            .expect("k >= 2")
    };
    Ok(Identification {
        truth,
        guess,
        success: truth == guess,
    })
}
