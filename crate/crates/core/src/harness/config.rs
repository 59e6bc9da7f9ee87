//! Flat `key=value` scenario configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are
//! case-sensitive (`D` is the Hilbert-space dimension, `d` the qubit count
//! of the money demo). Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DimCap;
use crate::orbound::FidelityMode;
use crate::shadow::Constants;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Scenario {
    #[serde(rename = "verify-gentle")]
    VerifyGentle,
    #[serde(rename = "verify-union-bound")]
    VerifyUnionBound,
    #[serde(rename = "orbound")]
    OrBound,
    #[serde(rename = "aaronson-or")]
    RandomOrderOr,
    #[serde(rename = "search")]
    Search,
    #[serde(rename = "shadow")]
    Shadow,
    #[serde(rename = "gap")]
    Gap,
    #[serde(rename = "classical")]
    Classical,
    #[serde(rename = "lower-classical")]
    LowerClassical,
    #[serde(rename = "lower-quantum")]
    LowerQuantum,
    #[serde(rename = "hlw")]
    Hlw,
    #[serde(rename = "money-demo")]
    MoneyDemo,
}

impl Scenario {
    pub const ALL: [Scenario; 12] = [
        Scenario::VerifyGentle,
        Scenario::VerifyUnionBound,
        Scenario::OrBound,
        Scenario::RandomOrderOr,
        Scenario::Search,
        Scenario::Shadow,
        Scenario::Gap,
        Scenario::Classical,
        Scenario::LowerClassical,
        Scenario::LowerQuantum,
        Scenario::Hlw,
        Scenario::MoneyDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::VerifyGentle => "verify-gentle",
            Scenario::VerifyUnionBound => "verify-union-bound",
            Scenario::OrBound => "orbound",
            Scenario::RandomOrderOr => "aaronson-or",
            Scenario::Search => "search",
            Scenario::Shadow => "shadow",
            Scenario::Gap => "gap",
            Scenario::Classical => "classical",
            Scenario::LowerClassical => "lower-classical",
            Scenario::LowerQuantum => "lower-quantum",
            Scenario::Hlw => "hlw",
            Scenario::MoneyDemo => "money-demo",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::VerifyGentle => "post-measurement damage of near-certain measurements",
            Scenario::VerifyUnionBound => "sequential near-certain measurements: acceptance and damage",
            Scenario::OrBound => "amplified OR decision on planted and all-below instances",
            Scenario::RandomOrderOr => "random-order OR test acceptance (exploratory)",
            Scenario::Search => "gentle binary search on a planted instance",
            Scenario::Shadow => "end-to-end shadow tomography against ground truth",
            Scenario::Gap => "promise-gap decisions on diagonal instances",
            Scenario::Classical => "empirical-mean estimation from classical samples",
            Scenario::LowerClassical => "index identification on the classical hard instance",
            Scenario::LowerQuantum => "index identification on the quantum hard instance",
            Scenario::Hlw => "overlap of Haar-random half-dimensional subspaces",
            Scenario::MoneyDemo => "estimating every Wiesner verifier on one bill",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// Hilbert-Schmidt random mixed state.
    Random,
    Pure,
    MaximallyMixed,
}

impl FromStr for StateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StateKind::Random),
            "pure" => Ok(StateKind::Pure),
            "maximally_mixed" => Ok(StateKind::MaximallyMixed),
            other => Err(Error::Config(format!("unknown state kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    /// Haar-random rank-one projectors.
    Projector,
    /// Haar eigenbasis with uniform eigenvalues.
    Random,
}

impl FromStr for EffectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projector" => Ok(EffectKind::Projector),
            "random" => Ok(EffectKind::Random),
            other => Err(Error::Config(format!("unknown effect kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub trials: usize,
    pub seed: u64,
    pub mode: FidelityMode,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Qubits in the money demo.
    #[serde(rename = "d")]
    pub qubits: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Acceptance bar for the OR and search scenarios.
    pub c: f64,
    pub q: Option<usize>,
    pub ell: Option<usize>,
    /// Samples or copies for the identification and baseline scenarios.
    #[serde(rename = "T")]
    pub samples: Option<usize>,
    /// Haar draws per HLW experiment.
    pub inner_trials: usize,
    pub constants: Constants,
    pub cap: DimCap,
    pub state: StateKind,
    pub effects: EffectKind,
    pub budget: Option<u64>,
    pub cadence: usize,
    pub reuse_copies: bool,
    pub pass_rate: f64,
    pub write_transcripts: bool,
    pub out_csv: Option<PathBuf>,
    pub out_json: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Defaults for a scenario; every field can be overridden by key.
    pub fn defaults(scenario: Scenario) -> Self {
        let base = ScenarioConfig {
            scenario,
            trials: 100,
            seed: 1,
            mode: FidelityMode::FreshCopyStatistical,
            dim: 2,
            m: 8,
            n: 8,
            k: 4,
            qubits: 2,
            epsilon: 0.25,
            delta: 1.0 / 3.0,
            c: 0.9,
            q: None,
            ell: None,
            samples: None,
            inner_trials: 500,
            constants: Constants::default(),
            cap: DimCap::default(),
            state: StateKind::Random,
            effects: EffectKind::Projector,
            budget: None,
            cadence: 1,
            reuse_copies: false,
            pass_rate: 0.9,
            write_transcripts: false,
            out_csv: None,
            out_json: None,
        };
        match scenario {
            Scenario::VerifyGentle => ScenarioConfig {
                epsilon: 1e-2,
                dim: 4,
                pass_rate: 1.0,
                ..base
            },
            Scenario::VerifyUnionBound => ScenarioConfig {
                epsilon: 1e-4,
                dim: 4,
                m: 5,
                pass_rate: 1.0,
                ..base
            },
            Scenario::OrBound => ScenarioConfig {
                trials: 200,
                epsilon: 0.4,
                delta: 0.1,
                pass_rate: 0.9,
                ..base
            },
            Scenario::RandomOrderOr => ScenarioConfig {
                trials: 1000,
                mode: FidelityMode::PerCopyCollapse,
                pass_rate: 0.0,
                ..base
            },
            Scenario::Search => ScenarioConfig {
                trials: 200,
                epsilon: 0.5,
                delta: 0.1,
                ..base
            },
            Scenario::Shadow => ScenarioConfig {
                trials: 60,
                q: Some(10),
                pass_rate: 2.0 / 3.0,
                ..base
            },
            Scenario::Gap => ScenarioConfig {
                trials: 200,
                dim: 4,
                m: 16,
                epsilon: 0.2,
                delta: 0.1,
                mode: FidelityMode::PerCopyCollapse,
                ..base
            },
            Scenario::Classical => ScenarioConfig {
                trials: 200,
                n: 16,
                m: 32,
                epsilon: 0.1,
                delta: 0.1,
                ..base
            },
            Scenario::LowerClassical => ScenarioConfig {
                trials: 200,
                epsilon: 0.1,
                ..base
            },
            Scenario::LowerQuantum => ScenarioConfig {
                trials: 100,
                k: 3,
                epsilon: 0.08,
                ..base
            },
            Scenario::Hlw => ScenarioConfig {
                trials: 10,
                pass_rate: 0.9,
                ..base
            },
            Scenario::MoneyDemo => ScenarioConfig {
                trials: 30,
                q: Some(4),
                pass_rate: 2.0 / 3.0,
                ..base
            },
        }
    }

    /// Parses a config file's text, then applies `overrides` in order.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_pair(line).map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
            pairs.push((k, v));
        }
        pairs.extend(overrides.iter().cloned());
        let scenario = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "scenario")
            .ok_or_else(|| Error::Config("missing `scenario` key".into()))?
            .1
            .parse()?;
        let mut cfg = ScenarioConfig::defaults(scenario);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
        }
        fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
            if v == "none" || v.is_empty() {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "scenario" => self.scenario = value.parse()?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "mode" => self.mode = value.parse()?,
            "D" => self.dim = num(key, value)?,
            "M" => self.m = num(key, value)?,
            "N" => self.n = num(key, value)?,
            "K" => self.k = num(key, value)?,
            "d" => self.qubits = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "c" => self.c = num(key, value)?,
            "q" => self.q = opt(key, value)?,
            "ell" => self.ell = opt(key, value)?,
            "T" => self.samples = opt(key, value)?,
            "inner_trials" => self.inner_trials = num(key, value)?,
            "C_q" => self.constants.c_q = num(key, value)?,
            "C_T" => self.constants.c_t = num(key, value)?,
            "C_gap" => self.constants.c_gap = num(key, value)?,
            "C_or" => self.constants.c_or = num(key, value)?,
            "C_search" => self.constants.c_search = num(key, value)?,
            "cap" => self.cap = DimCap(num(key, value)?),
            "state" => self.state = value.parse()?,
            "effects" => self.effects = value.parse()?,
            "budget" => self.budget = opt(key, value)?,
            "cadence" => self.cadence = num(key, value)?,
            "reuse_copies" => self.reuse_copies = num(key, value)?,
            "pass_rate" => self.pass_rate = num(key, value)?,
            "write_transcripts" => self.write_transcripts = num(key, value)?,
            "out_csv" => self.out_csv = Some(PathBuf::from(value)),
            "out_json" => self.out_json = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let c = &self.constants;
        if [c.c_q, c.c_t, c.c_gap, c.c_or, c.c_search].iter().any(|&x| x.is_nan() || x <= 0.0) {
            return Err(Error::Config("constants must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} outside (0, 1)", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.pass_rate) {
            return Err(Error::Config(format!("pass_rate {} outside [0, 1]", self.pass_rate)));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be at least 1".into()));
        }
        if self.dim < 2 || self.m == 0 {
            return Err(Error::Config("need D >= 2 and M >= 1".into()));
        }
        Ok(())
    }
}

/// Splits `key=value`, trimming both sides.
pub fn split_pair(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("empty key in `{s}`"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}
