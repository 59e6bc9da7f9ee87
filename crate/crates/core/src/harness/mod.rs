//! Configuration, seeded scenario runner and result files.

pub mod config;
pub mod emit;
pub mod scenarios;
pub mod wiesner;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{EffectKind, Scenario, ScenarioConfig, StateKind};
pub use emit::{emit_results, summarize, Summary, SummaryContext, TrialRow, CSV_HEADER};
pub use wiesner::{make_wiesner_instance, WiesnerInstance};

use crate::error::{Error, Result};
use crate::rng::substream;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "SHADOWTOMO_SEED";

#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

/// Runs every trial of `cfg` on `workers` threads. Trial `t` draws from
/// `substream(seed, t)`; rows come back in trial order. A trial that ends in
/// an error becomes a failed row carrying the message.
pub fn run_scenario(cfg: &ScenarioConfig, workers: usize) -> Result<ScenarioResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<TrialRow> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = substream(cfg.seed, t as u64);
                scenarios::run_trial(cfg, t, &mut rng).unwrap_or_else(|e| {
                    let mut row = scenarios::blank_row(cfg, t);
                    row.error = Some(e.to_string());
                    row
                })
            })
            .collect()
    });
    let (dim, m) = scenarios::reported_shape(cfg);
    let summary = summarize(
        &rows,
        SummaryContext {
            scenario: cfg.scenario.name().to_string(),
            seed: cfg.seed,
            dim,
            m,
            epsilon: cfg.epsilon,
            delta: cfg.delta,
            mode: cfg.mode.to_string(),
            pass_rate: cfg.pass_rate,
            constants: cfg.constants.to_map(),
        },
    );
    Ok(ScenarioResult { rows, summary })
}

/// Output file locations: explicit config paths win, otherwise
/// `<out_dir>/<scenario>.csv` and `<out_dir>/<scenario>.json`.
pub fn output_paths(cfg: &ScenarioConfig, out_dir: &Path) -> (PathBuf, PathBuf) {
    let name = cfg.scenario.name();
    (
        cfg.out_csv.clone().unwrap_or_else(|| out_dir.join(format!("{name}.csv"))),
        cfg.out_json.clone().unwrap_or_else(|| out_dir.join(format!("{name}.json"))),
    )
}

/// Runs the scenario and writes its files. Transcripts, when requested, go
/// to `<out_dir>/transcripts/trial-<t>.json`.
pub fn run_and_emit(cfg: &ScenarioConfig, out_dir: &Path, workers: usize) -> Result<ScenarioResult> {
    let result = run_scenario(cfg, workers)?;
    let (csv, json) = output_paths(cfg, out_dir);
    emit_results(&result.rows, &result.summary, &csv, &json)?;
    if cfg.write_transcripts {
        let dir = out_dir.join("transcripts");
        std::fs::create_dir_all(&dir)?;
        for row in &result.rows {
            if let Some(detail) = &row.detail {
                let text = serde_json::to_string_pretty(detail)?;
                std::fs::write(dir.join(format!("trial-{}.json", row.trial)), text + "\n")?;
            }
        }
    }
    Ok(result)
}
