use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shadowtomo::harness::{self, config::split_pair, Scenario, ScenarioConfig, SEED_ENV};

#[derive(Parser)]
#[command(name = "shadowtomo", version, about = "Seeded shadow-tomography experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV rows and JSON summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_set)]
        set: Vec<(String, String)>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Print the available scenarios.
    ListScenarios,
    /// Parse a config file and print the resolved settings.
    ValidateConfig { path: PathBuf },
}

fn parse_set(s: &str) -> Result<(String, String), String> {
    split_pair(s)
}

fn load(path: &Path, set: &[(String, String)]) -> shadowtomo::Result<ScenarioConfig> {
    let mut overrides = set.to_vec();
    if let Ok(seed) = std::env::var(SEED_ENV) {
        overrides.push(("seed".into(), seed));
    }
    ScenarioConfig::load(path, &overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<20} {}", s.name(), s.description());
            }
            ExitCode::SUCCESS
        }
        Command::ValidateConfig { path } => match load(&path, &[]) {
            Ok(cfg) => {
                println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            set,
            out_dir,
            workers,
        } => {
            let cfg = match load(&config, &set) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match harness::run_and_emit(&cfg, &out_dir, workers) {
                Ok(res) => {
                    let s = &res.summary;
                    println!(
                        "{}: {}/{} trials succeeded (rate {:.3}, required {:.3}) -> {}",
                        s.scenario,
                        s.successes,
                        s.trials,
                        s.success_rate,
                        s.pass_rate,
                        if s.passed { "PASS" } else { "FAIL" }
                    );
                    for e in &s.errors {
                        eprintln!("trial {}: {}", e.trial, e.message);
                    }
                    if s.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    if let shadowtomo::Error::Capacity { .. } = e {
                        eprintln!("hint: lower D, q or ell, or raise `cap`");
                    }
                    ExitCode::from(2)
                }
            }
        }
    }
}
