use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ris_coverage::optimizer::{placement_search, SchemeId};
use ris_coverage::scenario::load_scenario_with_overrides;
use ris_coverage::sweep::{load_sweep_spec, run_sweep, validate_run};
use ris_coverage::{Error, ScenarioConfig};
use serde_json::json;

/// Coverage sweeps for an RIS-assisted railway link.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep spec and write `<family>.csv` and `<family>.summary.json`.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Sweep spec (TOML).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic and simulated coverage on sampled slots.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 20)]
        slots: u32,
        #[arg(long, default_value_t = 100_000)]
        trials: u32,
    },
    /// Search the RIS placement grid for one scheme.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        scheme: SchemeId,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a scenario key, e.g. `--set n_elements=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let source = read(&self.config)?;
        let mut overrides = self.set.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        Ok(load_scenario_with_overrides(&source, &overrides)?)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Returns whether the command's own checks passed.
fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { scenario, spec, out } => {
            let cfg = scenario.load()?;
            let mut spec = load_sweep_spec(&read(&spec)?)?;
            if scenario.seed.is_some() {
                spec.seed = scenario.seed;
            }
            let summary = run_sweep(&cfg, &spec, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::Validate { scenario, slots, trials } => {
            let cfg = scenario.load()?;
            let report = validate_run(&cfg, slots, trials, cfg.params().seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.all_pass)
        }
        Command::Optimize { scenario, scheme } => {
            let cfg = scenario.load()?;
            let result = placement_search(&cfg, scheme, cfg.params().seed)?;
            let placements: Vec<_> = result
                .placements
                .iter()
                .map(|p| json!({ "d_ris_l_m": p.d_ris_l, "travel_distance_m": p.travel_distance_m }))
                .collect();
            let out = json!({
                "scheme": scheme.as_str(),
                "seed": cfg.params().seed,
                "config_hash": cfg.config_hash()?,
                "d_ris_l_star_m": result.d_ris_l_star,
                "d_max_m": result.d_max_m,
                "mean_coverage": result.records.iter().map(|r| r.coverage).sum::<f64>() / result.records.len() as f64,
                "placements": placements,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::Validation(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
