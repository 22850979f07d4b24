//! `simkit`: run, sweep and inspect the indoor coverage Monte Carlo.

mod config;
mod output;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use simkit_core::capacity::{max_ul_distance, RangeQuery, UplinkChain};
use simkit_core::engine::{run_experiment, sweep, write_summary_csv};
use simkit_core::scenario::generate_scenario;
use simkit_core::{ConfigError, ExperimentConfig, ExperimentResult, SimError};
use thiserror::Error;

use crate::config::{resolve, Sources};
use crate::output::{write_run, write_scenario, write_sidecar, write_sweep_csv, OutDir, RunInfo};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("model error: {0}")]
    Model(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => CliError::Config(c),
            other => CliError::Model(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "simkit", version, about = "Monte Carlo link-budget simulator for indoor 5G coverage")]
struct Cli {
    /// Built-in configuration: `paper` or `rural`.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// TOML file merged over the preset (`paper` when no preset is given).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Dotted-path override, e.g. `scenario.seed=7`. Applied left to right.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed; shorthand for `--set scenario.seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (all cores by default).
    #[arg(long, global = true, env = "SIMKIT_THREADS")]
    threads: Option<usize>,
    /// Format of the summary printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment and write results, summary and plot data.
    Run,
    /// Run once per value of a numeric parameter, all on the same layouts.
    Sweep {
        /// Dotted path of the parameter, e.g. `bands.0.methods.l1_repeater.delay`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
    },
    /// Largest distance at which the uplink still meets the SINR threshold.
    Range {
        #[arg(long, default_value = simkit_core::linkmodels::BAND_26G)]
        band: String,
        #[arg(long, value_enum, default_value_t = Chain::OutdoorUe)]
        chain: Chain,
        #[arg(long = "threshold-db", default_value_t = -4.9, allow_negative_numbers = true)]
        threshold_db: f64,
        /// Search ceiling in meters (scenario d_max by default).
        #[arg(long)]
        ceiling: Option<f64>,
    },
    /// Write the building layout of iteration 0 as CSV.
    ExportScenario {
        /// Target file (`<out>/scenario.csv` by default).
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Chain {
    OutdoorUe,
    IndoorUe,
    L1Repeater,
    L3Relay,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(&Sources {
        preset: cli.preset.as_deref(),
        config: cli.config.as_deref(),
        overrides: &cli.overrides,
        seed: cli.seed,
    })?;
    match &cli.command {
        Command::Run => cmd_run(cli, &cfg),
        Command::Sweep { param, values } => cmd_sweep(cli, &cfg, param, values),
        Command::Range { band, chain, threshold_db, ceiling } => {
            cmd_range(cli, &cfg, band, *chain, *threshold_db, *ceiling)
        }
        Command::ExportScenario { path } => {
            let path = path.clone().unwrap_or_else(|| cli.out.join("scenario.csv"));
            cmd_export_scenario(&cfg, &path)
        }
    }
}

fn cmd_run(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let result = run_experiment(cfg, cli.threads)?;
    let mut dir = OutDir::create(&cli.out, cfg)?;
    write_run(&mut dir, &result)?;
    dir.finish(Some(&RunInfo { threads: cli.threads, wall_clock_s: result.wall_clock_s }))?;
    eprintln!("finished in {:.2} s; outputs in {}", result.wall_clock_s, cli.out.display());
    print_summary(cli.format, &result)
}

fn cmd_sweep(cli: &Cli, cfg: &ExperimentConfig, param: &str, values: &[f64]) -> Result<(), CliError> {
    let results = sweep(cfg, param, values, cli.threads)?;
    let mut dir = OutDir::create(&cli.out, cfg)?;
    for (i, result) in results.iter().enumerate() {
        dir.write(&format!("results_{i}.json"), |w| {
            Ok(simkit_core::engine::write_results_json(result, w)?)
        })?;
    }
    dir.write("sweep.csv", |w| Ok(write_sweep_csv(param, values, &results, w)?))?;
    let wall: f64 = results.iter().map(|r| r.wall_clock_s).sum();
    dir.finish(Some(&RunInfo { threads: cli.threads, wall_clock_s: wall }))?;
    let stdout = io::stdout().lock();
    match cli.format {
        Format::Csv => write_sweep_csv(param, values, &results, stdout).map_err(|e| CliError::Io(e.to_string())),
        Format::Json => {
            let points: Vec<_> = values
                .iter()
                .zip(&results)
                .map(|(v, r)| json!({ "value": v, "summary": summary_json(r) }))
                .collect();
            print_json(&json!({ "parameter": param, "points": points }))
        }
    }
}

fn cmd_range(
    cli: &Cli,
    cfg: &ExperimentConfig,
    band_name: &str,
    chain: Chain,
    threshold_db: f64,
    ceiling: Option<f64>,
) -> Result<(), CliError> {
    let setup = cfg.band(band_name).ok_or_else(|| {
        let known: Vec<&str> = cfg.bands.iter().map(|b| b.band.name.as_str()).collect();
        ConfigError::new("band", format!("unknown band `{band_name}`; configured: {}", known.join(", ")))
    })?;
    let ceiling = ceiling.unwrap_or(cfg.scenario.d_max);
    if !(ceiling.is_finite() && ceiling > 0.0) {
        return Err(ConfigError::new("ceiling", "must be a positive distance").into());
    }
    let m = &setup.methods;
    let uplink = match chain {
        Chain::OutdoorUe => UplinkChain::OutdoorUe,
        Chain::IndoorUe => UplinkChain::IndoorUe,
        Chain::L1Repeater => UplinkChain::Donor {
            antenna_gain: m.l1_repeater.donor_gain,
            max_eirp: m.l1_repeater.donor_max_eirp,
        },
        Chain::L3Relay => UplinkChain::Donor {
            antenna_gain: m.l3_relay.donor_gain,
            max_eirp: m.l3_relay.donor_max_eirp,
        },
    };
    let query = RangeQuery {
        band: &setup.band,
        env: &cfg.environment,
        bel: &cfg.bel,
        chain: uplink,
        min_ul_sinr_db: threshold_db,
        ceiling,
    };
    let outcome = max_ul_distance(&query).map_err(|e| CliError::Model(e.to_string()))?;
    match cli.format {
        Format::Csv => {
            println!("{}", outcome.describe());
            Ok(())
        }
        Format::Json => print_json(&json!({
            "band": band_name,
            "chain": format!("{chain:?}"),
            "threshold_db": threshold_db,
            "seed": cfg.seed(),
            "config_hash": cfg.config_hash(),
            "outcome": outcome,
        })),
    }
}

fn cmd_export_scenario(cfg: &ExperimentConfig, path: &Path) -> Result<(), CliError> {
    let samples = generate_scenario(&cfg.scenario)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    write_scenario(path, &samples)?;
    write_sidecar(path, cfg)
}

fn summary_json(result: &ExperimentResult) -> serde_json::Value {
    let rows: Vec<_> = result
        .reports
        .iter()
        .map(|r| {
            json!({
                "method": r.method,
                "band": r.band,
                "mean": r.mean,
                "median": r.median,
                "p5": r.p5,
                "p95": r.p95,
                "cell_capacity": r.cell_capacity,
                "multiplex_count": r.multiplex_count,
            })
        })
        .collect();
    json!({
        "schema_version": result.schema_version,
        "seed": result.seed,
        "config_hash": result.config_hash,
        "reports": rows,
    })
}

fn print_summary(format: Format, result: &ExperimentResult) -> Result<(), CliError> {
    match format {
        Format::Csv => write_summary_csv(result, io::stdout().lock()).map_err(|e| CliError::Io(e.to_string())),
        Format::Json => print_json(&summary_json(result)),
    }
}

fn print_json(value: &serde_json::Value) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out).map_err(|e| CliError::Io(e.to_string()))
}
