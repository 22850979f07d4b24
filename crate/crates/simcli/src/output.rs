//! Files written by the subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use simkit_core::engine::{write_results_json, write_summary_csv, SCHEMA_VERSION};
use simkit_core::scenario::{write_scenario_csv, ScenarioSample};
use simkit_core::{ExperimentConfig, ExperimentResult};

use crate::CliError;

/// Sidecar that ties every data file in a directory to its inputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub software_version: &'static str,
    pub seed: u64,
    pub config_hash: String,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            software_version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed(),
            config_hash: cfg.config_hash(),
            files: Vec::new(),
        }
    }
}

/// Non-reproducible facts about a run, kept apart from the data files.
#[derive(Debug, Serialize)]
pub struct RunInfo {
    pub threads: Option<usize>,
    pub wall_clock_s: f64,
}

pub struct OutDir {
    root: PathBuf,
    manifest: Manifest,
}

impl OutDir {
    pub fn create(root: &Path, cfg: &ExperimentConfig) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), manifest: Manifest::new(cfg) })
    }

    /// Writes one file and records it in the manifest.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), Box<dyn std::error::Error>>,
    {
        self.write_untracked(name, body)?;
        self.manifest.files.push(name.to_string());
        Ok(())
    }

    fn write_untracked<F>(&self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), Box<dyn std::error::Error>>,
    {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|()| w.flush().map_err(Into::into))
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn finish(self, info: Option<&RunInfo>) -> Result<(), CliError> {
        if let Some(info) = info {
            self.write_untracked("run_info.json", |w| Ok(serde_json::to_writer_pretty(w, info)?))?;
        }
        let manifest = &self.manifest;
        self.write_untracked("manifest.json", |w| Ok(serde_json::to_writer_pretty(w, manifest)?))
    }
}

pub fn write_run(dir: &mut OutDir, result: &ExperimentResult) -> Result<(), CliError> {
    dir.write("results.json", |w| Ok(write_results_json(result, w)?))?;
    dir.write("summary.csv", |w| Ok(write_summary_csv(result, w)?))?;
    dir.write("boxplot.csv", |w| Ok(write_boxplot_csv(result, w)?))?;
    dir.write("cellbars.csv", |w| Ok(write_cellbars_csv(result, w)?))
}

/// Distribution summary per method and band.
pub fn write_boxplot_csv<W: Write>(result: &ExperimentResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "band", "p5", "median", "p95", "mean"])?;
    for r in &result.reports {
        w.write_record([
            r.method.to_string(),
            r.band.clone(),
            r.p5.to_string(),
            r.median.to_string(),
            r.p95.to_string(),
            r.mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Cell capacity as stacked segments, one per multiplexed link.
pub fn write_cellbars_csv<W: Write>(result: &ExperimentResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "band", "segment", "segment_capacity", "cumulative_capacity"])?;
    for r in &result.reports {
        for k in 1..=r.multiplex_count {
            w.write_record([
                r.method.to_string(),
                r.band.clone(),
                k.to_string(),
                r.mean.to_string(),
                (r.mean * f64::from(k)).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per sweep point, method and band.
pub fn write_sweep_csv<W: Write>(
    parameter: &str,
    values: &[f64],
    results: &[ExperimentResult],
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "value", "method", "band", "mean", "median", "p5", "p95", "cell_capacity"])?;
    for (value, result) in values.iter().zip(results) {
        for r in &result.reports {
            w.write_record([
                parameter.to_string(),
                value.to_string(),
                r.method.to_string(),
                r.band.clone(),
                r.mean.to_string(),
                r.median.to_string(),
                r.p5.to_string(),
                r.p95.to_string(),
                r.cell_capacity.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_scenario(path: &Path, samples: &[ScenarioSample]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_scenario_csv(samples, &mut w).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `<stem>.manifest.json` next to a single data file.
pub fn write_sidecar(path: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut manifest = Manifest::new(cfg);
    if let Some(name) = path.file_name() {
        manifest.files.push(name.to_string_lossy().into_owned());
    }
    let side = path.with_extension("manifest.json");
    let file = File::create(&side).map_err(|e| CliError::io(&side, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)
        .map_err(|e| CliError::Io(format!("{}: {e}", side.display())))
}
