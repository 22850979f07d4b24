//! Monte Carlo orchestration over iterations, buildings, bands and methods.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::capacity::{
    aggregate_cell_capacity, beamwidth_from_gain, distribution_stats, link_capacity,
    CapacityParams, CapacityReport, CellLayout, LinkCapacity, MultiplexConfig,
};
use crate::error::{ensure, ConfigError, SimError};
use crate::linkmodels::{
    l1_repeater_link, l3_relay_link, macro_link, mmwb_link, small_cell_link, BandConfig,
    LinkBudgetResult, LinkLosses, MethodId, MethodParams, ModelError, BAND_26G, BAND_39G,
    BAND_3G6,
};
use crate::propagation::{pathloss_3gpp_clamped, BelParams, OutdoorEnvironment};
use crate::rfmath::{GainDb, LossDb, Meters, PowerDbm, Watts};
use crate::scenario::{generate_iteration, ScenarioConfig, ScenarioSample};

pub const SCHEMA_VERSION: u32 = 1;

/// One carrier together with the equipment deployed on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSetup {
    pub band: BandConfig,
    pub methods: MethodParams,
}

impl BandSetup {
    pub fn preset(name: &str) -> Option<BandSetup> {
        let band = BandConfig::preset(name)?;
        let methods = MethodParams::for_band(&band);
        Some(BandSetup { band, methods })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_iterations: u32,
    /// `scenario.seed` is the master seed of the whole experiment.
    pub scenario: ScenarioConfig,
    pub environment: OutdoorEnvironment,
    pub bel: BelParams,
    pub capacity: CapacityParams,
    pub multiplex: MultiplexConfig,
    pub methods: Vec<MethodId>,
    pub bands: Vec<BandSetup>,
}

/// Calibrated layout of the `paper` preset.
pub mod calibration {
    pub const D_MIN: f64 = 250.0;
    pub const D_MAX: f64 = 1500.0;
    pub const BUILDING_SIDE: f64 = 30.0;
    /// Repeater isolation above the maximum amplifier gain, dB.
    pub const ISOLATION_MARGIN: f64 = 34.0;
    pub const LOS_CORRECTION: bool = true;
}

/// Handset antenna gain on every carrier of the rural preset, dBi.
pub const RURAL_HANDSET_GAIN: GainDb = GainDb(3.0);

impl ExperimentConfig {
    /// Five methods on the 3.6 GHz and 26 GHz carriers with the calibrated layout.
    pub fn paper() -> Self {
        let mut bands = vec![
            BandSetup::preset(BAND_3G6).expect("built-in preset"),
            BandSetup::preset(BAND_26G).expect("built-in preset"),
        ];
        for setup in &mut bands {
            let rep = &mut setup.methods.l1_repeater;
            rep.isolation = LossDb(rep.max_gain.0 + calibration::ISOLATION_MARGIN);
        }
        Self {
            n_iterations: 100,
            scenario: ScenarioConfig {
                d_min: calibration::D_MIN,
                d_max: calibration::D_MAX,
                building_side: calibration::BUILDING_SIDE,
                ..ScenarioConfig::default()
            },
            environment: OutdoorEnvironment {
                los_correction: calibration::LOS_CORRECTION,
                ..OutdoorEnvironment::default()
            },
            bel: BelParams::default(),
            capacity: CapacityParams::default(),
            multiplex: MultiplexConfig::default(),
            methods: MethodId::ALL.to_vec(),
            bands,
        }
    }

    /// Rural macro site with the LOS correction, 1500 W ERP on mmWave carriers and
    /// outdoor handsets without a mmWave array gain.
    pub fn rural() -> Self {
        let erp_to_eirp = |erp_w: f64| PowerDbm(Watts(erp_w).to_dbm().0 + 2.15);
        let mut bands: Vec<BandSetup> = [BAND_3G6, BAND_26G, BAND_39G]
            .iter()
            .map(|n| BandSetup::preset(n).expect("built-in preset"))
            .collect();
        bands[0].band.gnb_eirp = erp_to_eirp(1000.0);
        bands[1].band.gnb_eirp = erp_to_eirp(1500.0);
        bands[2].band.gnb_eirp = erp_to_eirp(1500.0);
        for setup in &mut bands[1..] {
            setup.band.ue_antenna_gain = RURAL_HANDSET_GAIN;
        }
        Self {
            scenario: ScenarioConfig { d_max: 2000.0, ..Self::paper().scenario },
            environment: OutdoorEnvironment { los_correction: true, ..OutdoorEnvironment::default() },
            bands,
            ..Self::paper()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Self::paper()),
            "rural" => Some(Self::rural()),
            _ => None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.scenario.seed
    }

    pub fn band(&self, name: &str) -> Option<&BandSetup> {
        self.bands.iter().find(|b| b.band.name == name)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.n_iterations >= 1, "n_iterations", "must be at least 1")?;
        ensure(!self.bands.is_empty(), "bands", "at least one band is required")?;
        ensure(!self.methods.is_empty(), "methods", "at least one method is required")?;
        self.scenario.validate()?;
        let env = &self.environment;
        ensure(
            env.h_bs > 0.0 && env.h_ut > 0.0 && env.street_width > 0.0 && env.building_height > 0.0,
            "environment",
            "heights and street width must be positive",
        )?;
        ensure(
            self.bel.probability > 0.0 && self.bel.probability < 1.0,
            "bel.probability",
            "must lie strictly inside (0, 1)",
        )?;
        ensure(self.multiplex.mu_mimo_users >= 1, "multiplex.mu_mimo_users", "must be at least 1")?;
        ensure(
            self.multiplex.freq_mux_channels >= 1,
            "multiplex.freq_mux_channels",
            "must be at least 1",
        )?;
        for (i, setup) in self.bands.iter().enumerate() {
            setup.band.validate()?;
            ensure(
                self.bands[..i].iter().all(|b| b.band.name != setup.band.name),
                "bands",
                "band names must be unique",
            )?;
            let rep = &setup.methods.l1_repeater;
            ensure(rep.delay.0 > 0.0, "l1_repeater.delay", "must be positive")?;
            ensure(rep.nf.0 >= 0.0, "l1_repeater.nf", "must be non-negative")?;
            let relay = &setup.methods.l3_relay;
            ensure(relay.delay.0 > 0.0, "l3_relay.delay", "must be positive")?;
            if let Some(bridge) = &setup.methods.mmwb {
                bridge.mmwave_band.validate()?;
                ensure(bridge.delay.0 > 0.0, "mmwb.delay", "must be positive")?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ==================== Single-building evaluation ====================

/// Link budget of `method` for one building; `None` when the band has no such equipment.
pub fn evaluate_method(
    method: MethodId,
    sample: &ScenarioSample,
    losses: &LinkLosses,
    macro_result: &LinkBudgetResult,
    setup: &BandSetup,
    env: &OutdoorEnvironment,
) -> Result<Option<LinkBudgetResult>, ModelError> {
    let band = &setup.band;
    let m = &setup.methods;
    let link = match method {
        MethodId::Macro => macro_result.clone(),
        MethodId::SmallCell => small_cell_link(losses, band, macro_result, &m.small_cell),
        MethodId::L1Repeater => l1_repeater_link(losses, band, macro_result, &m.l1_repeater)?,
        MethodId::L3Relay => l3_relay_link(losses, band, macro_result, &m.l3_relay),
        MethodId::Mmwb => {
            let Some(bridge) = &m.mmwb else {
                return Ok(None);
            };
            let donor_loss = pathloss_3gpp_clamped(
                Meters(sample.distance_2d),
                bridge.mmwave_band.f_c,
                sample.los,
                env,
                env.los_correction,
            )?
            .loss;
            mmwb_link(losses, donor_loss, band, macro_result, bridge)
        }
    };
    Ok(Some(link))
}

// ==================== Experiment ====================

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunWarnings {
    /// Bands evaluated outside the stated frequency range of the path-loss model.
    pub frequency_out_of_range: Vec<String>,
    /// Building distances raised to the path-loss model floor.
    pub clamped_distances: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub software_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub warnings: RunWarnings,
    pub reports: Vec<CapacityReport>,
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl ExperimentResult {
    pub fn report(&self, method: MethodId, band: &str) -> Option<&CapacityReport> {
        self.reports.iter().find(|r| r.method == method && r.band == band)
    }
}

struct Slot {
    band: usize,
    method: MethodId,
}

struct IterationOutput {
    /// Per slot, per building.
    capacities: Vec<Vec<LinkCapacity>>,
    out_of_range: Vec<bool>,
    clamped: u64,
}

fn active_slots(cfg: &ExperimentConfig) -> Vec<Slot> {
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let mut slots = Vec::new();
    for (band, setup) in cfg.bands.iter().enumerate() {
        for &method in &methods {
            if method == MethodId::Mmwb && setup.methods.mmwb.is_none() {
                continue;
            }
            slots.push(Slot { band, method });
        }
    }
    slots
}

fn run_iteration(
    cfg: &ExperimentConfig,
    slots: &[Slot],
    iteration: u32,
) -> Result<IterationOutput, SimError> {
    let samples = generate_iteration(&cfg.scenario, iteration)?;
    let mut out = IterationOutput {
        capacities: slots.iter().map(|_| Vec::with_capacity(samples.len())).collect(),
        out_of_range: vec![false; cfg.bands.len()],
        clamped: 0,
    };
    for sample in &samples {
        let fail = |method: MethodId, band: &BandConfig, source: ModelError| SimError::Model {
            iteration,
            building: sample.building_index,
            method: method.to_string(),
            band: band.name.clone(),
            source,
        };
        for (b, setup) in cfg.bands.iter().enumerate() {
            let band = &setup.band;
            let losses = LinkLosses::evaluate(sample, band.f_c, &cfg.environment, &cfg.bel)
                .map_err(|e| fail(MethodId::Macro, band, e.into()))?;
            out.out_of_range[b] |= losses.frequency_out_of_range;
            out.clamped += u64::from(losses.distance_clamped);
            let macro_result = macro_link(&losses, band);
            for (slot, caps) in slots.iter().zip(out.capacities.iter_mut()) {
                if slot.band != b {
                    continue;
                }
                let link = evaluate_method(
                    slot.method,
                    sample,
                    &losses,
                    &macro_result,
                    setup,
                    &cfg.environment,
                )
                .map_err(|e| fail(slot.method, band, e))?
                .expect("inactive slots are filtered");
                caps.push(link_capacity(&link, band, &cfg.capacity));
            }
        }
    }
    Ok(out)
}

/// Runs the experiment on `threads` workers (all cores when `None`).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentResult, SimError> {
    cfg.validate()?;
    let started = Instant::now();
    let slots = active_slots(cfg);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| ConfigError::new("threads", e.to_string()))?;
    let outputs: Vec<Result<IterationOutput, SimError>> = pool.install(|| {
        (0..cfg.n_iterations)
            .into_par_iter()
            .map(|it| run_iteration(cfg, &slots, it))
            .collect()
    });
    let outputs = outputs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut warnings = RunWarnings::default();
    for (b, setup) in cfg.bands.iter().enumerate() {
        if outputs.iter().any(|o| o.out_of_range[b]) {
            warnings.frequency_out_of_range.push(setup.band.name.clone());
        }
    }
    warnings.clamped_distances = outputs.iter().map(|o| o.clamped).sum();

    let mut reports = Vec::with_capacity(slots.len());
    for (s, slot) in slots.iter().enumerate() {
        let setup = &cfg.bands[slot.band];
        let caps: Vec<LinkCapacity> =
            outputs.iter().flat_map(|o| o.capacities[s].iter().copied()).collect();
        let samples: Vec<f64> = caps.iter().map(|c| c.dl).collect();
        let ul: Vec<f64> = caps.iter().map(|c| c.ul).collect();
        let stats = distribution_stats(&samples).expect("at least one building");
        let ul_stats = distribution_stats(&ul).expect("at least one building");
        let layout = cell_layout(cfg, setup);
        let (cell_capacity, multiplex_count) =
            aggregate_cell_capacity(stats.mean, slot.method, &layout)?;
        reports.push(CapacityReport {
            method: slot.method,
            band: setup.band.name.clone(),
            samples,
            mean: stats.mean,
            median: stats.median,
            p5: stats.p5,
            p95: stats.p95,
            std_dev: stats.std_dev,
            ul_mean: ul_stats.mean,
            cell_capacity,
            multiplex_count,
        });
    }

    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed(),
        config_hash: cfg.config_hash(),
        config: cfg.clone(),
        warnings,
        reports,
        wall_clock_s: started.elapsed().as_secs_f64(),
    })
}

pub fn cell_layout(cfg: &ExperimentConfig, setup: &BandSetup) -> CellLayout {
    let beamwidth_deg = cfg.multiplex.beamwidth_deg.unwrap_or_else(|| {
        setup
            .methods
            .mmwb
            .as_ref()
            .map_or(f64::NAN, |b| beamwidth_from_gain(b.mmwave_antenna_gain))
    });
    CellLayout {
        mu_mimo_users: cfg.multiplex.mu_mimo_users,
        n_buildings: cfg.scenario.n_buildings,
        sector_deg: cfg.scenario.sector_deg,
        beamwidth_deg,
        freq_mux_channels: cfg.multiplex.freq_mux_channels,
    }
}

// ==================== Overrides and sweeps ====================

/// Replaces the value at a dotted path (array elements by index).
/// The path must already exist in the configuration.
pub fn set_parameter(
    cfg: &ExperimentConfig,
    path: &str,
    value: Value,
) -> Result<ExperimentConfig, ConfigError> {
    let mut root = serde_json::to_value(cfg).expect("config serializes");
    let unknown = || ConfigError::new(path, "unknown configuration path");
    let mut node = &mut root;
    for segment in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(segment).ok_or_else(unknown)?,
            Value::Array(items) => {
                let i: usize = segment.parse().map_err(|_| unknown())?;
                items.get_mut(i).ok_or_else(unknown)?
            }
            _ => return Err(unknown()),
        };
    }
    if node.is_object() || node.is_array() {
        return Err(ConfigError::new(path, "path addresses a table, not a value"));
    }
    *node = value;
    let updated: ExperimentConfig =
        serde_json::from_value(root).map_err(|e| ConfigError::new(path, e.to_string()))?;
    updated.validate()?;
    Ok(updated)
}

/// Reads the current value at a dotted path.
pub fn get_parameter(cfg: &ExperimentConfig, path: &str) -> Option<Value> {
    let root = serde_json::to_value(cfg).ok()?;
    let mut node = &root;
    for segment in path.split('.') {
        node = match node {
            Value::Object(map) => map.get(segment)?,
            Value::Array(items) => items.get(segment.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(node.clone())
}

/// One run per value of a numeric parameter, in the given order.
/// All runs share the configured seed and therefore the same building layouts.
pub fn sweep(
    cfg: &ExperimentConfig,
    parameter_path: &str,
    values: &[f64],
    threads: Option<usize>,
) -> Result<Vec<ExperimentResult>, SimError> {
    match get_parameter(cfg, parameter_path) {
        Some(Value::Number(_)) => {}
        Some(_) => {
            return Err(ConfigError::new(parameter_path, "not a numeric parameter").into())
        }
        None => return Err(ConfigError::new(parameter_path, "unknown configuration path").into()),
    }
    values
        .iter()
        .map(|&v| {
            let number = serde_json::Number::from_f64(v)
                .ok_or_else(|| ConfigError::new(parameter_path, "value must be finite"))?;
            let point = set_parameter(cfg, parameter_path, Value::Number(number))?;
            run_experiment(&point, threads)
        })
        .collect()
}

// ==================== Serialization ====================

pub fn write_results_json<W: Write>(result: &ExperimentResult, out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, result)
}

/// One row per method and band.
pub fn write_summary_csv<W: Write>(result: &ExperimentResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "band",
        "mean",
        "median",
        "p5",
        "p95",
        "cell_capacity",
        "multiplex_count",
    ])?;
    for r in &result.reports {
        w.write_record([
            r.method.to_string(),
            r.band.clone(),
            r.mean.to_string(),
            r.median.to_string(),
            r.p5.to_string(),
            r.p95.to_string(),
            r.cell_capacity.to_string(),
            r.multiplex_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
