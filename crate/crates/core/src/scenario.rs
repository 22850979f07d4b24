//! Building layout generation and LOS/NLOS shadowing.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, ConfigError};
use crate::propagation::LosCondition;

/// Indoor UE distance range, m.
pub const INDOOR_DISTANCE_RANGE: (f64, f64) = (2.0, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_buildings: u32,
    /// Closest building distance to the gNB, m.
    pub d_min: f64,
    pub d_max: f64,
    pub sector_deg: f64,
    /// Edge length of the square building footprint, m.
    pub building_side: f64,
    pub building_height: f64,
    /// Mounting height of the donor antenna on the building facade, m.
    pub donor_antenna_height: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_buildings: 300,
            d_min: 50.0,
            d_max: 600.0,
            sector_deg: 120.0,
            building_side: 15.0,
            building_height: 10.0,
            donor_antenna_height: 2.0,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.n_buildings >= 1, "scenario.n_buildings", "must be at least 1")?;
        ensure(self.d_min > 0.0, "scenario.d_min", "must be positive")?;
        ensure(self.d_max > self.d_min, "scenario.d_max", "must exceed d_min")?;
        ensure(
            self.sector_deg > 0.0 && self.sector_deg <= 360.0,
            "scenario.sector_deg",
            "must lie in (0, 360]",
        )?;
        ensure(self.building_side > 0.0, "scenario.building_side", "must be positive")?;
        ensure(self.building_height > 0.0, "scenario.building_height", "must be positive")?;
        ensure(
            self.donor_antenna_height > 0.0,
            "scenario.donor_antenna_height",
            "must be positive",
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSample {
    pub iteration: u32,
    pub building_index: u32,
    pub distance_2d: f64,
    pub azimuth_deg: f64,
    pub los: LosCondition,
    /// Distance from the indoor node to the UE, m.
    pub indoor_distance: f64,
}

/// Generator for one building, independent of evaluation order.
pub fn building_rng(seed: u64, iteration: u32, building: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(iteration) << 32) | u64::from(building));
    rng
}

fn draw_building(cfg: &ScenarioConfig, iteration: u32, building: u32) -> ScenarioSample {
    let mut rng = building_rng(cfg.seed, iteration, building);
    let half = cfg.sector_deg / 2.0;
    let (in_lo, in_hi) = INDOOR_DISTANCE_RANGE;
    ScenarioSample {
        iteration,
        building_index: building,
        distance_2d: rng.gen_range(cfg.d_min..=cfg.d_max),
        azimuth_deg: rng.gen_range(-half..=half),
        los: LosCondition::Los,
        indoor_distance: rng.gen_range(in_lo..=in_hi),
    }
}

/// Layout of iteration 0.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Vec<ScenarioSample>, ConfigError> {
    generate_iteration(cfg, 0)
}

pub fn generate_iteration(
    cfg: &ScenarioConfig,
    iteration: u32,
) -> Result<Vec<ScenarioSample>, ConfigError> {
    cfg.validate()?;
    let mut samples: Vec<ScenarioSample> = (0..cfg.n_buildings)
        .map(|b| draw_building(cfg, iteration, b))
        .collect();
    let flags: Vec<LosCondition> = samples
        .iter()
        .map(|s| determine_los(s, &samples, cfg))
        .collect();
    for (s, los) in samples.iter_mut().zip(flags) {
        s.los = los;
    }
    Ok(samples)
}

/// NLOS when a strictly nearer building covers the target azimuth and the donor
/// antenna sits below the rooftops. Entries sharing the target's index are ignored.
pub fn determine_los(
    target: &ScenarioSample,
    others: &[ScenarioSample],
    cfg: &ScenarioConfig,
) -> LosCondition {
    if cfg.donor_antenna_height >= cfg.building_height {
        return LosCondition::Los;
    }
    let half_side = cfg.building_side / 2.0;
    let shadowed = others.iter().any(|o| {
        o.building_index != target.building_index
            && o.distance_2d < target.distance_2d
            && (target.azimuth_deg - o.azimuth_deg).abs()
                <= half_side.atan2(o.distance_2d).to_degrees()
    });
    if shadowed {
        LosCondition::Nlos
    } else {
        LosCondition::Los
    }
}

impl LosCondition {
    pub fn label(self) -> &'static str {
        match self {
            LosCondition::Los => "LOS",
            LosCondition::Nlos => "NLOS",
        }
    }
}

/// Writes samples as CSV with a header row.
pub fn write_scenario_csv<W: Write>(samples: &[ScenarioSample], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "building_index",
        "distance_2d",
        "azimuth_deg",
        "los",
        "indoor_distance",
    ])?;
    for s in samples {
        w.write_record([
            s.building_index.to_string(),
            s.distance_2d.to_string(),
            s.azimuth_deg.to_string(),
            s.los.label().to_string(),
            s.indoor_distance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
