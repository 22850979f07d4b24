//! SINR, capacity mapping, cell aggregation, statistics and the uplink range solver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ConfigError;
use crate::linkmodels::{
    ul_tx_power, BandConfig, DirectionBudget, LinkBudgetResult, MethodId, ModelError,
};
use crate::propagation::{
    building_entry_loss, pathloss_3gpp, BelParams, LosCondition, OutdoorEnvironment,
    MIN_DISTANCE_2D,
};
use crate::rfmath::{
    db_to_ratio, ratio_to_db, thermal_noise_power, GainDb, Hertz, LossDb, Meters, PowerDbm,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Downlink,
    Uplink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityParams {
    pub alpha_dl: f64,
    pub alpha_ul: f64,
    pub sinr_cutoff_db: f64,
}

impl Default for CapacityParams {
    fn default() -> Self {
        Self {
            alpha_dl: 0.6,
            alpha_ul: 0.4,
            sinr_cutoff_db: -10.0,
        }
    }
}

/// Inputs of the 38.306 approximate peak data rate for one carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxRateParams {
    pub layers: u32,
    pub modulation_order: u32,
    pub scaling_factor: f64,
    pub max_code_rate: f64,
    pub n_prb: u32,
    pub numerology: u32,
    pub overhead: f64,
}

impl MaxRateParams {
    pub fn for_band(band: &BandConfig) -> Option<Self> {
        Some(Self {
            layers: band.max_rate.layers,
            modulation_order: band.max_rate.modulation_order,
            scaling_factor: band.max_rate.scaling_factor,
            max_code_rate: band.max_rate.max_code_rate,
            n_prb: band.n_prb,
            numerology: band.numerology()?,
            overhead: band.max_rate.overhead,
        })
    }
}

/// Peak data rate in bit/s.
pub fn max_data_rate(p: &MaxRateParams) -> f64 {
    let symbol_duration = 1e-3 / (14.0 * f64::from(1u32 << p.numerology));
    f64::from(p.layers)
        * f64::from(p.modulation_order)
        * p.scaling_factor
        * p.max_code_rate
        * f64::from(p.n_prb * 12)
        / symbol_duration
        * (1.0 - p.overhead)
}

/// Linear SINR of one direction of a link.
pub fn sinr(budget: &DirectionBudget, bandwidth: Hertz) -> f64 {
    let thermal = thermal_noise_power(bandwidth, budget.rx_noise_figure).to_watts();
    budget.signal.0 / (thermal.0 + budget.equipment_noise.0 + budget.interference.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrResult {
    pub dl_sinr: f64,
    pub ul_sinr: f64,
}

pub fn link_sinr(link: &LinkBudgetResult, band: &BandConfig) -> SinrResult {
    if !link.feasible {
        return SinrResult { dl_sinr: 0.0, ul_sinr: 0.0 };
    }
    SinrResult {
        dl_sinr: sinr(&link.dl, band.bandwidth),
        ul_sinr: sinr(&link.ul, band.bandwidth),
    }
}

pub fn tdd_fraction(band: &BandConfig, direction: Direction) -> f64 {
    match direction {
        Direction::Downlink => band.tdd_dl_fraction,
        Direction::Uplink => 1.0 - band.tdd_dl_fraction,
    }
}

/// Link capacity in bit/s after cutoff, rate cap and TDD split.
pub fn shannon_capacity(
    gamma: f64,
    band: &BandConfig,
    params: &CapacityParams,
    direction: Direction,
) -> f64 {
    if !(gamma >= db_to_ratio(params.sinr_cutoff_db)) {
        return 0.0;
    }
    let alpha = match direction {
        Direction::Downlink => params.alpha_dl,
        Direction::Uplink => params.alpha_ul,
    };
    let cap = MaxRateParams::for_band(band).map_or(f64::INFINITY, |p| max_data_rate(&p));
    let shannon = alpha * band.bandwidth.0 * (1.0 + gamma).log2();
    shannon.min(cap) * tdd_fraction(band, direction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCapacity {
    pub dl: f64,
    pub ul: f64,
}

/// Capacity of a complete link. A relay is limited by its weaker hop, and a
/// link without uplink carries no downlink either.
pub fn link_capacity(
    link: &LinkBudgetResult,
    band: &BandConfig,
    params: &CapacityParams,
) -> LinkCapacity {
    let s = link_sinr(link, band);
    let mut dl = shannon_capacity(s.dl_sinr, band, params, Direction::Downlink);
    let mut ul = shannon_capacity(s.ul_sinr, band, params, Direction::Uplink);
    if let Some(hop) = link.backhaul.filter(|_| link.feasible) {
        let hop_dl = sinr(&hop.dl, band.bandwidth);
        let hop_ul = sinr(&hop.ul, band.bandwidth);
        dl = dl.min(shannon_capacity(hop_dl, band, params, Direction::Downlink));
        ul = ul.min(shannon_capacity(hop_ul, band, params, Direction::Uplink));
    }
    if ul == 0.0 {
        dl = 0.0;
    }
    LinkCapacity { dl, ul }
}

// ==================== Cell capacity ====================

/// Beamwidth product of a symmetric pencil beam, deg^2. Anchors 24 dBi at 10 degrees.
pub const BEAM_AREA_DEG2: f64 = 100.0 * 251.188_643_150_958_0;

/// Half-power beamwidth in degrees of a symmetric beam with the given gain.
pub fn beamwidth_from_gain(gain: GainDb) -> f64 {
    (BEAM_AREA_DEG2 / gain.linear()).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplexConfig {
    /// Co-scheduled single-layer users per macro, repeater or relay cell.
    pub mu_mimo_users: u32,
    /// Bridge beams; derived from the bridge antenna gain when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beamwidth_deg: Option<f64>,
    /// Service carriers stacked in the mmWave bandwidth per beam.
    pub freq_mux_channels: u32,
}

impl Default for MultiplexConfig {
    fn default() -> Self {
        Self {
            mu_mimo_users: 4,
            beamwidth_deg: None,
            freq_mux_channels: 1,
        }
    }
}

/// Geometry needed to stack link capacities into a cell capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLayout {
    pub mu_mimo_users: u32,
    pub n_buildings: u32,
    pub sector_deg: f64,
    pub beamwidth_deg: f64,
    pub freq_mux_channels: u32,
}

pub fn multiplex_count(method: MethodId, layout: &CellLayout) -> Result<u32, ConfigError> {
    let count = match method {
        MethodId::Macro | MethodId::L1Repeater | MethodId::L3Relay => layout.mu_mimo_users,
        MethodId::SmallCell => layout.n_buildings,
        MethodId::Mmwb => {
            if !(layout.beamwidth_deg > 0.0) {
                return Err(ConfigError::new("multiplex.beamwidth_deg", "must be positive"));
            }
            let beams = (layout.sector_deg / layout.beamwidth_deg + 1e-9).floor() as u32;
            beams * layout.freq_mux_channels
        }
    };
    if count < 1 {
        return Err(ConfigError::new(
            "multiplex",
            format!("{method} multiplex count must be at least 1"),
        ));
    }
    Ok(count)
}

/// Cell capacity from the mean link capacity; returns (bit/s, multiplex count).
pub fn aggregate_cell_capacity(
    mean_link_capacity: f64,
    method: MethodId,
    layout: &CellLayout,
) -> Result<(f64, u32), ConfigError> {
    let n = multiplex_count(method, layout)?;
    Ok((mean_link_capacity * f64::from(n), n))
}

// ==================== Statistics ====================

#[derive(Debug, Clone, Error, PartialEq)]
#[error("statistics need at least one sample")]
pub struct EmptySamples;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
    pub std_dev: f64,
}

/// Percentile of sorted data with linear interpolation between closest ranks.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn distribution_stats(samples: &[f64]) -> Result<DistributionStats, EmptySamples> {
    if samples.is_empty() {
        return Err(EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = if sorted.len() > 1 {
        sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(DistributionStats {
        mean,
        median: percentile_sorted(&sorted, 0.5),
        p5: percentile_sorted(&sorted, 0.05),
        p95: percentile_sorted(&sorted, 0.95),
        std_dev: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub method: MethodId,
    pub band: String,
    /// DL link capacities, bit/s, iteration-major.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p95: f64,
    pub std_dev: f64,
    pub ul_mean: f64,
    pub cell_capacity: f64,
    pub multiplex_count: u32,
}

impl CapacityReport {
    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.samples.len() as f64).sqrt()
    }
}

// ==================== Uplink range ====================

/// Transmitter whose uplink reach is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UplinkChain {
    /// Handset outdoors in front of the building.
    OutdoorUe,
    /// Handset indoors behind the building entry loss.
    IndoorUe,
    /// Relay or repeater donor side with its own antenna and EIRP ceiling.
    Donor { antenna_gain: GainDb, max_eirp: PowerDbm },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "distance_m")]
pub enum RangeOutcome {
    /// Largest distance on the 1 m grid meeting the threshold.
    Limited(f64),
    /// Threshold still met at the search ceiling.
    UnboundedWithin(f64),
    /// Threshold missed even at the model floor distance.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeQuery<'a> {
    pub band: &'a BandConfig,
    pub env: &'a OutdoorEnvironment,
    pub bel: &'a BelParams,
    pub chain: UplinkChain,
    pub min_ul_sinr_db: f64,
    pub ceiling: f64,
}

/// Uplink SINR in dB at 2-D distance `d` over a LOS outdoor path.
pub fn ul_sinr_db_at(q: &RangeQuery<'_>, d: f64) -> Result<f64, ModelError> {
    let band = q.band;
    let outdoor = pathloss_3gpp(
        Meters(d),
        band.f_c,
        LosCondition::Los,
        q.env,
        q.env.los_correction,
    )?
    .loss;
    let rx_gain = band.gnb_antenna_gain.0;
    let (coupling, tx) = match &q.chain {
        UplinkChain::OutdoorUe => {
            let cl = LossDb(outdoor.0 - band.ue_antenna_gain.0 - rx_gain);
            (cl, ul_tx_power(cl, band))
        }
        UplinkChain::IndoorUe => {
            let entry = building_entry_loss(band.f_c, q.bel)?;
            let cl = LossDb(outdoor.0 + entry.0 - band.ue_antenna_gain.0 - rx_gain);
            (cl, ul_tx_power(cl, band))
        }
        UplinkChain::Donor { antenna_gain, max_eirp } => {
            let cl = LossDb(outdoor.0 - antenna_gain.0 - rx_gain);
            let tx = crate::linkmodels::open_loop_power(
                cl,
                *max_eirp - *antenna_gain,
                band.p0_nom_pusch,
                band.n_prb,
            );
            (cl, tx)
        }
    };
    let noise = thermal_noise_power(band.bandwidth, band.gnb_nf_ul);
    Ok((tx - coupling).0 - noise.0)
}

/// Largest uplink distance meeting the SINR threshold, by bisection on a 1 m grid
/// starting at the path-loss model floor.
pub fn max_ul_distance(q: &RangeQuery<'_>) -> Result<RangeOutcome, ModelError> {
    let floor = MIN_DISTANCE_2D;
    let ok = |d: f64| -> Result<bool, ModelError> { Ok(ul_sinr_db_at(q, d)? >= q.min_ul_sinr_db) };
    if q.ceiling < floor {
        return Ok(RangeOutcome::Unreachable);
    }
    if ok(q.ceiling)? {
        return Ok(RangeOutcome::UnboundedWithin(q.ceiling));
    }
    if !ok(floor)? {
        return Ok(RangeOutcome::Unreachable);
    }
    // Invariant: grid point `lo` feasible, `hi` infeasible (hi may be the ceiling).
    let steps = (q.ceiling - floor).floor() as u64;
    let (mut lo, mut hi) = (0u64, steps + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let d = if mid > steps { q.ceiling } else { floor + mid as f64 };
        if ok(d)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RangeOutcome::Limited(floor + lo as f64))
}

impl RangeOutcome {
    pub fn describe(&self) -> String {
        match self {
            RangeOutcome::Limited(d) => format!("{d:.0} m"),
            RangeOutcome::UnboundedWithin(d) => format!("unbounded within {d:.0} m"),
            RangeOutcome::Unreachable => "unreachable".into(),
        }
    }
}

pub fn sinr_db(gamma: f64) -> f64 {
    ratio_to_db(gamma)
}
