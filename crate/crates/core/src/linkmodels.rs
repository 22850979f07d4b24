//! Downlink and uplink link budgets of the five indoor coverage methods.
//!
//! Every method works on the same [`LinkLosses`] of one building so that the
//! methods are compared on identical geometry. The macro result is computed
//! first because its direct indoor signal is the interference (or the useful
//! echo) seen by the other methods.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{ensure, ConfigError};
use crate::propagation::{
    building_entry_loss, fspl, pathloss_3gpp_clamped, BelParams, OutdoorEnvironment,
    PropagationError,
};
use crate::rfmath::{
    db_to_ratio, ratio_to_db, thermal_noise_power, GainDb, Hertz, LossDb, Meters, NoiseFigureDb,
    PowerDbm, Seconds, Watts,
};
use crate::scenario::ScenarioSample;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("repeater oscillation: loop gain {loop_gain_db:.2} dB is not below 0 dB")]
    RepeaterOscillation { loop_gain_db: f64 },
}

// ==================== Parameters ====================

/// 38.306 peak-rate inputs that do not depend on the carrier layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateProfile {
    pub layers: u32,
    pub modulation_order: u32,
    pub scaling_factor: f64,
    pub max_code_rate: f64,
    pub overhead: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub name: String,
    pub f_c: Hertz,
    pub bandwidth: Hertz,
    pub scs: Hertz,
    pub t_cp: Seconds,
    pub tdd_dl_fraction: f64,
    pub n_prb: u32,
    pub gnb_eirp: PowerDbm,
    pub gnb_nf_ul: NoiseFigureDb,
    pub gnb_antenna_gain: GainDb,
    pub p0_nom_pusch: PowerDbm,
    pub ue_max_tx: PowerDbm,
    pub ue_nf_dl: NoiseFigureDb,
    pub ue_antenna_gain: GainDb,
    pub max_rate: RateProfile,
}

pub const BAND_3G6: &str = "3.6GHz-100MHz";
pub const BAND_26G: &str = "26GHz-400MHz";
pub const BAND_39G: &str = "39GHz-400MHz";

fn watts_to_dbm(w: f64) -> PowerDbm {
    Watts(w).to_dbm()
}

impl BandConfig {
    /// Built-in carrier presets by name.
    pub fn preset(name: &str) -> Option<BandConfig> {
        match name {
            BAND_3G6 => Some(BandConfig {
                name: BAND_3G6.into(),
                f_c: Hertz(3.6e9),
                bandwidth: Hertz(100e6),
                scs: Hertz(30e3),
                t_cp: Seconds(2.3e-6),
                tdd_dl_fraction: 0.8,
                n_prb: 273,
                gnb_eirp: watts_to_dbm(656.0),
                gnb_nf_ul: NoiseFigureDb(3.0),
                gnb_antenna_gain: GainDb(24.0),
                p0_nom_pusch: PowerDbm(-105.0),
                ue_max_tx: PowerDbm(23.0),
                ue_nf_dl: NoiseFigureDb(8.0),
                ue_antenna_gain: GainDb(3.0),
                max_rate: RateProfile {
                    layers: 1,
                    modulation_order: 8,
                    scaling_factor: 1.0,
                    max_code_rate: 948.0 / 1024.0,
                    overhead: 0.14,
                },
            }),
            BAND_26G => Some(BandConfig {
                name: BAND_26G.into(),
                f_c: Hertz(26e9),
                bandwidth: Hertz(400e6),
                scs: Hertz(120e3),
                t_cp: Seconds(0.6e-6),
                tdd_dl_fraction: 0.8,
                n_prb: 264,
                gnb_eirp: watts_to_dbm(1000.0),
                gnb_nf_ul: NoiseFigureDb(9.0),
                gnb_antenna_gain: GainDb(27.0),
                p0_nom_pusch: PowerDbm(-105.0),
                ue_max_tx: PowerDbm(23.0),
                ue_nf_dl: NoiseFigureDb(9.0),
                ue_antenna_gain: GainDb(9.0),
                max_rate: RateProfile {
                    layers: 1,
                    modulation_order: 8,
                    scaling_factor: 1.0,
                    max_code_rate: 948.0 / 1024.0,
                    overhead: 0.18,
                },
            }),
            BAND_39G => {
                let mut band = BandConfig::preset(BAND_26G)?;
                band.name = BAND_39G.into();
                band.f_c = Hertz(39e9);
                Some(band)
            }
            _ => None,
        }
    }

    /// NR numerology index derived from the subcarrier spacing.
    pub fn numerology(&self) -> Option<u32> {
        let ratio = self.scs.0 / 15e3;
        (0..=4).find(|mu| (ratio - f64::from(1u32 << mu)).abs() < 1e-9)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let f = |field: &str| format!("band[{}].{field}", self.name);
        ensure(self.f_c.0 > 0.0, &f("f_c"), "must be positive")?;
        ensure(self.bandwidth.0 > 0.0, &f("bandwidth"), "must be positive")?;
        ensure(self.numerology().is_some(), &f("scs"), "must be 15, 30, 60, 120 or 240 kHz")?;
        ensure(self.t_cp.0 > 0.0, &f("t_cp"), "must be positive")?;
        ensure(
            self.tdd_dl_fraction > 0.0 && self.tdd_dl_fraction < 1.0,
            &f("tdd_dl_fraction"),
            "must lie in (0, 1)",
        )?;
        ensure(self.n_prb >= 1, &f("n_prb"), "must be at least 1")?;
        ensure(self.gnb_nf_ul.0 >= 0.0, &f("gnb_nf_ul"), "must be non-negative")?;
        ensure(self.ue_nf_dl.0 >= 0.0, &f("ue_nf_dl"), "must be non-negative")?;
        ensure(self.max_rate.layers >= 1, &f("max_rate.layers"), "must be at least 1")?;
        ensure(
            (0.0..1.0).contains(&self.max_rate.overhead),
            &f("max_rate.overhead"),
            "must lie in [0, 1)",
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallCellParams {
    pub max_eirp: PowerDbm,
    pub nf: NoiseFigureDb,
    pub antenna_gain: GainDb,
    pub p0_nom_pusch: PowerDbm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepeaterParams {
    /// Amplifier gain limit, antennas excluded.
    pub max_gain: GainDb,
    pub delay: Seconds,
    pub donor_max_eirp: PowerDbm,
    pub service_max_eirp: PowerDbm,
    pub nf: NoiseFigureDb,
    pub donor_gain: GainDb,
    pub service_gain: GainDb,
    /// Coupling loss from the service antenna back into the donor antenna.
    pub isolation: LossDb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayParams {
    pub rx_sensitivity_rsrp: PowerDbm,
    pub delay: Seconds,
    pub donor_max_eirp: PowerDbm,
    pub service_max_eirp: PowerDbm,
    pub nf: NoiseFigureDb,
    pub donor_gain: GainDb,
    pub service_gain: GainDb,
    /// Relay cell on a different carrier than the macro cell.
    #[serde(default)]
    pub out_of_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeParams {
    /// Gain from the CPE input to the radiated output, per direction.
    pub max_gain: GainDb,
    pub delay: Seconds,
    /// EIRP of the donor bridge node at the gNB site.
    pub donor_node_eirp: PowerDbm,
    pub outdoor_max_eirp: PowerDbm,
    pub indoor_max_eirp: PowerDbm,
    /// CPE receiver on the service carrier (uplink).
    pub service_nf: NoiseFigureDb,
    /// mmWave receivers: CPE downlink and donor node uplink.
    pub mmwave_nf: NoiseFigureDb,
    pub service_antenna_gain: GainDb,
    /// Gain of the CPE donor antenna and of the donor node antenna.
    pub mmwave_antenna_gain: GainDb,
    pub mmwave_band: BandConfig,
}

/// Equipment of every method for one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    pub small_cell: SmallCellParams,
    pub l1_repeater: RepeaterParams,
    pub l3_relay: RelayParams,
    /// Absent where the band cannot be bridged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mmwb: Option<BridgeParams>,
}

impl MethodParams {
    /// Equipment column for a band: sub-6 GHz values below 6 GHz, mmWave values above.
    pub fn for_band(band: &BandConfig) -> MethodParams {
        let mmwave = band.f_c.0 > 6e9;
        let pick = |sub6: f64, mmw: f64| if mmwave { mmw } else { sub6 };
        let repeater_gain = GainDb(60.0);
        MethodParams {
            small_cell: SmallCellParams {
                max_eirp: PowerDbm(30.0),
                nf: NoiseFigureDb(pick(7.0, 9.0)),
                antenna_gain: GainDb(pick(6.0, 24.0)),
                p0_nom_pusch: PowerDbm(-105.0),
            },
            l1_repeater: RepeaterParams {
                max_gain: repeater_gain,
                delay: Seconds(1e-6),
                donor_max_eirp: PowerDbm(40.0),
                service_max_eirp: PowerDbm(30.0),
                nf: NoiseFigureDb(9.0),
                donor_gain: GainDb(pick(6.0, 24.0)),
                service_gain: GainDb(pick(6.0, 12.0)),
                isolation: LossDb(repeater_gain.0 + 20.0),
            },
            l3_relay: RelayParams {
                rx_sensitivity_rsrp: PowerDbm(-125.0),
                delay: Seconds(10e-3),
                donor_max_eirp: PowerDbm(40.0),
                service_max_eirp: PowerDbm(30.0),
                nf: NoiseFigureDb(6.0),
                donor_gain: GainDb(pick(6.0, 24.0)),
                service_gain: GainDb(pick(6.0, 12.0)),
                out_of_band: false,
            },
            mmwb: if mmwave {
                None
            } else {
                let mmwave_band = BandConfig::preset(BAND_26G).expect("built-in preset");
                Some(BridgeParams {
                    max_gain: GainDb(60.0),
                    delay: Seconds(50e-6),
                    donor_node_eirp: mmwave_band.gnb_eirp,
                    outdoor_max_eirp: PowerDbm(40.0),
                    indoor_max_eirp: PowerDbm(30.0),
                    service_nf: NoiseFigureDb(7.0),
                    mmwave_nf: NoiseFigureDb(9.0),
                    service_antenna_gain: GainDb(6.0),
                    mmwave_antenna_gain: GainDb(24.0),
                    mmwave_band,
                })
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    Macro,
    SmallCell,
    L1Repeater,
    L3Relay,
    Mmwb,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::Macro,
        MethodId::SmallCell,
        MethodId::L1Repeater,
        MethodId::L3Relay,
        MethodId::Mmwb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Macro => "macro",
            MethodId::SmallCell => "small_cell",
            MethodId::L1Repeater => "l1_repeater",
            MethodId::L3Relay => "l3_relay",
            MethodId::Mmwb => "mmwb",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// ==================== Results ====================

/// Powers at one receiver, in linear watts. Zero means absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionBudget {
    pub signal: Watts,
    pub equipment_noise: Watts,
    pub interference: Watts,
    /// Noise figure of the terminating receiver.
    pub rx_noise_figure: NoiseFigureDb,
}

impl DirectionBudget {
    fn new(signal: PowerDbm, rx_noise_figure: NoiseFigureDb) -> Self {
        Self {
            signal: signal.to_watts(),
            equipment_noise: Watts::ZERO,
            interference: Watts::ZERO,
            rx_noise_figure,
        }
    }

    fn silenced(mut self) -> Self {
        self.signal = Watts::ZERO;
        self
    }
}

/// Radiated level of a transmit stage and its configured ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxStage {
    pub eirp: PowerDbm,
    pub max: PowerDbm,
}

/// Donor hop of a decode-and-forward relay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backhaul {
    pub dl: DirectionBudget,
    pub ul: DirectionBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetResult {
    pub dl: DirectionBudget,
    pub ul: DirectionBudget,
    pub feasible: bool,
    pub backhaul: Option<Backhaul>,
    /// UE transmit power (conducted).
    pub ue_tx: PowerDbm,
    pub node_dl_tx: Option<TxStage>,
    pub node_ul_tx: Option<TxStage>,
}

impl LinkBudgetResult {
    fn direct(dl: DirectionBudget, ul: DirectionBudget, ue_tx: PowerDbm) -> Self {
        Self {
            dl,
            ul,
            feasible: true,
            backhaul: None,
            ue_tx,
            node_dl_tx: None,
            node_ul_tx: None,
        }
    }
}

// ==================== Losses ====================

/// Propagation losses of one building at one carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkLosses {
    /// gNB to building facade.
    pub outdoor: LossDb,
    /// Outdoor to indoor penetration.
    pub entry: LossDb,
    /// Indoor node to UE.
    pub indoor: LossDb,
    pub frequency_out_of_range: bool,
    pub distance_clamped: bool,
}

impl LinkLosses {
    pub fn evaluate(
        sample: &ScenarioSample,
        f_c: Hertz,
        env: &OutdoorEnvironment,
        bel: &BelParams,
    ) -> Result<Self, PropagationError> {
        let outdoor = pathloss_3gpp_clamped(
            Meters(sample.distance_2d),
            f_c,
            sample.los,
            env,
            env.los_correction,
        )?;
        Ok(Self {
            outdoor: outdoor.loss,
            entry: building_entry_loss(f_c, bel)?,
            indoor: fspl(Meters(sample.indoor_distance), f_c)?,
            frequency_out_of_range: outdoor.frequency_out_of_range,
            distance_clamped: outdoor.distance_clamped,
        })
    }
}

// ==================== Power control ====================

/// Open-loop full-allocation PUSCH power for a given coupling loss.
pub fn open_loop_power(
    coupling_loss: LossDb,
    max_tx: PowerDbm,
    p0_nom_pusch: PowerDbm,
    n_prb: u32,
) -> PowerDbm {
    let target = p0_nom_pusch.0 + 10.0 * f64::from(n_prb).log10() + coupling_loss.0;
    PowerDbm(target.min(max_tx.0))
}

/// UE transmit power towards the gNB receiver.
pub fn ul_tx_power(pathloss_total: LossDb, band: &BandConfig) -> PowerDbm {
    open_loop_power(pathloss_total, band.ue_max_tx, band.p0_nom_pusch, band.n_prb)
}

/// Gain that brings `input` up to `ceiling`, limited to `max_gain`.
fn capped_gain(max_gain: GainDb, input: PowerDbm, ceiling: PowerDbm) -> GainDb {
    GainDb(max_gain.0.min(ceiling.0 - input.0))
}

/// Power of all loop echoes after the first pass, summed in closed form.
pub fn self_interference(first_pass: Watts, loop_ratio: f64) -> Watts {
    first_pass * (loop_ratio / (1.0 - loop_ratio))
}

fn loop_ratio(applied_gain: GainDb, isolation: LossDb) -> Result<f64, ModelError> {
    let loop_gain_db = applied_gain.0 - isolation.0;
    if loop_gain_db >= 0.0 {
        return Err(ModelError::RepeaterOscillation { loop_gain_db });
    }
    Ok(db_to_ratio(loop_gain_db))
}

/// Repeater echoes closer than the cyclic prefix combine with the direct signal.
pub fn within_cyclic_prefix(delay: Seconds, t_cp: Seconds) -> bool {
    delay.0 < t_cp.0
}

// ==================== Methods ====================

pub fn macro_link(losses: &LinkLosses, band: &BandConfig) -> LinkBudgetResult {
    let dl_rx = band.gnb_eirp - losses.outdoor - losses.entry + band.ue_antenna_gain;
    let coupling = LossDb(
        losses.outdoor.0 + losses.entry.0 - band.ue_antenna_gain.0 - band.gnb_antenna_gain.0,
    );
    let ue_tx = ul_tx_power(coupling, band);
    LinkBudgetResult::direct(
        DirectionBudget::new(dl_rx, band.ue_nf_dl),
        DirectionBudget::new(ue_tx - coupling, band.gnb_nf_ul),
        ue_tx,
    )
}

pub fn small_cell_link(
    losses: &LinkLosses,
    band: &BandConfig,
    macro_result: &LinkBudgetResult,
    p: &SmallCellParams,
) -> LinkBudgetResult {
    let mut dl = DirectionBudget::new(
        p.max_eirp - losses.indoor + band.ue_antenna_gain,
        band.ue_nf_dl,
    );
    dl.interference = macro_result.dl.signal;
    let coupling = LossDb(losses.indoor.0 - band.ue_antenna_gain.0 - p.antenna_gain.0);
    let ue_tx = open_loop_power(coupling, band.ue_max_tx, p.p0_nom_pusch, band.n_prb);
    let ul = DirectionBudget::new(ue_tx - coupling, p.nf);
    let mut link = LinkBudgetResult::direct(dl, ul, ue_tx);
    link.node_dl_tx = Some(TxStage { eirp: p.max_eirp, max: p.max_eirp });
    link
}

pub fn l1_repeater_link(
    losses: &LinkLosses,
    band: &BandConfig,
    macro_result: &LinkBudgetResult,
    p: &RepeaterParams,
) -> Result<LinkBudgetResult, ModelError> {
    let ue_gain = band.ue_antenna_gain;
    let echoes_combine = within_cyclic_prefix(p.delay, band.t_cp);
    let noise_at_input = thermal_noise_power(band.bandwidth, p.nf);

    // Downlink: gNB -> donor antenna -> amplifier -> service antenna -> UE.
    let dl_in = band.gnb_eirp - losses.outdoor + p.donor_gain;
    let dl_gain = capped_gain(p.max_gain, dl_in, p.service_max_eirp - p.service_gain);
    let dl_eirp = dl_in + dl_gain + p.service_gain;
    let dl_rho = loop_ratio(dl_gain, p.isolation)?;
    let dl_first = (dl_eirp - losses.indoor + ue_gain).to_watts();
    let mut dl = DirectionBudget::new(PowerDbm(f64::NEG_INFINITY), band.ue_nf_dl);
    dl.equipment_noise =
        (noise_at_input + dl_gain + p.service_gain - losses.indoor + ue_gain).to_watts();
    dl.interference = self_interference(dl_first, dl_rho);
    if echoes_combine {
        dl.signal = dl_first + macro_result.dl.signal;
    } else {
        dl.signal = dl_first;
        dl.interference += macro_result.dl.signal;
    }

    // Uplink mirrors the chain; power control sees the chain at full gain.
    let chain_loss = LossDb(
        losses.indoor.0 - ue_gain.0 - p.service_gain.0 - p.max_gain.0 - p.donor_gain.0
            + losses.outdoor.0
            - band.gnb_antenna_gain.0,
    );
    let ue_tx = ul_tx_power(chain_loss, band);
    let ul_in = ue_tx + ue_gain - losses.indoor + p.service_gain;
    let ul_gain = capped_gain(p.max_gain, ul_in, p.donor_max_eirp - p.donor_gain);
    let ul_eirp = ul_in + ul_gain + p.donor_gain;
    let ul_rho = loop_ratio(ul_gain, p.isolation)?;
    let ul_first = (ul_eirp - losses.outdoor + band.gnb_antenna_gain).to_watts();
    let ul_direct =
        (ue_tx + ue_gain - losses.outdoor - losses.entry + band.gnb_antenna_gain).to_watts();
    let mut ul = DirectionBudget::new(PowerDbm(f64::NEG_INFINITY), band.gnb_nf_ul);
    ul.equipment_noise = (noise_at_input + ul_gain + p.donor_gain - losses.outdoor
        + band.gnb_antenna_gain)
        .to_watts();
    ul.interference = self_interference(ul_first, ul_rho);
    if echoes_combine {
        ul.signal = ul_first + ul_direct;
    } else {
        ul.signal = ul_first;
        ul.interference += ul_direct;
    }

    let mut link = LinkBudgetResult::direct(dl, ul, ue_tx);
    link.node_dl_tx = Some(TxStage { eirp: dl_eirp, max: p.service_max_eirp });
    link.node_ul_tx = Some(TxStage { eirp: ul_eirp, max: p.donor_max_eirp });
    Ok(link)
}

/// Reference signal received power of a wideband level spread over `n_prb` blocks.
pub fn rsrp_from_wideband(power: PowerDbm, n_prb: u32) -> PowerDbm {
    PowerDbm(power.0 - ratio_to_db(12.0 * f64::from(n_prb)))
}

pub fn l3_relay_link(
    losses: &LinkLosses,
    band: &BandConfig,
    macro_result: &LinkBudgetResult,
    p: &RelayParams,
) -> LinkBudgetResult {
    let ue_gain = band.ue_antenna_gain;
    let donor_rx = band.gnb_eirp - losses.outdoor + p.donor_gain;
    let feasible = rsrp_from_wideband(donor_rx, band.n_prb).0 >= p.rx_sensitivity_rsrp.0;

    let mut dl = DirectionBudget::new(p.service_max_eirp - losses.indoor + ue_gain, band.ue_nf_dl);
    if !p.out_of_band {
        dl.interference = macro_result.dl.signal;
    }
    let access_coupling = LossDb(losses.indoor.0 - ue_gain.0 - p.service_gain.0);
    let ue_tx = ul_tx_power(access_coupling, band);
    let ul = DirectionBudget::new(ue_tx - access_coupling, p.nf);

    let backhaul_coupling =
        LossDb(losses.outdoor.0 - p.donor_gain.0 - band.gnb_antenna_gain.0);
    let relay_tx = open_loop_power(
        backhaul_coupling,
        p.donor_max_eirp - p.donor_gain,
        band.p0_nom_pusch,
        band.n_prb,
    );
    let backhaul = Backhaul {
        dl: DirectionBudget::new(donor_rx, p.nf),
        ul: DirectionBudget::new(relay_tx - backhaul_coupling, band.gnb_nf_ul),
    };

    let (dl, ul, backhaul) = if feasible {
        (dl, ul, backhaul)
    } else {
        (
            dl.silenced(),
            ul.silenced(),
            Backhaul { dl: backhaul.dl.silenced(), ul: backhaul.ul.silenced() },
        )
    };
    LinkBudgetResult {
        dl,
        ul,
        feasible,
        backhaul: Some(backhaul),
        ue_tx,
        node_dl_tx: Some(TxStage { eirp: p.service_max_eirp, max: p.service_max_eirp }),
        node_ul_tx: Some(TxStage { eirp: relay_tx + p.donor_gain, max: p.donor_max_eirp }),
    }
}

/// Bridge link. `donor_loss` is the outdoor loss at the mmWave carrier.
pub fn mmwb_link(
    losses: &LinkLosses,
    donor_loss: LossDb,
    band: &BandConfig,
    macro_result: &LinkBudgetResult,
    p: &BridgeParams,
) -> LinkBudgetResult {
    let ue_gain = band.ue_antenna_gain;

    // Downlink: donor node -> mmWave link -> CPE -> service carrier -> UE.
    let cpe_in = p.donor_node_eirp - donor_loss + p.mmwave_antenna_gain;
    let dl_gain = capped_gain(p.max_gain, cpe_in, p.indoor_max_eirp);
    let indoor_eirp = cpe_in + dl_gain;
    let mut dl = DirectionBudget::new(indoor_eirp - losses.indoor + ue_gain, band.ue_nf_dl);
    dl.equipment_noise = (thermal_noise_power(band.bandwidth, p.mmwave_nf) + dl_gain
        - losses.indoor
        + ue_gain)
        .to_watts();
    dl.interference = macro_result.dl.signal;

    // Uplink: UE -> CPE -> mmWave link -> donor node receiver.
    let chain_loss = LossDb(
        losses.indoor.0 - ue_gain.0 - p.service_antenna_gain.0 - p.max_gain.0 + donor_loss.0
            - p.mmwave_antenna_gain.0,
    );
    let ue_tx = ul_tx_power(chain_loss, band);
    let cpe_ul_in = ue_tx + ue_gain - losses.indoor + p.service_antenna_gain;
    let ul_gain = capped_gain(p.max_gain, cpe_ul_in, p.outdoor_max_eirp);
    let outdoor_eirp = cpe_ul_in + ul_gain;
    let mut ul =
        DirectionBudget::new(outdoor_eirp - donor_loss + p.mmwave_antenna_gain, p.mmwave_nf);
    ul.equipment_noise = (thermal_noise_power(band.bandwidth, p.service_nf) + ul_gain
        - donor_loss
        + p.mmwave_antenna_gain)
        .to_watts();

    let mut link = LinkBudgetResult::direct(dl, ul, ue_tx);
    link.node_dl_tx = Some(TxStage { eirp: indoor_eirp, max: p.indoor_max_eirp });
    link.node_ul_tx = Some(TxStage { eirp: outdoor_eirp, max: p.outdoor_max_eirp });
    link
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn band36() -> BandConfig {
        BandConfig::preset(BAND_3G6).unwrap()
    }

    fn band26() -> BandConfig {
        BandConfig::preset(BAND_26G).unwrap()
    }

    fn losses(outdoor: f64, entry: f64, indoor: f64) -> LinkLosses {
        LinkLosses {
            outdoor: LossDb(outdoor),
            entry: LossDb(entry),
            indoor: LossDb(indoor),
            frequency_out_of_range: false,
            distance_clamped: false,
        }
    }

    fn dbm(w: Watts) -> f64 {
        w.to_dbm().0
    }

    #[test]
    fn presets_match_table_values() {
        let b = band36();
        assert_abs_diff_eq!(b.gnb_eirp.0, 58.169, epsilon = 1e-3);
        assert_eq!(b.numerology(), Some(1));
        assert_eq!(b.t_cp, Seconds(2.3e-6));
        let b = band26();
        assert_abs_diff_eq!(b.gnb_eirp.0, 60.0, epsilon = 1e-12);
        assert_eq!(b.numerology(), Some(3));
        assert_eq!(b.ue_antenna_gain, GainDb(9.0));
        assert!(BandConfig::preset("5GHz").is_none());
        assert_eq!(BandConfig::preset(BAND_39G).unwrap().f_c, Hertz(39e9));
    }

    #[test]
    fn equipment_columns() {
        let sub6 = MethodParams::for_band(&band36());
        let mmw = MethodParams::for_band(&band26());
        assert_eq!(sub6.small_cell.nf, NoiseFigureDb(7.0));
        assert_eq!(mmw.small_cell.antenna_gain, GainDb(24.0));
        assert_eq!(mmw.l1_repeater.service_gain, GainDb(12.0));
        assert_eq!(sub6.l1_repeater.isolation, LossDb(80.0));
        assert_eq!(mmw.l3_relay.donor_gain, GainDb(24.0));
        assert!(sub6.mmwb.is_some());
        assert!(mmw.mmwb.is_none());
    }

    #[test]
    fn macro_downlink_chain() {
        let mut band = band36();
        band.gnb_eirp = PowerDbm(58.2);
        let link = macro_link(&losses(100.0, 15.8, 0.0), &band);
        assert_abs_diff_eq!(dbm(link.dl.signal), -54.6, epsilon = 1e-9);
        assert!(link.dl.interference.is_zero());
        assert!(link.dl.equipment_noise.is_zero());
        let link = macro_link(&losses(0.0, 0.0, 0.0), &band);
        assert_abs_diff_eq!(dbm(link.dl.signal), 58.2 + 3.0, epsilon = 1e-9);
    }

    #[test]
    fn macro_ignores_indoor_loss() {
        let band = band36();
        let a = macro_link(&losses(110.0, 15.8, 40.0), &band);
        let b = macro_link(&losses(110.0, 15.8, 60.0), &band);
        assert_eq!(a, b);
    }

    #[test]
    fn small_cell_downlink() {
        let band = band36();
        let indoor = fspl(Meters(2.0), band.f_c).unwrap();
        let l = LinkLosses { indoor, ..losses(110.0, 15.8, 0.0) };
        let m = macro_link(&l, &band);
        let p = MethodParams::for_band(&band).small_cell;
        let sc = small_cell_link(&l, &band, &m, &p);
        assert_abs_diff_eq!(dbm(sc.dl.signal), -16.594, epsilon = 1e-3);
        assert_eq!(sc.dl.interference, m.dl.signal);
        assert!(sc.dl.equipment_noise.is_zero());
    }

    #[test]
    fn small_cell_interference_vanishes_deep_indoors() {
        let band = band36();
        let l = losses(110.0, 400.0, 50.0);
        let m = macro_link(&l, &band);
        let sc = small_cell_link(&l, &band, &m, &MethodParams::for_band(&band).small_cell);
        assert!(sc.dl.interference.0 < 1e-40);
    }

    #[test]
    fn power_control_examples() {
        let band = band36();
        assert_abs_diff_eq!(ul_tx_power(LossDb(120.0), &band).0, 23.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ul_tx_power(LossDb(90.0), &band).0, 9.36, epsilon = 5e-3);
        assert_abs_diff_eq!(
            ul_tx_power(LossDb(0.0), &band).0,
            -105.0 + 10.0 * 273f64.log10(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn self_interference_closed_form() {
        let p = self_interference(PowerDbm(0.0).to_watts(), db_to_ratio(-20.0));
        assert_abs_diff_eq!(dbm(p), -19.956, epsilon = 1e-3);
    }

    #[test]
    fn repeater_branch_follows_cyclic_prefix() {
        // 1 us against 2.3 us and 0.6 us.
        let p36 = MethodParams::for_band(&band36()).l1_repeater;
        assert!(within_cyclic_prefix(p36.delay, band36().t_cp));
        assert!(!within_cyclic_prefix(p36.delay, band26().t_cp));

        let band = band36();
        let l = losses(110.0, 15.8, 55.0);
        let m = macro_link(&l, &band);
        let inside = l1_repeater_link(&l, &band, &m, &p36).unwrap();
        let late = RepeaterParams { delay: Seconds(3e-6), ..p36.clone() };
        let outside = l1_repeater_link(&l, &band, &m, &late).unwrap();
        assert_abs_diff_eq!(
            inside.dl.signal.0,
            outside.dl.signal.0 + m.dl.signal.0,
            epsilon = 1e-18
        );
        assert_abs_diff_eq!(
            outside.dl.interference.0,
            inside.dl.interference.0 + m.dl.signal.0,
            epsilon = 1e-18
        );
    }

    #[test]
    fn repeater_gain_capped_by_service_eirp() {
        let band = band36();
        let p = MethodParams::for_band(&band).l1_repeater;
        let m = macro_link(&losses(70.0, 15.8, 50.0), &band);
        let near = l1_repeater_link(&losses(70.0, 15.8, 50.0), &band, &m, &p).unwrap();
        let tx = near.node_dl_tx.unwrap();
        assert_abs_diff_eq!(tx.eirp.0, 30.0, epsilon = 1e-9);
        let m = macro_link(&losses(140.0, 15.8, 50.0), &band);
        let far = l1_repeater_link(&losses(140.0, 15.8, 50.0), &band, &m, &p).unwrap();
        let tx = far.node_dl_tx.unwrap();
        assert_abs_diff_eq!(tx.eirp.0, band.gnb_eirp.0 - 140.0 + 6.0 + 60.0 + 6.0, epsilon = 1e-9);
    }

    #[test]
    fn repeater_oscillation_is_an_error() {
        let band = band36();
        let p = RepeaterParams { isolation: LossDb(50.0), ..MethodParams::for_band(&band).l1_repeater };
        let l = losses(140.0, 15.8, 50.0);
        let m = macro_link(&l, &band);
        let err = l1_repeater_link(&l, &band, &m, &p).unwrap_err();
        assert!(matches!(err, ModelError::RepeaterOscillation { .. }));
    }

    #[test]
    fn relay_threshold() {
        let band = band36();
        let p = MethodParams::for_band(&band).l3_relay;
        let offset = ratio_to_db(12.0 * 273.0);
        // Outdoor loss that leaves the donor RSRP exactly at -125.01 dBm.
        let outdoor = band.gnb_eirp.0 + 6.0 - offset + 125.01;
        let l = losses(outdoor, 15.8, 50.0);
        let m = macro_link(&l, &band);
        let r = l3_relay_link(&l, &band, &m, &p);
        assert!(!r.feasible);
        assert!(r.dl.signal.is_zero() && r.ul.signal.is_zero());
        let l = losses(outdoor - 0.02, 15.8, 50.0);
        let r = l3_relay_link(&l, &band, &macro_link(&l, &band), &p);
        assert!(r.feasible);
        assert_abs_diff_eq!(dbm(r.dl.signal), 30.0 - 50.0 + 3.0, epsilon = 1e-9);
    }

    #[test]
    fn relay_interference_switch() {
        let band = band36();
        let l = losses(100.0, 15.8, 50.0);
        let m = macro_link(&l, &band);
        let p = MethodParams::for_band(&band).l3_relay;
        assert_eq!(l3_relay_link(&l, &band, &m, &p).dl.interference, m.dl.signal);
        let oob = RelayParams { out_of_band: true, ..p };
        assert_eq!(l3_relay_link(&l, &band, &m, &oob).dl.interference, Watts::ZERO);
    }

    fn bridge_40() -> BridgeParams {
        let mut p = MethodParams::for_band(&band36()).mmwb.unwrap();
        p.donor_node_eirp = PowerDbm(40.0);
        p
    }

    #[test]
    fn bridge_cascade_uncapped() {
        let band = band36();
        let l = losses(110.0, 15.8, 50.0);
        let m = macro_link(&l, &band);
        let link = mmwb_link(&l, LossDb(110.0), &band, &m, &bridge_40());
        let tx = link.node_dl_tx.unwrap();
        assert_abs_diff_eq!(tx.eirp.0, 14.0, epsilon = 1e-9);
        assert_abs_diff_eq!(dbm(link.dl.signal), 14.0 - 50.0 + 3.0, epsilon = 1e-9);
        assert_eq!(link.dl.interference, m.dl.signal);
    }

    #[test]
    fn bridge_cascade_capped() {
        let band = band36();
        let l = losses(110.0, 15.8, 50.0);
        let m = macro_link(&l, &band);
        let link = mmwb_link(&l, LossDb(50.0), &band, &m, &bridge_40());
        assert_abs_diff_eq!(link.node_dl_tx.unwrap().eirp.0, 30.0, epsilon = 1e-9);
        // CPE input +14 dBm leaves 16 dB of gain.
        let expected_noise = thermal_noise_power(band.bandwidth, NoiseFigureDb(9.0)).0 + 16.0 - 50.0 + 3.0;
        assert_abs_diff_eq!(dbm(link.dl.equipment_noise), expected_noise, epsilon = 1e-9);
    }

    #[test]
    fn rsrp_offset() {
        assert_abs_diff_eq!(
            rsrp_from_wideband(PowerDbm(-90.0), 273).0,
            -90.0 - 35.154,
            epsilon = 1e-3
        );
    }
}
