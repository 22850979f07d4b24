//! Outdoor path loss (free space, TR 38.901 RMa/UMa) and ITU-R P.2109-0
//! building entry loss.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::rfmath::{Hertz, LossDb, Meters, SPEED_OF_LIGHT};

/// Smallest 2-D distance covered by the TR 38.901 macro formulas.
pub const MIN_DISTANCE_2D: f64 = 10.0;

/// Scale of the empirical LOS correction term, per Hz.
pub const LOS_CORRECTION_SCALE: f64 = 8.78e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("link distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("2-D distance {0} m is below the {MIN_DISTANCE_2D} m model floor")]
    DistanceBelowFloor(f64),
    #[error("carrier frequency must be positive and finite, got {0} Hz")]
    InvalidFrequency(f64),
    #[error("building entry loss is defined for 0.08-100 GHz, got {0} GHz")]
    FrequencyOutsideEntryLossRange(f64),
    #[error("entry loss probability must lie strictly inside (0, 1), got {0}")]
    ProbabilityOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosCondition {
    Los,
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathLossModel {
    #[serde(rename = "rma")]
    RMa,
    #[serde(rename = "uma")]
    UMa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutdoorEnvironment {
    pub model: PathLossModel,
    /// Base station antenna height, m.
    pub h_bs: f64,
    /// User terminal height, m.
    pub h_ut: f64,
    /// Average street width, m (RMa NLOS only).
    pub street_width: f64,
    /// Average building height, m (RMa only).
    pub building_height: f64,
    /// Adds the empirical LOS correction on LOS links.
    #[serde(default)]
    pub los_correction: bool,
}

impl Default for OutdoorEnvironment {
    fn default() -> Self {
        Self {
            model: PathLossModel::RMa,
            h_bs: 30.0,
            h_ut: 2.0,
            street_width: 20.0,
            building_height: 10.0,
            los_correction: false,
        }
    }
}

/// Outcome of an outdoor path-loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub loss: LossDb,
    /// Shadow-fading standard deviation of the selected formula, dB. Not applied.
    pub shadow_fading_std_db: f64,
    /// Carrier lies outside the stated frequency range of the model.
    pub frequency_out_of_range: bool,
    /// Input distance was raised to the model floor.
    pub distance_clamped: bool,
}

/// Free-space path loss.
pub fn fspl(d: Meters, f_c: Hertz) -> Result<LossDb, PropagationError> {
    if !(d.0 > 0.0) {
        return Err(PropagationError::NonPositiveDistance(d.0));
    }
    check_frequency(f_c)?;
    Ok(LossDb(20.0 * (4.0 * PI * d.0 * f_c.0 / SPEED_OF_LIGHT).log10()))
}

/// Empirical LOS correction added on top of the macro path loss.
pub fn los_correction_db(f_c: Hertz) -> f64 {
    10.0 * (LOS_CORRECTION_SCALE * f_c.0).log10()
}

fn check_frequency(f_c: Hertz) -> Result<(), PropagationError> {
    if f_c.0 > 0.0 && f_c.0.is_finite() {
        Ok(())
    } else {
        Err(PropagationError::InvalidFrequency(f_c.0))
    }
}

/// TR 38.901 macro path loss. Distances below the 10 m floor are rejected.
pub fn pathloss_3gpp(
    d2d: Meters,
    f_c: Hertz,
    cond: LosCondition,
    env: &OutdoorEnvironment,
    los_correction: bool,
) -> Result<PathLoss, PropagationError> {
    if !(d2d.0 >= MIN_DISTANCE_2D) {
        return Err(PropagationError::DistanceBelowFloor(d2d.0));
    }
    check_frequency(f_c)?;
    Ok(evaluate(d2d.0, f_c, cond, env, los_correction))
}

/// Like [`pathloss_3gpp`] but raises distances below the floor to 10 m and flags them.
pub fn pathloss_3gpp_clamped(
    d2d: Meters,
    f_c: Hertz,
    cond: LosCondition,
    env: &OutdoorEnvironment,
    los_correction: bool,
) -> Result<PathLoss, PropagationError> {
    if !(d2d.0 > 0.0) {
        return Err(PropagationError::NonPositiveDistance(d2d.0));
    }
    check_frequency(f_c)?;
    let clamped = d2d.0 < MIN_DISTANCE_2D;
    let mut pl = evaluate(d2d.0.max(MIN_DISTANCE_2D), f_c, cond, env, los_correction);
    pl.distance_clamped = clamped;
    Ok(pl)
}

fn evaluate(
    d2d: f64,
    f_c: Hertz,
    cond: LosCondition,
    env: &OutdoorEnvironment,
    los_correction: bool,
) -> PathLoss {
    let (mut los, los_sigma) = match env.model {
        PathLossModel::RMa => rma_los(d2d, f_c, env),
        PathLossModel::UMa => uma_los(d2d, f_c, env),
    };
    if los_correction {
        los += los_correction_db(f_c);
    }
    let (loss, sigma) = match cond {
        LosCondition::Los => (los, los_sigma),
        LosCondition::Nlos => {
            let (nlos, sigma) = match env.model {
                PathLossModel::RMa => (rma_nlos_prime(d2d, f_c, env), 8.0),
                PathLossModel::UMa => (uma_nlos_prime(d2d, f_c, env), 6.0),
            };
            (los.max(nlos), sigma)
        }
    };
    let (f_lo, f_hi) = match env.model {
        PathLossModel::RMa => (0.5, 7.0),
        PathLossModel::UMa => (0.5, 100.0),
    };
    let ghz = f_c.ghz();
    PathLoss {
        loss: LossDb(loss),
        shadow_fading_std_db: sigma,
        frequency_out_of_range: ghz < f_lo || ghz > f_hi,
        distance_clamped: false,
    }
}

fn distance_3d(d2d: f64, env: &OutdoorEnvironment) -> f64 {
    d2d.hypot(env.h_bs - env.h_ut)
}

fn rma_pl1(d3d: f64, fc_ghz: f64, h: f64) -> f64 {
    20.0 * (40.0 * PI * d3d * fc_ghz / 3.0).log10() + (0.03 * h.powf(1.72)).min(10.0) * d3d.log10()
        - (0.044 * h.powf(1.72)).min(14.77)
        + 0.002 * h.log10() * d3d
}

fn rma_los(d2d: f64, f_c: Hertz, env: &OutdoorEnvironment) -> (f64, f64) {
    let fc_ghz = f_c.ghz();
    let h = env.building_height;
    let d_bp = 2.0 * PI * env.h_bs * env.h_ut * f_c.0 / SPEED_OF_LIGHT;
    let d3d = distance_3d(d2d, env);
    if d2d <= d_bp {
        (rma_pl1(d3d, fc_ghz, h), 4.0)
    } else {
        // Anchored at the 3-D breakpoint distance so both branches meet.
        let d3d_bp = distance_3d(d_bp, env);
        (rma_pl1(d3d_bp, fc_ghz, h) + 40.0 * (d3d / d3d_bp).log10(), 6.0)
    }
}

fn rma_nlos_prime(d2d: f64, f_c: Hertz, env: &OutdoorEnvironment) -> f64 {
    let (w, h, h_bs, h_ut) = (env.street_width, env.building_height, env.h_bs, env.h_ut);
    let d3d = distance_3d(d2d, env);
    161.04 - 7.1 * w.log10() + 7.5 * h.log10()
        - (24.37 - 3.7 * (h / h_bs).powi(2)) * h_bs.log10()
        + (43.42 - 3.1 * h_bs.log10()) * (d3d.log10() - 3.0)
        + 20.0 * f_c.ghz().log10()
        - (3.2 * (11.75 * h_ut).log10().powi(2) - 4.97)
}

fn uma_los(d2d: f64, f_c: Hertz, env: &OutdoorEnvironment) -> (f64, f64) {
    let fc_ghz = f_c.ghz();
    let d_bp = 4.0 * (env.h_bs - 1.0) * (env.h_ut - 1.0) * f_c.0 / SPEED_OF_LIGHT;
    let d3d = distance_3d(d2d, env);
    let pl = if d2d <= d_bp {
        28.0 + 22.0 * d3d.log10() + 20.0 * fc_ghz.log10()
    } else {
        28.0 + 40.0 * d3d.log10() + 20.0 * fc_ghz.log10()
            - 9.0 * (d_bp.powi(2) + (env.h_bs - env.h_ut).powi(2)).log10()
    };
    (pl, 4.0)
}

fn uma_nlos_prime(d2d: f64, f_c: Hertz, env: &OutdoorEnvironment) -> f64 {
    let d3d = distance_3d(d2d, env);
    13.54 + 39.08 * d3d.log10() + 20.0 * f_c.ghz().log10() - 0.6 * (env.h_ut - 1.5)
}

// ==================== Building entry loss ====================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingClass {
    Traditional,
    /// Thermally efficient construction.
    Modern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BelParams {
    pub probability: f64,
    pub building_class: BuildingClass,
    pub elevation_deg: f64,
}

impl Default for BelParams {
    fn default() -> Self {
        Self {
            probability: 0.5,
            building_class: BuildingClass::Traditional,
            elevation_deg: 0.0,
        }
    }
}

struct EntryLossCoefficients {
    r: f64,
    s: f64,
    t: f64,
    u: f64,
    v: f64,
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl BuildingClass {
    fn coefficients(self) -> EntryLossCoefficients {
        match self {
            BuildingClass::Traditional => EntryLossCoefficients {
                r: 12.64,
                s: 3.72,
                t: 0.96,
                u: 9.6,
                v: 2.0,
                w: 9.1,
                x: -3.0,
                y: 4.5,
                z: -2.0,
            },
            BuildingClass::Modern => EntryLossCoefficients {
                r: 28.19,
                s: -3.00,
                t: 8.48,
                u: 13.5,
                v: 3.8,
                w: 27.8,
                x: -2.9,
                y: 9.4,
                z: -2.1,
            },
        }
    }
}

fn standard_normal_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(p)
}

/// Building entry loss not exceeded with probability `bel.probability`.
pub fn building_entry_loss(f_c: Hertz, bel: &BelParams) -> Result<LossDb, PropagationError> {
    check_frequency(f_c)?;
    let f = f_c.ghz();
    if !(0.08..=100.0).contains(&f) {
        return Err(PropagationError::FrequencyOutsideEntryLossRange(f));
    }
    let p = bel.probability;
    if !(p > 0.0 && p < 1.0) {
        return Err(PropagationError::ProbabilityOutOfRange(p));
    }
    let c = bel.building_class.coefficients();
    let lf = f.log10();
    let horizontal = c.r + c.s * lf + c.t * lf * lf;
    let elevation = 0.212 * bel.elevation_deg.abs();
    let mu1 = horizontal + elevation;
    let mu2 = c.w + c.x * lf;
    let sigma1 = c.u + c.v * lf;
    let sigma2 = c.y + c.z * lf;
    let q = standard_normal_quantile(p);
    let a = q * sigma1 + mu1;
    let b = q * sigma2 + mu2;
    let floor = -3.0f64;
    let total = 10f64.powf(0.1 * a) + 10f64.powf(0.1 * b) + 10f64.powf(0.1 * floor);
    Ok(LossDb(10.0 * total.log10()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const F36: Hertz = Hertz(3.6e9);

    #[test]
    fn fspl_unit_argument_is_zero() {
        let d = SPEED_OF_LIGHT / (4.0 * PI * F36.0);
        assert_abs_diff_eq!(fspl(Meters(d), F36).unwrap().0, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn fspl_reference_points() {
        assert_abs_diff_eq!(fspl(Meters(10.0), F36).unwrap().0, 63.574, epsilon = 1e-3);
        assert_abs_diff_eq!(fspl(Meters(2.0), F36).unwrap().0, 49.594, epsilon = 1e-3);
        let d1 = fspl(Meters(37.0), F36).unwrap().0;
        let d2 = fspl(Meters(74.0), F36).unwrap().0;
        assert_abs_diff_eq!(d2 - d1, 6.0206, epsilon = 1e-4);
    }

    #[test]
    fn fspl_rejects_non_positive_distance() {
        assert_eq!(fspl(Meters(0.0), F36), Err(PropagationError::NonPositiveDistance(0.0)));
        assert!(fspl(Meters(-1.0), F36).is_err());
    }

    #[test]
    fn rejects_distance_below_floor() {
        let env = OutdoorEnvironment::default();
        let err = pathloss_3gpp(Meters(9.99), F36, LosCondition::Los, &env, false).unwrap_err();
        assert_eq!(err, PropagationError::DistanceBelowFloor(9.99));
    }

    #[test]
    fn clamped_variant_flags_short_distances() {
        let env = OutdoorEnvironment::default();
        let short = pathloss_3gpp_clamped(Meters(3.0), F36, LosCondition::Los, &env, false).unwrap();
        let floor = pathloss_3gpp(Meters(10.0), F36, LosCondition::Los, &env, false).unwrap();
        assert!(short.distance_clamped);
        assert_eq!(short.loss, floor.loss);
        assert!(!floor.distance_clamped);
    }

    #[test]
    fn rma_flags_mmwave_use() {
        let env = OutdoorEnvironment::default();
        let pl = pathloss_3gpp(Meters(200.0), Hertz(26e9), LosCondition::Los, &env, false).unwrap();
        assert!(pl.frequency_out_of_range);
        let pl = pathloss_3gpp(Meters(200.0), F36, LosCondition::Los, &env, false).unwrap();
        assert!(!pl.frequency_out_of_range);
    }

    #[test]
    fn los_correction_values() {
        assert_abs_diff_eq!(los_correction_db(F36), 10.0 * 31.608f64.log10(), epsilon = 1e-3);
        assert_abs_diff_eq!(los_correction_db(F36), 15.0, epsilon = 0.01);
        assert_abs_diff_eq!(los_correction_db(Hertz(26e9)), 23.58, epsilon = 0.01);
    }

    #[test]
    fn los_correction_only_touches_los() {
        let env = OutdoorEnvironment::default();
        let plain = pathloss_3gpp(Meters(800.0), F36, LosCondition::Nlos, &env, false).unwrap();
        let corr = pathloss_3gpp(Meters(800.0), F36, LosCondition::Nlos, &env, true).unwrap();
        assert_eq!(plain.loss, corr.loss);
    }

    #[test]
    fn shadow_fading_sigmas() {
        let env = OutdoorEnvironment::default();
        let near = pathloss_3gpp(Meters(100.0), F36, LosCondition::Los, &env, false).unwrap();
        let far = pathloss_3gpp(Meters(5000.0), F36, LosCondition::Los, &env, false).unwrap();
        let nlos = pathloss_3gpp(Meters(100.0), F36, LosCondition::Nlos, &env, false).unwrap();
        assert_eq!(near.shadow_fading_std_db, 4.0);
        assert_eq!(far.shadow_fading_std_db, 6.0);
        assert_eq!(nlos.shadow_fading_std_db, 8.0);
    }

    #[test]
    fn entry_loss_median_points() {
        let bel = BelParams::default();
        let l36 = building_entry_loss(F36, &bel).unwrap().0;
        let l26 = building_entry_loss(Hertz(26e9), &bel).unwrap().0;
        assert_abs_diff_eq!(l36, 15.8, epsilon = 0.05);
        assert!(l26 > l36);
    }

    #[test]
    fn entry_loss_monotone_in_probability() {
        let at = |p| {
            building_entry_loss(F36, &BelParams { probability: p, ..BelParams::default() })
                .unwrap()
                .0
        };
        assert!(at(0.99) > at(0.5));
        assert!(at(0.5) > at(0.01));
    }

    #[test]
    fn entry_loss_rejects_bad_inputs() {
        let bel = BelParams::default();
        assert!(matches!(
            building_entry_loss(Hertz(50e6), &bel),
            Err(PropagationError::FrequencyOutsideEntryLossRange(_))
        ));
        assert!(building_entry_loss(Hertz(101e9), &bel).is_err());
        for p in [0.0, 1.0, -0.2, 1.5] {
            let bel = BelParams { probability: p, ..BelParams::default() };
            assert_eq!(
                building_entry_loss(F36, &bel),
                Err(PropagationError::ProbabilityOutOfRange(p))
            );
        }
    }

    #[test]
    fn modern_buildings_attenuate_more() {
        let modern = BelParams { building_class: BuildingClass::Modern, ..BelParams::default() };
        let trad = building_entry_loss(Hertz(26e9), &BelParams::default()).unwrap();
        let modern = building_entry_loss(Hertz(26e9), &modern).unwrap();
        assert!(modern.0 > trad.0 + 20.0);
    }

    #[test]
    fn elevation_adds_loss() {
        let tilted = BelParams { elevation_deg: -20.0, ..BelParams::default() };
        let flat = building_entry_loss(F36, &BelParams::default()).unwrap();
        let tilted = building_entry_loss(F36, &tilted).unwrap();
        assert!(tilted.0 > flat.0);
    }
}
