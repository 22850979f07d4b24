//! Unit-safe decibel and linear power arithmetic.
//!
//! Powers travel through the link models as [`Watts`]; dB quantities only
//! appear at parameter boundaries and in reports.

use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise power spectral density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DENSITY_DBM_PER_HZ: f64 = -174.0;

pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn ratio_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Anything expressed as a power ratio in dB.
pub trait Decibel: Copy {
    fn db(self) -> f64;
}

/// Converts a gain, loss or noise figure to its linear power ratio.
pub fn db_to_linear<T: Decibel>(x: T) -> f64 {
    db_to_ratio(x.db())
}

macro_rules! decibel_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl $name {
            pub const fn new(db: f64) -> Self {
                Self(db)
            }

            pub fn linear(self) -> f64 {
                db_to_ratio(self.0)
            }
        }

        impl Decibel for $name {
            fn db(self) -> f64 {
                self.0
            }
        }

        impl Add for $name {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                Self(self.0 + rhs.0)
            }
        }

        impl Sub for $name {
            type Output = Self;
            fn sub(self, rhs: Self) -> Self {
                Self(self.0 - rhs.0)
            }
        }
    };
}

decibel_newtype!(
    /// Gain in dB (dBi for antennas).
    GainDb
);
decibel_newtype!(
    /// Attenuation in dB; positive values attenuate.
    LossDb
);
decibel_newtype!(NoiseFigureDb);

impl Neg for GainDb {
    type Output = GainDb;
    fn neg(self) -> GainDb {
        GainDb(-self.0)
    }
}

/// Absolute power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm(pub f64);

impl PowerDbm {
    pub const fn new(dbm: f64) -> Self {
        Self(dbm)
    }

    pub fn to_watts(self) -> Watts {
        dbm_to_watts(self)
    }

    pub fn from_watts(w: Watts) -> Self {
        w.to_dbm()
    }
}

pub fn dbm_to_watts(p: PowerDbm) -> Watts {
    Watts(1e-3 * db_to_ratio(p.0))
}

impl Add<GainDb> for PowerDbm {
    type Output = PowerDbm;
    fn add(self, g: GainDb) -> PowerDbm {
        PowerDbm(self.0 + g.0)
    }
}

impl Sub<GainDb> for PowerDbm {
    type Output = PowerDbm;
    fn sub(self, g: GainDb) -> PowerDbm {
        PowerDbm(self.0 - g.0)
    }
}

impl Sub<LossDb> for PowerDbm {
    type Output = PowerDbm;
    fn sub(self, l: LossDb) -> PowerDbm {
        PowerDbm(self.0 - l.0)
    }
}

impl Add<NoiseFigureDb> for PowerDbm {
    type Output = PowerDbm;
    fn add(self, nf: NoiseFigureDb) -> PowerDbm {
        PowerDbm(self.0 + nf.0)
    }
}

/// Level difference between two powers.
impl Sub for PowerDbm {
    type Output = GainDb;
    fn sub(self, rhs: PowerDbm) -> GainDb {
        GainDb(self.0 - rhs.0)
    }
}

/// Linear power. Zero encodes an absent contribution.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Watts(pub f64);

impl Watts {
    pub const ZERO: Watts = Watts(0.0);

    pub fn to_dbm(self) -> PowerDbm {
        PowerDbm(ratio_to_db(self.0 * 1e3))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

impl Add for Watts {
    type Output = Watts;
    fn add(self, rhs: Watts) -> Watts {
        Watts(self.0 + rhs.0)
    }
}

impl AddAssign for Watts {
    fn add_assign(&mut self, rhs: Watts) {
        self.0 += rhs.0;
    }
}

impl Mul<f64> for Watts {
    type Output = Watts;
    fn mul(self, k: f64) -> Watts {
        Watts(self.0 * k)
    }
}

impl Sum for Watts {
    fn sum<I: Iterator<Item = Watts>>(iter: I) -> Watts {
        iter.fold(Watts::ZERO, Add::add)
    }
}

/// Sums dBm levels in the linear domain.
pub fn sum_dbm(levels: &[PowerDbm]) -> PowerDbm {
    levels.iter().map(|p| p.to_watts()).sum::<Watts>().to_dbm()
}

macro_rules! scalar_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub f64);

        impl $name {
            pub const fn new(v: f64) -> Self {
                Self(v)
            }

            pub fn value(self) -> f64 {
                self.0
            }
        }
    };
}

scalar_newtype!(
    /// Frequency or bandwidth in Hz.
    Hertz
);
scalar_newtype!(Meters);
scalar_newtype!(Seconds);

impl Hertz {
    pub fn ghz(self) -> f64 {
        self.0 * 1e-9
    }
}

/// Thermal noise power of a receiver with bandwidth `b` and noise figure `nf`.
pub fn thermal_noise_power(b: Hertz, nf: NoiseFigureDb) -> PowerDbm {
    PowerDbm(THERMAL_NOISE_DENSITY_DBM_PER_HZ + 10.0 * b.0.log10() + nf.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn decibel_to_linear() {
        assert_eq!(db_to_linear(GainDb(0.0)), 1.0);
        assert_abs_diff_eq!(db_to_linear(LossDb(10.0)), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(db_to_linear(NoiseFigureDb(3.0)), 1.9953, epsilon = 5e-5);
    }

    #[test]
    fn dbm_reference_levels() {
        assert_abs_diff_eq!(dbm_to_watts(PowerDbm(0.0)).0, 1e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(dbm_to_watts(PowerDbm(30.0)).0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dbm_to_watts(PowerDbm(23.0)).0, 0.1995, epsilon = 5e-5);
    }

    #[test]
    fn thermal_noise_examples() {
        assert_abs_diff_eq!(
            thermal_noise_power(Hertz(1.0), NoiseFigureDb(0.0)).0,
            -174.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            thermal_noise_power(Hertz(100e6), NoiseFigureDb(0.0)).0,
            -94.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            thermal_noise_power(Hertz(400e6), NoiseFigureDb(9.0)).0,
            -78.98,
            epsilon = 5e-3
        );
    }

    #[test]
    fn powers_add_linearly() {
        let total = sum_dbm(&[PowerDbm(0.0), PowerDbm(0.0)]);
        assert_abs_diff_eq!(total.0, 3.0103, epsilon = 1e-4);
    }

    #[test]
    fn zero_watts_is_minus_infinity_dbm() {
        assert_eq!(Watts::ZERO.to_dbm().0, f64::NEG_INFINITY);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn dbm_watts_round_trip(p in -300.0f64..300.0) {
            let back = dbm_to_watts(PowerDbm(p)).to_dbm().0;
            prop_assert!((back - p).abs() <= 1e-9 * p.abs().max(1.0));
        }

        #[test]
        fn db_ratio_round_trip(x in -300.0f64..300.0) {
            let back = ratio_to_db(db_to_linear(GainDb(x)));
            prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0));
        }

        #[test]
        fn noise_is_additive_in_nf(b in 1.0f64..1e10, nf in 0.0f64..30.0) {
            let with_nf = thermal_noise_power(Hertz(b), NoiseFigureDb(nf)).0;
            let without = thermal_noise_power(Hertz(b), NoiseFigureDb(0.0)).0;
            prop_assert_eq!(with_nf, without + nf);
        }

        #[test]
        fn noise_increases_with_bandwidth(b in 1.0f64..1e10, k in 1.0001f64..100.0) {
            let lo = thermal_noise_power(Hertz(b), NoiseFigureDb(5.0)).0;
            let hi = thermal_noise_power(Hertz(b * k), NoiseFigureDb(5.0)).0;
            prop_assert!(hi > lo);
        }
    }
}
