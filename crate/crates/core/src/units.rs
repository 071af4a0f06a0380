//! Atomic-unit conversions. Every physical constant used by the crate is
//! defined here once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant in Hartree per kelvin.
pub const HARTREE_PER_KELVIN: f64 = 3.166_811_563e-6;
/// One atomic unit of time in femtoseconds.
pub const FS_PER_AU_TIME: f64 = 0.024_188_842_54;
/// Wavenumbers per Hartree.
pub const CM1_PER_HARTREE: f64 = 219_474.631_363_2;
/// Electron-volts per Hartree.
pub const EV_PER_HARTREE: f64 = 27.211_386_245_988;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub hartree_per_kelvin: f64,
    pub fs_per_au_time: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self {
            hartree_per_kelvin: HARTREE_PER_KELVIN,
            fs_per_au_time: FS_PER_AU_TIME,
        }
    }
}

impl UnitSystem {
    pub fn kelvin_to_hartree(&self, kelvin: f64) -> f64 {
        kelvin * self.hartree_per_kelvin
    }

    pub fn hartree_to_kelvin(&self, hartree: f64) -> f64 {
        hartree / self.hartree_per_kelvin
    }

    /// Inverse temperature 1/(k_B T) in inverse Hartree. T = 0 maps to +inf.
    pub fn beta_from_kelvin(&self, kelvin: f64) -> f64 {
        1.0 / self.kelvin_to_hartree(kelvin)
    }

    pub fn fs_to_au(&self, fs: f64) -> f64 {
        fs / self.fs_per_au_time
    }

    pub fn au_to_fs(&self, au: f64) -> f64 {
        au * self.fs_per_au_time
    }

    pub fn cm1_to_hartree(&self, cm1: f64) -> f64 {
        cm1 / CM1_PER_HARTREE
    }

    pub fn hartree_to_cm1(&self, hartree: f64) -> f64 {
        hartree * CM1_PER_HARTREE
    }

    pub fn ev_to_hartree(&self, ev: f64) -> f64 {
        ev / EV_PER_HARTREE
    }

    pub fn hartree_to_ev(&self, hartree: f64) -> f64 {
        hartree * EV_PER_HARTREE
    }

    /// Converts an energy expressed in `unit` to Hartree. Kelvin is read as
    /// the thermal energy k_B T.
    pub fn energy_to_au(&self, value: f64, unit: Unit) -> Result<f64> {
        match unit {
            Unit::Au => Ok(value),
            Unit::Ev => Ok(self.ev_to_hartree(value)),
            Unit::Cm1 => Ok(self.cm1_to_hartree(value)),
            Unit::Kelvin => Ok(self.kelvin_to_hartree(value)),
            Unit::Fs => Err(Error::Parse(format!("'{value} fs' is a time, not an energy"))),
        }
    }

    pub fn time_to_au(&self, value: f64, unit: Unit) -> Result<f64> {
        match unit {
            Unit::Au => Ok(value),
            Unit::Fs => Ok(self.fs_to_au(value)),
            other => Err(Error::Parse(format!("'{value} {other}' is not a time"))),
        }
    }

    pub fn temperature_to_kelvin(&self, value: f64, unit: Unit) -> Result<f64> {
        match unit {
            Unit::Kelvin => Ok(value),
            Unit::Fs => Err(Error::Parse(format!("'{value} fs' is not a temperature"))),
            energy => Ok(self.hartree_to_kelvin(self.energy_to_au(value, energy)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "au")]
    Au,
    #[serde(rename = "ev")]
    Ev,
    #[serde(rename = "cm-1")]
    Cm1,
    #[serde(rename = "kelvin")]
    Kelvin,
    #[serde(rename = "fs")]
    Fs,
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "au" | "a.u." | "hartree" => Ok(Unit::Au),
            "ev" => Ok(Unit::Ev),
            "cm-1" | "cm^-1" => Ok(Unit::Cm1),
            "kelvin" | "k" => Ok(Unit::Kelvin),
            "fs" => Ok(Unit::Fs),
            other => Err(Error::Parse(format!(
                "unknown unit '{other}' (expected au, ev, cm-1, kelvin or fs)"
            ))),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Au => "au",
            Unit::Ev => "ev",
            Unit::Cm1 => "cm-1",
            Unit::Kelvin => "kelvin",
            Unit::Fs => "fs",
        };
        f.write_str(s)
    }
}

/// A number with an explicit unit, written as `"<value> <unit>"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let (Some(v), Some(u), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!(
                "quantity '{s}' must be '<value> <unit>'"
            )));
        };
        let value = v
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad number '{v}': {e}")))?;
        Ok(Quantity {
            value,
            unit: u.parse()?,
        })
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}
