//! Identifiers and enumerations shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Grams per metric ton. All mass outputs are metric tons.
pub const GRAMS_PER_TONNE: f64 = 1.0e6;

/// Unit label written next to every mass column.
pub const MASS_UNIT: &str = "t_metric";

/// County, tract or any other areal unit identifier. Ordering is lexicographic,
/// which is what every tie-break and accumulation order in the crate relies on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub String);

impl ZoneId {
    pub fn new(id: impl Into<String>) -> Self {
        ZoneId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ZoneId {
    fn from(s: &str) -> Self {
        ZoneId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pollutant {
    #[serde(rename = "PM2.5")]
    Pm25,
    #[serde(rename = "SO2")]
    So2,
    #[serde(rename = "NOx")]
    Nox,
    #[serde(rename = "CO2")]
    Co2,
}

impl Pollutant {
    pub const ALL: [Pollutant; 4] = [
        Pollutant::Pm25,
        Pollutant::So2,
        Pollutant::Nox,
        Pollutant::Co2,
    ];

    /// Species valued through a marginal social cost surface or a source-receptor matrix.
    pub const CRITERIA: [Pollutant; 3] = [Pollutant::Pm25, Pollutant::So2, Pollutant::Nox];

    pub fn label(self) -> &'static str {
        match self {
            Pollutant::Pm25 => "PM2.5",
            Pollutant::So2 => "SO2",
            Pollutant::Nox => "NOx",
            Pollutant::Co2 => "CO2",
        }
    }

    pub fn is_criteria(self) -> bool {
        self != Pollutant::Co2
    }
}

impl fmt::Display for Pollutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Pollutant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '.' | '_' | ' ' | '-'))
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "pm25" => Ok(Pollutant::Pm25),
            "so2" => Ok(Pollutant::So2),
            "nox" => Ok(Pollutant::Nox),
            "co2" => Ok(Pollutant::Co2),
            _ => Err(Error::Data(format!("unknown pollutant `{s}`"))),
        }
    }
}

/// One value per pollutant, indexed by [`Pollutant`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerPollutant(pub [f64; 4]);

impl PerPollutant {
    pub const ZERO: PerPollutant = PerPollutant([0.0; 4]);

    pub fn from_fn(mut f: impl FnMut(Pollutant) -> f64) -> Self {
        PerPollutant(Pollutant::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pollutant, f64)> + '_ {
        Pollutant::ALL.into_iter().map(|p| (p, self[p]))
    }

    pub fn add_assign_scaled(&mut self, other: &PerPollutant, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b * scale;
        }
    }
}

impl std::ops::Index<Pollutant> for PerPollutant {
    type Output = f64;

    fn index(&self, p: Pollutant) -> &f64 {
        &self.0[p as usize]
    }
}

impl std::ops::IndexMut<Pollutant> for PerPollutant {
    fn index_mut(&mut self, p: Pollutant) -> &mut f64 {
        &mut self.0[p as usize]
    }
}

/// Geography level of a ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZoneKind {
    County,
    Tract,
}

impl ZoneKind {
    pub fn label(self) -> &'static str {
        match self {
            ZoneKind::County => "county",
            ZoneKind::Tract => "tract",
        }
    }
}

impl fmt::Display for ZoneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
