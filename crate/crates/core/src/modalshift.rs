//! Truck-to-rail modal shift: shipment ton-miles, rail emission factors from
//! fuel chemistry, and linear shift sweeps.

use std::collections::BTreeMap;
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inventory::{EmissionFactorSet, VehicleClass};
use crate::io::CsvBuffer;
use crate::types::{PerPollutant, Pollutant};

/// Pounds per short ton.
pub const POUNDS_PER_TON: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ShipmentRecord {
    #[serde(rename = "id")]
    pub shipment_id: String,
    #[serde(rename = "weight_lb")]
    pub weight: f64,
    #[serde(rename = "distance_mi")]
    pub routed_distance: f64,
    pub weighting_factor: f64,
}

impl ShipmentRecord {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if ok(self.weight) && ok(self.routed_distance) && ok(self.weighting_factor) {
            Ok(())
        } else {
            Err(Error::Data(format!(
                "shipment {}: weight, distance and weighting factor must be non-negative",
                self.shipment_id
            )))
        }
    }

    /// Shipments routed strictly farther than the threshold may move to rail.
    pub fn eligible(&self, distance_threshold: f64) -> bool {
        self.routed_distance > distance_threshold
    }
}

/// Reads `id,weight_lb,distance_mi,weighting_factor`.
pub fn read_shipments<R: Read>(source: R) -> Result<Vec<ShipmentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize::<ShipmentRecord>() {
        let row = row.map_err(|e| Error::csv("shipments", e))?;
        row.validate()?;
        out.push(row);
    }
    Ok(out)
}

/// `weighting_factor × (weight / 2000) × distance`.
pub fn shipment_tonmiles(rec: &ShipmentRecord) -> f64 {
    rec.weighting_factor * (rec.weight / POUNDS_PER_TON) * rec.routed_distance
}

/// Total and threshold-eligible ton-miles, summed in input order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TonMiles {
    pub total: f64,
    pub eligible: f64,
}

pub fn aggregate_tonmiles(shipments: &[ShipmentRecord], distance_threshold: f64) -> TonMiles {
    let per: Vec<(f64, bool)> = shipments
        .par_iter()
        .map(|s| (shipment_tonmiles(s), s.eligible(distance_threshold)))
        .collect();
    let mut t = TonMiles {
        total: 0.0,
        eligible: 0.0,
    };
    for (tm, eligible) in per {
        t.total += tm;
        if eligible {
            t.eligible += tm;
        }
    }
    t
}

/// How the carbon-to-CO2 mass ratio enters the rail CO2 factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarbonRatio {
    /// 44/12.
    #[default]
    Exact,
    /// 3.67, the two-decimal rounding behind the published 10,217 g/gal.
    Rounded,
}

impl CarbonRatio {
    pub fn value(self) -> f64 {
        match self {
            CarbonRatio::Exact => 44.0 / 12.0,
            CarbonRatio::Rounded => 3.67,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RailFuelParams {
    /// g/gal.
    pub fuel_density: f64,
    /// Sulfur mass fraction (15 ppm).
    pub sulfur_ppm: f64,
    pub s_to_so2_fraction: f64,
    pub carbon_mass_fraction: f64,
    /// SO2/S molar mass ratio, 64/32.
    pub mol_ratio_so2_s: f64,
    pub carbon_ratio: CarbonRatio,
    /// ton-miles/gal.
    pub fuel_efficiency: f64,
    /// g/gal.
    pub pm10_gal: f64,
    pub pm25_of_pm10: f64,
    /// g/gal.
    pub nox_gal: f64,
}

impl Default for RailFuelParams {
    fn default() -> Self {
        RailFuelParams {
            fuel_density: 3200.0,
            sulfur_ppm: 15e-6,
            s_to_so2_fraction: 0.978,
            carbon_mass_fraction: 0.87,
            mol_ratio_so2_s: 2.0,
            carbon_ratio: CarbonRatio::Exact,
            fuel_efficiency: 472.0,
            pm10_gal: 3.944,
            pm25_of_pm10: 0.97,
            nox_gal: 134.770,
        }
    }
}

impl RailFuelParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("fuel_density", self.fuel_density),
            ("sulfur_ppm", self.sulfur_ppm),
            ("mol_ratio_so2_s", self.mol_ratio_so2_s),
            ("pm10_gal", self.pm10_gal),
            ("nox_gal", self.nox_gal),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "rail.{name} must be non-negative, got {v}"
                )));
            }
        }
        let fractions = [
            ("s_to_so2_fraction", self.s_to_so2_fraction),
            ("carbon_mass_fraction", self.carbon_mass_fraction),
            ("pm25_of_pm10", self.pm25_of_pm10),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "rail.{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if !(self.fuel_efficiency > 0.0 && self.fuel_efficiency.is_finite()) {
            return Err(Error::Config(format!(
                "rail.fuel_efficiency must be positive, got {}",
                self.fuel_efficiency
            )));
        }
        Ok(())
    }
}

/// g SO2 per gallon: density × conversion × (64/32) × sulfur.
pub fn rail_ef_so2(params: &RailFuelParams) -> f64 {
    params.fuel_density * params.s_to_so2_fraction * params.mol_ratio_so2_s * params.sulfur_ppm
}

/// g CO2 per gallon: density × (44/12) × carbon fraction.
pub fn rail_ef_co2(params: &RailFuelParams) -> f64 {
    params.fuel_density * params.carbon_ratio.value() * params.carbon_mass_fraction
}

/// g PM2.5 per gallon.
pub fn rail_ef_pm25_gal(params: &RailFuelParams) -> f64 {
    params.pm10_gal * params.pm25_of_pm10
}

/// g per ton-mile: each per-gallon factor divided by fuel efficiency.
pub fn rail_ef_per_tonmile(params: &RailFuelParams) -> PerPollutant {
    let eff = params.fuel_efficiency;
    let mut out = PerPollutant::ZERO;
    out[Pollutant::Pm25] = rail_ef_pm25_gal(params) / eff;
    out[Pollutant::So2] = rail_ef_so2(params) / eff;
    out[Pollutant::Nox] = params.nox_gal / eff;
    out[Pollutant::Co2] = rail_ef_co2(params) / eff;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftScenario {
    pub fraction_shifted: f64,
    /// miles.
    pub distance_threshold: f64,
    /// tons per truck.
    pub payload: f64,
}

impl Default for ShiftScenario {
    fn default() -> Self {
        ShiftScenario {
            fraction_shifted: 0.0,
            distance_threshold: 300.0,
            payload: 20.0,
        }
    }
}

impl ShiftScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.payload > 0.0 && self.payload.is_finite()) {
            return Err(Error::Config(format!(
                "payload must be positive, got {}",
                self.payload
            )));
        }
        if !(0.0..=1.0).contains(&self.fraction_shifted) {
            return Err(Error::Config(format!(
                "fraction shifted must lie in [0, 1], got {}",
                self.fraction_shifted
            )));
        }
        if !(self.distance_threshold >= 0.0) {
            return Err(Error::Config(
                "distance threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Truck emissions the percent changes are measured against, in grams.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// All shipment ton-miles moved by combination trucks:
    /// `total ton-miles / payload × EF_combination`.
    ShipmentTonMiles,
    /// Externally supplied truck emissions, e.g. an inventory total.
    Explicit(PerPollutant),
}

/// Per-unit-f change and the baseline it is measured against, both in grams.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftModel {
    pub tonmiles: TonMiles,
    /// Δ(p) at f = 1.
    pub delta_per_unit_f: PerPollutant,
    pub baseline: PerPollutant,
}

impl ShiftModel {
    pub fn new(
        shipments: &[ShipmentRecord],
        scenario: &ShiftScenario,
        truck: &EmissionFactorSet,
        rail_per_tonmile: &PerPollutant,
        baseline: &Baseline,
    ) -> Result<Self> {
        scenario.validate()?;
        let tonmiles = aggregate_tonmiles(shipments, scenario.distance_threshold);
        let truck_ef = |p| truck.factor(VehicleClass::Combination, p);
        let delta_per_unit_f = PerPollutant::from_fn(|p| {
            tonmiles.eligible * rail_per_tonmile[p]
                - (tonmiles.eligible / scenario.payload) * truck_ef(p)
        });
        let baseline = match baseline {
            Baseline::ShipmentTonMiles => {
                PerPollutant::from_fn(|p| tonmiles.total / scenario.payload * truck_ef(p))
            }
            Baseline::Explicit(b) => *b,
        };
        Ok(ShiftModel {
            tonmiles,
            delta_per_unit_f,
            baseline,
        })
    }

    /// Δ(p) in grams for fraction `f`.
    pub fn delta(&self, f: f64, p: Pollutant) -> f64 {
        f * self.delta_per_unit_f[p]
    }

    /// Percent change per unit f; undefined (NaN) for a zero baseline.
    pub fn slope_pct(&self, p: Pollutant) -> f64 {
        let b = self.baseline[p];
        if b > 0.0 {
            100.0 * self.delta_per_unit_f[p] / b
        } else {
            f64::NAN
        }
    }

    pub fn pct_change(&self, f: f64, p: Pollutant) -> f64 {
        // Adding +0.0 turns a negative zero at f = 0 into a plain zero.
        f * self.slope_pct(p) + 0.0
    }
}

/// Percent emission change per pollutant for the scenario's own fraction.
pub fn shift_scenario(
    shipments: &[ShipmentRecord],
    scenario: &ShiftScenario,
    truck: &EmissionFactorSet,
    rail_per_tonmile: &PerPollutant,
    baseline: &Baseline,
) -> Result<BTreeMap<Pollutant, f64>> {
    let model = ShiftModel::new(shipments, scenario, truck, rail_per_tonmile, baseline)?;
    Ok(Pollutant::ALL
        .iter()
        .map(|&p| (p, model.pct_change(scenario.fraction_shifted, p)))
        .collect())
}

/// Fractions 0, 0.05, …, 0.50.
pub fn sweep_fractions() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 20.0).collect()
}

/// Sweep CSV: `f,pollutant,pct_change`.
pub fn sweep_csv(model: &ShiftModel, fractions: &[f64]) -> Result<Vec<u8>> {
    let mut out = CsvBuffer::new("modal shift sweep", &["f", "pollutant", "pct_change"])?;
    for &f in fractions {
        for p in Pollutant::ALL {
            out.row([
                f.to_string(),
                p.label().to_owned(),
                model.pct_change(f, p).to_string(),
            ])?;
        }
    }
    out.into_bytes()
}
