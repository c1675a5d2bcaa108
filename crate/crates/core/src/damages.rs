//! Monetised damages from marginal social cost surfaces and the social cost of carbon.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{overlay_weights_parts, CellIndex, GridSpec, Polygon};
use crate::inventory::EmissionsLedger;
use crate::types::{Pollutant, ZoneId};

/// Release height of the sources a surface describes. Trucks emit at ground level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Elevation {
    Ground,
}

/// Metadata header accompanying an MSC values file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MscHeader {
    pub grid: GridSpec,
    pub dollar_year: i32,
    #[serde(default = "default_base_vsl")]
    pub base_vsl: f64,
    pub population_year: i32,
    #[serde(default = "default_elevation")]
    pub elevation: Elevation,
}

fn default_base_vsl() -> f64 {
    8.6e6
}

fn default_elevation() -> Elevation {
    Elevation::Ground
}

/// Annual ground-level marginal social cost surface in $/ton, one layer per
/// criteria pollutant. Cells absent from the input are worth $0/ton.
#[derive(Debug, Clone, PartialEq)]
pub struct MscGrid {
    pub header: MscHeader,
    layers: BTreeMap<Pollutant, Vec<f64>>,
}

impl MscGrid {
    pub fn new(header: MscHeader) -> Result<Self> {
        header.grid.validate()?;
        let n = header.grid.n_cells();
        Ok(MscGrid {
            layers: Pollutant::CRITERIA
                .iter()
                .map(|&p| (p, vec![0.0; n]))
                .collect(),
            header,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.header.grid
    }

    pub fn set(&mut self, p: Pollutant, cell: CellIndex, usd_per_ton: f64) -> Result<()> {
        if !p.is_criteria() {
            return Err(Error::Data(format!(
                "MSC surfaces carry PM2.5, SO2 and NOx only, got {p}"
            )));
        }
        if !self.header.grid.contains_cell(cell) {
            return Err(Error::Data(format!(
                "MSC cell ({}, {}) lies outside the grid",
                cell.col, cell.row
            )));
        }
        if !(usd_per_ton.is_finite() && usd_per_ton >= 0.0) {
            return Err(Error::Data(format!(
                "MSC value {usd_per_ton} must be non-negative"
            )));
        }
        let i = self.header.grid.linear_index(cell);
        self.layers.get_mut(&p).expect("criteria layer")[i] = usd_per_ton;
        Ok(())
    }

    pub fn value(&self, p: Pollutant, cell: CellIndex) -> f64 {
        self.layers
            .get(&p)
            .map_or(0.0, |layer| layer[self.header.grid.linear_index(cell)])
    }

    pub fn read<H: Read, V: Read>(header_toml: H, values_csv: V) -> Result<Self> {
        let mut text = String::new();
        let mut header_toml = header_toml;
        header_toml
            .read_to_string(&mut text)
            .map_err(|e| Error::io("reading MSC header", e))?;
        let header: MscHeader = toml::from_str(&text).map_err(|e| Error::Parse {
            path: "MSC header".into(),
            message: e.to_string(),
        })?;
        let mut grid = MscGrid::new(header)?;

        #[derive(Deserialize)]
        struct Row {
            pollutant: String,
            col: u32,
            row: u32,
            usd_per_ton: f64,
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(values_csv);
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| Error::csv("MSC values", e))?;
            let p: Pollutant = row.pollutant.parse()?;
            let cell = CellIndex::new(row.col, row.row);
            if !seen.insert((p, cell)) {
                return Err(Error::Data(format!(
                    "duplicate MSC entry for {p} at ({}, {})",
                    row.col, row.row
                )));
            }
            grid.set(p, cell, row.usd_per_ton)?;
        }
        Ok(grid)
    }
}

/// Income and price-level ratios used to move a VSL-based surface to a new dollar year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VslAdjustment {
    pub income_factor_target: f64,
    pub income_factor_base: f64,
    pub cpi_target: f64,
    pub cpi_base: f64,
    pub target_dollar_year: i32,
}

impl Default for VslAdjustment {
    /// EASIUR income factors for 2017 and 2010 with the matching CPI values.
    fn default() -> Self {
        VslAdjustment {
            income_factor_target: 1.174,
            income_factor_base: 1.010,
            cpi_target: 245.0,
            cpi_base: 218.0,
            target_dollar_year: 2017,
        }
    }
}

impl VslAdjustment {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.income_factor_target,
            self.income_factor_base,
            self.cpi_target,
            self.cpi_base,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "VSL adjustment factors must be positive: {all:?}"
            )))
        }
    }
}

/// `(I_target / I_base) × (CPI_target / CPI_base)`; the adjusted VSL is `base_vsl × factor`.
pub fn vsl_factor(adj: &VslAdjustment) -> f64 {
    (adj.income_factor_target / adj.income_factor_base) * (adj.cpi_target / adj.cpi_base)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialCostOfCarbon {
    /// $ per metric ton of CO2.
    pub value: f64,
    pub dollar_year: i32,
}

impl Default for SocialCostOfCarbon {
    fn default() -> Self {
        SocialCostOfCarbon {
            value: 51.0,
            dollar_year: 2020,
        }
    }
}

/// Multiplies every cell by `factor` and relabels the dollar year.
pub fn scale_msc(grid: &MscGrid, factor: f64, dollar_year: i32) -> Result<MscGrid> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::Config(format!(
            "MSC scale factor must be positive, got {factor}"
        )));
    }
    let mut out = grid.clone();
    for layer in out.layers.values_mut() {
        for v in layer.iter_mut() {
            *v *= factor;
        }
    }
    out.header.dollar_year = dollar_year;
    Ok(out)
}

/// Area-weighted MSC for a zone, per criteria pollutant.
///
/// The weighted sum is divided by the total weight, so a zone that hangs
/// partly off the grid is valued by the cells it does overlap. For zones
/// inside the extent the total weight is one and this is the plain sum.
pub fn zone_msc(
    parts: &[Polygon],
    grid: &MscGrid,
    zone_label: &str,
) -> Result<BTreeMap<Pollutant, f64>> {
    let weights = overlay_weights_parts(parts, grid.grid(), zone_label)?;
    let total: f64 = weights.values().sum();
    Ok(Pollutant::CRITERIA
        .iter()
        .map(|&p| {
            let s: f64 = weights.iter().map(|(&c, &w)| w * grid.value(p, c)).sum();
            (p, s / total)
        })
        .collect())
}

/// Zone-by-pollutant damages and their national totals, $/yr.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DamageTable {
    pub by_zone: BTreeMap<ZoneId, BTreeMap<Pollutant, f64>>,
    pub national: BTreeMap<Pollutant, f64>,
}

/// `damage(k, p) = MSC(k, p) × E(k, p)` for the criteria pollutants.
pub fn zone_damages(
    ledger: &EmissionsLedger,
    zone_mscs: &BTreeMap<ZoneId, BTreeMap<Pollutant, f64>>,
) -> Result<DamageTable> {
    let mut table = DamageTable {
        national: Pollutant::CRITERIA.iter().map(|&p| (p, 0.0)).collect(),
        ..Default::default()
    };
    for (zone, tons) in ledger.iter() {
        let msc = zone_mscs.get(zone);
        let mut row = BTreeMap::new();
        for &p in &Pollutant::CRITERIA {
            let e = tons[p];
            let value = match msc.and_then(|m| m.get(&p)) {
                Some(&m) => m * e,
                None if e == 0.0 => 0.0,
                None => {
                    return Err(Error::Data(format!(
                        "zone {zone} has {e} t of {p} but no marginal social cost"
                    )))
                }
            };
            row.insert(p, value);
            *table.national.get_mut(&p).expect("criteria") += value;
        }
        table.by_zone.insert(zone.clone(), row);
    }
    Ok(table)
}

/// Location-independent CO2 damages per zone, $/yr, plus the national total.
pub fn co2_damages(
    ledger: &EmissionsLedger,
    scc: &SocialCostOfCarbon,
) -> (BTreeMap<ZoneId, f64>, f64) {
    let per_zone: BTreeMap<ZoneId, f64> = ledger
        .iter()
        .map(|(z, t)| (z.clone(), t[Pollutant::Co2] * scc.value))
        .collect();
    let total = per_zone.values().sum();
    (per_zone, total)
}
