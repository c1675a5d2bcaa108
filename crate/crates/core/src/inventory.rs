//! Link emissions and their aggregation to zones.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Rect, ZoneShapes};
use crate::io::CsvBuffer;
use crate::network::{annual_vmt, LinkVmt, RoadLink, VmtParams};
use crate::types::{PerPollutant, Pollutant, ZoneId, ZoneKind, GRAMS_PER_TONNE, MASS_UNIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VehicleClass {
    /// Class 8b+ tractor-trailers; carries all long-haul traffic.
    Combination,
    /// Class 6 single-unit trucks; carries non-long-haul traffic.
    SingleUnit,
}

impl VehicleClass {
    pub fn label(self) -> &'static str {
        match self {
            VehicleClass::Combination => "combination",
            VehicleClass::SingleUnit => "single_unit",
        }
    }
}

/// Lifetime-mileage-weighted emission factors in g/mile. PM2.5 already includes
/// tire and brake wear.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionFactorSet {
    name: String,
    combination: PerPollutant,
    single_unit: PerPollutant,
}

impl EmissionFactorSet {
    /// Builds a set from `(class, pollutant) -> g/mile` entries; all eight must be present.
    pub fn new(
        name: impl Into<String>,
        entries: &BTreeMap<(VehicleClass, Pollutant), f64>,
    ) -> Result<Self> {
        let name = name.into();
        let mut set = EmissionFactorSet {
            name: name.clone(),
            combination: PerPollutant::ZERO,
            single_unit: PerPollutant::ZERO,
        };
        for class in [VehicleClass::Combination, VehicleClass::SingleUnit] {
            for p in Pollutant::ALL {
                let v = *entries
                    .get(&(class, p))
                    .ok_or_else(|| Error::MissingFactor {
                        set: name.clone(),
                        class: class.label().into(),
                        pollutant: p.label().into(),
                    })?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Config(format!(
                        "emission factor {name}/{}/{p} must be non-negative, got {v}",
                        class.label()
                    )));
                }
                match class {
                    VehicleClass::Combination => set.combination[p] = v,
                    VehicleClass::SingleUnit => set.single_unit[p] = v,
                }
            }
        }
        Ok(set)
    }

    fn from_rows(name: &str, combination: [f64; 4], single_unit: [f64; 4]) -> Self {
        EmissionFactorSet {
            name: name.to_owned(),
            combination: PerPollutant(combination),
            single_unit: PerPollutant(single_unit),
        }
    }

    /// GREET lifetime-mileage-weighted factors for diesel freight trucks.
    pub fn greet() -> Self {
        Self::from_rows(
            "greet",
            [0.086, 0.0149, 4.585, 1588.0],
            [0.0467, 0.0070, 0.9383, 1414.0],
        )
    }

    /// Long-haul factors implied by the alternative inventory: GREET combination
    /// factors scaled by the ratio of alternative to GREET long-haul totals
    /// (5.5K/17K PM2.5, 80/3K SO2, 108K/920K NOx, 32M/31M CO2). Single-unit
    /// factors are the GREET ones since the alternative covers long-haul only.
    pub fn tong() -> Self {
        let g = Self::greet();
        let ratio = [5.5 / 17.0, 80.0 / 3000.0, 108.0 / 920.0, 32.0 / 31.0];
        let mut comb = g.combination;
        for (v, r) in comb.0.iter_mut().zip(ratio) {
            *v *= r;
        }
        EmissionFactorSet {
            name: "tong".into(),
            combination: comb,
            single_unit: g.single_unit,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn factor(&self, class: VehicleClass, p: Pollutant) -> f64 {
        match class {
            VehicleClass::Combination => self.combination[p],
            VehicleClass::SingleUnit => self.single_unit[p],
        }
    }

    pub fn class_factors(&self, class: VehicleClass) -> &PerPollutant {
        match class {
            VehicleClass::Combination => &self.combination,
            VehicleClass::SingleUnit => &self.single_unit,
        }
    }
}

/// Named factor sets, typically read from a TOML file of the form
///
/// ```toml
/// [greet.combination]
/// "PM2.5" = 0.086
/// SO2 = 0.0149
/// NOx = 4.585
/// CO2 = 1588
///
/// [greet.single_unit]
/// # ...
/// ```
#[derive(Debug, Clone, Default)]
pub struct FactorLibrary {
    sets: BTreeMap<String, EmissionFactorSet>,
}

impl FactorLibrary {
    /// The built-in `greet` and `tong` sets.
    pub fn builtin() -> Self {
        let mut lib = FactorLibrary::default();
        lib.insert(EmissionFactorSet::greet());
        lib.insert(EmissionFactorSet::tong());
        lib
    }

    pub fn insert(&mut self, set: EmissionFactorSet) {
        self.sets.insert(set.name.clone(), set);
    }

    pub fn get(&self, name: &str) -> Result<&EmissionFactorSet> {
        self.sets.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown emission factor set `{name}` (available: {})",
                self.sets.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        type Raw = BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>;
        let raw: Raw =
            toml::from_str(text).map_err(|e| Error::Config(format!("emission factors: {e}")))?;
        let mut lib = FactorLibrary::default();
        for (name, classes) in raw {
            let mut entries = BTreeMap::new();
            for (class_name, factors) in classes {
                let class = match class_name.as_str() {
                    "combination" => VehicleClass::Combination,
                    "single_unit" => VehicleClass::SingleUnit,
                    other => {
                        return Err(Error::Config(format!(
                            "emission factor set `{name}`: unknown vehicle class `{other}`"
                        )))
                    }
                };
                for (pollutant, v) in factors {
                    let p = pollutant
                        .parse::<Pollutant>()
                        .map_err(|e| Error::Config(e.to_string()))?;
                    entries.insert((class, p), v);
                }
            }
            lib.insert(EmissionFactorSet::new(name, &entries)?);
        }
        Ok(lib)
    }
}

/// Grams per year from one link's two VMT channels.
pub fn link_emissions(vmt: &LinkVmt, efs: &EmissionFactorSet) -> PerPollutant {
    PerPollutant::from_fn(|p| {
        vmt.combination * efs.factor(VehicleClass::Combination, p)
            + vmt.single_unit * efs.factor(VehicleClass::SingleUnit, p)
    })
}

struct IndexedZone<'a> {
    id: &'a ZoneId,
    parts: Vec<(Rect, &'a Polygon)>,
}

/// Zone containing each link's centroid, aligned with `links`.
///
/// Boundary points count as inside; when a centroid touches several zones the
/// smallest identifier wins. `None` marks a link outside every zone.
pub fn assign_links_to_zones(links: &[RoadLink], zones: &ZoneShapes) -> Vec<Option<ZoneId>> {
    let index: Vec<IndexedZone<'_>> = zones
        .iter()
        .map(|(id, parts)| IndexedZone {
            id,
            parts: parts.iter().map(|p| (p.bbox(), p)).collect(),
        })
        .collect();
    links
        .par_iter()
        .map(|link| {
            let c = link.centroid;
            // `index` is in ascending id order, so the first hit is the minimum.
            index
                .iter()
                .find(|z| {
                    z.parts
                        .iter()
                        .any(|(bb, poly)| bb.contains(c) && poly.contains(c))
                })
                .map(|z| z.id.clone())
        })
        .collect()
}

/// Like [`assign_links_to_zones`] but trusts a link's own `county_id` when it
/// names a known zone.
pub fn assign_links_preferring_attribute(
    links: &[RoadLink],
    zones: &ZoneShapes,
) -> Vec<Option<ZoneId>> {
    let spatial = assign_links_to_zones(links, zones);
    links
        .iter()
        .zip(spatial)
        .map(|(link, found)| match &link.county_id {
            Some(id) if zones.contains_id(id) => Some(id.clone()),
            _ => found,
        })
        .collect()
}

/// Annual emissions per zone in metric tons.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionsLedger {
    pub zone_kind: ZoneKind,
    pub factor_set_name: String,
    entries: BTreeMap<ZoneId, PerPollutant>,
}

impl EmissionsLedger {
    pub fn new(zone_kind: ZoneKind, factor_set_name: impl Into<String>) -> Self {
        EmissionsLedger {
            zone_kind,
            factor_set_name: factor_set_name.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, zone: ZoneId, tons: PerPollutant) -> Result<()> {
        if let Some((p, v)) = tons.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Data(format!(
                "zone {zone}: {p} emissions {v} must be non-negative"
            )));
        }
        self.entries.insert(zone, tons);
        Ok(())
    }

    pub fn get(&self, zone: &ZoneId, p: Pollutant) -> f64 {
        self.entries.get(zone).map_or(0.0, |t| t[p])
    }

    pub fn zone(&self, zone: &ZoneId) -> Option<&PerPollutant> {
        self.entries.get(zone)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ZoneId, &PerPollutant)> {
        self.entries.iter()
    }

    pub fn zones(&self) -> impl Iterator<Item = &ZoneId> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum over zones in ascending id order.
    pub fn total(&self, p: Pollutant) -> f64 {
        self.entries.values().map(|t| t[p]).sum()
    }

    pub fn scaled(&self, c: f64) -> EmissionsLedger {
        EmissionsLedger {
            zone_kind: self.zone_kind,
            factor_set_name: self.factor_set_name.clone(),
            entries: self
                .entries
                .iter()
                .map(|(z, t)| (z.clone(), PerPollutant::from_fn(|p| t[p] * c)))
                .collect(),
        }
    }

    /// `zone_id,pollutant,tons,unit` rows in zone then pollutant order.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut out = CsvBuffer::new(
            "emissions ledger",
            &["zone_id", "pollutant", "tons", "unit"],
        )?;
        for (zone, tons) in &self.entries {
            for (p, v) in tons.iter() {
                out.row([zone.as_str(), p.label(), &v.to_string(), MASS_UNIT])?;
            }
        }
        out.into_bytes()
    }

    pub fn from_csv<R: Read>(
        source: R,
        zone_kind: ZoneKind,
        factor_set_name: &str,
    ) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            zone_id: String,
            pollutant: String,
            tons: f64,
        }
        let mut ledger = EmissionsLedger::new(zone_kind, factor_set_name);
        let mut reader = csv::Reader::from_reader(source);
        let mut staged: BTreeMap<ZoneId, PerPollutant> = BTreeMap::new();
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| Error::csv("emissions ledger", e))?;
            let p: Pollutant = row.pollutant.parse()?;
            staged.entry(ZoneId(row.zone_id)).or_default()[p] = row.tons;
        }
        for (z, t) in staged {
            ledger.insert(z, t)?;
        }
        Ok(ledger)
    }
}

/// Result of zone aggregation plus the number of links left out because they
/// fell outside every zone.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub ledger: EmissionsLedger,
    pub unassigned_links: usize,
}

/// Sums link emissions into zones.
///
/// Per-link emissions are computed in parallel; accumulation then runs zone by
/// zone in ascending id order, and within a zone over links sorted by id (input
/// position breaks ties), so the ledger is bit-identical for any input
/// permutation and any thread count. Every zone in `registry` gets an entry,
/// zero if it holds no links.
pub fn aggregate_zone_emissions<'a>(
    links: &[RoadLink],
    assignment: &[Option<ZoneId>],
    registry: impl IntoIterator<Item = &'a ZoneId>,
    efs: &EmissionFactorSet,
    params: &VmtParams,
    zone_kind: ZoneKind,
) -> Result<Aggregation> {
    if links.len() != assignment.len() {
        return Err(Error::Data(format!(
            "assignment covers {} links but {} were given",
            assignment.len(),
            links.len()
        )));
    }
    let grams: Vec<PerPollutant> = links
        .par_iter()
        .map(|l| link_emissions(&annual_vmt(l, params), efs))
        .collect();

    let mut members: BTreeMap<&ZoneId, Vec<usize>> =
        registry.into_iter().map(|z| (z, Vec::new())).collect();
    let mut unassigned = 0;
    for (i, zone) in assignment.iter().enumerate() {
        match zone {
            Some(z) => members
                .get_mut(z)
                .ok_or_else(|| {
                    Error::Data(format!(
                        "link {} assigned to unknown zone {z}",
                        links[i].link_id
                    ))
                })?
                .push(i),
            None => unassigned += 1,
        }
    }

    let mut ledger = EmissionsLedger::new(zone_kind, efs.name());
    for (zone, mut idx) in members {
        idx.sort_by(|&a, &b| links[a].link_id.cmp(&links[b].link_id).then(a.cmp(&b)));
        let mut sum = PerPollutant::ZERO;
        for i in idx {
            sum.add_assign_scaled(&grams[i], 1.0);
        }
        ledger.insert(
            zone.clone(),
            PerPollutant::from_fn(|p| sum[p] / GRAMS_PER_TONNE),
        )?;
    }
    if unassigned > 0 {
        log::warn!("{unassigned} link(s) fell outside every {zone_kind} and were left out");
    }
    Ok(Aggregation {
        ledger,
        unassigned_links: unassigned,
    })
}

/// The four heavy-duty freight truck categories kept from emission-inventory
/// source classification level-three descriptions.
pub const FREIGHT_TRUCK_CATEGORIES: [&str; 4] = [
    "single unit short-haul truck",
    "single unit long-haul truck",
    "combination short-haul truck",
    "combination long-haul truck",
];

/// Diesel on-road categories recognised but excluded.
pub const NON_FREIGHT_CATEGORIES: [&str; 12] = [
    "passenger truck",
    "light commercial truck",
    "refuse truck",
    "truck",
    "tank cars and trucks",
    "automobiles/truck assembly operations",
    "automobiles and light trucks",
    "tank truck cleaning",
    "intercity bus",
    "transit bus",
    "school bus",
    "motor home",
];

fn normalize_label(s: &str) -> String {
    s.to_ascii_lowercase()
        .replace('-', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeiFilterOutcome<T> {
    pub kept: Vec<T>,
    /// Recognised categories that are not freight trucking.
    pub dropped_excluded: usize,
    /// Labels that match no known category.
    pub dropped_unknown: usize,
}

/// Keeps only rows whose category label is one of [`FREIGHT_TRUCK_CATEGORIES`].
/// Matching ignores case, hyphens and repeated whitespace.
pub fn nei_truck_filter<T>(
    rows: impl IntoIterator<Item = T>,
    label: impl Fn(&T) -> &str,
) -> NeiFilterOutcome<T> {
    let keep: Vec<String> = FREIGHT_TRUCK_CATEGORIES
        .iter()
        .map(|s| normalize_label(s))
        .collect();
    let known: Vec<String> = NON_FREIGHT_CATEGORIES
        .iter()
        .map(|s| normalize_label(s))
        .collect();
    let mut out = NeiFilterOutcome {
        kept: Vec::new(),
        dropped_excluded: 0,
        dropped_unknown: 0,
    };
    for row in rows {
        let l = normalize_label(label(&row));
        if keep.contains(&l) {
            out.kept.push(row);
        } else if known.contains(&l) {
            out.dropped_excluded += 1;
        } else {
            out.dropped_unknown += 1;
        }
    }
    out
}

/// The built-in sets plus any sets from `path`; a file set replaces a built-in of the same name.
pub fn load_factor_library(path: Option<&Path>) -> Result<FactorLibrary> {
    let mut lib = FactorLibrary::builtin();
    if let Some(p) = path {
        let file = FactorLibrary::from_toml_str(&crate::io::read_to_string(p)?)?;
        for set in file.sets.into_values() {
            lib.insert(set);
        }
    }
    Ok(lib)
}
