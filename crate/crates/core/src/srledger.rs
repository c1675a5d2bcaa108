//! Source-receptor accounting: where each zone's emissions do their damage,
//! and which zones are net importers of damage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::inventory::EmissionsLedger;
use crate::io::CsvBuffer;
use crate::types::{Pollutant, ZoneId};

/// Sparse `$ at receptor per ton emitted at source`, per criteria pollutant.
/// Pairs that are not stored are zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SrMatrix {
    universe: BTreeSet<ZoneId>,
    entries: BTreeMap<Pollutant, BTreeMap<(ZoneId, ZoneId), f64>>,
}

impl SrMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds zones to the universe without giving them any entries.
    pub fn extend_universe(&mut self, zones: impl IntoIterator<Item = ZoneId>) {
        self.universe.extend(zones);
    }

    pub fn insert(
        &mut self,
        p: Pollutant,
        source: ZoneId,
        receptor: ZoneId,
        usd_per_ton: f64,
    ) -> Result<()> {
        if !p.is_criteria() {
            return Err(Error::Data(format!(
                "source-receptor entries are for PM2.5, SO2 and NOx only, got {p}"
            )));
        }
        if !(usd_per_ton.is_finite() && usd_per_ton >= 0.0) {
            return Err(Error::Data(format!(
                "source-receptor entry {p} {source}->{receptor} must be non-negative, got {usd_per_ton}"
            )));
        }
        self.universe.insert(source.clone());
        self.universe.insert(receptor.clone());
        let prev = self
            .entries
            .entry(p)
            .or_default()
            .insert((source, receptor), usd_per_ton);
        if prev.is_some() {
            return Err(Error::Data(format!(
                "duplicate source-receptor entry for {p}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, p: Pollutant, source: &ZoneId, receptor: &ZoneId) -> f64 {
        self.entries
            .get(&p)
            .and_then(|m| m.get(&(source.clone(), receptor.clone())))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn universe(&self) -> &BTreeSet<ZoneId> {
        &self.universe
    }

    pub fn entries(&self, p: Pollutant) -> impl Iterator<Item = (&ZoneId, &ZoneId, f64)> {
        self.entries
            .get(&p)
            .into_iter()
            .flat_map(|m| m.iter().map(|((s, r), v)| (s, r, *v)))
    }

    pub fn nnz(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    /// Reads `pollutant,source_id,receptor_id,usd_per_ton` triplets.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            pollutant: String,
            source_id: String,
            receptor_id: String,
            usd_per_ton: f64,
        }
        let mut m = SrMatrix::new();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| Error::csv("source-receptor matrix", e))?;
            m.insert(
                row.pollutant.parse()?,
                ZoneId(row.source_id),
                ZoneId(row.receptor_id),
                row.usd_per_ton,
            )?;
        }
        Ok(m)
    }
}

/// `$/yr` damage by (pollutant, source, receptor).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flows {
    pub damages: BTreeMap<(Pollutant, ZoneId, ZoneId), f64>,
}

impl Flows {
    pub fn total(&self) -> f64 {
        self.damages.values().sum()
    }
}

/// `d(p, s, r) = E(s, p) × SR(p, s, r)`.
pub fn receptor_damages(ledger: &EmissionsLedger, sr: &SrMatrix) -> Result<Flows> {
    for (zone, tons) in ledger.iter() {
        let emits = Pollutant::CRITERIA.iter().any(|&p| tons[p] > 0.0);
        if emits && !sr.universe.contains(zone) {
            return Err(Error::Data(format!(
                "emitting zone {zone} is absent from the source-receptor matrix"
            )));
        }
    }
    let triplets: Vec<(Pollutant, &ZoneId, &ZoneId, f64)> = Pollutant::CRITERIA
        .iter()
        .flat_map(|&p| sr.entries(p).map(move |(s, r, v)| (p, s, r, v)))
        .collect();
    let damages = triplets
        .par_iter()
        .map(|&(p, s, r, v)| ((p, s.clone(), r.clone()), ledger.get(s, p) * v))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Ok(Flows { damages })
}

/// Exported/imported ratio with explicit handling of empty denominators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowRatio {
    Finite(f64),
    /// Exports something, imports nothing.
    PureExporter,
    /// Neither exports nor imports; left out of ratio reports.
    Undefined,
}

impl fmt::Display for FlowRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowRatio::Finite(v) => write!(f, "{v}"),
            FlowRatio::PureExporter => f.write_str("pure-exporter"),
            FlowRatio::Undefined => Ok(()),
        }
    }
}

/// Internal, exported and imported damage for one zone, $/yr.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowSummary {
    pub internal: f64,
    pub exported: f64,
    pub imported: f64,
}

impl FlowSummary {
    /// Damage caused anywhere by this zone's emissions.
    pub fn source_total(&self) -> f64 {
        self.internal + self.exported
    }

    /// Damage suffered in this zone from any source.
    pub fn receptor_total(&self) -> f64 {
        self.internal + self.imported
    }

    fn accumulate(&mut self, other: &FlowSummary) {
        self.internal += other.internal;
        self.exported += other.exported;
        self.imported += other.imported;
    }

    fn scaled(&self, c: f64) -> FlowSummary {
        FlowSummary {
            internal: self.internal * c,
            exported: self.exported * c,
            imported: self.imported * c,
        }
    }
}

pub fn classify_and_ratio(summary: &FlowSummary) -> (bool, FlowRatio) {
    let net_importer = summary.imported > summary.exported;
    let ratio = if summary.imported > 0.0 {
        FlowRatio::Finite(summary.exported / summary.imported)
    } else if summary.exported > 0.0 {
        FlowRatio::PureExporter
    } else {
        FlowRatio::Undefined
    };
    (net_importer, ratio)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZoneDamage {
    /// Summed over pollutants; importer status for reporting is taken from this.
    pub total: FlowSummary,
    pub by_pollutant: BTreeMap<Pollutant, FlowSummary>,
}

impl ZoneDamage {
    pub fn net_importer(&self) -> bool {
        classify_and_ratio(&self.total).0
    }

    pub fn ratio(&self) -> FlowRatio {
        classify_and_ratio(&self.total).1
    }

    pub fn net_importer_for(&self, p: Pollutant) -> bool {
        self.by_pollutant
            .get(&p)
            .is_some_and(|s| classify_and_ratio(s).0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DamageLedger {
    pub zones: BTreeMap<ZoneId, ZoneDamage>,
}

fn empty_breakdown() -> BTreeMap<Pollutant, FlowSummary> {
    Pollutant::CRITERIA
        .iter()
        .map(|&p| (p, FlowSummary::default()))
        .collect()
}

fn summary_slot<'m>(
    per: &'m mut BTreeMap<ZoneId, BTreeMap<Pollutant, FlowSummary>>,
    zone: &ZoneId,
    p: Pollutant,
) -> &'m mut FlowSummary {
    per.entry(zone.clone())
        .or_insert_with(empty_breakdown)
        .get_mut(&p)
        .expect("criteria pollutant")
}

/// Splits flows into per-zone internal, exported and imported damage.
/// Every zone in `zones` appears, with zeros if it has no flows.
pub fn decompose<'a>(flows: &Flows, zones: impl IntoIterator<Item = &'a ZoneId>) -> DamageLedger {
    let mut per: BTreeMap<ZoneId, BTreeMap<Pollutant, FlowSummary>> = zones
        .into_iter()
        .map(|z| (z.clone(), empty_breakdown()))
        .collect();
    // Flows iterate in (pollutant, source, receptor) order, which fixes the
    // accumulation order of every sum below.
    for ((p, s, r), &d) in &flows.damages {
        if s == r {
            summary_slot(&mut per, s, *p).internal += d;
        } else {
            summary_slot(&mut per, s, *p).exported += d;
            summary_slot(&mut per, r, *p).imported += d;
        }
    }
    DamageLedger {
        zones: per
            .into_iter()
            .map(|(z, by_pollutant)| {
                let mut total = FlowSummary::default();
                for s in by_pollutant.values() {
                    total.accumulate(s);
                }
                (
                    z,
                    ZoneDamage {
                        total,
                        by_pollutant,
                    },
                )
            })
            .collect(),
    }
}

impl DamageLedger {
    pub fn scaled(&self, c: f64) -> DamageLedger {
        DamageLedger {
            zones: self
                .zones
                .iter()
                .map(|(z, d)| {
                    (
                        z.clone(),
                        ZoneDamage {
                            total: d.total.scaled(c),
                            by_pollutant: d
                                .by_pollutant
                                .iter()
                                .map(|(p, s)| (*p, s.scaled(c)))
                                .collect(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// One row per zone for the pollutant-summed ledger (`scope = all`) followed
    /// by one row per zone and pollutant.
    pub fn to_csv(&self, dollar_year: i32) -> Result<Vec<u8>> {
        let mut out = CsvBuffer::new(
            "source-receptor ledger",
            &[
                "zone_id",
                "scope",
                "internal_usd",
                "exported_usd",
                "imported_usd",
                "source_total_usd",
                "receptor_total_usd",
                "net_importer",
                "ratio",
                "dollar_year",
            ],
        )?;
        let year = dollar_year.to_string();
        let mut emit = |zone: &ZoneId, scope: &str, s: &FlowSummary| -> Result<()> {
            let (importer, ratio) = classify_and_ratio(s);
            out.row([
                zone.as_str(),
                scope,
                &s.internal.to_string(),
                &s.exported.to_string(),
                &s.imported.to_string(),
                &s.source_total().to_string(),
                &s.receptor_total().to_string(),
                if importer { "true" } else { "false" },
                &ratio.to_string(),
                &year,
            ])
        };
        for (zone, d) in &self.zones {
            emit(zone, "all", &d.total)?;
        }
        for (zone, d) in &self.zones {
            for (p, s) in &d.by_pollutant {
                emit(zone, p.label(), s)?;
            }
        }
        out.into_bytes()
    }
}

/// Totals compared by [`check_conservation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conservation {
    pub flow_total: f64,
    pub source_total: f64,
    pub receptor_total: f64,
    pub exported_total: f64,
    pub imported_total: f64,
}

impl Conservation {
    pub fn measure(ledger: &DamageLedger, flows: &Flows) -> Self {
        let mut c = Conservation {
            flow_total: flows.total(),
            source_total: 0.0,
            receptor_total: 0.0,
            exported_total: 0.0,
            imported_total: 0.0,
        };
        for d in ledger.zones.values() {
            c.source_total += d.total.source_total();
            c.receptor_total += d.total.receptor_total();
            c.exported_total += d.total.exported;
            c.imported_total += d.total.imported;
        }
        c
    }

    /// Largest relative disagreement among the identities that must hold.
    pub fn max_relative_error(&self) -> f64 {
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        };
        [
            rel(self.source_total, self.receptor_total),
            rel(self.source_total, self.flow_total),
            rel(self.exported_total, self.imported_total),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Every dollar must originate once and land once.
pub fn check_conservation(
    ledger: &DamageLedger,
    flows: &Flows,
    tolerance: f64,
) -> Result<Conservation> {
    let c = Conservation::measure(ledger, flows);
    let err = c.max_relative_error();
    if err > tolerance {
        return Err(Error::Conservation(format!(
            "relative imbalance {err:e} exceeds {tolerance:e} (sources {}, receptors {}, exported {}, imported {})",
            c.source_total, c.receptor_total, c.exported_total, c.imported_total
        )));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{PerPollutant, ZoneKind};

    fn ledger(rows: &[(&str, f64)]) -> EmissionsLedger {
        let mut l = EmissionsLedger::new(ZoneKind::County, "greet");
        for &(z, pm) in rows {
            l.insert(ZoneId::from(z), PerPollutant([pm, 0.0, 0.0, 0.0]))
                .unwrap();
        }
        l
    }

    fn z(s: &str) -> ZoneId {
        ZoneId::from(s)
    }

    #[test]
    fn diagonal_matrix_keeps_damage_internal() {
        let l = ledger(&[("A", 3.0), ("B", 4.0)]);
        let mut sr = SrMatrix::new();
        sr.insert(Pollutant::Pm25, z("A"), z("A"), 10.0).unwrap();
        sr.insert(Pollutant::Pm25, z("B"), z("B"), 20.0).unwrap();
        let flows = receptor_damages(&l, &sr).unwrap();
        let d = decompose(&flows, sr.universe());
        for zd in d.zones.values() {
            assert_eq!(zd.total.exported, 0.0);
            assert_eq!(zd.total.imported, 0.0);
        }
        assert_eq!(d.zones[&z("A")].total.internal, 30.0);
    }

    #[test]
    fn two_zone_hand_fixture() {
        let l = ledger(&[("A", 10.0), ("B", 0.0)]);
        let mut sr = SrMatrix::new();
        sr.insert(Pollutant::Pm25, z("A"), z("A"), 1000.0).unwrap();
        sr.insert(Pollutant::Pm25, z("A"), z("B"), 500.0).unwrap();
        let flows = receptor_damages(&l, &sr).unwrap();
        assert_eq!(flows.damages[&(Pollutant::Pm25, z("A"), z("A"))], 10_000.0);
        assert_eq!(flows.damages[&(Pollutant::Pm25, z("A"), z("B"))], 5_000.0);
        let d = decompose(&flows, sr.universe());
        assert_eq!(d.zones[&z("A")].total.internal, 10_000.0);
        assert_eq!(d.zones[&z("A")].total.exported, 5_000.0);
        assert_eq!(d.zones[&z("B")].total.imported, 5_000.0);
        assert!(d.zones[&z("B")].net_importer());
        assert!(!d.zones[&z("A")].net_importer());
        assert_eq!(d.zones[&z("A")].ratio(), FlowRatio::PureExporter);
        assert_eq!(d.zones[&z("B")].ratio(), FlowRatio::Finite(0.0));
        check_conservation(&d, &flows, 1e-12).unwrap();
    }

    #[test]
    fn zero_emissions_give_zero_flows() {
        let l = ledger(&[("A", 0.0)]);
        let mut sr = SrMatrix::new();
        sr.insert(Pollutant::Pm25, z("A"), z("B"), 500.0).unwrap();
        let flows = receptor_damages(&l, &sr).unwrap();
        assert!(flows.damages.values().all(|&v| v == 0.0));
    }

    #[test]
    fn emitting_zone_missing_from_matrix_is_fatal() {
        let l = ledger(&[("Q", 1.0)]);
        let mut sr = SrMatrix::new();
        sr.insert(Pollutant::Pm25, z("A"), z("A"), 1.0).unwrap();
        assert!(matches!(receptor_damages(&l, &sr), Err(Error::Data(_))));
    }

    #[test]
    fn ratio_conventions() {
        let r = |e: f64, i: f64| {
            classify_and_ratio(&FlowSummary {
                internal: 0.0,
                exported: e,
                imported: i,
            })
        };
        assert_eq!(r(5000.0, 2500.0), (false, FlowRatio::Finite(2.0)));
        assert_eq!(r(0.0, 100.0), (true, FlowRatio::Finite(0.0)));
        assert_eq!(r(100.0, 0.0), (false, FlowRatio::PureExporter));
        assert_eq!(r(0.0, 0.0), (false, FlowRatio::Undefined));
        assert_eq!(FlowRatio::Undefined.to_string(), "");
    }

    #[test]
    fn matrix_rejects_bad_entries() {
        let mut sr = SrMatrix::new();
        assert!(sr.insert(Pollutant::Co2, z("A"), z("A"), 1.0).is_err());
        assert!(sr.insert(Pollutant::Nox, z("A"), z("A"), -1.0).is_err());
        sr.insert(Pollutant::Nox, z("A"), z("A"), 1.0).unwrap();
        assert!(sr.insert(Pollutant::Nox, z("A"), z("A"), 2.0).is_err());
        let text = "pollutant,source_id,receptor_id,usd_per_ton\nNOx,A,B,3\nSO2,B,B,4\n";
        let m = SrMatrix::read_csv(text.as_bytes()).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(Pollutant::Nox, &z("A"), &z("B")), 3.0);
        assert_eq!(m.get(Pollutant::Nox, &z("B"), &z("A")), 0.0);
    }

    #[test]
    fn ledger_csv_layout() {
        let l = ledger(&[("A", 10.0), ("B", 0.0)]);
        let mut sr = SrMatrix::new();
        sr.insert(Pollutant::Pm25, z("A"), z("B"), 500.0).unwrap();
        let d = decompose(&receptor_damages(&l, &sr).unwrap(), sr.universe());
        let text = String::from_utf8(d.to_csv(2017).unwrap()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[1], "A,all,0,5000,0,5000,0,false,pure-exporter,2017");
        assert_eq!(lines[2], "B,all,0,0,5000,0,5000,true,0,2017");
        assert_eq!(lines.len(), 1 + 2 + 2 * 3);
    }
}
