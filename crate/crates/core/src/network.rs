//! Road-link ingestion and per-link truck activity.
//!
//! Long-haul counts are carried by combination trucks and non-long-haul
//! counts by single-unit trucks, so every link has two parallel VMT channels.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::types::ZoneId;

/// Column order of the links file.
pub const LINK_HEADER: [&str; 9] = [
    "link_id",
    "mp_start",
    "mp_end",
    "adtt_long",
    "adtt_nonlong",
    "route_type",
    "centroid_x",
    "centroid_y",
    "county_id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteType {
    Interstate,
    FreewayExpressway,
    OtherPrincipalArterial,
    MinorArterial,
    MajorCollector,
    MinorCollector,
}

impl RouteType {
    pub const ALL: [RouteType; 6] = [
        RouteType::Interstate,
        RouteType::FreewayExpressway,
        RouteType::OtherPrincipalArterial,
        RouteType::MinorArterial,
        RouteType::MajorCollector,
        RouteType::MinorCollector,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RouteType::Interstate => "interstate",
            RouteType::FreewayExpressway => "freeway_expressway",
            RouteType::OtherPrincipalArterial => "other_principal_arterial",
            RouteType::MinorArterial => "minor_arterial",
            RouteType::MajorCollector => "major_collector",
            RouteType::MinorCollector => "minor_collector",
        }
    }
}

impl fmt::Display for RouteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RouteType {
    type Err = String;

    /// Accepts the snake_case labels or the numeric road-type codes 1–6.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let t = s.trim();
        if let Ok(code) = t.parse::<usize>() {
            return code
                .checked_sub(1)
                .and_then(|i| RouteType::ALL.get(i).copied())
                .ok_or_else(|| format!("route type code {code} out of range 1-6"));
        }
        RouteType::ALL
            .into_iter()
            .find(|r| r.label().eq_ignore_ascii_case(t))
            .ok_or_else(|| format!("unknown route type `{t}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadLink {
    pub link_id: String,
    pub milepost_start: f64,
    pub milepost_end: f64,
    pub adtt_longhaul: f64,
    pub adtt_nonlonghaul: f64,
    pub route_type: RouteType,
    pub centroid: Point,
    pub county_id: Option<ZoneId>,
}

impl RoadLink {
    /// Segment length in miles from the milepost difference.
    pub fn road_length(&self) -> f64 {
        self.milepost_end - self.milepost_start
    }
}

/// Global activity parameters. Diesel and truck fractions do not vary by road or region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VmtParams {
    pub diesel_fraction: f64,
    pub truck_fraction: f64,
    pub cagr: f64,
    pub base_year: i32,
    pub target_year: i32,
    pub days_per_year: f64,
}

impl Default for VmtParams {
    fn default() -> Self {
        VmtParams {
            diesel_fraction: 0.98,
            truck_fraction: 0.99,
            cagr: 0.02,
            base_year: 2012,
            target_year: 2017,
            days_per_year: 365.0,
        }
    }
}

impl VmtParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.diesel_fraction) || !unit(self.truck_fraction) {
            return Err(Error::Config(format!(
                "diesel and truck fractions must lie in [0, 1], got {} and {}",
                self.diesel_fraction, self.truck_fraction
            )));
        }
        if self.target_year < self.base_year {
            return Err(Error::Config(format!(
                "target year {} precedes base year {}",
                self.target_year, self.base_year
            )));
        }
        if !(self.cagr.is_finite() && self.cagr > -1.0) {
            return Err(Error::Config(format!(
                "growth rate {} is out of range",
                self.cagr
            )));
        }
        if !(self.days_per_year > 0.0) {
            return Err(Error::Config("days per year must be positive".into()));
        }
        Ok(())
    }
}

/// Why a row of the links file was not accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    Parse(String),
    NonPositiveLength,
    NegativeCount,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::Parse(_) => "parse",
            RejectReason::NonPositiveLength => "negative-or-zero length",
            RejectReason::NegativeCount => "negative count",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            RejectReason::Parse(d) => d,
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRecord {
    /// 1-based line in the source file (the header is line 1).
    pub line: u64,
    pub raw: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkLoad {
    pub accepted: Vec<RoadLink>,
    pub rejected: Vec<RejectedRecord>,
}

impl LinkLoad {
    pub fn input_records(&self) -> usize {
        self.accepted.len() + self.rejected.len()
    }

    /// Rejection report: `line,link_id,reason,detail,raw`.
    pub fn write_rejections<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ctx = "rejection report";
        w.write_record(["line", "link_id", "reason", "detail", "raw"])
            .map_err(|e| Error::csv(ctx, e))?;
        for r in &self.rejected {
            let link_id = r.raw.split(',').next().unwrap_or("").trim();
            w.write_record([
                r.line.to_string().as_str(),
                link_id,
                r.reason.code(),
                r.reason.detail(),
                r.raw.as_str(),
            ])
            .map_err(|e| Error::csv(ctx, e))?;
        }
        w.flush().map_err(|e| Error::io(ctx, e))?;
        Ok(())
    }
}

fn parse_row(
    fields: &csv::StringRecord,
    columns: &[usize; 9],
) -> std::result::Result<RoadLink, RejectReason> {
    let get = |i: usize| fields.get(columns[i]).map(str::trim).unwrap_or("");
    let num = |i: usize| -> std::result::Result<f64, RejectReason> {
        let raw = get(i);
        let v: f64 = raw.parse().map_err(|_| {
            RejectReason::Parse(format!("{}: `{raw}` is not a number", LINK_HEADER[i]))
        })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(RejectReason::Parse(format!(
                "{}: `{raw}` is not finite",
                LINK_HEADER[i]
            )))
        }
    };
    if fields.len() < LINK_HEADER.len() - 1 {
        return Err(RejectReason::Parse(format!(
            "expected {} fields, found {}",
            LINK_HEADER.len(),
            fields.len()
        )));
    }
    let link_id = get(0);
    if link_id.is_empty() {
        return Err(RejectReason::Parse("link_id: missing".into()));
    }
    let link = RoadLink {
        link_id: link_id.to_owned(),
        milepost_start: num(1)?,
        milepost_end: num(2)?,
        adtt_longhaul: num(3)?,
        adtt_nonlonghaul: num(4)?,
        route_type: get(5).parse().map_err(RejectReason::Parse)?,
        centroid: Point::new(num(6)?, num(7)?),
        county_id: Some(get(8)).filter(|s| !s.is_empty()).map(ZoneId::from),
    };
    if link.adtt_longhaul < 0.0 || link.adtt_nonlonghaul < 0.0 {
        return Err(RejectReason::NegativeCount);
    }
    // Zero-length links are rejected alongside negative ones.
    if !(link.road_length() > 0.0) {
        return Err(RejectReason::NonPositiveLength);
    }
    Ok(link)
}

/// Reads and validates a links file. Output order follows input order
/// regardless of how many threads parse the rows.
pub fn load_links<R: Read>(source: R) -> Result<LinkLoad> {
    let ctx = "links file";
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| Error::csv(ctx, e))?.clone();
    let mut columns = [0usize; 9];
    for (slot, name) in columns.iter_mut().zip(LINK_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                path: ctx.into(),
                message: format!("missing column `{name}`"),
            })?;
    }

    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::csv(ctx, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }

    let parsed: Vec<_> = rows
        .par_iter()
        .map(|(line, rec)| (*line, rec, parse_row(rec, &columns)))
        .collect();

    let mut load = LinkLoad::default();
    for (line, rec, outcome) in parsed {
        match outcome {
            Ok(link) => load.accepted.push(link),
            Err(reason) => load.rejected.push(RejectedRecord {
                line,
                raw: rec.iter().collect::<Vec<_>>().join(","),
                reason,
            }),
        }
    }
    Ok(load)
}

/// Daily medium/heavy-duty diesel freight truck counts on one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyCounts {
    pub longhaul: f64,
    pub nonlonghaul: f64,
}

impl DailyCounts {
    pub fn total(&self) -> f64 {
        self.longhaul + self.nonlonghaul
    }
}

/// Scales raw truck counts to diesel freight trucks.
///
/// The 1% bus share is removed by multiplying with the truck fraction, which
/// is numerically the same as subtracting 1% of the count.
pub fn daily_mhdv(link: &RoadLink, params: &VmtParams) -> DailyCounts {
    let scale = params.diesel_fraction * params.truck_fraction;
    DailyCounts {
        longhaul: link.adtt_longhaul * scale,
        nonlonghaul: link.adtt_nonlonghaul * scale,
    }
}

pub fn growth_factor(params: &VmtParams) -> f64 {
    (1.0 + params.cagr).powi(params.target_year - params.base_year)
}

/// Annual vehicle miles per vehicle class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkVmt {
    pub combination: f64,
    pub single_unit: f64,
}

impl LinkVmt {
    pub fn total(&self) -> f64 {
        self.combination + self.single_unit
    }
}

pub fn annual_vmt(link: &RoadLink, params: &VmtParams) -> LinkVmt {
    let daily = daily_mhdv(link, params);
    let scale = link.road_length() * params.days_per_year * growth_factor(params);
    LinkVmt {
        combination: daily.longhaul * scale,
        single_unit: daily.nonlonghaul * scale,
    }
}

/// Percent of each class's VMT carried by each road type.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RouteShare {
    pub combination_pct: f64,
    pub single_unit_pct: f64,
}

pub fn vmt_share_by_route(
    links: &[RoadLink],
    params: &VmtParams,
) -> BTreeMap<RouteType, RouteShare> {
    let mut per_route: BTreeMap<RouteType, LinkVmt> = RouteType::ALL
        .iter()
        .map(|&r| (r, LinkVmt::default()))
        .collect();
    for link in links {
        let v = annual_vmt(link, params);
        let slot = per_route
            .get_mut(&link.route_type)
            .expect("all route types present");
        slot.combination += v.combination;
        slot.single_unit += v.single_unit;
    }
    let comb: f64 = per_route.values().map(|v| v.combination).sum();
    let single: f64 = per_route.values().map(|v| v.single_unit).sum();
    let pct = |part: f64, whole: f64| {
        if whole > 0.0 {
            100.0 * part / whole
        } else {
            0.0
        }
    };
    per_route
        .into_iter()
        .map(|(r, v)| {
            (
                r,
                RouteShare {
                    combination_pct: pct(v.combination, comb),
                    single_unit_pct: pct(v.single_unit, single),
                },
            )
        })
        .collect()
}
