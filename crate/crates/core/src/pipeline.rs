//! Batch orchestration: runs pipeline stages for a [`RunConfig`], assembles
//! every report in memory, then writes them atomically with a [`RunManifest`].
//!
//! Outputs depend only on the configuration and input contents. Worker count
//! changes scheduling, never results: every parallel step collects in input
//! order and every sum runs in a fixed order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BaselineSource, RunConfig};
use crate::damages::{co2_damages, scale_msc, vsl_factor, zone_damages, zone_msc, MscGrid};
use crate::econometrics::{
    build_design, build_logit_design, diagnostics, effect_percent, logit_fit, ols_fit,
    qq_max_deviation, read_covariates, significance_stars, Design, Diagnostics, FitResult,
    ModelKind, ZoneCovariates,
};
use crate::error::{Error, ErrorKind, Result};
use crate::geometry::ZoneShapes;
use crate::inventory::{
    aggregate_zone_emissions, assign_links_preferring_attribute, assign_links_to_zones,
    load_factor_library, EmissionFactorSet, EmissionsLedger, VehicleClass,
};
use crate::io::{self, CsvBuffer};
use crate::modalshift::{
    aggregate_tonmiles, rail_ef_co2, rail_ef_per_tonmile, rail_ef_pm25_gal, rail_ef_so2,
    read_shipments, sweep_csv, sweep_fractions, Baseline, ShiftModel,
};
use crate::network::{growth_factor, load_links, vmt_share_by_route};
use crate::srledger::{check_conservation, decompose, receptor_damages, DamageLedger, SrMatrix};
use crate::types::{PerPollutant, Pollutant, ZoneId, ZoneKind, GRAMS_PER_TONNE, MASS_UNIT};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Version of each stage's algorithm and output layout.
pub const MODULE_VERSIONS: [(&str, &str); 7] = [
    ("geometry", env!("CARGO_PKG_VERSION")),
    ("network", env!("CARGO_PKG_VERSION")),
    ("inventory", env!("CARGO_PKG_VERSION")),
    ("damages", env!("CARGO_PKG_VERSION")),
    ("srledger", env!("CARGO_PKG_VERSION")),
    ("econometrics", env!("CARGO_PKG_VERSION")),
    ("modalshift", env!("CARGO_PKG_VERSION")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BuildInventory,
    Damages,
    SrLedger,
    EjRegress,
    ModalShift,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BuildInventory => "build-inventory",
            Command::Damages => "damages",
            Command::SrLedger => "sr-ledger",
            Command::EjRegress => "ej-regress",
            Command::ModalShift => "modal-shift",
            Command::All => "all",
        }
    }
}

/// A module error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: String,
    pub source: Error,
}

impl StageError {
    pub fn kind(&self) -> ErrorKind {
        self.source.kind()
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

type StageResult<T> = std::result::Result<T, StageError>;

fn at(stage: impl Into<String>) -> impl FnOnce(Error) -> StageError {
    let stage = stage.into();
    move |source| StageError { stage, source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    /// Path as written in the configuration.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, InputRecord>,
    pub module_versions: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub counts: BTreeMap<String, u64>,
    /// Rows left out of each regression, by reason.
    pub regression_dropped: BTreeMap<String, BTreeMap<String, u64>>,
    /// SHA-256 of every output file written by the run.
    pub outputs: BTreeMap<String, String>,
    pub wall_time_ms: u64,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Command-line overrides of the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
    /// Human-readable notes such as the conservation check.
    pub messages: Vec<String>,
}

/// Runs `command` and writes its outputs plus `manifest.json`.
pub fn run(command: Command, cfg: &RunConfig, opts: &RunOptions) -> StageResult<RunReport> {
    let start = Instant::now();
    let workers = opts.workers.unwrap_or_else(|| cfg.workers());
    if workers == 0 {
        return Err(at("config")(Error::Config(
            "worker count must be at least 1".into(),
        )));
    }
    let output_dir = match (&opts.output_dir, &cfg.output_dir) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => cfg.resolve(dir),
        (None, None) => cfg.base_dir.join("out"),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| at("config")(Error::Config(format!("thread pool: {e}"))))?;

    let mut run = Run::new(cfg);
    pool.install(|| run.execute(command))?;

    let write = at("write");
    let mut outputs = BTreeMap::new();
    for (name, bytes) in &run.outputs {
        io::write_atomic(&output_dir.join(name), bytes).map_err(at("write"))?;
        outputs.insert(name.clone(), io::digest_bytes(bytes));
    }
    let manifest = RunManifest {
        command: command.name().to_owned(),
        config_hash: cfg.hash(),
        inputs: run.inputs,
        module_versions: MODULE_VERSIONS
            .iter()
            .map(|(m, v)| (m.to_string(), v.to_string()))
            .collect(),
        parameters: run.parameters,
        counts: run.counts,
        regression_dropped: run.regression_dropped,
        outputs,
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    io::write_atomic(
        &output_dir.join(MANIFEST_FILE),
        manifest.to_json().as_bytes(),
    )
    .map_err(write)?;
    Ok(RunReport {
        output_dir,
        manifest,
        messages: run.messages,
    })
}

struct Inventory {
    efs: EmissionFactorSet,
    counties: ZoneShapes,
    county: EmissionsLedger,
    tract: Option<EmissionsLedger>,
}

struct Run<'c> {
    cfg: &'c RunConfig,
    outputs: BTreeMap<String, Vec<u8>>,
    inputs: BTreeMap<String, InputRecord>,
    parameters: BTreeMap<String, serde_json::Value>,
    counts: BTreeMap<String, u64>,
    regression_dropped: BTreeMap<String, BTreeMap<String, u64>>,
    messages: Vec<String>,
    inventory: Option<Inventory>,
    sr_ledger: Option<DamageLedger>,
}

impl<'c> Run<'c> {
    fn new(cfg: &'c RunConfig) -> Self {
        Run {
            cfg,
            outputs: BTreeMap::new(),
            inputs: BTreeMap::new(),
            parameters: BTreeMap::new(),
            counts: BTreeMap::new(),
            regression_dropped: BTreeMap::new(),
            messages: Vec::new(),
            inventory: None,
            sr_ledger: None,
        }
    }

    fn execute(&mut self, command: Command) -> StageResult<()> {
        match command {
            Command::BuildInventory => self.inventory().map(|_| ()),
            Command::Damages => self.damages(),
            Command::SrLedger => self.sr_ledger().map(|_| ()),
            Command::EjRegress => self.ej_regress(),
            Command::ModalShift => self.modal_shift(),
            Command::All => {
                self.inventory()?;
                self.damages()?;
                self.sr_ledger()?;
                self.ej_regress()?;
                self.modal_shift()
            }
        }
    }

    /// Resolves, checks and fingerprints a configured input.
    fn input(&mut self, role: &str) -> Result<PathBuf> {
        let path = self.cfg.input(role)?;
        self.record_input(role, &path)?;
        Ok(path)
    }

    fn optional_input(&mut self, role: &str) -> Result<Option<PathBuf>> {
        let path = self.cfg.optional_input(role)?;
        if let Some(p) = &path {
            self.record_input(role, p)?;
        }
        Ok(path)
    }

    fn record_input(&mut self, role: &str, resolved: &Path) -> Result<()> {
        if !self.inputs.contains_key(role) {
            let configured = self.cfg.input_path_setting(role).unwrap_or(resolved);
            self.inputs.insert(
                role.to_owned(),
                InputRecord {
                    path: configured.display().to_string(),
                    sha256: io::file_digest(resolved)?,
                },
            );
        }
        Ok(())
    }

    fn output(&mut self, name: &str, bytes: Vec<u8>) {
        self.outputs.insert(name.to_owned(), bytes);
    }

    fn count(&mut self, key: &str, n: usize) {
        self.counts.insert(key.to_owned(), n as u64);
    }

    fn param(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.parameters.insert(key.to_owned(), value.into());
    }

    fn factor_set(&mut self) -> Result<EmissionFactorSet> {
        let path = self.optional_input("factors")?;
        let lib = load_factor_library(path.as_deref())?;
        let efs = lib.get(&self.cfg.factor_set)?.clone();
        self.param("factor_set", efs.name());
        Ok(efs)
    }

    fn inventory(&mut self) -> StageResult<&Inventory> {
        if self.inventory.is_none() {
            let inv = self.build_inventory().map_err(at("build-inventory"))?;
            self.inventory = Some(inv);
        }
        Ok(self.inventory.as_ref().expect("inventory built"))
    }

    fn build_inventory(&mut self) -> Result<Inventory> {
        let cfg = self.cfg;
        let links_path = self.input("links")?;
        let load = load_links(io::open(&links_path)?)?;
        self.count("links_input", load.input_records());
        self.count("links_accepted", load.accepted.len());
        self.count("links_rejected", load.rejected.len());
        let mut rejected = Vec::new();
        load.write_rejections(&mut rejected)?;
        self.output("rejected_links.csv", rejected);

        let efs = self.factor_set()?;
        self.param("growth_factor", growth_factor(&cfg.vmt));
        let links = load.accepted;

        let counties = ZoneShapes::read_json(&self.input("counties")?)?;
        let assignment = if cfg.prefer_link_county {
            assign_links_preferring_attribute(&links, &counties)
        } else {
            assign_links_to_zones(&links, &counties)
        };
        let county = aggregate_zone_emissions(
            &links,
            &assignment,
            counties.ids(),
            &efs,
            &cfg.vmt,
            ZoneKind::County,
        )?;
        self.count("counties", counties.len());
        self.count("links_unassigned_county", county.unassigned_links);
        self.output("county_emissions.csv", county.ledger.to_csv()?);

        let tract = match self.optional_input("tracts")? {
            None => None,
            Some(path) => {
                let tracts = ZoneShapes::read_json(&path)?;
                let assignment = assign_links_to_zones(&links, &tracts);
                let agg = aggregate_zone_emissions(
                    &links,
                    &assignment,
                    tracts.ids(),
                    &efs,
                    &cfg.vmt,
                    ZoneKind::Tract,
                )?;
                self.count("tracts", tracts.len());
                self.count("links_unassigned_tract", agg.unassigned_links);
                self.output("tract_emissions.csv", agg.ledger.to_csv()?);
                Some(agg.ledger)
            }
        };

        let mut shares = CsvBuffer::new(
            "vmt by route",
            &["route_type", "combination_pct", "single_unit_pct"],
        )?;
        for (route, share) in vmt_share_by_route(&links, &cfg.vmt) {
            shares.row([
                route.label().to_owned(),
                share.combination_pct.to_string(),
                share.single_unit_pct.to_string(),
            ])?;
        }
        self.output("vmt_by_route.csv", shares.into_bytes()?);

        Ok(Inventory {
            efs,
            counties,
            county: county.ledger,
            tract,
        })
    }

    fn damages(&mut self) -> StageResult<()> {
        self.inventory()?;
        self.compute_damages().map_err(at("damages"))
    }

    fn compute_damages(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let header = io::open(&self.input("msc_header")?)?;
        let values = io::open(&self.input("msc_values")?)?;
        let grid = MscGrid::read(header, values)?;
        let factor = vsl_factor(&cfg.vsl);
        let year = cfg.vsl.target_dollar_year;
        let scaled = scale_msc(&grid, factor, year)?;
        let inv = self.inventory.as_ref().expect("inventory built");

        let zones: Vec<(&ZoneId, &[crate::geometry::Polygon])> = inv.counties.iter().collect();
        let mscs = zones
            .par_iter()
            .map(|(id, parts)| zone_msc(parts, &scaled, id.as_str()).map(|m| ((*id).clone(), m)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .collect();
        let table = zone_damages(&inv.county, &mscs)?;
        let (co2_by_zone, co2_total) = co2_damages(&inv.county, &cfg.scc);

        let header = [
            "zone_id",
            "pollutant",
            "tons",
            "unit",
            "usd_per_ton",
            "damage_usd",
            "dollar_year",
        ];
        let mut by_zone = CsvBuffer::new("zone damages", &header)?;
        let year_s = year.to_string();
        let scc_year = cfg.scc.dollar_year.to_string();
        for (zone, row) in &table.by_zone {
            for (p, damage) in row {
                let msc = mscs
                    .get(zone)
                    .and_then(|m| m.get(p))
                    .copied()
                    .unwrap_or(0.0);
                by_zone.row([
                    zone.as_str(),
                    p.label(),
                    &inv.county.get(zone, *p).to_string(),
                    MASS_UNIT,
                    &msc.to_string(),
                    &damage.to_string(),
                    &year_s,
                ])?;
            }
            by_zone.row([
                zone.as_str(),
                Pollutant::Co2.label(),
                &inv.county.get(zone, Pollutant::Co2).to_string(),
                MASS_UNIT,
                &cfg.scc.value.to_string(),
                &co2_by_zone[zone].to_string(),
                &scc_year,
            ])?;
        }
        let by_zone = by_zone.into_bytes()?;

        let mut national = CsvBuffer::new(
            "national damages",
            &["pollutant", "tons", "unit", "damage_usd", "dollar_year"],
        )?;
        for (p, damage) in &table.national {
            national.row([
                p.label(),
                &inv.county.total(*p).to_string(),
                MASS_UNIT,
                &damage.to_string(),
                &year_s,
            ])?;
        }
        national.row([
            Pollutant::Co2.label(),
            &inv.county.total(Pollutant::Co2).to_string(),
            MASS_UNIT,
            &co2_total.to_string(),
            &scc_year,
        ])?;
        let national = national.into_bytes()?;

        let mut vsl = CsvBuffer::new(
            "vsl adjustment",
            &[
                "base_vsl_usd",
                "base_dollar_year",
                "income_factor_target",
                "income_factor_base",
                "cpi_target",
                "cpi_base",
                "factor",
                "adjusted_vsl_usd",
                "dollar_year",
            ],
        )?;
        vsl.row([
            grid.header.base_vsl.to_string(),
            grid.header.dollar_year.to_string(),
            cfg.vsl.income_factor_target.to_string(),
            cfg.vsl.income_factor_base.to_string(),
            cfg.vsl.cpi_target.to_string(),
            cfg.vsl.cpi_base.to_string(),
            factor.to_string(),
            (grid.header.base_vsl * factor).to_string(),
            year_s.clone(),
        ])?;
        let vsl = vsl.into_bytes()?;

        self.output("damages_by_zone.csv", by_zone);
        self.output("damages_national.csv", national);
        self.output("vsl_adjustment.csv", vsl);
        self.param("vsl_factor", factor);
        self.param("damages_dollar_year", year);
        Ok(())
    }

    fn sr_ledger(&mut self) -> StageResult<&DamageLedger> {
        self.inventory()?;
        if self.sr_ledger.is_none() {
            let ledger = self.compute_sr_ledger().map_err(at("sr-ledger"))?;
            self.sr_ledger = Some(ledger);
        }
        Ok(self.sr_ledger.as_ref().expect("ledger built"))
    }

    fn compute_sr_ledger(&mut self) -> Result<DamageLedger> {
        let sr = SrMatrix::read_csv(io::open(&self.input("sr_matrix")?)?)?;
        let inv = self.inventory.as_ref().expect("inventory built");
        let flows = receptor_damages(&inv.county, &sr)?;
        let zones: BTreeSet<ZoneId> = sr
            .universe()
            .iter()
            .chain(inv.county.zones())
            .cloned()
            .collect();
        let ledger = decompose(&flows, &zones);
        let c = check_conservation(&ledger, &flows, self.cfg.sr.tolerance)?;
        let year = self.cfg.sr_dollar_year();

        let mut flow_csv = CsvBuffer::new(
            "source-receptor flows",
            &[
                "pollutant",
                "source_id",
                "receptor_id",
                "damage_usd",
                "dollar_year",
            ],
        )?;
        let year_s = year.to_string();
        for ((p, s, r), d) in &flows.damages {
            flow_csv.row([p.label(), s.as_str(), r.as_str(), &d.to_string(), &year_s])?;
        }
        let importers = ledger.zones.values().filter(|z| z.net_importer()).count();
        self.messages.push(format!(
            "conservation check passed: sources ${} = receptors ${}, exported ${} = imported ${} (max relative error {:e})",
            c.source_total,
            c.receptor_total,
            c.exported_total,
            c.imported_total,
            c.max_relative_error()
        ));
        self.output("sr_ledger.csv", ledger.to_csv(year)?);
        self.output("sr_flows.csv", flow_csv.into_bytes()?);
        self.count("sr_zones", ledger.zones.len());
        self.count("sr_entries", sr.nnz());
        self.count("net_importers", importers);
        self.param("sr_dollar_year", year);
        Ok(ledger)
    }

    fn ej_regress(&mut self) -> StageResult<()> {
        self.inventory()?;
        if self.cfg.inputs.sr_matrix.is_some() {
            self.sr_ledger()?;
        }
        self.regressions()
    }

    fn regressions(&mut self) -> StageResult<()> {
        let stage = "ej-regress";
        let county_cov = read_covariates(
            io::open(&self.input("county_covariates").map_err(at(stage))?).map_err(at(stage))?,
        )
        .map_err(at(stage))?;
        let tract_cov = match self.optional_input("tract_covariates").map_err(at(stage))? {
            Some(p) => Some(read_covariates(io::open(&p).map_err(at(stage))?).map_err(at(stage))?),
            None => None,
        };
        let inv = self.inventory.as_ref().expect("inventory built");

        let mut specs = Vec::new();
        let mut levels: Vec<(
            ZoneKind,
            &BTreeMap<ZoneId, ZoneCovariates>,
            &EmissionsLedger,
        )> = vec![(ZoneKind::County, &county_cov, &inv.county)];
        match (&tract_cov, &inv.tract) {
            (Some(cov), Some(ledger)) => levels.push((ZoneKind::Tract, cov, ledger)),
            (Some(_), None) => self
                .messages
                .push("tract regressions skipped: no tract zones configured".into()),
            _ => {}
        }
        for &(level, cov, ledger) in &levels {
            for p in Pollutant::CRITERIA {
                specs.push(ModelSpec {
                    kind: ModelKind::Ols,
                    level,
                    pollutant: p,
                    design: build_design(cov, ledger, p),
                });
            }
        }
        let mut skipped = Vec::new();
        match &self.sr_ledger {
            None => skipped
                .push("importer logits skipped: no source-receptor matrix configured".to_owned()),
            Some(sr) => {
                for &(level, cov, _) in &levels {
                    if level == ZoneKind::Tract && cov.values().all(|c| c.parent_id.is_none()) {
                        skipped.push(
                            "tract importer logits skipped: tract covariates have no parent_id"
                                .into(),
                        );
                        continue;
                    }
                    for p in Pollutant::CRITERIA {
                        let design = build_logit_design(cov, |c| {
                            let county = match level {
                                ZoneKind::County => Some(&c.zone_id),
                                ZoneKind::Tract => c.parent_id.as_ref(),
                            }?;
                            sr.zones.get(county).map(|d| d.net_importer_for(p))
                        });
                        specs.push(ModelSpec {
                            kind: ModelKind::Logit,
                            level,
                            pollutant: p,
                            design,
                        });
                    }
                }
            }
        }
        self.messages.extend(skipped);

        let fits: Vec<FitOutcome> = specs.par_iter().map(ModelSpec::fit).collect();
        let mut outcomes = Vec::with_capacity(fits.len());
        for (spec, fit) in specs.iter().zip(fits) {
            match fit {
                Ok(f) => outcomes.push((spec, Status::Fitted(Box::new(f)))),
                Err(e) if spec.kind == ModelKind::Logit && e.kind() == ErrorKind::Numerical => {
                    self.messages.push(format!("{}: {e}", spec.label()));
                    outcomes.push((spec, Status::Failed(e)));
                }
                Err(e) => return Err(at(format!("{stage} ({})", spec.label()))(e)),
            }
        }
        for (spec, _) in &outcomes {
            let mut reasons: BTreeMap<String, u64> = BTreeMap::new();
            for (_, r) in &spec.design.dropped {
                *reasons.entry(r.label().to_owned()).or_default() += 1;
            }
            self.regression_dropped.insert(spec.key(), reasons);
        }
        let files = regression_reports(&outcomes).map_err(at(stage))?;
        for (name, bytes) in files {
            self.output(name, bytes);
        }
        self.count(
            "regressions_fitted",
            outcomes
                .iter()
                .filter(|(_, s)| matches!(s, Status::Fitted(_)))
                .count(),
        );
        Ok(())
    }

    fn modal_shift(&mut self) -> StageResult<()> {
        if self.cfg.modal_shift.baseline == BaselineSource::Inventory {
            self.inventory()?;
        }
        self.compute_modal_shift().map_err(at("modal-shift"))
    }

    fn compute_modal_shift(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let shipments = read_shipments(io::open(&self.input("shipments")?)?)?;
        let efs = match &self.inventory {
            Some(inv) => inv.efs.clone(),
            None => self.factor_set()?,
        };
        let derived = rail_ef_per_tonmile(&cfg.rail);
        let (rail, rail_source) = match cfg.modal_shift.rail_override()? {
            Some(table) => (PerPollutant::from_fn(|p| table[&p]), "override"),
            None => (derived, "fuel_chemistry"),
        };
        let baseline = match cfg.modal_shift.baseline {
            BaselineSource::Shipments => Baseline::ShipmentTonMiles,
            BaselineSource::Inventory => {
                let county = &self.inventory.as_ref().expect("inventory built").county;
                Baseline::Explicit(PerPollutant::from_fn(|p| county.total(p) * GRAMS_PER_TONNE))
            }
        };
        let model = ShiftModel::new(&shipments, &cfg.scenario, &efs, &rail, &baseline)?;

        let mut factors = CsvBuffer::new(
            "rail factors",
            &[
                "pollutant",
                "rail_g_per_gal",
                "rail_g_per_tonmile",
                "truck_g_per_tonmile",
                "source",
            ],
        )?;
        for p in Pollutant::ALL {
            let per_gal = match p {
                Pollutant::Pm25 => rail_ef_pm25_gal(&cfg.rail),
                Pollutant::So2 => rail_ef_so2(&cfg.rail),
                Pollutant::Nox => cfg.rail.nox_gal,
                Pollutant::Co2 => rail_ef_co2(&cfg.rail),
            };
            factors.row([
                p.label().to_owned(),
                if rail_source == "override" {
                    String::new()
                } else {
                    per_gal.to_string()
                },
                rail[p].to_string(),
                (efs.factor(VehicleClass::Combination, p) / cfg.scenario.payload).to_string(),
                rail_source.to_owned(),
            ])?;
        }

        let f = cfg.scenario.fraction_shifted;
        let mut scenario = CsvBuffer::new(
            "modal shift scenario",
            &[
                "f",
                "pollutant",
                "eligible_tonmiles",
                "delta_g",
                "baseline_g",
                "pct_change",
                "unit",
            ],
        )?;
        for p in Pollutant::ALL {
            scenario.row([
                f.to_string(),
                p.label().to_owned(),
                model.tonmiles.eligible.to_string(),
                (model.delta(f, p) + 0.0).to_string(),
                model.baseline[p].to_string(),
                model.pct_change(f, p).to_string(),
                "g".to_owned(),
            ])?;
        }

        let eligible = shipments
            .iter()
            .filter(|s| s.eligible(cfg.scenario.distance_threshold))
            .count();
        debug_assert_eq!(
            aggregate_tonmiles(&shipments, cfg.scenario.distance_threshold),
            model.tonmiles
        );
        self.output(
            "modal_shift_sweep.csv",
            sweep_csv(&model, &sweep_fractions())?,
        );
        self.output("modal_shift_scenario.csv", scenario.into_bytes()?);
        self.output("rail_factors.csv", factors.into_bytes()?);
        self.count("shipments", shipments.len());
        self.count("shipments_eligible", eligible);
        self.param("rail_factor_source", rail_source);
        Ok(())
    }
}

struct ModelSpec {
    kind: ModelKind,
    level: ZoneKind,
    pollutant: Pollutant,
    design: Design,
}

type FitOutcome = Result<FitResult>;

impl ModelSpec {
    fn fit(&self) -> FitOutcome {
        match self.kind {
            ModelKind::Ols => ols_fit(&self.design.x, &self.design.y, &self.design.columns),
            ModelKind::Logit => logit_fit(&self.design.x, &self.design.y, &self.design.columns),
        }
    }

    fn model_name(&self) -> &'static str {
        match self.kind {
            ModelKind::Ols => "ols",
            ModelKind::Logit => "logit",
        }
    }

    fn key(&self) -> String {
        format!(
            "{}/{}/{}",
            self.model_name(),
            self.level.label(),
            self.pollutant.label()
        )
    }

    fn label(&self) -> String {
        format!(
            "{} {} {}",
            self.model_name(),
            self.level.label(),
            self.pollutant.label()
        )
    }
}

enum Status {
    Fitted(Box<FitResult>),
    Failed(Error),
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Coefficient layout used in the wide tables: three decimals and stars.
fn table_estimate(fit: &FitResult, j: usize) -> String {
    format!(
        "{:.3}{}",
        fit.coefficients[j],
        significance_stars(fit.p_value(j))
    )
}

fn regression_reports(outcomes: &[(&ModelSpec, Status)]) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let mut files = Vec::new();

    let mut coefs = CsvBuffer::new(
        "regression coefficients",
        &[
            "model",
            "level",
            "pollutant",
            "term",
            "estimate",
            "std_error",
            "z_value",
            "p_value",
            "stars",
            "effect",
            "effect_kind",
        ],
    )?;
    let mut fits = CsvBuffer::new(
        "regression fit",
        &[
            "model",
            "level",
            "pollutant",
            "status",
            "n",
            "k",
            "dof",
            "r2",
            "adj_r2",
            "f_statistic",
            "f_p_value",
            "residual_std_error",
            "log_likelihood",
            "aic",
            "iterations",
            "dropped_zero_emissions",
            "dropped_total",
            "qq_max_deviation",
            "degenerate_residuals",
        ],
    )?;
    let mut qq = CsvBuffer::new(
        "q-q diagnostics",
        &[
            "model",
            "level",
            "pollutant",
            "rank",
            "theoretical_quantile",
            "sample_quantile",
        ],
    )?;
    let mut resid = CsvBuffer::new(
        "residual diagnostics",
        &[
            "model",
            "level",
            "pollutant",
            "zone_id",
            "observed",
            "fitted",
            "residual",
            "leverage",
            "studentized",
        ],
    )?;

    for (spec, status) in outcomes {
        let (m, level, p) = (
            spec.model_name(),
            spec.level.label(),
            spec.pollutant.label(),
        );
        let dropped_zero = spec
            .design
            .dropped_count(crate::econometrics::DropReason::ZeroEmissions)
            .to_string();
        let dropped_total = spec.design.dropped.len().to_string();
        let fit = match status {
            Status::Failed(e) => {
                let code = match e {
                    Error::Separation { .. } => "separation",
                    Error::NotConverged(_) => "not_converged",
                    Error::Insufficient { .. } => "insufficient_observations",
                    _ => "failed",
                };
                let mut row = vec![
                    m.to_owned(),
                    level.to_owned(),
                    p.to_owned(),
                    code.to_owned(),
                ];
                row.extend(std::iter::repeat_n(String::new(), 11));
                row.extend([dropped_zero, dropped_total, String::new(), String::new()]);
                fits.row(row)?;
                continue;
            }
            Status::Fitted(fit) => fit,
        };
        for (j, term) in fit.columns.iter().enumerate() {
            let (effect, effect_kind) = match (fit.kind, term.as_str()) {
                (_, "(Intercept)") => (String::new(), ""),
                (ModelKind::Ols, t) if t.starts_with("prop_") => {
                    (effect_percent(fit.coefficients[j]).to_string(), "percent")
                }
                (ModelKind::Ols, _) => (fit.coefficients[j].to_string(), "elasticity"),
                (ModelKind::Logit, t) if t.starts_with("prop_") => (
                    effect_percent(fit.coefficients[j]).to_string(),
                    "odds_percent",
                ),
                (ModelKind::Logit, _) => (String::new(), ""),
            };
            coefs.row([
                m,
                level,
                p,
                term,
                &fit.coefficients[j].to_string(),
                &fit.standard_errors[j].to_string(),
                &fit.z_score(j).to_string(),
                &fit.p_value(j).to_string(),
                significance_stars(fit.p_value(j)),
                &effect,
                effect_kind,
            ])?;
        }
        let diag: Option<Diagnostics> = (fit.kind == ModelKind::Ols).then(|| diagnostics(fit));
        fits.row([
            m.to_owned(),
            level.to_owned(),
            p.to_owned(),
            "ok".to_owned(),
            fit.n.to_string(),
            fit.k.to_string(),
            fit.dof.to_string(),
            opt(fit.r2),
            opt(fit.adj_r2),
            opt(fit.f_statistic),
            opt(fit.f_p_value()),
            opt(fit.residual_std_error),
            opt(fit.log_likelihood),
            opt(fit.aic),
            fit.iterations.to_string(),
            dropped_zero,
            dropped_total,
            opt(diag.as_ref().map(|d| qq_max_deviation(&d.qq))),
            diag.as_ref()
                .map(|d| d.degenerate.to_string())
                .unwrap_or_default(),
        ])?;
        if let Some(d) = diag {
            for (i, (t, s)) in d.qq.iter().enumerate() {
                qq.row([
                    m,
                    level,
                    p,
                    &(i + 1).to_string(),
                    &t.to_string(),
                    &s.to_string(),
                ])?;
            }
            for (i, zone) in spec.design.zones.iter().enumerate() {
                resid.row([
                    m,
                    level,
                    p,
                    zone.as_str(),
                    &spec.design.y[i].to_string(),
                    &fit.fitted[i].to_string(),
                    &fit.residuals[i].to_string(),
                    &fit.leverage[i].to_string(),
                    &d.studentized[i].to_string(),
                ])?;
            }
        }
    }

    for (kind, name) in [
        (ModelKind::Ols, "regression_table_ols.csv"),
        (ModelKind::Logit, "regression_table_logit.csv"),
    ] {
        let fitted: Vec<(&ModelSpec, &FitResult)> = outcomes
            .iter()
            .filter(|(s, _)| s.kind == kind)
            .filter_map(|(s, st)| match st {
                Status::Fitted(f) => Some((*s, f.as_ref())),
                Status::Failed(_) => None,
            })
            .collect();
        if !fitted.is_empty() {
            files.push((name, wide_table(&fitted)?));
        }
    }
    files.push(("regression_coefficients.csv", coefs.into_bytes()?));
    files.push(("regression_fit.csv", fits.into_bytes()?));
    files.push(("diagnostics_qq.csv", qq.into_bytes()?));
    files.push(("diagnostics_residuals.csv", resid.into_bytes()?));
    Ok(files)
}

/// One column per model; each term takes an estimate row and a parenthesised
/// standard-error row, followed by fit statistics.
fn wide_table(fits: &[(&ModelSpec, &FitResult)]) -> Result<Vec<u8>> {
    let mut header = vec!["term".to_owned()];
    header.extend(
        fits.iter()
            .map(|(s, _)| format!("{} {}", s.level.label(), s.pollutant.label())),
    );
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvBuffer::new("regression table", &header_refs)?;
    let terms = &fits[0].1.columns;
    for (j, term) in terms.iter().enumerate() {
        let mut est = vec![term.clone()];
        let mut se = vec![String::new()];
        for (_, f) in fits {
            est.push(table_estimate(f, j));
            se.push(format!("({:.3})", f.standard_errors[j]));
        }
        out.row(est)?;
        out.row(se)?;
    }
    type Stat = fn(&FitResult) -> String;
    let stats: [(&str, Stat); 7] = [
        ("Observations", |f| f.n.to_string()),
        ("R2", |f| {
            f.r2.map(|v| format!("{v:.3}")).unwrap_or_default()
        }),
        ("Adjusted R2", |f| {
            f.adj_r2.map(|v| format!("{v:.3}")).unwrap_or_default()
        }),
        ("Residual Std. Error", |f| {
            f.residual_std_error
                .map(|v| format!("{v:.3} (df = {})", f.dof))
                .unwrap_or_default()
        }),
        ("F Statistic", |f| {
            f.f_statistic
                .map(|v| {
                    let stars = significance_stars(f.f_p_value().unwrap_or(1.0));
                    format!("{v:.3}{stars} (df = {}; {})", f.k - 1, f.dof)
                })
                .unwrap_or_default()
        }),
        ("Log Likelihood", |f| {
            f.log_likelihood
                .map(|v| format!("{v:.3}"))
                .unwrap_or_default()
        }),
        ("Akaike Inf. Crit.", |f| {
            f.aic.map(|v| format!("{v:.3}")).unwrap_or_default()
        }),
    ];
    for (name, stat) in stats {
        let cells: Vec<String> = fits.iter().map(|(_, f)| stat(f)).collect();
        if cells.iter().all(String::is_empty) {
            continue;
        }
        let mut row = vec![name.to_owned()];
        row.extend(cells);
        out.row(row)?;
    }
    out.into_bytes()
}
