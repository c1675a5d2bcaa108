//! Run configuration for batch pipelines.
//!
//! ```toml
//! factor_set = "greet"
//! workers = 4
//! output_dir = "out"
//!
//! [inputs]
//! links = "links.csv"
//! counties = "counties.json"
//! tracts = "tracts.json"
//! county_covariates = "county_covariates.csv"
//! tract_covariates = "tract_covariates.csv"
//! msc_header = "msc_header.toml"
//! msc_values = "msc_values.csv"
//! sr_matrix = "sr_matrix.csv"
//! shipments = "shipments.csv"
//! factors = "factors.toml"
//!
//! [vmt]       # VmtParams
//! [vsl]       # VslAdjustment
//! [scc]       # SocialCostOfCarbon
//! [scenario]  # ShiftScenario
//! [rail]      # RailFuelParams
//! ```
//!
//! Relative input paths are resolved against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::damages::{SocialCostOfCarbon, VslAdjustment};
use crate::error::{Error, Result};
use crate::modalshift::{RailFuelParams, ShiftScenario};
use crate::network::VmtParams;
use crate::types::Pollutant;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub links: Option<PathBuf>,
    pub counties: Option<PathBuf>,
    pub tracts: Option<PathBuf>,
    pub county_covariates: Option<PathBuf>,
    pub tract_covariates: Option<PathBuf>,
    pub msc_header: Option<PathBuf>,
    pub msc_values: Option<PathBuf>,
    pub sr_matrix: Option<PathBuf>,
    pub shipments: Option<PathBuf>,
    /// Extra emission factor sets; the built-in `greet` and `tong` are always available.
    pub factors: Option<PathBuf>,
}

/// Source-receptor matrix settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrSettings {
    /// Dollar year of the matrix values; defaults to the VSL target year.
    pub dollar_year: Option<i32>,
    /// Largest relative imbalance accepted by the conservation check.
    pub tolerance: f64,
}

impl Default for SrSettings {
    fn default() -> Self {
        SrSettings {
            dollar_year: None,
            tolerance: 1e-9,
        }
    }
}

/// What the modal-shift percent changes are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSource {
    /// Every shipment ton-mile carried by combination trucks.
    #[default]
    Shipments,
    /// National totals of the county emissions inventory.
    Inventory,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModalShiftSettings {
    pub baseline: BaselineSource,
    /// Rail g/ton-mile factors that replace the fuel-chemistry derivation,
    /// keyed by pollutant label.
    pub rail_override: Option<BTreeMap<String, f64>>,
}

impl ModalShiftSettings {
    pub fn rail_override(&self) -> Result<Option<BTreeMap<Pollutant, f64>>> {
        let Some(raw) = &self.rail_override else {
            return Ok(None);
        };
        let mut out = BTreeMap::new();
        for (k, &v) in raw {
            let p: Pollutant = k.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "rail override for {p} must be non-negative"
                )));
            }
            out.insert(p, v);
        }
        if let Some(missing) = Pollutant::ALL.iter().find(|p| !out.contains_key(p)) {
            return Err(Error::Config(format!("rail override is missing {missing}")));
        }
        Ok(Some(out))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_factor_set")]
    pub factor_set: String,
    /// Assign links to counties by their county attribute when it names a known
    /// county, falling back to the centroid test otherwise.
    #[serde(default = "default_true")]
    pub prefer_link_county: bool,
    /// Execution detail, not part of the run's identity.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub inputs: InputPaths,
    #[serde(default)]
    pub vmt: VmtParams,
    #[serde(default)]
    pub vsl: VslAdjustment,
    #[serde(default)]
    pub scc: SocialCostOfCarbon,
    #[serde(default)]
    pub scenario: ShiftScenario,
    #[serde(default)]
    pub rail: RailFuelParams,
    #[serde(default)]
    pub modal_shift: ModalShiftSettings,
    #[serde(default)]
    pub sr: SrSettings,
    /// Directory relative paths are resolved against; set when loading.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_factor_set() -> String {
    "greet".into()
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == Some(0) {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        self.vmt.validate()?;
        self.vsl.validate()?;
        self.rail.validate()?;
        self.scenario.validate()?;
        self.modal_shift.rail_override()?;
        if !(self.scc.value.is_finite() && self.scc.value >= 0.0) {
            return Err(Error::Config(
                "social cost of carbon must be non-negative".into(),
            ));
        }
        if !(self.sr.tolerance >= 0.0) {
            return Err(Error::Config(
                "conservation tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Resolved path of an input, or an error naming the missing setting.
    pub fn input(&self, role: &str) -> Result<PathBuf> {
        let path = self
            .input_path_setting(role)
            .ok_or_else(|| Error::Config(format!("inputs.{role} is not set")))?;
        let resolved = self.resolve(path);
        if !resolved.exists() {
            return Err(Error::MissingInput {
                role: role.replace('_', " "),
                path: resolved,
            });
        }
        Ok(resolved)
    }

    /// Resolved path of an optional input; missing files are still an error.
    pub fn optional_input(&self, role: &str) -> Result<Option<PathBuf>> {
        match self.input_path_setting(role) {
            None => Ok(None),
            Some(_) => self.input(role).map(Some),
        }
    }

    pub fn input_path_setting(&self, role: &str) -> Option<&Path> {
        let i = &self.inputs;
        match role {
            "links" => i.links.as_deref(),
            "counties" => i.counties.as_deref(),
            "tracts" => i.tracts.as_deref(),
            "county_covariates" => i.county_covariates.as_deref(),
            "tract_covariates" => i.tract_covariates.as_deref(),
            "msc_header" => i.msc_header.as_deref(),
            "msc_values" => i.msc_values.as_deref(),
            "sr_matrix" => i.sr_matrix.as_deref(),
            "shipments" => i.shipments.as_deref(),
            "factors" => i.factors.as_deref(),
            _ => None,
        }
    }

    /// Content hash of the settings that define a run. Worker count and
    /// output location are excluded so they cannot change the manifest.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        crate::io::digest_bytes(&canonical)
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    /// Dollar year of source-receptor damages.
    pub fn sr_dollar_year(&self) -> i32 {
        self.sr.dollar_year.unwrap_or(self.vsl.target_dollar_year)
    }
}
