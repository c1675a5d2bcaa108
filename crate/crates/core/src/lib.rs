//! Freight trucking emissions inventory and pollution damage accounting.
//!
//! The pipeline runs from road-link traffic counts ([`network`]) through zone
//! emissions ([`inventory`]), monetized damages ([`damages`]), source-receptor
//! import/export ledgers ([`srledger`]), demographic regressions
//! ([`econometrics`]) and truck-to-rail scenarios ([`modalshift`]).
//! [`pipeline`] wires the stages together for batch runs.

// Validation uses `!(x > 0.0)` on purpose so that NaN is rejected along with
// non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod damages;
pub mod econometrics;
pub mod error;
pub mod geometry;
pub mod inventory;
pub mod io;
pub mod modalshift;
pub mod network;
pub mod pipeline;
pub mod srledger;
pub mod types;

pub use config::RunConfig;
pub use error::{Error, ErrorKind, Result};
pub use geometry::{CellIndex, GridSpec, Point, Polygon, Rect, ZoneShapes};
pub use inventory::{EmissionFactorSet, EmissionsLedger, FactorLibrary, VehicleClass};
pub use network::{RoadLink, RouteType, VmtParams};
pub use pipeline::{run, Command, RunManifest, RunOptions, RunReport, StageError};
pub use types::{PerPollutant, Pollutant, ZoneId, ZoneKind, GRAMS_PER_TONNE, MASS_UNIT};
