//! Log-linear emission regressions, importer logit, and residual diagnostics.
//!
//! Design rows follow one fixed column order: intercept, log area, the six
//! population shares (un-logged), log median income, log total population.

use std::collections::BTreeMap;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal};

use crate::error::{Error, Result};
use crate::inventory::EmissionsLedger;
use crate::types::{Pollutant, ZoneId};

pub const DESIGN_COLUMNS: [&str; 10] = [
    "(Intercept)",
    "log_area",
    "prop_black",
    "prop_amerind",
    "prop_haw",
    "prop_asian",
    "prop_twomore",
    "prop_hisp",
    "log_med_income",
    "log_total_pop",
];

/// Demographic and size attributes of one zone.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ZoneCovariates {
    pub zone_id: ZoneId,
    pub area: f64,
    pub prop_black: f64,
    pub prop_amerind: f64,
    pub prop_haw: f64,
    pub prop_asian: f64,
    pub prop_hisp: f64,
    pub prop_twomore: f64,
    pub total_pop: f64,
    pub med_income: f64,
    /// County holding a tract; used to attach county importer status to tracts.
    #[serde(default, deserialize_with = "empty_as_none")]
    pub parent_id: Option<ZoneId>,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<ZoneId>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .map(ZoneId))
}

impl ZoneCovariates {
    fn shares(&self) -> [f64; 6] {
        [
            self.prop_black,
            self.prop_amerind,
            self.prop_haw,
            self.prop_asian,
            self.prop_twomore,
            self.prop_hisp,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let shares = self.shares();
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Data(format!(
                "zone {}: population shares must lie in [0, 1]",
                self.zone_id
            )));
        }
        if shares.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::Data(format!(
                "zone {}: mutually exclusive population shares sum above 1",
                self.zone_id
            )));
        }
        if !(self.total_pop >= 0.0) || !self.area.is_finite() || !self.med_income.is_finite() {
            return Err(Error::Data(format!(
                "zone {}: invalid population, area or income",
                self.zone_id
            )));
        }
        Ok(())
    }

    fn design_row(&self) -> [f64; 10] {
        [
            1.0,
            self.area.ln(),
            self.prop_black,
            self.prop_amerind,
            self.prop_haw,
            self.prop_asian,
            self.prop_twomore,
            self.prop_hisp,
            self.med_income.ln(),
            self.total_pop.ln(),
        ]
    }
}

/// Reads covariates: `zone_id,area,prop_black,prop_amerind,prop_haw,prop_asian,
/// prop_hisp,prop_twomore,total_pop,med_income[,parent_id]`.
pub fn read_covariates<R: Read>(source: R) -> Result<BTreeMap<ZoneId, ZoneCovariates>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut out = BTreeMap::new();
    for row in reader.deserialize::<ZoneCovariates>() {
        let row = row.map_err(|e| Error::csv("covariates", e))?;
        row.validate()?;
        if out.insert(row.zone_id.clone(), row).is_some() {
            return Err(Error::Data("duplicate zone in covariates".into()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    ZeroEmissions,
    NonPositiveIncome,
    ZeroPopulation,
    NonPositiveArea,
    MissingCovariates,
    MissingOutcome,
}

impl DropReason {
    pub fn label(self) -> &'static str {
        match self {
            DropReason::ZeroEmissions => "zero emissions",
            DropReason::NonPositiveIncome => "non-positive median income",
            DropReason::ZeroPopulation => "zero population",
            DropReason::NonPositiveArea => "non-positive area",
            DropReason::MissingCovariates => "no covariates",
            DropReason::MissingOutcome => "no outcome",
        }
    }
}

/// Regression inputs with the zones that were left out.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub columns: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub zones: Vec<ZoneId>,
    pub dropped: Vec<(ZoneId, DropReason)>,
}

impl Design {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dropped_count(&self, reason: DropReason) -> usize {
        self.dropped.iter().filter(|(_, r)| *r == reason).count()
    }
}

fn covariate_problem(c: &ZoneCovariates) -> Option<DropReason> {
    if !(c.med_income > 0.0) {
        Some(DropReason::NonPositiveIncome)
    } else if !(c.total_pop > 0.0) {
        Some(DropReason::ZeroPopulation)
    } else if !(c.area > 0.0) {
        Some(DropReason::NonPositiveArea)
    } else {
        None
    }
}

fn assemble(rows: Vec<(ZoneId, [f64; 10], f64)>, dropped: Vec<(ZoneId, DropReason)>) -> Design {
    let n = rows.len();
    let x = DMatrix::from_fn(n, DESIGN_COLUMNS.len(), |i, j| rows[i].1[j]);
    let y = DVector::from_iterator(n, rows.iter().map(|r| r.2));
    Design {
        columns: DESIGN_COLUMNS.iter().map(|s| s.to_string()).collect(),
        x,
        y,
        zones: rows.into_iter().map(|r| r.0).collect(),
        dropped,
    }
}

/// Log-emission design for one pollutant. Zones with zero emissions have no
/// logarithm and are dropped and counted.
pub fn build_design(
    covariates: &BTreeMap<ZoneId, ZoneCovariates>,
    ledger: &EmissionsLedger,
    pollutant: Pollutant,
) -> Design {
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (zone, c) in covariates {
        let e = ledger.get(zone, pollutant);
        if !(e > 0.0) {
            dropped.push((zone.clone(), DropReason::ZeroEmissions));
        } else if let Some(reason) = covariate_problem(c) {
            dropped.push((zone.clone(), reason));
        } else {
            rows.push((zone.clone(), c.design_row(), e.ln()));
        }
    }
    for zone in ledger.zones() {
        if !covariates.contains_key(zone) && ledger.get(zone, pollutant) > 0.0 {
            dropped.push((zone.clone(), DropReason::MissingCovariates));
        }
    }
    assemble(rows, dropped)
}

/// Binary-outcome design; `outcome` gives the 0/1 response for a zone.
pub fn build_logit_design(
    covariates: &BTreeMap<ZoneId, ZoneCovariates>,
    outcome: impl Fn(&ZoneCovariates) -> Option<bool>,
) -> Design {
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for (zone, c) in covariates {
        if let Some(reason) = covariate_problem(c) {
            dropped.push((zone.clone(), reason));
            continue;
        }
        match outcome(c) {
            Some(flag) => rows.push((zone.clone(), c.design_row(), if flag { 1.0 } else { 0.0 })),
            None => dropped.push((zone.clone(), DropReason::MissingOutcome)),
        }
    }
    assemble(rows, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ols,
    Logit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kind: ModelKind,
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub n: usize,
    pub k: usize,
    /// Residual degrees of freedom, `n - k`.
    pub dof: usize,
    /// Response residuals `y - fitted`.
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    /// Diagonal of the (weighted) hat matrix.
    pub leverage: Vec<f64>,
    pub r2: Option<f64>,
    pub adj_r2: Option<f64>,
    pub f_statistic: Option<f64>,
    pub residual_std_error: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub aic: Option<f64>,
    pub iterations: usize,
}

impl FitResult {
    pub fn z_score(&self, j: usize) -> f64 {
        self.coefficients[j] / self.standard_errors[j]
    }

    /// Two-sided p-value under the normal approximation.
    pub fn p_value(&self, j: usize) -> f64 {
        two_sided_normal_p(self.z_score(j))
    }

    /// p-value of the overall F test (OLS only).
    pub fn f_p_value(&self) -> Option<f64> {
        let f = self.f_statistic?;
        if self.k < 2 || self.dof == 0 {
            return None;
        }
        if f.is_infinite() {
            return Some(0.0);
        }
        let dist = FisherSnedecor::new((self.k - 1) as f64, self.dof as f64).ok()?;
        Some(1.0 - dist.cdf(f))
    }
}

pub fn two_sided_normal_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let n = Normal::standard();
    2.0 * (1.0 - n.cdf(z.abs()))
}

/// `***` below 0.01, `**` below 0.05, `*` below 0.10.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// Thin QR pieces of a full-column-rank matrix.
struct Qr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn qr_full_rank(x: &DMatrix<f64>, columns: &[String]) -> Result<Qr> {
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let k = r.ncols();
    let scale = (0..k).map(|j| x.column(j).norm()).fold(0.0, f64::max);
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE) * (x.nrows().max(k) as f64).sqrt();
    if let Some(j) = (0..k).find(|&j| r[(j, j)].abs() <= tol) {
        return Err(Error::SingularDesign {
            columns: collinear_set(&r, j, tol, columns),
        });
    }
    Ok(Qr { q, r })
}

/// Column `j` plus the earlier columns it is a combination of.
fn collinear_set(r: &DMatrix<f64>, j: usize, tol: f64, columns: &[String]) -> Vec<String> {
    let name = |i: usize| columns.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
    let mut set = Vec::new();
    if j > 0 {
        let head = r.view((0, 0), (j, j)).into_owned();
        let rhs = r.view((0, j), (j, 1)).into_owned();
        if let Some(c) = head.solve_upper_triangular(&rhs) {
            let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            set.extend(
                (0..j)
                    .filter(|&i| c[i].abs() > 1e-8 * cmax.max(tol))
                    .map(name),
            );
        }
    }
    set.push(name(j));
    set
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>, columns: &[String]) -> Result<(usize, usize)> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Data(format!(
            "design has {n} rows but response has {}",
            y.len()
        )));
    }
    if columns.len() != k {
        return Err(Error::Data(format!(
            "{} column names for {k} columns",
            columns.len()
        )));
    }
    if n <= k {
        return Err(Error::Insufficient { n, k });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Data(
            "design or response contains non-finite values".into(),
        ));
    }
    Ok((n, k))
}

fn has_intercept(x: &DMatrix<f64>) -> bool {
    (0..x.ncols()).any(|j| {
        let c = x.column(j);
        let first = c[0];
        first != 0.0 && c.iter().all(|&v| v == first)
    })
}

/// Least squares by Householder QR with classical standard errors.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, columns: &[String]) -> Result<FitResult> {
    let (n, k) = check_shapes(x, y, columns)?;
    let Qr { q, r } = qr_full_rank(x, columns)?;
    let qty = q.transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign {
            columns: columns.to_vec(),
        })?;
    let fitted = x * &beta;
    let resid = y - &fitted;
    let ssr = resid.norm_squared();
    let dof = n - k;
    let sigma2 = ssr / dof as f64;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::SingularDesign {
            columns: columns.to_vec(),
        })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let se: Vec<f64> = (0..k).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()).collect();
    let leverage: Vec<f64> = (0..n).map(|i| q.row(i).norm_squared()).collect();

    let intercept = has_intercept(x);
    let sst = if intercept {
        let mean = y.mean();
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    let r2 = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let model_df = if intercept { k - 1 } else { k };
    let adj_r2 = 1.0 - (1.0 - r2) * ((n - usize::from(intercept)) as f64) / dof as f64;
    let f_statistic = if model_df == 0 {
        None
    } else if ssr == 0.0 {
        Some(f64::INFINITY)
    } else {
        Some(((sst - ssr).max(0.0) / model_df as f64) / sigma2)
    };

    Ok(FitResult {
        kind: ModelKind::Ols,
        columns: columns.to_vec(),
        coefficients: beta.iter().copied().collect(),
        standard_errors: se,
        n,
        k,
        dof,
        residuals: resid.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        leverage,
        r2: Some(r2),
        adj_r2: Some(adj_r2.min(r2)),
        f_statistic,
        residual_std_error: Some(sigma2.sqrt()),
        log_likelihood: None,
        aic: None,
        iterations: 1,
    })
}

/// IRLS stops when the largest coefficient change drops below this.
pub const LOGIT_TOLERANCE: f64 = 1e-8;
pub const LOGIT_MAX_ITERATIONS: usize = 100;

/// Linear predictors beyond this magnitude mean fitted probabilities are
/// numerically 0 or 1, which only happens when coefficients run off to infinity.
const SEPARATION_ETA: f64 = 30.0;

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Maximum-likelihood logistic regression by iteratively reweighted least squares.
pub fn logit_fit(x: &DMatrix<f64>, y: &DVector<f64>, columns: &[String]) -> Result<FitResult> {
    let (n, k) = check_shapes(x, y, columns)?;
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Data("logit response must be 0 or 1".into()));
    }
    // Rank problems in the raw design are reported as such, not as separation.
    qr_full_rank(x, columns)?;

    let mut beta = DVector::<f64>::zeros(k);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < LOGIT_MAX_ITERATIONS {
        iterations += 1;
        let eta = x * &beta;
        let p = eta.map(sigmoid);
        let w = p.map(|v| v * (1.0 - v));
        let sw = w.map(f64::sqrt);
        // Weighted least squares for the working response z = eta + (y - p) / w,
        // scaled by sqrt(w) so that sqrt(w) * z = sqrt(w) * eta + (y - p) / sqrt(w).
        let mut xw = x.clone();
        let mut zw = DVector::zeros(n);
        for i in 0..n {
            xw.row_mut(i).scale_mut(sw[i]);
            zw[i] = sw[i] * eta[i] + (y[i] - p[i]) / sw[i];
        }
        let Ok(Qr { q, r }) = qr_full_rank(&xw, columns) else {
            return Err(Error::Separation { iterations });
        };
        let next = r
            .solve_upper_triangular(&(q.transpose() * &zw))
            .ok_or(Error::Separation { iterations })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Separation { iterations });
        }
        let step = (&next - &beta).amax();
        beta = next;
        if (x * &beta).amax() > SEPARATION_ETA {
            return Err(Error::Separation { iterations });
        }
        if step < LOGIT_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged(format!(
            "logit after {LOGIT_MAX_ITERATIONS} iterations"
        )));
    }

    let eta = x * &beta;
    let p = eta.map(sigmoid);
    let w = p.map(|v| v * (1.0 - v));
    let mut xw = x.clone();
    for i in 0..n {
        xw.row_mut(i).scale_mut(w[i].sqrt());
    }
    let Qr { q, r } = qr_full_rank(&xw, columns).map_err(|_| Error::Separation { iterations })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::Separation { iterations })?;
    let cov = &r_inv * r_inv.transpose();
    let se = (0..k).map(|j| cov[(j, j)].sqrt()).collect();
    let log_likelihood: f64 = (0..n).map(|i| y[i] * eta[i] - softplus(eta[i])).sum();
    let aic = 2.0 * k as f64 - 2.0 * log_likelihood;

    Ok(FitResult {
        kind: ModelKind::Logit,
        columns: columns.to_vec(),
        coefficients: beta.iter().copied().collect(),
        standard_errors: se,
        n,
        k,
        dof: n - k,
        residuals: (0..n).map(|i| y[i] - p[i]).collect(),
        fitted: p.iter().copied().collect(),
        leverage: (0..n).map(|i| q.row(i).norm_squared()).collect(),
        r2: None,
        adj_r2: None,
        f_statistic: None,
        residual_std_error: None,
        log_likelihood: Some(log_likelihood),
        aic: Some(aic),
        iterations,
    })
}

/// Percent change in the response for a one-unit change in an un-logged
/// predictor of a log-response model, `100 × (e^β − 1)`.
/// For logged predictors the coefficient itself is the elasticity.
pub fn effect_percent(beta: f64) -> f64 {
    100.0 * beta.exp_m1()
}

/// Normal Q-Q pairs `(theoretical, sample)` using plotting positions `(i − 0.5)/n`.
pub fn qq_points(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let normal = Normal::standard();
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, s)| (normal.inverse_cdf((i as f64 + 0.5) / n), s))
        .collect()
}

/// Largest gap between each Q-Q point's plotting position and the standard
/// normal CDF of its sample value. Zero for a perfect normal sample.
pub fn qq_max_deviation(qq: &[(f64, f64)]) -> f64 {
    let normal = Normal::standard();
    let n = qq.len() as f64;
    qq.iter()
        .enumerate()
        .map(|(i, &(_, s))| (normal.cdf(s) - (i as f64 + 0.5) / n).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// Q-Q pairs of the studentized residuals against the standard normal.
    pub qq: Vec<(f64, f64)>,
    /// Internally studentized residuals `e_i / (σ̂ √(1 − h_ii))`.
    pub studentized: Vec<f64>,
    /// Residuals have no spread, so studentization is meaningless. Studentized
    /// values are reported as zero when σ̂ itself is zero.
    pub degenerate: bool,
}

pub fn diagnostics(fit: &FitResult) -> Diagnostics {
    let n = fit.residuals.len();
    let sigma = fit.residual_std_error.unwrap_or_else(|| {
        let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
        (ssr / fit.dof.max(1) as f64).sqrt()
    });
    let mean = fit.residuals.iter().sum::<f64>() / n.max(1) as f64;
    let spread = fit
        .residuals
        .iter()
        .map(|e| (e - mean).abs())
        .fold(0.0, f64::max);
    let scale = fit.residuals.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let degenerate = spread <= 1e-12 * scale.max(1e-300) || sigma == 0.0;

    let studentized: Vec<f64> = fit
        .residuals
        .iter()
        .zip(&fit.leverage)
        .map(|(&e, &h)| {
            let denom = sigma * (1.0 - h).max(0.0).sqrt();
            if sigma == 0.0 || denom == 0.0 {
                0.0
            } else {
                e / denom
            }
        })
        .collect();
    Diagnostics {
        qq: qq_points(&studentized),
        studentized,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn perfect_line() {
        let x = DMatrix::from_row_slice(5, 2, &[1., 0., 1., 1., 1., 2., 1., 3., 1., 4.]);
        let y = DVector::from_iterator(5, (0..5).map(|i| 2.0 * i as f64 + 1.0));
        let fit = ols_fit(&x, &y, &names(2)).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((fit.r2.unwrap() - 1.0).abs() < 1e-12);
        assert!(fit.standard_errors.iter().all(|&s| s < 1e-6));
        assert_eq!(fit.dof, 3);
    }

    #[test]
    fn duplicated_column_names_the_collinear_pair() {
        let x = DMatrix::from_row_slice(4, 3, &[1., 2., 2., 1., 3., 3., 1., 5., 5., 1., 7., 7.]);
        let y = DVector::from_vec(vec![1., 2., 3., 5.]);
        match ols_fit(&x, &y, &names(3)) {
            Err(Error::SingularDesign { columns }) => assert_eq!(columns, ["x1", "x2"]),
            other => panic!("expected singular design, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_row_slice(2, 2, &[1., 0., 1., 1.]);
        let y = DVector::from_vec(vec![0., 1.]);
        assert!(matches!(
            ols_fit(&x, &y, &names(2)),
            Err(Error::Insufficient { n: 2, k: 2 })
        ));
    }

    #[test]
    fn intercept_only_logit() {
        let y = DVector::from_iterator(20, (0..20).map(|i| if i < 5 { 1.0 } else { 0.0 }));
        let x = DMatrix::from_element(20, 1, 1.0);
        let fit = logit_fit(&x, &y, &names(1)).unwrap();
        assert!((fit.coefficients[0] - (0.25f64 / 0.75).ln()).abs() < 1e-8);
        let ll = fit.log_likelihood.unwrap();
        assert_eq!(fit.aic.unwrap(), 2.0 - 2.0 * ll);
    }

    #[test]
    fn separable_logit_is_reported() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_iterator(10, (0..10).map(|i| if i >= 5 { 1.0 } else { 0.0 }));
        assert!(matches!(
            logit_fit(&x, &y, &names(2)),
            Err(Error::Separation { .. })
        ));
    }

    #[test]
    fn logit_rejects_non_binary_response() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let y = DVector::from_vec(vec![0.0, 1.0, 0.5, 1.0]);
        assert!(matches!(logit_fit(&x, &y, &names(1)), Err(Error::Data(_))));
    }

    #[test]
    fn effect_examples() {
        assert_eq!(effect_percent(0.0), 0.0);
        assert!((effect_percent(1.055) - 187.2).abs() < 0.1);
        assert!((effect_percent(3.054) - 2020.0).abs() < 1.0);
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(significance_stars(0.001), "***");
        assert_eq!(significance_stars(0.03), "**");
        assert_eq!(significance_stars(0.07), "*");
        assert_eq!(significance_stars(0.5), "");
        assert!((two_sided_normal_p(1.959_963_984_540_054) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn exact_fit_studentizes_to_zero() {
        let x = DMatrix::from_row_slice(3, 2, &[1., 0., 1., 1., 1., 2.]);
        let y = DVector::from_vec(vec![1., 3., 5.]);
        let fit = ols_fit(&x, &y, &names(2)).unwrap();
        let d = diagnostics(&fit);
        assert!(d.studentized.iter().all(|&r| r.abs() < 1e-6));
        assert!(d.degenerate);
    }

    #[test]
    fn constant_residuals_are_flagged() {
        let mut fit = ols_fit(
            &DMatrix::from_row_slice(4, 1, &[1., 2., 3., 4.]),
            &DVector::from_vec(vec![1., 2.2, 2.9, 4.1]),
            &names(1),
        )
        .unwrap();
        fit.residuals = vec![0.5; 4];
        assert!(diagnostics(&fit).degenerate);
    }

    #[test]
    fn qq_plotting_positions() {
        let qq = qq_points(&[3.0, -1.0, 0.5]);
        assert_eq!(qq.iter().map(|p| p.1).collect::<Vec<_>>(), [-1.0, 0.5, 3.0]);
        assert!(qq[1].0.abs() < 1e-12);
        assert!((qq[0].0 + qq[2].0).abs() < 1e-12);
    }

    #[test]
    fn covariate_validation() {
        let text = "zone_id,area,prop_black,prop_amerind,prop_haw,prop_asian,prop_hisp,prop_twomore,total_pop,med_income\n\
                    A,10,0.5,0.0,0.0,0.0,0.6,0.0,100,50000\n";
        assert!(read_covariates(text.as_bytes()).is_err());
        let ok = "zone_id,area,prop_black,prop_amerind,prop_haw,prop_asian,prop_hisp,prop_twomore,total_pop,med_income,parent_id\n\
                  T1,10,0.2,0.0,0.0,0.1,0.3,0.0,100,50000,C1\nT2,10,0.2,0.0,0.0,0.1,0.3,0.0,100,50000,\n";
        let cov = read_covariates(ok.as_bytes()).unwrap();
        assert_eq!(cov[&ZoneId::from("T1")].parent_id, Some(ZoneId::from("C1")));
        assert_eq!(cov[&ZoneId::from("T2")].parent_id, None);
    }
}
