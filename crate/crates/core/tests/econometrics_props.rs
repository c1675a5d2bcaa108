//! OLS against the normal equations, logit against a derivative-free
//! likelihood search, and the residual diagnostics on simulated data.

// Oracles index explicitly to mirror the sums they check.
#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::BTreeMap;

use common::normal_equations;
use freightinv::econometrics::{
    build_design, build_logit_design, diagnostics, logit_fit, ols_fit, qq_max_deviation,
    DropReason, ZoneCovariates, DESIGN_COLUMNS,
};
use freightinv::{EmissionsLedger, Error, PerPollutant, Pollutant, ZoneId, ZoneKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("x{j}")).collect()
}

/// Intercept plus `k - 1` standard-normal regressors with different scales.
fn random_x(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..k)
                .map(|j| {
                    if j == 0 {
                        1.0
                    } else {
                        let z: f64 = StandardNormal.sample(rng);
                        z * (j as f64) + 0.5 * j as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn to_matrix(x: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x[0].len(), |i, j| x[i][j])
}

struct Instance {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    beta: Vec<f64>,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, k) = (50, 6);
    let x = random_x(&mut rng, n, k);
    let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = x
        .iter()
        .map(|row| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + 0.7 * noise
        })
        .collect();
    Instance { x, y, beta }
}

fn fit(inst: &Instance) -> freightinv::econometrics::FitResult {
    let k = inst.x[0].len();
    ols_fit(
        &to_matrix(&inst.x),
        &DVector::from_vec(inst.y.clone()),
        &names(k),
    )
    .unwrap()
}

#[test]
fn ols_matches_normal_equations_and_orthogonality() {
    for seed in 0..100 {
        let inst = instance(seed);
        let f = fit(&inst);
        let oracle = normal_equations(&inst.x, &inst.y);
        for (j, (a, b)) in f.coefficients.iter().zip(&oracle).enumerate() {
            assert!(
                (a - b).abs() <= 1e-8 * b.abs().max(1.0),
                "seed {seed} β{j}: {a} vs {b}"
            );
        }
        // Xᵀe = 0 up to rounding.
        for j in 0..inst.x[0].len() {
            let s: f64 = inst
                .x
                .iter()
                .zip(&f.residuals)
                .map(|(row, e)| row[j] * e)
                .sum();
            assert!(s.abs() < 1e-8, "seed {seed} column {j}: {s}");
        }
        let r2 = f.r2.unwrap();
        assert!((0.0..=1.0).contains(&r2) && f.adj_r2.unwrap() <= r2);
        let h: f64 = f.leverage.iter().sum();
        assert!((h - 6.0).abs() < 1e-9, "trace of hat matrix {h}");
    }
}

#[test]
fn shifting_the_response_moves_only_the_intercept() {
    for seed in 0..20 {
        let inst = instance(seed);
        let base = fit(&inst);
        let shifted = fit(&Instance {
            y: inst.y.iter().map(|v| v + 3.25).collect(),
            ..instance(seed)
        });
        assert!((shifted.coefficients[0] - base.coefficients[0] - 3.25).abs() < 1e-9);
        for j in 1..6 {
            assert!((shifted.coefficients[j] - base.coefficients[j]).abs() < 1e-9);
            assert!((shifted.standard_errors[j] - base.standard_errors[j]).abs() < 1e-9);
        }
    }
}

#[test]
fn scaling_a_regressor_rescales_its_coefficient() {
    for seed in 0..20 {
        let inst = instance(seed);
        let base = fit(&inst);
        let c = 7.5;
        let mut scaled = instance(seed);
        for row in &mut scaled.x {
            row[3] *= c;
        }
        let s = fit(&scaled);
        assert!((s.coefficients[3] * c - base.coefficients[3]).abs() < 1e-9);
        assert!((s.standard_errors[3] * c - base.standard_errors[3]).abs() < 1e-9);
        assert!((s.z_score(3) - base.z_score(3)).abs() < 1e-9);
        assert!((s.r2.unwrap() - base.r2.unwrap()).abs() < 1e-12);
    }
}

#[test]
fn planted_coefficients_are_recovered_within_two_standard_errors() {
    let (mut inside, mut total) = (0, 0);
    for seed in 0..100 {
        let inst = instance(1000 + seed);
        let f = fit(&inst);
        for j in 0..6 {
            total += 1;
            if (f.coefficients[j] - inst.beta[j]).abs() <= 2.0 * f.standard_errors[j] {
                inside += 1;
            }
        }
    }
    // Nominal coverage of ±2 SE with 44 residual degrees of freedom is about 95%.
    let coverage = inside as f64 / total as f64;
    assert!(coverage > 0.92, "coverage {coverage}");
}

#[test]
fn collinear_design_is_reported_by_name() {
    let inst = instance(3);
    let mut x = inst.x.clone();
    for row in &mut x {
        row[5] = 2.0 * row[2] - row[4];
    }
    match ols_fit(&to_matrix(&x), &DVector::from_vec(inst.y), &names(6)) {
        Err(Error::SingularDesign { columns }) => {
            assert!(columns.contains(&"x5".to_string()), "{columns:?}")
        }
        other => panic!("expected singular design, got {other:?}"),
    }
}

fn log_likelihood(x: &[Vec<f64>], y: &[f64], b: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta: f64 = row.iter().zip(b).map(|(a, c)| a * c).sum();
            yi * eta - (1.0 + eta.exp()).ln()
        })
        .sum()
}

/// Maximises the log-likelihood of a two-parameter logit by repeated grid
/// refinement. The likelihood is concave, so the zoom cannot lose the peak.
fn grid_search_mle(x: &[Vec<f64>], y: &[f64]) -> [f64; 2] {
    let mut centre = [0.0, 0.0];
    let mut step = 0.5;
    while step > 1e-7 {
        let mut best = (f64::NEG_INFINITY, centre);
        for i in -10..=10 {
            for j in -10..=10 {
                let b = [centre[0] + i as f64 * step, centre[1] + j as f64 * step];
                let ll = log_likelihood(x, y, &b);
                if ll > best.0 {
                    best = (ll, b);
                }
            }
        }
        if best.1 == centre {
            step /= 4.0;
        }
        centre = best.1;
    }
    centre
}

fn logit_sample(seed: u64, n: usize, b0: f64, b1: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            vec![1.0, z]
        })
        .collect();
    let y = x
        .iter()
        .map(|r| {
            let p = 1.0 / (1.0 + (-(b0 + b1 * r[1])).exp());
            if rng.random_bool(p) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (x, y)
}

#[test]
fn logit_matches_grid_search_and_score_identity() {
    for seed in 0..10 {
        let (x, y) = logit_sample(seed, 200, -0.4, 1.1);
        let f = logit_fit(&to_matrix(&x), &DVector::from_vec(y.clone()), &names(2)).unwrap();
        let oracle = grid_search_mle(&x, &y);
        for j in 0..2 {
            assert!(
                (f.coefficients[j] - oracle[j]).abs() < 1e-4,
                "seed {seed} β{j}: {} vs {}",
                f.coefficients[j],
                oracle[j]
            );
        }
        // With an intercept, the score equation forces Σ p̂ = Σ y.
        let sum_p: f64 = f.fitted.iter().sum();
        let sum_y: f64 = y.iter().sum();
        assert!((sum_p - sum_y).abs() < 1e-6, "{sum_p} vs {sum_y}");
        let ll = f.log_likelihood.unwrap();
        assert!((ll - log_likelihood(&x, &y, &f.coefficients)).abs() < 1e-8);
        assert!((f.aic.unwrap() - (4.0 - 2.0 * ll)).abs() < 1e-9);
    }
}

#[test]
fn logit_intercept_only_is_the_log_odds() {
    let y: Vec<f64> = (0..40)
        .map(|i| if i % 4 == 0 { 1.0 } else { 0.0 })
        .collect();
    let x = DMatrix::from_element(40, 1, 1.0);
    let f = logit_fit(&x, &DVector::from_vec(y), &names(1)).unwrap();
    assert!((f.coefficients[0] - (10.0f64 / 30.0).ln()).abs() < 1e-10);
}

#[test]
fn separable_logit_reports_separation() {
    let x: Vec<Vec<f64>> = (0..30).map(|i| vec![1.0, i as f64 - 14.5]).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| if r[1] > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let err = logit_fit(&to_matrix(&x), &DVector::from_vec(y), &names(2)).unwrap_err();
    assert!(matches!(err, Error::Separation { .. }), "{err:?}");
}

#[test]
fn studentized_residuals_of_normal_errors_follow_the_normal() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = random_x(&mut rng, 1000, 4);
    let y: Vec<f64> = x
        .iter()
        .map(|r| {
            let e: f64 = StandardNormal.sample(&mut rng);
            1.0 + 0.5 * r[1] - 0.25 * r[2] + 2.0 * e
        })
        .collect();
    let f = ols_fit(&to_matrix(&x), &DVector::from_vec(y), &names(4)).unwrap();
    let d = diagnostics(&f);
    assert!(!d.degenerate);
    let dev = qq_max_deviation(&d.qq);
    assert!(dev < 0.15, "max deviation {dev}");
    // Q-Q theoretical quantiles are symmetric.
    assert!((d.qq[0].0 + d.qq[999].0).abs() < 1e-12);
}

fn covariates(i: usize) -> ZoneCovariates {
    let f = i as f64;
    ZoneCovariates {
        zone_id: ZoneId::new(format!("Z{i:02}")),
        area: 100.0 + 37.0 * f,
        prop_black: 0.05 + 0.013 * f,
        prop_amerind: 0.01 + 0.002 * (f * 1.7).sin().abs(),
        prop_haw: 0.001 * (1.0 + (f * 0.3).cos()),
        prop_asian: 0.02 + 0.004 * f,
        prop_hisp: 0.1 + 0.02 * (f * 0.9).sin(),
        prop_twomore: 0.02 + 0.001 * f * f,
        total_pop: 1000.0 + 250.0 * f,
        med_income: if i == 3 {
            0.0
        } else {
            40000.0 + 1500.0 * f + 800.0 * (f * 2.3).cos()
        },
        parent_id: None,
    }
}

#[test]
fn ten_zone_design_has_expected_shape_and_drop_counts() {
    let cov: BTreeMap<ZoneId, ZoneCovariates> = (0..10)
        .map(|i| (covariates(i).zone_id.clone(), covariates(i)))
        .collect();
    let mut ledger = EmissionsLedger::new(ZoneKind::County, "greet");
    for i in 0..10 {
        let e = if i == 6 || i == 8 {
            0.0
        } else {
            1.0 + i as f64
        };
        ledger
            .insert(
                ZoneId::new(format!("Z{i:02}")),
                PerPollutant::from_fn(|_| e),
            )
            .unwrap();
    }
    ledger
        .insert(ZoneId::new("Z99"), PerPollutant::from_fn(|_| 4.0))
        .unwrap();

    let d = build_design(&cov, &ledger, Pollutant::Pm25);
    assert_eq!(d.columns, DESIGN_COLUMNS);
    assert_eq!((d.n(), d.x.ncols(), d.y.len()), (7, 10, 7));
    assert_eq!(d.dropped_count(DropReason::ZeroEmissions), 2);
    assert_eq!(d.dropped_count(DropReason::NonPositiveIncome), 1);
    assert_eq!(d.dropped_count(DropReason::MissingCovariates), 1);
    assert!(d.x.column(0).iter().all(|&v| v == 1.0));
    assert!((d.y[0] - 1.0f64.ln()).abs() < 1e-15);
    // Seven rows cannot identify ten coefficients.
    assert!(matches!(
        ols_fit(&d.x, &d.y, &d.columns),
        Err(Error::Insufficient { n: 7, k: 10 })
    ));

    let l = build_logit_design(&cov, |c| {
        (c.zone_id.as_str() != "Z05").then_some(c.area > 250.0)
    });
    assert_eq!(l.n(), 8);
    assert_eq!(l.dropped_count(DropReason::MissingOutcome), 1);
    assert!(l.y.iter().all(|&v| v == 0.0 || v == 1.0));
}
