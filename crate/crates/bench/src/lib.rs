//! Seeded synthetic inputs shared by the benchmarks.

use freightinv::geometry::{GridSpec, Point, Polygon};
use freightinv::{RoadLink, RouteType, ZoneId, ZoneShapes};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A 64-vertex star-shaped polygon of radius about `r` around `(cx, cy)`.
pub fn star(rng: &mut ChaCha8Rng, cx: f64, cy: f64, r: f64) -> Polygon {
    let n = 64;
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            let rr = r * rng.random_range(0.6..1.0);
            (cx + rr * t.cos(), cy + rr * t.sin())
        })
        .collect();
    Polygon::from_coords(&coords).expect("star polygon is valid")
}

pub fn grid(cell: f64, n: u32) -> GridSpec {
    GridSpec::new(Point::new(0.0, 0.0), cell, n, n).expect("valid grid")
}

/// `side × side` square counties of unit size with ids `Z{i}`.
pub fn square_zones(side: usize) -> ZoneShapes {
    let mut shapes = ZoneShapes::new();
    for i in 0..side {
        for j in 0..side {
            let (x, y) = (i as f64, j as f64);
            let poly =
                Polygon::from_coords(&[(x, y), (x + 1.0, y), (x + 1.0, y + 1.0), (x, y + 1.0)])
                    .unwrap();
            shapes.insert(ZoneId::new(format!("Z{:03}", i * side + j)), poly);
        }
    }
    shapes
}

/// Links scattered over a `side × side` square, without county attributes.
pub fn links(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<RoadLink> {
    (0..n)
        .map(|i| {
            let start = rng.random_range(0.0..100.0);
            RoadLink {
                link_id: format!("L{i:06}"),
                milepost_start: start,
                milepost_end: start + rng.random_range(0.1..3.0),
                adtt_longhaul: rng.random_range(0.0..3000.0),
                adtt_nonlonghaul: rng.random_range(0.0..800.0),
                route_type: RouteType::ALL[i % RouteType::ALL.len()],
                centroid: Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side)),
                county_id: None,
            }
        })
        .collect()
}

/// Intercept plus `k - 1` uniform regressors and a linear response with noise.
pub fn regression(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(n, k, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    let y = DVector::from_fn(n, |i, _| x.row(i).sum() * 0.3 + rng.random_range(-0.5..0.5));
    (x, y)
}

/// 0/1 outcomes drawn from a logistic model on `x`.
pub fn binary_outcome(rng: &mut ChaCha8Rng, x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.nrows(), |i, _| {
        let eta = 0.2 - 0.8 * x[(i, 1)] + 0.5 * x[(i, x.ncols() - 1)];
        if rng.random_bool(1.0 / (1.0 + (-eta).exp())) {
            1.0
        } else {
            0.0
        }
    })
}
