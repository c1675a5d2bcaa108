//! Independent oracles shared by the integration tests. Nothing here calls the
//! code under test except to construct inputs.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use freightinv::geometry::{CellIndex, GridSpec, Point, Polygon};
use proptest::prelude::*;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// Winding number of `ring` around `p`; non-zero means inside.
pub fn winding_number(p: (f64, f64), ring: &[(f64, f64)]) -> i32 {
    let mut wn = 0;
    for k in 0..ring.len() {
        let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
        let side = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
        if a.1 <= p.1 {
            if b.1 > p.1 && side > 0.0 {
                wn += 1;
            }
        } else if b.1 <= p.1 && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Inside the exterior ring and outside every hole, by winding numbers.
pub fn inside_by_winding(
    p: (f64, f64),
    exterior: &[(f64, f64)],
    holes: &[Vec<(f64, f64)>],
) -> bool {
    winding_number(p, exterior) != 0 && holes.iter().all(|h| winding_number(p, h) == 0)
}

/// Per-cell area shares estimated by sampling sub-cell centres at spacing `res`.
pub fn raster_weights(
    exterior: &[(f64, f64)],
    grid: &GridSpec,
    res: f64,
) -> BTreeMap<CellIndex, f64> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in exterior {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let mut counts: BTreeMap<CellIndex, u64> = BTreeMap::new();
    let mut total = 0u64;
    let nx = ((x1 - x0) / res).ceil() as usize;
    let ny = ((y1 - y0) / res).ceil() as usize;
    for i in 0..nx {
        let x = x0 + (i as f64 + 0.5) * res;
        for j in 0..ny {
            let y = y0 + (j as f64 + 0.5) * res;
            if winding_number((x, y), exterior) != 0 {
                total += 1;
                let col = ((x - grid.origin.x) / grid.cell_size).floor() as u32;
                let row = ((y - grid.origin.y) / grid.cell_size).floor() as u32;
                *counts.entry(CellIndex::new(col, row)).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(c, n)| (c, n as f64 / total as f64))
        .collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// β from the normal equations XᵀX β = Xᵀy.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = x[0].len();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..k {
            xty[i] += row[i] * yi;
            for j in 0..k {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    gauss_solve(xtx, xty)
}

/// Star-shaped, hence simple, polygon around `centre`.
pub fn star_polygon(centre: (f64, f64), radius: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..1.0f64, 0.25..1.0f64), 3..12).prop_filter_map(
        "distinct angles",
        move |raw| {
            let mut pts: Vec<(f64, f64)> = raw
                .iter()
                .map(|&(t, r)| (t * std::f64::consts::TAU, r))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let gaps_ok = pts.windows(2).all(|w| w[1].0 - w[0].0 > 0.05)
                && pts[0].0 + std::f64::consts::TAU - pts[pts.len() - 1].0 > 0.05;
            // A star polygon whose consecutive angles all differ by less than π is star-shaped around the centre.
            let spread_ok = pts.windows(2).all(|w| w[1].0 - w[0].0 < 3.0)
                && pts[0].0 + std::f64::consts::TAU - pts[pts.len() - 1].0 < 3.0;
            (gaps_ok && spread_ok).then(|| {
                pts.iter()
                    .map(|&(t, r)| {
                        (
                            centre.0 + radius * r * t.cos(),
                            centre.1 + radius * r * t.sin(),
                        )
                    })
                    .collect()
            })
        },
    )
}

pub fn polygon(coords: &[(f64, f64)]) -> Polygon {
    Polygon::from_coords(coords).expect("valid test polygon")
}

pub fn grid(x0: f64, y0: f64, size: f64, cols: u32, rows: u32) -> GridSpec {
    GridSpec::new(Point::new(x0, y0), size, cols, rows).unwrap()
}
