//! Writes the seeded demo fixture used by the end-to-end tests.
//!
//! ```text
//! cargo run -p freightinv --example gen_demo -- fixtures/demo
//! ```
//!
//! Counties are jittered quadrilaterals on a 12 × 10 lattice, each split into
//! four tracts through its edge midpoints and centre. Links, covariates, the
//! marginal social cost surface, the source-receptor matrix and shipments are
//! all drawn from one ChaCha stream, so the output is identical on every run.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

const SEED: u64 = 20_171_115;
const NX: usize = 12;
const NY: usize = 10;
const SPACING: f64 = 40_000.0;
const LINKS: usize = 1500;

type Pt = (f64, f64);

fn lerp(a: Pt, b: Pt, t: f64) -> Pt {
    (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t)
}

fn mid(a: Pt, b: Pt) -> Pt {
    lerp(a, b, 0.5)
}

/// Counter-clockwise corners of county (i, j).
fn county_quad(lattice: &[Vec<Pt>], i: usize, j: usize) -> [Pt; 4] {
    [
        lattice[i][j],
        lattice[i + 1][j],
        lattice[i + 1][j + 1],
        lattice[i][j + 1],
    ]
}

/// Bilinear point of a quad at parameters (u, v).
fn quad_point(q: &[Pt; 4], u: f64, v: f64) -> Pt {
    lerp(lerp(q[0], q[1], u), lerp(q[3], q[2], u), v)
}

fn tracts_of(q: &[Pt; 4]) -> [[Pt; 4]; 4] {
    let c = quad_point(q, 0.5, 0.5);
    let (m01, m12, m23, m30) = (
        mid(q[0], q[1]),
        mid(q[1], q[2]),
        mid(q[2], q[3]),
        mid(q[3], q[0]),
    );
    [
        [q[0], m01, c, m30],
        [m01, q[1], m12, c],
        [c, m12, q[2], m23],
        [m30, c, m23, q[3]],
    ]
}

fn shoelace(q: &[Pt; 4]) -> f64 {
    (0..4)
        .map(|k| {
            let (a, b) = (q[k], q[(k + 1) % 4]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0
}

fn ring_json(q: &[Pt; 4]) -> String {
    let pts: Vec<String> = q
        .iter()
        .map(|p| format!("[{:.3}, {:.3}]", p.0, p.1))
        .collect();
    format!("[[{}]]", pts.join(", "))
}

fn county_id(i: usize, j: usize) -> String {
    format!("C{:02}{:02}", i, j)
}

/// Shares of six mutually exclusive groups (at most 0.82 in total); the
/// remainder is the majority group, which is the omitted category.
fn shares(rng: &mut ChaCha8Rng) -> [f64; 6] {
    // Upper bounds for black, amerind, haw, asian, twomore, hisp.
    [0.35, 0.03, 0.01, 0.08, 0.05, 0.30].map(|max| rng.random::<f64>() * max)
}

fn covariate_row(
    out: &mut String,
    id: &str,
    area: f64,
    s: [f64; 6],
    pop: f64,
    income: f64,
    parent: &str,
) {
    // Header order: prop_black, prop_amerind, prop_haw, prop_asian, prop_hisp, prop_twomore.
    writeln!(
        out,
        "{id},{area:.1},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{pop:.0},{income:.0},{parent}",
        s[0], s[1], s[2], s[3], s[5], s[4]
    )
    .unwrap();
}

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "fixtures/demo".into()),
    );
    fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let lattice: Vec<Vec<Pt>> = (0..=NX)
        .map(|i| {
            (0..=NY)
                .map(|j| {
                    let interior = i > 0 && i < NX && j > 0 && j < NY;
                    let jitter = if interior { 0.2 * SPACING } else { 0.0 };
                    (
                        i as f64 * SPACING + rng.random_range(-1.0..=1.0) * jitter,
                        j as f64 * SPACING + rng.random_range(-1.0..=1.0) * jitter,
                    )
                })
                .collect()
        })
        .collect();

    let mut counties = Vec::new();
    let mut tracts = Vec::new();
    let mut county_quads = Vec::new();
    for i in 0..NX {
        for j in 0..NY {
            let q = county_quad(&lattice, i, j);
            let id = county_id(i, j);
            counties.push(format!(
                "  {{\"id\": \"{id}\", \"rings\": {}}}",
                ring_json(&q)
            ));
            for (t, tq) in tracts_of(&q).iter().enumerate() {
                tracts.push(format!(
                    "  {{\"id\": \"{id}-T{}\", \"rings\": {}}}",
                    t + 1,
                    ring_json(tq)
                ));
            }
            county_quads.push((id, i, j, q));
        }
    }
    fs::write(
        dir.join("counties.json"),
        format!("{{\"zones\": [\n{}\n]}}\n", counties.join(",\n")),
    )?;
    fs::write(
        dir.join("tracts.json"),
        format!("{{\"zones\": [\n{}\n]}}\n", tracts.join(",\n")),
    )?;

    // Links: a few counties carry no freight at all, the rest get a busy corridor share.
    let routes = [
        "interstate",
        "freeway_expressway",
        "other_principal_arterial",
        "minor_arterial",
        "major_collector",
        "minor_collector",
    ];
    let busy: Vec<f64> = county_quads
        .iter()
        .map(|_| {
            if rng.random::<f64>() < 0.05 {
                0.0
            } else {
                0.2 + rng.random::<f64>()
            }
        })
        .collect();
    let total_weight: f64 = busy.iter().sum();
    let adtt = LogNormal::new(6.5, 0.8).unwrap();
    let mut links = String::from("link_id,mp_start,mp_end,adtt_long,adtt_nonlong,route_type,centroid_x,centroid_y,county_id\n");
    for n in 0..LINKS {
        let mut pick = rng.random::<f64>() * total_weight;
        let k = busy
            .iter()
            .position(|&w| {
                pick -= w;
                pick < 0.0
            })
            .unwrap_or(busy.len() - 1);
        let (id, _, _, q) = &county_quads[k];
        let (x, y) = quad_point(
            q,
            rng.random_range(0.05..0.95),
            rng.random_range(0.05..0.95),
        );
        let start = rng.random_range(0.0..300.0f64);
        let length = 0.1 + rng.random::<f64>().powi(2) * 6.0;
        let long = adtt.sample(&mut rng);
        let nonlong = adtt.sample(&mut rng) * 0.3;
        let route = routes[(rng.random::<f64>().powi(2) * 6.0) as usize];
        let attr = if rng.random::<f64>() < 0.1 {
            ""
        } else {
            id.as_str()
        };
        let mut end = start + length;
        let mut long_s = format!("{long:.1}");
        match n % 250 {
            17 => end = start - length,
            91 => long_s = "missing".into(),
            _ => {}
        }
        writeln!(
            links,
            "L{n:05},{start:.3},{end:.3},{long_s},{nonlong:.1},{route},{x:.1},{y:.1},{attr}"
        )
        .unwrap();
    }
    fs::write(dir.join("links.csv"), links)?;

    // Covariates: tract shares scatter around their county's.
    let header = "zone_id,area,prop_black,prop_amerind,prop_haw,prop_asian,prop_hisp,prop_twomore,total_pop,med_income,parent_id\n";
    let mut county_cov = String::from(header);
    let mut tract_cov = String::from(header);
    let pop = LogNormal::new(11.0, 1.0).unwrap();
    let income = LogNormal::new(10.9, 0.25).unwrap();
    for (id, _, _, q) in &county_quads {
        let s = shares(&mut rng);
        let county_pop: f64 = pop.sample(&mut rng);
        let county_income: f64 = income.sample(&mut rng);
        covariate_row(
            &mut county_cov,
            id,
            shoelace(q),
            s,
            county_pop,
            county_income,
            "",
        );
        for (t, tq) in tracts_of(q).iter().enumerate() {
            let jitter = 0.6 + 0.8 * rng.random::<f64>();
            let mut ts = s.map(|v| v * jitter);
            let sum: f64 = ts.iter().sum();
            if sum > 0.98 {
                ts = ts.map(|v| v * 0.98 / sum);
            }
            let tpop = (county_pop / 4.0 * (0.5 + rng.random::<f64>())).max(50.0);
            let tincome = county_income * (0.8 + 0.4 * rng.random::<f64>());
            covariate_row(
                &mut tract_cov,
                &format!("{id}-T{}", t + 1),
                shoelace(tq),
                ts,
                tpop,
                tincome,
                id,
            );
        }
    }
    fs::write(dir.join("county_covariates.csv"), county_cov)?;
    fs::write(dir.join("tract_covariates.csv"), tract_cov)?;

    // MSC surface: 16 × 12 cells of 36 km covering the lattice with margin.
    let (cell, cols, rows) = (36_000.0, 16u32, 12u32);
    let origin = (-48_000.0, -32_000.0);
    fs::write(
        dir.join("msc_header.toml"),
        format!(
            "dollar_year = 2010\npopulation_year = 2017\nbase_vsl = 8.6e6\nelevation = \"ground\"\n\n\
             [grid]\norigin = {{ x = {:.1}, y = {:.1} }}\ncell_size = {cell:.1}\nn_cols = {cols}\nn_rows = {rows}\n",
            origin.0, origin.1
        ),
    )?;
    let mut msc = String::from("pollutant,col,row,usd_per_ton\n");
    for (p, base) in [("PM2.5", 120_000.0), ("SO2", 35_000.0), ("NOx", 9_000.0)] {
        for c in 0..cols {
            for r in 0..rows {
                if rng.random::<f64>() < 0.04 {
                    continue; // cells without a value are worth $0/t
                }
                let urban = 1.0
                    + 1.5 * (-(((c as f64 - 9.0).powi(2) + (r as f64 - 5.0).powi(2)) / 18.0)).exp();
                let v = base * urban * (0.7 + 0.6 * rng.random::<f64>());
                writeln!(msc, "{p},{c},{r},{v:.2}").unwrap();
            }
        }
    }
    fs::write(dir.join("msc_values.csv"), msc)?;

    // Source-receptor matrix: local damage plus a decaying eastward plume.
    let mut sr = String::from("pollutant,source_id,receptor_id,usd_per_ton\n");
    for (p, base) in [("PM2.5", 90_000.0), ("SO2", 28_000.0), ("NOx", 7_000.0)] {
        for (id, i, j, _) in &county_quads {
            for di in -1i64..=3 {
                for dj in -1i64..=1 {
                    let (ri, rj) = (*i as i64 + di, *j as i64 + dj);
                    if ri < 0 || rj < 0 || ri >= NX as i64 || rj >= NY as i64 {
                        continue;
                    }
                    let decay = if di == 0 && dj == 0 {
                        1.0
                    } else {
                        0.45 / (di.abs() + dj.abs()) as f64 * if di < 0 { 0.3 } else { 1.0 }
                    };
                    let v = base * decay * (0.6 + 0.8 * rng.random::<f64>());
                    writeln!(
                        sr,
                        "{p},{id},{},{v:.2}",
                        county_id(ri as usize, rj as usize)
                    )
                    .unwrap();
                }
            }
        }
    }
    fs::write(dir.join("sr_matrix.csv"), sr)?;

    let mut shipments = String::from("id,weight_lb,distance_mi,weighting_factor\n");
    let weight = LogNormal::new(9.5, 1.0).unwrap();
    let distance = LogNormal::new(5.3, 0.9).unwrap();
    for n in 0..500 {
        let w: f64 = weight.sample(&mut rng);
        let d: f64 = distance.sample(&mut rng);
        let wf = rng.random_range(1.0..400.0f64);
        writeln!(shipments, "S{n:04},{w:.1},{d:.1},{wf:.3}").unwrap();
    }
    fs::write(dir.join("shipments.csv"), shipments)?;

    fs::write(
        dir.join("config.toml"),
        "# Demo fixture written by `cargo run -p freightinv --example gen_demo`.\n\
         factor_set = \"greet\"\nworkers = 4\noutput_dir = \"out\"\n\n\
         [inputs]\nlinks = \"links.csv\"\ncounties = \"counties.json\"\ntracts = \"tracts.json\"\n\
         county_covariates = \"county_covariates.csv\"\ntract_covariates = \"tract_covariates.csv\"\n\
         msc_header = \"msc_header.toml\"\nmsc_values = \"msc_values.csv\"\nsr_matrix = \"sr_matrix.csv\"\n\
         shipments = \"shipments.csv\"\n\n[scenario]\nfraction_shifted = 0.25\n",
    )?;
    println!("demo fixture written to {}", dir.display());
    Ok(())
}
