//! Planar polygon geometry used to apportion grid-cell values to zones.
//!
//! Coordinates are meters in an equal-area projection; nothing here does
//! geodetic math. Rings are stored implicitly closed (the closing vertex is
//! never repeated). Exterior rings are normalised to counter-clockwise order
//! and holes to clockwise order on construction.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ZoneId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn offset(self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let r = Rect {
            min: Point::new(min_x, min_y),
            max: Point::new(max_x, max_y),
        };
        if !(r.min.is_finite() && r.max.is_finite()) || max_x < min_x || max_y < min_y {
            return Err(Error::InvalidGeometry(format!(
                "rectangle [{min_x}, {max_x}] x [{min_y}, {max_y}] is not well formed"
            )));
        }
        Ok(r)
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// A polygon with one exterior ring and zero or more holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    rings: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let mut rings = Vec::with_capacity(1 + holes.len());
        rings.push(exterior);
        rings.extend(holes);
        Self::from_rings(rings)
    }

    /// Builds a polygon from rings, the first being the exterior.
    pub fn from_rings(rings: Vec<Vec<Point>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::InvalidGeometry("polygon has no rings".into()));
        }
        let mut out = Vec::with_capacity(rings.len());
        for (i, ring) in rings.into_iter().enumerate() {
            let mut ring = normalize_ring(ring)?;
            let signed = signed_ring_area(&ring);
            let want_ccw = i == 0;
            if (want_ccw && signed < 0.0) || (!want_ccw && signed > 0.0) {
                ring.reverse();
            }
            out.push(ring);
        }
        Ok(Polygon { rings: out })
    }

    pub fn from_coords(exterior: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            exterior.iter().map(|&(x, y)| Point::new(x, y)).collect(),
            Vec::new(),
        )
    }

    pub fn rectangle(rect: Rect) -> Polygon {
        Polygon {
            rings: vec![rect_ring(rect)],
        }
    }

    pub fn exterior(&self) -> &[Point] {
        &self.rings[0]
    }

    pub fn holes(&self) -> &[Vec<Point>] {
        &self.rings[1..]
    }

    pub fn rings(&self) -> &[Vec<Point>] {
        &self.rings
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    pub fn bbox(&self) -> Rect {
        let mut min = self.rings[0][0];
        let mut max = min;
        for p in &self.rings[0] {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Rect { min, max }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            rings: self
                .rings
                .iter()
                .map(|r| r.iter().map(|p| p.offset(dx, dy)).collect())
                .collect(),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        point_in_polygon(p, self)
    }

    /// O(n²) check that no two non-adjacent edges of the exterior ring touch.
    pub fn exterior_is_simple(&self) -> bool {
        ring_is_simple(self.exterior())
    }
}

fn rect_ring(r: Rect) -> Vec<Point> {
    vec![
        r.min,
        Point::new(r.max.x, r.min.y),
        r.max,
        Point::new(r.min.x, r.max.y),
    ]
}

fn normalize_ring(mut ring: Vec<Point>) -> Result<Vec<Point>> {
    if let Some(bad) = ring.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidGeometry(format!(
            "non-finite vertex ({}, {})",
            bad.x, bad.y
        )));
    }
    ring.dedup();
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if distinct_vertices(&ring) < 3 {
        return Err(Error::InvalidGeometry(format!(
            "ring has {} distinct vertices, need at least 3",
            distinct_vertices(&ring)
        )));
    }
    Ok(ring)
}

fn distinct_vertices(ring: &[Point]) -> usize {
    let mut keys: Vec<(u64, u64)> = ring
        .iter()
        .map(|p| (p.x.to_bits(), p.y.to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Shoelace sum taken relative to the first vertex; positive for counter-clockwise rings.
fn signed_ring_area(ring: &[Point]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let o = ring[0];
    let mut twice = 0.0;
    for w in ring[1..].windows(2) {
        let (a, b) = (w[0], w[1]);
        twice += (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y);
    }
    0.5 * twice
}

/// Area of the exterior minus the holes, never negative.
pub fn polygon_area(poly: &Polygon) -> f64 {
    let ext = signed_ring_area(poly.exterior()).abs();
    let holes: f64 = poly.holes().iter().map(|h| signed_ring_area(h).abs()).sum();
    (ext - holes).max(0.0)
}

#[derive(Clone, Copy)]
enum Edge {
    Left(f64),
    Right(f64),
    Bottom(f64),
    Top(f64),
}

impl Edge {
    fn inside(self, p: Point) -> bool {
        match self {
            Edge::Left(x) => p.x >= x,
            Edge::Right(x) => p.x <= x,
            Edge::Bottom(y) => p.y >= y,
            Edge::Top(y) => p.y <= y,
        }
    }

    fn intersect(self, a: Point, b: Point) -> Point {
        match self {
            Edge::Left(x) | Edge::Right(x) => {
                let t = (x - a.x) / (b.x - a.x);
                Point::new(x, a.y + t * (b.y - a.y))
            }
            Edge::Bottom(y) | Edge::Top(y) => {
                let t = (y - a.y) / (b.y - a.y);
                Point::new(a.x + t * (b.x - a.x), y)
            }
        }
    }
}

/// Sutherland–Hodgman against the four half-planes of an axis-aligned rectangle.
fn clip_ring(ring: &[Point], rect: Rect) -> Vec<Point> {
    let mut output: Vec<Point> = ring.to_vec();
    for edge in [
        Edge::Left(rect.min.x),
        Edge::Right(rect.max.x),
        Edge::Bottom(rect.min.y),
        Edge::Top(rect.max.y),
    ] {
        if output.is_empty() {
            break;
        }
        let input = std::mem::take(&mut output);
        let mut prev = *input.last().unwrap();
        for &cur in &input {
            let cur_in = edge.inside(cur);
            let prev_in = edge.inside(prev);
            if cur_in {
                if !prev_in {
                    output.push(edge.intersect(prev, cur));
                }
                output.push(cur);
            } else if prev_in {
                output.push(edge.intersect(prev, cur));
            }
            prev = cur;
        }
    }
    output.dedup();
    if output.len() > 1 && output.first() == output.last() {
        output.pop();
    }
    output
}

/// Intersection of `poly` with an axis-aligned cell. `None` is the empty polygon.
pub fn clip_to_cell(poly: &Polygon, cell: Rect) -> Option<Polygon> {
    if !poly.bbox().intersects(&cell) {
        return None;
    }
    let exterior = clip_ring(poly.exterior(), cell);
    if distinct_vertices(&exterior) < 3 {
        return None;
    }
    let mut rings = vec![exterior];
    for hole in poly.holes() {
        let clipped = clip_ring(hole, cell);
        if distinct_vertices(&clipped) >= 3 {
            rings.push(clipped);
        }
    }
    Some(Polygon { rings })
}

fn clipped_area(poly: &Polygon, cell: Rect) -> f64 {
    clip_to_cell(poly, cell).map_or(0.0, |p| polygon_area(&p))
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    cross == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn on_ring_boundary(p: Point, ring: &[Point]) -> bool {
    let n = ring.len();
    (0..n).any(|i| on_segment(p, ring[i], ring[(i + 1) % n]))
}

/// Even-odd crossing test; boundary handling is done by the caller.
fn ring_crossings_odd(p: Point, ring: &[Point]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_at = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_at {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True when `p` lies inside `poly` or on any of its ring boundaries.
pub fn point_in_polygon(p: Point, poly: &Polygon) -> bool {
    if poly.rings.iter().any(|r| on_ring_boundary(p, r)) {
        return true;
    }
    if !ring_crossings_odd(p, poly.exterior()) {
        return false;
    }
    !poly.holes().iter().any(|h| ring_crossings_odd(p, h))
}

fn segments_touch(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    fn orient(a: Point, b: Point, c: Point) -> f64 {
        (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(p1, q1, q2)
        || on_segment(p2, q1, q2)
        || on_segment(q1, p1, p2)
        || on_segment(q2, p1, p2)
}

fn ring_is_simple(ring: &[Point]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a1, a2) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            if segments_touch(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Index of a grid cell; `col` counts eastward and `row` northward from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub col: u32,
    pub row: u32,
}

impl CellIndex {
    pub const fn new(col: u32, row: u32) -> Self {
        CellIndex { col, row }
    }
}

/// Regular grid of square cells anchored at its lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: Point,
    pub cell_size: f64,
    pub n_cols: u32,
    pub n_rows: u32,
}

impl Default for GridSpec {
    /// The 148 × 112 grid of 36 km cells used by ground-level marginal cost surfaces.
    fn default() -> Self {
        GridSpec {
            origin: Point::new(0.0, 0.0),
            cell_size: 36_000.0,
            n_cols: 148,
            n_rows: 112,
        }
    }
}

impl GridSpec {
    pub fn new(origin: Point, cell_size: f64, n_cols: u32, n_rows: u32) -> Result<Self> {
        let g = GridSpec {
            origin,
            cell_size,
            n_cols,
            n_rows,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.origin.is_finite() {
            return Err(Error::InvalidGeometry("grid origin is not finite".into()));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "grid cell size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.n_cols == 0 || self.n_rows == 0 {
            return Err(Error::InvalidGeometry(
                "grid needs at least one row and column".into(),
            ));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.n_cols as usize * self.n_rows as usize
    }

    pub fn contains_cell(&self, cell: CellIndex) -> bool {
        cell.col < self.n_cols && cell.row < self.n_rows
    }

    /// Row-major position of `cell`, suitable for dense storage.
    pub fn linear_index(&self, cell: CellIndex) -> usize {
        cell.row as usize * self.n_cols as usize + cell.col as usize
    }

    pub fn cell_rect(&self, cell: CellIndex) -> Rect {
        let x0 = self.origin.x + f64::from(cell.col) * self.cell_size;
        let y0 = self.origin.y + f64::from(cell.row) * self.cell_size;
        Rect {
            min: Point::new(x0, y0),
            max: Point::new(x0 + self.cell_size, y0 + self.cell_size),
        }
    }

    pub fn extent(&self) -> Rect {
        Rect {
            min: self.origin,
            max: Point::new(
                self.origin.x + f64::from(self.n_cols) * self.cell_size,
                self.origin.y + f64::from(self.n_rows) * self.cell_size,
            ),
        }
    }

    /// Cell holding `p`; points on an interior cell edge belong to the cell above/right.
    pub fn cell_of(&self, p: Point) -> Option<CellIndex> {
        let c = ((p.x - self.origin.x) / self.cell_size).floor();
        let r = ((p.y - self.origin.y) / self.cell_size).floor();
        if c < 0.0 || r < 0.0 || c >= f64::from(self.n_cols) || r >= f64::from(self.n_rows) {
            return None;
        }
        Some(CellIndex::new(c as u32, r as u32))
    }
}

/// Area share of `zone` falling in each grid cell.
///
/// Weights sum to one when the zone lies wholly inside the grid extent and
/// to less than one when part of it hangs outside. Cells with no overlap are
/// omitted.
pub fn overlay_weights(zone: &Polygon, grid: &GridSpec) -> Result<BTreeMap<CellIndex, f64>> {
    overlay_weights_parts(std::slice::from_ref(zone), grid, "<polygon>")
}

/// Same as [`overlay_weights`] for a zone made of several polygon parts.
pub fn overlay_weights_parts(
    parts: &[Polygon],
    grid: &GridSpec,
    zone_label: &str,
) -> Result<BTreeMap<CellIndex, f64>> {
    grid.validate()?;
    // Work in grid-local coordinates so the result only depends on the
    // zone's position relative to the grid.
    let local: Vec<Polygon> = parts
        .iter()
        .map(|p| p.translate(-grid.origin.x, -grid.origin.y))
        .collect();
    let total: f64 = local.iter().map(polygon_area).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "zone {zone_label} has zero area"
        )));
    }
    let local_grid = GridSpec {
        origin: Point::new(0.0, 0.0),
        ..*grid
    };

    let mut clipped: BTreeMap<CellIndex, f64> = BTreeMap::new();
    for part in &local {
        let bb = part.bbox();
        let Some((c0, c1)) = index_span(bb.min.x, bb.max.x, grid.cell_size, grid.n_cols) else {
            continue;
        };
        let Some((r0, r1)) = index_span(bb.min.y, bb.max.y, grid.cell_size, grid.n_rows) else {
            continue;
        };
        for row in r0..=r1 {
            for col in c0..=c1 {
                let cell = CellIndex::new(col, row);
                let a = clipped_area(part, local_grid.cell_rect(cell));
                if a > 0.0 {
                    *clipped.entry(cell).or_insert(0.0) += a;
                }
            }
        }
    }
    if clipped.is_empty() {
        return Err(Error::EmptyOverlay {
            zone: zone_label.to_owned(),
        });
    }
    Ok(clipped.into_iter().map(|(c, a)| (c, a / total)).collect())
}

fn index_span(lo: f64, hi: f64, size: f64, n: u32) -> Option<(u32, u32)> {
    let first = (lo / size).floor();
    let last = (hi / size).floor();
    if last < 0.0 || first >= f64::from(n) {
        return None;
    }
    let first = first.max(0.0) as u32;
    let last = (last as i64).min(i64::from(n) - 1) as u32;
    Some((first, last))
}

/// Zone geometries keyed by identifier; one zone may consist of several parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZoneShapes {
    zones: BTreeMap<ZoneId, Vec<Polygon>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ZoneFile {
    zones: Vec<ZoneRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ZoneRecord {
    id: String,
    rings: Vec<Vec<[f64; 2]>>,
}

impl ZoneShapes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: ZoneId, part: Polygon) {
        self.zones.entry(id).or_default().push(part);
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn get(&self, id: &ZoneId) -> Option<&[Polygon]> {
        self.zones.get(id).map(Vec::as_slice)
    }

    pub fn contains_id(&self, id: &ZoneId) -> bool {
        self.zones.contains_key(id)
    }

    /// Zones in ascending identifier order.
    pub fn iter(&self) -> impl Iterator<Item = (&ZoneId, &[Polygon])> {
        self.zones.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &ZoneId> {
        self.zones.keys()
    }

    pub fn area(&self, id: &ZoneId) -> Option<f64> {
        self.zones
            .get(id)
            .map(|parts| parts.iter().map(polygon_area).sum())
    }

    /// Parses the JSON zone format:
    /// `{"zones": [{"id": "A", "rings": [[[x, y], ...], ...]}, ...]}`.
    /// The first ring of each record is the exterior. Records that share an
    /// id form one multi-part zone. Exterior rings must be simple.
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let file: ZoneFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_owned(),
            message: e.to_string(),
        })?;
        let mut shapes = ZoneShapes::new();
        for rec in file.zones {
            let rings = rec
                .rings
                .into_iter()
                .map(|r| r.into_iter().map(|[x, y]| Point::new(x, y)).collect())
                .collect();
            let poly = Polygon::from_rings(rings).map_err(|e| Error::Parse {
                path: origin.to_owned(),
                message: format!("zone {}: {e}", rec.id),
            })?;
            if !poly.exterior_is_simple() {
                return Err(Error::Parse {
                    path: origin.to_owned(),
                    message: format!("zone {}: exterior ring self-intersects", rec.id),
                });
            }
            shapes.insert(ZoneId(rec.id), poly);
        }
        Ok(shapes)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn to_json_string(&self) -> String {
        let zones = self
            .zones
            .iter()
            .flat_map(|(id, parts)| {
                parts.iter().map(move |p| ZoneRecord {
                    id: id.0.clone(),
                    rings: p
                        .rings()
                        .iter()
                        .map(|r| r.iter().map(|q| [q.x, q.y]).collect())
                        .collect(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&ZoneFile { zones }).expect("zone file serializes")
    }
}
