//! Planar geometry for city-scale street matching.
//!
//! Coordinates are projected with a local equirectangular approximation about
//! a fixed origin, after which all distances are plain Euclidean meters. The
//! buffer around a street is expressed as a distance threshold to its
//! polyline, which is equivalent to a round-capped Minkowski buffer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Default buffer radius around each street polyline, in meters.
pub const DEFAULT_BUFFER_RADIUS_M: f64 = 22.5;

/// Largest absolute latitude for which the local projection is accepted.
pub const MAX_PROJECTION_LAT: f64 = 85.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self> {
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Error::InvalidCoordinate(format!(
                "non-finite coordinate ({lon}, {lat})"
            )));
        }
        if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidCoordinate(format!(
                "coordinate ({lon}, {lat}) out of range"
            )));
        }
        Ok(Self { lon, lat })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: PlanarPoint, t: f64) -> PlanarPoint {
        PlanarPoint::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Local equirectangular projection about a fixed origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    origin: GeoPoint,
    cos_lat0: f64,
}

impl Projection {
    pub fn new(origin: GeoPoint) -> Result<Self> {
        let origin = GeoPoint::new(origin.lon, origin.lat)?;
        if origin.lat.abs() >= MAX_PROJECTION_LAT {
            return Err(Error::InvalidCoordinate(format!(
                "projection origin latitude {} outside (-85, 85)",
                origin.lat
            )));
        }
        Ok(Self {
            origin,
            cos_lat0: origin.lat.to_radians().cos(),
        })
    }

    /// Projection centred on the arithmetic mean of `points`.
    pub fn centered_on<'a>(points: impl IntoIterator<Item = &'a GeoPoint>) -> Result<Self> {
        let (mut lon, mut lat, mut n) = (0.0, 0.0, 0usize);
        for p in points {
            lon += p.lon;
            lat += p.lat;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyInput("no coordinates to centre projection on".into()));
        }
        Self::new(GeoPoint {
            lon: lon / n as f64,
            lat: lat / n as f64,
        })
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn project(&self, p: GeoPoint) -> Result<PlanarPoint> {
        let p = GeoPoint::new(p.lon, p.lat)?;
        if p.lat.abs() >= MAX_PROJECTION_LAT {
            return Err(Error::InvalidCoordinate(format!(
                "latitude {} outside projection domain",
                p.lat
            )));
        }
        let x = EARTH_RADIUS_M * (p.lon - self.origin.lon).to_radians() * self.cos_lat0;
        let y = EARTH_RADIUS_M * (p.lat - self.origin.lat).to_radians();
        Ok(PlanarPoint::new(x, y))
    }

    pub fn unproject(&self, p: PlanarPoint) -> GeoPoint {
        GeoPoint {
            lon: self.origin.lon + (p.x / (EARTH_RADIUS_M * self.cos_lat0)).to_degrees(),
            lat: self.origin.lat + (p.y / EARTH_RADIUS_M).to_degrees(),
        }
    }
}

/// Projects `p` about `origin`.
pub fn project(p: GeoPoint, origin: GeoPoint) -> Result<PlanarPoint> {
    Projection::new(origin)?.project(p)
}

/// An ordered chain of at least two distinct planar vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<PlanarPoint>,
}

impl Polyline {
    pub fn new(vertices: Vec<PlanarPoint>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Geometry(format!(
                "polyline needs at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        for v in &vertices {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(Error::Geometry("non-finite polyline vertex".into()));
            }
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Geometry("consecutive identical vertices".into()));
        }
        Ok(Self { vertices })
    }

    /// Builds a polyline after dropping consecutive duplicate vertices.
    pub fn from_dedup(mut vertices: Vec<PlanarPoint>) -> Result<Self> {
        vertices.dedup();
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[PlanarPoint] {
        &self.vertices
    }

    pub fn first(&self) -> PlanarPoint {
        self.vertices[0]
    }

    pub fn last(&self) -> PlanarPoint {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    pub fn distance_to(&self, p: PlanarPoint) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Closest point on the polyline to `p`, with its arclength from the
    /// first vertex and its distance from `p`.
    pub fn closest_point(&self, p: PlanarPoint) -> (PlanarPoint, f64, f64) {
        let mut best = (self.first(), 0.0, f64::INFINITY);
        let mut walked = 0.0;
        for w in self.vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            let t = segment_param(p, a, b);
            let q = a.lerp(b, t);
            let d = p.distance(q);
            let len = a.distance(b);
            if d < best.2 {
                best = (q, walked + t * len, d);
            }
            walked += len;
        }
        best
    }

    /// Point at `s` meters along the polyline, clamped to its ends.
    pub fn point_at(&self, s: f64) -> PlanarPoint {
        if s <= 0.0 {
            return self.first();
        }
        let mut walked = 0.0;
        for w in self.vertices.windows(2) {
            let len = w[0].distance(w[1]);
            if walked + len >= s {
                return w[0].lerp(w[1], (s - walked) / len);
            }
            walked += len;
        }
        self.last()
    }

    /// Vertices of the sub-polyline between arclengths `from` and `to`.
    pub fn slice(&self, from: f64, to: f64) -> Vec<PlanarPoint> {
        let (from, to) = (from.min(to), from.max(to));
        let mut out = vec![self.point_at(from)];
        let mut walked = 0.0;
        for w in self.vertices.windows(2) {
            walked += w[0].distance(w[1]);
            if walked > from && walked < to {
                out.push(w[1]);
            }
        }
        out.push(self.point_at(to));
        out
    }

    fn inflated_edge_boxes(&self, pad: f64) -> impl Iterator<Item = BBox> + '_ {
        self.vertices.windows(2).map(move |w| BBox {
            min_x: w[0].x.min(w[1].x) - pad,
            min_y: w[0].y.min(w[1].y) - pad,
            max_x: w[0].x.max(w[1].x) + pad,
            max_y: w[0].y.max(w[1].y) + pad,
        })
    }
}

fn segment_param(p: PlanarPoint, a: PlanarPoint, b: PlanarPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return 0.0;
    }
    (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
}

fn segment_distance(p: PlanarPoint, a: PlanarPoint, b: PlanarPoint) -> f64 {
    p.distance(a.lerp(b, segment_param(p, a, b)))
}

pub fn point_to_polyline_distance(p: PlanarPoint, line: &Polyline) -> f64 {
    line.distance_to(p)
}

/// Closed-boundary buffer membership.
pub fn buffer_contains(line: &Polyline, p: PlanarPoint, radius: f64) -> Result<bool> {
    check_radius(radius)?;
    Ok(line.distance_to(p) <= radius)
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "buffer radius must be positive, got {radius}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    fn union(self, o: BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(o.min_x),
            min_y: self.min_y.min(o.min_y),
            max_x: self.max_x.max(o.max_x),
            max_y: self.max_y.max(o.max_y),
        }
    }
}

type Cell = (i64, i64);

/// Uniform grid over segment positions.
///
/// Each segment is registered in every cell overlapped by the bounding box
/// of any of its edges inflated by `cell_size`, so the bucket of the cell
/// containing a point holds every segment within `cell_size` of it.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size: f64,
    bbox: BBox,
    cells: HashMap<Cell, Vec<u32>>,
    len: usize,
}

const MAX_RING_SEARCH: i64 = 32;

impl SpatialIndex {
    pub fn build(lines: &[Polyline], cell_size: f64) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::EmptyInput("no segments to index".into()));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        let bbox = lines
            .iter()
            .flat_map(|l| l.inflated_edge_boxes(cell_size))
            .reduce(BBox::union)
            .expect("non-empty");
        let mut index = Self {
            cell_size,
            bbox,
            cells: HashMap::new(),
            len: lines.len(),
        };
        for (id, line) in lines.iter().enumerate() {
            let id = id as u32;
            for b in line.inflated_edge_boxes(cell_size) {
                let (x0, y0) = index.cell_of(PlanarPoint::new(b.min_x, b.min_y));
                let (x1, y1) = index.cell_of(PlanarPoint::new(b.max_x, b.max_y));
                for cx in x0..=x1 {
                    for cy in y0..=y1 {
                        let bucket = index.cells.entry((cx, cy)).or_default();
                        if bucket.last() != Some(&id) {
                            bucket.push(id);
                        }
                    }
                }
            }
        }
        Ok(index)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    /// Number of indexed segments.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_of(&self, p: PlanarPoint) -> Cell {
        (
            ((p.x - self.bbox.min_x) / self.cell_size).floor() as i64,
            ((p.y - self.bbox.min_y) / self.cell_size).floor() as i64,
        )
    }

    pub fn bucket(&self, cell: Cell) -> &[u32] {
        self.cells.get(&cell).map_or(&[], Vec::as_slice)
    }

    /// Segment positions that may lie within `cell_size` of `p`.
    pub fn candidates(&self, p: PlanarPoint) -> &[u32] {
        self.bucket(self.cell_of(p))
    }

    fn grid_extent(&self) -> Cell {
        self.cell_of(PlanarPoint::new(self.bbox.max_x, self.bbox.max_y))
    }
}

/// Builds a grid index over the polylines of `segments`.
pub fn build_index<S: AsRef<str>>(segments: &[(S, Polyline)], cell_size: f64) -> Result<SpatialIndex> {
    let lines: Vec<Polyline> = segments.iter().map(|(_, l)| l.clone()).collect();
    SpatialIndex::build(&lines, cell_size)
}

/// Positions of all segments whose buffer contains `p`, in ascending order.
pub fn match_point_all(
    index: &SpatialIndex,
    lines: &[Polyline],
    p: PlanarPoint,
    radius: f64,
) -> Result<Vec<usize>> {
    check_radius(radius)?;
    if radius > index.cell_size {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} exceeds index cell size {}",
            index.cell_size
        )));
    }
    let mut hits: Vec<usize> = index
        .candidates(p)
        .iter()
        .map(|&i| i as usize)
        .filter(|&i| lines[i].distance_to(p) <= radius)
        .collect();
    hits.sort_unstable();
    Ok(hits)
}

/// Brute-force counterpart of [`match_point_all`].
pub fn match_point_scan(lines: &[Polyline], p: PlanarPoint, radius: f64) -> Vec<usize> {
    (0..lines.len())
        .filter(|&i| lines[i].distance_to(p) <= radius)
        .collect()
}

/// Position of the closest segment; ties go to the lexicographically smallest id.
pub fn nearest_segment<S: AsRef<str>>(
    index: &SpatialIndex,
    ids: &[S],
    lines: &[Polyline],
    p: PlanarPoint,
) -> Result<usize> {
    if lines.is_empty() {
        return Err(Error::EmptyInput("no segments to search".into()));
    }
    let better = |cand: (f64, usize), best: Option<(f64, usize)>| match best {
        None => true,
        Some((d, i)) => cand.0 < d || (cand.0 == d && ids[cand.1].as_ref() < ids[i].as_ref()),
    };
    let (cx, cy) = index.cell_of(p);
    let (ex, ey) = index.grid_extent();
    let covers_grid =
        |r: i64| cx - r <= 0 && cy - r <= 0 && cx + r >= ex && cy + r >= ey;
    let mut best: Option<(f64, usize)> = None;
    for r in 0..=MAX_RING_SEARCH {
        for dx in -r..=r {
            for dy in -r..=r {
                if dx.abs() != r && dy.abs() != r {
                    continue;
                }
                for &i in index.bucket((cx + dx, cy + dy)) {
                    let cand = (lines[i as usize].distance_to(p), i as usize);
                    if better(cand, best) {
                        best = Some(cand);
                    }
                }
            }
        }
        if let Some((d, i)) = best {
            if d < r as f64 * index.cell_size || covers_grid(r) {
                return Ok(i);
            }
        }
        if covers_grid(r) {
            break;
        }
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, line) in lines.iter().enumerate() {
        let cand = (line.distance_to(p), i);
        if better(cand, best) {
            best = Some(cand);
        }
    }
    Ok(best.expect("non-empty").1)
}
