//! Composite walkability and walking-distance reachability.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{PlanarPoint, Polyline, Projection};

/// Rating categories, in storage order.
pub const RATING_NAMES: [&str; 8] = [
    "road_safety",
    "easy_to_cross",
    "sidewalks",
    "hilliness",
    "navigation",
    "safety_from_crime",
    "smart_beautiful",
    "fun_relaxing",
];

pub const DEFAULT_WALK_SPEED_M_PER_MIN: f64 = 80.0;
pub const DEFAULT_SNAP_TOLERANCE_M: f64 = 1.0;
/// Farthest an origin may sit from the network and still be snapped onto it.
pub const MAX_ORIGIN_OFFSET_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryRatings([f64; 8]);

impl CategoryRatings {
    pub fn new(values: [f64; 8]) -> Result<Self> {
        for (v, name) in values.iter().zip(RATING_NAMES) {
            if !v.is_finite() || !(0.0..=5.0).contains(v) {
                return Err(Error::Validation(format!("rating `{name}` = {v} outside [0, 5]")));
            }
        }
        Ok(Self(values))
    }

    pub fn from_partial(values: &[Option<f64>; 8]) -> Result<Self> {
        let mut out = [0.0; 8];
        for ((slot, v), name) in out.iter_mut().zip(values).zip(RATING_NAMES) {
            *slot = v.ok_or_else(|| Error::Validation(format!("rating `{name}` missing")))?;
        }
        Self::new(out)
    }

    pub fn values(&self) -> &[f64; 8] {
        &self.0
    }

    pub fn safety_from_crime(&self) -> f64 {
        self.0[5]
    }
}

/// Equal-weight mean of the eight category ratings.
pub fn overall_walkability(r: &CategoryRatings) -> f64 {
    // Sorting first makes the sum independent of category order.
    let mut v = r.0;
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / 8.0;
    mean.clamp(v[0], v[7])
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEdge {
    pub segment_id: String,
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub geometry: Polyline,
}

#[derive(Debug, Clone)]
pub struct StreetNetwork {
    pub nodes: Vec<PlanarPoint>,
    pub edges: Vec<NetworkEdge>,
    adjacency: Vec<Vec<usize>>,
}

impl StreetNetwork {
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Shortest along-edge distance from every node to the given seeds.
    pub fn distances_from(&self, seeds: &[(usize, f64)]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        for &(n, d) in seeds {
            if d < dist[n] {
                dist[n] = d;
                heap.push(Reverse(d, n));
            }
        }
        while let Some(Reverse(d, n)) = heap.pop() {
            if d > dist[n] {
                continue;
            }
            for &e in &self.adjacency[n] {
                let edge = &self.edges[e];
                let other = if edge.from == n { edge.to } else { edge.from };
                let nd = d + edge.length;
                if nd < dist[other] {
                    dist[other] = nd;
                    heap.push(Reverse(nd, other));
                }
            }
        }
        dist
    }
}

#[derive(PartialEq)]
struct Reverse(f64, usize);

impl Eq for Reverse {}

impl PartialOrd for Reverse {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Reverse {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Street graph whose nodes are segment endpoints merged within
/// `snap_tolerance` meters (transitively).
#[allow(clippy::needless_range_loop)]
pub fn build_network<S: AsRef<str>>(segments: &[(S, Polyline)], snap_tolerance: f64) -> Result<StreetNetwork> {
    if !(snap_tolerance >= 0.0 && snap_tolerance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "snap tolerance must be non-negative, got {snap_tolerance}"
        )));
    }
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| segments[a].0.as_ref().cmp(segments[b].0.as_ref()));

    let endpoints: Vec<PlanarPoint> = order
        .iter()
        .flat_map(|&i| [segments[i].1.first(), segments[i].1.last()])
        .collect();
    let mut by_x: Vec<usize> = (0..endpoints.len()).collect();
    let lex = |a: &PlanarPoint, b: &PlanarPoint| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y));
    by_x.sort_by(|&a, &b| lex(&endpoints[a], &endpoints[b]));
    let mut parent: Vec<usize> = (0..endpoints.len()).collect();
    for (k, &a) in by_x.iter().enumerate() {
        for &b in &by_x[k + 1..] {
            if endpoints[b].x - endpoints[a].x > snap_tolerance {
                break;
            }
            if endpoints[a].distance(endpoints[b]) <= snap_tolerance {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    // Each cluster is represented by its lexicographically smallest member.
    let mut rep: Vec<Option<PlanarPoint>> = vec![None; endpoints.len()];
    for i in 0..endpoints.len() {
        let r = find(&mut parent, i);
        let p = endpoints[i];
        rep[r] = Some(match rep[r] {
            Some(q) if lex(&q, &p) != Ordering::Greater => q,
            _ => p,
        });
    }
    let mut roots: Vec<usize> = (0..endpoints.len()).filter(|&i| rep[i].is_some()).collect();
    roots.sort_by(|&a, &b| lex(&rep[a].unwrap(), &rep[b].unwrap()));
    let mut node_of_root = vec![usize::MAX; endpoints.len()];
    let nodes: Vec<PlanarPoint> = roots
        .iter()
        .enumerate()
        .map(|(n, &r)| {
            node_of_root[r] = n;
            rep[r].unwrap()
        })
        .collect();

    let mut adjacency = vec![Vec::new(); nodes.len()];
    let mut edges = Vec::with_capacity(order.len());
    for (k, &i) in order.iter().enumerate() {
        let from = node_of_root[find(&mut parent, 2 * k)];
        let to = node_of_root[find(&mut parent, 2 * k + 1)];
        let geometry = segments[i].1.clone();
        adjacency[from].push(k);
        if to != from {
            adjacency[to].push(k);
        }
        edges.push(NetworkEdge {
            segment_id: segments[i].0.as_ref().to_string(),
            from,
            to,
            length: geometry.length(),
            geometry,
        });
    }
    Ok(StreetNetwork { nodes, edges, adjacency })
}

/// Convex hull of everything reachable within `minutes` of walking from the
/// point of the network closest to `origin`. Vertices are counterclockwise;
/// a degenerate hull has one or two vertices.
pub fn walkhood(net: &StreetNetwork, origin: PlanarPoint, minutes: f64, speed: f64) -> Result<Vec<PlanarPoint>> {
    Ok(convex_hull(reachable_points(net, origin, minutes, speed)?))
}

/// Vertices of all reachable street pieces.
pub fn reachable_points(
    net: &StreetNetwork,
    origin: PlanarPoint,
    minutes: f64,
    speed: f64,
) -> Result<Vec<PlanarPoint>> {
    if !(minutes > 0.0 && minutes.is_finite()) || !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "walk budget needs positive minutes and speed, got {minutes} min at {speed} m/min"
        )));
    }
    let mut snap: Option<(usize, f64, f64)> = None;
    for (k, e) in net.edges.iter().enumerate() {
        let (_, s, d) = e.geometry.closest_point(origin);
        if snap.is_none_or(|(_, _, bd)| d < bd) {
            snap = Some((k, s, d));
        }
    }
    let (edge0, s0, offset) = snap.ok_or_else(|| Error::EmptyInput("network has no edges".into()))?;
    if offset > MAX_ORIGIN_OFFSET_M {
        return Err(Error::UnreachableOrigin(offset));
    }
    let budget = minutes * speed;
    let e0 = &net.edges[edge0];
    let dist = net.distances_from(&[(e0.from, s0), (e0.to, e0.length - s0)]);

    let mut points = e0.geometry.slice((s0 - budget).max(0.0), (s0 + budget).min(e0.length));
    for e in &net.edges {
        let (du, dv) = (dist[e.from], dist[e.to]);
        if du <= budget {
            points.extend(e.geometry.slice(0.0, (budget - du).min(e.length)));
        }
        if dv <= budget {
            points.extend(e.geometry.slice((e.length - (budget - dv)).max(0.0), e.length));
        }
    }
    Ok(points)
}

fn cross(o: PlanarPoint, a: PlanarPoint, b: PlanarPoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Monotone-chain convex hull, counterclockwise, without collinear vertices.
pub fn convex_hull(mut pts: Vec<PlanarPoint>) -> Vec<PlanarPoint> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<PlanarPoint> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &PlanarPoint>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        // All points collinear: keep the two extremes.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

/// Whether `p` lies inside (or within `tol` of) a hull from [`convex_hull`].
pub fn hull_contains(hull: &[PlanarPoint], p: PlanarPoint, tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0].distance(p) <= tol,
        2 => Polyline::new(hull.to_vec()).is_ok_and(|l| l.distance_to(p) <= tol),
        n => {
            (0..n).all(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % n]);
                cross(a, b, p) >= -tol * a.distance(b)
            })
        }
    }
}

/// GeoJSON feature for a hull, unprojected to lon/lat. Degenerate hulls are
/// emitted as `Point` or `LineString` geometries.
pub fn hull_feature(hull: &[PlanarPoint], proj: &Projection, minutes: f64, speed: f64) -> Value {
    let pos = |p: &PlanarPoint| {
        let g = proj.unproject(*p);
        serde_json::json!([g.lon, g.lat])
    };
    let geometry = match hull.len() {
        0 => Value::Null,
        1 => serde_json::json!({ "type": "Point", "coordinates": pos(&hull[0]) }),
        2 => serde_json::json!({ "type": "LineString", "coordinates": hull.iter().map(pos).collect::<Vec<_>>() }),
        _ => {
            let mut ring: Vec<Value> = hull.iter().map(pos).collect();
            ring.push(pos(&hull[0]));
            serde_json::json!({ "type": "Polygon", "coordinates": [ring] })
        }
    };
    serde_json::json!({
        "type": "Feature",
        "properties": { "minutes": minutes, "speed_m_per_min": speed },
        "geometry": geometry,
    })
}
