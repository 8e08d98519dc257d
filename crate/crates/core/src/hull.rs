//! 3D convex hull (quickhull) and hull volume for success-region clouds.
//!
//! Coordinates are (axial offset m, lateral offset m, yaw deg), so a volume
//! carries units of m·m·deg. Only ratios between designs evaluated on the same
//! axes are meaningful.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SimRng;

/// Points within this distance of a common plane are treated as coplanar.
pub const PLANE_EPS: f64 = 1e-9;

/// Axis labels recorded in hull exports.
pub const AXES: [&str; 3] = ["axial_offset_m", "lateral_offset_m", "yaw_deg"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HullError {
    #[error("convex hull needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("point cloud contains non-finite coordinates")]
    NonFinite,
}

pub type P3 = [f64; 3];

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: P3, b: P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: P3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud3 {
    pub points: Vec<P3>,
}

impl PointCloud3 {
    pub fn new(points: Vec<P3>) -> Result<Self, HullError> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(HullError::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{},{}\n", AXES[0], AXES[1], AXES[2]);
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p[0], p[1], p[2]));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hull3 {
    /// Indices into the input cloud, ascending.
    pub vertices: Vec<usize>,
    /// Outward-oriented (counter-clockwise seen from outside) triangles of
    /// input indices.
    pub faces: Vec<[usize; 3]>,
    pub volume: f64,
    /// Input was collinear or coplanar within [`PLANE_EPS`].
    pub degenerate: bool,
}

impl Hull3 {
    /// Zero-volume hull flagged degenerate.
    pub fn degenerate() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
            volume: 0.0,
            degenerate: true,
        }
    }

    /// Largest signed distance of `p` outside any face plane (non-positive
    /// when `p` is inside or on the hull).
    pub fn max_face_distance(&self, cloud: &PointCloud3, p: P3) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (n, off) = plane(&cloud.points, *f);
                dot(n, p) - off
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// OFF mesh with the hull vertices renumbered compactly. The axis labels
    /// go in a comment line.
    pub fn to_off(&self, cloud: &PointCloud3) -> String {
        let index: HashMap<usize, usize> = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        let mut s = String::from("OFF\n");
        s.push_str(&format!("# axes: {} {} {}\n", AXES[0], AXES[1], AXES[2]));
        s.push_str(&format!("{} {} 0\n", self.vertices.len(), self.faces.len()));
        for &v in &self.vertices {
            let p = cloud.points[v];
            s.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
        for f in &self.faces {
            s.push_str(&format!(
                "3 {} {} {}\n",
                index[&f[0]], index[&f[1]], index[&f[2]]
            ));
        }
        s
    }
}

/// Unit normal and offset of the plane through a triangle.
fn plane(points: &[P3], f: [usize; 3]) -> (P3, f64) {
    let (a, b, c) = (points[f[0]], points[f[1]], points[f[2]]);
    let n = cross(sub(b, a), sub(c, a));
    let len = norm(n);
    let n = if len > 0.0 {
        [n[0] / len, n[1] / len, n[2] / len]
    } else {
        [0.0; 3]
    };
    (n, dot(n, a))
}

struct Face {
    v: [usize; 3],
    normal: P3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[P3], v: [usize; 3]) -> Self {
        let (normal, offset) = plane(points, v);
        Self {
            v,
            normal,
            offset,
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: P3) -> f64 {
        dot(self.normal, p) - self.offset
    }
}

/// Index of the maximum of `key`, lowest index on ties.
fn argmax<I: Iterator<Item = usize>>(it: I, key: impl Fn(usize) -> f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in it {
        let k = key(i);
        if best.is_none_or(|(_, bk)| k > bk) {
            best = Some((i, k));
        }
    }
    best
}

/// Convex hull of `cloud`.
///
/// Coplanar or collinear input (within [`PLANE_EPS`]) gives a zero-volume
/// hull with `degenerate = true`. Ties in point selection go to the lowest
/// input index, so the output is a deterministic function of the input order.
pub fn quickhull3(cloud: &PointCloud3) -> Result<Hull3, HullError> {
    let pts = &cloud.points;
    let n = pts.len();
    if n < 4 {
        return Err(HullError::TooFewPoints(n));
    }
    if pts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HullError::NonFinite);
    }

    // Initial simplex: widest extreme pair, farthest from their line,
    // farthest from that plane.
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let lo = argmax(0..n, |i| -pts[i][axis]).map(|(i, _)| i).unwrap_or(0);
        let hi = argmax(0..n, |i| pts[i][axis]).map(|(i, _)| i).unwrap_or(0);
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut pair = (extremes[0], extremes[1], -1.0);
    for (i, &a) in extremes.iter().enumerate() {
        for &b in &extremes[i + 1..] {
            let d = norm(sub(pts[a], pts[b]));
            if d > pair.2 {
                pair = (a, b, d);
            }
        }
    }
    let (a, b, span) = pair;
    if span <= PLANE_EPS {
        return Ok(Hull3::degenerate());
    }
    let ab = sub(pts[b], pts[a]);
    let (c, line_dist) =
        argmax(0..n, |i| norm(cross(ab, sub(pts[i], pts[a]))) / span).expect("non-empty");
    if line_dist <= PLANE_EPS {
        return Ok(Hull3::degenerate());
    }
    let base = Face::new(pts, [a, b, c]);
    let (d, plane_dist) = argmax(0..n, |i| base.distance(pts[i]).abs()).expect("non-empty");
    if plane_dist <= PLANE_EPS {
        return Ok(Hull3::degenerate());
    }

    let mut faces: Vec<Face> = Vec::new();
    // Orient the base so the apex is behind it.
    let tets: [[usize; 3]; 4] = if base.distance(pts[d]) > 0.0 {
        [[a, c, b], [a, b, d], [b, c, d], [c, a, d]]
    } else {
        [[a, b, c], [a, d, b], [b, d, c], [c, d, a]]
    };
    for t in tets {
        faces.push(Face::new(pts, t));
    }

    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edges.insert((f.v[k], f.v[(k + 1) % 3]), fi);
        }
    }

    let simplex = [a, b, c, d];
    for i in 0..n {
        if simplex.contains(&i) {
            continue;
        }
        assign(&mut faces, 0..4, pts, i);
    }

    loop {
        // Lowest-index face with outside points, then its farthest point.
        let Some(fi) = faces.iter().position(|f| f.alive && !f.outside.is_empty()) else {
            break;
        };
        let (apex, _) = argmax(faces[fi].outside.iter().copied(), |i| {
            faces[fi].distance(pts[i])
        })
        .expect("non-empty outside set");
        let eye = pts[apex];

        // Visible region by flood fill from `fi`.
        let mut visible = vec![fi];
        let mut is_visible: HashMap<usize, bool> = HashMap::new();
        is_visible.insert(fi, true);
        let mut k = 0;
        while k < visible.len() {
            let f = visible[k];
            k += 1;
            for e in 0..3 {
                let (u, v) = (faces[f].v[e], faces[f].v[(e + 1) % 3]);
                let g = edges[&(v, u)];
                if is_visible.contains_key(&g) {
                    continue;
                }
                let vis = faces[g].distance(eye) > PLANE_EPS;
                is_visible.insert(g, vis);
                if vis {
                    visible.push(g);
                }
            }
        }

        // Horizon edges, kept in the orientation of the visible face.
        let mut horizon = Vec::new();
        for &f in &visible {
            for e in 0..3 {
                let (u, v) = (faces[f].v[e], faces[f].v[(e + 1) % 3]);
                let g = edges[&(v, u)];
                if !is_visible[&g] {
                    horizon.push((u, v));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            faces[f].alive = false;
            orphans.append(&mut faces[f].outside);
            for e in 0..3 {
                let key = (faces[f].v[e], faces[f].v[(e + 1) % 3]);
                edges.remove(&key);
            }
        }
        orphans.sort_unstable();

        let first_new = faces.len();
        for (u, v) in horizon {
            let fi = faces.len();
            faces.push(Face::new(pts, [u, v, apex]));
            edges.insert((u, v), fi);
            edges.insert((v, apex), fi);
            edges.insert((apex, u), fi);
        }
        let new_range = first_new..faces.len();
        for p in orphans {
            if p != apex {
                assign(&mut faces, new_range.clone(), pts, p);
            }
        }
    }

    let live: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    let mut vertices: Vec<usize> = live.iter().flatten().copied().collect();
    vertices.sort_unstable();
    vertices.dedup();

    // Signed tetra volumes against an interior reference point.
    let inv = 1.0 / vertices.len() as f64;
    let mut centre = [0.0; 3];
    for &v in &vertices {
        for k in 0..3 {
            centre[k] += pts[v][k] * inv;
        }
    }
    let volume = live
        .iter()
        .map(|f| {
            let (p, q, r) = (
                sub(pts[f[0]], centre),
                sub(pts[f[1]], centre),
                sub(pts[f[2]], centre),
            );
            dot(p, cross(q, r)) / 6.0
        })
        .sum::<f64>()
        .max(0.0);

    Ok(Hull3 {
        vertices,
        faces: live,
        volume,
        degenerate: false,
    })
}

/// Put point `p` in the outside set of the first face in `range` that sees it.
fn assign(faces: &mut [Face], range: std::ops::Range<usize>, pts: &[P3], p: usize) {
    for fi in range {
        if faces[fi].alive && faces[fi].distance(pts[p]) > PLANE_EPS {
            faces[fi].outside.push(p);
            return;
        }
    }
}

/// Monte-Carlo volume estimate used to cross-check [`quickhull3`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub degenerate: bool,
}

/// Estimate the hull volume by rejection sampling in the bounding box.
///
/// Membership is decided against facet planes found by brute force: a
/// triangle of input points is a facet when every point lies on one side of
/// its plane. This shares no code with [`quickhull3`] and costs O(n^4), so it
/// is meant for test-sized clouds.
pub fn volume_oracle(
    cloud: &PointCloud3,
    n_samples: usize,
    rng: &mut SimRng,
) -> Result<VolumeEstimate, HullError> {
    let pts = &cloud.points;
    let n = pts.len();
    if n < 4 {
        return Err(HullError::TooFewPoints(n));
    }
    if pts.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HullError::NonFinite);
    }

    let mut planes: Vec<(P3, f64)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nrm = cross(sub(pts[j], pts[i]), sub(pts[k], pts[i]));
                let len = norm(nrm);
                if len <= 1e-300 {
                    continue;
                }
                let nrm = [nrm[0] / len, nrm[1] / len, nrm[2] / len];
                let off = dot(nrm, pts[i]);
                let (mut above, mut below) = (false, false);
                for p in pts {
                    let s = dot(nrm, *p) - off;
                    above |= s > PLANE_EPS;
                    below |= s < -PLANE_EPS;
                    if above && below {
                        break;
                    }
                }
                match (above, below) {
                    (true, false) => planes.push(([-nrm[0], -nrm[1], -nrm[2]], -off)),
                    (false, true) => planes.push((nrm, off)),
                    // Every point on this plane: the cloud is flat.
                    (false, false) => {
                        return Ok(VolumeEstimate {
                            volume: 0.0,
                            std_error: 0.0,
                            degenerate: true,
                        })
                    }
                    (true, true) => {}
                }
            }
        }
    }
    if planes.is_empty() {
        return Ok(VolumeEstimate {
            volume: 0.0,
            std_error: 0.0,
            degenerate: true,
        });
    }

    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let box_volume = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let q = [
            rng.uniform_range(lo[0], hi[0]),
            rng.uniform_range(lo[1], hi[1]),
            rng.uniform_range(lo[2], hi[2]),
        ];
        if planes.iter().all(|(nrm, off)| dot(*nrm, q) - off <= 0.0) {
            hits += 1;
        }
    }
    let frac = hits as f64 / n_samples.max(1) as f64;
    let std_error = box_volume * (frac * (1.0 - frac) / n_samples.max(1) as f64).sqrt();
    Ok(VolumeEstimate {
        volume: box_volume * frac,
        std_error,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;

    fn cube() -> PointCloud3 {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        PointCloud3::new(pts).unwrap()
    }

    #[test]
    fn unit_cube_volume() {
        let h = quickhull3(&cube()).unwrap();
        assert!(!h.degenerate);
        assert!((h.volume - 1.0).abs() < 1e-12);
        assert_eq!(h.vertices.len(), 8);
        assert_eq!(h.faces.len(), 12);
    }

    #[test]
    fn too_few_points() {
        let c = PointCloud3::new(vec![[0.0; 3]; 3]).unwrap();
        assert_eq!(quickhull3(&c), Err(HullError::TooFewPoints(3)));
    }

    #[test]
    fn coplanar_cloud_is_degenerate() {
        let mut r = make_rng(5);
        let pts: Vec<P3> = (0..100)
            .map(|_| {
                let (u, v) = (r.uniform(), r.uniform());
                [u, v, 2.0 * u - v + 0.5]
            })
            .collect();
        let c = PointCloud3::new(pts).unwrap();
        let h = quickhull3(&c).unwrap();
        assert!(h.degenerate);
        assert_eq!(h.volume, 0.0);
        let est = volume_oracle(&c, 1000, &mut r).unwrap();
        assert_eq!(est.volume, 0.0);
    }

    #[test]
    fn duplicate_points_are_fine() {
        let mut pts = cube().points;
        pts.extend(cube().points);
        pts.push([0.5, 0.5, 0.5]);
        let h = quickhull3(&PointCloud3::new(pts).unwrap()).unwrap();
        assert!((h.volume - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cube_oracle() {
        let mut r = make_rng(11);
        let est = volume_oracle(&cube(), 1_000_000, &mut r).unwrap();
        assert!((est.volume - 1.0).abs() < 0.005, "{est:?}");
    }

    #[test]
    fn octahedron_oracle() {
        let pts = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let c = PointCloud3::new(pts).unwrap();
        let mut r = make_rng(12);
        let est = volume_oracle(&c, 400_000, &mut r).unwrap();
        let exact = 4.0 / 3.0;
        assert!((est.volume - exact).abs() / exact < 0.01, "{est:?}");
        assert!((quickhull3(&c).unwrap().volume - exact).abs() < 1e-12);
    }

    #[test]
    fn off_export_counts() {
        let c = cube();
        let h = quickhull3(&c).unwrap();
        let off = h.to_off(&c);
        assert!(off.starts_with("OFF\n"));
        assert!(off.contains("8 12 0"));
    }
}
