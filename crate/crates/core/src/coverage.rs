//! Hub-network coverage geometry: rover endurance and service radius, two-hub
//! lens overlap, chain and hexagonal network areas, gap checks and trajectory
//! feasibility.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ValidationError;
use crate::geom::Vec2;
use crate::rng::make_rng;
use crate::scenario::FleetSpec;
use crate::units::SECONDS_PER_HOUR;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoverageError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

fn require(ok: bool, field: &str, reason: &str) -> Result<(), CoverageError> {
    if ok {
        Ok(())
    } else {
        Err(ValidationError::new(field, reason).into())
    }
}

/// Runtime on one module, t_m = Q_b·V_b / P_m, hours.
pub fn endurance(spec: &FleetSpec) -> f64 {
    spec.module_energy_wh() / spec.p_rover
}

/// Out-and-back range R_h = ½·v·t_m, meters, for speed `v` (m/s) and
/// endurance `t_m` (hours).
pub fn service_radius_for(v: f64, t_m: f64) -> f64 {
    0.5 * v * t_m * SECONDS_PER_HOUR
}

/// Service radius of one hub for the fleet's rovers, meters.
pub fn service_radius(spec: &FleetSpec) -> f64 {
    service_radius_for(spec.v_rover, endurance(spec))
}

/// Area served by one hub, m².
pub fn hub_area(r_h: f64) -> f64 {
    PI * r_h * r_h
}

/// Lens area shared by two hubs of radius `r_h` spaced `d_h` apart.
///
/// Spacings beyond `2·r_h` give 0 with a warning: the hubs are disjoint.
pub fn overlap_area(r_h: f64, d_h: f64) -> Result<f64, CoverageError> {
    require(r_h > 0.0 && r_h.is_finite(), "r_h", "must be positive")?;
    require(d_h >= 0.0 && d_h.is_finite(), "d_h", "must be non-negative")?;
    if d_h >= 2.0 * r_h {
        if d_h > 2.0 * r_h {
            log::warn!("hub spacing {d_h} exceeds twice the radius {r_h}; no overlap");
        }
        return Ok(0.0);
    }
    let a = 2.0 * r_h * r_h * (d_h / (2.0 * r_h)).acos()
        - 0.5 * d_h * (4.0 * r_h * r_h - d_h * d_h).sqrt();
    Ok(a.clamp(0.0, hub_area(r_h)))
}

/// Area of `n_h` hubs in a straight chain at spacing `d_h`:
/// n_h·(A_h − A_overlap) + A_overlap.
pub fn chain_coverage(n_h: usize, r_h: f64, d_h: f64) -> Result<f64, CoverageError> {
    require(n_h >= 1, "n_h", "at least one hub")?;
    let o = overlap_area(r_h, d_h)?;
    Ok(n_h as f64 * (hub_area(r_h) - o) + o)
}

/// Spacing at which three mutually adjacent hubs leave no gap.
pub fn hex_spacing(r_h: f64) -> f64 {
    r_h * 3f64.sqrt()
}

/// Closed-form hexagonal network area:
/// n_h·A_h − max(0, 2·n_h − 3)·A_overlap(r_h, r_h·√3).
///
/// This counts pairwise lenses only; [`hex_report`] compares it with the
/// sampled union.
pub fn hex_coverage(n_h: usize, r_h: f64) -> Result<f64, CoverageError> {
    require(n_h >= 1, "n_h", "at least one hub")?;
    let o = overlap_area(r_h, hex_spacing(r_h))?;
    let lenses = (2 * n_h).saturating_sub(3) as f64;
    Ok(n_h as f64 * hub_area(r_h) - lenses * o)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Topology {
    Chain,
    Hex,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubNetwork {
    pub hubs: Vec<Vec2>,
    pub r_h: f64,
    pub topology: Topology,
    /// Spacing for the regular topologies.
    pub d_h: Option<f64>,
}

impl HubNetwork {
    /// `n` hubs along +x starting at the origin.
    pub fn chain(n: usize, r_h: f64, d_h: f64) -> Result<Self, CoverageError> {
        let hubs = (0..n).map(|i| Vec2::new(i as f64 * d_h, 0.0)).collect();
        let net = Self {
            hubs,
            r_h,
            topology: Topology::Chain,
            d_h: Some(d_h),
        };
        net.validate()?;
        Ok(net)
    }

    /// First `n` sites of a triangular lattice at spacing r_h·√3, nearest the
    /// origin first, ties broken by polar angle. Three hubs form an
    /// equilateral triple.
    pub fn hex(n: usize, r_h: f64) -> Result<Self, CoverageError> {
        let d = hex_spacing(r_h);
        let rings = (n as f64).sqrt().ceil() as i64 + 1;
        let (a, b) = (Vec2::new(d, 0.0), Vec2::new(0.5 * d, 0.5 * 3f64.sqrt() * d));
        let mut sites: Vec<(i64, i64)> = Vec::new();
        for i in -rings..=rings {
            for j in -rings..=rings {
                sites.push((i, j));
            }
        }
        // Squared lattice norm is exact in integers: |i·a + j·b|² / d² = i² + ij + j².
        let key = |&(i, j): &(i64, i64)| {
            let p = a * i as f64 + b * j as f64;
            let ang = p.y.atan2(p.x).rem_euclid(2.0 * PI);
            (i * i + i * j + j * j, ang)
        };
        sites.sort_by(|x, y| {
            let (kx, ky) = (key(x), key(y));
            kx.0.cmp(&ky.0).then(kx.1.total_cmp(&ky.1))
        });
        let hubs = sites
            .into_iter()
            .take(n)
            .map(|(i, j)| a * i as f64 + b * j as f64)
            .collect();
        let net = Self {
            hubs,
            r_h,
            topology: Topology::Hex,
            d_h: Some(d),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn custom(hubs: Vec<Vec2>, r_h: f64) -> Result<Self, CoverageError> {
        let net = Self {
            hubs,
            r_h,
            topology: Topology::Custom,
            d_h: None,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<(), CoverageError> {
        require(
            self.r_h > 0.0 && self.r_h.is_finite(),
            "r_h",
            "must be positive",
        )?;
        require(!self.hubs.is_empty(), "hubs", "at least one hub")?;
        require(
            self.hubs.iter().all(|h| h.is_finite()),
            "hubs",
            "must be finite",
        )?;
        if self.topology != Topology::Custom {
            let d = self.d_h.unwrap_or(f64::NAN);
            require(
                d > 0.0 && d <= 2.0 * self.r_h,
                "d_h",
                "must lie in (0, 2·r_h]",
            )?;
        }
        Ok(())
    }

    fn covered(&self, p: Vec2, slack: f64) -> bool {
        let r2 = (self.r_h * (1.0 + slack)).powi(2);
        self.hubs.iter().any(|h| (p - *h).norm_sq() <= r2)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("hub,x_m,y_m,r_m\n");
        for (i, h) in self.hubs.iter().enumerate() {
            s.push_str(&format!("{i},{},{},{}\n", h.x, h.y, self.r_h));
        }
        s
    }
}

/// Points on the outer boundary of the covered union, `per_hub` samples on
/// each hub circle.
pub fn coverage_boundary(net: &HubNetwork, per_hub: usize) -> Vec<Vec2> {
    let mut out = Vec::new();
    for (i, h) in net.hubs.iter().enumerate() {
        for k in 0..per_hub {
            let a = 2.0 * PI * k as f64 / per_hub as f64;
            let p = *h + Vec2::new(a.cos(), a.sin()) * net.r_h;
            let inside_other = net
                .hubs
                .iter()
                .enumerate()
                .any(|(j, o)| j != i && (p - *o).norm() < net.r_h * (1.0 - 1e-12));
            if !inside_other {
                out.push(p);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaEstimate {
    pub area: f64,
    /// Binomial standard error; conservative for the stratified sampler.
    pub std_error: f64,
    pub samples: usize,
}

/// Union area of the network disks by jittered stratified sampling of the
/// bounding box. Rows of cells are independent stripes, each with its own
/// sub-stream, so the result does not depend on `workers`.
pub fn union_area(net: &HubNetwork, samples: usize, seed: u64, workers: usize) -> AreaEstimate {
    let r = net.r_h;
    let (mut lo, mut hi) = (net.hubs[0], net.hubs[0]);
    for h in &net.hubs {
        lo = Vec2::new(lo.x.min(h.x), lo.y.min(h.y));
        hi = Vec2::new(hi.x.max(h.x), hi.y.max(h.y));
    }
    lo = lo - Vec2::new(r, r);
    hi = hi + Vec2::new(r, r);
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let nx = ((samples.max(1) as f64 * w / h).sqrt().round() as usize).max(1);
    let ny = (samples.max(1) / nx).max(1);
    let (cw, ch) = (w / nx as f64, h / ny as f64);
    let root = make_rng(seed);

    let stripe = |row: usize| -> usize {
        let mut rng = root.derive_indexed("coverage.union", row as u64);
        let y0 = lo.y + row as f64 * ch;
        (0..nx)
            .filter(|&col| {
                let p = Vec2::new(
                    lo.x + (col as f64 + rng.uniform()) * cw,
                    y0 + rng.uniform() * ch,
                );
                net.covered(p, 0.0)
            })
            .count()
    };
    let run = || (0..ny).into_par_iter().map(stripe).sum::<usize>();
    let hits = if workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    } else {
        run()
    };
    let n = nx * ny;
    let frac = hits as f64 / n as f64;
    AreaEstimate {
        area: frac * w * h,
        std_error: w * h * (frac * (1.0 - frac) / n as f64).sqrt(),
        samples: n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HexReport {
    pub n_h: usize,
    pub closed_form: f64,
    pub sampled: AreaEstimate,
    /// (closed_form − sampled) / sampled.
    pub relative_discrepancy: f64,
}

/// Closed-form hexagonal coverage next to the sampled union of the same layout.
pub fn hex_report(
    n_h: usize,
    r_h: f64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> Result<HexReport, CoverageError> {
    let closed_form = hex_coverage(n_h, r_h)?;
    let net = HubNetwork::hex(n_h, r_h)?;
    let sampled = union_area(&net, samples, seed, workers);
    Ok(HexReport {
        n_h,
        closed_form,
        sampled,
        relative_discrepancy: (closed_form - sampled.area) / sampled.area,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub gapless: bool,
    pub first_gap: Option<Vec2>,
    pub checked: usize,
}

/// Convex hull in counter-clockwise order (monotone chain). Collinear points
/// are dropped.
fn hull2(points: &[Vec2]) -> Vec<Vec2> {
    let mut p: Vec<Vec2> = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut out: Vec<Vec2> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = out.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for &q in iter {
            while out.len() >= start + 2 {
                let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
                if (b - a).cross(q - a) <= 0.0 {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(q);
        }
        out.pop();
    }
    out
}

/// Check that every grid point of the intended coverage region lies within
/// `r_h` of some hub.
///
/// The region is the convex hull of the hub centres: a single hub's own disk,
/// or the connecting segment when the hubs are collinear.
pub fn gapless_check(net: &HubNetwork, grid_step: f64) -> Result<GapReport, CoverageError> {
    net.validate()?;
    require(
        grid_step > 0.0 && grid_step.is_finite(),
        "grid_step",
        "must be positive",
    )?;
    let slack = 1e-9;
    let hull = hull2(&net.hubs);
    let mut checked = 0;
    let mut visit = |p: Vec2| -> Option<Vec2> {
        checked += 1;
        (!net.covered(p, slack)).then_some(p)
    };

    let first_gap = match hull.len() {
        1 => {
            let c = hull[0];
            let n = (net.r_h / grid_step).floor() as i64;
            let mut gap = None;
            'disk: for j in -n..=n {
                for i in -n..=n {
                    let p = c + Vec2::new(i as f64, j as f64) * grid_step;
                    if (p - c).norm() <= net.r_h {
                        if let Some(g) = visit(p) {
                            gap = Some(g);
                            break 'disk;
                        }
                    }
                }
            }
            gap
        }
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let n = ((b - a).norm() / grid_step).ceil() as usize;
            (0..=n).find_map(|k| visit(a.lerp(b, k as f64 / n as f64)))
        }
        _ => {
            let (mut lo, mut hi) = (hull[0], hull[0]);
            for v in &hull {
                lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
            }
            let scale = (hi - lo).norm();
            let inside = |p: Vec2| {
                (0..hull.len()).all(|i| {
                    let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                    (b - a).cross(p - a) >= -1e-12 * scale * scale
                })
            };
            let nx = ((hi.x - lo.x) / grid_step).floor() as usize;
            let ny = ((hi.y - lo.y) / grid_step).floor() as usize;
            let mut gap = None;
            'grid: for j in 0..=ny {
                for i in 0..=nx {
                    let p = Vec2::new(lo.x + i as f64 * grid_step, lo.y + j as f64 * grid_step);
                    if inside(p) {
                        if let Some(g) = visit(p) {
                            gap = Some(g);
                            break 'grid;
                        }
                    }
                }
            }
            gap
        }
    };
    Ok(GapReport {
        gapless: first_gap.is_none(),
        first_gap,
        checked,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    waypoints: Vec<Vec2>,
    length: f64,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Vec2>) -> Result<Self, CoverageError> {
        require(waypoints.len() >= 2, "waypoints", "at least two waypoints")?;
        require(
            waypoints.iter().all(|w| w.is_finite()),
            "waypoints",
            "must be finite",
        )?;
        let length = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        Ok(Self { waypoints, length })
    }

    pub fn waypoints(&self) -> &[Vec2] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrajectoryIssue {
    StartNotAtHub,
    EndNotAtHub,
    Length { length: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryCheck {
    pub pass: bool,
    pub issues: Vec<TrajectoryIssue>,
}

/// A trajectory must start and end within `snap_tolerance` of a hub (not
/// necessarily the same one) and be no longer than 2·r_h.
pub fn validate_trajectory(
    traj: &Trajectory,
    net: &HubNetwork,
    snap_tolerance: f64,
) -> TrajectoryCheck {
    let near_hub = |p: Vec2| net.hubs.iter().any(|h| (p - *h).norm() <= snap_tolerance);
    let mut issues = Vec::new();
    if !near_hub(traj.waypoints[0]) {
        issues.push(TrajectoryIssue::StartNotAtHub);
    }
    if !near_hub(*traj.waypoints.last().expect("two waypoints")) {
        issues.push(TrajectoryIssue::EndNotAtHub);
    }
    let max = 2.0 * net.r_h;
    // Summing segment lengths can overshoot an exact bound by rounding.
    if traj.length > max * (1.0 + 4.0 * f64::EPSILON) {
        issues.push(TrajectoryIssue::Length {
            length: traj.length,
            max,
        });
    }
    TrajectoryCheck {
        pass: issues.is_empty(),
        issues,
    }
}
