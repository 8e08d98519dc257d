//! Planar quasi-static docking entry.
//!
//! The rover is pushed along the approach axis in fixed increments. After each
//! increment, interpenetration with the port is projected out by
//! [`contact_resolve`]. Contact is frictionless and there is no inertia. A
//! single contact (or contacts on one side) translates the rover along the
//! deepest contact normal. When the two guides push from opposite sides and
//! translation alone cannot clear both, the rover also rotates about the
//! deepest contact point. The run ends when the rover nose reaches the
//! hardstop plane, at which point the nose seats flat against the hardstops.
//!
//! Port frame: `x` along the approach axis with the mouth plane at `x = 0`,
//! `y` lateral. The left guide (`y > 0`) is the discretized guide curve, the
//! right guide its mirror image.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{CurveError, GuideCurve, Polyline2D};
use crate::error::ValidationError;
use crate::geom::{closest_on_segment, point_in_polygon, polygon_area, segments_cross, Vec2};
use crate::pose::Pose2D;

/// Lateral extent of the hub face modelled beyond the mouth corner.
const FACE_EXTENT: f64 = 1.0;
/// Length of channel wall modelled beyond the hardstop plane.
const CHANNEL_EXTENT: f64 = 1.0;
/// Largest rotation applied in one projection iteration, radians.
const MAX_ROTATION_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DockError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("rover half-width {rover:.4} m cannot pass a throat of half-width {throat:.4} m")]
    ImpossibleGeometry { rover: f64, throat: f64 },
    #[error("start pose {0} interpenetrates the port")]
    StartPenetrates(Pose2D),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FailureReason {
    Wedged,
    MissedPort,
    ExceededSteps,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureReason::Wedged => "WEDGED",
            FailureReason::MissedPort => "MISSED_PORT",
            FailureReason::ExceededSteps => "EXCEEDED_STEPS",
        })
    }
}

/// Tapered bumper mounted ahead of the rover front face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumperSpec {
    /// How far the bumper protrudes ahead of the body, meters.
    pub depth: f64,
    /// Lateral inset of the bumper tip relative to the rover side, meters.
    pub inset: f64,
}

/// Rigid rover footprint in its own frame (origin at the body center,
/// forward along +x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoverBody {
    outline: Vec<Vec2>,
    pub halfwidth: f64,
    pub length: f64,
    pub bumpers_enabled: bool,
}

impl RoverBody {
    pub fn rectangle(length: f64, halfwidth: f64) -> Result<Self, ValidationError> {
        Self::build(length, halfwidth, None)
    }

    pub fn with_bumpers(
        length: f64,
        halfwidth: f64,
        bumper: BumperSpec,
    ) -> Result<Self, ValidationError> {
        Self::build(length, halfwidth, Some(bumper))
    }

    pub fn build(
        length: f64,
        halfwidth: f64,
        bumper: Option<BumperSpec>,
    ) -> Result<Self, ValidationError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(ValidationError::new("rover.length", "must be positive"));
        }
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(ValidationError::new("rover.halfwidth", "must be positive"));
        }
        let (l, h) = (0.5 * length, halfwidth);
        let outline = match bumper {
            None => vec![
                Vec2::new(-l, -h),
                Vec2::new(l, -h),
                Vec2::new(l, h),
                Vec2::new(-l, h),
            ],
            Some(b) => {
                if !(b.depth > 0.0 && b.depth < length) {
                    return Err(ValidationError::new(
                        "bumper.depth",
                        "must be positive and shorter than the rover",
                    ));
                }
                if !(b.inset > 0.0 && b.inset < halfwidth) {
                    return Err(ValidationError::new(
                        "bumper.inset",
                        "must be positive and less than the half-width",
                    ));
                }
                vec![
                    Vec2::new(-l, -h),
                    Vec2::new(l, -h),
                    Vec2::new(l + b.depth, -h + b.inset),
                    Vec2::new(l + b.depth, h - b.inset),
                    Vec2::new(l, h),
                    Vec2::new(-l, h),
                ]
            }
        };
        Self::from_outline(outline, length, halfwidth, bumper.is_some())
    }

    /// Arbitrary closed simple outline (counter-clockwise or clockwise).
    pub fn from_outline(
        outline: Vec<Vec2>,
        length: f64,
        halfwidth: f64,
        bumpers_enabled: bool,
    ) -> Result<Self, ValidationError> {
        let n = outline.len();
        if n < 3 {
            return Err(ValidationError::new(
                "rover.outline",
                "needs at least 3 vertices",
            ));
        }
        if outline.iter().any(|v| !v.is_finite()) {
            return Err(ValidationError::new(
                "rover.outline",
                "vertices must be finite",
            ));
        }
        for i in 0..n {
            for j in i + 1..n {
                if (j + 1) % n == i || j == i + 1 {
                    continue;
                }
                if segments_cross(
                    outline[i],
                    outline[(i + 1) % n],
                    outline[j],
                    outline[(j + 1) % n],
                ) {
                    return Err(ValidationError::new("rover.outline", "self-intersecting"));
                }
            }
        }
        if polygon_area(&outline).abs() <= 0.0 {
            return Err(ValidationError::new("rover.outline", "zero area"));
        }
        Ok(Self {
            outline,
            halfwidth,
            length,
            bumpers_enabled,
        })
    }

    pub fn outline(&self) -> &[Vec2] {
        &self.outline
    }

    /// Outline vertices placed at `pose`.
    pub fn world_outline(&self, pose: &Pose2D) -> Vec<Vec2> {
        let (s, c) = pose.yaw_rad().sin_cos();
        let p = pose.position();
        self.outline
            .iter()
            .map(|v| Vec2::new(p.x + (v.x * c - v.y * s), p.y + (v.x * s + v.y * c)))
            .collect()
    }

    /// Largest distance from the body origin to an outline vertex.
    pub fn radius(&self) -> f64 {
        self.outline.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Port walls. `left_guide` is the guide curve at `y > 0`, ordered mouth to
/// throat; `right_guide` is its mirror image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortGeometry {
    pub left_guide: Polyline2D,
    pub right_guide: Polyline2D,
    pub hardstop_x: f64,
    pub throat_halfwidth: f64,
}

impl PortGeometry {
    pub fn new(
        left_guide: Polyline2D,
        hardstop_x: f64,
        throat_halfwidth: f64,
    ) -> Result<Self, ValidationError> {
        let verts = left_guide.vertices();
        let first = verts[0];
        let last = *verts.last().expect("polyline has vertices");
        if first.x.abs() > 1e-12 {
            return Err(ValidationError::new(
                "port",
                "guide must start on the mouth plane x = 0",
            ));
        }
        if verts.windows(2).any(|w| w[1].x < w[0].x) {
            return Err(ValidationError::new(
                "port",
                "guide must be monotone along the approach axis",
            ));
        }
        if verts.iter().any(|v| v.y <= 0.0) {
            return Err(ValidationError::new("port", "left guide must lie at y > 0"));
        }
        if (last.y - throat_halfwidth).abs() > 1e-9 {
            return Err(ValidationError::new(
                "throat_halfwidth",
                "must match the guide end",
            ));
        }
        if !(hardstop_x > last.x) {
            return Err(ValidationError::new(
                "hardstop_x",
                "must lie beyond the guide depth",
            ));
        }
        Ok(Self {
            right_guide: left_guide.mirror(),
            left_guide,
            hardstop_x,
            throat_halfwidth,
        })
    }

    /// Port built from a guide curve with a straight channel of
    /// `channel_length` between the throat and the hardstops.
    pub fn from_curve(
        curve: &GuideCurve,
        chord_error: f64,
        channel_length: f64,
    ) -> Result<Self, DockError> {
        if !(channel_length > 0.0) {
            return Err(ValidationError::new("channel_length", "must be positive").into());
        }
        let guide = curve.discretize(chord_error)?;
        Ok(Self::new(
            guide,
            curve.depth + channel_length,
            curve.throat_halfwidth,
        )?)
    }

    pub fn mouth_halfwidth(&self) -> f64 {
        self.left_guide.vertices()[0].y
    }

    pub fn guide_depth(&self) -> f64 {
        self.left_guide.vertices().last().map_or(0.0, |v| v.x)
    }

    /// Is the configuration mirror-symmetric about the approach axis?
    pub fn is_symmetric(&self) -> bool {
        self.right_guide == self.left_guide.mirror()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DockParams {
    /// Axial advance per step, meters.
    pub step: f64,
    pub max_steps: usize,
    /// Projection iterations per step.
    pub max_iterations: usize,
    /// Residual penetration accepted as contact, meters.
    pub penetration_tolerance: f64,
    /// Seated lateral tolerance, meters.
    pub lateral_tolerance: f64,
    /// Seated yaw tolerance, degrees.
    pub yaw_tolerance: f64,
    /// Steps over which less than half a step of axial progress counts as a stall.
    pub stall_window: usize,
}

impl Default for DockParams {
    fn default() -> Self {
        Self {
            step: 1e-3,
            max_steps: 100_000,
            max_iterations: 50,
            penetration_tolerance: 1e-7,
            lateral_tolerance: 5e-3,
            yaw_tolerance: 2.0,
            stall_window: 200,
        }
    }
}

impl DockParams {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let positive = [
            ("step", self.step),
            ("penetration_tolerance", self.penetration_tolerance),
            ("lateral_tolerance", self.lateral_tolerance),
            ("yaw_tolerance", self.yaw_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ValidationError::new(name, "must be positive"));
            }
        }
        if self.max_steps == 0 || self.max_iterations == 0 || self.stall_window == 0 {
            return Err(ValidationError::new(
                "dock params",
                "step and iteration caps must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DockResult {
    pub success: bool,
    pub final_pose: Pose2D,
    pub trajectory: Vec<Pose2D>,
    pub failure_reason: Option<FailureReason>,
}

impl DockResult {
    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from("step,x_axial,y_lateral,yaw_deg\n");
        for (i, p) in self.trajectory.iter().enumerate() {
            s.push_str(&format!("{i},{},{},{}\n", p.x_axial, p.y_lateral, p.yaw));
        }
        s
    }
}

/// The pose could not be freed from interpenetration.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("rover wedged at {pose}")]
pub struct Wedged {
    pub pose: Pose2D,
    pub on_face: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy)]
struct Contact {
    /// World point that must move along `normal` (on the rover boundary).
    point: Vec2,
    /// Unit direction the rover must move to separate.
    normal: Vec2,
    depth: f64,
    side: Side,
    /// Contact against the hub face beside the mouth rather than a guide.
    on_face: bool,
}

/// One side of the port as a closed solid plus the part of its boundary that
/// is physical wall.
struct Solid {
    polygon: Vec<Vec2>,
    /// Face top, mouth corner, guide vertices..., channel end.
    wall: Vec<Vec2>,
    side: Side,
    min: Vec2,
    max: Vec2,
}

impl Solid {
    fn new(guide: &[Vec2], hardstop_x: f64, side: Side) -> Self {
        let sign = if side == Side::Left { 1.0 } else { -1.0 };
        let mouth = guide[0];
        let throat = *guide.last().expect("guide has vertices");
        let far_y = mouth.y + sign * FACE_EXTENT;
        let end_x = hardstop_x + CHANNEL_EXTENT;

        let mut wall = Vec::with_capacity(guide.len() + 2);
        wall.push(Vec2::new(mouth.x, far_y));
        wall.extend_from_slice(guide);
        wall.push(Vec2::new(end_x, throat.y));

        let mut polygon = wall.clone();
        polygon.push(Vec2::new(end_x, far_y));

        let min = Vec2::new(
            polygon.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
            polygon.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
        );
        let max = Vec2::new(
            polygon
                .iter()
                .map(|p| p.x)
                .fold(f64::NEG_INFINITY, f64::max),
            polygon
                .iter()
                .map(|p| p.y)
                .fold(f64::NEG_INFINITY, f64::max),
        );
        Self {
            polygon,
            wall,
            side,
            min,
            max,
        }
    }

    fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && point_in_polygon(p, &self.polygon)
    }

    /// Nearest wall point and whether it lies on the hub face segment.
    fn nearest_wall(&self, p: Vec2) -> (Vec2, bool) {
        let mut best = (self.wall[0], f64::INFINITY, false);
        for (i, w) in self.wall.windows(2).enumerate() {
            let q = closest_on_segment(p, w[0], w[1]);
            let d = (q - p).norm_sq();
            if d < best.1 {
                best = (q, d, i == 0);
            }
        }
        (best.0, best.2)
    }
}

/// Port prepared for repeated contact queries.
pub struct PreparedPort<'a> {
    port: &'a PortGeometry,
    solids: [Solid; 2],
}

impl<'a> PreparedPort<'a> {
    pub fn new(port: &'a PortGeometry) -> Self {
        let solids = [
            Solid::new(port.left_guide.vertices(), port.hardstop_x, Side::Left),
            Solid::new(port.right_guide.vertices(), port.hardstop_x, Side::Right),
        ];
        Self { port, solids }
    }

    pub fn port(&self) -> &PortGeometry {
        self.port
    }

    fn contacts(&self, rover_world: &[Vec2], tol: f64, out: &mut Vec<Contact>) {
        out.clear();
        let (mut lo, mut hi) = (rover_world[0], rover_world[0]);
        for v in rover_world {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        for solid in &self.solids {
            if hi.x < solid.min.x || lo.x > solid.max.x || hi.y < solid.min.y || lo.y > solid.max.y
            {
                continue;
            }
            // Rover corners inside the wall.
            for &v in rover_world {
                if solid.contains(v) {
                    let (q, on_face) = solid.nearest_wall(v);
                    let d = (q - v).norm();
                    if d > tol {
                        out.push(Contact {
                            point: v,
                            normal: (q - v) * (1.0 / d),
                            depth: d,
                            side: solid.side,
                            on_face,
                        });
                    }
                }
            }
            // Wall corners inside the rover. The first and last wall points are
            // far outside any reachable pose.
            let corners = &solid.wall[1..solid.wall.len() - 1];
            for (k, &s) in corners.iter().enumerate() {
                if s.x < lo.x || s.x > hi.x || s.y < lo.y || s.y > hi.y {
                    continue;
                }
                if !point_in_polygon(s, rover_world) {
                    continue;
                }
                let n = rover_world.len();
                let mut best = (s, f64::INFINITY);
                for i in 0..n {
                    let e = closest_on_segment(s, rover_world[i], rover_world[(i + 1) % n]);
                    let d = (e - s).norm_sq();
                    if d < best.1 {
                        best = (e, d);
                    }
                }
                let d = best.1.sqrt();
                if d > tol {
                    let normal = (s - best.0) * (1.0 / d);
                    out.push(Contact {
                        point: best.0,
                        normal,
                        depth: d,
                        side: solid.side,
                        // The mouth corner met head-on by the rover nose.
                        on_face: k == 0 && normal.x.abs() > normal.y.abs(),
                    });
                }
            }
        }
    }
}

fn deepest(contacts: &[Contact]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in contacts.iter().enumerate() {
        if best.is_none_or(|b| c.depth > contacts[b].depth) {
            best = Some(i);
        }
    }
    best
}

/// Project `pose` out of interpenetration with the port.
///
/// Returns the corrected pose, or [`Wedged`] when the iteration cap is reached
/// with penetration remaining or when opposing contacts admit no rotation
/// that separates them.
pub fn contact_resolve(
    pose: Pose2D,
    rover: &RoverBody,
    port: &PreparedPort<'_>,
    params: &DockParams,
) -> Result<Pose2D, Wedged> {
    let mut contacts = Vec::new();
    resolve_with(pose, rover, port, params, &mut contacts)
}

fn resolve_with(
    mut pose: Pose2D,
    rover: &RoverBody,
    port: &PreparedPort<'_>,
    params: &DockParams,
    contacts: &mut Vec<Contact>,
) -> Result<Pose2D, Wedged> {
    let tol = params.penetration_tolerance;
    for _ in 0..params.max_iterations {
        let world = rover.world_outline(&pose);
        port.contacts(&world, tol, contacts);
        let Some(i) = deepest(contacts) else {
            return Ok(pose);
        };
        let main = contacts[i];
        let shift = main.normal * main.depth;
        let mut pos = pose.position() + shift;
        let mut yaw = pose.yaw_rad();

        // Deepest contact on the opposite wall once the translation is applied.
        let shifted = Pose2D::raw(pos.x, pos.y, pose.yaw);
        port.contacts(&rover.world_outline(&shifted), tol, contacts);
        let opposing =
            contacts
                .iter()
                .filter(|c| c.side != main.side)
                .fold(None::<Contact>, |best, c| match best {
                    Some(b) if b.depth >= c.depth => Some(b),
                    _ => Some(*c),
                });

        if let Some(other) = opposing {
            let pivot = main.point + shift;
            let lever = other.point - pivot;
            let rate = other.normal.dot(lever.perp());
            if rate.abs() <= 1e-9 * lever.norm().max(1e-12) {
                return Err(Wedged {
                    pose,
                    on_face: main.on_face || other.on_face,
                });
            }
            let turn = (other.depth / rate).clamp(-MAX_ROTATION_STEP, MAX_ROTATION_STEP);
            pos = pivot + (pos - pivot).rotate(turn);
            yaw += turn;
        }
        pose = Pose2D::raw(pos.x, pos.y, yaw.to_degrees());
    }
    let world = rover.world_outline(&pose);
    port.contacts(&world, tol, contacts);
    match deepest(contacts) {
        None => Ok(pose),
        Some(i) => Err(Wedged {
            pose,
            on_face: contacts[i].on_face,
        }),
    }
}

fn front_x(world: &[Vec2]) -> f64 {
    world.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max)
}

/// Drive the rover from `start` into the port.
pub fn simulate_entry(
    port: &PortGeometry,
    rover: &RoverBody,
    start: Pose2D,
    params: &DockParams,
) -> Result<DockResult, DockError> {
    let prepared = PreparedPort::new(port);
    simulate_prepared(&prepared, rover, start, params)
}

/// [`simulate_entry`] against a port already prepared for contact queries.
pub fn simulate_prepared(
    port: &PreparedPort<'_>,
    rover: &RoverBody,
    start: Pose2D,
    params: &DockParams,
) -> Result<DockResult, DockError> {
    params.validate()?;
    let geometry = port.port();
    if rover.halfwidth >= geometry.throat_halfwidth {
        return Err(DockError::ImpossibleGeometry {
            rover: rover.halfwidth,
            throat: geometry.throat_halfwidth,
        });
    }
    let mut contacts = Vec::new();
    port.contacts(
        &rover.world_outline(&start),
        params.penetration_tolerance,
        &mut contacts,
    );
    if !contacts.is_empty() {
        return Err(DockError::StartPenetrates(start));
    }

    let mut pose = start;
    let mut trajectory = vec![start];
    let fail = |pose: Pose2D, trajectory: Vec<Pose2D>, reason| DockResult {
        success: false,
        final_pose: pose,
        trajectory,
        failure_reason: Some(reason),
    };

    for step in 0..params.max_steps {
        let world = rover.world_outline(&pose);
        let nose = front_x(&world);
        if nose >= geometry.hardstop_x {
            return Ok(seat(pose, rover, port, params, trajectory, &mut contacts));
        }

        let advanced = Pose2D::raw(pose.x_axial + params.step, pose.y_lateral, pose.yaw);
        match resolve_with(advanced, rover, port, params, &mut contacts) {
            Ok(p) => pose = p,
            Err(w) => {
                let reason = if w.on_face {
                    FailureReason::MissedPort
                } else {
                    FailureReason::Wedged
                };
                trajectory.push(w.pose);
                return Ok(fail(w.pose, trajectory, reason));
            }
        }
        trajectory.push(pose);

        if step + 1 >= params.stall_window {
            let before = trajectory[trajectory.len() - 1 - params.stall_window];
            if pose.x_axial - before.x_axial < 0.5 * params.step {
                let world = rover.world_outline(&pose);
                // Re-advance once to see what is blocking.
                let probe = Pose2D::raw(pose.x_axial + params.step, pose.y_lateral, pose.yaw);
                port.contacts(
                    &rover.world_outline(&probe),
                    params.penetration_tolerance,
                    &mut contacts,
                );
                let on_face = contacts.iter().any(|c| c.on_face) || front_x(&world) <= 0.0;
                let reason = if on_face {
                    FailureReason::MissedPort
                } else {
                    FailureReason::Wedged
                };
                return Ok(fail(pose, trajectory, reason));
            }
        }
    }
    Ok(fail(pose, trajectory, FailureReason::ExceededSteps))
}

/// Nose has reached the hardstop plane: pull back to the plane, square the
/// nose against the hardstops and check the seated tolerances.
fn seat(
    pose: Pose2D,
    rover: &RoverBody,
    port: &PreparedPort<'_>,
    params: &DockParams,
    mut trajectory: Vec<Pose2D>,
    contacts: &mut Vec<Contact>,
) -> DockResult {
    let hardstop = port.port().hardstop_x;
    let world = rover.world_outline(&pose);
    let overshoot = front_x(&world) - hardstop;
    let seated = Pose2D::raw(pose.x_axial - overshoot, pose.y_lateral, pose.yaw);

    // Rotate about the leading nose corner until the nose is flat on the plane.
    let world = rover.world_outline(&seated);
    let (lead, _) = world
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
            if v.x > acc.1 {
                (i, v.x)
            } else {
                acc
            }
        });
    let pivot = world[lead];
    let turn = -seated.yaw_rad();
    let pos = pivot + (seated.position() - pivot).rotate(turn);
    let squared = Pose2D::raw(pos.x, pos.y, 0.0);

    let (final_pose, reason) = match resolve_with(squared, rover, port, params, contacts) {
        Ok(p) => {
            let slack = params.penetration_tolerance;
            let ok = p.y_lateral.abs() <= params.lateral_tolerance + slack
                && p.yaw.abs() <= params.yaw_tolerance + slack;
            (p, (!ok).then_some(FailureReason::Wedged))
        }
        // The body cannot square up inside the channel and stays jammed.
        Err(_) => (seated, Some(FailureReason::Wedged)),
    };
    trajectory.push(final_pose);
    DockResult {
        success: reason.is_none(),
        final_pose,
        trajectory,
        failure_reason: reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn port() -> PortGeometry {
        let c = GuideCurve::new(45.0, 0.5, 0.19, 0.115, 0.12).unwrap();
        PortGeometry::from_curve(&c, 5e-4, 0.10).unwrap()
    }

    fn rover() -> RoverBody {
        RoverBody::rectangle(0.26, 0.11).unwrap()
    }

    #[test]
    fn free_pose_is_unchanged() {
        let p = port();
        let prepared = PreparedPort::new(&p);
        let pose = Pose2D::new(-0.3, 0.0, 5.0).unwrap();
        let out = contact_resolve(pose, &rover(), &prepared, &DockParams::default()).unwrap();
        assert_eq!(out, pose);
    }

    #[test]
    fn single_contact_translates_along_normal() {
        // Flat channel wall at y = 0.115 pressed by the front-left corner only.
        let p = port();
        let prepared = PreparedPort::new(&p);
        let r = RoverBody::rectangle(0.1, 0.11).unwrap();
        let depth = 0.002;
        let pose = Pose2D::new(0.18, depth + 0.005, 0.0).unwrap();
        let out = contact_resolve(pose, &r, &prepared, &DockParams::default()).unwrap();
        assert!((out.x_axial - pose.x_axial).abs() < 1e-12);
        assert!((out.y_lateral - (pose.y_lateral - depth)).abs() < 1e-9);
        assert_eq!(out.yaw, 0.0);
    }

    #[test]
    fn overwide_body_wedges() {
        // Both sides of a 0.12 m half-width body overlap a 0.115 m channel.
        let p = port();
        let prepared = PreparedPort::new(&p);
        let r = RoverBody::rectangle(0.05, 0.12).unwrap();
        let pose = Pose2D::new(0.18, 0.0, 0.0).unwrap();
        assert!(contact_resolve(pose, &r, &prepared, &DockParams::default()).is_err());
    }

    #[test]
    fn aligned_start_docks() {
        let res = simulate_entry(
            &port(),
            &rover(),
            Pose2D::new(-0.25, 0.0, 0.0).unwrap(),
            &DockParams::default(),
        )
        .unwrap();
        assert!(res.success, "{:?}", res.failure_reason);
        assert_eq!(res.final_pose.yaw, 0.0);
        assert_eq!(res.trajectory[0], Pose2D::new(-0.25, 0.0, 0.0).unwrap());
        let nose = res.final_pose.x_axial + 0.13;
        assert!((nose - 0.22).abs() < 1e-9);
    }

    #[test]
    fn sideways_start_fails() {
        let res = simulate_entry(
            &port(),
            &rover(),
            Pose2D::new(-0.3, 0.0, 89.0).unwrap(),
            &DockParams::default(),
        )
        .unwrap();
        assert!(!res.success);
        assert!(matches!(
            res.failure_reason,
            Some(FailureReason::Wedged | FailureReason::MissedPort)
        ));
    }

    #[test]
    fn lateral_miss_hits_the_face() {
        let res = simulate_entry(
            &port(),
            &rover(),
            Pose2D::new(-0.25, 0.12, 0.0).unwrap(),
            &DockParams::default(),
        )
        .unwrap();
        assert!(!res.success);
        assert_eq!(res.failure_reason, Some(FailureReason::MissedPort));
    }

    #[test]
    fn impossible_geometry_is_an_error() {
        let wide = RoverBody::rectangle(0.26, 0.2).unwrap();
        let err = simulate_entry(
            &port(),
            &wide,
            Pose2D::new(-0.5, 0.0, 0.0).unwrap(),
            &DockParams::default(),
        );
        assert!(matches!(err, Err(DockError::ImpossibleGeometry { .. })));
    }

    #[test]
    fn bumper_outline_is_validated() {
        assert!(RoverBody::with_bumpers(
            0.26,
            0.11,
            BumperSpec {
                depth: 0.03,
                inset: 0.2
            }
        )
        .is_err());
        let b = RoverBody::with_bumpers(
            0.26,
            0.11,
            BumperSpec {
                depth: 0.03,
                inset: 0.02,
            },
        )
        .unwrap();
        assert_eq!(b.outline().len(), 6);
        assert!(b.bumpers_enabled);
    }
}
