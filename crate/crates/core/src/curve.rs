//! Quadratic Bézier entry-guide profile.
//!
//! The guide runs from the mouth corner `P0 = (0, mouth_halfwidth)` to the
//! throat entry `P2 = (depth, throat_halfwidth)`. The middle control point is
//! placed on the throat tangent line, which leaves `P2` at `theta` degrees
//! from the approach axis and heads back toward the mouth. `weight` slides
//! `P1` along that ray from `P2` (w = 0, a straight chamfer) to the point
//! where the ray leaves the guide box `[0, depth] x [throat, mouth]` (w = 1,
//! the fullest curve).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ValidationError;
use crate::geom::{segment_distance, segments_cross, Vec2};

/// Default chord tolerance for collision polylines, meters.
pub const DEFAULT_CHORD_ERROR: f64 = 0.5e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("degenerate guide geometry: {0}")]
    Degenerate(String),
    #[error("curve parameter t = {0} outside [0, 1]")]
    Domain(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuideCurve {
    /// Throat tangent angle from the approach axis, degrees in [0, 90].
    pub theta: f64,
    /// Control-point placement along the throat tangent, in [0, 1].
    pub weight: f64,
    pub mouth_halfwidth: f64,
    pub throat_halfwidth: f64,
    pub depth: f64,
}

impl GuideCurve {
    pub fn new(
        theta: f64,
        weight: f64,
        mouth_halfwidth: f64,
        throat_halfwidth: f64,
        depth: f64,
    ) -> Result<Self, ValidationError> {
        let c = Self {
            theta,
            weight,
            mouth_halfwidth,
            throat_halfwidth,
            depth,
        };
        c.validate()?;
        Ok(c)
    }

    /// Same port dimensions, different shape parameters.
    pub fn with_shape(&self, theta: f64, weight: f64) -> Result<Self, ValidationError> {
        Self::new(
            theta,
            weight,
            self.mouth_halfwidth,
            self.throat_halfwidth,
            self.depth,
        )
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let all = [
            self.theta,
            self.weight,
            self.mouth_halfwidth,
            self.throat_halfwidth,
            self.depth,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ValidationError::new("curve", "all fields must be finite"));
        }
        if !(0.0..=90.0).contains(&self.theta) {
            return Err(ValidationError::new("theta", "must lie in [0, 90] degrees"));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(ValidationError::new("weight", "must lie in [0, 1]"));
        }
        if self.throat_halfwidth <= 0.0 {
            return Err(ValidationError::new("throat_halfwidth", "must be positive"));
        }
        if self.mouth_halfwidth <= self.throat_halfwidth {
            return Err(ValidationError::new(
                "mouth_halfwidth",
                "must exceed throat_halfwidth",
            ));
        }
        if self.depth <= 0.0 {
            return Err(ValidationError::new("depth", "must be positive"));
        }
        Ok(())
    }

    /// Unit direction of the throat tangent, pointing from `P2` back toward the mouth.
    pub fn throat_tangent(&self) -> Vec2 {
        let th = self.theta.to_radians();
        Vec2::new(-th.cos(), th.sin())
    }

    pub fn control_points(&self) -> Result<[Vec2; 3], CurveError> {
        self.validate()?;
        let p0 = Vec2::new(0.0, self.mouth_halfwidth);
        let p2 = Vec2::new(self.depth, self.throat_halfwidth);
        let dir = self.throat_tangent();

        // Distance along the tangent ray until it leaves the guide box.
        let mut exit = f64::INFINITY;
        if -dir.x > 1e-15 {
            exit = exit.min(self.depth / -dir.x);
        }
        if dir.y > 1e-15 {
            exit = exit.min((self.mouth_halfwidth - self.throat_halfwidth) / dir.y);
        }
        if !exit.is_finite() {
            return Err(CurveError::Degenerate(
                "throat tangent never leaves the guide box".into(),
            ));
        }
        let p1 = p2 + dir * (self.weight * exit);

        let slack = 1e-12;
        let in_box = p1.x >= -slack
            && p1.x <= self.depth + slack
            && p1.y >= self.throat_halfwidth - slack
            && p1.y <= self.mouth_halfwidth + slack;
        if !in_box || !p1.is_finite() {
            return Err(CurveError::Degenerate(format!(
                "control point ({}, {}) outside the guide box",
                p1.x, p1.y
            )));
        }
        Ok([p0, p1, p2])
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec2, CurveError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(CurveError::Domain(t));
        }
        let cp = self.control_points()?;
        Ok(bezier(&cp, t))
    }

    /// Polyline approximation, mouth to throat, within `max_chord_error` of
    /// the exact curve.
    pub fn discretize(&self, max_chord_error: f64) -> Result<Polyline2D, CurveError> {
        if !(max_chord_error > 0.0) {
            return Err(ValidationError::new("max_chord_error", "must be positive").into());
        }
        let cp = self.control_points()?;
        let [p0, p1, p2] = cp;
        let span = (p2 - p0).norm();
        let collinear = (p1 - p0).cross(p2 - p0).abs() <= 1e-14 * span * span;
        // Uniform subdivision: a piece of parameter length 1/n deviates from
        // its chord by at most |P0 - 2 P1 + P2| / (4 n^2).
        let n = if collinear {
            1
        } else {
            let second = (p0 - p1 * 2.0 + p2).norm();
            ((second / (4.0 * max_chord_error)).sqrt().ceil() as usize).max(1)
        };
        let mut verts = Vec::with_capacity(n + 1);
        verts.push(p0);
        for i in 1..n {
            verts.push(bezier(&cp, i as f64 / n as f64));
        }
        verts.push(p2);
        Ok(Polyline2D { vertices: verts })
    }
}

fn bezier(cp: &[Vec2; 3], t: f64) -> Vec2 {
    let u = 1.0 - t;
    cp[0] * (u * u) + cp[1] * (2.0 * u * t) + cp[2] * (t * t)
}

/// Ordered open chain of distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline2D {
    vertices: Vec<Vec2>,
}

impl Polyline2D {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, ValidationError> {
        if vertices.len() < 2 {
            return Err(ValidationError::new(
                "polyline",
                "needs at least 2 vertices",
            ));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(ValidationError::new("polyline", "vertices must be finite"));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(ValidationError::new(
                "polyline",
                "consecutive vertices coincide",
            ));
        }
        let n = vertices.len();
        for i in 0..n - 1 {
            for j in i + 2..n - 1 {
                if segments_cross(vertices[i], vertices[i + 1], vertices[j], vertices[j + 1]) {
                    return Err(ValidationError::new("polyline", "self-intersecting"));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.segments()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Reflection across the approach axis.
    pub fn mirror(&self) -> Polyline2D {
        Polyline2D {
            vertices: self.vertices.iter().map(|v| v.mirror_y()).collect(),
        }
    }

    /// CSV with an `x,y` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y\n");
        for v in &self.vertices {
            s.push_str(&format!("{},{}\n", v.x, v.y));
        }
        s
    }
}
