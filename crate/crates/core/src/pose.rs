use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::geom::Vec2;
use crate::units::normalize_deg;

/// Planar rover configuration relative to the docking port.
///
/// `x_axial` runs along the approach axis (positive into the port),
/// `y_lateral` across it, and `yaw` is the heading error in degrees,
/// normalized to (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x_axial: f64,
    pub y_lateral: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x_axial: f64, y_lateral: f64, yaw: f64) -> Result<Self, ValidationError> {
        if !(x_axial.is_finite() && y_lateral.is_finite() && yaw.is_finite()) {
            return Err(ValidationError::new(
                "pose",
                "all components must be finite",
            ));
        }
        Ok(Self {
            x_axial,
            y_lateral,
            yaw: normalize_deg(yaw),
        })
    }

    /// Constructor for values already known to be finite.
    pub(crate) fn raw(x_axial: f64, y_lateral: f64, yaw: f64) -> Self {
        Self {
            x_axial,
            y_lateral,
            yaw: normalize_deg(yaw),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x_axial, self.y_lateral)
    }

    pub fn yaw_rad(&self) -> f64 {
        self.yaw.to_radians()
    }

    /// Reflection across the approach axis.
    pub fn mirrored(&self) -> Pose2D {
        Pose2D {
            x_axial: self.x_axial,
            y_lateral: -self.y_lateral,
            yaw: normalize_deg(-self.yaw),
        }
    }

    /// Map a point given in the rover frame into the port frame.
    pub fn transform(&self, local: Vec2) -> Vec2 {
        self.position() + local.rotate(self.yaw_rad())
    }
}

impl std::fmt::Display for Pose2D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({:.6} m, {:.6} m, {:.4} deg)",
            self.x_axial, self.y_lateral, self.yaw
        )
    }
}

impl std::str::FromStr for Pose2D {
    type Err = ValidationError;

    /// Parses `"x,y,yaw"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(ValidationError::new("start", "expected `x,y,yaw`"));
        }
        let mut v = [0.0; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| ValidationError::new("start", format!("`{p}` is not a number")))?;
        }
        Pose2D::new(v[0], v[1], v[2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaw_is_normalized() {
        let p = Pose2D::new(0.0, 0.0, 270.0).unwrap();
        assert_eq!(p.yaw, -90.0);
        assert_eq!(Pose2D::new(0.0, 0.0, -180.0).unwrap().yaw, 180.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(Pose2D::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(Pose2D::new(0.0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn parses_triplet() {
        let p: Pose2D = "-0.15, 0.01, 12.5".parse().unwrap();
        assert_eq!(p, Pose2D::new(-0.15, 0.01, 12.5).unwrap());
        assert!("1,2".parse::<Pose2D>().is_err());
    }

    #[test]
    fn mirror_is_involution() {
        let p = Pose2D::new(0.3, -0.02, 33.0).unwrap();
        assert_eq!(p.mirrored().mirrored(), p);
        assert_eq!(p.mirrored().y_lateral, 0.02);
    }
}
