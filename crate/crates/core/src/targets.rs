//! Reported reference values and the tolerances computed values are judged
//! against.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Target {
    pub name: &'static str,
    pub reported: f64,
    pub unit: &'static str,
    /// Accepted interval for the computed value.
    pub lo: f64,
    pub hi: f64,
}

impl Target {
    pub const fn relative(
        name: &'static str,
        reported: f64,
        unit: &'static str,
        frac: f64,
    ) -> Self {
        Self {
            name,
            reported,
            unit,
            lo: reported * (1.0 - frac),
            hi: reported * (1.0 + frac),
        }
    }

    pub const fn absolute(name: &'static str, reported: f64, unit: &'static str, tol: f64) -> Self {
        Self {
            name,
            reported,
            unit,
            lo: reported - tol,
            hi: reported + tol,
        }
    }

    pub fn accepts(&self, value: f64) -> bool {
        (self.lo..=self.hi).contains(&value)
    }
}

pub const ROVER_COOLDOWN_MIN: Target = Target::relative("rover cooldown", 40.0, "min", 0.15);
pub const BATTERY_COOLDOWN_MIN: Target = Target::relative("battery cooldown", 8.0, "min", 0.15);
pub const SERVICE_TIME_S: Target = Target::absolute("mean service time", 98.0, "s", 1e-3);
/// Low end of the sustainable fleet range, at 900 W per rover.
pub const FLEET_LOW: Target = Target::absolute("fleet size at 900 W", 6.0, "rovers", 1.0);
/// High end of the sustainable fleet range, at 410 W per rover.
pub const FLEET_HIGH: Target = Target::absolute("fleet size at 410 W", 12.0, "rovers", 1.0);
/// Only the direction and magnitude class of the reported +258 % are
/// reproduced; the accepted band is any ratio above 1.5.
pub const VOLUME_RATIO: Target = Target {
    name: "bumper/baseline volume ratio",
    reported: 3.58,
    unit: "x",
    lo: 1.5,
    hi: f64::INFINITY,
};
/// Hardware-measured ±17.72°; the mechanical model must land in the same
/// magnitude class.
pub const MAX_YAW_DEG: Target = Target {
    name: "max yaw compensation",
    reported: 17.72,
    unit: "deg",
    lo: 10.0,
    hi: 35.0,
};
pub const MIN_UPTIME: f64 = 0.97;
pub const MIN_CONSECUTIVE_SWAPS: usize = 50;
/// Prototype: 3 terminals for 2 rovers.
pub const PROTOTYPE_ROVERS: usize = 2;
pub const PROTOTYPE_TERMINALS: usize = 3;
