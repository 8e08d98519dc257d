//! Unit conventions and conversion helpers.
//!
//! Everything is SI internally (meters, seconds, watts, kelvin, ampere-hours for
//! battery charge). Two exceptions: yaw angles in [`crate::pose::Pose2D`] and
//! guide-curve angles are carried in degrees, and Celsius is accepted only when
//! reading scenario files.

use serde::{Deserialize, Deserializer};

/// Stefan-Boltzmann constant, W/(m²·K⁴) (CODATA 2018, exact).
pub const STEFAN_BOLTZMANN: f64 = 5.670_374_419e-8;

pub const ZERO_CELSIUS_K: f64 = 273.15;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + ZERO_CELSIUS_K
}

pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - ZERO_CELSIUS_K
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn hours_to_seconds(h: f64) -> f64 {
    h * SECONDS_PER_HOUR
}

pub fn seconds_to_hours(s: f64) -> f64 {
    s / SECONDS_PER_HOUR
}

/// Wrap an angle in degrees into (-180, 180].
pub fn normalize_deg(deg: f64) -> f64 {
    if !deg.is_finite() {
        return deg;
    }
    let mut a = deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Parse a temperature given either as a bare number (kelvin) or as a string
/// with an explicit unit tag: `"313.15 K"`, `"40 C"`, `"40 degC"`, `"40 °C"`.
pub fn parse_temperature(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("bad temperature value `{text}`"))?;
    match unit.trim() {
        "" | "K" => Ok(value),
        "C" | "degC" | "°C" => Ok(celsius_to_kelvin(value)),
        other => Err(format!("unknown temperature unit `{other}` in `{text}`")),
    }
}

/// Serde adapter: deserializes a temperature field into kelvin.
pub fn de_temperature<'de, D>(d: D) -> Result<f64, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Int(v) => Ok(v as f64),
        Raw::Text(s) => parse_temperature(&s).map_err(serde::de::Error::custom),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_into_half_open_range() {
        assert_eq!(normalize_deg(180.0), 180.0);
        assert_eq!(normalize_deg(-180.0), 180.0);
        assert_eq!(normalize_deg(190.0), -170.0);
        assert_eq!(normalize_deg(-190.0), 170.0);
        assert_eq!(normalize_deg(720.5), 0.5);
        assert_eq!(normalize_deg(-15.0), -15.0);
    }

    #[test]
    fn temperature_tags() {
        assert_eq!(parse_temperature("313.15 K").unwrap(), 313.15);
        assert_eq!(parse_temperature("313.15").unwrap(), 313.15);
        assert!((parse_temperature("40 degC").unwrap() - 313.15).abs() < 1e-12);
        assert!((parse_temperature("-40C").unwrap() - 233.15).abs() < 1e-12);
        assert!(parse_temperature("40 F").is_err());
        assert!(parse_temperature("warm").is_err());
    }
}
