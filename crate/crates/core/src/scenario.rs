//! Scenario configuration: fleet and thermal parameters, port and rover
//! geometry, optimizer, DES and coverage settings.
//!
//! Scenario files are TOML with a `schema_version` key. Temperatures may be
//! written as bare kelvin numbers or tagged strings (`"40 degC"`); they are
//! stored and saved in kelvin.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::{GuideCurve, DEFAULT_CHORD_ERROR};
use crate::docksim::{BumperSpec, DockParams, PortGeometry, RoverBody};
use crate::error::{Error, Result, ValidationError};
use crate::units::{de_temperature, SECONDS_PER_HOUR};

pub const SCHEMA_VERSION: u32 = 1;

/// Canonical prototype scenario shipped with the toolkit.
pub const CANONICAL_TOML: &str = include_str!("../scenarios/canonical.toml");

pub(crate) fn check(
    ok: bool,
    field: &str,
    reason: &str,
) -> std::result::Result<(), ValidationError> {
    if ok {
        Ok(())
    } else {
        Err(ValidationError::new(field, reason))
    }
}

pub(crate) fn positive(v: f64, field: &str) -> std::result::Result<(), ValidationError> {
    check(
        v > 0.0 && v.is_finite(),
        field,
        "must be positive and finite",
    )
}

pub(crate) fn non_negative(v: f64, field: &str) -> std::result::Result<(), ValidationError> {
    check(
        v >= 0.0 && v.is_finite(),
        field,
        "must be non-negative and finite",
    )
}

pub(crate) fn probability(v: f64, field: &str) -> std::result::Result<(), ValidationError> {
    check((0.0..=1.0).contains(&v), field, "must lie in [0, 1]")
}

/// Hub power and battery parameters plus rover consumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    /// Hub generation, W.
    pub p_gen: f64,
    /// Hub self-consumption, W.
    pub p_hub: f64,
    /// Module capacity, Ah.
    pub q_b: f64,
    /// Module nominal voltage, V.
    pub v_b: f64,
    /// Time to charge one module, hours.
    pub charge_time: f64,
    /// Average rover consumption, W.
    pub p_rover: f64,
    /// Rover speed, m/s.
    pub v_rover: f64,
    /// Hub speed, m/s.
    pub v_hub: f64,
    pub n_terminals: usize,
    /// Total swap duration, s.
    pub swap_time: f64,
}

impl FleetSpec {
    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        positive(self.p_gen, "fleet.p_gen")?;
        positive(self.q_b, "fleet.q_b")?;
        positive(self.v_b, "fleet.v_b")?;
        positive(self.charge_time, "fleet.charge_time")?;
        positive(self.p_rover, "fleet.p_rover")?;
        positive(self.v_rover, "fleet.v_rover")?;
        non_negative(self.v_hub, "fleet.v_hub")?;
        non_negative(self.p_hub, "fleet.p_hub")?;
        check(
            self.p_hub < self.p_gen,
            "fleet.p_hub",
            "must be below p_gen",
        )?;
        check(
            self.n_terminals >= 2,
            "fleet.n_terminals",
            "at least 2 terminals",
        )?;
        positive(self.swap_time, "fleet.swap_time")
    }

    /// Module energy Q_b·V_b, Wh.
    pub fn module_energy_wh(&self) -> f64 {
        self.q_b * self.v_b
    }

    /// Power needed to charge one module in `charge_time`, W.
    pub fn charge_power(&self) -> f64 {
        self.module_energy_wh() / self.charge_time
    }

    /// Module charge rate, Ah/s.
    pub fn charge_rate(&self) -> f64 {
        self.q_b / (self.charge_time * SECONDS_PER_HOUR)
    }

    /// Rover discharge rate while driving or working, Ah/s.
    pub fn discharge_rate(&self) -> f64 {
        self.p_rover / self.v_b / SECONDS_PER_HOUR
    }
}

/// Radiating body for the cooling model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalBody {
    /// kg
    pub mass: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
    /// m²
    pub area: f64,
    pub emissivity: f64,
    #[serde(deserialize_with = "de_temperature")]
    pub t_initial: f64,
    #[serde(deserialize_with = "de_temperature")]
    pub t_ambient: f64,
    #[serde(deserialize_with = "de_temperature")]
    pub t_limit: f64,
}

impl ThermalBody {
    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        self.validate_as("thermal")
    }

    fn validate_as(&self, prefix: &str) -> std::result::Result<(), ValidationError> {
        let f = |name: &str| format!("{prefix}.{name}");
        positive(self.mass, &f("mass"))?;
        positive(self.specific_heat, &f("specific_heat"))?;
        positive(self.area, &f("area"))?;
        check(
            self.emissivity > 0.0 && self.emissivity <= 1.0,
            &f("emissivity"),
            "must lie in (0, 1]",
        )?;
        non_negative(self.t_ambient, &f("t_ambient"))?;
        positive(self.t_initial, &f("t_initial"))?;
        check(
            self.t_limit <= self.t_initial,
            &f("t_limit"),
            "must not exceed t_initial",
        )?;
        check(
            self.t_ambient < self.t_limit,
            &f("t_ambient"),
            "must be below t_limit",
        )
    }

    /// Heat capacity m·c, J/K.
    pub fn heat_capacity(&self) -> f64 {
        self.mass * self.specific_heat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoverSpec {
    pub length: f64,
    pub halfwidth: f64,
    /// Bumper fitted for the bumper configuration.
    pub bumper: BumperSpec,
}

impl RoverSpec {
    pub fn body(&self, bumpers: bool) -> std::result::Result<RoverBody, ValidationError> {
        RoverBody::build(self.length, self.halfwidth, bumpers.then_some(self.bumper))
    }
}

/// Port dimensions not carried by the guide curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortSpec {
    /// Straight channel between guide throat and hardstop, m.
    pub channel_length: f64,
    /// Chord tolerance when discretizing guides, m.
    #[serde(default = "default_chord_error")]
    pub chord_error: f64,
}

fn default_chord_error() -> f64 {
    DEFAULT_CHORD_ERROR
}

impl PortSpec {
    pub fn build(&self, curve: &GuideCurve) -> Result<PortGeometry> {
        Ok(PortGeometry::from_curve(
            curve,
            self.chord_error,
            self.channel_length,
        )?)
    }
}

/// Gaussian start-pose distribution for success-region sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDistribution {
    /// Mean axial start, m.
    pub mean_axial: f64,
    #[serde(default)]
    pub mean_lateral: f64,
    #[serde(default)]
    pub mean_yaw: f64,
    pub sd_axial: f64,
    pub sd_lateral: f64,
    /// Degrees.
    pub sd_yaw: f64,
}

impl PoseDistribution {
    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        check(
            self.mean_axial.is_finite(),
            "monte_carlo.mean_axial",
            "must be finite",
        )?;
        check(
            self.mean_lateral.is_finite(),
            "monte_carlo.mean_lateral",
            "must be finite",
        )?;
        check(
            self.mean_yaw.is_finite(),
            "monte_carlo.mean_yaw",
            "must be finite",
        )?;
        positive(self.sd_axial, "monte_carlo.sd_axial")?;
        positive(self.sd_lateral, "monte_carlo.sd_lateral")?;
        positive(self.sd_yaw, "monte_carlo.sd_yaw")
    }
}

impl Default for PoseDistribution {
    fn default() -> Self {
        Self {
            mean_axial: -0.3,
            mean_lateral: 0.0,
            mean_yaw: 0.0,
            sd_axial: 0.01,
            sd_lateral: 0.02,
            sd_yaw: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub samples: usize,
    pub distribution: PoseDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    /// Grid step for the throat angle, degrees.
    pub theta_step: f64,
    pub weight_step: f64,
    /// Yaw normalization for the score, degrees.
    pub yaw_scale: f64,
    /// Lateral normalization for the score, m. Defaults to the mouth half-width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axial_scale: Option<f64>,
    /// Binary-search resolution, degrees.
    pub yaw_tolerance: f64,
    /// Binary-search resolution, m.
    pub lateral_tolerance: f64,
    pub max_iterations: usize,
    /// Axial start of the compensation searches, m.
    pub start_axial: f64,
    pub monte_carlo: MonteCarloSpec,
}

impl OptimizeSpec {
    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        check(
            self.theta_step > 0.0 && self.theta_step <= 90.0,
            "optimize.theta_step",
            "must lie in (0, 90]",
        )?;
        check(
            self.weight_step > 0.0 && self.weight_step <= 1.0,
            "optimize.weight_step",
            "must lie in (0, 1]",
        )?;
        positive(self.yaw_scale, "optimize.yaw_scale")?;
        if let Some(s) = self.axial_scale {
            positive(s, "optimize.axial_scale")?;
        }
        positive(self.yaw_tolerance, "optimize.yaw_tolerance")?;
        positive(self.lateral_tolerance, "optimize.lateral_tolerance")?;
        check(
            self.max_iterations > 0,
            "optimize.max_iterations",
            "must be positive",
        )?;
        check(
            self.start_axial.is_finite(),
            "optimize.start_axial",
            "must be finite",
        )?;
        check(
            self.monte_carlo.samples >= 4,
            "optimize.monte_carlo.samples",
            "at least 4",
        )?;
        self.monte_carlo.distribution.validate()
    }
}

/// Per-stage swap durations, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageDurations {
    pub entry: f64,
    pub lift: f64,
    pub continuity: f64,
    pub index_empty: f64,
    pub shift_out: f64,
    pub index_full: f64,
    pub shift_in: f64,
    pub lower: f64,
    pub exit: f64,
}

impl StageDurations {
    /// Default apportionment of a 98 s swap.
    pub const DEFAULT: StageDurations = StageDurations {
        entry: 20.0,
        lift: 15.0,
        continuity: 3.0,
        index_empty: 10.0,
        shift_out: 15.0,
        index_full: 10.0,
        shift_in: 15.0,
        lower: 5.0,
        exit: 5.0,
    };

    pub fn as_array(&self) -> [f64; 9] {
        [
            self.entry,
            self.lift,
            self.continuity,
            self.index_empty,
            self.shift_out,
            self.index_full,
            self.shift_in,
            self.lower,
            self.exit,
        ]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }

    /// Default proportions rescaled to `total` seconds.
    pub fn scaled_to(total: f64) -> Self {
        let k = total / Self::DEFAULT.total();
        let d = Self::DEFAULT;
        Self {
            entry: d.entry * k,
            lift: d.lift * k,
            continuity: d.continuity * k,
            index_empty: d.index_empty * k,
            shift_out: d.shift_out * k,
            index_full: d.index_full * k,
            shift_in: d.shift_in * k,
            lower: d.lower * k,
            exit: d.exit * k,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        let names = [
            "entry",
            "lift",
            "continuity",
            "index_empty",
            "shift_out",
            "index_full",
            "shift_in",
            "lower",
            "exit",
        ];
        for (v, n) in self.as_array().iter().zip(names) {
            non_negative(*v, &format!("des.stages.{n}"))?;
        }
        positive(self.total(), "des.stages")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesSpec {
    /// Distance from the hub to the rover work site, m.
    pub work_distance: f64,
    /// Reserve kept on top of the return-trip charge, fraction of Q_b.
    pub reserve_margin: f64,
    /// Stage breakdown; the default proportions scaled to `fleet.swap_time`
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<StageDurations>,
}

impl DesSpec {
    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        non_negative(self.work_distance, "des.work_distance")?;
        probability(self.reserve_margin, "des.reserve_margin")?;
        if let Some(s) = &self.stages {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageSpec {
    /// Trajectory endpoint snap distance to a hub, m.
    pub snap_tolerance: f64,
    pub union_samples: usize,
}

impl Default for CoverageSpec {
    fn default() -> Self {
        Self {
            snap_tolerance: 1.0,
            union_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    pub rover: ThermalBody,
    pub battery: ThermalBody,
    /// Integration step, s.
    pub step: f64,
    /// Integration horizon, s.
    pub max_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub seed: u64,
    /// DES horizon, s.
    pub sim_duration: f64,
    pub fleet: FleetSpec,
    pub rover: RoverSpec,
    pub port: PortSpec,
    /// Selected (optimized) guide curve.
    pub curve: GuideCurve,
    /// Design the optimizer is compared against.
    pub baseline_curve: GuideCurve,
    #[serde(default)]
    pub dock: DockParams,
    pub optimize: OptimizeSpec,
    pub des: DesSpec,
    #[serde(default)]
    pub coverage: CoverageSpec,
    pub thermal: ThermalSpec,
}

impl Scenario {
    pub fn validate(&self) -> std::result::Result<(), ValidationError> {
        check(
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            &format!("unsupported, expected {SCHEMA_VERSION}"),
        )?;
        positive(self.sim_duration, "sim_duration")?;
        self.fleet.validate()?;
        positive(self.rover.length, "rover.length")?;
        positive(self.rover.halfwidth, "rover.halfwidth")?;
        self.rover
            .body(true)
            .map_err(|e| ValidationError::new(format!("rover.{}", e.field), e.reason))?;
        positive(self.port.channel_length, "port.channel_length")?;
        positive(self.port.chord_error, "port.chord_error")?;
        for (curve, name) in [
            (&self.curve, "curve"),
            (&self.baseline_curve, "baseline_curve"),
        ] {
            curve
                .validate()
                .map_err(|e| ValidationError::new(format!("{name}.{}", e.field), e.reason))?;
            check(
                self.rover.halfwidth < curve.throat_halfwidth,
                &format!("{name}.throat_halfwidth"),
                "must exceed the rover half-width",
            )?;
        }
        self.dock
            .validate()
            .map_err(|e| ValidationError::new(format!("dock.{}", e.field), e.reason))?;
        self.optimize.validate()?;
        self.des.validate()?;
        positive(self.coverage.snap_tolerance, "coverage.snap_tolerance")?;
        check(
            self.coverage.union_samples > 0,
            "coverage.union_samples",
            "must be positive",
        )?;
        self.thermal.rover.validate_as("thermal.rover")?;
        self.thermal.battery.validate_as("thermal.battery")?;
        positive(self.thermal.step, "thermal.step")?;
        positive(self.thermal.max_time, "thermal.max_time")
    }

    /// Parse and validate scenario text. `origin` names the source in errors.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn canonical() -> Self {
        Self::from_toml(CANONICAL_TOML, "canonical").expect("canonical scenario is valid")
    }

    /// Stage durations in effect.
    pub fn stages(&self) -> StageDurations {
        self.des
            .stages
            .unwrap_or_else(|| StageDurations::scaled_to(self.fleet.swap_time))
    }

    pub fn port_geometry(&self) -> Result<PortGeometry> {
        self.port.build(&self.curve)
    }

    pub fn baseline_port(&self) -> Result<PortGeometry> {
        self.port.build(&self.baseline_curve)
    }
}

/// Load a scenario file. The name `canonical` selects the built-in scenario.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    if path.as_os_str() == "canonical" {
        return Ok(Scenario::canonical());
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_toml(&text, &path.display().to_string())
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scenario.to_toml()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_has_prototype_values() {
        let s = Scenario::canonical();
        assert_eq!(s.fleet.q_b, 2.8);
        assert_eq!(s.fleet.charge_time, 1.0);
        assert_eq!(s.fleet.v_rover, 1.0);
        assert_eq!(s.fleet.p_hub, 0.0);
        assert!((s.thermal.rover.t_initial - 313.15).abs() < 1e-9);
        assert!((s.stages().total() - 98.0).abs() < 1e-9);
    }

    #[test]
    fn zero_generation_names_the_field() {
        let text = CANONICAL_TOML.replace("p_gen = 150.0", "p_gen = 0.0");
        assert_ne!(text, CANONICAL_TOML);
        match Scenario::from_toml(&text, "t") {
            Err(Error::Validation(v)) => assert_eq!(v.field, "fleet.p_gen"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        let err = Scenario::from_toml("schema_version = [", "bad.toml").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("bad.toml"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{CANONICAL_TOML}\n[extra]\nx = 1\n");
        assert!(Scenario::from_toml(&text, "t").is_err());
    }

    #[test]
    fn save_then_load_is_identity() {
        let s = Scenario::canonical();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.toml");
        save_scenario(&s, &p).unwrap();
        assert_eq!(load_scenario(&p).unwrap(), s);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_scenario("/nonexistent/scenario.toml").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn limit_equal_to_initial_is_allowed() {
        let mut b = Scenario::canonical().thermal.battery;
        b.t_limit = b.t_initial;
        assert!(b.validate().is_ok());
        b.t_ambient = b.t_limit + 1.0;
        assert!(b.validate().is_err());
    }
}
