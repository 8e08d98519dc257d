//! Guide-curve design loop: maximum-compensation search, exhaustive (θ, w)
//! grid search, Monte-Carlo success regions and hull-volume comparison.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::curve::GuideCurve;
use crate::docksim::{
    simulate_prepared, DockError, DockParams, PortGeometry, PreparedPort, RoverBody,
};
use crate::error::ValidationError;
use crate::hull::{quickhull3, Hull3, PointCloud3, P3};
use crate::pose::Pose2D;
use crate::rng::SimRng;
use crate::scenario::{OptimizeSpec, PortSpec, PoseDistribution};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Dock(#[from] DockError),
    #[error("regions are not comparable: {0}")]
    Mismatch(String),
    #[error("comparison needs at least 2 regions, got {0}")]
    TooFewRegions(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Axis {
    Yaw,
    Lateral,
}

/// Start-pose perturbation searches share these settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchParams {
    /// Degrees.
    pub yaw_tolerance: f64,
    /// Meters.
    pub lateral_tolerance: f64,
    pub max_iterations: usize,
    /// Axial start of every probe, m.
    pub start_axial: f64,
    pub dock: DockParams,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            yaw_tolerance: 0.05,
            lateral_tolerance: 0.5e-3,
            max_iterations: 40,
            start_axial: -0.3,
            dock: DockParams::default(),
        }
    }
}

impl SearchParams {
    pub fn from_spec(spec: &OptimizeSpec, dock: DockParams) -> Self {
        Self {
            yaw_tolerance: spec.yaw_tolerance,
            lateral_tolerance: spec.lateral_tolerance,
            max_iterations: spec.max_iterations,
            start_axial: spec.start_axial,
            dock,
        }
    }

    fn tolerance(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Yaw => self.yaw_tolerance,
            Axis::Lateral => self.lateral_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Compensation {
    pub value: f64,
    /// The boundary check disagreed with monotone capture and the value comes
    /// from an exhaustive sweep.
    pub non_monotone: bool,
    pub diagnostic: Option<String>,
}

struct Prober<'a> {
    port: PreparedPort<'a>,
    rover: &'a RoverBody,
    search: &'a SearchParams,
    axis: Axis,
}

impl Prober<'_> {
    fn passes(&self, m: f64) -> Result<bool, DockError> {
        let start = match self.axis {
            Axis::Yaw => Pose2D::new(self.search.start_axial, 0.0, m)?,
            Axis::Lateral => Pose2D::new(self.search.start_axial, m, 0.0)?,
        };
        match simulate_prepared(&self.port, self.rover, start, &self.search.dock) {
            Ok(r) => Ok(r.success),
            Err(DockError::StartPenetrates(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }
}

fn upper_bound(port: &PortGeometry, axis: Axis) -> f64 {
    match axis {
        Axis::Yaw => 90.0,
        Axis::Lateral => port.mouth_halfwidth(),
    }
}

/// Largest offset along `axis` (positive side; the port is mirror symmetric)
/// from which the rover still docks, found by bisection to `tol`.
///
/// The bracket is checked afterwards: the value must pass and value + tol
/// must fail. When it does not, capture is not monotone along the axis and
/// the result falls back to the end of the contiguous capture range found by
/// an exhaustive sweep at `tol` spacing.
pub fn max_compensation(
    port: &PortGeometry,
    rover: &RoverBody,
    axis: Axis,
    tol: f64,
    search: &SearchParams,
) -> Result<Compensation, OptimizeError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ValidationError::new("tol", "must be positive").into());
    }
    let probe = Prober {
        port: PreparedPort::new(port),
        rover,
        search,
        axis,
    };
    if !probe.passes(0.0)? {
        return Ok(Compensation {
            value: 0.0,
            non_monotone: false,
            diagnostic: Some("aligned start does not dock".into()),
        });
    }
    let cap = upper_bound(port, axis);
    if probe.passes(cap)? {
        return Ok(Compensation {
            value: cap,
            non_monotone: false,
            diagnostic: Some(format!("capture reaches the search limit {cap}")),
        });
    }

    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..search.max_iterations {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if probe.passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let boundary_ok =
        !probe.passes((lo + tol).min(cap))? && (lo < tol || probe.passes(lo - tol)?);
    if boundary_ok {
        return Ok(Compensation {
            value: lo,
            non_monotone: false,
            diagnostic: None,
        });
    }
    log::warn!("{axis:?} capture is not monotone; falling back to a sweep");
    let value = sweep(&probe, tol, cap)?;
    Ok(Compensation {
        value,
        non_monotone: true,
        diagnostic: Some(format!(
            "bisection boundary {lo} failed its check; sweep at {tol} gives {value}"
        )),
    })
}

fn sweep(probe: &Prober<'_>, step: f64, cap: f64) -> Result<f64, DockError> {
    let n = (cap / step).floor() as usize;
    let mut last = 0.0;
    for k in 1..=n {
        let m = k as f64 * step;
        if !probe.passes(m)? {
            break;
        }
        last = m;
    }
    Ok(last)
}

/// Exhaustive check: end of the contiguous capture range from 0 at `step`
/// spacing.
pub fn sweep_compensation(
    port: &PortGeometry,
    rover: &RoverBody,
    axis: Axis,
    step: f64,
    search: &SearchParams,
) -> Result<f64, OptimizeError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(ValidationError::new("step", "must be positive").into());
    }
    let probe = Prober {
        port: PreparedPort::new(port),
        rover,
        search,
        axis,
    };
    if !probe.passes(0.0)? {
        return Ok(0.0);
    }
    Ok(sweep(&probe, step, upper_bound(port, axis))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreNorm {
    /// Degrees.
    pub yaw_scale: f64,
    /// Meters.
    pub axial_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompensationResult {
    pub max_yaw: f64,
    pub max_lateral: f64,
    pub score: f64,
}

impl CompensationResult {
    pub fn new(max_yaw: f64, max_lateral: f64, norm: &ScoreNorm) -> Self {
        let score = (max_yaw / norm.yaw_scale).hypot(max_lateral / norm.axial_scale);
        Self {
            max_yaw,
            max_lateral,
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchConfig {
    /// Degrees in [0, 90], ascending.
    pub theta_values: Vec<f64>,
    /// In [0, 1], ascending.
    pub weight_values: Vec<f64>,
    pub score_norm: ScoreNorm,
    pub search: SearchParams,
}

/// `0, step, 2·step, ...` up to `max`, always ending exactly at `max`.
fn steps(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step - 1e-9).ceil() as usize;
    (0..=n).map(|k| (k as f64 * step).min(max)).collect()
}

impl GridSearchConfig {
    /// Uniform grid over θ ∈ [0, 90] and w ∈ [0, 1]. With steps 9° and 0.1
    /// this is 11 × 11 = 121 cells.
    pub fn uniform(
        theta_step: f64,
        weight_step: f64,
        score_norm: ScoreNorm,
        search: SearchParams,
    ) -> Self {
        Self {
            theta_values: steps(theta_step, 90.0),
            weight_values: steps(weight_step, 1.0),
            score_norm,
            search,
        }
    }

    pub fn from_spec(spec: &OptimizeSpec, base: &GuideCurve, dock: DockParams) -> Self {
        let norm = ScoreNorm {
            yaw_scale: spec.yaw_scale,
            axial_scale: spec.axial_scale.unwrap_or(base.mouth_halfwidth),
        };
        Self::uniform(
            spec.theta_step,
            spec.weight_step,
            norm,
            SearchParams::from_spec(spec, dock),
        )
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.theta_values.is_empty()
            || !sorted(&self.theta_values)
            || self.theta_values.iter().any(|t| !(0.0..=90.0).contains(t))
        {
            return Err(ValidationError::new(
                "theta_values",
                "must be non-empty, ascending and within [0, 90]",
            ));
        }
        if self.weight_values.is_empty()
            || !sorted(&self.weight_values)
            || self.weight_values.iter().any(|w| !(0.0..=1.0).contains(w))
        {
            return Err(ValidationError::new(
                "weight_values",
                "must be non-empty, ascending and within [0, 1]",
            ));
        }
        if !(self.score_norm.yaw_scale > 0.0 && self.score_norm.axial_scale > 0.0) {
            return Err(ValidationError::new(
                "score_norm",
                "scales must be positive",
            ));
        }
        self.search.dock.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEntry {
    pub curve: GuideCurve,
    pub result: CompensationResult,
    pub diagnostics: Vec<String>,
}

fn evaluate_cell(
    curve: GuideCurve,
    port_spec: &PortSpec,
    rover: &RoverBody,
    config: &GridSearchConfig,
) -> Result<GridEntry, OptimizeError> {
    let zero = |msg: String| GridEntry {
        curve,
        result: CompensationResult::new(0.0, 0.0, &config.score_norm),
        diagnostics: vec![msg],
    };
    let port =
        match PortGeometry::from_curve(&curve, port_spec.chord_error, port_spec.channel_length) {
            Ok(p) => p,
            Err(e) => return Ok(zero(format!("degenerate geometry: {e}"))),
        };
    let s = &config.search;
    let yaw = match max_compensation(&port, rover, Axis::Yaw, s.tolerance(Axis::Yaw), s) {
        Ok(c) => c,
        Err(OptimizeError::Dock(e @ DockError::ImpossibleGeometry { .. })) => {
            return Ok(zero(format!("degenerate geometry: {e}")))
        }
        Err(e) => return Err(e),
    };
    let lat = max_compensation(&port, rover, Axis::Lateral, s.tolerance(Axis::Lateral), s)?;
    let diagnostics = [yaw.diagnostic.as_ref(), lat.diagnostic.as_ref()]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    Ok(GridEntry {
        curve,
        result: CompensationResult::new(yaw.value, lat.value, &config.score_norm),
        diagnostics,
    })
}

/// Evaluate every (θ, w) cell and rank by score, best first. Ties keep
/// ascending (θ, w) order, so the ranking is the same for any thread count.
pub fn grid_search(
    config: &GridSearchConfig,
    base: &GuideCurve,
    port_spec: &PortSpec,
    rover: &RoverBody,
) -> Result<Vec<GridEntry>, OptimizeError> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.theta_values.len() * config.weight_values.len());
    for &theta in &config.theta_values {
        for &w in &config.weight_values {
            cells.push(base.with_shape(theta, w)?);
        }
    }
    let mut entries = cells
        .into_par_iter()
        .map(|c| evaluate_cell(c, port_spec, rover, config))
        .collect::<Result<Vec<_>, _>>()?;
    entries.sort_by(|a, b| {
        b.result
            .score
            .total_cmp(&a.result.score)
            .then(a.curve.theta.total_cmp(&b.curve.theta))
            .then(a.curve.weight.total_cmp(&b.curve.weight))
    });
    Ok(entries)
}

pub fn ranking_csv(entries: &[GridEntry]) -> String {
    let mut s = String::from("rank,theta_deg,weight,max_yaw_deg,max_lateral_m,score,diagnostics\n");
    for (i, e) in entries.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{},{},\"{}\"\n",
            i + 1,
            e.curve.theta,
            e.curve.weight,
            e.result.max_yaw,
            e.result.max_lateral,
            e.result.score,
            e.diagnostics.join("; ").replace('"', "'")
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuccessRegion {
    pub samples: Vec<(Pose2D, bool)>,
    pub pass_cloud: PointCloud3,
    pub hull: Hull3,
    pub seed: u64,
    pub distribution: PoseDistribution,
}

impl SuccessRegion {
    pub fn pass_count(&self) -> usize {
        self.pass_cloud.len()
    }

    pub fn pass_rate(&self) -> f64 {
        self.pass_count() as f64 / self.samples.len().max(1) as f64
    }

    pub fn samples_csv(&self) -> String {
        let mut s = String::from("axial_offset_m,lateral_offset_m,yaw_deg,pass\n");
        for (p, ok) in &self.samples {
            s.push_str(&format!(
                "{},{},{},{}\n",
                p.x_axial,
                p.y_lateral,
                p.yaw,
                u8::from(*ok)
            ));
        }
        s
    }
}

fn pose_point(p: &Pose2D) -> P3 {
    [p.x_axial, p.y_lateral, p.yaw]
}

/// Sample `n` Gaussian start poses, simulate each and wrap the passing poses
/// in a convex hull.
///
/// Poses are drawn in order from `rng`; simulations then run in parallel and
/// are merged by index.
pub fn monte_carlo_region(
    port: &PortGeometry,
    rover: &RoverBody,
    dist: &PoseDistribution,
    n: usize,
    rng: &SimRng,
    params: &DockParams,
) -> Result<SuccessRegion, OptimizeError> {
    dist.validate()?;
    if n < 4 {
        return Err(ValidationError::new("n", "at least 4 samples").into());
    }
    let mut draw = rng.derive("optimize.monte_carlo");
    let mut poses = Vec::with_capacity(n);
    for _ in 0..n {
        let x = draw.normal(dist.mean_axial, dist.sd_axial);
        let y = draw.normal(dist.mean_lateral, dist.sd_lateral);
        let yaw = draw.normal(dist.mean_yaw, dist.sd_yaw);
        poses.push(Pose2D::new(x, y, yaw)?);
    }
    let prepared = PreparedPort::new(port);
    let outcomes = poses
        .par_iter()
        .map(|p| match simulate_prepared(&prepared, rover, *p, params) {
            Ok(r) => Ok(r.success),
            Err(DockError::StartPenetrates(_)) => Ok(false),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<bool>, _>>()?;

    let samples: Vec<(Pose2D, bool)> = poses.into_iter().zip(outcomes).collect();
    let pass_cloud = PointCloud3::new(
        samples
            .iter()
            .filter(|(_, ok)| *ok)
            .map(|(p, _)| pose_point(p))
            .collect(),
    )
    .expect("poses are finite");
    let hull = if pass_cloud.len() < 4 {
        Hull3::degenerate()
    } else {
        quickhull3(&pass_cloud).expect("at least 4 finite points")
    };
    Ok(SuccessRegion {
        samples,
        pass_cloud,
        hull,
        seed: rng.seed(),
        distribution: *dist,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: String,
    pub volume: f64,
    pub pass_count: usize,
    /// Volume over the first region's volume; undefined when that is zero.
    pub ratio: Option<f64>,
    pub percent_change: Option<f64>,
    /// Volume smaller than the previous row's.
    pub inversion: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub nondecreasing: bool,
}

/// Volumes of successive design iterations relative to the first.
pub fn compare_iterations(
    regions: &[(&str, &SuccessRegion)],
) -> Result<ComparisonReport, OptimizeError> {
    if regions.len() < 2 {
        return Err(OptimizeError::TooFewRegions(regions.len()));
    }
    let (_, first) = regions[0];
    for (label, r) in &regions[1..] {
        if r.seed != first.seed {
            return Err(OptimizeError::Mismatch(format!(
                "`{label}` used seed {} but the first region used {}",
                r.seed, first.seed
            )));
        }
        if r.distribution != first.distribution || r.samples.len() != first.samples.len() {
            return Err(OptimizeError::Mismatch(format!(
                "`{label}` used a different sample distribution"
            )));
        }
    }
    let base = first.hull.volume;
    let mut rows = Vec::with_capacity(regions.len());
    let mut prev: Option<f64> = None;
    for (label, r) in regions {
        let v = r.hull.volume;
        let ratio = (base > 0.0).then(|| v / base);
        rows.push(ComparisonRow {
            label: label.to_string(),
            volume: v,
            pass_count: r.pass_count(),
            ratio,
            percent_change: ratio.map(|q| 100.0 * (q - 1.0)),
            inversion: prev.is_some_and(|p| v < p),
        });
        prev = Some(v);
    }
    let nondecreasing = rows.iter().all(|r| !r.inversion);
    Ok(ComparisonReport {
        rows,
        nondecreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_rng;

    fn rover() -> RoverBody {
        RoverBody::rectangle(0.26, 0.11).unwrap()
    }

    fn port(theta: f64, w: f64) -> PortGeometry {
        let c = GuideCurve::new(theta, w, 0.165, 0.115, 0.12).unwrap();
        PortGeometry::from_curve(&c, 0.5e-3, 0.3).unwrap()
    }

    #[test]
    fn score_definition() {
        let norm = ScoreNorm {
            yaw_scale: 90.0,
            axial_scale: 0.2,
        };
        let r = CompensationResult::new(30.0, 0.05, &norm);
        assert!((r.score - ((1.0f64 / 3.0).powi(2) + 0.25f64.powi(2)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grid_counts() {
        let norm = ScoreNorm {
            yaw_scale: 90.0,
            axial_scale: 0.165,
        };
        let g = GridSearchConfig::uniform(9.0, 0.1, norm, SearchParams::default());
        assert_eq!(g.theta_values.len() * g.weight_values.len(), 121);
        assert_eq!(*g.theta_values.last().unwrap(), 90.0);
        assert_eq!(*g.weight_values.last().unwrap(), 1.0);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let norm = ScoreNorm {
            yaw_scale: 90.0,
            axial_scale: 0.165,
        };
        let mut g = GridSearchConfig::uniform(9.0, 0.1, norm, SearchParams::default());
        g.theta_values.swap(0, 1);
        assert!(g.validate().is_err());
        g.theta_values = vec![];
        assert!(g.validate().is_err());
    }

    #[test]
    fn lateral_capture_is_funnel_half_span() {
        let p = port(0.0, 0.0);
        let s = SearchParams::default();
        let c = max_compensation(&p, &rover(), Axis::Lateral, 0.5e-3, &s).unwrap();
        let expect = 0.165 - 0.11;
        assert!((c.value - expect).abs() <= 0.5e-3, "{c:?}");
    }

    #[test]
    fn bisection_agrees_with_sweep() {
        let p = port(63.0, 1.0);
        let s = SearchParams::default();
        let b = max_compensation(&p, &rover(), Axis::Yaw, 0.05, &s).unwrap();
        let e = sweep_compensation(&p, &rover(), Axis::Yaw, 0.1, &s).unwrap();
        assert!(!b.non_monotone);
        assert!((b.value - e).abs() <= 0.1, "{} vs {e}", b.value);
    }

    #[test]
    fn aligned_failure_gives_zero() {
        let p = port(45.0, 0.5);
        let s = SearchParams {
            dock: DockParams {
                max_steps: 10,
                ..DockParams::default()
            },
            ..SearchParams::default()
        };
        let c = max_compensation(&p, &rover(), Axis::Yaw, 0.05, &s).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.diagnostic.is_some());
    }

    #[test]
    fn single_cell_grid() {
        let base = GuideCurve::new(45.0, 0.5, 0.165, 0.115, 0.12).unwrap();
        let cfg = GridSearchConfig {
            theta_values: vec![45.0],
            weight_values: vec![0.5],
            score_norm: ScoreNorm {
                yaw_scale: 90.0,
                axial_scale: 0.165,
            },
            search: SearchParams::default(),
        };
        let ps = PortSpec {
            channel_length: 0.3,
            chord_error: 0.5e-3,
        };
        let r = grid_search(&cfg, &base, &ps, &rover()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].curve, base);
    }

    fn tight(mean_yaw: f64, mean_lateral: f64) -> PoseDistribution {
        PoseDistribution {
            mean_axial: -0.3,
            mean_lateral,
            mean_yaw,
            sd_axial: 1e-12,
            sd_lateral: 1e-12,
            sd_yaw: 1e-12,
        }
    }

    #[test]
    fn point_distributions() {
        let p = port(63.0, 1.0);
        let rng = make_rng(1);
        let good = monte_carlo_region(
            &p,
            &rover(),
            &tight(0.0, 0.0),
            20,
            &rng,
            &DockParams::default(),
        )
        .unwrap();
        assert_eq!(good.pass_count(), 20);
        assert!(good.hull.degenerate);
        assert_eq!(good.hull.volume, 0.0);
        let bad = monte_carlo_region(
            &p,
            &rover(),
            &tight(80.0, 0.0),
            20,
            &rng,
            &DockParams::default(),
        )
        .unwrap();
        assert_eq!(bad.pass_count(), 0);
    }

    #[test]
    fn comparison_rules() {
        let p = port(63.0, 1.0);
        let d = PoseDistribution {
            sd_yaw: 20.0,
            sd_lateral: 0.04,
            ..PoseDistribution::default()
        };
        let a =
            monte_carlo_region(&p, &rover(), &d, 60, &make_rng(3), &DockParams::default()).unwrap();
        let same = compare_iterations(&[("a", &a), ("a", &a)]).unwrap();
        assert_eq!(same.rows[1].ratio, Some(1.0));
        assert_eq!(same.rows[1].percent_change, Some(0.0));

        let b =
            monte_carlo_region(&p, &rover(), &d, 60, &make_rng(4), &DockParams::default()).unwrap();
        assert!(matches!(
            compare_iterations(&[("a", &a), ("b", &b)]),
            Err(OptimizeError::Mismatch(_))
        ));

        let empty = monte_carlo_region(
            &p,
            &rover(),
            &tight(80.0, 0.0),
            60,
            &make_rng(3),
            &DockParams::default(),
        )
        .unwrap();
        let mut e = empty.clone();
        e.distribution = d;
        let rep = compare_iterations(&[("empty", &e), ("a", &a)]).unwrap();
        assert_eq!(rep.rows[1].ratio, None);
        assert!(compare_iterations(&[("a", &a)]).is_err());
    }
}
