//! Every study on one scenario, next to the reported reference values.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use swapsim_core::coverage::{gapless_check, service_radius, HubNetwork};
use swapsim_core::fleetsim::{fleet_size, required_terminals, run_sim, FailureModel, SimConfig};
use swapsim_core::optimize::{
    compare_iterations, grid_search, max_compensation, monte_carlo_region, Axis, GridSearchConfig,
    SearchParams,
};
use swapsim_core::targets::{self, Target};
use swapsim_core::thermal::cooldown;
use swapsim_core::{make_rng, ThermalBody};

use crate::commands::Context;
use crate::manifest::OutputDir;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub computed: f64,
    pub reported: f64,
    pub lo: f64,
    pub hi: f64,
    pub unit: String,
    pub pass: bool,
    /// Depends on the seed.
    pub seeded: bool,
}

impl Row {
    fn new(t: &Target, computed: f64, seeded: bool) -> Self {
        Self::custom(t.name, computed, t.reported, t.lo, t.hi, t.unit, seeded)
    }

    fn custom(
        name: &str,
        computed: f64,
        reported: f64,
        lo: f64,
        hi: f64,
        unit: &str,
        seeded: bool,
    ) -> Self {
        Self {
            name: name.to_string(),
            computed,
            reported,
            lo,
            hi,
            unit: unit.to_string(),
            pass: (lo..=hi).contains(&computed),
            seeded,
        }
    }

    fn flag(name: &str, value: bool, seeded: bool) -> Self {
        Self::custom(
            name,
            f64::from(u8::from(value)),
            1.0,
            1.0,
            1.0,
            "bool",
            seeded,
        )
    }
}

pub fn rows_csv(rows: &[Row]) -> String {
    let mut s = String::from("name,computed,reported,lo,hi,unit,pass,seeded\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.name, r.computed, r.reported, r.lo, r.hi, r.unit, r.pass, r.seeded
        ));
    }
    s
}

fn minutes(body: &ThermalBody, step: f64, max_time: f64) -> Result<f64, CliError> {
    Ok(cooldown(body, step, max_time)?
        .time_to_limit
        .map_or(f64::NAN, |t| t / 60.0))
}

pub(crate) fn compute(ctx: &Context) -> Result<Vec<Row>, CliError> {
    let s = &ctx.scenario;
    let mut rows = Vec::new();

    log::info!("thermal");
    let th = &s.thermal;
    rows.push(Row::new(
        &targets::ROVER_COOLDOWN_MIN,
        minutes(&th.rover, th.step, th.max_time)?,
        false,
    ));
    rows.push(Row::new(
        &targets::BATTERY_COOLDOWN_MIN,
        minutes(&th.battery, th.step, th.max_time)?,
        false,
    ));

    let mut f = s.fleet;
    f.p_gen = 5500.0;
    f.p_hub = 0.0;
    f.p_rover = 900.0;
    rows.push(Row::new(&targets::FLEET_LOW, fleet_size(&f) as f64, false));
    f.p_rover = 410.0;
    rows.push(Row::new(&targets::FLEET_HIGH, fleet_size(&f) as f64, false));

    log::info!("fleet simulation");
    let none = FailureModel::none();
    let rng = make_rng(ctx.seed);
    let long = run_sim(s, &SimConfig::new(1, 6.0 * 86_400.0), &none, &rng)?;
    let day = run_sim(s, &SimConfig::new(1, 86_400.0), &none, &rng)?;
    rows.push(Row::new(
        &targets::SERVICE_TIME_S,
        long.mean_service_time.unwrap_or(f64::NAN),
        true,
    ));
    let min_swaps = targets::MIN_CONSECUTIVE_SWAPS as f64;
    rows.push(Row::custom(
        "consecutive swaps",
        long.swaps_completed as f64,
        min_swaps,
        min_swaps,
        f64::INFINITY,
        "swaps",
        true,
    ));
    rows.push(Row::custom(
        "swap failures",
        long.swap_failures as f64,
        0.0,
        0.0,
        0.0,
        "swaps",
        true,
    ));
    rows.push(Row::custom(
        "24 h uptime",
        day.rover_uptime_fraction,
        targets::MIN_UPTIME,
        targets::MIN_UPTIME,
        1.0,
        "fraction",
        true,
    ));
    rows.push(Row::custom(
        "terminals for prototype fleet",
        required_terminals(targets::PROTOTYPE_ROVERS) as f64,
        targets::PROTOTYPE_TERMINALS as f64,
        targets::PROTOTYPE_TERMINALS as f64,
        targets::PROTOTYPE_TERMINALS as f64,
        "terminals",
        false,
    ));

    log::info!("compensation");
    let rover = s.rover.body(false)?;
    let search = SearchParams::from_spec(&s.optimize, s.dock);
    let yaw = max_compensation(
        &s.port_geometry()?,
        &rover,
        Axis::Yaw,
        search.yaw_tolerance,
        &search,
    )?;
    rows.push(Row::new(&targets::MAX_YAW_DEG, yaw.value, false));

    log::info!("grid search and success regions");
    let bumped = s.rover.body(true)?;
    let grid = GridSearchConfig::from_spec(&s.optimize, &s.curve, s.dock);
    let ranking = grid_search(&grid, &s.curve, &s.port, &rover)?;
    let opt_port = s.port.build(&ranking[0].curve)?;
    let base_port = s.baseline_port()?;
    let mc = &s.optimize.monte_carlo;
    let region =
        |port, body| monte_carlo_region(port, body, &mc.distribution, mc.samples, &rng, &s.dock);
    let base = region(&base_port, &rover)?;
    let opt = region(&opt_port, &rover)?;
    let bump = region(&opt_port, &bumped)?;
    let report =
        compare_iterations(&[("baseline", &base), ("optimized", &opt), ("bumpers", &bump)])?;
    rows.push(Row::new(
        &targets::VOLUME_RATIO,
        report.rows[2].ratio.unwrap_or(0.0),
        true,
    ));
    rows.push(Row::flag(
        "success regions nondecreasing",
        report.nondecreasing,
        true,
    ));

    log::info!("coverage");
    let r = service_radius(&s.fleet);
    let net = HubNetwork::hex(7, r)?;
    rows.push(Row::flag(
        "hex layout gapless",
        gapless_check(&net, r / 200.0)?.gapless,
        false,
    ));
    Ok(rows)
}

fn print_table(out: &mut dyn Write, rows: &[Row]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<32} {:>12} {:>10} {:>21}  {:<9} result",
        "quantity", "computed", "reported", "accepted", "unit"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:<32} {:>12.4} {:>10} {:>21}  {:<9} {}",
            r.name,
            r.computed,
            r.reported,
            format!("[{}, {}]", r.lo, r.hi),
            r.unit,
            if r.pass { "PASS" } else { "FAIL" }
        )?;
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    writeln!(out, "{} of {} rows pass", rows.len() - failed, rows.len())
}

pub(crate) fn run(ctx: &Context, dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let mut files = OutputDir::new(Some(dir))?;
    let rows = compute(ctx)?;
    files.write("summary.csv", &rows_csv(&rows))?;
    let json = serde_json::json!({ "seed": ctx.seed, "rows": rows });
    files.write(
        "summary.json",
        &(serde_json::to_string_pretty(&json).expect("serializes") + "\n"),
    )?;
    ctx.finish(files)?;
    print_table(out, &rows).map_err(|e| CliError::Io {
        path: "<stdout>".into(),
        source: e,
    })?;
    match rows.iter().filter(|r| !r.pass).count() {
        0 => Ok(()),
        n => Err(CliError::RowsFailed(n)),
    }
}
