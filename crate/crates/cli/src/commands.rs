use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use swapsim_core::coverage::{
    chain_coverage, coverage_boundary, endurance, gapless_check, hex_coverage, hex_spacing,
    hub_area, service_radius, union_area, HubNetwork,
};
use swapsim_core::curve::CurveError;
use swapsim_core::docksim::{simulate_entry, DockError};
use swapsim_core::fleetsim::{
    event_log_csv, fleet_size, required_terminals, return_threshold, run_sim, FailureModel,
    FleetError, SimConfig,
};
use swapsim_core::optimize::{
    compare_iterations, grid_search, monte_carlo_region, ranking_csv, GridSearchConfig,
    OptimizeError,
};
use swapsim_core::thermal::{cooldown, cooldown_closed_form_check, ThermalError};
use swapsim_core::{load_scenario, make_rng, Pose2D, Scenario};

use crate::manifest::{scenario_hash, write_file, OutputDir};
use crate::{reproduce, BodyArg, Cli, CliError, Command, TopologyArg, SEED_ENV};

pub(crate) struct Context {
    pub scenario: Scenario,
    pub seed: u64,
    pub hash: String,
    pub command_line: String,
}

impl Context {
    pub fn finish(&self, out: OutputDir) -> Result<(), CliError> {
        out.finish(&self.command_line, &self.hash, self.seed)
            .map(|_| ())
    }
}

fn resolve_seed(flag: Option<u64>, scenario_seed: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "{SEED_ENV}=`{v}` is not an unsigned 64-bit integer"
            ))
        }),
        Err(_) => Ok(scenario_seed),
    }
}

fn load(cli: &Cli, command_line: &str) -> Result<Context, CliError> {
    let scenario = load_scenario(&cli.scenario).map_err(|source| CliError::Scenario {
        path: cli.scenario.clone(),
        source,
    })?;
    let seed = resolve_seed(cli.seed, scenario.seed)?;
    Ok(Context {
        hash: scenario_hash(&scenario.to_toml()),
        scenario,
        seed,
        command_line: command_line.to_string(),
    })
}

fn print(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes");
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

/// Input problems nested inside module errors are reported as validation
/// failures.
fn input_error(e: &swapsim_core::Error) -> bool {
    use swapsim_core::Error as E;
    e.is_validation()
        || matches!(
            e,
            E::Curve(CurveError::Invalid(_))
                | E::Dock(
                    DockError::Invalid(_)
                        | DockError::StartPenetrates(_)
                        | DockError::ImpossibleGeometry { .. }
                )
                | E::Optimize(OptimizeError::Invalid(_))
                | E::Thermal(ThermalError::Invalid(_))
                | E::Fleet(
                    FleetError::Invalid(_)
                        | FleetError::Infeasible { .. }
                        | FleetError::TooFewTerminals { .. }
                        | FleetError::NoChargingPower { .. }
                )
        )
}

pub(crate) fn run(cli: &Cli, command_line: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let ctx = load(cli, command_line)?;
    let result = match &cli.command {
        Command::Curve {
            theta,
            weight,
            chord_error,
            emit,
        } => curve(&ctx, *theta, *weight, *chord_error, emit.as_deref(), out),
        Command::Dock {
            start,
            bumpers,
            baseline,
            trajectory,
        } => dock(
            &ctx,
            start.as_deref(),
            *bumpers,
            *baseline,
            trajectory.as_deref(),
            out,
        ),
        Command::Optimize {
            grid,
            samples,
            out: dir,
        } => optimize(&ctx, grid.as_deref(), *samples, dir.as_deref(), out),
        Command::Coverage {
            topology,
            hubs,
            spacing,
            samples,
            out: dir,
        } => coverage(
            &ctx,
            *topology,
            *hubs,
            *spacing,
            *samples,
            dir.as_deref(),
            out,
        ),
        Command::Thermal { body, out: dir } => thermal(&ctx, *body, dir.as_deref(), out),
        Command::Fleet {
            rovers,
            hours,
            fail_profile,
            ports,
            terminals,
            out: dir,
        } => fleet(
            &ctx,
            FleetArgs {
                rovers: *rovers,
                hours: *hours,
                fail_profile: fail_profile.as_deref(),
                ports: *ports,
                terminals: *terminals,
            },
            dir.as_deref(),
            out,
        ),
        Command::Reproduce { out: dir } => reproduce::run(&ctx, dir, out),
    };
    result.map_err(|e| match e {
        CliError::Core(c) if input_error(&c) => CliError::Validation(c.to_string()),
        other => other,
    })
}

fn curve(
    ctx: &Context,
    theta: Option<f64>,
    weight: Option<f64>,
    chord: Option<f64>,
    emit: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = &ctx.scenario;
    let c = s.curve.with_shape(
        theta.unwrap_or(s.curve.theta),
        weight.unwrap_or(s.curve.weight),
    )?;
    let chord = chord.unwrap_or(s.port.chord_error);
    let poly = c.discretize(chord)?;
    if let Some(path) = emit {
        write_file(path, &poly.to_csv())?;
    }
    print(
        out,
        &json!({
            "curve": c,
            "control_points": c.control_points()?,
            "chord_error_m": chord,
            "vertices": poly.len(),
            "length_m": poly.length(),
            "emitted": emit.map(|p| p.display().to_string()),
        }),
    )
}

fn parse_start(text: &str) -> Result<Pose2D, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::Validation(format!("--start `{text}` must be \"x,y,yaw\""));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    Ok(Pose2D::new(v[0], v[1], v[2])?)
}

fn dock(
    ctx: &Context,
    start: Option<&str>,
    bumpers: bool,
    baseline: bool,
    trajectory: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = &ctx.scenario;
    let start = match start {
        Some(t) => parse_start(t)?,
        None => Pose2D::new(s.optimize.start_axial, 0.0, 0.0)?,
    };
    let port = if baseline {
        s.baseline_port()?
    } else {
        s.port_geometry()?
    };
    let rover = s.rover.body(bumpers)?;
    let r = simulate_entry(&port, &rover, start, &s.dock)?;
    if let Some(path) = trajectory {
        write_file(path, &r.trajectory_csv())?;
    }
    print(
        out,
        &json!({
            "start": start,
            "success": r.success,
            "final_pose": r.final_pose,
            "failure_reason": r.failure_reason,
            "steps": r.trajectory.len().saturating_sub(1),
            "bumpers": bumpers,
            "curve": if baseline { s.baseline_curve } else { s.curve },
        }),
    )
}

fn parse_grid(text: &str) -> Result<(f64, f64), CliError> {
    let bad = || {
        CliError::Validation(format!(
            "--grid `{text}` must be \"theta-step,w-step\" with positive steps"
        ))
    };
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let t: f64 = a.trim().parse().map_err(|_| bad())?;
    let w: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(t > 0.0 && w > 0.0 && t.is_finite() && w.is_finite()) {
        return Err(bad());
    }
    Ok((t, w))
}

fn optimize(
    ctx: &Context,
    grid: Option<&str>,
    samples: Option<usize>,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = &ctx.scenario;
    let mut spec = s.optimize;
    if let Some(g) = grid {
        (spec.theta_step, spec.weight_step) = parse_grid(g)?;
    }
    let n = samples.unwrap_or(spec.monte_carlo.samples);
    let mut files = OutputDir::new(dir)?;
    let rover = s.rover.body(false)?;
    let bumped = s.rover.body(true)?;
    let config = GridSearchConfig::from_spec(&spec, &s.curve, s.dock);
    let ranking = grid_search(&config, &s.curve, &s.port, &rover)?;
    let best = ranking[0].clone();
    let opt_port = s.port.build(&best.curve)?;
    let base_port = s.baseline_port()?;
    let rng = make_rng(ctx.seed);
    let dist = spec.monte_carlo.distribution;
    let base = monte_carlo_region(&base_port, &rover, &dist, n, &rng, &s.dock)?;
    let opt = monte_carlo_region(&opt_port, &rover, &dist, n, &rng, &s.dock)?;
    let bump = monte_carlo_region(&opt_port, &bumped, &dist, n, &rng, &s.dock)?;
    let report = compare_iterations(&[
        ("baseline", &base),
        ("optimized", &opt),
        ("optimized+bumpers", &bump),
    ])?;

    files.write("ranking.csv", &ranking_csv(&ranking))?;
    files.write(
        "optimal_curve.csv",
        &best.curve.discretize(s.port.chord_error)?.to_csv(),
    )?;
    for (name, r) in [("baseline", &base), ("optimized", &opt), ("bumpers", &bump)] {
        files.write(&format!("success_region_{name}.csv"), &r.samples_csv())?;
        files.write(&format!("hull_{name}.off"), &r.hull.to_off(&r.pass_cloud))?;
    }
    let summary = json!({
        "grid": { "theta_step": spec.theta_step, "weight_step": spec.weight_step, "cells": ranking.len() },
        "optimum": { "curve": best.curve, "result": best.result, "diagnostics": best.diagnostics },
        "monte_carlo": { "seed": ctx.seed, "samples": n, "distribution": dist },
        "regions": report.rows,
        "nondecreasing": report.nondecreasing,
        "volume_units": "m * m * deg",
    });
    files.write(
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("serializes") + "\n"),
    )?;
    ctx.finish(files)?;
    print(out, &summary)
}

fn coverage(
    ctx: &Context,
    topology: TopologyArg,
    hubs: usize,
    spacing: Option<f64>,
    samples: Option<usize>,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = &ctx.scenario;
    let r = service_radius(&s.fleet);
    let samples = samples.unwrap_or(s.coverage.union_samples);
    let mut files = OutputDir::new(dir)?;
    let (net, closed_form, d) = match topology {
        TopologyArg::Chain => {
            let d = spacing.unwrap_or_else(|| hex_spacing(r));
            (
                HubNetwork::chain(hubs, r, d)?,
                chain_coverage(hubs, r, d)?,
                d,
            )
        }
        TopologyArg::Hex => {
            let d = hex_spacing(r);
            (HubNetwork::hex(hubs, r)?, hex_coverage(hubs, r)?, d)
        }
    };
    let sampled = union_area(&net, samples, ctx.seed, 0);
    let gaps = gapless_check(&net, r / 200.0)?;
    files.write("hubs.csv", &net.to_csv())?;
    let mut boundary = String::from("x_m,y_m\n");
    for p in coverage_boundary(&net, 360) {
        boundary.push_str(&format!("{},{}\n", p.x, p.y));
    }
    files.write("boundary.csv", &boundary)?;
    let summary = json!({
        "topology": format!("{topology:?}").to_uppercase(),
        "hubs": hubs,
        "endurance_h": endurance(&s.fleet),
        "service_radius_m": r,
        "hub_area_m2": hub_area(r),
        "spacing_m": d,
        "closed_form_m2": closed_form,
        "sampled_m2": sampled.area,
        "sampled_std_error_m2": sampled.std_error,
        "relative_discrepancy": (closed_form - sampled.area) / sampled.area,
        "gapless": gaps.gapless,
        "first_gap": gaps.first_gap,
    });
    files.write(
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("serializes") + "\n"),
    )?;
    ctx.finish(files)?;
    print(out, &summary)
}

fn thermal(
    ctx: &Context,
    body: BodyArg,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let t = &ctx.scenario.thermal;
    let b = match body {
        BodyArg::Rover => t.rover,
        BodyArg::Battery => t.battery,
    };
    let mut files = OutputDir::new(dir)?;
    let curve = cooldown(&b, t.step, t.max_time)?;
    let closed = cooldown_closed_form_check(&b).ok();
    files.write("cooling_curve.csv", &curve.to_csv())?;
    let summary = json!({
        "body": format!("{body:?}").to_lowercase(),
        "time_to_limit_s": curve.time_to_limit,
        "time_to_limit_min": curve.time_to_limit.map(|s| s / 60.0),
        "closed_form_min": closed.map(|s| s / 60.0),
        "t_initial_k": b.t_initial,
        "t_limit_k": b.t_limit,
    });
    ctx.finish(files)?;
    print(out, &summary)
}

struct FleetArgs<'a> {
    rovers: Option<usize>,
    hours: Option<f64>,
    fail_profile: Option<&'a Path>,
    ports: usize,
    terminals: Option<usize>,
}

fn fleet(
    ctx: &Context,
    args: FleetArgs<'_>,
    dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = &ctx.scenario;
    let failure = match args.fail_profile {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Validation(format!("cannot read fail profile `{}`: {e}", p.display()))
            })?;
            FailureModel::from_toml(&text)
                .map_err(|e| CliError::Validation(format!("fail profile `{}`: {e}", p.display())))?
        }
        None => FailureModel::none(),
    };
    let sized = fleet_size(&s.fleet);
    let n = args.rovers.unwrap_or(sized.max(1));
    let duration = args.hours.map_or(s.sim_duration, |h| h * 3600.0);
    let config = SimConfig {
        n_rovers: n,
        duration,
        terminals: args.terminals,
        ports: args.ports,
    };
    let mut files = OutputDir::new(dir)?;
    let m = run_sim(s, &config, &failure, &make_rng(ctx.seed))?;
    files.write("event_log.csv", &event_log_csv(&m.event_log))?;
    let summary = json!({
        "fleet_size": sized,
        "rovers": n,
        "terminals": config.terminal_count(),
        "required_terminals": required_terminals(n),
        "ports": config.ports,
        "duration_s": duration,
        "return_threshold_ah": return_threshold(&s.fleet, s.des.work_distance, s.des.reserve_margin)?,
        "rover_uptime_fraction": m.rover_uptime_fraction,
        "per_rover_uptime": m.per_rover_uptime,
        "swaps_completed": m.swaps_completed,
        "swap_failures": m.swap_failures,
        "mean_service_time_s": m.mean_service_time,
        "entry_failures": m.entry_failures,
        "continuity_failures": m.continuity_failures,
        "jams": m.jams,
        "aux_power_failures": m.aux_power_failures,
        "stranded": m.stranded,
        "max_charging_power_w": m.max_charging_power,
        "events": m.event_log.len(),
        "failure_model": failure,
    });
    files.write(
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("serializes") + "\n"),
    )?;
    ctx.finish(files)?;
    print(out, &summary)
}
