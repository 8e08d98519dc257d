//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Built with `harness = false` so the report always prints.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use swapsim_core::coverage::{
    chain_coverage, gapless_check, hex_spacing, overlap_area, service_radius, HubNetwork,
};
use swapsim_core::docksim::{simulate_prepared, DockError, PreparedPort};
use swapsim_core::fleetsim::{fleet_size, replay, run_sim, FailureModel, SimConfig, TICK};
use swapsim_core::geom::Vec2;
use swapsim_core::hull::{quickhull3, PointCloud3, P3};
use swapsim_core::optimize::{
    compare_iterations, grid_search, max_compensation, monte_carlo_region, sweep_compensation,
    Axis, GridSearchConfig, SearchParams,
};
use swapsim_core::targets;
use swapsim_core::thermal::{cooldown, cooldown_closed_form_check};
use swapsim_core::{make_rng, Pose2D, Scenario, SimRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn thermal(body: &str, target: targets::Target) -> Outcome {
    let s = Scenario::canonical();
    let b = if body == "rover" {
        s.thermal.rover
    } else {
        s.thermal.battery
    };
    let curve = cooldown(&b, s.thermal.step, s.thermal.max_time).unwrap();
    let Some(t) = curve.time_to_limit else {
        return outcome(false, "limit not reached".into());
    };
    let exact = cooldown_closed_form_check(&b).unwrap();
    let rel = (t - exact).abs() / exact;
    let minutes = t / 60.0;
    outcome(
        target.accepts(minutes) && rel <= 1e-3,
        format!(
            "{minutes:.2} min (band {:.1}-{:.1}), closed form {:.2} min, rel diff {rel:.1e}",
            target.lo,
            target.hi,
            exact / 60.0
        ),
    )
}

fn sizing() -> Outcome {
    let mut f = Scenario::canonical().fleet;
    f.p_gen = 5500.0;
    f.p_hub = 0.0;
    f.p_rover = 900.0;
    let low = fleet_size(&f);
    f.p_rover = 410.0;
    let high = fleet_size(&f);
    outcome(
        low == 6
            && high == 13
            && targets::FLEET_LOW.accepts(low as f64)
            && targets::FLEET_HIGH.accepts(high as f64),
        format!("{low} rovers at 900 W, {high} at 410 W"),
    )
}

// Lens area of two radius-r disks d apart: 4∫_{d/2}^{r} sqrt(r² − x²) dx with
// x = r·sin(t), by composite Simpson.
fn lens_oracle(r: f64, d: f64) -> f64 {
    if d >= 2.0 * r {
        return 0.0;
    }
    let (a, b) = ((d / (2.0 * r)).asin(), std::f64::consts::FRAC_PI_2);
    let n = 2000;
    let h = (b - a) / n as f64;
    let f = |t: f64| r * r * t.cos() * t.cos();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    4.0 * s * h / 3.0
}

fn union_oracle(hubs: &[Vec2], r: f64, samples: usize, rng: &SimRng) -> f64 {
    let lo_x = hubs.iter().map(|h| h.x).fold(f64::INFINITY, f64::min) - r;
    let hi_x = hubs.iter().map(|h| h.x).fold(f64::NEG_INFINITY, f64::max) + r;
    let lo_y = hubs.iter().map(|h| h.y).fold(f64::INFINITY, f64::min) - r;
    let hi_y = hubs.iter().map(|h| h.y).fold(f64::NEG_INFINITY, f64::max) + r;
    let chunks = 100;
    let per = samples / chunks;
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut g = rng.derive_indexed("acceptance.union", c as u64);
            (0..per)
                .filter(|_| {
                    let x = g.uniform_range(lo_x, hi_x);
                    let y = g.uniform_range(lo_y, hi_y);
                    hubs.iter()
                        .any(|h| (x - h.x).powi(2) + (y - h.y).powi(2) <= r * r)
                })
                .count()
        })
        .sum();
    hits as f64 / (per * chunks) as f64 * (hi_x - lo_x) * (hi_y - lo_y)
}

fn coverage() -> Outcome {
    let mut rng = make_rng(4);
    let mut worst_lens: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.uniform_range(1.0, 5000.0);
        let d = rng.uniform_range(0.0, 1.9) * r;
        let a = overlap_area(r, d).unwrap();
        let o = lens_oracle(r, d);
        worst_lens = worst_lens.max((a - o).abs() / o);
    }
    let r = service_radius(&Scenario::canonical().fleet);
    let d = 1.2 * r;
    let mut worst_chain: f64 = 0.0;
    for n in [1, 2, 3, 5] {
        let hubs: Vec<Vec2> = (0..n).map(|i| Vec2::new(i as f64 * d, 0.0)).collect();
        let o = union_oracle(&hubs, r, 10_000_000, &rng.derive("chain"));
        let c = chain_coverage(n, r, d).unwrap();
        worst_chain = worst_chain.max((c - o).abs() / o);
    }
    let net = HubNetwork::hex(7, r).unwrap();
    let spacing_ok = (hex_spacing(r) - r * 3f64.sqrt()).abs() < 1e-9 * r;
    let gaps = gapless_check(&net, r / 200.0).unwrap();
    outcome(
        worst_lens <= 1e-6 && worst_chain <= 2e-3 && gaps.gapless && spacing_ok,
        format!(
            "lens rel err {worst_lens:.1e}, chain rel err {:.3}%, hex gapless {} ({} grid points)",
            100.0 * worst_chain,
            gaps.gapless,
            gaps.checked
        ),
    )
}

fn optimizer() -> Outcome {
    let s = Scenario::canonical();
    let rover = s.rover.body(false).unwrap();
    let bumped = s.rover.body(true).unwrap();
    let grid = GridSearchConfig::from_spec(&s.optimize, &s.curve, s.dock);
    let ranking = grid_search(&grid, &s.curve, &s.port, &rover).unwrap();
    let best = ranking[0].curve;
    let opt_port = s.port.build(&best).unwrap();
    let base_port = s.baseline_port().unwrap();
    let mc = &s.optimize.monte_carlo;
    let rng = make_rng(s.seed);
    let region = |port, body| {
        monte_carlo_region(port, body, &mc.distribution, mc.samples, &rng, &s.dock).unwrap()
    };
    let base = region(&base_port, &rover);
    let opt = region(&opt_port, &rover);
    let bump = region(&opt_port, &bumped);
    let report =
        compare_iterations(&[("baseline", &base), ("optimized", &opt), ("bumpers", &bump)])
            .unwrap();
    let ratio = report.rows[2].ratio.unwrap_or(0.0);
    outcome(
        report.nondecreasing && targets::VOLUME_RATIO.accepts(ratio),
        format!(
            "{} cells, optimum theta {} w {}; volumes {:.5} / {:.5} / {:.5}; ratio {ratio:.4}",
            ranking.len(),
            best.theta,
            best.weight,
            base.hull.volume,
            opt.hull.volume,
            bump.hull.volume
        ),
    )
}

fn compensation() -> Outcome {
    let s = Scenario::canonical();
    let rover = s.rover.body(false).unwrap();
    let port = s.port_geometry().unwrap();
    let search = SearchParams::from_spec(&s.optimize, s.dock);
    let c = max_compensation(&port, &rover, Axis::Yaw, search.yaw_tolerance, &search).unwrap();
    let sweep = sweep_compensation(&port, &rover, Axis::Yaw, 0.1, &search).unwrap();
    let diff = (c.value - sweep).abs();
    outcome(
        targets::MAX_YAW_DEG.accepts(c.value) && diff <= 0.1,
        format!(
            "max yaw {:.2} deg, 0.1 deg sweep {sweep:.1} deg, diff {diff:.3}",
            c.value
        ),
    )
}

fn des() -> Outcome {
    let s = Scenario::canonical();
    let none = FailureModel::none();
    let long = run_sim(
        &s,
        &SimConfig::new(1, 6.0 * 86_400.0),
        &none,
        &make_rng(s.seed),
    )
    .unwrap();
    let day = run_sim(&s, &SimConfig::new(1, 86_400.0), &none, &make_rng(s.seed)).unwrap();
    let mean = long.mean_service_time.unwrap_or(f64::NAN);
    outcome(
        long.swaps_completed >= targets::MIN_CONSECUTIVE_SWAPS
            && long.swap_failures == 0
            && (mean - s.stages().total()).abs() <= TICK
            && targets::SERVICE_TIME_S.accepts(mean)
            && day.rover_uptime_fraction >= targets::MIN_UPTIME,
        format!(
            "{} swaps, {} failures, mean service {mean:.3} s, 24 h uptime {:.4}",
            long.swaps_completed, long.swap_failures, day.rover_uptime_fraction
        ),
    )
}

fn random_rotation(rng: &mut SimRng) -> [[f64; 3]; 3] {
    let (a, b, c) = (
        rng.uniform_range(0.0, 6.3),
        rng.uniform_range(0.0, 6.3),
        rng.uniform_range(0.0, 6.3),
    );
    let rz = |t: f64| {
        [
            [t.cos(), -t.sin(), 0.0],
            [t.sin(), t.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ]
    };
    let rx = |t: f64| {
        [
            [1.0, 0.0, 0.0],
            [0.0, t.cos(), -t.sin()],
            [0.0, t.sin(), t.cos()],
        ]
    };
    let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| p[i][k] * q[k][j]).sum();
            }
        }
        m
    };
    mul(rz(a), mul(rx(b), rz(c)))
}

fn properties() -> Outcome {
    let mut rng = make_rng(8);
    let mut hull_bad = 0;
    for _ in 0..100 {
        let n = 4 + (rng.uniform() * 60.0) as usize;
        let pts: Vec<P3> = (0..n)
            .map(|_| {
                [
                    rng.normal(0.0, 1.0),
                    rng.normal(0.0, 2.0),
                    rng.normal(0.0, 0.5),
                ]
            })
            .collect();
        let cloud = PointCloud3::new(pts.clone()).unwrap();
        let h = quickhull3(&cloud).unwrap();
        let contained = pts.iter().all(|&p| h.max_face_distance(&cloud, p) <= 1e-9);
        let mut more = pts.clone();
        more.extend((0..5).map(|_| {
            [
                rng.normal(0.0, 1.5),
                rng.normal(0.0, 1.5),
                rng.normal(0.0, 1.5),
            ]
        }));
        let grown = quickhull3(&PointCloud3::new(more).unwrap()).unwrap();
        let m = random_rotation(&mut rng);
        let rotated: Vec<P3> = pts
            .iter()
            .map(|p| {
                let r = |i: usize| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2];
                [r(0), r(1), r(2)]
            })
            .collect();
        let turned = quickhull3(&PointCloud3::new(rotated).unwrap()).unwrap();
        if !contained
            || grown.volume < h.volume * (1.0 - 1e-12)
            || (turned.volume - h.volume).abs() > 1e-9 * h.volume
        {
            hull_bad += 1;
        }
    }

    let s = Scenario::canonical();
    let port = s.port_geometry().unwrap();
    let prepared = PreparedPort::new(&port);
    let rover = s.rover.body(true).unwrap();
    let d = s.optimize.monte_carlo.distribution;
    let starts: Vec<Pose2D> = (0..1000)
        .map(|_| {
            Pose2D::new(
                rng.normal(d.mean_axial, d.sd_axial),
                rng.normal(0.0, d.sd_lateral),
                rng.normal(0.0, d.sd_yaw),
            )
            .unwrap()
        })
        .collect();
    let dock_bad: usize = starts
        .par_iter()
        .map(|p| {
            let run = |q: Pose2D| simulate_prepared(&prepared, &rover, q, &s.dock);
            match (run(*p), run(*p), run(p.mirrored())) {
                (Ok(a), Ok(b), Ok(m)) => usize::from(a != b || a.success != m.success),
                (
                    Err(DockError::StartPenetrates(_)),
                    Err(DockError::StartPenetrates(_)),
                    Err(DockError::StartPenetrates(_)),
                ) => 0,
                _ => 1,
            }
        })
        .sum();

    let mut des_bad = 0;
    let mut audits = 0;
    for k in 0..20u64 {
        let mut g = rng.derive_indexed("acceptance.des", k);
        let fm = FailureModel {
            p_entry_fail: g.uniform_range(0.0, 0.3),
            p_continuity_fail: g.uniform_range(0.0, 0.3),
            p_jam: g.uniform_range(0.0, 0.3),
            p_aux_power_fail: g.uniform_range(0.0, 0.3),
            ..FailureModel::none()
        };
        let mut c = SimConfig::new(1 + (g.uniform() * 4.0) as usize, 3.0 * 86_400.0);
        c.ports = 1 + usize::from(g.chance(0.3));
        c.terminals = Some(c.n_rovers + c.ports);
        match run_sim(&s, &c, &fm, &g) {
            Ok(m) => {
                audits += m.audits;
                if replay(&c, &m.event_log) != m.final_state {
                    des_bad += 1;
                }
            }
            Err(_) => des_bad += 1,
        }
    }

    let text = s.to_toml();
    let again = Scenario::from_toml(&text, "round-trip").unwrap();
    let round_trip = again == s && again.to_toml() == text;

    outcome(
        hull_bad == 0 && dock_bad == 0 && des_bad == 0 && round_trip,
        format!(
            "hull failures {hull_bad}/100, docking failures {dock_bad}/1000, DES failures {des_bad}/20 ({audits} audited events), round trip {round_trip}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("rover cooldown", Duration::from_secs(1), || {
            thermal("rover", targets::ROVER_COOLDOWN_MIN)
        }),
        ("battery cooldown", Duration::from_secs(1), || {
            thermal("battery", targets::BATTERY_COOLDOWN_MIN)
        }),
        ("fleet sizing", Duration::from_millis(1), sizing),
        ("coverage oracles", Duration::from_secs(120), coverage),
        ("optimizer direction", Duration::from_secs(600), optimizer),
        ("compensation scale", Duration::from_secs(60), compensation),
        ("swap simulation", Duration::from_secs(5), des),
        ("property suites", Duration::from_secs(300), properties),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = run();
        let took = t0.elapsed();
        let pass = o.pass && took <= *budget;
        failed += usize::from(!pass);
        println!(
            "criterion {} {} {name}: {} [{:.3} s, budget {:.3} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            budget.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
