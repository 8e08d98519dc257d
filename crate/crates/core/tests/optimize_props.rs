use swapsim_core::docksim::DockParams;
use swapsim_core::optimize::{
    grid_search, monte_carlo_region, GridSearchConfig, ScoreNorm, SearchParams,
};
use swapsim_core::{make_rng, Scenario};

#[test]
fn grid_search_is_deterministic_and_ranked() {
    let s = Scenario::canonical();
    let rover = s.rover.body(false).unwrap();
    let norm = ScoreNorm {
        yaw_scale: 90.0,
        axial_scale: s.curve.mouth_halfwidth,
    };
    let cfg = GridSearchConfig::uniform(30.0, 0.5, norm, SearchParams::default());
    let a = grid_search(&cfg, &s.curve, &s.port, &rover).unwrap();
    let b = grid_search(&cfg, &s.curve, &s.port, &rover).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 4 * 3);
    assert!(a.windows(2).all(|w| w[0].result.score >= w[1].result.score));
    let straight_wall = a
        .iter()
        .filter(|e| e.curve.theta == 90.0)
        .map(|e| e.result.score)
        .fold(0.0, f64::max);
    assert!(a[0].result.score >= straight_wall);
}

#[test]
fn pass_rate_is_stable_across_seeds() {
    let s = Scenario::canonical();
    let rover = s.rover.body(false).unwrap();
    let port = s.port_geometry().unwrap();
    let d = s.optimize.monte_carlo.distribution;
    let n = 400;
    let rates: Vec<f64> = (1..=4)
        .map(|seed| {
            monte_carlo_region(
                &port,
                &rover,
                &d,
                n,
                &make_rng(seed),
                &DockParams::default(),
            )
            .unwrap()
            .pass_rate()
        })
        .collect();
    let again =
        monte_carlo_region(&port, &rover, &d, n, &make_rng(1), &DockParams::default()).unwrap();
    assert_eq!(again.pass_rate(), rates[0]);
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let sd = (mean * (1.0 - mean) / n as f64).sqrt();
    for r in rates {
        assert!((r - mean).abs() < 3.0 * sd, "{r} vs {mean} ± {sd}");
    }
}

#[test]
fn pass_cloud_matches_passing_samples() {
    let s = Scenario::canonical();
    let rover = s.rover.body(true).unwrap();
    let port = s.port_geometry().unwrap();
    let r = monte_carlo_region(
        &port,
        &rover,
        &s.optimize.monte_carlo.distribution,
        200,
        &make_rng(5),
        &s.dock,
    )
    .unwrap();
    let passing: Vec<[f64; 3]> = r
        .samples
        .iter()
        .filter(|(_, ok)| *ok)
        .map(|(p, _)| [p.x_axial, p.y_lateral, p.yaw])
        .collect();
    assert_eq!(passing, r.pass_cloud.points);
}
