use proptest::prelude::*;
use swapsim_core::curve::GuideCurve;
use swapsim_core::geom::Vec2;

fn curve() -> impl Strategy<Value = GuideCurve> {
    (
        0.0f64..=90.0,
        0.0f64..=1.0,
        0.01f64..0.1,
        0.05f64..0.2,
        0.02f64..0.3,
    )
        .prop_map(|(t, w, gap, throat, depth)| {
            GuideCurve::new(t, w, throat + gap, throat, depth).unwrap()
        })
}

fn in_triangle(p: Vec2, [a, b, c]: [Vec2; 3]) -> bool {
    let scale = (b - a).norm().max((c - a).norm()).max(1e-12);
    let eps = 1e-12 * scale * scale;
    let d1 = (b - a).cross(p - a);
    let d2 = (c - b).cross(p - b);
    let d3 = (a - c).cross(p - c);
    let area = (b - a).cross(c - a).abs();
    if area <= eps {
        // Degenerate triangle: p must be on the segment spanned by the points.
        let (lo, hi) = (a.x.min(b.x).min(c.x), a.x.max(b.x).max(c.x));
        return p.x >= lo - 1e-12
            && p.x <= hi + 1e-12
            && d1.abs().max(d2.abs()).max(d3.abs()) <= 1e-9 * scale;
    }
    (d1 >= -eps && d2 >= -eps && d3 >= -eps) || (d1 <= eps && d2 <= eps && d3 <= eps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inside_control_hull(c in curve(), t in 0.0f64..=1.0) {
        let cp = c.control_points().unwrap();
        prop_assert!(in_triangle(c.evaluate(t).unwrap(), cp));
    }

    #[test]
    fn x_monotone(c in curve()) {
        let mut last = f64::NEG_INFINITY;
        for i in 0..=200 {
            let x = c.evaluate(i as f64 / 200.0).unwrap().x;
            prop_assert!(x >= last - 1e-15);
            last = x;
        }
    }

    #[test]
    fn endpoints_and_tangent(c in curve()) {
        let p0 = c.evaluate(0.0).unwrap();
        let p2 = c.evaluate(1.0).unwrap();
        prop_assert!((p0 - Vec2::new(0.0, c.mouth_halfwidth)).norm() <= 1e-9);
        prop_assert!((p2 - Vec2::new(c.depth, c.throat_halfwidth)).norm() <= 1e-9);
        let [_, p1, p2] = c.control_points().unwrap();
        let d = p1 - p2;
        if d.norm() > 1e-12 {
            let tan = c.throat_tangent();
            let angle = (d.cross(tan) / d.norm()).asin().abs();
            prop_assert!(angle <= 1e-9 && d.dot(tan) > 0.0);
        }
    }

    #[test]
    fn polyline_within_chord_error(c in curve(), tol in 1e-4f64..2e-3) {
        let poly = c.discretize(tol).unwrap();
        for i in 0..=50 {
            let p = c.evaluate(i as f64 / 50.0).unwrap();
            prop_assert!(poly.distance_to(p) <= tol * (1.0 + 1e-9));
        }
    }
}
