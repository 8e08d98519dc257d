use proptest::prelude::*;
use swapsim_core::coverage::{chain_coverage, hub_area, overlap_area};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn overlap_strictly_decreasing(r in 1.0f64..1e4, mut ds in prop::collection::vec(0.0f64..2.0, 2..40)) {
        ds.sort_by(f64::total_cmp);
        ds.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let areas: Vec<f64> = ds.iter().map(|d| overlap_area(r, d * r).unwrap()).collect();
        for w in areas.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn overlap_is_continuous(r in 1.0f64..1e4, d in 0.0f64..1.999) {
        let h = 1e-7 * r;
        let a = overlap_area(r, d * r).unwrap();
        let b = overlap_area(r, d * r + h).unwrap();
        // |dA/dd| is at most 2r.
        prop_assert!((a - b).abs() <= 2.0 * r * h * (1.0 + 1e-6));
    }

    #[test]
    fn chain_telescopes(n in 2usize..30, r in 1.0f64..1e4, d in 0.0f64..2.5) {
        let step = chain_coverage(n, r, d * r).unwrap() - chain_coverage(n - 1, r, d * r).unwrap();
        let expect = hub_area(r) - overlap_area(r, d * r).unwrap();
        prop_assert!((step - expect).abs() <= 1e-9 * hub_area(r) * n as f64);
    }

    #[test]
    fn areas_scale_quadratically(n in 1usize..20, r in 1.0f64..1e3, d in 0.0f64..2.5, k in 0.1f64..10.0) {
        let a = chain_coverage(n, r, d * r).unwrap();
        let b = chain_coverage(n, k * r, k * d * r).unwrap();
        prop_assert!((b - k * k * a).abs() <= 1e-9 * b.abs().max(1.0));
        let o = overlap_area(r, d * r).unwrap();
        let p = overlap_area(k * r, k * d * r).unwrap();
        prop_assert!((p - k * k * o).abs() <= 1e-9 * p.abs().max(1.0));
    }
}
