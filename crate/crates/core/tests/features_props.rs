use proptest::prelude::*;
use sugeno::features::{Direction, FeatureTransform};

fn column() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-20i32..20).prop_map(|v| f64::from(v) / 2.0), 1..60)
}

proptest! {
    #[test]
    fn transform_is_monotone_and_bounded(col in column(), probes in prop::collection::vec(-15.0f64..15.0, 2..30)) {
        let t = FeatureTransform::fit(&col).unwrap();
        let mut xs = probes;
        xs.sort_by(f64::total_cmp);
        let us: Vec<f64> = xs.iter().map(|&x| t.apply(x)).collect();
        prop_assert!(us.iter().all(|u| (0.0..=1.0).contains(u)));
        prop_assert!(us.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn knot_levels_are_mid_ranks(col in column()) {
        let t = FeatureTransform::fit(&col).unwrap();
        let n = col.len() as f64;
        for &(x, level) in &t.knots {
            let below = col.iter().filter(|&&v| v < x).count() as f64;
            let at_most = col.iter().filter(|&&v| v <= x).count() as f64;
            prop_assert!((level - (below + at_most) / (2.0 * n)).abs() < 1e-12);
        }
    }

    #[test]
    fn decreasing_reverses_order(col in column(), a in -15.0f64..15.0, b in -15.0f64..15.0) {
        let t = FeatureTransform::fit_oriented(&col, Direction::Decreasing).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(t.apply(lo) >= t.apply(hi));
    }

    #[test]
    fn raw_threshold_reaches_level(col in column(), level in 0.01f64..1.0) {
        let t = FeatureTransform::fit(&col).unwrap();
        if let Some(x) = t.raw_threshold(level) {
            prop_assert!(t.apply(x) >= level - 1e-9);
        } else {
            prop_assert!(t.is_degenerate() || t.knots.last().unwrap().1 < level);
        }
    }

    #[test]
    fn transform_serde_roundtrip(col in column(), dir in prop::bool::ANY) {
        let d = if dir { Direction::Increasing } else { Direction::Decreasing };
        let t = FeatureTransform::fit_oriented(&col, d).unwrap();
        let back: FeatureTransform = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        prop_assert_eq!(back, t);
    }
}
