use levy_sync::levy::build_two_sided;
use levy_sync::skorohod::{skorohod_bounded, skorohod_global, skorohod_oracle_small, time_change_cost, TimeChange};
use levy_sync::{CadlagPath, GeneratingTriplet};
use proptest::prelude::*;

const TOL: f64 = 1e-3;

fn step(base: f64, jumps: &[(f64, f64)]) -> CadlagPath {
    CadlagPath::step_function(-1.0, 1.0, base, jumps).unwrap()
}

/// `max(|log slope|, sup |x(t) - y(λ(t))|)` for the two-piece λ through
/// `(s, u)`, with the value term sampled on a dense grid plus the kink.
fn dense_cost(x: &CadlagPath, y: &CadlagPath, s: f64, u: f64) -> f64 {
    let lam = |t: f64| {
        if t <= s {
            -1.0 + (t + 1.0) * (u + 1.0) / (s + 1.0)
        } else {
            u + (t - s) * (1.0 - u) / (1.0 - s)
        }
    };
    let slope = ((u + 1.0) / (s + 1.0)).ln().abs().max(((1.0 - u) / (1.0 - s)).ln().abs());
    let mut v: f64 = 0.0;
    for k in 0..=4000 {
        let t = -1.0 + 2.0 * k as f64 / 4000.0;
        v = v.max((x.eval1(t) - y.eval1(lam(t))).abs());
    }
    v = v.max((x.eval1(s) - y.eval1(u)).abs());
    slope.max(v)
}

#[test]
fn shifted_step_scan() {
    let x = step(0.0, &[(0.0, 1.0)]);
    let y = step(0.0, &[(0.1, 1.0)]);
    let mut best = f64::INFINITY;
    for k in 1..400 {
        let s = -1.0 + 2.0 * k as f64 / 400.0;
        best = best.min(dense_cost(&x, &y, s, 0.1).min(dense_cost(&x, &y, s, s + 0.1)));
    }
    let exact = (1.0f64 / 0.9).ln();
    assert!((best - exact).abs() < 1e-9, "scan {best}");
    let dp = skorohod_bounded(&x, &y, 1.0, TOL).unwrap();
    assert!(dp.value >= exact - 1e-12 && dp.value <= exact + TOL, "{}", dp.value);
    assert!((skorohod_oracle_small(&x, &y, 1.0).unwrap() - exact).abs() < 1e-12);
}

#[test]
fn height_mismatch_scan() {
    let x = step(0.0, &[(0.0, 1.0)]);
    let y = step(0.0, &[(0.0, 2.0)]);
    let mut best = f64::INFINITY;
    for k in 1..100 {
        for j in 1..100 {
            let (s, u) = (-1.0 + 0.02 * k as f64, -1.0 + 0.02 * j as f64);
            best = best.min(dense_cost(&x, &y, s, u));
        }
    }
    assert!((best - 1.0).abs() < 1e-12);
    assert_eq!(skorohod_bounded(&x, &y, 1.0, TOL).unwrap().value, 1.0);
}

#[test]
fn dominated_by_sup_norm() {
    let bm = GeneratingTriplet::brownian(1.0).unwrap();
    let x = build_two_sided(&bm, 3.0, 3.0, 0.01, 1).unwrap().path;
    for k in 1..=4 {
        let eps = 0.5f64.powi(k);
        let y = x.map_values(|t, v, out| out[0] = v[0] + eps * (3.0 * t).sin()).unwrap();
        // both paths are affine between the same knots
        let sup = x.knot_times().map(|t| (x.eval1(t) - y.eval1(t)).abs()).fold(0.0, f64::max);
        let g = skorohod_global(&x, &y, 2, TOL).unwrap();
        assert!(g.value <= sup + TOL, "eps {eps}: {} vs sup {sup}", g.value);
    }
}

fn pc_path() -> impl Strategy<Value = CadlagPath> {
    (
        -1.0f64..1.0,
        proptest::collection::vec((-0.95f64..0.95, prop_oneof![Just(-1.0), Just(0.5), Just(1.0), -2.0f64..2.0]), 0..=3),
    )
        .prop_map(|(base, mut jumps)| {
            jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
            jumps.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
            step(base, &jumps)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dp_brackets_oracle(x in pc_path(), y in pc_path()) {
        let oracle = skorohod_oracle_small(&x, &y, 1.0).unwrap();
        let dp = skorohod_bounded(&x, &y, 1.0, TOL).unwrap();
        prop_assert!(dp.value >= oracle - 1e-12, "dp {} below oracle {}", dp.value, oracle);
        prop_assert!(dp.value <= oracle + TOL, "dp {} above oracle {} + tol", dp.value, oracle);
        prop_assert!(dp.certified_gap >= 0.0);
        let recomputed = time_change_cost(&x, &y, &dp.witness, 1.0).unwrap();
        prop_assert_eq!(recomputed, dp.value);
    }

    #[test]
    fn identity_and_symmetry(x in pc_path(), y in pc_path()) {
        prop_assert_eq!(skorohod_bounded(&x, &x, 1.0, TOL).unwrap().value, 0.0);
        let ab = skorohod_bounded(&x, &y, 1.0, TOL).unwrap().value;
        let ba = skorohod_bounded(&y, &x, 1.0, TOL).unwrap().value;
        prop_assert!((ab - ba).abs() <= 2.0 * TOL);
        let oab = skorohod_oracle_small(&x, &y, 1.0).unwrap();
        let oba = skorohod_oracle_small(&y, &x, 1.0).unwrap();
        prop_assert!((oab - oba).abs() < 1e-12);
    }

    #[test]
    fn oracle_triangle(x in pc_path(), y in pc_path(), z in pc_path()) {
        let xz = skorohod_oracle_small(&x, &z, 1.0).unwrap();
        let xy = skorohod_oracle_small(&x, &y, 1.0).unwrap();
        let yz = skorohod_oracle_small(&y, &z, 1.0).unwrap();
        prop_assert!(xz <= xy + yz + 3.0 * TOL);
    }

    #[test]
    fn witnesses_are_valid_time_changes(x in pc_path(), y in pc_path()) {
        let dp = skorohod_bounded(&x, &y, 1.0, TOL).unwrap();
        let pts = dp.witness.points();
        prop_assert_eq!(pts[0], (-1.0, -1.0));
        prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        prop_assert!(pts.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
        prop_assert!(TimeChange::new(pts.to_vec(), 1.0).is_ok());
    }
}
