use levy_sync::csvio::{read_knots, read_path, write_knots, write_path};
use levy_sync::levy::{build_two_sided, sample_levy_path};
use levy_sync::stationary::langevin_stationary;
use levy_sync::{CadlagPath, GeneratingTriplet, JumpDistribution, JumpMeasure, PathBuilder, SimulationGrid};
use proptest::prelude::*;

fn jumpy(rate: f64) -> GeneratingTriplet {
    GeneratingTriplet::scalar(
        0.3,
        0.5,
        JumpMeasure::CompoundPoisson {
            rate,
            jumps: JumpDistribution::Normal { mean: 0.0, std: 1.0 },
        },
    )
    .unwrap()
}

/// Minimum over partitions of `[t0, t1]` with points on `h`-lattice and cells
/// longer than `delta` of the largest half-open cell oscillation.
fn modulus_brute_force(x: &CadlagPath, delta: f64, h: f64) -> f64 {
    let (t0, t1) = (x.t_start(), x.t_end());
    let n = ((t1 - t0) / h).round() as usize;
    let pts: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * h).collect();
    let mut best = vec![f64::INFINITY; n + 1];
    best[0] = 0.0;
    for j in 1..=n {
        for i in 0..j {
            if pts[j] - pts[i] > delta + 1e-12 && best[i].is_finite() {
                let c = best[i].max(x.oscillation_half_open(pts[i], pts[j]));
                best[j] = best[j].min(c);
            }
        }
    }
    best[n]
}

#[test]
fn two_close_jumps_cannot_be_separated() {
    let delta = 0.2;
    let x = CadlagPath::step_function(0.0, 1.0, 0.0, &[(0.4, 1.5), (0.5, 0.7)]).unwrap();
    let greedy = x.cadlag_modulus(delta).unwrap();
    let brute = modulus_brute_force(&x, delta, 0.025);
    assert!(brute >= 0.7 - 1e-12, "brute force {brute}");
    assert!(greedy >= 0.7 - 1e-12, "greedy {greedy}");
    assert!(greedy >= brute - 1e-12);
}

#[test]
fn isolated_steps_match_brute_force() {
    let x = CadlagPath::step_function(0.0, 2.0, 1.0, &[(0.5, 1.0), (1.25, -2.0)]).unwrap();
    for delta in [0.1, 0.2, 0.4] {
        assert_eq!(x.cadlag_modulus(delta).unwrap(), 0.0);
        assert_eq!(modulus_brute_force(&x, delta, 0.05), 0.0);
    }
}

#[test]
fn eval_returns_sampled_nodes() {
    let g = SimulationGrid::new(0.0, 3.0, 0.01).unwrap();
    let r = sample_levy_path(&jumpy(3.0), g, 4).unwrap();
    for k in 0..=g.cells() {
        let t = g.node(k);
        let i = r.path.knot_times().position(|s| s == t).expect("grid node is a knot");
        assert_eq!(r.path.eval1(t), r.path.knot_value1(i));
    }
}

#[test]
fn stationary_ou_sup_statistics() {
    let bm = GeneratingTriplet::brownian(1.0).unwrap();
    let g = SimulationGrid::new(0.0, 10.0, 0.01).unwrap();
    let sups: Vec<f64> = (0..100u64)
        .map(|s| {
            let noise = build_two_sided(&bm, 81.0, 10.0, 0.01, s).unwrap();
            let x = langevin_stationary(1.0, &[1.0], &noise, &g).unwrap();
            x.path.sup_norm(0.0, 10.0).unwrap()
        })
        .collect();
    let m = sups.iter().sum::<f64>() / sups.len() as f64;
    assert!((1.5..=2.5).contains(&m), "mean sup {m}");
}

fn random_path(seed: u64) -> CadlagPath {
    build_two_sided(&jumpy(2.0), 3.0, 3.0, 0.05, seed).unwrap().path
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_flow_is_exact(seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let x = random_path(seed);
        let lhs = x.shift(a).unwrap().shift(b).unwrap();
        let rhs = x.shift(a + b).unwrap();
        let lo = lhs.t_start().max(rhs.t_start()).max(-1.0);
        let hi = lhs.t_end().min(rhs.t_end()).min(1.0);
        for k in 0..=40 {
            let s = lo + (hi - lo) * k as f64 / 40.0;
            prop_assert!((lhs.eval1(s) - rhs.eval1(s)).abs() < 1e-12);
        }
        prop_assert!(lhs.eval1(0.0).abs() < 1e-12);
    }

    #[test]
    fn right_continuity_at_knots(seed in any::<u64>()) {
        let x = random_path(seed);
        for i in 0..x.knot_count() - 1 {
            let t = x.knot_time(i);
            let next = x.knot_time(i + 1);
            let v = x.eval1(t);
            let mut prev = f64::INFINITY;
            for k in 1..=20 {
                let h = (next - t) * 0.5f64.powi(k);
                let e = (x.eval1(t + h) - v).abs();
                prop_assert!(e <= prev + 1e-15);
                prev = e;
            }
            prop_assert!(prev < 1e-5);
        }
    }

    #[test]
    fn oscillation_is_monotone(seed in any::<u64>(), a in -3.0f64..0.0, w1 in 0.0f64..1.5, w2 in 0.0f64..1.5) {
        let x = random_path(seed);
        let inner = x.oscillation(a, a + w1).unwrap();
        let outer = x.oscillation(a, (a + w1 + w2).min(3.0)).unwrap();
        prop_assert!(inner <= outer);
        prop_assert!(x.sup_norm(a, a + w1).unwrap() <= x.sup_norm_all());
    }

    #[test]
    fn modulus_decreases_with_delta(
        slope in -2.0f64..2.0,
        jumps in proptest::collection::vec((1usize..9, -2.0f64..2.0), 0..4),
    ) {
        // ramp plus jumps at multiples of 0.1 no closer than 0.1
        let mut times: Vec<(f64, f64)> = jumps.iter().map(|&(k, s)| (k as f64 * 0.1, s)).collect();
        times.sort_by(|a, b| a.0.total_cmp(&b.0));
        times.dedup_by(|a, b| a.0 == b.0);
        let mut b = PathBuilder::new(1);
        b.push(0.0, &[0.0]);
        let mut level = 0.0;
        for &(t, s) in &times {
            b.push_jump(t, &[level + slope * t], &[level + s + slope * t]);
            level += s;
        }
        b.push(1.0, &[level + slope]);
        let x = b.build().unwrap();
        let mut prev = f64::INFINITY;
        for delta in [0.09, 0.05, 0.02, 0.01, 0.001] {
            let w = x.cadlag_modulus(delta).unwrap();
            prop_assert!(w <= prev + 1e-12, "delta {}: {} after {}", delta, w, prev);
            prop_assert!(w <= 2.0 * slope.abs() * delta + 1e-12 || delta > 0.05);
            prev = w;
        }
        prop_assert!(prev < 0.01);
    }

    #[test]
    fn csv_round_trips_are_bit_exact(seed in any::<u64>()) {
        let x = random_path(seed);
        let mut buf = Vec::new();
        write_path(&x, &mut buf).unwrap();
        prop_assert_eq!(&read_path(&buf[..]).unwrap(), &x);
        let mut buf = Vec::new();
        write_knots(&x, &mut buf).unwrap();
        prop_assert_eq!(&read_knots(&buf[..]).unwrap(), &x);
    }

    #[test]
    fn continuous_paths_have_no_left_jumps(seed in any::<u64>(), t in -2.9f64..3.0) {
        let bm = GeneratingTriplet::brownian(1.0).unwrap();
        let x = build_two_sided(&bm, 3.0, 3.0, 0.05, seed).unwrap().path;
        prop_assert_eq!(x.left_limit1(t), x.eval1(t));
    }
}
