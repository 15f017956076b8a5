use levy_sync::levy::{build_two_sided, empirical_drift, sample_levy_path, sample_stable};
use levy_sync::sync::median;
use levy_sync::{GeneratingTriplet, JumpDistribution, JumpMeasure, SimulationGrid};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(a: f64, b: f64, dt: f64) -> SimulationGrid {
    SimulationGrid::new(a, b, dt).unwrap()
}

fn cp(rate: f64, jumps: JumpDistribution, variance: f64) -> GeneratingTriplet {
    GeneratingTriplet::scalar(0.0, variance, JumpMeasure::CompoundPoisson { rate, jumps }).unwrap()
}

fn stable(alpha: f64) -> GeneratingTriplet {
    GeneratingTriplet::scalar(
        0.0,
        0.0,
        JumpMeasure::AlphaStable {
            alpha,
            scale: 1.0,
            skew: 0.0,
        },
    )
    .unwrap()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Abramowitz–Stegun 7.1.26, absolute error below 1.5e-7.
fn normal_cdf(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * z);
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-z * z).exp();
    0.5 * (1.0 + erf.copysign(x))
}

fn ks_one_sample(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

fn increments(path: &levy_sync::CadlagPath, times: impl Iterator<Item = f64>, h: f64) -> Vec<f64> {
    times.map(|t| path.eval1(t + h) - path.eval1(t)).collect()
}

#[test]
fn poisson_count_on_unit_interval() {
    let law = cp(3.0, JumpDistribution::Constant { value: 1.0 }, 1.0);
    let counts: Vec<f64> = (0..10_000u64)
        .map(|s| sample_levy_path(&law, grid(0.0, 1.0, 0.1), s).unwrap().path.jump_indices().len() as f64)
        .collect();
    let (m, v) = mean_var(&counts);
    assert!((2.9..=3.1).contains(&m), "mean count {m}");
    assert!((v - 3.0).abs() < 0.2, "count variance {v}");
}

#[test]
fn two_sided_poisson_count() {
    let law = cp(1.0, JumpDistribution::Constant { value: 1.0 }, 0.0);
    let counts: Vec<f64> = (0..2000u64)
        .map(|s| build_two_sided(&law, 10.0, 10.0, 0.5, s).unwrap().path.jump_indices().len() as f64)
        .collect();
    let (m, v) = mean_var(&counts);
    // standard error of the mean is 0.1
    assert!((m - 20.0).abs() < 0.5, "mean {m}");
    assert!((v - 20.0).abs() < 3.0, "variance {v}");
    let r = build_two_sided(&law, 10.0, 10.0, 0.5, 7).unwrap();
    assert_eq!(r.path.eval1(0.0), 0.0);
}

#[test]
fn two_sided_jumps_on_both_sides_are_cadlag() {
    let law = cp(2.0, JumpDistribution::Normal { mean: 0.0, std: 1.0 }, 0.5);
    for seed in 0..20 {
        let r = build_two_sided(&law, 5.0, 5.0, 0.01, seed).unwrap();
        let p = &r.path;
        assert_eq!(p.eval1(0.0), 0.0);
        for &i in p.jump_indices() {
            let t = p.knot_time(i);
            assert_eq!(p.eval1(t), p.knot_value1(i));
            assert_eq!(p.left_limit1(t), p.knot_left1(i));
            assert!((p.eval1(t + 1e-9) - p.eval1(t)).abs() < 1e-3);
        }
        let times = p.jump_times();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn law_of_large_numbers() {
    let drift = sample_levy_path(&GeneratingTriplet::pure_drift(3.0), grid(0.0, 100.0, 0.5), 0).unwrap();
    assert_eq!(empirical_drift(&drift, 100.0).unwrap(), vec![3.0]);

    let bm = GeneratingTriplet::brownian(1.0).unwrap();
    let hits = (0..20u64)
        .filter(|&s| {
            let r = sample_levy_path(&bm, grid(0.0, 1e4, 1.0), s).unwrap();
            empirical_drift(&r, 1e4).unwrap()[0].abs() < 0.05
        })
        .count();
    assert_eq!(hits, 20);

    let st = stable(1.5);
    let vals: Vec<f64> = (0..100u64)
        .map(|s| {
            let r = sample_levy_path(&st, grid(0.0, 1e4, 1.0), s).unwrap();
            empirical_drift(&r, 1e4).unwrap()[0].abs()
        })
        .collect();
    assert!(median(&vals) < 0.1, "median |L(t)/t| = {}", median(&vals));
}

#[test]
fn backward_law_of_large_numbers() {
    let bm = GeneratingTriplet::scalar(0.5, 1.0, JumpMeasure::None).unwrap();
    let r = build_two_sided(&bm, 1e4, 1.0, 1.0, 3).unwrap();
    let v = empirical_drift(&r, -1e4).unwrap()[0];
    assert!((v - 0.5).abs() < 0.05, "{v}");
}

#[test]
fn brownian_increments_are_gaussian() {
    let r = sample_levy_path(&GeneratingTriplet::brownian(2.0).unwrap(), grid(0.0, 400.0, 0.1), 11).unwrap();
    let mut inc = increments(&r.path, (0..4000).map(|k| k as f64 * 0.1), 0.1);
    let sd = (2.0f64 * 0.1).sqrt();
    let d = ks_one_sample(&mut inc, |x| normal_cdf(x / sd));
    // 1% critical value 1.628/sqrt(n)
    assert!(d < 1.628 / 4000f64.sqrt(), "KS statistic {d}");
}

#[test]
fn stable_characteristic_function() {
    // symmetric S_α with unit scale: E cos(uX) = exp(-|u|^α)
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200_000;
    for &alpha in &[1.2, 1.5, 1.8] {
        let xs: Vec<f64> = (0..n).map(|_| sample_stable(alpha, 0.0, &mut rng)).collect();
        for &u in &[0.5, 1.0, 2.0] {
            let emp = xs.iter().map(|x| (u * x).cos()).sum::<f64>() / n as f64;
            let exact = (-(u as f64).powf(alpha)).exp();
            assert!((emp - exact).abs() < 5e-3, "alpha {alpha}, u {u}: {emp} vs {exact}");
        }
    }
}

#[test]
fn stable_increments_scale_with_cell_size() {
    let st = stable(1.5);
    let r = sample_levy_path(&st, grid(0.0, 2000.0, 0.25), 2).unwrap();
    let inc = increments(&r.path, (0..8000).map(|k| k as f64 * 0.25), 0.25);
    // E cos(X) over a cell of length h is exp(-h)
    let emp = inc.iter().map(|x| x.cos()).sum::<f64>() / inc.len() as f64;
    assert!((emp - (-0.25f64).exp()).abs() < 0.02, "{emp}");
}

#[test]
fn increment_stationarity() {
    let law = cp(5.0, JumpDistribution::Rademacher { size: 1.0 }, 1.0);
    let trials = 40;
    let passed = (0..trials as u64)
        .filter(|&s| {
            let r = sample_levy_path(&law, grid(0.0, 200.0, 0.01), s).unwrap();
            let mut a = increments(&r.path, (0..500).map(|k| k as f64 * 0.2), 0.2);
            let mut b = increments(&r.path, (0..500).map(|k| 100.0 + k as f64 * 0.2), 0.2);
            let d = ks_two_sample(&mut a, &mut b);
            d < 1.628 * (2.0f64 / 500.0).sqrt()
        })
        .count();
    assert!(passed as f64 >= 0.95 * trials as f64, "{passed}/{trials}");
}

#[test]
fn disjoint_increments_are_uncorrelated() {
    for law in [
        GeneratingTriplet::brownian(1.0).unwrap(),
        cp(5.0, JumpDistribution::Rademacher { size: 1.0 }, 0.0),
        stable(1.8),
    ] {
        let r = build_two_sided(&law, 500.0, 500.0, 0.1, 9).unwrap();
        let inc = increments(&r.path, (0..10_000).map(|k| -500.0 + k as f64 * 0.1), 0.1);
        let n = inc.len() - 1;
        let (m, v) = mean_var(&inc);
        let cov = (0..n).map(|i| (inc[i] - m) * (inc[i + 1] - m)).sum::<f64>() / n as f64;
        let rho = cov / v;
        assert!(rho.abs() < 3.0 / (n as f64).sqrt(), "lag-one correlation {rho}");
    }
}

#[test]
fn forward_and_backward_halves_are_independent() {
    let bm = GeneratingTriplet::brownian(1.0).unwrap();
    let n = 3000;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in 0..n as u64 {
        let r = build_two_sided(&bm, 1.0, 1.0, 0.5, s).unwrap();
        a.push(r.path.eval1(1.0));
        b.push(r.path.eval1(-1.0));
    }
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
    assert!((cov / (va * vb).sqrt()).abs() < 3.0 / (n as f64).sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampling_is_deterministic_and_valid(
        seed in any::<u64>(),
        rate in 0.1f64..10.0,
        var in 0.0f64..2.0,
        t_end in 0.5f64..5.0,
        dt in 0.005f64..0.2,
    ) {
        let law = cp(rate, JumpDistribution::Uniform { low: -1.0, high: 2.0 }, var);
        let g = grid(0.0, t_end, dt);
        let a = sample_levy_path(&law, g, seed).unwrap();
        let b = sample_levy_path(&law, g, seed).unwrap();
        prop_assert_eq!(&a.path, &b.path);
        prop_assert_eq!(a.path.eval1(0.0), 0.0);
        let times: Vec<f64> = a.path.knot_times().collect();
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        for k in 0..=g.cells() {
            let t = g.node(k);
            prop_assert!(times.contains(&t));
        }
        for &i in a.path.jump_indices() {
            prop_assert_ne!(a.path.knot_left1(i), a.path.knot_value1(i));
        }
    }

    #[test]
    fn two_sided_is_anchored_and_deterministic(
        seed in any::<u64>(),
        past in 0.5f64..5.0,
        future in 0.5f64..5.0,
        alpha in 1.1f64..1.95,
    ) {
        let law = stable(alpha);
        let a = build_two_sided(&law, past, future, 0.05, seed).unwrap();
        let b = build_two_sided(&law, past, future, 0.05, seed).unwrap();
        prop_assert_eq!(&a.path, &b.path);
        prop_assert_eq!(a.path.eval1(0.0), 0.0);
        prop_assert!((a.path.t_start() + past).abs() < 1e-9);
    }

    #[test]
    fn drift_path_is_exact_at_nodes(gamma in -5.0f64..5.0, n in 1usize..200) {
        let dt = 0.01;
        let r = sample_levy_path(&GeneratingTriplet::pure_drift(gamma), grid(0.0, n as f64 * dt, dt), 0).unwrap();
        for k in 0..=n {
            let t = r.grid.node(k);
            prop_assert_eq!(r.path.eval1(t), gamma * t);
        }
    }
}
