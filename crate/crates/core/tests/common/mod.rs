//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use levy_sync::CadlagPath;

/// Exact solution of `dY = -a·Y dt + α dL` driven by the piecewise-affine
/// scalar path `l`, sampled at the requested times (ascending, inside the
/// path's domain, starting at `t0`).
pub fn ou_exact(a: f64, alpha: f64, l: &CadlagPath, t0: f64, y0: f64, times: &[f64]) -> Vec<f64> {
    let flow = |y: f64, slope: f64, h: f64| {
        let e = (-a * h).exp();
        if a == 0.0 {
            y + alpha * slope * h
        } else {
            e * y + alpha * slope * (1.0 - e) / a
        }
    };
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0;
    let mut t = t0;
    let mut i = l.knot_times().position(|s| s > t0).unwrap_or(l.knot_count());
    for &target in times {
        while i < l.knot_count() && l.knot_time(i) <= target {
            let ti = l.knot_time(i);
            let slope = (l.knot_left1(i) - l.eval1(t)) / (ti - t);
            y = flow(y, slope, ti - t);
            y += alpha * (l.knot_value1(i) - l.knot_left1(i));
            t = ti;
            i += 1;
        }
        if target > t {
            let slope = (l.left_limit1(target) - l.eval1(t)) / (target - t);
            out.push(flow(y, slope, target - t));
        } else {
            out.push(y);
        }
    }
    out
}

/// `∫_{t-T}^t K(t-s) dL_s` for a scalar piecewise-affine path with jumps:
/// Simpson's rule on every affine segment and exact jump terms.
pub fn kernel_convolution(l: &CadlagPath, t: f64, horizon: f64, k: impl Fn(f64) -> f64) -> f64 {
    let lo = t - horizon;
    let mut total = 0.0;
    let mut prev_t = lo;
    let mut prev_v = l.eval1(lo);
    let simpson = |a: f64, b: f64| {
        const N: usize = 16;
        let h = (b - a) / N as f64;
        let mut s = k(t - a) + k(t - b);
        for j in 1..N {
            let w = if j % 2 == 1 { 4.0 } else { 2.0 };
            s += w * k(t - (a + j as f64 * h));
        }
        s * h / 3.0
    };
    for i in 0..l.knot_count() {
        let ti = l.knot_time(i);
        if ti <= lo {
            continue;
        }
        if ti > t {
            break;
        }
        let slope = (l.knot_left1(i) - prev_v) / (ti - prev_t);
        total += slope * simpson(prev_t, ti);
        total += k(t - ti) * (l.knot_value1(i) - l.knot_left1(i));
        prev_t = ti;
        prev_v = l.knot_value1(i);
    }
    if t > prev_t {
        let slope = (l.left_limit1(t) - prev_v) / (t - prev_t);
        total += slope * simpson(prev_t, t);
    }
    total
}

/// Solve `[[a, b], [c, d]]·(x, y) = (e, f)` by Cramer's rule.
pub fn solve2(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> (f64, f64) {
    let det = a * d - b * c;
    ((e * d - b * f) / det, (a * f - e * c) / det)
}

/// Equilibrium of the zero-noise coupled example
/// `x' = -(x+1) + λ(y-x)`, `y' = -(y+3) + λ(x-y)`.
pub fn example_equilibrium(lambda: f64) -> (f64, f64) {
    solve2(-(1.0 + lambda), lambda, lambda, -(1.0 + lambda), 1.0, 3.0)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean over `seeds` of the max-node error of Euler–Maruyama for
/// `dY = -Y dt + dB` on `[0, 1]` against [`ou_exact`], per step size.
pub fn ou_strong_errors(dts: &[f64], seeds: u64) -> Vec<f64> {
    use levy_sync::drift::Drift;
    use levy_sync::integrator::{integrate_additive, AdditiveSdeSpec};
    use levy_sync::levy::sample_levy_path;
    use levy_sync::{GeneratingTriplet, SimulationGrid};

    let bm = GeneratingTriplet::brownian(1.0).unwrap();
    let mut errs = vec![0.0; dts.len()];
    for seed in 0..seeds {
        let noise = sample_levy_path(&bm, SimulationGrid::new(0.0, 1.0, 1e-5).unwrap(), seed).unwrap();
        let spec = AdditiveSdeSpec::new(Drift::linear(1.0), vec![1.0], noise.clone()).unwrap();
        for (e, &dt) in errs.iter_mut().zip(dts) {
            let g = SimulationGrid::new(0.0, 1.0, dt).unwrap();
            let y = integrate_additive(&spec, &g, &[0.5]).unwrap();
            let times: Vec<f64> = g.nodes().collect();
            let exact = ou_exact(1.0, 1.0, &noise.path, 0.0, 0.5, &times);
            let worst = times.iter().zip(&exact).map(|(&t, x)| (y.eval1(t) - x).abs()).fold(0.0, f64::max);
            *e += worst / seeds as f64;
        }
    }
    errs
}

/// Flow composition residual `|φ(s+t, ω, y) - φ(t, θ_s ω, φ(s, ω, y))|` and
/// single-run error against a `1e-4` reference, for the coupled example at
/// coupling 1 with Brownian noise, averaged over `seeds`.
pub fn cocycle_residual(dt: f64, seeds: u64) -> (f64, f64) {
    use levy_sync::drift::Drift;
    use levy_sync::integrator::integrate_additive;
    use levy_sync::levy::build_two_sided;
    use levy_sync::sync::CoupledSpec;
    use levy_sync::{GeneratingTriplet, SimulationGrid};

    let bm = GeneratingTriplet::brownian(1.0).unwrap();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (mut res, mut err) = (0.0, 0.0);
    for seed in 0..seeds {
        let n1 = build_two_sided(&bm, 1.0, 3.0, 1e-4, 2 * seed).unwrap();
        let n2 = build_two_sided(&bm, 1.0, 3.0, 1e-4, 2 * seed + 1).unwrap();
        let c = CoupledSpec::new(Drift::affine(1.0, 1.0), Drift::affine(1.0, 3.0), vec![1.0], vec![2.0], 1.0, n1, n2)
            .unwrap();
        let sys = c.stacked().unwrap();
        // s off the step lattice so the split point is a genuine extra node
        let (s, t) = (0.5 + dt / 2.0, 1.0);
        let y0 = [0.3, -0.2];
        let grid = |a: f64, b: f64, h: f64| SimulationGrid::new(a, b, h).unwrap();
        let full = integrate_additive(&sys, &grid(0.0, s + t, dt), &y0).unwrap().eval(s + t).unwrap();
        let fine = integrate_additive(&sys, &grid(0.0, s + t, 1e-4), &y0).unwrap().eval(s + t).unwrap();
        let mid = integrate_additive(&sys, &grid(0.0, s, dt), &y0).unwrap().eval(s).unwrap();
        let composed = integrate_additive(&sys.shifted(s).unwrap(), &grid(0.0, t, dt), &mid)
            .unwrap()
            .eval(t)
            .unwrap();
        res += dist(&full, &composed) / seeds as f64;
        err += dist(&full, &fine) / seeds as f64;
    }
    (res, err)
}

/// Independent two-sided noises for the coupled example.
pub fn example_noises(
    tri: &levy_sync::GeneratingTriplet,
    seed: u64,
    past: f64,
    future: f64,
    dt: f64,
) -> (levy_sync::NoiseRealization, levy_sync::NoiseRealization) {
    use levy_sync::levy::build_two_sided;
    (
        build_two_sided(tri, past, future, dt, 2 * seed).unwrap(),
        build_two_sided(tri, past, future, dt, 2 * seed + 1).unwrap(),
    )
}

/// Sup over `[0, 1]` of the difference between the pullback stationary pair
/// of the coupled example and its closed form in the recentered noises.
pub fn pullback_vs_closed_form(tri: &levy_sync::GeneratingTriplet, lambda: f64, seed: u64, dt: f64) -> f64 {
    use levy_sync::drift::Drift;
    use levy_sync::stationary::{example_closed_form, recenter_example};
    use levy_sync::sync::{coupled_stationary_pair, CoupledSpec};
    use levy_sync::SimulationGrid;

    let (n1, n2) = example_noises(tri, seed, 81.0, 1.0, dt);
    let g = SimulationGrid::new(0.0, 1.0, dt).unwrap();
    let spec = CoupledSpec::new(
        Drift::affine(1.0, 1.0),
        Drift::affine(1.0, 3.0),
        vec![1.0],
        vec![2.0],
        lambda,
        n1.clone(),
        n2.clone(),
    )
    .unwrap();
    let (x, y) = coupled_stationary_pair(&spec, &g, None).unwrap();
    let (l3, l4) = recenter_example(&n1, &n2).unwrap();
    let (cx, cy) = example_closed_form(lambda, &l3, &l4, &g).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in [(&x.path, &cx.path), (&y.path, &cy.path)] {
        for i in 0..b.knot_count() {
            let t = b.knot_time(i);
            worst = worst.max((a.eval1(t) - b.knot_value1(i)).abs());
            worst = worst.max((a.left_limit1(t) - b.knot_left1(i)).abs());
        }
    }
    worst
}

/// Sweep of the coupled example on the window `[0, 2]`.
pub fn example_sweep(tri: &levy_sync::GeneratingTriplet, lambdas: &[f64], seeds: u64, dt: f64) -> levy_sync::sync::SweepSpec {
    let (f, g, a, b) = levy_sync::drift::preset("paper-example").unwrap();
    levy_sync::sync::SweepSpec {
        f,
        g,
        alpha: vec![a],
        beta: vec![b],
        noise1: tri.clone(),
        noise2: tri.clone(),
        same_noise: false,
        lambdas: lambdas.to_vec(),
        window: (0.0, 2.0),
        seeds: (0..seeds).collect(),
        dt,
        metric_tol: 1e-3,
    }
}

/// Stable noise with index 1.5, unit scale, symmetric.
pub fn stable15() -> levy_sync::GeneratingTriplet {
    levy_sync::GeneratingTriplet::scalar(
        0.0,
        0.0,
        levy_sync::JumpMeasure::AlphaStable { alpha: 1.5, scale: 1.0, skew: 0.0 },
    )
    .unwrap()
}

/// Compound Poisson at rate 5 with ±1 jumps.
pub fn cp5() -> levy_sync::GeneratingTriplet {
    levy_sync::GeneratingTriplet::scalar(
        0.0,
        0.0,
        levy_sync::JumpMeasure::CompoundPoisson {
            rate: 5.0,
            jumps: levy_sync::JumpDistribution::Rademacher { size: 1.0 },
        },
    )
    .unwrap()
}
