//! Coupled systems, their averaged limit, and the synchronization sweep.

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::grid::SimulationGrid;
use crate::integrator::{estimate_dissipativity, integrate_additive, AdditiveSdeSpec, NoiseChannel};
use crate::levy::{build_two_sided, GeneratingTriplet, JumpMeasure, NoiseRealization};
use crate::path::{norm_diff, CadlagPath, PathBuilder};
use crate::seed::child_seed;
use crate::skorohod::skorohod_global;
use crate::stationary::{default_horizons, langevin_stationary, pullback_stationary, StationaryOrbit};

/// `dX = (f(X) + λ(Y-X)) dt + α dL¹`, `dY = (g(Y) + λ(X-Y)) dt + β dL²`.
#[derive(Debug, Clone)]
pub struct CoupledSpec {
    pub f: Drift,
    pub g: Drift,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub noise1: NoiseRealization,
    pub noise2: NoiseRealization,
}

fn is_random(t: &GeneratingTriplet) -> bool {
    t.covariance().iter().any(|&v| v != 0.0) || !matches!(t.jump_measure(), JumpMeasure::None)
}

impl CoupledSpec {
    /// Checks dimensions, `λ ≥ 0`, and that random noises come from
    /// different seeds.
    pub fn new(
        f: Drift,
        g: Drift,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        lambda: f64,
        noise1: NoiseRealization,
        noise2: NoiseRealization,
    ) -> Result<Self> {
        if noise1.seed == noise2.seed && (is_random(&noise1.triplet) || is_random(&noise2.triplet)) {
            return Err(Error::param(format!(
                "both noises use seed {}; they must be independent",
                noise1.seed
            )));
        }
        Self::with_shared_noise_allowed(f, g, alpha, beta, lambda, noise1, noise2)
    }

    /// As [`CoupledSpec::new`] without the independence check, for the
    /// same-noise control experiment.
    pub fn with_shared_noise_allowed(
        f: Drift,
        g: Drift,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        lambda: f64,
        noise1: NoiseRealization,
        noise2: NoiseRealization,
    ) -> Result<Self> {
        let d = noise1.dim();
        if noise2.dim() != d || alpha.len() != d || beta.len() != d {
            return Err(Error::param("noises and intensities must share one dimension"));
        }
        if !f.accepts(d) || !g.accepts(d) {
            return Err(Error::param(format!("drifts do not act on dimension {d}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param(format!("coupling must be finite and nonnegative, got {lambda}")));
        }
        Ok(Self {
            f,
            g,
            alpha,
            beta,
            lambda,
            noise1,
            noise2,
        })
    }

    pub fn dim(&self) -> usize {
        self.noise1.dim()
    }

    /// The stacked `2d`-dimensional additive system in state `(X, Y)`.
    pub fn stacked(&self) -> Result<AdditiveSdeSpec> {
        let d = self.dim();
        let (f, g, lam) = (self.f.clone(), self.g.clone(), self.lambda);
        let drift = Drift::from_fn(format!("coupled[{},{};{lam}]", f.name(), g.name()), Some(2 * d), move |s, out| {
            let (x, y) = s.split_at(d);
            let (ox, oy) = out.split_at_mut(d);
            f.eval_into(x, ox);
            g.eval_into(y, oy);
            for i in 0..d {
                let c = lam * (y[i] - x[i]);
                ox[i] += c;
                oy[i] -= c;
            }
        });
        let base = self.f.stiffness().unwrap_or(0.0).max(self.g.stiffness().unwrap_or(0.0));
        let drift = drift.with_stiffness(base + 2.0 * lam);
        AdditiveSdeSpec::with_channels(
            drift,
            2 * d,
            vec![
                NoiseChannel {
                    noise: self.noise1.clone(),
                    coeff: self.alpha.clone(),
                    offset: 0,
                },
                NoiseChannel {
                    noise: self.noise2.clone(),
                    coeff: self.beta.clone(),
                    offset: d,
                },
            ],
        )
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut s = self.clone();
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param(format!("coupling must be finite and nonnegative, got {lambda}")));
        }
        s.lambda = lambda;
        Ok(s)
    }
}

/// `dZ = ½(f(Z) + g(Z)) dt + ½α dL¹ + ½β dL²`.
pub fn averaged_spec(spec: &CoupledSpec) -> Result<AdditiveSdeSpec> {
    let half = |v: &[f64]| v.iter().map(|x| 0.5 * x).collect::<Vec<_>>();
    AdditiveSdeSpec::with_channels(
        Drift::average(&spec.f, &spec.g)?,
        spec.dim(),
        vec![
            NoiseChannel {
                noise: spec.noise1.clone(),
                coeff: half(&spec.alpha),
                offset: 0,
            },
            NoiseChannel {
                noise: spec.noise2.clone(),
                coeff: half(&spec.beta),
                offset: 0,
            },
        ],
    )
}

/// Smallest one-sided Lipschitz constant of `f` and `g` found by sampling.
pub fn dissipativity_of(spec: &CoupledSpec) -> Result<f64> {
    let d = spec.dim();
    let lf = estimate_dissipativity(&spec.f, d, 10.0, 2000, 0)?;
    let lg = estimate_dissipativity(&spec.g, d, 10.0, 2000, 0)?;
    for (name, e) in [("f", &lf), ("g", &lg)] {
        if e.violated {
            return Err(Error::param(format!(
                "drift {name} is not dissipative (estimated l = {})",
                e.l_hat
            )));
        }
    }
    Ok(lf.l_hat.min(lg.l_hat))
}

fn split(path: &CadlagPath, d: usize) -> Result<(CadlagPath, CadlagPath)> {
    let mut bx = PathBuilder::with_capacity(d, path.knot_count());
    let mut by = PathBuilder::with_capacity(d, path.knot_count());
    let mut v = vec![0.0; 2 * d];
    let mut l = vec![0.0; 2 * d];
    for i in 0..path.knot_count() {
        let t = path.knot_time(i);
        path.knot_value_into(i, &mut v);
        path.knot_left_into(i, &mut l);
        bx.push_jump(t, &l[..d], &v[..d]);
        by.push_jump(t, &l[d..], &v[d..]);
    }
    Ok((bx.build()?, by.build()?))
}

/// Pullback stationary orbits `(X̄^λ, Ȳ^λ)` of the coupled system.
pub fn coupled_stationary_pair(
    spec: &CoupledSpec,
    grid: &SimulationGrid,
    horizons: Option<&[f64]>,
) -> Result<(StationaryOrbit, StationaryOrbit)> {
    let l = dissipativity_of(spec)?;
    let default = default_horizons(l);
    let horizons = horizons.unwrap_or(&default);
    let orbit = pullback_stationary(&spec.stacked()?, grid, horizons, None)?;
    let (x, y) = split(&orbit.path, spec.dim())?;
    let wrap = |path| StationaryOrbit {
        path,
        lambda: spec.lambda,
        pullback_horizon: orbit.pullback_horizon,
        truncation_bound: orbit.truncation_bound,
    };
    Ok((wrap(x), wrap(y)))
}

/// Stationary orbit `Z^∞` of the averaged system.
pub fn averaged_stationary(spec: &CoupledSpec, grid: &SimulationGrid, horizons: Option<&[f64]>) -> Result<StationaryOrbit> {
    let l = dissipativity_of(spec)?;
    let default = default_horizons(l);
    let mut orbit = pullback_stationary(&averaged_spec(spec)?, grid, horizons.unwrap_or(&default), None)?;
    orbit.lambda = f64::INFINITY;
    Ok(orbit)
}

/// `sup_{t ∈ window} |X̄(t) - Ȳ(t)|`, left limits included.
pub fn sync_gap(x: &StationaryOrbit, y: &StationaryOrbit, window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    let xr = x.path.restrict(a, b)?;
    let yr = y.path.restrict(a, b)?;
    if xr.knot_count() != yr.knot_count() || xr.knot_times().zip(yr.knot_times()).any(|(s, t)| s != t) {
        return Err(Error::domain("orbits are not on the same grid"));
    }
    let d = xr.dim();
    let (mut u, mut v) = (vec![0.0; d], vec![0.0; d]);
    let mut m: f64 = 0.0;
    for i in 0..xr.knot_count() {
        xr.knot_value_into(i, &mut u);
        yr.knot_value_into(i, &mut v);
        m = m.max(norm_diff(&u, &v));
        xr.knot_left_into(i, &mut u);
        yr.knot_left_into(i, &mut v);
        m = m.max(norm_diff(&u, &v));
    }
    Ok(m)
}

/// Worst `(|ΔX_t|² + |ΔY_t|²) e^{2l(t-t₁)} / (|ΔX₀|² + |ΔY₀|²)` over the
/// window, for two solutions driven by the same noise.
pub fn contraction_check(spec: &CoupledSpec, y0_a: &[f64], y0_b: &[f64], grid: &SimulationGrid, l: f64) -> Result<f64> {
    let d0: f64 = y0_a.iter().zip(y0_b).map(|(a, b)| (a - b) * (a - b)).sum();
    if y0_a.len() != y0_b.len() || d0 == 0.0 {
        return Err(Error::param("initial conditions must differ"));
    }
    let sys = spec.stacked()?;
    let pa = integrate_additive(&sys, grid, y0_a)?;
    let pb = integrate_additive(&sys, grid, y0_b)?;
    let n = sys.dim;
    let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut worst: f64 = 0.0;
    for i in 0..pa.knot_count() {
        let t = pa.knot_time(i);
        pa.knot_value_into(i, &mut u);
        pb.eval_into(t, &mut v);
        let dd: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        worst = worst.max(dd * (2.0 * l * (t - grid.t_start)).exp() / d0);
    }
    Ok(worst)
}

/// Radius of the absorbing ball with its two integral terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorptionRadius {
    pub radius: f64,
    pub f_term: f64,
    pub g_term: f64,
}

/// `R_λ² = 1 + (4e^{-lt/2}/l) ∫_{-∞}^t e^{ls/2} [|f(X̄_s) + λȲ_s|² + |g(Ȳ_s) + λX̄_s|²] ds`
/// with `X̄, Ȳ` the rate-`λ` Langevin orbits of `αL¹`, `βL²`. The integral
/// is cut at `t - 40/l`, where the weight has fallen below `e^{-20}`.
pub fn absorption_radius(spec: &CoupledSpec, t: f64, l: f64, dt: f64) -> Result<AbsorptionRadius> {
    if !(spec.lambda > 0.0) {
        return Err(Error::param("the absorbing radius needs a positive coupling"));
    }
    if !(l > 0.0) {
        return Err(Error::param(format!("dissipativity constant must be positive, got {l}")));
    }
    let span = 40.0 / l;
    let grid = SimulationGrid::new(t - span, t, dt)?;
    let xb = langevin_stationary(spec.lambda, &spec.alpha, &spec.noise1, &grid)?;
    let yb = langevin_stationary(spec.lambda, &spec.beta, &spec.noise2, &grid)?;
    let d = spec.dim();
    let lam = spec.lambda;
    let terms = |s: f64| {
        let x = xb.path.eval(s).expect("on grid");
        let y = yb.path.eval(s).expect("on grid");
        let fx = spec.f.eval(&x);
        let gy = spec.g.eval(&y);
        let a: f64 = (0..d).map(|i| (fx[i] + lam * y[i]).powi(2)).sum();
        let b: f64 = (0..d).map(|i| (gy[i] + lam * x[i]).powi(2)).sum();
        (a, b)
    };
    let nodes: Vec<f64> = grid.nodes().collect();
    let (mut fi, mut gi) = (0.0, 0.0);
    let mut prev = terms(nodes[0]);
    for w in nodes.windows(2) {
        let cur = terms(w[1]);
        // exact weight integral, trapezoid on the bracket
        let wgt = 2.0 / l * ((0.5 * l * (w[1] - t)).exp() - (0.5 * l * (w[0] - t)).exp());
        fi += wgt * 0.5 * (prev.0 + cur.0);
        gi += wgt * 0.5 * (prev.1 + cur.1);
        prev = cur;
    }
    let f_term = 4.0 / l * fi;
    let g_term = 4.0 / l * gi;
    Ok(AbsorptionRadius {
        radius: (1.0 + f_term + g_term).sqrt(),
        f_term,
        g_term,
    })
}

/// `max_{a ∈ A} min_{b ∈ B} |a - b|`.
pub fn hausdorff_semidistance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("point sets must be nonempty"));
    }
    Ok(a.iter()
        .map(|p| b.iter().map(|q| norm_diff(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

/// Inputs of a synchronization sweep.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub f: Drift,
    pub g: Drift,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub noise1: GeneratingTriplet,
    pub noise2: GeneratingTriplet,
    /// Drive both components with one realisation (control experiment).
    pub same_noise: bool,
    pub lambdas: Vec<f64>,
    pub window: (f64, f64),
    pub seeds: Vec<u64>,
    pub dt: f64,
    pub metric_tol: f64,
}

/// One `(seed, λ)` cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncRow {
    pub seed: u64,
    pub lambda: f64,
    pub gap: f64,
    pub skorohod_x: f64,
    pub skorohod_y: f64,
    pub contraction_margin: f64,
    pub absorption_radius: f64,
}

/// Per-λ medians and maxima over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncSummary {
    pub lambda: f64,
    pub median_gap: f64,
    pub max_gap: f64,
    pub median_skorohod_x: f64,
    pub max_skorohod_x: f64,
    pub median_skorohod_y: f64,
    pub max_skorohod_y: f64,
    pub max_contraction_margin: f64,
    pub median_absorption_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncReport {
    pub lambda_values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Ordered by seed, then λ.
    pub rows: Vec<SyncRow>,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl SyncReport {
    pub fn column(&self, lambda: f64, pick: impl Fn(&SyncRow) -> f64) -> Vec<f64> {
        self.rows.iter().filter(|r| r.lambda == lambda).map(pick).collect()
    }

    pub fn summary(&self) -> Vec<SyncSummary> {
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.lambda_values
            .iter()
            .map(|&lam| {
                let gap = self.column(lam, |r| r.gap);
                let sx = self.column(lam, |r| r.skorohod_x);
                let sy = self.column(lam, |r| r.skorohod_y);
                let cm = self.column(lam, |r| r.contraction_margin);
                let ar = self.column(lam, |r| r.absorption_radius);
                SyncSummary {
                    lambda: lam,
                    median_gap: median(&gap),
                    max_gap: max(&gap),
                    median_skorohod_x: median(&sx),
                    max_skorohod_x: max(&sx),
                    median_skorohod_y: median(&sy),
                    max_skorohod_y: max(&sy),
                    max_contraction_margin: max(&cm),
                    median_absorption_radius: median(&ar),
                }
            })
            .collect()
    }
}

/// Noise realisations of one sweep seed.
pub fn sweep_noises(spec: &SweepSpec, seed: u64, past: f64) -> Result<(NoiseRealization, NoiseRealization)> {
    let future = spec.window.1.max(0.0);
    let past = past + (-spec.window.0).max(0.0);
    let n1 = build_two_sided(&spec.noise1, past, future, spec.dt, child_seed(seed, 0))?;
    let n2 = if spec.same_noise {
        n1.clone()
    } else {
        build_two_sided(&spec.noise2, past, future, spec.dt, child_seed(seed, 1))?
    };
    Ok((n1, n2))
}

/// How far back the noise must reach for pullback runs and the absorbing
/// radius of a system with contraction rate `l` and smallest coupling
/// `lambda_min`.
pub fn required_past(l: f64, lambda_min: f64) -> f64 {
    let pullback = *default_horizons(l).last().expect("two horizons");
    let radius = 40.0 / l + crate::stationary::default_truncation(lambda_min);
    pullback.max(radius) + 1.0
}

fn validate_sweep(spec: &SweepSpec) -> Result<()> {
    if spec.lambdas.is_empty() || spec.lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("lambda_values must be nonempty and strictly increasing"));
    }
    if !(spec.lambdas[0] > 0.0) {
        return Err(Error::param("lambda_values must be positive"));
    }
    if spec.seeds.is_empty() {
        return Err(Error::param("at least one seed is required"));
    }
    let (a, b) = spec.window;
    if !(b - a >= 2.0) {
        return Err(Error::param("the observation window must be at least 2 long"));
    }
    if !(spec.dt > 0.0) || !(spec.metric_tol > 0.0) {
        return Err(Error::param("dt and metric tolerance must be positive"));
    }
    Ok(())
}

/// Window `[T1, T2]` translated onto `[-m, m]`.
fn centred(path: &CadlagPath, window: (f64, f64)) -> Result<CadlagPath> {
    path.restrict(window.0, window.1)?.retime(-0.5 * (window.0 + window.1), 1.0)
}

/// One `(seed, λ)` cell given the seed's noises and averaged orbit.
pub fn sweep_cell(
    spec: &SweepSpec,
    seed: u64,
    lambda: f64,
    noises: &(NoiseRealization, NoiseRealization),
    z: &StationaryOrbit,
    l: f64,
) -> Result<SyncRow> {
    let grid = SimulationGrid::new(spec.window.0, spec.window.1, spec.dt)?;
    let coupled = CoupledSpec::with_shared_noise_allowed(
        spec.f.clone(),
        spec.g.clone(),
        spec.alpha.clone(),
        spec.beta.clone(),
        lambda,
        noises.0.clone(),
        noises.1.clone(),
    )?;
    let (x, y) = coupled_stationary_pair(&coupled, &grid, None)?;
    let gap = sync_gap(&x, &y, spec.window)?;
    let m = 0.5 * (spec.window.1 - spec.window.0);
    let m_max = m.floor() as u32;
    let zc = centred(&z.path, spec.window)?;
    let skorohod_x = skorohod_global(&centred(&x.path, spec.window)?, &zc, m_max, spec.metric_tol)?.value;
    let skorohod_y = skorohod_global(&centred(&y.path, spec.window)?, &zc, m_max, spec.metric_tol)?.value;
    let d = coupled.dim();
    let mut ya = x.path.eval(spec.window.0)?;
    ya.extend(y.path.eval(spec.window.0)?);
    let yb: Vec<f64> = ya.iter().enumerate().map(|(i, v)| if i < d { v + 1.0 } else { v - 1.0 }).collect();
    let contraction_margin = contraction_check(&coupled, &ya, &yb, &grid, l)?;
    let absorption = absorption_radius(&coupled, spec.window.0, l, spec.dt)?;
    Ok(SyncRow {
        seed,
        lambda,
        gap,
        skorohod_x,
        skorohod_y,
        contraction_margin,
        absorption_radius: absorption.radius,
    })
}

/// Runs every `(seed, λ)` cell in parallel on the current rayon pool; rows
/// come back ordered by seed then λ whatever the thread count.
pub fn run_sync_sweep(spec: &SweepSpec) -> Result<SyncReport> {
    validate_sweep(spec)?;
    let d = spec.alpha.len();
    if spec.beta.len() != d || spec.noise1.dim() != d || spec.noise2.dim() != d {
        return Err(Error::param("noises and intensities must share one dimension"));
    }
    let probe = CoupledSpec::with_shared_noise_allowed(
        spec.f.clone(),
        spec.g.clone(),
        spec.alpha.clone(),
        spec.beta.clone(),
        spec.lambdas[0],
        build_two_sided(&GeneratingTriplet::zero(d), 1.0, 1.0, 0.5, 0)?,
        build_two_sided(&GeneratingTriplet::zero(d), 1.0, 1.0, 0.5, 0)?,
    )?;
    let l = dissipativity_of(&probe)?;
    let past = required_past(l, spec.lambdas[0]);
    let grid = SimulationGrid::new(spec.window.0, spec.window.1, spec.dt)?;
    let per_seed: Vec<Vec<SyncRow>> = spec
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<SyncRow>> {
            let noises = sweep_noises(spec, seed, past)?;
            let base = CoupledSpec {
                lambda: spec.lambdas[0],
                noise1: noises.0.clone(),
                noise2: noises.1.clone(),
                ..probe.clone()
            };
            let z = averaged_stationary(&base, &grid, None)?;
            spec.lambdas
                .par_iter()
                .map(|&lam| sweep_cell(spec, seed, lam, &noises, &z, l))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(SyncReport {
        lambda_values: spec.lambdas.clone(),
        seeds: spec.seeds.clone(),
        rows: per_seed.into_iter().flatten().collect(),
    })
}
