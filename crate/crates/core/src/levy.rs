//! Sample paths of Lévy processes from a generating triplet.
//!
//! A path is assembled from independent channels per grid cell: drift
//! `γ·h`, a Gaussian increment with covariance `A·h`, an exact α-stable
//! increment (Chambers–Mallows–Stuck), and compound-Poisson jumps placed at
//! their exact exponential arrival times. Finite-activity jumps are added
//! without compensation, so `γ` is the drift of the continuous part.

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SimulationGrid;
use crate::path::{CadlagPath, PathBuilder};
use crate::seed::{self, Channel, Side};

/// Law of a single compound-Poisson jump (applied per component).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpDistribution {
    Constant { value: f64 },
    /// `±size` with equal probability.
    Rademacher { size: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
    Exponential { rate: f64 },
}

impl JumpDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpDistribution::Constant { value } => value.is_finite(),
            JumpDistribution::Rademacher { size } => size.is_finite(),
            JumpDistribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            JumpDistribution::Normal { mean, std } => mean.is_finite() && std > 0.0 && std.is_finite(),
            JumpDistribution::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid jump distribution {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpDistribution::Constant { value } => value,
            JumpDistribution::Rademacher { size } => {
                if rng.random::<bool>() {
                    size
                } else {
                    -size
                }
            }
            JumpDistribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            JumpDistribution::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            JumpDistribution::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
        }
    }

    /// `E[h(X); |X| < c]` for a jump mark `X`.
    pub fn truncated_expectation(&self, c: f64, h: impl Fn(f64) -> f64) -> f64 {
        let inside = |x: f64| x.abs() < c;
        match *self {
            JumpDistribution::Constant { value } => {
                if inside(value) {
                    h(value)
                } else {
                    0.0
                }
            }
            JumpDistribution::Rademacher { size } => {
                if inside(size) {
                    0.5 * (h(size) + h(-size))
                } else {
                    0.0
                }
            }
            JumpDistribution::Uniform { low, high } => {
                let (a, b) = (low.max(-c), high.min(c));
                if a >= b {
                    return 0.0;
                }
                simpson(a, b, |x| h(x) / (high - low))
            }
            JumpDistribution::Normal { mean, std } => {
                let (a, b) = ((-c).max(mean - 12.0 * std), c.min(mean + 12.0 * std));
                if a >= b {
                    return 0.0;
                }
                let norm = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
                simpson(a, b, |x| {
                    let z = (x - mean) / std;
                    h(x) * norm * (-0.5 * z * z).exp()
                })
            }
            JumpDistribution::Exponential { rate } => {
                let b = c.min(40.0 / rate);
                if b <= 0.0 {
                    return 0.0;
                }
                simpson(0.0, b, |x| h(x) * rate * (-rate * x).exp())
            }
        }
    }
}

fn simpson(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const PANELS: usize = 2000;
    let h = (b - a) / PANELS as f64;
    let mut s = f(a) + f(b);
    for i in 1..PANELS {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// The jump part `ν` of a generating triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpMeasure {
    None,
    CompoundPoisson { rate: f64, jumps: JumpDistribution },
    /// Stable law with index `alpha ∈ (1, 2)`, so `E|L_1| < ∞`.
    AlphaStable { alpha: f64, scale: f64, skew: f64 },
}

impl JumpMeasure {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpMeasure::None => Ok(()),
            JumpMeasure::CompoundPoisson { rate, jumps } => {
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::param(format!("jump rate must be >= 0, got {rate}")));
                }
                jumps.validate()
            }
            JumpMeasure::AlphaStable { alpha, scale, skew } => {
                if !(*alpha > 1.0 && *alpha < 2.0) {
                    return Err(Error::param(format!(
                        "stable index must lie in (1, 2), got {alpha}"
                    )));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::param(format!("stable scale must be > 0, got {scale}")));
                }
                if !(-1.0..=1.0).contains(skew) {
                    return Err(Error::param(format!("stable skew must lie in [-1, 1], got {skew}")));
                }
                Ok(())
            }
        }
    }

    pub fn is_finite_activity(&self) -> bool {
        !matches!(self, JumpMeasure::AlphaStable { .. })
    }
}

/// `(γ, A, ν)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingTriplet {
    gamma: Vec<f64>,
    covariance: Vec<f64>,
    jump_measure: JumpMeasure,
    #[serde(skip)]
    chol: Vec<f64>,
}

impl GeneratingTriplet {
    /// `covariance` is row-major `d×d`, symmetric positive semidefinite.
    pub fn new(gamma: Vec<f64>, covariance: Vec<f64>, jump_measure: JumpMeasure) -> Result<Self> {
        let d = gamma.len();
        if d == 0 {
            return Err(Error::param("triplet dimension must be at least 1"));
        }
        if covariance.len() != d * d {
            return Err(Error::param(format!(
                "covariance must be {d}x{d}, got {} entries",
                covariance.len()
            )));
        }
        if gamma.iter().chain(&covariance).any(|v| !v.is_finite()) {
            return Err(Error::param("triplet entries must be finite"));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (covariance[i * d + j], covariance[j * d + i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::param("covariance must be symmetric"));
                }
            }
        }
        jump_measure.validate()?;
        let chol = psd_cholesky(&covariance, d)?;
        Ok(Self {
            gamma,
            covariance,
            jump_measure,
            chol,
        })
    }

    pub fn scalar(gamma: f64, variance: f64, jump_measure: JumpMeasure) -> Result<Self> {
        Self::new(vec![gamma], vec![variance], jump_measure)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![0.0; dim * dim], JumpMeasure::None).expect("zero triplet")
    }

    pub fn pure_drift(gamma: f64) -> Self {
        Self::scalar(gamma, 0.0, JumpMeasure::None).expect("drift triplet")
    }

    pub fn brownian(variance: f64) -> Result<Self> {
        Self::scalar(0.0, variance, JumpMeasure::None)
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn jump_measure(&self) -> &JumpMeasure {
        &self.jump_measure
    }

    /// Lower-triangular factor `C` with `C Cᵀ = A`.
    pub fn covariance_factor(&self) -> &[f64] {
        if self.chol.is_empty() {
            // deserialised triplets skip the cached factor
            return &self.covariance;
        }
        &self.chol
    }

    fn has_gaussian(&self) -> bool {
        self.covariance.iter().any(|&v| v != 0.0)
    }

    /// Rebuild cached state after deserialisation.
    pub fn revalidated(self) -> Result<Self> {
        Self::new(self.gamma, self.covariance, self.jump_measure)
    }
}

fn psd_cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if diag < -tol {
            return Err(Error::param("covariance must be positive semidefinite"));
        }
        if diag <= tol {
            for i in j + 1..d {
                let mut s = a[i * d + j];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if s.abs() > 1e-9 * scale {
                    return Err(Error::param("covariance must be positive semidefinite"));
                }
            }
            continue;
        }
        let ljj = diag.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = s / ljj;
        }
    }
    Ok(l)
}

/// Chambers–Mallows–Stuck draw from the standard stable law
/// `S_α(1, β, 0)` for `α ≠ 1`.
pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, skew: f64, rng: &mut R) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let v = loop {
        let u: f64 = rng.random();
        let v = std::f64::consts::PI * (u - 0.5);
        if v.abs() < FRAC_PI_2 {
            break v;
        }
    };
    let w: f64 = loop {
        let w: f64 = Exp1.sample(rng);
        if w > 0.0 {
            break w;
        }
    };
    let t = skew * (FRAC_PI_2 * alpha).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(0.5 / alpha);
    let arg = alpha * (v + b);
    s * arg.sin() / v.cos().powf(1.0 / alpha) * ((v - arg).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One compound-Poisson arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub mark: Vec<f64>,
}

/// Raw per-cell increments of one side of a Lévy process, kept separate by
/// channel so integrators can route them through different coefficients.
#[derive(Debug, Clone)]
pub struct LevyIncrements {
    pub grid: SimulationGrid,
    pub dim: usize,
    /// Gaussian increments `C·√h·Z`, `cells × dim`.
    pub gaussian: Vec<f64>,
    /// Stable increments, `cells × dim`; empty without a stable part.
    pub stable: Vec<f64>,
    /// Compound-Poisson arrivals in time order, strictly after `t_start`.
    pub jumps: Vec<Jump>,
}

impl LevyIncrements {
    pub fn sample(triplet: &GeneratingTriplet, grid: SimulationGrid, seed: u64, side: Side) -> Self {
        let d = triplet.dim();
        let n = grid.cells();
        let h = grid.step();
        let mut gaussian = vec![0.0; n * d];
        if triplet.has_gaussian() {
            let c = triplet.covariance_factor();
            let mut rng = seed::stream(seed, side, Channel::Gaussian);
            let sq = h.sqrt();
            let mut z = vec![0.0; d];
            for k in 0..n {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                for i in 0..d {
                    let mut s = 0.0;
                    for j in 0..=i {
                        s += c[i * d + j] * z[j];
                    }
                    gaussian[k * d + i] = s * sq;
                }
            }
        }
        let mut stable = Vec::new();
        let mut jumps = Vec::new();
        match triplet.jump_measure() {
            JumpMeasure::None => {}
            JumpMeasure::AlphaStable { alpha, scale, skew } => {
                let mut rng = seed::stream(seed, side, Channel::Stable);
                let f = scale * h.powf(1.0 / alpha);
                stable = (0..n * d)
                    .map(|_| f * sample_stable(*alpha, *skew, &mut rng))
                    .collect();
            }
            JumpMeasure::CompoundPoisson { rate, jumps: law } => {
                if *rate > 0.0 {
                    let mut times = seed::stream(seed, side, Channel::PoissonTimes);
                    let mut marks = seed::stream(seed, side, Channel::PoissonMarks);
                    let gap = Exp::new(*rate).expect("positive rate");
                    let mut t = grid.t_start;
                    loop {
                        t += gap.sample(&mut times);
                        if t > grid.t_end {
                            break;
                        }
                        if t <= grid.t_start {
                            continue;
                        }
                        let mark = (0..d).map(|_| law.sample(&mut marks)).collect();
                        jumps.push(Jump { time: t, mark });
                    }
                }
            }
        }
        Self {
            grid,
            dim: d,
            gaussian,
            stable,
            jumps,
        }
    }

    /// Gaussian plus stable increment of cell `k`.
    fn continuous_into(&self, k: usize, out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let mut v = self.gaussian[k * d + i];
            if !self.stable.is_empty() {
                v += self.stable[k * d + i];
            }
            out[i] = v;
        }
    }

    /// Assemble the path started from 0 at `grid.t_start`. The drift enters
    /// as `γ·(t - t_start)` rather than a running sum, so pure-drift paths
    /// are exact at every knot.
    pub fn to_path(&self, gamma: &[f64]) -> Result<CadlagPath> {
        let d = self.dim;
        let n = self.grid.cells();
        let t0 = self.grid.t_start;
        let mut b = PathBuilder::with_capacity(d, n + 1 + 2 * self.jumps.len());
        let mut cont = vec![0.0; d];
        let mut jump_level = vec![0.0; d];
        let mut inc = vec![0.0; d];
        let mut val = vec![0.0; d];
        let mut left = vec![0.0; d];
        let mut next_jump = 0;
        for k in 0..=n {
            let tk = self.grid.node(k);
            // arrivals that land exactly on this node become a jump knot here
            for i in 0..d {
                left[i] = cont[i] + gamma[i] * (tk - t0) + jump_level[i];
            }
            while next_jump < self.jumps.len() && self.jumps[next_jump].time <= tk {
                for (j, m) in jump_level.iter_mut().zip(&self.jumps[next_jump].mark) {
                    *j += m;
                }
                next_jump += 1;
            }
            for i in 0..d {
                val[i] = cont[i] + gamma[i] * (tk - t0) + jump_level[i];
            }
            b.push_jump(tk, &left, &val);
            if k == n {
                break;
            }
            self.continuous_into(k, &mut inc);
            let t_next = self.grid.node(k + 1);
            while next_jump < self.jumps.len() && self.jumps[next_jump].time < t_next {
                let tau = self.jumps[next_jump].time;
                let w = (tau - tk) / (t_next - tk);
                for i in 0..d {
                    left[i] = cont[i] + inc[i] * w + gamma[i] * (tau - t0) + jump_level[i];
                }
                while next_jump < self.jumps.len() && self.jumps[next_jump].time == tau {
                    for (j, m) in jump_level.iter_mut().zip(&self.jumps[next_jump].mark) {
                        *j += m;
                    }
                    next_jump += 1;
                }
                for i in 0..d {
                    val[i] = cont[i] + inc[i] * w + gamma[i] * (tau - t0) + jump_level[i];
                }
                b.push_jump(tau, &left, &val);
            }
            for (c, i) in cont.iter_mut().zip(&inc) {
                *c += i;
            }
        }
        b.build()
    }
}

/// A realised noise path together with everything needed to regenerate it.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    pub path: CadlagPath,
    pub seed: u64,
    pub grid: SimulationGrid,
    pub triplet: GeneratingTriplet,
}

impl NoiseRealization {
    pub fn dim(&self) -> usize {
        self.triplet.dim()
    }

    /// Jump table `(time, size)` of the realised path.
    pub fn jump_table(&self) -> Vec<(f64, Vec<f64>)> {
        self.path
            .jump_indices()
            .iter()
            .map(|&i| (self.path.knot_time(i), self.path.jump_size(i)))
            .collect()
    }

    /// Wrap an externally built path (e.g. a deterministic test signal).
    pub fn from_path(path: CadlagPath, triplet: GeneratingTriplet, dt: f64) -> Result<Self> {
        let grid = SimulationGrid::new(path.t_start(), path.t_end(), dt)?;
        Ok(Self {
            path,
            seed: 0,
            grid,
            triplet,
        })
    }
}

/// Sample `L` on `grid` with `L(0) = 0`. The grid must contain time 0;
/// windows reaching into negative time use the two-sided construction.
pub fn sample_levy_path(triplet: &GeneratingTriplet, grid: SimulationGrid, seed: u64) -> Result<NoiseRealization> {
    if grid.t_start > 0.0 || grid.t_end < 0.0 {
        return Err(Error::Grid(format!(
            "window [{}, {}] must contain t = 0",
            grid.t_start, grid.t_end
        )));
    }
    if grid.t_start == 0.0 {
        let inc = LevyIncrements::sample(triplet, grid, seed, Side::Forward);
        let path = inc.to_path(triplet.gamma())?;
        return Ok(NoiseRealization {
            path,
            seed,
            grid,
            triplet: triplet.clone(),
        });
    }
    let mut r = build_two_sided(triplet, -grid.t_start, grid.t_end.max(0.0), grid.dt, seed)?;
    r.grid = grid;
    Ok(r)
}

/// Two-sided process on `[-t_past, t_future]`: an independent forward copy
/// for `t ≥ 0` and `L(-t) = -L̃(t-)` for an independent copy `L̃` behind 0.
pub fn build_two_sided(
    triplet: &GeneratingTriplet,
    t_past: f64,
    t_future: f64,
    dt: f64,
    seed: u64,
) -> Result<NoiseRealization> {
    if !(t_past > 0.0) || t_future < 0.0 || !t_past.is_finite() || !t_future.is_finite() {
        return Err(Error::param(format!(
            "horizons must be positive, got past {t_past}, future {t_future}"
        )));
    }
    let d = triplet.dim();
    let back_grid = SimulationGrid::new(0.0, t_past, dt)?;
    let back = LevyIncrements::sample(triplet, back_grid, seed, Side::Backward).to_path(triplet.gamma())?;
    let forward = if t_future > 0.0 {
        let g = SimulationGrid::new(0.0, t_future, dt)?;
        Some(LevyIncrements::sample(triplet, g, seed, Side::Forward).to_path(triplet.gamma())?)
    } else {
        None
    };
    let n_fwd = forward.as_ref().map_or(0, |p| p.knot_count());
    let mut b = PathBuilder::with_capacity(d, back.knot_count() + n_fwd);
    let mut v = vec![0.0; d];
    let mut l = vec![0.0; d];
    for i in (0..back.knot_count()).rev() {
        back.knot_left_into(i, &mut v);
        back.knot_value_into(i, &mut l);
        v.iter_mut().for_each(|x| *x = -*x);
        l.iter_mut().for_each(|x| *x = -*x);
        let t = -back.knot_time(i);
        b.push_jump(if t == 0.0 { 0.0 } else { t }, &l, &v);
    }
    if let Some(fwd) = forward {
        for i in 1..fwd.knot_count() {
            fwd.knot_value_into(i, &mut v);
            fwd.knot_left_into(i, &mut l);
            b.push_jump(fwd.knot_time(i), &l, &v);
        }
    }
    let path = b.build()?;
    let t_end = if t_future > 0.0 { t_future } else { 0.0 };
    let grid = if t_end > 0.0 {
        SimulationGrid::new(-t_past, t_end, dt)?
    } else {
        back_grid_negative(t_past, dt)?
    };
    Ok(NoiseRealization {
        path,
        seed,
        grid,
        triplet: triplet.clone(),
    })
}

fn back_grid_negative(t_past: f64, dt: f64) -> Result<SimulationGrid> {
    SimulationGrid::new(-t_past, 0.0, dt)
}

/// `L(t)/t`, which tends to `E L_1 = γ` as `|t| → ∞`.
pub fn empirical_drift(realization: &NoiseRealization, t_eval: f64) -> Result<Vec<f64>> {
    if t_eval == 0.0 {
        return Err(Error::domain("empirical drift is undefined at t = 0"));
    }
    let v = realization.path.eval(t_eval)?;
    Ok(v.into_iter().map(|x| x / t_eval).collect())
}
