//! Jump-adapted Euler–Maruyama integration and empirical checks of the
//! structural assumptions on drifts.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::grid::SimulationGrid;
use crate::levy::{GeneratingTriplet, JumpMeasure, LevyIncrements, NoiseRealization};
use crate::path::{norm, CadlagPath, PathBuilder};
use crate::seed::{self, Channel, Side};

/// States with norm above this are treated as blow-up.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Explicit steps are subdivided until `stiffness · h ≤ STABLE_STEP`.
const STABLE_STEP: f64 = 0.1;

/// One additive noise input: `coeff ⊙ dL` added to the state components
/// `offset .. offset + noise.dim()`.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    pub noise: NoiseRealization,
    pub coeff: Vec<f64>,
    pub offset: usize,
}

/// `dY = f(Y(t-)) dt + Σ_channels coeff ⊙ dL`.
#[derive(Debug, Clone)]
pub struct AdditiveSdeSpec {
    pub f: Drift,
    pub dim: usize,
    pub channels: Vec<NoiseChannel>,
}

impl AdditiveSdeSpec {
    /// Single-noise system `dY = f(Y) dt + α ⊙ dL`.
    pub fn new(f: Drift, noise_coeff: Vec<f64>, noise: NoiseRealization) -> Result<Self> {
        let dim = noise.dim();
        Self::with_channels(
            f,
            dim,
            vec![NoiseChannel {
                noise,
                coeff: noise_coeff,
                offset: 0,
            }],
        )
    }

    pub fn with_channels(f: Drift, dim: usize, channels: Vec<NoiseChannel>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("state dimension must be positive"));
        }
        if !f.accepts(dim) {
            return Err(Error::param(format!(
                "drift `{}` does not act on dimension {dim}",
                f.name()
            )));
        }
        for (k, ch) in channels.iter().enumerate() {
            let r = ch.noise.dim();
            if ch.coeff.len() != r {
                return Err(Error::param(format!(
                    "channel {k}: {} coefficients for a {r}-dimensional noise",
                    ch.coeff.len()
                )));
            }
            if ch.offset + r > dim {
                return Err(Error::param(format!(
                    "channel {k} writes past the {dim}-dimensional state"
                )));
            }
        }
        Ok(Self { f, dim, channels })
    }

    /// Window on which every channel's noise is defined.
    pub fn noise_window(&self) -> (f64, f64) {
        self.channels.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), ch| {
            (a.max(ch.noise.path.t_start()), b.min(ch.noise.path.t_end()))
        })
    }

    /// The same system driven by the shifted noises `θ_s ω`.
    pub fn shifted(&self, s: f64) -> Result<Self> {
        let mut out = self.clone();
        for ch in &mut out.channels {
            ch.noise.path = ch.noise.path.shift(s)?;
        }
        Ok(out)
    }
}

fn snap_to(nodes: &[f64], t: f64) -> Option<f64> {
    let i = nodes.partition_point(|&x| x < t);
    let tol = 1e-12 * t.abs().max(1.0);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|j| nodes.get(j).copied())
        .find(|&x| (x - t).abs() <= tol)
}

/// Grid nodes merged with extra event times (inside the grid) in order.
fn merge_events(grid: &SimulationGrid, mut events: Vec<f64>) -> Vec<f64> {
    let nodes: Vec<f64> = grid.nodes().collect();
    events.retain(|&t| t > grid.t_start && t < grid.t_end);
    events.retain(|&t| snap_to(&nodes, t).is_none());
    events.extend_from_slice(&nodes);
    events.sort_by(f64::total_cmp);
    events.dedup();
    events
}

fn substeps(stiffness: Option<f64>, h: f64) -> usize {
    // the slack keeps cells whose width rounds just above a multiple of
    // STABLE_STEP from picking up an extra substep
    match stiffness {
        Some(k) => ((k * h / STABLE_STEP) * (1.0 - 1e-9)).ceil().max(1.0) as usize,
        None => 1,
    }
}

fn guard(t: f64, y: &[f64]) -> Result<()> {
    let n = norm(y);
    if !(n <= DIVERGENCE_GUARD) {
        return Err(Error::Divergence { time: t, norm: n });
    }
    Ok(())
}

/// Euler–Maruyama on the nodes `grid ∪ {noise jump times}`. Noise jumps are
/// applied at their exact times; between nodes the noise enters through its
/// (piecewise-affine) path increments.
pub fn integrate_additive(spec: &AdditiveSdeSpec, grid: &SimulationGrid, y0: &[f64]) -> Result<CadlagPath> {
    let d = spec.dim;
    if y0.len() != d {
        return Err(Error::param(format!("initial state has length {}, expected {d}", y0.len())));
    }
    let (lo, hi) = spec.noise_window();
    let tol = 1e-12 * grid.t_start.abs().max(grid.t_end.abs()).max(1.0);
    if grid.t_start < lo - tol || grid.t_end > hi + tol {
        return Err(Error::domain(format!(
            "noise on [{lo}, {hi}] does not cover the grid [{}, {}]",
            grid.t_start, grid.t_end
        )));
    }
    let events = spec
        .channels
        .iter()
        .flat_map(|ch| ch.noise.path.jump_times())
        .collect();
    let nodes = merge_events(grid, events);

    let mut b = PathBuilder::with_capacity(d, nodes.len());
    let mut y = y0.to_vec();
    let mut fy = vec![0.0; d];
    let mut left = vec![0.0; d];
    let mut inc: Vec<Vec<f64>> = spec.channels.iter().map(|c| vec![0.0; c.noise.dim()]).collect();
    let mut start: Vec<Vec<f64>> = inc.clone();
    let mut end: Vec<Vec<f64>> = inc.clone();
    let mut tmp: Vec<Vec<f64>> = inc.clone();
    guard(nodes[0], &y)?;
    b.push(nodes[0], &y);
    for w in nodes.windows(2) {
        let (a, t1) = (w[0], w[1]);
        let h = t1 - a;
        let n = substeps(spec.f.stiffness(), h);
        let hs = h / n as f64;
        // per channel: is the noise affine on (a, t1)? then split evenly
        let mut affine = Vec::with_capacity(spec.channels.len());
        for (k, ch) in spec.channels.iter().enumerate() {
            let p = &ch.noise.path;
            p.eval_into(a, &mut start[k]);
            p.left_limit_into(t1, &mut end[k]);
            let (ilo, ihi) = p.interior_knots(a, t1);
            affine.push(ilo == ihi);
        }
        for j in 0..n {
            spec.f.eval_into(&y, &mut fy);
            for (yi, fi) in y.iter_mut().zip(&fy) {
                *yi += fi * hs;
            }
            for (k, ch) in spec.channels.iter().enumerate() {
                if affine[k] {
                    for (o, (e, s)) in inc[k].iter_mut().zip(end[k].iter().zip(&start[k])) {
                        *o = (e - s) / n as f64;
                    }
                } else {
                    let p = &ch.noise.path;
                    let s1 = if j + 1 == n { t1 } else { a + hs * (j + 1) as f64 };
                    p.left_limit_into(s1, &mut tmp[k]);
                    for (o, (e, s)) in inc[k].iter_mut().zip(tmp[k].iter().zip(&start[k])) {
                        *o = e - s;
                    }
                    start[k].copy_from_slice(&tmp[k]);
                }
                for (i, (c, dl)) in ch.coeff.iter().zip(&inc[k]).enumerate() {
                    y[ch.offset + i] += c * dl;
                }
            }
        }
        guard(t1, &y)?;
        left.copy_from_slice(&y);
        let mut jumped = false;
        for ch in &spec.channels {
            let p = &ch.noise.path;
            if let crate::path::Locus::Knot(i) = p.locate(t1) {
                if p.is_jump_knot(i) {
                    for (c, (k, s)) in ch.coeff.iter().zip(p.jump_size(i).iter().enumerate()) {
                        y[ch.offset + k] += c * s;
                    }
                    jumped = true;
                }
            }
        }
        if jumped {
            guard(t1, &y)?;
            b.push_jump(t1, &left, &y);
        } else {
            b.push(t1, &y);
        }
    }
    b.build()
}

/// `(y, x) ↦ coefficient` for a jump of mark `x` hitting state `y`.
pub type JumpCoeff = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `y ↦ σ(y)`, a `d × r` matrix in row-major order.
pub type DiffusionFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// `dY = b(Y-) dt + σ(Y-) dB + ∫_{|x|<c} F(Y-, x) Ñ(dt,dx) + ∫_{|x|≥c} G(Y-, x) N(dt,dx)`
/// with `B`, `N` the Gaussian and jump parts of `triplet`.
#[derive(Clone)]
pub struct GeneralSdeSpec {
    pub b: Drift,
    pub sigma: Option<DiffusionFn>,
    pub small_jump: Option<JumpCoeff>,
    pub large_jump: Option<JumpCoeff>,
    pub cutoff: f64,
    pub triplet: GeneratingTriplet,
}

/// A realised driving noise for the general integrator, kept as raw
/// channel increments so coefficients can act on them separately.
pub fn general_noise(triplet: &GeneratingTriplet, grid: SimulationGrid, seed: u64) -> LevyIncrements {
    LevyIncrements::sample(triplet, grid, seed, Side::Forward)
}

pub fn integrate_general(spec: &GeneralSdeSpec, grid: &SimulationGrid, y0: &[f64], seed: u64) -> Result<CadlagPath> {
    let noise = general_noise(&spec.triplet, *grid, seed);
    integrate_general_with(spec, &noise, y0)
}

/// As [`integrate_general`], on explicitly supplied increments.
pub fn integrate_general_with(spec: &GeneralSdeSpec, noise: &LevyIncrements, y0: &[f64]) -> Result<CadlagPath> {
    let d = y0.len();
    let r = spec.triplet.dim();
    let grid = noise.grid;
    if !(spec.cutoff > 0.0) {
        return Err(Error::param(format!("jump cutoff must be positive, got {}", spec.cutoff)));
    }
    if noise.dim != r {
        return Err(Error::param("noise increments do not match the triplet dimension"));
    }
    if !spec.b.accepts(d) {
        return Err(Error::param(format!("drift `{}` does not act on dimension {d}", spec.b.name())));
    }
    let compensator = match spec.triplet.jump_measure() {
        JumpMeasure::AlphaStable { .. } => {
            if spec.small_jump.is_some() {
                return Err(Error::Capability(
                    "the compensated small-jump channel needs a finite-activity jump measure".into(),
                ));
            }
            if spec.large_jump.is_none() {
                return Err(Error::Capability(
                    "stable increments are routed through the large-jump coefficient, which is missing".into(),
                ));
            }
            None
        }
        JumpMeasure::CompoundPoisson { rate, jumps } if spec.small_jump.is_some() => {
            if r != 1 {
                return Err(Error::Capability(
                    "small-jump compensation is only available for scalar jump marks".into(),
                ));
            }
            Some((*rate, jumps.clone()))
        }
        _ => None,
    };
    let h_grid = grid.step();
    let events = noise.jumps.iter().map(|j| j.time).collect();
    let nodes = merge_events(&grid, events);
    let mut b = PathBuilder::with_capacity(d, nodes.len());
    let mut y = y0.to_vec();
    let mut left = vec![0.0; d];
    let mut by = vec![0.0; d];
    let mut sig = vec![0.0; d * r];
    let mut jy = vec![0.0; d];
    let mut db = vec![0.0; r];
    let mut dx = vec![0.0; r];
    let mut next_jump = 0;
    guard(nodes[0], &y)?;
    b.push(nodes[0], &y);
    for w in nodes.windows(2) {
        let (a, t1) = (w[0], w[1]);
        let h = t1 - a;
        // cell of the grid containing (a, t1)
        let cell = (((a + 0.5 * h - grid.t_start) / h_grid).floor() as usize).min(grid.cells() - 1);
        let frac = h / h_grid;
        for i in 0..r {
            db[i] = noise.gaussian[cell * r + i] * frac;
        }
        spec.b.eval_into(&y, &mut by);
        let mut step = vec![0.0; d];
        for i in 0..d {
            step[i] = by[i] * h;
        }
        if let Some(s) = &spec.sigma {
            s(&y, &mut sig);
            for i in 0..d {
                for k in 0..r {
                    step[i] += sig[i * r + k] * db[k];
                }
            }
        }
        if let Some((rate, law)) = &compensator {
            let f = spec.small_jump.as_ref().expect("checked above");
            for i in 0..d {
                let e = law.truncated_expectation(spec.cutoff, |x| {
                    let mut out = vec![0.0; d];
                    f(&y, &[x], &mut out);
                    out[i]
                });
                step[i] -= rate * e * h;
            }
        }
        if !noise.stable.is_empty() {
            let g = spec.large_jump.as_ref().expect("checked above");
            for i in 0..r {
                dx[i] = noise.stable[cell * r + i] * frac;
            }
            g(&y, &dx, &mut jy);
            for i in 0..d {
                step[i] += jy[i];
            }
        }
        for (yi, s) in y.iter_mut().zip(&step) {
            *yi += s;
        }
        guard(t1, &y)?;
        left.copy_from_slice(&y);
        let mut jumped = false;
        while next_jump < noise.jumps.len() && noise.jumps[next_jump].time <= t1 + 1e-12 * t1.abs().max(1.0) {
            let mark = &noise.jumps[next_jump].mark;
            next_jump += 1;
            let coeff = if norm(mark) >= spec.cutoff {
                spec.large_jump.as_ref()
            } else {
                spec.small_jump.as_ref()
            };
            if let Some(c) = coeff {
                // coefficients see the pre-jump state
                c(&left, mark, &mut jy);
                for (yi, j) in y.iter_mut().zip(&jy) {
                    *yi += j;
                }
                jumped = true;
            }
        }
        if jumped && y != left {
            guard(t1, &y)?;
            b.push_jump(t1, &left, &y);
        } else {
            b.push(t1, &y);
        }
    }
    b.build()
}

/// Result of probing `⟨x₁-x₂, f(x₁)-f(x₂)⟩ ≤ -l |x₁-x₂|²` by sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityEstimate {
    pub l_hat: f64,
    pub sample_count: usize,
    pub domain_radius: f64,
    pub violated: bool,
}

fn sample_ball<R: Rng>(rng: &mut R, d: usize, radius: f64, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = norm(out);
        if n > 0.0 {
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / d as f64) / n;
            out.iter_mut().for_each(|v| *v *= r);
            return;
        }
    }
}

/// Smallest observed `-⟨Δx, Δf⟩ / |Δx|²` over random pairs in the ball of
/// radius `domain_radius`. Half the pairs are independent, half are close
/// neighbours, which probes the local (Jacobian) constant.
pub fn estimate_dissipativity(
    f: &Drift,
    dim: usize,
    domain_radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DissipativityEstimate> {
    if n_samples < 2 {
        return Err(Error::param("need at least two samples"));
    }
    if !(domain_radius > 0.0) {
        return Err(Error::param("domain radius must be positive"));
    }
    if !f.accepts(dim) {
        return Err(Error::param(format!("drift `{}` does not act on dimension {dim}", f.name())));
    }
    let mut rng = seed::stream(seed, Side::Forward, Channel::Sampling);
    let (mut x1, mut x2, mut dir) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let (mut f1, mut f2) = (vec![0.0; dim], vec![0.0; dim]);
    let mut l_hat = f64::INFINITY;
    let mut count = 0;
    while count < n_samples {
        sample_ball(&mut rng, dim, domain_radius, &mut x1);
        if count % 2 == 0 {
            sample_ball(&mut rng, dim, domain_radius, &mut x2);
        } else {
            sample_ball(&mut rng, dim, 1e-3 * domain_radius, &mut dir);
            for i in 0..dim {
                x2[i] = x1[i] + dir[i];
            }
        }
        let diff2: f64 = x1.iter().zip(&x2).map(|(a, b)| (a - b) * (a - b)).sum();
        if diff2.sqrt() < 1e-12 {
            continue;
        }
        f.eval_into(&x1, &mut f1);
        f.eval_into(&x2, &mut f2);
        let inner: f64 = (0..dim).map(|i| (x1[i] - x2[i]) * (f1[i] - f2[i])).sum();
        l_hat = l_hat.min(-inner / diff2);
        count += 1;
    }
    Ok(DissipativityEstimate {
        l_hat,
        sample_count: count,
        domain_radius,
        violated: l_hat <= 0.0,
    })
}

/// Outcome of the linear-growth probe.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheck {
    pub bounded: bool,
    pub worst_ratio: f64,
    /// Worst ratio per probe radius, smallest radius first.
    pub per_radius: Vec<(f64, f64)>,
}

/// Probes `sup (|b(y)|² + ‖a(y,y)‖) / (1+|y|)²` on balls of radius
/// `domain_radius / 2^k`, `k = 10..0`; `sigma_sq(y)` is `‖a(y,y)‖`.
/// Growth by a factor ≥ 1.5 across any doubling flags the bound as broken.
pub fn check_linear_growth(
    b: &Drift,
    sigma_sq: impl Fn(&[f64]) -> f64,
    dim: usize,
    domain_radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GrowthCheck> {
    if !(domain_radius > 0.0) || n_samples == 0 {
        return Err(Error::param("need a positive radius and at least one sample"));
    }
    let mut rng = seed::stream(seed, Side::Forward, Channel::Sampling);
    let mut y = vec![0.0; dim];
    let mut by = vec![0.0; dim];
    let mut per_radius = Vec::new();
    for k in (0..=10).rev() {
        let r = domain_radius / f64::powi(2.0, k);
        let mut worst: f64 = 0.0;
        for s in 0..n_samples {
            sample_ball(&mut rng, dim, r, &mut y);
            if s % 2 == 0 {
                // push every other sample onto the sphere
                let n = norm(&y);
                if n > 0.0 {
                    y.iter_mut().for_each(|v| *v *= r / n);
                }
            }
            b.eval_into(&y, &mut by);
            let bb: f64 = by.iter().map(|v| v * v).sum();
            let ratio = (bb + sigma_sq(&y)) / (1.0 + norm(&y)).powi(2);
            worst = worst.max(ratio);
        }
        per_radius.push((r, worst));
    }
    let bounded = per_radius
        .windows(2)
        .all(|w| w[1].1 <= 1.5 * w[0].1 || w[1].1 == 0.0);
    let worst_ratio = per_radius.iter().fold(0.0f64, |m, p| m.max(p.1));
    Ok(GrowthCheck {
        bounded,
        worst_ratio,
        per_radius,
    })
}
