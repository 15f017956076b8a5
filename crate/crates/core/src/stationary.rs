//! Stationary orbits: Ornstein–Uhlenbeck convolutions against a noise path,
//! pullback limits of dissipative systems, and the closed form of the
//! two-component affine example.

use crate::error::{Error, Result};
use crate::grid::SimulationGrid;
use crate::integrator::{estimate_dissipativity, integrate_additive, AdditiveSdeSpec};
use crate::levy::NoiseRealization;
use crate::path::{norm, norm_diff, CadlagPath, PathBuilder};

/// A realised stationary solution on an observation window.
#[derive(Debug, Clone)]
pub struct StationaryOrbit {
    pub path: CadlagPath,
    pub lambda: f64,
    /// How far into the past the defining integral or flow reaches.
    pub pullback_horizon: f64,
    /// Estimate of the error caused by that truncation.
    pub truncation_bound: f64,
}

/// `(1 - e^{-x}) / x`, continuous at 0.
fn q(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Default past truncation for a convolution at rate `rho`.
pub fn default_truncation(rho: f64) -> f64 {
    (40.0 / rho).max(40.0)
}

/// `∫_{t-T}^{t} e^{-ρ(t-s)} dL_s` with its tail estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OuConvolution {
    pub value: Vec<f64>,
    /// Bound on `|∫_{-∞}^{t-T} e^{-ρ(t-s)} dL_s|`, from the linear growth of
    /// `L` observed on the available past.
    pub tail_bound: f64,
}

/// Exact for piecewise-affine `L`: equal to the integration-by-parts form
/// `L_t - e^{-ρT} L_{t-T} - ρ ∫ e^{-ρ(t-s)} L_s ds` with the Riemann integral
/// evaluated in closed form on every affine segment.
pub fn ou_convolution(rho: f64, path: &CadlagPath, t: f64, t_trunc: f64) -> Result<OuConvolution> {
    if !(rho > 0.0) {
        return Err(Error::param(format!("rate must be positive, got {rho}")));
    }
    if !(t_trunc > 0.0) {
        return Err(Error::param(format!("truncation must be positive, got {t_trunc}")));
    }
    let a = t - t_trunc;
    let tol = 1e-12 * a.abs().max(1.0);
    if path.t_start() > a + tol || t > path.t_end() + tol {
        return Err(Error::domain(format!(
            "noise on [{}, {}] does not cover [{a}, {t}]",
            path.t_start(),
            path.t_end()
        )));
    }
    let d = path.dim();
    let mut value = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut l = vec![0.0; d];
    let add = |value: &mut Vec<f64>, s0: f64, s1: f64, v0: &[f64], w1: &[f64]| {
        let e1 = (-rho * (t - s1)).exp();
        let f = e1 * q(rho * (s1 - s0));
        for c in 0..d {
            value[c] += (w1[c] - v0[c]) * f;
        }
    };
    let (lo, hi) = path.interior_knots(a, t);
    let mut s0 = a;
    path.eval_into(a, &mut v);
    for i in lo..hi {
        let s1 = path.knot_time(i);
        path.knot_left_into(i, &mut l);
        add(&mut value, s0, s1, &v, &l);
        path.knot_value_into(i, &mut v);
        let e = (-rho * (t - s1)).exp();
        for c in 0..d {
            value[c] += (v[c] - l[c]) * e;
        }
        s0 = s1;
    }
    path.left_limit_into(t, &mut l);
    add(&mut value, s0, t, &v, &l);
    path.eval_into(t, &mut v);
    for c in 0..d {
        value[c] += v[c] - l[c];
    }
    Ok(OuConvolution {
        value,
        tail_bound: tail_bound(rho, path, t, t_trunc),
    })
}

/// `K e^{-ρT}(2 + 2T + 1/ρ)` where `|L_s - L_t| ≤ K(1 + |t-s|)` on the
/// available past; integrating the tail by parts gives this bound.
fn tail_bound(rho: f64, path: &CadlagPath, t: f64, t_trunc: f64) -> f64 {
    let d = path.dim();
    let mut lt = vec![0.0; d];
    let mut v = vec![0.0; d];
    path.eval_into(t, &mut lt);
    let (lo, hi) = path.interior_knots(path.t_start(), t);
    let mut k: f64 = 0.0;
    let mut probe = |s: f64, v: &[f64]| k = k.max(norm_diff(v, &lt) / (1.0 + (t - s)));
    path.eval_into(path.t_start(), &mut v);
    probe(path.t_start(), &v);
    for i in lo..hi {
        let s = path.knot_time(i);
        path.knot_value_into(i, &mut v);
        probe(s, &v);
        path.knot_left_into(i, &mut v);
        probe(s, &v);
    }
    k * (-rho * t_trunc).exp() * (2.0 + 2.0 * t_trunc + 1.0 / rho)
}

/// Exact recursion of `dX = -ρX dt + coeff ⊙ dL` from `X(t0) = x0` across
/// every grid node and noise knot in `(t0, grid.t_end]`.
fn ou_recursion(path: &CadlagPath, rho: f64, coeff: &[f64], x0: &[f64], grid: &SimulationGrid) -> CadlagPath {
    let d = path.dim();
    let mut times: Vec<f64> = grid.nodes().collect();
    let (lo, hi) = path.interior_knots(grid.t_start, grid.t_end);
    times.extend((lo..hi).map(|i| path.knot_time(i)));
    times.sort_by(f64::total_cmp);
    // grid nodes come first among near-equal times, so they are the ones kept
    times.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1.0));
    let mut b = PathBuilder::with_capacity(d, times.len());
    let mut x = x0.to_vec();
    let mut left = vec![0.0; d];
    let (mut la, mut lb, mut lr) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    b.push(times[0], &x);
    for w in times.windows(2) {
        let (a, t1) = (w[0], w[1]);
        let h = t1 - a;
        let decay = (-rho * h).exp();
        let qq = q(rho * h);
        path.eval_into(a, &mut la);
        path.left_limit_into(t1, &mut lb);
        path.eval_into(t1, &mut lr);
        for c in 0..d {
            left[c] = decay * x[c] + coeff[c] * (lb[c] - la[c]) * qq;
            x[c] = left[c] + coeff[c] * (lr[c] - lb[c]);
        }
        if left != x {
            b.push_jump(t1, &left, &x);
        } else {
            b.push(t1, &x);
        }
    }
    b.build().expect("times are strictly increasing")
}

/// `X̄(t) = ∫_{-∞}^t e^{-λ(t-s)} α ⊙ dL_s` on the grid, truncated at
/// `T = max(40/λ, 40)`. When the noise reaches `2T` into the past the
/// starting value is recomputed there and the two must agree to `10⁻⁶`.
pub fn langevin_stationary(lambda: f64, alpha: &[f64], noise: &NoiseRealization, grid: &SimulationGrid) -> Result<StationaryOrbit> {
    if !(lambda > 0.0) {
        return Err(Error::param(format!("lambda must be positive, got {lambda}")));
    }
    let path = &noise.path;
    if alpha.len() != path.dim() {
        return Err(Error::param("alpha must have one entry per noise component"));
    }
    let t_trunc = default_truncation(lambda);
    let conv = ou_convolution(lambda, path, grid.t_start, t_trunc)?;
    let x0: Vec<f64> = conv.value.iter().zip(alpha).map(|(v, a)| a * v).collect();
    let amax = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut bound = amax * conv.tail_bound;
    let tol = 1e-12 * (grid.t_start - 2.0 * t_trunc).abs().max(1.0);
    if path.t_start() <= grid.t_start - 2.0 * t_trunc + tol {
        let wide = ou_convolution(lambda, path, grid.t_start, 2.0 * t_trunc)?;
        let x1: Vec<f64> = wide.value.iter().zip(alpha).map(|(v, a)| a * v).collect();
        let diff = norm_diff(&x0, &x1);
        if diff > 1e-6 * norm(&x1).max(1.0) {
            return Err(Error::NonConvergence(format!(
                "stationary value moved by {diff:e} when the truncation doubled"
            )));
        }
        bound = bound.max(diff);
    }
    Ok(StationaryOrbit {
        path: ou_recursion(path, lambda, alpha, &x0, grid),
        lambda,
        pullback_horizon: t_trunc,
        truncation_bound: bound,
    })
}

/// `sup_{t ∈ [T1, T2]} |∫_{T1}^t e^{-λ(t-s)} dL_s|` for each `λ`.
pub fn lemma1_iii_check(noise: &NoiseRealization, lambdas: &[f64], t1: f64, t2: f64) -> Result<Vec<(f64, f64)>> {
    let path = &noise.path;
    if !(t1 < t2) || path.t_start() > t1 || path.t_end() < t2 {
        return Err(Error::domain(format!(
            "[{t1}, {t2}] is not inside the noise window [{}, {}]",
            path.t_start(),
            path.t_end()
        )));
    }
    let d = path.dim();
    let dt = noise.grid.dt.min(t2 - t1);
    let grid = SimulationGrid::new(t1, t2, dt)?;
    let ones = vec![1.0; d];
    lambdas
        .iter()
        .map(|&lam| {
            if !(lam > 0.0) {
                return Err(Error::param(format!("lambda must be positive, got {lam}")));
            }
            let x = ou_recursion(path, lam, &ones, &vec![0.0; d], &grid);
            Ok((lam, x.sup_norm_all()))
        })
        .collect()
}

/// Increasing pullback horizons suited to a contraction rate `l`.
pub fn default_horizons(l: f64) -> Vec<f64> {
    let base = (20.0 / l).max(20.0);
    vec![base, 2.0 * base]
}

/// Pullback agreement required between the last two horizons.
pub const PULLBACK_TOL: f64 = 1e-6;

/// Integrate from `y0` at `grid.t_start - h` for each horizon `h` and keep
/// the longest run. Horizons are rounded up to whole steps so the observed
/// window always sits on the grid's own nodes.
pub fn pullback_stationary(
    system: &AdditiveSdeSpec,
    grid: &SimulationGrid,
    horizons: &[f64],
    y0: Option<&[f64]>,
) -> Result<StationaryOrbit> {
    if horizons.len() < 2 || horizons.windows(2).any(|w| !(w[1] > w[0])) || !(horizons[0] > 0.0) {
        return Err(Error::param("need at least two positive, increasing horizons"));
    }
    let d = system.dim;
    let zero = vec![0.0; d];
    let y0 = y0.unwrap_or(&zero);
    let est = estimate_dissipativity(&system.f, d, 10.0 * (1.0 + norm(y0)), 2000, 0)?;
    if est.violated {
        return Err(Error::param(format!(
            "drift `{}` is not dissipative (estimated l = {})",
            system.f.name(),
            est.l_hat
        )));
    }
    let mut runs: Vec<(f64, CadlagPath)> = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let steps = (h / grid.dt).ceil() as usize;
        let past = SimulationGrid::new(grid.t_start - steps as f64 * grid.dt, grid.t_start, grid.dt)?;
        let warm = integrate_additive(system, &past, y0)?;
        let start = warm.eval(grid.t_start)?;
        runs.push((steps as f64 * grid.dt, integrate_additive(system, grid, &start)?));
    }
    let diffs: Vec<f64> = runs.windows(2).map(|w| sup_knot_diff(&w[0].1, &w[1].1)).collect();
    let last = *diffs.last().expect("two horizons");
    let tol = PULLBACK_TOL + 1e-3 * grid.dt;
    if !(last <= tol) {
        return Err(Error::NonConvergence(format!(
            "pullback runs differ by {last:e} between the last two horizons"
        )));
    }
    let (horizon, path) = runs.pop().expect("nonempty");
    Ok(StationaryOrbit {
        path,
        lambda: 0.0,
        pullback_horizon: horizon,
        truncation_bound: last,
    })
}

/// Largest difference between two paths over the knots of the first
/// (values and left limits).
pub(crate) fn sup_knot_diff(x: &CadlagPath, y: &CadlagPath) -> f64 {
    let d = x.dim();
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    let mut m: f64 = 0.0;
    for i in 0..x.knot_count() {
        let t = x.knot_time(i);
        x.knot_value_into(i, &mut a);
        y.eval_into(t, &mut b);
        m = m.max(norm_diff(&a, &b));
        if i > 0 {
            x.knot_left_into(i, &mut a);
            y.left_limit_into(t, &mut b);
            m = m.max(norm_diff(&a, &b));
        }
    }
    m
}

/// Noises of the affine example written so the drifts lose their constants:
/// `L³_t = L¹_t - t`, `L⁴_t = L²_t - 1.5 t`. Then
/// `dX = -X dt + λ(Y-X) dt + dL³`, `dY = -Y dt + λ(X-Y) dt + 2 dL⁴`.
pub fn recenter_example(noise1: &NoiseRealization, noise2: &NoiseRealization) -> Result<(NoiseRealization, NoiseRealization)> {
    let shift = |n: &NoiseRealization, rate: f64| -> Result<NoiseRealization> {
        let mut out = n.clone();
        out.path = n.path.map_values(|t, v, o| {
            for (oi, vi) in o.iter_mut().zip(v) {
                *oi = vi - rate * t;
            }
        })?;
        Ok(out)
    };
    Ok((shift(noise1, 1.0)?, shift(noise2, 1.5)?))
}

/// Inverse of [`recenter_example`].
pub fn uncenter_example(l3: &NoiseRealization, l4: &NoiseRealization) -> Result<(NoiseRealization, NoiseRealization)> {
    let shift = |n: &NoiseRealization, rate: f64| -> Result<NoiseRealization> {
        let mut out = n.clone();
        out.path = n.path.map_values(|t, v, o| {
            for (oi, vi) in o.iter_mut().zip(v) {
                *oi = vi + rate * t;
            }
        })?;
        Ok(out)
    };
    Ok((shift(l3, 1.0)?, shift(l4, 1.5)?))
}

fn ou_unit(rho: f64, noise: &NoiseRealization, grid: &SimulationGrid) -> Result<StationaryOrbit> {
    langevin_stationary(rho, &vec![1.0; noise.dim()], noise, grid)
}

fn combine(a: &CadlagPath, b: &CadlagPath, c: &CadlagPath, e: &CadlagPath, w: [f64; 4]) -> Result<CadlagPath> {
    // all four share knots: grid nodes plus the jump times of both noises
    let mut times: Vec<f64> = a.knot_times().chain(c.knot_times()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.abs().max(1.0));
    let mut out = PathBuilder::with_capacity(1, times.len());
    let val = |t: f64, left: bool| {
        let f = |p: &CadlagPath| if left { p.left_limit1(t) } else { p.eval1(t) };
        w[0] * f(a) + w[1] * f(b) + w[2] * f(c) + w[3] * f(e)
    };
    for (k, &t) in times.iter().enumerate() {
        let r = val(t, false);
        let l = if k == 0 { r } else { val(t, true) };
        out.push_jump(t, &[l], &[r]);
    }
    out.build()
}

/// Stationary pair of the affine example in recentered noises `L³, L⁴`:
/// with `ρ = 2λ+1` and `O_ρ(L) = ∫ e^{-ρ(t-s)} dL_s`,
/// `X̄ = ½[O₁(L³) + O_ρ(L³)] + O₁(L⁴) - O_ρ(L⁴)` and
/// `Ȳ = ½[O₁(L³) - O_ρ(L³)] + O₁(L⁴) + O_ρ(L⁴)`,
/// which is the cosh/sinh kernel form split into exponentials.
pub fn example_closed_form(
    lambda: f64,
    l3: &NoiseRealization,
    l4: &NoiseRealization,
    grid: &SimulationGrid,
) -> Result<(StationaryOrbit, StationaryOrbit)> {
    if !(lambda > 0.0) {
        return Err(Error::param(format!("lambda must be positive, got {lambda}")));
    }
    if l3.dim() != 1 || l4.dim() != 1 {
        return Err(Error::param("the example is scalar"));
    }
    let rho = 2.0 * lambda + 1.0;
    let a1 = ou_unit(1.0, l3, grid)?;
    let ar = ou_unit(rho, l3, grid)?;
    let b1 = ou_unit(1.0, l4, grid)?;
    let br = ou_unit(rho, l4, grid)?;
    let bound = 0.5 * (a1.truncation_bound + ar.truncation_bound) + b1.truncation_bound + br.truncation_bound;
    let horizon = a1.pullback_horizon.max(ar.pullback_horizon);
    let x = combine(&a1.path, &ar.path, &b1.path, &br.path, [0.5, 0.5, 1.0, -1.0])?;
    let y = combine(&a1.path, &ar.path, &b1.path, &br.path, [0.5, -0.5, 1.0, 1.0])?;
    let orbit = |path| StationaryOrbit {
        path,
        lambda,
        pullback_horizon: horizon,
        truncation_bound: bound,
    };
    Ok((orbit(x), orbit(y)))
}

/// The `λ → ∞` limit `Z^∞ = ∫ e^{-(t-s)} (½ dL³ + dL⁴)`.
pub fn example_limit(l3: &NoiseRealization, l4: &NoiseRealization, grid: &SimulationGrid) -> Result<StationaryOrbit> {
    let a = ou_unit(1.0, l3, grid)?;
    let b = ou_unit(1.0, l4, grid)?;
    let path = combine(&a.path, &a.path, &b.path, &b.path, [0.5, 0.0, 1.0, 0.0])?;
    Ok(StationaryOrbit {
        path,
        lambda: f64::INFINITY,
        pullback_horizon: a.pullback_horizon,
        truncation_bound: 0.5 * a.truncation_bound + b.truncation_bound,
    })
}
