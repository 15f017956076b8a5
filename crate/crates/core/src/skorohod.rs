//! Skorohod distances between càdlàg paths.
//!
//! `d°_m(x, y)` is the infimum over increasing homeomorphisms `λ` of
//! `[-m, m]` of `max(sup |log slope λ|, sup |x(t) - y(λ(t))|)`. The estimate
//! here is a min-max dynamic program over piecewise-affine time changes whose
//! breakpoints are drawn from the two paths' jump times and a uniform
//! lattice. Every alignment the program considers is a genuine time change,
//! so the returned value is always attained by the returned witness.

use crate::error::{Error, Result};
use crate::path::{norm_diff, CadlagPath, PathBuilder};

/// Piecewise-affine, strictly increasing map of `[-m, m]` onto itself,
/// given by its breakpoints `(s, λ(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChange {
    points: Vec<(f64, f64)>,
}

impl TimeChange {
    pub fn new(points: Vec<(f64, f64)>, m: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::param("a time change needs at least two breakpoints"));
        }
        let (first, last) = (points[0], points[points.len() - 1]);
        if first != (-m, -m) || last != (m, m) {
            return Err(Error::param(format!(
                "time change must fix -m and m (m = {m}), got {first:?} .. {last:?}"
            )));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
            return Err(Error::param("time change must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn identity(m: f64) -> Self {
        Self {
            points: vec![(-m, -m), (m, m)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn m(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    pub fn apply(&self, t: f64) -> f64 {
        let p = &self.points;
        let i = p.partition_point(|q| q.0 <= t).clamp(1, p.len() - 1);
        let (s0, u0) = p[i - 1];
        let (s1, u1) = p[i];
        if t == s1 {
            return u1;
        }
        u0 + (t - s0) * (u1 - u0) / (s1 - s0)
    }

    /// `sup |log((λ(t) - λ(s)) / (t - s))|`, which for a piecewise-affine
    /// map is the largest absolute log-slope of its pieces.
    pub fn max_log_slope(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| log_slope(w[0].0, w[1].0, w[0].1, w[1].1))
            .fold(0.0, f64::max)
    }

    /// The inverse map, as a time change of the same window.
    pub fn inverse(&self) -> Self {
        Self {
            points: self.points.iter().map(|&(s, u)| (u, s)).collect(),
        }
    }
}

fn log_slope(s0: f64, s1: f64, u0: f64, u1: f64) -> f64 {
    if s0 == u0 && s1 == u1 {
        return 0.0;
    }
    ((u1 - u0) / (s1 - s0)).ln().abs()
}

/// A distance estimate with the time change that attains it.
#[derive(Debug, Clone)]
pub struct MetricResult {
    pub value: f64,
    pub witness: TimeChange,
    /// Bound on how far `value` may sit above the true infimum: zero where
    /// the search is exhaustive, otherwise the last refinement improvement.
    pub certified_gap: f64,
}

const COINCIDE: f64 = 1e-12;

/// Supremum of `|x(t) - y(λ(t))|` over `t ∈ [s0, s1)` and the left limit at
/// `s1` (plus `t = s1` itself when `closed`), with `λ` affine from
/// `[s0, s1]` onto `[u0, u1]`. Stops early once the running value reaches
/// `cutoff`.
fn segment_value_sup(
    x: &CadlagPath,
    y: &CadlagPath,
    seg: (f64, f64, f64, f64),
    closed: bool,
    cutoff: f64,
    buf: &mut Scratch,
) -> f64 {
    let (s0, s1, u0, u1) = seg;
    let identity = s0 == u0 && s1 == u1;
    let fwd = |t: f64| {
        if identity || t == s0 {
            if t == s0 {
                u0
            } else {
                t
            }
        } else if t == s1 {
            u1
        } else {
            u0 + (t - s0) * (u1 - u0) / (s1 - s0)
        }
    };
    let inv = |u: f64| {
        if identity {
            u
        } else {
            s0 + (u - u0) * (s1 - s0) / (u1 - u0)
        }
    };
    let Scratch { a, b, c, e } = buf;
    let mut best: f64;
    x.eval_into(s0, a);
    y.eval_into(u0, b);
    best = norm_diff(a, b);
    if best >= cutoff {
        return best;
    }
    let (xlo, xhi) = x.interior_knots(s0, s1);
    let (ylo, yhi) = y.interior_knots(u0, u1);
    let (mut i, mut j) = (xlo, ylo);
    while i < xhi || j < yhi {
        let tx = if i < xhi { x.knot_time(i) } else { f64::INFINITY };
        let ty = if j < yhi { inv(y.knot_time(j)) } else { f64::INFINITY };
        let scale = COINCIDE * tx.abs().min(ty.abs()).max(1.0);
        if (tx - ty).abs() <= scale {
            x.knot_left_into(i, a);
            y.knot_left_into(j, b);
            x.knot_value_into(i, c);
            y.knot_value_into(j, e);
            i += 1;
            j += 1;
        } else if tx < ty {
            let u = fwd(tx);
            x.knot_left_into(i, a);
            x.knot_value_into(i, c);
            y.left_limit_into(u, b);
            y.eval_into(u, e);
            i += 1;
        } else {
            x.left_limit_into(ty, a);
            x.eval_into(ty, c);
            y.knot_left_into(j, b);
            y.knot_value_into(j, e);
            j += 1;
        }
        best = best.max(norm_diff(a, b)).max(norm_diff(c, e));
        if best >= cutoff {
            return best;
        }
    }
    x.left_limit_into(s1, a);
    y.left_limit_into(u1, b);
    best = best.max(norm_diff(a, b));
    if closed {
        x.eval_into(s1, a);
        y.eval_into(u1, b);
        best = best.max(norm_diff(a, b));
    }
    best
}

struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    e: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Self {
            a: vec![0.0; d],
            b: vec![0.0; d],
            c: vec![0.0; d],
            e: vec![0.0; d],
        }
    }
}

fn check_pair(x: &CadlagPath, y: &CadlagPath, m: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::param(format!("window half-width must be positive, got {m}")));
    }
    if x.dim() != y.dim() {
        return Err(Error::domain(format!(
            "paths have different dimensions {} and {}",
            x.dim(),
            y.dim()
        )));
    }
    let tol = 1e-12 * m.max(1.0);
    for (name, p) in [("x", x), ("y", y)] {
        if p.t_start() > -m + tol || p.t_end() < m - tol {
            return Err(Error::domain(format!(
                "{name} is defined on [{}, {}], which does not cover [-{m}, {m}]",
                p.t_start(),
                p.t_end()
            )));
        }
    }
    Ok(())
}

/// `max(sup |log slope λ|, sup_{t ∈ [-m, m]} |x(t) - y(λ(t))|)`.
pub fn time_change_cost(x: &CadlagPath, y: &CadlagPath, lam: &TimeChange, m: f64) -> Result<f64> {
    check_pair(x, y, m)?;
    if lam.m() != m || lam.points[0] != (-m, -m) {
        return Err(Error::param(format!(
            "time change is not onto [-{m}, {m}]"
        )));
    }
    let mut buf = Scratch::new(x.dim());
    let pts = &lam.points;
    let mut best = lam.max_log_slope();
    for (k, w) in pts.windows(2).enumerate() {
        let closed = k + 2 == pts.len();
        let seg = (w[0].0, w[1].0, w[0].1, w[1].1);
        best = best.max(segment_value_sup(x, y, seg, closed, f64::INFINITY, &mut buf));
    }
    Ok(best)
}

/// Jump times of `p` strictly inside `(-m, m)`, largest jumps first,
/// at most `limit` of them, returned in time order.
fn jump_anchors(p: &CadlagPath, m: f64, limit: usize) -> Vec<f64> {
    let tol = 1e-12 * m.max(1.0);
    let mut js: Vec<(f64, f64)> = p
        .jump_indices()
        .iter()
        .map(|&i| (p.knot_time(i), crate::path::norm(&p.jump_size(i))))
        .filter(|&(t, _)| t > -m + tol && t < m - tol)
        .collect();
    js.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    js.truncate(limit);
    let mut ts: Vec<f64> = js.into_iter().map(|(t, _)| t).collect();
    ts.sort_by(f64::total_cmp);
    ts
}

fn anchor_set(jumps: &[f64], m: f64, level: u32) -> Vec<f64> {
    let mut v = Vec::with_capacity(jumps.len() + (1usize << level) + 1);
    v.push(-m);
    v.extend_from_slice(jumps);
    if level > 0 {
        let n = 1usize << level;
        for k in 1..n {
            v.push(-m + 2.0 * m * (k as f64 / n as f64));
        }
    }
    v.push(m);
    v.sort_by(f64::total_cmp);
    let tol = 1e-12 * m.max(1.0);
    v.dedup_by(|a, b| (*a - *b).abs() <= tol);
    // keep the exact endpoints after dedup
    let last = v.len() - 1;
    v[0] = -m;
    v[last] = m;
    v
}

/// Min-max program over monotone anchor alignments. Returns the best cost
/// and the anchor sequence. `band` limits how many anchors a single piece
/// may skip on either axis; the final piece into `(m, m)` is always allowed.
fn alignment_dp(
    x: &CadlagPath,
    y: &CadlagPath,
    xs: &[f64],
    ys: &[f64],
    band: Option<usize>,
) -> (f64, Vec<(f64, f64)>) {
    let (nx, ny) = (xs.len(), ys.len());
    let idx = |i: usize, j: usize| i * ny + j;
    let mut cost = vec![f64::INFINITY; nx * ny];
    let mut prev = vec![usize::MAX; nx * ny];
    cost[0] = 0.0;
    let mut buf = Scratch::new(x.dim());
    let (ex, ey) = (nx - 1, ny - 1);
    let mut targets: Vec<(usize, usize)> = (1..ex)
        .flat_map(|i| (1..ey).map(move |j| (i, j)))
        .collect();
    targets.push((ex, ey));
    for (ti, tj) in targets {
        let is_end = ti == ex && tj == ey;
        let (ilo, jlo) = match band {
            Some(k) if !is_end => (ti.saturating_sub(k), tj.saturating_sub(k)),
            _ => (0, 0),
        };
        let mut best = f64::INFINITY;
        let mut arg = usize::MAX;
        for pi in ilo..ti {
            for pj in jlo..tj {
                if (pi == 0) != (pj == 0) {
                    continue;
                }
                let c0 = cost[idx(pi, pj)];
                if !(c0 < best) {
                    continue;
                }
                let seg = (xs[pi], xs[ti], ys[pj], ys[tj]);
                let slope = log_slope(seg.0, seg.1, seg.2, seg.3);
                let lower = c0.max(slope);
                if !(lower < best) {
                    continue;
                }
                let v = segment_value_sup(x, y, seg, is_end, best, &mut buf);
                let c = lower.max(v);
                if c < best {
                    best = c;
                    arg = idx(pi, pj);
                }
            }
        }
        cost[idx(ti, tj)] = best;
        prev[idx(ti, tj)] = arg;
    }
    let mut anchors = vec![(xs[ex], ys[ey])];
    let mut cur = idx(ex, ey);
    while cur != 0 {
        cur = prev[cur];
        anchors.push((xs[cur / ny], ys[cur % ny]));
    }
    anchors.reverse();
    (cost[idx(ex, ey)], anchors)
}

/// Jumps used as alignment anchors per path.
const MAX_JUMP_ANCHORS: usize = 16;
/// Finest uniform lattice is `2^MAX_LEVEL` cells.
const MAX_LEVEL: u32 = 4;
const REFINE_BAND: usize = 3;

fn piecewise_constant_on(p: &CadlagPath, m: f64) -> bool {
    let d = p.dim();
    let (lo, hi) = p.interior_knots(-m, m);
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    p.eval_into(-m, &mut a);
    for i in lo..hi {
        p.knot_left_into(i, &mut b);
        if a != b {
            return false;
        }
        p.knot_value_into(i, &mut a);
    }
    p.left_limit_into(m, &mut b);
    a == b
}

fn interior_jump_count(p: &CadlagPath, m: f64) -> usize {
    let tol = 1e-12 * m.max(1.0);
    p.jump_times().iter().filter(|&&t| t > -m + tol && t < m - tol).count()
}

/// Estimate of `d°_m(x, y)`.
///
/// The first pass aligns jump times only, with arbitrary skips; this is
/// exhaustive for piecewise-constant paths with at most `MAX_JUMP_ANCHORS`
/// jumps, and then `certified_gap = 0`. Otherwise a uniform lattice is
/// added and refined until successive estimates differ by less than `tol`.
pub fn skorohod_bounded(x: &CadlagPath, y: &CadlagPath, m: f64, tol: f64) -> Result<MetricResult> {
    if !(tol > 0.0) {
        return Err(Error::param(format!("tolerance must be positive, got {tol}")));
    }
    check_pair(x, y, m)?;
    let jx = jump_anchors(x, m, MAX_JUMP_ANCHORS);
    let jy = jump_anchors(y, m, MAX_JUMP_ANCHORS);
    let (mut best, mut anchors) = alignment_dp(x, y, &anchor_set(&jx, m, 0), &anchor_set(&jy, m, 0), None);
    let exhaustive = piecewise_constant_on(x, m)
        && piecewise_constant_on(y, m)
        && interior_jump_count(x, m) <= MAX_JUMP_ANCHORS
        && interior_jump_count(y, m) <= MAX_JUMP_ANCHORS;
    let mut gap = 0.0;
    if !exhaustive && best > 0.0 {
        gap = f64::INFINITY;
        for level in 1..=MAX_LEVEL {
            let xs = anchor_set(&jx, m, level);
            let ys = anchor_set(&jy, m, level);
            let (c, a) = alignment_dp(x, y, &xs, &ys, Some(REFINE_BAND));
            let improvement = (best - c).max(0.0);
            if c < best - 1e-12 {
                best = c;
                anchors = a;
            }
            gap = improvement;
            if improvement < tol {
                break;
            }
        }
    }
    let witness = TimeChange::new(anchors, m)?;
    let value = time_change_cost(x, y, &witness, m)?;
    Ok(MetricResult {
        value,
        witness,
        certified_gap: gap,
    })
}

/// Weight `g_m`: 1 on `|t| ≤ m-1`, falling linearly to 0 at `|t| = m`.
pub fn tent_weight(m: u32, t: f64) -> f64 {
    let m = m as f64;
    let a = t.abs();
    if a <= m - 1.0 {
        1.0
    } else if a <= m {
        m - a
    } else {
        0.0
    }
}

/// `g_m · x` restricted to `[-m, m]`, plus a bound on the interpolation
/// error from representing the (piecewise quadratic) product by affine
/// pieces.
pub fn weighted_path(x: &CadlagPath, m: u32, tol: f64) -> Result<(CadlagPath, f64)> {
    let mf = m as f64;
    let r = x.restrict(-mf, mf)?;
    let d = r.dim();
    let mut times: Vec<f64> = r.knot_times().collect();
    for t in [-(mf - 1.0), mf - 1.0] {
        if t > -mf && t < mf {
            times.push(t);
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut b = PathBuilder::with_capacity(d, times.len());
    let mut v = vec![0.0; d];
    let mut l = vec![0.0; d];
    let mut err: f64 = 0.0;
    let push = |b: &mut PathBuilder, t: f64, left: &[f64], val: &[f64]| {
        let g = tent_weight(m, t);
        let lw: Vec<f64> = left.iter().map(|z| z * g).collect();
        let vw: Vec<f64> = val.iter().map(|z| z * g).collect();
        b.push_jump(t, &lw, &vw);
    };
    for (k, &t) in times.iter().enumerate() {
        r.left_limit_into(t, &mut l);
        r.eval_into(t, &mut v);
        if k == 0 {
            l.copy_from_slice(&v);
        }
        push(&mut b, t, &l, &v);
        if k + 1 == times.len() {
            break;
        }
        let t1 = times[k + 1];
        if t.abs().max(t1.abs()) <= mf - 1.0 {
            continue;
        }
        // g is affine on this piece (breakpoints at ±(m-1) are knots), so the
        // product is quadratic with curvature 2·|g'|·|x'|
        let mut l1 = vec![0.0; d];
        r.left_limit_into(t1, &mut l1);
        let slope = norm_diff(&l1, &v) / (t1 - t);
        if slope == 0.0 {
            continue;
        }
        let h = t1 - t;
        let pieces = ((slope * h * h / 4.0 / (0.1 * tol)).sqrt().ceil() as usize).clamp(1, 64);
        err = err.max(slope * (h / pieces as f64).powi(2) / 4.0);
        for p in 1..pieces {
            let s = t + h * (p as f64 / pieces as f64);
            r.eval_into(s, &mut v);
            push(&mut b, s, &v.clone(), &v);
        }
        r.eval_into(t, &mut v);
    }
    Ok((b.build()?, err))
}

/// Truncated global metric `Σ_{m ≤ M} 2^{-m} (1 ∧ d°_m(g_m x, g_m y))`.
#[derive(Debug, Clone)]
pub struct GlobalMetric {
    pub value: f64,
    /// Tail `2^{-M}` plus the per-term gaps and weighting errors.
    pub uncertainty: f64,
    pub terms: Vec<MetricResult>,
}

pub fn skorohod_global(x: &CadlagPath, y: &CadlagPath, m_max: u32, tol: f64) -> Result<GlobalMetric> {
    if m_max < 1 {
        return Err(Error::param("M_max must be at least 1"));
    }
    check_pair(x, y, m_max as f64)?;
    let mut value = 0.0;
    let mut uncertainty = 0.5f64.powi(m_max as i32);
    let mut terms = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        let w = 0.5f64.powi(m as i32);
        let (xm, ex) = weighted_path(x, m, tol)?;
        let (ym, ey) = weighted_path(y, m, tol)?;
        let r = skorohod_bounded(&xm, &ym, m as f64, tol)?;
        value += w * r.value.min(1.0);
        uncertainty += w * (r.certified_gap + ex + ey);
        terms.push(r);
    }
    Ok(GlobalMetric {
        value,
        uncertainty,
        terms,
    })
}

/// Jumps per path the exhaustive oracle accepts.
pub const ORACLE_MAX_JUMPS: usize = 3;

/// Exact `d°_m` for piecewise-constant paths with few jumps: the minimum,
/// over every order-preserving partial matching of `x`-jumps to `y`-jumps,
/// of the cost of the affine interpolation through the matched pairs.
pub fn skorohod_oracle_small(x: &CadlagPath, y: &CadlagPath, m: f64) -> Result<f64> {
    check_pair(x, y, m)?;
    for (name, p) in [("x", x), ("y", y)] {
        if !piecewise_constant_on(p, m) {
            return Err(Error::OracleCapacity(format!("{name} is not piecewise constant")));
        }
        if interior_jump_count(p, m) > ORACLE_MAX_JUMPS {
            return Err(Error::OracleCapacity(format!(
                "{name} has more than {ORACLE_MAX_JUMPS} jumps"
            )));
        }
    }
    let tol = 1e-12 * m.max(1.0);
    let inside = |p: &CadlagPath| -> Vec<f64> {
        p.jump_times().into_iter().filter(|&t| t > -m + tol && t < m - tol).collect()
    };
    let (a, b) = (inside(x), inside(y));
    let mut best = f64::INFINITY;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    enumerate_matchings(&a, &b, 0, 0, &mut pairs, &mut |matched| {
        let mut pts = Vec::with_capacity(matched.len() + 2);
        pts.push((-m, -m));
        pts.extend_from_slice(matched);
        pts.push((m, m));
        let lam = TimeChange::new(pts, m).expect("matched jumps are increasing");
        let c = time_change_cost(x, y, &lam, m).expect("checked domain");
        if c < best {
            best = c;
        }
    });
    Ok(best)
}

fn enumerate_matchings(
    a: &[f64],
    b: &[f64],
    i: usize,
    j: usize,
    pairs: &mut Vec<(f64, f64)>,
    visit: &mut dyn FnMut(&[(f64, f64)]),
) {
    if i == a.len() {
        visit(pairs);
        return;
    }
    // leave a[i] unmatched
    enumerate_matchings(a, b, i + 1, j, pairs, visit);
    for k in j..b.len() {
        pairs.push((a[i], b[k]));
        enumerate_matchings(a, b, i + 1, k + 1, pairs, visit);
        pairs.pop();
    }
}
