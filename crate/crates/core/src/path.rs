//! Càdlàg sample paths on a bounded window.
//!
//! A path is a strictly increasing list of knot times. Each knot stores the
//! right-continuous value and the left limit; the two differ exactly at jump
//! knots. Between consecutive knots the path is affine, running from the
//! value at the earlier knot to the left limit at the later one.
//!
//! Shifted paths share the underlying knot table and only record a time
//! origin and a value offset, so `shift(shift(x, a), b)` and
//! `shift(x, a + b)` evaluate identically bit for bit.

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct KnotTable {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    left: Vec<f64>,
    jumps: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CadlagPath {
    table: Arc<KnotTable>,
    origin: f64,
    offset: Option<Vec<f64>>,
}

/// Where a time falls relative to the knot table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Locus {
    /// Exactly on knot `i` (after snapping).
    Knot(usize),
    /// Strictly inside the segment `(t_i, t_{i+1})`.
    Segment(usize),
}

const SNAP: f64 = 1e-12;

impl KnotTable {
    fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.dim == 0 {
            return Err(Error::param("path dimension must be at least 1"));
        }
        if n < 2 {
            return Err(Error::param("a path needs at least two knots"));
        }
        if self.values.len() != n * self.dim || self.left.len() != n * self.dim {
            return Err(Error::param("knot value arrays have the wrong length"));
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("knot times must be finite"));
        }
        if self.values.iter().chain(&self.left).any(|v| !v.is_finite()) {
            return Err(Error::param("knot values must be finite"));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("knot times must be strictly increasing"));
        }
        let d = self.dim;
        if self.values[..d] != self.left[..d] {
            return Err(Error::param("a path cannot jump at its first knot"));
        }
        Ok(())
    }

    fn locate(&self, t: f64) -> Locus {
        let times = &self.times;
        let i = times.partition_point(|&k| k <= t);
        // i = number of knots <= t
        let tol = SNAP * t.abs().max(1.0);
        if i < times.len() && times[i] - t <= tol {
            return Locus::Knot(i);
        }
        if i == 0 {
            return Locus::Knot(0);
        }
        if t - times[i - 1] <= tol || i == times.len() {
            Locus::Knot(i - 1)
        } else {
            Locus::Segment(i - 1)
        }
    }
}

/// Incremental construction of a path from knots in time order.
#[derive(Debug, Clone)]
pub struct PathBuilder {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    left: Vec<f64>,
}

impl PathBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            values: Vec::new(),
            left: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, knots: usize) -> Self {
        Self {
            dim,
            times: Vec::with_capacity(knots),
            values: Vec::with_capacity(knots * dim),
            left: Vec::with_capacity(knots * dim),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Continuity knot: left limit equals value.
    pub fn push(&mut self, t: f64, value: &[f64]) -> &mut Self {
        self.push_jump(t, value, value)
    }

    pub fn push_jump(&mut self, t: f64, left: &[f64], value: &[f64]) -> &mut Self {
        debug_assert_eq!(left.len(), self.dim);
        debug_assert_eq!(value.len(), self.dim);
        self.times.push(t);
        self.values.extend_from_slice(value);
        self.left.extend_from_slice(left);
        self
    }

    pub fn build(self) -> Result<CadlagPath> {
        let d = self.dim;
        let jumps = (0..self.times.len())
            .filter(|&i| self.values[i * d..(i + 1) * d] != self.left[i * d..(i + 1) * d])
            .collect();
        let table = KnotTable {
            dim: d,
            times: self.times,
            values: self.values,
            left: self.left,
            jumps,
        };
        table.validate()?;
        Ok(CadlagPath {
            table: Arc::new(table),
            origin: 0.0,
            offset: None,
        })
    }
}

impl CadlagPath {
    /// Continuous piecewise-affine path through scalar samples.
    pub fn from_scalar_samples(times: &[f64], values: &[f64]) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::param("times and values differ in length"));
        }
        let mut b = PathBuilder::with_capacity(1, times.len());
        for (&t, &v) in times.iter().zip(values) {
            b.push(t, &[v]);
        }
        b.build()
    }

    /// Piecewise-constant scalar path: `base` on the left, then a jump of
    /// `size` at each `(time, size)` pair. Jumps must lie strictly inside
    /// `(t_start, t_end)`.
    pub fn step_function(t_start: f64, t_end: f64, base: f64, jumps: &[(f64, f64)]) -> Result<Self> {
        let mut sorted = jumps.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut b = PathBuilder::with_capacity(1, sorted.len() + 2);
        b.push(t_start, &[base]);
        let mut level = base;
        for &(t, h) in &sorted {
            if !(t > t_start && t < t_end) {
                return Err(Error::param(format!("jump time {t} not inside the window")));
            }
            b.push_jump(t, &[level], &[level + h]);
            level += h;
        }
        b.push(t_end, &[level]);
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    pub fn t_start(&self) -> f64 {
        self.table.times[0] - self.origin
    }

    pub fn t_end(&self) -> f64 {
        self.table.times[self.table.times.len() - 1] - self.origin
    }

    pub fn knot_count(&self) -> usize {
        self.table.times.len()
    }

    pub fn knot_time(&self, i: usize) -> f64 {
        self.table.times[i] - self.origin
    }

    pub fn knot_times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.table.times.iter().map(move |t| t - self.origin)
    }

    fn write_adjusted(&self, raw: &[f64], out: &mut [f64]) {
        match &self.offset {
            None => out.copy_from_slice(raw),
            Some(off) => {
                for ((o, r), c) in out.iter_mut().zip(raw).zip(off) {
                    *o = r - c;
                }
            }
        }
    }

    /// Right-continuous value stored at knot `i`.
    pub fn knot_value_into(&self, i: usize, out: &mut [f64]) {
        let d = self.table.dim;
        self.write_adjusted(&self.table.values[i * d..(i + 1) * d], out);
    }

    /// Left limit stored at knot `i`.
    pub fn knot_left_into(&self, i: usize, out: &mut [f64]) {
        let d = self.table.dim;
        self.write_adjusted(&self.table.left[i * d..(i + 1) * d], out);
    }

    pub fn knot_value(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.knot_value_into(i, &mut v);
        v
    }

    pub fn knot_left(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.knot_left_into(i, &mut v);
        v
    }

    /// Scalar shortcut for component 0 of knot `i`.
    pub fn knot_value1(&self, i: usize) -> f64 {
        let raw = self.table.values[i * self.table.dim];
        match &self.offset {
            None => raw,
            Some(off) => raw - off[0],
        }
    }

    pub fn knot_left1(&self, i: usize) -> f64 {
        let raw = self.table.left[i * self.table.dim];
        match &self.offset {
            None => raw,
            Some(off) => raw - off[0],
        }
    }

    pub fn is_jump_knot(&self, i: usize) -> bool {
        self.table.jumps.binary_search(&i).is_ok()
    }

    /// Knot indices at which the path jumps.
    pub fn jump_indices(&self) -> &[usize] {
        &self.table.jumps
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.table.jumps.iter().map(|&i| self.knot_time(i)).collect()
    }

    /// `x(τ) - x(τ-)` at jump knot `i`.
    pub fn jump_size(&self, i: usize) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|c| self.table.values[i * d + c] - self.table.left[i * d + c])
            .collect()
    }

    /// True when every segment is flat, i.e. the path only moves by jumps.
    pub fn is_piecewise_constant(&self) -> bool {
        let d = self.table.dim;
        (1..self.knot_count()).all(|i| {
            self.table.left[i * d..(i + 1) * d] == self.table.values[(i - 1) * d..i * d]
        })
    }

    pub(crate) fn locate(&self, t: f64) -> Locus {
        self.table.locate(t + self.origin)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let tol = SNAP * t.abs().max(1.0);
        if t.is_nan() || t < self.t_start() - tol || t > self.t_end() + tol {
            return Err(Error::domain(format!(
                "t = {t} outside [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        Ok(())
    }

    /// Evaluation without domain checks; `t` is clamped to the domain.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match self.locate(t) {
            Locus::Knot(i) => self.knot_value_into(i, out),
            Locus::Segment(i) => self.interpolate_into(i, t, out),
        }
    }

    pub fn left_limit_into(&self, t: f64, out: &mut [f64]) {
        match self.locate(t) {
            Locus::Knot(i) => self.knot_left_into(i, out),
            Locus::Segment(i) => self.interpolate_into(i, t, out),
        }
    }

    fn interpolate_into(&self, i: usize, t: f64, out: &mut [f64]) {
        let tb = &self.table;
        let d = tb.dim;
        let (t0, t1) = (tb.times[i], tb.times[i + 1]);
        let w = ((t + self.origin) - t0) / (t1 - t0);
        for c in 0..d {
            let a = tb.values[i * d + c];
            let b = tb.left[(i + 1) * d + c];
            out[c] = a + (b - a) * w;
        }
        if let Some(off) = &self.offset {
            for (o, c) in out.iter_mut().zip(off) {
                *o -= c;
            }
        }
    }

    /// Scalar evaluation of component 0; clamps to the domain.
    pub fn eval1(&self, t: f64) -> f64 {
        let mut v = [0.0; 1];
        if self.dim() == 1 {
            self.eval_into(t, &mut v);
            v[0]
        } else {
            let mut w = vec![0.0; self.dim()];
            self.eval_into(t, &mut w);
            w[0]
        }
    }

    pub fn left_limit1(&self, t: f64) -> f64 {
        let mut w = vec![0.0; self.dim()];
        self.left_limit_into(t, &mut w);
        w[0]
    }

    /// `x(t)`, the right-continuous value.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        let mut v = vec![0.0; self.dim()];
        self.eval_into(t, &mut v);
        Ok(v)
    }

    /// `x(t-)`; undefined at the left end of the domain.
    pub fn left_limit(&self, t: f64) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        if self.locate(t) == Locus::Knot(0) {
            return Err(Error::domain(format!(
                "no left limit at the start of the domain t = {t}"
            )));
        }
        let mut v = vec![0.0; self.dim()];
        self.left_limit_into(t, &mut v);
        Ok(v)
    }

    /// The noise shift `s ↦ x(t_shift + s) - x(t_shift)` on the full
    /// shifted domain.
    pub fn shift(&self, t_shift: f64) -> Result<Self> {
        self.check_domain(t_shift)?;
        let origin = self.origin + t_shift;
        let base = CadlagPath {
            table: Arc::clone(&self.table),
            origin: 0.0,
            offset: None,
        };
        let mut off = vec![0.0; self.dim()];
        base.eval_into(origin, &mut off);
        Ok(CadlagPath {
            table: Arc::clone(&self.table),
            origin,
            offset: Some(off),
        })
    }

    /// Shift, then restrict to `[s_start, s_end]` in the shifted clock.
    pub fn shift_window(&self, t_shift: f64, s_start: f64, s_end: f64) -> Result<Self> {
        let shifted = self.shift(t_shift)?;
        shifted.restrict(s_start, s_end)
    }

    /// A fresh path equal to this one on `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::domain(format!("empty window [{a}, {b}]")));
        }
        self.check_domain(a)?;
        self.check_domain(b)?;
        let d = self.dim();
        let mut out = PathBuilder::new(d);
        let mut v = vec![0.0; d];
        let mut l = vec![0.0; d];
        self.eval_into(a, &mut v);
        out.push(a, &v);
        let (lo, hi) = self.interior_knots(a, b);
        for i in lo..hi {
            self.knot_left_into(i, &mut l);
            self.knot_value_into(i, &mut v);
            out.push_jump(self.knot_time(i), &l, &v);
        }
        self.left_limit_into(b, &mut l);
        self.eval_into(b, &mut v);
        out.push_jump(b, &l, &v);
        out.build()
    }

    /// Range of knot indices strictly inside `(a, b)` after snapping.
    pub(crate) fn interior_knots(&self, a: f64, b: f64) -> (usize, usize) {
        let lo = match self.locate(a) {
            Locus::Knot(i) | Locus::Segment(i) => i + 1,
        };
        let hi = match self.locate(b) {
            Locus::Knot(i) => i,
            Locus::Segment(i) => i + 1,
        };
        (lo, hi.max(lo))
    }

    /// Every value the path attains on `[a, b)` is a convex combination of
    /// these points (plus `x(b)` when `closed`).
    fn extreme_points(&self, a: f64, b: f64, closed: bool) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut pts = Vec::new();
        let mut v = vec![0.0; d];
        self.eval_into(a, &mut v);
        pts.push(v.clone());
        let (lo, hi) = self.interior_knots(a, b);
        for i in lo..hi {
            pts.push(self.knot_left(i));
            if self.is_jump_knot(i) {
                pts.push(self.knot_value(i));
            }
        }
        if b > a {
            self.left_limit_into(b, &mut v);
            pts.push(v.clone());
        }
        if closed {
            self.eval_into(b, &mut v);
            pts.push(v);
        }
        pts
    }

    fn diameter(pts: &[Vec<f64>]) -> f64 {
        if pts.is_empty() {
            return 0.0;
        }
        if pts[0].len() == 1 {
            let (lo, hi) = pts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[0]), hi.max(p[0]))
                });
            return hi - lo;
        }
        let mut best: f64 = 0.0;
        for (k, p) in pts.iter().enumerate() {
            for q in &pts[k + 1..] {
                best = best.max(norm_diff(p, q));
            }
        }
        best
    }

    /// `w_x(S) = sup |x(s) - x(t)|` over `s, t ∈ S = [a, b]`.
    pub fn oscillation(&self, a: f64, b: f64) -> Result<f64> {
        if !(a <= b) {
            return Err(Error::domain(format!("empty interval [{a}, {b}]")));
        }
        self.check_domain(a)?;
        self.check_domain(b)?;
        Ok(Self::diameter(&self.extreme_points(a, b, true)))
    }

    /// Oscillation over the half-open interval `[a, b)`.
    pub fn oscillation_half_open(&self, a: f64, b: f64) -> f64 {
        Self::diameter(&self.extreme_points(a, b, false))
    }

    /// `sup_{t ∈ [a, b]} |x(t)|`, including left limits.
    pub fn sup_norm(&self, a: f64, b: f64) -> Result<f64> {
        if !(a <= b) {
            return Err(Error::domain(format!("empty interval [{a}, {b}]")));
        }
        self.check_domain(a)?;
        self.check_domain(b)?;
        Ok(self
            .extreme_points(a, b, true)
            .iter()
            .map(|p| norm(p))
            .fold(0.0, f64::max))
    }

    /// Sup-norm over the whole domain.
    pub fn sup_norm_all(&self) -> f64 {
        let d = self.dim();
        let mut v = vec![0.0; d];
        let mut best: f64 = 0.0;
        for i in 0..self.knot_count() {
            self.knot_value_into(i, &mut v);
            best = best.max(norm(&v));
            self.knot_left_into(i, &mut v);
            best = best.max(norm(&v));
        }
        best
    }

    /// Càdlàg modulus `w'_x(δ)`: smallest achievable maximum oscillation over
    /// the cells `[t_{i-1}, t_i)` of a partition whose cells are longer than
    /// `δ`.
    ///
    /// Partition points are placed at the largest jumps first (each kept more
    /// than `δ` away from points already placed and from the window ends),
    /// and the gaps are cut into as many equal cells longer than `δ` as fit.
    /// Exact for piecewise-affine paths whose jumps are more than `δ` apart.
    pub fn cadlag_modulus(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
        }
        let (t0, t1) = (self.t_start(), self.t_end());
        if t1 - t0 <= delta {
            return Ok(self.oscillation_half_open(t0, t1));
        }
        let mut jumps: Vec<(f64, f64)> = self
            .jump_indices()
            .iter()
            .map(|&i| (self.knot_time(i), norm(&self.jump_size(i))))
            .collect();
        jumps.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        let mut points = vec![t0, t1];
        for (t, _) in jumps {
            if points.iter().all(|&p| (p - t).abs() > delta) {
                points.push(t);
            }
        }
        points.sort_by(f64::total_cmp);
        let mut worst: f64 = 0.0;
        for w in points.windows(2) {
            let gap = w[1] - w[0];
            let mut k = (gap / delta).ceil() as usize;
            k = k.saturating_sub(1).max(1);
            while k > 1 && gap / k as f64 <= delta {
                k -= 1;
            }
            for j in 0..k {
                let a = w[0] + gap * (j as f64 / k as f64);
                let b = if j + 1 == k {
                    w[1]
                } else {
                    w[0] + gap * ((j + 1) as f64 / k as f64)
                };
                worst = worst.max(self.oscillation_half_open(a, b));
            }
        }
        Ok(worst)
    }

    /// Pointwise map of values at every knot (both sides of jumps).
    pub fn map_values(&self, mut f: impl FnMut(f64, &[f64], &mut [f64])) -> Result<Self> {
        let d = self.dim();
        let mut b = PathBuilder::with_capacity(d, self.knot_count());
        let mut v = vec![0.0; d];
        let mut l = vec![0.0; d];
        let mut fv = vec![0.0; d];
        let mut fl = vec![0.0; d];
        for i in 0..self.knot_count() {
            let t = self.knot_time(i);
            self.knot_value_into(i, &mut v);
            self.knot_left_into(i, &mut l);
            f(t, &v, &mut fv);
            f(t, &l, &mut fl);
            b.push_jump(t, &fl, &fv);
        }
        b.build()
    }

    /// Affine reparametrisation of the time axis, `t ↦ a + b t` with `b > 0`.
    pub fn retime(&self, a: f64, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::param("time rescaling factor must be positive"));
        }
        let d = self.dim();
        let mut out = PathBuilder::with_capacity(d, self.knot_count());
        let mut v = vec![0.0; d];
        let mut l = vec![0.0; d];
        for i in 0..self.knot_count() {
            self.knot_value_into(i, &mut v);
            self.knot_left_into(i, &mut l);
            out.push_jump(a + b * self.knot_time(i), &l, &v);
        }
        out.build()
    }

    /// One scalar component as its own path.
    pub fn component(&self, c: usize) -> Result<Self> {
        if c >= self.dim() {
            return Err(Error::param(format!("component {c} out of range")));
        }
        let mut b = PathBuilder::with_capacity(1, self.knot_count());
        let mut v = vec![0.0; self.dim()];
        let mut l = vec![0.0; self.dim()];
        for i in 0..self.knot_count() {
            self.knot_value_into(i, &mut v);
            self.knot_left_into(i, &mut l);
            b.push_jump(self.knot_time(i), &[l[c]], &[v[c]]);
        }
        b.build()
    }
}

impl PartialEq for CadlagPath {
    fn eq(&self, other: &Self) -> bool {
        if self.knot_count() != other.knot_count() || self.dim() != other.dim() {
            return false;
        }
        (0..self.knot_count()).all(|i| {
            self.knot_time(i) == other.knot_time(i)
                && self.knot_value(i) == other.knot_value(i)
                && self.knot_left(i) == other.knot_left(i)
        })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub(crate) fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        (a[0] - b[0]).abs()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}
