use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time grid `t_start = t_0 < t_1 < ... < t_n = t_end`.
///
/// Node `k` is always computed from `k` directly, never by accumulating
/// steps, so long grids carry no drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    n: usize,
}

impl SimulationGrid {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Grid(format!("dt must be positive, got {dt}")));
        }
        if !t_start.is_finite() || !t_end.is_finite() || t_end <= t_start {
            return Err(Error::Grid(format!(
                "need t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        let n = ((t_end - t_start) / dt).round();
        if n < 1.0 {
            return Err(Error::Grid(format!(
                "window [{t_start}, {t_end}] shorter than one step {dt}"
            )));
        }
        Ok(Self {
            t_start,
            t_end,
            dt,
            n: n as usize,
        })
    }

    /// Number of cells; there are `cells() + 1` nodes.
    pub fn cells(&self) -> usize {
        self.n
    }

    /// Actual node spacing. Equals `dt` whenever the window is a whole
    /// number of steps.
    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n {
            self.t_end
        } else {
            self.t_start + (self.t_end - self.t_start) * (k as f64 / self.n as f64)
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n + 1).map(move |k| self.node(k))
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    /// The same spacing extended `past` time units further back, rounded so
    /// the old nodes remain nodes of the new grid.
    pub fn extend_back(&self, past: f64) -> Result<Self> {
        let h = self.step();
        let extra = (past / h).round().max(0.0);
        let t_start = self.t_start - extra * h;
        Ok(Self {
            t_start,
            t_end: self.t_end,
            dt: self.dt,
            n: self.n + extra as usize,
        })
    }
}
