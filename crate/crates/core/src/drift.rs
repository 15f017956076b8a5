//! Drift functions and the named registry the command-line tool draws from.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A drift `ℝᵈ → ℝᵈ`. Registry drifts act componentwise and accept any
/// dimension; custom drifts may fix one.
#[derive(Clone)]
pub struct Drift {
    name: String,
    dim: Option<usize>,
    /// Upper estimate of the Lipschitz constant near the states of interest;
    /// integrators use it to keep explicit steps stable.
    stiffness: Option<f64>,
    f: Arc<DriftFn>,
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Drift")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("stiffness", &self.stiffness)
            .finish()
    }
}

impl Drift {
    pub fn from_fn(
        name: impl Into<String>,
        dim: Option<usize>,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            stiffness: None,
            f: Arc::new(f),
        }
    }

    pub fn with_stiffness(mut self, k: f64) -> Self {
        self.stiffness = Some(k);
        self
    }

    fn componentwise(name: String, stiffness: Option<f64>, h: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name,
            dim: None,
            stiffness,
            f: Arc::new(move |y: &[f64], out: &mut [f64]| {
                for (o, &v) in out.iter_mut().zip(y) {
                    *o = h(v);
                }
            }),
        }
    }

    /// `y ↦ -a·y`.
    pub fn linear(a: f64) -> Self {
        Self::componentwise(format!("linear({a})"), Some(a.abs()), move |y| -a * y)
    }

    /// `y ↦ -(a·y + b)`.
    pub fn affine(a: f64, b: f64) -> Self {
        Self::componentwise(format!("affine({a},{b})"), Some(a.abs()), move |y| -(a * y + b))
    }

    /// `y ↦ -(y³ + a·y)`.
    pub fn cubic(a: f64) -> Self {
        Self::componentwise(format!("cubic({a})"), None, move |y| -(y * y * y + a * y))
    }

    /// `y ↦ Σ_k c_k y^k`, coefficients from the constant term up.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let stiffness = (coeffs.len() <= 2).then(|| coeffs.get(1).copied().unwrap_or(0.0).abs());
        let name = format!(
            "polynomial({})",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        );
        Self::componentwise(name, stiffness, move |y| coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c))
    }

    /// `½(f + g)`.
    pub fn average(f: &Drift, g: &Drift) -> Result<Self> {
        let dim = match (f.dim, g.dim) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::param(format!("cannot average drifts of dimension {a} and {b}")))
            }
            (a, b) => a.or(b),
        };
        let (ff, gg) = (f.f.clone(), g.f.clone());
        let stiffness = match (f.stiffness, g.stiffness) {
            (Some(a), Some(b)) => Some(0.5 * (a + b)),
            _ => None,
        };
        Ok(Self {
            name: format!("avg[{},{}]", f.name, g.name),
            dim,
            stiffness,
            f: Arc::new(move |y: &[f64], out: &mut [f64]| {
                let mut tmp = vec![0.0; y.len()];
                ff(y, out);
                gg(y, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o = 0.5 * (*o + t);
                }
            }),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn stiffness(&self) -> Option<f64> {
        self.stiffness
    }

    pub fn accepts(&self, d: usize) -> bool {
        self.dim.is_none_or(|k| k == d)
    }

    #[inline]
    pub fn eval_into(&self, y: &[f64], out: &mut [f64]) {
        (self.f)(y, out)
    }

    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.eval_into(y, &mut out);
        out
    }
}

/// Parameter schema of one registry entry.
pub struct RegistryEntry {
    pub name: &'static str,
    pub params: &'static str,
    pub description: &'static str,
}

pub const DRIFTS: &[RegistryEntry] = &[
    RegistryEntry {
        name: "linear",
        params: "a = 1.0",
        description: "y -> -a*y",
    },
    RegistryEntry {
        name: "affine",
        params: "a = 1.0, b = 0.0",
        description: "y -> -(a*y + b)",
    },
    RegistryEntry {
        name: "cubic",
        params: "a = 1.0",
        description: "y -> -(y^3 + a*y)",
    },
    RegistryEntry {
        name: "polynomial",
        params: "coeffs = [c0, c1, ...]",
        description: "y -> c0 + c1*y + c2*y^2 + ...",
    },
];

pub const NOISE_FAMILIES: &[RegistryEntry] = &[
    RegistryEntry {
        name: "none",
        params: "gamma = 0.0",
        description: "deterministic drift gamma*t",
    },
    RegistryEntry {
        name: "brownian",
        params: "gamma = 0.0, variance = 1.0",
        description: "gamma*t + sqrt(variance)*B_t",
    },
    RegistryEntry {
        name: "compound_poisson",
        params: "gamma = 0.0, variance = 0.0, rate, jumps = constant|rademacher|uniform|normal|exponential (+ law parameters)",
        description: "drift and Brownian part plus finitely many jumps per unit time",
    },
    RegistryEntry {
        name: "stable",
        params: "gamma = 0.0, variance = 0.0, alpha in (1,2), scale = 1.0, skew = 0.0",
        description: "alpha-stable motion, exact increments per grid cell",
    },
];

/// Named drift pairs `(f, g)` with noise intensities `(alpha, beta)`.
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: &[Preset] = &[Preset {
    name: "paper-example",
    description: "f = affine(1,1), g = affine(1,3), alpha = 1, beta = 2",
}];

/// The drifts and intensities of a named preset.
pub fn preset(name: &str) -> Result<(Drift, Drift, f64, f64)> {
    match name {
        "paper-example" => Ok((Drift::affine(1.0, 1.0), Drift::affine(1.0, 3.0), 1.0, 2.0)),
        _ => Err(Error::param(format!("unknown preset `{name}`"))),
    }
}

/// Look up a registry drift by name with a parameter accessor.
pub fn lookup(name: &str, scalar: impl Fn(&str, f64) -> Result<f64>, coeffs: Option<Vec<f64>>) -> Result<Drift> {
    Ok(match name {
        "linear" => Drift::linear(scalar("a", 1.0)?),
        "affine" => Drift::affine(scalar("a", 1.0)?, scalar("b", 0.0)?),
        "cubic" => Drift::cubic(scalar("a", 1.0)?),
        "polynomial" => match coeffs {
            Some(c) if !c.is_empty() => Drift::polynomial(c),
            _ => return Err(Error::param("polynomial drift needs a nonempty `coeffs` list")),
        },
        _ => return Err(Error::param(format!("unknown drift `{name}`"))),
    })
}

/// Text listing of drifts, noise families and presets.
pub fn registry_text() -> String {
    let mut s = String::from("drifts:\n");
    for e in DRIFTS {
        s += &format!("  {:<12} {:<28} {}\n", e.name, e.params, e.description);
    }
    s += "noise families:\n";
    for e in NOISE_FAMILIES {
        s += &format!("  {:<17} {}\n      {}\n", e.name, e.description, e.params);
    }
    s += "presets:\n";
    for p in PRESETS {
        s += &format!("  {:<15} {}\n", p.name, p.description);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_shapes() {
        assert_eq!(Drift::linear(2.0).eval(&[3.0, -1.0]), vec![-6.0, 2.0]);
        assert_eq!(Drift::affine(1.0, 3.0).eval(&[1.0]), vec![-4.0]);
        assert_eq!(Drift::cubic(1.0).eval(&[2.0]), vec![-10.0]);
        assert_eq!(Drift::polynomial(vec![1.0, 0.0, 2.0]).eval(&[3.0]), vec![19.0]);
    }

    #[test]
    fn averaging() {
        let z = Drift::average(&Drift::affine(1.0, 1.0), &Drift::affine(1.0, 3.0)).unwrap();
        assert_eq!(z.eval(&[0.5]), vec![-2.5]);
        let z = Drift::average(&Drift::linear(1.0), &Drift::linear(2.0)).unwrap();
        assert_eq!(z.eval(&[2.0]), vec![-3.0]);
    }

    #[test]
    fn lookup_and_listing() {
        let get = |k: &str, d: f64| Ok(if k == "b" { 2.0 } else { d });
        let f = lookup("affine", get, None).unwrap();
        assert_eq!(f.eval(&[1.0]), vec![-3.0]);
        assert!(lookup("quartic", get, None).is_err());
        assert!(lookup("polynomial", get, None).is_err());
        let text = registry_text();
        for name in ["affine", "cubic", "linear", "paper-example"] {
            assert!(text.contains(name));
        }
    }
}
