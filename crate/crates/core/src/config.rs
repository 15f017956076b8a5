//! Experiment configuration: a small TOML subset of `key = value` lines under
//! `[section]` headers, validated into a resolved [`ExperimentConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drift::{self, Drift};
use crate::error::{Error, Result};
use crate::grid::SimulationGrid;
use crate::levy::{GeneratingTriplet, JumpDistribution, JumpMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Sample,
    Integrate,
    Stationary,
    Metric,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// `none`, `brownian`, `compound_poisson` or `stable`.
    pub family: String,
    #[serde(default)]
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jumps: Option<JumpDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skew: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    #[serde(default = "one")]
    pub coeff: f64,
    #[serde(default)]
    pub y0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    /// `langevin` (closed form for `dX = -λX dt + coeff dL`) or `pullback`
    /// (any registry drift `f`).
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "one")]
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub path_a: PathBuf,
    pub path_b: PathBuf,
    pub m: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// When set, the global metric summed over `m = 1..=m_max` is reported
    /// instead of the bounded one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub lambda_values: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_tol")]
    pub metric_tol: f64,
    #[serde(default)]
    pub same_noise: bool,
}

fn one() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-3
}
fn default_window() -> [f64; 2] {
    [0.0, 2.0]
}
fn default_dt() -> f64 {
    1e-3
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub output: PathBuf,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise2: Option<NoiseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<DriftConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<DriftConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StationaryConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl NoiseConfig {
    pub fn triplet(&self, field: &str) -> Result<GeneratingTriplet> {
        let err = |k: &str, msg: &str| Error::config(format!("{field}.{k}"), msg);
        let measure = match self.family.as_str() {
            "none" | "brownian" => JumpMeasure::None,
            "compound_poisson" => JumpMeasure::CompoundPoisson {
                rate: self.rate.ok_or_else(|| err("rate", "required for compound_poisson"))?,
                jumps: self.jumps.clone().ok_or_else(|| err("jumps", "required for compound_poisson"))?,
            },
            "stable" => JumpMeasure::AlphaStable {
                alpha: self.alpha.ok_or_else(|| err("alpha", "required for stable noise"))?,
                scale: self.scale.unwrap_or(1.0),
                skew: self.skew.unwrap_or(0.0),
            },
            other => return Err(err("family", &format!("unknown noise family `{other}`"))),
        };
        let default_var = if self.family == "brownian" { 1.0 } else { 0.0 };
        GeneratingTriplet::scalar(self.gamma, self.variance.unwrap_or(default_var), measure)
            .map_err(|e| err("family", &e.to_string()))
    }

    /// Fill family defaults so the manifest shows every value in effect.
    fn resolve(&mut self) {
        let brownian = self.family == "brownian";
        self.variance.get_or_insert(if brownian { 1.0 } else { 0.0 });
        if self.family == "stable" {
            self.scale.get_or_insert(1.0);
            self.skew.get_or_insert(0.0);
        }
    }
}

impl DriftConfig {
    pub fn drift(&self, field: &str) -> Result<Drift> {
        let get = |k: &str, d: f64| {
            Ok(match k {
                "a" => self.a.unwrap_or(d),
                "b" => self.b.unwrap_or(d),
                _ => d,
            })
        };
        drift::lookup(&self.name, get, self.coeffs.clone()).map_err(|e| Error::config(format!("{field}.name"), e.to_string()))
    }

    fn resolve(&mut self) {
        match self.name.as_str() {
            "linear" | "cubic" => {
                self.a.get_or_insert(1.0);
            }
            "affine" => {
                self.a.get_or_insert(1.0);
                self.b.get_or_insert(0.0);
            }
            _ => {}
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> Result<SimulationGrid> {
        SimulationGrid::new(self.t_start, self.t_end, self.dt).map_err(|e| Error::config("grid", e.to_string()))
    }
}

fn need<'a, T>(v: &'a Option<T>, field: &str, kind: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::config(field, format!("section [{field}] is required for kind = \"{kind}\"")))
}

impl ExperimentConfig {
    /// Parse from TOML text; syntax errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
        cfg.resolved()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// The config with every default written out, after validation.
    pub fn resolved(mut self) -> Result<Self> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "seed list must be nonempty"));
        }
        if let Some(n) = self.noise.as_mut() {
            n.resolve();
        }
        if let Some(n) = self.noise2.as_mut() {
            n.resolve();
        }
        if let Some(f) = self.f.as_mut() {
            f.resolve();
        }
        if let Some(g) = self.g.as_mut() {
            g.resolve();
        }
        let kind = format!("{:?}", self.kind).to_lowercase();
        match self.kind {
            Kind::Sample => {
                let g = need(&self.grid, "grid", &kind)?.grid()?;
                if g.t_start > 0.0 || g.t_end < 0.0 {
                    return Err(Error::config("grid", "a sampled window must contain t = 0"));
                }
                need(&self.noise, "noise", &kind)?.triplet("noise")?;
            }
            Kind::Integrate => {
                need(&self.grid, "grid", &kind)?.grid()?;
                need(&self.noise, "noise", &kind)?.triplet("noise")?;
                need(&self.f, "f", &kind)?.drift("f")?;
                self.integrate.get_or_insert(IntegrateConfig { coeff: 1.0, y0: 0.0 });
            }
            Kind::Stationary => {
                need(&self.grid, "grid", &kind)?.grid()?;
                need(&self.noise, "noise", &kind)?.triplet("noise")?;
                let st = need(&self.stationary, "stationary", &kind)?;
                match st.method.as_str() {
                    "langevin" => match st.lambda {
                        Some(l) if l > 0.0 && l.is_finite() => {}
                        _ => return Err(Error::config("stationary.lambda", "langevin needs a positive lambda")),
                    },
                    "pullback" => {
                        need(&self.f, "f", &kind)?.drift("f")?;
                    }
                    other => {
                        return Err(Error::config(
                            "stationary.method",
                            format!("unknown method `{other}` (langevin or pullback)"),
                        ))
                    }
                }
            }
            Kind::Metric => {
                let m = need(&self.metric, "metric", &kind)?;
                if !(m.m > 0.0 && m.m.is_finite()) {
                    return Err(Error::config("metric.m", "must be positive"));
                }
                if !(m.tol > 0.0) {
                    return Err(Error::config("metric.tol", "must be positive"));
                }
                if m.m_max == Some(0) {
                    return Err(Error::config("metric.m_max", "must be at least 1"));
                }
            }
            Kind::Sweep => self.resolve_sweep()?,
        }
        Ok(self)
    }

    fn resolve_sweep(&mut self) -> Result<()> {
        let sw = need(&self.sweep, "sweep", "sweep")?.clone();
        let l = &sw.lambda_values;
        if l.is_empty() {
            return Err(Error::config("lambda_values", "must list at least one coupling strength"));
        }
        if l.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::config("lambda_values", "coupling strengths must be positive and finite"));
        }
        if l.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("lambda_values", "must be strictly increasing"));
        }
        if !(sw.window[1] - sw.window[0] >= 2.0) {
            return Err(Error::config("sweep.window", "must span at least 2 time units"));
        }
        if !(sw.dt > 0.0) || !(sw.metric_tol > 0.0) {
            return Err(Error::config("sweep.dt", "dt and metric_tol must be positive"));
        }
        let mut sw = sw;
        if let Some(p) = &sw.preset {
            let (_, _, a, b) = drift::preset(p).map_err(|e| Error::config("sweep.preset", e.to_string()))?;
            let affine = |b: f64| DriftConfig {
                name: "affine".into(),
                a: Some(1.0),
                b: Some(b),
                coeffs: None,
            };
            // the only preset: f = affine(1,1), g = affine(1,3)
            self.f.get_or_insert_with(|| affine(1.0));
            self.g.get_or_insert_with(|| affine(3.0));
            sw.alpha.get_or_insert(a);
            sw.beta.get_or_insert(b);
        }
        need(&self.f, "f", "sweep")?.drift("f")?;
        need(&self.g, "g", "sweep")?.drift("g")?;
        sw.alpha.get_or_insert(1.0);
        sw.beta.get_or_insert(1.0);
        need(&self.noise, "noise", "sweep")?.triplet("noise")?;
        if self.noise2.is_none() && !sw.same_noise {
            self.noise2 = self.noise.clone();
        }
        if let Some(n) = &self.noise2 {
            n.triplet("noise2")?;
        }
        self.sweep = Some(sw);
        Ok(())
    }

    /// Resolved config as TOML, as recorded in the manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_sample() {
        let c = ExperimentConfig::parse(
            "kind = \"sample\"\noutput = \"out\"\n[grid]\nt_start = 0.0\nt_end = 1.0\ndt = 0.01\n[noise]\nfamily = \"none\"\ngamma = 2.5\n",
        )
        .unwrap();
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.noise.as_ref().unwrap().triplet("noise").unwrap().gamma(), &[2.5]);
        let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn descending_lambdas_name_the_field() {
        let text = "kind = \"sweep\"\noutput = \"o\"\n[noise]\nfamily = \"none\"\n[sweep]\npreset = \"paper-example\"\nlambda_values = [10.0, 1.0]\n";
        let e = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(field_of(e), "lambda_values");
    }

    #[test]
    fn preset_fills_drifts() {
        let text = "kind = \"sweep\"\noutput = \"o\"\n[noise]\nfamily = \"brownian\"\n[sweep]\npreset = \"paper-example\"\nlambda_values = [1.0, 10.0]\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.f.as_ref().unwrap().b, Some(1.0));
        assert_eq!(c.g.as_ref().unwrap().b, Some(3.0));
        let sw = c.sweep.as_ref().unwrap();
        assert_eq!((sw.alpha, sw.beta), (Some(1.0), Some(2.0)));
        assert_eq!(c.noise2, c.noise);
        assert_eq!(c.noise.as_ref().unwrap().variance, Some(1.0));
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = ExperimentConfig::parse("kind = \"sample\"\noutput = \n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = ExperimentConfig::parse("kind = \"sample\"\noutput = \"o\"\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn validation_names_fields() {
        let base = "kind = \"integrate\"\noutput = \"o\"\n[grid]\nt_start = 0.0\nt_end = 1.0\ndt = 0.1\n";
        let e = ExperimentConfig::parse(&format!("{base}[noise]\nfamily = \"brownian\"\n")).unwrap_err();
        assert_eq!(field_of(e), "f");
        let e = ExperimentConfig::parse(&format!("{base}[noise]\nfamily = \"gamma\"\n[f]\nname = \"linear\"\n")).unwrap_err();
        assert_eq!(field_of(e), "noise.family");
        let e =
            ExperimentConfig::parse(&format!("{base}[noise]\nfamily = \"none\"\n[f]\nname = \"quartic\"\n")).unwrap_err();
        assert_eq!(field_of(e), "f.name");
        let e = ExperimentConfig::parse("kind = \"sample\"\noutput = \"o\"\nseeds = []\n").unwrap_err();
        assert_eq!(field_of(e), "seeds");
    }
}
