//! Executes a resolved [`ExperimentConfig`] and writes its run directory:
//! `manifest.txt`, `paths/*.csv`, `report.csv`, `summary.csv`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{ExperimentConfig, Kind};
use crate::csvio;
use crate::error::{Error, Result};
use crate::grid::SimulationGrid;
use crate::integrator::{estimate_dissipativity, integrate_additive, AdditiveSdeSpec};
use crate::levy::{build_two_sided, sample_levy_path, NoiseRealization};
use crate::skorohod::{skorohod_bounded, skorohod_global};
use crate::stationary::{default_horizons, default_truncation, langevin_stationary, pullback_stationary};
use crate::sync::{run_sync_sweep, SweepSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Directory a run writes into and the files it produced, relative to it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Out {
    base: PathBuf,
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Out {
    fn register(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(PathBuf::from(rel));
        Ok(p)
    }

    fn create(&mut self, rel: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.register(rel)?)?))
    }

    fn rows<T: Serialize>(&mut self, rel: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create(rel)?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Noise on `[min(a, 0), max(b, 0)]`, two-sided when it reaches below 0.
fn noise_covering(cfg: &ExperimentConfig, a: f64, b: f64, dt: f64, seed: u64) -> Result<NoiseRealization> {
    let triplet = cfg.noise.as_ref().expect("validated").triplet("noise")?;
    if a < 0.0 {
        build_two_sided(&triplet, -a, b.max(0.0), dt, seed)
    } else {
        sample_levy_path(&triplet, SimulationGrid::new(0.0, b.max(dt), dt)?, seed)
    }
}

#[derive(Serialize)]
struct EndRow {
    seed: u64,
    t_end: f64,
    value_end: f64,
    jump_count: usize,
}

#[derive(Serialize)]
struct OrbitRow {
    seed: u64,
    value_start: f64,
    value_end: f64,
    pullback_horizon: f64,
    truncation_bound: f64,
}

#[derive(Serialize)]
struct BoundedRow {
    m: f64,
    value: f64,
    certified_gap: f64,
}

#[derive(Serialize)]
struct GlobalRow {
    m_max: u32,
    value: f64,
    uncertainty: f64,
}

fn execute(cfg: &ExperimentConfig, out: &mut Out) -> Result<()> {
    match cfg.kind {
        Kind::Sample => {
            let g = cfg.grid.as_ref().expect("validated").grid()?;
            let triplet = cfg.noise.as_ref().expect("validated").triplet("noise")?;
            let mut rows = Vec::new();
            for &seed in &cfg.seeds {
                let r = sample_levy_path(&triplet, g, seed)?;
                csvio::write_path(&r.path, out.create(&format!("paths/noise_seed{seed}.csv"))?)?;
                csvio::write_jumps(&r.path, out.create(&format!("paths/jumps_seed{seed}.csv"))?)?;
                rows.push(EndRow {
                    seed,
                    t_end: g.t_end,
                    value_end: r.path.eval1(g.t_end),
                    jump_count: r.path.jump_indices().len(),
                });
            }
            out.rows("summary.csv", &rows)
        }
        Kind::Integrate => {
            let g = cfg.grid.as_ref().expect("validated").grid()?;
            let f = cfg.f.as_ref().expect("validated").drift("f")?;
            let ic = cfg.integrate.as_ref().expect("resolved");
            let mut rows = Vec::new();
            for &seed in &cfg.seeds {
                let noise = noise_covering(cfg, g.t_start, g.t_end, g.dt, seed)?;
                let spec = AdditiveSdeSpec::new(f.clone(), vec![ic.coeff], noise)?;
                let y = integrate_additive(&spec, &g, &[ic.y0])?;
                csvio::write_path(&y, out.create(&format!("paths/solution_seed{seed}.csv"))?)?;
                rows.push(EndRow {
                    seed,
                    t_end: g.t_end,
                    value_end: y.eval1(g.t_end),
                    jump_count: y.jump_indices().len(),
                });
            }
            out.rows("summary.csv", &rows)
        }
        Kind::Stationary => {
            let g = cfg.grid.as_ref().expect("validated").grid()?;
            let st = cfg.stationary.as_ref().expect("validated");
            let mut rows = Vec::new();
            for &seed in &cfg.seeds {
                let orbit = if st.method == "langevin" {
                    let lam = st.lambda.expect("validated");
                    let past = g.t_start - 2.0 * default_truncation(lam) - 1.0;
                    let noise = noise_covering(cfg, past, g.t_end, g.dt, seed)?;
                    langevin_stationary(lam, &[st.coeff], &noise, &g)?
                } else {
                    let f = cfg.f.as_ref().expect("validated").drift("f")?;
                    let l = estimate_dissipativity(&f, 1, 10.0, 2000, 0)?.l_hat;
                    let horizons = default_horizons(l.max(1e-3));
                    let past = g.t_start - horizons[1] - 1.0;
                    let noise = noise_covering(cfg, past, g.t_end, g.dt, seed)?;
                    let spec = AdditiveSdeSpec::new(f, vec![st.coeff], noise)?;
                    let mut o = pullback_stationary(&spec, &g, &horizons, None)?;
                    o.lambda = f64::NAN;
                    o
                };
                let csv_path = out.register(&format!("paths/orbit_seed{seed}.csv"))?;
                out.register(&format!("paths/orbit_seed{seed}.json"))?;
                csvio::write_orbit(&orbit, &csv_path)?;
                rows.push(OrbitRow {
                    seed,
                    value_start: orbit.path.eval1(g.t_start),
                    value_end: orbit.path.eval1(g.t_end),
                    pullback_horizon: orbit.pullback_horizon,
                    truncation_bound: orbit.truncation_bound,
                });
            }
            out.rows("summary.csv", &rows)
        }
        Kind::Metric => {
            let m = cfg.metric.as_ref().expect("validated");
            let x = csvio::read_path_file(&out.base.join(&m.path_a))?;
            let y = csvio::read_path_file(&out.base.join(&m.path_b))?;
            match m.m_max {
                Some(m_max) => {
                    let r = skorohod_global(&x, &y, m_max, m.tol)?;
                    out.rows(
                        "report.csv",
                        &[GlobalRow {
                            m_max,
                            value: r.value,
                            uncertainty: r.uncertainty,
                        }],
                    )
                }
                None => {
                    let r = skorohod_bounded(&x, &y, m.m, m.tol)?;
                    csvio::write_time_change(&r.witness, out.create("paths/witness.csv")?)?;
                    out.rows(
                        "report.csv",
                        &[BoundedRow {
                            m: m.m,
                            value: r.value,
                            certified_gap: r.certified_gap,
                        }],
                    )
                }
            }
        }
        Kind::Sweep => {
            let sw = cfg.sweep.as_ref().expect("validated");
            let noise1 = cfg.noise.as_ref().expect("validated").triplet("noise")?;
            let noise2 = match &cfg.noise2 {
                Some(n) => n.triplet("noise2")?,
                None => noise1.clone(),
            };
            let spec = SweepSpec {
                f: cfg.f.as_ref().expect("resolved").drift("f")?,
                g: cfg.g.as_ref().expect("resolved").drift("g")?,
                alpha: vec![sw.alpha.expect("resolved")],
                beta: vec![sw.beta.expect("resolved")],
                noise1,
                noise2,
                same_noise: sw.same_noise,
                lambdas: sw.lambda_values.clone(),
                window: (sw.window[0], sw.window[1]),
                seeds: cfg.seeds.clone(),
                dt: sw.dt,
                metric_tol: sw.metric_tol,
            };
            let report = run_sync_sweep(&spec)?;
            csvio::write_report(&report, out.create("report.csv")?)?;
            csvio::write_summary(&report.summary(), out.create("summary.csv")?)
        }
    }
}

fn manifest(cfg: &ExperimentConfig, started: SystemTime, elapsed: f64, files: &[PathBuf]) -> String {
    let epoch = started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let mut s = String::new();
    let _ = writeln!(s, "# levy-sync run manifest");
    let _ = writeln!(s, "tool_version = \"{VERSION}\"");
    let _ = writeln!(s, "wall_clock = \"started {epoch:.3} s after the Unix epoch, ran {elapsed:.3} s\"");
    let _ = writeln!(s, "seeds = {:?}", cfg.seeds);
    let _ = writeln!(
        s,
        "outputs = [{}]",
        files.iter().map(|f| format!("\"{}\"", f.display())).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(s, "\n# resolved config\n{}", cfg.to_toml());
    s
}

/// Run `cfg`, writing under `cfg.output` (relative paths are taken from
/// `base`). Data files depend only on the config, never on timing or the
/// number of worker threads.
pub fn run(cfg: &ExperimentConfig, base: &Path) -> Result<RunOutput> {
    let dir = base.join(&cfg.output);
    fs::create_dir_all(&dir)?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut out = Out {
        base: base.to_path_buf(),
        dir: dir.clone(),
        files: Vec::new(),
    };
    execute(cfg, &mut out).map_err(|e| with_context(e, cfg.kind))?;
    out.files.sort();
    fs::write(dir.join("manifest.txt"), manifest(cfg, started, clock.elapsed().as_secs_f64(), &out.files))?;
    Ok(RunOutput { dir, files: out.files })
}

/// Prefix the experiment kind without changing the error class.
fn with_context(e: Error, kind: Kind) -> Error {
    let ctx = format!("{kind:?} experiment").to_lowercase();
    match e {
        Error::Parameter(m) => Error::Parameter(format!("{ctx}: {m}")),
        Error::Grid(m) => Error::Grid(format!("{ctx}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
        Error::NonConvergence(m) => Error::NonConvergence(format!("{ctx}: {m}")),
        Error::Capability(m) => Error::Capability(format!("{ctx}: {m}")),
        other => other,
    }
}

/// Load a config file and run it; relative output directories are resolved
/// against the config file's own directory.
pub fn run_file(config_path: &Path) -> Result<RunOutput> {
    let cfg = ExperimentConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    run(&cfg, base)
}
