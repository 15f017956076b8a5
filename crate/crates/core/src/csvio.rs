//! CSV import and export of paths, jump tables and sweep reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! reading a file back reproduces every `f64` bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{CadlagPath, PathBuilder};
use crate::skorohod::TimeChange;
use crate::stationary::StationaryOrbit;
use crate::sync::{SyncReport, SyncSummary};

fn value_headers(prefix: &str, d: usize) -> Vec<String> {
    if d == 1 {
        vec![prefix.to_string()]
    } else {
        (0..d).map(|i| format!("{prefix}_{i}")).collect()
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// `t,value[,…]`; a jump is written as two rows with the same `t`, the left
/// limit first.
pub fn write_path<W: Write>(path: &CadlagPath, out: W) -> Result<()> {
    let d = path.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(value_headers("value", d));
    w.write_record(&header)?;
    let (mut v, mut l) = (vec![0.0; d], vec![0.0; d]);
    for i in 0..path.knot_count() {
        let t = fmt(path.knot_time(i));
        path.knot_value_into(i, &mut v);
        if path.is_jump_knot(i) {
            path.knot_left_into(i, &mut l);
            w.write_record(std::iter::once(t.clone()).chain(l.iter().map(|&x| fmt(x))))?;
        }
        w.write_record(std::iter::once(t).chain(v.iter().map(|&x| fmt(x))))?;
    }
    w.flush()?;
    Ok(())
}

fn parse(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot read {what} `{s}` as a number")))
}

/// Inverse of [`write_path`].
pub fn read_path<R: Read>(input: R) -> Result<CadlagPath> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    if width < 2 {
        return Err(Error::Parse("a path file needs a `t` column and at least one value column".into()));
    }
    let d = width - 1;
    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let t = parse(&rec[0], "time")?;
        let v = (1..width).map(|i| parse(&rec[i], "value")).collect::<Result<Vec<_>>>()?;
        rows.push((t, v));
    }
    let mut b = PathBuilder::with_capacity(d, rows.len());
    let mut i = 0;
    while i < rows.len() {
        if i + 1 < rows.len() && rows[i + 1].0 == rows[i].0 {
            b.push_jump(rows[i].0, &rows[i].1, &rows[i + 1].1);
            i += 2;
        } else {
            b.push(rows[i].0, &rows[i].1);
            i += 1;
        }
    }
    b.build()
}

/// Knot table `t,is_jump,value…,left…`, one row per knot.
pub fn write_knots<W: Write>(path: &CadlagPath, out: W) -> Result<()> {
    let d = path.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "is_jump".to_string()];
    header.extend(value_headers("value", d));
    header.extend(value_headers("left", d));
    w.write_record(&header)?;
    for i in 0..path.knot_count() {
        let mut rec = vec![fmt(path.knot_time(i)), (path.is_jump_knot(i) as u8).to_string()];
        rec.extend(path.knot_value(i).into_iter().map(fmt));
        rec.extend(path.knot_left(i).into_iter().map(fmt));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_knots<R: Read>(input: R) -> Result<CadlagPath> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    if width < 4 || width % 2 != 0 {
        return Err(Error::Parse("a knot table has columns t,is_jump,value…,left…".into()));
    }
    let d = (width - 2) / 2;
    let mut b = PathBuilder::new(d);
    for rec in r.records() {
        let rec = rec?;
        let t = parse(&rec[0], "time")?;
        let v = (2..2 + d).map(|i| parse(&rec[i], "value")).collect::<Result<Vec<_>>>()?;
        let l = (2 + d..width).map(|i| parse(&rec[i], "left limit")).collect::<Result<Vec<_>>>()?;
        let flagged = &rec[1] == "1";
        if flagged != (v != l) {
            return Err(Error::Parse(format!("is_jump flag disagrees with the values at t = {t}")));
        }
        b.push_jump(t, &l, &v);
    }
    b.build()
}

/// Jump table `t_jump,size[…]`.
pub fn write_jumps<W: Write>(path: &CadlagPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t_jump".to_string()];
    header.extend(value_headers("size", path.dim()));
    w.write_record(&header)?;
    for &i in path.jump_indices() {
        let rec = std::iter::once(fmt(path.knot_time(i))).chain(path.jump_size(i).into_iter().map(fmt));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Breakpoints `s,lambda_s` of a time change.
pub fn write_time_change<W: Write>(lam: &TimeChange, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "lambda_s"])?;
    for &(s, u) in lam.points() {
        w.write_record([fmt(s), fmt(u)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `seed,lambda,gap,skorohod_x,skorohod_y,contraction_margin,absorption_radius`.
pub fn write_report<W: Write>(report: &SyncReport, out: W) -> Result<()> {
    write_rows(&report.rows, out)
}

pub fn write_summary<W: Write>(summary: &[SyncSummary], out: W) -> Result<()> {
    write_rows(summary, out)
}

#[derive(Serialize)]
struct OrbitMeta {
    lambda: Option<f64>,
    pullback_horizon: f64,
    truncation_bound: f64,
}

/// Orbit path as CSV plus a JSON sidecar `<stem>.json` with its metadata.
pub fn write_orbit(orbit: &StationaryOrbit, csv_path: &Path) -> Result<()> {
    write_path(&orbit.path, std::fs::File::create(csv_path)?)?;
    let meta = OrbitMeta {
        lambda: orbit.lambda.is_finite().then_some(orbit.lambda),
        pullback_horizon: orbit.pullback_horizon,
        truncation_bound: orbit.truncation_bound,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(csv_path.with_extension("json"), json + "\n")?;
    Ok(())
}

pub fn read_path_file(p: &Path) -> Result<CadlagPath> {
    read_path(std::fs::File::open(p)?)
}
