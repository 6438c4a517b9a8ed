//! Output files: field snapshots, front logs, study tables, run manifests.
//! Everything is plain delimiter-separated text (JSON for the manifest) and
//! parses back through the readers in this module.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{ConvergenceRow, FrontLog, SIDES};
use crate::domain::{Dim, Grid};
use crate::error::{Error, Result};
use crate::physics::SimulationState;

/// A parsed field snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Nodes per axis (nx, ny); ny = 1 in 1D.
    pub shape: (usize, usize),
    /// Node coordinates and fields, row-major.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta: Vec<f64>,
    pub c_a: Vec<f64>,
    pub n: Vec<f64>,
    pub co2_eq: Option<Vec<f64>>,
}

/// Writes a snapshot of the three fields (plus the optional dissolved-gas
/// diagnostic) at the state's current time.
pub fn write_snapshot(
    path: &Path,
    grid: &Grid<f64>,
    state: &SimulationState<f64>,
    co2_eq_kc: Option<f64>,
) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    let np = grid.nodes_per_axis();
    let (nx, ny) = match grid.dim {
        Dim::One => (np, 1),
        Dim::Two => (np, np),
    };
    writeln!(w, "# t = {}", state.t)?;
    writeln!(w, "# shape: {nx} {ny}")?;
    let diag = co2_eq_kc.is_some();
    if diag {
        writeln!(w, "# columns: x y theta c_a n co2_eq")?;
    } else {
        writeln!(w, "# columns: x y theta c_a n")?;
    }
    for idx in 0..grid.num_nodes() {
        let p = grid.pos(idx);
        write!(
            w,
            "{} {} {} {} {}",
            p[0], p[1], state.theta[idx], state.c_a[idx], state.n[idx]
        )?;
        if let Some(kc) = co2_eq_kc {
            write!(w, " {}", state.c_a[idx] / kc)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let f = File::open(path)?;
    let r = BufReader::new(f);
    let mut t = None;
    let mut shape = None;
    let mut has_diag = false;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut theta = Vec::new();
    let mut c_a = Vec::new();
    let mut n = Vec::new();
    let mut co2 = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("t =") {
                t = Some(parse_f64(v.trim())?);
            } else if let Some(v) = rest.strip_prefix("shape:") {
                let mut it = v.split_whitespace();
                let nx = parse_usize(it.next())?;
                let ny = parse_usize(it.next())?;
                shape = Some((nx, ny));
            } else if rest.starts_with("columns:") {
                has_diag = rest.contains("co2_eq");
            }
            continue;
        }
        let mut it = line.split_whitespace();
        x.push(parse_f64(it.next().unwrap_or(""))?);
        y.push(parse_f64(it.next().unwrap_or(""))?);
        theta.push(parse_f64(it.next().unwrap_or(""))?);
        c_a.push(parse_f64(it.next().unwrap_or(""))?);
        n.push(parse_f64(it.next().unwrap_or(""))?);
        if has_diag {
            co2.push(parse_f64(it.next().unwrap_or(""))?);
        }
    }
    let shape = shape.ok_or_else(|| Error::Parse("snapshot missing shape header".into()))?;
    if x.len() != shape.0 * shape.1 {
        return Err(Error::Parse(format!(
            "snapshot row count {} does not match shape {:?}",
            x.len(),
            shape
        )));
    }
    Ok(Snapshot {
        t: t.ok_or_else(|| Error::Parse("snapshot missing time header".into()))?,
        shape,
        x,
        y,
        theta,
        c_a,
        n,
        co2_eq: if has_diag { Some(co2) } else { None },
    })
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number: {s:?}")))
}

fn parse_usize(s: Option<&str>) -> Result<usize> {
    s.unwrap_or("")
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad count: {s:?}")))
}

fn fmt15(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.14e}"),
        None => "nan".into(),
    }
}

/// Writes a front log: one line per sample with 15 significant digits.
pub fn write_front_log(path: &Path, log: &FrontLog<f64>, dim: Dim) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    match dim {
        Dim::One => writeln!(w, "# columns: time_s left_cm right_cm")?,
        Dim::Two => writeln!(w, "# columns: time_s left_cm right_cm bottom_cm top_cm")?,
    }
    let sides = if dim == Dim::Two { 4 } else { 2 };
    for k in 0..log.len() {
        write!(w, "{:.14e}", log.times[k])?;
        for side in SIDES.iter().take(sides) {
            write!(w, " {}", fmt15(log.position(*side, k)))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_front_log(path: &Path) -> Result<FrontLog<f64>> {
    let f = File::open(path)?;
    let r = BufReader::new(f);
    let mut log = FrontLog::default();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() < 3 {
            return Err(Error::Parse(format!("front log line too short: {line:?}")));
        }
        let t = parse_f64(vals[0])?;
        let mut pos = [None; 4];
        for (k, v) in vals[1..].iter().enumerate().take(4) {
            let x = parse_f64(v)?;
            pos[k] = if x.is_nan() { None } else { Some(x) };
        }
        log.record(t, pos);
    }
    Ok(log)
}

/// Writes the convergence table: cells, dx, dt, errors and orders per field.
pub fn write_study_table(path: &Path, rows: &[ConvergenceRow<f64>]) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    writeln!(w, "# columns: N dx dt err_theta order_theta err_ca order_ca")?;
    for r in rows {
        writeln!(
            w,
            "{} {:.6e} {:.6e} {:.6e} {} {:.6e} {}",
            r.cells,
            r.dx,
            r.dt,
            r.err_theta,
            r.order_theta.map_or("-".into(), |o| format!("{o:.3}")),
            r.err_acid,
            r.order_acid.map_or("-".into(), |o| format!("{o:.3}")),
        )?;
    }
    Ok(())
}

pub fn read_study_table(path: &Path) -> Result<Vec<(usize, f64, f64, f64, Option<f64>, f64, Option<f64>)>> {
    let f = File::open(path)?;
    let r = BufReader::new(f);
    let mut rows = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<&str> = line.split_whitespace().collect();
        if v.len() != 7 {
            return Err(Error::Parse(format!("study row malformed: {line:?}")));
        }
        let ord = |s: &str| -> Result<Option<f64>> {
            if s == "-" {
                Ok(None)
            } else {
                parse_f64(s).map(Some)
            }
        };
        rows.push((
            v[0].parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad N: {:?}", v[0])))?,
            parse_f64(v[1])?,
            parse_f64(v[2])?,
            parse_f64(v[3])?,
            ord(v[4])?,
            parse_f64(v[5])?,
            ord(v[6])?,
        ));
    }
    Ok(rows)
}

/// Run manifest: what ran, from which config, and what it produced.
/// Written on success and on failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub scenario: String,
    pub code_version: String,
    /// Unix seconds.
    pub started: f64,
    pub finished: f64,
    pub outputs: Vec<String>,
    pub status: String,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(f), self)
            .map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path)?;
        serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}
