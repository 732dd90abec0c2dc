//! CSV and JSON formats for trajectories, Bloch-sphere curves, verifier
//! reports and shooting results.
//!
//! CSV values are written with 17 significant digits and JSON numbers use the
//! shortest representation that parses back to the same `f64`, so every
//! format round-trips bit-exactly.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::general::{RestartOutcome, ShootResult};
use crate::hilbert::{CMatrix, CVector, HermitianOperator, PureState};
use crate::propagator::{Sample, Trajectory};
use crate::qubit_restricted::{BlochSample, FamilyRecord};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_num(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse {field:?} as a number")))
}

fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for k in 0..n {
        cols.push(format!("re(psi_{k})"));
        cols.push(format!("im(psi_{k})"));
    }
    for a in 0..n {
        for b in 0..n {
            cols.push(format!("h_{a}{b}_re"));
            cols.push(format!("h_{a}{b}_im"));
        }
    }
    cols.join(",")
}

/// One row per sample: `t`, the state amplitudes, then the Hamiltonian in
/// row-major order, each complex entry as a real/imaginary column pair.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    let n = traj.dim();
    writeln!(w, "{}", trajectory_header(n))?;
    for s in traj.samples() {
        let mut row = vec![num(s.t)];
        for z in s.state.amplitudes().iter() {
            row.push(num(z.re));
            row.push(num(z.im));
        }
        let h = s.h.matrix();
        for a in 0..n {
            for b in 0..n {
                row.push(num(h[(a, b)].re));
                row.push(num(h[(a, b)].im));
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads the format of [`write_trajectory_csv`]; `dt` is taken from the
/// second row.
pub fn read_trajectory_csv<R: BufRead>(r: R) -> Result<Trajectory> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty trajectory file".into()))??;
    let cols = header.split(',').count();
    // 1 + 2n + 2n^2 columns
    let n = (1..=64)
        .find(|&n| 1 + 2 * n + 2 * n * n == cols)
        .ok_or_else(|| Error::Format(format!("unexpected column count {cols}")))?;
    if header.trim() != trajectory_header(n) {
        return Err(Error::Format("trajectory header does not match".into()));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> =
            line.split(',').map(|f| parse_num(f, i + 2)).collect::<Result<_>>()?;
        if values.len() != cols {
            return Err(Error::Format(format!("line {}: expected {cols} fields, found {}", i + 2, values.len())));
        }
        let psi = CVector::from_iterator(n, (0..n).map(|k| Complex64::new(values[1 + 2 * k], values[2 + 2 * k])));
        let off = 1 + 2 * n;
        let h = CMatrix::from_fn(n, n, |a, b| {
            let idx = off + 2 * (a * n + b);
            Complex64::new(values[idx], values[idx + 1])
        });
        samples.push(Sample {
            t: values[0],
            state: PureState::from_normalized(psi)?,
            h: HermitianOperator::new(h)?,
        });
    }
    if samples.len() < 2 {
        return Err(Error::Format("a trajectory needs at least two samples".into()));
    }
    let dt = samples[1].t;
    Trajectory::new(dt, samples)
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    t: f64,
    psi: Vec<Complex64>,
    h: Vec<Vec<Complex64>>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    dt: f64,
    n: usize,
    samples: Vec<SampleRecord>,
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|a| (0..m.ncols()).map(|b| m[(a, b)]).collect()).collect()
}

/// A square matrix from row lists, as used by every JSON format here.
pub fn matrix_from_rows(rows: &[Vec<Complex64>]) -> Result<CMatrix> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    Ok(CMatrix::from_fn(n, n, |a, b| rows[a][b]))
}

pub fn write_trajectory_json<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    let record = TrajectoryRecord {
        dt: traj.dt(),
        n: traj.dim(),
        samples: traj
            .samples()
            .iter()
            .map(|s| SampleRecord {
                t: s.t,
                psi: s.state.amplitudes().iter().copied().collect(),
                h: matrix_rows(s.h.matrix()),
            })
            .collect(),
    };
    serde_json::to_writer(&mut w, &record)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_trajectory_json<R: BufRead>(r: R) -> Result<Trajectory> {
    let record: TrajectoryRecord = serde_json::from_reader(r)?;
    let samples = record
        .samples
        .into_iter()
        .map(|s| {
            if s.psi.len() != record.n {
                return Err(Error::DimensionMismatch { expected: record.n, found: s.psi.len() });
            }
            Ok(Sample {
                t: s.t,
                state: PureState::from_normalized(CVector::from_vec(s.psi))?,
                h: HermitianOperator::new(matrix_from_rows(&s.h)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(record.dt, samples)
}

/// Loads a trajectory, choosing the format from the file extension.
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let file = std::io::BufReader::new(fs::File::open(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_trajectory_csv(file),
        Some("json") => read_trajectory_json(file),
        _ => Err(Error::Format(format!("unknown trajectory extension: {}", path.display()))),
    }
}

pub const BLOCH_HEADER: &str = "t,sx,sy,sz,bx,by,bz,dE";

pub fn write_bloch_csv<W: Write>(samples: &[BlochSample], mut w: W) -> Result<()> {
    writeln!(w, "{BLOCH_HEADER}")?;
    for s in samples {
        let row: Vec<String> = std::iter::once(s.t)
            .chain(s.sigma)
            .chain(s.field)
            .chain(std::iter::once(s.speed))
            .map(num)
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_bloch_csv<R: BufRead>(r: R) -> Result<Vec<BlochSample>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty Bloch file".into()))??;
    if header.trim() != BLOCH_HEADER {
        return Err(Error::Format(format!("expected header {BLOCH_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line.split(',').map(|f| parse_num(f, i + 2)).collect::<Result<_>>()?;
        if v.len() != 8 {
            return Err(Error::Format(format!("line {}: expected 8 fields, found {}", i + 2, v.len())));
        }
        out.push(BlochSample { t: v[0], sigma: [v[1], v[2], v[3]], field: [v[4], v[5], v[6]], speed: v[7] });
    }
    Ok(out)
}

/// Bloch curve with the parameters of the family that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochFile {
    pub family: FamilyRecord,
    pub samples: Vec<BlochSample>,
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Converged shooting parameters and the per-restart record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootRecord {
    #[serde(rename = "T")]
    pub duration: f64,
    pub lambda_ratios: Vec<f64>,
    pub h0: Vec<Vec<Complex64>>,
    pub infidelity: f64,
    pub restarts: Vec<RestartRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub converged: bool,
    #[serde(rename = "T")]
    pub duration: f64,
    pub infidelity: f64,
    pub constraint_drift: f64,
    pub lambda_ratios: Vec<f64>,
}

impl From<&RestartOutcome> for RestartRecord {
    fn from(o: &RestartOutcome) -> Self {
        Self {
            index: o.index,
            converged: o.converged,
            duration: o.duration,
            infidelity: o.infidelity,
            constraint_drift: o.constraint_drift,
            lambda_ratios: o.lambda_ratios.clone(),
        }
    }
}

impl From<&ShootResult> for ShootRecord {
    fn from(r: &ShootResult) -> Self {
        Self {
            duration: r.params.duration(),
            lambda_ratios: r.params.lambda_ratios().to_vec(),
            h0: matrix_rows(r.params.h0().matrix()),
            infidelity: r.infidelity,
            restarts: r.restarts.iter().map(RestartRecord::from).collect(),
        }
    }
}
