//! Flat-file formats: matrices and trajectories as CSV, reports as JSON.
//!
//! A matrix file starts with `# rows=<r> cols=<c>` followed by `r` comma-separated
//! rows. A trajectory file has the header `t,u_1..u_p,y` optionally followed by
//! `x_1..x_n,w_1..w_n,z` diagnostic columns. Numbers use the shortest
//! representation that parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sysmodel::{Diagnostics, StateSpaceModel, Trajectory};

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse {s:?} as a number")))
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = format!("# rows={} cols={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Format("empty matrix file".into()))?;
    let (rows, cols) = parse_shape(header)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (k, line) in lines.enumerate() {
        let vals: Vec<f64> = line.split(',').map(|s| parse_f64(s, k + 2)).collect::<Result<_>>()?;
        if vals.len() != cols {
            return Err(Error::Format(format!("line {}: expected {cols} values, got {}", k + 2, vals.len())));
        }
        data.extend(vals);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Format(format!("expected {rows} rows, got {seen}")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

fn parse_shape(header: &str) -> Result<(usize, usize)> {
    let bad = || Error::Format(format!("bad matrix header {header:?}, expected `# rows=<r> cols=<c>`"));
    let body = header.trim().strip_prefix('#').ok_or_else(bad)?;
    let mut rows = None;
    let mut cols = None;
    for part in body.split_whitespace() {
        if let Some(v) = part.strip_prefix("rows=") {
            rows = v.parse().ok();
        } else if let Some(v) = part.strip_prefix("cols=") {
            cols = v.parse().ok();
        }
    }
    Ok((rows.ok_or_else(bad)?, cols.ok_or_else(bad)?))
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let p = traj.p();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=p).map(|i| format!("u_{i}")));
    header.push("y".into());
    if let Some(d) = &traj.diagnostics {
        let n = d.x[0].len();
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=n).map(|i| format!("w_{i}")));
        header.push("z".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for t in 0..traj.y.len() {
        let mut row = vec![t.to_string()];
        row.extend(traj.u[t].iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(traj.y[t]));
        if let Some(d) = &traj.diagnostics {
            row.extend(d.x[t].iter().map(|&v| fmt_f64(v)));
            row.extend(d.w[t].iter().map(|&v| fmt_f64(v)));
            row.push(fmt_f64(d.z[t]));
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn trajectory_from_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Format("empty trajectory file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix)).count();
    let p = count("u_");
    let n = count("x_");
    if header.first() != Some(&"t") || p == 0 || header.get(p + 1) != Some(&"y") {
        return Err(Error::Format(format!("bad trajectory header {header:?}")));
    }
    let with_diag = n > 0;
    let width = if with_diag { p + 2 + 2 * n + 1 } else { p + 2 };
    if header.len() != width {
        return Err(Error::Format(format!("header has {} columns, expected {width}", header.len())));
    }
    let (mut u, mut y) = (Vec::new(), Vec::new());
    let (mut x, mut w, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let vals: Vec<f64> = line.split(',').map(|s| parse_f64(s, k + 2)).collect::<Result<_>>()?;
        if vals.len() != width {
            return Err(Error::Format(format!("line {}: expected {width} values, got {}", k + 2, vals.len())));
        }
        u.push(DVector::from_column_slice(&vals[1..=p]));
        y.push(vals[p + 1]);
        if with_diag {
            let base = p + 2;
            x.push(DVector::from_column_slice(&vals[base..base + n]));
            w.push(DVector::from_column_slice(&vals[base + n..base + 2 * n]));
            z.push(vals[base + 2 * n]);
        }
    }
    let mut traj = Trajectory::new(u, y)?;
    if with_diag {
        traj.diagnostics = Some(Diagnostics { x, w, z });
    }
    Ok(traj)
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    fs::write(path, trajectory_to_csv(traj))?;
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    trajectory_from_csv(&fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Row-major nested arrays, the JSON form of a matrix.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// `(A, B, C)` as row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(m: &StateSpaceModel) -> Self {
        Self { a: matrix_rows(&m.a), b: matrix_rows(&m.b), c: matrix_rows(&m.c) }
    }

    pub fn to_model(&self) -> Result<StateSpaceModel> {
        StateSpaceModel::new(matrix_from_rows(&self.a)?, matrix_from_rows(&self.b)?, matrix_from_rows(&self.c)?)
    }
}

pub fn write_model(path: impl AsRef<Path>, m: &StateSpaceModel) -> Result<()> {
    write_json(path, &ModelFile::from_model(m))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<StateSpaceModel> {
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    file.to_model()
}
