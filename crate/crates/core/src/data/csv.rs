//! CSV fixtures: header `x0,..,x{D-1},y0,..,y{K-1}`, one sample per line.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle reproduces every bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Scalar;

pub fn write_csv<T: Scalar>(ds: &Dataset<T>, path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(ds)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub(crate) fn to_csv_string<T: Scalar>(ds: &Dataset<T>) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..ds.input_dim())
        .map(|i| format!("x{i}"))
        .chain((0..ds.output_dim()).map(|i| format!("y{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (x, y) in ds.inputs().row_iter().zip(ds.targets().row_iter()) {
        for (i, v) in x.iter().chain(y.iter()).enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{}", v.to_f64_lossy()).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_csv<T: Scalar>(path: &Path, task: Task, name: &str) -> Result<Dataset<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid(format!("{}: empty CSV", path.display())))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let d_in = names.iter().take_while(|n| n.starts_with('x')).count();
    let d_out = names.len() - d_in;
    for (i, n) in names.iter().enumerate() {
        let expected = if i < d_in { format!("x{i}") } else { format!("y{}", i - d_in) };
        if *n != expected {
            return Err(Error::invalid(format!(
                "{}: header column {i} is `{n}`, expected `{expected}`",
                path.display()
            )));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rows = 0;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::invalid(format!(
                "{}: line {} has {} fields, expected {}",
                path.display(),
                lineno + 2,
                fields.len(),
                names.len()
            )));
        }
        for (i, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::invalid(format!("{}: line {}: `{f}` is not a number", path.display(), lineno + 2))
            })?;
            if i < d_in {
                xs.push(T::lit(v));
            } else {
                ys.push(T::lit(v));
            }
        }
        rows += 1;
    }
    Dataset::new(
        Matrix::from_vec(rows, d_in, xs)?,
        Matrix::from_vec(rows, d_out, ys)?,
        task,
        name,
    )
}
