//! Whitespace-separated text formats with `#` comments.
//!
//! - measurements: `i j dx dy dz`
//! - points (ground truth and estimates): `i x y z`
//! - labels: `i j 0|1` (1 = corrupted)
//! - node sets: one id per line
//!
//! Floats are written with 17 significant digits so reading back
//! reproduces the written `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, TripError};
use crate::evaluation::PointSet;
use crate::vec3::Vec3;

pub type Measurement = (usize, usize, Vec3<f64>);

fn fmt_f(out: &mut String, v: f64) {
    write!(out, " {v:.16e}").unwrap();
}

fn parse_rows<R>(
    text: &str,
    source: &str,
    arity: usize,
    mut row: impl FnMut(&[&str]) -> std::result::Result<R, String>,
) -> Result<Vec<R>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| TripError::Parse { path: source.to_string(), line: k + 1, msg };
        if fields.len() != arity {
            return Err(err(format!("expected {arity} fields, found {}", fields.len())));
        }
        out.push(row(&fields).map_err(err)?);
    }
    Ok(out)
}

fn field<T: FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("invalid {what} `{s}`"))
}

fn float(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = field(s, "number")?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value `{s}`"))
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| TripError::File { path: path.display().to_string(), source })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| TripError::File { path: path.display().to_string(), source })
}

pub fn parse_measurements(text: &str, source: &str) -> Result<Vec<Measurement>> {
    parse_rows(text, source, 5, |f| {
        Ok((field(f[0], "node id")?, field(f[1], "node id")?, [float(f[2])?, float(f[3])?, float(f[4])?]))
    })
}

pub fn format_measurements(m: &[Measurement]) -> String {
    let mut s = String::from("# i j dx dy dz\n");
    for &(i, j, d) in m {
        write!(s, "{i} {j}").unwrap();
        d.iter().for_each(|&v| fmt_f(&mut s, v));
        s.push('\n');
    }
    s
}

pub fn parse_points(text: &str, source: &str) -> Result<PointSet> {
    let rows = parse_rows(text, source, 4, |f| {
        Ok((field::<usize>(f[0], "node id")?, [float(f[1])?, float(f[2])?, float(f[3])?]))
    })?;
    let mut out = PointSet::new();
    for (k, (id, p)) in rows.into_iter().enumerate() {
        if out.insert(id, p).is_some() {
            return Err(TripError::Parse {
                path: source.to_string(),
                line: k + 1,
                msg: format!("node {id} listed twice"),
            });
        }
    }
    Ok(out)
}

pub fn format_points(p: &PointSet) -> String {
    let mut s = String::from("# i x y z\n");
    for (&i, x) in p {
        write!(s, "{i}").unwrap();
        x.iter().for_each(|&v| fmt_f(&mut s, v));
        s.push('\n');
    }
    s
}

pub fn parse_labels(text: &str, source: &str) -> Result<Vec<(usize, usize, bool)>> {
    parse_rows(text, source, 3, |f| {
        let corrupt = match f[2] {
            "0" => false,
            "1" => true,
            o => return Err(format!("label must be 0 or 1, found `{o}`")),
        };
        Ok((field(f[0], "node id")?, field(f[1], "node id")?, corrupt))
    })
}

pub fn format_labels(l: &[(usize, usize, bool)]) -> String {
    let mut s = String::from("# i j corrupt\n");
    for &(i, j, c) in l {
        writeln!(s, "{i} {j} {}", u8::from(c)).unwrap();
    }
    s
}

pub fn parse_node_set(text: &str, source: &str) -> Result<Vec<usize>> {
    parse_rows(text, source, 1, |f| field(f[0], "node id"))
}

pub fn format_node_set(nodes: &[usize]) -> String {
    let mut s = String::new();
    for v in nodes {
        writeln!(s, "{v}").unwrap();
    }
    s
}

pub fn read_measurements(path: &Path) -> Result<Vec<Measurement>> {
    parse_measurements(&read(path)?, &path.display().to_string())
}

pub fn write_measurements(path: &Path, m: &[Measurement]) -> Result<()> {
    write(path, &format_measurements(m))
}

pub fn read_points(path: &Path) -> Result<PointSet> {
    parse_points(&read(path)?, &path.display().to_string())
}

pub fn write_points(path: &Path, p: &PointSet) -> Result<()> {
    write(path, &format_points(p))
}

pub fn read_labels(path: &Path) -> Result<Vec<(usize, usize, bool)>> {
    parse_labels(&read(path)?, &path.display().to_string())
}

pub fn write_labels(path: &Path, l: &[(usize, usize, bool)]) -> Result<()> {
    write(path, &format_labels(l))
}

pub fn read_node_set(path: &Path) -> Result<Vec<usize>> {
    parse_node_set(&read(path)?, &path.display().to_string())
}

pub fn write_node_set(path: &Path, nodes: &[usize]) -> Result<()> {
    write(path, &format_node_set(nodes))
}
