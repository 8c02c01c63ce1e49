//! Delimited sample files: a header `x0,…,x{d-1},y0,…,y{c-1}` and one sample
//! per line.
//!
//! Values are written in Rust's shortest round-trip form, so reading a file
//! back yields bit-identical samples.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use jhat_core::cloud::{PointCloud, SampleSet};

use crate::error::{Error, Result};

/// Column names `{prefix}0 … {prefix}{n-1}`.
pub fn column_names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Splits a header into its `x` and `y` column counts, in that order.
fn header_shape(path: &Path, header: &csv::StringRecord) -> Result<(usize, usize)> {
    let d = header.iter().take_while(|h| h.trim().starts_with('x')).count();
    let c = header.len() - d;
    let expected: Vec<String> = column_names("x", d).chain(column_names("y", c)).collect();
    if header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(parse_error(
            path,
            1,
            format!("header must read {}", expected.join(",")),
        ));
    }
    if d == 0 {
        return Err(parse_error(path, 1, "header has no x columns"));
    }
    Ok((d, c))
}

/// Parses delimited text; returns `(d, c, xs, ys)`.
fn parse_table<R: Read>(path: &Path, reader: R) -> Result<(usize, usize, Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    let (d, c) = header_shape(path, &header)?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != d + c {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", d + c, rec.len()),
            ));
        }
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(path, line, format!("field {} is not a number: {field:?}", k + 1)))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("field {} is not finite", k + 1)));
            }
            if k < d {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    Ok((d, c, xs, ys))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads a sample file with at least one output column.
pub fn read_dataset(path: &Path) -> Result<SampleSet> {
    let (d, c, xs, ys) = parse_table(path, open(path)?)?;
    if c == 0 {
        return Err(parse_error(path, 1, "header has no y columns"));
    }
    Ok(SampleSet::new(PointCloud::new(d, xs)?, PointCloud::new(c, ys)?)?)
}

/// Reads a file of query points (only `x` columns).
pub fn read_points(path: &Path) -> Result<PointCloud> {
    let (d, c, xs, _) = parse_table(path, open(path)?)?;
    if c != 0 {
        return Err(parse_error(path, 1, "point files carry only x columns"));
    }
    Ok(PointCloud::new(d, xs)?)
}

/// Writes rows under `header`; each row is the concatenation of its parts.
pub(crate) fn write_rows<'a, I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<&'a [f64]>>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(to_io)?;
    let mut buf: Vec<String> = Vec::with_capacity(header.len());
    for parts in rows {
        buf.clear();
        buf.extend(parts.iter().flat_map(|p| p.iter()).map(|v| v.to_string()));
        w.write_record(&buf).map_err(to_io)?;
    }
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Writes a sample file.
pub fn write_dataset(path: &Path, samples: &SampleSet) -> Result<()> {
    let header: Vec<String> = column_names("x", samples.input_dim())
        .chain(column_names("y", samples.output_dim()))
        .collect();
    let rows = samples
        .inputs()
        .iter()
        .zip(samples.outputs().iter())
        .map(|(x, y)| vec![x, y]);
    write_rows(path, &header, rows)
}

/// Writes a file of query points.
pub fn write_points(path: &Path, points: &PointCloud) -> Result<()> {
    let header: Vec<String> = column_names("x", points.dim()).collect();
    write_rows(path, &header, points.iter().map(|x| vec![x]))
}
