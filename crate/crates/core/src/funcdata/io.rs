//! CSV serialization of datasets and query curves.
//!
//! Dataset layout:
//!
//! ```text
//! # grid,<start>,<end>,<n_points>,<delta>
//! t,zeta,y,v_0,...,v_{p-1}
//! <t>,1,<y>,<values...>
//! <t>,0,,<values...>
//! ```
//!
//! Curve files use the same leading row without `delta`, a `v_0,...` header
//! and one curve per row. Reals are written with 17 significant digits so a
//! write/read cycle is bit-exact.

use std::io::{BufRead, BufReader, Read, Write};

use super::{Curve, FunctionalDataset, Grid, Observation};
use crate::error::{Error, Result};

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_real(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse { line, msg: format!("`{field}`: {e}") })
}

fn parse_grid_line(line: &str, lineno: usize, with_delta: bool) -> Result<(Grid, Option<f64>)> {
    let body = line
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|l| l.strip_prefix("grid,"))
        .ok_or_else(|| Error::Parse { line: lineno, msg: "expected `# grid,...` row".into() })?;
    let fields: Vec<&str> = body.split(',').collect();
    let expected = if with_delta { 4 } else { 3 };
    if fields.len() != expected {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("grid row needs {expected} fields, got {}", fields.len()),
        });
    }
    let start = parse_real(fields[0], lineno)?;
    let end = parse_real(fields[1], lineno)?;
    let n_points = fields[2]
        .trim()
        .parse::<usize>()
        .map_err(|e| Error::Parse { line: lineno, msg: format!("n_points: {e}") })?;
    let delta = if with_delta { Some(parse_real(fields[3], lineno)?) } else { None };
    Ok((Grid::new(start, end, n_points)?, delta))
}

fn data_lines(reader: impl Read) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
}

pub fn write_dataset_csv(ds: &FunctionalDataset, mut out: impl Write) -> Result<()> {
    let g = ds.grid();
    writeln!(
        out,
        "# grid,{},{},{},{}",
        fmt_real(g.start()),
        fmt_real(g.end()),
        g.n_points(),
        fmt_real(ds.delta())
    )?;
    let mut header = String::from("t,zeta,y");
    for i in 0..g.n_points() {
        header.push_str(&format!(",v_{i}"));
    }
    writeln!(out, "{header}")?;
    let mut row = String::new();
    for obs in ds.observations() {
        row.clear();
        row.push_str(&fmt_real(obs.t));
        row.push(',');
        row.push_str(if obs.is_observed() { "1," } else { "0," });
        if let Some(y) = obs.y {
            row.push_str(&fmt_real(y));
        }
        for v in obs.x.values() {
            row.push(',');
            row.push_str(&fmt_real(*v));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn read_dataset_csv(reader: impl Read) -> Result<FunctionalDataset> {
    let mut lines = data_lines(reader);
    let (lineno, first) = lines
        .next()
        .ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let (grid, delta) = parse_grid_line(&first?, lineno, true)?;
    let delta = delta.expect("grid row parsed with delta");
    let (lineno, header) = lines
        .next()
        .ok_or(Error::Parse { line: lineno + 1, msg: "missing header".into() })?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 3 + grid.n_points() || cols[..3] != ["t", "zeta", "y"] {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("header must be t,zeta,y,v_0..v_{}", grid.n_points() - 1),
        });
    }
    let mut observations = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let t = parse_real(fields[0], lineno)?;
        let y = match fields[1].trim() {
            "1" => Some(parse_real(fields[2], lineno)?),
            "0" if fields[2].trim().is_empty() => None,
            "0" => {
                return Err(Error::Parse { line: lineno, msg: "zeta = 0 but y is present".into() })
            }
            other => {
                return Err(Error::Parse { line: lineno, msg: format!("zeta must be 0 or 1, got `{other}`") })
            }
        };
        let values = fields[3..]
            .iter()
            .map(|f| parse_real(f, lineno))
            .collect::<Result<Vec<_>>>()?;
        observations.push(Observation { t, x: Curve::new(grid, values)?, y });
    }
    FunctionalDataset::new(grid, delta, observations)
}

pub fn write_curve_csv(curves: &[Curve], mut out: impl Write) -> Result<()> {
    let grid = curves.first().ok_or(Error::EmptyInput)?.grid();
    if curves.iter().any(|c| c.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    writeln!(out, "# grid,{},{},{}", fmt_real(grid.start()), fmt_real(grid.end()), grid.n_points())?;
    let header: Vec<String> = (0..grid.n_points()).map(|i| format!("v_{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for c in curves {
        let row: Vec<String> = c.values().iter().map(|v| fmt_real(*v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_curve_csv(reader: impl Read) -> Result<Vec<Curve>> {
    let mut lines = data_lines(reader);
    let (lineno, first) = lines
        .next()
        .ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let (grid, _) = parse_grid_line(&first?, lineno, false)?;
    let mut curves = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        if line.trim_start().starts_with('v') {
            continue;
        }
        let values = line
            .split(',')
            .map(|f| parse_real(f, lineno))
            .collect::<Result<Vec<_>>>()?;
        curves.push(Curve::new(grid, values)?);
    }
    if curves.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(curves)
}
