//! Plain-text snapshot format.
//!
//! ```text
//! GRID L=<float> N=<int> COMPONENTS=<1|3>
//! <c0> [<c1> <c2>]      one line per node, x-fastest
//! ```

use std::io::{BufRead, Write};

use super::{Grid, ScalarField, VectorField};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Scalar(ScalarField),
    Vector(VectorField),
}

pub fn write_snapshot<W: Write>(mut w: W, snap: &Snapshot) -> Result<()> {
    let (grid, comps): (Grid, Vec<&[f64]>) = match snap {
        Snapshot::Scalar(f) => (f.grid(), vec![f.values()]),
        Snapshot::Vector(v) => (v.grid(), v.components().iter().map(|c| c.as_slice()).collect()),
    };
    writeln!(w, "GRID L={:.16e} N={} COMPONENTS={}", grid.length(), grid.n(), comps.len())?;
    let mut line = String::new();
    for idx in 0..grid.len() {
        line.clear();
        for (c, vals) in comps.iter().enumerate() {
            if c > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{:.16e}", vals[idx]));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn header_value<'a>(tok: Option<&'a str>, key: &str) -> Result<&'a str> {
    tok.and_then(|t| t.strip_prefix(key)).and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| Error::Parse(format!("snapshot header: expected {key}=<value>")))
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<Snapshot> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))??;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("GRID") {
        return Err(Error::Parse("snapshot header must start with GRID".into()));
    }
    let l: f64 = header_value(toks.next(), "L")?
        .parse()
        .map_err(|e| Error::Parse(format!("L: {e}")))?;
    let n: usize = header_value(toks.next(), "N")?
        .parse()
        .map_err(|e| Error::Parse(format!("N: {e}")))?;
    let nc: usize = header_value(toks.next(), "COMPONENTS")?
        .parse()
        .map_err(|e| Error::Parse(format!("COMPONENTS: {e}")))?;
    if nc != 1 && nc != 3 {
        return Err(Error::Parse(format!("COMPONENTS must be 1 or 3, got {nc}")));
    }
    let grid = Grid::new(l, n)?;
    let mut comps = vec![Vec::with_capacity(grid.len()); nc];
    for row in 0..grid.len() {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("snapshot truncated at record {row}")))??;
        let mut count = 0;
        for (c, tok) in line.split_whitespace().enumerate() {
            if c >= nc {
                return Err(Error::Parse(format!("record {row}: too many columns")));
            }
            let v: f64 = tok.parse().map_err(|e| Error::Parse(format!("record {row}: {e}")))?;
            comps[c].push(v);
            count += 1;
        }
        if count != nc {
            return Err(Error::Parse(format!("record {row}: expected {nc} columns, got {count}")));
        }
    }
    Ok(if nc == 1 {
        Snapshot::Scalar(ScalarField::from_values(grid, comps.pop().unwrap())?)
    } else {
        let z = comps.pop().unwrap();
        let y = comps.pop().unwrap();
        let x = comps.pop().unwrap();
        Snapshot::Vector(VectorField::from_components(grid, [x, y, z])?)
    })
}
