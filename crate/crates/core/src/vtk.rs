//! Legacy ASCII VTK structured-points snapshots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};

/// One stored state.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: ScalarField,
    pub chi: ScalarField,
    pub u: VectorField,
    pub b: VectorField,
}

pub fn to_string(s: &Snapshot) -> String {
    let g = s.rho.grid();
    let n = g.n();
    let h = g.h();
    let mut out = String::with_capacity(g.len() * 90);
    let _ = write!(
        out,
        "# vtk DataFile Version 3.0\npenalmhd step={} time={:.16e}\nASCII\nDATASET STRUCTURED_POINTS\n\
         DIMENSIONS {n} {n} {n}\nORIGIN 0 0 0\nSPACING {h:e} {h:e} {h:e}\nPOINT_DATA {}\n",
        s.step,
        s.time,
        g.len()
    );
    for (name, f) in [("rho", &s.rho), ("chi", &s.chi)] {
        let _ = write!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default\n");
        for v in &f.values {
            let _ = writeln!(out, "{v:.8e}");
        }
    }
    for (name, f) in [("u", &s.u), ("B", &s.b)] {
        let _ = writeln!(out, "VECTORS {name} double");
        for c in 0..g.len() {
            let v = f.at(c);
            let _ = writeln!(out, "{:.8e} {:.8e} {:.8e}", v[0], v[1], v[2]);
        }
    }
    out
}

pub fn write(path: &Path, s: &Snapshot) -> Result<()> {
    std::fs::write(path, to_string(s))?;
    Ok(())
}

fn perr(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn parse(text: &str) -> Result<Snapshot> {
    let mut lines = text.lines();
    let mut next = || lines.next().ok_or_else(|| perr("unexpected end of VTK file"));
    if next()?.trim() != "# vtk DataFile Version 3.0" {
        return Err(perr("not a legacy VTK file"));
    }
    let title = next()?.to_string();
    let (mut step, mut time) = (0usize, 0.0f64);
    for tok in title.split_whitespace() {
        if let Some(v) = tok.strip_prefix("step=") {
            step = v.parse().map_err(|_| perr("bad step in title"))?;
        } else if let Some(v) = tok.strip_prefix("time=") {
            time = v.parse().map_err(|_| perr("bad time in title"))?;
        }
    }
    if next()?.trim() != "ASCII" || next()?.trim() != "DATASET STRUCTURED_POINTS" {
        return Err(perr("expected ASCII STRUCTURED_POINTS"));
    }
    let dims: Vec<usize> = next()?
        .split_whitespace()
        .skip(1)
        .map(|t| t.parse().map_err(|_| perr("bad DIMENSIONS")))
        .collect::<Result<_>>()?;
    if dims.len() != 3 || dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(perr("DIMENSIONS must be n n n"));
    }
    let _origin = next()?;
    let spacing: f64 = next()?
        .split_whitespace()
        .nth(1)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| perr("bad SPACING"))?;
    let n = dims[0];
    let grid = Grid::new(n, spacing * n as f64)?;
    let _point_data = next()?;
    let len = grid.len();

    let mut rest = text.lines().skip(8);
    let mut scalars: Vec<(String, Vec<f64>)> = Vec::new();
    let mut vectors: Vec<(String, Vec<f64>)> = Vec::new();
    while let Some(line) = rest.next() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.first() {
            None => continue,
            Some(&"SCALARS") => {
                let name = parts.get(1).ok_or_else(|| perr("SCALARS without name"))?.to_string();
                let _lookup = rest.next();
                let mut vals = Vec::with_capacity(len);
                for _ in 0..len {
                    let l = rest.next().ok_or_else(|| perr("truncated scalar block"))?;
                    vals.push(l.trim().parse().map_err(|_| perr(format!("bad value in {name}")))?);
                }
                scalars.push((name, vals));
            }
            Some(&"VECTORS") => {
                let name = parts.get(1).ok_or_else(|| perr("VECTORS without name"))?.to_string();
                let mut comps = vec![0.0; 3 * len];
                for c in 0..len {
                    let l = rest.next().ok_or_else(|| perr("truncated vector block"))?;
                    let v: Vec<f64> = l.split_whitespace().map(|t| t.parse().map_err(|_| perr(format!("bad value in {name}")))).collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(perr(format!("vector {name} needs three components")));
                    }
                    for d in 0..3 {
                        comps[d * len + c] = v[d];
                    }
                }
                vectors.push((name, comps));
            }
            Some(other) => return Err(perr(format!("unexpected VTK keyword {other}"))),
        }
    }
    let scalar = |name: &str| -> Result<ScalarField> {
        let v = scalars.iter().find(|(n, _)| n == name).ok_or_else(|| perr(format!("missing field {name}")))?;
        ScalarField::from_values(&grid, v.1.clone())
    };
    let vector = |name: &str| -> Result<VectorField> {
        let v = vectors.iter().find(|(n, _)| n == name).ok_or_else(|| perr(format!("missing field {name}")))?;
        VectorField::from_flat(&grid, &v.1)
    };
    Ok(Snapshot { step, time, rho: scalar("rho")?, chi: scalar("chi")?, u: vector("u")?, b: vector("B")? })
}

pub fn read(path: &Path) -> Result<Snapshot> {
    parse(&std::fs::read_to_string(path)?)
}
