//! Piecewise affine and piecewise constant interpolants of a stored run.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};
use crate::vtk::{self, Snapshot};

/// Consecutive states `0, 1, …, N` with uniform spacing.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<Snapshot>,
}

/// `(f_Δt(t), f̄_Δt(t), f̄'_Δt(t))`.
#[derive(Debug, Clone)]
pub struct Interpolants {
    pub affine: Snapshot,
    pub constant: Snapshot,
    pub lagged: Snapshot,
}

fn blend_s(a: &ScalarField, b: &ScalarField, wa: f64, wb: f64) -> ScalarField {
    a.zip_map(b, |x, y| wa * x + wb * y)
}

fn blend_v(a: &VectorField, b: &VectorField, wa: f64, wb: f64) -> VectorField {
    a.scale(wa).add(&b.scale(wb))
}

impl Trajectory {
    /// Checks that steps run `0, 1, 2, …` on one grid.
    pub fn new(mut states: Vec<Snapshot>) -> Result<Self> {
        states.sort_by_key(|s| s.step);
        if states.is_empty() {
            return Err(Error::Parse("empty trajectory".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if s.step != i {
                return Err(Error::Parse(format!(
                    "trajectory needs every step from 0; step {i} is missing (write snapshots with output.cadence = 1)"
                )));
            }
            if s.rho.grid() != states[0].rho.grid() {
                return Err(Error::Parse("trajectory snapshots use different grids".into()));
            }
        }
        Ok(Self { states })
    }

    /// Reads every `snap_*.vtk` in `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut states = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let name = e.file_name().to_string_lossy().into_owned();
            if name.starts_with("snap_") && name.ends_with(".vtk") {
                states.push(vtk::read(&e.path())?);
            }
        }
        Self::new(states)
    }

    pub fn end_time(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.time)
    }

    pub fn interpolants(&self, t: f64) -> Result<Interpolants> {
        let end = self.end_time();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange { t, end });
        }
        let s = &self.states;
        if s.len() == 1 || t <= 0.0 {
            return Ok(Interpolants { affine: s[0].clone(), constant: s[0].clone(), lagged: s[0].clone() });
        }
        // Smallest k with t ≤ t_k, so t ∈ (t_{k-1}, t_k].
        let mut k = s.partition_point(|x| x.time < t).min(s.len() - 1).max(1);
        let dt = s[k].time - s[k - 1].time;
        if (s[k - 1].time - t).abs() <= 1e-12 * dt && k > 1 {
            k -= 1;
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let dt = b.time - a.time;
        let wb = if (b.time - t).abs() <= 1e-12 * dt { 1.0 } else { (t - a.time) / dt };
        let wa = 1.0 - wb;
        let affine = if wb == 1.0 {
            Snapshot { time: t, ..b.clone() }
        } else {
            Snapshot {
                step: b.step,
                time: t,
                rho: blend_s(&a.rho, &b.rho, wa, wb),
                chi: blend_s(&a.chi, &b.chi, wa, wb),
                u: blend_v(&a.u, &b.u, wa, wb),
                b: blend_v(&a.b, &b.b, wa, wb),
            }
        };
        Ok(Interpolants { affine, constant: b.clone(), lagged: a.clone() })
    }
}
