//! Penalization-parameter study: `‖χ(u - Π)‖_{L²(Q)}` against `η`.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::driver::{self, StopReason};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eta: f64,
    pub defect: f64,
    pub steps: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log defect` against `log η`; needs two rows.
    pub slope: Option<f64>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eta,defect_l2,steps,stop_reason\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.6e},{:.16e},{},{}", r.eta, r.defect, r.steps, r.stop_reason.as_str());
        }
        if let Some(p) = self.slope {
            let _ = writeln!(s, "# slope = {p:.6}");
        }
        s
    }
}

/// Worker count from `PENALMHD_THREADS` (unset or invalid: rayon's default).
pub fn thread_cap() -> Option<usize> {
    std::env::var("PENALMHD_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n| n > 0)
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs `base` once per `η`, each in its own `output.dir/eta_<i>`.
pub fn eta_sweep(base: &SimConfig, etas: &[f64]) -> Result<SweepTable> {
    if etas.is_empty() {
        return Err(Error::Config("eta sweep needs at least one value".into()));
    }
    let configs: Vec<SimConfig> = etas
        .iter()
        .enumerate()
        .map(|(i, &eta)| {
            let mut c = base.clone();
            c.reg.eta = eta;
            c.output.dir = base.output.dir.join(format!("eta_{i}"));
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<SweepRow>> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let s = driver::run(c)?;
                Ok(SweepRow { eta: c.reg.eta, defect: s.rigid_defect, steps: s.steps, stop_reason: s.stop_reason })
            })
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.defect).collect();
    Ok(SweepTable { slope: loglog_slope(&xs, &ys), rows })
}
