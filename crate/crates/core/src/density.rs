//! Implicit, diffusion-regularized continuity step.
//!
//! `(ρ - ρ')/Δt + u'·∇ρ - εΔρ = 0` with `∂ρ/∂n = 0`. Advection is central,
//! diffusion the cell-centred 7-point Neumann Laplacian (reflection ghosts).
//! For a discretely solenoidal `u'` vanishing on the boundary layer the matrix
//! has row and column sums `1/Δt`; when the cell Péclet number
//! `max|u'_a| h / (2ε)` is at most one it is also an M-matrix, so the step is
//! a doubly stochastic averaging of `ρ'`. That gives the maximum principle,
//! exact mass conservation and decay of `∫β(ρ)` for every convex `β`.

use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, ScalarField, VectorField};
use crate::solver::{solve_bicgstab_from, LinearOperator, SolveReport};

/// Tolerated excursion outside the previous range.
pub const BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityStepReport {
    pub min: f64,
    pub max: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    /// Cell Péclet number `max|u_a| h / (2ε)`.
    pub peclet: f64,
    pub solve: SolveReport,
}

pub struct DensityOperator<'a> {
    grid: Grid,
    u: &'a VectorField,
    eps: f64,
    inv_dt: f64,
}

impl<'a> DensityOperator<'a> {
    pub fn new(u: &'a VectorField, eps: f64, dt: f64) -> Self {
        Self { grid: *u.grid(), u, eps, inv_dt: 1.0 / dt }
    }
}

impl LinearOperator for DensityOperator<'_> {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = &self.grid;
        let n = g.n();
        let h = g.h();
        let dif = self.eps / (h * h);
        let adv = 0.5 / h;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let c = g.idx(i, j, k);
                    let xc = x[c];
                    let mut acc = self.inv_dt * xc;
                    for (axis, p) in [i, j, k].into_iter().enumerate() {
                        let st = g.stride(axis);
                        let fwd = if p + 1 < n { x[c + st] } else { xc };
                        let bwd = if p > 0 { x[c - st] } else { xc };
                        acc += adv * self.u.comps[axis].values[c] * (fwd - bwd);
                        acc -= dif * ((fwd - xc) + (bwd - xc));
                    }
                    y[c] = acc;
                }
            }
        }
    }

    fn label(&self) -> &str {
        "continuity"
    }
}

pub fn peclet(u: &VectorField, eps: f64) -> f64 {
    u.max_abs() * u.grid().h() / (2.0 * eps)
}

/// One continuity step. `ε = 0` is accepted (pure implicit advection) but
/// then no bound is enforced.
pub fn solve_density_step(
    rho_prev: &ScalarField,
    u_prev: &VectorField,
    eps: f64,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, DensityStepReport)> {
    if !(eps >= 0.0 && dt > 0.0) {
        return Err(Error::Config(format!("density step needs eps >= 0, dt > 0 (got {eps}, {dt})")));
    }
    if !rho_prev.is_finite() || !u_prev.is_finite() {
        return Err(Error::NonFinite("density step input"));
    }
    let g = rho_prev.grid();
    let op = DensityOperator::new(u_prev, eps, dt);
    let rhs: Vec<f64> = rho_prev.values.iter().map(|r| r / dt).collect();
    let (x, solve) = solve_bicgstab_from(&op, &rhs, Some(&rho_prev.values), tol, max_iter);
    if !solve.converged {
        return Err(Error::Solver { what: "continuity", report: solve });
    }
    let rho = ScalarField::from_values(g, x)?;
    if !rho.is_finite() {
        return Err(Error::NonFinite("density"));
    }
    let (lo, hi) = (rho_prev.min(), rho_prev.max());
    let (min, max) = (rho.min(), rho.max());
    if eps > 0.0 && (min < lo - BOUND_SLACK || max > hi + BOUND_SLACK) {
        return Err(Error::MaximumPrinciple { lower: lo, upper: hi, min, max });
    }
    let square = |z: f64| z * z;
    let (entropy_after, entropy_before) = entropy_check(&rho, rho_prev, square);
    Ok((rho, DensityStepReport { min, max, entropy_before, entropy_after, peclet: peclet(u_prev, eps.max(f64::MIN_POSITIVE)), solve }))
}

/// `(∫β(ρ_new), ∫β(ρ_prev))`.
pub fn entropy_check(rho_new: &ScalarField, rho_prev: &ScalarField, beta: impl Fn(f64) -> f64) -> (f64, f64) {
    (integrate(&rho_new.map(&beta)), integrate(&rho_prev.map(&beta)))
}
