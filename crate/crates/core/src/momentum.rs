//! Penalized, regularized implicit momentum step.
//!
//! The unknown lives in the discretely solenoidal subspace of the velocity
//! layout and the step is solved by a Galerkin method there, so the returned
//! velocity is exactly (to rounding) divergence-free and no splitting error
//! is introduced. The implicit operator is
//!
//! ```text
//! A u = (ρ + ρ')/(2Δt) u + ½ Σ_a [c_a ∂_a u + ∂_a(c_a u)] - 2ν div 𝔻(u) + ε Δ²u,
//! c_a = ρ u'_a + ε ∂_a ρ,
//! ```
//!
//! i.e. the time derivative, `div(ρ u' ⊗ u)` and `ε ∇u ∇ρ` written in
//! skew-symmetric form using the continuity step. With antisymmetric
//! first differences `⟨A u, u⟩` reproduces the kinetic-energy balance exactly.

use crate::error::{Error, Result};
use crate::grid::{self, Grid, ScalarField, VectorField};
use crate::mimetic::{self, Layout};
use crate::params::MaterialParams;
use crate::projection::Projector;
use crate::solver::{solve_pbicgstab, LinearOperator, Preconditioner, SolveReport};

/// `(1/μ) curl B × B` with the diagnostic curl.
pub fn lorentz_force(b: &VectorField, mu: f64) -> VectorField {
    grid::curl(b).cross(b).scale(1.0 / mu)
}

/// `(1/μ) curl B × B` with the scheme's curl.
pub fn lorentz_force_scheme(b: &VectorField, mu: f64) -> VectorField {
    let g = b.grid();
    let c = VectorField::from_flat(g, &mimetic::curl(g, &b.to_flat())).expect("same grid");
    c.cross(b).scale(1.0 / mu)
}

/// `(1/η) ρ' χ (u' - Π')`.
pub fn penalization_term(rho_prev: &ScalarField, chi_new: &ScalarField, u_prev: &VectorField, pi_prev: &VectorField, eta: f64) -> VectorField {
    let g = rho_prev.grid();
    let mut out = VectorField::zeros(g);
    for c in 0..g.len() {
        let w = chi_new.values[c] * rho_prev.values[c] / eta;
        if w != 0.0 {
            let (u, p) = (u_prev.at(c), pi_prev.at(c));
            out.set(c, [w * (u[0] - p[0]), w * (u[1] - p[1]), w * (u[2] - p[2])]);
        }
    }
    out
}

pub struct MomentumStepInputs<'a> {
    pub rho_new: &'a ScalarField,
    pub rho_prev: &'a ScalarField,
    pub u_prev: &'a VectorField,
    pub chi_new: &'a ScalarField,
    pub pi_prev: &'a VectorField,
    pub b_prev: &'a VectorField,
    pub g: &'a VectorField,
    pub params: MaterialParams,
    pub dt: f64,
    pub eps: f64,
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct MomentumStepOutput {
    pub u: VectorField,
    pub p: ScalarField,
    pub report: SolveReport,
    /// `max|u| Δt / h` of the new velocity.
    pub cfl: f64,
}

/// The implicit operator, masked to the velocity layout (not projected).
pub struct MomentumOperator {
    grid: Grid,
    mass: Vec<f64>,
    coef: [Vec<f64>; 3],
    nu: f64,
    eps: f64,
    mask: Vec<f64>,
}

impl MomentumOperator {
    pub fn new(rho_new: &ScalarField, rho_prev: &ScalarField, u_prev: &VectorField, nu: f64, eps: f64, dt: f64) -> Self {
        let g = *rho_new.grid();
        let mass = rho_new.values.iter().zip(&rho_prev.values).map(|(a, b)| (a + b) / (2.0 * dt)).collect();
        let coef = [0, 1, 2].map(|a| {
            let dr = grid::partial(rho_new, a);
            rho_new
                .values
                .iter()
                .zip(&u_prev.comps[a].values)
                .zip(&dr.values)
                .map(|((r, u), d)| r * u + eps * d)
                .collect()
        });
        Self { grid: g, mass, coef, nu, eps, mask: Layout::Velocity.mask(&g) }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Unmasked `A x`.
    pub fn apply_raw(&self, x: &[f64], y: &mut [f64]) {
        let g = &self.grid;
        let len = g.len();
        let sym = mimetic::sym_grad(g, x);
        let mut tmp = vec![0.0; len];
        let mut lap = vec![0.0; len];
        let mut cx = vec![0.0; len];
        for comp in 0..3 {
            let xc = &x[comp * len..(comp + 1) * len];
            let yc = &mut y[comp * len..(comp + 1) * len];
            for c in 0..len {
                yc[c] = self.mass[c] * xc[c];
            }
            for a in 0..3 {
                let ca = &self.coef[a];
                let dx = mimetic::d(g, xc, a);
                for c in 0..len {
                    yc[c] += 0.5 * ca[c] * dx[c];
                    cx[c] = ca[c] * xc[c];
                }
                mimetic::d_add(g, &cx, a, 0.5, yc);
                mimetic::d_add(g, &sym[3 * comp + a], a, -2.0 * self.nu, yc);
            }
            mimetic::laplacian_into(g, xc, &mut tmp);
            mimetic::laplacian_into(g, &tmp, &mut lap);
            for c in 0..len {
                yc[c] += self.eps * lap[c];
            }
        }
    }
}

impl LinearOperator for MomentumOperator {
    fn dim(&self) -> usize {
        3 * self.grid.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_raw(x, y);
        y.iter_mut().zip(&self.mask).for_each(|(v, m)| *v *= m);
    }

    fn label(&self) -> &str {
        "momentum"
    }
}

/// Explicit right-hand side of the momentum step (unmasked).
pub fn momentum_rhs(inp: &MomentumStepInputs) -> Vec<f64> {
    let g = inp.rho_new.grid();
    let len = g.len();
    let pen = penalization_term(inp.rho_prev, inp.chi_new, inp.u_prev, inp.pi_prev, inp.eta);
    let lor = lorentz_force_scheme(inp.b_prev, inp.params.mu);
    let mut f = vec![0.0; 3 * len];
    for a in 0..3 {
        for c in 0..len {
            let r = inp.rho_prev.values[c];
            f[a * len + c] = r * inp.u_prev.comps[a].values[c] / inp.dt - pen.comps[a].values[c]
                + r * inp.g.comps[a].values[c]
                + lor.comps[a].values[c];
        }
    }
    f
}

struct Projected<'a> {
    op: &'a MomentumOperator,
    proj: &'a Projector,
}

impl LinearOperator for Projected<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(x, y);
        self.proj.project_in_place(y);
    }
    fn label(&self) -> &str {
        "projected momentum"
    }
}

/// Dirichlet sine basis of the 1-D second difference on `p` points.
struct SineBasis {
    p: usize,
    lo: usize,
    q: Vec<f64>,
    lam: Vec<f64>,
}

impl SineBasis {
    fn new(lo: usize, hi: usize, h: f64) -> Self {
        let p = hi - lo + 1;
        let np = (p + 1) as f64;
        let scale = (2.0 / np).sqrt();
        let q = (0..p * p)
            .map(|im| {
                let (i, m) = (im / p, im % p);
                scale * (std::f64::consts::PI * ((i + 1) * (m + 1)) as f64 / np).sin()
            })
            .collect();
        let lam = (0..p)
            .map(|m| 4.0 / (h * h) * (std::f64::consts::PI * (m + 1) as f64 / (2.0 * np)).sin().powi(2))
            .collect();
        Self { p, lo, q, lam }
    }
}

/// Applies the symmetric basis matrix along `axis` of a block with extents `dims`.
fn transform_axis(data: &mut [f64], dims: [usize; 3], axis: usize, b: &SineBasis) {
    let p = b.p;
    let stride = [1, dims[0], dims[0] * dims[1]][axis];
    let mut line = vec![0.0; p];
    for base in 0..data.len() {
        let coord = (base / stride) % dims[axis];
        if coord != 0 {
            continue;
        }
        for m in 0..p {
            line[m] = data[base + m * stride];
        }
        for r in 0..p {
            let row = &b.q[r * p..(r + 1) * p];
            data[base + r * stride] = row.iter().zip(&line).map(|(a, x)| a * x).sum();
        }
    }
}

/// Inverse of the constant-coefficient model `m̄ - νΔ + εΔ²` per velocity
/// component, diagonalized in sine bases, followed by the projection.
pub struct SpectralPreconditioner<'a> {
    grid: Grid,
    bases: Vec<[SineBasis; 3]>,
    mass: f64,
    nu: f64,
    eps: f64,
    proj: &'a Projector,
}

impl<'a> SpectralPreconditioner<'a> {
    pub fn new(op: &MomentumOperator, proj: &'a Projector) -> Self {
        let g = op.grid;
        let n = g.n();
        let bases = (0..3)
            .map(|comp| {
                [0, 1, 2].map(|axis| {
                    let (lo, hi) = Layout::Velocity.range(n, comp, axis);
                    SineBasis::new(lo, hi, g.h())
                })
            })
            .collect();
        let mass = op.mass.iter().sum::<f64>() / op.mass.len() as f64;
        Self { grid: g, bases, mass, nu: op.nu, eps: op.eps, proj }
    }
}

impl Preconditioner for SpectralPreconditioner<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let g = &self.grid;
        let len = g.len();
        z.iter_mut().for_each(|v| *v = 0.0);
        for (comp, b) in self.bases.iter().enumerate() {
            let dims = [b[0].p, b[1].p, b[2].p];
            let mut block = vec![0.0; dims[0] * dims[1] * dims[2]];
            let at = |i: usize, j: usize, k: usize| comp * len + g.idx(b[0].lo + i, b[1].lo + j, b[2].lo + k);
            for k in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        block[(k * dims[1] + j) * dims[0] + i] = r[at(i, j, k)];
                    }
                }
            }
            for axis in 0..3 {
                transform_axis(&mut block, dims, axis, &b[axis]);
            }
            for k in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        let lam = b[0].lam[i] + b[1].lam[j] + b[2].lam[k];
                        block[(k * dims[1] + j) * dims[0] + i] /= self.mass + self.nu * lam + self.eps * lam * lam;
                    }
                }
            }
            for axis in 0..3 {
                transform_axis(&mut block, dims, axis, &b[axis]);
            }
            for k in 0..dims[2] {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        z[at(i, j, k)] = block[(k * dims[1] + j) * dims[0] + i];
                    }
                }
            }
        }
        self.proj.project_in_place(z);
    }
}

pub fn solve_momentum_step(inp: &MomentumStepInputs, proj: &Projector, tol: f64, max_iter: usize) -> Result<MomentumStepOutput> {
    let g = *inp.rho_new.grid();
    for (name, ok) in [
        ("rho_new", inp.rho_new.is_finite()),
        ("rho_prev", inp.rho_prev.is_finite()),
        ("u_prev", inp.u_prev.is_finite()),
        ("pi_prev", inp.pi_prev.is_finite()),
        ("b_prev", inp.b_prev.is_finite()),
        ("g", inp.g.is_finite()),
    ] {
        if !ok {
            return Err(Error::Config(format!("momentum step input {name} is not finite")));
        }
    }
    let op = MomentumOperator::new(inp.rho_new, inp.rho_prev, inp.u_prev, inp.params.nu, inp.eps, inp.dt);
    let mut rhs = momentum_rhs(inp);
    let full_rhs = rhs.clone();
    proj.project_in_place(&mut rhs);
    let mut x0 = inp.u_prev.to_flat();
    proj.project_in_place(&mut x0);
    let wrapped = Projected { op: &op, proj };
    let pre = SpectralPreconditioner::new(&op, proj);
    let (mut u, report) = solve_pbicgstab(&wrapped, &pre, &rhs, Some(&x0), tol, max_iter);
    if !report.converged {
        return Err(Error::Solver { what: "momentum", report });
    }
    proj.project_in_place(&mut u);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("momentum solution"));
    }
    // Pressure: the gradient part of the masked residual.
    let mut au = vec![0.0; u.len()];
    op.apply(&u, &mut au);
    let mut r: Vec<f64> = full_rhs.iter().zip(&au).map(|(f, a)| f - a).collect();
    let p = proj.project_in_place(&mut r);
    let u = VectorField::from_flat(&g, &u)?;
    let cfl = u.max_norm() * inp.dt / g.h();
    Ok(MomentumStepOutput { u, p: ScalarField::from_values(&g, p)?, report, cfl })
}
