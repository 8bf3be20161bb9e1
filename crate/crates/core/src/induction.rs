//! Regularized implicit induction step, forcing mollification and
//! electromagnetic diagnostics.
//!
//! The step solves, on the discretely solenoidal subspace of the magnetic
//! layout,
//!
//! ```text
//! B/Δt + curl[(η_eff + q) curl B] + ε curl⁴ B = B'/Δt + curl(u × B' + J/σ),
//! q = (ε/μ²)|curl B_lag|²,
//! ```
//!
//! with `η_eff = 1/(σμ)` in the fluid and `1/(σμκ)` in the body. The quartic
//! coefficient is lagged inside a Picard loop; every pass is a symmetric
//! positive definite solve done by Jacobi-preconditioned CG.

use crate::error::{Error, Result};
use crate::grid::{self, Grid, ScalarField, VectorField};
use crate::mimetic::{self, Layout};
use crate::params::MaterialParams;
use crate::projection::Projector;
use crate::solver::{solve_pcg, LinearOperator, Preconditioner, SolveReport};

pub struct InductionStepInputs<'a> {
    pub b_prev: &'a VectorField,
    pub u_new: &'a VectorField,
    pub chi_new: &'a ScalarField,
    pub j: &'a VectorField,
    pub params: MaterialParams,
    pub dt: f64,
    pub eps: f64,
    pub kappa_solid: f64,
}

#[derive(Debug, Clone)]
pub struct InductionStepOutput {
    pub b: VectorField,
    /// Report of the last linear solve.
    pub report: SolveReport,
    pub picard_iterations: usize,
    pub picard_delta: f64,
}

/// Cellwise resistivity `η_eff`.
pub fn resistivity(chi: &ScalarField, params: &MaterialParams, kappa_solid: f64) -> Vec<f64> {
    let eta = params.resistivity();
    chi.values.iter().map(|&x| if x > 0.5 { eta / kappa_solid } else { eta }).collect()
}

/// Frozen-coefficient induction operator, masked to the magnetic layout.
pub struct InductionOperator {
    grid: Grid,
    inv_dt: f64,
    weight: Vec<f64>,
    eps: f64,
    mask: Vec<f64>,
}

impl InductionOperator {
    pub fn new(grid: &Grid, dt: f64, weight: Vec<f64>, eps: f64) -> Self {
        Self { grid: *grid, inv_dt: 1.0 / dt, weight, eps, mask: Layout::Magnetic.mask(grid) }
    }

    /// Diagonal of the operator (exact for the first two terms; the curl⁴
    /// part uses its interior value everywhere).
    pub fn diagonal(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n();
        let len = g.len();
        let h2 = 4.0 * g.h() * g.h();
        // Interior column norm of curl curl.
        let mid = g.idx(n / 2, n / 2, n / 2);
        let mut e = vec![0.0; 3 * len];
        e[mid] = 1.0;
        let cc = mimetic::curl(g, &mimetic::curl(g, &e));
        let c4 = self.eps * cc.iter().map(|x| x * x).sum::<f64>();
        let mut diag = vec![0.0; 3 * len];
        for comp in 0..3 {
            for c in 0..len {
                let (i, j, k) = g.coords(c);
                let pos = [i, j, k];
                let mut s = 0.0;
                for b in 0..3 {
                    if b == comp {
                        continue;
                    }
                    let st = g.stride(b);
                    if pos[b] + 1 < n {
                        s += self.weight[c + st];
                    }
                    if pos[b] > 0 {
                        s += self.weight[c - st];
                    }
                }
                diag[comp * len + c] = self.inv_dt + s / h2 + c4;
            }
        }
        diag
    }
}

impl LinearOperator for InductionOperator {
    fn dim(&self) -> usize {
        3 * self.grid.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = &self.grid;
        let len = g.len();
        let cx = mimetic::curl(g, x);
        let mut w = cx.clone();
        for comp in 0..3 {
            for c in 0..len {
                w[comp * len + c] *= self.weight[c];
            }
        }
        mimetic::curl_into(g, &w, y);
        if self.eps != 0.0 {
            let c4 = mimetic::curl(g, &mimetic::curl(g, &mimetic::curl(g, &cx)));
            for (yi, ci) in y.iter_mut().zip(&c4) {
                *yi += self.eps * ci;
            }
        }
        for ((yi, xi), m) in y.iter_mut().zip(x).zip(&self.mask) {
            *yi = m * (*yi + self.inv_dt * xi);
        }
    }

    fn symmetric(&self) -> bool {
        true
    }

    fn label(&self) -> &str {
        "induction"
    }
}

struct ProjectedOp<'a> {
    op: &'a InductionOperator,
    proj: &'a Projector,
}

impl LinearOperator for ProjectedOp<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(x, y);
        self.proj.project_in_place(y);
    }
    fn symmetric(&self) -> bool {
        true
    }
}

/// `z = P D⁻¹ r`.
struct ProjectedJacobi<'a> {
    inv_diag: Vec<f64>,
    proj: &'a Projector,
}

impl Preconditioner for ProjectedJacobi<'_> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
        self.proj.project_in_place(z);
    }
}

/// Explicit right-hand side `B'/Δt + curl(u × B' + J/σ)` (unmasked).
pub fn induction_rhs(inp: &InductionStepInputs) -> Vec<f64> {
    let g = inp.b_prev.grid();
    let emf = inp.u_new.cross(inp.b_prev).add(&inp.j.scale(1.0 / inp.params.sigma));
    let mut rhs = mimetic::curl(g, &emf.to_flat());
    for (r, b) in rhs.iter_mut().zip(inp.b_prev.to_flat()) {
        *r += b / inp.dt;
    }
    rhs
}

/// Quartic-term coefficient `(ε/μ²)|curl B|²` plus the resistivity.
fn weights(g: &Grid, base: &[f64], b: &[f64], eps: f64, mu: f64) -> Vec<f64> {
    let len = g.len();
    let cb = mimetic::curl(g, b);
    (0..len)
        .map(|c| {
            let s = cb[c] * cb[c] + cb[len + c] * cb[len + c] + cb[2 * len + c] * cb[2 * len + c];
            base[c] + eps / (mu * mu) * s
        })
        .collect()
}

pub fn solve_induction_step(
    inp: &InductionStepInputs,
    proj: &Projector,
    tol: f64,
    max_iter: usize,
    picard_max: usize,
) -> Result<InductionStepOutput> {
    let g = *inp.b_prev.grid();
    if !(inp.params.sigma > 0.0 && inp.params.mu > 0.0 && inp.kappa_solid > 0.0 && inp.kappa_solid <= 1.0) {
        return Err(Error::Config("induction step needs sigma, mu > 0 and kappa_solid in (0, 1]".into()));
    }
    if !inp.b_prev.is_finite() || !inp.u_new.is_finite() || !inp.j.is_finite() {
        return Err(Error::NonFinite("induction step input"));
    }
    let base = resistivity(inp.chi_new, &inp.params, inp.kappa_solid);
    let mut rhs = induction_rhs(inp);
    proj.project_in_place(&mut rhs);
    let mut lag = inp.b_prev.to_flat();
    proj.project_in_place(&mut lag);
    let mut delta = f64::INFINITY;
    for pass in 1..=picard_max.max(1) {
        let op = InductionOperator::new(&g, inp.dt, weights(&g, &base, &lag, inp.eps, inp.params.mu), inp.eps);
        let pre = ProjectedJacobi { inv_diag: op.diagonal().iter().map(|d| 1.0 / d).collect(), proj };
        let wrapped = ProjectedOp { op: &op, proj };
        let (mut b, rep) = solve_pcg(&wrapped, &pre, &rhs, Some(&lag), tol, max_iter, None);
        if !rep.converged {
            return Err(Error::Solver { what: "induction", report: rep });
        }
        proj.project_in_place(&mut b);
        let diff: f64 = b.iter().zip(&lag).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        delta = if scale > 0.0 { diff / scale } else { diff };
        lag = b;
        if inp.eps == 0.0 || delta <= tol {
            if lag.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("induction solution"));
            }
            return Ok(InductionStepOutput { b: VectorField::from_flat(&g, &lag)?, report: rep, picard_iterations: pass, picard_delta: delta });
        }
    }
    Err(Error::Picard { what: "induction", iterations: picard_max, delta })
}

/// L² norm of `curl B` over body cells whose 5³ neighbourhood lies inside
/// the body.
pub fn solid_curl_residual(b: &VectorField, chi: &ScalarField) -> f64 {
    let g = b.grid();
    let n = g.n() as isize;
    let curl = grid::curl(b);
    let mut acc = 0.0;
    for c in 0..g.len() {
        if chi.values[c] < 0.5 {
            continue;
        }
        let (i, j, k) = g.coords(c);
        let (i, j, k) = (i as isize, j as isize, k as isize);
        let mut deep = true;
        'nb: for dk in -2..=2 {
            for dj in -2..=2 {
                for di in -2..=2 {
                    let (x, y, z) = (i + di, j + dj, k + dk);
                    if x < 0 || y < 0 || z < 0 || x >= n || y >= n || z >= n
                        || chi.values[g.idx(x as usize, y as usize, z as usize)] < 0.5
                    {
                        deep = false;
                        break 'nb;
                    }
                }
            }
        }
        if deep {
            acc += curl.at(c).iter().map(|v| v * v).sum::<f64>();
        }
    }
    (acc * g.cell_volume()).sqrt()
}

/// Smooth bump `θ` on `[-1, 1]` (unnormalized).
fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Number of midpoint nodes of the time mollifier.
pub const MOLLIFIER_NODES: usize = 32;

/// `f_γ(t) = ∫ θ_γ(t + ξ_γ(t) - s) f(s) ds` with `ξ_γ(t) = γ(T - 2t)/T`,
/// by midpoint quadrature with weights normalized to unit sum. Requires
/// `0 < γ ≤ T/2` and `t ∈ [0, T]`, which keeps the kernel support in `[0, T]`.
pub fn mollify_forcing(f: &dyn Fn(f64) -> VectorField, gamma: f64, t: f64, end: f64) -> Result<VectorField> {
    if !(gamma > 0.0 && gamma <= end / 2.0) {
        return Err(Error::Config(format!("mollifier width {gamma} must lie in (0, T/2]")));
    }
    if !(t >= 0.0 && t <= end) {
        return Err(Error::OutOfRange { t, end });
    }
    let centre = t + gamma * (end - 2.0 * t) / end;
    let lo = centre - gamma;
    debug_assert!(lo >= -1e-12 && centre + gamma <= end + 1e-12);
    let ds = 2.0 * gamma / MOLLIFIER_NODES as f64;
    let nodes: Vec<(f64, f64)> = (0..MOLLIFIER_NODES)
        .map(|m| {
            let s = lo + (m as f64 + 0.5) * ds;
            (s, bump((centre - s) / gamma))
        })
        .collect();
    let total: f64 = nodes.iter().map(|n| n.1).sum();
    let mut out: Option<VectorField> = None;
    for (s, w) in nodes {
        let term = f(s.clamp(0.0, end)).scale(w / total);
        out = Some(match out {
            None => term,
            Some(acc) => acc.add(&term),
        });
    }
    Ok(out.expect("at least one node"))
}

/// Electromagnetic diagnostics `(H, j, E)`: `H = B/μ`, and in the fluid
/// `j = curl H - J`, `E = j/σ - u × B`. In the body `j = 0`; `E` is not
/// reconstructed there and is reported as zero.
pub fn reconstruct_em(
    b: &VectorField,
    u: &VectorField,
    j_ext: &VectorField,
    chi: &ScalarField,
    sigma: f64,
    mu: f64,
) -> (VectorField, VectorField, VectorField) {
    let g = b.grid();
    let h = b.scale(1.0 / mu);
    let ch = grid::curl(&h);
    let ub = u.cross(b);
    let mut j = VectorField::zeros(g);
    let mut e = VectorField::zeros(g);
    for c in 0..g.len() {
        if chi.values[c] > 0.5 {
            continue;
        }
        let (a, jj, w) = (ch.at(c), j_ext.at(c), ub.at(c));
        let jc = [a[0] - jj[0], a[1] - jj[1], a[2] - jj[2]];
        j.set(c, jc);
        e.set(c, [jc[0] / sigma - w[0], jc[1] / sigma - w[1], jc[2] / sigma - w[2]]);
    }
    (h, j, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::tests::random_velocity;
    use crate::rigid::{indicator, RigidState, Shape};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_magnetic(g: &Grid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat: Vec<f64> = (0..3 * g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Projector::new(g, Layout::Magnetic).project_in_place(&mut flat);
        VectorField::from_flat(g, &flat).unwrap()
    }

    fn inputs<'a>(b: &'a VectorField, u: &'a VectorField, chi: &'a ScalarField, j: &'a VectorField, eps: f64) -> InductionStepInputs<'a> {
        InductionStepInputs { b_prev: b, u_new: u, chi_new: chi, j, params: MaterialParams::default(), dt: 0.01, eps, kappa_solid: 1e-2 }
    }

    #[test]
    fn zero_stays_zero() {
        let g = Grid::new(8, 1.0).unwrap();
        let z = VectorField::zeros(&g);
        let chi = ScalarField::zeros(&g);
        let proj = Projector::new(&g, Layout::Magnetic);
        let out = solve_induction_step(&inputs(&z, &z, &chi, &z, 1e-3), &proj, 1e-11, 500, 20).unwrap();
        assert_eq!(out.b.max_abs(), 0.0);
    }

    #[test]
    fn resistive_decay() {
        let g = Grid::new(10, 1.0).unwrap();
        let b0 = random_magnetic(&g, 1);
        let z = VectorField::zeros(&g);
        let chi = ScalarField::zeros(&g);
        let proj = Projector::new(&g, Layout::Magnetic);
        let out = solve_induction_step(&inputs(&b0, &z, &chi, &z, 0.0), &proj, 1e-11, 2000, 20).unwrap();
        let e = |b: &VectorField| b.to_flat().iter().map(|x| x * x).sum::<f64>();
        assert!(e(&out.b) <= e(&b0) * (1.0 + 1e-10));
        assert!(proj.max_div(&out.b.to_flat()) < 1e-9);
    }

    #[test]
    fn matches_dense_solve_of_linearized_system() {
        let g = Grid::new(8, 1.0).unwrap();
        let len = g.len();
        let b0 = random_magnetic(&g, 2);
        let u = random_velocity(&g, 1.0, 3);
        let body = RigidState::new(Shape::Sphere { radius: 0.25 }, [0.5; 3], &g).unwrap();
        let chi = indicator(&body, &g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let j = VectorField::from_flat(&g, &(0..3 * len).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
        let eps = 1e-9;
        let inp = inputs(&b0, &u, &chi, &j, eps);
        let proj = Projector::new(&g, Layout::Magnetic);
        let out = solve_induction_step(&inp, &proj, 1e-13, 5000, 20).unwrap();

        // Null space of the divergence on the active unknowns, then a dense
        // solve of the reduced system with the coefficient frozen at B_new.
        let mask = Layout::Magnetic.mask(&g);
        let active: Vec<usize> = (0..3 * len).filter(|&i| mask[i] == 1.0).collect();
        let na = active.len();
        let mut dm = DMatrix::<f64>::zeros(len, na);
        let mut e = vec![0.0; 3 * len];
        for (c, &i) in active.iter().enumerate() {
            e[i] = 1.0;
            let dv = mimetic::div(&g, &e);
            e[i] = 0.0;
            for r in 0..len {
                dm[(r, c)] = dv[r];
            }
        }
        let eig = (dm.transpose() * &dm).symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        let null: Vec<usize> = (0..na).filter(|&i| eig.eigenvalues[i] < 1e-10 * lmax).collect();
        let z = DMatrix::from_fn(na, null.len(), |r, c| eig.eigenvectors[(r, null[c])]);
        let base = resistivity(&chi, &inp.params, inp.kappa_solid);
        let op = InductionOperator::new(&g, inp.dt, weights(&g, &base, &out.b.to_flat(), eps, 1.0), eps);
        let mut a = DMatrix::<f64>::zeros(na, na);
        let mut col = vec![0.0; 3 * len];
        for (c, &i) in active.iter().enumerate() {
            e[i] = 1.0;
            op.apply(&e, &mut col);
            e[i] = 0.0;
            for (r, &ir) in active.iter().enumerate() {
                a[(r, c)] = col[ir];
            }
        }
        let f = induction_rhs(&inp);
        let fa = DVector::from_iterator(na, active.iter().map(|&i| f[i]));
        let coeffs = (z.transpose() * &a * &z).lu().solve(&(z.transpose() * fa)).unwrap();
        let ba = &z * coeffs;
        let flat = out.b.to_flat();
        let err = active.iter().enumerate().fold(0.0_f64, |m, (c, &i)| m.max((flat[i] - ba[c]).abs()));
        assert!(err <= 1e-7, "{err}");
    }

    #[test]
    fn picard_deltas_contract() {
        let g = Grid::new(10, 1.0).unwrap();
        let b0 = random_magnetic(&g, 5).scale(0.05);
        let z = VectorField::zeros(&g);
        let chi = ScalarField::zeros(&g);
        let proj = Projector::new(&g, Layout::Magnetic);
        let out = solve_induction_step(&inputs(&b0, &z, &chi, &z, 1e-4), &proj, 1e-11, 2000, 30).unwrap();
        assert!(out.picard_iterations >= 2);
        assert!(out.picard_delta <= 1e-11);
        // Too few passes for a strongly nonlinear case is an error, not silence.
        let big = random_magnetic(&g, 6).scale(50.0);
        let err = solve_induction_step(&inputs(&big, &z, &chi, &z, 1e-2), &proj, 1e-11, 2000, 2);
        assert!(matches!(err, Err(Error::Picard { .. })));
    }

    #[test]
    fn solid_residual_examples() {
        let g = Grid::new(16, 1.0).unwrap();
        let body = RigidState::new(Shape::Sphere { radius: 0.3 }, [0.5; 3], &g).unwrap();
        let chi = indicator(&body, &g);
        assert!(solid_curl_residual(&VectorField::constant(&g, [1.0, 2.0, 3.0]), &chi) < 1e-12);
        // Curl supported near the walls only.
        let b = g.sample_vector(|x| {
            let r = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt();
            if r > 0.42 { [-(x[1] - 0.5), x[0] - 0.5, 0.0] } else { [0.0; 3] }
        });
        assert!(solid_curl_residual(&b, &chi) < 1e-12);
    }

    #[test]
    fn mollifier_properties() {
        let g = Grid::new(8, 1.0).unwrap();
        let end = 1.0;
        let constant = |_: f64| VectorField::constant(&g, [1.5, -2.0, 0.25]);
        for gamma in [0.1, 0.3] {
            for t in [0.0, 0.3, 1.0] {
                let m = mollify_forcing(&constant, gamma, t, end).unwrap();
                assert!(m.max_abs_diff(&constant(t)) < 1e-14);
            }
        }
        let smooth = |s: f64| VectorField::constant(&g, [(3.0 * s).sin(), s * s, (s).exp()]);
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&gm| mollify_forcing(&smooth, gm, 0.5, end).unwrap().max_abs_diff(&smooth(0.5)))
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
        assert!(mollify_forcing(&smooth, 0.6, 0.5, end).is_err());
    }

    #[test]
    fn em_reconstruction() {
        let g = Grid::new(10, 1.0).unwrap();
        let z = VectorField::zeros(&g);
        let chi = ScalarField::zeros(&g);
        let (h, j, e) = reconstruct_em(&z, &z, &z, &chi, 1.0, 1.0);
        assert_eq!(h.max_abs() + j.max_abs() + e.max_abs(), 0.0);
        let b = VectorField::constant(&g, [1.0, 2.0, 3.0]);
        let jx = VectorField::constant(&g, [0.5, 0.0, -1.0]);
        let (h, j, _) = reconstruct_em(&b, &z, &jx, &chi, 1.0, 2.0);
        assert!(h.max_abs_diff(&b.scale(0.5)) < 1e-15);
        assert!(j.max_abs_diff(&jx.scale(-1.0)) < 1e-12);

        let body = RigidState::new(Shape::Sphere { radius: 0.2 }, [0.5; 3], &g).unwrap();
        let chi = indicator(&body, &g);
        let b = random_magnetic(&g, 7);
        let (h, j, _) = reconstruct_em(&b, &z, &jx, &chi, 2.0, 1.5);
        let ch = grid::curl(&h);
        for c in 0..g.len() {
            let (a, jj, x) = (ch.at(c), j.at(c), jx.at(c));
            if chi.values[c] > 0.5 {
                assert_eq!(jj, [0.0; 3]);
            } else {
                for d in 0..3 {
                    assert!((a[d] - jj[d] - x[d]).abs() < 1e-12);
                }
            }
        }
    }
}
