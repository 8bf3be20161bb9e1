//! Matrix-free Krylov solvers.
//!
//! All reductions run sequentially in index order, so results are bitwise
//! reproducible for identical inputs.

/// A linear map on flat `f64` vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn symmetric(&self) -> bool {
        false
    }
    fn label(&self) -> &str {
        "operator"
    }
}

/// Approximate inverse `z = M⁻¹ r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Closure-backed operator.
pub struct FnOperator<F> {
    dim: usize,
    symmetric: bool,
    label: String,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, symmetric: bool, label: impl Into<String>, f: F) -> Self {
        Self { dim, symmetric, label: label.into(), f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
    fn symmetric(&self) -> bool {
        self.symmetric
    }
    fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual `‖b - A x‖ / ‖b‖` of the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn true_residual(op: &dyn LinearOperator, x: &[f64], b: &[f64], r: &mut [f64]) {
    op.apply(x, r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
}

pub fn solve_cg(op: &dyn LinearOperator, rhs: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveReport) {
    solve_pcg(op, &Identity, rhs, None, tol, max_iter, None)
}

/// Preconditioned conjugate gradients from initial guess `x0` (zero if
/// `None`). If `trace` is given, the relative residual after every iteration
/// is appended to it.
pub fn solve_pcg(
    op: &dyn LinearOperator,
    pre: &dyn Preconditioner,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> (Vec<f64>, SolveReport) {
    let n = rhs.len();
    let bnorm = norm(rhs);
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return (x, SolveReport { iterations: 0, residual: 0.0, converged: true });
    }
    let mut r = vec![0.0; n];
    true_residual(op, &x, rhs, &mut r);
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / bnorm;
    let mut it = 0;
    let mut restarts = 0;
    while res > tol && it < max_iter {
        op.apply(&p, &mut ap);
        let curv = dot(&p, &ap);
        if !(curv > 0.0) || !rz.is_finite() {
            break;
        }
        let alpha = rz / curv;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        it += 1;
        res = norm(&r) / bnorm;
        if let Some(t) = trace.as_deref_mut() {
            t.push(res);
        }
        if res <= tol {
            // Confirm against the true residual; restart if they drifted apart.
            true_residual(op, &x, rhs, &mut r);
            res = norm(&r) / bnorm;
            if res <= tol || restarts >= 3 {
                break;
            }
            restarts += 1;
            pre.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    finish(op, x, rhs, bnorm, it, tol)
}

/// Recompute the true residual so the report cannot be fooled by drift in the
/// recursively updated one.
fn finish(op: &dyn LinearOperator, x: Vec<f64>, rhs: &[f64], bnorm: f64, it: usize, tol: f64) -> (Vec<f64>, SolveReport) {
    let mut r = vec![0.0; rhs.len()];
    true_residual(op, &x, rhs, &mut r);
    let residual = norm(&r) / bnorm;
    let converged = residual.is_finite() && residual <= tol;
    (x, SolveReport { iterations: it, residual, converged })
}

pub fn solve_bicgstab(op: &dyn LinearOperator, rhs: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveReport) {
    solve_bicgstab_from(op, rhs, None, tol, max_iter)
}

/// BiCGStab with restart on breakdown (`ρ` or `ω` vanishing). A restart
/// recomputes the true residual and resets the shadow vector; two consecutive
/// breakdowns end the iteration with `converged = false`.
pub fn solve_bicgstab_from(
    op: &dyn LinearOperator,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, SolveReport) {
    solve_pbicgstab(op, &Identity, rhs, x0, tol, max_iter)
}

/// Right-preconditioned BiCGStab; the residual is that of the original system.
pub fn solve_pbicgstab(
    op: &dyn LinearOperator,
    pre: &dyn Preconditioner,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, SolveReport) {
    let n = rhs.len();
    let bnorm = norm(rhs);
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return (x, SolveReport { iterations: 0, residual: 0.0, converged: true });
    }
    let mut r = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut it = 0;
    let mut breakdowns = 0;
    'outer: while it < max_iter {
        true_residual(op, &x, rhs, &mut r);
        if norm(&r) / bnorm <= tol {
            break;
        }
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0_f64, 1.0_f64, 1.0_f64);
        v.iter_mut().for_each(|e| *e = 0.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        while it < max_iter {
            let rho_new = dot(&r_hat, &r);
            let small = 1e-300_f64.max(f64::EPSILON.powi(2) * norm(&r_hat) * norm(&r));
            if rho_new.abs() <= small || omega == 0.0 || !rho_new.is_finite() {
                breakdowns += 1;
                if breakdowns > 1 {
                    break 'outer;
                }
                continue 'outer;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            pre.apply(&p, &mut ph);
            op.apply(&ph, &mut v);
            let denom = dot(&r_hat, &v);
            if denom == 0.0 || !denom.is_finite() {
                breakdowns += 1;
                if breakdowns > 1 {
                    break 'outer;
                }
                continue 'outer;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            it += 1;
            if norm(&s) / bnorm <= tol {
                axpy(alpha, &ph, &mut x);
                continue 'outer;
            }
            pre.apply(&s, &mut sh);
            op.apply(&sh, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * ph[i] + omega * sh[i];
                r[i] = s[i] - omega * t[i];
            }
            breakdowns = 0;
            if norm(&r) / bnorm <= tol {
                break;
            }
        }
    }
    finish(op, x, rhs, bnorm, it, tol)
}

/// Diagonal preconditioner.
pub struct Jacobi {
    pub inv_diag: Vec<f64>,
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
    }
}
