//! Discrete Leray projection.
//!
//! For a layout with 0/1 mask `M`, the projection onto discretely
//! divergence-free fields is `P v = v - M ∇q` with `div(M ∇q) = div v`.
//! Because the difference operators are Kronecker products of one 1-D
//! matrix, `div M ∇` is a Kronecker sum `T⊗I⊗I + I⊗T⊗I + I⊗I⊗T` on the
//! cells where the constraint is nontrivial, and the Poisson problem is solved
//! directly by diagonalising `T` once. `P` is the orthogonal projection onto
//! `ker div` within the layout, so it is symmetric and idempotent.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::mimetic::{self, Layout};
use crate::solver::SolveReport;

#[derive(Debug, Clone)]
pub struct Projector {
    grid: Grid,
    layout: Layout,
    mask: Vec<f64>,
    lo: usize,
    p: usize,
    /// Eigenvectors of `T`, column-major `q[row + p * col]`.
    eigvec: Vec<f64>,
    eigval: Vec<f64>,
}

impl Projector {
    pub fn new(grid: &Grid, layout: Layout) -> Self {
        let n = grid.n();
        let h = grid.h();
        let (own_lo, own_hi) = layout.range(n, 0, 0);
        let (lo, hi) = layout.constraint_range(n);
        let p = hi - lo + 1;
        // d[i][k] = (δ_{k,i+1} - δ_{k,i-1}) / 2h; T = d diag(a) dᵀ.
        let active = |k: isize| k >= own_lo as isize && k <= own_hi as isize;
        let coef = 1.0 / (4.0 * h * h);
        let mut t = DMatrix::<f64>::zeros(p, p);
        for r in 0..p {
            for c in 0..p {
                let (i, j) = ((lo + r) as isize, (lo + c) as isize);
                let mut s = 0.0;
                for (ki, si) in [(i + 1, 1.0), (i - 1, -1.0)] {
                    for (kj, sj) in [(j + 1, 1.0), (j - 1, -1.0)] {
                        if ki == kj && active(ki) {
                            s += si * sj;
                        }
                    }
                }
                t[(r, c)] = s * coef;
            }
        }
        let eig = t.symmetric_eigen();
        Self {
            grid: *grid,
            layout,
            mask: layout.mask(grid),
            lo,
            p,
            eigvec: eig.eigenvectors.as_slice().to_vec(),
            eigval: eig.eigenvalues.as_slice().to_vec(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }

    /// Zero every sample that is not an unknown of the layout.
    pub fn restrict(&self, v: &mut [f64]) {
        v.iter_mut().zip(&self.mask).for_each(|(x, m)| *x *= m);
    }

    /// Apply `T` (or its transpose) along one axis of a `p^3` block.
    fn transform(&self, data: &mut [f64], axis: usize, inverse: bool) {
        let p = self.p;
        let st = [1, p, p * p][axis];
        let mut line = vec![0.0; p];
        let mut out = vec![0.0; p];
        for outer in 0..p * p {
            let base = match axis {
                0 => outer * p,
                1 => (outer / p) * p * p + outer % p,
                _ => outer,
            };
            for m in 0..p {
                line[m] = data[base + m * st];
            }
            for (r, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                if inverse {
                    // (Q x)_r = sum_c Q[r, c] x_c
                    for c in 0..p {
                        s += self.eigvec[r + p * c] * line[c];
                    }
                } else {
                    // (Qᵀ x)_r = sum_c Q[c, r] x_c
                    let col = &self.eigvec[p * r..p * (r + 1)];
                    for c in 0..p {
                        s += col[c] * line[c];
                    }
                }
                *o = s;
            }
            for m in 0..p {
                data[base + m * st] = out[m];
            }
        }
    }

    /// Minimum-norm solution of `div(M ∇q) = rhs` on the constraint cells.
    /// `rhs` and the result are full-grid scalars (zero off the constraint
    /// block).
    pub fn solve_poisson(&self, rhs: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (p, lo) = (self.p, self.lo);
        let mut block = vec![0.0; p * p * p];
        for k in 0..p {
            for j in 0..p {
                for i in 0..p {
                    block[(k * p + j) * p + i] = rhs[g.idx(lo + i, lo + j, lo + k)];
                }
            }
        }
        for axis in 0..3 {
            self.transform(&mut block, axis, false);
        }
        let lmax = self.eigval.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
        let cutoff = 1e-12 * 3.0 * lmax;
        for k in 0..p {
            for j in 0..p {
                for i in 0..p {
                    let s = self.eigval[i] + self.eigval[j] + self.eigval[k];
                    let b = &mut block[(k * p + j) * p + i];
                    // div(M ∇·) = -T_sum, hence the sign.
                    *b = if s > cutoff { -*b / s } else { 0.0 };
                }
            }
        }
        for axis in 0..3 {
            self.transform(&mut block, axis, true);
        }
        let mut q = vec![0.0; g.len()];
        for k in 0..p {
            for j in 0..p {
                for i in 0..p {
                    q[g.idx(lo + i, lo + j, lo + k)] = block[(k * p + j) * p + i];
                }
            }
        }
        q
    }

    /// Project a flat vector field in place; returns the potential `q`.
    pub fn project_in_place(&self, v: &mut [f64]) -> Vec<f64> {
        self.restrict(v);
        let r = mimetic::div(&self.grid, v);
        let q = self.solve_poisson(&r);
        let gq = mimetic::grad(&self.grid, &q);
        for ((x, gx), m) in v.iter_mut().zip(&gq).zip(&self.mask) {
            *x -= m * gx;
        }
        q
    }

    /// Max-norm of the constraint divergence of a flat field.
    pub fn max_div(&self, v: &[f64]) -> f64 {
        mimetic::div(&self.grid, v).iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `(v - M∇q, q)` with a convergence report. Fails if the projected field's
    /// divergence exceeds `10 * tol`.
    pub fn project(&self, v: &VectorField, tol: f64) -> Result<(VectorField, ScalarField)> {
        let mut flat = v.to_flat();
        let q = self.project_in_place(&mut flat);
        let residual = self.max_div(&flat);
        if !(residual <= 10.0 * tol) {
            return Err(Error::Solver {
                what: "leray projection",
                report: SolveReport { iterations: 1, residual, converged: false },
            });
        }
        Ok((VectorField::from_flat(&self.grid, &flat)?, ScalarField::from_values(&self.grid, q)?))
    }
}

/// Leray projection of an arbitrary field: normal components on the boundary
/// layer are dropped (`v·n = 0`) and the remainder is made discretely
/// divergence-free.
pub fn leray_project(v: &VectorField, tol: f64) -> Result<(VectorField, ScalarField)> {
    Projector::new(v.grid(), Layout::Magnetic).project(v, tol)
}
