//! Skew-adjoint difference operators used by the time-stepping scheme.
//!
//! Every field handed to these routines is extended by zero outside the box.
//! With that extension the central first difference is an antisymmetric
//! matrix, so that
//!
//! * `div` and `-grad` are adjoint, and `div ∘ curl = 0`, `curl ∘ grad = 0`
//!   hold exactly (the 1-D factors commute across axes);
//! * `curl` is symmetric, so the weak and strong forms of the induction step
//!   coincide;
//! * every bilinear form of the scheme has the shape `⟨X u, W X v⟩` and the
//!   discrete energy identity holds to rounding.
//!
//! Fields are flat slices, x fastest; vector fields are `[x..., y..., z...]`.

use crate::grid::Grid;

/// Which samples of a vector field are unknowns.
///
/// Velocity vanishes on the boundary layer, and its normal component also on
/// the first interior layer, so that the discrete divergence is identically
/// zero on the boundary layer. The magnetic field only has its normal
/// component pinned to zero on the boundary layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Velocity,
    Magnetic,
}

impl Layout {
    /// Inclusive index range of active samples for component `comp` along `axis`.
    pub fn range(&self, n: usize, comp: usize, axis: usize) -> (usize, usize) {
        match (self, comp == axis) {
            (Layout::Velocity, true) => (2, n - 3),
            (Layout::Velocity, false) => (1, n - 2),
            (Layout::Magnetic, true) => (1, n - 2),
            (Layout::Magnetic, false) => (0, n - 1),
        }
    }

    /// Range of cells on which the divergence constraint is nontrivial.
    pub fn constraint_range(&self, n: usize) -> (usize, usize) {
        match self {
            Layout::Velocity => (1, n - 2),
            Layout::Magnetic => (0, n - 1),
        }
    }

    /// 0/1 mask over a flat vector field.
    pub fn mask(&self, g: &Grid) -> Vec<f64> {
        let n = g.n();
        let mut m = vec![0.0; 3 * g.len()];
        for comp in 0..3 {
            let r = [0, 1, 2].map(|axis| self.range(n, comp, axis));
            for k in r[2].0..=r[2].1 {
                for j in r[1].0..=r[1].1 {
                    for i in r[0].0..=r[0].1 {
                        m[comp * g.len() + g.idx(i, j, k)] = 1.0;
                    }
                }
            }
        }
        m
    }
}

/// `out += scale * ∂_axis src` (central difference, zero extension).
pub fn d_add(g: &Grid, src: &[f64], axis: usize, scale: f64, out: &mut [f64]) {
    let n = g.n();
    let st = g.stride(axis);
    let s = scale / (2.0 * g.h());
    for k in 0..n {
        for j in 0..n {
            let row = (k * n + j) * n;
            for i in 0..n {
                let c = row + i;
                let p = match axis {
                    0 => i,
                    1 => j,
                    _ => k,
                };
                let fwd = if p + 1 < n { src[c + st] } else { 0.0 };
                let bwd = if p > 0 { src[c - st] } else { 0.0 };
                out[c] += s * (fwd - bwd);
            }
        }
    }
}

pub fn d(g: &Grid, src: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    d_add(g, src, axis, 1.0, &mut out);
    out
}

/// Compact 7-point Laplacian, zero extension (homogeneous Dirichlet one cell
/// outside the box). Symmetric negative definite.
pub fn laplacian_into(g: &Grid, src: &[f64], out: &mut [f64]) {
    let n = g.n();
    let inv = 1.0 / (g.h() * g.h());
    let nn = n * n;
    for k in 0..n {
        for j in 0..n {
            let row = (k * n + j) * n;
            for i in 0..n {
                let c = row + i;
                let mut acc = -6.0 * src[c];
                if i > 0 {
                    acc += src[c - 1];
                }
                if i + 1 < n {
                    acc += src[c + 1];
                }
                if j > 0 {
                    acc += src[c - n];
                }
                if j + 1 < n {
                    acc += src[c + n];
                }
                if k > 0 {
                    acc += src[c - nn];
                }
                if k + 1 < n {
                    acc += src[c + nn];
                }
                out[c] = acc * inv;
            }
        }
    }
}

pub fn div(g: &Grid, v: &[f64]) -> Vec<f64> {
    let len = g.len();
    let mut out = vec![0.0; len];
    for a in 0..3 {
        d_add(g, &v[a * len..(a + 1) * len], a, 1.0, &mut out);
    }
    out
}

/// Gradient `-divᵀ`.
pub fn grad(g: &Grid, q: &[f64]) -> Vec<f64> {
    let len = g.len();
    let mut out = vec![0.0; 3 * len];
    for a in 0..3 {
        d_add(g, q, a, 1.0, &mut out[a * len..(a + 1) * len]);
    }
    out
}

pub fn curl_into(g: &Grid, v: &[f64], out: &mut [f64]) {
    let len = g.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    let (vx, rest) = v.split_at(len);
    let (vy, vz) = rest.split_at(len);
    let (ox, rest) = out.split_at_mut(len);
    let (oy, oz) = rest.split_at_mut(len);
    d_add(g, vz, 1, 1.0, ox);
    d_add(g, vy, 2, -1.0, ox);
    d_add(g, vx, 2, 1.0, oy);
    d_add(g, vz, 0, -1.0, oy);
    d_add(g, vy, 0, 1.0, oz);
    d_add(g, vx, 1, -1.0, oz);
}

pub fn curl(g: &Grid, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    curl_into(g, v, &mut out);
    out
}

/// Symmetric gradient `𝔻(u)_{ab} = (∂_b u_a + ∂_a u_b)/2`, stored row-major
/// as nine flat fields.
pub fn sym_grad(g: &Grid, u: &[f64]) -> Vec<Vec<f64>> {
    let len = g.len();
    let grads: Vec<Vec<f64>> = (0..9)
        .map(|ab| d(g, &u[(ab / 3) * len..(ab / 3 + 1) * len], ab % 3))
        .collect();
    (0..9)
        .map(|ab| {
            let (a, b) = (ab / 3, ab % 3);
            grads[3 * a + b].iter().zip(&grads[3 * b + a]).map(|(x, y)| 0.5 * (x + y)).collect()
        })
        .collect()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
