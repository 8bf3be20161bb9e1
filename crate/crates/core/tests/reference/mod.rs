//! Dense, directly solved assembly of one full time step on a small grid.
//!
//! Everything here is built entry by entry from the stencil definitions and
//! solved with LU or a null-space basis; nothing is shared with the
//! matrix-free solvers except the input state.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};

#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub n: usize,
    pub length: f64,
    pub dt: f64,
    pub eps: f64,
    pub eta: f64,
    pub nu: f64,
    pub mu: f64,
    pub sigma: f64,
    pub kappa_solid: f64,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct State {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
    pub chi: Vec<f64>,
    pub center: Vector3<f64>,
}

struct Mesh {
    n: usize,
    h: f64,
    len: usize,
}

impl Mesh {
    fn idx(&self, p: [usize; 3]) -> usize {
        (p[2] * self.n + p[1]) * self.n + p[0]
    }
    fn pos(&self, c: usize) -> [usize; 3] {
        [c % self.n, (c / self.n) % self.n, c / (self.n * self.n)]
    }
    fn x(&self, c: usize) -> Vector3<f64> {
        let p = self.pos(c);
        Vector3::new((p[0] as f64 + 0.5) * self.h, (p[1] as f64 + 0.5) * self.h, (p[2] as f64 + 0.5) * self.h)
    }
    fn neighbour(&self, c: usize, axis: usize, up: bool) -> Option<usize> {
        let mut p = self.pos(c);
        if up {
            if p[axis] + 1 >= self.n {
                return None;
            }
            p[axis] += 1;
        } else {
            if p[axis] == 0 {
                return None;
            }
            p[axis] -= 1;
        }
        Some(self.idx(p))
    }

    /// Central difference, zero outside the box.
    fn d(&self, axis: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len, self.len);
        let s = 0.5 / self.h;
        for c in 0..self.len {
            if let Some(f) = self.neighbour(c, axis, true) {
                m[(c, f)] += s;
            }
            if let Some(b) = self.neighbour(c, axis, false) {
                m[(c, b)] -= s;
            }
        }
        m
    }

    /// Central difference with mirrored ghosts.
    fn d_mirror(&self, axis: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len, self.len);
        let s = 0.5 / self.h;
        for c in 0..self.len {
            m[(c, self.neighbour(c, axis, true).unwrap_or(c))] += s;
            m[(c, self.neighbour(c, axis, false).unwrap_or(c))] -= s;
        }
        m
    }

    /// 7-point Laplacian, zero outside the box.
    fn lap_zero(&self) -> DMatrix<f64> {
        let inv = 1.0 / (self.h * self.h);
        let mut m = DMatrix::zeros(self.len, self.len);
        for c in 0..self.len {
            m[(c, c)] = -6.0 * inv;
            for axis in 0..3 {
                for up in [true, false] {
                    if let Some(o) = self.neighbour(c, axis, up) {
                        m[(c, o)] += inv;
                    }
                }
            }
        }
        m
    }

    /// 7-point Laplacian with mirrored ghosts.
    fn lap_mirror(&self) -> DMatrix<f64> {
        let inv = 1.0 / (self.h * self.h);
        let mut m = DMatrix::zeros(self.len, self.len);
        for c in 0..self.len {
            for axis in 0..3 {
                for up in [true, false] {
                    if let Some(o) = self.neighbour(c, axis, up) {
                        m[(c, o)] += inv;
                        m[(c, c)] -= inv;
                    }
                }
            }
        }
        m
    }

    /// One-sided second order on the boundary layer, central inside.
    fn partial(&self, v: &[f64], axis: usize) -> Vec<f64> {
        let st = [1, self.n, self.n * self.n][axis];
        let inv = 0.5 / self.h;
        (0..self.len)
            .map(|c| {
                let p = self.pos(c)[axis];
                if p == 0 {
                    (-3.0 * v[c] + 4.0 * v[c + st] - v[c + 2 * st]) * inv
                } else if p == self.n - 1 {
                    (3.0 * v[c] - 4.0 * v[c - st] + v[c - 2 * st]) * inv
                } else {
                    (v[c + st] - v[c - st]) * inv
                }
            })
            .collect()
    }

    /// Indices of the unknowns of a vector field: velocity (`interior = 1`)
    /// or magnetic (`interior = 0`) layout.
    fn active(&self, interior: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for comp in 0..3 {
            for c in 0..self.len {
                let p = self.pos(c);
                let ok = (0..3).all(|a| {
                    let lo = interior + usize::from(a == comp);
                    p[a] >= lo && p[a] + lo < self.n
                });
                if ok {
                    out.push(comp * self.len + c);
                }
            }
        }
        out
    }
}

fn block3(blocks: [[Option<&DMatrix<f64>>; 3]; 3], len: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3 * len, 3 * len);
    for (r, row) in blocks.iter().enumerate() {
        for (c, b) in row.iter().enumerate() {
            if let Some(b) = b {
                m.view_mut((r * len, c * len), (len, len)).copy_from(b);
            }
        }
    }
    m
}

fn cross(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; 3 * len];
    for c in 0..len {
        let x = Vector3::new(a[c], a[len + c], a[2 * len + c]);
        let y = Vector3::new(b[c], b[len + c], b[2 * len + c]);
        let z = x.cross(&y);
        for k in 0..3 {
            out[k * len + c] = z[k];
        }
    }
    out
}

/// Orthonormal basis of the kernel of `div` restricted to `active`.
fn solenoidal_basis(div: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    let c = div.select_columns(active);
    let gram = c.transpose() * &c;
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..active.len()).filter(|&i| eig.eigenvalues[i] <= 1e-10 * top).collect();
    eig.eigenvectors.select_columns(&keep)
}

/// Solves the Galerkin system `Zᵀ A Z c = Zᵀ f` and scatters `Z c`.
fn galerkin(a: &DMatrix<f64>, f: &DVector<f64>, active: &[usize], z: &DMatrix<f64>, dim: usize) -> Vec<f64> {
    let a_ss = a.select_rows(active).select_columns(active);
    let f_s = f.select_rows(active);
    let lhs = z.transpose() * a_ss * z;
    let rhs = z.transpose() * f_s;
    let coef = lhs.lu().solve(&rhs).expect("nonsingular Galerkin system");
    let x = z * coef;
    let mut out = vec![0.0; dim];
    for (k, &i) in active.iter().enumerate() {
        out[i] = x[k];
    }
    out
}

fn expm4(m: Matrix4<f64>) -> Matrix4<f64> {
    let mut s = 0;
    let mut a = m;
    while a.norm() > 0.5 {
        a /= 2.0;
        s += 1;
    }
    let mut term = Matrix4::identity();
    let mut sum = Matrix4::identity();
    for k in 1..30 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// One step from `prev` under body force `g` and applied current `j`.
pub fn step(p: &Params, prev: &State, g: &[f64], j: &[f64]) -> State {
    let n = p.n;
    let m = Mesh { n, h: p.length / n as f64, len: n * n * n };
    let len = m.len;
    let dv = m.h.powi(3);

    // Rigid projection of the previous velocity.
    let (mut mass, mut first, mut mom) = (0.0, Vector3::zeros(), Vector3::zeros());
    for c in 0..len {
        let w = prev.rho[c] * prev.chi[c] * dv;
        mass += w;
        first += w * m.x(c);
        mom += w * Vector3::new(prev.u[c], prev.u[len + c], prev.u[2 * len + c]);
    }
    let a = first / mass;
    let vel = mom / mass;
    let (mut inertia, mut ang) = (Matrix3::zeros(), Vector3::zeros());
    for c in 0..len {
        let w = prev.rho[c] * prev.chi[c] * dv;
        let r = m.x(c) - a;
        inertia += w * (Matrix3::identity() * r.dot(&r) - r * r.transpose());
        ang += w * r.cross(&Vector3::new(prev.u[c], prev.u[len + c], prev.u[2 * len + c]));
    }
    let omega = inertia.lu().solve(&ang).expect("invertible inertia");
    let mut pi = vec![0.0; 3 * len];
    for c in 0..len {
        let v = vel + omega.cross(&(m.x(c) - a));
        for k in 0..3 {
            pi[k * len + c] = v[k];
        }
    }

    // Body motion by the exponential of the affine generator.
    let w = omega.cross_matrix();
    let mut gen = Matrix4::zeros();
    gen.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    gen.fixed_view_mut::<3, 1>(0, 3).copy_from(&(vel - w * a));
    let flow = expm4(gen * p.dt);
    let center = (flow * Vector4::new(prev.center[0], prev.center[1], prev.center[2], 1.0)).xyz();
    let chi: Vec<f64> = (0..len).map(|c| if (m.x(c) - center).norm_squared() <= p.radius * p.radius { 1.0 } else { 0.0 }).collect();

    // Continuity.
    let mut dens = DMatrix::identity(len, len) / p.dt - p.eps * m.lap_mirror();
    for axis in 0..3 {
        let ua = DMatrix::from_diagonal(&DVector::from_column_slice(&prev.u[axis * len..(axis + 1) * len]));
        dens += ua * m.d_mirror(axis);
    }
    let rho_rhs = DVector::from_iterator(len, prev.rho.iter().map(|r| r / p.dt));
    let rho: Vec<f64> = dens.lu().solve(&rho_rhs).expect("nonsingular").iter().copied().collect();

    // Momentum.
    let d = [m.d(0), m.d(1), m.d(2)];
    let l0 = m.lap_zero();
    let diag = |v: &[f64]| DMatrix::from_diagonal(&DVector::from_column_slice(v));
    let mass_diag = diag(&rho.iter().zip(&prev.rho).map(|(x, y)| (x + y) / (2.0 * p.dt)).collect::<Vec<_>>());
    let mut scalar_part = mass_diag + p.eps * &l0 * &l0;
    for axis in 0..3 {
        let dr = m.partial(&rho, axis);
        let ca: Vec<f64> = (0..len).map(|c| rho[c] * prev.u[axis * len + c] + p.eps * dr[c]).collect();
        let cd = diag(&ca);
        scalar_part += 0.5 * (&cd * &d[axis] + &d[axis] * &cd) - p.nu * &d[axis] * &d[axis];
    }
    let mut amom = DMatrix::zeros(3 * len, 3 * len);
    for r in 0..3 {
        for c in 0..3 {
            let mut blk = -p.nu * &d[c] * &d[r];
            if r == c {
                blk += &scalar_part;
            }
            amom.view_mut((r * len, c * len), (len, len)).copy_from(&blk);
        }
    }
    let curl = block3(
        [[None, Some(&-&d[2]), Some(&d[1])], [Some(&d[2]), None, Some(&-&d[0])], [Some(&-&d[1]), Some(&d[0]), None]],
        len,
    );
    let bprev = DVector::from_column_slice(&prev.b);
    let curl_b: Vec<f64> = (&curl * &bprev).iter().copied().collect();
    let lorentz = cross(&curl_b, &prev.b, len);
    let mut f = DVector::zeros(3 * len);
    for k in 0..3 {
        for c in 0..len {
            let i = k * len + c;
            let r = prev.rho[c];
            f[i] = r * prev.u[i] / p.dt - chi[c] * r / p.eta * (prev.u[i] - pi[i]) + r * g[i] + lorentz[i] / p.mu;
        }
    }
    let div = {
        let mut dm = DMatrix::zeros(len, 3 * len);
        for k in 0..3 {
            dm.view_mut((0, k * len), (len, len)).copy_from(&d[k]);
        }
        dm
    };
    let act_u = m.active(1);
    let zu = solenoidal_basis(&div, &act_u);
    let u = galerkin(&amom, &f, &act_u, &zu, 3 * len);

    // Induction with the quartic coefficient iterated to its fixed point.
    let act_b = m.active(0);
    let zb = solenoidal_basis(&div, &act_b);
    let emf: Vec<f64> = cross(&u, &prev.b, len).iter().zip(j).map(|(e, jj)| e + jj / p.sigma).collect();
    let rhs_b = &curl * DVector::from_column_slice(&emf) + &bprev / p.dt;
    let resist = 1.0 / (p.sigma * p.mu);
    let base: Vec<f64> = chi.iter().map(|&x| if x > 0.5 { resist / p.kappa_solid } else { resist }).collect();
    let curl2 = &curl * &curl;
    let curl4 = &curl2 * &curl2;
    let mut lag = {
        let s = bprev.select_rows(&act_b);
        let proj = &zb * (zb.transpose() * s);
        let mut out = vec![0.0; 3 * len];
        for (k, &i) in act_b.iter().enumerate() {
            out[i] = proj[k];
        }
        out
    };
    for _ in 0..200 {
        let cb = &curl * DVector::from_column_slice(&lag);
        let wgt: Vec<f64> = (0..len)
            .map(|c| base[c] + p.eps / (p.mu * p.mu) * (cb[c].powi(2) + cb[len + c].powi(2) + cb[2 * len + c].powi(2)))
            .collect();
        let w3 = diag(&[wgt.as_slice(), wgt.as_slice(), wgt.as_slice()].concat());
        let k = DMatrix::identity(3 * len, 3 * len) / p.dt + &curl * w3 * &curl + p.eps * &curl4;
        let next = galerkin(&k, &rhs_b, &act_b, &zb, 3 * len);
        let diff = next.iter().zip(&lag).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        lag = next;
        if diff <= 1e-14 * scale.max(1.0) {
            break;
        }
    }
    State { rho, u, b: lag, chi, center }
}
