//! Uniform cell-centred grid over the box `[0, L]^3`, sampled fields and the
//! diagnostic difference operators.
//!
//! The operators here use second-order central differences in the interior
//! and second-order one-sided stencils on the boundary layer. They are what
//! the CLI, the convergence studies and the electromagnetic reconstruction
//! use. The time-stepping scheme itself uses the skew-adjoint operators of
//! [`crate::mimetic`], which agree with these on every interior cell when the
//! field vanishes on the boundary layer.

use crate::error::{Error, Result};

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
    h: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::Config(format!("grid.n = {n} must be at least {MIN_CELLS}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("grid.L = {length} must be positive")));
        }
        Ok(Self { n, length, h: length / n as f64 })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Cell volume `h^3`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index, x fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n + j) * self.n + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.n;
        let j = (idx / self.n) % self.n;
        let k = idx / (self.n * self.n);
        (i, j, k)
    }

    /// Cell centre of `(i, j, k)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            (i as f64 + 0.5) * self.h,
            (j as f64 + 0.5) * self.h,
            (k as f64 + 0.5) * self.h,
        ]
    }

    #[inline]
    pub fn center_of(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        self.center(i, j, k)
    }

    /// Stride of the linear index along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.n,
            _ => self.n * self.n,
        }
    }

    /// True on the outermost layer of cells.
    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j, k) = self.coords(idx);
        let last = self.n - 1;
        i == 0 || j == 0 || k == 0 || i == last || j == last || k == last
    }

    /// Sample `f` at every cell centre.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> ScalarField {
        let values = (0..self.len()).map(|c| f(self.center_of(c))).collect();
        ScalarField { grid: *self, values }
    }

    pub fn sample_vector(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> VectorField {
        let mut out = VectorField::zeros(self);
        for c in 0..self.len() {
            let v = f(self.center_of(c));
            for a in 0..3 {
                out.comps[a].values[c] = v[a];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { grid: *grid, values: vec![value; grid.len()] }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid: *grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max of `|v|` over cells at least `margin` cells away from the boundary.
    pub fn max_abs_interior(&self, margin: usize) -> f64 {
        let n = self.grid.n;
        let mut m: f64 = 0.0;
        for k in margin..n - margin {
            for j in margin..n - margin {
                for i in margin..n - margin {
                    m = m.max(self.values[self.grid.idx(i, j, k)].abs());
                }
            }
        }
        m
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }
}

/// Three collocated components sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub comps: [ScalarField; 3],
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { comps: [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)] }
    }

    pub fn constant(grid: &Grid, v: [f64; 3]) -> Self {
        Self {
            comps: [
                ScalarField::constant(grid, v[0]),
                ScalarField::constant(grid, v[1]),
                ScalarField::constant(grid, v[2]),
            ],
        }
    }

    pub fn from_components(x: ScalarField, y: ScalarField, z: ScalarField) -> Result<Self> {
        if x.grid != y.grid || x.grid != z.grid {
            return Err(Error::Config("vector components live on different grids".into()));
        }
        Ok(Self { comps: [x, y, z] })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.comps[0].grid
    }

    #[inline]
    pub fn at(&self, c: usize) -> [f64; 3] {
        [self.comps[0].values[c], self.comps[1].values[c], self.comps[2].values[c]]
    }

    #[inline]
    pub fn set(&mut self, c: usize, v: [f64; 3]) {
        for a in 0..3 {
            self.comps[a].values[c] = v[a];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid().len()).fold(0.0, |m, c| m.max(norm(self.at(c))))
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, s| m.max(s.max_abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for a in 0..3 {
            for (x, y) in self.comps[a].values.iter().zip(&other.comps[a].values) {
                m = m.max((x - y).abs());
            }
        }
        m
    }

    /// Flatten to `[x..., y..., z...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.grid().len());
        for s in &self.comps {
            out.extend_from_slice(&s.values);
        }
        out
    }

    pub fn from_flat(grid: &Grid, flat: &[f64]) -> Result<Self> {
        let n = grid.len();
        if flat.len() != 3 * n {
            return Err(Error::Shape { expected: 3 * n, found: flat.len() });
        }
        Ok(Self {
            comps: [
                ScalarField { grid: *grid, values: flat[..n].to_vec() },
                ScalarField { grid: *grid, values: flat[n..2 * n].to_vec() },
                ScalarField { grid: *grid, values: flat[2 * n..].to_vec() },
            ],
        })
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> ScalarField {
        let g = *self.grid();
        let values = (0..g.len()).map(|c| dot3(self.at(c), other.at(c))).collect();
        ScalarField { grid: g, values }
    }

    /// Pointwise cross product.
    pub fn cross(&self, other: &Self) -> Self {
        let g = *self.grid();
        let mut out = Self::zeros(&g);
        for c in 0..g.len() {
            out.set(c, cross3(self.at(c), other.at(c)));
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { comps: self.comps.clone().map(|f| f.map(|v| s * v)) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            comps: [0, 1, 2].map(|a| self.comps[a].zip_map(&other.comps[a], |x, y| x + y)),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            comps: [0, 1, 2].map(|a| self.comps[a].zip_map(&other.comps[a], |x, y| x - y)),
        }
    }

    /// Multiply every component pointwise by a scalar field.
    pub fn weighted(&self, w: &ScalarField) -> Self {
        Self { comps: [0, 1, 2].map(|a| self.comps[a].zip_map(w, |x, y| x * y)) }
    }
}

#[inline]
pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// Midpoint quadrature `sum(values) * h^3`, summed in index order.
pub fn integrate(s: &ScalarField) -> f64 {
    s.values.iter().sum::<f64>() * s.grid.cell_volume()
}

/// First derivative along `axis`; central inside, one-sided second order on
/// the boundary layer.
pub fn partial(s: &ScalarField, axis: usize) -> ScalarField {
    let g = s.grid;
    let n = g.n;
    let st = g.stride(axis);
    let inv = 1.0 / (2.0 * g.h);
    let v = &s.values;
    let mut out = vec![0.0; g.len()];
    for (c, o) in out.iter_mut().enumerate() {
        let (i, j, k) = g.coords(c);
        let p = [i, j, k][axis];
        *o = if p == 0 {
            (-3.0 * v[c] + 4.0 * v[c + st] - v[c + 2 * st]) * inv
        } else if p == n - 1 {
            (3.0 * v[c] - 4.0 * v[c - st] + v[c - 2 * st]) * inv
        } else {
            (v[c + st] - v[c - st]) * inv
        };
    }
    ScalarField { grid: g, values: out }
}

/// Second derivative along `axis`; one-sided four-point stencil on the
/// boundary layer.
pub fn partial2(s: &ScalarField, axis: usize) -> ScalarField {
    let g = s.grid;
    let n = g.n;
    let st = g.stride(axis);
    let inv = 1.0 / (g.h * g.h);
    let v = &s.values;
    let mut out = vec![0.0; g.len()];
    for (c, o) in out.iter_mut().enumerate() {
        let (i, j, k) = g.coords(c);
        let p = [i, j, k][axis];
        *o = if p == 0 {
            (2.0 * v[c] - 5.0 * v[c + st] + 4.0 * v[c + 2 * st] - v[c + 3 * st]) * inv
        } else if p == n - 1 {
            (2.0 * v[c] - 5.0 * v[c - st] + 4.0 * v[c - 2 * st] - v[c - 3 * st]) * inv
        } else {
            (v[c + st] - 2.0 * v[c] + v[c - st]) * inv
        };
    }
    ScalarField { grid: g, values: out }
}

pub fn div(v: &VectorField) -> ScalarField {
    let dx = partial(&v.comps[0], 0);
    let dy = partial(&v.comps[1], 1);
    let dz = partial(&v.comps[2], 2);
    let values = (0..dx.values.len())
        .map(|c| dx.values[c] + dy.values[c] + dz.values[c])
        .collect();
    ScalarField { grid: dx.grid, values }
}

pub fn curl(v: &VectorField) -> VectorField {
    let d = |a: usize, axis: usize| partial(&v.comps[a], axis);
    let x = d(2, 1).zip_map(&d(1, 2), |a, b| a - b);
    let y = d(0, 2).zip_map(&d(2, 0), |a, b| a - b);
    let z = d(1, 0).zip_map(&d(0, 1), |a, b| a - b);
    VectorField { comps: [x, y, z] }
}

pub fn grad(s: &ScalarField) -> VectorField {
    VectorField { comps: [partial(s, 0), partial(s, 1), partial(s, 2)] }
}

pub fn laplacian(s: &ScalarField) -> ScalarField {
    let a = partial2(s, 0);
    let b = partial2(s, 1);
    let c = partial2(s, 2);
    let values = (0..a.values.len()).map(|i| a.values[i] + b.values[i] + c.values[i]).collect();
    ScalarField { grid: a.grid, values }
}

/// `Δ(Δv)` componentwise with homogeneous Dirichlet extension: the field is
/// taken to vanish outside the box, as the velocity does.
pub fn biharmonic(v: &VectorField) -> VectorField {
    let g = *v.grid();
    let mut out = VectorField::zeros(&g);
    let mut tmp = vec![0.0; g.len()];
    for a in 0..3 {
        crate::mimetic::laplacian_into(&g, &v.comps[a].values, &mut tmp);
        crate::mimetic::laplacian_into(&g, &tmp, &mut out.comps[a].values);
    }
    out
}

/// `∫ 𝔻(u) : ∇v dx` with `𝔻(u) = (∇u + ∇uᵀ)/2`.
pub fn sym_grad_contraction(u: &VectorField, v: &VectorField) -> f64 {
    let g = *u.grid();
    let gu: Vec<Vec<ScalarField>> =
        (0..3).map(|a| (0..3).map(|b| partial(&u.comps[a], b)).collect()).collect();
    let gv: Vec<Vec<ScalarField>> =
        (0..3).map(|a| (0..3).map(|b| partial(&v.comps[a], b)).collect()).collect();
    let mut sum = 0.0;
    for c in 0..g.len() {
        for a in 0..3 {
            for b in 0..3 {
                let d = 0.5 * (gu[a][b].values[c] + gu[b][a].values[c]);
                sum += d * gv[a][b].values[c];
            }
        }
    }
    sum * g.cell_volume()
}
