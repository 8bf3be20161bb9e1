//! Rigid body pose, its characteristic function, and the rigid projection.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    /// Box with the given half-extents along the body axes.
    Cuboid { half: [f64; 3] },
}

impl Shape {
    pub fn volume(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            Shape::Cuboid { half } => 8.0 * half[0] * half[1] * half[2],
        }
    }

    /// Does the body-frame point `y` lie in the shape?
    pub fn contains(&self, y: Vector3<f64>) -> bool {
        match *self {
            Shape::Sphere { radius } => y.norm_squared() <= radius * radius,
            Shape::Cuboid { half } => (0..3).all(|i| y[i].abs() <= half[i]),
        }
    }
}

/// Pose and rigid velocity of the body. The velocity field is
/// `V + w × (x - pivot)`; the pivot is the center of mass from the last
/// functional evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidState {
    pub shape: Shape,
    pub center: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub pivot: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyFunctionals {
    pub mass: f64,
    pub center_of_mass: Vector3<f64>,
    pub inertia: Matrix3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

impl RigidState {
    /// Body at rest. Fails unless the shape lies strictly inside the box.
    pub fn new(shape: Shape, center: [f64; 3], grid: &Grid) -> Result<Self> {
        let c = Vector3::from(center);
        let body = Self {
            shape,
            center: c,
            rotation: Matrix3::identity(),
            velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            pivot: c,
        };
        let valid = match shape {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Cuboid { half } => half.iter().all(|&h| h > 0.0),
        };
        if !valid {
            return Err(Error::Config("body dimensions must be positive".into()));
        }
        if !(distance_to_boundary(&body, grid) > 0.0) {
            return Err(Error::Config("body must lie strictly inside the domain".into()));
        }
        Ok(body)
    }

    pub fn with_velocity(mut self, v: [f64; 3], w: [f64; 3]) -> Self {
        self.velocity = Vector3::from(v);
        self.angular_velocity = Vector3::from(w);
        self
    }

    pub fn with_rotation(mut self, r: Matrix3<f64>) -> Self {
        self.rotation = r;
        self
    }

    /// Body-frame coordinates of a world point.
    pub fn to_body(&self, x: [f64; 3]) -> Vector3<f64> {
        self.rotation.transpose() * (Vector3::from(x) - self.center)
    }
}

pub fn indicator(body: &RigidState, grid: &Grid) -> ScalarField {
    grid.sample(|x| if body.shape.contains(body.to_body(x)) { 1.0 } else { 0.0 })
}

pub fn body_functionals(rho: &ScalarField, chi: &ScalarField, u: &VectorField) -> Result<BodyFunctionals> {
    let g = rho.grid();
    let dv = g.cell_volume();
    let mut mass = 0.0;
    let mut first = Vector3::zeros();
    let mut mom = Vector3::zeros();
    for c in 0..g.len() {
        if chi.values[c] == 0.0 {
            continue;
        }
        let w = rho.values[c] * chi.values[c] * dv;
        mass += w;
        first += w * Vector3::from(g.center_of(c));
        mom += w * Vector3::from(u.at(c));
    }
    if !(mass > 0.0) {
        return Err(Error::BodyLost);
    }
    let a = first / mass;
    let mut inertia = Matrix3::zeros();
    let mut ang = Vector3::zeros();
    for c in 0..g.len() {
        if chi.values[c] == 0.0 {
            continue;
        }
        let w = rho.values[c] * chi.values[c] * dv;
        let r = Vector3::from(g.center_of(c)) - a;
        inertia += w * (Matrix3::identity() * r.norm_squared() - r * r.transpose());
        ang += w * r.cross(&Vector3::from(u.at(c)));
    }
    let omega = inertia
        .cholesky()
        .map(|ch| ch.solve(&ang))
        .ok_or(Error::BodyLost)?;
    Ok(BodyFunctionals { mass, center_of_mass: a, inertia, velocity: mom / mass, angular_velocity: omega })
}

/// `Π(x) = u_G + ω × (x - a)` on every cell.
pub fn rigid_projection(f: &BodyFunctionals, grid: &Grid) -> VectorField {
    rigid_field(f.velocity, f.angular_velocity, f.center_of_mass, grid)
}

pub fn rigid_field(v: Vector3<f64>, w: Vector3<f64>, pivot: Vector3<f64>, grid: &Grid) -> VectorField {
    grid.sample_vector(|x| {
        let p = v + w.cross(&(Vector3::from(x) - pivot));
        [p[0], p[1], p[2]]
    })
}

pub fn set_body_velocity(body: &RigidState, f: &BodyFunctionals) -> RigidState {
    RigidState { velocity: f.velocity, angular_velocity: f.angular_velocity, pivot: f.center_of_mass, ..*body }
}

fn hat(w: Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// Flow of `x' = V + w × (x - pivot)` over `dt`: `x ↦ pivot + E (x - pivot) + Φ V`
/// with `E = exp(W dt)` and `Φ = ∫₀^dt exp(W s) ds`, both in closed form.
pub fn flow_maps(w: Vector3<f64>, dt: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    let wn = w.norm();
    let id = Matrix3::identity();
    let k = hat(w);
    let k2 = k * k;
    let theta = wn * dt;
    if theta < 1e-6 {
        // Series, accurate to rounding for small angles.
        let e = id + k * dt + k2 * (dt * dt / 2.0) + k * k2 * (dt.powi(3) / 6.0);
        let phi = id * dt + k * (dt * dt / 2.0) + k2 * (dt.powi(3) / 6.0) + k * k2 * (dt.powi(4) / 24.0);
        return (e, phi);
    }
    let (s, c) = theta.sin_cos();
    let e = id + k * (s / wn) + k2 * ((1.0 - c) / (wn * wn));
    let phi = id * dt + k * ((1.0 - c) / (wn * wn)) + k2 * ((theta - s) / wn.powi(3));
    (e, phi)
}

pub fn advance_isometry(body: &RigidState, dt: f64) -> RigidState {
    let (e, phi) = flow_maps(body.angular_velocity, dt);
    let shift = phi * body.velocity;
    let mut rotation = e * body.rotation;
    let drift = (rotation.transpose() * rotation - Matrix3::identity()).norm();
    if drift > 1e-13 {
        let svd = rotation.svd(true, true);
        if let (Some(u), Some(vt)) = (svd.u, svd.v_t) {
            rotation = u * vt;
        }
    }
    RigidState {
        center: body.pivot + e * (body.center - body.pivot) + shift,
        pivot: body.pivot + shift,
        rotation,
        ..*body
    }
}

/// Exact distance between the body and the walls of `[0, L]^3`
/// (zero or negative once it touches or crosses a wall).
pub fn distance_to_boundary(body: &RigidState, grid: &Grid) -> f64 {
    let l = grid.length();
    let reach: [f64; 3] = match body.shape {
        Shape::Sphere { radius } => [radius; 3],
        Shape::Cuboid { half } => {
            [0, 1, 2].map(|i| (0..3).map(|j| body.rotation[(i, j)].abs() * half[j]).sum())
        }
    };
    (0..3)
        .map(|i| (body.center[i] - reach[i]).min(l - body.center[i] - reach[i]))
        .fold(f64::INFINITY, f64::min)
}
