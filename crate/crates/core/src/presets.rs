//! Named analytic initial data and forcing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{GPreset, JPreset, MagneticPreset, RhoPreset, SimConfig, VelocityPreset};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::mimetic;
use crate::projection::Projector;
use crate::vtk;

/// Initial `(ρ₀, u₀, B₀)` before any projection.
pub struct InitialFields {
    pub rho: ScalarField,
    pub u: VectorField,
    pub b: VectorField,
}

fn random_field(g: &Grid, amp: f64, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat: Vec<f64> = (0..3 * g.len()).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
    VectorField::from_flat(g, &flat).expect("length matches grid")
}

pub fn initial_density(cfg: &SimConfig, g: &Grid) -> ScalarField {
    let (lo, hi) = (cfg.physics.rho_min, cfg.physics.rho_max);
    let l = cfg.length;
    match cfg.init.rho {
        RhoPreset::Uniform => ScalarField::constant(g, cfg.init.rho_value),
        RhoPreset::Layered => g.sample(|x| lo + (hi - lo) * 0.5 * (1.0 + ((x[2] - 0.5 * l) / (0.1 * l)).tanh())),
        RhoPreset::Blob => {
            let c = [0.3 * l, 0.5 * l, 0.5 * l];
            g.sample(|x| {
                let r2 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>();
                lo + (hi - lo) * (-r2 / (0.15 * l).powi(2)).exp()
            })
        }
    }
}

pub fn initial_velocity(cfg: &SimConfig, g: &Grid) -> VectorField {
    let (a, l) = (cfg.init.u_amplitude, cfg.length);
    match cfg.init.u {
        VelocityPreset::Rest => VectorField::zeros(g),
        VelocityPreset::Shear => g.sample_vector(|x| [a * (2.0 * PI * x[2] / l).sin(), 0.0, 0.0]),
        VelocityPreset::Vortex => {
            let s = 0.25 * l;
            g.sample_vector(|x| {
                let (px, py) = (x[0] - 0.5 * l, x[1] - 0.5 * l);
                let env = a * (-(px * px + py * py) / (s * s)).exp() * (PI * x[2] / l).sin() / s;
                [-py * env, px * env, 0.0]
            })
        }
        VelocityPreset::Random => random_field(g, a, cfg.init.seed),
    }
}

pub fn initial_magnetic(cfg: &SimConfig, g: &Grid) -> VectorField {
    let (a, l) = (cfg.init.b_amplitude, cfg.length);
    match cfg.init.b {
        MagneticPreset::Zero => VectorField::zeros(g),
        MagneticPreset::Uniform => VectorField::constant(g, [0.0, 0.0, a]),
        MagneticPreset::Loop => {
            // Curl of a compactly concentrated vertical potential.
            let s = 0.2 * l;
            let pot = g.sample_vector(|x| {
                let r2 = (0..3).map(|d| (x[d] - 0.5 * l).powi(2)).sum::<f64>();
                [0.0, 0.0, a * s * (-r2 / (s * s)).exp()]
            });
            VectorField::from_flat(g, &mimetic::curl(g, &pot.to_flat())).expect("length matches grid")
        }
        MagneticPreset::Random => random_field(g, a, cfg.init.seed.wrapping_add(0x9e37_79b9)),
    }
}

/// Raw initial data, from presets or the configured snapshot file.
pub fn initial_fields(cfg: &SimConfig, g: &Grid) -> Result<InitialFields> {
    if let Some(path) = &cfg.init.snapshot {
        let s = vtk::read(path)?;
        if s.rho.grid() != g {
            return Err(Error::Config(format!(
                "init.snapshot {} has grid n = {}, L = {}; config has n = {}, L = {}",
                path.display(),
                s.rho.grid().n(),
                s.rho.grid().length(),
                g.n(),
                g.length()
            )));
        }
        return Ok(InitialFields { rho: s.rho, u: s.u, b: s.b });
    }
    Ok(InitialFields { rho: initial_density(cfg, g), u: initial_velocity(cfg, g), b: initial_magnetic(cfg, g) })
}

/// Projects `v` onto the discretely solenoidal fields of `proj`'s layout.
pub fn solenoidal(v: &VectorField, proj: &Projector) -> VectorField {
    let mut flat = v.to_flat();
    proj.project_in_place(&mut flat);
    VectorField::from_flat(proj.grid(), &flat).expect("length matches grid")
}

/// Body force `g(t, ·)` and applied current `J(t, ·)`.
#[derive(Debug, Clone)]
pub struct Forcing {
    grid: Grid,
    g: GPreset,
    g_amp: f64,
    j: JPreset,
    j_amp: f64,
    length: f64,
    period: f64,
}

impl Forcing {
    pub fn new(cfg: &SimConfig, grid: &Grid) -> Self {
        Self {
            grid: *grid,
            g: cfg.forcing.g,
            g_amp: cfg.forcing.g_amplitude,
            j: cfg.forcing.j,
            j_amp: cfg.forcing.j_amplitude,
            length: cfg.length,
            period: cfg.end_time,
        }
    }

    pub fn g_is_constant(&self) -> bool {
        self.g != GPreset::Oscillating
    }

    pub fn j_is_constant(&self) -> bool {
        self.j != JPreset::Oscillating
    }

    pub fn g(&self, t: f64) -> VectorField {
        let (a, l) = (self.g_amp, self.length);
        match self.g {
            GPreset::None => VectorField::zeros(&self.grid),
            GPreset::Gravity => VectorField::constant(&self.grid, [0.0, 0.0, -a]),
            GPreset::Shear => self.grid.sample_vector(|x| [a * (2.0 * PI * x[2] / l).sin(), 0.0, 0.0]),
            GPreset::Oscillating => {
                let w = (2.0 * PI * t / self.period).cos();
                self.grid.sample_vector(|x| [a * w * (2.0 * PI * x[2] / l).sin(), 0.0, 0.0])
            }
        }
    }

    pub fn j(&self, t: f64) -> VectorField {
        match self.j {
            JPreset::None => VectorField::zeros(&self.grid),
            JPreset::Coil => self.coil(self.j_amp),
            JPreset::Oscillating => self.coil(self.j_amp * (2.0 * PI * t / self.period).cos()),
        }
    }

    /// Azimuthal ring current around the vertical axis through the box center.
    fn coil(&self, a: f64) -> VectorField {
        let l = self.length;
        let (r0, s) = (0.35 * l, 0.05 * l);
        self.grid.sample_vector(|x| {
            let (px, py, pz) = (x[0] - 0.5 * l, x[1] - 0.5 * l, x[2] - 0.5 * l);
            let r = (px * px + py * py).sqrt();
            if r < 1e-12 {
                return [0.0; 3];
            }
            let env = a * (-((r - r0).powi(2) + pz * pz) / (s * s)).exp();
            [-py / r * env, px / r * env, 0.0]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mimetic::Layout;

    fn cfg(text: &str) -> SimConfig {
        SimConfig::parse(text).unwrap()
    }

    #[test]
    fn densities_respect_bounds() {
        for p in ["uniform", "layered", "blob"] {
            let c = cfg(&format!("grid.n = 12\ninit.rho = {p}\ninit.rho_value = 1.5"));
            let g = Grid::new(12, 1.0).unwrap();
            let r = initial_density(&c, &g);
            assert!(r.min() >= c.physics.rho_min && r.max() <= c.physics.rho_max, "{p}");
        }
    }

    #[test]
    fn projected_presets_are_solenoidal() {
        let g = Grid::new(12, 1.0).unwrap();
        let pu = Projector::new(&g, Layout::Velocity);
        let pb = Projector::new(&g, Layout::Magnetic);
        for (u, b) in [("shear", "uniform"), ("vortex", "loop"), ("random", "random")] {
            let c = cfg(&format!("grid.n = 12\ninit.u = {u}\ninit.b = {b}"));
            let uu = solenoidal(&initial_velocity(&c, &g), &pu);
            let bb = solenoidal(&initial_magnetic(&c, &g), &pb);
            assert!(pu.max_div(&uu.to_flat()) <= 1e-11 * uu.max_abs().max(1.0), "{u}");
            assert!(pb.max_div(&bb.to_flat()) <= 1e-11 * bb.max_abs().max(1.0), "{b}");
            assert!(uu.max_abs() > 0.0 && bb.max_abs() > 0.0);
        }
    }

    #[test]
    fn loop_field_is_already_solenoidal() {
        let g = Grid::new(12, 1.0).unwrap();
        let b = initial_magnetic(&cfg("init.b = loop"), &g);
        let div = mimetic::div(&g, &b.to_flat());
        assert!(div.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn random_presets_are_seeded() {
        let g = Grid::new(8, 1.0).unwrap();
        let a = initial_velocity(&cfg("init.u = random\ninit.seed = 4"), &g);
        let b = initial_velocity(&cfg("init.u = random\ninit.seed = 4"), &g);
        let c = initial_velocity(&cfg("init.u = random\ninit.seed = 5"), &g);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn oscillating_forcing_varies_in_time() {
        let g = Grid::new(8, 1.0).unwrap();
        let f = Forcing::new(&cfg("forcing.g = oscillating\nforcing.j = oscillating"), &g);
        assert!(!f.g_is_constant() && !f.j_is_constant());
        assert!(f.g(0.0).max_abs_diff(&f.g(0.05)) > 0.1);
        assert!(f.j(0.0).max_abs() > 0.1);
        let f = Forcing::new(&cfg("forcing.g = gravity"), &g);
        assert_eq!(f.g(0.3).at(5), [0.0, 0.0, -1.0]);
        assert_eq!(f.j(0.3).max_abs(), 0.0);
    }
}
