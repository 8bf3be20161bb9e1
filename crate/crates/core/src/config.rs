//! Flat `key = value` configuration with dotted section names.
//!
//! Blank lines and `#` comments are ignored. Unknown keys, repeated keys and
//! malformed values are errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::params::{MaterialParams, Regularization};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyShape {
    None,
    Sphere,
    Box,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyConfig {
    pub shape: BodyShape,
    pub radius: f64,
    pub half_extents: [f64; 3],
    /// Center; `None` means the middle of the box.
    pub center: Option<[f64; 3]>,
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoPreset {
    Uniform,
    Layered,
    Blob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityPreset {
    Rest,
    Shear,
    Vortex,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagneticPreset {
    Zero,
    Uniform,
    Loop,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GPreset {
    None,
    Gravity,
    Shear,
    Oscillating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JPreset {
    None,
    Coil,
    Oscillating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub rho: RhoPreset,
    pub rho_value: f64,
    pub u: VelocityPreset,
    pub u_amplitude: f64,
    pub b: MagneticPreset,
    pub b_amplitude: f64,
    pub seed: u64,
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingConfig {
    pub g: GPreset,
    pub g_amplitude: f64,
    pub j: JPreset,
    pub j_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative residual for the momentum and induction solves and the
    /// Picard increment.
    pub tol: f64,
    pub density_tol: f64,
    pub max_iter: usize,
    pub picard_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Snapshot every `cadence` steps; 0 disables snapshots.
    pub cadence: usize,
    pub dir: PathBuf,
    pub ledger: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub length: f64,
    pub dt: f64,
    pub end_time: f64,
    pub physics: MaterialParams,
    pub reg: Regularization,
    /// True when `reg.gamma` was not given (then `γ = Δt`).
    pub gamma_from_dt: bool,
    pub body: BodyConfig,
    pub init: InitConfig,
    pub forcing: ForcingConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub stop_clearance: f64,
    pub allow_unstable: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 24,
            length: 1.0,
            dt: 1e-3,
            end_time: 0.1,
            physics: MaterialParams::default(),
            reg: Regularization { epsilon: 5e-3, eta: 0.1, kappa_solid: 1e-3, gamma: 1e-3 },
            gamma_from_dt: true,
            body: BodyConfig {
                shape: BodyShape::Sphere,
                radius: 0.2,
                half_extents: [0.2, 0.1, 0.1],
                center: None,
                velocity: [0.0; 3],
                angular_velocity: [0.0; 3],
            },
            init: InitConfig {
                rho: RhoPreset::Uniform,
                rho_value: 1.0,
                u: VelocityPreset::Rest,
                u_amplitude: 1.0,
                b: MagneticPreset::Zero,
                b_amplitude: 1.0,
                seed: 0,
                snapshot: None,
            },
            forcing: ForcingConfig { g: GPreset::None, g_amplitude: 1.0, j: JPreset::None, j_amplitude: 1.0 },
            solver: SolverConfig { tol: 1e-11, density_tol: 1e-12, max_iter: 2000, picard_max: 50 },
            output: OutputConfig { cadence: 0, dir: PathBuf::from("out"), ledger: true },
            stop_clearance: 0.02,
            allow_unstable: false,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: expected {what}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v, "a finite number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| bad(key, v, "a nonnegative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

fn parse_vec3(key: &str, v: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(bad(key, v, "three comma-separated numbers"));
    }
    Ok([parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?])
}

fn choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T> {
    options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        bad(key, v, &format!("one of {}", names.join("|")))
    })
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: key {key} given twice", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        if cfg.gamma_from_dt {
            cfg.reg.gamma = cfg.dt;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // Relative snapshot paths are taken relative to the config file.
        if let (Some(snap), Some(dir)) = (&cfg.init.snapshot, path.parent()) {
            if snap.is_relative() {
                cfg.init.snapshot = Some(dir.join(snap));
            }
        }
        Ok(cfg)
    }

    /// Set one key. Does not revalidate; call [`SimConfig::validate`].
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "grid.n" => self.n = parse_usize(key, v)?,
            "grid.L" => self.length = parse_f64(key, v)?,
            "time.dt" => {
                self.dt = parse_f64(key, v)?;
                if self.gamma_from_dt {
                    self.reg.gamma = self.dt;
                }
            }
            "time.T" => self.end_time = parse_f64(key, v)?,
            "physics.sigma" => self.physics.sigma = parse_f64(key, v)?,
            "physics.mu" => self.physics.mu = parse_f64(key, v)?,
            "physics.nu" => self.physics.nu = parse_f64(key, v)?,
            "physics.rho_min" => self.physics.rho_min = parse_f64(key, v)?,
            "physics.rho_max" => self.physics.rho_max = parse_f64(key, v)?,
            "reg.epsilon" => self.reg.epsilon = parse_f64(key, v)?,
            "reg.eta" => self.reg.eta = parse_f64(key, v)?,
            "reg.kappa_solid" => self.reg.kappa_solid = parse_f64(key, v)?,
            "reg.gamma" => {
                self.reg.gamma = parse_f64(key, v)?;
                self.gamma_from_dt = false;
            }
            "body.shape" => {
                self.body.shape = choice(key, v, &[("none", BodyShape::None), ("sphere", BodyShape::Sphere), ("box", BodyShape::Box)])?
            }
            "body.radius" => self.body.radius = parse_f64(key, v)?,
            "body.half_extents" => self.body.half_extents = parse_vec3(key, v)?,
            "body.center" => self.body.center = Some(parse_vec3(key, v)?),
            "body.velocity" => self.body.velocity = parse_vec3(key, v)?,
            "body.angular_velocity" => self.body.angular_velocity = parse_vec3(key, v)?,
            "init.rho" => {
                self.init.rho = choice(key, v, &[("uniform", RhoPreset::Uniform), ("layered", RhoPreset::Layered), ("blob", RhoPreset::Blob)])?
            }
            "init.rho_value" => self.init.rho_value = parse_f64(key, v)?,
            "init.u" => {
                self.init.u = choice(
                    key,
                    v,
                    &[
                        ("rest", VelocityPreset::Rest),
                        ("shear", VelocityPreset::Shear),
                        ("vortex", VelocityPreset::Vortex),
                        ("random", VelocityPreset::Random),
                    ],
                )?
            }
            "init.u_amplitude" => self.init.u_amplitude = parse_f64(key, v)?,
            "init.b" => {
                self.init.b = choice(
                    key,
                    v,
                    &[
                        ("zero", MagneticPreset::Zero),
                        ("uniform", MagneticPreset::Uniform),
                        ("loop", MagneticPreset::Loop),
                        ("random", MagneticPreset::Random),
                    ],
                )?
            }
            "init.b_amplitude" => self.init.b_amplitude = parse_f64(key, v)?,
            "init.seed" => self.init.seed = v.parse().map_err(|_| bad(key, v, "a nonnegative integer"))?,
            "init.snapshot" => self.init.snapshot = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "forcing.g" => {
                self.forcing.g = choice(
                    key,
                    v,
                    &[("none", GPreset::None), ("gravity", GPreset::Gravity), ("shear", GPreset::Shear), ("oscillating", GPreset::Oscillating)],
                )?
            }
            "forcing.g_amplitude" => self.forcing.g_amplitude = parse_f64(key, v)?,
            "forcing.j" => {
                self.forcing.j = choice(key, v, &[("none", JPreset::None), ("coil", JPreset::Coil), ("oscillating", JPreset::Oscillating)])?
            }
            "forcing.j_amplitude" => self.forcing.j_amplitude = parse_f64(key, v)?,
            "solver.tol" => self.solver.tol = parse_f64(key, v)?,
            "solver.density_tol" => self.solver.density_tol = parse_f64(key, v)?,
            "solver.max_iter" => self.solver.max_iter = parse_usize(key, v)?,
            "solver.picard_max" => self.solver.picard_max = parse_usize(key, v)?,
            "output.cadence" => self.output.cadence = parse_usize(key, v)?,
            "output.dir" => self.output.dir = PathBuf::from(v),
            "output.ledger" => self.output.ledger = parse_bool(key, v)?,
            "stop.clearance" => self.stop_clearance = parse_f64(key, v)?,
            "stability.allow_unstable" => self.allow_unstable = parse_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Number of steps `T/Δt`.
    pub fn steps(&self) -> usize {
        (self.end_time / self.dt).round() as usize
    }

    pub fn body_center(&self) -> [f64; 3] {
        self.body.center.unwrap_or([0.5 * self.length; 3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < crate::grid::MIN_CELLS {
            return Err(Error::Config(format!("grid.n must be at least {}, got {}", crate::grid::MIN_CELLS, self.n)));
        }
        if !(self.length > 0.0) {
            return Err(Error::Config("grid.L must be positive".into()));
        }
        if !(self.dt > 0.0 && self.end_time > 0.0) {
            return Err(Error::Config("time.dt and time.T must be positive".into()));
        }
        let ratio = self.end_time / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::Config(format!("time.T / time.dt must be a positive integer, got {ratio}")));
        }
        self.physics.validate()?;
        self.reg.validate()?;
        if self.reg.gamma > 0.5 * self.end_time {
            return Err(Error::Config(format!("reg.gamma ({}) must not exceed time.T / 2", self.reg.gamma)));
        }
        let guard = self.reg.eta * self.physics.rho_min / self.physics.rho_max;
        if self.dt > guard * (1.0 + 1e-12) && !self.allow_unstable {
            return Err(Error::Config(format!(
                "time.dt = {} exceeds the explicit-penalty guard reg.eta * rho_min / rho_max = {guard}; \
                 set stability.allow_unstable = true to override",
                self.dt
            )));
        }
        if !(self.solver.tol > 0.0 && self.solver.density_tol > 0.0) || self.solver.max_iter == 0 || self.solver.picard_max == 0 {
            return Err(Error::Config("solver tolerances and iteration limits must be positive".into()));
        }
        if !(self.stop_clearance >= 0.0) {
            return Err(Error::Config("stop.clearance must be nonnegative".into()));
        }
        if self.init.rho == RhoPreset::Uniform
            && !(self.init.rho_value >= self.physics.rho_min && self.init.rho_value <= self.physics.rho_max)
        {
            return Err(Error::Config(format!(
                "init.rho_value = {} lies outside [physics.rho_min, physics.rho_max] = [{}, {}]",
                self.init.rho_value, self.physics.rho_min, self.physics.rho_max
            )));
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let v3 = |v: [f64; 3]| format!("{:?},{:?},{:?}", v[0], v[1], v[2]);
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("grid.n", self.n.to_string());
        kv("grid.L", format!("{:?}", self.length));
        kv("time.dt", format!("{:?}", self.dt));
        kv("time.T", format!("{:?}", self.end_time));
        kv("physics.sigma", format!("{:?}", self.physics.sigma));
        kv("physics.mu", format!("{:?}", self.physics.mu));
        kv("physics.nu", format!("{:?}", self.physics.nu));
        kv("physics.rho_min", format!("{:?}", self.physics.rho_min));
        kv("physics.rho_max", format!("{:?}", self.physics.rho_max));
        kv("reg.epsilon", format!("{:?}", self.reg.epsilon));
        kv("reg.eta", format!("{:?}", self.reg.eta));
        kv("reg.kappa_solid", format!("{:?}", self.reg.kappa_solid));
        if !self.gamma_from_dt {
            kv("reg.gamma", format!("{:?}", self.reg.gamma));
        }
        kv(
            "body.shape",
            match self.body.shape {
                BodyShape::None => "none",
                BodyShape::Sphere => "sphere",
                BodyShape::Box => "box",
            }
            .into(),
        );
        kv("body.radius", format!("{:?}", self.body.radius));
        kv("body.half_extents", v3(self.body.half_extents));
        if let Some(c) = self.body.center {
            kv("body.center", v3(c));
        }
        kv("body.velocity", v3(self.body.velocity));
        kv("body.angular_velocity", v3(self.body.angular_velocity));
        kv("init.rho", format!("{:?}", self.init.rho).to_lowercase());
        kv("init.rho_value", format!("{:?}", self.init.rho_value));
        kv("init.u", format!("{:?}", self.init.u).to_lowercase());
        kv("init.u_amplitude", format!("{:?}", self.init.u_amplitude));
        kv("init.b", format!("{:?}", self.init.b).to_lowercase());
        kv("init.b_amplitude", format!("{:?}", self.init.b_amplitude));
        kv("init.seed", self.init.seed.to_string());
        if let Some(p) = &self.init.snapshot {
            kv("init.snapshot", p.display().to_string());
        }
        kv("forcing.g", format!("{:?}", self.forcing.g).to_lowercase());
        kv("forcing.g_amplitude", format!("{:?}", self.forcing.g_amplitude));
        kv("forcing.j", format!("{:?}", self.forcing.j).to_lowercase());
        kv("forcing.j_amplitude", format!("{:?}", self.forcing.j_amplitude));
        kv("solver.tol", format!("{:?}", self.solver.tol));
        kv("solver.density_tol", format!("{:?}", self.solver.density_tol));
        kv("solver.max_iter", self.solver.max_iter.to_string());
        kv("solver.picard_max", self.solver.picard_max.to_string());
        kv("output.cadence", self.output.cadence.to_string());
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.ledger", self.output.ledger.to_string());
        kv("stop.clearance", format!("{:?}", self.stop_clearance));
        kv("stability.allow_unstable", self.allow_unstable.to_string());
        s
    }
}
