use crate::error::{Error, Result};

/// Physical constants of the fluid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Electrical conductivity of the fluid.
    pub sigma: f64,
    /// Magnetic permeability (same in fluid and body).
    pub mu: f64,
    /// Kinematic viscosity.
    pub nu: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self { sigma: 1.0, mu: 1.0, nu: 0.1, rho_min: 1.0, rho_max: 2.0 }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("mu", self.mu), ("nu", self.nu), ("rho_min", self.rho_min), ("rho_max", self.rho_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("physics.{name} must be positive and finite, got {v}")));
            }
        }
        if self.rho_min > self.rho_max {
            return Err(Error::Config(format!("physics.rho_min ({}) exceeds physics.rho_max ({})", self.rho_min, self.rho_max)));
        }
        Ok(())
    }

    /// Magnetic diffusivity `1/(σμ)` of the fluid.
    pub fn resistivity(&self) -> f64 {
        1.0 / (self.sigma * self.mu)
    }
}

/// Regularization and penalization knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    pub epsilon: f64,
    pub eta: f64,
    /// Resistivity contrast of the body: its resistivity is `1/(σμ κ)`.
    pub kappa_solid: f64,
    /// Mollification width in time.
    pub gamma: f64,
}

impl Regularization {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("eta", self.eta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("reg.{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.kappa_solid > 0.0 && self.kappa_solid <= 1.0) {
            return Err(Error::Config(format!("reg.kappa_solid must lie in (0, 1], got {}", self.kappa_solid)));
        }
        Ok(())
    }
}
