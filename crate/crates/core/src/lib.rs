//! Penalized, regularized Rothe scheme for a rigid insulating body moving in
//! an incompressible conducting fluid on a cubic box.

pub mod density;
pub mod driver;
pub mod energy;
pub mod error;
pub mod grid;
pub mod induction;
pub mod mimetic;
pub mod momentum;
pub mod check;
pub mod config;
pub mod params;
pub mod presets;
pub mod projection;
pub mod rigid;
pub mod trajectory;
pub mod solver;
pub mod sweep;
pub mod vtk;

pub use error::{Error, Result};
pub use grid::{Grid, ScalarField, VectorField};
