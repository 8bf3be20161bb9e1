//! The Rothe outer loop.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use crate::config::{BodyShape, SimConfig};
use crate::density::{solve_density_step, DensityStepReport};
use crate::energy::{self, assert_energy_inequality, compute_ledger, EnergyLedger, InequalityReport, LedgerInputs};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::induction::{mollify_forcing, solve_induction_step, InductionStepInputs};
use crate::mimetic::Layout;
use crate::momentum::{solve_momentum_step, MomentumStepInputs};
use crate::presets::{self, Forcing};
use crate::projection::Projector;
use crate::rigid::{self, RigidState, Shape};
use crate::solver::SolveReport;
use crate::vtk::{self, Snapshot};

/// One discrete state `(k, ρᵏ, uᵏ, Bᵏ, body)`; `chi` is the indicator of `body`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: usize,
    pub time: f64,
    pub rho: ScalarField,
    pub u: VectorField,
    pub b: VectorField,
    pub chi: ScalarField,
    pub body: Option<RigidState>,
}

impl SimState {
    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            step: self.step,
            time: self.time,
            rho: self.rho.clone(),
            chi: self.chi.clone(),
            u: self.u.clone(),
            b: self.b.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub density: DensityStepReport,
    pub momentum: SolveReport,
    pub induction: SolveReport,
    pub picard_iterations: usize,
    /// `max|u| Δt / h` of the new velocity.
    pub cfl: f64,
    /// Largest discrete divergence of the new `u` and `B`.
    pub div_u: f64,
    pub div_b: f64,
    /// `‖χᵏ(uᵏ - Πᵏ)‖²_{L²}` with `Πᵏ` the rigid projection of the new state.
    pub rigid_defect_sq: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SimState,
    pub ledger: EnergyLedger,
    pub inequality: InequalityReport,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Time,
    Boundary,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Time => "time",
            StopReason::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub stop_reason: StopReason,
    pub final_time: f64,
    pub energy_violations: usize,
    pub max_div_u: f64,
    pub max_div_b: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub max_cfl: f64,
    /// `‖χ(u - Π)‖_{L²(0,T';L²)}` from the piecewise constant interpolant.
    pub rigid_defect: f64,
    pub warnings: Vec<String>,
}

/// A validated configuration with its grid, projectors and forcing.
pub struct Simulation {
    cfg: SimConfig,
    grid: Grid,
    proj_u: Projector,
    proj_b: Projector,
    forcing: Forcing,
}

fn rigid_defect_sq(rho: &ScalarField, chi: &ScalarField, u: &VectorField) -> Result<f64> {
    let f = rigid::body_functionals(rho, chi, u)?;
    let pi = rigid::rigid_projection(&f, rho.grid());
    let g = rho.grid();
    let mut s = 0.0;
    for c in 0..g.len() {
        if chi.values[c] != 0.0 {
            let (a, p) = (u.at(c), pi.at(c));
            s += chi.values[c] * ((a[0] - p[0]).powi(2) + (a[1] - p[1]).powi(2) + (a[2] - p[2]).powi(2));
        }
    }
    Ok(s * g.cell_volume())
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = Grid::new(cfg.n, cfg.length)?;
        Ok(Self {
            proj_u: Projector::new(&grid, Layout::Velocity),
            proj_b: Projector::new(&grid, Layout::Magnetic),
            forcing: Forcing::new(&cfg, &grid),
            grid,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn velocity_projector(&self) -> &Projector {
        &self.proj_u
    }

    pub fn magnetic_projector(&self) -> &Projector {
        &self.proj_b
    }

    fn initial_body(&self) -> Result<Option<RigidState>> {
        let c = &self.cfg.body;
        let shape = match c.shape {
            BodyShape::None => return Ok(None),
            BodyShape::Sphere => Shape::Sphere { radius: c.radius },
            BodyShape::Box => Shape::Cuboid { half: c.half_extents },
        };
        let body = RigidState::new(shape, self.cfg.body_center(), &self.grid)?.with_velocity(c.velocity, c.angular_velocity);
        let d = rigid::distance_to_boundary(&body, &self.grid);
        if !(d > self.cfg.stop_clearance) {
            return Err(Error::Config(format!(
                "body must start clear of the walls by more than stop.clearance = {} (distance {d})",
                self.cfg.stop_clearance
            )));
        }
        Ok(Some(body))
    }

    /// State 0: `u₀` and `B₀` projected, `ρ₀` checked against the bounds.
    /// The configured body velocity is superposed on `u₀` inside the body.
    pub fn initial_state(&self) -> Result<SimState> {
        let g = &self.grid;
        let init = presets::initial_fields(&self.cfg, g)?;
        let (lo, hi) = (self.cfg.physics.rho_min, self.cfg.physics.rho_max);
        if !init.rho.is_finite() || init.rho.min() < lo || init.rho.max() > hi {
            return Err(Error::Config(format!(
                "initial density range [{}, {}] violates rho_min <= rho <= rho_max = [{lo}, {hi}]",
                init.rho.min(),
                init.rho.max()
            )));
        }
        if !init.u.is_finite() || !init.b.is_finite() {
            return Err(Error::NonFinite("initial fields"));
        }
        let body = self.initial_body()?;
        let chi = match &body {
            Some(b) => rigid::indicator(b, g),
            None => ScalarField::zeros(g),
        };
        let mut u = init.u;
        if let Some(b) = &body {
            let rf = rigid::rigid_field(b.velocity, b.angular_velocity, b.center, g);
            u = u.add(&rf.weighted(&chi));
        }
        Ok(SimState {
            step: 0,
            time: 0.0,
            rho: init.rho,
            u: presets::solenoidal(&u, &self.proj_u),
            b: presets::solenoidal(&init.b, &self.proj_b),
            chi,
            body,
        })
    }

    fn forcing_at(&self, t: f64) -> Result<(VectorField, VectorField)> {
        let (gamma, end) = (self.cfg.reg.gamma, self.cfg.end_time);
        let f = &self.forcing;
        let g = if f.g_is_constant() { f.g(t) } else { mollify_forcing(&|s| f.g(s), gamma, t, end)? };
        let j = if f.j_is_constant() { f.j(t) } else { mollify_forcing(&|s| f.j(s), gamma, t, end)? };
        Ok((g, j))
    }

    /// Advances `prev` by one step.
    pub fn step(&self, prev: &SimState) -> Result<StepOutcome> {
        let cfg = &self.cfg;
        let g = &self.grid;
        let (dt, eps) = (cfg.dt, cfg.reg.epsilon);
        let k = prev.step + 1;
        let time = k as f64 * dt;

        // Rigid velocity of the body from the previous state, then its motion.
        let (pi_prev, body, chi) = match &prev.body {
            Some(b) => {
                let f = rigid::body_functionals(&prev.rho, &prev.chi, &prev.u)?;
                let pi = rigid::rigid_projection(&f, g);
                let moved = rigid::advance_isometry(&rigid::set_body_velocity(b, &f), dt);
                let chi = rigid::indicator(&moved, g);
                (pi, Some(moved), chi)
            }
            None => (VectorField::zeros(g), None, ScalarField::zeros(g)),
        };

        let (rho, density) = solve_density_step(&prev.rho, &prev.u, eps, dt, cfg.solver.density_tol, cfg.solver.max_iter)?;

        let (gk, jk) = self.forcing_at(time)?;

        let mom = solve_momentum_step(
            &MomentumStepInputs {
                rho_new: &rho,
                rho_prev: &prev.rho,
                u_prev: &prev.u,
                chi_new: &chi,
                pi_prev: &pi_prev,
                b_prev: &prev.b,
                g: &gk,
                params: cfg.physics,
                dt,
                eps,
                eta: cfg.reg.eta,
            },
            &self.proj_u,
            cfg.solver.tol,
            cfg.solver.max_iter,
        )?;

        let ind = solve_induction_step(
            &InductionStepInputs {
                b_prev: &prev.b,
                u_new: &mom.u,
                chi_new: &chi,
                j: &jk,
                params: cfg.physics,
                dt,
                eps,
                kappa_solid: cfg.reg.kappa_solid,
            },
            &self.proj_b,
            cfg.solver.tol,
            cfg.solver.max_iter,
            cfg.solver.picard_max,
        )?;

        let ledger = compute_ledger(&LedgerInputs {
            rho_prev: &prev.rho,
            rho_new: &rho,
            u_prev: &prev.u,
            u_new: &mom.u,
            b_prev: &prev.b,
            b_new: &ind.b,
            chi_new: &chi,
            pi_prev: &pi_prev,
            g: &gk,
            j: &jk,
            params: cfg.physics,
            reg: cfg.reg,
            dt,
        });
        let inequality = assert_energy_inequality(&ledger);

        let rigid_defect_sq = if body.is_some() { rigid_defect_sq(&rho, &chi, &mom.u)? } else { 0.0 };
        let diagnostics = StepDiagnostics {
            density,
            momentum: mom.report,
            induction: ind.report,
            picard_iterations: ind.picard_iterations,
            cfl: mom.cfl,
            div_u: self.proj_u.max_div(&mom.u.to_flat()),
            div_b: self.proj_b.max_div(&ind.b.to_flat()),
            rigid_defect_sq,
        };
        Ok(StepOutcome {
            state: SimState { step: k, time, rho, u: mom.u, b: ind.b, chi, body },
            ledger,
            inequality,
            diagnostics,
        })
    }

    /// Steps from `state` until `T` or until the body reaches the clearance
    /// threshold. `observer` sees every accepted state, starting with the
    /// initial one (with no outcome). A state whose body would cross a wall
    /// is discarded.
    pub fn run_from(
        &self,
        mut state: SimState,
        observer: &mut dyn FnMut(&SimState, Option<&StepOutcome>) -> Result<()>,
    ) -> Result<(RunSummary, SimState)> {
        let mut summary = RunSummary {
            steps: 0,
            stop_reason: StopReason::Time,
            final_time: state.time,
            energy_violations: 0,
            max_div_u: self.proj_u.max_div(&state.u.to_flat()),
            max_div_b: self.proj_b.max_div(&state.b.to_flat()),
            rho_min: state.rho.min(),
            rho_max: state.rho.max(),
            max_cfl: 0.0,
            rigid_defect: 0.0,
            warnings: Vec::new(),
        };
        observer(&state, None)?;
        let total = self.cfg.steps();
        let mut defect_sq = 0.0;
        while state.step < total {
            if let Some(b) = &state.body {
                if rigid::distance_to_boundary(b, &self.grid) <= self.cfg.stop_clearance {
                    summary.stop_reason = StopReason::Boundary;
                    break;
                }
            }
            let out = match self.step(&state) {
                Ok(o) => o,
                Err(e) => {
                    return Err(Error::StepFailed { step: state.step + 1, dump: self.dump_failed(&state), source: Box::new(e) })
                }
            };
            if let Some(b) = &out.state.body {
                if rigid::distance_to_boundary(b, &self.grid) < 0.0 {
                    summary.stop_reason = StopReason::Boundary;
                    break;
                }
            }
            let d = &out.diagnostics;
            if !out.inequality.passed {
                summary.energy_violations += 1;
                summary.warnings.push(format!(
                    "step {}: energy inequality violated by {:.3e} (tolerance {:.3e})",
                    out.state.step, out.inequality.margin, out.inequality.tolerance
                ));
            }
            if d.cfl > 1.0 {
                summary.warnings.push(format!("step {}: CFL number {:.3} exceeds 1", out.state.step, d.cfl));
            }
            summary.max_cfl = summary.max_cfl.max(d.cfl);
            summary.max_div_u = summary.max_div_u.max(d.div_u);
            summary.max_div_b = summary.max_div_b.max(d.div_b);
            summary.rho_min = summary.rho_min.min(d.density.min);
            summary.rho_max = summary.rho_max.max(d.density.max);
            defect_sq += self.cfg.dt * d.rigid_defect_sq;
            observer(&out.state, Some(&out))?;
            summary.steps += 1;
            state = out.state;
        }
        summary.final_time = state.time;
        summary.rigid_defect = defect_sq.sqrt();
        Ok((summary, state))
    }

    fn dump_failed(&self, state: &SimState) -> String {
        let dir = &self.cfg.output.dir;
        let path = dir.join(format!("failed_step_{:06}.vtk", state.step + 1));
        match std::fs::create_dir_all(dir).map_err(Error::from).and_then(|_| vtk::write(&path, &state.snapshot())) {
            Ok(()) => format!("input state saved to {}", path.display()),
            Err(e) => format!("could not save input state: {e}"),
        }
    }
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snap_{step:06}.vtk"))
}

/// Full run with file output: `ledger.csv` (row 0 is the initial energy)
/// and snapshots every `output.cadence` steps into `output.dir`.
pub fn run(cfg: &SimConfig) -> Result<RunSummary> {
    let sim = Simulation::new(cfg.clone())?;
    let state = sim.initial_state()?;
    let out = &cfg.output;
    let writing = out.ledger || out.cadence > 0;
    if writing {
        std::fs::create_dir_all(&out.dir)?;
    }
    let mut ledger = if out.ledger {
        let mut w = BufWriter::new(File::create(out.dir.join("ledger.csv"))?);
        writeln!(w, "{}", EnergyLedger::CSV_HEADER)?;
        Some(w)
    } else {
        None
    };
    let mu = cfg.physics.mu;
    let mut observer = |s: &SimState, o: Option<&StepOutcome>| -> Result<()> {
        if let Some(w) = ledger.as_mut() {
            let row = match o {
                Some(o) => o.ledger,
                None => EnergyLedger::initial(energy::kinetic_energy(&s.rho, &s.u), energy::magnetic_energy(&s.b, mu)),
            };
            writeln!(w, "{}", row.csv_row(s.step, s.time))?;
        }
        if out.cadence > 0 && s.step % out.cadence == 0 {
            vtk::write(&snapshot_path(&out.dir, s.step), &s.snapshot())?;
        }
        Ok(())
    };
    let (summary, _) = sim.run_from(state, &mut observer)?;
    if let Some(mut w) = ledger {
        w.flush()?;
    }
    Ok(summary)
}
