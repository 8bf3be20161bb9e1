//! Term-by-term discrete energy balance of one step.
//!
//! Testing the momentum step with `u` and the induction step with `B/μ`
//! gives, exactly for the discrete scheme,
//!
//! ```text
//! K + M + viscous + ohmic + reg + penalty_work + numerical = K' + M' + source_work + mixed
//! ```
//!
//! where `numerical = ∫ρ'|u - u'|²/2 + ∫|B - B'|²/(2μ) ≥ 0`. The ledger keeps
//! every term except the numerical dissipation, so the inequality
//! `lhs ≤ rhs` must hold.

use std::fmt::Write as _;

use crate::grid::{self, Grid, ScalarField, VectorField};
use crate::induction::resistivity;
use crate::mimetic;
use crate::params::{MaterialParams, Regularization};

/// Relative tolerance of the energy inequality.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger {
    pub kinetic_prev: f64,
    pub magnetic_prev: f64,
    pub kinetic: f64,
    pub magnetic: f64,
    pub viscous: f64,
    pub ohmic: f64,
    pub reg_biharmonic: f64,
    pub reg_quartic: f64,
    pub reg_curl4: f64,
    pub penalty_work: f64,
    pub source_work: f64,
    pub mixed_residual: f64,
}

pub struct LedgerInputs<'a> {
    pub rho_prev: &'a ScalarField,
    pub rho_new: &'a ScalarField,
    pub u_prev: &'a VectorField,
    pub u_new: &'a VectorField,
    pub b_prev: &'a VectorField,
    pub b_new: &'a VectorField,
    pub chi_new: &'a ScalarField,
    pub pi_prev: &'a VectorField,
    pub g: &'a VectorField,
    pub j: &'a VectorField,
    pub params: MaterialParams,
    pub reg: Regularization,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityReport {
    pub passed: bool,
    /// `lhs - rhs`; positive means the inequality is violated by that much.
    pub margin: f64,
    pub tolerance: f64,
}

fn sum(v: impl Iterator<Item = f64>) -> f64 {
    v.sum()
}

pub fn kinetic_energy(rho: &ScalarField, u: &VectorField) -> f64 {
    let g = rho.grid();
    0.5 * g.cell_volume() * sum((0..g.len()).map(|c| rho.values[c] * u.at(c).iter().map(|x| x * x).sum::<f64>()))
}

pub fn magnetic_energy(b: &VectorField, mu: f64) -> f64 {
    let g = b.grid();
    g.cell_volume() / (2.0 * mu) * sum(b.to_flat().iter().map(|x| x * x))
}

fn norms3(g: &Grid, v: &[f64]) -> Vec<f64> {
    let len = g.len();
    (0..len).map(|c| v[c] * v[c] + v[len + c] * v[len + c] + v[2 * len + c] * v[2 * len + c]).collect()
}

pub fn compute_ledger(inp: &LedgerInputs) -> EnergyLedger {
    let g = inp.rho_new.grid();
    let len = g.len();
    let dv = g.cell_volume();
    let (dt, mu, eps) = (inp.dt, inp.params.mu, inp.reg.epsilon);
    let u = inp.u_new.to_flat();
    let b = inp.b_new.to_flat();
    let bp = inp.b_prev.to_flat();

    let sym = mimetic::sym_grad(g, &u);
    let viscous = 2.0 * inp.params.nu * dt * dv * sum(sym.iter().flat_map(|s| s.iter().map(|x| x * x)));

    let mut lap = vec![0.0; len];
    let mut bih = 0.0;
    for comp in 0..3 {
        mimetic::laplacian_into(g, &u[comp * len..(comp + 1) * len], &mut lap);
        bih += sum(lap.iter().map(|x| x * x));
    }
    let reg_biharmonic = eps * dt * dv * bih;

    let cb = mimetic::curl(g, &b);
    let cb2 = norms3(g, &cb);
    let eta_eff = resistivity(inp.chi_new, &inp.params, inp.reg.kappa_solid);
    let ohmic = dt / mu * dv * sum((0..len).map(|c| eta_eff[c] * cb2[c]));
    let reg_quartic = eps / mu.powi(3) * dt * dv * sum(cb2.iter().map(|x| x * x));
    let ccb = mimetic::curl(g, &cb);
    let reg_curl4 = eps / mu * dt * dv * sum(ccb.iter().map(|x| x * x));

    let mut pen = 0.0;
    let mut grav = 0.0;
    for c in 0..len {
        let (uc, up, pp, gc) = (inp.u_new.at(c), inp.u_prev.at(c), inp.pi_prev.at(c), inp.g.at(c));
        let r = inp.rho_prev.values[c];
        let w = inp.chi_new.values[c] * r / inp.reg.eta;
        for d in 0..3 {
            pen += w * (up[d] - pp[d]) * uc[d];
            grav += r * gc[d] * uc[d];
        }
    }
    let jf = inp.j.to_flat();
    let jwork = sum(jf.iter().zip(&cb).map(|(a, b)| a * b));
    let penalty_work = dt * dv * pen;
    let source_work = dt * dv * grav + dt * dv / (inp.params.sigma * mu) * jwork;

    let cbp = mimetic::curl(g, &bp);
    let mut mixed = 0.0;
    for c in 0..len {
        let cp = [cbp[c], cbp[len + c], cbp[2 * len + c]];
        let bpc = [bp[c], bp[len + c], bp[2 * len + c]];
        let cn = [cb[c], cb[len + c], cb[2 * len + c]];
        let uc = inp.u_new.at(c);
        mixed += grid::dot3(grid::cross3(cp, bpc), uc) + grid::dot3(grid::cross3(uc, bpc), cn);
    }
    let mixed_residual = dt / mu * dv * mixed;

    EnergyLedger {
        kinetic_prev: kinetic_energy(inp.rho_prev, inp.u_prev),
        magnetic_prev: magnetic_energy(inp.b_prev, mu),
        kinetic: kinetic_energy(inp.rho_new, inp.u_new),
        magnetic: magnetic_energy(inp.b_new, mu),
        viscous,
        ohmic,
        reg_biharmonic,
        reg_quartic,
        reg_curl4,
        penalty_work,
        source_work,
        mixed_residual,
    }
}

impl EnergyLedger {
    /// Ledger row of the initial state: energies only.
    pub fn initial(kinetic: f64, magnetic: f64) -> Self {
        Self { kinetic_prev: kinetic, magnetic_prev: magnetic, kinetic, magnetic, ..Self::default() }
    }

    pub fn dissipation(&self) -> f64 {
        self.viscous + self.ohmic + self.reg_biharmonic + self.reg_quartic + self.reg_curl4
    }

    pub fn lhs(&self) -> f64 {
        self.kinetic + self.magnetic + self.dissipation() + self.penalty_work
    }

    pub fn rhs(&self) -> f64 {
        self.kinetic_prev + self.magnetic_prev + self.source_work + self.mixed_residual
    }

    pub fn total(&self) -> f64 {
        self.kinetic + self.magnetic
    }

    pub fn total_prev(&self) -> f64 {
        self.kinetic_prev + self.magnetic_prev
    }

    pub const CSV_HEADER: &'static str =
        "step,time,kinetic,magnetic,viscous,ohmic,reg_biharmonic,reg_quartic,reg_curl4,penalty_work,source_work,mixed_residual";

    pub fn csv_row(&self, step: usize, time: f64) -> String {
        let mut s = format!("{step},{time:.16e}");
        for v in [
            self.kinetic,
            self.magnetic,
            self.viscous,
            self.ohmic,
            self.reg_biharmonic,
            self.reg_quartic,
            self.reg_curl4,
            self.penalty_work,
            self.source_work,
            self.mixed_residual,
        ] {
            let _ = write!(s, ",{v:.16e}");
        }
        s
    }
}

/// Checks `lhs ≤ rhs` within `ENERGY_TOL` times the energy scale, and that
/// every dissipation entry is nonnegative (within `1e-12` of the scale).
/// `margin` is the largest violation found (`lhs - rhs` if none).
pub fn assert_energy_inequality(ledger: &EnergyLedger) -> InequalityReport {
    let scale = ledger.total_prev().max(ledger.total());
    let tolerance = ENERGY_TOL * scale;
    let mut margin = ledger.lhs() - ledger.rhs();
    let mut passed = margin <= tolerance;
    for d in [ledger.viscous, ledger.ohmic, ledger.reg_biharmonic, ledger.reg_quartic, ledger.reg_curl4] {
        if d < -1e-12 * scale {
            passed = false;
            margin = margin.max(-d);
        }
    }
    InequalityReport { passed, margin, tolerance }
}

/// `|∫(curl B × B)·u + ∫(u × B)·curl B| / (1 + |∫(u × B)·curl B|)`.
pub fn mixed_term_residual(u: &VectorField, b: &VectorField) -> f64 {
    let g = u.grid();
    let cb = grid::curl(b);
    let (mut lorentz, mut emf) = (0.0, 0.0);
    for c in 0..g.len() {
        let (uc, bc, cc) = (u.at(c), b.at(c), cb.at(c));
        lorentz += grid::dot3(grid::cross3(cc, bc), uc);
        emf += grid::dot3(grid::cross3(uc, bc), cc);
    }
    let dv = g.cell_volume();
    (lorentz * dv + emf * dv).abs() / (1.0 + (emf * dv).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{solve_density_step, tests::random_velocity};
    use crate::induction::{solve_induction_step, InductionStepInputs};
    use crate::mimetic::Layout;
    use crate::momentum::{solve_momentum_step, MomentumStepInputs};
    use crate::projection::Projector;
    use crate::rigid::{body_functionals, indicator, rigid_projection, RigidState, Shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(g: &Grid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VectorField::from_flat(g, &(0..3 * g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_states_give_zero_ledger() {
        let g = Grid::new(8, 1.0).unwrap();
        let z = VectorField::zeros(&g);
        let rho = ScalarField::constant(&g, 1.0);
        let chi = ScalarField::zeros(&g);
        let l = compute_ledger(&LedgerInputs {
            rho_prev: &rho,
            rho_new: &rho,
            u_prev: &z,
            u_new: &z,
            b_prev: &z,
            b_new: &z,
            chi_new: &chi,
            pi_prev: &z,
            g: &z,
            j: &z,
            params: MaterialParams::default(),
            reg: Regularization { epsilon: 1e-3, eta: 0.1, kappa_solid: 1e-3, gamma: 0.01 },
            dt: 0.01,
        });
        assert_eq!(l, EnergyLedger::default());
        assert!(assert_energy_inequality(&l).passed);
    }

    #[test]
    fn negated_ohmic_fails() {
        let mut l = EnergyLedger::initial(1.0, 1.0);
        l.ohmic = 0.5;
        l.kinetic = 0.7;
        l.magnetic = 0.7;
        assert!(assert_energy_inequality(&l).passed);
        l.ohmic = -l.ohmic;
        let r = assert_energy_inequality(&l);
        assert!(!r.passed && r.margin > 0.0);
    }

    #[test]
    fn mixed_identity_on_random_fields() {
        let g = Grid::new(10, 1.0).unwrap();
        for s in 0..5 {
            let r = mixed_term_residual(&random_field(&g, 2 * s), &random_field(&g, 2 * s + 1));
            assert!(r <= 1e-12, "{r}");
        }
        assert_eq!(mixed_term_residual(&VectorField::zeros(&g), &random_field(&g, 1)), 0.0);
    }

    /// One full coupled step on random data: the ledger plus the numerical
    /// dissipation balances to rounding, and the inequality passes.
    #[test]
    fn full_step_balances() {
        let g = Grid::new(10, 1.0).unwrap();
        let params = MaterialParams::default();
        let reg = Regularization { epsilon: 5e-3, eta: 0.05, kappa_solid: 1e-2, gamma: 0.01 };
        let dt = 0.005;
        let body = RigidState::new(Shape::Sphere { radius: 0.2 }, [0.5; 3], &g).unwrap();
        let chi = indicator(&body, &g);
        let u0 = random_velocity(&g, 0.5, 1);
        let mut b0 = random_field(&g, 2).to_flat();
        let pb = Projector::new(&g, Layout::Magnetic);
        pb.project_in_place(&mut b0);
        let b0 = VectorField::from_flat(&g, &b0).unwrap();
        let rho0 = g.sample(|x| 1.0 + 0.5 * x[0]);
        let pi = rigid_projection(&body_functionals(&rho0, &chi, &u0).unwrap(), &g);
        let (rho1, _) = solve_density_step(&rho0, &u0, reg.epsilon, dt, 1e-12, 1000).unwrap();
        let gf = random_field(&g, 3).scale(0.1);
        let jf = random_field(&g, 4).scale(0.1);
        let pu = Projector::new(&g, Layout::Velocity);
        let m = solve_momentum_step(
            &MomentumStepInputs {
                rho_new: &rho1,
                rho_prev: &rho0,
                u_prev: &u0,
                chi_new: &chi,
                pi_prev: &pi,
                b_prev: &b0,
                g: &gf,
                params,
                dt,
                eps: reg.epsilon,
                eta: reg.eta,
            },
            &pu,
            1e-12,
            2000,
        )
        .unwrap();
        let ind = solve_induction_step(
            &InductionStepInputs { b_prev: &b0, u_new: &m.u, chi_new: &chi, j: &jf, params, dt, eps: reg.epsilon, kappa_solid: reg.kappa_solid },
            &pb,
            1e-12,
            2000,
            50,
        )
        .unwrap();
        let l = compute_ledger(&LedgerInputs {
            rho_prev: &rho0,
            rho_new: &rho1,
            u_prev: &u0,
            u_new: &m.u,
            b_prev: &b0,
            b_new: &ind.b,
            chi_new: &chi,
            pi_prev: &pi,
            g: &gf,
            j: &jf,
            params,
            reg,
            dt,
        });
        let numerical = 0.5 * g.cell_volume()
            * (0..g.len())
                .map(|c| {
                    let (a, b) = (m.u.at(c), u0.at(c));
                    rho0.values[c] * (0..3).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
            + magnetic_energy(&ind.b.sub(&b0), params.mu);
        let defect = l.lhs() + numerical - l.rhs();
        assert!(defect.abs() <= 1e-9 * l.total_prev(), "defect {defect}");
        assert!(assert_energy_inequality(&l).passed);
        assert!(l.dissipation() > 0.0);
    }

    #[test]
    fn csv_row_layout() {
        let l = EnergyLedger::initial(0.5, 0.25);
        let row = l.csv_row(0, 0.0);
        assert_eq!(row.split(',').count(), EnergyLedger::CSV_HEADER.split(',').count());
        assert!(row.starts_with("0,0.0000000000000000e0,5.0000000000000000e-1"));
    }
}
