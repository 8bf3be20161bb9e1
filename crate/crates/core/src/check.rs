//! The invariant suite behind `penalmhd check`, run on a small copy of a
//! configuration.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SimConfig;
use crate::density::{entropy_check, BOUND_SLACK};
use crate::driver::Simulation;
use crate::energy::mixed_term_residual;
use crate::error::Result;
use crate::grid::{self, Grid};
use crate::rigid::{self, RigidState, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// At most 12 cells per side and 10 steps.
pub fn shrink(cfg: &SimConfig) -> SimConfig {
    let mut c = cfg.clone();
    c.n = c.n.min(12);
    let steps = c.steps().min(10);
    c.end_time = steps as f64 * c.dt;
    if c.gamma_from_dt {
        c.reg.gamma = c.dt;
    }
    c.reg.gamma = c.reg.gamma.min(0.5 * c.end_time);
    c
}

fn stepping_checks(cfg: &SimConfig, out: &mut Vec<CheckResult>) -> Result<()> {
    let sim = Simulation::new(cfg.clone())?;
    let mut s = sim.initial_state()?;
    let tol = 10.0 * cfg.solver.tol;
    let (mut bounds, mut entropy, mut divs, mut energy, mut clear, mut rigid_orth) = (true, true, true, true, true, true);
    let (mut worst_div, mut worst_orth) = (0.0_f64, 0.0_f64);
    let (lo, hi) = (s.rho.min(), s.rho.max());
    let mut mixed = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..cfg.steps() {
        let o = sim.step(&s)?;
        let n = &o.state;
        bounds &= n.rho.min() >= lo - BOUND_SLACK && n.rho.max() <= hi + BOUND_SLACK;
        for beta in [|z: f64| z * z, |z: f64| z * z.ln()] {
            let (after, before) = entropy_check(&n.rho, &s.rho, beta);
            entropy &= after <= before + 1e-10;
        }
        worst_div = worst_div.max(o.diagnostics.div_u).max(o.diagnostics.div_b);
        divs &= o.diagnostics.div_u <= tol && o.diagnostics.div_b <= tol;
        energy &= o.inequality.passed;
        mixed = mixed.max(mixed_term_residual(&n.u, &n.b));
        if let Some(b) = &n.body {
            clear &= rigid::distance_to_boundary(b, sim.grid()) >= 0.0;
            let f = rigid::body_functionals(&n.rho, &n.chi, &n.u)?;
            let pi = rigid::rigid_projection(&f, sim.grid());
            let psi = rigid::rigid_field(
                Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                Vector3::from(sim.grid().center_of(0)),
                sim.grid(),
            );
            let (mut lhs, mut scale) = (0.0, 0.0);
            for c in 0..sim.grid().len() {
                let wgt = n.rho.values[c] * n.chi.values[c];
                let (a, p, q) = (n.u.at(c), pi.at(c), psi.at(c));
                lhs += wgt * grid::dot3([a[0] - p[0], a[1] - p[1], a[2] - p[2]], q);
                scale += wgt * grid::norm(a) * grid::norm(q);
            }
            let rel = lhs.abs() / scale.max(f64::MIN_POSITIVE);
            worst_orth = worst_orth.max(if scale > 0.0 { rel } else { 0.0 });
            rigid_orth &= worst_orth <= 1e-10;
        }
        s = o.state;
    }
    out.push(result("density maximum principle", bounds, format!("range [{}, {}] kept", lo, hi)));
    out.push(result("entropy dissipation", entropy, "z^2 and z ln z non-increasing".into()));
    out.push(result("divergence constraints", divs, format!("worst {worst_div:.3e} vs {tol:.1e}")));
    out.push(result("energy inequality", energy, "ledger assertion every step".into()));
    out.push(result("mixed-term identity", mixed <= 1e-12, format!("worst {mixed:.3e}")));
    out.push(result("body clear of walls", clear, "distance >= 0 every step".into()));
    out.push(result("rigid projection orthogonality", rigid_orth, format!("worst {worst_orth:.3e}")));
    Ok(())
}

fn isometry_check() -> CheckResult {
    let g = Grid::new(8, 1.0).expect("valid grid");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut body = RigidState::new(Shape::Sphere { radius: 0.1 }, [0.5; 3], &g).expect("inside");
    let pts: Vec<Vector3<f64>> = (0..10).map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen())).collect();
    let local: Vec<Vector3<f64>> = pts.iter().map(|p| p - body.center).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let w = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        body = rigid::advance_isometry(&RigidState { velocity: v, angular_velocity: w, ..body }, 1e-3);
        worst = worst.max((body.rotation.transpose() * body.rotation - nalgebra::Matrix3::identity()).norm());
    }
    let moved: Vec<Vector3<f64>> = local.iter().map(|y| body.center + body.rotation * y).collect();
    let mut dist: f64 = 0.0;
    for i in 0..10 {
        for j in 0..i {
            let (a, b) = ((pts[i] - pts[j]).norm(), (moved[i] - moved[j]).norm());
            dist = dist.max((a - b).abs() / a);
        }
    }
    result("isometry preservation", worst <= 1e-12 && dist <= 1e-10, format!("orthogonality {worst:.2e}, distances {dist:.2e}"))
}

fn operator_order_check() -> CheckResult {
    let errs: Vec<f64> = [8usize, 16]
        .iter()
        .map(|&n| {
            let g = Grid::new(n, 1.0).expect("valid grid");
            let v = g.sample_vector(|x| [x[1].sin() * x[2].cos(), x[2].sin() * x[0].cos(), x[0].sin() * x[1].cos()]);
            let d = grid::div(&v);
            let c = grid::curl(&v);
            let ce = g.sample_vector(|x| {
                [-x[0].sin() * x[1].sin() - x[0].cos() * x[2].cos(), -x[1].sin() * x[2].sin() - x[1].cos() * x[0].cos(), -x[2].sin() * x[0].sin() - x[2].cos() * x[1].cos()]
            });
            d.max_abs().max(c.max_abs_diff(&ce))
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();
    result("operator accuracy", (order - 2.0).abs() <= 0.2 || errs[1] < 1e-13, format!("observed order {order:.3}"))
}

fn determinism_check(cfg: &SimConfig) -> Result<CheckResult> {
    let sim = Simulation::new(cfg.clone())?;
    let mut a = sim.initial_state()?;
    let mut b = sim.initial_state()?;
    let mut same = true;
    for _ in 0..cfg.steps().min(3) {
        let (oa, ob) = (sim.step(&a)?, sim.step(&b)?);
        same &= oa.ledger.csv_row(1, 0.0) == ob.ledger.csv_row(1, 0.0) && oa.state == ob.state;
        a = oa.state;
        b = ob.state;
    }
    Ok(result("determinism", same, "two replays compared bitwise".into()))
}

/// Runs the suite; a failing stage is recorded as a failed check.
pub fn run_checks(cfg: &SimConfig) -> Vec<CheckResult> {
    let small = shrink(cfg);
    let mut out = Vec::new();
    match Simulation::new(small.clone()).and_then(|s| s.initial_state()) {
        Ok(_) => out.push(result("initial state", true, format!("n = {}, {} steps", small.n, small.steps()))),
        Err(e) => {
            out.push(result("initial state", false, e.to_string()));
            return out;
        }
    }
    if let Err(e) = stepping_checks(&small, &mut out) {
        out.push(result("time stepping", false, e.to_string()));
    }
    out.push(isometry_check());
    out.push(operator_order_check());
    match determinism_check(&small) {
        Ok(r) => out.push(r),
        Err(e) => out.push(result("determinism", false, e.to_string())),
    }
    out
}
