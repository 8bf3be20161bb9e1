//! Structural invariants checked on random inputs.

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use penalmhd::config::SimConfig;
use penalmhd::density::solve_density_step;
use penalmhd::energy::mixed_term_residual;
use penalmhd::grid::{integrate, Grid, ScalarField, VectorField};
use penalmhd::mimetic::{self, Layout};
use penalmhd::projection::Projector;
use penalmhd::rigid::{self, RigidState, Shape};
use penalmhd::vtk;

const N: usize = 8;

fn grid() -> Grid {
    Grid::new(N, 1.0).unwrap()
}

fn values(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, len)
}

fn vec3(a: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-a..a, -a..a, -a..a).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    inner(a, a).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn div_of_curl_vanishes(v in values(3 * N * N * N, -1.0, 1.0)) {
        let g = grid();
        let d = mimetic::div(&g, &mimetic::curl(&g, &v));
        prop_assert!(d.iter().all(|x| x.abs() < 1e-11));
    }

    #[test]
    fn curl_is_symmetric_and_div_grad_adjoint(
        a in values(3 * N * N * N, -1.0, 1.0),
        b in values(3 * N * N * N, -1.0, 1.0),
        q in values(N * N * N, -1.0, 1.0),
    ) {
        let g = grid();
        let lhs = inner(&mimetic::curl(&g, &a), &b);
        let rhs = inner(&a, &mimetic::curl(&g, &b));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        let dq = inner(&mimetic::div(&g, &a), &q);
        let gq = inner(&a, &mimetic::grad(&g, &q));
        prop_assert!((dq + gq).abs() <= 1e-10 * (1.0 + dq.abs()));
    }

    #[test]
    fn projection_is_an_orthogonal_idempotent(
        v in values(3 * N * N * N, -1.0, 1.0),
        w in values(3 * N * N * N, -1.0, 1.0),
        magnetic in any::<bool>(),
    ) {
        let g = grid();
        let proj = Projector::new(&g, if magnetic { Layout::Magnetic } else { Layout::Velocity });
        let mut pv = v.clone();
        proj.project_in_place(&mut pv);
        prop_assert!(proj.max_div(&pv) <= 1e-10);
        let mut ppv = pv.clone();
        proj.project_in_place(&mut ppv);
        let drift = pv.iter().zip(&ppv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(drift <= 1e-12);
        let mut pw = w.clone();
        proj.project_in_place(&mut pw);
        let (a, b) = (inner(&pv, &w), inner(&v, &pw));
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + norm(&v) * norm(&w)));
    }

    #[test]
    fn isometry_keeps_distances(v in vec3(2.0), w in vec3(20.0), dt in 1e-4..1e-1f64, a in vec3(1.0), b in vec3(1.0)) {
        let g = grid();
        let body = RigidState::new(Shape::Sphere { radius: 0.1 }, [0.5; 3], &g).unwrap();
        let (ya, yb) = (body.to_body([a[0], a[1], a[2]]), body.to_body([b[0], b[1], b[2]]));
        let moved = rigid::advance_isometry(&RigidState { velocity: v, angular_velocity: w, ..body }, dt);
        let (pa, pb) = (moved.center + moved.rotation * ya, moved.center + moved.rotation * yb);
        prop_assert!(((pa - pb).norm() - (a - b).norm()).abs() <= 1e-12 * (1.0 + (a - b).norm()));
        prop_assert!((moved.rotation.transpose() * moved.rotation - Matrix3::identity()).norm() <= 1e-13);
        prop_assert!((moved.rotation.determinant() - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn rigid_projection_fixes_rigid_fields(
        rho in values(N * N * N, 1.0, 2.0),
        v in vec3(1.0),
        w in vec3(3.0),
        c in (0.4..0.6f64, 0.4..0.6f64, 0.4..0.6f64),
    ) {
        let g = grid();
        let rho = ScalarField::from_values(&g, rho).unwrap();
        let body = RigidState::new(Shape::Sphere { radius: 0.3 }, [c.0, c.1, c.2], &g).unwrap();
        let chi = rigid::indicator(&body, &g);
        let exact = rigid::rigid_field(v, w, body.center, &g);
        let f = rigid::body_functionals(&rho, &chi, &exact).unwrap();
        prop_assert!(rigid::rigid_projection(&f, &g).max_abs_diff(&exact) <= 1e-12);
        prop_assert!(f.inertia.cholesky().is_some());
    }

    #[test]
    fn density_step_keeps_bounds_and_mass(
        rho in values(N * N * N, 1.0, 2.0),
        v in values(3 * N * N * N, -1.0, 1.0),
        dt in 1e-4..1e-1f64,
    ) {
        let g = grid();
        let eps = 5e-3;
        let proj = Projector::new(&g, Layout::Velocity);
        let mut v = v;
        proj.project_in_place(&mut v);
        // Cell Péclet number below one.
        let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1e-300);
        let scale = 0.9 * 2.0 * eps / g.h() / peak;
        let u = VectorField::from_flat(&g, &v.iter().map(|x| x * scale).collect::<Vec<_>>()).unwrap();
        let rho = ScalarField::from_values(&g, rho).unwrap();
        let (next, _) = solve_density_step(&rho, &u, eps, dt, 1e-12, 1000).unwrap();
        prop_assert!(next.min() >= rho.min() - 1e-10 && next.max() <= rho.max() + 1e-10);
        prop_assert!((integrate(&next) - integrate(&rho)).abs() <= 1e-10 * integrate(&rho));
    }

    #[test]
    fn mixed_terms_cancel(u in values(3 * N * N * N, -3.0, 3.0), b in values(3 * N * N * N, -3.0, 3.0)) {
        let g = grid();
        let (u, b) = (VectorField::from_flat(&g, &u).unwrap(), VectorField::from_flat(&g, &b).unwrap());
        prop_assert!(mixed_term_residual(&u, &b) <= 1e-12);
    }

    #[test]
    fn vtk_text_is_stable(rho in values(N * N * N, 1.0, 2.0), u in values(3 * N * N * N, -1.0, 1.0), step in 0usize..10_000) {
        let g = grid();
        let s = vtk::Snapshot {
            step,
            time: step as f64 * 1e-3,
            rho: ScalarField::from_values(&g, rho).unwrap(),
            chi: ScalarField::zeros(&g),
            u: VectorField::from_flat(&g, &u).unwrap(),
            b: VectorField::zeros(&g),
        };
        let text = vtk::to_string(&s);
        let back = vtk::parse(&text).unwrap();
        prop_assert_eq!(back.step, step);
        prop_assert!(back.rho.values.iter().zip(&s.rho.values).all(|(a, b)| (a - b).abs() <= 1e-8 * b.abs()));
        prop_assert!(back.u.max_abs_diff(&s.u) <= 1e-8);
        prop_assert_eq!(vtk::to_string(&back), text);
    }

    #[test]
    fn config_text_round_trips(n in 8usize..40, steps in 10usize..1000, eta in 1e-4..1.0f64, seed in any::<u64>()) {
        let mut cfg = SimConfig::default();
        cfg.set("grid.n", &n.to_string()).unwrap();
        cfg.set("time.dt", &(cfg.end_time / steps as f64).to_string()).unwrap();
        cfg.set("reg.eta", &eta.to_string()).unwrap();
        cfg.set("init.seed", &seed.to_string()).unwrap();
        let back = SimConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
