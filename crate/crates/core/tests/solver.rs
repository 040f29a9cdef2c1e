use nalgebra::DVector;
use proptest::prelude::*;
use std::sync::Arc;
use tdbem::assembly::*;
use tdbem::basis::{build_space, BasisSpace, Continuity, DegreeSpec};
use tdbem::kernels::{fundamental_solution, kernel_v_sym, KernelArgs};
use tdbem::model::*;
use tdbem::solver::*;

fn mat() -> Material {
    Material::new(2.0, 1.0, 1.0).unwrap()
}

fn crack_space(spec: MeshSpec, p: usize, cont: Continuity) -> BasisSpace {
    let geo = BoundaryGeometry::segment([-0.5, 0.0], [0.5, 0.0]).unwrap();
    let mesh = Arc::new(make_mesh(&geo, &spec).unwrap());
    build_space(mesh, &DegreeSpec::Uniform(p), cont).unwrap()
}

struct Run {
    sys: ToeplitzBlockSystem,
    rhs: RhsHistory,
    sol: TimeHistorySolution,
}

fn dirichlet_run(n: usize, dt: f64, t_final: f64) -> Run {
    let space = crack_space(MeshSpec::uniform(n), 0, Continuity::Discontinuous);
    let tg = TimeGrid::from_dt(t_final, dt).unwrap();
    let sys = assemble_system(&space, &tg, &mat(), UnknownKind::DirichletTraction, 1e-10).unwrap();
    let datum = BoundaryDatum::both(1.0, SpatialProfile::Monomial(4), TemporalProfile::SmoothOnset);
    let rhs = assemble_rhs_dirichlet(&space, &tg, &datum);
    let sol = mot_solve(&sys, &rhs).unwrap();
    Run { sys, rhs, sol }
}

#[test]
fn marching_residual_is_at_round_off() {
    let r = dirichlet_run(10, 0.0125, 1.0);
    assert!(residual(&r.sys, &r.rhs, &r.sol).unwrap() <= 1e-10);
    assert!(r.sol.condition < 10.0);
}

#[test]
fn energy_is_the_quadratic_form_of_the_full_system() {
    let r = dirichlet_run(6, 0.05, 0.5);
    let steps = r.sys.blocks.len();
    let mut q = 0.0;
    for row in 0..steps {
        for col in 0..=row {
            q += r.sol.coefficients[row].dot(&(&r.sys.blocks[row - col] * &r.sol.coefficients[col]));
        }
    }
    let e = energy(&r.sys, &r.sol).unwrap();
    assert!((e - q).abs() <= 1e-13 * q.abs());
    // Galerkin: the energy also equals alpha . g
    let ag: f64 = r.sol.coefficients.iter().zip(&r.rhs.vectors).map(|(a, g)| a.dot(g)).sum();
    assert!((e - ag).abs() <= 1e-10 * e);
}

#[test]
fn zero_data_give_zero_solution() {
    let space = crack_space(MeshSpec::uniform(6), 1, Continuity::ContinuousVanishingAtTips);
    let tg = TimeGrid::from_dt(0.3, 0.05).unwrap();
    let sys = assemble_system(&space, &tg, &mat(), UnknownKind::NeumannDisplacement, 1e-10).unwrap();
    let rhs = assemble_rhs_neumann(&space, &tg, &BoundaryDatum::zero());
    let sol = mot_solve(&sys, &rhs).unwrap();
    assert!(sol.coefficients.iter().all(|c| c.iter().all(|&x| x == 0.0)));
    assert_eq!(energy(&sys, &sol).unwrap(), 0.0);
}

#[test]
fn mismatched_right_hand_side_is_rejected() {
    let r = dirichlet_run(4, 0.1, 0.3);
    let mut bad = r.rhs.clone();
    bad.vectors.pop();
    assert!(matches!(mot_solve(&r.sys, &bad), Err(tdbem::Error::Dimension(_))));
    bad = r.rhs.clone();
    bad.vectors[0] = DVector::zeros(3);
    assert!(matches!(mot_solve(&r.sys, &bad), Err(tdbem::Error::Dimension(_))));
}

#[test]
fn boundary_evaluation_by_arc_and_by_point_agree() {
    let r = dirichlet_run(8, 0.05, 0.5);
    // off the nodes, where piecewise constants have two one-sided values
    for k in 0..20 {
        let s = (k as f64 + 0.37) / 20.0;
        let x = s - 0.5;
        let a = eval_on_boundary(&r.sol, s, 0.37).unwrap();
        let b = eval_at_point(&r.sol, [x, 0.0], 0.37).unwrap();
        assert_eq!(a, b);
    }
    assert!(eval_at_point(&r.sol, [0.0, 0.2], 0.3).is_err());
    assert!(eval_on_boundary(&r.sol, 1.5, 0.3).is_err());
}

#[test]
fn elastostatic_profile_matches_closed_form() {
    for (cp, k) in [(2.0, -4.0 / 3.0), (3.0, -9.0 / 8.0)] {
        let m = Material::from_wave_speeds(cp, 1.0, 1.0).unwrap();
        let v = elastostatic_reference(0.0, [1.0, 2.0], &m).unwrap();
        assert!((v[0] - 0.5 * k).abs() < 1e-15);
        assert!((v[1] - k).abs() < 1e-15);
        let v = elastostatic_reference(0.3, [1.0, 1.0], &m).unwrap();
        assert!((v[0] - k * 0.4).abs() < 1e-15);
    }
    assert!(elastostatic_reference(0.6, [1.0, 1.0], &mat()).is_err());
}

#[test]
fn neumann_solution_starts_moving_at_the_expected_rates() {
    // before any wave returns from the tips the midpoint jump grows like 2t/(rho c):
    // shear speed for the tangential component, pressure speed for the normal one
    let m = mat();
    let space = crack_space(MeshSpec::uniform(20), 1, Continuity::ContinuousVanishingAtTips);
    let tg = TimeGrid::from_dt(0.2, 0.0125).unwrap();
    let sys = assemble_system(&space, &tg, &m, UnknownKind::NeumannDisplacement, 1e-10).unwrap();
    let rhs = assemble_rhs_neumann(&space, &tg, &BoundaryDatum::both(1.0, SpatialProfile::Constant, TemporalProfile::Step));
    let sol = mot_solve(&sys, &rhs).unwrap();
    let v = eval_at_point(&sol, [0.0, 0.0], 0.15).unwrap();
    let want = [-2.0 * 0.15 / (m.rho * m.c_s), -2.0 * 0.15 / (m.rho * m.c_p)];
    for i in 0..2 {
        assert!((v[i] - want[i]).abs() < 0.02 * want[i].abs(), "component {i}: {} vs {}", v[i], want[i]);
    }
}

#[test]
fn single_layer_field_is_causal() {
    let r = dirichlet_run(8, 0.05, 1.0);
    let m = mat();
    // distance 0.3 from the crack: nothing arrives before t = 0.3 / c_p
    let p = [0.0, 0.3];
    for t in [0.0, 0.05, 0.1, 0.149] {
        let v = eval_single_layer_potential(&r.sol, p, t, &m, 1e-10).unwrap();
        assert_eq!(v, [0.0, 0.0], "t = {t}");
    }
    let v = eval_single_layer_potential(&r.sol, p, 0.6, &m, 1e-10).unwrap();
    assert!(v[0].abs() + v[1].abs() > 0.0);
    assert!(eval_single_layer_potential(&r.sol, [0.1, 0.0], 0.5, &m, 1e-10).is_err());
}

#[test]
fn integrated_kernel_differentiates_to_the_fundamental_solution() {
    let m = mat();
    let pref = 1.0 / (2.0 * std::f64::consts::PI * m.rho);
    for (r, d) in [([0.3, 0.1], 0.4), ([0.2, -0.5], 1.5), ([-0.1, 0.05], 0.2), ([0.4, 0.4], 0.4)] {
        let h = 1e-5;
        let a = kernel_v_sym(r, d + h, &m);
        let b = kernel_v_sym(r, d - h, &m);
        for (q, (i, j)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            let fd = pref * (a[q] - b[q]) / (2.0 * h);
            let g = fundamental_solution(i, j, &KernelArgs::new(r, d, &m)).unwrap();
            assert!((fd - g).abs() < 1e-6 * g.abs().max(1.0), "r {r:?} delta {d} ({i},{j}): {fd} vs {g}");
        }
    }
}

#[test]
fn csv_writers_emit_headers_and_rows() {
    let r = dirichlet_run(4, 0.1, 0.3);
    let dir = std::env::temp_dir().join(format!("tdbem-solver-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    write_coefficients_csv(&r.sol, &dir.join("c.csv")).unwrap();
    write_boundary_trace_csv(&r.sol, &[0.1, 0.5], &[0.2], &dir.join("t.csv")).unwrap();
    write_energy_ladder_csv(&[(0, 4.0, 0.1, None), (1, 8.0, 0.05, Some(1e-3))], &dir.join("e.csv")).unwrap();
    let c = std::fs::read_to_string(dir.join("c.csv")).unwrap();
    assert_eq!(c.lines().count(), 1 + r.sol.coefficients.len());
    let t = std::fs::read_to_string(dir.join("t.csv")).unwrap();
    assert_eq!(t.lines().count(), 3);
    let e = std::fs::read_to_string(dir.join("e.csv")).unwrap();
    assert_eq!(e.lines().count(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn marching_is_linear_in_the_data(a in -2.0f64..2.0, seed in 0u64..1000) {
        let space = crack_space(MeshSpec::algebraic(2.0, 3), 0, Continuity::Discontinuous);
        let tg = TimeGrid::from_dt(0.3, 0.05).unwrap();
        let sys = assemble_system(&space, &tg, &mat(), UnknownKind::DirichletTraction, 1e-10).unwrap();
        let n = sys.size();
        let g = RhsHistory {
            vectors: (0..tg.n_steps)
                .map(|k| DVector::from_fn(n, |i, _| (((seed + 31 * k as u64 + 7 * i as u64) % 97) as f64 / 48.5) - 1.0))
                .collect(),
        };
        let scaled = RhsHistory { vectors: g.vectors.iter().map(|v| v * a).collect() };
        let x = mot_solve(&sys, &g).unwrap();
        let y = mot_solve(&sys, &scaled).unwrap();
        for (u, v) in x.coefficients.iter().zip(&y.coefficients) {
            prop_assert!((u * a - v).norm() <= 1e-12 * (1.0 + u.norm()));
        }
        prop_assert!(residual(&sys, &g, &x).unwrap() <= 1e-10);
    }
}
