use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::sync::Arc;
use tdbem::assembly::*;
use tdbem::basis::{build_space, BasisSpace, Continuity, DegreeSpec};
use tdbem::model::*;
use tdbem::solver::mot_solve;

fn mat() -> Material {
    Material::new(2.0, 1.0, 1.0).unwrap()
}

fn crack_space(n: usize, p: usize, cont: Continuity) -> BasisSpace {
    let geo = BoundaryGeometry::segment([-0.5, 0.0], [0.5, 0.0]).unwrap();
    let mesh = Arc::new(make_mesh(&geo, &MeshSpec::uniform(n)).unwrap());
    build_space(mesh, &DegreeSpec::Uniform(p), cont).unwrap()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Full lower block-triangular space-time matrix.
fn full_matrix(sys: &ToeplitzBlockSystem) -> DMatrix<f64> {
    let n = sys.size();
    let steps = sys.blocks.len();
    let mut e = DMatrix::zeros(n * steps, n * steps);
    for row in 0..steps {
        for col in 0..=row {
            e.view_mut((row * n, col * n), (n, n)).copy_from(&sys.blocks[row - col]);
        }
    }
    e
}

#[test]
fn system_blocks_equal_single_lag_blocks() {
    let space = crack_space(6, 0, Continuity::Discontinuous);
    let tg = TimeGrid::from_dt(0.3, 0.05).unwrap();
    let m = mat();
    let sys = assemble_system(&space, &tg, &m, UnknownKind::DirichletTraction, 1e-10).unwrap();
    assert_eq!(sys.blocks.len(), tg.n_steps);
    for lag in 0..tg.n_steps {
        let b = assemble_block_v(&space, &tg, &m, lag, 1e-10).unwrap();
        let d = max_abs(&(&b - &sys.blocks[lag]));
        assert!(d <= 1e-13 * max_abs(&b).max(1.0), "lag {lag}: {d:e}");
    }
}

#[test]
fn blocks_are_symmetric_with_equal_off_diagonal_components() {
    let m = mat();
    let tg = TimeGrid::from_dt(0.2, 0.05).unwrap();
    let v = crack_space(5, 1, Continuity::Continuous);
    let w = crack_space(5, 1, Continuity::ContinuousVanishingAtTips);
    for (space, kind) in [(&v, UnknownKind::DirichletTraction), (&w, UnknownKind::NeumannDisplacement)] {
        let sys = assemble_system(space, &tg, &m, kind, 1e-10).unwrap();
        let mm = space.dof_count;
        for b in &sys.blocks {
            let scale = max_abs(b).max(1e-300);
            assert!(max_abs(&(b - b.transpose())) <= 1e-12 * scale);
            let e12 = b.view((0, mm), (mm, mm)).into_owned();
            let e21 = b.view((mm, 0), (mm, mm)).into_owned();
            assert!(max_abs(&(e12 - e21.transpose())) <= 1e-12 * scale);
        }
    }
}

#[test]
fn entries_vanish_before_the_pressure_front_arrives() {
    // element length 0.1; lag 0 only reaches c_p * dt = 0.025
    let space = crack_space(10, 0, Continuity::Discontinuous);
    let tg = TimeGrid::from_dt(0.05, 0.0125).unwrap();
    let b0 = assemble_block_v(&space, &tg, &mat(), 0, 1e-10).unwrap();
    let mm = space.dof_count;
    for i in 0..2 {
        for j in 0..2 {
            for g in 0..mm {
                for h in 0..mm {
                    if g.abs_diff(h) >= 2 {
                        assert_eq!(b0[(i * mm + g, j * mm + h)], 0.0);
                    }
                }
            }
        }
    }
    assert!(b0[(0, 1)] != 0.0);
}

#[test]
fn later_data_do_not_change_earlier_steps() {
    let space = crack_space(6, 0, Continuity::Discontinuous);
    let tg = TimeGrid::from_dt(0.3, 0.025).unwrap();
    let sys = assemble_system(&space, &tg, &mat(), UnknownKind::DirichletTraction, 1e-10).unwrap();
    let datum = BoundaryDatum::both(1.0, SpatialProfile::Monomial(4), TemporalProfile::SmoothOnset);
    let rhs = assemble_rhs_dirichlet(&space, &tg, &datum);
    let a = mot_solve(&sys, &rhs).unwrap();
    let mut bumped = rhs.clone();
    bumped.vectors[7].add_scalar_mut(1.0);
    let b = mot_solve(&sys, &bumped).unwrap();
    for n in 0..7 {
        assert_eq!(a.coefficients[n], b.coefficients[n]);
    }
    assert!(a.coefficients[7] != b.coefficients[7]);
}

fn check_coercive(sys: &ToeplitzBlockSystem, seed: u64) {
    let e = full_matrix(sys);
    let n = e.nrows();
    let mut state = seed;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for _ in 0..100 {
        let x = DVector::from_fn(n, |_, _| next());
        let q = x.dot(&(&e * &x));
        assert!(q > 0.0, "x^T E x = {q:e}");
    }
}

#[test]
fn single_layer_form_is_coercive_on_random_vectors() {
    let space = crack_space(5, 0, Continuity::Discontinuous);
    let tg = TimeGrid::from_dt(0.4, 0.05).unwrap();
    let sys = assemble_system(&space, &tg, &mat(), UnknownKind::DirichletTraction, 1e-10).unwrap();
    check_coercive(&sys, 0x9e3779b97f4a7c15);
}

#[test]
fn hypersingular_form_is_coercive_on_random_vectors() {
    let space = crack_space(6, 1, Continuity::ContinuousVanishingAtTips);
    let tg = TimeGrid::from_dt(0.4, 0.05).unwrap();
    let sys = assemble_system(&space, &tg, &mat(), UnknownKind::NeumannDisplacement, 1e-10).unwrap();
    check_coercive(&sys, 0x2545f4914f6cdd1d);
}

#[test]
fn dirichlet_rhs_factors_into_time_increment_times_load() {
    let space = crack_space(8, 0, Continuity::Discontinuous);
    let tg = TimeGrid::from_dt(0.25, 0.025).unwrap();
    let datum = BoundaryDatum::component(1, 3.0, SpatialProfile::Monomial(4), TemporalProfile::SmoothOnset);
    let rhs = assemble_rhs_dirichlet(&space, &tg, &datum);
    let f = |t: f64| {
        if t <= 0.0 {
            0.0
        } else if t < 0.125 {
            (4.0 * std::f64::consts::PI * t).sin().powi(2)
        } else {
            1.0
        }
    };
    for (n, v) in rhs.vectors.iter().enumerate() {
        let df = f(tg.t(n + 1)) - f(tg.t(n));
        for e in 0..8 {
            let (a, b) = (-0.5 + e as f64 / 8.0, -0.5 + (e + 1) as f64 / 8.0);
            let load = (b.powi(5) - a.powi(5)) / 5.0;
            assert_eq!(v[e], 0.0);
            assert!((v[8 + e] - 3.0 * df * load).abs() < 1e-15, "step {n} element {e}");
        }
    }
}

#[test]
fn neumann_rhs_of_a_constant_datum_is_the_same_every_step() {
    let space = crack_space(8, 1, Continuity::ContinuousVanishingAtTips);
    let tg = TimeGrid::from_dt(0.5, 0.05).unwrap();
    let datum = BoundaryDatum::both(2.0, SpatialProfile::Constant, TemporalProfile::Step);
    let rhs = assemble_rhs_neumann(&space, &tg, &datum);
    // interior hat functions integrate to h = 1/8
    for v in &rhs.vectors {
        for x in v.iter() {
            assert!((x + 2.0 / 8.0).abs() < 1e-14);
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn slab_means_match_composite_simpson() {
    let profiles = [
        TemporalProfile::Step,
        TemporalProfile::SmoothOnset,
        TemporalProfile::Ramp { width: 0.07 },
        TemporalProfile::Custom(Arc::new(|t: f64| (3.0 * t).cos())),
    ];
    for f in &profiles {
        for (t0, t1) in [(0.0, 0.05), (0.05, 0.1), (0.1, 0.15), (0.2, 0.3)] {
            // split at the kinks so Simpson converges
            let mut cuts = vec![t0, t1];
            for k in [0.07, 0.125] {
                if k > t0 && k < t1 {
                    cuts.insert(1, k);
                }
            }
            let want: f64 = cuts.windows(2).map(|c| simpson(|t| f.value(t.max(f64::MIN_POSITIVE)), c[0], c[1], 2000)).sum::<f64>() / (t1 - t0);
            assert!((f.slab_mean(t0, t1) - want).abs() < 1e-11, "{f:?} on [{t0}, {t1}]");
        }
    }
}

#[test]
fn narrow_ramp_approaches_the_step() {
    let space = crack_space(4, 1, Continuity::ContinuousVanishingAtTips);
    let tg = TimeGrid::from_dt(0.2, 0.05).unwrap();
    let step = assemble_rhs_neumann(&space, &tg, &BoundaryDatum::both(1.0, SpatialProfile::Constant, TemporalProfile::Step));
    let mut prev = f64::INFINITY;
    for width in [0.05, 0.01, 0.001] {
        let datum = BoundaryDatum::both(1.0, SpatialProfile::Constant, TemporalProfile::Ramp { width });
        let ramp = assemble_rhs_neumann(&space, &tg, &datum);
        let gap: f64 = ramp.vectors.iter().zip(&step.vectors).map(|(a, b)| (a - b).norm()).sum();
        assert!(gap < prev);
        prev = gap;
        // only the first slab feels a ramp narrower than dt
        for n in 1..tg.n_steps {
            assert!((&ramp.vectors[n] - &step.vectors[n]).norm() < 1e-15);
        }
    }
    // first-slab gap is width / (2 dt) of the step load
    assert!(prev < 0.011 * step.vectors[0].norm());
}

#[test]
fn block_cache_round_trips_and_rejects_other_inputs() {
    let space = crack_space(4, 0, Continuity::Discontinuous);
    let tg = TimeGrid::from_dt(0.2, 0.05).unwrap();
    let m = mat();
    let kind = UnknownKind::DirichletTraction;
    let sys = assemble_system(&space, &tg, &m, kind, 1e-10).unwrap();
    let dir = std::env::temp_dir().join(format!("tdbem-cache-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("blocks.bin");
    let key = CacheKey::of(&space, &tg, &m, kind, 1e-10);
    write_block_cache(&sys, &key, &path).unwrap();
    let back = read_block_cache(&path, &key, &space, &tg, &m).unwrap().unwrap();
    assert_eq!(back.blocks, sys.blocks);
    let other = CacheKey::of(&space, &tg, &m, kind, 1e-8);
    assert!(read_block_cache(&path, &other, &space, &tg, &m).unwrap().is_none());
    assert!(read_block_cache(&dir.join("missing.bin"), &key, &space, &tg, &m).unwrap().is_none());
    std::fs::remove_dir_all(&dir).unwrap();
}

fn rigid_space(angle: f64, shift: [f64; 2]) -> BasisSpace {
    let (c, s) = (angle.cos(), angle.sin());
    let map = |p: [f64; 2]| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]];
    let geo = BoundaryGeometry::segment(map([-0.5, 0.0]), map([0.5, 0.0])).unwrap();
    let mesh = Arc::new(make_mesh(&geo, &MeshSpec::uniform(4)).unwrap());
    build_space(mesh, &DegreeSpec::Uniform(0), Continuity::Discontinuous).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn translations_leave_blocks_unchanged(dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let tg = TimeGrid::from_dt(0.15, 0.05).unwrap();
        let a = assemble_system(&rigid_space(0.0, [0.0, 0.0]), &tg, &mat(), UnknownKind::DirichletTraction, 1e-10).unwrap();
        let b = assemble_system(&rigid_space(0.0, [dx, dy]), &tg, &mat(), UnknownKind::DirichletTraction, 1e-10).unwrap();
        for (x, y) in a.blocks.iter().zip(&b.blocks) {
            prop_assert!(max_abs(&(x - y)) <= 1e-9 * max_abs(x));
        }
    }

    #[test]
    fn rotations_preserve_block_invariants(angle in 0.0f64..std::f64::consts::TAU) {
        // the trace of each component block pair is rotation invariant
        let tg = TimeGrid::from_dt(0.1, 0.05).unwrap();
        let a = assemble_system(&rigid_space(0.0, [0.0, 0.0]), &tg, &mat(), UnknownKind::DirichletTraction, 1e-10).unwrap();
        let b = assemble_system(&rigid_space(angle, [0.0, 0.0]), &tg, &mat(), UnknownKind::DirichletTraction, 1e-10).unwrap();
        for (x, y) in a.blocks.iter().zip(&b.blocks) {
            let m = x.nrows() / 2;
            let tr = |z: &DMatrix<f64>| z.view((0, 0), (m, m)).into_owned() + z.view((m, m), (m, m)).into_owned();
            prop_assert!(max_abs(&(tr(x) - tr(y))) <= 1e-9 * max_abs(x));
        }
    }

    #[test]
    fn dirichlet_rhs_is_linear_in_the_datum(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let space = crack_space(5, 1, Continuity::Continuous);
        let tg = TimeGrid::from_dt(0.2, 0.05).unwrap();
        let d1 = BoundaryDatum::both(1.0, SpatialProfile::Monomial(4), TemporalProfile::SmoothOnset);
        let d2 = BoundaryDatum::both(1.0, SpatialProfile::Monomial(1), TemporalProfile::SmoothOnset);
        let mix = BoundaryDatum::Field(Arc::new(move |p: [f64; 2], t: f64| {
            let f = TemporalProfile::SmoothOnset.value(t);
            let v = f * (a * p[0].powi(4) + b * p[0]);
            [v, v]
        }));
        let r1 = assemble_rhs_dirichlet(&space, &tg, &d1);
        let r2 = assemble_rhs_dirichlet(&space, &tg, &d2);
        let rm = assemble_rhs_dirichlet(&space, &tg, &mix);
        for n in 0..tg.n_steps {
            let want = &r1.vectors[n] * a + &r2.vectors[n] * b;
            prop_assert!((&rm.vectors[n] - want).norm() < 1e-13);
        }
    }
}
