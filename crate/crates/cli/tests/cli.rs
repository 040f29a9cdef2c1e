use proptest::prelude::*;
use tdbem::assembly::UnknownKind;
use tdbem::model::{BoundaryGeometry, Refinement};
use tdbem_cli::config::*;
use tdbem_cli::experiment::*;
use tdbem_cli::presets::{load_preset, PRESETS};

const MINIMAL: &str = "\
problem = dirichlet_v
geometry = segment
material.lambda = 2
material.mu = 1
datum = x4_profile
level.0.mesh = uniform:4
level.0.dt = 0.1
";

#[test]
fn every_preset_parses() {
    for (name, _) in PRESETS {
        let c = load_preset(name).unwrap().unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(&c.name, name);
        assert!(!c.levels.is_empty());
    }
    assert!(load_preset("missing").is_none());
}

#[test]
fn ladders_are_encoded_exactly() {
    let c = load_preset("example1_h_beta3").unwrap().unwrap();
    let dts: Vec<f64> = c.levels.iter().map(|l| l.dt).collect();
    assert_eq!(dts, [1.25e-2, 6.25e-3, 3.125e-3, 1.5625e-3]);
    let halves: Vec<usize> = c
        .levels
        .iter()
        .map(|l| match l.mesh.refinement {
            Refinement::Algebraic { beta, n_half } if beta == 3.0 => n_half,
            _ => panic!("expected a 3-graded mesh"),
        })
        .collect();
    assert_eq!(halves, [5, 10, 20, 40]);

    let p = load_preset("example1_p").unwrap().unwrap();
    assert_eq!(p.levels.iter().map(|l| l.degree).collect::<Vec<_>>(), [1, 2, 3, 4, 5, 6, 7]);
    assert_eq!(p.levels[6].dt, 3.90625e-4);

    let hp = load_preset("example1_hp_sigma02").unwrap().unwrap();
    assert_eq!(hp.levels.len(), 8);
    assert_eq!(hp.levels[7].dt, 1.953125e-3);
    assert!(matches!(hp.benchmark, BenchmarkSpec::Value(v, _) if v == 3.7915e-2));

    let g2 = load_preset("example4_gamma2").unwrap().unwrap();
    assert_eq!(g2.levels[0].mesh.side_counts, Some(vec![75, 80, 80]));
    let BoundaryGeometry::Polygon { vertices } = &g2.geometry else { panic!() };
    let leg = ((vertices[2][0] - vertices[1][0]).powi(2) + (vertices[2][1] - vertices[1][1]).powi(2)).sqrt();
    assert!((leg - 1.0).abs() < 1e-12);

    let e5 = load_preset("example5_cp3").unwrap().unwrap();
    assert_eq!(e5.problem, UnknownKind::NeumannDisplacement);
    assert_eq!((e5.t_final, e5.levels[0].dt), (7.5, 1.25e-2));
    assert!((e5.material.c_p - 3.0).abs() < 1e-14);
}

#[test]
fn defaults_and_degree_rules() {
    let c = parse_config(MINIMAL).unwrap();
    assert_eq!(c.levels[0].degree, 0);
    assert_eq!(c.t_final, 1.0);
    assert_eq!(c.datum.temporal, TemporalKind::SmoothOnset);
    assert_eq!(c.benchmark, BenchmarkSpec::None);
    let w = parse_config(&MINIMAL.replace("dirichlet_v", "neumann_w")).unwrap();
    assert_eq!(w.levels[0].degree, 1);
}

#[test]
fn errors_carry_line_numbers() {
    let e = parse_config(&MINIMAL.replace("uniform:4", "hexagonal:4")).unwrap_err();
    assert_eq!(e.line, 6);
    let e = parse_config(&format!("{MINIMAL}level.2.mesh = uniform:3\nlevel.2.dt = 0.1\n")).unwrap_err();
    assert!(e.message.contains("level indices"));
    let e = parse_config(&MINIMAL.replace("level.0.dt = 0.1", "level.0.dt = 2")).unwrap_err();
    assert!(e.message.contains("outside"));
    let e = parse_config(&format!("{MINIMAL}T = 1\nT = 2\n")).unwrap_err();
    assert!(e.message.contains("duplicate"));
    assert!(parse_config(&MINIMAL.replace("problem = dirichlet_v\n", "")).is_err());
    assert!(parse_config(&MINIMAL.replace("material.mu = 1", "material.cs = 1")).is_err());
}

fn report(energies: &[(usize, f64)], benchmark: Option<f64>) -> ConvergenceReport {
    let mut r = ConvergenceReport::empty("synthetic");
    r.rows = energies
        .iter()
        .enumerate()
        .map(|(k, &(dof, e))| LevelRow {
            level: k,
            dof,
            dt: 0.1 / (1 << k) as f64,
            energy: e,
            squared_error: benchmark.map(|b| b - e),
        })
        .collect();
    r
}

#[test]
fn rate_of_an_exact_power_ladder() {
    let rows: Vec<(usize, f64)> = [10, 20, 40, 80].iter().map(|&d| (d, 1.0 - (d as f64).powi(-2))).collect();
    let fit = rate_table(&report(&rows, Some(1.0))).unwrap();
    assert!((fit.slope + 2.0).abs() < 1e-9);
    assert!(fit.reliable);
    assert!(fit.local.iter().all(|s| (s + 2.0).abs() < 1e-9));
}

#[test]
fn non_monotone_errors_are_flagged() {
    let fit = rate_table(&report(&[(10, 0.5), (20, 0.8), (40, 0.7)], Some(1.0))).unwrap();
    assert!(!fit.reliable);
    assert!(rate_table(&report(&[(10, 0.5), (20, 0.8)], Some(1.0))).is_none());
    assert!(rate_table(&report(&[(10, 0.5), (20, 0.8), (40, 0.9)], None)).is_none());
}

fn output(r: ConvergenceReport) -> ExperimentOutput {
    ExperimentOutput {
        report: r,
        history: vec![(0.0, 0.0, 0.0), (0.5, -0.25, -0.125)],
        tip_sweep: vec![(0.01, 3.0, 2.0, 1.0)],
        traces: Vec::new(),
        finest: None,
    }
}

#[test]
fn empty_report_writes_header_only_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ExperimentOutput {
        report: ConvergenceReport::empty("none"),
        history: Vec::new(),
        tip_sweep: Vec::new(),
        traces: Vec::new(),
        finest: None,
    };
    for (kind, header) in [
        (PlotKind::EnergyLadder, "level,dof,dt,energy,sq_error"),
        (PlotKind::TipSweep, "r,component1,component2,t"),
        (PlotKind::History, "t,component1,component2"),
    ] {
        let path = emit_plot_data(&out, kind, dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), format!("{header}\n"));
    }
}

#[test]
fn unwritable_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let out = output(ConvergenceReport::empty("x"));
    assert!(emit_plot_data(&out, PlotKind::History, &file.join("sub")).is_err());
}

#[test]
fn aitken_limit_of_a_geometric_ladder_is_exact() {
    let r = report(&[(10, 1.0 - 0.5), (20, 1.0 - 0.25), (40, 1.0 - 0.125)], None);
    assert!((aitken(&r.rows).unwrap() - 1.0).abs() < 1e-15);
    assert!(aitken(&r.rows[..2]).is_none());
    let flat = report(&[(10, 0.5), (20, 0.5), (40, 0.5)], None);
    assert!(aitken(&flat.rows).is_none());
}

#[test]
fn small_ladder_runs_end_to_end() {
    let text = format!(
        "{MINIMAL}level.1.mesh = uniform:8\nlevel.1.dt = 0.05\nlevel.2.mesh = uniform:16\nlevel.2.dt = 0.025\n\
         benchmark = extrapolate\noutput.tip_vertex = -0.5, 0\noutput.tip_times = 0.5, 1\noutput.tip_radius = 0.2\n\
         output.trace_times = 1\noutput.trace_samples = 11\n"
    );
    let cfg = parse_config(&text).unwrap();
    let mut seen = Vec::new();
    let out = run_experiment(&cfg, |row| seen.push(row.level)).unwrap();
    assert_eq!(seen, [0, 1, 2]);
    assert!(out.report.monotone);
    let b = out.report.benchmark.as_ref().unwrap();
    assert!(b.provenance.contains("Aitken"));
    assert!(out.report.rows.iter().all(|r| r.squared_error.unwrap() > 0.0));
    assert_eq!(out.traces.len(), 11);
    assert!(!out.tip_sweep.is_empty());
    assert!(out.tip_sweep.iter().all(|s| s.0 < 0.2));

    let dir = tempfile::tempdir().unwrap();
    let path = emit_plot_data(&out, PlotKind::EnergyLadder, dir.path()).unwrap();
    let back = read_energy_ladder(&path).unwrap();
    let again = emit_plot_data(&ExperimentOutput { report: ConvergenceReport { rows: back.clone(), ..out.report.clone() }, ..out.clone() }, PlotKind::EnergyLadder, &dir.path().join("again")).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), std::fs::read_to_string(again).unwrap());
    assert!(format_report(&out.report).contains("benchmark"));
}

#[test]
fn failures_keep_finished_levels() {
    // the second level's mesh has a zero-length request and fails after level 0 finished
    let text = format!("{MINIMAL}level.1.mesh = algebraic:0.5:2\nlevel.1.dt = 0.05\n");
    let cfg = parse_config(&text).unwrap();
    let err = run_experiment(&cfg, |_| {}).unwrap_err();
    assert_eq!(err.level, 1);
    assert_eq!(err.partial.rows.len(), 1);
}

proptest! {
    #[test]
    fn energy_ladder_csv_round_trips(rows in prop::collection::vec((1usize..500, 1e-6f64..1.0, -1.0f64..1.0, prop::option::of(-1.0f64..1.0)), 0..8)) {
        let mut r = ConvergenceReport::empty("p");
        r.rows = rows.iter().enumerate().map(|(k, &(dof, dt, e, s))| LevelRow {
            level: k, dof, dt, energy: e, squared_error: s,
        }).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = emit_plot_data(&output(r.clone()), PlotKind::EnergyLadder, dir.path()).unwrap();
        let back = read_energy_ladder(&path).unwrap();
        prop_assert_eq!(back.len(), r.rows.len());
        // the fixed 11-significant-digit format reproduces the text exactly
        let mut r2 = r.clone();
        r2.rows = back;
        let p2 = emit_plot_data(&output(r2), PlotKind::EnergyLadder, &dir.path().join("b")).unwrap();
        prop_assert_eq!(std::fs::read_to_string(&path).unwrap(), std::fs::read_to_string(p2).unwrap());
    }

    #[test]
    fn slope_of_synthetic_ladders(rate in 0.5f64..4.0, c in 0.1f64..10.0) {
        let rows: Vec<(usize, f64)> = [8, 16, 32, 64, 128].iter().map(|&d| (d, -c * (d as f64).powf(-rate))).collect();
        let fit = rate_table(&report(&rows, Some(0.0))).unwrap();
        prop_assert!((fit.slope + rate).abs() < 1e-9);
    }

    #[test]
    fn numbers_parse_with_fraction_and_pi(a in 1u32..100, b in 1u32..100) {
        let text = MINIMAL.replace("geometry = segment", &format!("geometry = isosceles:1:{a}/{b} pi"));
        let angle = a as f64 / b as f64 * std::f64::consts::PI;
        match parse_config(&text) {
            Ok(c) => {
                let BoundaryGeometry::Polygon { vertices } = &c.geometry else { panic!() };
                let got = vertices[2][1].atan2(vertices[2][0] - vertices[0][0]);
                prop_assert!((got - angle).abs() < 1e-12);
            }
            Err(e) => prop_assert!(angle >= std::f64::consts::FRAC_PI_2, "{}", e),
        }
    }
}
