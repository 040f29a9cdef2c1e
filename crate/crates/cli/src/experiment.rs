//! Refinement ladders: build, assemble, march, measure energies and sample traces.

use crate::config::{BenchmarkSpec, ExperimentConfig};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use tdbem::assembly::{
    assemble_rhs_dirichlet, assemble_rhs_neumann, assemble_system, read_block_cache, write_block_cache, CacheKey,
    UnknownKind,
};
use tdbem::basis::{build_space, BasisSpace, Continuity, DegreeSpec};
use tdbem::geom;
use tdbem::model::{make_mesh, TimeGrid, Topology};
use tdbem::singular::fit_power_law;
use tdbem::solver::{energy, eval_at_point, eval_on_boundary, mot_solve, TimeHistorySolution};

#[derive(Debug, thiserror::Error)]
#[error("level {level}: {source}")]
pub struct ExperimentError {
    pub level: usize,
    #[source]
    pub source: tdbem::Error,
    /// Rows finished before the failure.
    pub partial: ConvergenceReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub level: usize,
    pub dof: usize,
    pub dt: f64,
    pub energy: f64,
    pub squared_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub value: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub name: String,
    pub rows: Vec<LevelRow>,
    pub benchmark: Option<Benchmark>,
    /// Energies nondecreasing along the ladder.
    pub monotone: bool,
}

impl ConvergenceReport {
    pub fn empty(name: &str) -> Self {
        ConvergenceReport {
            name: name.to_string(),
            rows: Vec::new(),
            benchmark: None,
            monotone: true,
        }
    }

    fn finish(&mut self, spec: &BenchmarkSpec) {
        self.monotone = self.rows.windows(2).all(|w| w[1].energy >= w[0].energy);
        self.benchmark = match spec {
            BenchmarkSpec::None => None,
            BenchmarkSpec::Value(v, note) => Some(Benchmark {
                value: *v,
                provenance: note.clone(),
            }),
            BenchmarkSpec::Extrapolate => aitken(&self.rows).map(|value| Benchmark {
                value,
                provenance: "Aitken extrapolation of the last three levels".into(),
            }),
        };
        if let Some(b) = &self.benchmark {
            for r in &mut self.rows {
                r.squared_error = Some(b.value - r.energy);
            }
        }
    }
}

/// Aitken Δ² limit of the last three energies.
pub fn aitken(rows: &[LevelRow]) -> Option<f64> {
    let n = rows.len();
    if n < 3 {
        return None;
    }
    let (e0, e1, e2) = (rows[n - 3].energy, rows[n - 2].energy, rows[n - 1].energy);
    let den = (e2 - e1) - (e1 - e0);
    (den != 0.0).then(|| e2 - (e2 - e1) * (e2 - e1) / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Least-squares slope of `log(squared error)` against `log(DOF)`.
    pub slope: f64,
    /// Slopes between consecutive levels.
    pub local: Vec<f64>,
    /// False when errors are not positive and strictly decreasing.
    pub reliable: bool,
}

pub fn rate_table(report: &ConvergenceReport) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter_map(|r| r.squared_error.map(|e| (r.dof as f64, e)))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let reliable = pts.iter().all(|p| p.1 > 0.0) && pts.windows(2).all(|w| w[1].1 < w[0].1);
    let positive: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1 > 0.0).collect();
    let slope = fit_power_law(&positive).map(|f| f.exponent).unwrap_or(f64::NAN);
    let local = pts
        .windows(2)
        .map(|w| (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln())
        .collect();
    Some(RateFit { slope, local, reliable })
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ConvergenceReport,
    /// `(t, component 1, component 2)` at the history point.
    pub history: Vec<(f64, f64, f64)>,
    /// `(r, component 1, component 2, t)` at element midpoints near the tip vertex.
    pub tip_sweep: Vec<(f64, f64, f64, f64)>,
    /// `(x, y, t, component 1, component 2)` along the boundary.
    pub traces: Vec<(f64, f64, f64, f64, f64)>,
    /// Solution of the finest level.
    pub finest: Option<TimeHistorySolution>,
}

fn space_for(config: &ExperimentConfig, level: usize) -> tdbem::Result<BasisSpace> {
    let l = &config.levels[level];
    let mesh = Arc::new(make_mesh(&config.geometry, &l.mesh)?);
    let continuity = match (config.problem, l.degree) {
        (UnknownKind::NeumannDisplacement, _) => {
            if mesh.topology == Topology::Open {
                Continuity::ContinuousVanishingAtTips
            } else {
                Continuity::Continuous
            }
        }
        (_, 0) => Continuity::Discontinuous,
        _ => Continuity::Continuous,
    };
    build_space(mesh, &DegreeSpec::Uniform(l.degree), continuity)
}

/// Solves one ladder level and returns its degrees of freedom, energy and solution.
pub fn run_level(config: &ExperimentConfig, level: usize) -> tdbem::Result<(usize, f64, TimeHistorySolution)> {
    let l = &config.levels[level];
    let space = space_for(config, level)?;
    let time = TimeGrid::from_dt(config.t_final, l.dt)?;
    let key = CacheKey::of(&space, &time, &config.material, config.problem, config.tol);
    let cache_path = config.cache_dir.as_ref().map(|d| {
        PathBuf::from(d).join(format!(
            "{:016x}-{:016x}-{}.blk",
            key.mesh_hash,
            key.degree_hash,
            time.n_steps
        ))
    });
    let cached = match &cache_path {
        Some(p) => read_block_cache(p, &key, &space, &time, &config.material)?,
        None => None,
    };
    let system = match cached {
        Some(s) => s,
        None => {
            let s = assemble_system(&space, &time, &config.material, config.problem, config.tol)?;
            if let Some(p) = &cache_path {
                if let Some(dir) = p.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                write_block_cache(&s, &key, p)?;
            }
            s
        }
    };
    let datum = config.datum.build();
    let rhs = match config.problem {
        UnknownKind::DirichletTraction => assemble_rhs_dirichlet(&space, &time, &datum),
        UnknownKind::NeumannDisplacement => assemble_rhs_neumann(&space, &time, &datum),
    };
    let sol = mot_solve(&system, &rhs)?;
    let e = energy(&system, &sol)?;
    Ok((space.dof_count, e, sol))
}

/// Runs every level in order; `progress` sees each finished row.
pub fn run_experiment(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&LevelRow),
) -> Result<ExperimentOutput, ExperimentError> {
    let mut report = ConvergenceReport::empty(&config.name);
    let mut finest = None;
    for level in 0..config.levels.len() {
        match run_level(config, level) {
            Ok((dof, e, sol)) => {
                let row = LevelRow {
                    level,
                    dof,
                    dt: config.levels[level].dt,
                    energy: e,
                    squared_error: None,
                };
                progress(&row);
                report.rows.push(row);
                finest = Some(sol);
            }
            Err(source) => {
                report.finish(&config.benchmark);
                return Err(ExperimentError {
                    level,
                    source,
                    partial: report,
                });
            }
        }
    }
    report.finish(&config.benchmark);
    let sol = finest.as_ref().expect("at least one level");
    let wrap = |source: tdbem::Error, partial: &ConvergenceReport| ExperimentError {
        level: config.levels.len() - 1,
        source,
        partial: partial.clone(),
    };
    let history = sample_history(config, sol).map_err(|e| wrap(e, &report))?;
    let tip_sweep = sample_tip(config, sol).map_err(|e| wrap(e, &report))?;
    let traces = sample_traces(config, sol).map_err(|e| wrap(e, &report))?;
    Ok(ExperimentOutput {
        report,
        history,
        tip_sweep,
        traces,
        finest,
    })
}

fn sample_history(config: &ExperimentConfig, sol: &TimeHistorySolution) -> tdbem::Result<Vec<(f64, f64, f64)>> {
    let Some(p) = config.history_point else {
        return Ok(Vec::new());
    };
    let n = config.history_samples.max(1);
    (0..=n)
        .map(|k| {
            let t = config.t_final * k as f64 / n as f64;
            let v = eval_at_point(sol, p, t)?;
            Ok((t, v[0], v[1]))
        })
        .collect()
}

/// Values at the midpoints of elements within `tip_radius` of the tip vertex.
pub fn tip_samples(
    sol: &TimeHistorySolution,
    vertex: geom::Point,
    radius: f64,
    t: f64,
) -> tdbem::Result<Vec<(f64, f64, f64)>> {
    let mesh = &sol.space.mesh;
    let mut out = Vec::new();
    for e in 0..mesh.element_count() {
        let (a, b) = mesh.endpoints(e);
        let mid = geom::lerp(a, b, 0.5);
        let r = geom::norm(geom::sub(mid, vertex));
        if r < radius {
            let v = eval_at_point(sol, mid, t)?;
            out.push((r, v[0], v[1]));
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(out)
}

fn sample_tip(config: &ExperimentConfig, sol: &TimeHistorySolution) -> tdbem::Result<Vec<(f64, f64, f64, f64)>> {
    let Some(v) = config.tip_vertex else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for &t in &config.tip_times {
        for (r, a, b) in tip_samples(sol, v, config.tip_radius, t)? {
            out.push((r, a, b, t));
        }
    }
    Ok(out)
}

fn sample_traces(
    config: &ExperimentConfig,
    sol: &TimeHistorySolution,
) -> tdbem::Result<Vec<(f64, f64, f64, f64, f64)>> {
    let mesh = &sol.space.mesh;
    let total: f64 = (0..mesh.element_count()).map(|e| mesh.length(e)).sum();
    let n = config.trace_samples.max(2);
    let mut out = Vec::new();
    for &t in &config.trace_times {
        for k in 0..n {
            let s = total * k as f64 / (n - 1) as f64;
            let (e, u) = tdbem::solver::locate_arc(&sol.space, s)?;
            let (a, b) = mesh.endpoints(e);
            let p = geom::lerp(a, b, u);
            let v = eval_on_boundary(sol, s, t)?;
            out.push((p[0], p[1], t, v[0], v[1]));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    EnergyLadder,
    TipSweep,
    History,
    Traces,
}

impl PlotKind {
    pub fn file_name(self) -> &'static str {
        match self {
            PlotKind::EnergyLadder => "energy_ladder.csv",
            PlotKind::TipSweep => "tip_sweep.csv",
            PlotKind::History => "history.csv",
            PlotKind::Traces => "traces.csv",
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.10e}"))
}

/// Writes the CSV for `kind` into `dir` and returns its path.
pub fn emit_plot_data(output: &ExperimentOutput, kind: PlotKind, dir: &Path) -> std::io::Result<PathBuf> {
    let mut s = String::new();
    match kind {
        PlotKind::EnergyLadder => {
            s.push_str("level,dof,dt,energy,sq_error\n");
            for r in &output.report.rows {
                let _ = writeln!(s, "{},{},{:.10e},{:.10e},{}", r.level, r.dof, r.dt, r.energy, opt(r.squared_error));
            }
        }
        PlotKind::TipSweep => {
            s.push_str("r,component1,component2,t\n");
            for (r, a, b, t) in &output.tip_sweep {
                let _ = writeln!(s, "{r:.10e},{a:.10e},{b:.10e},{t:.10e}");
            }
        }
        PlotKind::History => {
            s.push_str("t,component1,component2\n");
            for (t, a, b) in &output.history {
                let _ = writeln!(s, "{t:.10e},{a:.10e},{b:.10e}");
            }
        }
        PlotKind::Traces => {
            s.push_str("x,y,t,component1,component2\n");
            for (x, y, t, a, b) in &output.traces {
                let _ = writeln!(s, "{x:.10e},{y:.10e},{t:.10e},{a:.10e},{b:.10e}");
            }
        }
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join(kind.file_name());
    std::fs::write(&path, s)?;
    Ok(path)
}

/// Parses an `energy_ladder.csv` back into rows.
pub fn read_energy_ladder(path: &Path) -> std::io::Result<Vec<LevelRow>> {
    let text = std::fs::read_to_string(path)?;
    let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 columns"));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            Ok(LevelRow {
                level: f[0].parse().map_err(|_| bad("bad level"))?,
                dof: f[1].parse().map_err(|_| bad("bad dof"))?,
                dt: p(f[2])?,
                energy: p(f[3])?,
                squared_error: if f[4].is_empty() { None } else { Some(p(f[4])?) },
            })
        })
        .collect()
}

/// Human-readable summary of a finished ladder.
pub fn format_report(report: &ConvergenceReport) -> String {
    let mut s = format!("{}\n", report.name);
    let _ = writeln!(s, "{:>5} {:>6} {:>12} {:>14} {:>12}", "level", "dof", "dt", "energy", "sq_error");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>12.6e} {:>14.6e} {:>12}",
            r.level,
            r.dof,
            r.dt,
            r.energy,
            r.squared_error.map_or("-".into(), |e| format!("{e:.4e}"))
        );
    }
    if let Some(b) = &report.benchmark {
        let _ = writeln!(s, "benchmark {:.6e} ({})", b.value, b.provenance);
    }
    if !report.monotone {
        s.push_str("warning: energies are not monotone along the ladder\n");
    }
    if let Some(r) = rate_table(report) {
        let _ = writeln!(
            s,
            "fitted rate {:.3}{}",
            r.slope,
            if r.reliable { "" } else { " (unreliable: errors not decreasing)" }
        );
    }
    s
}
