//! Line-oriented `key = value` experiment configuration.
//!
//! Ladder levels use `level.<i>.<field>` keys; see `presets/*.cfg` for complete files.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use tdbem::assembly::{BoundaryDatum, SpatialProfile, TemporalProfile, UnknownKind};
use tdbem::geom::Point;
use tdbem::model::{BoundaryGeometry, Material, MeshSpec};

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatumKind {
    X4Profile,
    XProfile,
    AbsX9p5,
    ConstantEta,
}

impl DatumKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "x4_profile" => DatumKind::X4Profile,
            "x_profile" => DatumKind::XProfile,
            "abs_x_9p5" => DatumKind::AbsX9p5,
            "constant_eta" => DatumKind::ConstantEta,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DatumKind::X4Profile => "x4_profile",
            DatumKind::XProfile => "x_profile",
            DatumKind::AbsX9p5 => "abs_x_9p5",
            DatumKind::ConstantEta => "constant_eta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatumSpec {
    pub kind: DatumKind,
    /// Per-component amplitude; a zero amplitude switches the component off.
    pub amplitude: [f64; 2],
    pub temporal: TemporalKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemporalKind {
    Step,
    SmoothOnset,
    Ramp(f64),
}

impl DatumSpec {
    pub fn build(&self) -> BoundaryDatum {
        let (scale, spatial) = match self.kind {
            DatumKind::X4Profile => (1.0, SpatialProfile::Monomial(4)),
            DatumKind::XProfile => (1.0, SpatialProfile::Monomial(1)),
            DatumKind::AbsX9p5 => (100.0, SpatialProfile::AbsPower(9.5)),
            DatumKind::ConstantEta => (1.0, SpatialProfile::Constant),
        };
        let temporal = match self.temporal {
            TemporalKind::Step => TemporalProfile::Step,
            TemporalKind::SmoothOnset => TemporalProfile::SmoothOnset,
            TemporalKind::Ramp(w) => TemporalProfile::Ramp { width: w },
        };
        let comp = |i: usize| {
            (self.amplitude[i] != 0.0).then(|| tdbem::assembly::SeparableComponent {
                scale: scale * self.amplitude[i],
                spatial,
                temporal: temporal.clone(),
            })
        };
        BoundaryDatum::Separable([comp(0), comp(1)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    pub mesh: MeshSpec,
    pub degree: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkSpec {
    None,
    /// A fixed value with its provenance.
    Value(f64, String),
    /// Aitken extrapolation of the last three energies.
    Extrapolate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: UnknownKind,
    pub geometry: BoundaryGeometry,
    pub material: Material,
    pub datum: DatumSpec,
    pub t_final: f64,
    pub tol: f64,
    pub levels: Vec<LevelSpec>,
    pub benchmark: BenchmarkSpec,
    pub trace_times: Vec<f64>,
    pub trace_samples: usize,
    pub history_point: Option<Point>,
    pub history_samples: usize,
    pub tip_vertex: Option<Point>,
    pub tip_times: Vec<f64>,
    pub tip_radius: f64,
    pub cache_dir: Option<String>,
}

fn num(line: usize, s: &str) -> Result<f64, ConfigError> {
    let s = s.trim();
    let v = if let Some(head) = s.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*');
        let h = if head.is_empty() { 1.0 } else { parse_f(line, head)? };
        h * PI
    } else {
        parse_f(line, s)?
    };
    if !v.is_finite() {
        return Err(err(line, format!("non-finite number {s:?}")));
    }
    Ok(v)
}

fn parse_f(line: usize, s: &str) -> Result<f64, ConfigError> {
    if let Some((a, b)) = s.split_once('/') {
        return Ok(parse_f(line, a)? / parse_f(line, b)?);
    }
    s.trim().parse::<f64>().map_err(|_| err(line, format!("expected a number, got {s:?}")))
}

fn int(line: usize, s: &str) -> Result<usize, ConfigError> {
    s.trim().parse::<usize>().map_err(|_| err(line, format!("expected a non-negative integer, got {s:?}")))
}

fn list(line: usize, s: &str) -> Result<Vec<f64>, ConfigError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| num(line, p)).collect()
}

fn point(line: usize, s: &str) -> Result<Point, ConfigError> {
    let v = list(line, s)?;
    if v.len() != 2 {
        return Err(err(line, format!("expected a point `x, y`, got {s:?}")));
    }
    Ok([v[0], v[1]])
}

fn geometry(line: usize, s: &str) -> Result<BoundaryGeometry, ConfigError> {
    let mut parts = s.split(':');
    let kind = parts.next().unwrap_or("").trim();
    let rest: Vec<&str> = parts.collect();
    let g = match (kind, rest.as_slice()) {
        ("segment", []) => BoundaryGeometry::segment([-0.5, 0.0], [0.5, 0.0]),
        ("segment", [c]) => {
            let v = list(line, c)?;
            if v.len() != 4 {
                return Err(err(line, "segment needs x0, y0, x1, y1"));
            }
            BoundaryGeometry::segment([v[0], v[1]], [v[2], v[3]])
        }
        ("regular", [n, side]) => BoundaryGeometry::regular_polygon(int(line, n)?, num(line, side)?),
        ("isosceles", [w, angle]) => BoundaryGeometry::isosceles_triangle(num(line, w)?, num(line, angle)?),
        ("polygon", [pts]) => {
            let v = pts.split(';').map(|p| point(line, p)).collect::<Result<Vec<_>, _>>()?;
            BoundaryGeometry::polygon(v)
        }
        _ => return Err(err(line, format!("unknown geometry {s:?}"))),
    };
    g.map_err(|e| err(line, e.to_string()))
}

fn mesh(line: usize, s: &str) -> Result<MeshSpec, ConfigError> {
    let p: Vec<&str> = s.split(':').map(str::trim).collect();
    match p.as_slice() {
        ["uniform", n] => Ok(MeshSpec::uniform(int(line, n)?)),
        ["algebraic", beta, n] => Ok(MeshSpec::algebraic(num(line, beta)?, int(line, n)?)),
        ["geometric", sigma, n] => Ok(MeshSpec::geometric(num(line, sigma)?, int(line, n)?)),
        _ => Err(err(line, format!("unknown mesh {s:?}"))),
    }
}

#[derive(Default)]
struct LevelDraft {
    mesh: Option<MeshSpec>,
    degree: Option<usize>,
    dt: Option<f64>,
    side_counts: Option<Vec<usize>>,
    line: usize,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut drafts: BTreeMap<usize, LevelDraft> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got {body:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if let Some(rest) = k.strip_prefix("level.") {
            let (idx, field) = rest
                .split_once('.')
                .ok_or_else(|| err(line, format!("level key {k:?} needs `level.<i>.<field>`")))?;
            let d = drafts.entry(int(line, idx)?).or_default();
            d.line = line;
            match field {
                "mesh" => d.mesh = Some(mesh(line, v)?),
                "degree" => d.degree = Some(int(line, v)?),
                "dt" => d.dt = Some(num(line, v)?),
                "side_counts" => {
                    d.side_counts = Some(v.split(',').map(|c| int(line, c)).collect::<Result<_, _>>()?)
                }
                _ => return Err(err(line, format!("unknown level field {field:?}"))),
            }
            continue;
        }
        if kv.insert(k.to_string(), (line, v.to_string())).is_some() {
            return Err(err(line, format!("duplicate key {k:?}")));
        }
    }
    let mut take = |k: &str| kv.remove(k);
    let name = take("name").map_or_else(|| "experiment".to_string(), |v| v.1);
    let problem = match take("problem") {
        Some((_, v)) if v == "dirichlet_v" => UnknownKind::DirichletTraction,
        Some((_, v)) if v == "neumann_w" => UnknownKind::NeumannDisplacement,
        Some((l, v)) => return Err(err(l, format!("unknown problem {v:?}"))),
        None => return Err(err(0, "missing key `problem`")),
    };
    let geometry = match take("geometry") {
        Some((l, v)) => geometry(l, &v)?,
        None => return Err(err(0, "missing key `geometry`")),
    };
    let material = {
        let lame = (take("material.lambda"), take("material.mu"), take("material.rho"));
        let speeds = (take("material.cp"), take("material.cs"));
        match (lame, speeds) {
            ((Some(l), Some(m), rho), (None, None)) => {
                let rho = rho.map_or(Ok(1.0), |r| num(r.0, &r.1))?;
                Material::new(num(l.0, &l.1)?, num(m.0, &m.1)?, rho).map_err(|e| err(l.0, e.to_string()))?
            }
            ((None, None, rho), (Some(p), Some(s))) => {
                let rho = rho.map_or(Ok(1.0), |r| num(r.0, &r.1))?;
                Material::from_wave_speeds(num(p.0, &p.1)?, num(s.0, &s.1)?, rho).map_err(|e| err(p.0, e.to_string()))?
            }
            _ => return Err(err(0, "material needs either lambda and mu or cp and cs")),
        }
    };
    let datum = {
        let (l, v) = take("datum").ok_or_else(|| err(0, "missing key `datum`"))?;
        let kind = DatumKind::parse(&v).ok_or_else(|| err(l, format!("unknown datum {v:?}")))?;
        let amplitude = match take("datum.amplitude") {
            Some((l, v)) => {
                let a = list(l, &v)?;
                if a.len() != 2 {
                    return Err(err(l, "datum.amplitude needs two values"));
                }
                [a[0], a[1]]
            }
            None => [1.0, 1.0],
        };
        let temporal = match take("datum.temporal") {
            None => match kind {
                DatumKind::ConstantEta => TemporalKind::Step,
                _ => TemporalKind::SmoothOnset,
            },
            Some((_, v)) if v == "step" => TemporalKind::Step,
            Some((_, v)) if v == "smooth_onset" => TemporalKind::SmoothOnset,
            Some((l, v)) => match v.strip_prefix("ramp:") {
                Some(w) => TemporalKind::Ramp(num(l, w)?),
                None => return Err(err(l, format!("unknown temporal profile {v:?}"))),
            },
        };
        DatumSpec {
            kind,
            amplitude,
            temporal,
        }
    };
    let opt_num = |e: Option<(usize, String)>, d: f64| e.map_or(Ok(d), |(l, v)| num(l, &v));
    let t_final = opt_num(take("T"), 1.0)?;
    let tol = opt_num(take("tol"), 1e-8)?;
    if !(t_final > 0.0) || !(tol > 0.0) {
        return Err(err(0, "T and tol must be positive"));
    }
    let benchmark = match take("benchmark") {
        None => BenchmarkSpec::None,
        Some((_, v)) if v == "none" => BenchmarkSpec::None,
        Some((_, v)) if v == "extrapolate" => BenchmarkSpec::Extrapolate,
        Some((l, v)) => {
            let note = take("benchmark.provenance").map_or_else(|| "configured value".to_string(), |p| p.1);
            BenchmarkSpec::Value(num(l, &v)?, note)
        }
    };
    let opt_list = |e: Option<(usize, String)>| e.map_or(Ok(Vec::new()), |(l, v)| list(l, &v));
    let opt_point = |e: Option<(usize, String)>| e.map(|(l, v)| point(l, &v)).transpose();
    let trace_times = opt_list(take("output.trace_times"))?;
    let trace_samples = take("output.trace_samples").map_or(Ok(201), |(l, v)| int(l, &v))?;
    let history_point = opt_point(take("output.history_point"))?;
    let history_samples = take("output.history_samples").map_or(Ok(200), |(l, v)| int(l, &v))?;
    let tip_vertex = opt_point(take("output.tip_vertex"))?;
    let tip_times = opt_list(take("output.tip_times"))?;
    let tip_radius = opt_num(take("output.tip_radius"), 0.1)?;
    let cache_dir = take("cache").map(|v| v.1);
    if let Some((k, (l, _))) = kv.into_iter().next() {
        return Err(err(l, format!("unknown key {k:?}")));
    }
    if drafts.is_empty() {
        return Err(err(0, "no ladder levels (`level.0.mesh`, ...)"));
    }
    let mut levels = Vec::new();
    for (i, (idx, d)) in drafts.into_iter().enumerate() {
        if idx != i {
            return Err(err(d.line, format!("level indices must be 0, 1, 2, ...; found {idx}")));
        }
        let mut mesh = d.mesh.ok_or_else(|| err(d.line, format!("level {idx} needs a mesh")))?;
        if let Some(c) = d.side_counts {
            mesh = mesh.with_side_counts(c);
        }
        let dt = d.dt.ok_or_else(|| err(d.line, format!("level {idx} needs dt")))?;
        if !(dt > 0.0 && dt <= t_final) {
            return Err(err(d.line, format!("level {idx}: dt {dt} outside (0, T]")));
        }
        levels.push(LevelSpec {
            mesh,
            degree: d.degree.unwrap_or(match problem {
                UnknownKind::DirichletTraction => 0,
                UnknownKind::NeumannDisplacement => 1,
            }),
            dt,
        });
    }
    Ok(ExperimentConfig {
        name,
        problem,
        geometry,
        material,
        datum,
        t_final,
        tol,
        levels,
        benchmark,
        trace_times,
        trace_samples,
        history_point,
        history_samples,
        tip_vertex,
        tip_times,
        tip_radius,
        cache_dir,
    })
}
