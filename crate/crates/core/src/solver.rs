//! Marching-on-in-time solution, energies, boundary traces and the single-layer field.

use crate::assembly::{RhsHistory, ToeplitzBlockSystem, UnknownKind};
use crate::basis::{lagrange_values, BasisSpace};
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::kernels::kernel_v_sym;
use crate::model::{Material, TimeGrid};
use crate::quadrature::{adaptive_gk, circle_crossings};
use nalgebra::DVector;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Condition estimates of `E^(0)` above this are rejected.
pub const MAX_CONDITION: f64 = 1e13;

#[derive(Debug, Clone)]
pub struct TimeHistorySolution {
    /// `coefficients[n]` has length `2M`, component-blocked like the system.
    pub coefficients: Vec<DVector<f64>>,
    pub space: BasisSpace,
    pub time: TimeGrid,
    pub unknown_kind: UnknownKind,
    /// 2-norm condition number of `E^(0)`.
    pub condition: f64,
}

fn check_dims(system: &ToeplitzBlockSystem, vectors: &[DVector<f64>], what: &str) -> Result<()> {
    let n = system.size();
    if vectors.len() != system.blocks.len() {
        return Err(Error::Dimension(format!(
            "{what} has {} steps, system has {}",
            vectors.len(),
            system.blocks.len()
        )));
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != n) {
        return Err(Error::Dimension(format!("{what} vector of length {}, expected {n}", v.len())));
    }
    Ok(())
}

pub fn mot_solve(system: &ToeplitzBlockSystem, rhs: &RhsHistory) -> Result<TimeHistorySolution> {
    check_dims(system, &rhs.vectors, "right-hand side")?;
    let e0 = &system.blocks[0];
    let sv = e0.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::Conditioning(condition));
    }
    let lu = e0.clone().lu();
    let mut coefficients: Vec<DVector<f64>> = Vec::with_capacity(rhs.vectors.len());
    for (n, g) in rhs.vectors.iter().enumerate() {
        let mut r = g.clone();
        for k in 1..=n {
            r.gemv(-1.0, &system.blocks[k], &coefficients[n - k], 1.0);
        }
        let a = lu.solve(&r).ok_or(Error::Conditioning(f64::INFINITY))?;
        coefficients.push(a);
    }
    Ok(TimeHistorySolution {
        coefficients,
        space: system.space.clone(),
        time: system.time,
        unknown_kind: system.unknown_kind,
        condition,
    })
}

/// `αᵀ E α` over the full space-time system.
pub fn energy(system: &ToeplitzBlockSystem, solution: &TimeHistorySolution) -> Result<f64> {
    check_dims(system, &solution.coefficients, "solution")?;
    let a = &solution.coefficients;
    Ok((0..a.len()).map(|n| a[n].dot(&system.apply_row(a, n))).sum())
}

/// `max_n |Σ_k E^(k) α_(n−k) − g_n| / max_n |g_n|`.
pub fn residual(system: &ToeplitzBlockSystem, rhs: &RhsHistory, solution: &TimeHistorySolution) -> Result<f64> {
    check_dims(system, &rhs.vectors, "right-hand side")?;
    check_dims(system, &solution.coefficients, "solution")?;
    let scale = rhs.vectors.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let worst = (0..rhs.vectors.len())
        .map(|n| (system.apply_row(&solution.coefficients, n) - &rhs.vectors[n]).norm())
        .fold(0.0, f64::max);
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Relative tolerance for positions just outside the boundary.
const SNAP: f64 = 1e-9;

fn arc_lengths(space: &BasisSpace) -> Vec<f64> {
    let mesh = &space.mesh;
    let mut acc = vec![0.0];
    for e in 0..mesh.element_count() {
        acc.push(acc[e] + mesh.length(e));
    }
    acc
}

/// Element and local coordinate at arc length `s` from the first mesh node.
pub fn locate_arc(space: &BasisSpace, s: f64) -> Result<(usize, f64)> {
    let acc = arc_lengths(space);
    let total = *acc.last().expect("nonempty mesh");
    if s < -SNAP * total || s > total * (1.0 + SNAP) || !s.is_finite() {
        return Err(Error::Domain(format!("arc position {s} outside [0, {total}]")));
    }
    let s = s.clamp(0.0, total);
    let e = acc.partition_point(|&a| a <= s).saturating_sub(1).min(acc.len() - 2);
    let u = ((s - acc[e]) / (acc[e + 1] - acc[e])).clamp(0.0, 1.0);
    Ok((e, u))
}

/// Element and local coordinate of the boundary point nearest to `p`.
pub fn locate_point(space: &BasisSpace, p: Point) -> Result<(usize, f64)> {
    let mesh = &space.mesh;
    let scale = mesh.nodes.iter().map(|q| geom::norm(*q)).fold(mesh.h_max, f64::max);
    let mut best = (f64::INFINITY, 0, 0.0);
    for e in 0..mesh.element_count() {
        let (a, b) = mesh.endpoints(e);
        let d = geom::sub(b, a);
        let u = (geom::dot(geom::sub(p, a), d) / geom::dot(d, d)).clamp(0.0, 1.0);
        let dist = geom::norm(geom::sub(p, geom::lerp(a, b, u)));
        if dist < best.0 {
            best = (dist, e, u);
        }
    }
    if best.0 > SNAP * scale {
        return Err(Error::Domain(format!("point {p:?} is {:.3e} away from the boundary", best.0)));
    }
    Ok((best.1, best.2))
}

/// Spatial interpolation of the coefficient vector `c` at local coordinate `u` of element `e`.
fn interpolate(space: &BasisSpace, c: &DVector<f64>, e: usize, u: f64) -> [f64; 2] {
    let p = space.degree(e);
    let mut w = vec![0.0; p + 1];
    lagrange_values(p, u, &mut w);
    let m = space.dof_count;
    let mut out = [0.0; 2];
    for (j, g) in space.dof_map[e].iter().enumerate() {
        if let Some(g) = g {
            out[0] += w[j] * c[*g];
            out[1] += w[j] * c[m + *g];
        }
    }
    out
}

/// Time weights `(n, v_n(t))` of the basis functions that are nonzero at `t`.
fn time_weights(sol: &TimeHistorySolution, t: f64) -> Result<Vec<(usize, f64)>> {
    let tg = &sol.time;
    if !(t >= 0.0 && t <= tg.t_final * (1.0 + SNAP)) {
        return Err(Error::Domain(format!("time {t} outside [0, {}]", tg.t_final)));
    }
    let n_steps = sol.coefficients.len();
    Ok(match sol.unknown_kind {
        UnknownKind::DirichletTraction => {
            let n = ((t / tg.dt).floor() as usize).min(n_steps - 1);
            vec![(n, 1.0)]
        }
        UnknownKind::NeumannDisplacement => (0..n_steps)
            .map(|n| (n, ((t - tg.t(n)) / tg.dt).clamp(0.0, 1.0)))
            .take_while(|(_, w)| *w > 0.0)
            .collect(),
    })
}

fn eval_element(sol: &TimeHistorySolution, e: usize, u: f64, t: f64) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for (n, w) in time_weights(sol, t)? {
        let v = interpolate(&sol.space, &sol.coefficients[n], e, u);
        out[0] += w * v[0];
        out[1] += w * v[1];
    }
    Ok(out)
}

/// Φ or Ψ at arc length `arc_position` along the boundary and time `t`.
pub fn eval_on_boundary(solution: &TimeHistorySolution, arc_position: f64, t: f64) -> Result<[f64; 2]> {
    let (e, u) = locate_arc(&solution.space, arc_position)?;
    eval_element(solution, e, u, t)
}

/// Φ or Ψ at the boundary point nearest to `p`, which must lie on the boundary.
pub fn eval_at_point(solution: &TimeHistorySolution, p: Point, t: f64) -> Result<[f64; 2]> {
    let (e, u) = locate_point(&solution.space, p)?;
    eval_element(solution, e, u, t)
}

/// Static crack-opening profile `k_i sqrt(1/4 − x²)` under the constant traction `η`.
pub fn elastostatic_reference(x: f64, eta: [f64; 2], material: &Material) -> Result<[f64; 2]> {
    if !(x.abs() <= 0.5) {
        return Err(Error::Domain(format!("|x| = {} exceeds 1/2", x.abs())));
    }
    let (p2, s2) = (material.c_p * material.c_p, material.c_s * material.c_s);
    let k = -p2 / (material.rho * s2 * (p2 - s2));
    let root = (0.25 - x * x).max(0.0).sqrt();
    Ok([k * eta[0] * root, k * eta[1] * root])
}

/// The single-layer term `VΦ` of the representation formula at a point off the boundary.
pub fn eval_single_layer_potential(
    solution: &TimeHistorySolution,
    field_point: Point,
    t: f64,
    material: &Material,
    tol: f64,
) -> Result<[f64; 2]> {
    if solution.unknown_kind != UnknownKind::DirichletTraction {
        return Err(Error::Space("the single-layer field needs a traction history".into()));
    }
    if locate_point(&solution.space, field_point).is_ok() {
        return Err(Error::Domain(format!(
            "field point {field_point:?} lies on the boundary; near-boundary accuracy is not available"
        )));
    }
    let tg = &solution.time;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    let space = &solution.space;
    let mesh = &space.mesh;
    let m = space.dof_count;
    let pref = 1.0 / (2.0 * PI * material.rho);
    let mut out = [0.0; 2];
    for e in 0..mesh.element_count() {
        let (a, b) = mesh.endpoints(e);
        let len = mesh.length(e);
        let p = space.degree(e);
        let dmin = geom::point_segment_distance(field_point, a, b);
        let mut shapes = vec![0.0; p + 1];
        for (n, c) in solution.coefficients.iter().enumerate() {
            // Φ on slab n contributes ν(t − t_n) − ν(t − t_{n+1}), each term causal
            let lags: Vec<(f64, f64)> = [(1.0, t - tg.t(n)), (-1.0, t - tg.t(n + 1))]
                .into_iter()
                .filter(|&(_, d)| d > 0.0 && material.c_p * d > dmin)
                .collect();
            if lags.is_empty() {
                continue;
            }
            let mut cuts = vec![0.0, 1.0];
            for &(_, d) in &lags {
                for cw in [material.c_s, material.c_p] {
                    cuts.extend(circle_crossings(a, b, field_point, cw * d));
                }
            }
            cuts.sort_by(f64::total_cmp);
            let coef: Vec<[f64; 2]> = space.dof_map[e]
                .iter()
                .map(|g| g.map_or([0.0; 2], |g| [c[g], c[m + g]]))
                .collect();
            let integrand = |u: f64, o: &mut [f64]| {
                let xi = geom::lerp(a, b, u);
                let r = geom::sub(field_point, xi);
                lagrange_values(p, u, &mut shapes);
                let mut phi = [0.0; 2];
                for (j, s) in shapes.iter().enumerate() {
                    phi[0] += s * coef[j][0];
                    phi[1] += s * coef[j][1];
                }
                let mut k = [0.0; 3];
                for &(sgn, d) in &lags {
                    let v = kernel_v_sym(r, d, material);
                    for q in 0..3 {
                        k[q] += sgn * v[q];
                    }
                }
                o[0] = k[0] * phi[0] + k[1] * phi[1];
                o[1] = k[1] * phi[0] + k[2] * phi[1];
            };
            let mut f = integrand;
            for w in cuts.windows(2) {
                if w[1] - w[0] < 1e-15 {
                    continue;
                }
                let res = adaptive_gk(&mut f, w[0], w[1], 2, tol, 0.0, 200);
                out[0] += pref * len * res.value[0];
                out[1] += pref * len * res.value[1];
            }
        }
    }
    Ok(out)
}

/// One line per step: `n, t_n, coefficients...`.
pub fn write_coefficients_csv(solution: &TimeHistorySolution, path: &Path) -> Result<()> {
    let mut s = String::from("step,t");
    for i in 0..solution.coefficients.first().map_or(0, |c| c.len()) {
        let _ = write!(s, ",c{i}");
    }
    s.push('\n');
    for (n, c) in solution.coefficients.iter().enumerate() {
        let _ = write!(s, "{n},{}", solution.time.t(n));
        for v in c.iter() {
            let _ = write!(s, ",{v:.12e}");
        }
        s.push('\n');
    }
    std::fs::File::create(path)?.write_all(s.as_bytes())?;
    Ok(())
}

/// Samples `(x, y, t, value_1, value_2)` at the given arc positions and times.
pub fn write_boundary_trace_csv(solution: &TimeHistorySolution, arcs: &[f64], times: &[f64], path: &Path) -> Result<()> {
    let mut s = String::from("x,y,t,v1,v2\n");
    for &t in times {
        for &arc in arcs {
            let (e, u) = locate_arc(&solution.space, arc)?;
            let (a, b) = solution.space.mesh.endpoints(e);
            let p = geom::lerp(a, b, u);
            let v = eval_element(solution, e, u, t)?;
            let _ = writeln!(s, "{},{},{},{:.12e},{:.12e}", p[0], p[1], t, v[0], v[1]);
        }
    }
    std::fs::File::create(path)?.write_all(s.as_bytes())?;
    Ok(())
}

/// Rows `(dof, dt, energy, squared error)` of a refinement ladder.
pub fn write_energy_ladder_csv(rows: &[(usize, f64, f64, Option<f64>)], path: &Path) -> Result<()> {
    let mut s = String::from("dof,dt,energy,squared_error\n");
    for (dof, dt, e, err) in rows {
        let err = err.map_or(String::new(), |v| format!("{v:.6e}"));
        let _ = writeln!(s, "{dof},{dt},{e:.8e},{err}");
    }
    std::fs::File::create(path)?.write_all(s.as_bytes())?;
    Ok(())
}
