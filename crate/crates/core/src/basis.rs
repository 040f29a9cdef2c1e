//! Piecewise polynomial space bases on boundary meshes and the two time bases.

use crate::error::{Error, Result};
use crate::model::{BoundaryMesh, TimeGrid, Topology};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuity {
    Discontinuous,
    Continuous,
    /// Continuous, with the open-arc endpoint values removed.
    ContinuousVanishingAtTips,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DegreeSpec {
    Uniform(usize),
    PerElement(Vec<usize>),
}

impl DegreeSpec {
    /// Degrees growing away from the endpoints of each side, `p = ceil(slope * layer)`
    /// with `layer = 1` on the elements touching a side endpoint.
    pub fn linear_from_tips(mesh: &BoundaryMesh, slope: f64) -> DegreeSpec {
        let n = mesh.element_count();
        let mut degrees = vec![0; n];
        let mut start = 0;
        while start < n {
            let side = mesh.sides[start];
            let mut end = start;
            while end < n && mesh.sides[end] == side {
                end += 1;
            }
            let len = end - start;
            for k in 0..len {
                let layer = k.min(len - 1 - k) + 1;
                degrees[start + k] = ((slope * layer as f64).ceil() as usize).max(1);
            }
            start = end;
        }
        DegreeSpec::PerElement(degrees)
    }
}

/// Discrete space for one scalar component; the vector unknown uses two copies.
#[derive(Debug, Clone)]
pub struct BasisSpace {
    pub mesh: Arc<BoundaryMesh>,
    pub degrees: Vec<usize>,
    pub continuity: Continuity,
    pub dof_count: usize,
    /// `dof_map[e][j]` is the global index of local shape `j` on element `e`.
    pub dof_map: Vec<Vec<Option<usize>>>,
}

pub fn build_space(
    mesh: Arc<BoundaryMesh>,
    degree_spec: &DegreeSpec,
    continuity: Continuity,
) -> Result<BasisSpace> {
    let n = mesh.element_count();
    let degrees = match degree_spec {
        DegreeSpec::Uniform(p) => vec![*p; n],
        DegreeSpec::PerElement(v) => {
            if v.len() != n {
                return Err(Error::Space(format!("{} degrees for {n} elements", v.len())));
            }
            v.clone()
        }
    };
    if continuity != Continuity::Discontinuous && degrees.iter().any(|&p| p == 0) {
        return Err(Error::Space("continuous spaces need degree >= 1".into()));
    }
    if degrees.iter().any(|&p| p > 12) {
        return Err(Error::Space("degrees above 12 are not supported".into()));
    }
    if continuity == Continuity::ContinuousVanishingAtTips && mesh.topology == Topology::Closed {
        return Err(Error::Space("tip constraint needs an open arc".into()));
    }
    let mut dof_map = Vec::with_capacity(n);
    let dof_count = match continuity {
        Continuity::Discontinuous => {
            let mut g = 0;
            for &p in &degrees {
                dof_map.push((g..g + p + 1).map(Some).collect());
                g += p + 1;
            }
            g
        }
        Continuity::Continuous | Continuity::ContinuousVanishingAtTips => {
            let total: usize = degrees.iter().sum();
            let closed = mesh.topology == Topology::Closed;
            let mut g = 0;
            for &p in &degrees {
                dof_map.push(
                    (0..=p)
                        .map(|j| {
                            let idx = g + j;
                            Some(if closed && idx == total { 0 } else { idx })
                        })
                        .collect::<Vec<_>>(),
                );
                g += p;
            }
            if continuity == Continuity::ContinuousVanishingAtTips {
                for row in dof_map.iter_mut() {
                    for d in row.iter_mut() {
                        *d = match *d {
                            Some(0) => None,
                            Some(k) if k == total => None,
                            Some(k) => Some(k - 1),
                            None => None,
                        };
                    }
                }
                if total < 2 {
                    return Err(Error::Space("tip-vanishing space has no degrees of freedom".into()));
                }
                total - 1
            } else if closed {
                total
            } else {
                total + 1
            }
        }
    };
    Ok(BasisSpace {
        mesh,
        degrees,
        continuity,
        dof_count,
        dof_map,
    })
}

impl BasisSpace {
    pub fn degree(&self, e: usize) -> usize {
        self.degrees[e]
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }
}

/// Values of the equispaced Lagrange basis of degree `p` at `u`.
pub fn lagrange_values(p: usize, u: f64, out: &mut [f64]) {
    if p == 0 {
        out[0] = 1.0;
        return;
    }
    let pf = p as f64;
    for (j, o) in out.iter_mut().enumerate().take(p + 1) {
        let uj = j as f64 / pf;
        let mut v = 1.0;
        for k in 0..=p {
            if k != j {
                let uk = k as f64 / pf;
                v *= (u - uk) / (uj - uk);
            }
        }
        *o = v;
    }
}

/// Derivatives with respect to `u` of the equispaced Lagrange basis of degree `p`.
pub fn lagrange_derivatives(p: usize, u: f64, out: &mut [f64]) {
    if p == 0 {
        out[0] = 0.0;
        return;
    }
    let pf = p as f64;
    for (j, o) in out.iter_mut().enumerate().take(p + 1) {
        let uj = j as f64 / pf;
        let mut s = 0.0;
        for m in 0..=p {
            if m == j {
                continue;
            }
            let um = m as f64 / pf;
            let mut v = 1.0 / (uj - um);
            for k in 0..=p {
                if k != j && k != m {
                    let uk = k as f64 / pf;
                    v *= (u - uk) / (uj - uk);
                }
            }
            s += v;
        }
        *o = s;
    }
}

pub fn eval_shape(space: &BasisSpace, element: usize, local_coord: f64, dof_local: usize) -> Result<f64> {
    if element >= space.mesh.element_count() {
        return Err(Error::Index(format!("element {element}")));
    }
    let p = space.degrees[element];
    if dof_local > p {
        return Err(Error::Index(format!("local dof {dof_local} on degree {p} element")));
    }
    if !(0.0..=1.0).contains(&local_coord) {
        return Err(Error::Domain(format!("local coordinate {local_coord} outside [0, 1]")));
    }
    let mut v = vec![0.0; p + 1];
    lagrange_values(p, local_coord, &mut v);
    Ok(v[dof_local])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeBasisKind {
    PiecewiseConstant,
    /// `v_n(t) = R(t - t_n) - R(t - t_{n+1})` with `R(s) = max(s, 0)/dt`.
    PiecewiseLinearHat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBasis {
    pub kind: TimeBasisKind,
    pub grid: TimeGrid,
}

pub fn eval_time_basis(tb: &TimeBasis, n: usize, t: f64) -> f64 {
    let t0 = tb.grid.t(n);
    let t1 = tb.grid.t(n + 1);
    match tb.kind {
        TimeBasisKind::PiecewiseConstant => {
            if t >= t0 && t < t1 {
                1.0
            } else {
                0.0
            }
        }
        TimeBasisKind::PiecewiseLinearHat => {
            let ramp = |s: f64| if s > 0.0 { s / tb.grid.dt } else { 0.0 };
            ramp(t - t0) - ramp(t - t1)
        }
    }
}
