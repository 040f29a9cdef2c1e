//! Materials, boundary geometries, time grids and mesh generation.

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use std::fmt::Write as _;
use std::path::Path;

/// Isotropic homogeneous elastic material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub c_p: f64,
    pub c_s: f64,
    pub poisson: f64,
    pub kolosov: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64, rho: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("mu", mu), ("rho", rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        let poisson = lambda / (2.0 * (lambda + mu));
        Ok(Material {
            lambda,
            mu,
            rho,
            c_p: ((lambda + 2.0 * mu) / rho).sqrt(),
            c_s: (mu / rho).sqrt(),
            poisson,
            kolosov: 3.0 - 4.0 * poisson,
        })
    }

    /// Material with prescribed wave speeds and density.
    pub fn from_wave_speeds(c_p: f64, c_s: f64, rho: f64) -> Result<Self> {
        if !(c_p > c_s && c_s > 0.0) {
            return Err(Error::Domain(format!(
                "wave speeds must satisfy c_p > c_s > 0, got {c_p}, {c_s}"
            )));
        }
        let mu = rho * c_s * c_s;
        let lambda = rho * c_p * c_p - 2.0 * mu;
        Material::new(lambda, mu, rho)
    }

    /// Kolosov constant written through the Lamé parameters.
    pub fn kolosov_from_lame(&self) -> f64 {
        3.0 - 2.0 * self.lambda / (self.lambda + self.mu)
    }
}

/// Shorthand for [`Material::new`].
pub fn make_material(lambda: f64, mu: f64, rho: f64) -> Result<Material> {
    Material::new(lambda, mu, rho)
}

/// Uniform decomposition of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || n_steps == 0 {
            return Err(Error::Domain(format!(
                "time grid needs T > 0 and n_steps >= 1, got {t_final}, {n_steps}"
            )));
        }
        Ok(TimeGrid {
            t_final,
            n_steps,
            dt: t_final / n_steps as f64,
        })
    }

    /// Grid with step `dt`; `T/dt` must be an integer up to rounding.
    pub fn from_dt(t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        let n = (t_final / dt).round();
        if n < 1.0 || ((n * dt - t_final) / t_final).abs() > 1e-9 {
            return Err(Error::Domain(format!("T = {t_final} is not a multiple of dt = {dt}")));
        }
        TimeGrid::new(t_final, n as usize)
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// The boundary Γ before meshing.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryGeometry {
    OpenSegment { start: Point, end: Point },
    /// Closed polygon; stored counter-clockwise.
    Polygon { vertices: Vec<Point> },
}

impl BoundaryGeometry {
    pub fn segment(start: Point, end: Point) -> Result<Self> {
        if geom::norm(geom::sub(end, start)) == 0.0 {
            return Err(Error::Geometry("segment endpoints coincide".into()));
        }
        Ok(BoundaryGeometry::OpenSegment { start, end })
    }

    /// Closed polygon; the vertex order is normalized to counter-clockwise.
    pub fn polygon(mut vertices: Vec<Point>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::Geometry("polygon needs at least three vertices".into()));
        }
        for k in 0..n {
            let a = vertices[k];
            let b = vertices[(k + 1) % n];
            let c = vertices[(k + 2) % n];
            let ab = geom::sub(b, a);
            let bc = geom::sub(c, b);
            if geom::norm(ab) == 0.0 {
                return Err(Error::Geometry(format!("repeated vertex {k}")));
            }
            if geom::cross(ab, bc).abs() <= 1e-14 * geom::norm(ab) * geom::norm(bc) {
                return Err(Error::Geometry(format!("collinear vertices at {}", (k + 1) % n)));
            }
        }
        let area2: f64 = (0..n)
            .map(|k| geom::cross(vertices[k], vertices[(k + 1) % n]))
            .sum();
        if area2 < 0.0 {
            vertices.reverse();
        }
        Ok(BoundaryGeometry::Polygon { vertices })
    }

    /// Isosceles triangle with base `[-w/2, w/2] x {0}`, apex above, and the given base angle.
    pub fn isosceles_triangle(base_width: f64, base_angle: f64) -> Result<Self> {
        if !(base_angle > 0.0 && base_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Geometry(format!("base angle {base_angle} outside (0, pi/2)")));
        }
        let h = 0.5 * base_width * base_angle.tan();
        BoundaryGeometry::polygon(vec![
            [-0.5 * base_width, 0.0],
            [0.5 * base_width, 0.0],
            [0.0, h],
        ])
    }

    /// Regular polygon with one side `[-s/2, s/2] x {0}` and the rest above it.
    pub fn regular_polygon(sides: usize, side: f64) -> Result<Self> {
        if sides < 3 {
            return Err(Error::Geometry("regular polygon needs >= 3 sides".into()));
        }
        let mut v = vec![[-0.5 * side, 0.0]];
        let turn = 2.0 * std::f64::consts::PI / sides as f64;
        for k in 0..sides - 1 {
            let a = k as f64 * turn;
            let p = v[k];
            v.push([p[0] + side * a.cos(), p[1] + side * a.sin()]);
        }
        BoundaryGeometry::polygon(v)
    }

    fn sides(&self) -> Vec<(Point, Point)> {
        match self {
            BoundaryGeometry::OpenSegment { start, end } => vec![(*start, *end)],
            BoundaryGeometry::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|k| (vertices[k], vertices[(k + 1) % n])).collect()
            }
        }
    }
}

/// Node distribution along each side.
#[derive(Debug, Clone, PartialEq)]
pub enum Refinement {
    Uniform { elements: usize },
    /// `x_k = -1 + (k/N_l)^beta` on each half of a side.
    Algebraic { beta: f64, n_half: usize },
    /// `N_l + 1` elements per half shrinking with ratio `sigma` toward the endpoints.
    Geometric { sigma: f64, n_half: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    pub refinement: Refinement,
    /// Per-side element counts overriding the refinement default (uniform/algebraic only).
    pub side_counts: Option<Vec<usize>>,
}

impl MeshSpec {
    pub fn uniform(elements: usize) -> Self {
        MeshSpec {
            refinement: Refinement::Uniform { elements },
            side_counts: None,
        }
    }

    pub fn algebraic(beta: f64, n_half: usize) -> Self {
        MeshSpec {
            refinement: Refinement::Algebraic { beta, n_half },
            side_counts: None,
        }
    }

    pub fn geometric(sigma: f64, n_half: usize) -> Self {
        MeshSpec {
            refinement: Refinement::Geometric { sigma, n_half },
            side_counts: None,
        }
    }

    pub fn with_side_counts(mut self, counts: Vec<usize>) -> Self {
        self.side_counts = Some(counts);
        self
    }

    fn validate(&self) -> Result<()> {
        match self.refinement {
            Refinement::Uniform { elements } if elements == 0 => {
                Err(Error::Domain("uniform mesh needs at least one element".into()))
            }
            Refinement::Algebraic { beta, n_half } if !(beta >= 1.0) || n_half == 0 => Err(
                Error::Domain(format!("algebraic grading needs beta >= 1, N_l >= 1 (got {beta}, {n_half})")),
            ),
            Refinement::Geometric { sigma, .. }
                if !(sigma > 0.0 && sigma <= 0.5) =>
            {
                Err(Error::Domain(format!(
                    "geometric grading needs sigma in (0, 1/2] (got {sigma})"
                )))
            }
            Refinement::Geometric { .. } if self.side_counts.is_some() => Err(Error::Domain(
                "per-side counts are not supported for geometric meshes".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Node coordinates on the reference side `[-1, 1]`.
    fn reference_nodes(&self, side: usize) -> Result<Vec<f64>> {
        let count = |default: usize| -> Result<usize> {
            match &self.side_counts {
                Some(c) => c.get(side).copied().filter(|&n| n > 0).ok_or_else(|| {
                    Error::Domain(format!("missing or zero element count for side {side}"))
                }),
                None => Ok(default),
            }
        };
        Ok(match self.refinement {
            Refinement::Uniform { elements } => {
                let n = count(elements)?;
                (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect()
            }
            Refinement::Algebraic { beta, n_half } => {
                let n = count(2 * n_half)?;
                let half = 0.5 * n as f64;
                let m = n / 2;
                let mut left: Vec<f64> = (0..=m).map(|k| -1.0 + (k as f64 / half).powf(beta)).collect();
                let mut right: Vec<f64> = left.iter().rev().map(|x| -x).collect();
                if n % 2 == 0 {
                    left.pop();
                    right[0] = 0.0;
                }
                left.extend(right);
                left
            }
            Refinement::Geometric { sigma, n_half } => {
                let mut left = vec![-1.0];
                for j in 1..=n_half + 1 {
                    left.push(sigma.powi((n_half + 1 - j) as i32) - 1.0);
                }
                let right: Vec<f64> = left.iter().rev().skip(1).map(|x| -x).collect();
                left.extend(right);
                left
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Open,
    Closed,
}

/// Ordered straight elements covering Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    pub nodes: Vec<Point>,
    pub elements: Vec<[usize; 2]>,
    /// Geometry side carrying each element.
    pub sides: Vec<usize>,
    pub topology: Topology,
    pub h_max: f64,
    pub h_min: f64,
}

impl BoundaryMesh {
    pub fn from_parts(
        nodes: Vec<Point>,
        elements: Vec<[usize; 2]>,
        sides: Vec<usize>,
        topology: Topology,
    ) -> Result<Self> {
        if elements.is_empty() || sides.len() != elements.len() {
            return Err(Error::Geometry("mesh needs elements with side tags".into()));
        }
        for (k, e) in elements.iter().enumerate() {
            if e[0] >= nodes.len() || e[1] >= nodes.len() {
                return Err(Error::Index(format!("element {k} references missing node")));
            }
            if k > 0 && elements[k - 1][1] != e[0] {
                return Err(Error::Geometry(format!("elements {} and {k} are not consecutive", k - 1)));
            }
        }
        if topology == Topology::Closed && elements[elements.len() - 1][1] != elements[0][0] {
            return Err(Error::Geometry("closed mesh does not close up".into()));
        }
        let lengths: Vec<f64> = elements
            .iter()
            .map(|e| geom::norm(geom::sub(nodes[e[1]], nodes[e[0]])))
            .collect();
        if lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Geometry("zero-length element".into()));
        }
        let h_max = lengths.iter().cloned().fold(0.0, f64::max);
        let h_min = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(BoundaryMesh {
            nodes,
            elements,
            sides,
            topology,
            h_max,
            h_min,
        })
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn endpoints(&self, e: usize) -> (Point, Point) {
        let [a, b] = self.elements[e];
        (self.nodes[a], self.nodes[b])
    }

    pub fn length(&self, e: usize) -> f64 {
        let (a, b) = self.endpoints(e);
        geom::norm(geom::sub(b, a))
    }

    /// Unit normal `(-t_y, t_x)`; points into the obstacle for counter-clockwise polygons
    /// and equals `(0, 1)` on a left-to-right horizontal screen.
    pub fn normal(&self, e: usize) -> Point {
        let (a, b) = self.endpoints(e);
        let t = geom::sub(b, a);
        let l = geom::norm(t);
        [-t[1] / l, t[0] / l]
    }

    /// Write the mesh as plain text with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let topo = match self.topology {
            Topology::Open => "open",
            Topology::Closed => "closed",
        };
        let _ = writeln!(s, "topology {topo}");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
        }
        let _ = writeln!(s, "elements {}", self.elements.len());
        for e in &self.elements {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        let _ = writeln!(s, "sides {}", self.sides.len());
        for k in &self.sides {
            let _ = writeln!(s, "{k}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let mut pos = 0;
        let mut next = || -> Result<&str> {
            let l = lines.get(pos).copied().ok_or_else(|| Error::Parse("unexpected end of mesh file".into()))?;
            pos += 1;
            Ok(l)
        };
        fn keyed<'a>(l: &'a str, key: &str) -> Result<&'a str> {
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::Parse(format!("expected '{key}', got '{l}'")));
            }
            it.next().ok_or_else(|| Error::Parse(format!("'{key}' without value")))
        }
        fn fields<T: std::str::FromStr>(l: &str, n: usize) -> Result<Vec<T>>
        where
            T::Err: std::fmt::Display,
        {
            let v: Vec<T> = l
                .split_whitespace()
                .map(|t| t.parse::<T>().map_err(|e| Error::Parse(format!("'{t}': {e}"))))
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(Error::Parse(format!("expected {n} fields in '{l}'")));
            }
            Ok(v)
        }
        let topology = match keyed(next()?, "topology")? {
            "open" => Topology::Open,
            "closed" => Topology::Closed,
            t => return Err(Error::Parse(format!("unknown topology '{t}'"))),
        };
        let n_nodes = fields::<usize>(keyed(next()?, "nodes")?, 1)?[0];
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let v = fields::<f64>(next()?, 2)?;
            nodes.push([v[0], v[1]]);
        }
        let n_el = fields::<usize>(keyed(next()?, "elements")?, 1)?[0];
        let mut elements = Vec::with_capacity(n_el);
        for _ in 0..n_el {
            let v = fields::<usize>(next()?, 2)?;
            elements.push([v[0], v[1]]);
        }
        let n_sides = fields::<usize>(keyed(next()?, "sides")?, 1)?[0];
        let mut sides = Vec::with_capacity(n_sides);
        for _ in 0..n_sides {
            sides.push(fields::<usize>(next()?, 1)?[0]);
        }
        BoundaryMesh::from_parts(nodes, elements, sides, topology)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        BoundaryMesh::from_text(&std::fs::read_to_string(path)?)
    }

    /// FNV-1a hash of the node coordinates and connectivity.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for p in &self.nodes {
            eat(p[0].to_bits());
            eat(p[1].to_bits());
        }
        for e in &self.elements {
            eat(e[0] as u64);
            eat(e[1] as u64);
        }
        h
    }
}

pub fn make_mesh(geometry: &BoundaryGeometry, spec: &MeshSpec) -> Result<BoundaryMesh> {
    spec.validate()?;
    let sides = geometry.sides();
    let mut nodes: Vec<Point> = Vec::new();
    let mut side_tags = Vec::new();
    for (k, &(a, b)) in sides.iter().enumerate() {
        let xs = spec.reference_nodes(k)?;
        let skip_last = matches!(geometry, BoundaryGeometry::Polygon { .. });
        let n = xs.len();
        for (j, x) in xs.into_iter().enumerate() {
            if skip_last && j == n - 1 {
                break;
            }
            let p = if j == 0 {
                a
            } else if j == n - 1 {
                b
            } else {
                geom::lerp(a, b, 0.5 * (x + 1.0))
            };
            nodes.push(p);
        }
        side_tags.extend(std::iter::repeat(k).take(n - 1));
    }
    let (elements, topology) = match geometry {
        BoundaryGeometry::OpenSegment { .. } => (
            (0..nodes.len() - 1).map(|k| [k, k + 1]).collect::<Vec<_>>(),
            Topology::Open,
        ),
        BoundaryGeometry::Polygon { .. } => {
            let n = nodes.len();
            ((0..n).map(|k| [k, (k + 1) % n]).collect(), Topology::Closed)
        }
    };
    BoundaryMesh::from_parts(nodes, elements, side_tags, topology)
}

/// `(h_max, h_min, element_count)`.
pub fn mesh_stats(mesh: &BoundaryMesh) -> (f64, f64, usize) {
    (mesh.h_max, mesh.h_min, mesh.element_count())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn material_speeds() {
        let m = Material::new(2.0, 1.0, 1.0).unwrap();
        assert_eq!(m.c_p, 2.0);
        assert_eq!(m.c_s, 1.0);
        assert!((m.poisson - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.kolosov - 5.0 / 3.0).abs() < 1e-14);
        assert!((m.kolosov - m.kolosov_from_lame()).abs() < 1e-14);
        let m = Material::new(7.0, 1.0, 1.0).unwrap();
        assert_eq!(m.c_p, 3.0);
        assert!(Material::new(-1.0, 1.0, 1.0).is_err());
        let m = Material::from_wave_speeds(3.0, 1.0, 1.0).unwrap();
        assert!((m.lambda - 7.0).abs() < 1e-14);
    }

    #[test]
    fn algebraic_nodes() {
        let g = BoundaryGeometry::segment([-1.0, 0.0], [1.0, 0.0]).unwrap();
        let m = make_mesh(&g, &MeshSpec::algebraic(2.0, 4)).unwrap();
        let xs: Vec<f64> = m.nodes.iter().map(|p| p[0]).collect();
        let want = [-1.0, -15.0 / 16.0, -0.75, -7.0 / 16.0, 0.0, 7.0 / 16.0, 0.75, 15.0 / 16.0, 1.0];
        for (a, b) in xs.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let m = make_mesh(&g, &MeshSpec::algebraic(1.0, 4)).unwrap();
        assert!((m.nodes[1][0] + 0.75).abs() < 1e-14);
    }

    #[test]
    fn geometric_smallest_element() {
        let g = BoundaryGeometry::segment([-0.5, 0.0], [0.5, 0.0]).unwrap();
        let m = make_mesh(&g, &MeshSpec::geometric(0.5, 3)).unwrap();
        assert_eq!(m.element_count(), 8);
        assert!((m.h_min - 0.0625).abs() < 1e-15);
        let m = make_mesh(&g, &MeshSpec::geometric(0.2, 7)).unwrap();
        assert!((m.h_min - 6.4e-6).abs() < 1e-15);
        assert_eq!(m.element_count(), 16);
    }

    #[test]
    fn odd_side_count_puts_extra_element_in_center() {
        let g = BoundaryGeometry::segment([-1.0, 0.0], [1.0, 0.0]).unwrap();
        let m = make_mesh(&g, &MeshSpec::algebraic(1.0, 1).with_side_counts(vec![5])).unwrap();
        assert_eq!(m.element_count(), 5);
        assert!((m.h_max - 0.4).abs() < 1e-14 && (m.h_min - 0.4).abs() < 1e-14);
    }

    #[test]
    fn polygon_closure_and_orientation() {
        let g = BoundaryGeometry::polygon(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let m = make_mesh(&g, &MeshSpec::algebraic(2.0, 3)).unwrap();
        assert_eq!(m.element_count(), 18);
        let mut s = [0.0, 0.0];
        for e in 0..m.element_count() {
            let (a, b) = m.endpoints(e);
            s = geom::add(s, geom::sub(b, a));
        }
        assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14);
        let c = [1.0 / 3.0, 1.0 / 3.0];
        for e in 0..m.element_count() {
            let (a, _) = m.endpoints(e);
            assert!(geom::dot(m.normal(e), geom::sub(c, a)) > 0.0);
        }
    }

    #[test]
    fn mesh_text_roundtrip() {
        let g = BoundaryGeometry::isosceles_triangle(1.0, 3.0 * std::f64::consts::PI / 8.0).unwrap();
        let m = make_mesh(&g, &MeshSpec::algebraic(3.0, 5).with_side_counts(vec![7, 10, 10])).unwrap();
        let back = BoundaryMesh::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }
}
