//! Integrals of time-lag kernels over pairs of straight elements, weighted by
//! products of Lagrange shape functions.
//!
//! Collinear pairs (including coincident ones) reduce to a one-dimensional
//! convolution in `s = x − ξ`; pairs sharing a vertex use Duffy coordinates;
//! separated pairs use nested adaptive Gauss–Kronrod, split at the wavefronts.
//! The `1/r²` part of the hypersingular kernel is taken as a Hadamard finite
//! part with the cutoff `|x − ξ| > ε`.

use super::rules::{adaptive_gk, gauss_legendre_nodes, gauss_log_nodes_cached};
use super::split::circle_crossings;
use crate::basis::{lagrange_derivatives, lagrange_values};
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::kernels::{
    coeffs_at, contract, kernel_v_regular, kernel_v_sym, v_log_coefficient, RadialCoeffs, WSeries, W_SERIES_RATIO,
};
use crate::model::{BoundaryMesh, Material};

const MAX_SHAPES: usize = 13;
const MAX_PANELS: usize = 400;

/// Straight element with its polynomial degree and mesh node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairElement {
    pub p0: Point,
    pub p1: Point,
    pub degree: usize,
    pub nodes: [usize; 2],
}

impl PairElement {
    pub fn new(p0: Point, p1: Point, degree: usize, nodes: [usize; 2]) -> Self {
        PairElement { p0, p1, degree, nodes }
    }

    pub fn from_mesh(mesh: &BoundaryMesh, e: usize, degree: usize) -> Self {
        let (p0, p1) = mesh.endpoints(e);
        PairElement {
            p0,
            p1,
            degree,
            nodes: mesh.elements[e],
        }
    }

    pub fn length(&self) -> f64 {
        geom::norm(geom::sub(self.p1, self.p0))
    }

    pub fn normal(&self) -> Point {
        let t = geom::sub(self.p1, self.p0);
        let l = geom::norm(t);
        [-t[1] / l, t[0] / l]
    }

    fn point(&self, t: f64) -> Point {
        geom::lerp(self.p0, self.p1, t)
    }

    fn shapes(&self, u: f64) -> [f64; MAX_SHAPES] {
        let mut v = [0.0; MAX_SHAPES];
        lagrange_values(self.degree, u, &mut v);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    /// Both elements on one line; includes coincident and collinear neighbours.
    Collinear,
    /// Sharing exactly one vertex at an angle.
    Adjacent,
    Separated,
}

fn shared_vertex(e1: &PairElement, e2: &PairElement) -> Option<(usize, usize)> {
    let tol = 1e-12 * e1.length().max(e2.length());
    let ends1 = [e1.p0, e1.p1];
    let ends2 = [e2.p0, e2.p1];
    for i in 0..2 {
        for j in 0..2 {
            if geom::norm(geom::sub(ends1[i], ends2[j])) <= tol {
                return Some((i, j));
            }
        }
    }
    None
}

pub fn classify_pair(e1: &PairElement, e2: &PairElement) -> PairClass {
    let l1 = e1.length();
    let d = geom::scale(geom::sub(e1.p1, e1.p0), 1.0 / l1);
    let tol = 1e-10 * l1.max(e2.length());
    let off = |p: Point| geom::cross(d, geom::sub(p, e1.p0)).abs();
    if off(e2.p0) <= tol && off(e2.p1) <= tol {
        PairClass::Collinear
    } else if shared_vertex(e1, e2).is_some() {
        PairClass::Adjacent
    } else {
        PairClass::Separated
    }
}

/// A linear combination `Σ c_k ν(Δ_k)` of kernels at positive time lags.
#[derive(Debug, Clone, PartialEq)]
pub struct LagTerms {
    pub terms: Vec<(f64, f64)>,
}

impl LagTerms {
    pub fn single(delta: f64) -> Self {
        LagTerms {
            terms: vec![(1.0, delta)],
        }
    }

    /// `Σ_{ξ,ς} (−1)^{ξ+ς} ν((l + ξ − ς) Δt)` with non-positive lags dropped.
    pub fn lag(l: usize, dt: f64) -> Self {
        let mut terms = vec![(-1.0, (l + 1) as f64 * dt)];
        if l >= 1 {
            terms.push((2.0, l as f64 * dt));
        }
        if l >= 2 {
            terms.push((-1.0, (l - 1) as f64 * dt));
        }
        LagTerms { terms }
    }

    pub fn delta_min(&self) -> f64 {
        self.terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min)
    }

    pub fn delta_max(&self) -> f64 {
        self.terms.iter().map(|t| t.1).fold(0.0, f64::max)
    }

    pub fn fronts(&self, m: &Material) -> Vec<f64> {
        let mut f: Vec<f64> = self.terms.iter().flat_map(|t| [m.c_s * t.1, m.c_p * t.1]).collect();
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    }
}

/// Kernel on `r_vec = x − ξ` as components `[11, 12, 21, 22]`.
pub(crate) trait PairKernel: Sync {
    fn eval(&self, r_vec: Point, out: &mut [f64; 4]);
    fn fronts(&self) -> &[f64];
    /// Radius below which `split` is valid.
    fn split_radius(&self) -> f64;
    /// `[a, b, reg]` with kernel `= a / r² + b log r + reg` along direction `e`.
    fn split(&self, e: Point, r: f64) -> [[f64; 4]; 3];
}

pub(crate) struct SingleLayerLag<'a> {
    terms: &'a [(f64, f64)],
    mat: &'a Material,
    fronts: Vec<f64>,
    split_r: f64,
    log_coef: f64,
}

impl<'a> SingleLayerLag<'a> {
    pub(crate) fn new(terms: &'a LagTerms, mat: &'a Material) -> Self {
        SingleLayerLag {
            terms: &terms.terms,
            mat,
            fronts: terms.fronts(mat),
            split_r: W_SERIES_RATIO * mat.c_s * terms.delta_min(),
            log_coef: v_log_coefficient(mat) * terms.terms.iter().map(|t| t.0).sum::<f64>(),
        }
    }
}

impl PairKernel for SingleLayerLag<'_> {
    #[inline]
    fn eval(&self, r_vec: Point, out: &mut [f64; 4]) {
        let mut acc = [0.0; 3];
        for &(c, d) in self.terms {
            let v = kernel_v_sym(r_vec, d, self.mat);
            for k in 0..3 {
                acc[k] += c * v[k];
            }
        }
        *out = [acc[0], acc[1], acc[1], acc[2]];
    }

    fn fronts(&self) -> &[f64] {
        &self.fronts
    }

    fn split_radius(&self) -> f64 {
        self.split_r
    }

    fn split(&self, e: Point, r: f64) -> [[f64; 4]; 3] {
        let rv = geom::scale(e, r);
        let mut reg = [0.0; 3];
        for &(c, d) in self.terms {
            let v = kernel_v_regular(rv, d, self.mat);
            for k in 0..3 {
                reg[k] += c * v[k];
            }
        }
        [
            [0.0; 4],
            [self.log_coef, 0.0, 0.0, self.log_coef],
            [reg[0], reg[1], reg[1], reg[2]],
        ]
    }
}

pub(crate) struct HypersingularLag<'a> {
    terms: Vec<(f64, &'a WSeries)>,
    mat: &'a Material,
    n: Point,
    m: Point,
    fronts: Vec<f64>,
    split_r: f64,
}

impl<'a> HypersingularLag<'a> {
    /// `series[k]` must be the expansion for `terms.terms[k].1`.
    pub(crate) fn new(terms: &LagTerms, series: &[&'a WSeries], mat: &'a Material, n: Point, m: Point) -> Self {
        HypersingularLag {
            terms: terms.terms.iter().zip(series).map(|(t, s)| (t.0, *s)).collect(),
            mat,
            n,
            m,
            fronts: terms.fronts(mat),
            split_r: W_SERIES_RATIO * mat.c_s * terms.delta_min(),
        }
    }

    fn to_components(&self, c: &RadialCoeffs, e: Point) -> [f64; 4] {
        let w = contract(c, e, self.n, self.m, self.mat);
        [w[0][0], w[0][1], w[1][0], w[1][1]]
    }
}

impl PairKernel for HypersingularLag<'_> {
    fn eval(&self, r_vec: Point, out: &mut [f64; 4]) {
        let r = geom::norm(r_vec);
        let mut acc = RadialCoeffs::default();
        let mut any = false;
        for &(c, s) in &self.terms {
            if r < self.mat.c_p * s.delta {
                acc.axpy(c, &coeffs_at(r, s.delta, self.mat, Some(s)));
                any = true;
            }
        }
        *out = if any && r > 0.0 {
            self.to_components(&acc, [r_vec[0] / r, r_vec[1] / r])
        } else {
            [0.0; 4]
        };
    }

    fn fronts(&self) -> &[f64] {
        &self.fronts
    }

    fn split_radius(&self) -> f64 {
        self.split_r
    }

    fn split(&self, e: Point, r: f64) -> [[f64; 4]; 3] {
        let mut parts = [RadialCoeffs::default(); 3];
        for &(c, s) in &self.terms {
            let sp = s.split(r);
            parts[0].axpy(c, &sp.a);
            parts[1].axpy(c, &sp.b);
            parts[2].axpy(c, &sp.reg);
        }
        [
            self.to_components(&parts[0], e),
            self.to_components(&parts[1], e),
            self.to_components(&parts[2], e),
        ]
    }
}

/// Pair integrals for all local shape pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairIntegral {
    pub na: usize,
    pub nb: usize,
    /// `values[c * na * nb + a * nb + b]` with `c` over `[11, 12, 21, 22]`.
    pub values: Vec<f64>,
    pub error: f64,
}

impl PairIntegral {
    pub(crate) fn zeros(na: usize, nb: usize) -> Self {
        PairIntegral {
            na,
            nb,
            values: vec![0.0; 4 * na * nb],
            error: 0.0,
        }
    }

    pub fn block(&self, a: usize, b: usize) -> [[f64; 2]; 2] {
        let nab = self.na * self.nb;
        let g = |c: usize| self.values[c * nab + a * self.nb + b];
        [[g(0), g(1)], [g(2), g(3)]]
    }

    fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Clone, Copy)]
enum EndMap {
    Plain,
    Left,
    Right,
    Both,
}

/// Maps `τ ∈ [0, 1]` onto `[u, v]`, flattening square-root endpoint behaviour.
#[inline]
fn map_unit(u: f64, v: f64, kind: EndMap, tau: f64) -> (f64, f64) {
    let h = v - u;
    match kind {
        EndMap::Plain => (u + h * tau, h),
        EndMap::Left => (u + h * tau * tau, 2.0 * h * tau),
        EndMap::Right => {
            let w = 1.0 - tau;
            (v - h * w * w, 2.0 * h * w)
        }
        EndMap::Both => (u + h * tau * tau * (3.0 - 2.0 * tau), 6.0 * h * tau * (1.0 - tau)),
    }
}

fn end_map(left: bool, right: bool) -> EndMap {
    match (left, right) {
        (false, false) => EndMap::Plain,
        (true, false) => EndMap::Left,
        (false, true) => EndMap::Right,
        (true, true) => EndMap::Both,
    }
}

fn sorted_cuts(mut v: Vec<f64>, lo: f64, hi: f64, eps: f64) -> Vec<f64> {
    v.retain(|&x| x >= lo && x <= hi);
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= eps);
    if let Some(l) = v.last_mut() {
        *l = hi;
    }
    v[0] = lo;
    v
}

struct Collinear<'a> {
    e1: &'a PairElement,
    e2: &'a PairElement,
    l1: f64,
    d: Point,
    y0: f64,
    y1: f64,
    lo2: f64,
    hi2: f64,
    eps: f64,
}

impl<'a> Collinear<'a> {
    fn new(e1: &'a PairElement, e2: &'a PairElement) -> Self {
        let l1 = e1.length();
        let d = geom::scale(geom::sub(e1.p1, e1.p0), 1.0 / l1);
        let y0 = geom::dot(geom::sub(e2.p0, e1.p0), d);
        let y1 = geom::dot(geom::sub(e2.p1, e1.p0), d);
        Collinear {
            e1,
            e2,
            l1,
            d,
            y0,
            y1,
            lo2: y0.min(y1),
            hi2: y0.max(y1),
            eps: 1e-12 * l1.max((y1 - y0).abs()),
        }
    }

    fn u2(&self, y: f64) -> f64 {
        ((y - self.y0) / (self.y1 - self.y0)).clamp(0.0, 1.0)
    }

    fn gauss_order(&self) -> usize {
        (self.e1.degree + self.e2.degree) / 2 + 1
    }

    /// `C_ab(s) = ∫ N_a(x) N_b(x − s) dx` over the overlap.
    fn conv(&self, s: f64, out: &mut [f64]) {
        let nb = self.e2.degree + 1;
        out.iter_mut().for_each(|v| *v = 0.0);
        let xlo = (self.lo2 + s).max(0.0);
        let xhi = (self.hi2 + s).min(self.l1);
        if xhi <= xlo {
            return;
        }
        let (xs, ws) = gauss_legendre_nodes(self.gauss_order());
        let h = xhi - xlo;
        for (t, w) in xs.iter().zip(ws) {
            let x = xlo + h * t;
            let n1 = self.e1.shapes((x / self.l1).clamp(0.0, 1.0));
            let n2 = self.e2.shapes(self.u2(x - s));
            for a in 0..=self.e1.degree {
                let fa = w * h * n1[a];
                for b in 0..nb {
                    out[a * nb + b] += fa * n2[b];
                }
            }
        }
    }

    /// One-sided derivative `C'(0^σ)`.
    fn conv_derivative(&self, sigma: f64, out: &mut [f64]) {
        let nb = self.e2.degree + 1;
        let (l1, eps) = (self.l1, self.eps);
        out.iter_mut().for_each(|v| *v = 0.0);
        let xlo = self.lo2.max(0.0);
        let xhi = self.hi2.min(l1);
        let hi_moves = if self.hi2 < l1 - eps {
            true
        } else if self.hi2 > l1 + eps {
            false
        } else {
            sigma < 0.0
        };
        let lo_moves = if self.lo2 > eps {
            true
        } else if self.lo2 < -eps {
            false
        } else {
            sigma > 0.0
        };
        let boundary = |x: f64, sign: f64, out: &mut [f64]| {
            let n1 = self.e1.shapes((x / l1).clamp(0.0, 1.0));
            let n2 = self.e2.shapes(self.u2(x));
            for a in 0..=self.e1.degree {
                for b in 0..nb {
                    out[a * nb + b] += sign * n1[a] * n2[b];
                }
            }
        };
        if hi_moves {
            boundary(xhi, 1.0, out);
        }
        if lo_moves {
            boundary(xlo, -1.0, out);
        }
        if xhi > xlo {
            let (xs, ws) = gauss_legendre_nodes(self.gauss_order());
            let h = xhi - xlo;
            let dy = self.y1 - self.y0;
            let mut dn2 = [0.0; MAX_SHAPES];
            for (t, w) in xs.iter().zip(ws) {
                let x = xlo + h * t;
                let n1 = self.e1.shapes((x / l1).clamp(0.0, 1.0));
                lagrange_derivatives(self.e2.degree, self.u2(x), &mut dn2);
                for a in 0..=self.e1.degree {
                    for b in 0..nb {
                        out[a * nb + b] -= w * h * n1[a] * dn2[b] / dy;
                    }
                }
            }
        }
    }
}

fn collinear(k: &dyn PairKernel, e1: &PairElement, e2: &PairElement, tol: f64) -> PairIntegral {
    let g = Collinear::new(e1, e2);
    let (na, nb) = (e1.degree + 1, e2.degree + 1);
    let nab = na * nb;
    let mut res = PairIntegral::zeros(na, nb);
    let eps = g.eps;
    let (smin, smax) = (-g.hi2, g.l1 - g.lo2);
    let touching = smin <= eps && smax >= -eps;
    let fronts = k.fronts();
    let max_front = fronts.iter().cloned().fold(0.0, f64::max);
    let mut cuts = vec![-g.hi2, -g.lo2, g.l1 - g.hi2, g.l1 - g.lo2];
    for &r in fronts {
        cuts.push(r);
        cuts.push(-r);
    }
    let split_r = k.split_radius();
    if touching {
        cuts.extend([0.0, split_r, -split_r]);
    }
    let mut cuts = sorted_cuts(cuts, smin, smax, eps);
    if touching {
        for c in cuts.iter_mut() {
            if c.abs() <= eps {
                *c = 0.0;
            }
        }
    }
    let is_front = |s: f64| fronts.iter().any(|&r| (s.abs() - r).abs() <= eps);
    let mut cbuf = vec![0.0; nab];
    let mut kv = [0.0; 4];
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v - u <= eps || 0.5 * (u + v).abs() >= max_front {
            continue;
        }
        if touching && u == 0.0 && v <= split_r * (1.0 + 1e-12) {
            collinear_singular(k, &g, 1.0, v, &mut res.values);
            continue;
        }
        if touching && v == 0.0 && -u <= split_r * (1.0 + 1e-12) {
            collinear_singular(k, &g, -1.0, -u, &mut res.values);
            continue;
        }
        let map = end_map(is_front(u), is_front(v));
        let piece = adaptive_gk(
            |tau, out| {
                let (s, jac) = map_unit(u, v, map, tau);
                g.conv(s, &mut cbuf);
                k.eval(geom::scale(g.d, s), &mut kv);
                for c in 0..4 {
                    for ab in 0..nab {
                        out[c * nab + ab] = jac * kv[c] * cbuf[ab];
                    }
                }
            },
            0.0,
            1.0,
            4 * nab,
            tol,
            0.0,
            MAX_PANELS,
        );
        for (o, p) in res.values.iter_mut().zip(&piece.value) {
            *o += p;
        }
        res.error += piece.error;
    }
    res
}

/// `∫_0^v k(σρ) C(σρ) dρ` through the `a / ρ² + b log ρ + reg` decomposition.
fn collinear_singular(k: &dyn PairKernel, g: &Collinear, sigma: f64, v: f64, out: &mut [f64]) {
    let nab = (g.e1.degree + 1) * (g.e2.degree + 1);
    let e = geom::scale(g.d, sigma);
    let mut c0 = vec![0.0; nab];
    let mut c1 = vec![0.0; nab];
    let mut cq = vec![0.0; nab];
    g.conv(0.0, &mut c0);
    g.conv_derivative(sigma, &mut c1);
    c1.iter_mut().for_each(|x| *x *= sigma);
    let a = k.split(e, 0.5 * v)[0];
    let lv = v.ln();
    let mut fp: Vec<f64> = (0..nab).map(|ab| -c0[ab] / v + c1[ab] * lv).collect();
    let (xs, ws) = gauss_legendre_nodes(16);
    for (t, w) in xs.iter().zip(ws) {
        let rho = v * t;
        g.conv(sigma * rho, &mut cq);
        let [_, b, reg] = k.split(e, rho);
        for ab in 0..nab {
            fp[ab] += w * v * (cq[ab] - c0[ab] - c1[ab] * rho) / (rho * rho);
            for c in 0..4 {
                out[c * nab + ab] += w * v * (lv * b[c] + reg[c]) * cq[ab];
            }
        }
    }
    let (xs, ws) = gauss_log_nodes_cached(16);
    for (t, w) in xs.iter().zip(ws) {
        let rho = v * t;
        g.conv(sigma * rho, &mut cq);
        let b = k.split(e, rho)[1];
        for ab in 0..nab {
            for c in 0..4 {
                out[c * nab + ab] -= w * v * b[c] * cq[ab];
            }
        }
    }
    if a.iter().any(|&x| x != 0.0) {
        for ab in 0..nab {
            for c in 0..4 {
                out[c * nab + ab] += a[c] * fp[ab];
            }
        }
    }
}

/// Outer parameters on `e1` where the inner integral over `e2` changes its front structure.
fn outer_breaks(e1: &PairElement, e2: &PairElement, fronts: &[f64]) -> Vec<f64> {
    let mut t = Vec::new();
    let l2 = e2.length();
    let d2 = geom::scale(geom::sub(e2.p1, e2.p0), 1.0 / l2);
    let n2 = [-d2[1], d2[0]];
    let sd0 = geom::dot(geom::sub(e1.p0, e2.p0), n2);
    let sd1 = geom::dot(geom::sub(e1.p1, e2.p0), n2);
    for &r in fronts {
        t.extend(circle_crossings(e1.p0, e1.p1, e2.p0, r));
        t.extend(circle_crossings(e1.p0, e1.p1, e2.p1, r));
        if sd1 != sd0 {
            for sgn in [-1.0, 1.0] {
                let tt = (sgn * r - sd0) / (sd1 - sd0);
                if tt > 0.0 && tt < 1.0 {
                    let foot = geom::dot(geom::sub(e1.point(tt), e2.p0), d2) / l2;
                    if foot > 0.0 && foot < 1.0 {
                        t.push(tt);
                    }
                }
            }
        }
    }
    t
}

/// `∫_{e2} k(x − ξ) N_b(ξ) dΓ_ξ` for all `b`, as `out[c * nb + b]`.
fn inner_integral(k: &dyn PairKernel, x: Point, e2: &PairElement, tol: f64, out: &mut [f64]) -> f64 {
    let nb = e2.degree + 1;
    let l2 = e2.length();
    let fronts = k.fronts();
    let max_front = fronts.iter().cloned().fold(0.0, f64::max);
    let mut cuts = Vec::new();
    for &r in fronts {
        cuts.extend(circle_crossings(e2.p0, e2.p1, x, r));
    }
    let cuts = sorted_cuts(cuts, 0.0, 1.0, 1e-14);
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut err = 0.0;
    let is_front = |t: f64| t > 0.0 && t < 1.0;
    let mut kv = [0.0; 4];
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if geom::norm(geom::sub(x, e2.point(0.5 * (u + v)))) >= max_front {
            continue;
        }
        let map = end_map(is_front(u), is_front(v));
        let piece = adaptive_gk(
            |tau, o| {
                let (t, jac) = map_unit(u, v, map, tau);
                let xi = e2.point(t);
                k.eval(geom::sub(x, xi), &mut kv);
                let n2 = e2.shapes(t);
                for c in 0..4 {
                    for b in 0..nb {
                        o[c * nb + b] = jac * l2 * kv[c] * n2[b];
                    }
                }
            },
            0.0,
            1.0,
            4 * nb,
            tol,
            0.0,
            MAX_PANELS,
        );
        for (o, p) in out.iter_mut().zip(&piece.value) {
            *o += p;
        }
        err += piece.error;
    }
    err
}

fn separated(k: &dyn PairKernel, e1: &PairElement, e2: &PairElement, tol: f64) -> PairIntegral {
    let (na, nb) = (e1.degree + 1, e2.degree + 1);
    let nab = na * nb;
    let mut res = PairIntegral::zeros(na, nb);
    let max_front = k.fronts().iter().cloned().fold(0.0, f64::max);
    if geom::segment_distance(e1.p0, e1.p1, e2.p0, e2.p1) >= max_front {
        return res;
    }
    let l1 = e1.length();
    let cuts = sorted_cuts(outer_breaks(e1, e2, k.fronts()), 0.0, 1.0, 1e-14);
    let mut inner = vec![0.0; 4 * nb];
    let mut inner_err = 0.0;
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        let map = end_map(u > 0.0, v < 1.0);
        let piece = adaptive_gk(
            |tau, o| {
                let (t, jac) = map_unit(u, v, map, tau);
                let x = e1.point(t);
                inner_err += jac * l1 * inner_integral(k, x, e2, 0.1 * tol, &mut inner);
                let n1 = e1.shapes(t);
                for c in 0..4 {
                    for a in 0..na {
                        for b in 0..nb {
                            o[c * nab + a * nb + b] = jac * l1 * n1[a] * inner[c * nb + b];
                        }
                    }
                }
            },
            0.0,
            1.0,
            4 * nab,
            tol,
            0.0,
            MAX_PANELS,
        );
        for (o, p) in res.values.iter_mut().zip(&piece.value) {
            *o += p;
        }
        res.error += piece.error;
    }
    // inner errors are accumulated over all outer samples, including Kronrod weights only loosely
    res.error += 0.1 * inner_err.min(res.abs_sum() * tol);
    res
}

fn adjacent(k: &dyn PairKernel, e1: &PairElement, e2: &PairElement, tol: f64) -> PairIntegral {
    let (na, nb) = (e1.degree + 1, e2.degree + 1);
    let nab = na * nb;
    let mut res = PairIntegral::zeros(na, nb);
    let (i1, i2) = shared_vertex(e1, e2).expect("adjacent pair shares a vertex");
    let vtx = if i1 == 0 { e1.p0 } else { e1.p1 };
    let far1 = if i1 == 0 { e1.p1 } else { e1.p0 };
    let far2 = if i2 == 0 { e2.p1 } else { e2.p0 };
    let d1 = geom::sub(far1, vtx);
    let d2 = geom::sub(far2, vtx);
    let (l1, l2) = (e1.length(), e2.length());
    let loc1 = |u: f64| if i1 == 0 { u } else { 1.0 - u };
    let loc2 = |v: f64| if i2 == 0 { v } else { 1.0 - v };
    let nv1 = e1.shapes(loc1(0.0));
    let nv2 = e2.shapes(loc2(0.0));
    let fronts = k.fronts().to_vec();
    let split_r = k.split_radius();
    let (gx, gw) = gauss_legendre_nodes(12);
    let mut kv = [0.0; 4];
    for tri in 0..2 {
        // r_vec = ρ q(η), (u, v) = (ρ, ρη) or (ρη, ρ)
        let q0 = if tri == 0 { d1 } else { geom::scale(d2, -1.0) };
        let q1 = geom::sub(d1, d2);
        let q = |eta: f64| geom::lerp(q0, q1, eta);
        let uv = |rho: f64, eta: f64| if tri == 0 { (rho, rho * eta) } else { (rho * eta, rho) };
        let (n0, n1) = (geom::norm(q0), geom::norm(q1));
        let qmax = n0.max(n1);
        let qmin = geom::point_segment_distance([0.0, 0.0], q0, q1);
        let rho1 = (split_r / qmax).min(1.0);
        // near the vertex: subtract the a/r² term against the vertex shape values,
        // graded levels in ρ, adaptive in η split where |q| is smallest
        let dq = geom::sub(q1, q0);
        let eta_star = (-geom::dot(q0, dq) / geom::dot(dq, dq)).clamp(0.0, 1.0);
        let eta_cuts = sorted_cuts(vec![eta_star], 0.0, 1.0, 1e-12);
        for ew in eta_cuts.windows(2) {
            let piece = adaptive_gk(
                |eta, o| {
                    o.iter_mut().for_each(|x| *x = 0.0);
                    let qe = q(eta);
                    let qn = geom::norm(qe);
                    let e = geom::scale(qe, 1.0 / qn);
                    let sg: f64 = 0.3;
                    let mut hi = rho1;
                    while hi > 1e-14 * rho1 {
                        let lo = hi * sg;
                        for (t, w) in gx.iter().zip(gw) {
                            let rho = lo + (hi - lo) * t;
                            let wr = w * (hi - lo) * rho;
                            let r = rho * qn;
                            let [a, b, reg] = k.split(e, r);
                            let (u, v) = uv(rho, eta);
                            let s1 = e1.shapes(loc1(u));
                            let s2 = e2.shapes(loc2(v));
                            let lr = r.ln();
                            for aa in 0..na {
                                for bb in 0..nb {
                                    let nn = s1[aa] * s2[bb];
                                    let dn = nn - nv1[aa] * nv2[bb];
                                    for c in 0..4 {
                                        o[c * nab + aa * nb + bb] +=
                                            wr * (a[c] / (r * r) * dn + (b[c] * lr + reg[c]) * nn);
                                    }
                                }
                            }
                        }
                        hi = lo;
                    }
                    let a = k.split(e, 0.5 * split_r)[0];
                    let fac = (rho1.ln() + qn.ln()) / (qn * qn);
                    for aa in 0..na {
                        for bb in 0..nb {
                            for c in 0..4 {
                                o[c * nab + aa * nb + bb] += fac * a[c] * nv1[aa] * nv2[bb];
                            }
                        }
                    }
                },
                ew[0],
                ew[1],
                4 * nab,
                0.1 * tol,
                0.0,
                MAX_PANELS,
            );
            for (o, p) in res.values.iter_mut().zip(&piece.value) {
                *o += p;
            }
            res.error += piece.error;
        }
        if rho1 >= 1.0 {
            continue;
        }
        let mut cuts = Vec::new();
        for &r in &fronts {
            for qq in [n0, n1, qmin] {
                if qq > 0.0 {
                    cuts.push(r / qq);
                }
            }
        }
        let cuts = sorted_cuts(cuts, rho1, 1.0, 1e-14);
        let max_front = fronts.iter().cloned().fold(0.0, f64::max);
        for w in cuts.windows(2) {
            let (ru, rv) = (w[0], w[1]);
            if ru * qmin >= max_front {
                continue;
            }
            let map = end_map(ru > rho1, rv < 1.0);
            let piece = adaptive_gk(
                |tau, o| {
                    let (rho, jac) = map_unit(ru, rv, map, tau);
                    o.iter_mut().for_each(|x| *x = 0.0);
                    let mut ec = Vec::new();
                    for &r in &fronts {
                        ec.extend(circle_crossings(q0, q1, [0.0, 0.0], r / rho));
                    }
                    let ec = sorted_cuts(ec, 0.0, 1.0, 1e-14);
                    for ew in ec.windows(2) {
                        let (eu, ev) = (ew[0], ew[1]);
                        let emid = geom::norm(q(0.5 * (eu + ev))) * rho;
                        if emid >= max_front {
                            continue;
                        }
                        let emap = end_map(eu > 0.0, ev < 1.0);
                        let inner = adaptive_gk(
                            |s, oo| {
                                let (eta, ej) = map_unit(eu, ev, emap, s);
                                k.eval(geom::scale(q(eta), rho), &mut kv);
                                let (u, v) = uv(rho, eta);
                                let s1 = e1.shapes(loc1(u));
                                let s2 = e2.shapes(loc2(v));
                                for aa in 0..na {
                                    for bb in 0..nb {
                                        let nn = ej * rho * s1[aa] * s2[bb];
                                        for c in 0..4 {
                                            oo[c * nab + aa * nb + bb] = kv[c] * nn;
                                        }
                                    }
                                }
                            },
                            0.0,
                            1.0,
                            4 * nab,
                            0.1 * tol,
                            0.0,
                            MAX_PANELS,
                        );
                        for (x, y) in o.iter_mut().zip(&inner.value) {
                            *x += jac * y;
                        }
                    }
                },
                0.0,
                1.0,
                4 * nab,
                tol,
                0.0,
                MAX_PANELS,
            );
            for (o, p) in res.values.iter_mut().zip(&piece.value) {
                *o += p;
            }
            res.error += piece.error;
        }
    }
    let jac = l1 * l2;
    res.values.iter_mut().for_each(|v| *v *= jac);
    res.error *= jac;
    res
}

/// Tensor Gauss rule of order `n`; accurate only for separated pairs away from the fronts.
pub(crate) fn fixed_tensor(k: &dyn PairKernel, e1: &PairElement, e2: &PairElement, n: usize) -> PairIntegral {
    let (na, nb) = (e1.degree + 1, e2.degree + 1);
    let nab = na * nb;
    let mut res = PairIntegral::zeros(na, nb);
    let (xs, ws) = gauss_legendre_nodes(n);
    let jac = e1.length() * e2.length();
    let s2: Vec<[f64; MAX_SHAPES]> = xs.iter().map(|&t| e2.shapes(t)).collect();
    let p2: Vec<Point> = xs.iter().map(|&t| e2.point(t)).collect();
    let mut kv = [0.0; 4];
    let mut row = vec![0.0; 4 * nb];
    for (t1, w1) in xs.iter().zip(ws) {
        let x = e1.point(*t1);
        let s1 = e1.shapes(*t1);
        row.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            k.eval(geom::sub(x, p2[j]), &mut kv);
            for c in 0..4 {
                for b in 0..nb {
                    row[c * nb + b] += ws[j] * kv[c] * s2[j][b];
                }
            }
        }
        for c in 0..4 {
            for a in 0..na {
                for b in 0..nb {
                    res.values[c * nab + a * nb + b] += jac * w1 * s1[a] * row[c * nb + b];
                }
            }
        }
    }
    res
}

/// Whether the tensor rule can be used: separated by more than the element sizes and
/// no front within one element size of the distance range.
pub(crate) fn is_smooth_pair(e1: &PairElement, e2: &PairElement, fronts: &[f64]) -> bool {
    let h = e1.length().max(e2.length());
    let dmin = geom::segment_distance(e1.p0, e1.p1, e2.p0, e2.p1);
    if dmin < 1.5 * h {
        return false;
    }
    let dmax = geom::segment_max_distance(e1.p0, e1.p1, e2.p0, e2.p1);
    fronts.iter().all(|&r| r >= dmax + h || r <= dmin - h)
}

/// Tensor order used on smooth pairs.
pub(crate) fn smooth_order(e1: &PairElement, e2: &PairElement) -> usize {
    8 + (e1.degree + e2.degree) / 2
}

pub(crate) fn integrate_with(
    k: &dyn PairKernel,
    e1: &PairElement,
    e2: &PairElement,
    tol: f64,
) -> Result<PairIntegral> {
    if e1.degree + 1 > MAX_SHAPES || e2.degree + 1 > MAX_SHAPES {
        return Err(Error::Space("degree above 12".into()));
    }
    let res = match classify_pair(e1, e2) {
        PairClass::Collinear => collinear(k, e1, e2, tol),
        PairClass::Adjacent => adjacent(k, e1, e2, tol),
        PairClass::Separated => separated(k, e1, e2, tol),
    };
    let scale = res.abs_sum();
    if !res.values.iter().all(|v| v.is_finite()) {
        return Err(Error::Accuracy {
            context: "element pair".into(),
            estimate: f64::NAN,
            error: f64::INFINITY,
        });
    }
    if res.error > 1e3 * tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Accuracy {
            context: "element pair".into(),
            estimate: scale,
            error: res.error,
        });
    }
    Ok(res)
}

fn check_shapes(outer: &PairElement, inner: &PairElement, shape_pair: (usize, usize), delta: f64) -> Result<()> {
    if shape_pair.0 > outer.degree || shape_pair.1 > inner.degree {
        return Err(Error::Index(format!("shape pair {shape_pair:?}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("time lag {delta} must be positive")));
    }
    Ok(())
}

/// `∫∫ w_a(x) w_b(ξ) ν^V(x − ξ; Δ)` over the element pair.
pub fn integrate_pair_v(
    outer: &PairElement,
    inner: &PairElement,
    shape_pair: (usize, usize),
    delta: f64,
    material: &Material,
    tol: f64,
) -> Result<[[f64; 2]; 2]> {
    check_shapes(outer, inner, shape_pair, delta)?;
    let terms = LagTerms::single(delta);
    let k = SingleLayerLag::new(&terms, material);
    Ok(integrate_with(&k, outer, inner, tol)?.block(shape_pair.0, shape_pair.1))
}

/// Finite-part `∫∫ w_a(x) w_b(ξ) ν^W(x − ξ; Δ)` over the element pair.
pub fn integrate_pair_w(
    outer: &PairElement,
    inner: &PairElement,
    shape_pair: (usize, usize),
    delta: f64,
    material: &Material,
    tol: f64,
) -> Result<[[f64; 2]; 2]> {
    check_shapes(outer, inner, shape_pair, delta)?;
    let terms = LagTerms::single(delta);
    let series = WSeries::new(delta, material);
    let k = HypersingularLag::new(&terms, &[&series], material, outer.normal(), inner.normal());
    Ok(integrate_with(&k, outer, inner, tol)?.block(shape_pair.0, shape_pair.1))
}
