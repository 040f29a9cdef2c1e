//! Toeplitz block assembly of the energetic Galerkin systems and their right-hand sides.

use crate::basis::BasisSpace;
use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::kernels::WSeries;
use crate::model::{Material, TimeGrid};
use crate::quadrature::{
    classify_pair, fixed_tensor, gauss_legendre_nodes, integrate_with, is_smooth_pair, smooth_order, HypersingularLag, LagTerms,
    PairClass, PairElement, PairIntegral, PairKernel, SingleLayerLag,
};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnknownKind {
    /// Traction Φ of the single-layer equation; piecewise constant in time.
    DirichletTraction,
    /// Displacement jump Ψ of the hypersingular equation; ramp basis in time.
    NeumannDisplacement,
}

/// Lower-triangular block Toeplitz matrix of a space-time discretization.
#[derive(Debug, Clone)]
pub struct ToeplitzBlockSystem {
    /// `blocks[l]` couples steps `n` and `n − l`; indices are `i * M + m` for component `i`.
    pub blocks: Vec<DMatrix<f64>>,
    pub unknown_kind: UnknownKind,
    pub space: BasisSpace,
    pub time: TimeGrid,
    pub material: Material,
}

impl ToeplitzBlockSystem {
    pub fn size(&self) -> usize {
        2 * self.space.dof_count
    }

    /// `Σ_k E^(k) x_(n−k)` over `k ≤ n`.
    pub fn apply_row(&self, x: &[DVector<f64>], n: usize) -> DVector<f64> {
        let mut y = DVector::zeros(self.size());
        for k in 0..=n.min(self.blocks.len() - 1) {
            y.gemv(1.0, &self.blocks[k], &x[n - k], 1.0);
        }
        y
    }
}

/// Right-hand side vectors, one per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsHistory {
    pub vectors: Vec<DVector<f64>>,
}

#[derive(Clone)]
pub enum TemporalProfile {
    /// `H[t]`.
    Step,
    /// `sin²(4πt)` on `[0, 1/8]`, then 1.
    SmoothOnset,
    /// `min(t / width, 1)`.
    Ramp { width: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for TemporalProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TemporalProfile::Step => write!(f, "Step"),
            TemporalProfile::SmoothOnset => write!(f, "SmoothOnset"),
            TemporalProfile::Ramp { width } => write!(f, "Ramp {{ width: {width} }}"),
            TemporalProfile::Custom(_) => write!(f, "Custom"),
        }
    }
}

const ONSET: f64 = 0.125;

impl TemporalProfile {
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            TemporalProfile::Step => 1.0,
            TemporalProfile::SmoothOnset => {
                if t < ONSET {
                    (4.0 * PI * t).sin().powi(2)
                } else {
                    1.0
                }
            }
            TemporalProfile::Ramp { width } => (t / width).min(1.0),
            TemporalProfile::Custom(f) => f(t),
        }
    }

    /// `∫_0^t f`.
    fn primitive(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        match self {
            TemporalProfile::Step => Some(t),
            TemporalProfile::SmoothOnset => {
                let s = |u: f64| 0.5 * u - (8.0 * PI * u).sin() / (16.0 * PI);
                Some(if t < ONSET { s(t) } else { s(ONSET) + (t - ONSET) })
            }
            TemporalProfile::Ramp { width } => Some(if t < *width {
                0.5 * t * t / width
            } else {
                0.5 * width + (t - width)
            }),
            TemporalProfile::Custom(_) => None,
        }
    }

    /// Mean value over `[t0, t1]`.
    pub fn slab_mean(&self, t0: f64, t1: f64) -> f64 {
        if let (Some(a), Some(b)) = (self.primitive(t0), self.primitive(t1)) {
            return (b - a) / (t1 - t0);
        }
        let (x, w) = gauss_legendre_nodes(16);
        x.iter().zip(w).map(|(u, w)| w * self.value(t0 + u * (t1 - t0))).sum()
    }
}

/// Spatial factor as a function of the abscissa `x` of the boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpatialProfile {
    Constant,
    /// `x^k`.
    Monomial(i32),
    /// `|x|^e`, integrated separately on both sides of `x = 0`.
    AbsPower(f64),
}

impl SpatialProfile {
    pub fn value(&self, p: Point) -> f64 {
        match *self {
            SpatialProfile::Constant => 1.0,
            SpatialProfile::Monomial(k) => p[0].powi(k),
            SpatialProfile::AbsPower(e) => p[0].abs().powf(e),
        }
    }
}

/// `scale · f(t) · s(x)` for one component.
#[derive(Debug, Clone)]
pub struct SeparableComponent {
    pub scale: f64,
    pub spatial: SpatialProfile,
    pub temporal: TemporalProfile,
}

pub type FieldFn = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;

/// Prescribed boundary data `g̃_i` (or `h̃_i`); zero for `t ≤ 0`.
#[derive(Clone)]
pub enum BoundaryDatum {
    Separable([Option<SeparableComponent>; 2]),
    Field(FieldFn),
}

impl std::fmt::Debug for BoundaryDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryDatum::Separable(c) => f.debug_tuple("Separable").field(c).finish(),
            BoundaryDatum::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl BoundaryDatum {
    pub fn zero() -> Self {
        BoundaryDatum::Separable([None, None])
    }

    pub fn component(i: usize, scale: f64, spatial: SpatialProfile, temporal: TemporalProfile) -> Self {
        let mut c = [None, None];
        c[i] = Some(SeparableComponent {
            scale,
            spatial,
            temporal,
        });
        BoundaryDatum::Separable(c)
    }

    pub fn both(scale: f64, spatial: SpatialProfile, temporal: TemporalProfile) -> Self {
        let c = SeparableComponent {
            scale,
            spatial,
            temporal,
        };
        BoundaryDatum::Separable([Some(c.clone()), Some(c)])
    }

    pub fn value(&self, p: Point, t: f64) -> [f64; 2] {
        if t <= 0.0 {
            return [0.0; 2];
        }
        match self {
            BoundaryDatum::Separable(c) => {
                let f = |k: usize| {
                    c[k].as_ref()
                        .map_or(0.0, |c| c.scale * c.temporal.value(t) * c.spatial.value(p))
                };
                [f(0), f(1)]
            }
            BoundaryDatum::Field(g) => g(p, t),
        }
    }
}

/// Blocks from the binary cache are only reused when every field matches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheKey {
    pub mesh_hash: u64,
    pub degree_hash: u64,
    pub dt: f64,
    pub material: [f64; 3],
    pub tol: f64,
    pub kind: UnknownKind,
}

impl CacheKey {
    pub fn of(space: &BasisSpace, time: &TimeGrid, material: &Material, kind: UnknownKind, tol: f64) -> Self {
        let mut h: u64 = 0xcbf29ce484222325;
        let extra = [space.continuity as u64];
        for d in space.degrees.iter().map(|&d| d as u64).chain(extra) {
            for b in d.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        CacheKey {
            mesh_hash: space.mesh.fingerprint(),
            degree_hash: h,
            dt: time.dt,
            material: [material.lambda, material.mu, material.rho],
            tol,
            kind,
        }
    }
}

const CACHE_MAGIC: &[u8; 8] = b"TDBEMBLK";
const CACHE_VERSION: u32 = 1;

/// Little-endian layout: magic, version (u32), 2M (u64), block count (u64), key
/// (mesh hash u64, degree hash u64, dt, λ, μ, ρ, tol as f64, kind u8), then each
/// block row-major as f64 in lag order.
pub fn write_block_cache(system: &ToeplitzBlockSystem, key: &CacheKey, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(64 + system.blocks.len() * system.size().pow(2) * 8);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(system.size() as u64).to_le_bytes());
    out.extend_from_slice(&(system.blocks.len() as u64).to_le_bytes());
    write_key(&mut out, key);
    for b in &system.blocks {
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                out.extend_from_slice(&b[(i, j)].to_le_bytes());
            }
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

fn write_key(out: &mut Vec<u8>, key: &CacheKey) {
    out.extend_from_slice(&key.mesh_hash.to_le_bytes());
    out.extend_from_slice(&key.degree_hash.to_le_bytes());
    for v in [key.dt, key.material[0], key.material[1], key.material[2], key.tol] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(match key.kind {
        UnknownKind::DirichletTraction => 0,
        UnknownKind::NeumannDisplacement => 1,
    });
}

/// Blocks stored under `key`, or `None` when the file is absent or was written for other inputs.
pub fn read_block_cache(
    path: &Path,
    key: &CacheKey,
    space: &BasisSpace,
    time: &TimeGrid,
    material: &Material,
) -> Result<Option<ToeplitzBlockSystem>> {
    let mut bytes = Vec::new();
    match std::fs::File::open(path) {
        Ok(mut f) => f.read_to_end(&mut bytes)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let size = 2 * space.dof_count;
    let mut expect = Vec::new();
    expect.extend_from_slice(CACHE_MAGIC);
    expect.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    expect.extend_from_slice(&(size as u64).to_le_bytes());
    expect.extend_from_slice(&(time.n_steps as u64).to_le_bytes());
    write_key(&mut expect, key);
    if bytes.len() != expect.len() + time.n_steps * size * size * 8 || bytes[..expect.len()] != expect[..] {
        return Ok(None);
    }
    let mut it = bytes[expect.len()..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let blocks = (0..time.n_steps)
        .map(|_| DMatrix::from_row_iterator(size, size, it.by_ref().take(size * size)))
        .collect();
    Ok(Some(ToeplitzBlockSystem {
        blocks,
        unknown_kind: key.kind,
        space: space.clone(),
        time: *time,
        material: *material,
    }))
}

/// Single-lag integrals enter second differences, so they are computed more tightly.
const SINGLE_TOL_FACTOR: f64 = 1e-2;

struct Ctx<'a> {
    space: &'a BasisSpace,
    elements: Vec<PairElement>,
    material: &'a Material,
    dt: f64,
    kind: UnknownKind,
    series: BTreeMap<usize, WSeries>,
    tol: f64,
}

/// Element pairs with identical relative geometry share their integrals.
struct PairGroup {
    rep: (usize, usize),
    members: Vec<(usize, usize)>,
    dmin: f64,
}

impl<'a> Ctx<'a> {
    fn new(space: &'a BasisSpace, time: &TimeGrid, material: &'a Material, kind: UnknownKind, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("quadrature tolerance {tol} must be positive")));
        }
        if kind == UnknownKind::NeumannDisplacement && space.max_degree() == 0 {
            return Err(Error::Space("the hypersingular system needs a continuous space of degree ≥ 1".into()));
        }
        let mesh = &space.mesh;
        let elements = (0..mesh.element_count())
            .map(|e| PairElement::from_mesh(mesh, e, space.degree(e)))
            .collect();
        Ok(Ctx {
            space,
            elements,
            material,
            dt: time.dt,
            kind,
            series: BTreeMap::new(),
            tol,
        })
    }

    fn prepare_series(&mut self, ks: impl IntoIterator<Item = usize>) {
        if self.kind != UnknownKind::NeumannDisplacement {
            return;
        }
        let missing: Vec<usize> = ks.into_iter().filter(|k| *k > 0 && !self.series.contains_key(k)).collect();
        let (dt, m) = (self.dt, *self.material);
        let built: Vec<(usize, WSeries)> = missing
            .into_par_iter()
            .map(|k| (k, WSeries::new(k as f64 * dt, &m)))
            .collect();
        self.series.extend(built);
    }

    fn groups(&self) -> Vec<PairGroup> {
        let mesh = &self.space.mesh;
        let diam = mesh
            .nodes
            .iter()
            .flat_map(|p| p.iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let q = |v: f64| (v / diam * 1e11).round() as i64;
        let n = self.elements.len();
        let mut index: HashMap<[i64; 8], usize> = HashMap::new();
        let mut groups: Vec<PairGroup> = Vec::new();
        for a in 0..n {
            for b in a..n {
                let (e1, e2) = (&self.elements[a], &self.elements[b]);
                let d1 = geom::sub(e1.p1, e1.p0);
                let d2 = geom::sub(e2.p1, e2.p0);
                let rel = geom::sub(e2.p0, e1.p0);
                let key = [
                    q(d1[0]),
                    q(d1[1]),
                    q(d2[0]),
                    q(d2[1]),
                    q(rel[0]),
                    q(rel[1]),
                    (e1.degree * 64 + e2.degree) as i64,
                    (a == b) as i64,
                ];
                match index.get(&key) {
                    Some(&g) => groups[g].members.push((a, b)),
                    None => {
                        index.insert(key, groups.len());
                        groups.push(PairGroup {
                            rep: (a, b),
                            members: vec![(a, b)],
                            dmin: geom::segment_distance(e1.p0, e1.p1, e2.p0, e2.p1),
                        });
                    }
                }
            }
        }
        groups
    }

    fn first_lag(&self, dmin: f64) -> usize {
        // lag l is identically zero while c_p (l + 1) Δt ≤ dmin
        let l = (dmin / (self.material.c_p * self.dt)).floor() as usize;
        let mut l = l.saturating_sub(1);
        while self.material.c_p * (l + 1) as f64 * self.dt <= dmin {
            l += 1;
        }
        l
    }

    fn integrate_terms(&self, terms: &LagTerms, e1: &PairElement, e2: &PairElement, fixed: bool, tol: f64) -> Result<PairIntegral> {
        match self.kind {
            UnknownKind::DirichletTraction => {
                let k = SingleLayerLag::new(terms, self.material);
                self.run(&k, e1, e2, fixed, tol)
            }
            UnknownKind::NeumannDisplacement => {
                let series: Vec<&WSeries> = terms
                    .terms
                    .iter()
                    .map(|t| &self.series[&((t.1 / self.dt).round() as usize)])
                    .collect();
                let k = HypersingularLag::new(terms, &series, self.material, e1.normal(), e2.normal());
                self.run(&k, e1, e2, fixed, tol)
            }
        }
    }

    fn run(&self, k: &dyn PairKernel, e1: &PairElement, e2: &PairElement, fixed: bool, tol: f64) -> Result<PairIntegral> {
        if fixed {
            Ok(fixed_tensor(k, e1, e2, smooth_order(e1, e2)))
        } else {
            integrate_with(k, e1, e2, tol)
        }
    }

    /// Unscaled lag integrals `Σ (−1)^{ξ+ς} ∬ w w ν` of one pair for the given lags.
    ///
    /// Separated pairs combine single-lag integrals, each shared by three lags; pairs
    /// that touch integrate the combined kernel so the singular parts cancel first.
    fn pair_lags(&self, pair: (usize, usize), lags: &[usize]) -> Result<Vec<(usize, PairIntegral)>> {
        let (e1, e2) = (&self.elements[pair.0], &self.elements[pair.1]);
        let separated = classify_pair(e1, e2) == PairClass::Separated;
        let context = |l: usize| {
            move |e: Error| match e {
                Error::Accuracy { estimate, error, .. } => Error::Accuracy {
                    context: format!("elements {} and {}, lag {l}", pair.0, pair.1),
                    estimate,
                    error,
                },
                other => other,
            }
        };
        let mut singles: HashMap<usize, PairIntegral> = HashMap::new();
        let mut out = Vec::with_capacity(lags.len());
        for &l in lags {
            let terms = LagTerms::lag(l, self.dt);
            let res = if separated || is_smooth_pair(e1, e2, &terms.fronts(self.material)) {
                let mut acc = PairIntegral::zeros(e1.degree + 1, e2.degree + 1);
                for &(c, d) in &terms.terms {
                    let k = (d / self.dt).round() as usize;
                    if !singles.contains_key(&k) {
                        let single = LagTerms::single(d);
                        let fixed = is_smooth_pair(e1, e2, &single.fronts(self.material));
                        let j = self.integrate_terms(&single, e1, e2, fixed, SINGLE_TOL_FACTOR * self.tol);
                        singles.insert(k, j.map_err(context(l))?);
                    }
                    let j = &singles[&k];
                    acc.values.iter_mut().zip(&j.values).for_each(|(a, v)| *a += c * v);
                }
                singles.retain(|&k, _| k + 1 >= l);
                acc
            } else {
                self.integrate_terms(&terms, e1, e2, false, self.tol).map_err(context(l))?
            };
            out.push((l, res));
        }
        Ok(out)
    }

    fn prefactor(&self) -> f64 {
        let base = -1.0 / (2.0 * PI * self.material.rho);
        match self.kind {
            UnknownKind::DirichletTraction => base,
            UnknownKind::NeumannDisplacement => base / (self.dt * self.dt),
        }
    }

    fn scatter(&self, block: &mut DMatrix<f64>, pair: (usize, usize), res: &PairIntegral, scale: f64) {
        let m = self.space.dof_count;
        let (a, b) = pair;
        for (la, ga) in self.space.dof_map[a].iter().enumerate() {
            let Some(ga) = *ga else { continue };
            for (lb, gb) in self.space.dof_map[b].iter().enumerate() {
                let Some(gb) = *gb else { continue };
                let v = res.block(la, lb);
                for i in 0..2 {
                    for j in 0..2 {
                        let x = scale * v[i][j];
                        block[(i * m + ga, j * m + gb)] += x;
                        if a != b {
                            block[(j * m + gb, i * m + ga)] += x;
                        }
                    }
                }
            }
        }
    }
}

fn assemble_lags(
    space: &BasisSpace,
    time: &TimeGrid,
    material: &Material,
    kind: UnknownKind,
    lags: &[usize],
    tol: f64,
) -> Result<Vec<DMatrix<f64>>> {
    if let Some(&l) = lags.iter().find(|&&l| l >= time.n_steps) {
        return Err(Error::Index(format!("lag {l} with {} time steps", time.n_steps)));
    }
    let mut ctx = Ctx::new(space, time, material, kind, tol)?;
    let needed: Vec<usize> = lags.iter().flat_map(|&l| [l.saturating_sub(1), l, l + 1]).collect();
    ctx.prepare_series(needed);
    let size = 2 * space.dof_count;
    let mut blocks = vec![DMatrix::zeros(size, size); lags.len()];
    let slot: HashMap<usize, usize> = lags.iter().enumerate().map(|(s, &l)| (l, s)).collect();
    let groups = ctx.groups();
    let scale = ctx.prefactor();
    for chunk in groups.chunks(64) {
        let results: Vec<Vec<(usize, PairIntegral)>> = chunk
            .par_iter()
            .map(|g| {
                let first = ctx.first_lag(g.dmin);
                let mine: Vec<usize> = lags.iter().copied().filter(|&l| l >= first).collect();
                ctx.pair_lags(g.rep, &mine)
            })
            .collect::<Result<_>>()?;
        for (g, res) in chunk.iter().zip(results) {
            for (l, r) in &res {
                for &pair in &g.members {
                    ctx.scatter(&mut blocks[slot[l]], pair, r, scale);
                }
            }
        }
    }
    Ok(blocks)
}

/// All `N_Δt` blocks of the single-layer or hypersingular system.
pub fn assemble_system(
    space: &BasisSpace,
    time: &TimeGrid,
    material: &Material,
    kind: UnknownKind,
    tol: f64,
) -> Result<ToeplitzBlockSystem> {
    let lags: Vec<usize> = (0..time.n_steps).collect();
    Ok(ToeplitzBlockSystem {
        blocks: assemble_lags(space, time, material, kind, &lags, tol)?,
        unknown_kind: kind,
        space: space.clone(),
        time: *time,
        material: *material,
    })
}

pub fn assemble_block_v(space: &BasisSpace, time: &TimeGrid, material: &Material, lag: usize, tol: f64) -> Result<DMatrix<f64>> {
    let mut b = assemble_lags(space, time, material, UnknownKind::DirichletTraction, &[lag], tol)?;
    Ok(b.remove(0))
}

pub fn assemble_block_w(space: &BasisSpace, time: &TimeGrid, material: &Material, lag: usize, tol: f64) -> Result<DMatrix<f64>> {
    let mut b = assemble_lags(space, time, material, UnknownKind::NeumannDisplacement, &[lag], tol)?;
    Ok(b.remove(0))
}

/// `∫_Γ s(x) w_m(x)` for every global shape, with `s` supplied per element at Gauss points.
fn load_vector(space: &BasisSpace, mut s: impl FnMut(Point) -> f64, split_at_zero: bool) -> DVector<f64> {
    let mesh = &space.mesh;
    let mut out = DVector::zeros(space.dof_count);
    let (x, w) = gauss_legendre_nodes(16);
    let mut shapes = vec![0.0; space.max_degree() + 1];
    for e in 0..mesh.element_count() {
        let (p0, p1) = mesh.endpoints(e);
        let len = mesh.length(e);
        let mut cuts = vec![0.0, 1.0];
        if split_at_zero && p0[0] * p1[0] < 0.0 {
            cuts.insert(1, p0[0] / (p0[0] - p1[0]));
        }
        let p = space.degree(e);
        for c in cuts.windows(2) {
            for (u, wq) in x.iter().zip(w) {
                let t = c[0] + (c[1] - c[0]) * u;
                let pt = geom::lerp(p0, p1, t);
                let f = s(pt) * wq * (c[1] - c[0]) * len;
                crate::basis::lagrange_values(p, t, &mut shapes);
                for (j, g) in space.dof_map[e].iter().enumerate() {
                    if let Some(g) = g {
                        out[*g] += f * shapes[j];
                    }
                }
            }
        }
    }
    out
}

/// Per-step vectors `c_n(i) · ∫ s_i w` from per-component temporal weights.
fn separable_rhs(
    space: &BasisSpace,
    comps: &[Option<SeparableComponent>; 2],
    steps: usize,
    weight: impl Fn(&TemporalProfile, usize) -> f64,
) -> RhsHistory {
    let m = space.dof_count;
    let mut vectors = vec![DVector::zeros(2 * m); steps];
    for (i, c) in comps.iter().enumerate() {
        let Some(c) = c else { continue };
        let split = matches!(c.spatial, SpatialProfile::AbsPower(_));
        let load = load_vector(space, |p| c.spatial.value(p), split);
        for (n, v) in vectors.iter_mut().enumerate() {
            let f = c.scale * weight(&c.temporal, n);
            if f != 0.0 {
                v.rows_mut(i * m, m).axpy(f, &load, 1.0);
            }
        }
    }
    RhsHistory { vectors }
}

/// Entries `∫_Γ w_m (g̃_i(t_{n+1}) − g̃_i(t_n))`.
pub fn assemble_rhs_dirichlet(space: &BasisSpace, time: &TimeGrid, datum: &BoundaryDatum) -> RhsHistory {
    match datum {
        BoundaryDatum::Separable(comps) => separable_rhs(space, comps, time.n_steps, |f, n| {
            f.value(time.t(n + 1)) - f.value(time.t(n))
        }),
        BoundaryDatum::Field(g) => field_rhs(space, time, |p, n| {
            let (a, b) = (g(p, time.t(n + 1)), g(p, time.t(n)));
            let c = |t: f64, v: [f64; 2]| if t > 0.0 { v } else { [0.0; 2] };
            let (a, b) = (c(time.t(n + 1), a), c(time.t(n), b));
            [a[0] - b[0], a[1] - b[1]]
        }),
    }
}

/// Entries `−∫_Γ w_m (1/Δt) ∫_{t_n}^{t_{n+1}} h̃_i dt`; a datum constant in time gives the
/// same load at every step.
pub fn assemble_rhs_neumann(space: &BasisSpace, time: &TimeGrid, datum: &BoundaryDatum) -> RhsHistory {
    match datum {
        BoundaryDatum::Separable(comps) => separable_rhs(space, comps, time.n_steps, |f, n| {
            -f.slab_mean(time.t(n), time.t(n + 1))
        }),
        BoundaryDatum::Field(g) => {
            let (x, w) = gauss_legendre_nodes(16);
            field_rhs(space, time, |p, n| {
                let (t0, t1) = (time.t(n), time.t(n + 1));
                let mut s = [0.0; 2];
                for (u, wq) in x.iter().zip(w) {
                    let v = g(p, t0 + u * (t1 - t0));
                    s[0] -= wq * v[0];
                    s[1] -= wq * v[1];
                }
                s
            })
        }
    }
}

fn field_rhs(space: &BasisSpace, time: &TimeGrid, at: impl Fn(Point, usize) -> [f64; 2] + Sync) -> RhsHistory {
    let m = space.dof_count;
    let vectors = (0..time.n_steps)
        .into_par_iter()
        .map(|n| {
            let mut v = DVector::zeros(2 * m);
            for i in 0..2 {
                let load = load_vector(space, |p| at(p, n)[i], false);
                v.rows_mut(i * m, m).copy_from(&load);
            }
            v
        })
        .collect();
    RhsHistory { vectors }
}
