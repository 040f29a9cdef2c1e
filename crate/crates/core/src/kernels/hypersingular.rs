//! Time-integrated hypersingular kernel ν^W.
//!
//! With `U_c^[k]` the k-fold time antiderivative of the 2D scalar wave kernel,
//! the twice integrated fundamental solution reads
//! `G^[3]_kk' = (δ_kk' U_S^[3]/c_S² + ∂_k∂_k'(U_P^[5] − U_S^[5])) / ρ`, and
//! `ν^W_ij = 2π Σ a_ikl(n) a_jk'l'(m) ∂_l∂_l' (ρ G^[3]_kk')` with
//! `a_ikl(n) = λ n_i δ_kl + μ (δ_ik n_l + δ_il n_k)`.
//! Radial functions enter through
//! `∂_a∂_b f = f'' e_a e_b + (f'/r)(δ_ab − e_a e_b)` and
//! `∂⁴f = t4 e⁴ + t2 Σ(δ e e) + t0 Σ(δ δ)`.

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::model::Material;
use std::f64::consts::PI;

use super::KernelArgs;

/// Below `W_SERIES_RATIO · c_S Δ` the kernel is evaluated from its expansion in `r`.
pub const W_SERIES_RATIO: f64 = 0.3;
const SERIES_TERMS: usize = 24;

/// Coefficient functions of the radial tensors at one `r`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RadialCoeffs {
    pub t4: f64,
    pub t2: f64,
    pub t0: f64,
    /// `h''`
    pub e2: f64,
    /// `h'/r`
    pub e1: f64,
}

impl RadialCoeffs {
    pub(crate) fn axpy(&mut self, a: f64, o: &RadialCoeffs) {
        self.t4 += a * o.t4;
        self.t2 += a * o.t2;
        self.t0 += a * o.t0;
        self.e2 += a * o.e2;
        self.e1 += a * o.e1;
    }
}

/// Radial derivatives `(g', g'', g''', g'''')` of `U_c^[5]` and `(h', h'')` of `U_c^[3]`.
fn radial_derivatives(r: f64, t: f64, c: f64) -> ([f64; 4], [f64; 2]) {
    let ct = c * t;
    let phi = (ct * ct - r * r).sqrt();
    let ph = (ct + phi).ln() - r.ln();
    let (c2, c3, c4) = (c * c, c * c * c, c2c2(c));
    let (r2, t2) = (r * r, t * t);
    let tp = t * phi;
    let g1 = -tp * (2.0 * c2 * t2 + 13.0 * r2) / (96.0 * PI * c3 * r) + ph * r * (4.0 * c2 * t2 + r2) / (32.0 * PI * c4);
    let g2 = tp * (2.0 * c2 * t2 - 23.0 * r2) / (96.0 * PI * c3 * r2) + ph * (4.0 * c2 * t2 + 3.0 * r2) / (32.0 * PI * c4);
    let g3 = -tp * (2.0 * c2 * t2 + 7.0 * r2) / (48.0 * PI * c3 * r2 * r) + ph * 3.0 * r / (16.0 * PI * c4);
    let g4 = tp * (2.0 * c2 * t2 + 3.0 * r2) / (16.0 * PI * c3 * r2 * r2) + ph * 3.0 / (16.0 * PI * c4);
    let h1 = -tp / (4.0 * PI * c * r) + ph * r / (4.0 * PI * c2);
    let h2 = tp / (4.0 * PI * c * r2) + ph / (4.0 * PI * c2);
    ([g1, g2, g3, g4], [h1, h2])
}

#[inline]
fn c2c2(c: f64) -> f64 {
    let c2 = c * c;
    c2 * c2
}

fn coeffs_from_derivatives(r: f64, g: [f64; 4], h: [f64; 2]) -> RadialCoeffs {
    let [g1, g2, g3, g4] = g;
    let (r2, r3) = (r * r, r * r * r);
    RadialCoeffs {
        t4: g4 - 6.0 * g3 / r + 15.0 * g2 / r2 - 15.0 * g1 / r3,
        t2: g3 / r - 3.0 * g2 / r2 + 3.0 * g1 / r3,
        t0: g2 / r2 - g1 / r3,
        e2: h[1],
        e1: h[0] / r,
    }
}

/// Coefficient functions from the closed forms, gated by the wavefronts.
pub(crate) fn closed_form_coeffs(r: f64, delta: f64, m: &Material) -> RadialCoeffs {
    let mut g = [0.0; 4];
    let mut h = [0.0; 2];
    if m.c_p * delta - r > 0.0 {
        let (gp, _) = radial_derivatives(r, delta, m.c_p);
        for k in 0..4 {
            g[k] += gp[k];
        }
    }
    if m.c_s * delta - r > 0.0 {
        let (gs, hs) = radial_derivatives(r, delta, m.c_s);
        let s2 = m.c_s * m.c_s;
        for k in 0..4 {
            g[k] -= gs[k];
        }
        h = [hs[0] / s2, hs[1] / s2];
    }
    coeffs_from_derivatives(r, g, h)
}

/// `ν^W_ij` from the radial coefficients for unit direction `e` and normals `n` (at x), `m` (at ξ).
pub(crate) fn contract(c: &RadialCoeffs, e: Point, n: Point, m: Point, mat: &Material) -> [[f64; 2]; 2] {
    let (lam, mu) = (mat.lambda, mat.mu);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut t = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for cc in 0..2 {
                for dd in 0..2 {
                    let mut v = c.t4 * e[a] * e[b] * e[cc] * e[dd]
                        + c.t2
                            * (d(a, b) * e[cc] * e[dd]
                                + d(a, cc) * e[b] * e[dd]
                                + d(a, dd) * e[b] * e[cc]
                                + d(b, cc) * e[a] * e[dd]
                                + d(b, dd) * e[a] * e[cc]
                                + d(cc, dd) * e[a] * e[b])
                        + c.t0 * (d(a, b) * d(cc, dd) + d(a, cc) * d(b, dd) + d(a, dd) * d(b, cc));
                    // δ_kk' H_ll' with (a, b, c, d) = (k, k', l, l')
                    if a == b {
                        v += c.e2 * e[cc] * e[dd] + c.e1 * (d(cc, dd) - e[cc] * e[dd]);
                    }
                    t[a][b][cc][dd] = v;
                }
            }
        }
    }
    let amat = |nn: Point, i: usize, k: usize, l: usize| {
        lam * nn[i] * d(k, l) + mu * (d(i, k) * nn[l] + d(i, l) * nn[k])
    };
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    let ai = amat(n, i, k, l);
                    if ai == 0.0 {
                        continue;
                    }
                    for kp in 0..2 {
                        for lp in 0..2 {
                            s += ai * amat(m, j, kp, lp) * t[k][kp][l][lp];
                        }
                    }
                }
            }
            out[i][j] = 2.0 * PI * s;
        }
    }
    out
}

/// `Σ_j (a_j + b_j log r) r^(lo + j)`.
#[derive(Debug, Clone, PartialEq)]
struct PowerLog {
    lo: i32,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PowerLog {
    fn derivative(&self) -> PowerLog {
        let mut a = vec![0.0; self.a.len()];
        let mut b = vec![0.0; self.b.len()];
        for k in 0..self.a.len() {
            let j = (self.lo + k as i32) as f64;
            a[k] = j * self.a[k] + self.b[k];
            b[k] = j * self.b[k];
        }
        PowerLog { lo: self.lo - 1, a, b }
    }

    fn shifted(&self, m: i32) -> PowerLog {
        PowerLog {
            lo: self.lo + m,
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }

    /// `Σ w_i s_i` over series with possibly different offsets.
    fn combine(parts: &[(f64, &PowerLog)]) -> PowerLog {
        let lo = parts.iter().map(|(_, p)| p.lo).min().unwrap();
        let hi = parts.iter().map(|(_, p)| p.lo + p.a.len() as i32).max().unwrap();
        let n = (hi - lo) as usize;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for (w, p) in parts {
            let off = (p.lo - lo) as usize;
            for k in 0..p.a.len() {
                a[off + k] += w * p.a[k];
                b[off + k] += w * p.b[k];
            }
        }
        PowerLog { lo, a, b }
    }

    fn power_coefficient(&self, j: i32) -> (f64, f64) {
        let k = j - self.lo;
        if k < 0 || k as usize >= self.a.len() {
            (0.0, 0.0)
        } else {
            (self.a[k as usize], self.b[k as usize])
        }
    }

    /// `(Σ_{j≥0} a_j r^j, Σ_{j≥0} b_j r^j)`.
    fn eval_nonnegative(&self, r: f64) -> (f64, f64) {
        let mut sa = 0.0;
        let mut sb = 0.0;
        for k in (0..self.a.len()).rev() {
            let j = self.lo + k as i32;
            if j < 0 {
                break;
            }
            sa = sa * r + self.a[k];
            sb = sb * r + self.b[k];
        }
        (sa, sb)
    }
}

/// Expansion of `U_c^[k]` for `k ∈ {3, 5}` in powers of `r`.
fn antiderivative_series(k: usize, t: f64, c: f64, terms: usize) -> PowerLog {
    let ct = c * t;
    let (p, q): (Vec<f64>, Vec<f64>) = match k {
        3 => (vec![t * t / 2.0, 1.0 / (4.0 * c * c)], vec![-3.0 * t / (4.0 * c)]),
        5 => (
            vec![t.powi(4) / 24.0, t * t / (8.0 * c * c), 1.0 / (64.0 * c2c2(c))],
            vec![-25.0 * t.powi(3) / (288.0 * c), -55.0 * t / (576.0 * c * c * c)],
        ),
        _ => unreachable!(),
    };
    // log(ct + φ) = log(2ct) + Σ l_n x^n and φ = ct Σ s_n x^n with x = r²/(ct)².
    // Both expansions are stored as coefficients of r^(2n).
    let mut l = vec![0.0; terms + 1];
    let mut s = vec![0.0; terms + 1];
    l[0] = (2.0 * ct).ln();
    s[0] = ct;
    let inv = 1.0 / (ct * ct);
    let (mut central, mut sc, mut xp) = (1.0, 1.0, 1.0);
    for n in 1..=terms {
        central *= (2 * n - 1) as f64 / (2 * n) as f64;
        sc *= (n as f64 - 1.5) / n as f64;
        xp *= inv;
        l[n] = -central / (2 * n) as f64 * xp;
        s[n] = ct * sc * xp;
    }
    // coefficients in r^(2n)
    let len = 2 * (terms + 3) + 1;
    let mut a = vec![0.0; len];
    let mut b = vec![0.0; len];
    for (i, &pi) in p.iter().enumerate() {
        b[2 * i] -= pi;
        for n in 0..=terms {
            a[2 * (i + n)] += pi * l[n];
        }
    }
    for (i, &qi) in q.iter().enumerate() {
        for n in 0..=terms {
            a[2 * (i + n)] += qi * s[n];
        }
    }
    let cut = 2 * terms + 1;
    a.truncate(cut);
    b.truncate(cut);
    let f = 1.0 / (2.0 * PI);
    PowerLog {
        lo: 0,
        a: a.into_iter().map(|v| v * f).collect(),
        b: b.into_iter().map(|v| v * f).collect(),
    }
}

/// Expansion of ν^W's radial coefficients for one Δ, valid for `r < W_SERIES_RATIO · c_S Δ`.
#[derive(Debug, Clone)]
pub struct WSeries {
    pub delta: f64,
    pub r_max: f64,
    t4: PowerLog,
    t2: PowerLog,
    t0: PowerLog,
    e2: PowerLog,
    e1: PowerLog,
}

/// Split of the coefficients as `a / r² + b log r + reg`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SingularSplit {
    pub a: RadialCoeffs,
    pub b: RadialCoeffs,
    pub reg: RadialCoeffs,
}

impl WSeries {
    pub fn new(delta: f64, m: &Material) -> Self {
        let n = SERIES_TERMS;
        let up = antiderivative_series(5, delta, m.c_p, n);
        let us = antiderivative_series(5, delta, m.c_s, n);
        let g = PowerLog::combine(&[(1.0, &up), (-1.0, &us)]);
        let h0 = antiderivative_series(3, delta, m.c_s, n);
        let h = PowerLog::combine(&[(1.0 / (m.c_s * m.c_s), &h0)]);
        let g1 = g.derivative();
        let g2 = g1.derivative();
        let g3 = g2.derivative();
        let g4 = g3.derivative();
        let t4 = PowerLog::combine(&[
            (1.0, &g4),
            (-6.0, &g3.shifted(-1)),
            (15.0, &g2.shifted(-2)),
            (-15.0, &g1.shifted(-3)),
        ]);
        let t2 = PowerLog::combine(&[(1.0, &g3.shifted(-1)), (-3.0, &g2.shifted(-2)), (3.0, &g1.shifted(-3))]);
        let t0 = PowerLog::combine(&[(1.0, &g2.shifted(-2)), (-1.0, &g1.shifted(-3))]);
        let h1 = h.derivative();
        let e2 = h1.derivative();
        let e1 = h1.shifted(-1);
        WSeries {
            delta,
            r_max: W_SERIES_RATIO * m.c_s * delta,
            t4,
            t2,
            t0,
            e2,
            e1,
        }
    }

    fn parts(&self) -> [&PowerLog; 5] {
        [&self.t4, &self.t2, &self.t0, &self.e2, &self.e1]
    }

    /// Decomposition of the coefficients at `r`; the pure `r^-2` part is returned unscaled.
    pub fn split(&self, r: f64) -> SingularSplit {
        let mut out = [[0.0; 3]; 5];
        for (k, p) in self.parts().iter().enumerate() {
            let (a2, _) = p.power_coefficient(-2);
            let (ra, rb) = p.eval_nonnegative(r);
            out[k] = [a2, rb, ra];
        }
        let pick = |i: usize| RadialCoeffs {
            t4: out[0][i],
            t2: out[1][i],
            t0: out[2][i],
            e2: out[3][i],
            e1: out[4][i],
        };
        SingularSplit {
            a: pick(0),
            b: pick(1),
            reg: pick(2),
        }
    }

    pub fn coeffs(&self, r: f64) -> RadialCoeffs {
        let s = self.split(r);
        let lr = r.ln();
        let mut c = s.reg;
        c.axpy(1.0 / (r * r), &s.a);
        c.axpy(lr, &s.b);
        c
    }

    /// Largest magnitude among the coefficients of `r^-4`, `r^-3`, `r^-1` and `r^j log r` with `j < 0`.
    pub fn spurious_singular_size(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in self.parts() {
            for k in 0..p.a.len() {
                let j = p.lo + k as i32;
                if j < 0 {
                    worst = worst.max(p.b[k].abs());
                    if j != -2 {
                        worst = worst.max(p.a[k].abs());
                    }
                }
            }
        }
        worst
    }
}

/// Radial coefficients at `r`, choosing the series or the closed forms.
pub(crate) fn coeffs_at(r: f64, delta: f64, m: &Material, series: Option<&WSeries>) -> RadialCoeffs {
    if r < W_SERIES_RATIO * m.c_s * delta {
        match series {
            Some(s) => s.coeffs(r),
            None => WSeries::new(delta, m).coeffs(r),
        }
    } else {
        closed_form_coeffs(r, delta, m)
    }
}

/// Full `ν^W` matrix for `r_vec = x − ξ` with normals `n` at x and `m` at ξ.
pub fn kernel_w_matrix(r_vec: Point, delta: f64, mat: &Material, n: Point, m: Point) -> Result<[[f64; 2]; 2]> {
    let r = r_vec[0].hypot(r_vec[1]);
    if r == 0.0 {
        return Err(Error::Singular("kernel_w"));
    }
    if mat.c_p * delta - r <= 0.0 {
        return Ok([[0.0; 2]; 2]);
    }
    let c = coeffs_at(r, delta, mat, None);
    Ok(contract(&c, [r_vec[0] / r, r_vec[1] / r], n, m, mat))
}

/// `ν^W_ij` for normals `(n_x, n_ξ)`.
pub fn kernel_w(i: usize, j: usize, args: &KernelArgs, normals: (Point, Point)) -> Result<f64> {
    if i > 1 || j > 1 {
        return Err(Error::Index(format!("component ({i}, {j})")));
    }
    Ok(kernel_w_matrix(args.r_vec, args.delta, args.material, normals.0, normals.1)?[i][j])
}
