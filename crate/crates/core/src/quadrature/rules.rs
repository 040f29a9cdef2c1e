//! Quadrature rules on `[0, 1]` and a vector-valued adaptive Gauss–Kronrod driver.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    GaussLegendre(usize),
    /// Gauss rule for the weight `−log τ` on `[0, 1]`.
    GaussLog(usize),
    /// The same rule repeated on each sub-interval of `breakpoints`.
    Composite { base: Box<RuleKind>, breakpoints: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kind: RuleKind,
}

impl QuadRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

const MAX_GAUSS: usize = 64;

fn legendre_on_minus1_1(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn gauss_table() -> &'static Vec<(Vec<f64>, Vec<f64>)> {
    static TABLE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=MAX_GAUSS)
            .map(|n| {
                if n == 0 {
                    return (vec![], vec![]);
                }
                let (x, w) = legendre_on_minus1_1(n);
                (
                    x.iter().map(|v| 0.5 * (v + 1.0)).collect(),
                    w.iter().map(|v| 0.5 * v).collect(),
                )
            })
            .collect()
    })
}

/// Cached Gauss–Legendre nodes and weights on `[0, 1]`; `1 <= n <= 64`.
pub fn gauss_legendre_nodes(n: usize) -> (&'static [f64], &'static [f64]) {
    let (x, w) = &gauss_table()[n.clamp(1, MAX_GAUSS)];
    (x, w)
}

pub fn gauss_legendre(n: usize) -> Result<QuadRule> {
    if n == 0 || n > MAX_GAUSS {
        return Err(Error::Domain(format!("Gauss-Legendre order {n} outside 1..=64")));
    }
    let (x, w) = gauss_legendre_nodes(n);
    Ok(QuadRule {
        nodes: x.to_vec(),
        weights: w.to_vec(),
        kind: RuleKind::GaussLegendre(n),
    })
}

fn gauss_log_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Modified Chebyshev algorithm on monic shifted Legendre polynomials.
    let m = 2 * n;
    let mut mom = vec![0.0; m];
    let mut central = 1.0;
    for k in 0..m {
        if k > 0 {
            central *= (2 * k) as f64 * (2 * k - 1) as f64 / (k * k) as f64;
        }
        let raw = if k == 0 {
            1.0
        } else {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            s / (k * (k + 1)) as f64
        };
        mom[k] = raw / central;
    }
    let a = vec![0.5; m];
    let b: Vec<f64> = (0..m)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                let kf = (k * k) as f64;
                kf / (4.0 * (4.0 * kf - 1.0))
            }
        })
        .collect();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    alpha[0] = a[0] + mom[1] / mom[0];
    beta[0] = mom[0];
    let mut sig_prev = vec![0.0; m + 1];
    let mut sig = mom.clone();
    sig.push(0.0);
    for k in 1..n {
        let mut sig_new = vec![0.0; m + 1];
        for l in k..(m - k) {
            sig_new[l] = sig[l + 1] - (alpha[k - 1] - a[l]) * sig[l] - beta[k - 1] * sig_prev[l] + b[l] * sig[l - 1];
        }
        alpha[k] = a[k] + sig_new[k + 1] / sig_new[k] - sig[k] / sig[k - 1];
        beta[k] = sig_new[k] / sig[k - 1];
        sig_prev = sig;
        sig = sig_new;
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = alpha[k];
        if k + 1 < n {
            let off = beta[k + 1].sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], beta[0] * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

fn gauss_log_table() -> &'static Vec<(Vec<f64>, Vec<f64>)> {
    static TABLE: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=32)
            .map(|n| if n == 0 { (vec![], vec![]) } else { gauss_log_nodes(n) })
            .collect()
    })
}

/// Cached rule for `∫_0^1 f(τ)(−log τ) dτ`; `1 <= n <= 32`.
pub fn gauss_log_nodes_cached(n: usize) -> (&'static [f64], &'static [f64]) {
    let (x, w) = &gauss_log_table()[n.clamp(1, 32)];
    (x, w)
}

pub fn gauss_log(n: usize) -> Result<QuadRule> {
    if n == 0 || n > 32 {
        return Err(Error::Domain(format!("Gauss-log order {n} outside 1..=32")));
    }
    let (x, w) = gauss_log_nodes_cached(n);
    Ok(QuadRule {
        nodes: x.to_vec(),
        weights: w.to_vec(),
        kind: RuleKind::GaussLog(n),
    })
}

/// Gauss–Legendre of order `n` repeated on each sub-interval of `breakpoints` (within `[0, 1]`).
pub fn composite(n: usize, breakpoints: &[f64]) -> Result<QuadRule> {
    let base = gauss_legendre(n)?;
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("composite rule needs increasing breakpoints".into()));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in breakpoints.windows(2) {
        let h = w[1] - w[0];
        for (x, wt) in base.nodes.iter().zip(&base.weights) {
            nodes.push(w[0] + h * x);
            weights.push(h * wt);
        }
    }
    Ok(QuadRule {
        nodes,
        weights,
        kind: RuleKind::Composite {
            base: Box::new(RuleKind::GaussLegendre(n)),
            breakpoints: breakpoints.to_vec(),
        },
    })
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    err: f64,
    abs: f64,
}

fn gk15<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, n: usize, buf: &mut [f64], fv: &mut [f64]) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    // fv holds 15 samples of n components
    for k in 0..15 {
        let x = match k {
            0..=6 => c - h * XGK[k],
            7 => c,
            _ => c + h * XGK[14 - k],
        };
        f(x, buf);
        fv[k * n..(k + 1) * n].copy_from_slice(&buf[..n]);
    }
    let mut value = vec![0.0; n];
    let mut err = 0.0;
    let mut abs = 0.0;
    for comp in 0..n {
        let s = |k: usize| fv[k * n + comp];
        let mut kr = WGK[7] * s(7);
        let mut gs = WG[3] * s(7);
        let mut ra = WGK[7] * s(7).abs();
        for j in 0..7 {
            let pair = s(j) + s(14 - j);
            kr += WGK[j] * pair;
            ra += WGK[j] * (s(j).abs() + s(14 - j).abs());
            if j % 2 == 1 {
                gs += WG[j / 2] * pair;
            }
        }
        let mean = 0.5 * kr;
        let mut asc = WGK[7] * (s(7) - mean).abs();
        for j in 0..7 {
            asc += WGK[j] * ((s(j) - mean).abs() + (s(14 - j) - mean).abs());
        }
        let (kr, gs, ra, asc) = (kr * h, gs * h, ra * h.abs(), asc * h.abs());
        let d = (kr - gs).abs();
        let e = if asc > 0.0 && d > 0.0 {
            asc * (200.0 * d / asc).powf(1.5).min(1.0)
        } else {
            d
        };
        let e = if ra > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e.max(50.0 * f64::EPSILON * ra)
        } else {
            e
        };
        value[comp] = kr;
        err += e;
        abs += ra;
    }
    Panel { a, b, value, err, abs }
}

/// Result of an adaptive integration: values, error estimate, and `∫|f|` summed over components.
#[derive(Debug, Clone)]
pub struct Adaptive {
    pub value: Vec<f64>,
    pub error: f64,
    pub abs: f64,
    pub converged: bool,
}

/// Globally adaptive 7–15 Gauss–Kronrod for a vector integrand on `[a, b]`.
///
/// Stops when the summed error is below `tol · max(∫|f|, floor)`.
pub fn adaptive_gk<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    a: f64,
    b: f64,
    n: usize,
    tol: f64,
    floor: f64,
    max_panels: usize,
) -> Adaptive {
    let mut buf = vec![0.0; n];
    let mut fv = vec![0.0; 15 * n];
    let mut panels = vec![gk15(&mut f, a, b, n, &mut buf, &mut fv)];
    loop {
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let abs: f64 = panels.iter().map(|p| p.abs).sum();
        let target = tol * abs.max(floor);
        let done = err <= target;
        if done || panels.len() >= max_panels {
            let mut value = vec![0.0; n];
            for p in &panels {
                for k in 0..n {
                    value[k] += p.value[k];
                }
            }
            return Adaptive {
                value,
                error: err,
                abs,
                converged: done,
            };
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            // interval exhausted at machine resolution
            panels.push(Panel { err: 0.0, ..p });
            continue;
        }
        panels.push(gk15(&mut f, p.a, m, n, &mut buf, &mut fv));
        panels.push(gk15(&mut f, m, p.b, n, &mut buf, &mut fv));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exactness() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes, vec![0.5]);
        assert_eq!(r.weights, vec![1.0]);
        let r = gauss_legendre(2).unwrap();
        assert!((r.integrate(|x| x * x * x) - 0.25).abs() < 1e-15);
        let r = gauss_legendre(16).unwrap();
        assert!((r.integrate(|x| (10.0 * x).cos()) - (10f64).sin() / 10.0).abs() < 1e-14);
        for n in [5, 20, 33, 64] {
            let r = gauss_legendre(n).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let k = 2 * n - 1;
            assert!((r.integrate(|x| x.powi(k as i32)) - 1.0 / (k + 1) as f64).abs() < 1e-14);
        }
        assert!(gauss_legendre(0).is_err() && gauss_legendre(65).is_err());
    }

    #[test]
    fn gauss_log_moments() {
        for n in [1, 4, 8, 16, 24] {
            let r = gauss_log(n).unwrap();
            assert!(r.nodes.iter().all(|&x| x > 0.0 && x < 1.0));
            for k in 0..2 * n {
                let want = 1.0 / ((k + 1) * (k + 1)) as f64;
                let got = r.integrate(|x| x.powi(k as i32));
                assert!((got - want).abs() < 1e-13, "n={n} k={k} {got} {want}");
            }
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let res = adaptive_gk(|x, o| o[0] = x.sqrt().ln(), 0.0, 1.0, 1, 1e-12, 0.0, 400);
        assert!(res.converged);
        assert!((res.value[0] + 0.5).abs() < 1e-11);
    }
}
