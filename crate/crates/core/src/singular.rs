//! Corner and cone singular exponents, their angle asymptotics, and power-law fits.

use crate::error::{Error, Result};
use crate::quadrature::adaptive_gk;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    WaveDirichlet,
    WaveNeumann,
}

/// Corner of opening angle `ω` measured inside the elastic domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentProblem {
    pub opening_angle: f64,
    pub bc: BoundaryCondition,
    pub kolosov: f64,
}

impl ExponentProblem {
    pub fn new(opening_angle: f64, bc: BoundaryCondition, kolosov: f64) -> Result<Self> {
        if !(opening_angle > 0.0 && opening_angle <= TAU) {
            return Err(Error::Domain(format!("opening angle {opening_angle} outside (0, 2π]")));
        }
        if !(kolosov > 1.0) {
            return Err(Error::Domain(format!("Kolosov constant {kolosov} must exceed 1")));
        }
        Ok(ExponentProblem {
            opening_angle,
            bc,
            kolosov,
        })
    }
}

pub const SCAN_STEP: f64 = 1e-3;
pub const SEARCH_CAP: f64 = 2.0;

/// Roots of `f` in `(step, cap]` located by a sign scan and refined by bisection.
fn scan_roots(f: &dyn Fn(f64) -> f64, step: f64, cap: f64, tol: f64) -> Vec<f64> {
    let n = (cap / step).round() as usize;
    let mut roots = Vec::new();
    let mut a = step;
    let mut fa = f(a);
    for k in 2..=n {
        let b = k as f64 * step;
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            roots.push(bisect(f, a, b, fa, tol));
        }
        a = b;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(a);
    }
    roots
}

fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> f64 {
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// `sin²(νω) − (ν sin ω / κ)²`, whose smallest positive root is the corner exponent.
pub fn elastic_residual(nu: f64, omega: f64, kappa: f64) -> f64 {
    let s = (nu * omega).sin();
    let r = nu * omega.sin() / kappa;
    s * s - r * r
}

fn kappa(p: &ExponentProblem) -> f64 {
    match p.bc {
        BoundaryCondition::Dirichlet => p.kolosov,
        _ => 1.0,
    }
}

/// Every real exponent in `(0, cap]` of the plane-strain corner problem.
pub fn elastic_roots(problem: &ExponentProblem, cap: f64) -> Vec<f64> {
    let (w, k) = (problem.opening_angle, kappa(problem));
    // the squared form has double roots where both signs vanish together, so the
    // two factors are scanned separately
    let mut roots = Vec::new();
    for sign in [1.0, -1.0] {
        let g = move |nu: f64| (nu * w).sin() - sign * nu * w.sin() / k;
        roots.extend(scan_roots(&g, SCAN_STEP, cap, 1e-13));
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    roots
}

/// Smallest positive exponent `ν*`.
pub fn exponent_elastic(problem: &ExponentProblem) -> Result<f64> {
    match problem.bc {
        BoundaryCondition::WaveDirichlet | BoundaryCondition::WaveNeumann => {
            return exponent_wave(problem.opening_angle, 1);
        }
        _ => {}
    }
    elastic_roots(problem, SEARCH_CAP).first().copied().ok_or_else(|| {
        Error::RootSearch(format!(
            "no exponent in (0, {SEARCH_CAP}] for ω = {}, κ = {} (scan step {SCAN_STEP}, residual at cap {:.3e})",
            problem.opening_angle,
            kappa(problem),
            elastic_residual(SEARCH_CAP, problem.opening_angle, kappa(problem))
        ))
    })
}

/// `kπ/ω` for the scalar wave equation.
pub fn exponent_wave(omega: f64, k: usize) -> Result<f64> {
    if !(omega > 0.0 && omega <= TAU) {
        return Err(Error::Domain(format!("opening angle {omega} outside (0, 2π]")));
    }
    Ok(k as f64 * PI / omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleRegime {
    SmallAngle,
    Near2Pi,
}

/// Leading-order behaviour of `ν*` for small openings and for openings close to `2π`.
pub fn exponent_asymptotics(omega: f64, k_star: f64, regime: AngleRegime) -> Result<f64> {
    if !(k_star > 1.0) {
        return Err(Error::Domain(format!("Kolosov constant {k_star} must exceed 1")));
    }
    match regime {
        AngleRegime::Near2Pi => Ok(0.5 + (TAU - omega) / (4.0 * PI) * (1.0 + 1.0 / k_star)),
        AngleRegime::SmallAngle => {
            // sin c / c = 1/k* has one root in (0, π)
            let f = |c: f64| c.sin() / c - 1.0 / k_star;
            let c = bisect(&f, 1e-9, PI, f(1e-9), 1e-14);
            Ok(c / omega)
        }
    }
}

/// Legendre function of the first kind `P_α(x)` for real `α` and `x ∈ (−1, 1]`.
pub fn legendre_p(alpha: f64, x: f64) -> Result<f64> {
    if !(x > -1.0 && x <= 1.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("P_α(x) needs x in (−1, 1], got {x}")));
    }
    // P_α = P_{−α−1}
    let alpha = if alpha < -0.5 { -alpha - 1.0 } else { alpha };
    if alpha.fract() == 0.0 {
        return Ok(legendre_integer(alpha as usize, x));
    }
    if x >= -0.5 {
        Ok(legendre_series(alpha, x))
    } else {
        Ok(legendre_mehler(alpha, x))
    }
}

fn legendre_integer(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return p0;
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `₂F₁(−α, α+1; 1; (1−x)/2)`, summed until the terms stop contributing.
fn legendre_series(alpha: f64, x: f64) -> f64 {
    let z = 0.5 * (1.0 - x);
    let (mut sum, mut term) = (1.0, 1.0);
    let mut comp = 0.0;
    for n in 0..2000 {
        let nf = n as f64;
        term *= (nf - alpha) * (nf + alpha + 1.0) / ((nf + 1.0) * (nf + 1.0)) * z;
        // Kahan summation keeps the alternating tail from eroding the result
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && nf > alpha {
            break;
        }
    }
    sum
}

/// Mehler–Dirichlet integral `(2/π) ∫_0^θ cos((α+½)φ) / sqrt(2(cos φ − cos θ)) dφ`, `x = cos θ`.
fn legendre_mehler(alpha: f64, x: f64) -> f64 {
    let theta = x.acos();
    // φ = θ(1 − s²) removes the inverse square root at φ = θ
    let f = |s: f64, o: &mut [f64]| {
        let phi = theta * (1.0 - s * s);
        let d = 2.0 * (0.5 * (theta + phi)).sin() * (0.5 * theta * s * s).sin();
        o[0] = if s == 0.0 {
            // limit of 2θs / sqrt(2d) as s → 0
            (2.0 * theta / theta.sin()).sqrt() * ((alpha + 0.5) * theta).cos()
        } else {
            2.0 * theta * s * ((alpha + 0.5) * phi).cos() / (2.0 * d).sqrt()
        };
    };
    let mut cuts = vec![0.0, 1.0];
    // the integrand peaks near s ~ sqrt(π − θ) as θ → π
    let knee = (PI - theta).sqrt();
    if knee < 0.5 {
        cuts = vec![0.0, 0.25 * knee, knee, 4.0 * knee, 1.0];
        cuts.retain(|c| *c <= 1.0);
        cuts.dedup();
    }
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += adaptive_gk(f, w[0], w[1], 1, 1e-14, 0.0, 400).value[0];
    }
    2.0 / PI * total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeExponentProblem {
    pub opening_angle: f64,
    pub poisson: f64,
}

impl ConeExponentProblem {
    pub fn new(opening_angle: f64, poisson: f64) -> Result<Self> {
        if !(opening_angle > 0.0 && opening_angle < PI) {
            return Err(Error::Domain(format!("cone opening {opening_angle} outside (0, π)")));
        }
        if !(poisson > 0.0 && poisson < 0.5) {
            return Err(Error::Domain(format!("Poisson ratio {poisson} outside (0, 1/2)")));
        }
        Ok(ConeExponentProblem {
            opening_angle,
            poisson,
        })
    }
}

/// The determinant expression whose zeros are the rotationally symmetric cone exponents.
pub fn cone_residual(alpha: f64, problem: &ConeExponentProblem) -> Result<f64> {
    let w = problem.opening_angle;
    let nu = problem.poisson;
    let c = w.cos();
    let p0 = legendre_p(alpha, c)?;
    let p1 = legendre_p(alpha + 1.0, c)?;
    let bracket = p0 * p0 * c * (alpha + 4.0 * nu - 3.0)
        + p0 * p1 * (3.0 - 4.0 * nu - c * c * (2.0 * alpha + 1.0))
        + p1 * p1 * c * (alpha + 1.0);
    Ok(-(alpha + 1.0) / w.sin() * bracket)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeRoots {
    pub roots: Vec<f64>,
    /// Near-zero local minima of `|F|` without a sign change, which may hide double roots.
    pub suspected_double: Vec<f64>,
}

pub fn exponent_cone(problem: &ConeExponentProblem) -> Result<ConeRoots> {
    exponent_cone_scan(problem, SCAN_STEP, SEARCH_CAP)
}

pub fn exponent_cone_scan(problem: &ConeExponentProblem, step: f64, cap: f64) -> Result<ConeRoots> {
    let n = (cap / step).round() as usize;
    let grid: Vec<f64> = (1..=n).map(|k| k as f64 * step).collect();
    let vals = grid
        .iter()
        .map(|&a| cone_residual(a, problem))
        .collect::<Result<Vec<_>>>()?;
    let f = |a: f64| cone_residual(a, problem).unwrap_or(f64::NAN);
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut roots = Vec::new();
    let mut suspected_double = Vec::new();
    for k in 0..grid.len() - 1 {
        if vals[k] == 0.0 {
            roots.push(grid[k]);
        } else if vals[k] * vals[k + 1] < 0.0 {
            roots.push(bisect(&f, grid[k], grid[k + 1], vals[k], 1e-10));
        } else if k > 0
            && vals[k].abs() < vals[k - 1].abs()
            && vals[k].abs() < vals[k + 1].abs()
            && vals[k].abs() < 1e-6 * scale
        {
            suspected_double.push(grid[k]);
        }
    }
    Ok(ConeRoots { roots, suspected_double })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual of the log–log line.
    pub residual: f64,
    /// Values changed sign and were fitted by magnitude.
    pub used_magnitudes: bool,
}

/// Least-squares fit `|v| ≈ C r^e` in log–log coordinates.
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<PowerFit> {
    if samples.len() < 3 {
        return Err(Error::Domain(format!("power-law fit needs ≥ 3 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(r, v)| !(r > 0.0) || v == 0.0 || !v.is_finite()) {
        return Err(Error::Domain("power-law fit needs r > 0 and finite nonzero values".into()));
    }
    let used_magnitudes = samples.iter().any(|s| s.1 < 0.0) && samples.iter().any(|s| s.1 > 0.0);
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(r, v)| (r.ln(), v.abs().ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("power-law fit needs distinct radii".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Ok(PowerFit {
        exponent: slope,
        prefactor: icpt.exp(),
        residual: (rss / n).sqrt(),
        used_magnitudes,
    })
}

/// Rows `(ω, ν* of the exterior 2π − ω, ν* of the interior ω)` for `count` angles in `(0, 2π)`.
///
/// Exponents above the search cap (small angles) are reported as NaN.
pub fn exponent_curve(k_star: f64, count: usize) -> Result<Vec<(f64, f64, f64)>> {
    let solve = |w: f64| -> Result<f64> {
        match exponent_elastic(&ExponentProblem::new(w, BoundaryCondition::Dirichlet, k_star)?) {
            Err(Error::RootSearch(_)) => Ok(f64::NAN),
            r => r,
        }
    };
    (1..=count)
        .map(|k| {
            let w = TAU * k as f64 / (count + 1) as f64;
            Ok((w, solve(TAU - w)?, solve(w)?))
        })
        .collect()
}

pub fn write_exponent_curve_csv(rows: &[(f64, f64, f64)], path: &Path) -> Result<()> {
    let mut s = String::from("omega,nu_exterior,nu_interior\n");
    for (w, e, i) in rows {
        let _ = writeln!(s, "{w:.8},{e:.10},{i:.10}");
    }
    std::fs::File::create(path)?.write_all(s.as_bytes())?;
    Ok(())
}
