//! Fundamental solution and the analytically time-integrated kernels.
//!
//! Component indices are zero-based throughout (`0` is x, `1` is y).

mod hypersingular;
mod oracle;

pub use hypersingular::{kernel_w, kernel_w_matrix, RadialCoeffs, SingularSplit, WSeries, W_SERIES_RATIO};
pub(crate) use hypersingular::{coeffs_at, contract};
pub use oracle::{traction_of_kernel_v_fd, FdTraction};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::model::Material;
use std::f64::consts::PI;

/// Space-time argument of a kernel evaluation.
#[derive(Debug, Clone, Copy)]
pub struct KernelArgs<'m> {
    pub r_vec: Point,
    pub r: f64,
    pub delta: f64,
    pub material: &'m Material,
}

impl<'m> KernelArgs<'m> {
    pub fn new(r_vec: Point, delta: f64, material: &'m Material) -> Self {
        KernelArgs {
            r_vec,
            r: r_vec[0].hypot(r_vec[1]),
            delta,
            material,
        }
    }
}

/// Which wavefronts have passed the point `r` after time `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavefrontState {
    pub s_active: bool,
    pub p_active: bool,
}

impl WavefrontState {
    /// Heaviside gating with `H[0] = 0`.
    pub fn of(r: f64, delta: f64, m: &Material) -> Self {
        WavefrontState {
            s_active: m.c_s * delta - r > 0.0,
            p_active: m.c_p * delta - r > 0.0,
        }
    }
}

#[inline]
fn delta_ij(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

fn check_indices(i: usize, j: usize) -> Result<()> {
    if i > 1 || j > 1 {
        return Err(Error::Index(format!("component ({i}, {j})")));
    }
    Ok(())
}

/// `G_ij(x, ξ; t, τ)` with `args.delta = t - τ`; infinite on a wavefront.
pub fn fundamental_solution(i: usize, j: usize, args: &KernelArgs) -> Result<f64> {
    check_indices(i, j)?;
    let m = args.material;
    let (r, t) = (args.r, args.delta);
    if r == 0.0 {
        return Err(Error::Singular("fundamental solution"));
    }
    let rr = args.r_vec[i] * args.r_vec[j] / (r * r * r * r);
    let d = delta_ij(i, j) / (r * r);
    let mut g = 0.0;
    let front = |c: f64| c * t - r;
    for (c, sign) in [(m.c_p, 1.0), (m.c_s, -1.0)] {
        let f = front(c);
        if f == 0.0 {
            return Ok(f64::INFINITY);
        }
        if f < 0.0 {
            continue;
        }
        let ct2 = c * c * t * t;
        let root = (ct2 - r * r).sqrt();
        let brace = if sign > 0.0 {
            rr * (2.0 * ct2 - r * r) / root - d * root
        } else {
            rr * (2.0 * ct2 - r * r) / root - d * ct2 / root
        };
        g += sign * brace / (2.0 * PI * m.rho * c);
    }
    Ok(g)
}

/// `φ_γ = sqrt(c²Δ² − r²)`.
pub fn phi(r: f64, delta: f64, c: f64) -> Result<f64> {
    let s = c * c * delta * delta - r * r;
    if r < 0.0 || s < 0.0 {
        return Err(Error::Domain(format!("phi outside the light cone (r = {r}, c*delta = {})", c * delta)));
    }
    Ok(s.sqrt())
}

/// `φ̂_γ = log(φ_γ + cΔ) − log r`.
pub fn phi_hat(r: f64, delta: f64, c: f64) -> Result<f64> {
    if r == 0.0 {
        return Err(Error::Singular("phi_hat"));
    }
    let p = phi(r, delta, c)?;
    Ok((p + c * delta).ln() - r.ln())
}

/// Coefficient of `δ_ij log r` in ν^V once both fronts have passed.
pub fn v_log_coefficient(m: &Material) -> f64 {
    let (p2, s2) = (m.c_p * m.c_p, m.c_s * m.c_s);
    -(p2 + s2) / (2.0 * p2 * s2)
}

/// ν^V as `[ν_11, ν_12, ν_22]`, using the reduced form where both fronts have passed.
#[inline]
pub fn kernel_v_sym(r_vec: Point, delta: f64, m: &Material) -> [f64; 3] {
    let r = r_vec[0].hypot(r_vec[1]);
    let (cp, cs) = (m.c_p, m.c_s);
    if cp * delta - r <= 0.0 {
        return [0.0; 3];
    }
    let (e0, e1) = (r_vec[0] / r, r_vec[1] / r);
    let d11 = e0 * e0 - 0.5;
    let d12 = e0 * e1;
    let d22 = e1 * e1 - 0.5;
    let phi_p = (cp * cp * delta * delta - r * r).sqrt();
    if cs * delta - r > 0.0 {
        let phi_s = (cs * cs * delta * delta - r * r).sqrt();
        let f = (cp * cp - cs * cs) / (cp * cs) * delta / (cp * phi_s + cs * phi_p);
        let diag = v_log_coefficient(m) * r.ln()
            + 0.5 * ((cp * delta + phi_p).ln() / (cp * cp) + (cs * delta + phi_s).ln() / (cs * cs));
        [f * d11 + diag, f * d12, f * d22 + diag]
    } else {
        let f = delta * phi_p / (cp * r * r);
        let diag = 0.5 * ((phi_p + cp * delta).ln() - r.ln()) / (cp * cp);
        [f * d11 + diag, f * d12, f * d22 + diag]
    }
}

/// ν^V minus its `δ_ij log r` part; smooth in `r` while both fronts are passed.
#[inline]
pub fn kernel_v_regular(r_vec: Point, delta: f64, m: &Material) -> [f64; 3] {
    let r = r_vec[0].hypot(r_vec[1]);
    let (cp, cs) = (m.c_p, m.c_s);
    debug_assert!(cs * delta > r);
    let (e0, e1) = if r > 0.0 { (r_vec[0] / r, r_vec[1] / r) } else { (1.0, 0.0) };
    let phi_p = (cp * cp * delta * delta - r * r).sqrt();
    let phi_s = (cs * cs * delta * delta - r * r).sqrt();
    let f = (cp * cp - cs * cs) / (cp * cs) * delta / (cp * phi_s + cs * phi_p);
    let diag = 0.5 * ((cp * delta + phi_p).ln() / (cp * cp) + (cs * delta + phi_s).ln() / (cs * cs));
    [
        f * (e0 * e0 - 0.5) + diag,
        f * e0 * e1,
        f * (e1 * e1 - 0.5) + diag,
    ]
}

#[inline]
fn sym_get(v: [f64; 3], i: usize, j: usize) -> f64 {
    match (i, j) {
        (0, 0) => v[0],
        (1, 1) => v[2],
        _ => v[1],
    }
}

/// ν^V_ij; equals the reduced form once both fronts have passed.
pub fn kernel_v(i: usize, j: usize, args: &KernelArgs) -> Result<f64> {
    check_indices(i, j)?;
    if args.r == 0.0 {
        return Err(Error::Singular("kernel_v"));
    }
    Ok(sym_get(kernel_v_sym(args.r_vec, args.delta, args.material), i, j))
}

/// ν^V_ij from the general two-front expression, without the small-r rearrangement.
pub fn kernel_v_general(i: usize, j: usize, args: &KernelArgs) -> Result<f64> {
    check_indices(i, j)?;
    let m = args.material;
    let (r, d) = (args.r, args.delta);
    if r == 0.0 {
        return Err(Error::Singular("kernel_v_general"));
    }
    let st = WavefrontState::of(r, d, m);
    let dir = args.r_vec[i] * args.r_vec[j] / (r * r * r * r) - 0.5 * delta_ij(i, j) / (r * r);
    let mut first = 0.0;
    let mut second = 0.0;
    for (active, c) in [(st.p_active, m.c_p), (st.s_active, m.c_s)] {
        if !active {
            continue;
        }
        let sign = if c == m.c_p { 1.0 } else { -1.0 };
        first += sign * phi(r, d, c)? / c;
        second += phi_hat(r, d, c)? / (c * c);
    }
    Ok(d * dir * first + 0.5 * delta_ij(i, j) * second)
}
