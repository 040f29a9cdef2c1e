//! Finite-difference route to ν^W: both traction operators applied numerically to
//! the single-layer kernel integrated once more in time.

use crate::geom::Point;
use crate::model::Material;
use crate::quadrature::gauss_legendre_nodes;

use super::{kernel_v_sym, KernelArgs};

#[derive(Debug, Clone, Copy)]
pub struct FdTraction {
    pub value: [[f64; 2]; 2],
    /// False when the stencil comes within a few steps of a wavefront or of `r = 0`.
    pub reliable: bool,
}

/// `∫_0^Δ (Δ − s) ν^V(r_vec; s) ds`, integrated piecewise between the front arrival times.
fn twice_integrated_v(r_vec: Point, delta: f64, m: &Material) -> [f64; 3] {
    let r = r_vec[0].hypot(r_vec[1]);
    let mut cuts = vec![r / m.c_p, r / m.c_s, delta];
    cuts.retain(|&c| c <= delta);
    let (x, w) = gauss_legendre_nodes(40);
    let mut out = [0.0; 3];
    for k in 0..cuts.len() - 1 {
        let (u, v) = (cuts[k], cuts[k + 1]);
        if v <= u {
            continue;
        }
        // s = u + (v − u) τ² removes the square-root onset at each arrival time
        for q in 0..x.len() {
            let tau = x[q];
            let s = u + (v - u) * tau * tau;
            let jac = 2.0 * (v - u) * tau * w[q];
            let nu = kernel_v_sym(r_vec, s, m);
            for c in 0..3 {
                out[c] += jac * (delta - s) * nu[c];
            }
        }
    }
    out
}

/// ν^W by central differences with step `h` in each Cartesian direction.
pub fn traction_of_kernel_v_fd(args: &KernelArgs, normals: (Point, Point), h: f64) -> FdTraction {
    let m = args.material;
    let (n, q) = normals;
    let r0 = args.r_vec;
    let f = |dx: f64, dy: f64| twice_integrated_v([r0[0] + dx, r0[1] + dy], args.delta, m);
    let unit = |l: usize| if l == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
    // d2[k][k'][l][l'] = ∂_l ∂_l' F_kk'
    let mut d2 = [[[[0.0; 2]; 2]; 2]; 2];
    for l in 0..2 {
        for lp in 0..2 {
            let (a, b) = (unit(l), unit(lp));
            let pp = f(h * (a[0] + b[0]), h * (a[1] + b[1]));
            let pm = f(h * (a[0] - b[0]), h * (a[1] - b[1]));
            let mp = f(-h * (a[0] - b[0]), -h * (a[1] - b[1]));
            let mm = f(-h * (a[0] + b[0]), -h * (a[1] + b[1]));
            for c in 0..3 {
                let v = (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * h * h);
                let (k, kp) = match c {
                    0 => (0, 0),
                    1 => (0, 1),
                    _ => (1, 1),
                };
                d2[k][kp][l][lp] = v;
                d2[kp][k][l][lp] = v;
            }
        }
    }
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let amat = |nn: Point, i: usize, k: usize, l: usize| {
        m.lambda * nn[i] * d(k, l) + m.mu * (d(i, k) * nn[l] + d(i, l) * nn[k])
    };
    let mut value = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut s = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    for kp in 0..2 {
                        for lp in 0..2 {
                            s += amat(n, i, k, l) * amat(q, j, kp, lp) * d2[k][kp][l][lp];
                        }
                    }
                }
            }
            value[i][j] = s;
        }
    }
    let margin = 3.0 * h;
    let r = args.r;
    let near_front = [m.c_s, m.c_p]
        .iter()
        .any(|c| (c * args.delta - r).abs() < margin);
    FdTraction {
        value,
        reliable: !near_front && r > 10.0 * h,
    }
}
