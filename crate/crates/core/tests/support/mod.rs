//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use tdbem::basis::lagrange_values;
use tdbem::kernels::kernel_v_sym;
use tdbem::model::Material;
use tdbem::quadrature::PairElement;

/// Tanh–sinh rule on `[a, b]` with step `1/32`.
pub fn tanh_sinh(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = 1.0 / 32.0;
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for k in -200i32..=200 {
        let t = k as f64 * h;
        let u = 0.5 * std::f64::consts::PI * t.sinh();
        let x = u.tanh();
        let w = 0.5 * std::f64::consts::PI * t.cosh() / (u.cosh() * u.cosh());
        if w < 1e-300 || x.abs() >= 1.0 {
            continue;
        }
        // distance to the endpoints without cancellation
        let e = 1.0 / (u.abs().exp() * u.cosh());
        let y = if x < 0.0 { a + half * e } else { b - half * e };
        s += h * w * half * f(y);
    }
    s
}

pub fn pieces(mut cuts: Vec<f64>, f: &mut impl FnMut(f64) -> f64) -> f64 {
    cuts.retain(|&t| (0.0..=1.0).contains(&t));
    cuts.extend([0.0, 1.0]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    cuts.windows(2).map(|w| tanh_sinh(w[0], w[1], &mut *f)).sum()
}

pub fn lerp(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

pub fn crossings(a: [f64; 2], b: [f64; 2], x: [f64; 2], r: f64) -> Vec<f64> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let f = [a[0] - x[0], a[1] - x[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    let qb = 2.0 * (d[0] * f[0] + d[1] * f[1]);
    let qc = f[0] * f[0] + f[1] * f[1] - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return vec![];
    }
    vec![(-qb - disc.sqrt()) / (2.0 * qa), (-qb + disc.sqrt()) / (2.0 * qa)]
}

pub fn foot(a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    ((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1])
}

/// Brute-force `∫∫ N_a N_b K_ij` with inner cuts at the singular point and front crossings.
pub fn brute_force(
    e1: &PairElement,
    e2: &PairElement,
    a: usize,
    b: usize,
    fronts: &[f64],
    kernel: &dyn Fn([f64; 2]) -> [[f64; 2]; 2],
) -> [[f64; 2]; 2] {
    let l1 = ((e1.p1[0] - e1.p0[0]).powi(2) + (e1.p1[1] - e1.p0[1]).powi(2)).sqrt();
    let l2 = ((e2.p1[0] - e2.p0[0]).powi(2) + (e2.p1[1] - e2.p0[1]).powi(2)).sqrt();
    // outer cuts: circles around the inner endpoints, tangency and the inner element's footprint
    let mut outer = vec![foot(e1.p0, e1.p1, e2.p0), foot(e1.p0, e1.p1, e2.p1)];
    let d2 = [(e2.p1[0] - e2.p0[0]) / l2, (e2.p1[1] - e2.p0[1]) / l2];
    let n2 = [-d2[1], d2[0]];
    let sd = |p: [f64; 2]| (p[0] - e2.p0[0]) * n2[0] + (p[1] - e2.p0[1]) * n2[1];
    for &r in fronts {
        outer.extend(crossings(e1.p0, e1.p1, e2.p0, r));
        outer.extend(crossings(e1.p0, e1.p1, e2.p1, r));
        let (s0, s1) = (sd(e1.p0), sd(e1.p1));
        if s0 != s1 {
            outer.push((r - s0) / (s1 - s0));
            outer.push((-r - s0) / (s1 - s0));
        }
    }
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut fo = |t1: f64| {
                let x = lerp(e1.p0, e1.p1, t1);
                let mut n1 = [0.0; 13];
                lagrange_values(e1.degree, t1, &mut n1);
                let mut inner = vec![foot(e2.p0, e2.p1, x)];
                for &r in fronts {
                    inner.extend(crossings(e2.p0, e2.p1, x, r));
                }
                let mut fi = |t2: f64| {
                    let xi = lerp(e2.p0, e2.p1, t2);
                    let mut n2 = [0.0; 13];
                    lagrange_values(e2.degree, t2, &mut n2);
                    let rv = [x[0] - xi[0], x[1] - xi[1]];
                    if rv[0] == 0.0 && rv[1] == 0.0 {
                        return 0.0;
                    }
                    kernel(rv)[i][j] * n2[b]
                };
                n1[a] * pieces(inner, &mut fi)
            };
            out[i][j] = l1 * l2 * pieces(outer.clone(), &mut fo);
        }
    }
    out
}

pub fn v_matrix(rv: [f64; 2], d: f64, m: &Material) -> [[f64; 2]; 2] {
    let v = kernel_v_sym(rv, d, m);
    [[v[0], v[1]], [v[1], v[2]]]
}

// ---- Legendre functions against a double-double hypergeometric series ----

#[derive(Clone, Copy)]
pub struct Dd(f64, f64);

impl Dd {
    fn from(x: f64) -> Dd {
        Dd(x, 0.0)
    }
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }
    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.0, o.0);
        let t = Dd::two_sum(self.1, o.1);
        let r = Dd::two_sum(s.0, s.1 + t.0);
        Dd::two_sum(r.0, r.1 + t.1)
    }
    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        Dd::two_sum(p, e + self.0 * o.1 + self.1 * o.0)
    }
    fn div(self, d: Dd) -> Dd {
        let q1 = self.0 / d.0;
        let r = self.add(d.mul(Dd::from(-q1)));
        let q2 = r.0 / d.0;
        let r = r.add(d.mul(Dd::from(-q2)));
        let q3 = r.0 / d.0;
        Dd::two_sum(q1, q2).add(Dd::from(q3))
    }
}

/// `2F1(−α, α+1; 1; (1−x)/2)` summed in double-double until the terms drop below 1e-32.
pub fn legendre_oracle(alpha: f64, x: f64) -> f64 {
    let one = Dd::from(1.0);
    let z = one.add(Dd::from(-x)).div(Dd::from(2.0));
    let a = Dd::from(alpha);
    let mut term = one;
    let mut sum = one;
    for n in 0..200_000 {
        let nn = Dd::from(n as f64);
        let num = nn.add(Dd(-a.0, -a.1)).mul(nn.add(a).add(one));
        let den = nn.add(one).mul(nn.add(one));
        term = term.mul(num).div(den).mul(z);
        sum = sum.add(term);
        if term.0.abs() < 1e-32 * sum.0.abs().max(1e-300) && n > 4 {
            break;
        }
    }
    sum.0 + sum.1
}

