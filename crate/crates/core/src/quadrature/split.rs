//! Splitting an inner element at the wavefront circles around a field point.

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::model::Material;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Both fronts have passed.
    SAndP,
    POnly,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSegments {
    /// `(t0, t1, regime)` in the inner element's parameter `t ∈ [0, 1]`.
    pub pieces: Vec<(f64, f64, Regime)>,
}

impl SplitSegments {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.pieces.iter().map(|p| p.0).collect();
        if let Some(last) = self.pieces.last() {
            b.push(last.1);
        }
        b
    }
}

/// Parameters `t ∈ (0, 1)` where `|a + t (b − a) − x| = radius`, ascending.
pub fn circle_crossings(a: Point, b: Point, x: Point, radius: f64) -> Vec<f64> {
    let d = geom::sub(b, a);
    let f = geom::sub(a, x);
    let qa = geom::dot(d, d);
    let qb = 2.0 * geom::dot(d, f);
    let qc = geom::dot(f, f) - radius * radius;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 || qa == 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (qb + qb.signum() * sq);
    let (mut t1, mut t2) = if q != 0.0 { (q / qa, qc / q) } else { (-sq / (2.0 * qa), sq / (2.0 * qa)) };
    if t1 > t2 {
        std::mem::swap(&mut t1, &mut t2);
    }
    [t1, t2].into_iter().filter(|&t| t > 0.0 && t < 1.0).collect()
}

/// Splits the segment `[a, b]` where the S and P fronts centred at `x` after time `delta` cross it.
pub fn split_at_wavefronts(a: Point, b: Point, x: Point, delta: f64, material: &Material) -> Result<SplitSegments> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("time lag {delta} must be positive")));
    }
    if geom::norm(geom::sub(b, a)) == 0.0 {
        return Err(Error::Geometry("degenerate element".into()));
    }
    let mut cuts = vec![0.0, 1.0];
    for c in [material.c_s, material.c_p] {
        cuts.extend(circle_crossings(a, b, x, c * delta));
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
    let pieces = cuts
        .windows(2)
        .map(|w| {
            let mid = geom::lerp(a, b, 0.5 * (w[0] + w[1]));
            let r = geom::norm(geom::sub(mid, x));
            let regime = if r < material.c_s * delta {
                Regime::SAndP
            } else if r < material.c_p * delta {
                Regime::POnly
            } else {
                Regime::None
            };
            (w[0], w[1], regime)
        })
        .collect();
    Ok(SplitSegments { pieces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_segment_from_its_endpoint() {
        let m = Material::from_wave_speeds(1.6, 1.0, 1.0).unwrap();
        let s = split_at_wavefronts([0.0, 0.0], [1.0, 0.0], [0.0, 0.0], 0.5, &m).unwrap();
        assert_eq!(s.pieces.len(), 3);
        assert!((s.pieces[0].1 - 0.5).abs() < 1e-15);
        assert!((s.pieces[1].1 - 0.8).abs() < 1e-15);
        assert_eq!(
            s.pieces.iter().map(|p| p.2).collect::<Vec<_>>(),
            vec![Regime::SAndP, Regime::POnly, Regime::None]
        );
        assert!(split_at_wavefronts([0.0, 0.0], [1.0, 0.0], [0.0, 0.0], 0.0, &m).is_err());
    }
}
