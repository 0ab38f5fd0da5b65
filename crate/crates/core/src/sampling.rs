//! Deterministic quasi-random point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::geometry::Point2;

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    inv = r;
    inv
}

/// `n` points of the 2-D Halton sequence in the unit square, shifted by a
/// seeded Cranley-Patterson rotation.
pub fn halton_unit_square(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sx, sy): (f64, f64) = if seed == 0 {
        (0.0, 0.0)
    } else {
        (rng.random(), rng.random())
    };
    (1..=n as u64)
        .map(|i| {
            (
                (radical_inverse(i, 2) + sx).fract(),
                (radical_inverse(i, 3) + sy).fract(),
            )
        })
        .collect()
}

/// Area-uniform quasi-random points in `r_in < |z - center| < r_out`.
pub fn annulus_points(n: usize, center: Point2, r_in: f64, r_out: f64, seed: u64) -> Vec<Point2> {
    halton_unit_square(n, seed)
        .into_iter()
        .map(|(a, b)| {
            let r = (r_in * r_in + a * (r_out * r_out - r_in * r_in)).sqrt();
            let r = r.clamp(r_in * (1.0 + 1e-9), r_out * (1.0 - 1e-9));
            let th = 2.0 * PI * b;
            Point2::new(center.x + r * th.cos(), center.y + r * th.sin())
        })
        .collect()
}

/// Quasi-random points in the rectangle `[x0, x1] x [y0, y1]`.
pub fn rect_points(n: usize, x: (f64, f64), y: (f64, f64), seed: u64) -> Vec<Point2> {
    halton_unit_square(n, seed)
        .into_iter()
        .map(|(a, b)| Point2::new(x.0 + a * (x.1 - x.0), y.0 + b * (y.1 - y.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_are_inside_and_deterministic() {
        let a = annulus_points(100, Point2::ORIGIN, 1.0, 2.0, 7);
        let b = annulus_points(100, Point2::ORIGIN, 1.0, 2.0, 7);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.norm() > 1.0 && p.norm() < 2.0));
        let c = annulus_points(100, Point2::ORIGIN, 1.0, 2.0, 8);
        assert_ne!(a, c);
    }
}
