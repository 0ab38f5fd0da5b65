use std::f64::consts::PI;
use std::sync::Arc;

use super::{DirichletSpec, HarmonicField, Provenance, Symmetry};
use crate::error::{Error, Result};
use crate::geometry::{FiniteDifferenceField, Point2};

const MAX_SWEEPS: usize = 200_000;

/// Polar-grid solution of `Lap_0 u = 0` on `1 < |z| < R`.
#[derive(Debug, Clone)]
pub struct NumericSolution {
    spec: DirichletSpec,
    n_r: usize,
    n_theta: usize,
    /// Row-major `(n_r + 1) x n_theta` nodal values, row `i` at `r_i`.
    values: Arc<Vec<f64>>,
    pub sweeps: usize,
    pub last_update: f64,
}

impl NumericSolution {
    pub fn grid(&self) -> (usize, usize) {
        (self.n_r, self.n_theta)
    }

    fn dr(&self) -> f64 {
        (self.spec.outer_radius - 1.0) / self.n_r as f64
    }

    pub fn node(&self, i: usize, j: usize) -> (Point2, f64) {
        let r = 1.0 + self.dr() * i as f64;
        let th = 2.0 * PI * j as f64 / self.n_theta as f64;
        (Point2::polar(r, th), self.values[i * self.n_theta + j])
    }

    /// `max |u_h - f|` over all grid nodes.
    pub fn max_nodal_error(&self, f: impl Fn(Point2) -> f64) -> f64 {
        let mut err: f64 = 0.0;
        for i in 0..=self.n_r {
            for j in 0..self.n_theta {
                let (p, v) = self.node(i, j);
                err = err.max((v - f(p)).abs());
            }
        }
        err
    }

    /// Piecewise-cubic interpolant of the nodal values, wrapped as a field
    /// with finite-difference derivatives.
    pub fn field(&self) -> HarmonicField {
        let values = self.values.clone();
        let (n_r, n_t) = (self.n_r, self.n_theta);
        let r_out = self.spec.outer_radius;
        let dr = self.dr();
        let interp = move |p: Point2| -> f64 {
            let r = p.norm();
            if !(r >= 1.0 - 1e-12 && r <= r_out + 1e-12) {
                return f64::NAN;
            }
            let s = ((r - 1.0) / dr).clamp(0.0, n_r as f64);
            let i0 = (s.floor() as usize).saturating_sub(1).min(n_r.saturating_sub(3));
            let th = p.y.atan2(p.x).rem_euclid(2.0 * PI);
            let q = th / (2.0 * PI) * n_t as f64;
            let j0 = q.floor() as i64 - 1;
            let mut acc = 0.0;
            for a in 0..4 {
                let wa = lagrange(s - i0 as f64, a);
                for b in 0..4 {
                    let wb = lagrange(q - j0 as f64, b);
                    let j = (j0 + b as i64).rem_euclid(n_t as i64) as usize;
                    acc += wa * wb * values[(i0 + a) * n_t + j];
                }
            }
            acc
        };
        let fd = FiniteDifferenceField::new("numeric_grid", 2.0 * r_out, interp).with_step(dr);
        HarmonicField::new(
            format!("numeric(R={}, {}x{})", r_out, n_r, n_t),
            fd,
            Provenance::NumericGrid,
            Symmetry::None,
        )
    }
}

/// Cubic Lagrange basis on nodes 0, 1, 2, 3.
fn lagrange(x: f64, k: usize) -> f64 {
    let mut w = 1.0;
    for m in 0..4 {
        if m != k {
            w *= (x - m as f64) / (k as f64 - m as f64);
        }
    }
    w
}

/// Second-order conservative finite differences on a polar grid with `n_r`
/// radial intervals and `n_theta` angular nodes, solved by SOR.
pub fn solve_annulus_numeric(spec: DirichletSpec, grid: (usize, usize)) -> Result<NumericSolution> {
    spec.validate()?;
    let (n_r, n_t) = grid;
    if n_r < 8 || n_t < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid must be at least 8 x 16, got {n_r} x {n_t}"
        )));
    }
    let big_r = spec.outer_radius;
    let dr = (big_r - 1.0) / n_r as f64;
    let dth = 2.0 * PI / n_t as f64;

    let mut u = vec![0.0; (n_r + 1) * n_t];
    for i in 0..=n_r {
        let v = spec.t1 + spec.span() * i as f64 / n_r as f64;
        u[i * n_t..(i + 1) * n_t].fill(v);
    }
    if spec.t1 == spec.t2 {
        return Ok(NumericSolution {
            spec,
            n_r,
            n_theta: n_t,
            values: Arc::new(u),
            sweeps: 0,
            last_update: 0.0,
        });
    }

    let coeffs: Vec<[f64; 3]> = (0..=n_r)
        .map(|i| {
            let r = 1.0 + dr * i as f64;
            [
                (r + 0.5 * dr) / (r * dr * dr),
                (r - 0.5 * dr) / (r * dr * dr),
                1.0 / (r * r * dth * dth),
            ]
        })
        .collect();
    let [ap, am, c] = coeffs[1];
    let rho = 1.0 - (ap + am) * 0.5 * (1.0 - (PI / n_r as f64).cos()) / ((ap + am) * 0.5 + c);
    let omega = 2.0 / (1.0 + (1.0 - rho * rho).sqrt());
    let tol = 1e-14 * (1.0 + spec.t1.abs().max(spec.t2.abs()));

    for sweep in 1..=MAX_SWEEPS {
        let mut max_update: f64 = 0.0;
        for i in 1..n_r {
            let [ap, am, c] = coeffs[i];
            let diag = ap + am + 2.0 * c;
            for j in 0..n_t {
                let jp = if j + 1 == n_t { 0 } else { j + 1 };
                let jm = if j == 0 { n_t - 1 } else { j - 1 };
                let k = i * n_t + j;
                let gs = (ap * u[k + n_t] + am * u[k - n_t] + c * (u[i * n_t + jp] + u[i * n_t + jm])) / diag;
                let delta = omega * (gs - u[k]);
                u[k] += delta;
                max_update = max_update.max(delta.abs());
            }
        }
        if max_update < tol {
            return Ok(NumericSolution {
                spec,
                n_r,
                n_theta: n_t,
                values: Arc::new(u),
                sweeps: sweep,
                last_update: max_update,
            });
        }
        if sweep == MAX_SWEEPS || !max_update.is_finite() {
            return Err(Error::NonConvergence {
                iterations: sweep,
                residual: max_update,
            });
        }
    }
    unreachable!("loop returns on the last sweep")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScalarField;
    use std::f64::consts::E;

    #[test]
    fn converges_at_second_order() {
        let spec = DirichletSpec::new(E, 0.0, 1.0);
        let exact = |p: Point2| p.norm().ln();
        let coarse = solve_annulus_numeric(spec, (64, 128)).unwrap();
        let fine = solve_annulus_numeric(spec, (128, 256)).unwrap();
        let e1 = coarse.max_nodal_error(exact);
        let e2 = fine.max_nodal_error(exact);
        assert!(e1 <= 5e-4, "{e1}");
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn constant_data_is_exact() {
        let s = solve_annulus_numeric(DirichletSpec::new(2.0, 0.3, 0.3), (8, 16)).unwrap();
        assert_eq!(s.max_nodal_error(|_| 0.3), 0.0);
    }

    #[test]
    fn interpolated_field_tracks_closed_form() {
        let s = solve_annulus_numeric(DirichletSpec::new(E, 0.0, 1.0), (32, 64)).unwrap();
        let u = s.field();
        let p = Point2::polar(1.6, 0.3);
        assert!((u.value(p).unwrap() - 1.6f64.ln()).abs() < 1e-3);
        let g = u.jet_to(p, 1).unwrap().gradient();
        assert!((g[0].hypot(g[1]) - 1.0 / 1.6).abs() < 1e-2);
    }

    #[test]
    fn tiny_grids_are_rejected() {
        assert!(solve_annulus_numeric(DirichletSpec::new(2.0, 0.0, 1.0), (4, 16)).is_err());
    }
}
