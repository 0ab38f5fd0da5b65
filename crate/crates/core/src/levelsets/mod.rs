//! Level curves `{u = t}`, the length functional `L(t)` and its derivatives.
//!
//! For a level curve with unit normal `nu = grad u / |grad u|` and
//! `n = |grad u|_g`, moving the level by `dt` displaces each point by
//! `nu dt / n`, and the line element changes at the rate
//! `-k / n = <-nu, grad n> / n^2`. Hence
//!
//! ```text
//! L'(t)  = int <-grad u / n, grad n / n^2> dH^1
//! L''(t) = int |grad n|^2 / n^4 - K / n^2 dH^1
//! ```
//!
//! where the second line uses the two-dimensional Kato equality and
//! `Lap log n = K`. In a diagonal chart `g(a, b) = a_x b_x / E + a_y b_y / G`
//! for covectors, and `grad n` is taken from the jet of `n = sqrt(g(du, du))`.
//! Curve integrals are `sum F(p_i) sqrt(E tau_x^2 + G tau_y^2) w_i` with
//! Euclidean arclength weights `w_i`.

mod checks;
mod integrals;
mod profile;
mod trace;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Chart, Point2, ScalarField};
use crate::harmonic::{HarmonicField, Symmetry};

pub use checks::{
    asymptotic_defect, log_convexity_check, pinched_bound_check, sharp_bound_gap,
    sharp_bound_gap_unchecked, ConvexityReport,
};
pub use integrals::{
    aux_invgrad2, curvature_flux_integral, d2length_integral, dlength_integral, length,
    level_integrals, LevelIntegrals,
};
pub use profile::{
    fd_convergence, inset_grid, length_profile, FdConvergence, LengthProfile, ProfileDerivatives,
    ProfileOptions, PROFILE_COLUMNS,
};

/// Default number of samples per level curve.
pub const DEFAULT_SAMPLES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub p: Point2,
    /// Unit Euclidean tangent in chart coordinates.
    pub tangent: [f64; 2],
    /// Euclidean arclength quadrature weight.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CurveShape {
    Circle { center: Point2, radius: f64 },
    /// `{t = const}` on a warped chart.
    Meridian { t: f64 },
    /// Traced, then parametrized by polar angle about `center`.
    StarShaped { center: Point2 },
    /// Traced and parametrized by chord length (second order only).
    Traced,
}

/// A sampled closed level curve. Samples are ordered counterclockwise and the
/// weights form a periodic trapezoid rule in the curve parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCurve {
    pub level: f64,
    pub samples: Vec<CurveSample>,
    pub closed: bool,
    pub shape: CurveShape,
}

impl LevelCurve {
    /// Uniform samples on a circle, starting at polar angle `phase`.
    pub fn circle(level: f64, center: Point2, radius: f64, n: usize, phase: f64) -> Self {
        let dth = 2.0 * PI / n as f64;
        let samples = (0..n)
            .map(|i| {
                let th = phase + dth * i as f64;
                let (s, c) = th.sin_cos();
                CurveSample {
                    p: Point2::new(center.x + radius * c, center.y + radius * s),
                    tangent: [-s, c],
                    weight: radius * dth,
                }
            })
            .collect();
        Self {
            level,
            samples,
            closed: true,
            shape: CurveShape::Circle { center, radius },
        }
    }

    fn meridian(level: f64, t: f64, n: usize) -> Self {
        let dth = 2.0 * PI / n as f64;
        let samples = (0..n)
            .map(|i| CurveSample {
                p: Point2::new(t, dth * i as f64),
                tangent: [0.0, 1.0],
                weight: dth,
            })
            .collect();
        Self {
            level,
            samples,
            closed: true,
            shape: CurveShape::Meridian { t },
        }
    }

    /// Sum of the Euclidean weights.
    pub fn euclidean_length(&self) -> f64 {
        let w: Vec<f64> = self.samples.iter().map(|s| s.weight).collect();
        crate::quadrature::pairwise_sum(&w)
    }

    /// `max |u(p_i) - t|` over the samples.
    pub fn max_level_error(&self, u: &dyn ScalarField) -> Result<f64> {
        let mut e: f64 = 0.0;
        for s in &self.samples {
            e = e.max((u.value(s.p)? - self.level).abs());
        }
        Ok(e)
    }
}

/// Extracts `{u = t}` with `n_samples` points. Radial fields give exact
/// circles, radial fields on warped charts give `t = u^{-1}(level)` by
/// bisection, and anything else is traced.
pub fn extract_level_curve(
    u: &HarmonicField,
    chart: &Chart,
    t: f64,
    n_samples: usize,
) -> Result<LevelCurve> {
    if n_samples < 8 {
        return Err(Error::InvalidParameter(format!(
            "need at least 8 samples per curve, got {n_samples}"
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("level must be finite, got {t}")));
    }
    match (chart, u.symmetry()) {
        (Chart::Warped(w), Symmetry::WarpedRadial) => {
            let (lo, hi) = w.t_range();
            let tc = invert_monotone(|s| u.value(Point2::new(s, 0.0)), lo, hi, t)?;
            Ok(LevelCurve::meridian(t, tc, n_samples))
        }
        (Chart::Warped(_), _) => Err(Error::InvalidParameter(
            "warped charts support radial fields only".into(),
        )),
        (Chart::Conformal(_), Symmetry::WarpedRadial) => Err(Error::InvalidParameter(
            "warped-radial field on a conformal chart".into(),
        )),
        (Chart::Conformal(_), Symmetry::RadialLog { center, a, b }) => {
            if b == 0.0 {
                return Err(Error::Topology {
                    level: t,
                    reason: "field is constant".into(),
                });
            }
            let radius = ((t - a) / b).exp();
            let curve = LevelCurve::circle(t, center, radius, n_samples, 0.0);
            if !radius.is_finite() || curve.samples.iter().any(|s| !chart.contains(s.p)) {
                return Err(Error::Topology {
                    level: t,
                    reason: format!("level circle of radius {radius:.6e} leaves the chart"),
                });
            }
            Ok(curve)
        }
        (Chart::Conformal(_), Symmetry::None) => trace::trace_level(u, chart, t, n_samples),
    }
}

/// Solves `f(s) = target` for monotone `f` on `[lo, hi]` by bisection.
fn invert_monotone(
    f: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    target: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)? - target, f(b)? - target);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Topology {
            level: target,
            reason: format!("level is outside the field range on [{lo}, {hi}]"),
        });
    }
    let increasing = fb > fa;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)? - target;
        if (fm > 0.0) == increasing {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{factors, ConformalChart, WarpedChart};
    use crate::harmonic::{catalog_field, solve_annulus_dirichlet, DirichletSpec};

    #[test]
    fn log_level_is_exact_circle() {
        let chart: Chart = ConformalChart::annulus(3.0, factors::flat(0.0)).unwrap().into();
        let u = solve_annulus_dirichlet(DirichletSpec::canonical(3.0)).unwrap();
        let c = extract_level_curve(&u, &chart, -0.5, 64).unwrap();
        for s in &c.samples {
            assert!((s.p.norm() - 0.5f64.exp()).abs() <= 1e-10);
        }
        assert!(c.max_level_error(&u).unwrap() <= 1e-12);
        assert!((c.euclidean_length() - 2.0 * PI * 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn levels_outside_the_annulus_are_topology_errors() {
        let chart: Chart = ConformalChart::annulus(2.0, factors::flat(0.0)).unwrap().into();
        let u = solve_annulus_dirichlet(DirichletSpec::canonical(2.0)).unwrap();
        assert!(matches!(
            extract_level_curve(&u, &chart, 0.5, 64),
            Err(Error::Topology { .. })
        ));
    }

    #[test]
    fn warped_level_by_root_finding() {
        let chart: Chart = WarpedChart::hyperbolic_quotient(std::f64::consts::E.powi(2), -3.0, 3.0)
            .unwrap()
            .into();
        let u = catalog_field("warped_arctan", &[]).unwrap();
        for s in [0.4, 1.0, PI / 2.0, 2.5] {
            let c = extract_level_curve(&u, &chart, s, 32).unwrap();
            let CurveShape::Meridian { t } = c.shape else {
                panic!("expected meridian")
            };
            assert!((t - (s / 2.0).tan().ln()).abs() < 1e-12);
        }
        assert!(extract_level_curve(&u, &chart, 3.1, 32).is_err());
    }
}
