use serde::Serialize;

use super::{extract_level_curve, CurveShape, LevelCurve};
use crate::error::{Error, Result};
use crate::geometry::{Chart, Local, Point2, ScalarField};
use crate::harmonic::HarmonicField;
use crate::quadrature::{adaptive, pairwise_sum, AdaptiveOptions};

/// All level-set integrals of one curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelIntegrals {
    pub level: f64,
    /// `L = int dH^1`.
    pub length: f64,
    /// `int <-grad u / n, grad n / n^2> dH^1`.
    pub dlength: f64,
    /// `int |grad n|^2 / n^4 - K / n^2 dH^1`.
    pub d2length: f64,
    /// `int n^{-2} dH^1`.
    pub aux_invgrad2: f64,
    /// `int k / n dH^1`; equals `-L'`.
    pub curvature_flux: f64,
    /// Smallest and largest Gaussian curvature over the samples.
    pub gauss_range: (f64, f64),
}

fn circle_near_singularity(curve: &LevelCurve, chart: &Chart) -> Option<(Point2, f64, Vec<f64>)> {
    let CurveShape::Circle { center, radius } = curve.shape else {
        return None;
    };
    let near = 40.0 * radius / curve.samples.len() as f64;
    let angles: Vec<f64> = chart
        .singular_points()
        .iter()
        .filter(|s| (s.dist(center) - radius).abs() < near)
        .map(|s| (s.y - center.y).atan2(s.x - center.x).rem_euclid(std::f64::consts::TAU))
        .collect();
    (!angles.is_empty()).then_some((center, radius, angles))
}

/// Metric length of a sampled curve. Circles passing close to a declared
/// singular point of the chart switch to adaptive quadrature in the angle with
/// breakpoints at the singular directions.
pub fn length(curve: &LevelCurve, chart: &Chart) -> Result<f64> {
    if let Some((c, rho, angles)) = circle_near_singularity(curve, chart) {
        let failed = std::sync::atomic::AtomicBool::new(false);
        let f = |th: f64| -> f64 {
            let p = Point2::new(c.x + rho * th.cos(), c.y + rho * th.sin());
            match chart.vector_length(p, [-th.sin(), th.cos()]) {
                Ok(s) => s * rho,
                Err(_) => {
                    failed.store(true, std::sync::atomic::Ordering::Relaxed);
                    0.0
                }
            }
        };
        let r = adaptive(f, 0.0, std::f64::consts::TAU, &angles, AdaptiveOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_subintervals: 1 << 16,
        });
        if failed.into_inner() {
            return Err(Error::NonIntegrable(format!(
                "level {} passes through a declared singular point",
                curve.level
            )));
        }
        if !r.converged {
            return Err(Error::NonIntegrable(format!(
                "adaptive quadrature on level {} stopped at {} subintervals (error {:.3e})",
                curve.level, r.subintervals, r.error
            )));
        }
        return Ok(r.value);
    }
    let mut terms = Vec::with_capacity(curve.samples.len());
    for s in &curve.samples {
        terms.push(chart.vector_length(s.p, s.tangent)? * s.weight);
    }
    Ok(pairwise_sum(&terms))
}

/// Evaluates every level integral on an extracted curve.
pub fn level_integrals(u: &dyn ScalarField, chart: &Chart, curve: &LevelCurve) -> Result<LevelIntegrals> {
    let m = curve.samples.len();
    let mut dl = Vec::with_capacity(m);
    let mut dl2 = Vec::with_capacity(m);
    let mut aux = Vec::with_capacity(m);
    let mut flux = Vec::with_capacity(m);
    let mut len = Vec::with_capacity(m);
    let (mut kmin, mut kmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &curve.samples {
        let local = Local::with_order(chart, u, s.p, 2)?;
        local.require_regular()?;
        let n = local.grad_norm2().sqrt();
        let nv = n.value();
        let gn = n.gradient();
        let gu = local.u.gradient();
        let gauss = local.gauss_curvature().value();
        let k = local.level_curvature().value();
        let (e, g) = (local.e.value(), local.g.value());
        let ds = (e * s.tangent[0] * s.tangent[0] + g * s.tangent[1] * s.tangent[1]).sqrt() * s.weight;
        kmin = kmin.min(gauss);
        kmax = kmax.max(gauss);
        len.push(ds);
        dl.push(-local.inner(gu, gn) / (nv * nv * nv) * ds);
        dl2.push((local.inner(gn, gn) / (nv * nv) - gauss) / (nv * nv) * ds);
        aux.push(ds / (nv * nv));
        flux.push(k / nv * ds);
    }
    let length = match circle_near_singularity(curve, chart) {
        Some(_) => length(curve, chart)?,
        None => pairwise_sum(&len),
    };
    Ok(LevelIntegrals {
        level: curve.level,
        length,
        dlength: pairwise_sum(&dl),
        d2length: pairwise_sum(&dl2),
        aux_invgrad2: pairwise_sum(&aux),
        curvature_flux: pairwise_sum(&flux),
        gauss_range: (kmin, kmax),
    })
}

/// `L'(t)` from the level-set integral.
pub fn dlength_integral(u: &HarmonicField, chart: &Chart, t: f64, n_samples: usize) -> Result<f64> {
    let c = extract_level_curve(u, chart, t, n_samples)?;
    Ok(level_integrals(u, chart, &c)?.dlength)
}

/// `L''(t)` from the level-set integral.
pub fn d2length_integral(u: &HarmonicField, chart: &Chart, t: f64, n_samples: usize) -> Result<f64> {
    let c = extract_level_curve(u, chart, t, n_samples)?;
    Ok(level_integrals(u, chart, &c)?.d2length)
}

/// `int |grad u|^{-2} dH^1` over `{u = t}`.
pub fn aux_invgrad2(u: &HarmonicField, chart: &Chart, t: f64, n_samples: usize) -> Result<f64> {
    let c = extract_level_curve(u, chart, t, n_samples)?;
    Ok(level_integrals(u, chart, &c)?.aux_invgrad2)
}

/// `int k / |grad u| dH^1` over `{u = t}`.
pub fn curvature_flux_integral(
    u: &HarmonicField,
    chart: &Chart,
    t: f64,
    n_samples: usize,
) -> Result<f64> {
    let c = extract_level_curve(u, chart, t, n_samples)?;
    Ok(level_integrals(u, chart, &c)?.curvature_flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{factors, ConformalChart, Region, WarpedChart};
    use crate::harmonic::{catalog_field, solve_annulus_dirichlet, DirichletSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::{E, PI};

    #[test]
    fn flat_log_closed_forms() {
        let r = E * E;
        let chart: Chart = ConformalChart::annulus(r, factors::flat(0.0)).unwrap().into();
        let u = solve_annulus_dirichlet(DirichletSpec::canonical(r)).unwrap();
        for t in [-1.9, -1.0, -0.3] {
            let c = extract_level_curve(&u, &chart, t, 256).unwrap();
            let li = level_integrals(&u, &chart, &c).unwrap();
            let l = 2.0 * PI * (-t).exp();
            assert_relative_eq!(li.length, l, max_relative = 1e-14);
            assert_relative_eq!(li.dlength, -l, max_relative = 1e-13);
            assert_relative_eq!(li.d2length, l, max_relative = 1e-13);
            // |grad u| = 1/r, integrand r^2 over a circle of length 2 pi r
            assert_relative_eq!(li.aux_invgrad2, 2.0 * PI * (-3.0 * t).exp(), max_relative = 1e-13);
            assert_relative_eq!(li.curvature_flux, -li.dlength, max_relative = 1e-13);
        }
    }

    #[test]
    fn hyperbolic_closed_forms() {
        let lambda = E * E;
        let chart: Chart = WarpedChart::hyperbolic_quotient(lambda, -3.0, 3.0).unwrap().into();
        let u = catalog_field("warped_arctan", &[]).unwrap();
        for s in [0.5, 1.2, 2.0, 2.7] {
            let c = extract_level_curve(&u, &chart, s, 64).unwrap();
            let li = level_integrals(&u, &chart, &c).unwrap();
            let ll = lambda.ln();
            // derivatives in t, converted to the level variable s via dt/ds = cosh t
            let t = (s / 2.0f64).tan().ln();
            assert_relative_eq!(li.length, ll / s.sin(), max_relative = 1e-12);
            let dl_ds = -ll * s.cos() / s.sin().powi(2);
            assert_relative_eq!(li.dlength, dl_ds, max_relative = 1e-10);
            let d2 = ll * (1.0 + s.cos().powi(2)) / s.sin().powi(3);
            assert_relative_eq!(li.d2length, d2, max_relative = 1e-10);
            assert_relative_eq!(li.aux_invgrad2, ll * t.cosh().powi(3), max_relative = 1e-10);
            assert_relative_eq!(li.gauss_range.0, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn length_near_singular_factor_matches_adaptive_oracle() {
        let f = factors::log_sum(0.0, vec![(Point2::new(1.5, 0.0), 1.0)]);
        let chart: Chart = ConformalChart::new(Region::Plane, f).into();
        let c = LevelCurve::circle(0.0, Point2::ORIGIN, 0.5, 2048, 0.0);
        let l = length(&c, &chart).unwrap();
        let oracle = adaptive(
            |th: f64| (Point2::polar(0.5, th).dist(Point2::new(1.5, 0.0))) * 0.5,
            0.0,
            2.0 * PI,
            &[],
            AdaptiveOptions::default(),
        );
        assert_relative_eq!(l, oracle.value, max_relative = 1e-8);
    }

    #[test]
    fn circle_through_a_singularity_escalates() {
        // |e^{i th} - 1| = 2 |sin(th / 2)| integrates to 8
        let f = factors::log_sum(0.0, vec![(Point2::new(1.0, 0.0), 1.0)]);
        let chart: Chart = ConformalChart::new(Region::Plane, f).into();
        let c = LevelCurve::circle(0.0, Point2::ORIGIN, 1.0, 256, 0.3);
        assert_relative_eq!(length(&c, &chart).unwrap(), 8.0, max_relative = 1e-9);

        let f = factors::log_sum(0.0, vec![(Point2::new(1.0, 0.0), -1.5)]);
        let chart: Chart = ConformalChart::new(Region::Plane, f).into();
        assert!(matches!(length(&c, &chart), Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn length_is_invariant_under_resampling() {
        let chart: Chart = ConformalChart::annulus(3.0, factors::quadratic_lambda(-0.05)).unwrap().into();
        let a = length(&LevelCurve::circle(0.0, Point2::new(0.1, 0.0), 1.7, 512, 0.0), &chart).unwrap();
        let b = length(&LevelCurve::circle(0.0, Point2::new(0.1, 0.0), 1.7, 777, 1.234), &chart).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-13);
    }
}
