//! Geodesic curvature of level curves and steepest-descent lines.
//!
//! With `n = |grad u|_g` and `*grad u` the rotation of `grad u` by a positive
//! quarter turn (frame components `(-u_2, u_1)`),
//!
//! ```text
//! k = -div(grad u / n)                              phi_k = k / n
//! h = -div((u_2, -u_1) / n) = div(*grad u / n)      phi_h = h / n
//! ```
//!
//! Locally `(u_2, -u_1)` is the gradient of a conjugate harmonic function
//! `v`, so `h` is the level curvature of `v`.
//!
//! For harmonic `u` without critical points these satisfy
//!
//! ```text
//! Lap phi_k + 2 K phi_k = <grad K, grad u> / n^2
//! Lap phi_h + 2 K phi_h = -<grad K, *grad u> / n^2
//! ```
//!
//! and, combining with `Lap log n = K`,
//!
//! ```text
//! -Lap log|k| - K + <grad K, grad u / n> / |k|
//!     = |grad phi_k|^2 / phi_k^2 + <grad K, grad u> / n (1/|k| - 1/k)
//! -Lap log|h| - K - <grad K, *grad u / n> / |h|
//!     = |grad phi_h|^2 / phi_h^2 + <grad K, *grad u> / n (1/h - 1/|h|)
//! ```
//!
//! so both gaps are nonnegative and the correction terms vanish when the
//! curvature is positive (`k > 0`) or negative (`h < 0`) respectively.
//!
//! Outer Laplacians of the derived fields are taken either from jets
//! ([`OuterLaplacian::Exact`], needs fourth derivatives of `u` and the
//! metric) or by central differences of pointwise evaluations.

mod audit;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Chart, Local, Point2, ScalarField};
use crate::jet::Jet;

pub use audit::{
    log_length_slope_bound, principle_audit, principle_audit_with, AuditCase, AuditDomain,
    AuditGrid, Extremum, HypothesisFlags, PrincipleAuditReport, Quantity, SignRange, SlopeCase,
    SlopeLevel, SlopeBoundReport, Verdict,
};

/// `|k|` or `|h|` at or below this disables the logarithmic inequalities.
pub const CURVATURE_FLOOR: f64 = 1e-6;

/// Default central-difference step for outer Laplacians.
pub const FD_STEP: f64 = 1e-3;

/// Pointwise curvature data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub p: Point2,
    pub k: f64,
    pub h: f64,
    /// `|grad u|_g`.
    pub gradnorm: f64,
    pub phi_k: f64,
    pub phi_h: f64,
    pub gauss_curvature: f64,
    /// Coordinate gradient `(K_x, K_y)`.
    pub grad_gauss_curvature: [f64; 2],
    /// `<grad K, grad u>`.
    pub grad_pairing: f64,
    /// `<grad K, *grad u>`.
    pub star_pairing: f64,
}

pub fn curvature_sample(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<CurvatureSample> {
    let local = Local::with_order(chart, u, p, 3)?;
    local.require_regular()?;
    let n = local.grad_norm2().sqrt().value();
    let k = local.level_curvature().value();
    let h = local.steepest_descent_curvature().value();
    let gauss = local.gauss_curvature();
    let grad_k = gauss.gradient();
    Ok(CurvatureSample {
        p,
        k,
        h,
        gradnorm: n,
        phi_k: k / n,
        phi_h: h / n,
        gauss_curvature: gauss.value(),
        grad_gauss_curvature: grad_k,
        grad_pairing: local.inner(grad_k, local.u.gradient()),
        star_pairing: Local::pair(grad_k, local.star_grad_vector()),
    })
}

/// Geodesic curvature `k = -div(grad u / |grad u|)` of the level curve through `p`.
pub fn level_curvature_k(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<f64> {
    let local = Local::with_order(chart, u, p, 2)?;
    local.require_regular()?;
    Ok(local.level_curvature().value())
}

/// Curvature `h = div(*grad u / |grad u|)` of the steepest-descent line through `p`.
pub fn steepest_descent_curvature_h(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<f64> {
    let local = Local::with_order(chart, u, p, 2)?;
    local.require_regular()?;
    Ok(local.steepest_descent_curvature().value())
}

/// How the Laplacian of a derived field is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OuterLaplacian {
    /// From order-four jets of `u` and the metric.
    Exact,
    /// Cross stencil with the given step; optionally one Richardson level.
    CentralDifference { step: f64, richardson: bool },
}

impl Default for OuterLaplacian {
    fn default() -> Self {
        OuterLaplacian::CentralDifference {
            step: FD_STEP,
            richardson: true,
        }
    }
}

impl OuterLaplacian {
    /// `tol_fd = 1e-4 (1 + |f|)` for differences, `1e-6 (1 + |f|)` for jets.
    pub fn tolerance(&self, field: f64) -> f64 {
        match self {
            OuterLaplacian::Exact => 1e-6 * (1.0 + field.abs()),
            OuterLaplacian::CentralDifference { .. } => 1e-4 * (1.0 + field.abs()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Pde1,
    Pde1Star,
    Pde2,
    Pde2Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Derived {
    PhiK,
    PhiH,
    LnAbsK,
    LnAbsH,
}

fn nonzero(c: &Jet, p: Point2, name: &str) -> Result<()> {
    if c.value().abs() <= CURVATURE_FLOOR {
        return Err(Error::Precondition(format!(
            "|{name}| = {:.3e} at {p} is below {CURVATURE_FLOOR:e}",
            c.value().abs()
        )));
    }
    Ok(())
}

/// Jet of the derived field, two orders below the local jets.
fn derived_jet(local: &Local, which: Derived) -> Result<Jet> {
    local.require_regular()?;
    let n = local.grad_norm2().sqrt();
    Ok(match which {
        Derived::PhiK => {
            let k = local.level_curvature();
            k / n.truncate(k.order())
        }
        Derived::PhiH => {
            let h = local.steepest_descent_curvature();
            h / n.truncate(h.order())
        }
        Derived::LnAbsK => {
            let k = local.level_curvature();
            nonzero(&k, local.p, "k")?;
            (k * k.value().signum()).ln()
        }
        Derived::LnAbsH => {
            let h = local.steepest_descent_curvature();
            nonzero(&h, local.p, "h")?;
            (h * h.value().signum()).ln()
        }
    })
}

fn derived_value(u: &dyn ScalarField, chart: &Chart, p: Point2, which: Derived) -> Result<f64> {
    let local = Local::with_order(chart, u, p, 2)?;
    Ok(derived_jet(&local, which)?.value())
}

/// `(f_x, f_xx, f_y, f_yy)` on a cross stencil.
fn cross_differences(f0: f64, f: &impl Fn(f64, f64) -> Result<f64>, h: f64) -> Result<[f64; 4]> {
    let (xp, xm) = (f(h, 0.0)?, f(-h, 0.0)?);
    let (yp, ym) = (f(0.0, h)?, f(0.0, -h)?);
    Ok([
        (xp - xm) / (2.0 * h),
        (xp - 2.0 * f0 + xm) / (h * h),
        (yp - ym) / (2.0 * h),
        (yp - 2.0 * f0 + ym) / (h * h),
    ])
}

/// `(Lap f, f)` at `p` by central differences of the pointwise values of `f`,
/// `Lap f = [sqrt(G/E) f_xx + (sqrt(G/E))_x f_x + sqrt(E/G) f_yy + (sqrt(E/G))_y f_y] / sqrt(EG)`.
fn fd_laplacian(
    chart: &Chart,
    p: Point2,
    step: f64,
    richardson: bool,
    f: impl Fn(Point2) -> Result<f64>,
) -> Result<(f64, f64)> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be positive, got {step}")));
    }
    let f0 = f(p)?;
    let shifted = |dx: f64, dy: f64| {
        let q = p.offset(dx, dy);
        if !chart.contains(q) {
            return Err(Error::OutOfDomain(q));
        }
        f(q)
    };
    let mut d = cross_differences(f0, &shifted, step)?;
    if richardson {
        let fine = cross_differences(f0, &shifted, 0.5 * step)?;
        for (c, f) in d.iter_mut().zip(fine) {
            *c = (4.0 * f - *c) / 3.0;
        }
    }
    let local = Local::metric(chart, p, 1)?;
    let a = (local.g / local.e).sqrt();
    let b = a.recip();
    let s = local.sqrt_det().value();
    let [fx, fxx, fy, fyy] = d;
    let lap = (a.value() * fxx + a.gradient()[0] * fx + b.value() * fyy + b.gradient()[1] * fy) / s;
    Ok((lap, f0))
}

fn outer_laplacian(
    u: &dyn ScalarField,
    chart: &Chart,
    p: Point2,
    which: Derived,
    method: OuterLaplacian,
) -> Result<(f64, f64)> {
    match method {
        OuterLaplacian::Exact => {
            let local = Local::new(chart, u, p)?;
            let f = derived_jet(&local, which)?;
            Ok((local.laplacian(&f).value(), f.value()))
        }
        OuterLaplacian::CentralDifference { step, richardson } => {
            fd_laplacian(chart, p, step, richardson, |q| derived_value(u, chart, q, which))
        }
    }
}

/// Residual of one of the linear equations for `phi_k` or `phi_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeResidual {
    pub p: Point2,
    pub residual: f64,
    /// Value of `phi_k` or `phi_h` at `p`.
    pub field: f64,
    pub laplacian: f64,
    pub tolerance: f64,
}

impl PdeResidual {
    pub fn passes(&self) -> bool {
        self.residual.abs() <= self.tolerance
    }
}

/// Jet-level quantities at `p` needed by the residuals and gaps.
struct PointTerms {
    gauss: f64,
    grad_pairing: f64,
    star_pairing: f64,
    n: f64,
    k: f64,
    h: f64,
    /// `|grad phi_k|^2 / phi_k^2` and `|grad phi_h|^2 / phi_h^2`.
    log_grad_k: f64,
    log_grad_h: f64,
}

fn point_terms(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<PointTerms> {
    let local = Local::with_order(chart, u, p, 3)?;
    local.require_regular()?;
    let gauss = local.gauss_curvature();
    let grad_k = gauss.gradient();
    let phi_k = derived_jet(&local, Derived::PhiK)?;
    let phi_h = derived_jet(&local, Derived::PhiH)?;
    let log_grad = |phi: &Jet| local.grad_norm2_of(phi).value() / (phi.value() * phi.value());
    let n = local.grad_norm2().sqrt().value();
    Ok(PointTerms {
        gauss: gauss.value(),
        grad_pairing: local.inner(grad_k, local.u.gradient()),
        star_pairing: Local::pair(grad_k, local.star_grad_vector()),
        n,
        k: phi_k.value() * n,
        h: phi_h.value() * n,
        log_grad_k: log_grad(&phi_k),
        log_grad_h: log_grad(&phi_h),
    })
}

/// `Lap phi_k + 2 K phi_k - <grad K, grad u> / |grad u|^2`.
pub fn pde1_residual(
    u: &dyn ScalarField,
    chart: &Chart,
    p: Point2,
    method: OuterLaplacian,
) -> Result<PdeResidual> {
    let terms = point_terms(u, chart, p)?;
    let (lap, f) = outer_laplacian(u, chart, p, Derived::PhiK, method)?;
    Ok(PdeResidual {
        p,
        residual: lap + 2.0 * terms.gauss * f - terms.grad_pairing / (terms.n * terms.n),
        field: f,
        laplacian: lap,
        tolerance: method.tolerance(f),
    })
}

/// `Lap phi_h + 2 K phi_h + <grad K, *grad u> / |grad u|^2`.
pub fn pde1_star_residual(
    u: &dyn ScalarField,
    chart: &Chart,
    p: Point2,
    method: OuterLaplacian,
) -> Result<PdeResidual> {
    let terms = point_terms(u, chart, p)?;
    let (lap, f) = outer_laplacian(u, chart, p, Derived::PhiH, method)?;
    Ok(PdeResidual {
        p,
        residual: lap + 2.0 * terms.gauss * f + terms.star_pairing / (terms.n * terms.n),
        field: f,
        laplacian: lap,
        tolerance: method.tolerance(f),
    })
}

/// Gap in the logarithmic inequality for `k` or `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub p: Point2,
    pub gap: f64,
    /// Exact value of the gap: `log_gradient_term + correction`.
    pub theoretical_gap: f64,
    /// `|grad phi|^2 / phi^2`.
    pub log_gradient_term: f64,
    /// Zero when `k > 0` (resp. `h < 0`).
    pub correction: f64,
    /// `k` or `h` at `p`.
    pub curvature: f64,
    pub tolerance: f64,
}

impl GapReport {
    pub fn matches_identity(&self) -> bool {
        (self.gap - self.theoretical_gap).abs() <= self.tolerance
    }

    pub fn nonnegative(&self) -> bool {
        self.gap >= -self.tolerance
    }

    pub fn passes(&self) -> bool {
        self.nonnegative() && self.matches_identity()
    }
}

/// `-Lap log|k| - K + <grad K, grad u / |grad u|> / |k|`.
pub fn pde2_gap(
    u: &dyn ScalarField,
    chart: &Chart,
    p: Point2,
    method: OuterLaplacian,
) -> Result<GapReport> {
    let t = point_terms(u, chart, p)?;
    if t.k.abs() <= CURVATURE_FLOOR {
        return Err(Error::Precondition(format!(
            "|k| = {:.3e} at {p}: the inequality for log|k| needs k != 0",
            t.k.abs()
        )));
    }
    let (lap, f) = outer_laplacian(u, chart, p, Derived::LnAbsK, method)?;
    let pairing = t.grad_pairing / t.n;
    let correction = pairing * (1.0 / t.k.abs() - 1.0 / t.k);
    Ok(GapReport {
        p,
        gap: -lap - t.gauss + pairing / t.k.abs(),
        theoretical_gap: t.log_grad_k + correction,
        log_gradient_term: t.log_grad_k,
        correction,
        curvature: t.k,
        tolerance: method.tolerance(f),
    })
}

/// `-Lap log|h| - K - <grad K, *grad u / |grad u|> / |h|`.
pub fn pde2_star_gap(
    u: &dyn ScalarField,
    chart: &Chart,
    p: Point2,
    method: OuterLaplacian,
) -> Result<GapReport> {
    let t = point_terms(u, chart, p)?;
    if t.h.abs() <= CURVATURE_FLOOR {
        return Err(Error::Precondition(format!(
            "|h| = {:.3e} at {p}: the inequality for log|h| needs h != 0",
            t.h.abs()
        )));
    }
    let (lap, f) = outer_laplacian(u, chart, p, Derived::LnAbsH, method)?;
    let pairing = t.star_pairing / t.n;
    let correction = pairing * (1.0 / t.h - 1.0 / t.h.abs());
    Ok(GapReport {
        p,
        gap: -lap - t.gauss - pairing / t.h.abs(),
        theoretical_gap: t.log_grad_h + correction,
        log_gradient_term: t.log_grad_h,
        correction,
        curvature: t.h,
        tolerance: method.tolerance(f),
    })
}

/// Residual (or gap defect `gap - theoretical_gap`) of an equation.
pub fn equation_residual(
    u: &dyn ScalarField,
    chart: &Chart,
    p: Point2,
    equation: Equation,
    method: OuterLaplacian,
) -> Result<f64> {
    Ok(match equation {
        Equation::Pde1 => pde1_residual(u, chart, p, method)?.residual,
        Equation::Pde1Star => pde1_star_residual(u, chart, p, method)?.residual,
        Equation::Pde2 => {
            let g = pde2_gap(u, chart, p, method)?;
            g.gap - g.theoretical_gap
        }
        Equation::Pde2Star => {
            let g = pde2_star_gap(u, chart, p, method)?;
            g.gap - g.theoretical_gap
        }
    })
}

/// Plain central-difference errors against the jet evaluation under step halving.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeConvergence {
    pub equation: Equation,
    pub p: Point2,
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e_i / e_{i+1})`.
    pub orders: Vec<f64>,
}

pub fn pde_fd_convergence(
    u: &dyn ScalarField,
    chart: &Chart,
    p: Point2,
    equation: Equation,
    h0: f64,
    halvings: usize,
) -> Result<PdeConvergence> {
    let exact = equation_residual(u, chart, p, equation, OuterLaplacian::Exact)?;
    let steps: Vec<f64> = (0..=halvings).map(|i| h0 / (1u64 << i) as f64).collect();
    let errors = steps
        .iter()
        .map(|&step| {
            let method = OuterLaplacian::CentralDifference {
                step,
                richardson: false,
            };
            Ok((equation_residual(u, chart, p, equation, method)? - exact).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(PdeConvergence {
        equation,
        p,
        steps,
        errors,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{factors, ClosedFormField, ConformalChart, Region, WarpedChart};
    use crate::harmonic::catalog_field;
    use crate::sampling::{annulus_points, halton_unit_square};
    use approx::assert_relative_eq;

    fn flat() -> Chart {
        ConformalChart::annulus(3.0, factors::flat(0.0)).unwrap().into()
    }

    fn cap() -> Chart {
        ConformalChart::new(
            Region::Disc {
                center: Point2::ORIGIN,
                radius: 3.0,
            },
            factors::quadratic_lambda(-0.1),
        )
        .into()
    }

    fn hyperbolic() -> Chart {
        WarpedChart::hyperbolic_quotient(2f64.exp(), -3.0, 3.0).unwrap().into()
    }

    fn minus_log() -> ClosedFormField {
        ClosedFormField::new("-ln|z|", |x, y| -(x * x + y * y).ln() * 0.5)
            .with_singular_points(vec![Point2::ORIGIN])
    }

    fn radial_warped() -> ClosedFormField {
        ClosedFormField::new("2atan(e^t)", |t, _| t.exp().atan() * 2.0)
    }

    fn re_z() -> ClosedFormField {
        ClosedFormField::new("x", |x, _| x)
    }

    /// Off-center sub-disc of the cap chart.
    fn subdisc_points(n: usize) -> Vec<Point2> {
        halton_unit_square(n, 7)
            .into_iter()
            .map(|(a, b)| {
                let r = 0.6 * a.sqrt();
                let th = std::f64::consts::TAU * b;
                Point2::new(0.8 + r * th.cos(), 0.3 + r * th.sin())
            })
            .collect()
    }

    /// `-div_g(grad u / |grad u|)` from central differences of the flux
    /// `sqrt(EG) grad u / |grad u|`.
    fn k_by_differences(u: &dyn ScalarField, chart: &Chart, p: Point2, h: f64) -> f64 {
        let flux = |q: Point2| {
            let l = Local::with_order(chart, u, q, 1).unwrap();
            let s = l.sqrt_det().value();
            let n = l.grad_norm2().value().sqrt();
            let v = l.grad_vector();
            [s * v[0] / n, s * v[1] / n]
        };
        let s0 = Local::metric(chart, p, 0).unwrap().sqrt_det().value();
        let dx = (flux(p.offset(h, 0.0))[0] - flux(p.offset(-h, 0.0))[0]) / (2.0 * h);
        let dy = (flux(p.offset(0.0, h))[1] - flux(p.offset(0.0, -h))[1]) / (2.0 * h);
        -(dx + dy) / s0
    }

    #[test]
    fn flat_log_curvatures() {
        let chart = flat();
        let u = minus_log();
        for r in [1.1, 1.7, 2.9] {
            let p = Point2::polar(r, 0.8);
            assert_relative_eq!(level_curvature_k(&u, &chart, p).unwrap(), 1.0 / r, epsilon = 1e-13);
            assert!(steepest_descent_curvature_h(&u, &chart, p).unwrap().abs() < 1e-13);
        }
        let x = re_z();
        assert!(level_curvature_k(&x, &chart, Point2::new(1.5, 0.2)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn arg_has_circular_steepest_descent() {
        let chart = flat();
        let u = catalog_field("arg", &[]).unwrap();
        for r in [1.2, 2.0, 2.7] {
            let p = Point2::polar(r, 0.4);
            let h = steepest_descent_curvature_h(&u, &chart, p).unwrap();
            assert_relative_eq!(h.abs(), 1.0 / r, epsilon = 1e-12);
            assert!(level_curvature_k(&u, &chart, p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn warped_radial_curvatures() {
        let chart = hyperbolic();
        let u = radial_warped();
        for t in [-1.3, 0.0, 0.5, 2.2] {
            let s = curvature_sample(&u, &chart, Point2::new(t, 1.0)).unwrap();
            assert_relative_eq!(s.k, -t.tanh(), epsilon = 1e-12);
            assert!(s.h.abs() < 1e-12);
            assert_relative_eq!(s.phi_k, -t.sinh(), epsilon = 1e-11);
            assert_relative_eq!(s.phi_k * s.gradnorm, s.k, epsilon = 1e-14);
            assert_relative_eq!(s.gauss_curvature, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_duality_on_flat_chart() {
        let chart = flat();
        let u = ClosedFormField::new("x^2-y^2", |x, y| x * x - y * y);
        let v = ClosedFormField::new("-2xy", |x, y| x * y * -2.0);
        for p in annulus_points(40, Point2::ORIGIN, 1.0, 3.0, 3) {
            let h = steepest_descent_curvature_h(&u, &chart, p).unwrap();
            let k = level_curvature_k(&v, &chart, p).unwrap();
            assert!((h - k).abs() < 1e-8, "{p}: {h} vs {k}");
        }
    }

    #[test]
    fn sign_flips_with_u() {
        let chart = cap();
        let u = catalog_field("log", &[]).unwrap();
        let w = u.negated();
        let p = Point2::new(0.9, -0.6);
        let a = curvature_sample(&u, &chart, p).unwrap();
        let b = curvature_sample(&w, &chart, p).unwrap();
        assert!(a.k > 0.0);
        assert_relative_eq!(a.k, -b.k, epsilon = 1e-14);
        assert_relative_eq!(a.h, -b.h, epsilon = 1e-14);
    }

    #[test]
    fn level_curvature_matches_divergence_to_second_order() {
        let chart = cap();
        let u = catalog_field("re_z_plus_a_over_z", &[0.5]).unwrap();
        for p in [Point2::new(1.1, 0.4), Point2::new(-0.7, 1.3)] {
            let k = level_curvature_k(&u, &chart, p).unwrap();
            let e1 = (k_by_differences(&u, &chart, p, 1e-2) - k).abs();
            let e2 = (k_by_differences(&u, &chart, p, 5e-3) - k).abs();
            let order = (e1 / e2).log2();
            assert!((1.8..=2.2).contains(&order), "order {order} at {p}");
        }
    }

    #[test]
    fn flat_log_residuals_vanish() {
        let chart = flat();
        let u = minus_log();
        let p = Point2::polar(1.8, 2.0);
        for m in [OuterLaplacian::Exact, OuterLaplacian::default()] {
            assert!(pde1_residual(&u, &chart, p, m).unwrap().residual.abs() < 1e-7);
            assert!(pde1_star_residual(&u, &chart, p, m).unwrap().residual.abs() < 1e-7);
            let g = pde2_gap(&u, &chart, p, m).unwrap();
            assert!(g.gap.abs() < 1e-7 && g.theoretical_gap.abs() < 1e-12);
        }
        let err = pde2_star_gap(&u, &chart, p, OuterLaplacian::Exact).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn arg_star_gap_vanishes() {
        let chart = flat();
        let u = catalog_field("arg", &[]).unwrap();
        let g = pde2_star_gap(&u, &chart, Point2::polar(1.6, 1.0), OuterLaplacian::Exact).unwrap();
        assert!(g.gap.abs() < 1e-10 && g.theoretical_gap.abs() < 1e-10);
    }

    #[test]
    fn warped_closed_form_residuals() {
        let chart = hyperbolic();
        let u = radial_warped();
        for t in [-2.0, -0.3, 0.5, 1.7] {
            let p = Point2::new(t, 0.4);
            let r = pde1_residual(&u, &chart, p, OuterLaplacian::Exact).unwrap();
            assert!(r.residual.abs() < 1e-9, "t = {t}: {}", r.residual);
            assert_relative_eq!(r.laplacian, 2.0 * -t.sinh(), epsilon = 1e-9);
            let s = pde1_star_residual(&u, &chart, p, OuterLaplacian::Exact).unwrap();
            assert!(s.residual.abs() < 1e-9 && s.field.abs() < 1e-12);
        }
        let g = pde2_gap(&u, &chart, Point2::new(0.5, 0.0), OuterLaplacian::Exact).unwrap();
        let coth2 = (0.5f64.cosh() / 0.5f64.sinh()).powi(2);
        assert_relative_eq!(g.gap, coth2, epsilon = 1e-5);
        assert_relative_eq!(g.theoretical_gap, coth2, epsilon = 1e-9);
        // k = -tanh t < 0, but grad K = 0 so the correction vanishes.
        assert!(g.correction.abs() < 1e-12);
    }

    #[test]
    fn cap_residuals_under_differences() {
        let chart = cap();
        let log = catalog_field("log", &[]).unwrap();
        let x = re_z();
        let fd = OuterLaplacian::default();
        // k > 0 for r < 1.6; it changes sign near r = 1.8.
        for p in annulus_points(50, Point2::ORIGIN, 1.0, 1.6, 11) {
            let r = pde1_residual(&log, &chart, p, fd).unwrap();
            assert!(r.passes(), "{p}: {}", r.residual);
            assert!(pde1_residual(&log, &chart, p, OuterLaplacian::Exact).unwrap().residual.abs() < 1e-10);
            let g = pde2_gap(&log, &chart, p, fd).unwrap();
            assert!(g.gap >= -1e-6 && g.passes(), "{p}: {g:?}");
        }
        for p in subdisc_points(50) {
            let r = pde1_star_residual(&x, &chart, p, fd).unwrap();
            assert!(r.passes(), "{p}: {}", r.residual);
            let e = pde1_star_residual(&x, &chart, p, OuterLaplacian::Exact).unwrap();
            assert!(e.residual.abs() < 1e-10, "{p}: {}", e.residual);
        }
    }

    #[test]
    fn star_orientation_is_pinned_by_the_pde() {
        // With the opposite rotation the pairing term changes sign and the
        // jet residual picks up 2 <grad K, *grad u> / n^2, far from zero here.
        let chart = cap();
        let x = re_z();
        let p = Point2::new(0.9, 0.7);
        let t = point_terms(&x, &chart, p).unwrap();
        assert!(t.star_pairing.abs() > 1e-2);
        let e = pde1_star_residual(&x, &chart, p, OuterLaplacian::Exact).unwrap();
        assert!(e.residual.abs() < 1e-11);
    }

    #[test]
    fn cap_star_gap_under_differences() {
        // The identity holds everywhere; nonnegativity only where h > 0, and
        // the sampled sub-disc contains points with h < 0 and a negative gap.
        let chart = cap();
        let x = re_z();
        let (mut positive, mut violations) = (0, 0);
        for p in subdisc_points(50) {
            match pde2_star_gap(&x, &chart, p, OuterLaplacian::default()) {
                // Differences of ln|h| lose accuracy as the stencil nears h = 0.
                Ok(g) if g.curvature.abs() < 2e-2 => {}
                Ok(g) => {
                    assert!(g.matches_identity(), "{p}: {g:?}");
                    if g.curvature > 0.0 {
                        assert!(g.gap >= -1e-6 && g.correction == 0.0, "{p}: {g:?}");
                        positive += 1;
                    } else if !g.nonnegative() {
                        violations += 1;
                    }
                }
                Err(Error::Precondition(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!(positive >= 5 && violations > 0, "{positive} {violations}");
    }

    #[test]
    fn second_order_decay_of_plain_differences() {
        let chart = cap();
        let log = catalog_field("log", &[]).unwrap();
        let x = re_z();
        let cases: [(&dyn ScalarField, Equation, Point2); 3] = [
            (&log, Equation::Pde1, Point2::new(1.2, 0.5)),
            (&x, Equation::Pde1Star, Point2::new(0.9, 0.6)),
            (&log, Equation::Pde2, Point2::new(-1.0, 0.9)),
        ];
        for (u, eq, p) in cases {
            let c = pde_fd_convergence(u, &chart, p, eq, 1e-2, 1).unwrap();
            assert!((1.8..=2.2).contains(&c.orders[0]), "{eq:?}: {:?}", c);
        }
    }

    #[test]
    fn stencil_outside_chart_is_an_error() {
        let chart = flat();
        let u = minus_log();
        let err = pde1_residual(&u, &chart, Point2::new(1.0, 0.0), OuterLaplacian::default());
        assert!(matches!(err, Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn critical_point_is_an_error() {
        let chart: Chart = ConformalChart::new(Region::Plane, factors::flat(0.0)).into();
        let u = ClosedFormField::new("x^2-y^2", |x, y| x * x - y * y);
        let err = level_curvature_k(&u, &chart, Point2::ORIGIN);
        assert!(matches!(err, Err(Error::ZeroGradient { .. })));
    }
}
