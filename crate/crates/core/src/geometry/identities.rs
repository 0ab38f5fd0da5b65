use serde::Serialize;

use super::{Chart, Local, Point2, ScalarField};
use crate::error::Result;

/// Metric quantities at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricPointData {
    /// `g_xx` (equal to `e^{2 phi}` on conformal charts).
    pub conf: f64,
    /// `g_yy`; equals `conf` on conformal charts and `w(t)^2` on warped ones.
    pub g_yy: f64,
    pub gauss_curvature: f64,
    pub grad_gauss_curvature: [f64; 2],
    pub christoffels: [f64; 6],
}

pub fn metric_point_data(chart: &Chart, p: Point2) -> Result<MetricPointData> {
    let local = Local::metric(chart, p, 3)?;
    let k = local.gauss_curvature();
    Ok(MetricPointData {
        conf: local.e.value(),
        g_yy: local.g.value(),
        gauss_curvature: k.value(),
        grad_gauss_curvature: k.gradient(),
        christoffels: local.christoffels(),
    })
}

/// `K = -e^{-2 phi} Lap_0 phi` on conformal charts, `-w''/w` on warped ones.
pub fn gauss_curvature(chart: &Chart, p: Point2) -> Result<f64> {
    Ok(Local::metric(chart, p, 2)?.gauss_curvature().value())
}

/// Coordinate gradient `(K_x, K_y)`.
pub fn grad_gauss_curvature(chart: &Chart, p: Point2) -> Result<[f64; 2]> {
    Ok(Local::metric(chart, p, 3)?.gauss_curvature().gradient())
}

/// `|grad u|_g`.
pub fn metric_gradient_norm(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<f64> {
    let local = Local::with_order(chart, u, p, 1)?;
    Ok(local.grad_norm2().value().sqrt())
}

/// `|nabla^2 u|^2 - 2 |grad |grad u||^2`, which vanishes for harmonic `u` on
/// a surface wherever `grad u != 0`.
pub fn kato_residual(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<f64> {
    let local = Local::with_order(chart, u, p, 2)?;
    local.require_regular()?;
    let n = local.grad_norm2().sqrt();
    let grad_n2 = local.grad_norm2_of(&n).value();
    Ok(local.hessian_norm2() - 2.0 * grad_n2)
}

/// `Lap(|grad u|^2 / 2) - |nabla^2 u|^2 - K |grad u|^2`.
pub fn bochner_residual(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<f64> {
    let local = Local::with_order(chart, u, p, 3)?;
    local.require_regular()?;
    let n2 = local.grad_norm2();
    let lap = local.laplacian(&(n2 * 0.5)).value();
    let k = local.gauss_curvature().value();
    Ok(lap - local.hessian_norm2() - k * n2.value())
}

/// `Lap log|grad u| - K`.
pub fn log_gradient_residual(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<f64> {
    let local = Local::with_order(chart, u, p, 3)?;
    local.require_regular()?;
    let log_n = local.grad_norm2().ln() * 0.5;
    let lap = local.laplacian(&log_n).value();
    Ok(lap - local.gauss_curvature().value())
}

/// `|nabla^2 u|_g^2`, the scale entering the residual tolerance contract.
pub fn hessian_norm2(u: &dyn ScalarField, chart: &Chart, p: Point2) -> Result<f64> {
    Ok(Local::with_order(chart, u, p, 2)?.hessian_norm2())
}
