use serde::Serialize;

use super::integrals::level_integrals;
use super::profile::{divided_second_differences, grid_differences};
use super::{extract_level_curve, LengthProfile, LevelCurve};
use crate::error::{Error, Result};
use crate::geometry::{Chart, ConformalChart, Point2};
use crate::harmonic::{CatalogSpec, HarmonicField};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    /// Smallest `(ln L)''` column entry and its level.
    pub min_ln_l_pp: f64,
    pub argmin_ln_l_pp: f64,
    /// Smallest divided second difference of `ln L` over the interior levels.
    pub min_second_difference: f64,
    pub argmin_second_difference: f64,
    /// One-sided second derivatives of `ln L` at the first and last level,
    /// standing in for the boundary values.
    pub endpoint_second_derivatives: [f64; 2],
    pub tolerance: f64,
    pub pass: bool,
}

fn argmin(t: &[f64], v: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    for (&ti, &vi) in t.iter().zip(v) {
        if vi < best.1 || vi.is_nan() {
            best = (ti, vi);
            if vi.is_nan() {
                break;
            }
        }
    }
    best
}

/// Smooth and discrete convexity of `ln L` over a profile.
pub fn log_convexity_check(profile: &LengthProfile, tolerance: f64) -> Result<ConvexityReport> {
    if profile.len() < 8 {
        return Err(Error::InvalidParameter(format!(
            "convexity check needs at least 8 levels, got {}",
            profile.len()
        )));
    }
    let (t_pp, min_pp) = argmin(&profile.t, &profile.ln_l_pp);
    let ln: Vec<f64> = profile.l.iter().map(|l| l.ln()).collect();
    let dd = divided_second_differences(&profile.t, &ln);
    let (t_dd, min_dd) = argmin(&profile.t[1..profile.len() - 1], &dd);
    let (_, d2) = grid_differences(&profile.t, &ln);
    let pass = min_pp >= -tolerance && min_dd >= -tolerance;
    Ok(ConvexityReport {
        min_ln_l_pp: min_pp,
        argmin_ln_l_pp: t_pp,
        min_second_difference: min_dd,
        argmin_second_difference: t_dd,
        endpoint_second_derivatives: [d2[0], d2[profile.len() - 1]],
        tolerance,
        pass,
    })
}

fn gauss_samples(chart: &Chart, curve: &LevelCurve) -> Result<Vec<f64>> {
    curve
        .samples
        .iter()
        .map(|s| crate::geometry::gauss_curvature(chart, s.p))
        .collect()
}

fn ln_l_pp_and_aux(u: &HarmonicField, chart: &Chart, curve: &LevelCurve) -> Result<(f64, f64, f64)> {
    let li = level_integrals(u, chart, curve)?;
    let l = li.length;
    Ok((
        (li.d2length * l - li.dlength * li.dlength) / (l * l),
        l,
        li.aux_invgrad2,
    ))
}

/// `(ln L)'' + (kappa / L) int |grad u|^{-2} dH^1`, after checking
/// `K <= kappa <= 0` at every sample of the level.
pub fn sharp_bound_gap(
    u: &HarmonicField,
    chart: &Chart,
    t: f64,
    kappa: f64,
    n_samples: usize,
) -> Result<f64> {
    if kappa > 0.0 {
        return Err(Error::Precondition(format!("kappa must be <= 0, got {kappa}")));
    }
    let curve = extract_level_curve(u, chart, t, n_samples)?;
    let slack = 1e-12 * (1.0 + kappa.abs());
    for (s, k) in curve.samples.iter().zip(gauss_samples(chart, &curve)?) {
        if k > kappa + slack {
            return Err(Error::Precondition(format!(
                "K = {k} exceeds kappa = {kappa} at {}",
                s.p
            )));
        }
    }
    let (lpp, l, aux) = ln_l_pp_and_aux(u, chart, &curve)?;
    Ok(lpp + kappa / l * aux)
}

/// [`sharp_bound_gap`] without the curvature precondition.
pub fn sharp_bound_gap_unchecked(
    u: &HarmonicField,
    chart: &Chart,
    t: f64,
    kappa: f64,
    n_samples: usize,
) -> Result<f64> {
    let curve = extract_level_curve(u, chart, t, n_samples)?;
    let (lpp, l, aux) = ln_l_pp_and_aux(u, chart, &curve)?;
    Ok(lpp + kappa / l * aux)
}

/// `(ln L)''(t) - (kappa2 / kappa1) / t^2`, after checking `t > 0` and
/// `-kappa1 <= K <= -kappa2 <= 0` on the level.
pub fn pinched_bound_check(
    u: &HarmonicField,
    chart: &Chart,
    t: f64,
    kappa1: f64,
    kappa2: f64,
    n_samples: usize,
) -> Result<f64> {
    if !(kappa1 > 0.0) || !(kappa2 >= 0.0) || kappa2 > kappa1 {
        return Err(Error::Precondition(format!(
            "need 0 <= kappa2 <= kappa1 with kappa1 > 0, got ({kappa1}, {kappa2})"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("u must be positive on the level, got t = {t}")));
    }
    let curve = extract_level_curve(u, chart, t, n_samples)?;
    let slack = 1e-12 * (1.0 + kappa1);
    for (s, k) in curve.samples.iter().zip(gauss_samples(chart, &curve)?) {
        if k < -kappa1 - slack || k > -kappa2 + slack {
            return Err(Error::Precondition(format!(
                "K = {k} outside [-{kappa1}, -{kappa2}] at {}",
                s.p
            )));
        }
    }
    let (lpp, _, _) = ln_l_pp_and_aux(u, chart, &curve)?;
    Ok(lpp - kappa2 / kappa1 / (t * t))
}

/// `e^{4t} (L L'' - L'^2)` for `u = -ln|z|` on a chart around the origin whose
/// factor satisfies `lambda(0) = 1`, `grad lambda(0) = 0`. As `t -> infinity`
/// this tends to `-4 pi^2 K(0)`.
pub fn asymptotic_defect(chart: &ConformalChart, t: f64, n_samples: usize) -> Result<f64> {
    let j = chart.factor().jet_to(Point2::ORIGIN, 1)?;
    let [gx, gy] = j.gradient();
    if j.value().abs() > 1e-12 {
        return Err(Error::Normalization(format!("lambda(0) = {}", j.value().exp())));
    }
    if gx.hypot(gy) > 1e-12 {
        return Err(Error::Normalization(format!("grad lambda(0) = ({gx}, {gy})")));
    }
    let u = CatalogSpec::Log { coefficient: -1.0 }.build()?;
    let chart = Chart::Conformal(chart.clone());
    let curve = extract_level_curve(&u, &chart, t, n_samples)?;
    let li = level_integrals(&u, &chart, &curve)?;
    Ok((4.0 * t).exp() * (li.length * li.d2length - li.dlength * li.dlength))
}
