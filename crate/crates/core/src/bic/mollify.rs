//! Radial mollification of conical factors.
//!
//! The kernel is `rho_eps(s) = 4 / (pi eps^2) (1 - s^2/eps^2)^3` on `s < eps`,
//! a C^2 bump of unit mass. Its convolution with `ln|.|` is, with
//! `a = |w|^2 / eps^2`,
//!
//! ```text
//! m_eps(w) = ln eps - 25/24 + 2a - 3a^2/2 + 2a^3/3 - a^4/8   (a < 1)
//! m_eps(w) = ln|w|                                          (a >= 1)
//! ```
//!
//! obtained by integrating `(a m')' = 2 (1 - a)^3` with `m` regular at the
//! origin and matched to `ln|w|` at `a = 1`. The mollified factor is
//! `s_eps = beta0 + sum alpha_j m_eps(z - z_j)`; it is subharmonic when all
//! `alpha_j >= 0`, decreases with `eps`, and equals `v` outside the
//! `eps`-discs around the vertices.

use serde::Serialize;

use super::{circle_integral, level_radius, polar, BicOptions, ConicalFactor};
use crate::error::{Error, Result};
use crate::geometry::{Point2, ScalarField};
use crate::harmonic::DirichletSpec;
use crate::jet::Jet;
use crate::levelsets::LengthProfile;
use crate::quadrature::pairwise_sum;

#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedFactor {
    source: ConicalFactor,
    eps: f64,
}

pub fn mollify(factor: &ConicalFactor, eps: f64) -> Result<MollifiedFactor> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("mollification radius must be positive, got {eps}")));
    }
    Ok(MollifiedFactor {
        source: factor.clone(),
        eps,
    })
}

/// `m_eps` as a function of `a = |w|^2 / eps^2` for `a < 1`.
fn inner_poly(a: f64) -> f64 {
    2.0 * a - 1.5 * a * a + (2.0 / 3.0) * a.powi(3) - 0.125 * a.powi(4)
}

/// `ln|.| * rho_eps` at offset `(dx, dy)`.
pub(crate) fn log_mollified(dx: f64, dy: f64, eps: f64) -> f64 {
    let r2 = dx * dx + dy * dy;
    let a = r2 / (eps * eps);
    if a >= 1.0 {
        0.5 * r2.ln()
    } else {
        eps.ln() - 25.0 / 24.0 + inner_poly(a)
    }
}

/// `4 / (pi eps^2) (1 - s^2/eps^2)^3`.
#[cfg(test)]
pub(crate) fn kernel(s: f64, eps: f64) -> f64 {
    let q = 1.0 - (s * s) / (eps * eps);
    if q <= 0.0 {
        0.0
    } else {
        4.0 / (std::f64::consts::PI * eps * eps) * q * q * q
    }
}

impl MollifiedFactor {
    pub fn source(&self) -> &ConicalFactor {
        &self.source
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value_at(&self, p: Point2) -> f64 {
        self.source.beta0
            + self
                .source
                .singularities
                .iter()
                .map(|s| s.alpha * log_mollified(p.x - s.z.x, p.y - s.z.y, self.eps))
                .sum::<f64>()
    }
}

impl ScalarField for MollifiedFactor {
    fn jet_to(&self, p: Point2, order: usize) -> Result<Jet> {
        let x = Jet::var_x(p.x).truncate(order);
        let y = Jet::var_y(p.y).truncate(order);
        let e2 = self.eps * self.eps;
        let mut acc = Jet::constant(self.source.beta0).truncate(order);
        for s in &self.source.singularities {
            let dx = x - s.z.x;
            let dy = y - s.z.y;
            let r2 = dx * dx + dy * dy;
            let term = if r2.value() >= e2 {
                r2.ln() * 0.5
            } else {
                let a = r2 / e2;
                let a2 = a * a;
                let poly = a * 2.0 - a2 * 1.5 + a2 * a * (2.0 / 3.0)
                    - a2 * a2 * 0.125;
                poly + (self.eps.ln() - 25.0 / 24.0)
            };
            acc = acc + term * s.alpha;
        }
        Ok(acc)
    }
}

/// `mean over the circle of s - s(center)`; nonnegative for a subharmonic `s`.
pub fn sub_mean_value_defect(m: &MollifiedFactor, center: Point2, radius: f64, n: usize) -> f64 {
    let vals: Vec<f64> = (0..n)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / n as f64;
            m.value_at(Point2::new(center.x + radius * th.cos(), center.y + radius * th.sin()))
        })
        .collect();
    pairwise_sum(&vals) / n as f64 - m.value_at(center)
}

/// Length of `|z| = rho` in the metric `e^{2 s_eps} |dz|^2`.
pub fn mollified_length(m: &MollifiedFactor, rho: f64, opts: &BicOptions) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("circle radius must be positive, got {rho}")));
    }
    let poles: Vec<_> = m.source.singularities.iter().map(|s| polar(s.z)).collect();
    let angles: Vec<f64> = poles.iter().map(|p| p.theta).collect();
    let integral = circle_integral(&angles, opts, |anchor, offset| {
        let th = anchor + offset;
        m.value_at(Point2::new(rho * th.cos(), rho * th.sin())).exp()
    })?;
    Ok(rho * integral)
}

fn inset_radius(spec: &DirichletSpec, t: f64, eps: f64) -> Result<f64> {
    let rho = level_radius(spec, t)?;
    if rho < 1.0 + eps || rho > spec.outer_radius - eps {
        return Err(Error::InvalidDomain(format!(
            "level {t} (radius {rho}) is within eps = {eps} of the annulus boundary"
        )));
    }
    Ok(rho)
}

/// Length profile of a mollified factor. Levels must be inset by `eps`
/// from both boundary circles.
pub fn mollified_length_profile(
    m: &MollifiedFactor,
    spec: &DirichletSpec,
    t_grid: &[f64],
    opts: &BicOptions,
) -> Result<LengthProfile> {
    let lengths = opts
        .execution
        .try_map(t_grid, |&t| mollified_length(m, inset_radius(spec, t, m.eps)?, opts))?;
    LengthProfile::from_lengths(t_grid.to_vec(), lengths)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MollifiedConvergence {
    pub t: f64,
    pub eps: Vec<f64>,
    pub lengths: Vec<f64>,
    /// Length of the level in the conical metric.
    pub limit: f64,
    /// `L_eps - L` for each `eps`.
    pub excess: Vec<f64>,
    pub tolerance: f64,
    /// `L_eps` is nonincreasing along the sequence and stays above the limit,
    /// both up to `tolerance`.
    pub monotone: bool,
}

/// Lengths of the level `t` for a strictly decreasing sequence of radii.
pub fn mollified_convergence(
    factor: &ConicalFactor,
    spec: &DirichletSpec,
    t: f64,
    eps: &[f64],
    opts: &BicOptions,
) -> Result<MollifiedConvergence> {
    if eps.is_empty() || eps.windows(2).any(|w| !(w[1] < w[0])) || !(eps[eps.len() - 1] > 0.0) {
        return Err(Error::InvalidParameter(
            "mollification radii must be positive and strictly decreasing".into(),
        ));
    }
    let rho = inset_radius(spec, t, eps[0])?;
    let lengths = opts.execution.try_map(eps, |&e| mollified_length(&mollify(factor, e)?, rho, opts))?;
    let limit = super::conical_circle_length(factor, rho, opts)?;
    let tolerance = 1e-6;
    let excess: Vec<f64> = lengths.iter().map(|l| l - limit).collect();
    let monotone = lengths.windows(2).all(|w| w[1] <= w[0] + tolerance) && excess.iter().all(|&d| d >= -tolerance);
    Ok(MollifiedConvergence {
        t,
        eps: eps.to_vec(),
        lengths,
        limit,
        excess,
        tolerance,
        monotone,
    })
}
