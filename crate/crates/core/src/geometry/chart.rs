use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::field::check_singular;
use super::{Point2, ScalarField};
use crate::error::{Error, Result};
use crate::jet::Jet;

/// Coordinate region covered by a conformal chart (closed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// `inner <= |z - center| <= outer`; `inner = 0` is a punctured disc.
    Annulus { center: Point2, inner: f64, outer: f64 },
    Disc { center: Point2, radius: f64 },
    UpperHalfPlane,
    Plane,
}

impl Region {
    pub fn contains(&self, p: Point2) -> bool {
        const SLACK: f64 = 1e-12;
        match *self {
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = p.dist(center);
                r >= inner * (1.0 - SLACK) && r <= outer * (1.0 + SLACK) && r > 0.0
            }
            Region::Disc { center, radius } => p.dist(center) <= radius * (1.0 + SLACK),
            Region::UpperHalfPlane => p.y > 0.0,
            Region::Plane => p.is_finite(),
        }
    }

    /// Euclidean diameter, infinite for unbounded regions.
    pub fn diameter(&self) -> f64 {
        match *self {
            Region::Annulus { outer, .. } => 2.0 * outer,
            Region::Disc { radius, .. } => 2.0 * radius,
            _ => f64::INFINITY,
        }
    }
}

/// `g = e^{2 phi} (dx^2 + dy^2)` on a planar region.
#[derive(Debug, Clone)]
pub struct ConformalChart {
    region: Region,
    factor: Arc<dyn ScalarField>,
    singular: Vec<Point2>,
}

impl ConformalChart {
    /// The normalized annulus `1 < |z| < outer_radius`.
    pub fn annulus(outer_radius: f64, factor: impl ScalarField + 'static) -> Result<Self> {
        if !(outer_radius > 1.0) || !outer_radius.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "outer radius must exceed 1, got {outer_radius}"
            )));
        }
        Ok(Self::new(
            Region::Annulus {
                center: Point2::ORIGIN,
                inner: 1.0,
                outer: outer_radius,
            },
            factor,
        ))
    }

    pub fn new(region: Region, factor: impl ScalarField + 'static) -> Self {
        Self::from_arc(region, Arc::new(factor))
    }

    pub fn from_arc(region: Region, factor: Arc<dyn ScalarField>) -> Self {
        let singular = factor.singular_points().to_vec();
        Self {
            region,
            factor,
            singular,
        }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn factor(&self) -> &dyn ScalarField {
        self.factor.as_ref()
    }

    pub fn singular_points(&self) -> &[Point2] {
        &self.singular
    }

    /// Outer radius when the chart is a centered annulus or punctured disc.
    pub fn outer_radius(&self) -> Option<f64> {
        match self.region {
            Region::Annulus { outer, .. } => Some(outer),
            _ => None,
        }
    }
}

pub type WarpFn = dyn Fn(f64) -> [f64; 5] + Send + Sync;

/// `g = dt^2 + w(t)^2 dtheta^2` on `[t_min, t_max] x S^1`, `w = c * profile`.
#[derive(Clone)]
pub struct WarpedChart {
    t_min: f64,
    t_max: f64,
    scale: f64,
    name: String,
    profile: Arc<WarpFn>,
}

impl fmt::Debug for WarpedChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpedChart")
            .field("t_min", &self.t_min)
            .field("t_max", &self.t_max)
            .field("scale", &self.scale)
            .field("profile", &self.name)
            .finish()
    }
}

impl WarpedChart {
    /// `profile(t)` returns the profile and its first four derivatives.
    pub fn new(
        t_min: f64,
        t_max: f64,
        scale: f64,
        name: impl Into<String>,
        profile: impl Fn(f64) -> [f64; 5] + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(t_min < t_max) {
            return Err(Error::InvalidDomain(format!(
                "warped chart needs t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "circumference scale must be positive, got {scale}"
            )));
        }
        let chart = Self {
            t_min,
            t_max,
            scale,
            name: name.into(),
            profile: Arc::new(profile),
        };
        for i in 0..=64 {
            let t = t_min + (t_max - t_min) * i as f64 / 64.0;
            if !(chart.warp(t)[0] > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "warp must be positive on the chart, w({t}) = {}",
                    chart.warp(t)[0]
                )));
            }
        }
        Ok(chart)
    }

    /// `w(t) = c cosh t`, curvature `-1`.
    pub fn cosh(t_min: f64, t_max: f64, scale: f64) -> Result<Self> {
        Self::new(t_min, t_max, scale, "cosh", |t| {
            let (c, s) = (t.cosh(), t.sinh());
            [c, s, c, s, c]
        })
    }

    /// The hyperbolic cylinder obtained as `H^2 / <z -> lambda z>`:
    /// `w(t) = (ln lambda / 2 pi) cosh t`.
    pub fn hyperbolic_quotient(lambda: f64, t_min: f64, t_max: f64) -> Result<Self> {
        if !(lambda > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "dilation factor must exceed 1, got {lambda}"
            )));
        }
        Self::cosh(t_min, t_max, lambda.ln() / (2.0 * PI))
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `w` and its first four derivatives at `t`.
    pub fn warp(&self, t: f64) -> [f64; 5] {
        let mut d = (self.profile)(t);
        for v in d.iter_mut() {
            *v *= self.scale;
        }
        d
    }
}

#[derive(Debug, Clone)]
pub enum Chart {
    Conformal(ConformalChart),
    Warped(WarpedChart),
}

impl From<ConformalChart> for Chart {
    fn from(c: ConformalChart) -> Self {
        Chart::Conformal(c)
    }
}

impl From<WarpedChart> for Chart {
    fn from(c: WarpedChart) -> Self {
        Chart::Warped(c)
    }
}

impl Chart {
    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Chart::Conformal(c) => c.region.contains(p),
            Chart::Warped(w) => {
                const SLACK: f64 = 1e-12;
                let span = w.t_max - w.t_min;
                p.is_finite() && p.x >= w.t_min - SLACK * span && p.x <= w.t_max + SLACK * span
            }
        }
    }

    pub fn singular_points(&self) -> &[Point2] {
        match self {
            Chart::Conformal(c) => &c.singular,
            Chart::Warped(_) => &[],
        }
    }

    pub fn is_warped(&self) -> bool {
        matches!(self, Chart::Warped(_))
    }

    pub fn as_conformal(&self) -> Option<&ConformalChart> {
        match self {
            Chart::Conformal(c) => Some(c),
            Chart::Warped(_) => None,
        }
    }

    pub fn as_warped(&self) -> Option<&WarpedChart> {
        match self {
            Chart::Warped(w) => Some(w),
            Chart::Conformal(_) => None,
        }
    }

    pub(crate) fn check_point(&self, p: Point2) -> Result<()> {
        if !self.contains(p) {
            return Err(Error::OutOfDomain(p));
        }
        check_singular(p, self.singular_points())
    }

    /// Jets of the diagonal metric coefficients `(E, G)` at `p`.
    pub(crate) fn metric_jets(&self, p: Point2, order: usize) -> Result<(Jet, Jet)> {
        self.check_point(p)?;
        match self {
            Chart::Conformal(c) => {
                let e = (c.factor.jet_to(p, order)? * 2.0).exp();
                Ok((e, e))
            }
            Chart::Warped(w) => {
                let wj = Jet::univariate_x(&w.warp(p.x)).truncate(order);
                Ok((Jet::constant(1.0).truncate(order), wj * wj))
            }
        }
    }

    /// Metric length of a coordinate vector at `p`.
    pub fn vector_length(&self, p: Point2, v: [f64; 2]) -> Result<f64> {
        let (e, g) = self.metric_jets(p, 0)?;
        Ok((e.value() * v[0] * v[0] + g.value() * v[1] * v[1]).sqrt())
    }

    /// Diameter of the coordinate domain, used to scale finite-difference steps.
    pub fn euclidean_diameter(&self) -> f64 {
        match self {
            Chart::Conformal(c) => c.region.diameter(),
            Chart::Warped(w) => (w.t_max - w.t_min).hypot(2.0 * PI),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::factors;

    #[test]
    fn annulus_requires_outer_radius_above_one() {
        assert!(ConformalChart::annulus(1.0, factors::flat(0.0)).is_err());
        assert!(ConformalChart::annulus(0.5, factors::flat(0.0)).is_err());
        assert!(ConformalChart::annulus(2.0, factors::flat(0.0)).is_ok());
    }

    #[test]
    fn warped_chart_rejects_nonpositive_warp() {
        let bad = WarpedChart::new(-1.0, 1.0, 1.0, "sinh", |t| {
            let (c, s) = (t.cosh(), t.sinh());
            [s, c, s, c, s]
        });
        assert!(bad.is_err());
        assert!(WarpedChart::cosh(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn domain_membership() {
        let chart: Chart = ConformalChart::annulus(2.0, factors::flat(0.0)).unwrap().into();
        assert!(chart.contains(Point2::new(1.5, 0.0)));
        assert!(chart.contains(Point2::new(1.0, 0.0)));
        assert!(!chart.contains(Point2::new(0.5, 0.0)));
        assert!(!chart.contains(Point2::new(2.5, 0.0)));
    }
}
