//! Charts, scalar fields and pointwise differential geometry.
//!
//! Every surface piece is described in coordinates where the metric is
//! diagonal, `g = E dx^2 + G dy^2`. Conformal charts have `E = G = e^{2 phi}`
//! and warped cylinders `(t, theta)` have `E = 1`, `G = w(t)^2`. All curvature
//! and covariant-derivative formulas are written once for this diagonal form
//! and evaluated on [`Jet`]s, so derivatives are exact up to the order carried
//! by the input fields.
//!
//! Christoffel symbols of `E dx^2 + G dy^2`:
//!
//! ```text
//! G^x_xx =  E_x / 2E    G^x_xy = E_y / 2E    G^x_yy = -G_x / 2E
//! G^y_xx = -E_y / 2G    G^y_xy = G_x / 2G    G^y_yy =  G_y / 2G
//! ```
//!
//! which for a conformal factor reduce to `phi_x, phi_y, -phi_x` and
//! `-phi_y, phi_x, phi_y`.

mod chart;
mod field;
mod identities;
mod local;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use chart::{Chart, ConformalChart, Region, WarpFn, WarpedChart};
pub use field::{
    factors, ClosedFormField, DerivativeSource, FiniteDifferenceField, ScalarField,
};
pub use identities::{
    bochner_residual, gauss_curvature, grad_gauss_curvature, hessian_norm2, kato_residual,
    log_gradient_residual, metric_gradient_norm, metric_point_data, MetricPointData,
};
pub(crate) use local::Local;

/// Evaluation closer than this to a declared singular point is an error.
pub const SINGULAR_RADIUS: f64 = 1e-9;

/// Euclidean gradients below this norm count as critical.
pub const CRITICAL_GRADIENT: f64 = 1e-8;

/// Chart coordinates `(x, y)`; for warped charts `x = t` and `y = theta`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn offset(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Self::new(x, y)
    }
}
