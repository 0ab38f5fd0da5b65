//! Harmonic fields: the annulus Dirichlet solution, a catalog of closed forms,
//! critical-point detection and a polar-grid solver used for cross-checks.

mod catalog;
mod critical;
mod numeric;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ClosedFormField, DerivativeSource, Point2, ScalarField};
use crate::jet::Jet;

pub use catalog::{catalog_field, CatalogSpec};
pub use critical::{critical_points, CriticalPointReport, SeedFailure};
pub use numeric::{solve_annulus_numeric, NumericSolution};

/// Boundary data `u = t1` on `|z| = 1`, `u = t2` on `|z| = R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletSpec {
    #[serde(rename = "R")]
    pub outer_radius: f64,
    pub t1: f64,
    pub t2: f64,
}

impl DirichletSpec {
    pub fn new(outer_radius: f64, t1: f64, t2: f64) -> Self {
        Self {
            outer_radius,
            t1,
            t2,
        }
    }

    /// `u = -ln|z|` on `1 < |z| < R`.
    pub fn canonical(outer_radius: f64) -> Self {
        Self::new(outer_radius, 0.0, -outer_radius.ln())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_radius > 1.0) || !self.outer_radius.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "outer radius must exceed 1, got {}",
                self.outer_radius
            )));
        }
        if !self.t1.is_finite() || !self.t2.is_finite() {
            return Err(Error::InvalidParameter("boundary values must be finite".into()));
        }
        Ok(())
    }

    /// `(min, max)` of the boundary values.
    pub fn level_range(&self) -> (f64, f64) {
        (self.t1.min(self.t2), self.t1.max(self.t2))
    }

    /// `t2 - t1`.
    pub fn span(&self) -> f64 {
        self.t2 - self.t1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    AnnulusDirichlet(DirichletSpec),
    Catalog(String),
    NumericGrid,
}

/// Structure used by level extraction to avoid tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symmetry {
    /// `u = a + b ln|z - center|`.
    RadialLog { center: Point2, a: f64, b: f64 },
    /// On a warped chart, `u` depends on `t` only and is strictly monotone.
    WarpedRadial,
    None,
}

/// A field that is harmonic for the Euclidean Laplacian of the chart
/// coordinates (and hence for every conformal metric on them), or radial and
/// metric-harmonic on a warped chart.
#[derive(Clone)]
pub struct HarmonicField {
    name: String,
    field: Arc<dyn ScalarField>,
    provenance: Provenance,
    symmetry: Symmetry,
}

impl fmt::Debug for HarmonicField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HarmonicField")
            .field("name", &self.name)
            .field("provenance", &self.provenance)
            .field("symmetry", &self.symmetry)
            .finish()
    }
}

impl HarmonicField {
    pub(crate) fn new(
        name: impl Into<String>,
        field: impl ScalarField + 'static,
        provenance: Provenance,
        symmetry: Symmetry,
    ) -> Self {
        Self {
            name: name.into(),
            field: Arc::new(field),
            provenance,
            symmetry,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// `-u`, with the same provenance and mirrored symmetry data.
    pub fn negated(&self) -> Self {
        let inner = self.field.clone();
        let symmetry = match self.symmetry {
            Symmetry::RadialLog { center, a, b } => Symmetry::RadialLog {
                center,
                a: -a,
                b: -b,
            },
            s => s,
        };
        let singular = inner.singular_points().to_vec();
        Self {
            name: format!("-({})", self.name),
            field: Arc::new(Negated(inner, singular)),
            provenance: self.provenance.clone(),
            symmetry,
        }
    }

    /// The same field with its symmetry hint dropped, so level curves are
    /// traced instead of constructed.
    pub fn without_symmetry(&self) -> Self {
        Self {
            symmetry: Symmetry::None,
            ..self.clone()
        }
    }

    /// `Lap_0 u = u_xx + u_yy` in chart coordinates.
    pub fn euclidean_laplacian(&self, p: Point2) -> Result<f64> {
        let [xx, _, yy] = self.field.jet_to(p, 2)?.hessian();
        Ok(xx + yy)
    }
}

impl ScalarField for HarmonicField {
    fn jet_to(&self, p: Point2, order: usize) -> Result<Jet> {
        self.field.jet_to(p, order)
    }

    fn value(&self, p: Point2) -> Result<f64> {
        self.field.value(p)
    }

    fn derivative_source(&self) -> DerivativeSource {
        self.field.derivative_source()
    }

    fn singular_points(&self) -> &[Point2] {
        self.field.singular_points()
    }
}

#[derive(Debug)]
struct Negated(Arc<dyn ScalarField>, Vec<Point2>);

impl ScalarField for Negated {
    fn jet_to(&self, p: Point2, order: usize) -> Result<Jet> {
        Ok(-self.0.jet_to(p, order)?)
    }

    fn derivative_source(&self) -> DerivativeSource {
        self.0.derivative_source()
    }

    fn singular_points(&self) -> &[Point2] {
        &self.1
    }
}

/// `u(z) = t1 + (t2 - t1) ln|z| / ln R`.
pub fn solve_annulus_dirichlet(spec: DirichletSpec) -> Result<HarmonicField> {
    spec.validate()?;
    let a = spec.t1;
    let b = spec.span() / spec.outer_radius.ln();
    let field = ClosedFormField::new("annulus_dirichlet", move |x, y| {
        (x * x + y * y).ln() * (0.5 * b) + a
    })
    .with_singular_points(vec![Point2::ORIGIN]);
    Ok(HarmonicField::new(
        format!("dirichlet(R={}, t1={}, t2={})", spec.outer_radius, a, spec.t2),
        field,
        Provenance::AnnulusDirichlet(spec),
        Symmetry::RadialLog {
            center: Point2::ORIGIN,
            a,
            b,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn dirichlet_examples() {
        let u = solve_annulus_dirichlet(DirichletSpec::new(E, 0.0, 1.0)).unwrap();
        assert_relative_eq!(u.value(Point2::new(E.sqrt(), 0.0)).unwrap(), 0.5, epsilon = 1e-15);

        let r = 3.0;
        let u = solve_annulus_dirichlet(DirichletSpec::canonical(r)).unwrap();
        for p in [Point2::new(1.3, 0.4), Point2::polar(2.5, 2.0)] {
            assert_relative_eq!(u.value(p).unwrap(), -p.norm().ln(), epsilon = 1e-14);
        }

        let u = solve_annulus_dirichlet(DirichletSpec::new(2.0, 0.7, 0.7)).unwrap();
        let j = u.jet(Point2::new(1.5, 0.2)).unwrap();
        assert_eq!(j.value(), 0.7);
        assert_eq!(j.gradient(), [0.0, 0.0]);
    }

    #[test]
    fn dirichlet_rejects_bad_radius() {
        assert!(solve_annulus_dirichlet(DirichletSpec::new(1.0, 0.0, 1.0)).is_err());
        assert!(solve_annulus_dirichlet(DirichletSpec::new(0.3, 0.0, 1.0)).is_err());
    }

    #[test]
    fn negation_flips_values_and_symmetry() {
        let u = solve_annulus_dirichlet(DirichletSpec::canonical(2.0)).unwrap();
        let v = u.negated();
        let p = Point2::new(1.2, -0.3);
        assert_eq!(v.value(p).unwrap(), -u.value(p).unwrap());
        assert!(matches!(v.symmetry(), Symmetry::RadialLog { b, .. } if b == 1.0));
    }

    proptest! {
        #[test]
        fn dirichlet_takes_boundary_values_and_is_harmonic(
            r in 1.1f64..10.0,
            t1 in -5.0f64..5.0,
            t2 in -5.0f64..5.0,
            th in 0.0f64..6.28,
            s in 0.0f64..1.0,
        ) {
            let u = solve_annulus_dirichlet(DirichletSpec::new(r, t1, t2)).unwrap();
            prop_assert!((u.value(Point2::polar(1.0, th)).unwrap() - t1).abs() <= 1e-12 * (1.0 + t1.abs()));
            prop_assert!((u.value(Point2::polar(r, th)).unwrap() - t2).abs() <= 1e-12 * (1.0 + t2.abs()));
            let p = Point2::polar(1.0 + s * (r - 1.0), th);
            prop_assert!(u.euclidean_laplacian(p).unwrap().abs() <= 1e-10 * (1.0 + (t2 - t1).abs()));
        }
    }
}
