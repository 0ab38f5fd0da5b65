use std::fmt;
use std::sync::Arc;

use super::{Point2, SINGULAR_RADIUS};
use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_ORDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSource {
    ClosedForm,
    NestedFiniteDifference,
}

/// A real field on a chart with coordinate derivatives up to order four.
pub trait ScalarField: Send + Sync + fmt::Debug {
    /// Taylor jet at `p` truncated at `order` (at most [`MAX_ORDER`]).
    fn jet_to(&self, p: Point2, order: usize) -> Result<Jet>;

    fn jet(&self, p: Point2) -> Result<Jet> {
        self.jet_to(p, MAX_ORDER)
    }

    fn value(&self, p: Point2) -> Result<f64> {
        Ok(self.jet_to(p, 0)?.value())
    }

    fn derivative_source(&self) -> DerivativeSource {
        DerivativeSource::ClosedForm
    }

    fn singular_points(&self) -> &[Point2] {
        &[]
    }
}

pub(crate) fn check_singular(p: Point2, singular: &[Point2]) -> Result<()> {
    for &s in singular {
        let distance = p.dist(s);
        if distance < SINGULAR_RADIUS {
            return Err(Error::Singular {
                point: p,
                singularity: s,
                distance,
            });
        }
    }
    Ok(())
}

type JetFn = dyn Fn(Jet, Jet) -> Jet + Send + Sync;

/// A field given by a closed-form expression in the coordinate jets.
#[derive(Clone)]
pub struct ClosedFormField {
    name: String,
    expr: Arc<JetFn>,
    singular: Vec<Point2>,
}

impl ClosedFormField {
    pub fn new(
        name: impl Into<String>,
        expr: impl Fn(Jet, Jet) -> Jet + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            expr: Arc::new(expr),
            singular: Vec::new(),
        }
    }

    pub fn with_singular_points(mut self, points: Vec<Point2>) -> Self {
        self.singular = points;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for ClosedFormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedFormField")
            .field("name", &self.name)
            .field("singular", &self.singular)
            .finish()
    }
}

impl ScalarField for ClosedFormField {
    fn jet_to(&self, p: Point2, order: usize) -> Result<Jet> {
        check_singular(p, &self.singular)?;
        let order = order.min(MAX_ORDER);
        let x = Jet::var_x(p.x).truncate(order);
        let y = Jet::var_y(p.y).truncate(order);
        let j = (self.expr)(x, y);
        if !j.value().is_finite() {
            return Err(Error::OutOfDomain(p));
        }
        Ok(j)
    }

    fn singular_points(&self) -> &[Point2] {
        &self.singular
    }
}

type ValueFn = dyn Fn(Point2) -> f64 + Send + Sync;

/// A field known only through point values; derivatives come from nested
/// central differences on a 5x5 stencil with one Richardson level.
#[derive(Clone)]
pub struct FiniteDifferenceField {
    name: String,
    f: Arc<ValueFn>,
    step: f64,
    singular: Vec<Point2>,
}

/// One-dimensional central stencils on offsets -2..=2, for derivative orders 0..=4.
const STENCIL: [[f64; 5]; 5] = [
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, -0.5, 0.0, 0.5, 0.0],
    [0.0, 1.0, -2.0, 1.0, 0.0],
    [-0.5, 1.0, 0.0, -1.0, 0.5],
    [1.0, -4.0, 6.0, -4.0, 1.0],
];

impl FiniteDifferenceField {
    /// Default step `1e-3 * domain_diameter`.
    pub fn new(
        name: impl Into<String>,
        domain_diameter: f64,
        f: impl Fn(Point2) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            step: 1e-3 * domain_diameter,
            singular: Vec::new(),
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_singular_points(mut self, points: Vec<Point2>) -> Self {
        self.singular = points;
        self
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn partials_at_step(&self, p: Point2, order: usize, h: f64) -> Result<[[f64; 5]; 5]> {
        let mut samples = [[0.0; 5]; 5];
        for (a, row) in samples.iter_mut().enumerate() {
            for (b, s) in row.iter_mut().enumerate() {
                let q = p.offset((a as f64 - 2.0) * h, (b as f64 - 2.0) * h);
                let v = (self.f)(q);
                if !v.is_finite() {
                    return Err(Error::OutOfDomain(q));
                }
                *s = v;
            }
        }
        let mut d = [[0.0; 5]; 5];
        for i in 0..=order {
            for j in 0..=order - i {
                let mut acc = 0.0;
                for a in 0..5 {
                    let wa = STENCIL[i][a];
                    if wa == 0.0 {
                        continue;
                    }
                    for b in 0..5 {
                        acc += wa * STENCIL[j][b] * samples[a][b];
                    }
                }
                d[i][j] = acc / h.powi((i + j) as i32);
            }
        }
        Ok(d)
    }
}

impl fmt::Debug for FiniteDifferenceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceField")
            .field("name", &self.name)
            .field("step", &self.step)
            .finish()
    }
}

impl ScalarField for FiniteDifferenceField {
    fn jet_to(&self, p: Point2, order: usize) -> Result<Jet> {
        check_singular(p, &self.singular)?;
        let order = order.min(MAX_ORDER);
        if order == 0 {
            return Ok(Jet::constant((self.f)(p)));
        }
        let coarse = self.partials_at_step(p, order, self.step)?;
        let fine = self.partials_at_step(p, order, 0.5 * self.step)?;
        Ok(Jet::from_partials(order, |i, j| {
            if i + j == 0 {
                fine[0][0]
            } else {
                (4.0 * fine[i][j] - coarse[i][j]) / 3.0
            }
        }))
    }

    fn value(&self, p: Point2) -> Result<f64> {
        check_singular(p, &self.singular)?;
        Ok((self.f)(p))
    }

    fn derivative_source(&self) -> DerivativeSource {
        DerivativeSource::NestedFiniteDifference
    }

    fn singular_points(&self) -> &[Point2] {
        &self.singular
    }
}

/// Conformal factors `phi` used throughout the examples and tests.
pub mod factors {
    use super::ClosedFormField;
    use crate::geometry::Point2;
    use crate::jet::Jet;

    /// `phi = c`.
    pub fn flat(c: f64) -> ClosedFormField {
        ClosedFormField::new("flat", move |x, _| Jet::constant(c).truncate(x.order()))
    }

    /// `phi = ln(1 + c r^2)`, i.e. `lambda = 1 + c r^2`. With `c < 0` this is
    /// the positively curved cap used as the converse example (`K(0) = -4c`).
    pub fn quadratic_lambda(c: f64) -> ClosedFormField {
        ClosedFormField::new(format!("quadratic_lambda({c})"), move |x, y| {
            (((x * x + y * y) * c) + 1.0).ln()
        })
    }

    /// `phi = ln(1 + a x^2 + b y^2)`: normalized at the origin, anisotropic.
    pub fn anisotropic_lambda(a: f64, b: f64) -> ClosedFormField {
        ClosedFormField::new(format!("anisotropic_lambda({a},{b})"), move |x, y| {
            (x * x * a + y * y * b + 1.0).ln()
        })
    }

    /// Round sphere of curvature one via stereographic projection,
    /// `phi = ln(2 / (1 + r^2))`.
    pub fn stereographic_sphere() -> ClosedFormField {
        ClosedFormField::new("stereographic_sphere", |x, y| {
            -(x * x + y * y + 1.0).ln() + std::f64::consts::LN_2
        })
    }

    /// Hyperbolic upper half-plane, `phi = -ln y`.
    pub fn half_plane() -> ClosedFormField {
        ClosedFormField::new("half_plane", |_, y| -y.ln())
    }

    /// `phi = beta + sum alpha_j ln|z - z_j|`; singular at every `z_j`.
    pub fn log_sum(beta: f64, atoms: Vec<(Point2, f64)>) -> ClosedFormField {
        let singular = atoms.iter().map(|a| a.0).collect();
        ClosedFormField::new("log_sum", move |x, y| {
            let mut acc = Jet::constant(beta).truncate(x.order());
            for &(z, alpha) in &atoms {
                let dx = x - z.x;
                let dy = y - z.y;
                acc = acc + (dx * dx + dy * dy).ln() * (0.5 * alpha);
            }
            acc
        })
        .with_singular_points(singular)
    }
}
