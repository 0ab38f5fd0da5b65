use serde::{Deserialize, Serialize};

use super::{HarmonicField, Provenance, Symmetry};
use crate::error::{Error, Result};
use crate::geometry::{ClosedFormField, Point2};
use crate::jet::Jet;

/// Closed-form harmonic fields, addressed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CatalogSpec {
    /// `c ln|z|`.
    Log {
        #[serde(default = "minus_one")]
        coefficient: f64,
    },
    /// `Re z^n`.
    RePoly { n: u32 },
    /// `Im z^n`.
    ImPoly { n: u32 },
    /// `Re(z + a/z)`.
    ReZPlusAOverZ { a: f64 },
    /// `arg z` on the branch `(-pi, pi]`; harmonic away from the cut.
    Arg,
    /// `2 arctan(e^t)` on a warped chart.
    WarpedArctan,
    /// `-ln|z| + epsilon Re z`; non-radial levels for tracing, critical
    /// point at `z = 1/epsilon`.
    LogPlusLinear { epsilon: f64 },
    /// `c ln|z - center|`.
    LogOffset {
        center: [f64; 2],
        #[serde(default = "minus_one")]
        coefficient: f64,
    },
}

fn minus_one() -> f64 {
    -1.0
}

fn complex_power(x: Jet, y: Jet, n: u32) -> (Jet, Jet) {
    let mut re = Jet::constant(1.0).truncate(x.order());
    let mut im = Jet::constant(0.0).truncate(x.order());
    for _ in 0..n {
        (re, im) = (re * x - im * y, re * y + im * x);
    }
    (re, im)
}

impl CatalogSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CatalogSpec::Log { .. } => "log",
            CatalogSpec::RePoly { .. } => "re_poly",
            CatalogSpec::ImPoly { .. } => "im_poly",
            CatalogSpec::ReZPlusAOverZ { .. } => "re_z_plus_a_over_z",
            CatalogSpec::Arg => "arg",
            CatalogSpec::WarpedArctan => "warped_arctan",
            CatalogSpec::LogPlusLinear { .. } => "log_plus_linear",
            CatalogSpec::LogOffset { .. } => "log_offset",
        }
    }

    pub fn build(&self) -> Result<HarmonicField> {
        let prov = Provenance::Catalog(self.name().to_string());
        let origin = vec![Point2::ORIGIN];
        let field = match *self {
            CatalogSpec::Log { coefficient: c } => HarmonicField::new(
                format!("{c} ln|z|"),
                ClosedFormField::new("log", move |x, y| (x * x + y * y).ln() * (0.5 * c))
                    .with_singular_points(origin),
                prov,
                Symmetry::RadialLog {
                    center: Point2::ORIGIN,
                    a: 0.0,
                    b: c,
                },
            ),
            CatalogSpec::RePoly { n } | CatalogSpec::ImPoly { n } => {
                if n == 0 {
                    return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
                }
                let real = matches!(self, CatalogSpec::RePoly { .. });
                let label = if real { "Re" } else { "Im" };
                HarmonicField::new(
                    format!("{label} z^{n}"),
                    ClosedFormField::new(self.name(), move |x, y| {
                        let (re, im) = complex_power(x, y, n);
                        if real {
                            re
                        } else {
                            im
                        }
                    }),
                    prov,
                    Symmetry::None,
                )
            }
            CatalogSpec::ReZPlusAOverZ { a } => HarmonicField::new(
                format!("Re(z + {a}/z)"),
                ClosedFormField::new(self.name(), move |x, y| x + x * a / (x * x + y * y))
                    .with_singular_points(origin),
                prov,
                Symmetry::None,
            ),
            CatalogSpec::Arg => HarmonicField::new(
                "arg z",
                ClosedFormField::new("arg", |x, y| Jet::atan2(&y, &x)).with_singular_points(origin),
                prov,
                Symmetry::None,
            ),
            CatalogSpec::WarpedArctan => HarmonicField::new(
                "2 arctan(e^t)",
                ClosedFormField::new("warped_arctan", |t, _| t.exp().atan() * 2.0),
                prov,
                Symmetry::WarpedRadial,
            ),
            CatalogSpec::LogPlusLinear { epsilon } => HarmonicField::new(
                format!("-ln|z| + {epsilon} Re z"),
                ClosedFormField::new(self.name(), move |x, y| {
                    -(x * x + y * y).ln() * 0.5 + x * epsilon
                })
                .with_singular_points(origin),
                prov,
                Symmetry::None,
            ),
            CatalogSpec::LogOffset {
                center: [cx, cy],
                coefficient: c,
            } => {
                let center = Point2::new(cx, cy);
                HarmonicField::new(
                    format!("{c} ln|z - {center}|"),
                    ClosedFormField::new("log_offset", move |x, y| {
                        let dx = x - cx;
                        let dy = y - cy;
                        (dx * dx + dy * dy).ln() * (0.5 * c)
                    })
                    .with_singular_points(vec![center]),
                    prov,
                    Symmetry::RadialLog { center, a: 0.0, b: c },
                )
            }
        };
        Ok(field)
    }
}

/// Looks up a catalog field by name with positional numeric parameters.
///
/// | name | parameters |
/// |---|---|
/// | `log` | `[c]` (default `-1`) |
/// | `re_poly`, `im_poly` | `[n]` |
/// | `re_z_plus_a_over_z` | `[a]` |
/// | `arg`, `warped_arctan` | none |
/// | `log_plus_linear` | `[epsilon]` |
/// | `log_offset` | `[cx, cy]` or `[cx, cy, c]` |
pub fn catalog_field(name: &str, params: &[f64]) -> Result<HarmonicField> {
    let arity = |lo: usize, hi: usize| -> Result<()> {
        if params.len() < lo || params.len() > hi {
            return Err(Error::InvalidParameter(format!(
                "`{name}` takes {lo}..={hi} parameters, got {}",
                params.len()
            )));
        }
        Ok(())
    };
    let degree = |v: f64| -> Result<u32> {
        if v.fract() != 0.0 || !(1.0..=64.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("degree must be an integer in 1..=64, got {v}")));
        }
        Ok(v as u32)
    };
    let spec = match name {
        "log" => {
            arity(0, 1)?;
            CatalogSpec::Log {
                coefficient: params.first().copied().unwrap_or(-1.0),
            }
        }
        "re_poly" => {
            arity(1, 1)?;
            CatalogSpec::RePoly { n: degree(params[0])? }
        }
        "im_poly" => {
            arity(1, 1)?;
            CatalogSpec::ImPoly { n: degree(params[0])? }
        }
        "re_z_plus_a_over_z" => {
            arity(1, 1)?;
            CatalogSpec::ReZPlusAOverZ { a: params[0] }
        }
        "arg" => {
            arity(0, 0)?;
            CatalogSpec::Arg
        }
        "warped_arctan" => {
            arity(0, 0)?;
            CatalogSpec::WarpedArctan
        }
        "log_plus_linear" => {
            arity(1, 1)?;
            CatalogSpec::LogPlusLinear { epsilon: params[0] }
        }
        "log_offset" => {
            arity(2, 3)?;
            CatalogSpec::LogOffset {
                center: [params[0], params[1]],
                coefficient: params.get(2).copied().unwrap_or(-1.0),
            }
        }
        other => return Err(Error::UnknownField(other.to_string())),
    };
    spec.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScalarField;
    use crate::sampling::annulus_points;
    use approx::assert_relative_eq;

    #[test]
    fn catalog_examples() {
        let u = catalog_field("log", &[-1.0]).unwrap();
        let p = Point2::new(1.2, 0.9);
        assert_relative_eq!(u.value(p).unwrap(), -p.norm().ln(), epsilon = 1e-15);

        let u = catalog_field("warped_arctan", &[]).unwrap();
        assert_relative_eq!(
            u.value(Point2::new(0.0, 1.0)).unwrap(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-15
        );
        for t in [-30.0, 30.0] {
            let v = u.value(Point2::new(t, 0.0)).unwrap();
            assert!(v > 0.0 && v < std::f64::consts::PI);
        }

        let u = catalog_field("re_poly", &[2.0]).unwrap();
        assert_relative_eq!(u.value(Point2::new(1.5, 0.5)).unwrap(), 2.0, epsilon = 1e-15);
        let u = catalog_field("im_poly", &[3.0]).unwrap();
        // Im (1 + i)^3 = Im(-2 + 2i) = 2
        assert_relative_eq!(u.value(Point2::new(1.0, 1.0)).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn unknown_names_and_bad_parameters() {
        assert!(matches!(catalog_field("nope", &[]), Err(Error::UnknownField(_))));
        assert!(catalog_field("re_poly", &[]).is_err());
        assert!(catalog_field("re_poly", &[1.5]).is_err());
        assert!(catalog_field("arg", &[1.0]).is_err());
    }

    #[test]
    fn planar_catalog_fields_are_harmonic() {
        let fields = [
            catalog_field("log", &[]).unwrap(),
            catalog_field("log", &[2.5]).unwrap(),
            catalog_field("re_poly", &[1.0]).unwrap(),
            catalog_field("re_poly", &[4.0]).unwrap(),
            catalog_field("im_poly", &[3.0]).unwrap(),
            catalog_field("re_z_plus_a_over_z", &[1.0]).unwrap(),
            catalog_field("arg", &[]).unwrap(),
            catalog_field("log_offset", &[0.2, -0.1]).unwrap(),
            catalog_field("log_plus_linear", &[0.1]).unwrap(),
        ];
        for u in &fields {
            for p in annulus_points(100, Point2::ORIGIN, 1.0, 2.0, 3) {
                let lap = u.euclidean_laplacian(p).unwrap();
                let scale = 1.0 + u.jet_to(p, 2).unwrap().hessian().iter().map(|h| h.abs()).sum::<f64>();
                assert!(lap.abs() <= 1e-8 * scale, "{} at {p}: {lap}", u.name());
            }
        }
    }
}
