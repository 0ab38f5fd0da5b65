//! Conformal factors with conical singularities.
//!
//! A conical factor `v(z) = beta0 + sum alpha_j ln|z - z_j|` defines the
//! singular metric `e^{2v} |dz|^2`. Its curvature is the measure
//! `-e^{-2v} Lap_0 v`, concentrated at the vertices with mass `-2 pi alpha_j`;
//! the cone angle at `z_j` is `2 pi (1 + alpha_j)`. All `alpha_j >= 0` means
//! nonpositive curvature and a subharmonic `v`.
//!
//! On the annulus with `u = a + b ln|z|`, the level `{u = t}` is the circle
//! `|z| = rho(t)` and its length is
//!
//! ```text
//! L(t) = rho e^{beta0} int_0^{2 pi} prod_j |rho e^{i theta} - z_j|^{alpha_j} d theta,
//! ```
//!
//! which stays finite when the circle passes through a vertex as long as
//! `alpha_j > -1`. The integral is split at the vertex directions and each
//! half-piece is integrated in the angular offset from its vertex, so the
//! distance `|rho e^{i theta} - z_j|` keeps full relative precision near the
//! singularity.

mod mollify;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{factors, ClosedFormField, Point2, ScalarField};
use crate::harmonic::DirichletSpec;
use crate::jet::Jet;
use crate::levelsets::LengthProfile;
use crate::par::Execution;
use crate::quadrature::{adaptive, pairwise_sum, AdaptiveOptions};

pub use mollify::{
    mollified_convergence, mollified_length, mollified_length_profile, mollify, sub_mean_value_defect,
    MollifiedConvergence, MollifiedFactor,
};

/// One vertex: position and exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Singularity {
    pub z: Point2,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct ConicalFactor {
    beta0: f64,
    singularities: Vec<Singularity>,
    field: ClosedFormField,
}

impl PartialEq for ConicalFactor {
    fn eq(&self, other: &Self) -> bool {
        self.beta0 == other.beta0 && self.singularities == other.singularities
    }
}

/// `v = beta0 + sum alpha_j ln|z - z_j|`.
pub fn conical_factor(beta0: f64, singularities: Vec<Singularity>) -> Result<ConicalFactor> {
    if !beta0.is_finite() {
        return Err(Error::InvalidParameter(format!("base value must be finite, got {beta0}")));
    }
    for (i, s) in singularities.iter().enumerate() {
        if !s.z.is_finite() || !s.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("singularity {i} is not finite")));
        }
        if s.alpha <= -1.0 {
            return Err(Error::NonIntegrable(format!(
                "exponent {} at {} is not above -1; the length element is not locally integrable",
                s.alpha, s.z
            )));
        }
        for o in &singularities[..i] {
            if o.z == s.z {
                return Err(Error::InvalidParameter(format!("singularity {} is listed twice", s.z)));
            }
        }
    }
    let atoms = singularities.iter().map(|s| (s.z, s.alpha)).collect();
    Ok(ConicalFactor {
        beta0,
        field: factors::log_sum(beta0, atoms),
        singularities,
    })
}

/// Curvature atom `mass = -2 pi alpha` at `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub z: Point2,
    pub mass: f64,
}

/// Curvature measure of a conical factor; there is no absolutely continuous part.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureMeasure {
    pub atoms: Vec<Atom>,
    pub total_mass: f64,
    pub nonpositive: bool,
}

impl ConicalFactor {
    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    /// All exponents are nonnegative.
    pub fn nonpositive_curvature(&self) -> bool {
        self.singularities.iter().all(|s| s.alpha >= 0.0)
    }

    /// `2 pi (1 + alpha_j)` for each vertex.
    pub fn cone_angles(&self) -> Vec<f64> {
        self.singularities.iter().map(|s| TAU * (1.0 + s.alpha)).collect()
    }

    pub fn curvature_measure(&self) -> CurvatureMeasure {
        let atoms: Vec<Atom> = self
            .singularities
            .iter()
            .map(|s| Atom {
                z: s.z,
                mass: -TAU * s.alpha,
            })
            .collect();
        let masses: Vec<f64> = atoms.iter().map(|a| a.mass).collect();
        CurvatureMeasure {
            total_mass: pairwise_sum(&masses),
            nonpositive: self.nonpositive_curvature(),
            atoms,
        }
    }

    /// `v(p)`; `-inf` or `+inf` at a vertex.
    pub fn value_at(&self, p: Point2) -> f64 {
        self.beta0
            + self
                .singularities
                .iter()
                .map(|s| s.alpha * p.dist(s.z).ln())
                .sum::<f64>()
    }

    /// Levels `u = t` whose circles pass through a vertex inside the annulus.
    pub fn vertex_levels(&self, spec: &DirichletSpec) -> Vec<f64> {
        let ln_r = spec.outer_radius.ln();
        let mut t: Vec<f64> = self
            .singularities
            .iter()
            .map(|s| s.z.norm())
            .filter(|&r| r > 1.0 && r < spec.outer_radius)
            .map(|r| spec.t1 + spec.span() * r.ln() / ln_r)
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

impl ScalarField for ConicalFactor {
    fn jet_to(&self, p: Point2, order: usize) -> Result<Jet> {
        self.field.jet_to(p, order)
    }

    fn singular_points(&self) -> &[Point2] {
        self.field.singular_points()
    }
}

/// Quadrature controls for singular circle integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicOptions {
    /// Initial uniform subdivisions of every half-piece between vertex directions.
    pub initial_pieces: usize,
    pub rel_tol: f64,
    /// Hard cap on subintervals per half-piece.
    pub max_subintervals: usize,
    pub execution: Execution,
}

impl Default for BicOptions {
    fn default() -> Self {
        Self {
            initial_pieces: 4,
            rel_tol: 1e-10,
            max_subintervals: 1 << 20,
            execution: Execution::default(),
        }
    }
}

/// Radius of the level circle `{u = t}` for the annulus Dirichlet solution.
pub fn level_radius(spec: &DirichletSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    let rho = (spec.outer_radius.ln() * (t - spec.t1) / spec.span()).exp();
    let slack = 1e-12;
    if !(rho >= 1.0 - slack && rho <= spec.outer_radius * (1.0 + slack)) {
        return Err(Error::Topology {
            level: t,
            reason: format!("circle of radius {rho} leaves the annulus 1 <= |z| <= {}", spec.outer_radius),
        });
    }
    Ok(rho)
}

/// Polar data of a vertex relative to the origin.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Polar {
    pub r: f64,
    pub theta: f64,
}

pub(crate) fn polar(z: Point2) -> Polar {
    Polar {
        r: z.norm(),
        theta: z.y.atan2(z.x).rem_euclid(TAU),
    }
}

/// `|rho e^{i theta} - z|` with `theta - theta_z = delta`, accurate for small `delta`.
pub(crate) fn circle_distance(rho: f64, z: Polar, delta: f64) -> f64 {
    let s = (0.5 * delta).sin();
    ((rho - z.r).powi(2) + 4.0 * rho * z.r * s * s).sqrt()
}

/// `int_0^{2 pi} f(anchor, offset) d theta` split at `angles`. Each half-piece
/// is parametrized by the offset from its nearer split angle, and `f`
/// receives the anchor angle and the signed offset.
pub(crate) fn circle_integral(
    angles: &[f64],
    opts: &BicOptions,
    f: impl Fn(f64, f64) -> f64,
) -> Result<f64> {
    let mut anchors: Vec<f64> = angles.to_vec();
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();
    let aopts = AdaptiveOptions {
        rel_tol: opts.rel_tol,
        abs_tol: 1e-300,
        max_subintervals: opts.max_subintervals,
    };
    let pieces = opts.initial_pieces.max(1);
    let cuts = |len: f64| -> Vec<f64> { (1..pieces).map(|i| len * i as f64 / pieces as f64).collect() };
    let mut parts = Vec::new();
    let mut run = |anchor: f64, sign: f64, len: f64| -> Result<()> {
        let r = adaptive(|x| f(anchor, sign * x), 0.0, len, &cuts(len), aopts);
        if !r.converged || !r.value.is_finite() {
            return Err(Error::NonIntegrable(format!(
                "adaptive quadrature stopped at {} subintervals (value {:.6e}, error {:.3e})",
                r.subintervals, r.value, r.error
            )));
        }
        parts.push(r.value);
        Ok(())
    };
    if anchors.is_empty() {
        run(0.0, 1.0, TAU)?;
    } else {
        let m = anchors.len();
        for i in 0..m {
            let next = if i + 1 < m { anchors[i + 1] } else { anchors[0] + TAU };
            let half = 0.5 * (next - anchors[i]);
            run(anchors[i], 1.0, half)?;
            run(if i + 1 < m { anchors[i + 1] } else { anchors[0] }, -1.0, half)?;
        }
    }
    Ok(pairwise_sum(&parts))
}

/// `L(t)` of the conical metric on the level circle `|z| = rho`.
pub fn conical_circle_length(factor: &ConicalFactor, rho: f64, opts: &BicOptions) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("circle radius must be positive, got {rho}")));
    }
    let poles: Vec<Polar> = factor.singularities.iter().map(|s| polar(s.z)).collect();
    let angles: Vec<f64> = poles.iter().map(|p| p.theta).collect();
    let alphas: Vec<f64> = factor.singularities.iter().map(|s| s.alpha).collect();
    let integral = circle_integral(&angles, opts, |anchor, offset| {
        let mut v = factor.beta0;
        for (p, &a) in poles.iter().zip(&alphas) {
            v += a * circle_distance(rho, *p, (anchor - p.theta) + offset).ln();
        }
        v.exp()
    })?;
    Ok(rho * integral)
}

fn profile_lengths(
    factor: &ConicalFactor,
    spec: &DirichletSpec,
    t_grid: &[f64],
    opts: &BicOptions,
) -> Result<LengthProfile> {
    let lengths = opts.execution.try_map(t_grid, |&t| {
        conical_circle_length(factor, level_radius(spec, t)?, opts)
    })?;
    LengthProfile::from_lengths(t_grid.to_vec(), lengths)
}

/// Length profile of a nonpositively curved conical factor on the annulus
/// Dirichlet levels. Derivative columns come from grid differences only.
pub fn bic_length_profile(
    factor: &ConicalFactor,
    spec: &DirichletSpec,
    t_grid: &[f64],
    opts: &BicOptions,
) -> Result<LengthProfile> {
    if !factor.nonpositive_curvature() {
        return Err(Error::Precondition(
            "the factor has a positive curvature atom (some alpha < 0)".into(),
        ));
    }
    profile_lengths(factor, spec, t_grid, opts)
}

/// As [`bic_length_profile`] without the curvature-sign precondition, for
/// exhibiting convexity failures.
pub fn conical_length_profile(
    factor: &ConicalFactor,
    spec: &DirichletSpec,
    t_grid: &[f64],
    opts: &BicOptions,
) -> Result<LengthProfile> {
    profile_lengths(factor, spec, t_grid, opts)
}

/// Replaces the grid point nearest to each of `levels` by that level, keeping
/// the grid size and strict ordering.
pub fn snap_levels(grid: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut out = grid.to_vec();
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    for &t in levels {
        if !(t > lo && t < hi) {
            continue;
        }
        let i = out
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .expect("nonempty grid");
        out[i] = t;
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `(1 / 2 pi) oint d_n v ds` over the circle of radius `radius` around
/// vertex `j`, by the periodic trapezoid rule with `n` nodes.
pub fn atom_flux(factor: &ConicalFactor, j: usize, radius: f64, n: usize) -> Result<f64> {
    let s = factor
        .singularities
        .get(j)
        .ok_or_else(|| Error::InvalidParameter(format!("no singularity with index {j}")))?;
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let th = TAU * i as f64 / n as f64;
        let (sn, cs) = th.sin_cos();
        let p = s.z.offset(radius * cs, radius * sn);
        let [vx, vy] = factor.jet_to(p, 1)?.gradient();
        terms.push((vx * cs + vy * sn) * radius * TAU / n as f64);
    }
    Ok(pairwise_sum(&terms) / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelsets::{inset_grid, log_convexity_check};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sing(x: f64, y: f64, alpha: f64) -> Singularity {
        Singularity {
            z: Point2::new(x, y),
            alpha,
        }
    }

    fn two_atoms() -> ConicalFactor {
        conical_factor(0.0, vec![sing(1.2, 0.0, 0.5), sing(0.0, -1.6, 0.3)]).unwrap()
    }

    #[test]
    fn construction_examples() {
        let f = conical_factor(0.0, vec![sing(1.5, 0.0, 1.0)]).unwrap();
        assert_relative_eq!(f.cone_angles()[0], 4.0 * PI);
        assert_relative_eq!(f.curvature_measure().atoms[0].mass, -TAU);

        let flat = conical_factor(0.0, vec![]).unwrap();
        let m = flat.curvature_measure();
        assert!(m.atoms.is_empty() && m.total_mass == 0.0 && m.nonpositive);

        let m = two_atoms().curvature_measure();
        assert_relative_eq!(m.total_mass, -TAU * 0.8, epsilon = 1e-14);
        assert!(m.nonpositive);
    }

    #[test]
    fn construction_errors() {
        let e = conical_factor(0.0, vec![sing(1.5, 0.0, -1.0)]).unwrap_err();
        assert!(matches!(e, Error::NonIntegrable(_)));
        let e = conical_factor(0.0, vec![sing(1.5, 0.0, 0.2), sing(1.5, 0.0, 0.3)]).unwrap_err();
        assert!(matches!(e, Error::InvalidParameter(_)));
        let f = conical_factor(0.0, vec![sing(1.5, 0.0, -0.5)]).unwrap();
        assert!(!f.nonpositive_curvature());
    }

    #[test]
    fn flat_lengths_are_exact() {
        let spec = DirichletSpec::canonical(2f64.exp());
        let f = conical_factor(0.3, vec![]).unwrap();
        let grid = inset_grid(-2.0, 0.0, 20);
        let p = bic_length_profile(&f, &spec, &grid, &BicOptions::default()).unwrap();
        for (t, l) in p.t.iter().zip(&p.l) {
            assert_relative_eq!(*l, TAU * (-t).exp() * 0.3f64.exp(), max_relative = 1e-13);
        }
        assert!(p.ln_second_differences().iter().all(|d| d.abs() < 1e-8));
    }

    #[test]
    fn single_atom_off_circle_matches_mean_value() {
        // With alpha = 2 the integrand is |w - z_j|^2, whose circle mean is rho^2 + |z_j|^2.
        let f = conical_factor(0.0, vec![sing(1.5, 0.0, 2.0)]).unwrap();
        for rho in [1.1, 2.0] {
            let l = conical_circle_length(&f, rho, &BicOptions::default()).unwrap();
            assert_relative_eq!(l, TAU * rho * (rho * rho + 2.25), max_relative = 1e-12);
        }
    }

    #[test]
    fn level_through_atom_is_finite() {
        // alpha = 1 through the vertex: rho int |rho e^{it} - rho| dt = 8 rho^2.
        let f = conical_factor(0.0, vec![sing(1.5, 0.0, 1.0)]).unwrap();
        let l = conical_circle_length(&f, 1.5, &BicOptions::default()).unwrap();
        assert_relative_eq!(l, 8.0 * 1.5 * 1.5, max_relative = 1e-10);
        // alpha = -1/2: rho^{1/2} int (2 |sin(t/2)|)^{-1/2} dt = rho^{1/2} sqrt(2) B(1/4, 1/2)
        let f = conical_factor(0.0, vec![sing(1.5, 0.0, -0.5)]).unwrap();
        let l = conical_circle_length(&f, 1.5, &BicOptions::default()).unwrap();
        assert_relative_eq!(l, 1.5f64.sqrt() * 7.416_298_709_205_487, max_relative = 1e-9);
    }

    #[test]
    fn two_atom_profile_is_log_convex() {
        let spec = DirichletSpec::canonical(2f64.exp());
        let f = two_atoms();
        let levels = f.vertex_levels(&spec);
        assert_eq!(levels.len(), 2);
        let grid = snap_levels(&inset_grid(-2.0, 0.0, 200), &levels);
        assert!(levels.iter().all(|t| grid.contains(t)));
        let p = bic_length_profile(&f, &spec, &grid, &BicOptions::default()).unwrap();
        let min = p.ln_second_differences().into_iter().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-5, "{min}");
        assert!(log_convexity_check(&p, 1e-5).unwrap().pass);
    }

    #[test]
    fn negative_exponent_breaks_convexity() {
        let spec = DirichletSpec::canonical(2f64.exp());
        let f = conical_factor(0.0, vec![sing(1.5, 0.0, -0.5)]).unwrap();
        let grid = snap_levels(&inset_grid(-2.0, 0.0, 200), &f.vertex_levels(&spec));
        assert!(bic_length_profile(&f, &spec, &grid, &BicOptions::default()).is_err());
        let p = conical_length_profile(&f, &spec, &grid, &BicOptions::default()).unwrap();
        let r = log_convexity_check(&p, 1e-5).unwrap();
        assert!(!r.pass);
        assert!((r.argmin_second_difference + 1.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn flux_identity_recovers_exponents() {
        let f = two_atoms();
        for (j, s) in f.singularities().iter().enumerate() {
            let flux = atom_flux(&f, j, 0.05, 256).unwrap();
            assert!((flux - s.alpha).abs() < 1e-8, "{flux} vs {}", s.alpha);
        }
    }

    #[test]
    fn snapping_keeps_grid_size() {
        let g = inset_grid(0.0, 1.0, 11);
        let s = snap_levels(&g, &[0.33, 0.71, 2.0]);
        assert_eq!(s.len(), 11);
        assert!(s.contains(&0.33) && s.contains(&0.71));
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn nonnegative_exponents_give_log_convex_lengths(
            a1 in 0.0f64..1.5, a2 in 0.0f64..1.5,
            r1 in 1.05f64..2.6, r2 in 1.05f64..2.6,
            th1 in 0.0f64..6.28, th2 in 0.0f64..6.28,
        ) {
            let f = conical_factor(0.1, vec![
                Singularity { z: Point2::polar(r1, th1), alpha: a1 },
                Singularity { z: Point2::polar(r2, th2), alpha: a2 },
            ]);
            prop_assume!(f.is_ok());
            let f = f.unwrap();
            let spec = DirichletSpec::canonical(3.0);
            let grid = snap_levels(&inset_grid(-3f64.ln(), 0.0, 40), &f.vertex_levels(&spec));
            let opts = BicOptions { execution: Execution::Sequential, ..Default::default() };
            let p = bic_length_profile(&f, &spec, &grid, &opts).unwrap();
            let min = p.ln_second_differences().into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-6, "min second difference {}", min);
        }
    }
}
