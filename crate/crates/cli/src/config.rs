use std::f64::consts::TAU;
use std::fmt;
use std::path::PathBuf;

use levelflow::bic::{conical_factor, ConicalFactor, Singularity};
use levelflow::curvature_flow::{AuditCase, AuditDomain, AuditGrid, Equation, OuterLaplacian, Quantity};
use levelflow::geometry::{factors, ClosedFormField, Region};
use levelflow::harmonic::{solve_annulus_dirichlet, CatalogSpec};
use levelflow::levelsets::{inset_grid, DEFAULT_SAMPLES};
use levelflow::{Chart, ConformalChart, DirichletSpec, HarmonicField, Point2, WarpedChart};
use serde::{Deserialize, Serialize};

/// Problem with the configuration; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            line: None,
            column: None,
            message: message.into(),
        }
    }

    /// Attaches the line of the first occurrence of `"key"` in `raw`.
    pub fn at_key(mut self, raw: &str, key: &str) -> Self {
        let needle = format!("\"{key}\"");
        if let Some(i) = raw.lines().position(|l| l.contains(&needle)) {
            self.line = Some(i + 1);
        }
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl From<levelflow::Error> for ConfigError {
    fn from(e: levelflow::Error) -> Self {
        ConfigError::new(e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Seed for the quasi-random point sets.
    #[serde(default)]
    pub seed: u64,
    pub chart: ChartSpec,
    #[serde(default)]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    Conformal {
        region: RegionSpec,
        factor: FactorSpec,
    },
    /// `w(t) = scale cosh t`; give either `scale` or the dilation `lambda`
    /// (`scale = ln(lambda) / 2 pi`).
    Warped {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        scale: Option<f64>,
        t_min: f64,
        t_max: f64,
    },
    /// Flat annulus with the conformal factor `beta0 + sum alpha_j ln|z - z_j|`.
    Conical {
        #[serde(default)]
        beta0: f64,
        singularities: Vec<Singularity>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Annulus {
        #[serde(default)]
        center: Point2,
        #[serde(default = "one")]
        inner: f64,
        outer: f64,
    },
    Disc {
        #[serde(default)]
        center: Point2,
        radius: f64,
    },
    PuncturedDisc {
        #[serde(default)]
        center: Point2,
        radius: f64,
    },
    UpperHalfPlane,
    Plane,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    Flat {
        #[serde(default)]
        c: f64,
    },
    /// `lambda = 1 + c r^2`.
    QuadraticLambda { c: f64 },
    AnisotropicLambda { a: f64, b: f64 },
    StereographicSphere,
    HalfPlane,
    LogSum {
        #[serde(default)]
        beta: f64,
        atoms: Vec<Singularity>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Dirichlet {
        #[serde(rename = "R")]
        outer_radius: f64,
        t1: f64,
        t2: f64,
    },
    Catalog(CatalogSpec),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// Pull both ends in by `1e-3 (hi - lo)`.
    #[serde(default = "yes")]
    pub inset: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSpec {
    Annulus {
        #[serde(default)]
        center: Point2,
        r_in: f64,
        r_out: f64,
        n: usize,
    },
    Rect { x: [f64; 2], y: [f64; 2], n: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditItem {
    pub quantity: Quantity,
    pub case: AuditCase,
}

/// Explicit tolerances; anything left out uses the default times `--tol-scale`.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub convexity: Option<f64>,
    pub identity: Option<f64>,
    pub pde_scale: Option<f64>,
    pub sharp_bound: Option<f64>,
    pub pinched: Option<f64>,
    pub counterexample_rel: Option<f64>,
    pub mollified: Option<f64>,
    pub flux: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub t_grid: Option<GridSpec>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    /// `kappa` for the sharp bound `(ln L)'' >= -(kappa / L) int |grad u|^{-2}`.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// `[kappa1, kappa2]` for the pinched bound.
    #[serde(default)]
    pub pinched: Option<[f64; 2]>,
    #[serde(default)]
    pub points: Option<PointSpec>,
    #[serde(default)]
    pub outer_laplacian: OuterLaplacian,
    #[serde(default = "all_equations")]
    pub equations: Vec<Equation>,
    #[serde(default)]
    pub audits: Vec<AuditItem>,
    #[serde(default)]
    pub audit_domain: Option<AuditDomain>,
    #[serde(default)]
    pub audit_grid: AuditGrid,
    #[serde(default)]
    pub slope_bound: bool,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub mollified_levels: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub mollified_profiles: bool,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all analysis fields have defaults")
    }
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn all_equations() -> Vec<Equation> {
    vec![Equation::Pde1, Equation::Pde1Star, Equation::Pde2, Equation::Pde2Star]
}

fn default_eps() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

fn default_radii() -> Vec<f64> {
    vec![0.05, 0.04, 0.03, 0.02, 0.01]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub stem: Option<String>,
}

/// Tolerances in effect for a run; embedded in every report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub tol_scale: f64,
    pub convexity: f64,
    pub identity: f64,
    /// Multiplies the per-point PDE tolerance of the outer Laplacian method.
    pub pde_scale: f64,
    pub sharp_bound: f64,
    pub pinched: f64,
    pub counterexample_rel: f64,
    pub mollified: f64,
    pub flux: f64,
}

impl Tolerances {
    pub fn resolve(spec: &ToleranceSpec, scale: f64, conical: bool) -> Self {
        let pick = |v: Option<f64>, d: f64| v.unwrap_or(d * scale);
        Self {
            tol_scale: scale,
            convexity: pick(spec.convexity, if conical { 1e-5 } else { 1e-8 }),
            identity: pick(spec.identity, 1e-6),
            pde_scale: pick(spec.pde_scale, 1.0),
            sharp_bound: pick(spec.sharp_bound, 1e-6),
            pinched: pick(spec.pinched, 1e-8),
            counterexample_rel: pick(spec.counterexample_rel, 0.02),
            mollified: pick(spec.mollified, 1e-6),
            flux: pick(spec.flux, 1e-8),
        }
    }
}

/// Reads and parses a config file; syntax and schema errors carry line numbers.
pub fn load(path: &std::path::Path) -> Result<(ScenarioConfig, String), ConfigError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse(&raw)?;
    Ok((cfg, raw))
}

pub fn parse(raw: &str) -> Result<ScenarioConfig, ConfigError> {
    serde_json::from_str(raw).map_err(|e| ConfigError {
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    })
}

fn finite(raw: &str, key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(format!("`{key}` must be finite")).at_key(raw, key))
    }
}

/// Everything a command needs, validated.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub chart: Chart,
    pub conical: Option<ConicalFactor>,
    pub field: Option<HarmonicField>,
    pub dirichlet: Option<DirichletSpec>,
}

impl Scenario {
    pub fn name(&self) -> String {
        self.config.name.clone().unwrap_or_else(|| "scenario".into())
    }

    pub fn require_field(&self, raw: &str) -> Result<&HarmonicField, ConfigError> {
        self.field
            .as_ref()
            .ok_or_else(|| ConfigError::new("this command needs a `field`").at_key(raw, "chart"))
    }

    /// The t-grid from the config, or `fallback` levels over `range`.
    pub fn t_grid(&self, raw: &str, fallback: Option<(f64, f64, usize)>) -> Result<Vec<f64>, ConfigError> {
        let g = match (self.config.analysis.t_grid, fallback) {
            (Some(g), _) => g,
            (None, Some((lo, hi, n))) => GridSpec { lo, hi, n, inset: true },
            (None, None) => return Err(ConfigError::new("`analysis.t_grid` is required for this scenario").at_key(raw, "analysis")),
        };
        finite(raw, "lo", g.lo)?;
        finite(raw, "hi", g.hi)?;
        if !(g.lo < g.hi) || g.n < 8 {
            return Err(ConfigError::new("`t_grid` needs lo < hi and n >= 8").at_key(raw, "t_grid"));
        }
        Ok(if g.inset {
            inset_grid(g.lo, g.hi, g.n)
        } else {
            (0..g.n).map(|i| g.lo + (g.hi - g.lo) * i as f64 / (g.n - 1) as f64).collect()
        })
    }

    /// Level range of the field, when it is known in closed form.
    pub fn level_range(&self) -> Option<(f64, f64)> {
        if let Some(d) = self.dirichlet {
            return Some(d.level_range());
        }
        match (&self.config.chart, &self.config.field) {
            (ChartSpec::Warped { t_min, t_max, .. }, Some(FieldSpec::Catalog(CatalogSpec::WarpedArctan))) => {
                let s = |t: f64| 2.0 * t.exp().atan();
                Some((s(*t_min), s(*t_max)))
            }
            _ => None,
        }
    }

    /// Default residual sample points: inside the chart, away from its edges.
    pub fn default_points(&self) -> PointSpec {
        match (&self.config.chart, self.dirichlet) {
            (ChartSpec::Warped { t_min, t_max, .. }, _) => {
                let pad = 0.05 * (t_max - t_min);
                PointSpec::Rect {
                    x: [t_min + pad, t_max - pad],
                    y: [0.0, TAU],
                    n: 100,
                }
            }
            (_, Some(d)) => {
                let pad = 0.05 * (d.outer_radius - 1.0);
                PointSpec::Annulus {
                    center: Point2::ORIGIN,
                    r_in: 1.0 + pad,
                    r_out: d.outer_radius - pad,
                    n: 100,
                }
            }
            (ChartSpec::Conformal { region, .. }, None) => match *region {
                RegionSpec::Annulus { center, inner, outer } => PointSpec::Annulus {
                    center,
                    r_in: inner + 0.05 * (outer - inner),
                    r_out: outer - 0.05 * (outer - inner),
                    n: 100,
                },
                RegionSpec::Disc { center, radius } | RegionSpec::PuncturedDisc { center, radius } => {
                    PointSpec::Annulus {
                        center,
                        r_in: 0.1 * radius,
                        r_out: 0.9 * radius,
                        n: 100,
                    }
                }
                RegionSpec::UpperHalfPlane => PointSpec::Rect {
                    x: [-1.0, 1.0],
                    y: [0.5, 2.0],
                    n: 100,
                },
                RegionSpec::Plane => PointSpec::Rect {
                    x: [-1.0, 1.0],
                    y: [-1.0, 1.0],
                    n: 100,
                },
            },
            (ChartSpec::Conical { .. }, None) => PointSpec::Annulus {
                center: Point2::ORIGIN,
                r_in: 1.1,
                r_out: 2.0,
                n: 100,
            },
        }
    }
}

fn build_region(raw: &str, r: RegionSpec) -> Result<Region, ConfigError> {
    let bad = |m: &str| Err(ConfigError::new(m.to_string()).at_key(raw, "region"));
    Ok(match r {
        RegionSpec::Annulus { center, inner, outer } => {
            if !(inner >= 0.0 && inner < outer && outer.is_finite() && center.is_finite()) {
                return bad("annulus region needs 0 <= inner < outer");
            }
            Region::Annulus { center, inner, outer }
        }
        RegionSpec::Disc { center, radius } => {
            if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
                return bad("disc region needs a positive radius");
            }
            Region::Disc { center, radius }
        }
        RegionSpec::PuncturedDisc { center, radius } => {
            if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
                return bad("punctured disc region needs a positive radius");
            }
            Region::Annulus {
                center,
                inner: 0.0,
                outer: radius,
            }
        }
        RegionSpec::UpperHalfPlane => Region::UpperHalfPlane,
        RegionSpec::Plane => Region::Plane,
    })
}

fn build_factor(raw: &str, f: &FactorSpec) -> Result<ClosedFormField, ConfigError> {
    Ok(match f {
        FactorSpec::Flat { c } => {
            finite(raw, "c", *c)?;
            factors::flat(*c)
        }
        FactorSpec::QuadraticLambda { c } => {
            finite(raw, "c", *c)?;
            factors::quadratic_lambda(*c)
        }
        FactorSpec::AnisotropicLambda { a, b } => {
            finite(raw, "a", *a)?;
            finite(raw, "b", *b)?;
            factors::anisotropic_lambda(*a, *b)
        }
        FactorSpec::StereographicSphere => factors::stereographic_sphere(),
        FactorSpec::HalfPlane => factors::half_plane(),
        FactorSpec::LogSum { beta, atoms } => {
            finite(raw, "beta", *beta)?;
            // reuse the conical validation for exponents and positions
            conical_factor(*beta, atoms.clone()).map_err(|e| ConfigError::from(e).at_key(raw, "atoms"))?;
            factors::log_sum(*beta, atoms.iter().map(|s| (s.z, s.alpha)).collect())
        }
    })
}

/// Validates every referenced parameter and builds the chart and field.
pub fn build(config: ScenarioConfig, raw: &str) -> Result<Scenario, ConfigError> {
    let dirichlet = match &config.field {
        Some(FieldSpec::Dirichlet { outer_radius, t1, t2 }) => {
            let d = DirichletSpec::new(*outer_radius, *t1, *t2);
            d.validate().map_err(|e| ConfigError::from(e).at_key(raw, "field"))?;
            if d.span() == 0.0 {
                return Err(ConfigError::new("Dirichlet data needs t1 != t2").at_key(raw, "t1"));
            }
            Some(d)
        }
        _ => None,
    };
    let field = match &config.field {
        Some(FieldSpec::Dirichlet { .. }) => Some(solve_annulus_dirichlet(dirichlet.expect("set above"))?),
        Some(FieldSpec::Catalog(c)) => Some(c.build().map_err(|e| ConfigError::from(e).at_key(raw, "field"))?),
        None => None,
    };
    let mut conical = None;
    let chart: Chart = match &config.chart {
        ChartSpec::Conformal { region, factor } => {
            let region = build_region(raw, *region)?;
            if let (Some(d), Region::Annulus { center, inner, outer }) = (dirichlet, region) {
                if center != Point2::ORIGIN || inner < 1.0 || outer > d.outer_radius {
                    return Err(ConfigError::new(
                        "the Dirichlet field lives on 1 <= |z| <= R; the chart region must lie inside it",
                    )
                    .at_key(raw, "region"));
                }
            }
            ConformalChart::new(region, build_factor(raw, factor)?).into()
        }
        ChartSpec::Warped {
            lambda,
            scale,
            t_min,
            t_max,
        } => {
            finite(raw, "t_min", *t_min)?;
            finite(raw, "t_max", *t_max)?;
            let w = match (lambda, scale) {
                (Some(l), None) => WarpedChart::hyperbolic_quotient(*l, *t_min, *t_max),
                (None, Some(s)) => WarpedChart::cosh(*t_min, *t_max, *s),
                _ => {
                    return Err(ConfigError::new("warped chart needs exactly one of `lambda` and `scale`")
                        .at_key(raw, "chart"))
                }
            };
            w.map_err(|e| ConfigError::from(e).at_key(raw, "chart"))?.into()
        }
        ChartSpec::Conical { beta0, singularities } => {
            finite(raw, "beta0", *beta0)?;
            let f = conical_factor(*beta0, singularities.clone())
                .map_err(|e| ConfigError::from(e).at_key(raw, "singularities"))?;
            let outer = dirichlet.map(|d| d.outer_radius).unwrap_or(f64::INFINITY);
            let chart = ConformalChart::new(
                Region::Annulus {
                    center: Point2::ORIGIN,
                    inner: 1.0,
                    outer,
                },
                f.clone(),
            );
            conical = Some(f);
            chart.into()
        }
    };
    if chart.is_warped() != matches!(config.field, Some(FieldSpec::Catalog(CatalogSpec::WarpedArctan))) && config.field.is_some() {
        return Err(ConfigError::new("warped charts go with the `warped_arctan` field and only with it").at_key(raw, "field"));
    }
    let a = &config.analysis;
    if a.n_samples < 16 {
        return Err(ConfigError::new("`n_samples` must be at least 16").at_key(raw, "n_samples"));
    }
    if a.eps.is_empty() || a.eps.iter().any(|e| !(*e > 0.0)) || a.eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ConfigError::new("`eps` must be positive and strictly decreasing").at_key(raw, "eps"));
    }
    if a.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(ConfigError::new("`radii` must be positive").at_key(raw, "radii"));
    }
    if let OuterLaplacian::CentralDifference { step, .. } = a.outer_laplacian {
        if !(step > 0.0) {
            return Err(ConfigError::new("finite-difference step must be positive").at_key(raw, "step"));
        }
    }
    for (key, v) in [
        ("convexity", a.tolerances.convexity),
        ("identity", a.tolerances.identity),
        ("pde_scale", a.tolerances.pde_scale),
        ("sharp_bound", a.tolerances.sharp_bound),
        ("pinched", a.tolerances.pinched),
        ("counterexample_rel", a.tolerances.counterexample_rel),
        ("mollified", a.tolerances.mollified),
        ("flux", a.tolerances.flux),
    ] {
        if let Some(v) = v {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::new(format!("tolerance `{key}` must be a nonnegative number")).at_key(raw, key));
            }
        }
    }
    Ok(Scenario {
        config,
        chart,
        conical,
        field,
        dirichlet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let raw = "{\n  \"chart\": {\"kind\": \"warped\", \"lambda\": 7.0, \"t_min\": -1, \"t_max\": 1},\n  \"colour\": 3\n}";
        let e = parse(raw).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("colour"), "{}", e.message);
    }

    #[test]
    fn nested_tags_parse() {
        let raw = r#"{"chart": {"kind": "warped", "lambda": 7.0, "t_min": -1, "t_max": 1},
                      "field": {"kind": "catalog", "name": "warped_arctan"}}"#;
        let s = build(parse(raw).unwrap(), raw).unwrap();
        assert!(s.chart.is_warped());
        let raw = r#"{"chart": {"kind": "conformal", "region": {"kind": "annulus", "outer": 7.0}, "factor": {"name": "flat"}},
                      "field": {"kind": "dirichlet", "R": 7.0, "t1": 0, "t2": -1.9}}"#;
        let s = build(parse(raw).unwrap(), raw).unwrap();
        assert!(s.dirichlet.is_some());
        let raw = r#"{"chart": {"kind": "conformal", "region": {"kind": "annulus", "outer": 7.0}, "factor": {"name": "flat"}},
                      "field": {"kind": "dirichlet", "R": 7.0, "t1": 0, "t2": -1.9, "t3": 0}}"#;
        assert!(parse(raw).is_err());
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let raw = "{\n \"chart\": {\"kind\": \"conical\",\n  \"singularities\": [{\"z\": {\"x\": 1.5, \"y\": 0}, \"alpha\": -1.5}]}\n}";
        let e = build(parse(raw).unwrap(), raw).err().unwrap();
        assert_eq!(e.line, Some(3));
        let raw = "{\"chart\": {\"kind\": \"warped\", \"t_min\": -1, \"t_max\": 1}}";
        assert!(build(parse(raw).unwrap(), raw).is_err());
    }
}
