//! Grid audits of the maximum and minimum principles for `k`, `h` and
//! `phi = k / |grad u|`, and of the slope bound on `(ln L)'`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{curvature_sample, CurvatureSample, CURVATURE_FLOOR};
use crate::error::{Error, Result};
use crate::geometry::{Chart, Local, Point2, ScalarField};
use crate::harmonic::HarmonicField;
use crate::levelsets::{extract_level_curve, level_integrals, LengthProfile, DEFAULT_SAMPLES};
use crate::par;

/// Closed audit domain in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuditDomain {
    /// `r_in <= |z - center| <= r_out` on a conformal chart.
    Annulus { center: Point2, r_in: f64, r_out: f64 },
    /// `t_min <= t <= t_max` on a warped chart.
    WarpedBand { t_min: f64, t_max: f64 },
}

impl AuditDomain {
    fn validate(&self, chart: &Chart) -> Result<()> {
        let ok = match *self {
            AuditDomain::Annulus { r_in, r_out, .. } => {
                !chart.is_warped() && r_in > 0.0 && r_in < r_out && r_out.is_finite()
            }
            AuditDomain::WarpedBand { t_min, t_max } => {
                chart.is_warped() && t_min < t_max && t_min.is_finite() && t_max.is_finite()
            }
        };
        if !ok {
            return Err(Error::InvalidDomain(format!("{self:?} does not fit the chart")));
        }
        Ok(())
    }

    /// `(radial, angular)` extent; the radial coordinate is `r` or `t`.
    fn bounds(&self) -> (f64, f64) {
        match *self {
            AuditDomain::Annulus { r_in, r_out, .. } => (r_in, r_out),
            AuditDomain::WarpedBand { t_min, t_max } => (t_min, t_max),
        }
    }

    fn point(&self, s: f64, theta: f64) -> Point2 {
        match *self {
            AuditDomain::Annulus { center, .. } => {
                Point2::new(center.x + s * theta.cos(), center.y + s * theta.sin())
            }
            AuditDomain::WarpedBand { .. } => Point2::new(s, theta),
        }
    }

    /// Coordinate distance of a grid step `(ds, dtheta)` at radial coordinate `s`.
    fn spacing(&self, s: f64, ds: f64, dtheta: f64) -> f64 {
        match self {
            AuditDomain::Annulus { .. } => ds.hypot(s * dtheta),
            AuditDomain::WarpedBand { .. } => ds.hypot(dtheta),
        }
    }
}

/// Sample counts: `interior x interior` grid, `boundary` points per boundary component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditGrid {
    pub interior: usize,
    pub boundary: usize,
}

impl Default for AuditGrid {
    fn default() -> Self {
        Self {
            interior: 256,
            boundary: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    K,
    H,
    PhiK,
    PhiH,
    AbsK,
    AbsH,
    LnAbsK,
    LnAbsH,
}

impl Quantity {
    fn of_h(self) -> bool {
        matches!(self, Quantity::H | Quantity::PhiH | Quantity::AbsH | Quantity::LnAbsH)
    }

    fn eval(self, s: &CurvatureSample) -> f64 {
        match self {
            Quantity::K => s.k,
            Quantity::H => s.h,
            Quantity::PhiK => s.phi_k,
            Quantity::PhiH => s.phi_h,
            Quantity::AbsK => s.k.abs(),
            Quantity::AbsH => s.h.abs(),
            Quantity::LnAbsK => s.k.abs().ln(),
            Quantity::LnAbsH => s.h.abs().ln(),
        }
    }
}

/// Which attainment claim is audited.
///
/// With `P = <grad K, grad u>` for `phi_k` and `P = -<grad K, *grad u>` for
/// `phi_h`:
///
/// | case | hypotheses | claim |
/// |---|---|---|
/// | `min_abs_on_boundary` | `K >= 0`, `<grad K, grad u> <= 0` (`<grad K, *grad u> >= 0` for `h`), curvature `!= 0` | min of `abs_*` / `ln_abs_*` on the boundary |
/// | `case1` | `K <= 0`, `P >= 0` | if `max phi >= 0`, it is attained on the boundary |
/// | `case2` | `K <= 0`, `P <= 0` | if `min phi <= 0`, it is attained on the boundary |
/// | `case3` | `K >= 0`, `P >= 0` | if `max phi <= 0`, it is attained on the boundary |
/// | `case4` | `K >= 0`, `P <= 0` | if `min phi >= 0`, it is attained on the boundary |
/// | `interior_minimum_bound` | none | an interior minimum `y` of a nonconstant `k` (or `h`) has `k(y) <= |grad K| / K` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditCase {
    MinAbsOnBoundary,
    Case1,
    Case2,
    Case3,
    Case4,
    InteriorMinimumBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    HypothesesUnmet,
    /// The conditional claim does not apply to this data.
    Vacuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignRange {
    pub min: f64,
    pub max: f64,
}

impl SignRange {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn scale(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }

    fn nonneg(&self) -> bool {
        self.min >= -1e-10 * (1.0 + self.scale())
    }

    fn nonpos(&self) -> bool {
        self.max <= 1e-10 * (1.0 + self.scale())
    }
}

/// Ranges of the hypothesis quantities over the audited samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisFlags {
    pub gauss_curvature: SignRange,
    pub grad_pairing: SignRange,
    pub star_pairing: SignRange,
    /// Smallest `|k|` (or `|h|`) sampled.
    pub min_abs_curvature: f64,
    pub required: String,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub point: Point2,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipleAuditReport {
    pub quantity: Quantity,
    pub case: AuditCase,
    pub hypothesis_flags: HypothesisFlags,
    pub interior_extremum: Extremum,
    pub boundary_extremum: Extremum,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub lipschitz_estimate: f64,
    pub grid: AuditGrid,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

struct Sampled {
    interior: Vec<Vec<CurvatureSample>>,
    boundary: Vec<CurvatureSample>,
    ds: f64,
    dtheta: f64,
}

fn sample_domain(
    u: &dyn ScalarField,
    chart: &Chart,
    domain: &AuditDomain,
    grid: AuditGrid,
) -> Result<Sampled> {
    domain.validate(chart)?;
    if grid.interior < 4 || grid.boundary < 8 {
        return Err(Error::InvalidParameter(format!("audit grid too small: {grid:?}")));
    }
    let (lo, hi) = domain.bounds();
    let m = grid.interior;
    let ds = (hi - lo) / (m + 1) as f64;
    let dtheta = TAU / m as f64;
    let rows: Vec<usize> = (0..m).collect();
    let interior = par::try_map(&rows, |&i| {
        let s = lo + ds * (i + 1) as f64;
        (0..m)
            .map(|j| curvature_sample(u, chart, domain.point(s, dtheta * j as f64)))
            .collect::<Result<Vec<_>>>()
    })?;
    let nb = grid.boundary;
    let idx: Vec<usize> = (0..2 * nb).collect();
    let boundary = par::try_map(&idx, |&i| {
        let s = if i < nb { lo } else { hi };
        curvature_sample(u, chart, domain.point(s, TAU * (i % nb) as f64 / nb as f64))
    })?;
    Ok(Sampled {
        interior,
        boundary,
        ds,
        dtheta,
    })
}

fn lex_less(a: Point2, b: Point2) -> bool {
    (a.x, a.y) < (b.x, b.y)
}

/// Extremum with ties broken by lexicographic point order.
fn extremum<'a>(samples: impl Iterator<Item = &'a CurvatureSample>, q: Quantity, minimize: bool) -> Extremum {
    let mut best: Option<Extremum> = None;
    for s in samples {
        let v = q.eval(s);
        let better = match best {
            None => true,
            Some(b) => {
                let strictly = if minimize { v < b.value } else { v > b.value };
                strictly || (v == b.value && lex_less(s.p, b.point))
            }
        };
        if better {
            best = Some(Extremum { point: s.p, value: v });
        }
    }
    best.expect("nonempty sample set")
}

fn hypothesis_flags(all: &[&CurvatureSample], quantity: Quantity, case: AuditCase) -> HypothesisFlags {
    let mut gauss = SignRange::empty();
    let mut pair = SignRange::empty();
    let mut star = SignRange::empty();
    let mut min_abs = f64::INFINITY;
    for s in all {
        gauss.push(s.gauss_curvature);
        pair.push(s.grad_pairing);
        star.push(s.star_pairing);
        min_abs = min_abs.min(if quantity.of_h() { s.h.abs() } else { s.k.abs() });
    }
    let of_h = quantity.of_h();
    // P for the signed cases: <grad K, grad u> or -<grad K, *grad u>.
    let (p_nonneg, p_nonpos, p_name) = if of_h {
        (star.nonpos(), star.nonneg(), "-<grad K, *grad u>")
    } else {
        (pair.nonneg(), pair.nonpos(), "<grad K, grad u>")
    };
    let (required, satisfied) = match case {
        AuditCase::MinAbsOnBoundary => {
            let pairing_ok = if of_h { star.nonneg() } else { pair.nonpos() };
            let text = if of_h {
                "K >= 0, <grad K, *grad u> >= 0, h != 0"
            } else {
                "K >= 0, <grad K, grad u> <= 0, k != 0"
            };
            (text.to_string(), gauss.nonneg() && pairing_ok && min_abs > CURVATURE_FLOOR)
        }
        AuditCase::Case1 => (format!("K <= 0, {p_name} >= 0"), gauss.nonpos() && p_nonneg),
        AuditCase::Case2 => (format!("K <= 0, {p_name} <= 0"), gauss.nonpos() && p_nonpos),
        AuditCase::Case3 => (format!("K >= 0, {p_name} >= 0"), gauss.nonneg() && p_nonneg),
        AuditCase::Case4 => (format!("K >= 0, {p_name} <= 0"), gauss.nonneg() && p_nonpos),
        AuditCase::InteriorMinimumBound => ("no critical points".to_string(), true),
    };
    HypothesisFlags {
        gauss_curvature: gauss,
        grad_pairing: pair,
        star_pairing: star,
        min_abs_curvature: min_abs,
        required,
        satisfied,
    }
}

fn check_combination(quantity: Quantity, case: AuditCase) -> Result<()> {
    use Quantity::*;
    let ok = match case {
        AuditCase::MinAbsOnBoundary => matches!(quantity, AbsK | AbsH | LnAbsK | LnAbsH),
        AuditCase::Case1 | AuditCase::Case2 | AuditCase::Case3 | AuditCase::Case4 => {
            matches!(quantity, PhiK | PhiH)
        }
        AuditCase::InteriorMinimumBound => matches!(quantity, K | H),
    };
    if !ok {
        return Err(Error::InvalidParameter(format!(
            "quantity {quantity:?} is not audited by case {case:?}"
        )));
    }
    Ok(())
}

/// Largest difference quotient between grid neighbours.
fn lipschitz(s: &Sampled, domain: &AuditDomain, q: Quantity) -> f64 {
    let (lo, _) = domain.bounds();
    let m = s.interior.len();
    let mut lip: f64 = 0.0;
    for i in 0..m {
        let r = lo + s.ds * (i + 1) as f64;
        for j in 0..m {
            let v = q.eval(&s.interior[i][j]);
            let right = q.eval(&s.interior[i][(j + 1) % m]);
            lip = lip.max((right - v).abs() / domain.spacing(r, 0.0, s.dtheta));
            if i + 1 < m {
                let up = q.eval(&s.interior[i + 1][j]);
                lip = lip.max((up - v).abs() / s.ds);
            }
        }
    }
    lip
}

/// [`principle_audit_with`] on the default 256 x 256 + 2 x 1024 grid.
pub fn principle_audit(
    u: &dyn ScalarField,
    chart: &Chart,
    domain: &AuditDomain,
    quantity: Quantity,
    case: AuditCase,
) -> Result<PrincipleAuditReport> {
    principle_audit_with(u, chart, domain, quantity, case, AuditGrid::default())
}

/// Compares interior and boundary extrema of `quantity` on a dense grid.
///
/// The attainment tolerance is `10 * spacing * Lipschitz`, floored at
/// `1e-12 (1 + max |quantity|)`.
pub fn principle_audit_with(
    u: &dyn ScalarField,
    chart: &Chart,
    domain: &AuditDomain,
    quantity: Quantity,
    case: AuditCase,
    grid: AuditGrid,
) -> Result<PrincipleAuditReport> {
    check_combination(quantity, case)?;
    let s = sample_domain(u, chart, domain, grid)?;
    let all: Vec<&CurvatureSample> = s.interior.iter().flatten().chain(s.boundary.iter()).collect();
    let flags = hypothesis_flags(&all, quantity, case);

    let minimize = matches!(
        case,
        AuditCase::MinAbsOnBoundary | AuditCase::Case2 | AuditCase::Case4 | AuditCase::InteriorMinimumBound
    );
    let interior = extremum(s.interior.iter().flatten(), quantity, minimize);
    let boundary = extremum(s.boundary.iter(), quantity, minimize);

    let outer = match domain {
        AuditDomain::Annulus { .. } => domain.bounds().1,
        AuditDomain::WarpedBand { .. } => 1.0,
    };
    let spacing = domain.spacing(outer, s.ds, s.dtheta);
    let lip = lipschitz(&s, domain, quantity);
    let scale = all.iter().map(|c| quantity.eval(c).abs()).fold(0.0, f64::max);
    let tolerance = (10.0 * spacing * lip).max(1e-12 * (1.0 + scale));

    let on_boundary = if minimize {
        interior.value >= boundary.value - tolerance
    } else {
        interior.value <= boundary.value + tolerance
    };
    let overall = if minimize {
        interior.value.min(boundary.value)
    } else {
        interior.value.max(boundary.value)
    };
    let mut note = None;
    let verdict = if !flags.satisfied {
        Verdict::HypothesesUnmet
    } else {
        match case {
            AuditCase::MinAbsOnBoundary => pass_if(on_boundary),
            AuditCase::Case1 if overall >= 0.0 => pass_if(on_boundary),
            AuditCase::Case2 if overall <= 0.0 => pass_if(on_boundary),
            AuditCase::Case3 if overall <= 0.0 => pass_if(on_boundary),
            AuditCase::Case4 if overall >= 0.0 => pass_if(on_boundary),
            AuditCase::InteriorMinimumBound => {
                let (v, n) = interior_minimum_bound(u, chart, &all, quantity, &interior, &boundary, tolerance)?;
                note = Some(n);
                v
            }
            _ => Verdict::Vacuous,
        }
    };
    Ok(PrincipleAuditReport {
        quantity,
        case,
        hypothesis_flags: flags,
        interior_extremum: interior,
        boundary_extremum: boundary,
        verdict,
        tolerance,
        lipschitz_estimate: lip,
        grid,
        note,
    })
}

fn pass_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn interior_minimum_bound(
    u: &dyn ScalarField,
    chart: &Chart,
    all: &[&CurvatureSample],
    quantity: Quantity,
    interior: &Extremum,
    boundary: &Extremum,
    tolerance: f64,
) -> Result<(Verdict, String)> {
    let max = all.iter().map(|c| quantity.eval(c)).fold(f64::NEG_INFINITY, f64::max);
    if max - interior.value.min(boundary.value) <= tolerance {
        return Ok((Verdict::Vacuous, "quantity is constant within tolerance".into()));
    }
    if interior.value >= boundary.value - tolerance {
        return Ok((Verdict::Vacuous, "no interior minimum".into()));
    }
    let local = Local::with_order(chart, u, interior.point, 3)?;
    let gauss = local.gauss_curvature();
    let gk = gauss.gradient();
    let grad_norm = local.inner(gk, gk).sqrt();
    let kv = gauss.value();
    if kv.abs() < 1e-14 {
        return Ok((Verdict::Vacuous, "K vanishes at the interior minimum".into()));
    }
    let bound = grad_norm / kv;
    let verdict = pass_if(interior.value <= bound + tolerance);
    Ok((verdict, format!("interior minimum {:.6e}, |grad K|/K = {bound:.6e}", interior.value)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeCase {
    /// `K <= 0`, `<grad K, grad u> <= 0`: `(ln L)' <= max(-inf phi_k, 0)`.
    NonpositiveCurvature,
    /// `K >= 0`, `<grad K, grad u> <= 0`, `k >= 0`: `(ln L)' <= -inf phi_k`.
    NonnegativeCurvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeLevel {
    pub t: f64,
    /// `L'(t) / L(t)` from the profile.
    pub log_slope: f64,
    pub within_bound: bool,
    /// `|L'(t) + int k / |grad u| dH^1|`.
    pub identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeBoundReport {
    pub case: Option<SlopeCase>,
    pub hypothesis_flags: HypothesisFlags,
    pub boundary_inf_phi_k: f64,
    pub bound: f64,
    pub bound_tolerance: f64,
    pub identity_tolerance: f64,
    pub levels: Vec<SlopeLevel>,
    pub max_identity_residual: f64,
    pub verdict: Verdict,
    pub note: String,
}

/// Per-level check of the slope bound on `(ln L)'`, together with the
/// identity `L' = -int k / |grad u| dH^1` on every profile level.
///
/// The infimum is taken over the boundary of `domain`; hypotheses are sampled
/// on a 64 x 64 interior grid plus the boundary points.
pub fn log_length_slope_bound(
    u: &HarmonicField,
    chart: &Chart,
    domain: &AuditDomain,
    profile: &LengthProfile,
    boundary_samples: usize,
) -> Result<SlopeBoundReport> {
    let grid = AuditGrid {
        interior: 64,
        boundary: boundary_samples,
    };
    let s = sample_domain(u, chart, domain, grid)?;
    let all: Vec<&CurvatureSample> = s.interior.iter().flatten().chain(s.boundary.iter()).collect();
    let mut flags = hypothesis_flags(&all, Quantity::PhiK, AuditCase::Case2);
    let min_k = all.iter().map(|c| c.k).fold(f64::INFINITY, f64::min);
    let case = if flags.satisfied {
        Some(SlopeCase::NonpositiveCurvature)
    } else if flags.gauss_curvature.nonneg() && flags.grad_pairing.nonpos() && min_k >= 0.0 {
        flags.required = "K >= 0, <grad K, grad u> <= 0, k >= 0".into();
        flags.satisfied = true;
        Some(SlopeCase::NonnegativeCurvature)
    } else {
        flags.required = "K <= 0 and <grad K, grad u> <= 0, or K >= 0, <grad K, grad u> <= 0 and k >= 0".into();
        None
    };
    let inf_phi = s.boundary.iter().map(|c| c.phi_k).fold(f64::INFINITY, f64::min);
    let bound = match case {
        Some(SlopeCase::NonpositiveCurvature) | None => (-inf_phi).max(0.0),
        Some(SlopeCase::NonnegativeCurvature) => -inf_phi,
    };
    let bound_tolerance = 1e-6 * (1.0 + bound.abs());
    let identity_tolerance = 1e-6;

    let idx: Vec<usize> = (0..profile.len()).collect();
    let levels = par::try_map(&idx, |&i| -> Result<SlopeLevel> {
        let t = profile.t[i];
        let curve = extract_level_curve(u, chart, t, DEFAULT_SAMPLES)?;
        let li = level_integrals(u, chart, &curve)?;
        let log_slope = profile.lp[i] / profile.l[i];
        Ok(SlopeLevel {
            t,
            log_slope,
            within_bound: log_slope <= bound + bound_tolerance,
            identity_residual: (li.dlength + li.curvature_flux).abs(),
        })
    })?;
    let max_identity_residual = levels.iter().map(|l| l.identity_residual).fold(0.0, f64::max);
    let identity_ok = max_identity_residual <= identity_tolerance;
    let (verdict, note) = match case {
        None => (
            if identity_ok { Verdict::HypothesesUnmet } else { Verdict::Fail },
            "sampled signs meet neither case; bound not asserted".to_string(),
        ),
        Some(c) => {
            let ok = identity_ok && levels.iter().all(|l| l.within_bound);
            let note = match c {
                SlopeCase::NonpositiveCurvature => "bound max(-inf phi_k, 0) over the domain boundary",
                SlopeCase::NonnegativeCurvature => {
                    "bound -inf phi_k; the reference subdomain is taken to be the audit domain itself"
                }
            };
            (pass_if(ok), note.to_string())
        }
    };
    Ok(SlopeBoundReport {
        case,
        hypothesis_flags: flags,
        boundary_inf_phi_k: inf_phi,
        bound,
        bound_tolerance,
        identity_tolerance,
        levels,
        max_identity_residual,
        verdict,
        note,
    })
}
