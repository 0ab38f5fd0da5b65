use std::f64::consts::PI;

use levelflow::bic::{
    atom_flux, bic_length_profile, conical_length_profile, mollified_convergence, mollified_length_profile,
    mollify, snap_levels, BicOptions,
};
use levelflow::curvature_flow::{
    log_length_slope_bound, pde1_residual, pde1_star_residual, pde2_gap, pde2_star_gap, principle_audit_with,
    AuditCase, AuditDomain, Equation, Quantity, Verdict,
};
use levelflow::geometry::{bochner_residual, kato_residual, log_gradient_residual, ScalarField};
use levelflow::levelsets::{
    asymptotic_defect, inset_grid, length_profile, log_convexity_check, pinched_bound_check, sharp_bound_gap,
    LengthProfile, ProfileOptions, PROFILE_COLUMNS,
};
use levelflow::sampling::{annulus_points, rect_points};
use levelflow::{Chart, Point2};
use serde_json::json;

use crate::config::{ChartSpec, ConfigError, PointSpec, Scenario, Tolerances};
use crate::report::{value, Cell, Report, Table};

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub raw: &'a str,
    pub tol: Tolerances,
}

impl Context<'_> {
    fn report(&self, command: &str, pass: bool, summary: serde_json::Value, table: Table) -> Report {
        Report {
            command: command.into(),
            scenario: self.scenario.name(),
            pass,
            seed: self.scenario.config.seed,
            tolerances: self.tol,
            summary,
            table,
        }
    }
}

fn profile_table(p: &LengthProfile) -> Table {
    let mut t = Table::new(&PROFILE_COLUMNS);
    for i in 0..p.len() {
        t.push(
            [p.t[i], p.l[i], p.lp[i], p.lpp[i], p.ln_l_pp[i], p.l_fd_p[i], p.l_fd_pp[i], p.aux_invgrad2[i]]
                .into_iter()
                .map(Cell::from)
                .collect(),
        );
    }
    t
}

/// Smooth profile from level integrals, or a grid-differenced singular one.
fn build_profile(ctx: &Context, fallback_n: usize) -> Result<LengthProfile, ConfigError> {
    let s = ctx.scenario;
    if let Some(factor) = &s.conical {
        let spec = s
            .dirichlet
            .ok_or_else(|| ConfigError::new("conical charts need a Dirichlet `field`").at_key(ctx.raw, "chart"))?;
        let (lo, hi) = spec.level_range();
        let grid = snap_levels(&s.t_grid(ctx.raw, Some((lo, hi, fallback_n)))?, &factor.vertex_levels(&spec));
        let opts = BicOptions::default();
        return Ok(if factor.nonpositive_curvature() {
            bic_length_profile(factor, &spec, &grid, &opts)?
        } else {
            conical_length_profile(factor, &spec, &grid, &opts)?
        });
    }
    let u = s.require_field(ctx.raw)?;
    let range = s.level_range().map(|(lo, hi)| (lo, hi, fallback_n));
    let grid = s.t_grid(ctx.raw, range)?;
    let opts = ProfileOptions {
        n_samples: s.config.analysis.n_samples,
        ..ProfileOptions::default()
    };
    Ok(length_profile(u, &s.chart, &grid, opts)?)
}

pub fn profile(ctx: &Context) -> Result<Report, ConfigError> {
    let p = build_profile(ctx, 50)?;
    let summary = json!({
        "levels": p.len(),
        "derivatives": value(&p.derivatives),
        "fd_step": p.fd_step,
        "max_fd_discrepancy": value(&p.max_fd_discrepancy()),
    });
    Ok(ctx.report("profile", true, summary, profile_table(&p)))
}

pub fn convexity(ctx: &Context) -> Result<Report, ConfigError> {
    let s = ctx.scenario;
    let p = build_profile(ctx, 50)?;
    let rep = log_convexity_check(&p, ctx.tol.convexity)?;
    let mut pass = rep.pass;
    let mut summary = json!({ "convexity": value(&rep) });
    let mut table = profile_table(&p);
    let a = &s.config.analysis;
    if a.kappa.is_some() || a.pinched.is_some() {
        let u = s.require_field(ctx.raw)?;
        if let Some(kappa) = a.kappa {
            let gaps = levelflow::par::try_map(&p.t, |&t| sharp_bound_gap(u, &s.chart, t, kappa, a.n_samples))?;
            let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
            let ok = min >= -ctx.tol.sharp_bound;
            pass &= ok;
            table.columns.push("sharp_bound_gap".into());
            for (row, g) in table.rows.iter_mut().zip(&gaps) {
                row.push(Cell::Num(*g));
            }
            summary["sharp_bound"] = json!({ "kappa": kappa, "min_gap": min, "pass": ok });
        }
        if let Some([k1, k2]) = a.pinched {
            let gaps = levelflow::par::try_map(&p.t, |&t| pinched_bound_check(u, &s.chart, t, k1, k2, a.n_samples))?;
            let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
            let ok = min >= -ctx.tol.pinched;
            pass &= ok;
            table.columns.push("pinched_gap".into());
            for (row, g) in table.rows.iter_mut().zip(&gaps) {
                row.push(Cell::Num(*g));
            }
            summary["pinched_bound"] = json!({ "kappa1": k1, "kappa2": k2, "min_gap": min, "pass": ok });
        }
    }
    Ok(ctx.report("convexity", pass, summary, table))
}

fn sample_points(ctx: &Context) -> Result<Vec<Point2>, ConfigError> {
    let s = ctx.scenario;
    let spec = s.config.analysis.points.unwrap_or_else(|| s.default_points());
    let seed = s.config.seed;
    let pts = match spec {
        PointSpec::Annulus { center, r_in, r_out, n } => {
            if !(r_in > 0.0 && r_in < r_out) || n == 0 {
                return Err(ConfigError::new("`points` annulus needs 0 < r_in < r_out and n > 0").at_key(ctx.raw, "points"));
            }
            annulus_points(n, center, r_in, r_out, seed)
        }
        PointSpec::Rect { x, y, n } => {
            if !(x[0] < x[1] && y[0] < y[1]) || n == 0 {
                return Err(ConfigError::new("`points` rectangle needs increasing bounds and n > 0").at_key(ctx.raw, "points"));
            }
            rect_points(n, (x[0], x[1]), (y[0], y[1]), seed)
        }
    };
    if let Some(p) = pts.iter().find(|p| !s.chart.contains(**p)) {
        return Err(ConfigError::new(format!("sample point {p} is outside the chart")).at_key(ctx.raw, "points"));
    }
    Ok(pts)
}

struct PointRow {
    p: Point2,
    identities: [Option<f64>; 3],
    pdes: Vec<Option<(f64, f64, bool)>>,
}

pub fn residuals(ctx: &Context) -> Result<Report, ConfigError> {
    let s = ctx.scenario;
    let u: &dyn ScalarField = s.require_field(ctx.raw)?;
    let a = &s.config.analysis;
    let method = a.outer_laplacian;
    let equations = a.equations.clone();
    let pts = sample_points(ctx)?;
    let chart: &Chart = &s.chart;
    let rows = levelflow::par::map(&pts, |&p| {
        let id = [
            kato_residual(u, chart, p).ok(),
            bochner_residual(u, chart, p).ok(),
            log_gradient_residual(u, chart, p).ok(),
        ];
        let pdes = equations
            .iter()
            .map(|eq| -> Option<(f64, f64, bool)> {
                match eq {
                    Equation::Pde1 => pde1_residual(u, chart, p, method).ok().map(|r| (r.residual, r.tolerance, true)),
                    Equation::Pde1Star => {
                        pde1_star_residual(u, chart, p, method).ok().map(|r| (r.residual, r.tolerance, true))
                    }
                    Equation::Pde2 => pde2_gap(u, chart, p, method)
                        .ok()
                        .map(|g| (g.gap - g.theoretical_gap, g.tolerance, g.curvature < 0.0 || g.nonnegative())),
                    Equation::Pde2Star => pde2_star_gap(u, chart, p, method)
                        .ok()
                        .map(|g| (g.gap - g.theoretical_gap, g.tolerance, g.curvature < 0.0 || g.nonnegative())),
                }
            })
            .collect();
        PointRow { p, identities: id, pdes }
    });

    let mut cols = vec!["x", "y", "kato", "bochner", "log_gradient"];
    let names: Vec<String> = equations.iter().map(|e| value(e).as_str().unwrap_or("eq").to_string()).collect();
    for n in &names {
        cols.push(n);
    }
    let mut table = Table::new(&cols);
    let mut id_max = [0.0f64; 3];
    let mut id_skipped = 0;
    let mut eq_max = vec![0.0f64; equations.len()];
    let mut eq_fail = vec![0usize; equations.len()];
    let mut eq_skipped = vec![0usize; equations.len()];
    let scale = ctx.tol.pde_scale;
    for r in &rows {
        let mut row: Vec<Cell> = vec![r.p.x.into(), r.p.y.into()];
        for (k, v) in r.identities.iter().enumerate() {
            match v {
                Some(v) => id_max[k] = id_max[k].max(v.abs()),
                None => id_skipped += 1,
            }
            row.push(Cell::Num(v.unwrap_or(f64::NAN)));
        }
        for (k, v) in r.pdes.iter().enumerate() {
            match v {
                Some((res, tol, sign_ok)) => {
                    eq_max[k] = eq_max[k].max(res.abs());
                    if res.abs() > tol * scale || !sign_ok {
                        eq_fail[k] += 1;
                    }
                }
                None => eq_skipped[k] += 1,
            }
            row.push(Cell::Num(v.map(|x| x.0).unwrap_or(f64::NAN)));
        }
        table.push(row);
    }
    let id_pass = id_max.iter().all(|m| *m <= ctx.tol.identity);
    let pass = id_pass && eq_fail.iter().all(|f| *f == 0);
    let eqs: Vec<serde_json::Value> = names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            json!({
                "equation": n,
                "max_abs_residual": eq_max[k],
                "failures": eq_fail[k],
                "skipped": eq_skipped[k],
            })
        })
        .collect();
    let summary = json!({
        "points": pts.len(),
        "outer_laplacian": value(&method),
        "identities": {
            "max_kato": id_max[0],
            "max_bochner": id_max[1],
            "max_log_gradient": id_max[2],
            "skipped": id_skipped,
            "pass": id_pass,
        },
        "equations": eqs,
    });
    Ok(ctx.report("residuals", pass, summary, table))
}

fn default_audit_domain(ctx: &Context) -> Result<AuditDomain, ConfigError> {
    let s = ctx.scenario;
    if let Some(d) = s.config.analysis.audit_domain {
        return Ok(d);
    }
    Ok(match (&s.config.chart, s.dirichlet) {
        (ChartSpec::Warped { t_min, t_max, .. }, _) => {
            let pad = 0.1 * (t_max - t_min);
            AuditDomain::WarpedBand {
                t_min: t_min + pad,
                t_max: t_max - pad,
            }
        }
        (_, Some(d)) => {
            let pad = 0.05 * (d.outer_radius - 1.0);
            AuditDomain::Annulus {
                center: Point2::ORIGIN,
                r_in: 1.0 + pad,
                r_out: d.outer_radius - pad,
            }
        }
        _ => {
            return Err(ConfigError::new("`audit` needs `analysis.audit_domain` for this chart").at_key(ctx.raw, "analysis"))
        }
    })
}

pub fn audit(ctx: &Context) -> Result<Report, ConfigError> {
    let s = ctx.scenario;
    let u = s.require_field(ctx.raw)?;
    let domain = default_audit_domain(ctx)?;
    let a = &s.config.analysis;
    let items: Vec<(Quantity, AuditCase)> = if a.audits.is_empty() {
        vec![
            (Quantity::PhiK, AuditCase::Case1),
            (Quantity::PhiK, AuditCase::Case2),
            (Quantity::PhiK, AuditCase::Case3),
            (Quantity::PhiK, AuditCase::Case4),
            (Quantity::AbsK, AuditCase::MinAbsOnBoundary),
            (Quantity::K, AuditCase::InteriorMinimumBound),
        ]
    } else {
        a.audits.iter().map(|i| (i.quantity, i.case)).collect()
    };
    let mut reports = Vec::new();
    for (q, c) in items {
        let r = principle_audit_with(u, &s.chart, &domain, q, c, a.audit_grid)
            .map_err(|e| ConfigError::from(e).at_key(ctx.raw, "audits"))?;
        reports.push(r);
    }
    let mut table = Table::new(&[
        "quantity",
        "case",
        "verdict",
        "interior_x",
        "interior_y",
        "interior_value",
        "boundary_x",
        "boundary_y",
        "boundary_value",
        "tolerance",
    ]);
    for r in &reports {
        let text = |v: serde_json::Value| Cell::Text(v.as_str().unwrap_or_default().to_string());
        table.push(vec![
            text(value(&r.quantity)),
            text(value(&r.case)),
            text(value(&r.verdict)),
            r.interior_extremum.point.x.into(),
            r.interior_extremum.point.y.into(),
            r.interior_extremum.value.into(),
            r.boundary_extremum.point.x.into(),
            r.boundary_extremum.point.y.into(),
            r.boundary_extremum.value.into(),
            r.tolerance.into(),
        ]);
    }
    let mut pass = reports.iter().all(|r| r.verdict != Verdict::Fail);
    let mut summary = json!({ "domain": value(&domain), "audits": value(&reports) });
    if a.slope_bound {
        let p = build_profile(ctx, 20)?;
        let slope = log_length_slope_bound(u, &s.chart, &domain, &p, a.audit_grid.boundary)?;
        pass &= slope.verdict != Verdict::Fail;
        summary["slope_bound"] = value(&slope);
    }
    Ok(ctx.report("audit", pass, summary, table))
}

pub fn bic(ctx: &Context) -> Result<Report, ConfigError> {
    let s = ctx.scenario;
    let factor = s
        .conical
        .as_ref()
        .ok_or_else(|| ConfigError::new("`bic` needs a conical chart").at_key(ctx.raw, "chart"))?;
    let spec = s
        .dirichlet
        .ok_or_else(|| ConfigError::new("`bic` needs a Dirichlet `field`").at_key(ctx.raw, "field"))?;
    let p = build_profile(ctx, 200)?;
    let conv = log_convexity_check(&p, ctx.tol.convexity)?;
    let vertex_levels = factor.vertex_levels(&spec);
    let a = &s.config.analysis;
    let opts = BicOptions::default();
    let eps0 = a.eps[0];
    let r_of = |t: f64| (spec.outer_radius.ln() * (t - spec.t1) / spec.span()).exp();
    let usable = |t: &f64| {
        let r = r_of(*t);
        r >= 1.0 + eps0 && r <= spec.outer_radius - eps0
    };
    let levels: Vec<f64> = match &a.mollified_levels {
        Some(l) => l.clone(),
        None => {
            let (lo, hi) = spec.level_range();
            let mut l: Vec<f64> = vertex_levels.iter().copied().filter(usable).collect();
            l.push(0.5 * (lo + hi));
            l
        }
    };
    let mut chains = Vec::new();
    for &t in &levels {
        let c = mollified_convergence(factor, &spec, t, &a.eps, &opts)
            .map_err(|e| ConfigError::from(e).at_key(ctx.raw, "mollified_levels"))?;
        chains.push(c);
    }
    let monotone = chains
        .iter()
        .all(|c| c.lengths.windows(2).all(|w| w[1] <= w[0] + ctx.tol.mollified) && c.excess.iter().all(|d| *d >= -ctx.tol.mollified));

    let mut smooth = Vec::new();
    if a.mollified_profiles {
        let (lo, hi) = spec.level_range();
        let t_of = |r: f64| spec.t1 + spec.span() * r.ln() / spec.outer_radius.ln();
        let (ta, tb) = (t_of(1.0 + eps0), t_of(spec.outer_radius - eps0));
        let (ta, tb) = (ta.min(tb).max(lo), ta.max(tb).min(hi));
        let grid = inset_grid(ta, tb, 60);
        for &e in &a.eps {
            let m = mollify(factor, e)?;
            let mp = mollified_length_profile(&m, &spec, &grid, &opts)?;
            let r = log_convexity_check(&mp, ctx.tol.mollified)?;
            smooth.push(json!({ "eps": e, "min_second_difference": r.min_second_difference, "pass": r.pass }));
        }
    }
    let smooth_pass = smooth.iter().all(|v| v["pass"].as_bool() == Some(true));

    let flux: Vec<serde_json::Value> = (0..factor.singularities().len())
        .map(|j| {
            let z = factor.singularities()[j].z;
            let gap = factor
                .singularities()
                .iter()
                .filter(|o| o.z != z)
                .map(|o| o.z.dist(z))
                .fold(f64::INFINITY, f64::min);
            let f = atom_flux(factor, j, (0.25 * gap).min(0.05), 256)?;
            let alpha = factor.singularities()[j].alpha;
            Ok(json!({ "z": value(&factor.singularities()[j].z), "alpha": alpha, "flux": f, "pass": (f - alpha).abs() <= ctx.tol.flux }))
        })
        .collect::<Result<_, levelflow::Error>>()?;
    let flux_pass = flux.iter().all(|v| v["pass"].as_bool() == Some(true));

    let pass = conv.pass && monotone && smooth_pass && flux_pass;
    let summary = json!({
        "curvature_measure": value(&factor.curvature_measure()),
        "cone_angles": factor.cone_angles(),
        "vertex_levels": vertex_levels,
        "convexity": value(&conv),
        "mollified_convergence": value(&chains),
        "mollified_monotone": monotone,
        "mollified_profiles": smooth,
        "flux": flux,
    });
    Ok(ctx.report("bic", pass, summary, profile_table(&p)))
}

pub fn counterexample(ctx: &Context) -> Result<Report, ConfigError> {
    let s = ctx.scenario;
    let chart = s
        .chart
        .as_conformal()
        .ok_or_else(|| ConfigError::new("`counterexample` needs a conformal chart").at_key(ctx.raw, "chart"))?;
    let j = chart.factor().jet_to(Point2::ORIGIN, 2)?;
    let h = j.hessian();
    // K(0) = -e^{-2 phi} Lap phi with phi(0) = 0 enforced by the defect
    let k0 = -(h[0] + h[2]) * (-2.0 * j.value()).exp();
    let limit = -4.0 * PI * PI * k0;
    let radii = s.config.analysis.radii.clone();
    let n = s.config.analysis.n_samples;
    let defects = levelflow::par::try_map(&radii, |&r| asymptotic_defect(chart, -r.ln(), n))
        .map_err(|e| ConfigError::from(e).at_key(ctx.raw, "chart"))?;
    let tol = ctx.tol.counterexample_rel * limit.abs().max(1e-12);
    let mut table = Table::new(&["r", "t", "defect", "relative_error"]);
    let mut worst: f64 = 0.0;
    for (&r, &d) in radii.iter().zip(&defects) {
        let rel = (d - limit).abs() / limit.abs().max(1e-300);
        worst = worst.max((d - limit).abs());
        table.push(vec![r.into(), (-r.ln()).into(), d.into(), rel.into()]);
    }
    let pass = worst <= tol;
    let summary = json!({
        "gauss_curvature_at_origin": k0,
        "predicted_limit": limit,
        "defects": defects,
        "max_abs_error": worst,
        "tolerance": tol,
    });
    Ok(ctx.report("counterexample", pass, summary, table))
}

/// Extra checks for the hyperbolic example: `L sin s = ln(lambda)` and
/// `(ln L)'' sin^2 s = 1`.
pub fn hyperbolic_summary(ctx: &Context, lambda: f64) -> Result<Report, ConfigError> {
    let mut rep = convexity(ctx)?;
    let p = build_profile(ctx, 50)?;
    let mut max_len: f64 = 0.0;
    let mut min_scaled = f64::INFINITY;
    let mut max_scaled_err: f64 = 0.0;
    rep.table.columns.push("lnL_pp_sin2".into());
    for (i, row) in rep.table.rows.iter_mut().enumerate() {
        let sn = p.t[i].sin();
        let scaled = p.ln_l_pp[i] * sn * sn;
        max_len = max_len.max((p.l[i] * sn - lambda.ln()).abs() / lambda.ln());
        min_scaled = min_scaled.min(scaled);
        max_scaled_err = max_scaled_err.max((scaled - 1.0).abs());
        row.push(Cell::Num(scaled));
    }
    let ok = max_len <= 1e-8 * ctx.tol.tol_scale && max_scaled_err <= 1e-6 * ctx.tol.tol_scale;
    rep.pass &= ok;
    rep.summary["hyperbolic"] = json!({
        "lambda": lambda,
        "max_rel_error_L_sin_s": max_len,
        "min_lnL_pp_sin2": min_scaled,
        "max_abs_error_lnL_pp_sin2": max_scaled_err,
        "pass": ok,
    });
    rep.command = "examples".into();
    Ok(rep)
}
