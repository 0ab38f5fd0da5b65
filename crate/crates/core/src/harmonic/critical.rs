use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Chart, Point2, Region, ScalarField, CRITICAL_GRADIENT};

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_DAMPING: f64 = 0.5;
const MERGE_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedFailure {
    pub seed: Point2,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPointReport {
    /// Located zeros of `grad_0 u`, sorted lexicographically.
    pub points: Vec<Point2>,
    /// Seeds whose Newton iteration failed; informational only.
    pub failures: Vec<SeedFailure>,
    /// Smallest `|grad_0 u|` over the scan grid.
    pub min_grid_gradient: f64,
    pub grid_argmin: Point2,
}

struct Grid {
    nodes: Vec<Point2>,
    rows: usize,
    cols: usize,
    /// Whether the second index wraps around.
    periodic: bool,
    spacing: Vec<f64>,
}

fn scan_grid(chart: &Chart, resolution: usize) -> Result<Grid> {
    let polar = |center: Point2, r0: f64, r1: f64| {
        let rows = resolution;
        let cols = 4 * resolution;
        let mut nodes = Vec::with_capacity(rows * cols);
        let mut spacing = Vec::with_capacity(rows * cols);
        let dr = (r1 - r0) / (rows - 1) as f64;
        for i in 0..rows {
            let r = r0 + dr * i as f64;
            for j in 0..cols {
                let th = 2.0 * PI * j as f64 / cols as f64;
                nodes.push(Point2::new(center.x + r * th.cos(), center.y + r * th.sin()));
                spacing.push(dr.max(r * 2.0 * PI / cols as f64));
            }
        }
        Grid {
            nodes,
            rows,
            cols,
            periodic: true,
            spacing,
        }
    };
    match chart {
        Chart::Conformal(c) => match c.region() {
            Region::Annulus {
                center,
                inner,
                outer,
            } => {
                let r0 = if inner > 0.0 { inner } else { outer / resolution as f64 };
                Ok(polar(center, r0, outer))
            }
            Region::Disc { center, radius } => Ok(polar(center, radius / resolution as f64, radius)),
            _ => Err(Error::InvalidDomain(
                "critical point scan needs a bounded chart".into(),
            )),
        },
        Chart::Warped(w) => {
            let (t0, t1) = w.t_range();
            let rows = resolution;
            let cols = 4 * resolution;
            let dt = (t1 - t0) / (rows - 1) as f64;
            let dth = 2.0 * PI / cols as f64;
            let mut nodes = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                for j in 0..cols {
                    nodes.push(Point2::new(t0 + dt * i as f64, dth * j as f64));
                }
            }
            Ok(Grid {
                nodes,
                rows,
                cols,
                periodic: true,
                spacing: vec![dt.max(dth); rows * cols],
            })
        }
    }
}

fn gradient(u: &dyn ScalarField, p: Point2) -> Option<([f64; 2], [f64; 3])> {
    let j = u.jet_to(p, 2).ok()?;
    Some((j.gradient(), j.hessian()))
}

/// Newton step `-H^{-1} g`, or `None` for a singular Hessian.
fn newton_step(g: [f64; 2], h: [f64; 3]) -> Option<[f64; 2]> {
    let det = h[0] * h[2] - h[1] * h[1];
    let scale = h[0].abs().max(h[1].abs()).max(h[2].abs());
    if !(det.abs() > 1e-14 * scale * scale) {
        return None;
    }
    Some([
        -(h[2] * g[0] - h[1] * g[1]) / det,
        -(-h[1] * g[0] + h[0] * g[1]) / det,
    ])
}

fn polish(u: &dyn ScalarField, chart: &Chart, seed: Point2) -> std::result::Result<Point2, String> {
    let mut p = seed;
    let (mut g, mut h) = gradient(u, p).ok_or("seed is not evaluable")?;
    let mut gn = g[0].hypot(g[1]);
    for _ in 0..NEWTON_MAX_ITER {
        if gn <= 1e-3 * CRITICAL_GRADIENT {
            return Ok(p);
        }
        let d = newton_step(g, h).ok_or("singular Hessian")?;
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let q = p.offset(s * d[0], s * d[1]);
            if chart.contains(q) {
                if let Some((gq, hq)) = gradient(u, q) {
                    let gqn = gq[0].hypot(gq[1]);
                    if gqn < gn {
                        p = q;
                        g = gq;
                        h = hq;
                        gn = gqn;
                        accepted = true;
                        break;
                    }
                }
            }
            s *= NEWTON_DAMPING;
        }
        if !accepted {
            break;
        }
    }
    if gn <= CRITICAL_GRADIENT {
        Ok(p)
    } else {
        Err(format!("no convergence within {NEWTON_MAX_ITER} iterations, |grad u| = {gn:.3e}"))
    }
}

/// Locates zeros of `grad_0 u` in the chart: a scan of `|grad_0 u|^2` over a
/// polar (or `(t, theta)`) grid with `resolution` rows, local minima whose
/// Newton step stays within two grid cells as seeds, then damped Newton.
pub fn critical_points(
    u: &dyn ScalarField,
    chart: &Chart,
    resolution: usize,
) -> Result<CriticalPointReport> {
    if resolution < 16 {
        return Err(Error::InvalidParameter(format!(
            "scan resolution must be at least 16, got {resolution}"
        )));
    }
    let grid = scan_grid(chart, resolution)?;
    let data: Vec<Option<([f64; 2], [f64; 3])>> = crate::par::map(&grid.nodes, |&p| gradient(u, p));
    let g2: Vec<f64> = data
        .iter()
        .map(|d| d.map_or(f64::INFINITY, |(g, _)| g[0] * g[0] + g[1] * g[1]))
        .collect();

    let (mut argmin, mut min2) = (0, f64::INFINITY);
    for (k, &v) in g2.iter().enumerate() {
        if v < min2 {
            min2 = v;
            argmin = k;
        }
    }

    let at = |i: usize, j: usize| i * grid.cols + j;
    let mut seeds = Vec::new();
    for i in 0..grid.rows {
        for j in 0..grid.cols {
            let v = g2[at(i, j)];
            if !v.is_finite() {
                continue;
            }
            let mut is_min = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = i as i64 + di;
                    if ii < 0 || ii >= grid.rows as i64 {
                        continue;
                    }
                    let mut jj = j as i64 + dj;
                    if grid.periodic {
                        jj = jj.rem_euclid(grid.cols as i64);
                    } else if jj < 0 || jj >= grid.cols as i64 {
                        continue;
                    }
                    if g2[at(ii as usize, jj as usize)] < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let (g, h) = data[at(i, j)].expect("finite entries are evaluable");
            let near = newton_step(g, h)
                .is_some_and(|d| d[0].hypot(d[1]) <= 2.0 * grid.spacing[at(i, j)]);
            if near {
                seeds.push(grid.nodes[at(i, j)]);
            }
        }
    }

    let outcomes = crate::par::map(&seeds, |&s| polish(u, chart, s));
    let mut points: Vec<Point2> = Vec::new();
    let mut failures = Vec::new();
    for (seed, out) in seeds.into_iter().zip(outcomes) {
        match out {
            Ok(p) => {
                if !points.iter().any(|q| q.dist(p) < MERGE_RADIUS) {
                    points.push(p);
                }
            }
            Err(reason) => failures.push(SeedFailure { seed, reason }),
        }
    }
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    Ok(CriticalPointReport {
        points,
        failures,
        min_grid_gradient: min2.sqrt(),
        grid_argmin: grid.nodes[argmin],
    })
}
