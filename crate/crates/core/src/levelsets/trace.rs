use std::f64::consts::PI;

use super::{CurveSample, CurveShape, LevelCurve};
use crate::error::{Error, Result};
use crate::geometry::{Chart, Point2, Region, ScalarField, CRITICAL_GRADIENT};

const MAX_STEPS: usize = 200_000;
const RAY_SAMPLES: usize = 512;

fn radial_extent(chart: &Chart) -> Result<(Point2, f64, f64)> {
    let region = chart
        .as_conformal()
        .map(|c| c.region())
        .ok_or_else(|| Error::InvalidDomain("tracing needs a conformal chart".into()))?;
    match region {
        Region::Annulus {
            center,
            inner,
            outer,
        } => Ok((center, inner.max(1e-6 * outer), outer)),
        Region::Disc { center, radius } => Ok((center, 1e-6 * radius, radius)),
        _ => Err(Error::InvalidDomain("tracing needs a bounded chart".into())),
    }
}

struct Tracer<'a> {
    u: &'a dyn ScalarField,
    chart: &'a Chart,
    level: f64,
}

impl Tracer<'_> {
    fn eval(&self, p: Point2) -> Result<(f64, [f64; 2])> {
        let j = self
            .u
            .jet_to(p, 1)
            .map_err(|e| Error::Tracing(format!("evaluation failed at {p}: {e}")))?;
        let g = j.gradient();
        let norm = g[0].hypot(g[1]);
        if !(norm >= CRITICAL_GRADIENT) {
            return Err(Error::Tracing(format!(
                "critical point encountered near {p} (|grad u| = {norm:.3e})"
            )));
        }
        Ok((j.value() - self.level, g))
    }

    fn inside(&self, p: Point2) -> Result<()> {
        if self.chart.contains(p) {
            Ok(())
        } else {
            Err(Error::Topology {
                level: self.level,
                reason: format!("level curve reaches the chart boundary near {p}"),
            })
        }
    }

    /// Newton projection onto the level along the gradient.
    fn project(&self, mut p: Point2) -> Result<Point2> {
        for _ in 0..4 {
            let (f, g) = self.eval(p)?;
            let g2 = g[0] * g[0] + g[1] * g[1];
            p = p.offset(-f * g[0] / g2, -f * g[1] / g2);
        }
        Ok(p)
    }

    fn direction(&self, p: Point2) -> Result<[f64; 2]> {
        let (_, g) = self.eval(p)?;
        let n = g[0].hypot(g[1]);
        Ok([g[1] / n, -g[0] / n])
    }

    fn rk4(&self, p: Point2, h: f64) -> Result<Point2> {
        let k1 = self.direction(p)?;
        let k2 = self.direction(p.offset(0.5 * h * k1[0], 0.5 * h * k1[1]))?;
        let k3 = self.direction(p.offset(0.5 * h * k2[0], 0.5 * h * k2[1]))?;
        let k4 = self.direction(p.offset(h * k3[0], h * k3[1]))?;
        Ok(p.offset(
            h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ))
    }
}

fn segment_distance(q: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let l2 = dx * dx + dy * dy;
    let s = if l2 > 0.0 {
        (((q.x - a.x) * dx + (q.y - a.y) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    q.dist(a.offset(s * dx, s * dy))
}

/// Predictor-corrector tracing: RK4 along the unit tangent field with a
/// Newton projection after every step. A closed, star-shaped result is
/// re-sampled uniformly in polar angle, which keeps the trapezoid rule
/// spectrally accurate; other closed curves are re-sampled by chord length.
pub(super) fn trace_level(
    u: &dyn ScalarField,
    chart: &Chart,
    level: f64,
    n: usize,
) -> Result<LevelCurve> {
    let (c, r0, r1) = radial_extent(chart)?;
    let tr = Tracer { u, chart, level };

    // starting point on the ray theta = 0
    let ray = |r: f64| Point2::new(c.x + r, c.y);
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    // endpoints included, nudged inside so levels hugging the boundary are found
    for k in 0..=RAY_SAMPLES {
        let s = (k as f64 / RAY_SAMPLES as f64).clamp(1e-9, 1.0 - 1e-9);
        let r = r0 + (r1 - r0) * s;
        let Ok(v) = u.value(ray(r)) else {
            prev = None;
            continue;
        };
        let f = v - level;
        if let Some((rp, fp)) = prev {
            if fp == 0.0 || fp.signum() != f.signum() {
                bracket = Some((rp, r, fp));
                break;
            }
        }
        prev = Some((r, f));
    }
    let (mut a, mut b, fa) = bracket.ok_or_else(|| Error::Topology {
        level,
        reason: "level does not cross the reference ray".into(),
    })?;
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        let fm = u.value(ray(m))? - level;
        if fm.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let start = tr.project(ray(0.5 * (a + b)))?;
    tr.inside(start)?;

    let h = (2.0 * PI * start.dist(c) / 400.0).min(0.05 * (r1 - r0));
    let mut pts = vec![start];
    let mut p = start;
    let mut closed = false;
    for step in 1..=MAX_STEPS {
        let q = tr.project(tr.rk4(p, h)?)?;
        tr.inside(q)?;
        if step > 8 && segment_distance(start, p, q) < 0.5 * h {
            closed = true;
            break;
        }
        pts.push(q);
        p = q;
    }
    if !closed {
        return Err(Error::Tracing(format!(
            "curve did not close within {MAX_STEPS} steps"
        )));
    }

    if let Some(curve) = star_parametrize(&tr, c, &pts, n)? {
        return Ok(curve);
    }
    chord_parametrize(&tr, &pts, n)
}

fn star_parametrize(
    tr: &Tracer<'_>,
    c: Point2,
    pts: &[Point2],
    n: usize,
) -> Result<Option<LevelCurve>> {
    let angle = |p: Point2| (p.y - c.y).atan2(p.x - c.x);
    let mut steps = Vec::with_capacity(pts.len());
    for k in 0..pts.len() {
        let mut d = angle(pts[(k + 1) % pts.len()]) - angle(pts[k]);
        if d > PI {
            d -= 2.0 * PI;
        } else if d < -PI {
            d += 2.0 * PI;
        }
        steps.push(d);
    }
    let total: f64 = steps.iter().sum();
    if (total.abs() - 2.0 * PI).abs() > 1e-6 || steps.iter().any(|d| d * total <= 0.0) {
        return Ok(None);
    }

    // initial radii from the trace, by angle
    let mut table: Vec<(f64, f64)> = pts
        .iter()
        .map(|&p| (angle(p).rem_euclid(2.0 * PI), p.dist(c)))
        .collect();
    table.sort_by(|x, y| x.0.total_cmp(&y.0));
    let guess = |th: f64| -> f64 {
        let k = table.partition_point(|e| e.0 < th);
        let (a0, r0) = if k == 0 {
            let e = table[table.len() - 1];
            (e.0 - 2.0 * PI, e.1)
        } else {
            table[k - 1]
        };
        let (a1, r1) = if k == table.len() {
            (table[0].0 + 2.0 * PI, table[0].1)
        } else {
            table[k]
        };
        if a1 > a0 {
            r0 + (r1 - r0) * (th - a0) / (a1 - a0)
        } else {
            r0
        }
    };

    let dth = 2.0 * PI / n as f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let th = dth * i as f64;
        let (s, co) = th.sin_cos();
        let mut rho = guess(th);
        let mut ok = false;
        let mut grad = [0.0; 2];
        for _ in 0..30 {
            let p = Point2::new(c.x + rho * co, c.y + rho * s);
            let (f, g) = tr.eval(p)?;
            grad = g;
            let fr = g[0] * co + g[1] * s;
            if fr.abs() < 1e-12 * g[0].hypot(g[1]) {
                return Ok(None);
            }
            let d = f / fr;
            rho -= d;
            // quadratic convergence: the remaining error is about d^2 / rho
            if d.abs() <= 1e-9 * rho.abs() {
                ok = true;
                break;
            }
        }
        if !ok {
            return Ok(None);
        }
        let p = Point2::new(c.x + rho * co, c.y + rho * s);
        tr.inside(p)?;
        let (_, g) = tr.eval(p).unwrap_or((0.0, grad));
        let u_r = g[0] * co + g[1] * s;
        let u_th = rho * (-g[0] * s + g[1] * co);
        let rho_p = -u_th / u_r;
        let v = [rho_p * co - rho * s, rho_p * s + rho * co];
        let speed = v[0].hypot(v[1]);
        samples.push(CurveSample {
            p,
            tangent: [v[0] / speed, v[1] / speed],
            weight: speed * dth,
        });
    }
    Ok(Some(LevelCurve {
        level: tr.level,
        samples,
        closed: true,
        shape: CurveShape::StarShaped { center: c },
    }))
}

fn chord_parametrize(tr: &Tracer<'_>, pts: &[Point2], n: usize) -> Result<LevelCurve> {
    let m = pts.len();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for k in 0..m {
        let d = pts[k].dist(pts[(k + 1) % m]);
        cum.push(cum[k] + d);
    }
    let total = cum[m];
    let ds = total / n as f64;
    let mut resampled = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let s = ds * i as f64;
        while cum[k + 1] < s {
            k += 1;
        }
        let a = pts[k];
        let b = pts[(k + 1) % m];
        let seg = cum[k + 1] - cum[k];
        let w = if seg > 0.0 { (s - cum[k]) / seg } else { 0.0 };
        resampled.push(tr.project(Point2::new(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)))?);
    }
    let samples = (0..n)
        .map(|i| {
            let a = resampled[(i + n - 1) % n];
            let b = resampled[(i + 1) % n];
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let l = dx.hypot(dy);
            CurveSample {
                p: resampled[i],
                tangent: [dx / l, dy / l],
                weight: 0.5 * (resampled[i].dist(a) + resampled[i].dist(b)),
            }
        })
        .collect();
    Ok(LevelCurve {
        level: tr.level,
        samples,
        closed: true,
        shape: CurveShape::Traced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{factors, ConformalChart};
    use crate::harmonic::{catalog_field, HarmonicField};
    use crate::levelsets::extract_level_curve;

    fn annulus(inner: f64, outer: f64) -> Chart {
        ConformalChart::new(
            Region::Annulus {
                center: Point2::ORIGIN,
                inner,
                outer,
            },
            factors::flat(0.0),
        )
        .into()
    }

    #[test]
    fn traced_offset_log_matches_exact_circle() {
        let u: HarmonicField = catalog_field("log_offset", &[0.2, -0.1]).unwrap().without_symmetry();
        let chart = annulus(0.5, 3.0);
        let t = -0.2;
        let c = extract_level_curve(&u, &chart, t, 256).unwrap();
        assert!(matches!(c.shape, CurveShape::StarShaped { .. }));
        let center = Point2::new(0.2, -0.1);
        for s in &c.samples {
            assert!((s.p.dist(center) - 0.2f64.exp()).abs() < 1e-12);
        }
        assert!(c.max_level_error(&u).unwrap() < 1e-12);
        let l = c.euclidean_length();
        assert!((l - 2.0 * PI * 0.2f64.exp()).abs() < 1e-12, "{l}");
    }

    #[test]
    fn perturbed_log_levels_close_with_small_residual() {
        let u = catalog_field("log_plus_linear", &[0.1]).unwrap();
        let chart = annulus(1.0, 4.0);
        let c = extract_level_curve(&u, &chart, -0.8, 512).unwrap();
        assert!(c.max_level_error(&u).unwrap() <= 1e-9 * 4.0f64.ln());
        assert!(c.samples.iter().all(|s| s.weight > 0.0));
    }

    #[test]
    fn open_level_is_a_topology_error() {
        let u = catalog_field("re_z_plus_a_over_z", &[1.0]).unwrap();
        let chart = annulus(1.2, 2.0);
        let err = extract_level_curve(&u, &chart, 1.6, 256).unwrap_err();
        assert!(matches!(err, Error::Topology { .. }), "{err}");
    }

    #[test]
    fn chord_parametrization_is_second_order() {
        let tr_field = catalog_field("log", &[-1.0]).unwrap().without_symmetry();
        let chart = annulus(0.5, 2.0);
        let tr = Tracer {
            u: &tr_field,
            chart: &chart,
            level: 0.0,
        };
        let pts: Vec<Point2> = (0..400)
            .map(|i| Point2::polar(1.0, 2.0 * PI * i as f64 / 400.0))
            .collect();
        let c = chord_parametrize(&tr, &pts, 128).unwrap();
        assert!((c.euclidean_length() - 2.0 * PI).abs() < 1e-3);
    }
}
