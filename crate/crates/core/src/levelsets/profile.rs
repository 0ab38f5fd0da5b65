use std::fmt::Write as _;

use serde::Serialize;

use super::integrals::{length, level_integrals};
use super::{extract_level_curve, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::geometry::Chart;
use crate::harmonic::{HarmonicField, Provenance};
use crate::par::Execution;

/// CSV column order.
pub const PROFILE_COLUMNS: [&str; 8] = [
    "t",
    "L",
    "Lp",
    "Lpp",
    "lnL_pp",
    "L_fd_p",
    "L_fd_pp",
    "aux_invgrad2",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProfileDerivatives {
    /// `Lp`, `Lpp` from level-set integrals, `L_fd_*` from `L(t +- h)`.
    IntegralFormulas,
    /// All derivative columns from divided differences on the t-grid, with
    /// `lnL_pp` differenced from `ln L` directly; `aux_invgrad2` is not
    /// available and stored as NaN.
    GridDifferences,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthProfile {
    pub t: Vec<f64>,
    pub l: Vec<f64>,
    pub lp: Vec<f64>,
    pub lpp: Vec<f64>,
    pub ln_l_pp: Vec<f64>,
    pub l_fd_p: Vec<f64>,
    pub l_fd_pp: Vec<f64>,
    pub aux_invgrad2: Vec<f64>,
    pub fd_step: f64,
    pub derivatives: ProfileDerivatives,
}

impl LengthProfile {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Builds a profile from lengths alone using grid differences.
    pub fn from_lengths(t: Vec<f64>, l: Vec<f64>) -> Result<Self> {
        validate_grid(&t)?;
        if l.len() != t.len() {
            return Err(Error::InvalidParameter("length and grid sizes differ".into()));
        }
        let (d1, d2) = grid_differences(&t, &l);
        let ln: Vec<f64> = l.iter().map(|v| v.ln()).collect();
        let (_, ln_l_pp) = grid_differences(&t, &ln);
        Ok(Self {
            aux_invgrad2: vec![f64::NAN; t.len()],
            fd_step: f64::NAN,
            derivatives: ProfileDerivatives::GridDifferences,
            l_fd_p: d1.clone(),
            l_fd_pp: d2.clone(),
            lp: d1,
            lpp: d2,
            ln_l_pp,
            t,
            l,
        })
    }

    /// Divided second differences of `ln L` at the interior grid points.
    pub fn ln_second_differences(&self) -> Vec<f64> {
        let ln: Vec<f64> = self.l.iter().map(|l| l.ln()).collect();
        divided_second_differences(&self.t, &ln)
    }

    /// Largest `|Lp - L_fd_p| / (1 + |Lp|)` and the same for `Lpp`.
    pub fn max_fd_discrepancy(&self) -> (f64, f64) {
        let rel = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs() / (1.0 + x.abs()))
                .fold(0.0, f64::max)
        };
        (rel(&self.lp, &self.l_fd_p), rel(&self.lpp, &self.l_fd_pp))
    }

    /// CSV with a header row, `.` decimals, LF endings and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = PROFILE_COLUMNS.join(",");
        out.push('\n');
        for i in 0..self.len() {
            let row = [
                self.t[i],
                self.l[i],
                self.lp[i],
                self.lpp[i],
                self.ln_l_pp[i],
                self.l_fd_p[i],
                self.l_fd_pp[i],
                self.aux_invgrad2[i],
            ];
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{v:.16e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub n_samples: usize,
    /// Finite-difference step; `None` means `1e-3` times the level span.
    pub fd_step: Option<f64>,
    pub execution: Execution,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            fd_step: None,
            execution: Execution::default(),
        }
    }
}

/// `n` uniform levels on `[lo, hi]`, inset by `1e-3 (hi - lo)` at both ends.
pub fn inset_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let inset = 1e-3 * (hi - lo);
    let (a, b) = (lo + inset, hi - inset);
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn validate_grid(t: &[f64]) -> Result<()> {
    if t.len() < 8 {
        return Err(Error::InvalidParameter(format!(
            "a profile needs at least 8 levels, got {}",
            t.len()
        )));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("t-grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Three-point first and second derivatives on a nonuniform grid (one-sided
/// at the ends, second order in the interior).
pub fn grid_differences(t: &[f64], f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = t.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let j = i.clamp(1, n - 2);
        let (x0, x1, x2) = (t[j - 1], t[j], t[j + 1]);
        let (f0, f1, f2) = (f[j - 1], f[j], f[j + 1]);
        let x = t[i];
        // derivative of the quadratic interpolant at x
        let a0 = (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
        let a1 = (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
        let a2 = (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
        d1[i] = a0 * f0 + a1 * f1 + a2 * f2;
        d2[i] = 2.0 * (f0 / ((x0 - x1) * (x0 - x2)) + f1 / ((x1 - x0) * (x1 - x2)) + f2 / ((x2 - x0) * (x2 - x1)));
    }
    (d1, d2)
}

/// `2 [ (f_{i+1} - f_i)/(t_{i+1} - t_i) - (f_i - f_{i-1})/(t_i - t_{i-1}) ] / (t_{i+1} - t_{i-1})`.
pub(crate) fn divided_second_differences(t: &[f64], f: &[f64]) -> Vec<f64> {
    (1..t.len().saturating_sub(1))
        .map(|i| {
            let right = (f[i + 1] - f[i]) / (t[i + 1] - t[i]);
            let left = (f[i] - f[i - 1]) / (t[i] - t[i - 1]);
            2.0 * (right - left) / (t[i + 1] - t[i - 1])
        })
        .collect()
}

pub(crate) fn level_span(u: &HarmonicField, t_grid: &[f64]) -> f64 {
    match u.provenance() {
        Provenance::AnnulusDirichlet(spec) => spec.span().abs(),
        _ => {
            let (lo, hi) = (t_grid[0], t_grid[t_grid.len() - 1]);
            (hi - lo) / (1.0 - 2e-3)
        }
    }
}

fn length_at(u: &HarmonicField, chart: &Chart, t: f64, n: usize) -> Result<f64> {
    length(&extract_level_curve(u, chart, t, n)?, chart)
}

/// `L`, `L'`, `L''`, `(ln L)''` and the auxiliary integral on every level of
/// `t_grid`, plus centered-difference counterparts of `L'` and `L''`.
pub fn length_profile(
    u: &HarmonicField,
    chart: &Chart,
    t_grid: &[f64],
    opts: ProfileOptions,
) -> Result<LengthProfile> {
    validate_grid(t_grid)?;
    let h = opts.fd_step.unwrap_or(1e-3 * level_span(u, t_grid));
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
    }
    let n = opts.n_samples;
    let rows = opts.execution.try_map(t_grid, |&t| -> Result<[f64; 8]> {
        let curve = extract_level_curve(u, chart, t, n)?;
        let li = level_integrals(u, chart, &curve)?;
        let lm = length_at(u, chart, t - h, n)?;
        let lp = length_at(u, chart, t + h, n)?;
        let l = li.length;
        Ok([
            t,
            l,
            li.dlength,
            li.d2length,
            (li.d2length * l - li.dlength * li.dlength) / (l * l),
            (lp - lm) / (2.0 * h),
            (lp - 2.0 * l + lm) / (h * h),
            li.aux_invgrad2,
        ])
    })?;
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    Ok(LengthProfile {
        t: col(0),
        l: col(1),
        lp: col(2),
        lpp: col(3),
        ln_l_pp: col(4),
        l_fd_p: col(5),
        l_fd_pp: col(6),
        aux_invgrad2: col(7),
        fd_step: h,
        derivatives: ProfileDerivatives::IntegralFormulas,
    })
}

/// Discrepancy between the integral formulas and centered differences at a
/// sequence of halved steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdConvergence {
    pub level: f64,
    pub steps: Vec<f64>,
    pub err_p: Vec<f64>,
    pub err_pp: Vec<f64>,
    /// `log2(err[k] / err[k + 1])`.
    pub order_p: Vec<f64>,
    pub order_pp: Vec<f64>,
}

pub fn fd_convergence(
    u: &HarmonicField,
    chart: &Chart,
    t: f64,
    n_samples: usize,
    h0: f64,
    halvings: usize,
) -> Result<FdConvergence> {
    let curve = extract_level_curve(u, chart, t, n_samples)?;
    let li = level_integrals(u, chart, &curve)?;
    let mut steps = Vec::new();
    let mut err_p = Vec::new();
    let mut err_pp = Vec::new();
    for k in 0..=halvings {
        let h = h0 / f64::powi(2.0, k as i32);
        let lm = length_at(u, chart, t - h, n_samples)?;
        let lp = length_at(u, chart, t + h, n_samples)?;
        steps.push(h);
        err_p.push(((lp - lm) / (2.0 * h) - li.dlength).abs());
        err_pp.push(((lp - 2.0 * li.length + lm) / (h * h) - li.d2length).abs());
    }
    let order = |e: &[f64]| e.windows(2).map(|w| (w[0] / w[1]).log2()).collect::<Vec<f64>>();
    Ok(FdConvergence {
        level: t,
        order_p: order(&err_p),
        order_pp: order(&err_pp),
        steps,
        err_p,
        err_pp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{factors, ConformalChart};
    use crate::harmonic::{solve_annulus_dirichlet, DirichletSpec};
    use std::f64::consts::E;

    fn flat() -> (HarmonicField, Chart) {
        let r = E * E;
        (
            solve_annulus_dirichlet(DirichletSpec::canonical(r)).unwrap(),
            ConformalChart::annulus(r, factors::flat(0.0)).unwrap().into(),
        )
    }

    #[test]
    fn flat_profile_is_log_affine() {
        let (u, chart) = flat();
        let grid = inset_grid(-2.0, 0.0, 50);
        let p = length_profile(&u, &chart, &grid, ProfileOptions::default()).unwrap();
        assert!(p.ln_l_pp.iter().all(|v| v.abs() <= 1e-8));
        let (dp, dpp) = p.max_fd_discrepancy();
        assert!(dp <= 1e-4 && dpp <= 1e-4, "{dp} {dpp}");
        assert!(p.ln_second_differences().iter().all(|v| v.abs() <= 1e-8));
    }

    #[test]
    fn sequential_and_parallel_profiles_are_identical() {
        let (u, chart) = flat();
        let grid = inset_grid(-2.0, 0.0, 16);
        let seq = ProfileOptions {
            execution: Execution::Sequential,
            n_samples: 128,
            ..Default::default()
        };
        let par = ProfileOptions {
            execution: Execution::Parallel,
            ..seq
        };
        let a = length_profile(&u, &chart, &grid, seq).unwrap();
        let b = length_profile(&u, &chart, &grid, par).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn csv_layout() {
        let (u, chart) = flat();
        let p = length_profile(&u, &chart, &inset_grid(-2.0, 0.0, 8), ProfileOptions::default()).unwrap();
        let csv = p.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,L,Lp,Lpp,lnL_pp,L_fd_p,L_fd_pp,aux_invgrad2");
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 8);
        // 17 significant digits: one before the point, sixteen after
        let mantissa = first.split(',').next().unwrap().split('e').next().unwrap();
        assert_eq!(mantissa.trim_start_matches('-').len(), 18);
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn grid_differences_are_exact_on_quadratics() {
        let t = [0.0, 0.1, 0.35, 0.4, 0.8, 1.0, 1.3, 1.35];
        let f: Vec<f64> = t.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let (d1, d2) = grid_differences(&t, &f);
        for (i, x) in t.iter().enumerate() {
            assert!((d1[i] - (6.0 * x - 1.0)).abs() < 1e-12);
            assert!((d2[i] - 6.0).abs() < 1e-10);
        }
        assert!(divided_second_differences(&t, &f).iter().all(|v| (v - 6.0).abs() < 1e-10));
    }

    #[test]
    fn grid_validation() {
        let (u, chart) = flat();
        assert!(length_profile(&u, &chart, &[-1.0, -0.5], ProfileOptions::default()).is_err());
        let mut g = inset_grid(-2.0, 0.0, 10);
        g.swap(2, 3);
        assert!(length_profile(&u, &chart, &g, ProfileOptions::default()).is_err());
    }

    #[test]
    fn fd_error_decays_at_second_order() {
        let (u, chart) = flat();
        let c = fd_convergence(&u, &chart, -1.0, 256, 0.1, 2).unwrap();
        for o in c.order_p.iter().chain(&c.order_pp) {
            assert!((1.8..=2.2).contains(o), "{c:?}");
        }
    }
}
