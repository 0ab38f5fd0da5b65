use std::f64::consts::PI;

use levelflow::geometry::{factors, Region};
use levelflow::harmonic::{catalog_field, solve_annulus_dirichlet, DirichletSpec};
use levelflow::levelsets::{asymptotic_defect, inset_grid, length_profile, log_convexity_check, ProfileOptions};
use levelflow::par::Execution;
use levelflow::{Chart, ConformalChart, Point2, WarpedChart};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flat_annuli_are_exactly_log_linear(r in 1.5f64..20.0) {
        let u = solve_annulus_dirichlet(DirichletSpec::canonical(r)).unwrap();
        let chart: Chart = ConformalChart::annulus(r, factors::flat(0.0)).unwrap().into();
        let p = length_profile(&u, &chart, &inset_grid(-r.ln(), 0.0, 20), ProfileOptions::default()).unwrap();
        for v in &p.ln_l_pp {
            prop_assert!(v.abs() <= 1e-8);
        }
    }

    #[test]
    fn hyperbolic_quotients_scale_like_one_over_sine(lambda in 1.5f64..30.0, s in 0.3f64..2.8) {
        let u = catalog_field("warped_arctan", &[]).unwrap();
        let chart: Chart = WarpedChart::hyperbolic_quotient(lambda, -3.5, 3.5).unwrap().into();
        let grid: Vec<f64> = (0..8).map(|k| s + 0.02 * (k as f64 - 3.5)).collect();
        let p = length_profile(&u, &chart, &grid, ProfileOptions::default()).unwrap();
        for (t, (l, pp)) in p.t.iter().zip(p.l.iter().zip(&p.ln_l_pp)) {
            prop_assert!((l * t.sin() / lambda.ln() - 1.0).abs() <= 1e-10);
            prop_assert!((pp * t.sin().powi(2) - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn cap_defect_tracks_the_centre_curvature(c in -0.2f64..-0.02) {
        let chart = ConformalChart::new(
            Region::Annulus { center: Point2::ORIGIN, inner: 0.0, outer: 1.0 },
            factors::quadratic_lambda(c),
        );
        // curvature of (1 + c r^2)^2 |dz|^2 at the centre is -4c
        let limit = -4.0 * PI * PI * (-4.0 * c);
        let d = asymptotic_defect(&chart, -(0.02f64).ln(), 256).unwrap();
        prop_assert!((d - limit).abs() <= 0.02 * limit.abs());
    }

    #[test]
    fn negatively_curved_annuli_stay_log_convex(c in 0.01f64..0.3, r in 1.5f64..4.0) {
        let u = solve_annulus_dirichlet(DirichletSpec::canonical(r)).unwrap();
        let chart: Chart = ConformalChart::annulus(r, factors::quadratic_lambda(c)).unwrap().into();
        let p = length_profile(&u, &chart, &inset_grid(-r.ln(), 0.0, 24), ProfileOptions::default()).unwrap();
        prop_assert!(log_convexity_check(&p, 1e-8).unwrap().pass);
    }
}

#[test]
fn execution_mode_does_not_change_results() {
    let u = catalog_field("log_plus_linear", &[0.2]).unwrap();
    let chart: Chart = ConformalChart::new(
        Region::Annulus {
            center: Point2::ORIGIN,
            inner: 0.2,
            outer: 2.0,
        },
        factors::anisotropic_lambda(0.2, -0.1),
    )
    .into();
    let grid = inset_grid(0.0, 0.9, 12);
    let run = |execution| {
        length_profile(
            &u,
            &chart,
            &grid,
            ProfileOptions {
                n_samples: 256,
                execution,
                ..ProfileOptions::default()
            },
        )
        .unwrap()
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}
