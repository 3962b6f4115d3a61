use std::f64::consts::PI;

use greenmono_core::geom_quantities::BetaParams;
use greenmono_core::greens::USource;
use greenmono_core::model_manifolds::ModelSpec;
use greenmono_core::monotonicity::*;
use greenmono_core::numeric::unit_sphere_area;
use proptest::prelude::*;

fn sets(spec: &str, u: &str) -> LevelSets {
    LevelSets::new(&spec.parse::<ModelSpec>().unwrap(), u.parse::<USource>().unwrap()).unwrap()
}

fn betas(n: usize) -> Vec<f64> {
    vec![BetaParams::critical(n), 1.0, 2.0, 3.0]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn euclidean_profiles_take_the_flat_values() {
    let grid = RadiusGrid::new(1e-2, 1e2, 2f64.powf(0.5)).unwrap();
    for n in 3..=5 {
        let omega = unit_sphere_area(n);
        for u in ["analytic_radial", "greens"] {
            let prof = a_v_profiles(&sets(&format!("euclidean:{n}"), u), &grid, &betas(n)).unwrap();
            for l in &prof.levels {
                for b in 0..4 {
                    assert!(rel(l.a_beta[b], omega) < 1e-8, "n={n} {u} r={} A={}", l.r, l.a_beta[b]);
                    assert!(rel(l.v_beta[b], omega / (n as f64 - 2.0)) < 1e-8, "n={n} {u} r={} V={}", l.r, l.v_beta[b]);
                    assert!(l.da_dr[b].value.abs() <= 10.0 * l.da_dr[b].error() + 1e-9 * omega / l.r);
                }
            }
            assert!(check_v_ode(&prof).pass());
        }
    }
}

#[test]
fn cone_profiles_are_scale_invariant() {
    // u = c²ρ, |∇u| = c², Vol(u=r) = ωc²ρ²  ⇒  A_β = ωc^{2β} = V_β
    let c2: f64 = 0.81;
    let omega = 4.0 * PI;
    let grid = RadiusGrid::new(1e-1, 1e1, 2f64.powf(0.25)).unwrap();
    for u in ["analytic_radial", "greens"] {
        let s = sets("cone:3:0.9", u);
        let prof = a_v_profiles(&s, &grid, &betas(3)).unwrap();
        for (b, beta) in betas(3).into_iter().enumerate() {
            let oracle = omega * c2.powf(beta);
            for l in &prof.levels {
                assert!(rel(l.a_beta[b], oracle) < 1e-6, "{u} β={beta} r={} A={}", l.r, l.a_beta[b]);
                assert!(rel(l.v_beta[b], oracle) < 1e-6, "{u} β={beta} r={} V={}", l.r, l.v_beta[b]);
                assert!(l.a_beta[b] < omega);
            }
        }
        assert!(prof.boundedness().holds(BOUNDEDNESS_TOLERANCE));
    }
    let radial = sets("cone:3:0.9", "greens");
    let u = radial.radial().unwrap();
    for rho in [1e-2, 1.0, 1e2, 1e4] {
        assert!(rel(u.u3(rho).0, c2 * rho) < 1e-8);
    }
}

#[test]
fn cone_level_area_two_ways() {
    let s = sets("cone:3:0.9", "greens");
    for r in [0.05, 1.0, 30.0] {
        let closed = s.level_area(r).unwrap();
        let param = s.level_integral_parameterized(r, |_| 1.0).unwrap();
        // ρ = r/c², area ωc²ρ²
        assert!(rel(closed, 4.0 * PI * 0.81 * (r / 0.81) * (r / 0.81)) < 1e-8);
        assert!(rel(param, closed) < 1e-8, "r={r}: {param} vs {closed}");
    }
}

#[test]
fn euclidean_bulk_integrals() {
    let s = sets("euclidean:3", "analytic_radial");
    let shell = bulk_integral(&s, 1.0, 2.0, |_| 1.0).unwrap();
    assert!(rel(shell.shells, 4.0 / 3.0 * PI * 7.0) < 1e-10);
    for n in 3..=5 {
        let s = sets(&format!("euclidean:{n}"), "greens");
        let omega = unit_sphere_area(n);
        let beta = 1.5;
        let r = 2.0;
        let b = bulk_integral(&s, 0.0, r, |q| q.grad_norm.powf(2.0 + beta) / (q.u * q.u)).unwrap();
        let oracle = omega * r.powi(n as i32 - 2) / (n as f64 - 2.0);
        assert!(rel(b.shells, oracle) < 1e-8, "n={n}: {} vs {oracle}", b.shells);
        assert!(rel(b.volume, oracle) < 1e-8);
    }
}

#[test]
fn flat_and_conical_statements_are_trivial() {
    let grid = RadiusGrid::new(1e-1, 1e2, 2f64.powf(0.25)).unwrap();
    for spec in ["euclidean:3", "euclidean:4", "cone:3:0.9"] {
        let s = sets(spec, "analytic_radial");
        let suite = monotone_suite(&s, &grid, &betas(s.n())).unwrap();
        assert!(suite.pass(), "{spec}");
        for r in &suite.reports {
            for row in &r.rows {
                // the cone's r2n side is its pole boundary term alone
                if !(spec.starts_with("cone") && r.quantity_id == QuantityId::R2nAMinusOmega) {
                    assert!(row.rhs_integral.abs() <= row.budget.max(1e-12), "{spec} {} {row:?}", r.quantity_id);
                }
                assert!(!row.violation_flag);
            }
        }
        let applies = !spec.starts_with("cone");
        assert!(suite.pole_limits.iter().all(|p| p.applies == applies));
    }
}

#[test]
fn cone_weighted_area_rises_to_zero_from_below() {
    let grid = RadiusGrid::new(1e-1, 1e2, 2f64.powf(0.25)).unwrap();
    let second = mono_second(&sets("cone:3:0.9", "greens"), &grid, 1.0).unwrap();
    let values = second.second_display.values();
    assert!(values.iter().all(|v| *v < 0.0));
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    // g ≡ (2−n)A, not (2−n)ω, at a conical apex
    assert!(!second.pole_limit.applies);
    assert!(rel(second.pole_limit.g_pole, -4.0 * PI * 0.81) < 1e-8);
}

#[test]
fn concave_model_matches_both_sides() {
    for spec in ["rotsym:3:0.8:1", "rotsym:4:0.8:1"] {
        let s = sets(spec, "greens");
        let suite = monotone_suite(&s, &RadiusGrid::default(), &betas(s.n())).unwrap();
        assert!(suite.pass(), "{spec}");
        assert!(suite.nonneg_ricci);
        assert!(suite.boundedness.holds(BOUNDEDNESS_TOLERANCE));
        for r in &suite.reports {
            assert!(r.max_match_error() < MATCH_TOLERANCE, "{spec} {} β={}: {}", r.quantity_id, r.beta, r.max_match_error());
            assert!(r.violations.is_empty());
        }
        for p in &suite.pole_limits {
            assert!(p.applies && p.rel_error < POLE_LIMIT_TOLERANCE, "{p:?}");
        }
        assert!(suite.v_ode.max_rel_error() < 1e-6);
        let a = suite.reports_for(QuantityId::A);
        for rep in a {
            assert!(rep.values().windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
        }
    }
}

#[test]
fn critical_beta_is_finite_with_zero_weight() {
    let s = sets("rotsym:3:0.8:1", "greens");
    let grid = RadiusGrid::new(1e-2, 1e1, 2f64.powf(0.25)).unwrap();
    let report = mono_first(&s, &grid, 0.5).unwrap();
    assert_eq!(report.tilde_beta, 0.0);
    assert!(report.rows.iter().all(|r| r.value.is_finite() && r.rhs_integral.is_finite()));
    assert!(report.pass(MATCH_TOLERANCE));
}

#[test]
fn report_csv_has_the_fixed_columns() {
    let s = sets("euclidean:3", "analytic_radial");
    let grid = RadiusGrid::new(1.0, 10.0, 1.5).unwrap();
    let rep = mono_first(&s, &grid, 1.0).unwrap();
    let csv = monotone_csv(&[&rep], &["header".to_string()]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# header"));
    assert_eq!(
        lines.next(),
        Some("beta,r,value,lhs_derivative,rhs_integral,match_error,violation_flag,match_error_adjusted,budget")
    );
    assert_eq!(lines.count(), grid.levels().len());
}

#[test]
fn product_u1_is_not_asymptotically_umbilic() {
    let s = sets(&format!("product_r3_s1:{}", 2.0 * PI), "example:u1");
    let rep = umbilicity_study(&s, &[1e2, 1e3], LevelParameter::USquared).unwrap();
    for row in &rep.rows {
        assert!((row.normalized - 2.0 / 3.0).abs() < 1e-9, "{row:?}");
        assert!((row.functional - 1.0 / 3.0).abs() < 1e-9, "{row:?}");
    }
    // on {u₁² = r} the mean of |II₀|² is (2/3)/r²
    let ii = s.level_integral(10f64.sqrt(), |q| q.norm2_ii0).unwrap();
    let area = s.level_area(10f64.sqrt()).unwrap();
    assert!(rel(ii, 2.0 / 3.0 / 100.0 * area) < 1e-9);
}

#[test]
fn product_u2_levels_are_umbilic() {
    let s = sets(&format!("product_r3_s1:{}", 2.0 * PI), "example:u2");
    for r in [1.0, 1e2, 1e3] {
        assert!(max_trace_free_ii(&s, r, 200, 11).unwrap() < 1e-6);
    }
    let row = umbilicity_functional(&s, 1e3, LevelParameter::U).unwrap();
    assert!(row.functional < 1e-6);
    assert!(u1_squared_over_u2(2.0 * PI, 1e4, 100, 5).unwrap() < 1e-3);
}

#[test]
fn product_level_area_two_ways() {
    for u in ["example:u1", "example:u2"] {
        let s = sets("product_r3_s1:1", u);
        for r in [0.3, 2.0, 50.0] {
            let closed = s.level_area(r).unwrap();
            let param = s.level_integral_parameterized(r, |_| 1.0).unwrap();
            assert!(rel(param, closed) < 1e-8, "{u} r={r}");
        }
    }
}

#[test]
fn volume_growth_oracles() {
    let grid = RadiusGrid::new(1.0, 1e3, 10.0).unwrap();
    let e = volume_growth(&"euclidean:4".parse().unwrap(), &grid).unwrap();
    assert!(e.ratio.iter().all(|v| rel(*v, unit_sphere_area(4) / 4.0) < 1e-10));
    let c = volume_growth(&"cone:3:0.5".parse().unwrap(), &grid).unwrap();
    assert!(c.ratio.iter().all(|v| rel(*v, 0.25 * 4.0 * PI / 3.0) < 1e-10));
    let p = volume_growth(&format!("product_r3_s1:{}", 2.0 * PI).parse().unwrap(), &grid).unwrap();
    assert!(p.ratio.windows(2).all(|w| w[1] < w[0]));
    assert!(p.tail < 1e-1);
}

#[test]
fn bad_grids_and_betas_are_rejected() {
    assert!(RadiusGrid::new(0.0, 1.0, 1.1).is_err());
    assert!(RadiusGrid::new(1.0, 0.5, 1.1).is_err());
    assert!(RadiusGrid::new(1.0, 2.0, 1.0).is_err());
    assert!("1:2".parse::<RadiusGrid>().is_err());
    let s = sets("euclidean:3", "analytic_radial");
    assert!(mono_first(&s, &RadiusGrid::default(), 0.4).is_err());
    assert!(mono_first(&s, &RadiusGrid::new(1.0, 1.5, 1.2).unwrap(), 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_text_round_trips(a in 1e-4f64..1.0, span in 1.5f64..1e4, q in 1.01f64..3.0) {
        let g = RadiusGrid::new(a, a * span, q).unwrap();
        let back: RadiusGrid = g.to_string().parse().unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn sphere_rules_integrate_quadratics(dim in 2usize..7, m in 3usize..8) {
        let rule = sphere_rule(dim, m);
        let omega = unit_sphere_area(dim);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        prop_assert!(rel(total, omega) < 1e-12);
        let x0: f64 = rule.iter().map(|(x, w)| w * x[0] * x[0]).sum();
        prop_assert!(rel(x0, omega / dim as f64) < 1e-12);
    }

    #[test]
    fn flat_area_is_omega_at_any_beta(n in 3usize..6, t in 0.0f64..1.0, r in 1e-3f64..1e3) {
        let beta = BetaParams::critical(n) + t * 3.0;
        let s = sets(&format!("euclidean:{n}"), "greens");
        let flux = s.level_integral(r, |q| q.grad_norm.powf(1.0 + beta)).unwrap();
        prop_assert!(rel(flux * r.powi(1 - n as i32), unit_sphere_area(n)) < 1e-9);
    }

    #[test]
    fn concave_integrand_is_nonnegative(rho in 1e-3f64..1e3, t in 0.0f64..1.0) {
        let s = sets("rotsym:3:0.8:1", "greens");
        let u = s.radial().unwrap();
        let level = u.u3(rho).0;
        let beta = 0.5 + 3.0 * t;
        let bp = greenmono_core::geom_quantities::tilde_beta(3, beta).unwrap();
        let pts = s.level_points(level).unwrap();
        let q = greenmono_core::geom_quantities::LevelPointQuantities::at(s.chart(), s.field(), &pts[0].point).unwrap();
        prop_assert!(curvature_integrand(&q, &bp) >= -1e-9);
    }
}
