use greenmono_core::model_manifolds::{build_chart, ModelSpec};
use greenmono_core::tensor_core::{divergence_tensor, point_frame, ricci, MetricChart};
use greenmono_core::Result;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn chart(spec: &str) -> (ModelSpec, MetricChart) {
    let spec: ModelSpec = spec.parse().unwrap();
    let chart = build_chart(&spec).unwrap();
    (spec, chart)
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Radial and tangential Ricci eigenvalues of `dρ² + φ²g_S`.
fn ricci_oracle(spec: &ModelSpec, rho: f64) -> (f64, f64) {
    let n = spec.dim() as f64;
    let (phi, d1, d2) = spec.radial_profile().unwrap().eval3(rho);
    (-(n - 1.0) * d2 / phi, -d2 / phi + (n - 2.0) * (1.0 - d1 * d1) / (phi * phi))
}

fn scalar_curvature(chart: &MetricChart, p: &[f64]) -> Result<f64> {
    let frame = point_frame(chart, p)?;
    Ok(frame.ricci().trace(&frame))
}

fn check_radial_ricci(spec: &str, p: &[f64]) {
    let (spec, chart) = chart(spec);
    let r = norm(p);
    let (radial, tangential) = ricci_oracle(&spec, r);
    let ric = ricci(&chart, p).unwrap();
    let phi = spec.radial_profile().unwrap().phi(r);
    let x = DVector::from_iterator(p.len(), p.iter().map(|v| v / r));
    // unit tangential vector: Euclidean-orthogonal to x, rescaled by |x|/φ
    let mut t = DVector::zeros(p.len());
    t[0] = -p[1];
    t[1] = p[0];
    if t.norm() == 0.0 {
        t[1] = -p[2];
        t[2] = p[1];
    }
    let t = t.normalize() * (r / phi);
    let scale = 1.0 + radial.abs() + tangential.abs();
    assert!((ric.apply(&x, &x) - radial).abs() < 1e-7 * scale, "{:?}: {} vs {radial}", p, ric.apply(&x, &x));
    assert!((ric.apply(&t, &t) - tangential).abs() < 1e-7 * scale, "{:?}: {} vs {tangential}", p, ric.apply(&t, &t));
    assert!(ric.apply(&x, &t).abs() < 1e-7 * scale);
}

#[test]
fn concave_model_ricci_matches_the_warped_formula() {
    for spec in ["rotsym:3:0.8:1", "rotsym:4:0.5:2", "rotsym:5:0.9:0.5"] {
        let n = spec.split(':').nth(1).unwrap().parse::<usize>().unwrap();
        for r in [0.1, 0.7, 2.0, 15.0] {
            let mut p = vec![0.0; n];
            p[0] = 0.6 * r;
            p[1] = -0.8 * r;
            check_radial_ricci(spec, &p);
        }
    }
}

#[test]
fn cone_ricci_is_tangential_only() {
    let (spec, chart) = chart("cone:4:0.7");
    let p = [0.5, -1.0, 0.25, 2.0];
    let (radial, tangential) = ricci_oracle(&spec, norm(&p));
    assert_eq!(radial, 0.0);
    // (n−2)(1 − c²)/φ² with φ = c|x|
    assert!((tangential - 2.0 * 0.51 / (0.49 * norm(&p).powi(2))).abs() < 1e-12);
    check_radial_ricci("cone:4:0.7", &p);
    assert!(ricci(&chart, &p).unwrap().matrix().iter().all(|v| v.is_finite()));
}

#[test]
fn contracted_bianchi_identity() {
    // ∇^j R_ij = ½ ∂_i R
    for spec in ["rotsym:3:0.8:1", "rotsym:4:0.6:1.5", "warped:3:0.9:1.2:0.1"] {
        let (_, chart) = chart(spec);
        let n = chart.dim();
        let p: Vec<f64> = (0..n).map(|i| 0.9 - 0.35 * i as f64).collect();
        let h = 1e-3;
        let field = |q: &[f64]| -> Result<DMatrix<f64>> { Ok(ricci(&chart, q)?.matrix().clone()) };
        let div = divergence_tensor(&chart, &field, &p, h).unwrap();
        for i in 0..n {
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += h;
            b[i] -= h;
            let dr = (scalar_curvature(&chart, &a).unwrap() - scalar_curvature(&chart, &b).unwrap()) / (2.0 * h);
            let scale = 1.0 + dr.abs();
            assert!((div[i] - 0.5 * dr).abs() < 1e-5 * scale, "{spec} i={i}: {} vs {}", div[i], 0.5 * dr);
        }
    }
}

#[test]
fn scalar_curvature_of_the_warped_formula() {
    let (spec, chart) = chart("rotsym:4:0.6:1.5");
    for r in [0.2f64, 1.0, 5.0] {
        let p = [r / 2.0, r / 2.0, r / 2.0, r / 2.0];
        let (radial, tangential) = ricci_oracle(&spec, r);
        let expect = radial + 3.0 * tangential;
        let got = scalar_curvature(&chart, &p).unwrap();
        assert!((got - expect).abs() < 1e-7 * (1.0 + expect.abs()), "r={r}: {got} vs {expect}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ricci_is_symmetric_and_metric_positive(
        c in 0.3f64..0.99,
        a in 0.3f64..3.0,
        dir in prop::collection::vec(-1.0f64..1.0, 3),
        r in 0.05f64..20.0,
    ) {
        let len = norm(&dir);
        prop_assume!(len > 0.1);
        let p: Vec<f64> = dir.iter().map(|x| x / len * r).collect();
        let (_, chart) = chart(&format!("rotsym:3:{c}:{a}"));
        let g = chart.metric_at(&p);
        prop_assert!(g.clone().cholesky().is_some());
        let ric = ricci(&chart, &p).unwrap();
        let m = ric.matrix();
        prop_assert!((m - m.transpose()).abs().max() < 1e-12 * (1.0 + m.abs().max()));
    }

    #[test]
    fn concave_ricci_oracle_everywhere(
        c in 0.3f64..0.99,
        a in 0.3f64..3.0,
        r in 0.05f64..20.0,
        t in 0.0f64..std::f64::consts::TAU,
    ) {
        check_radial_ricci(&format!("rotsym:3:{c}:{a}"), &[r * t.cos(), r * t.sin(), 0.3 * r]);
    }
}
