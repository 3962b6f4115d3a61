//! Pointwise geometry of u: the trace-free Hessian `B = Hess u² − 2|∇u|² g`,
//! its normal/tangential split, and the second fundamental form of the level set.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::model_manifolds::GRADIENT_FLOOR;
use crate::tensor_core::{norm, point_frame, MetricChart, PointFrame, ScalarField, SymmetricTensor2};

/// Everything at `p` that follows from the exact 2-jets of u and g.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub frame: PointFrame,
    pub u: f64,
    /// `du` as a covector.
    pub du: DVector<f64>,
    /// `∇u` with the index raised.
    pub grad: DVector<f64>,
    pub grad_norm: f64,
    pub hess_u: SymmetricTensor2,
}

/// `1e-6 · u/|p|`: u/|p| is the size |∇u| has at p when u is comparable to distance.
pub fn gradient_floor(u: f64, p: &[f64]) -> f64 {
    GRADIENT_FLOOR * u.abs() / norm(p).max(f64::MIN_POSITIVE)
}

impl LocalGeometry {
    pub fn new(chart: &MetricChart, u: &dyn ScalarField, p: &[f64]) -> Result<Self> {
        let frame = point_frame(chart, p)?;
        let local = Self::from_frame(frame, u);
        let floor = gradient_floor(local.u, p);
        if !(local.grad_norm > floor) {
            return Err(GeomError::DegenerateGradient {
                point: p.to_vec(),
                grad_norm: local.grad_norm,
                floor,
            });
        }
        Ok(local)
    }

    /// No gradient-floor check; used for stencil neighbours of an accepted point.
    pub fn from_frame(frame: PointFrame, u: &dyn ScalarField) -> Self {
        let jet = u.jet(&frame.point);
        let du = DVector::from_column_slice(jet.grad());
        let grad = frame.raise(&du);
        let grad_norm = du.dot(&grad).max(0.0).sqrt();
        let hess_u = frame.hessian_of(&jet);
        LocalGeometry { u: jet.value(), du, grad, grad_norm, hess_u, frame }
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn grad_norm2(&self) -> f64 {
        self.grad_norm * self.grad_norm
    }

    /// `Hess u² = 2u Hess u + 2 du ⊗ du`.
    pub fn hess_u2(&self) -> SymmetricTensor2 {
        let outer = &self.du * self.du.transpose();
        SymmetricTensor2::new(self.hess_u.matrix() * (2.0 * self.u) + outer * 2.0)
    }

    pub fn b(&self) -> SymmetricTensor2 {
        SymmetricTensor2::new(self.hess_u2().matrix() - &self.frame.metric * (2.0 * self.grad_norm2()))
    }

    /// Unit normal `∇u/|∇u|` as a vector.
    pub fn normal(&self) -> DVector<f64> {
        &self.grad / self.grad_norm
    }

    pub fn normal_covector(&self) -> DVector<f64> {
        &self.du / self.grad_norm
    }

    /// `d|∇u|² = 2 Hess u(∇u, ·)`.
    pub fn d_grad_norm2(&self) -> DVector<f64> {
        self.hess_u.contract(&self.grad) * 2.0
    }

    /// `d|∇u| = Hess u(n, ·)`.
    pub fn d_grad_norm(&self) -> DVector<f64> {
        self.hess_u.contract(&self.normal())
    }

    pub fn ricci(&self) -> SymmetricTensor2 {
        self.frame.ricci()
    }
}

/// g-orthonormal basis of `n^⊥`: Gram–Schmidt on the coordinate vectors, the
/// coordinate with the largest `|n^i|` left out.
pub fn tangent_basis(frame: &PointFrame, normal: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = frame.dim();
    let drop = normal.iamax();
    let mut basis: Vec<DVector<f64>> = vec![normal.clone()];
    for i in (0..n).filter(|&i| i != drop) {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        // two passes keep the Gram matrix at rounding level
        for _ in 0..2 {
            for b in &basis {
                let c = frame.inner(&v, b);
                v -= b * c;
            }
        }
        let len = frame.inner(&v, &v).sqrt();
        basis.push(v / len);
    }
    basis.remove(0);
    basis
}

/// Components of a covariant 2-tensor in a list of vectors.
fn restrict(t: &DMatrix<f64>, vs: &[DVector<f64>]) -> DMatrix<f64> {
    let k = vs.len();
    DMatrix::from_fn(k, k, |a, b| vs[a].dot(&(t * &vs[b])))
}

#[derive(Debug, Clone)]
pub struct BDecomposition {
    pub b: SymmetricTensor2,
    /// `B(n, ·)` as a covector.
    pub b_of_n: DVector<f64>,
    /// `B(n)` minus its normal part, as a covector.
    pub b_of_n_tangent: DVector<f64>,
    pub b_nn: f64,
    pub norm2_b: f64,
    /// `|B₀|²` for the tangential restriction `B₀ = B|_{n^⊥}`.
    pub norm2_b0: f64,
    pub norm2_b_of_n: f64,
    pub norm2_b_of_n_tangent: f64,
    /// `tr_g B = Δu² − 2n|∇u|²`.
    pub trace_b: f64,
    /// `B₀` in the tangent basis.
    pub b0: DMatrix<f64>,
    /// Largest entry of `Hess(u·u) − (2u Hess u + 2du⊗du)`, relative to `|Hess u²|`.
    pub route_discrepancy: f64,
}

impl BDecomposition {
    pub fn from_local(local: &LocalGeometry, tangents: &[DVector<f64>]) -> Self {
        let frame = &local.frame;
        let b = local.b();
        let nv = local.normal();
        let b_of_n = b.contract(&nv);
        let b_nn = b_of_n.dot(&nv);
        let b_of_n_tangent = &b_of_n - local.normal_covector() * b_nn;
        let norm2_b_of_n_tangent: f64 = tangents.iter().map(|t| b_of_n.dot(t).powi(2)).sum();
        let b0 = restrict(b.matrix(), tangents);
        BDecomposition {
            norm2_b: b.norm2(frame),
            norm2_b0: b0.norm_squared(),
            norm2_b_of_n: norm2_b_of_n_tangent + b_nn * b_nn,
            norm2_b_of_n_tangent,
            trace_b: b.trace(frame),
            b_of_n,
            b_of_n_tangent,
            b_nn,
            b0,
            route_discrepancy: 0.0,
            b,
        }
    }
}

pub fn b_decomposition(chart: &MetricChart, u: &dyn ScalarField, p: &[f64]) -> Result<BDecomposition> {
    let local = LocalGeometry::new(chart, u, p)?;
    let tangents = tangent_basis(&local.frame, &local.normal());
    let mut dec = BDecomposition::from_local(&local, &tangents);
    let jet = u.jet(p);
    let direct = local.frame.hessian_of(&(jet * jet));
    let via = local.hess_u2();
    let scale = via.matrix().amax().max(f64::MIN_POSITIVE);
    dec.route_discrepancy = (direct.matrix() - via.matrix()).amax() / scale;
    Ok(dec)
}

/// Finite-difference stencil for derivatives of the unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalStencil {
    Central2,
    Central4,
}

impl NormalStencil {
    /// Furthest coordinate offset, in units of the step.
    pub fn reach(self) -> f64 {
        match self {
            NormalStencil::Central2 => 1.0,
            NormalStencil::Central4 => 2.0,
        }
    }
}

fn normal_covector_at(chart: &MetricChart, u: &dyn ScalarField, q: &[f64]) -> Result<DVector<f64>> {
    let frame = point_frame(chart, q)?;
    let du = DVector::from_column_slice(u.jet(q).grad());
    let len = frame.norm2_covector(&du).sqrt();
    Ok(du / len)
}

/// `∂_i n_j` (row i) of the normal covector field by central differences.
pub fn normal_derivative(
    chart: &MetricChart,
    u: &dyn ScalarField,
    p: &[f64],
    h: f64,
    stencil: NormalStencil,
) -> Result<DMatrix<f64>> {
    let n = p.len();
    let reach = stencil.reach() * h;
    chart.check_stencil(p, reach)?;
    u.admissible(p, reach)?;
    let mut out = DMatrix::zeros(n, n);
    let mut q = p.to_vec();
    let offsets: &[(f64, f64)] = match stencil {
        NormalStencil::Central2 => &[(1.0, 0.5), (-1.0, -0.5)],
        NormalStencil::Central4 => &[(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)],
    };
    for i in 0..n {
        let mut row = DVector::zeros(n);
        for &(k, w) in offsets {
            q[i] = p[i] + k * h;
            row += normal_covector_at(chart, u, &q)? * w;
        }
        q[i] = p[i];
        out.set_row(i, &(row / h).transpose());
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LevelSetFrame {
    /// Unit normal as a vector.
    pub normal: DVector<f64>,
    pub tangent_basis: Vec<DVector<f64>>,
    /// II in the tangent basis.
    pub ii: DMatrix<f64>,
    pub mean_curvature: f64,
    pub ii0: DMatrix<f64>,
    pub norm2_ii0: f64,
    /// `(B₀ + B(n,n)/(n−1) g₀) / (2u|∇u|)`, the algebraic route to II₀.
    pub ii0_reconstructed: DMatrix<f64>,
    pub step: f64,
}

impl LevelSetFrame {
    /// Assemble II from `∂_i n_j`: `II_ab = e_a^i e_b^j (∂_i n_j − Γ^k_{ij} n_k)`.
    pub fn from_normal_derivative(
        local: &LocalGeometry,
        dec: &BDecomposition,
        tangents: Vec<DVector<f64>>,
        dn: &DMatrix<f64>,
        step: f64,
    ) -> Self {
        let frame = &local.frame;
        let dim = local.dim();
        let ncov = local.normal_covector();
        let cov = DMatrix::from_fn(dim, dim, |i, j| {
            let mut c = dn[(i, j)];
            for k in 0..dim {
                c -= frame.gamma(k, i, j) * ncov[k];
            }
            c
        });
        let ii = restrict(&cov, &tangents);
        let ii = (&ii + ii.transpose()) * 0.5;
        let m = dim - 1;
        let mean_curvature = ii.trace();
        let mut ii0 = &ii - DMatrix::identity(m, m) * (mean_curvature / m as f64);
        // pin the trace to exactly zero
        let rest: f64 = (0..m - 1).map(|a| ii0[(a, a)]).sum();
        ii0[(m - 1, m - 1)] = -rest;
        let scale = 2.0 * local.u * local.grad_norm;
        let recon = (&dec.b0 + DMatrix::identity(m, m) * (dec.b_nn / m as f64)) / scale;
        LevelSetFrame {
            normal: local.normal(),
            tangent_basis: tangents,
            norm2_ii0: ii0.norm_squared(),
            ii,
            mean_curvature,
            ii0,
            ii0_reconstructed: recon,
            step,
        }
    }
}

/// Default normal-derivative step `1e-4 · max(1, |p|)` with the 5-point stencil.
pub fn level_set_frame(chart: &MetricChart, u: &dyn ScalarField, p: &[f64]) -> Result<LevelSetFrame> {
    level_set_frame_with(chart, u, p, 1e-4 * norm(p).max(1.0), NormalStencil::Central4)
}

pub fn level_set_frame_with(
    chart: &MetricChart,
    u: &dyn ScalarField,
    p: &[f64],
    h: f64,
    stencil: NormalStencil,
) -> Result<LevelSetFrame> {
    let local = LocalGeometry::new(chart, u, p)?;
    let tangents = tangent_basis(&local.frame, &local.normal());
    let dec = BDecomposition::from_local(&local, &tangents);
    let dn = normal_derivative(chart, u, p, h, stencil)?;
    Ok(LevelSetFrame::from_normal_derivative(&local, &dec, tangents, &dn, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub n: usize,
    pub beta: f64,
    pub tilde_beta: f64,
}

impl BetaParams {
    pub fn critical(n: usize) -> f64 {
        (n as f64 - 2.0) / (n as f64 - 1.0)
    }
}

/// `β̃ = 1 + (β−1)(n−1)`; β within rounding of `(n−2)/(n−1)` gives `β̃ = 0` exactly.
pub fn tilde_beta(n: usize, beta: f64) -> Result<BetaParams> {
    if n <= 2 {
        return Err(GeomError::UnsupportedDimension(n));
    }
    let critical = BetaParams::critical(n);
    if (beta - critical).abs() <= 4.0 * f64::EPSILON * critical {
        return Ok(BetaParams { n, beta, tilde_beta: 0.0 });
    }
    if !(beta >= critical) {
        return Err(GeomError::BetaBelowCritical { n, beta, critical });
    }
    Ok(BetaParams { n, beta, tilde_beta: 1.0 + (beta - 1.0) * (n as f64 - 1.0) })
}

/// Pointwise ingredients of the monotonicity integrands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPointQuantities {
    pub u: f64,
    pub grad_norm: f64,
    pub norm2_ii0: f64,
    pub ric_nn: f64,
    /// `|B(n)|²`.
    pub b_n2: f64,
    /// `|B(n)^T|²`.
    pub b_nt2: f64,
}

impl LevelPointQuantities {
    pub fn at(chart: &MetricChart, u: &dyn ScalarField, p: &[f64]) -> Result<Self> {
        Self::at_with_step(chart, u, p, 1e-4 * norm(p).max(1.0))
    }

    /// As [`LevelPointQuantities::at`] with normal-derivative step `h`.
    pub fn at_with_step(chart: &MetricChart, u: &dyn ScalarField, p: &[f64], h: f64) -> Result<Self> {
        let local = LocalGeometry::new(chart, u, p)?;
        let tangents = tangent_basis(&local.frame, &local.normal());
        let dec = BDecomposition::from_local(&local, &tangents);
        let dn = normal_derivative(chart, u, p, h, NormalStencil::Central4)?;
        let lsf = LevelSetFrame::from_normal_derivative(&local, &dec, tangents, &dn, h);
        let nv = local.normal();
        Ok(LevelPointQuantities {
            u: local.u,
            grad_norm: local.grad_norm,
            norm2_ii0: lsf.norm2_ii0,
            ric_nn: local.ricci().apply(&nv, &nv),
            b_n2: dec.norm2_b_of_n,
            b_nt2: dec.norm2_b_of_n_tangent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::RadialGreens;
    use crate::model_manifolds::{build_chart, ExampleFunction, ModelSpec, Profile, WarpProfile};
    use crate::tensor_core::laplacian;
    use proptest::prelude::*;

    struct Squared<'a>(&'a dyn ScalarField);

    impl ScalarField for Squared<'_> {
        fn jet(&self, p: &[f64]) -> crate::Jet {
            let j = self.0.jet(p);
            j * j
        }
    }

    fn concave() -> ModelSpec {
        ModelSpec::RotSym { n: 3, profile: Profile::Concave { c: 0.8, a: 1.0 } }
    }

    #[test]
    fn euclidean_and_cone_have_vanishing_b() {
        for spec in [ModelSpec::Euclidean { n: 4 }, ModelSpec::Cone { n: 3, c: 0.9 }] {
            let chart = build_chart(&spec).unwrap();
            let u = ExampleFunction::for_model(crate::model_manifolds::ExampleId::RadialU, &spec).unwrap();
            let p: Vec<f64> = [0.4, -0.7, 0.3, 0.2][..spec.dim()].to_vec();
            let dec = b_decomposition(&chart, &u, &p).unwrap();
            assert!(dec.norm2_b.sqrt() < 1e-12, "{spec}: {}", dec.norm2_b);
            assert!(dec.route_discrepancy < 1e-13);
        }
    }

    #[test]
    fn shifted_sphere_trace_is_the_standing_equation_defect() {
        let chart = build_chart(&ModelSpec::Euclidean { n: 3 }).unwrap();
        let u = ExampleFunction::ex1();
        let p = [0.3, 0.7, -0.2];
        let dec = b_decomposition(&chart, &u, &p).unwrap();
        let local = LocalGeometry::new(&chart, &u, &p).unwrap();
        let defect = laplacian(&chart, &Squared(&u), &p).unwrap() - 6.0 * local.grad_norm2();
        assert!(dec.norm2_b > 1e-2);
        assert!((dec.trace_b - defect).abs() < 1e-13);
        assert!(defect.abs() > 0.1);
        // level sets are spheres all the same
        let lsf = level_set_frame(&chart, &u, &p).unwrap();
        assert!(lsf.norm2_ii0.sqrt() < 1e-8, "{}", lsf.norm2_ii0);
    }

    #[test]
    fn round_sphere_second_fundamental_form() {
        let chart = build_chart(&ModelSpec::Euclidean { n: 3 }).unwrap();
        let p = [1.2, -0.4, 0.9];
        let r = norm(&p);
        let lsf = level_set_frame(&chart, &ExampleFunction::radial(1.0), &p).unwrap();
        assert!((&lsf.ii - DMatrix::identity(2, 2) / r).amax() < 1e-9);
        assert!((lsf.mean_curvature - 2.0 / r).abs() < 1e-9);
        assert!(lsf.norm2_ii0 < 1e-18);
        assert_eq!(lsf.ii0.trace(), 0.0);
    }

    #[test]
    fn cylinder_levels_of_u1() {
        let spec = ModelSpec::ProductR3S1 { length: 2.0 * std::f64::consts::PI };
        let chart = build_chart(&spec).unwrap();
        let u = ExampleFunction::u1(2.0 * std::f64::consts::PI);
        for r in [1.0, 3.0, 20.0] {
            let p = [0.6 * r, 0.0, 0.8 * r, 1.1];
            let lsf = level_set_frame(&chart, &u, &p).unwrap();
            let mut k: Vec<f64> = lsf.ii.symmetric_eigenvalues().iter().copied().collect();
            k.sort_by(f64::total_cmp);
            assert!(k[0].abs() < 1e-9 && (k[1] * r - 1.0).abs() < 1e-7 && (k[2] * r - 1.0).abs() < 1e-7);
            assert!((lsf.norm2_ii0 * r * r / (2.0 / 3.0) - 1.0).abs() < 1e-7, "{}", lsf.norm2_ii0);
        }
    }

    #[test]
    fn warped_levels_are_umbilic() {
        let e = 1.3;
        let spec = ModelSpec::Warped { n: 3, warp: WarpProfile { c: 0.9, exponent: e, anisotropy: 0.2 } };
        let chart = build_chart(&spec).unwrap();
        let p = [0.5, 0.9, -0.6];
        let r = norm(&p);
        let lsf = level_set_frame(&chart, &ExampleFunction::radial(1.0), &p).unwrap();
        // II = ∂_r log f · g₀ with ∂_r log f = e/r
        assert!((&lsf.ii - DMatrix::identity(2, 2) * (e / r)).amax() < 1e-8, "{}", lsf.ii);
        assert!(lsf.norm2_ii0.sqrt() < 1e-8);
    }

    #[test]
    fn b0_identities_on_concave_model() {
        let spec = concave();
        let chart = build_chart(&spec).unwrap();
        let u = RadialGreens::for_spec(&spec).unwrap();
        for p in [[0.4, 0.2, -0.3], [1.5, -0.7, 0.2], [3.0, 2.0, 1.0]] {
            let lsf = level_set_frame(&chart, &u, &p).unwrap();
            let dec = b_decomposition(&chart, &u, &p).unwrap();
            assert!(dec.norm2_b > 1e-6, "B should not vanish off the cone");
            assert!(dec.trace_b.abs() < 1e-10 * dec.norm2_b.sqrt().max(1.0));
            check_decomposition(&chart, &u, &p, &lsf, &dec);
        }
    }

    fn check_decomposition(chart: &MetricChart, u: &dyn ScalarField, p: &[f64], lsf: &LevelSetFrame, dec: &BDecomposition) {
        let local = LocalGeometry::new(chart, u, p).unwrap();
        let n = p.len() as f64;
        let lhs = 4.0 * local.u.powi(2) * local.grad_norm2() * lsf.norm2_ii0;
        let first = dec.norm2_b0 - dec.b_nn.powi(2) / (n - 1.0);
        let second = dec.norm2_b - n / (n - 1.0) * dec.norm2_b_of_n - (n - 2.0) / (n - 1.0) * dec.norm2_b_of_n_tangent;
        let scale = dec.norm2_b.max(1e-300);
        assert!((lhs - first).abs() < 1e-6 * scale, "{lhs} {first}");
        assert!((lhs - second).abs() < 1e-6 * scale, "{lhs} {second}");
        assert!(
            (dec.norm2_b - dec.norm2_b0 - 2.0 * dec.norm2_b_of_n_tangent - dec.b_nn.powi(2)).abs()
                < 1e-10 * scale + dec.trace_b.abs()
        );
        assert_eq!(dec.norm2_b_of_n, dec.norm2_b_of_n_tangent + dec.b_nn * dec.b_nn);
        let recon_err = (&lsf.ii0 - &lsf.ii0_reconstructed).amax();
        assert!(recon_err < 1e-6 * (lsf.ii.amax() + 1.0), "{recon_err}");
    }

    #[test]
    fn dilation_scales_ii0() {
        let chart = build_chart(&ModelSpec::Euclidean { n: 3 }).unwrap();
        // ex1 is 1-homogeneous, so p → λp rescales its level sets;
        // compose with a non-homogeneous tilt to get non-umbilic levels
        struct Tilted;
        impl ScalarField for Tilted {
            fn jet(&self, p: &[f64]) -> crate::Jet {
                let x = crate::Jet::coordinates(p);
                (x[0] * x[0] + x[1] * x[1] * 2.0 + x[2] * x[2] * 3.0).sqrt()
            }
        }
        let p = [0.3, 0.5, -0.4];
        let base = level_set_frame(&chart, &Tilted, &p).unwrap().norm2_ii0;
        assert!(base > 1e-3);
        for lambda in [0.5, 3.0, 10.0] {
            let q: Vec<f64> = p.iter().map(|x| x * lambda).collect();
            let scaled = level_set_frame(&chart, &Tilted, &q).unwrap().norm2_ii0;
            assert!((scaled * lambda * lambda / base - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn tilde_beta_examples() {
        assert_eq!(tilde_beta(3, 1.0).unwrap().tilde_beta, 1.0);
        assert_eq!(tilde_beta(4, 2.0).unwrap().tilde_beta, 4.0);
        for n in 3..=6 {
            assert_eq!(tilde_beta(n, BetaParams::critical(n)).unwrap().tilde_beta, 0.0);
        }
        assert!(matches!(tilde_beta(3, 0.49), Err(GeomError::BetaBelowCritical { .. })));
        assert!(matches!(tilde_beta(2, 1.0), Err(GeomError::UnsupportedDimension(2))));
    }

    #[test]
    fn degenerate_gradient_is_reported() {
        let chart = build_chart(&ModelSpec::Euclidean { n: 3 }).unwrap();
        struct Flat;
        impl ScalarField for Flat {
            fn jet(&self, p: &[f64]) -> crate::Jet {
                crate::Jet::constant(p.len(), 1.0)
            }
        }
        assert!(matches!(
            b_decomposition(&chart, &Flat, &[0.5, 0.5, 0.5]),
            Err(GeomError::DegenerateGradient { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tilde_beta_nonnegative_above_critical(n in 3usize..=6, extra in 0.0f64..5.0) {
            let beta = BetaParams::critical(n) + extra;
            let tb = tilde_beta(n, beta).unwrap();
            prop_assert!(tb.tilde_beta >= 0.0);
            prop_assert!((tb.tilde_beta - (1.0 + (beta - 1.0) * (n as f64 - 1.0))).abs() < 1e-12);
        }

        #[test]
        fn tilde_beta_rejects_below_critical(n in 3usize..=6, gap in 1e-6f64..1.0) {
            let beta = BetaParams::critical(n) - gap;
            let rejected = matches!(tilde_beta(n, beta), Err(GeomError::BetaBelowCritical { .. }));
            prop_assert!(rejected);
        }

        #[test]
        fn frame_is_orthonormal_and_ii0_tracefree(
            x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0, w in -2.0f64..2.0,
        ) {
            let p = [x, y, z, w];
            prop_assume!(norm(&p) > 0.2);
            let spec = ModelSpec::RotSym { n: 4, profile: Profile::Concave { c: 0.7, a: 0.8 } };
            let chart = build_chart(&spec).unwrap();
            struct Skew;
            impl ScalarField for Skew {
                fn jet(&self, p: &[f64]) -> crate::Jet {
                    let x = crate::Jet::coordinates(p);
                    (x[0] * x[0] * 1.5 + x[1] * x[1] + x[2] * x[2] + x[3] * x[3] * 0.6 + x[0] * x[1] * 0.3).sqrt()
                }
            }
            let lsf = level_set_frame(&chart, &Skew, &p).unwrap();
            let frame = point_frame(&chart, &p).unwrap();
            for (a, ta) in lsf.tangent_basis.iter().enumerate() {
                prop_assert!(frame.inner(ta, &lsf.normal).abs() < 1e-12);
                for (b, tb) in lsf.tangent_basis.iter().enumerate() {
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((frame.inner(ta, tb) - want).abs() < 1e-12);
                }
            }
            prop_assert_eq!(lsf.ii0.trace(), 0.0);
            let dec = b_decomposition(&chart, &Skew, &p).unwrap();
            prop_assert_eq!(dec.norm2_b_of_n, dec.norm2_b_of_n_tangent + dec.b_nn * dec.b_nn);
            let split = dec.norm2_b0 + 2.0 * dec.norm2_b_of_n_tangent + dec.b_nn.powi(2);
            prop_assert!((dec.norm2_b - split).abs() < 1e-10 * dec.norm2_b.max(1.0));
        }
    }
}
