//! Chart-based Riemannian tensor calculus.
//!
//! Every manifold is described by a single coordinate chart carrying a
//! metric-matrix field. Derivatives of the metric come either from exact jets
//! (`DerivativeMode::Analytic`) or from 5-point central stencils on metric
//! values (`DerivativeMode::FiniteDifference`). All tensors are stored
//! covariant in chart coordinates; indices are raised on demand with the
//! inverse metric.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::jet::{Jet, MAX_DIM};
use crate::numeric::{d1_fourth, d2_fourth, D1_FOURTH};

/// Supplies metric components as jets in the chart coordinates.
pub trait MetricSource: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Row-major `dim × dim` metric components at `x`.
    fn metric_jets(&self, x: &[Jet]) -> Vec<Jet>;
}

/// A scalar field with exact first and second derivatives.
pub trait ScalarField: Send + Sync {
    fn jet(&self, p: &[f64]) -> Jet;

    fn value(&self, p: &[f64]) -> f64 {
        self.jet(p).value()
    }

    /// Fails when a stencil of half-width `reach` around `p` would leave the
    /// region where the field is smooth.
    fn admissible(&self, _p: &[f64], _reach: f64) -> Result<()> {
        Ok(())
    }

    fn label(&self) -> String {
        "u".into()
    }
}

/// Wraps a plain function as a [`ScalarField`] whose derivatives come from
/// 5-point central differences.
pub struct FdScalarField<F> {
    f: F,
    step: f64,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FdScalarField<F> {
    pub fn new(f: F, step: f64) -> Self {
        FdScalarField { f, step }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for FdScalarField<F> {
    fn jet(&self, p: &[f64]) -> Jet {
        let n = p.len();
        let h = self.step * p.iter().map(|x| x.abs()).fold(1.0, f64::max);
        let mut grad = vec![0.0; n];
        let mut hess = vec![vec![0.0; n]; n];
        let mut q = p.to_vec();
        for i in 0..n {
            grad[i] = d1_fourth(
                |t| {
                    q[i] = t;
                    let v = (self.f)(&q);
                    q[i] = p[i];
                    v
                },
                p[i],
                h,
            );
            hess[i][i] = d2_fourth(
                |t| {
                    q[i] = t;
                    let v = (self.f)(&q);
                    q[i] = p[i];
                    v
                },
                p[i],
                h,
            );
            for k in 0..i {
                let mixed = d1_fourth(
                    |s| {
                        let mut r = p.to_vec();
                        r[i] = s;
                        d1_fourth(
                            |t| {
                                r[k] = t;
                                (self.f)(&r)
                            },
                            p[k],
                            h,
                        )
                    },
                    p[i],
                    h,
                );
                hess[i][k] = mixed;
                hess[k][i] = mixed;
            }
        }
        Jet::from_parts((self.f)(p), &grad, &hess)
    }

    fn value(&self, p: &[f64]) -> f64 {
        (self.f)(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    /// Step `h = max(step, step·|p|)` per coordinate.
    FiniteDifference { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureTag {
    Euclidean,
    RotationallySymmetric,
    WarpedProduct,
    FlatProduct,
    Generic,
}

/// Admissible coordinate region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// All of R^n.
    Everywhere,
    /// `|x| > r_min` (the pole or apex sits at the origin).
    Punctured { r_min: f64 },
    /// `|(x_0, .., x_{k-1})| > r_min`, remaining coordinates free.
    PuncturedFactor { factor_dim: usize, r_min: f64 },
}

impl Domain {
    /// Signed distance to the excluded set (infinite when nothing is excluded).
    pub fn clearance(&self, p: &[f64]) -> f64 {
        match *self {
            Domain::Everywhere => f64::INFINITY,
            Domain::Punctured { r_min } => norm(p) - r_min,
            Domain::PuncturedFactor { factor_dim, r_min } => norm(&p[..factor_dim]) - r_min,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.clearance(p) > 0.0
    }
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A coordinate chart with a smooth metric field.
#[derive(Clone)]
pub struct MetricChart {
    dim: usize,
    domain: Domain,
    source: Arc<dyn MetricSource>,
    derivative_mode: DerivativeMode,
    structure: StructureTag,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("derivative_mode", &self.derivative_mode)
            .field("structure", &self.structure)
            .field("source", &self.source)
            .finish()
    }
}

/// Number of points used by the positive-definiteness audit.
pub const PD_SAMPLES: usize = 1000;

impl MetricChart {
    /// Builds the chart and audits positive definiteness by Cholesky
    /// factorization on [`PD_SAMPLES`] seeded points with radii in
    /// `sample_radii`.
    pub fn new(
        source: Arc<dyn MetricSource>,
        domain: Domain,
        structure: StructureTag,
        sample_radii: (f64, f64),
    ) -> Result<Self> {
        let dim = source.dim();
        if dim <= 2 || dim > MAX_DIM {
            return Err(GeomError::UnsupportedDimension(dim));
        }
        let chart = MetricChart {
            dim,
            domain,
            source,
            derivative_mode: DerivativeMode::Analytic,
            structure,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        let mut checked = 0;
        while checked < PD_SAMPLES {
            let p = random_point(&mut rng, dim, sample_radii);
            if !domain.contains(&p) {
                continue;
            }
            if chart.metric_at(&p).cholesky().is_none() {
                return Err(GeomError::MetricNotPositiveDefinite { point: p });
            }
            checked += 1;
        }
        Ok(chart)
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn structure(&self) -> StructureTag {
        self.structure
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.derivative_mode
    }

    pub fn source(&self) -> &Arc<dyn MetricSource> {
        &self.source
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim || !self.domain.contains(p) {
            return Err(GeomError::PointOutsideDomain { point: p.to_vec() });
        }
        Ok(())
    }

    /// Raises `StepTooLargeForDomain` when a stencil of half-width `reach`
    /// around `p` leaves the domain.
    pub fn check_stencil(&self, p: &[f64], reach: f64) -> Result<()> {
        self.check_point(p)?;
        if self.domain.clearance(p) <= reach {
            return Err(GeomError::StepTooLargeForDomain {
                point: p.to_vec(),
                step: reach,
            });
        }
        Ok(())
    }

    pub fn metric_at(&self, p: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let xs: Vec<Jet> = p.iter().map(|&x| Jet::constant(n, x)).collect();
        let jets = self.source.metric_jets(&xs);
        DMatrix::from_fn(n, n, |i, j| 0.5 * (jets[i * n + j].value() + jets[j * n + i].value()))
    }

    /// Metric and its first two coordinate derivatives at `p`.
    pub fn metric_derivatives(&self, p: &[f64]) -> Result<MetricDerivatives> {
        self.check_point(p)?;
        match self.derivative_mode {
            DerivativeMode::Analytic => Ok(self.metric_derivatives_analytic(p)),
            DerivativeMode::FiniteDifference { step } => {
                let h = step.max(step * norm(p));
                self.check_stencil(p, 2.0 * h)?;
                Ok(self.metric_derivatives_fd(p, h))
            }
        }
    }

    fn metric_derivatives_analytic(&self, p: &[f64]) -> MetricDerivatives {
        let n = self.dim;
        let jets = self.source.metric_jets(&Jet::coordinates(p));
        let mut d = MetricDerivatives::zeros(n);
        for i in 0..n {
            for j in 0..n {
                // symmetrize componentwise
                let a = &jets[i * n + j];
                let b = &jets[j * n + i];
                d.g[(i, j)] = 0.5 * (a.value() + b.value());
                for k in 0..n {
                    d.dg[k][(i, j)] = 0.5 * (a.d(k) + b.d(k));
                    for l in 0..n {
                        d.ddg[k * n + l][(i, j)] = 0.5 * (a.dd(k, l) + b.dd(k, l));
                    }
                }
            }
        }
        d
    }

    fn metric_derivatives_fd(&self, p: &[f64], h: f64) -> MetricDerivatives {
        let n = self.dim;
        let mut d = MetricDerivatives::zeros(n);
        d.g = self.metric_at(p);
        let at = |q: &[f64]| self.metric_at(q);
        let shifted = |k: usize, t: f64| {
            let mut q = p.to_vec();
            q[k] += t;
            q
        };
        for k in 0..n {
            let stencil: Vec<(f64, f64, DMatrix<f64>)> = D1_FOURTH
                .iter()
                .map(|&(s, w)| (s, w, at(&shifted(k, s * h))))
                .collect();
            let mut first = DMatrix::zeros(n, n);
            let mut second = &d.g * (-30.0);
            for (s, w, m) in &stencil {
                first += m * *w;
                second += m * if s.abs() == 1.0 { 16.0 } else { -1.0 };
            }
            d.dg[k] = first / h;
            d.ddg[k * n + k] = second / (12.0 * h * h);
        }
        for k in 0..n {
            for l in 0..k {
                let mut mixed = DMatrix::zeros(n, n);
                for (sk, wk) in D1_FOURTH {
                    for (sl, wl) in D1_FOURTH {
                        let mut q = p.to_vec();
                        q[k] += sk * h;
                        q[l] += sl * h;
                        mixed += at(&q) * (wk * wl);
                    }
                }
                mixed /= h * h;
                d.ddg[k * n + l] = mixed.clone();
                d.ddg[l * n + k] = mixed;
            }
        }
        d
    }
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, radii: (f64, f64)) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            let target = radii.0 + (radii.1 - radii.0) * rng.random::<f64>();
            return v.iter().map(|x| x / r * target).collect();
        }
    }
}

/// `g`, `∂_k g`, `∂_k ∂_l g` at a point (index `k·n + l` for the second).
#[derive(Debug, Clone)]
pub struct MetricDerivatives {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Vec<DMatrix<f64>>,
}

impl MetricDerivatives {
    fn zeros(n: usize) -> Self {
        MetricDerivatives {
            g: DMatrix::zeros(n, n),
            dg: vec![DMatrix::zeros(n, n); n],
            ddg: vec![DMatrix::zeros(n, n); n * n],
        }
    }
}

/// Metric data at a point, with Christoffel symbols `Γ^k_{ij}`.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub point: Vec<f64>,
    pub metric: DMatrix<f64>,
    pub inverse_metric: DMatrix<f64>,
    christoffel: Vec<f64>,
    derivs: MetricDerivatives,
}

impl PointFrame {
    pub fn from_derivatives(p: &[f64], derivs: MetricDerivatives) -> Result<Self> {
        let n = p.len();
        let chol = derivs
            .g
            .clone()
            .cholesky()
            .ok_or_else(|| GeomError::MetricNotPositiveDefinite { point: p.to_vec() })?;
        let ginv = chol.inverse();
        let ginv = (&ginv + ginv.transpose()) * 0.5;
        let mut christoffel = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)]
                            * (derivs.dg[i][(j, l)] + derivs.dg[j][(i, l)] - derivs.dg[l][(i, j)]);
                    }
                    christoffel[(k * n + i) * n + j] = 0.5 * s;
                    christoffel[(k * n + j) * n + i] = 0.5 * s;
                }
            }
        }
        Ok(PointFrame {
            point: p.to_vec(),
            metric: derivs.g.clone(),
            inverse_metric: ginv,
            christoffel,
            derivs,
        })
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    /// `Γ^k_{ij}`.
    #[inline]
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim();
        self.christoffel[(k * n + i) * n + j]
    }

    pub fn metric_derivatives(&self) -> &MetricDerivatives {
        &self.derivs
    }

    pub fn raise(&self, covector: &DVector<f64>) -> DVector<f64> {
        &self.inverse_metric * covector
    }

    pub fn lower(&self, vector: &DVector<f64>) -> DVector<f64> {
        &self.metric * vector
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(&self.metric * b))
    }

    /// Squared norm of a covector.
    pub fn norm2_covector(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.inverse_metric * w))
    }

    /// Covariant Hessian `∂_i∂_j f − Γ^k_{ij} ∂_k f` from a jet.
    pub fn hessian_of(&self, f: &Jet) -> SymmetricTensor2 {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let mut h = f.dd(i, j);
            for k in 0..n {
                h -= self.gamma(k, i, j) * f.d(k);
            }
            h
        });
        SymmetricTensor2::new(m)
    }

    /// Ricci tensor from Christoffel symbols and their derivatives.
    pub fn ricci(&self) -> SymmetricTensor2 {
        let n = self.dim();
        let d = &self.derivs;
        let ginv = &self.inverse_metric;
        // ∂_m g^{kl}
        let dginv: Vec<DMatrix<f64>> = (0..n).map(|m| -(ginv * &d.dg[m] * ginv)).collect();
        // ∂_m Γ^k_{ij}, index ((m n + k) n + i) n + j
        let mut dgamma = vec![0.0; n * n * n * n];
        for m in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            let sym = d.dg[i][(j, l)] + d.dg[j][(i, l)] - d.dg[l][(i, j)];
                            let dsym = d.ddg[m * n + i][(j, l)] + d.ddg[m * n + j][(i, l)]
                                - d.ddg[m * n + l][(i, j)];
                            s += dginv[m][(k, l)] * sym + ginv[(k, l)] * dsym;
                        }
                        dgamma[((m * n + k) * n + i) * n + j] = 0.5 * s;
                        dgamma[((m * n + k) * n + j) * n + i] = 0.5 * s;
                    }
                }
            }
        }
        let dg = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];
        let m = DMatrix::from_fn(n, n, |i, j| {
            let mut r = 0.0;
            for k in 0..n {
                r += dg(k, k, i, j) - dg(j, k, i, k);
                for l in 0..n {
                    r += self.gamma(k, k, l) * self.gamma(l, i, j)
                        - self.gamma(k, j, l) * self.gamma(l, i, k);
                }
            }
            r
        });
        SymmetricTensor2::new(m)
    }
}

/// Covariant symmetric 2-tensor in chart components.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor2(DMatrix<f64>);

impl SymmetricTensor2 {
    /// Symmetrizes the input.
    pub fn new(m: DMatrix<f64>) -> Self {
        let s = (&m + m.transpose()) * 0.5;
        SymmetricTensor2(s)
    }

    pub fn zeros(n: usize) -> Self {
        SymmetricTensor2(DMatrix::zeros(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `T(a, b)` for contravariant vectors.
    pub fn apply(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(&(&self.0 * b))
    }

    /// The covector `T(v, ·)`.
    pub fn contract(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }

    pub fn trace(&self, frame: &PointFrame) -> f64 {
        (&frame.inverse_metric * &self.0).trace()
    }

    /// `|T|² = g^{ik} g^{jl} T_ij T_kl`.
    pub fn norm2(&self, frame: &PointFrame) -> f64 {
        let mixed = &frame.inverse_metric * &self.0;
        (&mixed * &mixed).trace()
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymmetricTensor2(&self.0 * s)
    }

    pub fn plus(&self, other: &SymmetricTensor2) -> Self {
        SymmetricTensor2(&self.0 + &other.0)
    }
}

pub fn point_frame(chart: &MetricChart, p: &[f64]) -> Result<PointFrame> {
    PointFrame::from_derivatives(p, chart.metric_derivatives(p)?)
}

pub fn ricci(chart: &MetricChart, p: &[f64]) -> Result<SymmetricTensor2> {
    Ok(point_frame(chart, p)?.ricci())
}

/// `∇f` with the index raised.
pub fn gradient(chart: &MetricChart, f: &dyn ScalarField, p: &[f64]) -> Result<DVector<f64>> {
    let frame = point_frame(chart, p)?;
    let df = DVector::from_column_slice(f.jet(p).grad());
    Ok(frame.raise(&df))
}

pub fn hessian(chart: &MetricChart, f: &dyn ScalarField, p: &[f64]) -> Result<SymmetricTensor2> {
    let frame = point_frame(chart, p)?;
    Ok(frame.hessian_of(&f.jet(p)))
}

/// `Δf` in divergence form `|g|^{-1/2} ∂_i(|g|^{1/2} g^{ij} ∂_j f)`, assembled
/// from metric derivatives without Christoffel symbols.
pub fn laplacian(chart: &MetricChart, f: &dyn ScalarField, p: &[f64]) -> Result<f64> {
    let n = chart.dim();
    let d = chart.metric_derivatives(p)?;
    let ginv = d
        .g
        .clone()
        .try_inverse()
        .ok_or_else(|| GeomError::MetricNotPositiveDefinite { point: p.to_vec() })?;
    let jet = f.jet(p);
    let mut lap = 0.0;
    for i in 0..n {
        let dginv_i = -(&ginv * &d.dg[i] * &ginv);
        let dlog_sqrt_det = 0.5 * (&ginv * &d.dg[i]).trace();
        for j in 0..n {
            lap += ginv[(i, j)] * jet.dd(i, j)
                + dginv_i[(i, j)] * jet.d(j)
                + ginv[(i, j)] * jet.d(j) * dlog_sqrt_det;
        }
    }
    Ok(lap)
}

/// `Δf` as the metric trace of the covariant Hessian.
pub fn laplacian_trace(chart: &MetricChart, f: &dyn ScalarField, p: &[f64]) -> Result<f64> {
    let frame = point_frame(chart, p)?;
    Ok(frame.hessian_of(&f.jet(p)).trace(&frame))
}

/// Second-order central samples of a field along each coordinate axis.
pub(crate) fn axis_samples<T>(
    p: &[f64],
    h: f64,
    mut field: impl FnMut(&[f64]) -> Result<T>,
) -> Result<Vec<(T, T)>> {
    let mut out = Vec::with_capacity(p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        q[k] = p[k] + h;
        let plus = field(&q)?;
        q[k] = p[k] - h;
        let minus = field(&q)?;
        q[k] = p[k];
        out.push((plus, minus));
    }
    Ok(out)
}

/// `∇_i V^i = ∂_i V^i + Γ^i_{ik} V^k` from axis samples of `V` and its value at `p`.
pub fn divergence_from_samples(
    frame: &PointFrame,
    at_p: &DVector<f64>,
    samples: &[(DVector<f64>, DVector<f64>)],
    h: f64,
) -> f64 {
    let n = frame.dim();
    let mut div = 0.0;
    for (i, (plus, minus)) in samples.iter().enumerate() {
        div += (plus[i] - minus[i]) / (2.0 * h);
    }
    for i in 0..n {
        for k in 0..n {
            div += frame.gamma(i, i, k) * at_p[k];
        }
    }
    div
}

/// `(δT)_i = g^{jk} ∇_k T_{ij}` from axis samples of a covariant 2-tensor.
pub fn tensor_divergence_from_samples(
    frame: &PointFrame,
    at_p: &DMatrix<f64>,
    samples: &[(DMatrix<f64>, DMatrix<f64>)],
    h: f64,
) -> DVector<f64> {
    let n = frame.dim();
    let ginv = &frame.inverse_metric;
    DVector::from_fn(n, |i, _| {
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                if ginv[(j, k)] == 0.0 {
                    continue;
                }
                let (plus, minus) = &samples[k];
                let mut cov = (plus[(i, j)] - minus[(i, j)]) / (2.0 * h);
                for l in 0..n {
                    cov -= frame.gamma(l, k, i) * at_p[(l, j)] + frame.gamma(l, k, j) * at_p[(i, l)];
                }
                s += ginv[(j, k)] * cov;
            }
        }
        s
    })
}

/// Divergence of a contravariant vector field by second-order central differences.
pub fn divergence_vector(
    chart: &MetricChart,
    field: &dyn Fn(&[f64]) -> Result<DVector<f64>>,
    p: &[f64],
    h: f64,
) -> Result<f64> {
    chart.check_stencil(p, h)?;
    let frame = point_frame(chart, p)?;
    let samples = axis_samples(p, h, field)?;
    Ok(divergence_from_samples(&frame, &field(p)?, &samples, h))
}

/// Divergence of a covariant symmetric 2-tensor field, returned as a covector.
pub fn divergence_tensor(
    chart: &MetricChart,
    field: &dyn Fn(&[f64]) -> Result<DMatrix<f64>>,
    p: &[f64],
    h: f64,
) -> Result<DVector<f64>> {
    chart.check_stencil(p, h)?;
    let frame = point_frame(chart, p)?;
    let samples = axis_samples(p, h, field)?;
    Ok(tensor_divergence_from_samples(&frame, &field(p)?, &samples, h))
}

/// Minimal flat metric, used in tests and as the Euclidean model.
#[derive(Debug, Clone)]
pub struct FlatMetric {
    pub dim: usize,
}

impl MetricSource for FlatMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn metric_jets(&self, x: &[Jet]) -> Vec<Jet> {
        let n = self.dim;
        let mut out = vec![x[0].lift(0.0); n * n];
        for i in 0..n {
            out[i * n + i] = x[0].lift(1.0);
        }
        out
    }
}
