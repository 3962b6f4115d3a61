//! Level-set integrals of u and the monotone quantities built from them.
//!
//! Levels are values of u. On radial models the level `{u = r}` is the
//! geodesic sphere of radius `ρ(r)`, so level integrals are closed form and
//! bulk integrals are one-dimensional in ρ. On R³ × S¹ the level sets are
//! parameterized explicitly and integrated with product rules; cut-locus
//! seams are endpoints of the parameter range and never sampled.
//!
//! Boundary-derivative sides use 4th-order central differences in log r
//! (step [`FD_STEP`]) with a Richardson estimate from the doubled step. Bulk
//! sides use G7/K15 cells on a log-ρ grid whose nodes include every grid
//! level, so integrals between grid levels are exact cell sums.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::geom_quantities::{tilde_beta, BetaParams, LevelPointQuantities};
use crate::greens::{ball_volume, build_u, BuiltU, RadialU, USource};
use crate::model_manifolds::{build_chart, ExampleId, ModelSpec, CUT_LOCUS_TIE};
use crate::numeric::quadrature::{adaptive, adaptive_log, gk15_combine, gk15_nodes, Estimate, GaussLegendre};
use crate::numeric::unit_sphere_area;
use crate::tensor_core::{MetricChart, ScalarField};

/// Log-step of the boundary-derivative stencil.
pub const FD_STEP: f64 = 0.02;
/// Relative noise assumed on every evaluated level quantity.
pub const LEVEL_ROUNDING: f64 = 1e-13;
/// Default lhs/rhs match tolerance for the monotone-quantity checks.
pub const MATCH_TOLERANCE: f64 = 1e-3;
/// Violations are flagged beyond this multiple of the error budget.
pub const VIOLATION_FACTOR: f64 = 10.0;

const POLE_DECADES: usize = 6;
const POLE_FACTOR: f64 = 1e-6;
const CELLS_PER_DECADE: f64 = 8.0;
const OUTER_FACTOR: f64 = 100.0;
const INTEGRAND_ROUNDING: f64 = 1e-12;

/// Geometric grid of levels `r_min·ratio^k ≤ r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub ratio: f64,
}

impl Default for RadiusGrid {
    fn default() -> Self {
        RadiusGrid { r_min: 1e-2, r_max: 1e3, ratio: 2f64.powf(0.125) }
    }
}

impl RadiusGrid {
    pub fn new(r_min: f64, r_max: f64, ratio: f64) -> Result<Self> {
        let g = RadiusGrid { r_min, r_max, ratio };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GeomError::InvalidGrid(m));
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return bad(format!("r_min = {} must be positive", self.r_min));
        }
        if !(self.r_max > self.r_min && self.r_max.is_finite()) {
            return bad(format!("r_max = {} must exceed r_min = {}", self.r_max, self.r_min));
        }
        if !(self.ratio > 1.0 && self.ratio.is_finite()) {
            return bad(format!("ratio = {} must exceed 1", self.ratio));
        }
        if (self.r_max / self.r_min).ln() / self.ratio.ln() > 1e5 {
            return bad("more than 1e5 levels".into());
        }
        Ok(())
    }

    pub fn levels(&self) -> Vec<f64> {
        let count = ((self.r_max / self.r_min).ln() / self.ratio.ln() + 1e-9).floor() as i32;
        (0..=count).map(|k| self.r_min * self.ratio.powi(k)).collect()
    }
}

impl FromStr for RadiusGrid {
    type Err = String;
    /// `rmin:rmax:ratio`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid `{s}`: expected rmin:rmax:ratio"));
        }
        let num = |i: usize| parts[i].trim().parse::<f64>().map_err(|e| format!("grid `{s}`: field {i}: {e}"));
        RadiusGrid::new(num(0)?, num(1)?, num(2)?).map_err(|e| e.to_string())
    }
}

impl fmt::Display for RadiusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.r_min, self.r_max, self.ratio)
    }
}

/// Which function on R³ × S¹.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductU {
    /// `|x|^{1/2}`; the level `{u = s}` is the cylinder `|x| = s²`.
    U1,
    /// Distance to the origin; levels are spheres cut at the seam `θ = ±L/2`.
    U2,
}

#[derive(Clone)]
enum LevelKind {
    Radial(Arc<dyn RadialU>),
    Product { length: f64, which: ProductU },
}

/// A quadrature node on a level set.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPoint {
    pub point: Vec<f64>,
    /// Quadrature weight including the area element.
    pub weight: f64,
    /// Normal-derivative step that keeps the stencil off the cut locus.
    pub step: f64,
}

/// A model together with u and the structure of its level sets.
#[derive(Clone)]
pub struct LevelSets {
    spec: ModelSpec,
    source: USource,
    chart: MetricChart,
    u: BuiltU,
    kind: LevelKind,
}

impl LevelSets {
    pub fn new(spec: &ModelSpec, source: USource) -> Result<Self> {
        spec.validate()?;
        let u = build_u(spec, source)?;
        let chart = build_chart(spec)?;
        let kind = match (&u, spec) {
            (BuiltU::Radial(r), _) => LevelKind::Radial(r.clone()),
            (_, ModelSpec::ProductR3S1 { length }) => match source {
                USource::Example(ExampleId::ProductU1) => LevelKind::Product { length: *length, which: ProductU::U1 },
                USource::Example(ExampleId::ProductU2) => LevelKind::Product { length: *length, which: ProductU::U2 },
                _ => return Err(GeomError::WrongModel { expected: "u1 or u2 on product_r3_s1", got: source.to_string() }),
            },
            _ => {
                return Err(GeomError::WrongModel {
                    expected: "radial u or a product example",
                    got: format!("{spec} with {source}"),
                })
            }
        };
        Ok(LevelSets { spec: spec.clone(), source, chart, u, kind })
    }

    pub fn n(&self) -> usize {
        self.spec.dim()
    }

    pub fn omega(&self) -> f64 {
        unit_sphere_area(self.n())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn source(&self) -> USource {
        self.source
    }

    pub fn chart(&self) -> &MetricChart {
        &self.chart
    }

    pub fn field(&self) -> &dyn ScalarField {
        self.u.field()
    }

    pub fn radial(&self) -> Option<&dyn RadialU> {
        match &self.kind {
            LevelKind::Radial(r) => Some(&**r),
            LevelKind::Product { .. } => None,
        }
    }

    pub fn product(&self) -> Option<(f64, ProductU)> {
        match self.kind {
            LevelKind::Product { length, which } => Some((length, which)),
            LevelKind::Radial(_) => None,
        }
    }

    /// Quadrature nodes on `{u = r}`.
    ///
    /// Radial charts: a product rule on the geodesic sphere. Product: for u1
    /// the cylinder `(r²ω, θ)`, area element `r⁴ dω dθ`; for u2 the sphere
    /// `(r cos t·ω, r sin t)` with `|r sin t| < L/2`, area element `r³cos²t dω dt`.
    pub fn level_points(&self, r: f64) -> Result<Vec<LevelPoint>> {
        if !(r > 0.0) {
            return Err(GeomError::NonRegularLevel { level: r });
        }
        match &self.kind {
            LevelKind::Radial(u) => {
                let n = self.n();
                let rho = u.level_radius(r)?;
                let phi = u.profile().phi(rho);
                let step = 1e-4 * rho.max(1.0);
                Ok(sphere_rule(n, 8)
                    .into_iter()
                    .map(|(d, w)| LevelPoint {
                        point: d.iter().map(|x| x * rho).collect(),
                        weight: w * phi.powi(n as i32 - 1),
                        step: step.min(0.1 * rho),
                    })
                    .collect())
            }
            LevelKind::Product { length, which } => {
                let sphere = sphere_rule(3, 4);
                let mut out = Vec::new();
                match which {
                    ProductU::U1 => {
                        let radius = r * r;
                        let gl = GaussLegendre::new(8);
                        for (t, wt) in gl_on(&gl, -0.5 * length, 0.5 * length) {
                            for (d, wd) in &sphere {
                                out.push(LevelPoint {
                                    point: vec![radius * d[0], radius * d[1], radius * d[2], t],
                                    weight: radius * radius * wd * wt,
                                    step: (1e-4 * radius.max(1.0)).min(0.1 * radius),
                                });
                            }
                        }
                    }
                    ProductU::U2 => {
                        let t_max = (0.5 * length / r).min(1.0).asin();
                        let gl = GaussLegendre::new(16);
                        for (t, wt) in gl_on(&gl, -t_max, t_max) {
                            let (rho, theta) = (r * t.cos(), r * t.sin());
                            let step = seam_step(*length, r, rho, theta);
                            for (d, wd) in &sphere {
                                out.push(LevelPoint {
                                    point: vec![rho * d[0], rho * d[1], rho * d[2], theta],
                                    weight: r * r * r * t.cos().powi(2) * wd * wt,
                                    step,
                                });
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// `Vol({u = r})`.
    pub fn level_area(&self, r: f64) -> Result<f64> {
        match &self.kind {
            LevelKind::Radial(u) => Ok(u.level_area(r)?.0),
            LevelKind::Product { length, which } => Ok(match which {
                ProductU::U1 => unit_sphere_area(3) * r.powi(4) * length,
                ProductU::U2 => {
                    // 4π r ∫ √(r² − θ²) dθ over |θ| < min(r, L/2)
                    let a = (0.5 * length).min(r);
                    let prim = |t: f64| 0.5 * (t * (r * r - t * t).max(0.0).sqrt() + r * r * (t / r).clamp(-1.0, 1.0).asin());
                    4.0 * std::f64::consts::PI * r * 2.0 * prim(a)
                }
            }),
        }
    }

    /// `∫_{u=r} f`. Closed form on radial models; parameterized quadrature
    /// with the generic pointwise geometry otherwise.
    pub fn level_integral(&self, r: f64, f: impl Fn(&LevelPointQuantities) -> f64 + Sync) -> Result<f64> {
        match &self.kind {
            LevelKind::Radial(u) => {
                let rho = u.level_radius(r)?;
                let s = RadialSample::at(&**u, rho);
                Ok(f(&s.q) * s.area)
            }
            LevelKind::Product { .. } => self.level_integral_parameterized(r, f),
        }
    }

    /// `∫_{u=r} f` by quadrature over [`LevelSets::level_points`] with the
    /// pointwise geometry from the chart, on every model.
    pub fn level_integral_parameterized(
        &self,
        r: f64,
        f: impl Fn(&LevelPointQuantities) -> f64 + Sync,
    ) -> Result<f64> {
        let points = self.level_points(r)?;
        let field = self.field();
        let parts: Vec<f64> = points
            .par_iter()
            .map(|lp| Ok(lp.weight * f(&LevelPointQuantities::at_with_step(&self.chart, field, &lp.point, lp.step)?)))
            .collect::<Result<_>>()?;
        Ok(parts.iter().sum())
    }

    /// `(∫_{u=r}|∇u|^{1+β} for each β, Vol(u=r))`.
    fn flux(&self, r: f64, betas: &[f64]) -> Result<(Vec<f64>, f64)> {
        match &self.kind {
            LevelKind::Radial(u) => {
                let rho = u.level_radius(r)?;
                let s = RadialSample::at(&**u, rho);
                Ok((betas.iter().map(|b| s.q.grad_norm.powf(1.0 + b) * s.area).collect(), s.area))
            }
            LevelKind::Product { .. } => {
                let points = self.level_points(r)?;
                let field = self.field();
                let grads: Vec<f64> =
                    points.iter().map(|lp| gradient_norm(&self.chart, field, &lp.point)).collect::<Result<_>>()?;
                let area = points.iter().map(|lp| lp.weight).sum();
                let flux = betas
                    .iter()
                    .map(|b| points.iter().zip(&grads).map(|(lp, g)| lp.weight * g.powf(1.0 + b)).sum())
                    .collect();
                Ok((flux, area))
            }
        }
    }

    /// Seeded points on `{u = r}` away from the cut locus, with their steps.
    pub fn sample_level(&self, r: f64, count: usize, seed: u64) -> Result<Vec<LevelPoint>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let d3 = crate::model_manifolds::random_direction(&mut rng, 3);
            let point = match &self.kind {
                LevelKind::Radial(u) => {
                    let rho = u.level_radius(r)?;
                    let d = crate::model_manifolds::random_direction(&mut rng, self.n());
                    let step = (1e-4 * rho.max(1.0)).min(0.1 * rho);
                    LevelPoint { point: d.iter().map(|x| x * rho).collect(), weight: 1.0, step }
                }
                LevelKind::Product { length, which: ProductU::U1 } => {
                    let radius = r * r;
                    let theta = length * (rng.random::<f64>() - 0.5);
                    let step = (1e-4 * radius.max(1.0)).min(0.1 * radius);
                    LevelPoint { point: vec![radius * d3[0], radius * d3[1], radius * d3[2], theta], weight: 1.0, step }
                }
                LevelKind::Product { length, which: ProductU::U2 } => {
                    // stay 1e−3 of the parameter range away from the seam
                    let t_max = (0.5 * length / r).min(1.0).asin();
                    let t = t_max * (1.0 - 1e-3) * (2.0 * rng.random::<f64>() - 1.0);
                    let (rho, theta) = (r * t.cos(), r * t.sin());
                    let step = seam_step(*length, r, rho, theta);
                    LevelPoint { point: vec![rho * d3[0], rho * d3[1], rho * d3[2], theta], weight: 1.0, step }
                }
            };
            out.push(point);
        }
        Ok(out)
    }
}

/// Largest normal-derivative step whose 5-point stencil stays on one sheet:
/// `d₂ − d₁` is 2-Lipschitz and the stencil reach is twice the step.
fn seam_step(length: f64, r: f64, rho: f64, theta: f64) -> f64 {
    let gap = (rho * rho + (length - theta.abs()).powi(2)).sqrt() - r;
    let limit = (gap - 2.0 * CUT_LOCUS_TIE) / (8.0 * 2.0);
    (1e-4 * r.max(1.0)).min(limit).min(0.1 * r)
}

fn gradient_norm(chart: &MetricChart, u: &dyn ScalarField, p: &[f64]) -> Result<f64> {
    let g = chart.metric_at(p);
    let du = nalgebra::DVector::from_column_slice(u.jet(p).grad());
    let chol = g.cholesky().ok_or_else(|| GeomError::MetricNotPositiveDefinite { point: p.to_vec() })?;
    Ok(du.dot(&chol.solve(&du)).sqrt())
}

fn gl_on(gl: &GaussLegendre, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    gl.nodes.iter().zip(&gl.weights).map(|(x, w)| (c + h * x, h * w)).collect()
}

/// Product rule on the unit sphere `S^{dim−1} ⊂ R^dim` with weights summing
/// to its area. S²: Gauss in cos ϑ times 2m azimuths (exact to degree
/// 2m − 1). Higher spheres recurse in `z = cos ϑ` against `(1 − z²)^{(dim−3)/2}`.
pub fn sphere_rule(dim: usize, m: usize) -> Vec<(Vec<f64>, f64)> {
    use std::f64::consts::PI;
    match dim {
        0 | 1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => (0..2 * m)
            .map(|j| {
                let a = (j as f64 + 0.5) * PI / m as f64;
                (vec![a.cos(), a.sin()], PI / m as f64)
            })
            .collect(),
        3 => {
            let gl = GaussLegendre::new(m);
            let circle = sphere_rule(2, m);
            let mut out = Vec::with_capacity(2 * m * m);
            for (z, wz) in gl.nodes.iter().zip(&gl.weights) {
                let s = (1.0 - z * z).sqrt();
                for (c, wc) in &circle {
                    out.push((vec![z.to_owned(), s * c[0], s * c[1]], wz * wc));
                }
            }
            out
        }
        _ => {
            // z = cos ϑ carries the weight (1 − z²)^{(dim−3)/2}: a polynomial
            // for odd dim, √(1 − z²) times one for even dim
            let zs: Vec<(f64, f64)> = if dim % 2 == 1 {
                let gl = GaussLegendre::new(m + (dim - 3) / 2);
                gl.nodes.iter().zip(&gl.weights).map(|(z, w)| (*z, w * (1.0 - z * z).powi((dim as i32 - 3) / 2))).collect()
            } else {
                let k = m + (dim - 4) / 2;
                (1..=k)
                    .map(|j| {
                        let t = j as f64 * PI / (k + 1) as f64;
                        let s2 = t.sin() * t.sin();
                        (t.cos(), PI / (k + 1) as f64 * s2 * s2.powi((dim as i32 - 4) / 2))
                    })
                    .collect()
            };
            let lower = sphere_rule(dim - 1, m);
            let mut out = Vec::with_capacity(zs.len() * lower.len());
            for (z, wz) in zs {
                let s = (1.0 - z * z).sqrt();
                for (d, wd) in &lower {
                    let mut p = Vec::with_capacity(dim);
                    p.push(z);
                    p.extend(d.iter().map(|x| s * x));
                    out.push((p, wz * wd));
                }
            }
            out
        }
    }
}

/// Closed-form level quantities of a radial u at geodesic radius ρ. Level
/// sets are geodesic spheres (`II₀ = 0`), `Ric(n, n) = −(n−1)φ''/φ`, and
/// `B = Hess u² − 2|∇u|² g` has `B(n) = 2uu''·n`, so `B(n)^T = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RadialSample {
    rho: f64,
    area: f64,
    q: LevelPointQuantities,
}

impl RadialSample {
    fn at(u: &dyn RadialU, rho: f64) -> Self {
        let n = u.n();
        let (uu, du, d2u) = u.u3(rho);
        let (phi, _, d2phi) = u.profile().eval3(rho);
        let area = unit_sphere_area(n) * phi.powi(n as i32 - 1);
        let b_nn = 2.0 * uu * d2u;
        RadialSample {
            rho,
            area,
            q: LevelPointQuantities {
                u: uu,
                grad_norm: du,
                norm2_ii0: 0.0,
                ric_nn: -(n as f64 - 1.0) * d2phi / phi,
                b_n2: b_nn * b_nn,
                b_nt2: 0.0,
            },
        }
    }
}

/// `β|∇u|^β K₁ + β/(4(n−1))·u^{−2}|∇u|^{β−2} K₂` with `K₁ = |II₀|² + Ric(n,n)`
/// and `K₂ = β̃|B(n)|² + (n−2)|B(n)^T|²`.
pub fn curvature_integrand(q: &LevelPointQuantities, bp: &BetaParams) -> f64 {
    let n = bp.n as f64;
    let k1 = q.norm2_ii0 + q.ric_nn;
    let k2 = bp.tilde_beta * q.b_n2 + (n - 2.0) * q.b_nt2;
    let g = q.grad_norm;
    bp.beta * g.powf(bp.beta) * k1 + bp.beta / (4.0 * (n - 1.0)) * g.powf(bp.beta - 2.0) * k2 / (q.u * q.u)
}

/// The curvature integrand weighted by `u^power`, per unit ρ (area included).
#[derive(Debug, Clone, Copy)]
struct Weighted {
    bp: BetaParams,
    power: f64,
}

impl Weighted {
    fn value(&self, s: &RadialSample) -> f64 {
        s.q.u.powf(self.power) * curvature_integrand(&s.q, &self.bp) * s.area
    }

    /// Size of the same expression with curvatures at their Euclidean scale
    /// `1/ρ²`; values below `INTEGRAND_ROUNDING` of it are rounding.
    fn scale(&self, s: &RadialSample) -> f64 {
        let g = s.q.grad_norm;
        s.q.u.powf(self.power) * self.bp.beta * g.powf(self.bp.beta) * (1.0 / (s.rho * s.rho) + g * g / (s.q.u * s.q.u)) * s.area
    }
}

/// `∫_0^{x₀} F` for `F ≈ C x^k` fitted at `x₀·{1, q, q²}`.
fn power_law_head(x0: f64, q: f64, f: [f64; 3], scale: f64) -> Result<Estimate> {
    let floor = INTEGRAND_ROUNDING * scale * x0;
    if f.iter().all(|v| v.abs() <= INTEGRAND_ROUNDING * scale) {
        return Ok(Estimate { value: 0.0, error: floor });
    }
    let (k, spread) = fit_exponents(q, f)?;
    // k ≈ −1 is a logarithmic divergence that the fit cannot resolve
    if !(k > -1.0 + 1e-3) {
        return Err(GeomError::DivergentPoleIntegral { exponent: k, near: x0 });
    }
    let value = f[0] * x0 / (k + 1.0);
    Ok(Estimate { value, error: value.abs() * spread / (k + 1.0) + floor })
}

/// `∫_{x₀}^∞ F` for `F ≈ C x^k` fitted at `x₀·{1, q, q²}`.
fn power_law_tail(x0: f64, q: f64, f: [f64; 3], scale: f64) -> Estimate {
    if f.iter().all(|v| v.abs() <= INTEGRAND_ROUNDING * scale) {
        // rounding-level integrand decaying at least like the curvature scale
        return Estimate { value: 0.0, error: INTEGRAND_ROUNDING * scale * x0 };
    }
    match fit_exponents(q, f) {
        Ok((k, spread)) if k < -1.0 => {
            let value = f[0] * x0 / (-k - 1.0);
            Estimate { value, error: value.abs() * spread / (-k - 1.0) }
        }
        _ => Estimate { value: 0.0, error: f64::INFINITY },
    }
}

fn fit_exponents(q: f64, f: [f64; 3]) -> Result<(f64, f64)> {
    if !(f[0] * f[1] > 0.0 && f[1] * f[2] > 0.0) {
        return Err(GeomError::QuadratureFailed { a: 0.0, b: 0.0, err: f64::INFINITY });
    }
    let k1 = (f[1] / f[0]).ln() / q.ln();
    let k2 = (f[2] / f[1]).ln() / q.ln();
    Ok((k1, (k1 - k2).abs()))
}

/// A derivative by 4th-order central differences in log r.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FdEstimate {
    pub value: f64,
    /// Richardson estimate `|D_h − D_{2h}|/15`.
    pub truncation: f64,
    pub rounding: f64,
}

impl FdEstimate {
    pub fn error(&self) -> f64 {
        self.truncation + self.rounding
    }
}

/// Stencil offsets, in units of [`FD_STEP`].
const OFFSETS: [f64; 6] = [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0];

/// `dQ/dr` at r from Q at `r·e^{k h}`, k in [`OFFSETS`].
fn log_derivative(r: f64, q: [f64; 6]) -> FdEstimate {
    let h = FD_STEP;
    let d_h = (q[1] / 12.0 - 8.0 * q[2] / 12.0 + 8.0 * q[3] / 12.0 - q[4] / 12.0) / h;
    let d_2h = (q[0] / 12.0 - 8.0 * q[1] / 12.0 + 8.0 * q[4] / 12.0 - q[5] / 12.0) / (2.0 * h);
    let mass = (q[1].abs() + 8.0 * q[2].abs() + 8.0 * q[3].abs() + q[4].abs()) / 12.0;
    FdEstimate {
        value: d_h / r,
        truncation: (d_h - d_2h).abs() / 15.0 / r,
        rounding: LEVEL_ROUNDING * mass / h / r,
    }
}

/// `V_β` for a set of β: `r^{2−n}∫_0^r s^{−2}Φ_β(s) ds`, `Φ_β = ∫_{u=s}|∇u|^{1+β}`,
/// accumulated over log-s cells with a power-law piece below `r_min·1e−6`.
struct VProfile {
    betas: Vec<f64>,
    n: usize,
    nodes: Vec<f64>,
    /// `[node][β]`: `∫_0^{node} s^{−2}Φ_β ds`.
    prefix: Vec<Vec<Estimate>>,
}

impl VProfile {
    fn build(sets: &LevelSets, levels: &[f64], betas: &[f64]) -> Result<Self> {
        let n = sets.n();
        let omega = sets.omega();
        let s_pole = levels[0] * POLE_FACTOR;
        let mut nodes: Vec<f64> = (0..POLE_DECADES * CELLS_PER_DECADE as usize)
            .map(|k| s_pole * 10f64.powf(k as f64 / CELLS_PER_DECADE))
            .collect();
        nodes.extend_from_slice(levels);
        let q = 2f64.powf(0.125);
        let head: Vec<(Vec<f64>, f64)> =
            [1.0, q, q * q].iter().map(|m| sets.flux(s_pole * m, betas)).collect::<Result<_>>()?;
        let cells: Vec<Vec<Estimate>> = nodes
            .par_windows(2)
            .map(|w| cell_estimates(sets, w[0], w[1], betas))
            .collect::<Result<_>>()?;
        let mut prefix = Vec::with_capacity(nodes.len());
        let first: Vec<Estimate> = (0..betas.len())
            .map(|b| {
                let f = [0, 1, 2].map(|i| head[i].0[b] / (s_pole * [1.0, q, q * q][i]).powi(2));
                power_law_head(s_pole, q, f, omega * s_pole.powi(n as i32 - 3))
            })
            .collect::<Result<_>>()?;
        prefix.push(first);
        for c in &cells {
            let last = prefix.last().expect("seeded");
            prefix.push(last.iter().zip(c).map(|(a, b)| *a + *b).collect());
        }
        Ok(VProfile { betas: betas.to_vec(), n, nodes, prefix })
    }

    /// `V_β(r)` for every β, with the quadrature error estimate.
    fn at(&self, sets: &LevelSets, r: f64) -> Result<Vec<Estimate>> {
        let j = match self.nodes.binary_search_by(|x| x.total_cmp(&r)) {
            Ok(j) => j,
            Err(0) => return Err(GeomError::NonRegularLevel { level: r }),
            Err(j) => j - 1,
        };
        let base = &self.prefix[j];
        let extra = if self.nodes[j] == r {
            vec![Estimate::default(); self.betas.len()]
        } else {
            cell_estimates(sets, self.nodes[j], r, &self.betas)?
        };
        let scale = r.powi(2 - self.n as i32);
        Ok(base
            .iter()
            .zip(extra)
            .map(|(a, b)| Estimate { value: scale * (a.value + b.value), error: scale * (a.error + b.error) })
            .collect())
    }
}

/// `∫_a^b s^{−2}Φ_β(s) ds` per β, one G7/K15 cell in log s.
fn cell_estimates(sets: &LevelSets, a: f64, b: f64, betas: &[f64]) -> Result<Vec<Estimate>> {
    let (la, lb) = (a.ln(), b.ln());
    let xs = gk15_nodes(la, lb);
    let mut vals = vec![[0.0; 15]; betas.len()];
    for (i, x) in xs.iter().enumerate() {
        let s = x.exp();
        let (flux, _) = sets.flux(s, betas)?;
        for (b, f) in flux.iter().enumerate() {
            vals[b][i] = f / s;
        }
    }
    Ok(vals.iter().map(|v| gk15_combine(la, lb, v)).collect())
}

/// One level of [`a_v_profiles`]; vectors are indexed like `AvProfiles::betas`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelQuantities {
    pub r: f64,
    pub a_beta: Vec<f64>,
    pub v_beta: Vec<f64>,
    /// Quadrature error estimate of `V_β`.
    pub v_error: Vec<f64>,
    pub area: f64,
    pub da_dr: Vec<FdEstimate>,
    pub dv_dr: Vec<FdEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvProfiles {
    pub manifold: String,
    pub u: String,
    pub n: usize,
    pub omega: f64,
    pub betas: Vec<f64>,
    pub levels: Vec<LevelQuantities>,
}

/// Largest excess over each Euclidean bound (≤ 0 means it holds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Boundedness {
    /// `max (A_β − ω)/ω`.
    pub a_over_omega: f64,
    /// `max (A_β − r^{1−n}Vol(u=r))/ω`.
    pub a_over_area: f64,
    /// `max (V_β − ω/(n−2))/ω`.
    pub v_over_euclidean: f64,
    /// `max (r^{n−1}ω − Vol(u=r))/(r^{n−1}ω)`.
    pub area_deficit: f64,
}

impl Boundedness {
    pub fn holds(&self, tol: f64) -> bool {
        self.a_over_omega <= tol && self.a_over_area <= tol && self.v_over_euclidean <= tol && self.area_deficit <= tol
    }
}

impl AvProfiles {
    pub fn beta_index(&self, beta: f64) -> Option<usize> {
        self.betas.iter().position(|b| *b == beta)
    }

    pub fn boundedness(&self) -> Boundedness {
        let (n, w) = (self.n as f64, self.omega);
        let mut b = Boundedness {
            a_over_omega: f64::NEG_INFINITY,
            a_over_area: f64::NEG_INFINITY,
            v_over_euclidean: f64::NEG_INFINITY,
            area_deficit: f64::NEG_INFINITY,
        };
        for l in &self.levels {
            let euclid = l.r.powf(n - 1.0) * w;
            b.area_deficit = b.area_deficit.max((euclid - l.area) / euclid);
            for (a, v) in l.a_beta.iter().zip(&l.v_beta) {
                b.a_over_omega = b.a_over_omega.max((a - w) / w);
                b.a_over_area = b.a_over_area.max((a - l.area / l.r.powf(n - 1.0)) / w);
                b.v_over_euclidean = b.v_over_euclidean.max((v - w / (n - 2.0)) / w);
            }
        }
        b
    }

    /// `r, beta, A, V, area, dA_dr, dV_dr` rows.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut w = csv_writer();
        w.write_record(["beta", "r", "A_beta", "V_beta", "area", "dA_dr", "dV_dr"]).expect("in-memory write");
        for (b, beta) in self.betas.iter().enumerate() {
            for l in &self.levels {
                w.write_record([*beta, l.r, l.a_beta[b], l.v_beta[b], l.area, l.da_dr[b].value, l.dv_dr[b].value].map(fmt_e))
                    .expect("in-memory write");
            }
        }
        finish_csv(w, header)
    }
}

fn validate_betas(n: usize, betas: &[f64]) -> Result<Vec<BetaParams>> {
    betas.iter().map(|&b| tilde_beta(n, b)).collect()
}

/// `A_β`, `V_β`, `Vol(u = r)` and their log-r derivatives on every grid level.
pub fn a_v_profiles(sets: &LevelSets, grid: &RadiusGrid, betas: &[f64]) -> Result<AvProfiles> {
    grid.validate()?;
    validate_betas(sets.n(), betas)?;
    let levels = grid.levels();
    let vprof = VProfile::build(sets, &levels, betas)?;
    let rows = levels
        .par_iter()
        .map(|&r| level_row(sets, &vprof, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(AvProfiles {
        manifold: sets.spec.to_string(),
        u: sets.source.to_string(),
        n: sets.n(),
        omega: sets.omega(),
        betas: betas.to_vec(),
        levels: rows,
    })
}

/// A and V at the six stencil levels around r: `[k][β]`.
struct StencilValues {
    a: [Vec<f64>; 6],
    v: [Vec<f64>; 6],
}

fn stencil_values(sets: &LevelSets, vprof: &VProfile, r: f64) -> Result<StencilValues> {
    let n = sets.n() as i32;
    let mut a: [Vec<f64>; 6] = Default::default();
    let mut v: [Vec<f64>; 6] = Default::default();
    for (k, off) in OFFSETS.iter().enumerate() {
        let s = r * (off * FD_STEP).exp();
        let (flux, _) = sets.flux(s, &vprof.betas)?;
        a[k] = flux.iter().map(|f| f * s.powi(1 - n)).collect();
        v[k] = vprof.at(sets, s)?.iter().map(|e| e.value).collect();
    }
    Ok(StencilValues { a, v })
}

impl StencilValues {
    fn derivative(&self, r: f64, q: impl Fn(f64, f64, f64) -> f64) -> FdEstimate {
        let mut vals = [0.0; 6];
        for (k, off) in OFFSETS.iter().enumerate() {
            vals[k] = q(r * (off * FD_STEP).exp(), self.a[k][0], self.v[k][0]);
        }
        log_derivative(r, vals)
    }

    fn for_beta(&self, b: usize) -> StencilValues {
        StencilValues {
            a: std::array::from_fn(|k| vec![self.a[k][b]]),
            v: std::array::from_fn(|k| vec![self.v[k][b]]),
        }
    }
}

fn level_row(sets: &LevelSets, vprof: &VProfile, r: f64) -> Result<LevelQuantities> {
    let n = sets.n() as i32;
    let (flux, area) = sets.flux(r, &vprof.betas)?;
    let v = vprof.at(sets, r)?;
    let st = stencil_values(sets, vprof, r)?;
    let nb = vprof.betas.len();
    Ok(LevelQuantities {
        r,
        a_beta: flux.iter().map(|f| f * r.powi(1 - n)).collect(),
        v_beta: v.iter().map(|e| e.value).collect(),
        v_error: v.iter().map(|e| e.error).collect(),
        area,
        da_dr: (0..nb).map(|b| st.for_beta(b).derivative(r, |_, a, _| a)).collect(),
        dv_dr: (0..nb).map(|b| st.for_beta(b).derivative(r, |_, _, v| v)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VOdeRow {
    pub beta: f64,
    pub r: f64,
    /// `r V_β'`.
    pub lhs: f64,
    /// `(2−n)V_β + A_β`.
    pub rhs: f64,
    pub abs_error: f64,
    /// `abs_error / max(A_β, (n−2)V_β)`.
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VOdeReport {
    pub rows: Vec<VOdeRow>,
}

impl VOdeReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }
}

/// `r V_β' = (2−n)V_β + A_β` level by level, within
/// `VIOLATION_FACTOR × (FD + quadrature + rounding)`.
pub fn check_v_ode(profiles: &AvProfiles) -> VOdeReport {
    let n = profiles.n as f64;
    let mut rows = Vec::new();
    for (b, beta) in profiles.betas.iter().enumerate() {
        for l in &profiles.levels {
            let (a, v) = (l.a_beta[b], l.v_beta[b]);
            let lhs = l.r * l.dv_dr[b].value;
            let rhs = (2.0 - n) * v + a;
            let abs_error = (lhs - rhs).abs();
            let budget = l.r * l.dv_dr[b].error()
                + (n - 2.0) * (l.v_error[b] + LEVEL_ROUNDING * v.abs())
                + LEVEL_ROUNDING * a.abs();
            let tolerance = VIOLATION_FACTOR * budget;
            rows.push(VOdeRow {
                beta: *beta,
                r: l.r,
                lhs,
                rhs,
                abs_error,
                rel_error: abs_error / a.abs().max((n - 2.0) * v.abs()).max(f64::MIN_POSITIVE),
                tolerance,
                pass: abs_error <= tolerance,
            });
        }
    }
    VOdeReport { rows }
}

/// The monotone quantities, by report id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantityId {
    /// `A_β`; lhs `A_β'`, rhs `−β r^{n−3}∫_{u≥r}(…)`.
    #[serde(rename = "A")]
    A,
    /// `A_β − 2(n−2)V_β`; lhs its derivative, rhs `r^{1−n}∫_{u≤r}(…)`.
    #[serde(rename = "A_minus_2n2V")]
    AMinus2n2V,
    /// `g = (2−n)A_β + rA_β'`; lhs `g(r) − g(r₀)`, rhs `∫_{r₀≤u≤r}u^{2−n}(…)`.
    #[serde(rename = "g_combination")]
    GCombination,
    /// `r^{2−n}(A_β − ω)`; lhs its derivative, rhs `r^{1−n}∫_{u≤r}u^{2−n}(…)`.
    #[serde(rename = "r2n_A_minus_omega")]
    R2nAMinusOmega,
    /// `f = r^{3−n}A_β'`; lhs `f(r) − f(r₀)`, rhs `∫_{r₀≤u≤r}u^{4−2n}(…)`.
    #[serde(rename = "r3n_Aprime")]
    R3nAPrime,
    #[serde(rename = "umbilicity_functional")]
    UmbilicityFunctional,
}

impl QuantityId {
    pub fn name(self) -> &'static str {
        match self {
            QuantityId::A => "A",
            QuantityId::AMinus2n2V => "A_minus_2n2V",
            QuantityId::GCombination => "g_combination",
            QuantityId::R2nAMinusOmega => "r2n_A_minus_omega",
            QuantityId::R3nAPrime => "r3n_Aprime",
            QuantityId::UmbilicityFunctional => "umbilicity_functional",
        }
    }
}

impl fmt::Display for QuantityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneRow {
    pub beta: f64,
    pub r: f64,
    pub value: f64,
    pub lhs_derivative: f64,
    pub rhs_integral: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`.
    pub match_error: f64,
    /// `max(0, |lhs − rhs| − budget) / max(|lhs|, |rhs|)`.
    pub match_error_adjusted: f64,
    /// FD truncation + rounding + quadrature estimate for this row.
    pub budget: f64,
    pub violation_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub r: f64,
    pub magnitude: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoareaCheck {
    pub shells: f64,
    pub volume: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub manifold: String,
    pub u: String,
    pub beta: f64,
    pub tilde_beta: f64,
    pub quantity_id: QuantityId,
    pub rows: Vec<MonotoneRow>,
    pub violations: Vec<Violation>,
}

impl MonotoneReport {
    pub fn grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn max_match_error(&self) -> f64 {
        self.rows.iter().map(|r| r.match_error).fold(0.0, f64::max)
    }

    pub fn max_adjusted_match_error(&self) -> f64 {
        self.rows.iter().map(|r| r.match_error_adjusted).fold(0.0, f64::max)
    }

    pub fn pass(&self, match_tolerance: f64) -> bool {
        self.violations.is_empty()
            && self.max_adjusted_match_error() < match_tolerance
            && self.rows.iter().all(|r| r.value.is_finite() && r.lhs_derivative.is_finite() && r.rhs_integral.is_finite())
    }

    pub fn summary(&self) -> MonotoneSummary {
        MonotoneSummary {
            quantity_id: self.quantity_id,
            beta: self.beta,
            tilde_beta: self.tilde_beta,
            levels: self.rows.len(),
            max_match_error: self.max_match_error(),
            max_adjusted_match_error: self.max_adjusted_match_error(),
            violations: self.violations.len(),
            pass: self.pass(MATCH_TOLERANCE),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneSummary {
    pub quantity_id: QuantityId,
    pub beta: f64,
    pub tilde_beta: f64,
    pub levels: usize,
    pub max_match_error: f64,
    pub max_adjusted_match_error: f64,
    pub violations: usize,
    pub pass: bool,
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(vec![])
}

fn fmt_e(v: f64) -> String {
    format!("{v:e}")
}

fn finish_csv(w: csv::Writer<Vec<u8>>, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    out
}

/// Rows of several reports (typically one quantity over β) in one table:
/// `beta, r, value, lhs_derivative, rhs_integral, match_error, violation_flag`
/// followed by `match_error_adjusted, budget`.
pub fn monotone_csv(reports: &[&MonotoneReport], header: &[String]) -> String {
    let mut w = csv_writer();
    w.write_record([
        "beta",
        "r",
        "value",
        "lhs_derivative",
        "rhs_integral",
        "match_error",
        "violation_flag",
        "match_error_adjusted",
        "budget",
    ])
    .expect("in-memory write");
    for rep in reports {
        for r in &rep.rows {
            w.write_record([
                fmt_e(r.beta),
                fmt_e(r.r),
                fmt_e(r.value),
                fmt_e(r.lhs_derivative),
                fmt_e(r.rhs_integral),
                fmt_e(r.match_error),
                r.violation_flag.to_string(),
                fmt_e(r.match_error_adjusted),
                fmt_e(r.budget),
            ])
            .expect("in-memory write");
        }
    }
    finish_csv(w, header)
}

fn match_errors(lhs: f64, rhs: f64, budget: f64) -> (f64, f64) {
    let diff = (lhs - rhs).abs();
    if diff == 0.0 {
        return (0.0, 0.0);
    }
    let denom = lhs.abs().max(rhs.abs());
    (diff / denom, (diff - budget).max(0.0) / denom)
}

/// Per-β curvature integrals on the radial cell grid.
struct Cumulative {
    /// `∫_{ρ_pole or 0}^{node}` at every node.
    prefix: Vec<Estimate>,
    /// `∫_{node}^∞` at every node, tail included.
    suffix: Vec<Estimate>,
}

/// Radial-model machinery: ρ-cells through every grid level, from
/// `1e−3·ρ(r_min)` to `ρ(100·r_max)`, with cached closed-form samples.
struct RadialEngine {
    u: Arc<dyn RadialU>,
    n: usize,
    omega: f64,
    levels: Vec<f64>,
    nodes: Vec<f64>,
    /// Node index of grid level 0.
    first: usize,
    cells: Vec<[RadialSample; 15]>,
    head: [RadialSample; 3],
    tail: [RadialSample; 3],
}

const FIT_RATIO: f64 = 1.090_507_732_665_257_7; // 2^{1/8}

impl RadialEngine {
    fn new(sets: &LevelSets, levels: &[f64]) -> Result<Self> {
        let u = match &sets.kind {
            LevelKind::Radial(u) => u.clone(),
            LevelKind::Product { .. } => {
                return Err(GeomError::WrongModel { expected: "radial model", got: sets.spec.to_string() })
            }
        };
        let rhos: Vec<f64> = levels.par_iter().map(|&r| u.level_radius(r)).collect::<Result<_>>()?;
        let rho0 = rhos[0];
        let pole = rho0 * POLE_FACTOR;
        let head_cells = POLE_DECADES * CELLS_PER_DECADE as usize;
        let mut nodes: Vec<f64> =
            (0..head_cells).map(|k| pole * 10f64.powf(k as f64 / CELLS_PER_DECADE)).collect();
        let first = nodes.len();
        nodes.extend_from_slice(&rhos);
        let rho_last = *rhos.last().expect("non-empty grid");
        let rho_out = u.level_radius(levels.last().expect("non-empty grid") * OUTER_FACTOR)?;
        let outer = ((rho_out / rho_last).log10() * CELLS_PER_DECADE).ceil().max(1.0) as usize;
        let q = (rho_out / rho_last).powf(1.0 / outer as f64);
        nodes.extend((1..=outer).map(|k| rho_last * q.powi(k as i32)));
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GeomError::InvalidGrid("level radii are not increasing".into()));
        }
        let cells = nodes
            .par_windows(2)
            .map(|w| gk15_nodes(w[0].ln(), w[1].ln()).map(|x| RadialSample::at(&*u, x.exp())))
            .collect();
        let at = |x: f64| RadialSample::at(&*u, x);
        let head = [at(pole), at(pole * FIT_RATIO), at(pole * FIT_RATIO * FIT_RATIO)];
        let end = *nodes.last().expect("non-empty");
        let tail = [at(end), at(end * FIT_RATIO), at(end * FIT_RATIO * FIT_RATIO)];
        Ok(RadialEngine {
            n: u.n(),
            omega: unit_sphere_area(u.n()),
            u,
            levels: levels.to_vec(),
            nodes,
            first,
            cells,
            head,
            tail,
        })
    }

    fn cumulate(&self, w: Weighted, with_head: bool) -> Result<Cumulative> {
        let cell_est: Vec<Estimate> = self
            .nodes
            .windows(2)
            .zip(&self.cells)
            .map(|(ab, samples)| {
                let vals = samples.map(|s| w.value(&s) * s.rho);
                gk15_combine(ab[0].ln(), ab[1].ln(), &vals)
            })
            .collect();
        let head = if with_head {
            let f = self.head.map(|s| w.value(&s));
            power_law_head(self.head[0].rho, FIT_RATIO, f, w.scale(&self.head[0]))?
        } else {
            Estimate::default()
        };
        let f = self.tail.map(|s| w.value(&s));
        let tail = power_law_tail(self.tail[0].rho, FIT_RATIO, f, w.scale(&self.tail[0]));
        let mut prefix = vec![head];
        for c in &cell_est {
            prefix.push(*prefix.last().expect("seeded") + *c);
        }
        let mut suffix = vec![tail; self.nodes.len()];
        for j in (0..cell_est.len()).rev() {
            suffix[j] = cell_est[j] + suffix[j + 1];
        }
        Ok(Cumulative { prefix, suffix })
    }

    /// Coarea double path on `[r₁, r₂]` for a weighted integrand: shells
    /// `∫ds ∫_{u=s} F/|∇u|` by adaptive quadrature in s against the cell sum.
    fn coarea(&self, w: Weighted, cum: &Cumulative, i1: usize, i2: usize) -> Result<CoareaCheck> {
        let (r1, r2) = (self.levels[i1], self.levels[i2]);
        let vol = Estimate {
            value: cum.prefix[self.first + i2].value - cum.prefix[self.first + i1].value,
            error: cum.prefix[self.first + i2].error - cum.prefix[self.first + i1].error,
        };
        // absolute size below which both paths only see rounding
        let floor = INTEGRAND_ROUNDING * w.scale(&RadialSample::at(&*self.u, self.u.level_radius(r2)?)) * r2;
        let mut failed = None;
        let shells = adaptive_log(
            |s| match self.u.level_radius(s) {
                Ok(rho) => {
                    let smp = RadialSample::at(&*self.u, rho);
                    w.value(&smp) / smp.q.grad_norm
                }
                Err(e) => {
                    failed = Some(e);
                    0.0
                }
            },
            r1,
            r2,
            1e-11,
            floor,
        )?;
        if let Some(e) = failed {
            return Err(e);
        }
        let error = vol.error + shells.error;
        let slack = VIOLATION_FACTOR * error + 1e-9 * vol.value.abs().max(shells.value.abs()) + floor;
        if (shells.value - vol.value).abs() > slack {
            return Err(GeomError::CoareaMismatch { r1, r2, shells: shells.value, volume: vol.value });
        }
        Ok(CoareaCheck { shells: shells.value, volume: vol.value, error })
    }
}

/// Everything the monotone reports need at one β.
struct BetaRun<'a> {
    sets: &'a LevelSets,
    engine: &'a RadialEngine,
    bp: BetaParams,
    a: Vec<f64>,
    v: Vec<Estimate>,
    da: Vec<FdEstimate>,
    d_mono2: Vec<FdEstimate>,
    d_r2n: Vec<FdEstimate>,
    c0: Cumulative,
    c2: Cumulative,
    c4: Cumulative,
    coarea: Vec<CoareaCheck>,
}

impl<'a> BetaRun<'a> {
    fn new(sets: &'a LevelSets, engine: &'a RadialEngine, vprof: &VProfile, b: usize) -> Result<Self> {
        let n = engine.n as f64;
        let beta = vprof.betas[b];
        let bp = tilde_beta(engine.n, beta)?;
        let omega = engine.omega;
        let per_level: Vec<(f64, Estimate, [FdEstimate; 3])> = engine
            .levels
            .par_iter()
            .map(|&r| {
                let st = stencil_values(sets, vprof, r)?.for_beta(b);
                let (flux, _) = sets.flux(r, &[beta])?;
                let v = vprof.at(sets, r)?[b];
                Ok((
                    flux[0] * r.powf(1.0 - n),
                    v,
                    [
                        st.derivative(r, |_, a, _| a),
                        st.derivative(r, |_, a, v| a - 2.0 * (n - 2.0) * v),
                        st.derivative(r, |s, a, _| s.powf(2.0 - n) * (a - omega)),
                    ],
                ))
            })
            .collect::<Result<_>>()?;
        let w = |power| Weighted { bp, power };
        let c0 = engine.cumulate(w(0.0), true)?;
        let c2 = engine.cumulate(w(2.0 - n), true)?;
        let c4 = engine.cumulate(w(4.0 - 2.0 * n), false)?;
        let last = engine.levels.len() - 1;
        let coarea = vec![
            engine.coarea(w(0.0), &c0, 0, last)?,
            engine.coarea(w(2.0 - n), &c2, 0, last)?,
            engine.coarea(w(4.0 - 2.0 * n), &c4, 0, last)?,
        ];
        Ok(BetaRun {
            sets,
            engine,
            bp,
            a: per_level.iter().map(|p| p.0).collect(),
            v: per_level.iter().map(|p| p.1).collect(),
            da: per_level.iter().map(|p| p.2[0]).collect(),
            d_mono2: per_level.iter().map(|p| p.2[1]).collect(),
            d_r2n: per_level.iter().map(|p| p.2[2]).collect(),
            c0,
            c2,
            c4,
            coarea,
        })
    }

    fn r(&self, i: usize) -> f64 {
        self.engine.levels[i]
    }

    fn node(&self, i: usize) -> usize {
        self.engine.first + i
    }

    fn report(&self, id: QuantityId, rows: Vec<MonotoneRow>, violations: Vec<Violation>) -> MonotoneReport {
        MonotoneReport {
            manifold: self.sets.spec.to_string(),
            u: self.sets.source.to_string(),
            beta: self.bp.beta,
            tilde_beta: self.bp.tilde_beta,
            quantity_id: id,
            rows,
            violations,
        }
    }

    fn row(&self, i: usize, value: f64, lhs: f64, rhs: f64, budget: f64, violation: bool) -> MonotoneRow {
        let (match_error, match_error_adjusted) = match_errors(lhs, rhs, budget);
        MonotoneRow {
            beta: self.bp.beta,
            r: self.r(i),
            value,
            lhs_derivative: lhs,
            rhs_integral: rhs,
            match_error,
            match_error_adjusted,
            budget,
            violation_flag: violation,
        }
    }

    /// Derivative-form check; `sign = 1` for non-decreasing, `−1` for
    /// non-increasing. Both the FD derivative and the bulk side must have the
    /// monotone sign up to tolerance.
    fn derivative_report(
        &self,
        id: QuantityId,
        sign: f64,
        value: impl Fn(usize) -> f64,
        lhs: impl Fn(usize) -> FdEstimate,
        rhs: impl Fn(usize) -> Estimate,
    ) -> MonotoneReport {
        let mut rows = Vec::new();
        let mut violations = Vec::new();
        for i in 0..self.engine.levels.len() {
            let (l, rr) = (lhs(i), rhs(i));
            let budget = l.error() + rr.error;
            let tol = VIOLATION_FACTOR * budget;
            let lhs_bad = sign * l.value < -tol;
            let rhs_bad = sign * rr.value < -tol;
            if lhs_bad || rhs_bad {
                let magnitude = if lhs_bad { l.value } else { rr.value };
                violations.push(Violation { r: self.r(i), magnitude, tolerance: tol });
            }
            rows.push(self.row(i, value(i), l.value, rr.value, budget, lhs_bad || rhs_bad));
        }
        self.report(id, rows, violations)
    }

    /// Two-radius check `q(r) − q(r₀) = ∫_{r₀≤u≤r}` with q non-decreasing
    /// between consecutive levels; `q[i] = (value, error)`.
    fn difference_report(&self, id: QuantityId, q: &[(f64, f64)], cum: &Cumulative) -> MonotoneReport {
        let mut rows = Vec::new();
        let mut violations = Vec::new();
        let base = cum.prefix[self.node(0)];
        for i in 0..self.engine.levels.len() {
            let p = cum.prefix[self.node(i)];
            let rhs = p.value - base.value;
            let quad = (p.error - base.error).abs();
            let budget = if i == 0 { 0.0 } else { q[i].1 + q[0].1 + quad };
            let mut bad = rhs < -VIOLATION_FACTOR * budget;
            if i > 0 {
                let step = q[i].0 - q[i - 1].0;
                let cell = (p.error - cum.prefix[self.node(i - 1)].error).abs();
                let tol = VIOLATION_FACTOR * (q[i].1 + q[i - 1].1 + cell);
                if step < -tol {
                    bad = true;
                    violations.push(Violation { r: self.r(i), magnitude: step, tolerance: tol });
                }
            }
            rows.push(self.row(i, q[i].0, q[i].0 - q[0].0, rhs, budget, bad));
        }
        self.report(id, rows, violations)
    }

    fn mono_first(&self) -> MonotoneReport {
        let n = self.engine.n as f64;
        self.derivative_report(
            QuantityId::AMinus2n2V,
            1.0,
            |i| self.a[i] - 2.0 * (n - 2.0) * self.v[i].value,
            |i| self.d_mono2[i],
            |i| scale_est(self.c0.prefix[self.node(i)], self.r(i).powf(1.0 - n)),
        )
    }

    /// `g = (2−n)A + rA'` with its error.
    fn g(&self, i: usize) -> (f64, f64) {
        let n = self.engine.n as f64;
        let r = self.r(i);
        ((2.0 - n) * self.a[i] + r * self.da[i].value, r * self.da[i].error() + (n - 2.0) * LEVEL_ROUNDING * self.a[i].abs())
    }

    fn mono_second(&self) -> MonoSecond {
        let n = self.engine.n as f64;
        let omega = self.engine.omega;
        let g: Vec<(f64, f64)> = (0..self.engine.levels.len()).map(|i| self.g(i)).collect();
        let first_display = self.difference_report(QuantityId::GCombination, &g, &self.c2);
        let target = (2.0 - n) * omega;
        // g(0⁺) = g(r₀) − ∫_{u≤r₀}; it differs from the target only when u
        // is not normalized at the pole (cones), and then enters as a boundary term
        let inner = self.c2.prefix[self.node(0)];
        let g_pole = g[0].0 - inner.value;
        let boundary = Estimate { value: g_pole - target, error: g[0].1 + inner.error };
        let second_display = self.derivative_report(
            QuantityId::R2nAMinusOmega,
            1.0,
            |i| self.r(i).powf(2.0 - n) * (self.a[i] - omega),
            |i| self.d_r2n[i],
            |i| {
                let c = self.c2.prefix[self.node(i)];
                let total = Estimate { value: c.value + boundary.value, error: c.error + boundary.error };
                scale_est(total, self.r(i).powf(1.0 - n))
            },
        );
        let pole_limit = PoleLimit {
            applies: smooth_pole(self.sets.spec()),
            beta: self.bp.beta,
            r: self.r(0),
            g: g[0].0,
            g_pole,
            target,
            rel_error: (g[0].0 - target).abs() / target.abs(),
            pole_rel_error: (g_pole - target).abs() / target.abs(),
            approach: g.iter().take(8).map(|x| x.0).collect(),
        };
        MonoSecond { first_display, second_display, pole_limit }
    }

    fn mono_third(&self) -> Result<MonoThird> {
        let n = self.engine.n as f64;
        let count = self.engine.levels.len();
        let f: Vec<(f64, f64)> = (0..count)
            .map(|i| {
                let s = self.r(i).powf(3.0 - n);
                (s * self.da[i].value, s * self.da[i].error())
            })
            .collect();
        let two_radius = self.difference_report(QuantityId::R3nAPrime, &f, &self.c4);
        let tail = *self.c4.suffix.last().expect("non-empty");
        let tail_mass = tail.value.abs() + tail.error;
        let derivative_formula = self.derivative_report(
            QuantityId::A,
            -1.0,
            |i| self.a[i],
            |i| self.da[i],
            |i| scale_est(self.c4.suffix[self.node(i)], -self.r(i).powf(n - 3.0)),
        );
        for (i, row) in derivative_formula.rows.iter().enumerate() {
            let bound = self.r(i).powf(n - 3.0) * tail_mass;
            let tolerance = MATCH_TOLERANCE * row.lhs_derivative.abs().max(row.rhs_integral.abs()) + self.da[i].error();
            if bound > 1e-2 * tolerance {
                return Err(GeomError::TailTruncationDominates { tail: bound, tolerance });
            }
        }
        let f_max = f.iter().map(|x| x.0.abs()).fold(0.0, f64::max);
        let f_last = f.last().expect("non-empty").0;
        Ok(MonoThird {
            two_radius,
            derivative_formula,
            f_last,
            tail_ratio: if f_max > 0.0 { f_last.abs() / f_max } else { 0.0 },
            tail_bound: tail_mass,
        })
    }
}

/// Unit slope of the warping profile at the pole.
fn smooth_pole(spec: &ModelSpec) -> bool {
    spec.radial_profile().map(|p| (p.eval3(0.0).1 - 1.0).abs() < 1e-12).unwrap_or(false)
}

impl PoleLimit {
    pub fn pass(&self) -> bool {
        !self.applies || self.pole_rel_error < POLE_LIMIT_TOLERANCE
    }
}

fn scale_est(e: Estimate, s: f64) -> Estimate {
    Estimate { value: e.value * s, error: e.error * s.abs() }
}

/// The pole limit `g(r) → (2−n)ω` along the smallest levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleLimit {
    /// The limit needs a smooth pole; on a cone apex g tends to `(2−n)A(0⁺)`.
    pub applies: bool,
    pub beta: f64,
    pub r: f64,
    pub g: f64,
    /// `g(r₀)` minus the bulk integral below `r₀`.
    pub g_pole: f64,
    pub target: f64,
    pub rel_error: f64,
    pub pole_rel_error: f64,
    /// g on the first grid levels, increasing r.
    pub approach: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonoSecond {
    /// `g(r) − g(r₀)` against the bulk integral.
    pub first_display: MonotoneReport,
    /// `[r^{2−n}(A − ω)]'` against `r^{1−n}(g(0⁺) − (2−n)ω + ∫_{u≤r})`.
    pub second_display: MonotoneReport,
    pub pole_limit: PoleLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonoThird {
    /// `f(r) − f(r₀)`, `f = r^{3−n}A'`.
    pub two_radius: MonotoneReport,
    /// `A'` against `−β r^{n−3}∫_{u≥r}`, and `A' ≤ tol`.
    pub derivative_formula: MonotoneReport,
    /// `f` at the last level, and `|f(r_max)|/max|f|`.
    pub f_last: f64,
    pub tail_ratio: f64,
    /// Power-law bound on the outer integral beyond `ρ(100·r_max)`.
    pub tail_bound: f64,
}

struct Prepared {
    engine: RadialEngine,
    vprof: VProfile,
}

fn prepare(sets: &LevelSets, grid: &RadiusGrid, betas: &[f64]) -> Result<Prepared> {
    grid.validate()?;
    validate_betas(sets.n(), betas)?;
    let levels = grid.levels();
    if levels.len() < 5 {
        return Err(GeomError::InvalidGrid(format!("{} levels; need at least 5", levels.len())));
    }
    let engine = RadialEngine::new(sets, &levels)?;
    let vprof = VProfile::build(sets, &levels, betas)?;
    Ok(Prepared { engine, vprof })
}

/// `(A_β − 2(n−2)V_β)' = r^{1−n}∫_{u≤r}(…)`, and the combination is non-decreasing.
pub fn mono_first(sets: &LevelSets, grid: &RadiusGrid, beta: f64) -> Result<MonotoneReport> {
    let p = prepare(sets, grid, &[beta])?;
    Ok(BetaRun::new(sets, &p.engine, &p.vprof, 0)?.mono_first())
}

/// Both displays of the second formula and the pole limit of g.
pub fn mono_second(sets: &LevelSets, grid: &RadiusGrid, beta: f64) -> Result<MonoSecond> {
    let p = prepare(sets, grid, &[beta])?;
    Ok(BetaRun::new(sets, &p.engine, &p.vprof, 0)?.mono_second())
}

/// The two-radius formula for `r^{3−n}A'`, the outer-integral formula for
/// `A'` and the decay of `r^{3−n}A'`.
pub fn mono_third(sets: &LevelSets, grid: &RadiusGrid, beta: f64) -> Result<MonoThird> {
    let p = prepare(sets, grid, &[beta])?;
    BetaRun::new(sets, &p.engine, &p.vprof, 0)?.mono_third()
}

/// Everything for one model over a β list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneSuite {
    pub profiles: AvProfiles,
    pub boundedness: Boundedness,
    /// Boundedness is only asserted when Ric ≥ 0 holds.
    pub nonneg_ricci: bool,
    pub v_ode: VOdeReport,
    /// Per β: A, A_minus_2n2V, g_combination, r2n_A_minus_omega, r3n_Aprime.
    pub reports: Vec<MonotoneReport>,
    pub pole_limits: Vec<PoleLimit>,
    pub thirds: Vec<(f64, f64, f64)>,
    /// Per β: coarea double paths for the three weights `u^0, u^{2−n}, u^{4−2n}`.
    pub coarea: Vec<CoareaCheck>,
}

/// Tolerance on the boundedness inequalities.
pub const BOUNDEDNESS_TOLERANCE: f64 = 1e-9;
/// Tolerance on the pole limit of g.
pub const POLE_LIMIT_TOLERANCE: f64 = 1e-3;

impl MonotoneSuite {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass(MATCH_TOLERANCE))
            && self.v_ode.pass()
            && self.pole_limits.iter().all(PoleLimit::pass)
            && (!self.nonneg_ricci || self.boundedness.holds(BOUNDEDNESS_TOLERANCE))
    }

    pub fn summaries(&self) -> Vec<MonotoneSummary> {
        self.reports.iter().map(|r| r.summary()).collect()
    }

    pub fn reports_for(&self, id: QuantityId) -> Vec<&MonotoneReport> {
        self.reports.iter().filter(|r| r.quantity_id == id).collect()
    }
}

/// Runs every monotone check on a radial model for each β.
pub fn monotone_suite(sets: &LevelSets, grid: &RadiusGrid, betas: &[f64]) -> Result<MonotoneSuite> {
    let p = prepare(sets, grid, betas)?;
    let levels = p.engine.levels.clone();
    let rows = levels.par_iter().map(|&r| level_row(sets, &p.vprof, r)).collect::<Result<Vec<_>>>()?;
    let profiles = AvProfiles {
        manifold: sets.spec.to_string(),
        u: sets.source.to_string(),
        n: sets.n(),
        omega: sets.omega(),
        betas: betas.to_vec(),
        levels: rows,
    };
    let mut reports = Vec::new();
    let mut pole_limits = Vec::new();
    let mut thirds = Vec::new();
    let mut coarea = Vec::new();
    for b in 0..betas.len() {
        let run = BetaRun::new(sets, &p.engine, &p.vprof, b)?;
        let second = run.mono_second();
        let third = run.mono_third()?;
        reports.push(third.derivative_formula);
        reports.push(run.mono_first());
        reports.push(second.first_display);
        reports.push(second.second_display);
        reports.push(third.two_radius);
        pole_limits.push(second.pole_limit);
        thirds.push((betas[b], third.f_last, third.tail_bound));
        coarea.extend(run.coarea.iter().copied());
    }
    Ok(MonotoneSuite {
        boundedness: profiles.boundedness(),
        nonneg_ricci: sets.spec.radial_profile().and_then(|p| p.check_nonneg_ricci()).is_ok(),
        v_ode: check_v_ode(&profiles),
        profiles,
        reports,
        pole_limits,
        thirds,
        coarea,
    })
}

/// A bulk integral by both sides of the coarea formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BulkIntegral {
    /// `∫_{r₁}^{r₂} ds ∫_{u=s} F/|∇u|`.
    pub shells: f64,
    /// `∫_{r₁≤u≤r₂} F dvol`.
    pub volume: f64,
    pub error: f64,
}

/// `∫_{r₁≤u≤r₂} F` on a radial model, by coarea shells and by direct volume
/// quadrature in ρ; `r₁ = 0` integrates from the pole.
pub fn bulk_integral(
    sets: &LevelSets,
    r1: f64,
    r2: f64,
    f: impl Fn(&LevelPointQuantities) -> f64,
) -> Result<BulkIntegral> {
    let u = sets
        .radial()
        .ok_or_else(|| GeomError::WrongModel { expected: "radial model", got: sets.spec.to_string() })?;
    if !(r1 >= 0.0 && r2 > r1) {
        return Err(GeomError::NonRegularLevel { level: if r1 < 0.0 { r1 } else { r2 } });
    }
    let mut failed = None;
    let mut shell = |s: f64| match u.level_radius(s) {
        Ok(rho) => {
            let smp = RadialSample::at(u, rho);
            f(&smp.q) * smp.area / smp.q.grad_norm
        }
        Err(e) => {
            failed = Some(e);
            0.0
        }
    };
    let shells = if r1 == 0.0 { adaptive(&mut shell, 0.0, r2, 1e-12, 0.0)? } else { adaptive_log(&mut shell, r1, r2, 1e-12, 0.0)? };
    if let Some(e) = failed {
        return Err(e);
    }
    let rho2 = u.level_radius(r2)?;
    let vol_f = |rho: f64| {
        let smp = RadialSample::at(u, rho);
        f(&smp.q) * smp.area
    };
    let volume = if r1 == 0.0 {
        adaptive(vol_f, 0.0, rho2, 1e-12, 0.0)?
    } else {
        adaptive_log(vol_f, u.level_radius(r1)?, rho2, 1e-12, 0.0)?
    };
    let error = shells.error + volume.error;
    if (shells.value - volume.value).abs() > VIOLATION_FACTOR * error + 1e-10 * shells.value.abs().max(volume.value.abs()) {
        return Err(GeomError::CoareaMismatch { r1, r2, shells: shells.value, volume: volume.value });
    }
    Ok(BulkIntegral { shells: shells.value, volume: volume.value, error })
}

/// Which function's levels parameterize the umbilicity functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelParameter {
    /// Levels `{u = s}`.
    U,
    /// Levels `{u² = s}`, i.e. `{u = √s}`.
    USquared,
}

impl LevelParameter {
    fn u_level(self, s: f64) -> f64 {
        match self {
            LevelParameter::U => s,
            LevelParameter::USquared => s.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UmbilicityRow {
    pub r: f64,
    /// `r∫_r^{2r} (1/Vol(w=s))∫_{w=s}|II₀|² ds`, w the level parameter.
    pub functional: f64,
    /// `r²·(1/Vol(w=r))∫_{w=r}|II₀|²`.
    pub normalized: f64,
    /// `r^{2−n}∫_r^{2r}∫_{w=s}|II₀|² ds`.
    pub bracket: f64,
}

/// The umbilicity functional and its companions at one r.
pub fn umbilicity_functional(sets: &LevelSets, r: f64, param: LevelParameter) -> Result<UmbilicityRow> {
    let n = sets.n() as i32;
    let level = |s: f64| -> Result<(f64, f64)> {
        let u_level = param.u_level(s);
        let ii = sets.level_integral(u_level, |q| q.norm2_ii0)?;
        Ok((ii, sets.level_area(u_level)?))
    };
    let (la, lb) = (r.ln(), (2.0 * r).ln());
    let xs = gk15_nodes(la, lb);
    let vals: Vec<(f64, f64)> = xs.par_iter().map(|x| level(x.exp())).collect::<Result<_>>()?;
    let mut mean = [0.0; 15];
    let mut total = [0.0; 15];
    for (i, (x, (ii, area))) in xs.iter().zip(&vals).enumerate() {
        mean[i] = ii / area * x.exp();
        total[i] = ii * x.exp();
    }
    let (ii_r, area_r) = level(r)?;
    Ok(UmbilicityRow {
        r,
        functional: r * gk15_combine(la, lb, &mean).value,
        normalized: r * r * ii_r / area_r,
        bracket: r.powi(2 - n) * gk15_combine(la, lb, &total).value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UmbilicityReport {
    pub manifold: String,
    pub u: String,
    pub quantity_id: QuantityId,
    pub parameter: LevelParameter,
    pub rows: Vec<UmbilicityRow>,
    /// Mean of `normalized` over the rows and its largest deviation.
    pub plateau: f64,
    pub plateau_spread: f64,
    /// `normalized` at the last r over that at the first.
    pub trend: f64,
}

impl UmbilicityReport {
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut w = csv_writer();
        w.write_record(["r", "functional", "normalized", "bracket"]).expect("in-memory write");
        for r in &self.rows {
            w.write_record([r.r, r.functional, r.normalized, r.bracket].map(fmt_e)).expect("in-memory write");
        }
        finish_csv(w, header)
    }
}

/// The umbilicity functional on a list of r.
pub fn umbilicity_study(sets: &LevelSets, radii: &[f64], param: LevelParameter) -> Result<UmbilicityReport> {
    let rows: Vec<UmbilicityRow> = radii.iter().map(|&r| umbilicity_functional(sets, r, param)).collect::<Result<_>>()?;
    let plateau = rows.iter().map(|r| r.normalized).sum::<f64>() / rows.len().max(1) as f64;
    let plateau_spread = rows.iter().map(|r| (r.normalized - plateau).abs()).fold(0.0, f64::max);
    let trend = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if a.normalized != 0.0 => b.normalized / a.normalized,
        _ => 0.0,
    };
    Ok(UmbilicityReport {
        manifold: sets.spec.to_string(),
        u: sets.source.to_string(),
        quantity_id: QuantityId::UmbilicityFunctional,
        parameter: param,
        rows,
        plateau,
        plateau_spread,
        trend,
    })
}

/// `max |II₀|` over seeded points on `{u = r}`.
pub fn max_trace_free_ii(sets: &LevelSets, r: f64, count: usize, seed: u64) -> Result<f64> {
    let pts = sets.sample_level(r, count, seed)?;
    let field = sets.field();
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|lp| Ok(LevelPointQuantities::at_with_step(&sets.chart, field, &lp.point, lp.step)?.norm2_ii0.sqrt()))
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `max |u₁²/u₂ − 1|` on R³ × S¹ over seeded points with `|x| = radius`.
pub fn u1_squared_over_u2(length: f64, radius: f64, count: usize, seed: u64) -> Result<f64> {
    let u1 = crate::model_manifolds::ExampleFunction::u1(length);
    let u2 = crate::model_manifolds::ExampleFunction::u2(length);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let d = crate::model_manifolds::random_direction(&mut rng, 3);
        let theta = length * (rng.random::<f64>() - 0.5);
        let p = [radius * d[0], radius * d[1], radius * d[2], theta];
        u2.admissible(&p, 0.0)?;
        let ratio = u1.value(&p).powi(2) / u2.value(&p);
        worst = worst.max((ratio - 1.0).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeGrowth {
    pub n: usize,
    pub radii: Vec<f64>,
    /// `r^{−n}Vol(B_r)`.
    pub ratio: Vec<f64>,
    pub tail: f64,
}

/// `r^{−n}Vol(B_r)` about the pole (the origin on R³ × S¹).
pub fn volume_growth(spec: &ModelSpec, grid: &RadiusGrid) -> Result<VolumeGrowth> {
    grid.validate()?;
    let n = spec.dim();
    let radii = grid.levels();
    let ratio: Vec<f64> = radii.par_iter().map(|&r| Ok(ball_volume(spec, r)? / r.powi(n as i32))).collect::<Result<_>>()?;
    Ok(VolumeGrowth { n, tail: *ratio.last().expect("non-empty grid"), radii, ratio })
}
