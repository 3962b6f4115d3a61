//! Model spaces and example functions.
//!
//! Radial models (Euclidean space, cones, rotationally symmetric and warped
//! metrics) use one chart on R^n \ {0} in which `|x|` is the geodesic distance
//! to the pole:
//!
//! `g = x̂x̂ᵀ + (f/|x|)² (I − x̂x̂ᵀ)`,
//!
//! so the sphere factor never needs polar coordinates. The flat product
//! R³ × S¹ uses coordinates `(x₁, x₂, x₃, θ)` with θ unwrapped; periodicity
//! enters only through the distance function.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::jet::{Jet, MAX_DIM};
use crate::numeric::roots::bracket_and_solve;
use crate::numeric::spline::CubicSpline;
use crate::tensor_core::{
    laplacian, norm, point_frame, Domain, FlatMetric, MetricChart, MetricSource, ScalarField,
    StructureTag,
};

/// Apex/pole exclusion radius for cones and rotationally symmetric models.
pub const POLE_EXCLUSION: f64 = 1e-3;
/// Two lifts closer than this are treated as a tie in `distance_u2`.
pub const CUT_LOCUS_TIE: f64 = 1e-9;
/// Default relative gradient floor at regular points.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Radial warping function φ of `dr² + φ(r)² g_{S^{n−1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    /// φ = c·r.
    Linear { c: f64 },
    /// φ = c·r + (1 − c)·r/√(1 + (r/a)²): concave, φ'(0) = 1, φ' → c.
    Concave { c: f64, a: f64 },
    /// φ = r(1 + k r²): convex, negative radial Ricci.
    Convex { k: f64 },
    /// φ = sinh r (hyperbolic space).
    Sinh,
    /// Tabulated (r_i, φ_i) with r_0 = 0, interpolated by a natural cubic spline
    /// and extended linearly past the last knot.
    Table { r: Vec<f64>, phi: Vec<f64> },
}

/// A profile ready for evaluation.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    kind: Profile,
    spline: Option<CubicSpline>,
}

impl RadialProfile {
    pub fn new(kind: Profile) -> Result<Self> {
        let spline = match &kind {
            Profile::Table { r, phi } => Some(
                CubicSpline::natural(r, phi)
                    .ok_or_else(|| GeomError::InvalidProfile("table radii must be strictly increasing with at least 3 knots".into()))?,
            ),
            Profile::Linear { c } if !(*c > 0.0 && *c <= 1.0) => {
                return Err(GeomError::InvalidProfile(format!("cone parameter c = {c} outside (0, 1]")))
            }
            Profile::Concave { c, a } if !(*c > 0.0 && *c <= 1.0 && *a > 0.0) => {
                return Err(GeomError::InvalidProfile(format!("concave profile needs 0 < c ≤ 1 and a > 0 (c = {c}, a = {a})")))
            }
            Profile::Convex { k } if !(*k >= 0.0) => {
                return Err(GeomError::InvalidProfile(format!("convex profile needs k ≥ 0 (k = {k})")))
            }
            _ => None,
        };
        let p = RadialProfile { kind, spline };
        p.check_pole()?;
        Ok(p)
    }

    pub fn kind(&self) -> &Profile {
        &self.kind
    }

    /// φ, φ', φ''.
    pub fn eval3(&self, r: f64) -> (f64, f64, f64) {
        match &self.kind {
            Profile::Linear { c } => (c * r, *c, 0.0),
            Profile::Concave { c, a } => {
                let s = 1.0 + (r / a).powi(2);
                let is = 1.0 / s.sqrt();
                (
                    c * r + (1.0 - c) * r * is,
                    c + (1.0 - c) * is * is * is,
                    -3.0 * (1.0 - c) * (r / (a * a)) * is.powi(5),
                )
            }
            Profile::Convex { k } => (r * (1.0 + k * r * r), 1.0 + 3.0 * k * r * r, 6.0 * k * r),
            Profile::Sinh => (r.sinh(), r.cosh(), r.sinh()),
            Profile::Table { .. } => self.spline.as_ref().expect("built in new").eval3(r),
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        self.eval3(r).0
    }

    /// φ'(∞) when the profile is asymptotically linear.
    pub fn asymptotic_slope(&self) -> Option<f64> {
        match &self.kind {
            Profile::Linear { c } | Profile::Concave { c, .. } => Some(*c),
            Profile::Table { .. } => {
                let s = self.spline.as_ref().expect("built in new");
                Some(s.eval3(s.domain().1 + 1.0).1)
            }
            _ => None,
        }
    }

    fn check_pole(&self) -> Result<()> {
        let (p0, d0, _) = self.eval3(0.0);
        let tol = if self.spline.is_some() { 1e-3 } else { 1e-12 };
        if (p0.abs() > 1e-12 || (d0 - 1.0).abs() > tol)
            && !matches!(self.kind, Profile::Linear { .. }) {
                return Err(GeomError::InvalidProfile(format!(
                    "pole conditions fail: φ(0) = {p0}, φ'(0) = {d0}"
                )));
            }
        for i in 0..=400 {
            let r = 1e-3 * 10f64.powf(i as f64 * 0.02);
            if self.phi(r) <= 0.0 {
                return Err(GeomError::InvalidProfile(format!("φ({r}) ≤ 0")));
            }
        }
        Ok(())
    }

    /// φ'' ≤ 0 and 0 < φ' ≤ 1 on a log grid in [1e−3, 1e5]; together these
    /// give nonnegative Ricci curvature.
    pub fn check_nonneg_ricci(&self) -> Result<()> {
        for i in 0..=800 {
            let r = 1e-3 * 10f64.powf(i as f64 * 0.01);
            let (_, d1, d2) = self.eval3(r);
            if d2 > 1e-12 || d1 <= 0.0 || d1 > 1.0 + 1e-12 {
                return Err(GeomError::InvalidProfile(format!(
                    "profile violates φ'' ≤ 0, 0 < φ' ≤ 1 at r = {r} (φ' = {d1}, φ'' = {d2})"
                )));
            }
        }
        Ok(())
    }
}

/// Warping function of charts `dr² + f(r, x̂)² g_{S^{n−1}}`,
/// here `f = c·(1 + anisotropy·x̂₁²)·r^exponent`. `exponent = 1` is a cone
/// over a (possibly non-round) sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpProfile {
    pub c: f64,
    pub exponent: f64,
    #[serde(default)]
    pub anisotropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Euclidean { n: usize },
    Cone { n: usize, c: f64 },
    RotSym { n: usize, profile: Profile },
    Warped { n: usize, warp: WarpProfile },
    #[serde(rename = "product_r3_s1")]
    ProductR3S1 { length: f64 },
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Euclidean { n }
            | ModelSpec::Cone { n, .. }
            | ModelSpec::RotSym { n, .. }
            | ModelSpec::Warped { n, .. } => *n,
            ModelSpec::ProductR3S1 { .. } => 4,
        }
    }

    /// Warping profile for the models with a pole and rotational symmetry.
    pub fn radial_profile(&self) -> Result<RadialProfile> {
        match self {
            ModelSpec::Euclidean { .. } => RadialProfile::new(Profile::Linear { c: 1.0 }),
            ModelSpec::Cone { c, .. } => RadialProfile::new(Profile::Linear { c: *c }),
            ModelSpec::RotSym { profile, .. } => RadialProfile::new(profile.clone()),
            _ => Err(GeomError::WrongModel {
                expected: "rotationally symmetric",
                got: self.to_string(),
            }),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(
            self,
            ModelSpec::Euclidean { .. } | ModelSpec::Cone { .. } | ModelSpec::RotSym { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n <= 2 || n > MAX_DIM {
            return Err(GeomError::UnsupportedDimension(n));
        }
        match self {
            ModelSpec::Warped { warp, .. } => {
                if !(warp.c > 0.0) || !(warp.anisotropy > -1.0) || !warp.exponent.is_finite() {
                    return Err(GeomError::InvalidProfile(format!("invalid warp {warp:?}")));
                }
                Ok(())
            }
            ModelSpec::ProductR3S1 { length } if !(*length > 0.0) => Err(
                GeomError::InvalidProfile(format!("circle length {length} must be positive")),
            ),
            ModelSpec::ProductR3S1 { .. } => Ok(()),
            _ => self.radial_profile().map(|_| ()),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Euclidean { n } => write!(f, "euclidean:{n}"),
            ModelSpec::Cone { n, c } => write!(f, "cone:{n}:{c}"),
            ModelSpec::RotSym { n, profile } => match profile {
                Profile::Concave { c, a } => write!(f, "rotsym:{n}:{c}:{a}"),
                Profile::Convex { k } => write!(f, "rotsym_convex:{n}:{k}"),
                Profile::Sinh => write!(f, "hyperbolic:{n}"),
                Profile::Linear { c } => write!(f, "rotsym_linear:{n}:{c}"),
                Profile::Table { r, .. } => write!(f, "rotsym_table:{n}:{}", r.len()),
            },
            ModelSpec::Warped { n, warp } => {
                write!(f, "warped:{n}:{}:{}:{}", warp.c, warp.exponent, warp.anisotropy)
            }
            ModelSpec::ProductR3S1 { length } => write!(f, "product_r3_s1:{length}"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = String;

    /// `euclidean:N`, `cone:N:C`, `rotsym:N:C[:A]`, `rotsym_linear:N:C`,
    /// `rotsym_convex:N:K`, `hyperbolic:N`, `warped:N:C:EXP[:ANISO]`, `product_r3_s1:L`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> std::result::Result<f64, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("`{s}`: missing field {i}"))?
                .parse::<f64>()
                .map_err(|e| format!("`{s}`: field {i}: {e}"))
        };
        let dim = || -> std::result::Result<usize, String> {
            parts
                .get(1)
                .ok_or_else(|| format!("`{s}`: missing dimension"))?
                .parse::<usize>()
                .map_err(|e| format!("`{s}`: dimension: {e}"))
        };
        let arity = |lo: usize, hi: usize| {
            if parts.len() < lo || parts.len() > hi {
                Err(format!("`{s}`: expected {}..={} fields", lo - 1, hi - 1))
            } else {
                Ok(())
            }
        };
        match parts[0] {
            "euclidean" => {
                arity(2, 2)?;
                Ok(ModelSpec::Euclidean { n: dim()? })
            }
            "cone" => {
                arity(3, 3)?;
                Ok(ModelSpec::Cone { n: dim()?, c: num(2)? })
            }
            "rotsym" => {
                arity(3, 4)?;
                let a = if parts.len() == 4 { num(3)? } else { 1.0 };
                Ok(ModelSpec::RotSym { n: dim()?, profile: Profile::Concave { c: num(2)?, a } })
            }
            "rotsym_linear" => {
                arity(3, 3)?;
                Ok(ModelSpec::RotSym { n: dim()?, profile: Profile::Linear { c: num(2)? } })
            }
            "rotsym_convex" => {
                arity(3, 3)?;
                Ok(ModelSpec::RotSym { n: dim()?, profile: Profile::Convex { k: num(2)? } })
            }
            "hyperbolic" => {
                arity(2, 2)?;
                Ok(ModelSpec::RotSym { n: dim()?, profile: Profile::Sinh })
            }
            "warped" => {
                arity(4, 5)?;
                let anisotropy = if parts.len() == 5 { num(4)? } else { 0.0 };
                Ok(ModelSpec::Warped {
                    n: dim()?,
                    warp: WarpProfile { c: num(2)?, exponent: num(3)?, anisotropy },
                })
            }
            "product_r3_s1" => {
                arity(2, 2)?;
                Ok(ModelSpec::ProductR3S1 { length: num(1)? })
            }
            other => Err(format!("unknown manifold kind `{other}`")),
        }
    }
}

/// Metric `ψ² I + (1 − ψ²) x x ᵀ/|x|²` with `ψ = φ(|x|)/|x|`.
#[derive(Debug, Clone)]
pub struct RadialMetric {
    n: usize,
    profile: RadialProfile,
}

impl MetricSource for RadialMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn metric_jets(&self, x: &[Jet]) -> Vec<Jet> {
        let r = Jet::norm(x);
        let (p0, p1, p2) = self.profile.eval3(r.value());
        let psi = r.compose(p0, p1, p2) / r;
        sphere_warped(x, r, psi)
    }
}

fn sphere_warped(x: &[Jet], r: Jet, psi: Jet) -> Vec<Jet> {
    let n = x.len();
    let psi2 = psi * psi;
    let w = (1.0 - psi2) / (r * r);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut g = w * x[i] * x[j];
            if i == j {
                g += psi2;
            }
            out.push(g);
        }
    }
    out
}

/// Warped chart with `ψ = c(1 + a x̂₁²) r^{e−1}`.
#[derive(Debug, Clone)]
pub struct WarpedMetric {
    n: usize,
    warp: WarpProfile,
}

impl MetricSource for WarpedMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn metric_jets(&self, x: &[Jet]) -> Vec<Jet> {
        let r = Jet::norm(x);
        let w = self.warp;
        let x1 = x[0] / r;
        let psi = (x1 * x1 * w.anisotropy + 1.0) * r.powf(w.exponent - 1.0) * w.c;
        sphere_warped(x, r, psi)
    }
}

pub fn build_chart(spec: &ModelSpec) -> Result<MetricChart> {
    spec.validate()?;
    let n = spec.dim();
    let punctured = Domain::Punctured { r_min: POLE_EXCLUSION };
    match spec {
        ModelSpec::Euclidean { .. } => MetricChart::new(
            Arc::new(FlatMetric { dim: n }),
            punctured,
            StructureTag::Euclidean,
            (0.01, 10.0),
        ),
        ModelSpec::Cone { .. } | ModelSpec::RotSym { .. } => MetricChart::new(
            Arc::new(RadialMetric { n, profile: spec.radial_profile()? }),
            punctured,
            StructureTag::RotationallySymmetric,
            (0.01, 10.0),
        ),
        ModelSpec::Warped { warp, .. } => MetricChart::new(
            Arc::new(WarpedMetric { n, warp: *warp }),
            punctured,
            StructureTag::WarpedProduct,
            (0.01, 10.0),
        ),
        ModelSpec::ProductR3S1 { .. } => MetricChart::new(
            Arc::new(FlatMetric { dim: 4 }),
            Domain::Everywhere,
            StructureTag::FlatProduct,
            (0.01, 10.0),
        ),
    }
}

/// Distance to the origin on R³ × S¹ with circle length `length`,
/// minimized over lifts `θ + kL`.
pub fn distance_u2(length: f64, p: &[f64]) -> Result<f64> {
    let (d1, d2) = two_nearest_lifts(length, p)?;
    if d2.0 - d1.0 < CUT_LOCUS_TIE {
        return Err(GeomError::CutLocusPoint { point: p.to_vec(), gap: d2.0 - d1.0 });
    }
    Ok(d1.0)
}

/// The two smallest lift distances with their deck indices.
fn two_nearest_lifts(length: f64, p: &[f64]) -> Result<((f64, i64), (f64, i64))> {
    if p.len() != 4 || p.iter().all(|&x| x == 0.0) {
        return Err(GeomError::PointOutsideDomain { point: p.to_vec() });
    }
    let x2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    let k0 = (-p[3] / length).round() as i64;
    let mut lifts: Vec<(f64, i64)> = (k0 - 2..=k0 + 2)
        .map(|k| {
            let t = p[3] + k as f64 * length;
            ((x2 + t * t).sqrt(), k)
        })
        .collect();
    lifts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((lifts[0], lifts[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleId {
    /// √(|x|² + x₁²) − x₁ on R^n.
    ShiftedSphere,
    /// |x|^{1/2} on R³ × S¹ (x the R³ factor).
    ProductU1,
    /// Distance to the origin on R³ × S¹.
    ProductU2,
    /// `scale·|x|` on radial models.
    RadialU,
}

impl FromStr for ExampleId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ex1" | "shifted_sphere" => Ok(ExampleId::ShiftedSphere),
            "u1" => Ok(ExampleId::ProductU1),
            "u2" => Ok(ExampleId::ProductU2),
            "radial" | "radial_u" => Ok(ExampleId::RadialU),
            _ => Err(format!("unknown example function `{s}`")),
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleId::ShiftedSphere => "ex1",
            ExampleId::ProductU1 => "u1",
            ExampleId::ProductU2 => "u2",
            ExampleId::RadialU => "radial",
        })
    }
}

/// Closed-form example functions with exact jets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExampleFunction {
    pub id: ExampleId,
    /// Circle length for the product examples, linear factor for `RadialU`.
    pub param: f64,
}

impl ExampleFunction {
    pub fn ex1() -> Self {
        ExampleFunction { id: ExampleId::ShiftedSphere, param: 0.0 }
    }

    pub fn u1(length: f64) -> Self {
        ExampleFunction { id: ExampleId::ProductU1, param: length }
    }

    pub fn u2(length: f64) -> Self {
        ExampleFunction { id: ExampleId::ProductU2, param: length }
    }

    pub fn radial(scale: f64) -> Self {
        ExampleFunction { id: ExampleId::RadialU, param: scale }
    }

    /// Builds the example matching `spec`; radial u is `c^{(n−1)/(n−2)}|x|` on cones.
    pub fn for_model(id: ExampleId, spec: &ModelSpec) -> Result<Self> {
        let wrong = |expected| GeomError::WrongModel { expected, got: spec.to_string() };
        match (id, spec) {
            (ExampleId::ShiftedSphere, ModelSpec::Euclidean { .. }) => Ok(Self::ex1()),
            (ExampleId::ProductU1, ModelSpec::ProductR3S1 { length }) => Ok(Self::u1(*length)),
            (ExampleId::ProductU2, ModelSpec::ProductR3S1 { length }) => Ok(Self::u2(*length)),
            (ExampleId::RadialU, ModelSpec::Euclidean { .. }) => Ok(Self::radial(1.0)),
            (ExampleId::RadialU, ModelSpec::Cone { n, c }) => {
                Ok(Self::radial(c.powf((*n as f64 - 1.0) / (*n as f64 - 2.0))))
            }
            (ExampleId::ShiftedSphere, _) | (ExampleId::RadialU, _) => {
                Err(wrong("euclidean or cone"))
            }
            _ => Err(wrong("product_r3_s1")),
        }
    }
}

impl ScalarField for ExampleFunction {
    fn jet(&self, p: &[f64]) -> Jet {
        let x = Jet::coordinates(p);
        match self.id {
            ExampleId::ShiftedSphere => {
                let r2 = x.iter().fold(x[0].lift(0.0), |s, xi| s + *xi * *xi);
                (r2 + x[0] * x[0]).sqrt() - x[0]
            }
            ExampleId::ProductU1 => Jet::norm(&x[..3]).sqrt(),
            ExampleId::ProductU2 => {
                let k = two_nearest_lifts(self.param, p).map(|(a, _)| a.1).unwrap_or(0);
                let mut y = x.clone();
                y[3] = x[3] + k as f64 * self.param;
                Jet::norm(&y)
            }
            ExampleId::RadialU => Jet::norm(&x) * self.param,
        }
    }

    fn admissible(&self, p: &[f64], reach: f64) -> Result<()> {
        match self.id {
            ExampleId::ProductU2 => {
                let (d1, d2) = two_nearest_lifts(self.param, p)?;
                // d2 − d1 is 2-Lipschitz, so the stencil stays on one sheet
                let margin = CUT_LOCUS_TIE + 2.0 * reach * (p.len() as f64).sqrt();
                if d2.0 - d1.0 <= margin {
                    return Err(GeomError::CutLocusPoint { point: p.to_vec(), gap: d2.0 - d1.0 });
                }
                Ok(())
            }
            ExampleId::ProductU1 => {
                if norm(&p[..3]) <= reach * 3f64.sqrt() {
                    return Err(GeomError::PointOutsideDomain { point: p.to_vec() });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn label(&self) -> String {
        self.id.to_string()
    }
}

/// Smallest Ricci eigenvalue (relative to g) over sampled points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicciReport {
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub worst_point: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Eigenvalues of `Ric` relative to `g` (i.e. of `L⁻¹ Ric L⁻ᵀ`, `g = LLᵀ`).
pub fn ricci_eigenvalues(g: &DMatrix<f64>, ric: &DMatrix<f64>) -> Option<DVector<f64>> {
    let l = g.clone().cholesky()?.l();
    let li = l.try_inverse()?;
    let m = &li * ric * li.transpose();
    let m = (&m + m.transpose()) * 0.5;
    Some(SymmetricEigen::new(m).eigenvalues)
}

/// Samples points with `|x|` log-uniform in `radii` (R³ factor for products).
pub fn ricci_nonneg_check(
    chart: &MetricChart,
    sample_count: usize,
    radii: (f64, f64),
    seed: u64,
) -> RicciReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = chart.dim();
    let mut min = f64::INFINITY;
    let mut worst = vec![0.0; n];
    let mut taken = 0;
    let tolerance = 1e-9;
    while taken < sample_count {
        let dir = random_direction(&mut rng, n);
        let r = radii.0 * (radii.1 / radii.0).powf(rng.random::<f64>());
        let p: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let Ok(frame) = point_frame(chart, &p) else { continue };
        taken += 1;
        let ric = frame.ricci();
        if let Some(ev) = ricci_eigenvalues(&frame.metric, ric.matrix()) {
            // scale-free comparison against 1/r²
            let e = ev.min() * r * r;
            if e < min {
                min = e;
                worst = p;
            }
        }
    }
    RicciReport {
        samples: taken,
        min_eigenvalue: min,
        worst_point: worst,
        tolerance,
        pass: min >= -tolerance,
    }
}

/// Uniform direction on S^{n−1} by rejection from the cube.
pub fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// Points on `{u = level}` with `|∇u| > floor`, found by root finding along
/// seeded random rays from the origin. `reach` is the stencil half-width the
/// caller will use around each point; points whose stencil would cross a
/// cut locus are discarded.
pub fn regular_point_sampler(
    chart: &MetricChart,
    u: &dyn ScalarField,
    level: f64,
    count: usize,
    seed: u64,
    reach: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = chart.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let max_attempts = 50 * count.max(1);
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= max_attempts {
            return Err(GeomError::NoRegularPoints { level, attempts });
        }
        attempts += 1;
        let dir = random_direction(&mut rng, n);
        let along = |t: f64| {
            let p: Vec<f64> = dir.iter().map(|d| d * t).collect();
            u.value(&p) - level
        };
        let Ok(t) = bracket_and_solve(along, 0.5 * level.max(1e-3), 2.0 * level.max(1e-3), 1e-15 * level.max(1.0))
        else {
            continue;
        };
        let p: Vec<f64> = dir.iter().map(|d| d * t).collect();
        if (u.value(&p) - level).abs() >= 1e-10 * level.max(1.0) {
            continue;
        }
        if u.admissible(&p, reach).is_err() || chart.check_stencil(&p, reach).is_err() {
            continue;
        }
        let Ok(frame) = point_frame(chart, &p) else { continue };
        let jet = u.jet(&p);
        let du = DVector::from_column_slice(jet.grad());
        let grad_norm = frame.norm2_covector(&du).sqrt();
        if grad_norm <= GRADIENT_FLOOR * level / norm(&p).max(f64::MIN_POSITIVE) {
            continue;
        }
        out.push(p);
    }
    Ok(out)
}

/// Output of [`recover_warped_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpRecovery {
    pub radii: Vec<f64>,
    /// `(f(r)/r) / (f(r₀)/r₀)` from integrating `∂_r log f = (Δr² − 2)/(2(n−1)r)`.
    pub f_over_r: Vec<f64>,
    /// `1 − r ∂_r log f` at each radius.
    pub cone_residual: Vec<f64>,
}

impl WarpRecovery {
    pub fn max_ratio_deviation(&self) -> f64 {
        self.f_over_r.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_cone_residual(&self) -> f64 {
        self.cone_residual.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

struct RadiusSquared;

impl ScalarField for RadiusSquared {
    fn jet(&self, p: &[f64]) -> Jet {
        let x = Jet::coordinates(p);
        x.iter().fold(x[0].lift(0.0), |s, xi| s + *xi * *xi)
    }
}

/// Recovers the radial dependence of the warping function along the ray
/// through `direction` from measured `Δr²` (RK4 in log r).
pub fn recover_warped_profile(
    chart: &MetricChart,
    direction: &[f64],
    radii: &[f64],
) -> Result<WarpRecovery> {
    let n = chart.dim() as f64;
    let d = norm(direction);
    let slope = |r: f64| -> Result<f64> {
        let p: Vec<f64> = direction.iter().map(|x| x / d * r).collect();
        // r ∂_r log f
        Ok((laplacian(chart, &RadiusSquared, &p)? - 2.0) / (2.0 * (n - 1.0)))
    };
    let mut f_over_r = vec![1.0];
    let mut cone_residual = vec![1.0 - slope(radii[0])?];
    let mut log_ratio = 0.0;
    for w in radii.windows(2) {
        let (t0, t1) = (w[0].ln(), w[1].ln());
        let h = t1 - t0;
        // d log(f/r)/dt = r ∂_r log f − 1, autonomous in t
        let k = |t: f64| slope(t.exp()).map(|s| s - 1.0);
        let k1 = k(t0)?;
        let k2 = k(t0 + 0.5 * h)?;
        let k3 = k2;
        let k4 = k(t1)?;
        log_ratio += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        f_over_r.push(log_ratio.exp());
        cone_residual.push(-k4);
    }
    Ok(WarpRecovery { radii: radii.to_vec(), f_over_r, cone_residual })
}
