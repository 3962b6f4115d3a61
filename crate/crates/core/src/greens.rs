//! Green's functions of rotationally symmetric models and `u = G^{1/(2−n)}`.
//!
//! `G(ρ) = (n−2)·ω·∫_ρ^∞ ds/A(s)` with `A = ω φ^{n−1}`. The integral is
//! accumulated downward over a log-spaced node set (64 nodes per decade from
//! 1e−6 to 1e6) with an analytic power-law tail above the last node. Between
//! nodes `G` is completed with a fixed 16-point Gauss–Legendre rule, so `G`
//! is smooth in ρ to rounding; `G'` and `G''` are closed form.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::jet::Jet;
use crate::model_manifolds::{ExampleFunction, ExampleId, ModelSpec, RadialProfile};
use crate::numeric::quadrature::{adaptive, adaptive_log, GaussLegendre};
use crate::numeric::roots::bracket_and_solve;
use crate::numeric::spline::CubicSpline;
use crate::numeric::unit_sphere_area;
use crate::tensor_core::{laplacian, MetricChart, ScalarField};

const NODE_MIN: f64 = 1e-12;
const NODES_PER_DECADE: usize = 64;
const DECADES: usize = 18;

/// A radial solution of `Δu² = 2n|∇u|²` on a rotationally symmetric model.
pub trait RadialU: ScalarField {
    fn n(&self) -> usize;
    fn profile(&self) -> &RadialProfile;
    /// `u(ρ)`, `u'(ρ)`, `u''(ρ)` in the geodesic radius ρ.
    fn u3(&self, rho: f64) -> (f64, f64, f64);
    /// The geodesic radius of the level set `{u = level}`.
    fn level_radius(&self, level: f64) -> Result<f64>;

    /// `Vol({u = level})` together with ρ.
    fn level_area(&self, level: f64) -> Result<(f64, f64)> {
        let rho = self.level_radius(level)?;
        let omega = unit_sphere_area(self.n());
        Ok((omega * self.profile().phi(rho).powi(self.n() as i32 - 1), rho))
    }
}

fn radial_jet(p: &[f64], (u0, u1, u2): (f64, f64, f64)) -> Jet {
    Jet::norm(&Jet::coordinates(p)).compose(u0, u1, u2)
}

/// `(n-2)∫_ρ^∞ φ^{1-n}` with `φ` replaced by its tangent line at `ρ`;
/// exact on conical ends.
fn affine_tail(profile: &RadialProfile, n: usize, rho: f64) -> f64 {
    let (phi, dphi, _) = profile.eval3(rho);
    phi.powi(2 - n as i32) / dphi
}

/// Numerically integrated Green's function with its `u`.
#[derive(Debug, Clone)]
pub struct RadialGreens {
    n: usize,
    omega: f64,
    profile: RadialProfile,
    nodes: Vec<f64>,
    g_nodes: Vec<f64>,
    gl: GaussLegendre,
    tail_exponent: f64,
}

impl RadialGreens {
    pub fn new(n: usize, profile: RadialProfile) -> Result<Self> {
        if n <= 2 {
            return Err(GeomError::UnsupportedDimension(n));
        }
        let omega = unit_sphere_area(n);
        let count = NODES_PER_DECADE * DECADES;
        let nodes: Vec<f64> = (0..=count)
            .map(|k| NODE_MIN * 10f64.powf(k as f64 / NODES_PER_DECADE as f64))
            .collect();
        let area = |s: f64| omega * profile.phi(s).powi(n as i32 - 1);

        // least-squares slope of log A against log s over the last decade
        let last = &nodes[count - NODES_PER_DECADE..];
        let xs: Vec<f64> = last.iter().map(|s| s.ln()).collect();
        let ys: Vec<f64> = last.iter().map(|&s| area(s).ln()).collect();
        let slope = ls_slope(&xs, &ys);
        let expected = n as f64 - 1.0;
        // overflowing area means super-polynomial growth
        if !slope.is_finite() {
            return Err(GeomError::TailNotConical { slope: f64::INFINITY, expected });
        }
        if !(slope > 1.0 + 1e-3) {
            return Err(GeomError::ParabolicManifold { slope });
        }
        if (slope - expected).abs() > 1e-3 {
            return Err(GeomError::TailNotConical { slope, expected });
        }
        let mut g_nodes = vec![0.0; count + 1];
        g_nodes[count] = affine_tail(&profile, n, nodes[count]);
        let nm2 = n as f64 - 2.0;
        let integrand = |s: f64| profile.phi(s).powi(1 - n as i32);
        for k in (0..count).rev() {
            let cell = adaptive(integrand, nodes[k], nodes[k + 1], 1e-13, 0.0)?;
            g_nodes[k] = g_nodes[k + 1] + nm2 * cell.value;
        }
        Ok(RadialGreens {
            n,
            omega,
            profile,
            nodes,
            g_nodes,
            gl: GaussLegendre::new(16),
            tail_exponent: slope,
        })
    }

    pub fn for_spec(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        RadialGreens::new(spec.dim(), spec.radial_profile()?)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Fitted exponent of `A(s) ~ a s^k` on the last decade.
    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    pub fn area(&self, rho: f64) -> f64 {
        self.omega * self.profile.phi(rho).powi(self.n as i32 - 1)
    }

    /// `G(ρ)`, `G'(ρ)`, `G''(ρ)`.
    pub fn g3(&self, rho: f64) -> (f64, f64, f64) {
        let n = self.n as i32;
        let nm2 = f64::from(n - 2);
        let (phi, dphi, _) = self.profile.eval3(rho);
        let d1 = -nm2 * phi.powi(1 - n);
        let d2 = nm2 * f64::from(n - 1) * dphi * phi.powi(-n);
        let top = *self.nodes.last().expect("nodes");
        let g = if rho >= top {
            affine_tail(&self.profile, self.n, rho)
        } else {
            let pos = (rho / NODE_MIN).log10() * NODES_PER_DECADE as f64;
            let k = (pos.floor().max(-1.0) as isize + 1).clamp(0, self.nodes.len() as isize - 1) as usize;
            self.g_nodes[k] + nm2 * self.gl.integrate(|s| self.profile.phi(s).powi(1 - n), rho, self.nodes[k])
        };
        (g, d1, d2)
    }
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

impl ScalarField for RadialGreens {
    fn jet(&self, p: &[f64]) -> Jet {
        radial_jet(p, self.u3(crate::tensor_core::norm(p)))
    }

    fn label(&self) -> String {
        "greens".into()
    }
}

impl RadialU for RadialGreens {
    fn n(&self) -> usize {
        self.n
    }

    fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    fn u3(&self, rho: f64) -> (f64, f64, f64) {
        let (g, g1, g2) = self.g3(rho);
        let e = 1.0 / (2.0 - self.n as f64);
        let u = g.powf(e);
        // u = G^e
        let u1 = e * u / g * g1;
        let u2 = e * (e - 1.0) * u / (g * g) * g1 * g1 + e * u / g * g2;
        (u, u1, u2)
    }

    fn level_radius(&self, level: f64) -> Result<f64> {
        bracket_and_solve(|rho| self.u3(rho).0 - level, 0.5 * level, 2.0 * level, 1e-15 * level)
    }
}

/// `u = scale·ρ`, exact on Euclidean space (scale 1) and on cones
/// (scale `c^{(n−1)/(n−2)}`).
#[derive(Debug, Clone)]
pub struct LinearRadial {
    n: usize,
    profile: RadialProfile,
    pub scale: f64,
}

impl LinearRadial {
    pub fn for_spec(spec: &ModelSpec) -> Result<Self> {
        let n = spec.dim();
        let scale = match spec {
            ModelSpec::Euclidean { .. } => 1.0,
            ModelSpec::Cone { c, .. } => c.powf((n as f64 - 1.0) / (n as f64 - 2.0)),
            _ => {
                return Err(GeomError::WrongModel { expected: "euclidean or cone", got: spec.to_string() })
            }
        };
        Ok(LinearRadial { n, profile: spec.radial_profile()?, scale })
    }
}

impl ScalarField for LinearRadial {
    fn jet(&self, p: &[f64]) -> Jet {
        Jet::norm(&Jet::coordinates(p)) * self.scale
    }

    fn label(&self) -> String {
        "analytic_radial".into()
    }
}

impl RadialU for LinearRadial {
    fn n(&self) -> usize {
        self.n
    }

    fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    fn u3(&self, rho: f64) -> (f64, f64, f64) {
        (self.scale * rho, self.scale, 0.0)
    }

    fn level_radius(&self, level: f64) -> Result<f64> {
        Ok(level / self.scale)
    }
}

/// Where the function u comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum USource {
    Greens,
    AnalyticRadial,
    Example(ExampleId),
}

impl FromStr for USource {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "greens" => Ok(USource::Greens),
            "analytic_radial" => Ok(USource::AnalyticRadial),
            _ => match s.strip_prefix("example:") {
                Some(id) => Ok(USource::Example(id.parse()?)),
                None => Err(format!("unknown u source `{s}` (greens | analytic_radial | example:<id>)")),
            },
        }
    }
}

impl TryFrom<String> for USource {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl fmt::Display for USource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            USource::Greens => f.write_str("greens"),
            USource::AnalyticRadial => f.write_str("analytic_radial"),
            USource::Example(id) => write!(f, "example:{id}"),
        }
    }
}

impl From<USource> for String {
    fn from(u: USource) -> String {
        u.to_string()
    }
}

/// A built u, with its radial structure when it has one.
#[derive(Clone)]
pub enum BuiltU {
    Radial(Arc<dyn RadialU>),
    Other(Arc<dyn ScalarField>),
}

impl BuiltU {
    pub fn field(&self) -> &dyn ScalarField {
        match self {
            BuiltU::Radial(r) => &**r as &dyn ScalarField,
            BuiltU::Other(f) => &**f,
        }
    }

    pub fn radial(&self) -> Option<&dyn RadialU> {
        match self {
            BuiltU::Radial(r) => Some(&**r),
            BuiltU::Other(_) => None,
        }
    }
}

pub fn build_u(spec: &ModelSpec, source: USource) -> Result<BuiltU> {
    Ok(match source {
        USource::Greens => BuiltU::Radial(Arc::new(RadialGreens::for_spec(spec)?)),
        USource::AnalyticRadial => BuiltU::Radial(Arc::new(LinearRadial::for_spec(spec)?)),
        USource::Example(ExampleId::RadialU) => BuiltU::Radial(Arc::new(LinearRadial::for_spec(spec)?)),
        USource::Example(id) => BuiltU::Other(Arc::new(ExampleFunction::for_model(id, spec)?)),
    })
}

/// Area of geodesic spheres on a radial grid.
#[derive(Debug, Clone)]
pub struct AreaProfile {
    pub n: usize,
    pub omega: f64,
    pub radii: Vec<f64>,
    pub area: Vec<f64>,
    pub profile: RadialProfile,
}

pub fn area_profile(spec: &ModelSpec, grid: &[f64]) -> Result<AreaProfile> {
    spec.validate()?;
    let profile = spec.radial_profile()?;
    let n = spec.dim();
    let omega = unit_sphere_area(n);
    if grid.iter().any(|&r| !(r > 0.0)) {
        return Err(GeomError::InvalidProfile("area grid must be positive".into()));
    }
    let area = grid.iter().map(|&r| omega * profile.phi(r).powi(n as i32 - 1)).collect();
    Ok(AreaProfile { n, omega, radii: grid.to_vec(), area, profile })
}

/// Tabulated G and u on a radial grid.
#[derive(Debug, Clone, Serialize)]
pub struct GreensProfile {
    pub n: usize,
    pub radii: Vec<f64>,
    pub area: Vec<f64>,
    pub g: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// log u against log r.
    #[serde(skip)]
    pub spline: CubicSpline,
    #[serde(skip)]
    pub evaluator: Arc<RadialGreens>,
}

pub fn greens_function(area: &AreaProfile) -> Result<GreensProfile> {
    let eval = Arc::new(RadialGreens::new(area.n, area.profile.clone())?);
    let mut g = Vec::new();
    let mut u = Vec::new();
    let mut du = Vec::new();
    for &r in &area.radii {
        g.push(eval.g3(r).0);
        let (u0, u1, _) = eval.u3(r);
        u.push(u0);
        du.push(u1);
    }
    let lx: Vec<f64> = area.radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = u.iter().map(|v| v.ln()).collect();
    let spline = CubicSpline::natural(&lx, &ly)
        .ok_or_else(|| GeomError::InvalidProfile("greens grid needs ≥ 3 increasing radii".into()))?;
    Ok(GreensProfile {
        n: area.n,
        radii: area.radii.clone(),
        area: area.area.clone(),
        g,
        u,
        du,
        spline,
        evaluator: eval,
    })
}

impl GreensProfile {
    /// `r, A, G, u, du` with a `#`-comment header line per entry of `header`.
    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["r", "A", "G", "u", "du"]).expect("in-memory write");
        for i in 0..self.radii.len() {
            w.write_record(
                [self.radii[i], self.area[i], self.g[i], self.u[i], self.du[i]].map(|v| format!("{v:e}")),
            )
            .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
        out
    }

    /// u from the log–log spline: value and first two ρ-derivatives.
    pub fn spline_u3(&self, rho: f64) -> (f64, f64, f64) {
        let t = rho.ln();
        let (s, s1, s2) = self.spline.eval3(t);
        let u = s.exp();
        (u, u * s1 / rho, u / (rho * rho) * (s2 + s1 * s1 - s1))
    }
}

struct SplineU<'a>(&'a GreensProfile);

impl ScalarField for SplineU<'_> {
    fn jet(&self, p: &[f64]) -> Jet {
        radial_jet(p, self.0.spline_u3(crate::tensor_core::norm(p)))
    }
}

struct Power<'a>(&'a dyn ScalarField, f64);

impl ScalarField for Power<'_> {
    fn jet(&self, p: &[f64]) -> Jet {
        self.0.jet(p).powf(self.1)
    }
}

/// Residuals of the three equivalent forms of harmonicity of `u^{2−n}`,
/// each relative to the size of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicityResidual {
    /// `Δu^{2−n}`.
    pub harmonic: f64,
    /// `Δu² − 2n|∇u|²`.
    pub square: f64,
    /// `Δu − (n−1)|∇u|²/u`.
    pub linear: f64,
}

/// Harmonicity residuals for the spline-interpolated u of a profile.
pub fn harmonicity_residual(chart: &MetricChart, profile: &GreensProfile, p: &[f64]) -> Result<HarmonicityResidual> {
    harmonicity_of(chart, &SplineU(profile), p)
}

pub fn harmonicity_of(chart: &MetricChart, u: &dyn ScalarField, p: &[f64]) -> Result<HarmonicityResidual> {
    let n = chart.dim() as f64;
    let frame = crate::tensor_core::point_frame(chart, p)?;
    let jet = u.jet(p);
    let du = nalgebra::DVector::from_column_slice(jet.grad());
    let grad2 = frame.norm2_covector(&du);
    let uv = jet.value();
    let lap_u = laplacian(chart, u, p)?;
    let lap_h = laplacian(chart, &Power(u, 2.0 - n), p)?;
    let lap_sq = laplacian(chart, &Power(u, 2.0), p)?;
    let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(1e-300);
    Ok(HarmonicityResidual {
        harmonic: rel(
            lap_h,
            0.0,
            ((2.0 - n) * uv.powf(1.0 - n) * lap_u).abs() + ((2.0 - n) * (1.0 - n) * uv.powf(-n) * grad2).abs(),
        ),
        square: rel(lap_sq, 2.0 * n * grad2, lap_sq.abs() + 2.0 * n * grad2),
        linear: rel(lap_u, (n - 1.0) * grad2 / uv, lap_u.abs() + (n - 1.0) * grad2 / uv),
    })
}

/// Volume of the geodesic ball `B_r` about the pole (or about 0 on R³ × S¹).
pub fn ball_volume(spec: &ModelSpec, r: f64) -> Result<f64> {
    use std::f64::consts::PI;
    if let ModelSpec::ProductR3S1 { length } = spec {
        let half = r.min(0.5 * length);
        let v = adaptive(|t: f64| 4.0 / 3.0 * PI * (r * r - t * t).max(0.0).powf(1.5), -half, half, 1e-12, 0.0)?;
        return Ok(v.value);
    }
    let profile = spec.radial_profile()?;
    let n = spec.dim() as i32;
    let omega = unit_sphere_area(spec.dim());
    let s0 = 1e-8f64.min(r);
    let pole = omega * s0.powi(n) / f64::from(n);
    if r <= s0 {
        return Ok(pole);
    }
    let body = adaptive_log(|s| omega * profile.phi(s).powi(n - 1), s0, r, 1e-12, 0.0)?;
    Ok(pole + body.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonparabolicityReport {
    /// `(R, ∫_1^R r/Vol(B_r) dr)` for R = 10, 10², ….
    pub integral_estimate: Vec<(f64, f64)>,
    /// Power-law bound on `∫_{R_max}^∞`.
    pub tail_bound: f64,
    /// Fitted exponent of `Vol(B_r) ~ v r^m` on the last decade.
    pub growth_exponent: f64,
    pub converged: bool,
}

pub fn nonparabolic_check(spec: &ModelSpec) -> Result<NonparabolicityReport> {
    spec.validate()?;
    let mut estimates = Vec::new();
    let mut total = 0.0;
    let mut lo = 1.0;
    for k in 1..=9 {
        let hi = 10f64.powi(k);
        let mut failed = None;
        let piece = adaptive_log(
            |r| match ball_volume(spec, r) {
                Ok(v) => r / v,
                Err(e) => {
                    failed = Some(e);
                    0.0
                }
            },
            lo,
            hi,
            1e-10,
            0.0,
        )?;
        if let Some(e) = failed {
            return Err(e);
        }
        total += piece.value;
        estimates.push((hi, total));
        lo = hi;
    }
    let big = lo;
    let xs: Vec<f64> = (0..=8).map(|i| (big / 10.0 * 10f64.powf(i as f64 / 8.0)).ln()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| ball_volume(spec, x.exp()).map(|v| v.ln())).collect::<Result<_>>()?;
    let m = ls_slope(&xs, &ys);
    let v = ball_volume(spec, big)? / big.powf(m);
    let tail_bound = if m > 2.0 { big.powf(2.0 - m) / (v * (m - 2.0)) } else { f64::INFINITY };
    Ok(NonparabolicityReport {
        integral_estimate: estimates,
        tail_bound,
        growth_exponent: m,
        converged: tail_bound < 1e-6 * total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_manifolds::{build_chart, Profile};
    use std::f64::consts::PI;

    fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
        let m = ((hi / lo).log10() * per_decade as f64).round() as usize;
        (0..=m).map(|i| lo * 10f64.powf(i as f64 / per_decade as f64)).collect()
    }

    #[test]
    fn euclidean_green_is_power_law() {
        for n in 3..=5 {
            let g = RadialGreens::for_spec(&ModelSpec::Euclidean { n }).unwrap();
            for &r in &[1e-3f64, 0.37, 1.0, 12.5, 1e3, 3e6] {
                let exact = r.powi(2 - n as i32);
                assert!((g.g3(r).0 / exact - 1.0).abs() < 1e-10, "n={n} r={r}");
                assert!((g.u3(r).0 / r - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cone_green_closed_form() {
        let c: f64 = 0.9;
        let g = RadialGreens::for_spec(&ModelSpec::Cone { n: 3, c }).unwrap();
        for &r in &[1e-2, 0.5, 2.0, 40.0, 1e3] {
            assert!((g.g3(r).0 * c * c * r - 1.0).abs() < 1e-10);
            let (u, du, ddu) = g.u3(r);
            assert!((u / (0.81 * r) - 1.0).abs() < 1e-10);
            assert!((du - 0.81).abs() < 1e-10 && ddu.abs() < 1e-10);
        }
        assert!((g.level_radius(0.81).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn area_examples() {
        let a = area_profile(&ModelSpec::Euclidean { n: 3 }, &[2.0]).unwrap();
        assert!((a.area[0] - 16.0 * PI).abs() < 1e-12);
        let a = area_profile(&ModelSpec::Cone { n: 3, c: 0.9 }, &[1.0]).unwrap();
        assert!((a.area[0] - 0.81 * 4.0 * PI).abs() < 1e-12);
        let spec = ModelSpec::RotSym { n: 3, profile: Profile::Concave { c: 0.8, a: 1.0 } };
        let grid = log_grid(1e-2, 1e2, 8);
        let a = area_profile(&spec, &grid).unwrap();
        for (r, v) in grid.iter().zip(&a.area) {
            assert!(*v <= 4.0 * PI * r * r * (1.0 + 1e-14));
        }
    }

    #[test]
    fn concave_profile_invariants() {
        let spec = ModelSpec::RotSym { n: 3, profile: Profile::Concave { c: 0.8, a: 1.0 } };
        let grid = log_grid(1e-3, 1e3, 16);
        let gp = greens_function(&area_profile(&spec, &grid).unwrap()).unwrap();
        assert!(gp.g.windows(2).all(|w| w[1] < w[0]));
        assert!(gp.u.windows(2).all(|w| w[1] > w[0]));
        // u = r(1 + O(r)) at the pole
        assert!((gp.u[0] / gp.radii[0] - 1.0).abs() < 10.0 * gp.radii[0]);
        for (i, &r) in gp.radii.iter().enumerate() {
            // |∇u| ≤ 1 and r^{1−n} A |∇u| = ω at the level r = u
            assert!(gp.du[i] <= 1.0 + 1e-12);
            let level = gp.u[i];
            let flux = level.powi(-2) * gp.area[i] * gp.du[i];
            assert!((flux / (4.0 * PI) - 1.0).abs() < 1e-9, "r={r} flux={flux}");
            let (su, sdu, _) = gp.spline_u3(r);
            assert!((su / gp.u[i] - 1.0).abs() < 1e-12 && (sdu / gp.du[i] - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn rejects_parabolic_and_nonconical() {
        let sinh = ModelSpec::RotSym { n: 3, profile: Profile::Sinh };
        assert!(matches!(RadialGreens::for_spec(&sinh), Err(GeomError::TailNotConical { .. })));
        // φ = tanh r: bounded area, like a cylinder at infinity
        let r: Vec<f64> = (0..=400).map(|i| i as f64 * 0.1).collect();
        let phi = r.iter().map(|x| x.tanh()).collect();
        let flat_tail = ModelSpec::RotSym { n: 3, profile: Profile::Table { r, phi } };
        assert!(matches!(RadialGreens::for_spec(&flat_tail), Err(GeomError::ParabolicManifold { .. })));
    }

    #[test]
    fn harmonicity_forms() {
        let spec = ModelSpec::Cone { n: 3, c: 0.9 };
        let chart = build_chart(&spec).unwrap();
        let gp = greens_function(&area_profile(&spec, &log_grid(1e-2, 1e2, 16)).unwrap()).unwrap();
        let h = harmonicity_residual(&chart, &gp, &[0.3, 0.6, -0.5]).unwrap();
        assert!(h.harmonic < 1e-8 && h.square < 1e-8 && h.linear < 1e-8, "{h:?}");

        let spec = ModelSpec::RotSym { n: 3, profile: Profile::Concave { c: 0.8, a: 1.0 } };
        let chart = build_chart(&spec).unwrap();
        let coarse = greens_function(&area_profile(&spec, &log_grid(1e-2, 1e2, 8)).unwrap()).unwrap();
        let fine = greens_function(&area_profile(&spec, &log_grid(1e-2, 1e2, 16)).unwrap()).unwrap();
        // pointwise spline errors oscillate within a cell; compare maxima over a ray
        let worst = |gp: &GreensProfile| {
            (0..24)
                .map(|i| {
                    let t = 0.3 * 1.1f64.powi(i);
                    let h = harmonicity_residual(&chart, gp, &[0.6 * t, 0.64 * t, 0.48 * t]).unwrap();
                    h.harmonic.max(h.square).max(h.linear)
                })
                .fold(0.0, f64::max)
        };
        let (a, b) = (worst(&coarse), worst(&fine));
        assert!(a / b > 2.5, "{a} {b}");
        let p = [0.5, 0.4, 0.3];
        // the quadrature u itself is harmonic to rounding
        let exact = harmonicity_of(&chart, &*fine.evaluator, &p).unwrap();
        assert!(exact.harmonic < 1e-11 && exact.square < 1e-12, "{exact:?}");
    }

    #[test]
    fn nonparabolicity() {
        for spec in [
            ModelSpec::Euclidean { n: 3 },
            ModelSpec::Cone { n: 3, c: 0.9 },
            ModelSpec::ProductR3S1 { length: 2.0 * PI },
        ] {
            let rep = nonparabolic_check(&spec).unwrap();
            assert!(rep.converged, "{spec}: {rep:?}");
        }
        assert!(nonparabolic_check(&ModelSpec::Euclidean { n: 2 }).is_err());
    }

    #[test]
    fn u_source_strings() {
        for s in ["greens", "analytic_radial", "example:u1", "example:ex1"] {
            assert_eq!(s.parse::<USource>().unwrap().to_string(), s);
        }
        assert!("example:nope".parse::<USource>().is_err());
    }
}
