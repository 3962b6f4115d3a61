//! Both sides of each pointwise identity for `Δu² = 2n|∇u|²`, evaluated
//! independently and compared under step refinement.
//!
//! Left sides apply one layer of second-order central differences to fields
//! built from exact jets (divergences, gradients, the unit normal). Right sides
//! are algebra in B, Ric and ∇u at the centre point. Residuals therefore scale
//! like h², and halving h should divide them by 4.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::geom_quantities::{tangent_basis, tilde_beta, BDecomposition, BetaParams, LocalGeometry};
use crate::greens::{build_u, USource};
use crate::model_manifolds::{build_chart, random_direction, ModelSpec};
use crate::tensor_core::{
    divergence_from_samples, norm, point_frame, tensor_divergence_from_samples, MetricChart, ScalarField,
    SymmetricTensor2,
};

/// Relative defect of the standing equation above which u is rejected.
pub const PRECHECK_TOLERANCE: f64 = 1e-6;
/// Residuals at or below `ROUNDOFF_FLOOR · max(1, term_scale)` count as converged.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityId {
    Equivalences,
    K1,
    CorK1,
    K2,
    Deltanu,
    PDeltanu,
    CorDeltanu,
    Tracefree,
    B0,
    Ptog,
    Divforms1,
    Divforms2,
    Dvs,
    Optimize,
    Thirdcl,
}

impl IdentityId {
    pub const ALL: [IdentityId; 15] = [
        IdentityId::Equivalences,
        IdentityId::K1,
        IdentityId::CorK1,
        IdentityId::K2,
        IdentityId::Deltanu,
        IdentityId::PDeltanu,
        IdentityId::CorDeltanu,
        IdentityId::Tracefree,
        IdentityId::B0,
        IdentityId::Ptog,
        IdentityId::Divforms1,
        IdentityId::Divforms2,
        IdentityId::Dvs,
        IdentityId::Optimize,
        IdentityId::Thirdcl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityId::Equivalences => "equivalences",
            IdentityId::K1 => "k1",
            IdentityId::CorK1 => "cor_k1",
            IdentityId::K2 => "k2",
            IdentityId::Deltanu => "deltanu",
            IdentityId::PDeltanu => "p_deltanu",
            IdentityId::CorDeltanu => "cor_deltanu",
            IdentityId::Tracefree => "tracefree",
            IdentityId::B0 => "b0",
            IdentityId::Ptog => "ptog",
            IdentityId::Divforms1 => "divforms_1",
            IdentityId::Divforms2 => "divforms_2",
            IdentityId::Dvs => "dvs",
            IdentityId::Optimize => "optimize",
            IdentityId::Thirdcl => "thirdcl",
        }
    }

    /// Identities that need only second derivatives of u on the right and
    /// one difference of a first-derivative field on the left.
    pub fn is_low_order(self) -> bool {
        matches!(self, IdentityId::K1 | IdentityId::CorK1 | IdentityId::Tracefree | IdentityId::B0)
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IdentityId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        IdentityId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown identity `{s}`"))
    }
}

/// Parameters of the parametrized identities; unused ones stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl Params {
    pub fn none() -> Self {
        Params::default()
    }
    pub fn alpha(alpha: f64) -> Self {
        Params { alpha: Some(alpha), ..Default::default() }
    }
    pub fn beta(beta: f64) -> Self {
        Params { beta: Some(beta), ..Default::default() }
    }
    pub fn p_alpha(p: f64, alpha: f64) -> Self {
        Params { p: Some(p), alpha: Some(alpha), ..Default::default() }
    }
    pub fn q_beta(q: f64, beta: f64) -> Self {
        Params { q: Some(q), beta: Some(beta), ..Default::default() }
    }

    fn need(v: Option<f64>, what: &str, id: IdentityId) -> f64 {
        v.unwrap_or_else(|| panic!("{id} needs parameter {what}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub identity_id: IdentityId,
    /// Which displayed equality or component, empty when there is one.
    pub variant: String,
    pub params: Params,
    pub chart: String,
    pub point: Vec<f64>,
    /// Signed value for scalar identities, norm for covectors and tensors.
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    /// `abs / max(|lhs|, |rhs|, term_scale, 1e-14)`.
    pub rel_residual: f64,
    /// Sum of magnitudes of the constituent terms on both sides.
    pub term_scale: f64,
    /// Rounding bound of the difference quotients on the left, `4ε Σ|samples|/2h`.
    pub lhs_rounding: f64,
    pub h_used: f64,
    /// `residual(h) / residual(h/2)`.
    pub convergence_ratio: Option<f64>,
    pub converged: bool,
    /// Only boundedness is checked (α near 0).
    pub finiteness_only: bool,
    pub tolerance: f64,
    pub pass: bool,
}

fn rel(abs: f64, lhs: f64, rhs: f64, scale: f64) -> f64 {
    abs / lhs.abs().max(rhs.abs()).max(scale).max(1e-14)
}

enum Value {
    Scalar(f64),
    /// Compared in the g-norm for covectors.
    Covector(DVector<f64>),
    /// Orthonormal-frame components.
    Tangent(DMatrix<f64>),
}

struct Raw {
    variant: &'static str,
    lhs: Value,
    rhs: Value,
    scale: f64,
}

/// Sum of magnitudes.
#[derive(Default)]
struct Scale(f64);

impl Scale {
    fn add(mut self, x: f64) -> Self {
        self.0 += x.abs();
        self
    }
}

/// Local geometry at `p` and at `p ± h e_i`, shared by every identity.
pub struct StencilGeometry {
    pub h: f64,
    pub center: LocalGeometry,
    neighbours: Vec<(LocalGeometry, LocalGeometry)>,
    dec: BDecomposition,
    ricci: SymmetricTensor2,
    /// Second fundamental form in the tangent basis (central differences of the normal).
    ii: DMatrix<f64>,
    ii0: DMatrix<f64>,
    /// Length scale used to size differentiated fields: `|p|`.
    length: f64,
    /// Rounding bound of the difference quotients taken since the last reset.
    rounding: Cell<f64>,
}

/// `|Δu² − 2n|∇u|²| / (|Δu²| + 2n|∇u|²)` from exact jets.
pub fn standing_equation_defect(local: &LocalGeometry) -> f64 {
    let n = local.dim() as f64;
    let lap_u2 = local.hess_u2().trace(&local.frame);
    let target = 2.0 * n * local.grad_norm2();
    (lap_u2 - target).abs() / (lap_u2.abs() + target).max(f64::MIN_POSITIVE)
}

impl StencilGeometry {
    pub fn new(chart: &MetricChart, u: &dyn ScalarField, p: &[f64], h: f64) -> Result<Self> {
        chart.check_stencil(p, h)?;
        u.admissible(p, h)?;
        let center = LocalGeometry::new(chart, u, p)?;
        let defect = standing_equation_defect(&center);
        if !(defect <= PRECHECK_TOLERANCE) {
            return Err(GeomError::PrecheckFailed { point: p.to_vec(), residual: defect });
        }
        let mut neighbours = Vec::with_capacity(p.len());
        let mut q = p.to_vec();
        for i in 0..p.len() {
            q[i] = p[i] + h;
            let plus = LocalGeometry::from_frame(point_frame(chart, &q)?, u);
            q[i] = p[i] - h;
            let minus = LocalGeometry::from_frame(point_frame(chart, &q)?, u);
            q[i] = p[i];
            neighbours.push((plus, minus));
        }
        let tangents = tangent_basis(&center.frame, &center.normal());
        let dec = BDecomposition::from_local(&center, &tangents);
        let ricci = center.ricci();

        let dim = p.len();
        let ncov = center.normal_covector();
        let cov = DMatrix::from_fn(dim, dim, |i, j| {
            let (plus, minus) = &neighbours[i];
            let mut c = (plus.du[j] / plus.grad_norm - minus.du[j] / minus.grad_norm) / (2.0 * h);
            for k in 0..dim {
                c -= center.frame.gamma(k, i, j) * ncov[k];
            }
            c
        });
        let m = dim - 1;
        let ii = DMatrix::from_fn(m, m, |a, b| tangents[a].dot(&(&cov * &tangents[b])));
        let ii = (&ii + ii.transpose()) * 0.5;
        let mut ii0 = &ii - DMatrix::identity(m, m) * (ii.trace() / m as f64);
        let rest: f64 = (0..m - 1).map(|a| ii0[(a, a)]).sum();
        ii0[(m - 1, m - 1)] = -rest;
        Ok(StencilGeometry { h, length: norm(p).max(1e-3), center, neighbours, dec, ricci, ii, ii0, rounding: Cell::new(0.0) })
    }

    fn n(&self) -> f64 {
        self.center.dim() as f64
    }

    /// Divergence of a vector field given at each stencil point; also `|V(p)|/|p|`.
    fn div(&self, field: impl Fn(&LocalGeometry) -> DVector<f64>) -> (f64, f64) {
        let at_p = field(&self.center);
        let samples: Vec<_> = self.neighbours.iter().map(|(a, b)| (field(a), field(b))).collect();
        let size = self.center.frame.inner(&at_p, &at_p).sqrt() / self.length;
        let summands: f64 = samples.iter().enumerate().map(|(i, (a, b))| a[i].abs() + b[i].abs()).sum();
        self.rounding.set(self.rounding.get().max(4.0 * f64::EPSILON * summands / (2.0 * self.h)));
        (divergence_from_samples(&self.center.frame, &at_p, &samples, self.h), size)
    }

    /// Covector `∂_i f` by central differences; also `|f(p)|/|p|`.
    fn grad(&self, field: impl Fn(&LocalGeometry) -> f64) -> (DVector<f64>, f64) {
        let d = DVector::from_iterator(
            self.neighbours.len(),
            self.neighbours.iter().map(|(a, b)| (field(a) - field(b)) / (2.0 * self.h)),
        );
        (d, field(&self.center).abs() / self.length)
    }

    fn covector_norm(&self, w: &DVector<f64>) -> f64 {
        self.center.frame.norm2_covector(w).max(0.0).sqrt()
    }

    pub fn norm2_ii0(&self) -> f64 {
        self.ii0.norm_squared()
    }

    pub fn decomposition(&self) -> &BDecomposition {
        &self.dec
    }

    fn ric_nn(&self) -> f64 {
        let nv = self.center.normal();
        self.ricci.apply(&nv, &nv)
    }

    /// `Ric(∇u², ∇u²)`.
    fn ric_u2(&self) -> f64 {
        let g2 = &self.center.grad * (2.0 * self.center.u);
        self.ricci.apply(&g2, &g2)
    }

    /// `⟨∇|∇u|², ∇u²⟩`.
    fn dgn2_du2(&self) -> f64 {
        let c = &self.center;
        c.d_grad_norm2().dot(&c.grad) * 2.0 * c.u
    }

    /// `⟨∇|∇u|, ∇u²⟩`.
    fn dgn_du2(&self) -> f64 {
        let c = &self.center;
        c.d_grad_norm().dot(&c.grad) * 2.0 * c.u
    }

    /// `β̃|B(n)|² + (n−2)|B(n)^T|²` and its magnitude sum.
    fn k2_term(&self, tb: f64) -> (f64, f64) {
        let a = tb * self.dec.norm2_b_of_n;
        let b = (self.n() - 2.0) * self.dec.norm2_b_of_n_tangent;
        (a + b, a.abs() + b.abs())
    }

    fn evaluate(&self, id: IdentityId, params: Params) -> Vec<Raw> {
        let c = &self.center;
        let n = self.n();
        let u = c.u;
        let gn = c.grad_norm;
        let gn2 = c.grad_norm2();
        let dec = &self.dec;
        // |Hess u|² sizes the derivatives of ∇|∇u|-type fields, which vanish on the models
        let hh = c.hess_u.norm2(&c.frame);
        match id {
            IdentityId::Equivalences => {
                let (l1, s1) = self.div(|g| &g.grad * (2.0 * g.u));
                let (l2, s2) = self.div(|g| g.grad.clone());
                let (l3, s3) = self.div(|g| &g.grad * ((2.0 - n) * g.u.powf(1.0 - n)));
                let lap_u = c.hess_u.trace(&c.frame);
                let r1 = 2.0 * n * gn2;
                let r2 = (n - 1.0) * gn2 / u;
                let s3 = Scale(s3)
                    .add((2.0 - n) * u.powf(1.0 - n) * lap_u)
                    .add((2.0 - n) * (1.0 - n) * u.powf(-n) * gn2);
                vec![
                    Raw { variant: "square", lhs: Value::Scalar(l1), rhs: Value::Scalar(r1), scale: s1 + r1 },
                    Raw { variant: "linear", lhs: Value::Scalar(l2), rhs: Value::Scalar(r2), scale: s2 + r2 },
                    Raw { variant: "harmonic", lhs: Value::Scalar(l3), rhs: Value::Scalar(0.0), scale: s3.0 },
                ]
            }
            IdentityId::K1 => {
                let (d, s) = self.grad(|g| g.grad_norm2());
                let lhs = d * u;
                let rhs = dec.b.contract(&c.grad);
                let scale = Scale(s * u)
                    .add(self.covector_norm(&c.hess_u2().contract(&c.grad)))
                    .add(2.0 * gn2 * gn);
                vec![Raw { variant: "", lhs: Value::Covector(lhs), rhs: Value::Covector(rhs), scale: scale.0 }]
            }
            IdentityId::CorK1 => {
                let (d, s) = self.grad(|g| g.grad_norm);
                let lhs = d * (2.0 * u);
                let size = self.covector_norm(&c.hess_u2().contract(&c.normal())) + 2.0 * gn2;
                let l2 = self.center.frame.norm2_covector(&lhs);
                vec![
                    Raw {
                        variant: "vector",
                        lhs: Value::Covector(lhs),
                        rhs: Value::Covector(dec.b_of_n.clone()),
                        scale: 2.0 * u * s + size,
                    },
                    Raw {
                        variant: "norm",
                        lhs: Value::Scalar(l2),
                        rhs: Value::Scalar(dec.norm2_b_of_n),
                        scale: (2.0 * u * s + size).powi(2),
                    },
                ]
            }
            IdentityId::K2 => {
                let at_p = dec.b.matrix().clone();
                let samples: Vec<_> = self
                    .neighbours
                    .iter()
                    .map(|(a, b)| (a.b().matrix().clone(), b.b().matrix().clone()))
                    .collect();
                let lhs = tensor_divergence_from_samples(&c.frame, &at_p, &samples, self.h);
                let size = c.hess_u2().norm2(&c.frame).sqrt() / self.length;
                let ric = self.ricci.contract(&(&c.grad * (2.0 * u)));
                let dgn2 = c.d_grad_norm2();
                let bgrad = dec.b.contract(&c.grad);
                let rhs1 = &ric + &dgn2 * (2.0 * n - 2.0);
                let rhs2 = &ric + &bgrad * ((2.0 * n - 2.0) / u);
                let common = Scale(size).add(self.covector_norm(&ric)).add(self.covector_norm(&lhs));
                vec![
                    Raw {
                        variant: "gradient_form",
                        lhs: Value::Covector(lhs.clone()),
                        rhs: Value::Covector(rhs1),
                        scale: common.0 + (2.0 * n - 2.0) * self.covector_norm(&dgn2),
                    },
                    Raw {
                        variant: "b_form",
                        lhs: Value::Covector(lhs),
                        rhs: Value::Covector(rhs2),
                        scale: common.0 + (2.0 * n - 2.0) / u * self.covector_norm(&bgrad),
                    },
                ]
            }
            IdentityId::Deltanu => {
                let (lap, s) = self.div(|g| g.frame.raise(&g.d_grad_norm2()));
                let lhs = u * u * lap;
                let half_b = 0.5 * dec.norm2_b;
                let ric = 0.5 * self.ric_u2();
                let bgg = (2.0 * n - 4.0) * dec.b.apply(&c.grad, &c.grad);
                let inner = (n - 2.0) * self.dgn2_du2();
                let base = Scale(u * u * s).add(2.0 * u * u * hh).add(lhs).add(half_b).add(ric);
                vec![
                    Raw {
                        variant: "b_form",
                        lhs: Value::Scalar(lhs),
                        rhs: Value::Scalar(half_b + bgg + ric),
                        scale: Scale(base.0).add(bgg).0,
                    },
                    Raw {
                        variant: "gradient_form",
                        lhs: Value::Scalar(lhs),
                        rhs: Value::Scalar(half_b + inner + ric),
                        scale: Scale(base.0).add(inner).0,
                    },
                ]
            }
            IdentityId::PDeltanu => {
                let alpha = Params::need(params.alpha, "alpha", id);
                let (lap, s) = self.div(|g| g.frame.raise(&g.d_grad_norm()) * (alpha * g.grad_norm.powf(alpha - 1.0)));
                let pre = (2.0 / alpha) * gn.powf(2.0 - alpha);
                let lhs = pre * lap;
                let nb = (alpha - 2.0) * dec.norm2_b_of_n;
                let ric = self.ric_u2();
                let inner = (n - 2.0) / (u * u) * self.dgn2_du2();
                let rhs = (dec.norm2_b + nb + ric) / (2.0 * u * u) + inner;
                let scale = Scale(pre * s)
                    .add(2.0 * hh)
                    .add(lhs)
                    .add((dec.norm2_b.abs() + nb.abs() + ric.abs()) / (2.0 * u * u))
                    .add(inner);
                vec![Raw { variant: "", lhs: Value::Scalar(lhs), rhs: Value::Scalar(rhs), scale: scale.0 }]
            }
            IdentityId::CorDeltanu => {
                let (lap, s) = self.div(|g| g.frame.raise(&g.d_grad_norm()));
                let lhs = 2.0 * gn * lap;
                let ric = self.ric_u2();
                let inner = (n - 2.0) / (u * u) * self.dgn2_du2();
                let rhs = (dec.norm2_b - dec.norm2_b_of_n + ric) / (2.0 * u * u) + inner;
                let scale = Scale(2.0 * gn * s)
                    .add(2.0 * hh)
                    .add(lhs)
                    .add((dec.norm2_b.abs() + dec.norm2_b_of_n.abs() + ric.abs()) / (2.0 * u * u))
                    .add(inner);
                vec![Raw { variant: "", lhs: Value::Scalar(lhs), rhs: Value::Scalar(rhs), scale: scale.0 }]
            }
            IdentityId::Tracefree => {
                let m = self.ii0.nrows();
                let lhs = &self.ii0 * (2.0 * u * gn);
                let rhs = &dec.b0 + DMatrix::identity(m, m) * (dec.b_nn / (n - 1.0));
                let scale = Scale(2.0 * u * gn * self.ii.norm())
                    .add(dec.b0.norm())
                    .add(dec.b_nn / (n - 1.0).sqrt());
                vec![Raw { variant: "", lhs: Value::Tangent(lhs), rhs: Value::Tangent(rhs), scale: scale.0 }]
            }
            IdentityId::B0 => {
                let lhs = 4.0 * u * u * gn2 * self.norm2_ii0();
                let full = 4.0 * u * u * gn2 * self.ii.norm_squared();
                let nn = dec.b_nn.powi(2) / (n - 1.0);
                let first = dec.norm2_b0 - nn;
                let bn = n / (n - 1.0) * dec.norm2_b_of_n;
                let bt = (n - 2.0) / (n - 1.0) * dec.norm2_b_of_n_tangent;
                let second = dec.norm2_b - bn - bt;
                vec![
                    Raw {
                        variant: "restricted",
                        lhs: Value::Scalar(lhs),
                        rhs: Value::Scalar(first),
                        scale: Scale(full).add(dec.norm2_b0).add(nn).0,
                    },
                    Raw {
                        variant: "normal_split",
                        lhs: Value::Scalar(lhs),
                        rhs: Value::Scalar(second),
                        scale: Scale(full).add(dec.norm2_b).add(bn).add(bt).0,
                    },
                ]
            }
            IdentityId::Ptog => {
                let (lhs, s) = self.div(|g| g.frame.raise(&g.d_grad_norm()));
                let t1 = gn * self.norm2_ii0();
                let t2 = self.ricci.apply(&c.grad, &c.grad) / gn;
                let t3 = (n - 2.0) / (u * u) * self.dgn_du2();
                let (k, ks) = self.k2_term(1.0);
                let t4 = k / (4.0 * (n - 1.0) * gn * u * u);
                let scale = Scale(s)
                    .add(hh / gn)
                    .add(lhs)
                    .add(gn * self.ii.norm_squared())
                    .add(t2)
                    .add(t3)
                    .add(ks / (4.0 * (n - 1.0) * gn * u * u));
                vec![Raw { variant: "", lhs: Value::Scalar(lhs), rhs: Value::Scalar(t1 + t2 + t3 + t4), scale: scale.0 }]
            }
            IdentityId::Divforms1 => {
                let p = Params::need(params.p, "p", id);
                let alpha = Params::need(params.alpha, "alpha", id);
                let (lhs, s) =
                    self.div(|g| &g.grad * (2.0 * g.u * g.u.powf(2.0 * p) * g.grad_norm.powf(alpha)));
                let t1 = (2.0 * n + 4.0 * p) * u.powf(2.0 * p) * gn.powf(2.0 + alpha);
                let t2 = alpha * u.powf(2.0 * p) * gn.powf(alpha - 1.0) * self.dgn_du2();
                let scale = Scale(s).add(lhs).add(t1).add(t2);
                vec![Raw { variant: "", lhs: Value::Scalar(lhs), rhs: Value::Scalar(t1 + t2), scale: scale.0 }]
            }
            IdentityId::Divforms2 => {
                let p = Params::need(params.p, "p", id);
                let alpha = Params::need(params.alpha, "alpha", id);
                let (lhs, s) = self.div(|g| g.frame.raise(&g.d_grad_norm()) * (g.u.powf(2.0 * p) * g.grad_norm.powf(alpha)));
                let t1 = u.powf(2.0 * p - 2.0) * (p + n - 2.0) * gn.powf(alpha) * self.dgn_du2();
                let pre = u.powf(2.0 * p) * gn.powf(1.0 + alpha);
                let (k, ks) = self.k2_term(1.0 + alpha * (n - 1.0));
                let denom = 4.0 * (n - 1.0) * gn2 * u * u;
                let bracket = self.norm2_ii0() + self.ric_nn() + k / denom;
                let bracket_size = self.ii.norm_squared() + self.ric_nn().abs() + ks / denom;
                let scale = Scale(s)
                    .add(u.powf(2.0 * p) * gn.powf(alpha - 1.0) * hh)
                    .add(lhs)
                    .add(t1)
                    .add(pre * bracket_size);
                vec![Raw { variant: "", lhs: Value::Scalar(lhs), rhs: Value::Scalar(t1 + pre * bracket), scale: scale.0 }]
            }
            IdentityId::Dvs => {
                let q = Params::need(params.q, "q", id);
                let beta = Params::need(params.beta, "beta", id);
                let tb = tilde_beta(self.center.dim(), beta).map(|b| b.tilde_beta).unwrap_or(f64::NAN);
                let (lhs, s) = self.div(|g| {
                    &g.grad * (2.0 * q * g.u.powf(2.0 * q - 1.0) * g.grad_norm.powf(beta))
                        + g.frame.raise(&g.d_grad_norm()) * (beta * g.u.powf(2.0 * q) * g.grad_norm.powf(beta - 1.0))
                });
                let t1 = 2.0 * q * (2.0 * q + n - 2.0) * u.powf(2.0 * q - 2.0) * gn.powf(2.0 + beta);
                let t2 = beta * u.powf(2.0 * q) * gn.powf(beta) * (self.norm2_ii0() + self.ric_nn());
                let (k, ks) = self.k2_term(tb);
                let w = beta / (4.0 * (n - 1.0)) * u.powf(2.0 * q - 2.0) * gn.powf(beta - 2.0);
                let t3 = w * k;
                let t4 = beta * (2.0 * q + n - 2.0) * u.powf(2.0 * q - 2.0) * gn.powf(beta - 1.0) * self.dgn_du2();
                let scale = Scale(s)
                    .add(beta * u.powf(2.0 * q) * gn.powf(beta - 2.0) * hh)
                    .add(lhs)
                    .add(t1)
                    .add(beta * u.powf(2.0 * q) * gn.powf(beta) * (self.ii.norm_squared() + self.ric_nn().abs()))
                    .add(w * ks)
                    .add(t4);
                vec![Raw { variant: "", lhs: Value::Scalar(lhs), rhs: Value::Scalar(t1 + t2 + t3 + t4), scale: scale.0 }]
            }
            IdentityId::Optimize => {
                let beta = Params::need(params.beta, "beta", id);
                let tb = tilde_beta(self.center.dim(), beta).map(|b| b.tilde_beta).unwrap_or(f64::NAN);
                let (k, ks) = self.k2_term(tb);
                let curv = self.norm2_ii0() + self.ric_nn();
                let curv_size = self.ii.norm_squared() + self.ric_nn().abs();
                let quarter = beta / (4.0 * (n - 1.0));
                // Δ(u^{2q}|∇u|^β) with ∇ assembled as q u^{2q−2}|∇u|^β ∇u² + β u^{2q}|∇u|^{β−1} ∇|∇u|
                let lap = |q: f64| {
                    self.div(|g| {
                        let grad_u2 = &g.grad * (2.0 * g.u);
                        grad_u2 * (q * g.u.powf(2.0 * q - 2.0) * g.grad_norm.powf(beta))
                            + g.frame.raise(&g.d_grad_norm()) * (beta * g.u.powf(2.0 * q) * g.grad_norm.powf(beta - 1.0))
                    })
                };
                let (l1, s1) = lap((2.0 - n) / 2.0);
                let a1 = beta * u.powf(2.0 - n) * gn.powf(beta) * curv;
                let b1 = quarter * u.powf(-n) * gn.powf(beta - 2.0);
                let r1 = a1 + b1 * k;
                let sc1 = Scale(s1)
                    .add(beta * u.powf(2.0 - n) * gn.powf(beta - 2.0) * hh)
                    .add(l1)
                    .add(beta * u.powf(2.0 - n) * gn.powf(beta) * curv_size)
                    .add(b1 * ks);
                let (l2, s2) = lap(0.0);
                let a2 = beta * gn.powf(beta) * curv;
                let c2 = beta * (n - 2.0) / (u * u) * gn.powf(beta - 1.0) * self.dgn_du2();
                let b2 = quarter / (u * u) * gn.powf(beta - 2.0);
                let r2 = a2 + c2 + b2 * k;
                let sc2 = Scale(s2).add(beta * gn.powf(beta - 2.0) * hh).add(l2).add(beta * gn.powf(beta) * curv_size).add(c2).add(b2 * ks);
                vec![
                    Raw { variant: "harmonic_weight", lhs: Value::Scalar(l1), rhs: Value::Scalar(r1), scale: sc1.0 },
                    Raw { variant: "unweighted", lhs: Value::Scalar(l2), rhs: Value::Scalar(r2), scale: sc2.0 },
                ]
            }
            IdentityId::Thirdcl => {
                let beta = Params::need(params.beta, "beta", id);
                let tb = tilde_beta(self.center.dim(), beta).map(|b| b.tilde_beta).unwrap_or(f64::NAN);
                let (lhs, s) = self.div(|g| {
                    let w = g.u.powf(2.0 - n);
                    g.frame.raise(&g.d_grad_norm()) * (w * w * g.grad_norm.powf(beta - 1.0))
                });
                let a = u.powf(4.0 - 2.0 * n) * gn.powf(beta);
                let (k, ks) = self.k2_term(tb);
                let b = u.powf(2.0 - 2.0 * n) * gn.powf(beta - 2.0) / (4.0 * (n - 1.0));
                let rhs = a * (self.norm2_ii0() + self.ric_nn()) + b * k;
                let scale = Scale(s)
                    .add(u.powf(4.0 - 2.0 * n) * gn.powf(beta - 2.0) * hh)
                    .add(lhs)
                    .add(a * (self.ii.norm_squared() + self.ric_nn().abs()))
                    .add(b * ks);
                vec![Raw { variant: "", lhs: Value::Scalar(lhs), rhs: Value::Scalar(rhs), scale: scale.0 }]
            }
        }
    }

    /// Per variant: raw, |lhs|, |rhs|, |lhs − rhs|, rounding bound of the left side.
    fn residuals(&self, id: IdentityId, params: Params) -> Vec<(Raw, f64, f64, f64, f64)> {
        self.rounding.set(0.0);
        let raws = self.evaluate(id, params);
        let rounding = self.rounding.get();
        raws.into_iter()
            .map(|raw| {
                let (l, r, abs) = match (&raw.lhs, &raw.rhs) {
                    (Value::Scalar(l), Value::Scalar(r)) => (*l, *r, (l - r).abs()),
                    (Value::Covector(l), Value::Covector(r)) => {
                        (self.covector_norm(l), self.covector_norm(r), self.covector_norm(&(l - r)))
                    }
                    (Value::Tangent(l), Value::Tangent(r)) => (l.norm(), r.norm(), (l - r).norm()),
                    _ => unreachable!("both sides share a kind"),
                };
                (raw, l, r, abs, rounding)
            })
            .collect()
    }
}

/// Evaluate one identity at `p` with steps `h` and `h/2`.
pub fn check_identity(
    chart: &MetricChart,
    u: &dyn ScalarField,
    p: &[f64],
    id: IdentityId,
    params: Params,
    h: f64,
) -> Result<Vec<IdentityResidual>> {
    let coarse = StencilGeometry::new(chart, u, p, h)?;
    let fine = StencilGeometry::new(chart, u, p, 0.5 * h)?;
    Ok(assemble(&coarse, &fine, id, params, &chart_label(chart, u), false))
}

fn chart_label(chart: &MetricChart, u: &dyn ScalarField) -> String {
    format!("{:?}/{}", chart.structure(), u.label())
}

fn assemble(
    coarse: &StencilGeometry,
    fine: &StencilGeometry,
    id: IdentityId,
    params: Params,
    label: &str,
    finiteness_only: bool,
) -> Vec<IdentityResidual> {
    let tolerance = if id.is_low_order() { 1e-5 } else { 1e-4 };
    let a = coarse.residuals(id, params);
    let b = fine.residuals(id, params);
    a.into_iter()
        .zip(b)
        .map(|((raw, lhs, rhs, abs, lhs_rounding), (_, _, _, abs_fine, _))| {
            let scale = raw.scale;
            let rel_residual = rel(abs, lhs, rhs, scale);
            let ratio = abs / abs_fine;
            let at_floor = abs <= ROUNDOFF_FLOOR * scale.max(1.0);
            let converged = at_floor || (3.5..=4.5).contains(&ratio);
            let finite = lhs.is_finite() && rhs.is_finite();
            IdentityResidual {
                identity_id: id,
                variant: raw.variant.to_string(),
                params,
                chart: label.to_string(),
                point: coarse.center.frame.point.clone(),
                lhs,
                rhs,
                abs_residual: abs,
                rel_residual,
                term_scale: scale,
                lhs_rounding,
                h_used: coarse.h,
                convergence_ratio: ratio.is_finite().then_some(ratio),
                converged,
                finiteness_only,
                tolerance,
                pass: if finiteness_only { finite } else { finite && rel_residual <= tolerance },
            }
        })
        .collect()
}

macro_rules! check_fns {
    ($($(#[$doc:meta])* $name:ident => $id:ident),* $(,)?) => {
        $(
            $(#[$doc])*
            pub fn $name(chart: &MetricChart, u: &dyn ScalarField, p: &[f64], h: f64) -> Result<Vec<IdentityResidual>> {
                check_identity(chart, u, p, IdentityId::$id, Params::none(), h)
            }
        )*
    };
}

check_fns! {
    /// The three forms of harmonicity of `u^{2−n}`.
    check_equivalences => Equivalences,
    /// `u∇|∇u|² = B(∇u)`.
    check_k1 => K1,
    /// `2u∇|∇u| = B(n)` and `4u²|∇|∇u||² = |B(n)|²`.
    check_cor_k1 => CorK1,
    /// `δB = Ric(∇u², ·) + (2n−2)∇|∇u|²`, both right-hand forms.
    check_k2 => K2,
    /// `u²Δ|∇u|²` in both forms.
    check_deltanu => Deltanu,
    /// `2|∇u|Δ|∇u|`.
    check_cor_deltanu => CorDeltanu,
    /// `2u|∇u|II₀ = B₀ + B(n,n)/(n−1) g₀`.
    check_tracefree => Tracefree,
    /// `4u²|∇u|²|II₀|²` in both forms.
    check_b0 => B0,
    /// `Δ|∇u|` with its four-term right side.
    check_ptog => Ptog,
}

pub fn check_p_deltanu(chart: &MetricChart, u: &dyn ScalarField, p: &[f64], alpha: f64, h: f64) -> Result<Vec<IdentityResidual>> {
    check_identity(chart, u, p, IdentityId::PDeltanu, Params::alpha(alpha), h)
}

pub fn check_divforms_1(chart: &MetricChart, u: &dyn ScalarField, pt: &[f64], p: f64, alpha: f64, h: f64) -> Result<Vec<IdentityResidual>> {
    check_identity(chart, u, pt, IdentityId::Divforms1, Params::p_alpha(p, alpha), h)
}

pub fn check_divforms_2(chart: &MetricChart, u: &dyn ScalarField, pt: &[f64], p: f64, alpha: f64, h: f64) -> Result<Vec<IdentityResidual>> {
    check_identity(chart, u, pt, IdentityId::Divforms2, Params::p_alpha(p, alpha), h)
}

pub fn check_dvs(chart: &MetricChart, u: &dyn ScalarField, p: &[f64], q: f64, beta: f64, h: f64) -> Result<Vec<IdentityResidual>> {
    tilde_beta(chart.dim(), beta)?;
    check_identity(chart, u, p, IdentityId::Dvs, Params::q_beta(q, beta), h)
}

pub fn check_optimize(chart: &MetricChart, u: &dyn ScalarField, p: &[f64], beta: f64, h: f64) -> Result<Vec<IdentityResidual>> {
    tilde_beta(chart.dim(), beta)?;
    check_identity(chart, u, p, IdentityId::Optimize, Params::beta(beta), h)
}

pub fn check_thirdcl(chart: &MetricChart, u: &dyn ScalarField, p: &[f64], beta: f64, h: f64) -> Result<Vec<IdentityResidual>> {
    tilde_beta(chart.dim(), beta)?;
    check_identity(chart, u, p, IdentityId::Thirdcl, Params::beta(beta), h)
}

/// A manifold with the function u to test on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub manifold: ModelSpec,
    pub u: USource,
}

impl SuiteCase {
    pub fn label(&self) -> String {
        format!("{}|{}", self.manifold, self.u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSuiteConfig {
    pub cases: Vec<SuiteCase>,
    pub points_per_chart: usize,
    pub seed: u64,
    pub h: f64,
    /// Sample points have `|p|` uniform in this range.
    pub radius_range: (f64, f64),
    /// β grid; `None` uses `{(n−2)/(n−1), 1, 2, 3}` per chart.
    pub betas: Option<Vec<f64>>,
    pub p_deltanu_alphas: Vec<f64>,
    /// α values near the excluded α = 0, checked for finiteness only.
    pub near_zero_alphas: Vec<f64>,
    pub low_order_tolerance: f64,
    pub high_order_tolerance: f64,
    /// Required share of tuples with ratio in [3.5, 4.5] (or at the roundoff floor).
    pub min_converged_fraction: f64,
    pub cross_path_tolerance: f64,
}

impl Default for CheckSuiteConfig {
    fn default() -> Self {
        CheckSuiteConfig {
            cases: default_cases(),
            points_per_chart: 50,
            seed: 20_240_917,
            h: 1e-4,
            radius_range: (0.5, 2.5),
            betas: None,
            p_deltanu_alphas: vec![-1.0, 0.5, 1.0, 2.0, 3.0],
            near_zero_alphas: vec![-1e-2, 1e-2],
            low_order_tolerance: 1e-5,
            high_order_tolerance: 1e-4,
            min_converged_fraction: 0.9,
            cross_path_tolerance: 1e-12,
        }
    }
}

pub fn default_cases() -> Vec<SuiteCase> {
    vec![
        SuiteCase { manifold: ModelSpec::Euclidean { n: 3 }, u: USource::AnalyticRadial },
        SuiteCase { manifold: ModelSpec::Cone { n: 3, c: 0.9 }, u: USource::AnalyticRadial },
        SuiteCase {
            manifold: ModelSpec::RotSym { n: 3, profile: crate::model_manifolds::Profile::Concave { c: 0.8, a: 1.0 } },
            u: USource::Greens,
        },
    ]
}

impl CheckSuiteConfig {
    pub fn betas_for(&self, n: usize) -> Result<Vec<f64>> {
        let betas = match &self.betas {
            Some(b) => b.clone(),
            None => vec![BetaParams::critical(n), 1.0, 2.0, 3.0],
        };
        for &b in &betas {
            tilde_beta(n, b)?;
        }
        Ok(betas)
    }

    /// Every (identity, params) tuple evaluated at each point of an n-dimensional chart.
    pub fn tuples(&self, n: usize) -> Result<Vec<(IdentityId, Params, bool)>> {
        let nf = n as f64;
        let betas = self.betas_for(n)?;
        let mut out = Vec::new();
        for id in IdentityId::ALL {
            match id {
                IdentityId::PDeltanu => {
                    for &a in &self.p_deltanu_alphas {
                        out.push((id, Params::alpha(a), false));
                    }
                    for &a in &self.near_zero_alphas {
                        out.push((id, Params::alpha(a), true));
                    }
                }
                IdentityId::Divforms1 | IdentityId::Divforms2 => {
                    let mut alphas = vec![0.0, 1.0];
                    for &b in &betas {
                        let a = b - 1.0;
                        if !alphas.contains(&a) {
                            alphas.push(a);
                        }
                    }
                    for p in [-1.0, 0.0, (2.0 - nf) / 2.0, 2.0 - nf] {
                        for &a in &alphas {
                            out.push((id, Params::p_alpha(p, a), false));
                        }
                    }
                }
                IdentityId::Dvs => {
                    for q in [0.0, (2.0 - nf) / 2.0, 1.0] {
                        for &b in &betas {
                            out.push((id, Params::q_beta(q, b), false));
                        }
                    }
                }
                IdentityId::Optimize | IdentityId::Thirdcl => {
                    for &b in &betas {
                        out.push((id, Params::beta(b), false));
                    }
                }
                _ => out.push((id, Params::none(), false)),
            }
        }
        Ok(out)
    }
}

/// Seeded sample points with `|p|` in `range`, each admitting both stencils.
pub fn sample_points(
    chart: &MetricChart,
    u: &dyn ScalarField,
    count: usize,
    seed: u64,
    range: (f64, f64),
    h: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count.max(1) {
            return Err(GeomError::NoRegularPoints { level: range.0, attempts });
        }
        let dir = random_direction(&mut rng, chart.dim());
        let r = rng.random_range(range.0..=range.1);
        let p: Vec<f64> = dir.iter().map(|d| d * r).collect();
        match StencilGeometry::new(chart, u, &p, h) {
            Ok(_) => out.push(p),
            Err(e @ GeomError::PrecheckFailed { .. }) => return Err(e),
            Err(_) => continue,
        }
    }
    Ok(out)
}

/// Per-identity roll-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub identity_id: IdentityId,
    pub tuples: usize,
    pub max_rel_residual: f64,
    pub min_convergence_ratio: f64,
    pub converged_fraction: f64,
    pub worst_point: Vec<f64>,
    pub worst_chart: String,
    pub pass: bool,
}

/// Two code paths for the same mathematical quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossPathRow {
    pub name: String,
    pub comparisons: usize,
    pub max_rel_lhs: f64,
    pub max_rel_rhs: f64,
    /// Left-side disagreement beyond the rounding bound of the two difference quotients.
    pub max_rel_lhs_beyond_rounding: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<IdentityResidual>,
    pub summary: Vec<SummaryRow>,
    pub cross_path: Vec<CrossPathRow>,
    pub converged_fraction: f64,
    pub min_converged_fraction: f64,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.summary.iter().all(|s| s.pass)
            && self.cross_path.iter().all(|c| c.pass)
            && self.converged_fraction >= self.min_converged_fraction
    }

    pub fn max_rel_residual(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| !r.finiteness_only)
            .map(|r| r.rel_residual)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self, header: &[String]) -> String {
        let mut out = String::new();
        for h in header {
            out.push_str("# ");
            out.push_str(h);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record([
            "identity_id", "variant", "chart", "p", "q", "alpha", "beta", "point", "lhs", "rhs", "abs_residual",
            "rel_residual", "term_scale", "h_used", "convergence_ratio", "converged", "finiteness_only", "pass",
        ])
        .expect("in-memory write");
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.rows {
            let point = r.point.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
            w.write_record([
                r.identity_id.to_string(),
                r.variant.clone(),
                r.chart.clone(),
                opt(r.params.p),
                opt(r.params.q),
                opt(r.params.alpha),
                opt(r.params.beta),
                point,
                format!("{:e}", r.lhs),
                format!("{:e}", r.rhs),
                format!("{:e}", r.abs_residual),
                format!("{:e}", r.rel_residual),
                format!("{:e}", r.term_scale),
                format!("{:e}", r.h_used),
                r.convergence_ratio.map(|x| format!("{x:.6}")).unwrap_or_default(),
                r.converged.to_string(),
                r.finiteness_only.to_string(),
                r.pass.to_string(),
            ])
            .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
        out
    }

    /// Fixed-width table: identity, max rel residual, min ratio, pass.
    pub fn summary_table(&self) -> String {
        let mut s = format!(
            "{:<14} {:>7} {:>12} {:>10} {:>10} {:>5}\n",
            "identity", "tuples", "max_rel", "min_ratio", "converged", "pass"
        );
        for r in &self.summary {
            s.push_str(&format!(
                "{:<14} {:>7} {:>12.3e} {:>10.3} {:>9.1}% {:>5}\n",
                r.identity_id.name(),
                r.tuples,
                r.max_rel_residual,
                r.min_convergence_ratio,
                100.0 * r.converged_fraction,
                if r.pass { "ok" } else { "FAIL" }
            ));
        }
        for c in &self.cross_path {
            s.push_str(&format!(
                "cross-path {:<32} lhs {:.2e} (beyond rounding {:.2e}) rhs {:.2e} {}\n",
                c.name,
                c.max_rel_lhs,
                c.max_rel_lhs_beyond_rounding,
                c.max_rel_rhs,
                if c.pass { "ok" } else { "FAIL" }
            ));
        }
        s
    }
}

/// All tuples of one case at one point, at `h` and `h/2`.
fn point_rows(
    chart: &MetricChart,
    u: &dyn ScalarField,
    p: &[f64],
    h: f64,
    tuples: &[(IdentityId, Params, bool)],
    label: &str,
    tolerances: (f64, f64),
) -> Result<Vec<IdentityResidual>> {
    let coarse = StencilGeometry::new(chart, u, p, h)?;
    let fine = StencilGeometry::new(chart, u, p, 0.5 * h)?;
    let mut rows = Vec::new();
    for &(id, params, finiteness_only) in tuples {
        for mut row in assemble(&coarse, &fine, id, params, label, finiteness_only) {
            row.tolerance = if id.is_low_order() { tolerances.0 } else { tolerances.1 };
            if !finiteness_only {
                row.pass = row.lhs.is_finite() && row.rhs.is_finite() && row.rel_residual <= row.tolerance;
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn run_suite(config: &CheckSuiteConfig) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    for (ci, case) in config.cases.iter().enumerate() {
        let chart = build_chart(&case.manifold)?;
        let built = build_u(&case.manifold, case.u)?;
        let u = built.field();
        let tuples = config.tuples(chart.dim())?;
        let seed = config.seed ^ (ci as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let points = sample_points(&chart, u, config.points_per_chart, seed, config.radius_range, config.h)?;
        let label = case.label();
        let per_point: Vec<Result<Vec<IdentityResidual>>> = points
            .par_iter()
            .map(|p| {
                point_rows(
                    &chart,
                    u,
                    p,
                    config.h,
                    &tuples,
                    &label,
                    (config.low_order_tolerance, config.high_order_tolerance),
                )
            })
            .collect();
        for r in per_point {
            rows.extend(r?);
        }
    }
    Ok(summarize(rows, config))
}

fn summarize(rows: Vec<IdentityResidual>, config: &CheckSuiteConfig) -> SuiteReport {
    let mut summary = Vec::new();
    for id in IdentityId::ALL {
        let mine: Vec<&IdentityResidual> = rows.iter().filter(|r| r.identity_id == id).collect();
        if mine.is_empty() {
            continue;
        }
        let scored: Vec<&&IdentityResidual> = mine.iter().filter(|r| !r.finiteness_only).collect();
        let worst = scored
            .iter()
            .max_by(|a, b| a.rel_residual.total_cmp(&b.rel_residual))
            .copied()
            .unwrap_or(&mine[0]);
        let converged = scored.iter().filter(|r| r.converged).count();
        summary.push(SummaryRow {
            identity_id: id,
            tuples: mine.len(),
            max_rel_residual: worst.rel_residual,
            min_convergence_ratio: scored
                .iter()
                .filter(|r| r.abs_residual > ROUNDOFF_FLOOR * r.term_scale.max(1.0))
                .filter_map(|r| r.convergence_ratio)
                .fold(f64::INFINITY, f64::min),
            converged_fraction: converged as f64 / scored.len().max(1) as f64,
            worst_point: worst.point.clone(),
            worst_chart: worst.chart.clone(),
            pass: mine.iter().all(|r| r.pass),
        });
    }
    let scored: Vec<&IdentityResidual> = rows.iter().filter(|r| !r.finiteness_only).collect();
    let converged_fraction = scored.iter().filter(|r| r.converged).count() as f64 / scored.len().max(1) as f64;
    let cross_path = cross_paths(&rows, config.cross_path_tolerance);
    SuiteReport { rows, summary, cross_path, converged_fraction, min_converged_fraction: config.min_converged_fraction }
}

fn same_point(a: &IdentityResidual, b: &IdentityResidual) -> bool {
    a.chart == b.chart && a.point == b.point
}

fn cross_rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(scale).max(1e-14)
}

/// Pairs rows whose identities coincide mathematically at matching parameters.
pub fn cross_paths(rows: &[IdentityResidual], tolerance: f64) -> Vec<CrossPathRow> {
    type Matcher = Box<dyn Fn(&IdentityResidual, &IdentityResidual) -> bool>;
    let n_of = |r: &IdentityResidual| r.point.len() as f64;
    let pairs: Vec<(&str, IdentityId, Option<&str>, IdentityId, Matcher)> = vec![
        (
            "cor_deltanu = p_deltanu(1)",
            IdentityId::CorDeltanu,
            None,
            IdentityId::PDeltanu,
            Box::new(|_, b| b.params.alpha == Some(1.0)),
        ),
        (
            "optimize(2q=2-n) = dvs",
            IdentityId::Optimize,
            Some("harmonic_weight"),
            IdentityId::Dvs,
            Box::new(move |a, b| b.params.beta == a.params.beta && b.params.q == Some((2.0 - n_of(a)) / 2.0)),
        ),
        (
            "optimize(q=0) = dvs",
            IdentityId::Optimize,
            Some("unweighted"),
            IdentityId::Dvs,
            Box::new(|a, b| b.params.beta == a.params.beta && b.params.q == Some(0.0)),
        ),
        (
            "thirdcl = divforms_2(2-n, beta-1)",
            IdentityId::Thirdcl,
            None,
            IdentityId::Divforms2,
            Box::new(move |a, b| {
                b.params.p == Some(2.0 - n_of(a)) && b.params.alpha == a.params.beta.map(|x| x - 1.0)
            }),
        ),
    ];
    pairs
        .into_iter()
        .map(|(name, left, variant, right, matches)| {
            let mut comparisons = 0;
            let mut max_rel_lhs: f64 = 0.0;
            let mut max_rel_rhs: f64 = 0.0;
            let mut beyond: f64 = 0.0;
            for a in rows.iter().filter(|r| r.identity_id == left && variant.is_none_or(|v| r.variant == v)) {
                for b in rows.iter().filter(|r| r.identity_id == right && same_point(a, r) && matches(a, r)) {
                    let scale = a.term_scale.max(b.term_scale);
                    comparisons += 1;
                    max_rel_lhs = max_rel_lhs.max(cross_rel(a.lhs, b.lhs, scale));
                    max_rel_rhs = max_rel_rhs.max(cross_rel(a.rhs, b.rhs, scale));
                    let excess = ((a.lhs - b.lhs).abs() - a.lhs_rounding - b.lhs_rounding).max(0.0);
                    beyond = beyond.max(cross_rel(excess, 0.0, a.lhs.abs().max(b.lhs.abs()).max(scale)));
                }
            }
            CrossPathRow {
                name: name.to_string(),
                comparisons,
                max_rel_lhs,
                max_rel_rhs,
                max_rel_lhs_beyond_rounding: beyond,
                pass: comparisons > 0 && beyond <= tolerance && max_rel_rhs <= tolerance,
            }
        })
        .collect()
}
