//! Gauss–Kronrod and Gauss–Legendre rules.

use crate::error::{GeomError, Result};

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value and error estimate of one Gauss–Kronrod integral.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

/// Abscissae of the 15-point rule mapped to [a, b].
pub fn gk15_nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for j in 0..7 {
        x[2 * j] = c - h * XGK[j];
        x[2 * j + 1] = c + h * XGK[j];
    }
    x[14] = c;
    x
}

/// Combine integrand samples taken at [`gk15_nodes`].
pub fn gk15_combine(a: f64, b: f64, f: &[f64; 15]) -> Estimate {
    let h = 0.5 * (b - a);
    let mut k = WGK[7] * f[14];
    let mut g = WG[3] * f[14];
    for j in 0..7 {
        let pair = f[2 * j] + f[2 * j + 1];
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    Estimate {
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

pub fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Estimate {
    let nodes = gk15_nodes(a, b);
    let mut vals = [0.0; 15];
    for (v, x) in vals.iter_mut().zip(nodes) {
        *v = f(x);
    }
    gk15_combine(a, b, &vals)
}

/// Adaptive bisection with the 15-point rule until the summed error estimate
/// falls below `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::default());
    }
    let mut intervals = vec![(a, b, gk15(&mut f, a, b))];
    for _ in 0..2000 {
        let total = intervals.iter().fold(Estimate::default(), |s, i| s + i.2);
        if total.error <= abs_tol.max(rel_tol * total.value.abs()) {
            return Ok(total);
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("non-empty");
        let (lo, hi, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        intervals.push((lo, mid, gk15(&mut f, lo, mid)));
        intervals.push((mid, hi, gk15(&mut f, mid, hi)));
    }
    let total = intervals.iter().fold(Estimate::default(), |s, i| s + i.2);
    if total.error <= 1e3 * abs_tol.max(rel_tol * total.value.abs()) {
        Ok(total)
    } else {
        Err(GeomError::QuadratureFailed {
            a,
            b,
            err: total.error,
        })
    }
}

/// Adaptive integration of a positive-axis integrand in the variable log s.
pub fn adaptive_log(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    debug_assert!(a > 0.0 && b > 0.0);
    adaptive(
        |t| {
            let s = t.exp();
            f(s) * s
        },
        a.ln(),
        b.ln(),
        rel_tol,
        abs_tol,
    )
}

/// Gauss–Legendre rule with `n` points on [-1, 1] (Newton on P_n).
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pnm1 = if n == 1 { 1.0 } else { p0 };
                dp = nf * (x * pn - pnm1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 15 is integrated exactly
        let v = gl.integrate(|x| x.powi(14) + x.powi(15), -1.0, 1.0);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_rule_integrates_smooth_functions() {
        let e = gk15(&mut |x: f64| x.exp(), 0.0, 1.0);
        assert!((e.value - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_power_laws_in_log_variable() {
        // ∫_1^∞ s^{-2} ds truncated at 1e8
        let e = adaptive_log(|s| s.powi(-2), 1.0, 1e8, 1e-12, 0.0).unwrap();
        assert!((e.value - (1.0 - 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_endpoint_singularity() {
        let e = adaptive(|x| x.sqrt(), 0.0, 1.0, 1e-10, 0.0).unwrap();
        assert!((e.value - 2.0 / 3.0).abs() < 1e-10);
    }
}
