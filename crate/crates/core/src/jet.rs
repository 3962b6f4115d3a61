//! Second-order multivariate Taylor jets.
//!
//! A [`Jet`] carries the value, gradient and Hessian of a scalar function of
//! up to [`MAX_DIM`] coordinates. Arithmetic propagates all three exactly, so
//! a metric or scalar field written once against `Jet` yields analytic first
//! and second derivatives at any point.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub const MAX_DIM: usize = 6;

#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    dim: usize,
    value: f64,
    grad: [f64; MAX_DIM],
    hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim;
        f.debug_struct("Jet")
            .field("value", &self.value)
            .field("grad", &&self.grad[..n])
            .field(
                "hess",
                &self.hess[..n].iter().map(|r| &r[..n]).collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl Jet {
    pub fn constant(dim: usize, value: f64) -> Self {
        assert!(dim <= MAX_DIM, "jet dimension {dim} exceeds {MAX_DIM}");
        Jet {
            dim,
            value,
            grad: [0.0; MAX_DIM],
            hess: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// The coordinate function `x_index` evaluated at `at`.
    pub fn variable(dim: usize, index: usize, at: f64) -> Self {
        let mut j = Jet::constant(dim, at);
        j.grad[index] = 1.0;
        j
    }

    /// All coordinate functions at the point `p`.
    pub fn coordinates(p: &[f64]) -> Vec<Jet> {
        (0..p.len())
            .map(|i| Jet::variable(p.len(), i, p[i]))
            .collect()
    }

    pub fn from_parts(value: f64, grad: &[f64], hess: &[Vec<f64>]) -> Self {
        let dim = grad.len();
        let mut j = Jet::constant(dim, value);
        for i in 0..dim {
            j.grad[i] = grad[i];
            for k in 0..dim {
                j.hess[i][k] = hess[i][k];
            }
        }
        j
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn grad(&self) -> &[f64] {
        &self.grad[..self.dim]
    }

    #[inline]
    pub fn d(&self, i: usize) -> f64 {
        self.grad[i]
    }

    #[inline]
    pub fn dd(&self, i: usize, k: usize) -> f64 {
        self.hess[i][k]
    }

    /// Same-shaped constant, handy inside generic formulas.
    pub fn lift(&self, value: f64) -> Jet {
        Jet::constant(self.dim, value)
    }

    /// Apply a univariate function given its value and first two derivatives
    /// at `self.value()`.
    pub fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let n = self.dim;
        let mut out = Jet::constant(n, f0);
        for i in 0..n {
            out.grad[i] = f1 * self.grad[i];
            for k in 0..n {
                out.hess[i][k] = f1 * self.hess[i][k] + f2 * self.grad[i] * self.grad[k];
            }
        }
        out
    }

    pub fn sqrt(&self) -> Jet {
        let s = self.value.sqrt();
        self.compose(s, 0.5 / s, -0.25 / (s * self.value))
    }

    pub fn powf(&self, e: f64) -> Jet {
        let v = self.value;
        if e == 0.0 {
            return self.lift(1.0);
        }
        if e == 1.0 {
            return *self;
        }
        let p = v.powf(e);
        self.compose(p, e * p / v, e * (e - 1.0) * p / (v * v))
    }

    pub fn powi(&self, e: i32) -> Jet {
        let v = self.value;
        match e {
            0 => self.lift(1.0),
            1 => *self,
            _ => {
                let pm2 = v.powi(e - 2);
                let ef = f64::from(e);
                self.compose(pm2 * v * v, ef * pm2 * v, ef * (ef - 1.0) * pm2)
            }
        }
    }

    pub fn recip(&self) -> Jet {
        let v = self.value;
        self.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn ln(&self) -> Jet {
        let v = self.value;
        self.compose(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.compose(s, c, s)
    }

    pub fn tanh(&self) -> Jet {
        let t = self.value.tanh();
        let s2 = 1.0 - t * t;
        self.compose(t, s2, -2.0 * t * s2)
    }

    /// Euclidean norm of a vector of jets.
    pub fn norm(xs: &[Jet]) -> Jet {
        let mut acc = xs[0].lift(0.0);
        for x in xs {
            acc += *x * *x;
        }
        acc.sqrt()
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(mut self, rhs: Jet) -> Jet {
        self += rhs;
        self
    }
}

impl AddAssign for Jet {
    #[inline]
    fn add_assign(&mut self, rhs: Jet) {
        let n = self.dim;
        self.value += rhs.value;
        for i in 0..n {
            self.grad[i] += rhs.grad[i];
            for k in 0..n {
                self.hess[i][k] += rhs.hess[i][k];
            }
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(mut self, rhs: Jet) -> Jet {
        self -= rhs;
        self
    }
}

impl SubAssign for Jet {
    #[inline]
    fn sub_assign(&mut self, rhs: Jet) {
        let n = self.dim;
        self.value -= rhs.value;
        for i in 0..n {
            self.grad[i] -= rhs.grad[i];
            for k in 0..n {
                self.hess[i][k] -= rhs.hess[i][k];
            }
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.dim;
        let (a, b) = (self.value, rhs.value);
        let mut out = Jet::constant(n, a * b);
        for i in 0..n {
            out.grad[i] = a * rhs.grad[i] + b * self.grad[i];
            for k in 0..n {
                out.hess[i][k] = a * rhs.hess[i][k]
                    + b * self.hess[i][k]
                    + self.grad[i] * rhs.grad[k]
                    + rhs.grad[i] * self.grad[k];
            }
        }
        out
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        let n = self.dim;
        self.value *= rhs;
        for i in 0..n {
            self.grad[i] *= rhs;
            for k in 0..n {
                self.hess[i][k] *= rhs;
            }
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        rhs.recip() * self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&[Jet]) -> Jet, p: &[f64]) {
        let jet = f(&Jet::coordinates(p));
        let val = |q: &[f64]| {
            f(&q.iter().map(|&x| Jet::constant(q.len(), x)).collect::<Vec<_>>()).value()
        };
        let h = 1e-4;
        for i in 0..p.len() {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[i] += h;
            b[i] -= h;
            let d = (val(&a) - val(&b)) / (2.0 * h);
            assert!((d - jet.d(i)).abs() < 1e-7, "grad {i}: {d} vs {}", jet.d(i));
            for k in 0..p.len() {
                let mut s = [p.to_vec(), p.to_vec(), p.to_vec(), p.to_vec()];
                s[0][i] += h;
                s[0][k] += h;
                s[1][i] += h;
                s[1][k] -= h;
                s[2][i] -= h;
                s[2][k] += h;
                s[3][i] -= h;
                s[3][k] -= h;
                let dd = (val(&s[0]) - val(&s[1]) - val(&s[2]) + val(&s[3])) / (4.0 * h * h);
                assert!(
                    (dd - jet.dd(i, k)).abs() < 1e-5,
                    "hess {i}{k}: {dd} vs {}",
                    jet.dd(i, k)
                );
            }
        }
    }

    #[test]
    fn product_and_quotient_rules() {
        fd_check(|x| x[0] * x[1] / (x[2] + 2.0), &[0.3, -1.2, 0.7]);
    }

    #[test]
    fn elementary_functions() {
        fd_check(|x| (x[0] * x[0] + x[1]).sqrt().ln() + x[2].exp().sin(), &[1.1, 0.4, -0.3]);
        fd_check(|x| x[0].powf(-1.5) * x[1].tanh() + x[0].sinh().cos(), &[0.8, 0.2]);
        fd_check(|x| x[0].powi(3) - x[1].powi(-2), &[1.3, 0.9]);
    }

    #[test]
    fn norm_of_coordinates() {
        let x = Jet::coordinates(&[3.0, 4.0, 0.0]);
        let r = Jet::norm(&x);
        assert!((r.value() - 5.0).abs() < 1e-15);
        assert!((r.d(0) - 0.6).abs() < 1e-15);
        // Hessian of |x| is (I - x̂x̂ᵀ)/r
        assert!((r.dd(2, 2) - 0.2).abs() < 1e-15);
        assert!((r.dd(0, 1) + 0.6 * 0.8 / 5.0).abs() < 1e-15);
    }
}
