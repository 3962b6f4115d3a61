//! Natural cubic spline through monotone abscissae.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    /// Returns `None` unless `xs` is strictly increasing with at least three knots.
    pub fn natural(xs: &[f64], ys: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n < 3 || ys.len() != n || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return None;
        }
        // Tridiagonal solve for interior second derivatives.
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let a = h0;
            let b = 2.0 * (h0 + h1);
            let cc = h1;
            let r = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            let denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (r - a * d[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Some(CubicSpline {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("non-empty"))
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Value and first two derivatives; linear extrapolation outside the knots.
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            let (edge, i) = if x < lo { (lo, 0) } else { (hi, self.xs.len() - 1) };
            let (y, d, _) = self.eval3(edge);
            let _ = i;
            return (y + d * (x - edge), d, 0.0);
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let y = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dy = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let d2 = a * m0 + b * m1;
        (y, dy, d2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval3(x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots_and_reproduces_lines() {
        let xs = [0.0, 0.5, 1.3, 2.0, 3.1];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = CubicSpline::natural(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x) - y).abs() < 1e-14);
        }
        let (y, d, dd) = s.eval3(1.7);
        assert!((y - 2.4).abs() < 1e-13 && (d - 2.0).abs() < 1e-13 && dd.abs() < 1e-12);
    }

    #[test]
    fn smooth_function_converges() {
        let xs: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let s = CubicSpline::natural(&xs, &ys).unwrap();
        assert!((s.eval(1.234) - 1.234f64.sin()).abs() < 1e-8);
        assert!((s.eval3(1.234).1 - 1.234f64.cos()).abs() < 1e-5);
    }

    #[test]
    fn rejects_non_monotone_knots() {
        assert!(CubicSpline::natural(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_none());
    }
}
