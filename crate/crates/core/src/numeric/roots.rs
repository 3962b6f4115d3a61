//! Bracketed scalar root finding.

use crate::error::{GeomError, Result};

/// Brent's method on a sign-changing bracket.
pub fn brent(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(GeomError::RootNotFound(format!(
            "no sign change on [{a}, {b}]: f = {fa}, {fb}"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(GeomError::RootNotFound("Brent iteration limit".into()))
}

/// Expand `[lo, hi]` geometrically until `f` changes sign, then solve.
pub fn bracket_and_solve(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
) -> Result<f64> {
    debug_assert!(lo > 0.0 && hi > lo);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    for _ in 0..200 {
        if flo.signum() != fhi.signum() {
            return brent(f, lo, hi, xtol);
        }
        if flo.abs() < fhi.abs() {
            lo *= 0.5;
            flo = f(lo);
        } else {
            hi *= 2.0;
            fhi = f(hi);
        }
    }
    Err(GeomError::RootNotFound(format!(
        "could not bracket a root (last bracket [{lo:e}, {hi:e}])"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }

    #[test]
    fn brackets_outward() {
        let r = bracket_and_solve(|x| x.ln() - 5.0, 1.0, 2.0, 1e-12).unwrap();
        assert!((r - 5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn reports_missing_sign_change() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
