//! Small numerical kernels shared by the geometric modules.

pub mod quadrature;
pub mod roots;
pub mod spline;

/// Volume of the unit sphere S^{n-1} ⊂ R^n, i.e. 2π^{n/2}/Γ(n/2).
pub fn unit_sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    // ω_0 = 2, ω_1 = 2π, ω_{k+1} = 2π/k · ω_{k-1}
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * unit_sphere_area(n - 2),
    }
}

/// Fourth-order central difference weights for offsets ±1, ±2.
pub const D1_FOURTH: [(f64, f64); 4] = [
    (-2.0, 1.0 / 12.0),
    (-1.0, -8.0 / 12.0),
    (1.0, 8.0 / 12.0),
    (2.0, -1.0 / 12.0),
];

/// Fourth-order central first derivative of `f` at `x`.
pub fn d1_fourth(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    D1_FOURTH.iter().map(|(k, w)| w * f(x + k * h)).sum::<f64>() / h
}

/// Fourth-order central second derivative.
pub fn d2_fourth(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn fourth_order_stencils() {
        let d = d1_fourth(f64::sin, 0.4, 1e-2);
        assert!((d - 0.4f64.cos()).abs() < 1e-9);
        let dd = d2_fourth(f64::exp, 0.3, 1e-2);
        assert!((dd - 0.3f64.exp()).abs() < 1e-8);
    }
}
