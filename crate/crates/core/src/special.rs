//! Scalar special functions used by the rate formulas.

use std::f64::consts::PI;

/// First positive zero of `J0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Unnormalized `sin(x) / x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `sinc(pi * eps)`, the mean of `exp(2 pi i eps xi)` for `xi ~ U[-1/2, 1/2]`.
pub fn sinc_pi(eps: f64) -> f64 {
    sinc(PI * eps)
}

/// Bessel `J0` by its power series; accurate to ~1e-15 for `|x| <= 8`.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}
