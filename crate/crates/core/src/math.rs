//! Scalar special functions and log densities shared by the prior and
//! sampler code. Everything here is a thin layer over `libm`.

use core::f64::consts::PI;

use libm::{exp, lgamma, log, log1p};

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn ln_gamma(x: f64) -> f64 {
    lgamma(x)
}

/// Log of the Beta function `B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// Log density of `N(0, var)` at `x`.
pub fn normal_ln_pdf(x: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + log(var) + x * x / var)
}

/// Log density of the inverse-gamma law with the given shape and scale
/// (density ∝ x^(-shape-1) exp(-scale/x)).
pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * log(scale) - lgamma(shape) - (shape + 1.0) * log(x) - scale / x
}

/// Log density of `Beta(a, b)` at `x ∈ (0, 1)`.
pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * log(x) + (b - 1.0) * log1p(-x) - ln_beta(a, b)
}

pub fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    exp(beta_ln_pdf(x, a, b))
}

pub fn normal_pdf(x: f64) -> f64 {
    exp(-0.5 * x * x) / libm::sqrt(2.0 * PI)
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// `ln σ(z)` and `ln(1 − σ(z))` without cancellation.
pub fn ln_sigmoid_pair(z: f64) -> (f64, f64) {
    // ln σ(z) = -softplus(-z), ln(1-σ(z)) = -softplus(z)
    (-softplus(-z), -softplus(z))
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + log1p(exp(-z))
    } else {
        log1p(exp(z))
    }
}

/// Midpoint rule over `(lo, hi)`; used for the `b ~ Uniform(0, 2)`
/// marginalisations where the integrand is smooth on the open interval.
pub fn midpoint_integral<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_beta_matches_factorials() {
        // B(2, 3) = 1!2!/4! = 1/12
        assert!((ln_beta(2.0, 3.0) - log(1.0 / 12.0)).abs() < 1e-13);
    }

    #[test]
    fn inv_gamma_density_known_value() {
        // IG(1, 1) at x = 1: 1 * 1^-2 * e^-1
        assert!((inv_gamma_ln_pdf(1.0, 1.0, 1.0) + 1.0).abs() < 1e-13);
    }

    #[test]
    fn sigmoid_pair_consistent() {
        for &z in &[-40.0, -3.0, 0.0, 2.5, 40.0] {
            let (a, b) = ln_sigmoid_pair(z);
            assert!((exp(a) - sigmoid(z)).abs() < 1e-12);
            assert!((exp(b) - (1.0 - sigmoid(z))).abs() < 1e-12);
        }
    }
}
