//! Replicate-level risk metrics for the moderation effects.
//!
//! `Literal` evaluates the formulas exactly as typeset (square roots over
//! unsquared sums, denominator `R d Σ|γ_k|`); `Conventional` uses the
//! dimensionally standard forms. For a fixed truth both variants are
//! monotone in the same sums, so they rank methods identically.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricVariant {
    #[default]
    Literal,
    Conventional,
}

fn check_dims(est: &[Vec<f64>], truth: &[f64]) -> Result<()> {
    if est.is_empty() {
        return Err(Error::UndefinedMetric("no replicates".to_string()));
    }
    if let Some(r) = est.iter().position(|e| e.len() != truth.len()) {
        return Err(Error::Domain(format!("replicate {r} has {} estimates for {} effects", est[r].len(), truth.len())));
    }
    Ok(())
}

fn check(est: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    check_dims(est, truth)?;
    let l1: f64 = truth.iter().map(|g| g.abs()).sum();
    if !(l1 > 0.0) {
        return Err(Error::UndefinedMetric("every true effect is zero".to_string()));
    }
    Ok(l1)
}

/// Turn a replicate sum into the metric. `squared` marks sums of squares
/// (which take a square root in the conventional form).
fn finish(sum: f64, r: usize, d: usize, l1: f64, squared: bool, variant: MetricVariant) -> f64 {
    let (r, d) = (r as f64, d as f64);
    match variant {
        MetricVariant::Literal => sqrt(sum) / (r * d * l1),
        MetricVariant::Conventional => {
            let mean_abs = l1 / d;
            let avg = sum / (r * d);
            if squared {
                sqrt(avg) / mean_abs
            } else {
                avg / mean_abs
            }
        }
    }
}

/// Average relative root mean squared error; `est[r][k]` is replicate `r`'s
/// estimate of `γ_k`.
pub fn arrmse(est: &[Vec<f64>], truth: &[f64], variant: MetricVariant) -> Result<f64> {
    let l1 = check(est, truth)?;
    let s: f64 = est.iter().flat_map(|e| e.iter().zip(truth).map(|(a, g)| (a - g) * (a - g))).sum();
    Ok(finish(s, est.len(), truth.len(), l1, true, variant))
}

/// Average absolute relative bias, built from the per-effect absolute
/// bias `Σ_k |Σ_r (γ̂_k − γ_k)|`.
pub fn aarbias(est: &[Vec<f64>], truth: &[f64], variant: MetricVariant) -> Result<f64> {
    let l1 = check(est, truth)?;
    let s: f64 = (0..truth.len()).map(|k| est.iter().map(|e| e[k] - truth[k]).sum::<f64>().abs()).sum();
    Ok(finish(s, est.len(), truth.len(), l1, false, variant))
}

/// The bias metric with the absolute value taken per replicate,
/// `Σ_r Σ_k |γ̂_k − γ_k|` (a mean absolute error rather than a bias).
pub fn aarbias_per_replicate(est: &[Vec<f64>], truth: &[f64], variant: MetricVariant) -> Result<f64> {
    let l1 = check(est, truth)?;
    let s: f64 = est.iter().flat_map(|e| e.iter().zip(truth).map(|(a, g)| (a - g).abs())).sum();
    Ok(finish(s, est.len(), truth.len(), l1, false, variant))
}

/// Average relative standard deviation around the replicate mean `γ̄_k`.
pub fn arsd(est: &[Vec<f64>], truth: &[f64], variant: MetricVariant) -> Result<f64> {
    let l1 = check(est, truth)?;
    let mean = replicate_mean(est, truth.len());
    let s: f64 = est.iter().flat_map(|e| e.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m))).sum();
    Ok(finish(s, est.len(), truth.len(), l1, true, variant))
}

fn replicate_mean(est: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d];
    for e in est {
        for (a, v) in m.iter_mut().zip(e) {
            *a += v;
        }
    }
    m.iter().map(|v| v / est.len() as f64).collect()
}

/// Per-effect bias, variance (divisor `R`) and mean squared error over
/// replicates; `mse = variance + bias²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub bias: Vec<f64>,
    pub variance: Vec<f64>,
    pub mse: Vec<f64>,
}

pub fn decompose(est: &[Vec<f64>], truth: &[f64]) -> Result<Decomposition> {
    check_dims(est, truth)?;
    let r = est.len() as f64;
    let mean = replicate_mean(est, truth.len());
    let bias = mean.iter().zip(truth).map(|(m, g)| m - g).collect();
    let variance = (0..truth.len()).map(|k| est.iter().map(|e| (e[k] - mean[k]) * (e[k] - mean[k])).sum::<f64>() / r).collect();
    let mse = (0..truth.len()).map(|k| est.iter().map(|e| (e[k] - truth[k]) * (e[k] - truth[k])).sum::<f64>() / r).collect();
    Ok(Decomposition { bias, variance, mse })
}

/// Participant-level root mean squared error from the summed squares
/// `Σ_j v_j²` of the per-participant effect differences over `n`
/// participants: literal `√(‖v‖/N)`, conventional `√(‖v‖²/N)`.
pub fn psrmse_from_sumsq(sumsq: f64, n: usize, variant: MetricVariant) -> f64 {
    let nf = n as f64;
    match variant {
        MetricVariant::Literal => sqrt(sqrt(sumsq) / nf),
        MetricVariant::Conventional => sqrt(sumsq / nf),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let lit = MetricVariant::Literal;
        assert_eq!(arrmse(&[vec![0.0]], &[2.0], lit).unwrap(), 1.0);
        assert_eq!(aarbias(&[vec![1.0]], &[2.0], lit).unwrap(), 0.5);
        assert_eq!(aarbias_per_replicate(&[vec![1.0]], &[2.0], lit).unwrap(), 0.5);
        // errors of opposite sign cancel in the bias but not per replicate
        assert_eq!(aarbias(&[vec![1.0], vec![3.0]], &[2.0], lit).unwrap(), 0.0);
        assert_eq!(aarbias_per_replicate(&[vec![1.0], vec![3.0]], &[2.0], lit).unwrap(), sqrt(2.0) / 4.0);
        assert!((arsd(&[vec![0.0], vec![2.0]], &[1.0], lit).unwrap() - 0.5 * sqrt(2.0)).abs() < 1e-12);
        assert!((psrmse_from_sumsq(4.0, 4, lit) - sqrt(0.5)).abs() < 1e-12);
    }

    #[test]
    fn zero_truth_undefined() {
        assert!(matches!(arrmse(&[vec![1.0, 0.0]], &[0.0, 0.0], MetricVariant::Literal), Err(Error::UndefinedMetric(_))));
        assert!(matches!(arsd(&[], &[1.0], MetricVariant::Literal), Err(Error::UndefinedMetric(_))));
    }
}
