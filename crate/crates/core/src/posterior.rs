//! Posterior summaries, the scaled-neighborhood criterion, moderator
//! flags and density curves (kernel estimates and analytic prior curves).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::{floor, pow, sqrt};

use crate::error::{Error, Result};
use crate::math::normal_pdf;
use crate::priors::{hyperprior_g_density, shrinkage_factor_density, tuning_f, PriorMethod, Tuning};
use crate::sampler::PosteriorDraws;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub method: String,
    pub params: Vec<ParamSummary>,
    /// Scaled-neighborhood probability of each `gamma_k`, in moderator order.
    pub p_gamma: Vec<f64>,
    pub dic: Option<f64>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Summaries of `gamma_1..gamma_d`, in order.
    pub fn gammas(&self) -> Vec<&ParamSummary> {
        (1..=self.p_gamma.len()).filter_map(|k| self.get(&format!("gamma[{k}]"))).collect()
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (divisor `m − 1`).
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    sqrt(x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0))
}

/// Quantile of sorted data by linear interpolation between order
/// statistics (`h = (m − 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize_column(name: &str, x: &[f64]) -> ParamSummary {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamSummary {
        name: name.to_string(),
        mean: mean(x),
        sd: sample_sd(x),
        ci_low: quantile_sorted(&sorted, 0.025),
        ci_high: quantile_sorted(&sorted, 0.975),
    }
}

/// Pooled-chain mean, SD and equal-tailed 95% interval of every stored
/// parameter, plus `p_gamma_k` for every moderator.
pub fn summarize(draws: &PosteriorDraws) -> Result<PosteriorSummary> {
    let n = draws.n_draws();
    if n == 0 {
        return Err(Error::EmptyDraws);
    }
    if n < 2 {
        return Err(Error::Domain("a summary needs at least two draws".to_string()));
    }
    let mut params = Vec::with_capacity(draws.n_params());
    let mut p_gamma = Vec::new();
    for name in draws.names() {
        let x = draws.pooled(name)?;
        if name.starts_with("gamma[") {
            p_gamma.push(scaled_neighborhood_prob(&x)?);
        }
        params.push(summarize_column(name, &x));
    }
    Ok(PosteriorSummary { method: draws.provenance().method.clone(), params, p_gamma, dic: None })
}

/// Fraction of draws with `|γ| <` the sample SD of the same draws.
pub fn scaled_neighborhood_prob(draws: &[f64]) -> Result<f64> {
    if draws.len() < 2 {
        return Err(Error::Domain("need at least two draws".to_string()));
    }
    let sd = sample_sd(draws);
    if !(sd > 0.0) {
        return Err(Error::DegeneratePosterior("draws have zero variance".to_string()));
    }
    Ok(draws.iter().filter(|v| v.abs() < sd).count() as f64 / draws.len() as f64)
}

/// Moderators judged important, as 0-based moderator indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ModeratorFlags {
    /// `p_gamma_k < threshold`.
    pub neighborhood: Vec<usize>,
    /// 95% interval excludes zero.
    pub ci_excludes_zero: Vec<usize>,
}

/// Indices with probability strictly below `threshold`.
pub fn flag_by_probability(p_gamma: &[f64], threshold: f64) -> Vec<usize> {
    p_gamma.iter().enumerate().filter(|(_, p)| **p < threshold).map(|(k, _)| k).collect()
}

pub fn flag_moderators(summary: &PosteriorSummary, threshold: f64) -> ModeratorFlags {
    ModeratorFlags {
        neighborhood: flag_by_probability(&summary.p_gamma, threshold),
        ci_excludes_zero: summary
            .gammas()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.ci_low > 0.0 || s.ci_high < 0.0)
            .map(|(k, _)| k)
            .collect(),
    }
}

/// Evenly spaced evaluation points, both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Grid> {
        if !(lo < hi) || n < 2 {
            return Err(Error::Domain(format!("grid needs lo < hi and n ≥ 2 (got {lo}, {hi}, {n})")));
        }
        Ok(Grid { lo, hi, n })
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(move |i| self.lo + i as f64 * h)
    }

    /// Mean ± 6 sample SDs of the draws.
    pub fn around(draws: &[f64], n: usize) -> Result<Grid> {
        let (m, s) = (mean(draws), sample_sd(draws));
        Grid::new(m - 6.0 * s, m + 6.0 * s, n)
    }
}

/// Silverman's rule-of-thumb bandwidth `0.9 min(sd, IQR/1.34) m^(-1/5)`.
pub fn silverman_bandwidth(draws: &[f64]) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let sd = sample_sd(draws);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * pow(draws.len() as f64, -0.2)
}

/// Gaussian kernel density estimate on `grid`.
pub fn kde(draws: &[f64], grid: &Grid) -> Result<Vec<(f64, f64)>> {
    if draws.len() < 2 {
        return Err(Error::Domain("a density estimate needs at least two draws".to_string()));
    }
    let h = silverman_bandwidth(draws);
    if !(h > 0.0) {
        return Err(Error::DegeneratePosterior("draws have zero variance".to_string()));
    }
    let norm = 1.0 / (draws.len() as f64 * h);
    Ok(grid.points().map(|x| (x, norm * draws.iter().map(|d| normal_pdf((x - d) / h)).sum::<f64>())).collect())
}

/// Which analytic prior curve to tabulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorCurve {
    /// Density of `g`.
    G,
    /// Density of the shrinkage factor `g / (1 + g)`.
    Factor,
}

/// Analytic prior density of `g` or of `g/(1+g)` on `grid`. `b` fixes the
/// S1/S3 skewness; `None` integrates it out. Points outside the support
/// get density 0.
pub fn prior_curve(
    method: &PriorMethod,
    curve: PriorCurve,
    b: Option<f64>,
    n_total: usize,
    grid: &Grid,
) -> Result<Vec<(f64, f64)>> {
    if !method.has_proper_g_hyperprior() {
        return Err(Error::Unsupported(format!("{method} has no proper hyperprior on g")));
    }
    grid.points()
        .map(|x| {
            let y = match curve {
                PriorCurve::G if x <= 0.0 => 0.0,
                PriorCurve::G => hyperprior_g_density(method, x, b, n_total)?,
                PriorCurve::Factor => shrinkage_factor_density(method, x, b, n_total)?,
            };
            Ok((x, y))
        })
        .collect()
}

/// `f(n | p)` over a grid of `p` inside the tuning support; points
/// outside it are skipped.
pub fn tuning_curve(kind: Tuning, n: usize, grid: &Grid) -> Vec<(f64, f64)> {
    let (lo, hi) = kind.support(n);
    grid.points()
        .filter(|p| *p > lo && *p <= hi)
        .filter_map(|p| tuning_f(kind, n, p).ok().map(|f| (p, f)))
        .collect()
}

/// Trapezoid integral of a tabulated curve.
pub fn trapezoid(curve: &[(f64, f64)]) -> f64 {
    curve.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}
