//! Convergence diagnostics, Monte Carlo error and the deviance
//! information criterion.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use libm::{log, sqrt};

use super::PosteriorDraws;
use crate::data::{IpdDataset, ModelSpec};
use crate::error::{Error, Result};
use crate::math::LN_2PI;
use crate::state::{Layout, ParameterState};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Split-chain potential scale reduction factor of one parameter.
pub fn gelman_rubin(draws: &PosteriorDraws, param: &str) -> Result<f64> {
    if draws.n_chains() < 2 {
        return Err(Error::Unsupported(
            "R-hat needs at least two chains".to_string(),
        ));
    }
    let chains = draws.by_chain(param)?;
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 10 {
        return Err(Error::Domain(format!(
            "R-hat needs at least 10 draws per chain, got {n}"
        )));
    }
    let half = n / 2;
    let mut pieces = Vec::with_capacity(2 * chains.len());
    for c in &chains {
        pieces.push(&c[..half]);
        pieces.push(&c[n - half..n]);
    }
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let w = mean(&pieces.iter().map(|p| var(p)).collect::<Vec<_>>());
    let b = half as f64 * var(&means);
    if !(w > 0.0) {
        return Err(Error::DegeneratePosterior(format!(
            "`{param}` has zero within-chain variance"
        )));
    }
    let nf = half as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok(sqrt(var_plus / w))
}

/// Batch-means Monte Carlo standard error of the posterior mean of one
/// parameter, batches of `⌊√n⌋` draws taken within each chain.
pub fn mcse(draws: &PosteriorDraws, param: &str) -> Result<f64> {
    let chains = draws.by_chain(param)?;
    let total: usize = chains.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::EmptyDraws);
    }
    let size = (sqrt(total as f64 / chains.len() as f64) as usize).max(1);
    let batch_means: Vec<f64> = chains
        .iter()
        .flat_map(|c| c.chunks_exact(size).map(mean))
        .collect();
    if batch_means.len() < 2 {
        return Err(Error::Domain(format!(
            "too few draws ({total}) for batch means"
        )));
    }
    let used = (batch_means.len() * size) as f64;
    Ok(sqrt(var(&batch_means) * size as f64 / used))
}

/// Gaussian log-likelihood of the data given every parameter including
/// the random effects.
pub fn log_likelihood(state: &ParameterState, data: &IpdDataset, spec: &ModelSpec) -> f64 {
    let mut ll = 0.0;
    for (i, tb) in data.trials().iter().enumerate() {
        let s2 = state.sigma2[i];
        let ui = state.u.get(i).map(Vec::as_slice).unwrap_or(&[]);
        for j in 0..tb.n() {
            let t = tb.tf(j);
            let mut m = state.mu + state.u_mu.get(i).copied().unwrap_or(0.0);
            m += t * (state.alpha + state.u_alpha.get(i).copied().unwrap_or(0.0));
            m += tb
                .row(j)
                .iter()
                .zip(&state.beta)
                .map(|(x, b)| x * b)
                .sum::<f64>();
            for (k, &c) in spec.moderators.iter().enumerate() {
                let em = t * tb.x(j, c);
                m += em * (state.gamma[k] + ui.get(k).copied().unwrap_or(0.0));
            }
            let r = tb.y()[j] - m;
            ll -= 0.5 * (LN_2PI + log(s2) + r * r / s2);
        }
    }
    ll
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dic {
    pub dic: f64,
    /// Posterior mean deviance.
    pub mean_deviance: f64,
    /// Effective number of parameters.
    pub p_d: f64,
}

/// `DIC = D̄ + p_D`, `p_D = D̄ − D(θ̄)`, with the deviance conditional on
/// the random effects and `θ̄` the posterior mean of every parameter.
pub fn dic(draws: &PosteriorDraws, data: &IpdDataset, spec: &ModelSpec) -> Result<Dic> {
    let layout = Layout::new(spec, data.n_trials(), data.p(), data.n_total());
    let means = draws.mean_row()?;
    let d_bar = means[draws.index_of("deviance")?];
    let state = layout.read(&means)?;
    let d_hat = -2.0 * log_likelihood(&state, data, spec);
    if !d_hat.is_finite() {
        return Err(Error::DegeneratePosterior(
            "non-finite deviance at the posterior mean".to_string(),
        ));
    }
    let p_d = d_bar - d_hat;
    Ok(Dic {
        dic: d_bar + p_d,
        mean_deviance: d_bar,
        p_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{ChainConfig, ChainDraws, Provenance};
    use alloc::string::String;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn draws(chains: Vec<Vec<f64>>) -> PosteriorDraws {
        let chains = chains
            .into_iter()
            .map(|v| ChainDraws {
                iterations: (1..=v.len()).collect(),
                values: v,
            })
            .collect();
        let prov = Provenance {
            config: ChainConfig::default(),
            method: String::from("Flat"),
        };
        PosteriorDraws::new(vec![String::from("x")], chains, prov).unwrap()
    }

    fn normals(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                shift + z
            })
            .collect()
    }

    #[test]
    fn rhat_identical_iid_chains_near_one() {
        let c = normals(1, 2000, 0.0);
        let r = gelman_rubin(&draws(vec![c.clone(), c]), "x").unwrap();
        assert!((r - 1.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn rhat_separated_chains_large() {
        let r = gelman_rubin(
            &draws(vec![normals(1, 500, 0.0), normals(2, 500, 10.0)]),
            "x",
        )
        .unwrap();
        assert!(r > 1.5, "{r}");
    }

    #[test]
    fn rhat_rejects_single_and_constant_chains() {
        assert!(matches!(
            gelman_rubin(&draws(vec![normals(1, 50, 0.0)]), "x"),
            Err(Error::Unsupported(_))
        ));
        let r = gelman_rubin(&draws(vec![vec![1.0; 50], vec![1.0; 50]]), "x");
        assert!(matches!(r, Err(Error::DegeneratePosterior(_))));
    }

    #[test]
    fn mcse_of_iid_draws_is_sd_over_root_n() {
        let c = normals(3, 40_000, 0.0);
        let m = mcse(&draws(vec![c]), "x").unwrap();
        assert!((m / (1.0 / 200.0) - 1.0).abs() < 0.25, "{m}");
    }
}
