#![allow(dead_code)]

use ipdma_core::data::{IpdDataset, TrialBlock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct Truth {
    pub mu: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma: f64,
    pub tau: f64,
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Independent standard-normal covariates, alternating arms, trial-level
/// random effects of standard deviation `truth.tau` on every coefficient
/// that has one in the model.
pub fn simulate(seed: u64, n_trials: usize, n_per: usize, truth: &Truth) -> IpdDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = truth.beta.len();
    let trials = (0..n_trials)
        .map(|i| {
            let u_mu = truth.tau * normal(&mut rng);
            let u_alpha = truth.tau * normal(&mut rng);
            let u: Vec<f64> = truth
                .gamma
                .iter()
                .map(|_| truth.tau * normal(&mut rng))
                .collect();
            let mut y = Vec::new();
            let mut t = Vec::new();
            let mut x = Vec::new();
            for j in 0..n_per {
                let treated = j % 2 == 1;
                let tf = if treated { 1.0 } else { 0.0 };
                let row: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
                let mut m = truth.mu + u_mu + tf * (truth.alpha + u_alpha);
                for k in 0..p {
                    m += row[k] * truth.beta[k];
                }
                for (k, g) in truth.gamma.iter().enumerate() {
                    m += tf * row[k] * (g + u[k]);
                }
                y.push(m + truth.sigma * normal(&mut rng));
                t.push(treated);
                x.extend(row);
            }
            TrialBlock::new(format!("T{}", i + 1), y, t, x, p).unwrap()
        })
        .collect();
    IpdDataset::with_default_names(trials)
        .unwrap()
        .center_covariates()
}

pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random()
}
