//! Metropolis-within-Gibbs sampler for the hierarchical model.
//!
//! Each sweep draws the fixed effects jointly with the random effects
//! integrated out, then the random effects given the fixed effects, the
//! residual variances, the random-effect variances (half-Cauchy through an
//! inverse-gamma auxiliary pair) and finally the prior's own latents.

mod design;
mod diagnostics;
mod gaussian;
mod gibbs;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{IpdDataset, ModelSpec};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::state::{Layout, ParameterState};

pub use diagnostics::{dic, gelman_rubin, log_likelihood, mcse, Dic};
pub use gaussian::{factor, GaussianBlock};

/// Chain length, burn-in and thinning shared by every chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_chains: 2,
            n_iter: 20_000,
            burn_in: 10_000,
            thin: 10,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Config("need at least one chain".to_string()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".to_string()));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "burn_in ({}) must be below n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

/// Switches that change what the sampler targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerOptions {
    /// When false, the data are ignored: `gamma` is drawn from its prior
    /// given the latents and only the prior latents are updated, so the
    /// chain targets the joint prior of `(gamma, latents)`.
    pub likelihood: bool,
    /// Hold every `sigma_i²` at the given values.
    pub fixed_sigma2: Option<Vec<f64>>,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            likelihood: true,
            fixed_sigma2: None,
        }
    }
}

/// Retained draws of one chain, row-major (`iterations.len()` rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub iterations: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config: ChainConfig,
    pub method: String,
}

/// Retained draws of every chain with the parameter-name registry.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    chains: Vec<ChainDraws>,
    provenance: Provenance,
}

impl PosteriorDraws {
    pub fn new(
        names: Vec<String>,
        chains: Vec<ChainDraws>,
        provenance: Provenance,
    ) -> Result<Self> {
        let np = names.len();
        for (c, ch) in chains.iter().enumerate() {
            if ch.values.len() != ch.iterations.len() * np {
                return Err(Error::Domain(format!(
                    "chain {c}: {} values for {} draws of {np} parameters",
                    ch.values.len(),
                    ch.iterations.len()
                )));
            }
        }
        Ok(PosteriorDraws {
            names,
            chains,
            provenance,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn chains(&self) -> &[ChainDraws] {
        &self.chains
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    /// Total retained draws over all chains.
    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.iterations.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Domain(format!("unknown parameter `{name}`")))
    }

    pub fn row(&self, chain: usize, draw: usize) -> &[f64] {
        let np = self.names.len();
        &self.chains[chain].values[draw * np..(draw + 1) * np]
    }

    /// Draws of one parameter, one vector per chain.
    pub fn by_chain(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let j = self.index_of(name)?;
        let np = self.names.len();
        Ok(self
            .chains
            .iter()
            .map(|c| c.values.iter().skip(j).step_by(np).copied().collect())
            .collect())
    }

    /// Draws of one parameter with the chains concatenated.
    pub fn pooled(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.by_chain(name)?.concat())
    }

    /// Posterior mean of every column.
    pub fn mean_row(&self) -> Result<Vec<f64>> {
        let n = self.n_draws();
        if n == 0 {
            return Err(Error::EmptyDraws);
        }
        let np = self.names.len();
        let mut m = alloc::vec![0.0; np];
        for c in &self.chains {
            for row in c.values.chunks(np) {
                for (a, v) in m.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
        Ok(m.into_iter().map(|v| v / n as f64).collect())
    }
}

/// Run the sampler with default options, chains one after another.
pub fn run_mcmc(data: &IpdDataset, spec: &ModelSpec, cfg: &ChainConfig) -> Result<PosteriorDraws> {
    run_mcmc_with(data, spec, cfg, &SamplerOptions::default(), &Sequential)
}

/// Run `cfg.n_chains` independent chains through `exec`. Chain `c` uses
/// the RNG stream `c` of a generator seeded with `cfg.seed`, so results do
/// not depend on the executor.
pub fn run_mcmc_with<E: Executor>(
    data: &IpdDataset,
    spec: &ModelSpec,
    cfg: &ChainConfig,
    opts: &SamplerOptions,
    exec: &E,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    spec.validate(data.p())?;
    let design = design::Design::new(data, spec);
    let layout = Layout::new(spec, data.n_trials(), data.p(), data.n_total());
    let results = exec.map(cfg.n_chains, |c| {
        gibbs::Chain::new(&design, spec, opts, cfg.seed, c)
            .and_then(|chain| chain.run(cfg, &layout))
    });
    let chains = results.into_iter().collect::<Result<Vec<_>>>()?;
    PosteriorDraws::new(
        layout.names().to_vec(),
        chains,
        Provenance {
            config: *cfg,
            method: spec.prior.name(),
        },
    )
}

/// Rebuild the state stored in one draw.
pub fn draw_state(
    draws: &PosteriorDraws,
    spec: &ModelSpec,
    data: &IpdDataset,
    chain: usize,
    draw: usize,
) -> Result<ParameterState> {
    let layout = Layout::new(spec, data.n_trials(), data.p(), data.n_total());
    layout.read(draws.row(chain, draw))
}
