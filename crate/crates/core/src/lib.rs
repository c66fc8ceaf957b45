#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod data;
pub mod error;
pub mod exec;
pub mod math;
pub mod posterior;
pub mod priors;
pub mod sampler;
pub mod simulation;
pub mod slice;
pub mod state;

pub use data::{Centering, DatasetBuilder, IpdDataset, ModelSpec, TrialBlock};
pub use error::{Error, Result};
pub use priors::{PriorMethod, ShrinkLevel, Tuning};
pub use sampler::{run_mcmc, run_mcmc_with, ChainConfig, PosteriorDraws, SamplerOptions};
pub use state::{Layout, ParameterState, PriorLatents};
