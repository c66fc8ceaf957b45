//! Run configuration, read from TOML and written back as the run manifest.
//!
//! ```toml
//! methods = ["Flat", "HG(a=4)", "CMG-S3-pow"]
//! threshold = 0.5
//! workers = 4
//!
//! [chains]
//! n_chains = 2
//! n_iter = 20000
//! burn_in = 10000
//! thin = 10
//! seed = 1
//!
//! [data]
//! path = "trials.csv"
//! random_effects = "both"
//!
//! [columns]
//! trial_id = "study"
//! covariates = ["sex", "age"]
//! ```
//!
//! A single method can be given as `[prior]` (`tag`, `a`, `shrink_level`,
//! `tuning`, `ssvs_c`, `ssvs_h`) instead of `methods`. Command-line flags
//! override the file; the resolved result is what the manifest records.

use std::fs;
use std::path::Path;

use ipdma_core::simulation::MetricVariant;
use ipdma_core::{Centering, ChainConfig, PriorMethod};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Subcommand that produced a manifest; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Software version that produced a manifest; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub methods: Vec<String>,
    pub threshold: f64,
    pub metric_variant: String,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub out: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSection>,
    pub chains: ChainSection,
    pub data: DataSection,
    pub columns: ColumnMap,
    pub simulate: SimulateSection,
    pub report: ReportSection,
    pub curves: CurvesSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            command: None,
            version: None,
            methods: Vec::new(),
            threshold: 0.5,
            metric_variant: "literal".to_string(),
            workers: 0,
            out: "ipdma-out".to_string(),
            prior: None,
            chains: ChainSection::default(),
            data: DataSection::default(),
            columns: ColumnMap::default(),
            simulate: SimulateSection::default(),
            report: ReportSection::default(),
            curves: CurvesSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub tag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shrink_level: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssvs_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssvs_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub n_chains: usize,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for ChainSection {
    fn default() -> Self {
        let c = ChainConfig::default();
        ChainSection { n_chains: c.n_chains, n_iter: c.n_iter, burn_in: c.burn_in, thin: c.thin, seed: c.seed }
    }
}

impl ChainSection {
    pub fn to_config(&self) -> Result<ChainConfig> {
        let c = ChainConfig {
            n_chains: self.n_chains,
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// `pooled` or `within`.
    pub centering: String,
    /// Covariate names used as candidate moderators; empty means all.
    pub moderators: Vec<String>,
    /// `with`, `without` or `both`: whether moderator random effects
    /// `u_ki` enter the model.
    pub random_effects: String,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            path: None,
            centering: "pooled".to_string(),
            moderators: Vec::new(),
            random_effects: "with".to_string(),
        }
    }
}

impl DataSection {
    pub fn centering(&self) -> Result<Centering> {
        match self.centering.to_ascii_lowercase().as_str() {
            "pooled" => Ok(Centering::Pooled),
            "within" => Ok(Centering::WithinTrial),
            other => Err(CliError::Usage(format!("data.centering must be `pooled` or `within`, got `{other}`"))),
        }
    }

    /// Variants to fit, as `moderator_random_effects` flags.
    pub fn random_effect_variants(&self) -> Result<Vec<bool>> {
        match self.random_effects.to_ascii_lowercase().as_str() {
            "with" => Ok(vec![true]),
            "without" => Ok(vec![false]),
            "both" => Ok(vec![true, false]),
            other => Err(CliError::Usage(format!(
                "data.random_effects must be `with`, `without` or `both`, got `{other}`"
            ))),
        }
    }
}

/// Which CSV columns hold what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub trial_id: String,
    pub y: String,
    pub t: String,
    /// Covariate columns in order; empty means every other column.
    pub covariates: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap { trial_id: "trial_id".to_string(), y: "y".to_string(), t: "t".to_string(), covariates: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub replicates: usize,
    /// Scenario ids such as `var-high_sparsity-high_em-weak_corr-high`.
    pub scenarios: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_file: Option<String>,
    pub full_grid: bool,
    /// Also write every replicate's estimates.
    pub audit: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { replicates: 50, scenarios: Vec::new(), grid_file: None, full_grid: false, audit: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Draws files to summarize.
    pub draws: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesSection {
    /// Total sample size for hyperpriors that depend on it (ZS, HGN).
    pub n_total: usize,
    pub g_max: f64,
    pub points: usize,
    /// Skewness for the conditional S1/S3 curves.
    pub b: f64,
    /// `p` at which the tuning functions are tabulated against `n`.
    pub p: f64,
    pub n_values: Vec<usize>,
}

impl Default for CurvesSection {
    fn default() -> Self {
        CurvesSection {
            n_total: 625,
            g_max: 10.0,
            points: 200,
            b: 1.2,
            p: 0.5,
            n_values: vec![10, 20, 50, 100, 200, 500, 1000],
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Usage(format!("cannot serialize config: {e}")))
    }

    /// Methods from `methods`, else from `[prior]`, else `fallback`.
    pub fn resolve_methods(&self, fallback: &[PriorMethod]) -> Result<Vec<PriorMethod>> {
        if !self.methods.is_empty() {
            return self.methods.iter().map(|m| m.parse::<PriorMethod>().map_err(CliError::from)).collect();
        }
        if let Some(p) = &self.prior {
            let m = PriorMethod::from_parts(
                &p.tag,
                p.a,
                p.shrink_level.as_deref(),
                p.tuning.as_deref(),
                p.ssvs_c,
                p.ssvs_h,
            )?;
            return Ok(vec![m]);
        }
        if fallback.is_empty() {
            return Err(CliError::Usage(format!(
                "no methods given (use --methods or [prior]); known methods: {}",
                PriorMethod::roster_names()
            )));
        }
        Ok(fallback.to_vec())
    }

    pub fn metric_variant(&self) -> Result<MetricVariant> {
        match self.metric_variant.to_ascii_lowercase().as_str() {
            "literal" => Ok(MetricVariant::Literal),
            "conventional" => Ok(MetricVariant::Conventional),
            other => Err(CliError::Usage(format!(
                "metric variant must be `literal` or `conventional`, got `{other}`"
            ))),
        }
    }

    pub fn check_threshold(&self) -> Result<f64> {
        if (0.0..=1.0).contains(&self.threshold) {
            Ok(self.threshold)
        } else {
            Err(CliError::Usage(format!("threshold must lie in [0, 1], got {}", self.threshold)))
        }
    }
}
