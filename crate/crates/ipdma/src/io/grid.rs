//! Scenario grid files. Either list factor levels, which expand to their
//! Cartesian product in the order of the full grid,
//!
//! ```toml
//! variability = ["high", "medium"]
//! sparsity = ["high"]
//! magnitude = ["weak"]
//! correlation = ["high", "none"]
//! ```
//!
//! or name cells directly with `scenarios = ["var-high_sparsity-high_em-weak_corr-high"]`.
//! An omitted factor keeps all of its levels.

use std::fs;
use std::path::Path;

use ipdma_core::simulation::{Correlation, Magnitude, ScenarioSpec, Sparsity, Variability};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GridFile {
    variability: Option<Vec<String>>,
    sparsity: Option<Vec<String>>,
    magnitude: Option<Vec<String>>,
    correlation: Option<Vec<String>>,
    scenarios: Option<Vec<String>>,
}

pub fn read_grid(path: &Path) -> Result<Vec<ScenarioSpec>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read scenario file {}: {e}", path.display())))?;
    parse_grid(&text)
}

fn levels<T: std::str::FromStr<Err = ipdma_core::Error>>(v: &Option<Vec<String>>) -> Result<Option<Vec<T>>> {
    v.as_ref().map(|v| v.iter().map(|s| s.parse::<T>().map_err(CliError::from)).collect()).transpose()
}

pub fn parse_grid(text: &str) -> Result<Vec<ScenarioSpec>> {
    let g: GridFile = toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid scenario file: {e}")))?;
    let factors = g.variability.is_some() || g.sparsity.is_some() || g.magnitude.is_some() || g.correlation.is_some();
    let out: Vec<ScenarioSpec> = match (&g.scenarios, factors) {
        (Some(_), true) => {
            return Err(CliError::Usage("scenario file mixes `scenarios` with factor levels".into()))
        }
        (Some(ids), false) => ids.iter().map(|s| s.parse::<ScenarioSpec>().map_err(CliError::from)).collect::<Result<_>>()?,
        (None, _) => {
            let var = levels::<Variability>(&g.variability)?;
            let spa = levels::<Sparsity>(&g.sparsity)?;
            let mag = levels::<Magnitude>(&g.magnitude)?;
            let cor = levels::<Correlation>(&g.correlation)?;
            ScenarioSpec::full_grid()
                .into_iter()
                .filter(|s| {
                    var.as_ref().is_none_or(|v| v.contains(&s.variability))
                        && spa.as_ref().is_none_or(|v| v.contains(&s.sparsity))
                        && mag.as_ref().is_none_or(|v| v.contains(&s.magnitude))
                        && cor.as_ref().is_none_or(|v| v.contains(&s.correlation))
                })
                .collect()
        }
    };
    if out.is_empty() {
        return Err(CliError::Usage("scenario file selects no scenarios".into()));
    }
    Ok(out)
}
