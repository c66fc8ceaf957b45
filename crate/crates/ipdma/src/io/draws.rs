//! Long-format draws: `chain,iteration,parameter,value`, preceded by
//! `# key = value` provenance lines.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ipdma_core::sampler::{ChainDraws, Provenance};
use ipdma_core::{ChainConfig, PosteriorDraws};

use super::{csv_bytes, VERSION};
use crate::error::{CliError, Result};

/// Draws together with the covariate names of `gamma[1..d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawsFile {
    pub draws: PosteriorDraws,
    pub moderators: Vec<String>,
}

pub fn write_draws(file: &DrawsFile) -> Result<Vec<u8>> {
    let p = file.draws.provenance();
    let c = &p.config;
    let mut out = format!(
        "# software = ipdma {VERSION}\n# method = {}\n# seed = {}\n# n_chains = {}\n# n_iter = {}\n# burn_in = {}\n# thin = {}\n# moderators = {}\n",
        p.method,
        c.seed,
        c.n_chains,
        c.n_iter,
        c.burn_in,
        c.thin,
        file.moderators.join(",")
    )
    .into_bytes();
    let names = file.draws.names();
    let body = csv_bytes(&["chain", "iteration", "parameter", "value"], |w| {
        for (ci, ch) in file.draws.chains().iter().enumerate() {
            for (d, it) in ch.iterations.iter().enumerate() {
                let row = file.draws.row(ci, d);
                for (name, v) in names.iter().zip(row) {
                    w.write_record([ci.to_string().as_str(), it.to_string().as_str(), name, v.to_string().as_str()])?;
                }
            }
        }
        Ok(())
    })?;
    out.extend(body);
    Ok(out)
}

pub fn read_draws(path: &Path) -> Result<DrawsFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_draws(&text)
}

pub fn parse_draws(text: &str) -> Result<DrawsFile> {
    let bad = |m: String| CliError::Data(format!("malformed draws file: {m}"));
    let mut meta = HashMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let num = |k: &str| -> Result<u64> {
        meta.get(k).ok_or_else(|| bad(format!("missing `{k}` header")))?.parse().map_err(|_| bad(format!("bad `{k}` header")))
    };
    let config = ChainConfig {
        n_chains: num("n_chains")? as usize,
        n_iter: num("n_iter")? as usize,
        burn_in: num("burn_in")? as usize,
        thin: num("thin")? as usize,
        seed: num("seed")?,
    };
    let method = meta.get("method").cloned().ok_or_else(|| bad("missing `method` header".into()))?;
    let moderators: Vec<String> = match meta.get("moderators") {
        Some(s) if !s.is_empty() => s.split(',').map(String::from).collect(),
        _ => Vec::new(),
    };

    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    // (chain, iteration) blocks in file order, values keyed by name index.
    let mut blocks: Vec<(usize, usize, Vec<Option<f64>>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).ok_or_else(|| bad(format!("row {} is short", i + 1)));
        let chain: usize = field(0)?.parse().map_err(|_| bad(format!("row {}: bad chain", i + 1)))?;
        let iter: usize = field(1)?.parse().map_err(|_| bad(format!("row {}: bad iteration", i + 1)))?;
        let name = field(2)?;
        let value: f64 = field(3)?.parse().map_err(|_| bad(format!("row {}: bad value", i + 1)))?;
        if blocks.last().map(|b| (b.0, b.1)) != Some((chain, iter)) {
            blocks.push((chain, iter, vec![None; names.len()]));
        }
        let k = match index.get(name) {
            Some(&k) => k,
            None => {
                if blocks.len() > 1 {
                    return Err(bad(format!("parameter `{name}` first appears after the first draw")));
                }
                names.push(name.to_string());
                index.insert(name.to_string(), names.len() - 1);
                blocks[0].2.push(None);
                names.len() - 1
            }
        };
        let slot = &mut blocks.last_mut().expect("pushed above").2[k];
        if slot.is_some() {
            return Err(bad(format!("row {}: duplicate `{name}`", i + 1)));
        }
        *slot = Some(value);
    }
    let mut chains: Vec<ChainDraws> = Vec::new();
    let mut chain_ids: Vec<usize> = Vec::new();
    for (chain, iter, vals) in blocks {
        let pos = match chain_ids.iter().position(|&c| c == chain) {
            Some(p) => p,
            None => {
                chain_ids.push(chain);
                chains.push(ChainDraws { iterations: Vec::new(), values: Vec::new() });
                chains.len() - 1
            }
        };
        let ch = &mut chains[pos];
        ch.iterations.push(iter);
        for (k, v) in vals.into_iter().enumerate() {
            ch.values.push(v.ok_or_else(|| bad(format!("chain {chain} iteration {iter} lacks `{}`", names[k])))?);
        }
    }
    let draws = PosteriorDraws::new(names, chains, Provenance { config, method })?;
    Ok(DrawsFile { draws, moderators })
}
