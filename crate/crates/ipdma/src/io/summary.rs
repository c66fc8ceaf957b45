use ipdma_core::posterior::{ModeratorFlags, PosteriorSummary};
use ipdma_core::sampler::Dic;
use serde_json::{json, Map, Value};

use super::csv_bytes;
use crate::error::{CliError, Result};

/// Everything reported for one fitted method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    /// Column label in comparison tables, unique within a run.
    pub label: String,
    pub method: String,
    /// `None` when unknown (summaries rebuilt from a draws file).
    pub moderator_random_effects: Option<bool>,
    pub summary: PosteriorSummary,
    /// Covariate name of each `gamma_k`.
    pub moderators: Vec<String>,
    pub threshold: f64,
    pub flags: ModeratorFlags,
    pub dic: Option<Dic>,
}

impl MethodOutput {
    fn moderator(&self, k: usize) -> String {
        self.moderators.get(k).cloned().unwrap_or_else(|| format!("x{}", k + 1))
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

/// Summary document keyed by parameter name.
pub fn summary_json(out: &MethodOutput) -> Result<Vec<u8>> {
    let mut params = Map::new();
    for p in &out.summary.params {
        params.insert(
            p.name.clone(),
            json!({ "mean": num(p.mean), "sd": num(p.sd), "ci_low": num(p.ci_low), "ci_high": num(p.ci_high) }),
        );
    }
    let mut mods = Map::new();
    for (k, p) in out.summary.p_gamma.iter().enumerate() {
        mods.insert(
            out.moderator(k),
            json!({
                "parameter": format!("gamma[{}]", k + 1),
                "p_gamma": num(*p),
                "flagged": out.flags.neighborhood.contains(&k),
                "ci_excludes_zero": out.flags.ci_excludes_zero.contains(&k),
            }),
        );
    }
    let mut doc = Map::new();
    doc.insert("method".into(), json!(out.method));
    if let Some(re) = out.moderator_random_effects {
        doc.insert("moderator_random_effects".into(), json!(re));
    }
    doc.insert("threshold".into(), num(out.threshold));
    doc.insert(
        "dic".into(),
        out.dic.map_or(Value::Null, |d| json!({ "dic": num(d.dic), "mean_deviance": num(d.mean_deviance), "p_d": num(d.p_d) })),
    );
    doc.insert("moderators".into(), Value::Object(mods));
    doc.insert("parameters".into(), Value::Object(params));
    let mut bytes = serde_json::to_vec_pretty(&Value::Object(doc)).map_err(|e| CliError::Data(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// One row per moderator: `p_gamma` and both flags.
pub fn p_gamma_csv(out: &MethodOutput) -> Result<Vec<u8>> {
    csv_bytes(&["moderator", "parameter", "p_gamma", "flagged", "ci_excludes_zero"], |w| {
        for (k, p) in out.summary.p_gamma.iter().enumerate() {
            w.write_record([
                out.moderator(k),
                format!("gamma[{}]", k + 1),
                p.to_string(),
                out.flags.neighborhood.contains(&k).to_string(),
                out.flags.ci_excludes_zero.contains(&k).to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Two-column density table.
pub fn density_csv(curve: &[(f64, f64)]) -> Result<Vec<u8>> {
    csv_bytes(&["x", "density"], |w| {
        for (x, y) in curve {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        Ok(())
    })
}

/// Mean, SD and 95% interval of `mu`, `alpha` and every `gamma_k`, one
/// row per (parameter, method).
pub fn comparison_csv(outs: &[MethodOutput]) -> Result<Vec<u8>> {
    csv_bytes(&["parameter", "moderator", "method", "mean", "sd", "ci_low", "ci_high"], |w| {
        let Some(first) = outs.first() else { return Ok(()) };
        let mut rows = vec![("mu".to_string(), String::new()), ("alpha".to_string(), String::new())];
        rows.extend((0..first.summary.p_gamma.len()).map(|k| (format!("gamma[{}]", k + 1), first.moderator(k))));
        for (name, moderator) in rows {
            for o in outs {
                if let Some(s) = o.summary.get(&name) {
                    w.write_record([
                        name.clone(),
                        moderator.clone(),
                        o.label.clone(),
                        s.mean.to_string(),
                        s.sd.to_string(),
                        s.ci_low.to_string(),
                        s.ci_high.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

/// `p_gamma` with moderators as rows and methods as columns.
pub fn p_gamma_table_csv(outs: &[MethodOutput]) -> Result<Vec<u8>> {
    let mut header = vec!["moderator"];
    header.extend(outs.iter().map(|o| o.label.as_str()));
    csv_bytes(&header, |w| {
        let d = outs.iter().map(|o| o.summary.p_gamma.len()).max().unwrap_or(0);
        for k in 0..d {
            let mut rec = vec![outs[0].moderator(k)];
            rec.extend(outs.iter().map(|o| o.summary.p_gamma.get(k).map_or(String::new(), f64::to_string)));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn dic_csv(outs: &[MethodOutput]) -> Result<Vec<u8>> {
    csv_bytes(&["method", "moderator_random_effects", "dic", "mean_deviance", "p_d"], |w| {
        for o in outs {
            if let Some(d) = o.dic {
                w.write_record([
                    o.method.clone(),
                    o.moderator_random_effects.map_or(String::new(), |b| b.to_string()),
                    d.dic.to_string(),
                    d.mean_deviance.to_string(),
                    d.p_d.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}
