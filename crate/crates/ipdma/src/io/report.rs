use ipdma_core::simulation::{aarbias_per_replicate, MetricsReport};

use super::csv_bytes;
use crate::error::Result;

/// Long-format metrics: `scenario,method,metric,value`. Besides the five
/// risk metrics each cell reports its succeeded/failed replicate counts and
/// the per-replicate AARBias variant.
pub fn report_csv(report: &MetricsReport) -> Result<Vec<u8>> {
    // Rows are in (scenario, method) order.
    let n_methods = report.replicates.iter().map(|r| r.method + 1).max().unwrap_or(1);
    csv_bytes(&["scenario", "method", "metric", "value"], |w| {
        for (i, row) in report.rows.iter().enumerate() {
            let (s, m) = (i / n_methods, i % n_methods);
            let (scenario, method) = (row.scenario.to_string(), row.method.name());
            let mut put = |metric: &str, value: String| w.write_record([scenario.as_str(), method.as_str(), metric, value.as_str()]);
            for (name, v) in row.metrics() {
                put(name, v.to_string())?;
            }
            let est = report.estimates(s, m);
            let per_rep = if est.is_empty() {
                f64::NAN
            } else {
                aarbias_per_replicate(&est, &row.scenario.true_gamma(), report.variant).unwrap_or(f64::NAN)
            };
            put("aarbias_per_replicate", per_rep.to_string())?;
            put("succeeded", row.succeeded.to_string())?;
            put("failed", row.failed.to_string())?;
        }
        Ok(())
    })
}

/// Methods of each scenario by increasing ARRMSE.
pub fn ranking_csv(report: &MetricsReport) -> Result<Vec<u8>> {
    csv_bytes(&["scenario", "rank", "method", "arrmse"], |w| {
        for (s, methods) in report.rankings() {
            for (rank, m) in methods.iter().enumerate() {
                let arrmse = report.row(&s, m).map_or(f64::NAN, |r| r.arrmse);
                w.write_record([s.to_string(), (rank + 1).to_string(), m.name(), arrmse.to_string()])?;
            }
        }
        Ok(())
    })
}

/// Every replicate's estimates, or its error message.
pub fn audit_csv(report: &MetricsReport, scenarios: &[String], methods: &[String]) -> Result<Vec<u8>> {
    csv_bytes(&["scenario", "method", "replicate", "quantity", "value"], |w| {
        for r in &report.replicates {
            let (s, m, rep) = (scenarios[r.scenario].as_str(), methods[r.method].as_str(), r.replicate.to_string());
            let mut put = |q: &str, v: String| w.write_record([s, m, rep.as_str(), q, v.as_str()]);
            match &r.outcome {
                Ok(f) => {
                    put("alpha_hat", f.alpha_hat.to_string())?;
                    for (k, g) in f.gamma_hat.iter().enumerate() {
                        put(&format!("gamma_hat[{}]", k + 1), g.to_string())?;
                    }
                    put("sumsq", f.sumsq.to_string())?;
                    put("sumsq_em", f.sumsq_em.to_string())?;
                }
                Err(e) => put("error", e.to_string())?,
            }
        }
        Ok(())
    })
}
