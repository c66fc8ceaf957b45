//! Participant-level data pooled across trials, covariate centering and the
//! treatment-by-covariate interaction columns.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::priors::PriorMethod;

/// One trial's participants. Covariates are stored row-major, `n × p`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBlock {
    pub id: String,
    y: Vec<f64>,
    t: Vec<bool>,
    x: Vec<f64>,
    p: usize,
}

impl TrialBlock {
    pub fn new(
        id: impl Into<String>,
        y: Vec<f64>,
        t: Vec<bool>,
        x: Vec<f64>,
        p: usize,
    ) -> Result<Self> {
        let id = id.into();
        let n = y.len();
        if t.len() != n || x.len() != n * p {
            return Err(Error::Validation(format!(
                "trial `{id}`: y has {n} rows, t has {}, x has {} values for p = {p}",
                t.len(),
                x.len()
            )));
        }
        if n < 2 {
            return Err(Error::Validation(format!(
                "trial `{id}` has {n} participant(s); at least 2 required"
            )));
        }
        let treated = t.iter().filter(|&&v| v).count();
        if treated == 0 || treated == n {
            return Err(Error::Validation(format!(
                "trial `{id}` has a single treatment arm"
            )));
        }
        if let Some(j) = y.iter().chain(x.iter()).position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "trial `{id}` contains a non-finite value (flat index {j})"
            )));
        }
        Ok(TrialBlock { id, y, t, x, p })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t(&self) -> &[bool] {
        &self.t
    }

    /// Treatment indicator as a number.
    #[inline]
    pub fn tf(&self, j: usize) -> f64 {
        if self.t[j] {
            1.0
        } else {
            0.0
        }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.x[j * self.p..(j + 1) * self.p]
    }

    #[inline]
    pub fn x(&self, j: usize, k: usize) -> f64 {
        self.x[j * self.p + k]
    }

    pub fn n_treated(&self) -> usize {
        self.t.iter().filter(|&&v| v).count()
    }

    fn shift_column(&mut self, k: usize, by: f64) {
        let p = self.p;
        for v in self.x.iter_mut().skip(k).step_by(p) {
            *v -= by;
        }
    }
}

/// How covariates are centered before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    /// Subtract the grand mean pooled over all trials.
    #[default]
    Pooled,
    /// Subtract each trial's own column mean.
    WithinTrial,
}

/// Amounts subtracted from each covariate column, kept so that centered
/// data can be mapped back to the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteringInfo {
    pub mode: Centering,
    /// `shifts[i][k]`: value subtracted from covariate `k` in trial `i`.
    pub shifts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpdDataset {
    trials: Vec<TrialBlock>,
    p: usize,
    covariate_names: Vec<String>,
    centering: Option<CenteringInfo>,
}

impl IpdDataset {
    pub fn new(trials: Vec<TrialBlock>, covariate_names: Vec<String>) -> Result<Self> {
        let p = covariate_names.len();
        if trials.is_empty() {
            return Err(Error::Validation("dataset has no trials".to_string()));
        }
        if let Some(bad) = trials.iter().find(|tr| tr.p != p) {
            return Err(Error::Validation(format!(
                "trial `{}` has {} covariates, expected {p}",
                bad.id, bad.p
            )));
        }
        let mut seen = BTreeMap::new();
        for tr in &trials {
            if seen.insert(tr.id.as_str(), ()).is_some() {
                return Err(Error::Validation(format!("duplicate trial id `{}`", tr.id)));
            }
        }
        Ok(IpdDataset {
            trials,
            p,
            covariate_names,
            centering: None,
        })
    }

    /// Dataset with covariates named `x1..xp`.
    pub fn with_default_names(trials: Vec<TrialBlock>) -> Result<Self> {
        let p = trials.first().map(|t| t.p).unwrap_or(0);
        Self::new(trials, (1..=p).map(|k| format!("x{k}")).collect())
    }

    pub fn trials(&self) -> &[TrialBlock] {
        &self.trials
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Total participant count `N = Σ n_i`.
    pub fn n_total(&self) -> usize {
        self.trials.iter().map(TrialBlock::n).sum()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn centering(&self) -> Option<&CenteringInfo> {
        self.centering.as_ref()
    }

    /// Pooled mean of every covariate column.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_total() as f64;
        let mut sums = alloc::vec![0.0; self.p];
        for tr in &self.trials {
            for j in 0..tr.n() {
                for (s, v) in sums.iter_mut().zip(tr.row(j)) {
                    *s += v;
                }
            }
        }
        sums.iter().map(|s| s / n).collect()
    }

    /// Grand-mean centering (the default).
    pub fn center_covariates(&self) -> IpdDataset {
        self.center_with(Centering::Pooled)
    }

    pub fn center_with(&self, mode: Centering) -> IpdDataset {
        let shifts: Vec<Vec<f64>> = match mode {
            Centering::Pooled => {
                let m = self.column_means();
                self.trials.iter().map(|_| m.clone()).collect()
            }
            Centering::WithinTrial => self
                .trials
                .iter()
                .map(|tr| {
                    let n = tr.n() as f64;
                    (0..self.p)
                        .map(|k| (0..tr.n()).map(|j| tr.x(j, k)).sum::<f64>() / n)
                        .collect()
                })
                .collect(),
        };
        let mut out = self.clone();
        for (tr, sh) in out.trials.iter_mut().zip(&shifts) {
            for (k, &s) in sh.iter().enumerate() {
                tr.shift_column(k, s);
            }
        }
        // Compose with any earlier centering so `uncentered` stays exact.
        let total = match &self.centering {
            Some(prev) => prev
                .shifts
                .iter()
                .zip(&shifts)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
            None => shifts,
        };
        out.centering = Some(CenteringInfo {
            mode,
            shifts: total,
        });
        out
    }

    /// Undo all centering recorded in the metadata.
    pub fn uncentered(&self) -> IpdDataset {
        let mut out = self.clone();
        if let Some(info) = &self.centering {
            for (tr, sh) in out.trials.iter_mut().zip(&info.shifts) {
                for (k, &s) in sh.iter().enumerate() {
                    tr.shift_column(k, -s);
                }
            }
        }
        out.centering = None;
        out
    }

    /// True when every pooled column mean is within `tol` of zero.
    pub fn is_centered(&self, tol: f64) -> bool {
        self.column_means().iter().all(|m| m.abs() <= tol)
    }

    /// The stacked interaction column `t ∘ x_[k]` (length `N`, trials in
    /// dataset order). `k` is a 0-based covariate index.
    pub fn moderator_column(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.p {
            return Err(Error::IndexOutOfRange {
                index: k,
                limit: self.p,
            });
        }
        Ok(self
            .trials
            .iter()
            .flat_map(|tr| (0..tr.n()).map(move |j| tr.tf(j) * tr.x(j, k)))
            .collect())
    }

    /// Per-trial sum of squares of the interaction column `t ∘ x_[k]`.
    pub fn moderator_sumsq(&self, k: usize) -> Result<Vec<f64>> {
        if k >= self.p {
            return Err(Error::IndexOutOfRange {
                index: k,
                limit: self.p,
            });
        }
        Ok(self
            .trials
            .iter()
            .map(|tr| {
                (0..tr.n())
                    .filter(|&j| tr.t[j])
                    .map(|j| tr.x(j, k) * tr.x(j, k))
                    .sum()
            })
            .collect())
    }
}

/// Accumulates validated rows into trials, preserving the order in which
/// trial ids first appear and the row order within each trial.
#[derive(Debug, Clone)]
pub struct DatasetBuilder {
    names: Vec<String>,
    order: Vec<String>,
    rows: BTreeMap<String, (Vec<f64>, Vec<bool>, Vec<f64>)>,
}

impl DatasetBuilder {
    pub fn new(covariate_names: Vec<String>) -> Self {
        DatasetBuilder {
            names: covariate_names,
            order: Vec::new(),
            rows: BTreeMap::new(),
        }
    }

    /// Add one participant. `row` is only used for error reporting.
    pub fn push(&mut self, row: usize, trial_id: &str, y: f64, t: f64, x: &[f64]) -> Result<()> {
        if x.len() != self.names.len() {
            return Err(Error::Row {
                row,
                message: format!(
                    "expected {} covariates, found {}",
                    self.names.len(),
                    x.len()
                ),
            });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Row {
                row,
                message: "non-finite value".to_string(),
            });
        }
        let t = match t {
            0.0 => false,
            1.0 => true,
            v => {
                return Err(Error::Row {
                    row,
                    message: format!("treatment indicator must be 0 or 1, found {v}"),
                })
            }
        };
        if !self.rows.contains_key(trial_id) {
            self.order.push(trial_id.to_string());
        }
        let entry = self.rows.entry(trial_id.to_string()).or_default();
        entry.0.push(y);
        entry.1.push(t);
        entry.2.extend_from_slice(x);
        Ok(())
    }

    pub fn build(mut self) -> Result<IpdDataset> {
        let p = self.names.len();
        let trials = self
            .order
            .iter()
            .map(|id| {
                let (y, t, x) = self.rows.remove(id).unwrap_or_default();
                TrialBlock::new(id.clone(), y, t, x, p)
            })
            .collect::<Result<Vec<_>>>()?;
        IpdDataset::new(trials, self.names)
    }
}

/// Which covariates are candidate moderators, which random effects enter
/// the model and which prior is placed on the moderation effects.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub prior: PriorMethod,
    /// 0-based covariate indices, in the order `gamma_1..gamma_d`.
    pub moderators: Vec<usize>,
    /// Include `u_{ki}` (and `tau_k`) for every moderator.
    pub moderator_random_effects: bool,
    /// Include the trial intercept and treatment random effects
    /// `u_{mu i}`, `u_{alpha i}`. Only meaningful to switch off for
    /// single-trial fits.
    pub trial_random_effects: bool,
}

impl ModelSpec {
    pub fn new(prior: PriorMethod, moderators: Vec<usize>) -> Self {
        ModelSpec {
            prior,
            moderators,
            moderator_random_effects: true,
            trial_random_effects: true,
        }
    }

    /// Every covariate is a candidate moderator.
    pub fn all_moderators(prior: PriorMethod, p: usize) -> Self {
        Self::new(prior, (0..p).collect())
    }

    pub fn without_random_effects(mut self) -> Self {
        self.moderator_random_effects = false;
        self.trial_random_effects = false;
        self
    }

    pub fn d(&self) -> usize {
        self.moderators.len()
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        for (i, &k) in self.moderators.iter().enumerate() {
            if k >= p {
                return Err(Error::IndexOutOfRange { index: k, limit: p });
            }
            if self.moderators[..i].contains(&k) {
                return Err(Error::Validation(format!(
                    "moderator index {k} listed twice"
                )));
            }
        }
        self.prior.validate()
    }
}
