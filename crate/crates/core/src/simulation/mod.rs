//! Synthetic IPD-MA studies: the factorial scenario grid, data generation
//! under the hierarchical model, replicate fitting and risk metrics.

mod metrics;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::sqrt;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{IpdDataset, ModelSpec, TrialBlock};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::priors::PriorMethod;
use crate::sampler::{run_mcmc_with, ChainConfig, SamplerOptions};

pub use metrics::{aarbias, aarbias_per_replicate, arrmse, arsd, decompose, psrmse_from_sumsq, Decomposition, MetricVariant};

pub const TRUE_MU: f64 = 2.0;
pub const TRUE_ALPHA: f64 = 3.0;
pub const TRUE_BETA: [f64; 8] = [1.8, 2.7, 2.3, 1.5, 1.7, 2.2, 1.3, 2.6];
pub const TRUE_SIGMA: [f64; 5] = [3.5, 2.5, 2.1, 2.8, 3.0];
pub const TRUE_TAU_MU: f64 = 1.5;
pub const TRUE_TAU_ALPHA: f64 = 1.5;
pub const TRIAL_SIZE_MIN: usize = 100;
pub const TRIAL_SIZE_MAX: usize = 150;

/// Smallest eigenvalue kept when repairing a random correlation matrix.
const MIN_EIGENVALUE: f64 = 1e-4;

macro_rules! level_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", stringify!($name), " level `{}`"), s))),
                }
            }
        }
    };
}

level_enum!(Variability { High => "high", Medium => "medium", None => "none" });
level_enum!(Sparsity { High => "high", Medium => "medium", Low => "low" });
level_enum!(Magnitude { Strong => "strong", Weak => "weak" });
level_enum!(Correlation { High => "high", None => "none" });

/// One cell of the factorial simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScenarioSpec {
    pub variability: Variability,
    pub sparsity: Sparsity,
    pub magnitude: Magnitude,
    pub correlation: Correlation,
}

impl ScenarioSpec {
    /// All 36 cells, variability outermost and correlation innermost.
    pub fn full_grid() -> Vec<ScenarioSpec> {
        let mut out = Vec::with_capacity(36);
        for &variability in Variability::ALL {
            for &sparsity in Sparsity::ALL {
                for &magnitude in Magnitude::ALL {
                    for &correlation in Correlation::ALL {
                        out.push(ScenarioSpec { variability, sparsity, magnitude, correlation });
                    }
                }
            }
        }
        out
    }

    /// Interval for `τ_k`, or `None` when the moderation effects do not
    /// vary between trials.
    pub fn tau_range(&self) -> Option<(f64, f64)> {
        match self.variability {
            Variability::High => Some((1.5, 2.5)),
            Variability::Medium => Some((0.5, 1.5)),
            Variability::None => None,
        }
    }

    pub fn n_moderators(&self) -> usize {
        match self.sparsity {
            Sparsity::High => 2,
            Sparsity::Medium => 4,
            Sparsity::Low => 6,
        }
    }

    pub fn effect_size(&self) -> f64 {
        match self.magnitude {
            Magnitude::Strong => 1.5,
            Magnitude::Weak => 0.75,
        }
    }

    /// True `γ`: the first 2/4/6 entries equal the effect size.
    pub fn true_gamma(&self) -> Vec<f64> {
        (0..TRUE_BETA.len()).map(|k| if k < self.n_moderators() { self.effect_size() } else { 0.0 }).collect()
    }
}

/// `var-high_sparsity-high_em-weak_corr-high`
impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "var-{}_sparsity-{}_em-{}_corr-{}", self.variability, self.sparsity, self.magnitude, self.correlation)
    }
}

impl FromStr for ScenarioSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed scenario id `{s}`"));
        let mut parts = s.trim().split('_');
        let mut field = |key: &str| -> Result<String> {
            let p = parts.next().ok_or_else(bad)?;
            p.strip_prefix(key).and_then(|v| v.strip_prefix('-')).map(String::from).ok_or_else(bad)
        };
        let out = ScenarioSpec {
            variability: field("var")?.parse()?,
            sparsity: field("sparsity")?.parse()?,
            magnitude: field("em")?.parse()?,
            correlation: field("corr")?.parse()?,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(out)
    }
}

/// Generating values of one synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub mu: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
    pub tau_mu: f64,
    pub tau_alpha: f64,
    pub tau_k: Vec<f64>,
    pub u_mu: Vec<f64>,
    pub u_alpha: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    /// Covariate correlation matrix of each trial (row-major, p×p).
    pub correlation: Vec<Vec<f64>>,
}

/// Mix seed components into one 64-bit seed (SplitMix64 finalizer).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Nearest correlation matrix by eigenvalue clipping: negative and tiny
/// eigenvalues are raised to `MIN_EIGENVALUE` and the result is rescaled
/// to a unit diagonal.
pub fn repair_correlation(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let clipped = eig.eigenvalues.map(|v| v.max(MIN_EIGENVALUE));
    let b = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let scale = DVector::from_iterator(b.nrows(), (0..b.nrows()).map(|i| 1.0 / sqrt(b[(i, i)])));
    DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| if i == j { 1.0 } else { b[(i, j)] * scale[i] * scale[j] })
}

fn random_correlation<R: Rng>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let mut a = DMatrix::identity(p, p);
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 + 0.4 * rng.random::<f64>();
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    repair_correlation(&a)
}

/// Simulate one dataset (uncentered covariates) for a scenario.
pub fn generate_dataset(scenario: &ScenarioSpec, seed: u64) -> (IpdDataset, TruthRecord) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = TRUE_BETA.len();
    let gamma = scenario.true_gamma();
    let tau_k: Vec<f64> = match scenario.tau_range() {
        Some((lo, hi)) => (0..p).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect(),
        None => vec![0.0; p],
    };
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let mut truth = TruthRecord {
        mu: TRUE_MU,
        alpha: TRUE_ALPHA,
        beta: TRUE_BETA.to_vec(),
        gamma: gamma.clone(),
        sigma: TRUE_SIGMA.to_vec(),
        tau_mu: TRUE_TAU_MU,
        tau_alpha: TRUE_TAU_ALPHA,
        tau_k: tau_k.clone(),
        u_mu: Vec::new(),
        u_alpha: Vec::new(),
        u: Vec::new(),
        correlation: Vec::new(),
    };
    let mut trials = Vec::with_capacity(TRUE_SIGMA.len());
    for (i, &sigma) in TRUE_SIGMA.iter().enumerate() {
        let n = rng.random_range(TRIAL_SIZE_MIN..=TRIAL_SIZE_MAX);
        let corr = match scenario.correlation {
            Correlation::High => random_correlation(p, &mut rng),
            Correlation::None => DMatrix::identity(p, p),
        };
        let l = corr.clone().cholesky().expect("repaired correlation is positive definite").l();
        let u_mu = TRUE_TAU_MU * normal(&mut rng);
        let u_alpha = TRUE_TAU_ALPHA * normal(&mut rng);
        let u: Vec<f64> = tau_k.iter().map(|t| t * normal(&mut rng)).collect();
        let mut t: Vec<bool> = (0..n).map(|j| j < n / 2).collect();
        t.shuffle(&mut rng);
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        for &treated in &t {
            let z = DVector::from_fn(p, |_, _| normal(&mut rng));
            let row = &l * z;
            let tf = if treated { 1.0 } else { 0.0 };
            let mut m = TRUE_MU + u_mu + tf * (TRUE_ALPHA + u_alpha);
            for k in 0..p {
                m += row[k] * (TRUE_BETA[k] + tf * (gamma[k] + u[k]));
            }
            y.push(m + sigma * normal(&mut rng));
            x.extend(row.iter());
        }
        truth.u_mu.push(u_mu);
        truth.u_alpha.push(u_alpha);
        truth.u.push(u);
        truth.correlation.push(corr.transpose().iter().copied().collect());
        trials.push(TrialBlock::new(format!("trial{}", i + 1), y, t, x, p).expect("simulated trial is valid"));
    }
    let data = IpdDataset::with_default_names(trials).expect("simulated dataset is valid");
    (data, truth)
}

/// Posterior-mean estimates from one fit and its participant-level errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateFit {
    pub gamma_hat: Vec<f64>,
    /// Treatment effect on the original (uncentered) covariate scale.
    pub alpha_hat: f64,
    /// `Σ_ij (t(α − α̂) + x^em(γ − γ̂))²`
    pub sumsq: f64,
    /// `Σ_ij (x^em(γ − γ̂))²`
    pub sumsq_em: f64,
    pub n: usize,
}

/// Fit one dataset with every covariate as a candidate moderator and
/// moderator random effects included.
pub fn fit_replicate<E: Executor>(
    data: &IpdDataset,
    truth: &TruthRecord,
    method: PriorMethod,
    cfg: &ChainConfig,
    exec: &E,
) -> Result<ReplicateFit> {
    let centered = data.center_covariates();
    let spec = ModelSpec::all_moderators(method, data.p());
    let draws = run_mcmc_with(&centered, &spec, cfg, &SamplerOptions::default(), exec)?;
    let means = draws.mean_row()?;
    let d = data.p();
    let gamma_hat: Vec<f64> = (1..=d).map(|k| draws.index_of(&format!("gamma[{k}]")).map(|j| means[j])).collect::<Result<_>>()?;
    let shift = data.column_means();
    let alpha_c = means[draws.index_of("alpha")?];
    let alpha_hat = alpha_c - shift.iter().zip(&gamma_hat).map(|(m, g)| m * g).sum::<f64>();
    let (sumsq, sumsq_em) = participant_sumsq(data, truth.alpha, &truth.gamma, alpha_hat, &gamma_hat);
    Ok(ReplicateFit { gamma_hat, alpha_hat, sumsq, sumsq_em, n: data.n_total() })
}

/// Summed squared participant-level errors `(Σ v², Σ v_em²)` with
/// `v = t(α − α̂) + x^em(γ − γ̂)` and `v_em = x^em(γ − γ̂)`, every covariate
/// a moderator.
pub fn participant_sumsq(data: &IpdDataset, alpha: f64, gamma: &[f64], alpha_hat: f64, gamma_hat: &[f64]) -> (f64, f64) {
    let (mut sumsq, mut sumsq_em) = (0.0, 0.0);
    for tb in data.trials() {
        for j in 0..tb.n() {
            let t = tb.tf(j);
            let em: f64 = (0..data.p()).map(|k| t * tb.x(j, k) * (gamma[k] - gamma_hat[k])).sum();
            let v = t * (alpha - alpha_hat) + em;
            sumsq += v * v;
            sumsq_em += em * em;
        }
    }
    (sumsq, sumsq_em)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub replicates: usize,
    /// Chain settings for every fit; the seed field is replaced per fit.
    pub chain: ChainConfig,
    pub master_seed: u64,
    pub variant: MetricVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub scenario: usize,
    pub method: usize,
    pub replicate: usize,
    pub outcome: Result<ReplicateFit>,
}

/// Aggregated metrics of one method in one scenario. Metrics are NaN when
/// every replicate failed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scenario: ScenarioSpec,
    pub method: PriorMethod,
    pub succeeded: usize,
    pub failed: usize,
    pub arrmse: f64,
    pub aarbias: f64,
    pub arsd: f64,
    pub psrmse: f64,
    pub psrmse_em: f64,
}

impl MetricRow {
    pub const METRIC_NAMES: [&'static str; 5] = ["arrmse", "aarbias", "arsd", "psrmse", "psrmse_em"];

    pub fn metrics(&self) -> [(&'static str, f64); 5] {
        let v = [self.arrmse, self.aarbias, self.arsd, self.psrmse, self.psrmse_em];
        let mut out = [("", 0.0); 5];
        for (o, (n, x)) in out.iter_mut().zip(Self::METRIC_NAMES.iter().zip(v)) {
            *o = (n, x);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub variant: MetricVariant,
    pub rows: Vec<MetricRow>,
    pub replicates: Vec<ReplicateRecord>,
}

impl MetricsReport {
    pub fn row(&self, scenario: &ScenarioSpec, method: &PriorMethod) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.scenario == *scenario && r.method == *method)
    }

    /// Methods of each scenario ordered by increasing ARRMSE (failed
    /// methods last), in scenario order of first appearance.
    pub fn rankings(&self) -> Vec<(ScenarioSpec, Vec<PriorMethod>)> {
        let mut out: Vec<(ScenarioSpec, Vec<&MetricRow>)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(s, _)| *s == r.scenario) {
                Some((_, v)) => v.push(r),
                None => out.push((r.scenario, vec![r])),
            }
        }
        out.into_iter()
            .map(|(s, mut v)| {
                v.sort_by(|a, b| match (a.arrmse.is_nan(), b.arrmse.is_nan()) {
                    (false, false) => a.arrmse.total_cmp(&b.arrmse),
                    (x, y) => x.cmp(&y),
                });
                (s, v.into_iter().map(|r| r.method).collect())
            })
            .collect()
    }

    /// Successful replicate estimates `γ̂` of one cell.
    pub fn estimates(&self, scenario: usize, method: usize) -> Vec<Vec<f64>> {
        self.replicates
            .iter()
            .filter(|r| r.scenario == scenario && r.method == method)
            .filter_map(|r| r.outcome.as_ref().ok().map(|f| f.gamma_hat.clone()))
            .collect()
    }
}

/// Seed of the dataset for replicate `r` of scenario `s`.
pub fn dataset_seed(master: u64, s: usize, r: usize) -> u64 {
    derive_seed(&[master, s as u64, r as u64])
}

/// Seed of the chains fitting method `m` to that dataset.
pub fn fit_seed(master: u64, s: usize, r: usize, m: usize) -> u64 {
    derive_seed(&[master, s as u64, r as u64, 1 + m as u64])
}

/// Simulate `cfg.replicates` datasets per scenario, fit every method to
/// each and aggregate the metrics. Every (scenario, replicate, method) fit
/// is an independent work item of `exec`; its chains run sequentially.
pub fn run_study<E: Executor>(
    grid: &[ScenarioSpec],
    methods: &[PriorMethod],
    cfg: &StudyConfig,
    exec: &E,
) -> Result<MetricsReport> {
    if grid.is_empty() || methods.is_empty() || cfg.replicates == 0 {
        return Err(Error::Config("a study needs scenarios, methods and at least one replicate".to_string()));
    }
    cfg.chain.validate()?;
    for m in methods {
        m.validate()?;
    }
    let (nr, nm) = (cfg.replicates, methods.len());
    let records = exec.map(grid.len() * nr * nm, |item| {
        let (s, rest) = (item / (nr * nm), item % (nr * nm));
        let (r, m) = (rest / nm, rest % nm);
        let (data, truth) = generate_dataset(&grid[s], dataset_seed(cfg.master_seed, s, r));
        let chain = ChainConfig { seed: fit_seed(cfg.master_seed, s, r, m), ..cfg.chain };
        let outcome = fit_replicate(&data, &truth, methods[m], &chain, &crate::exec::Sequential);
        ReplicateRecord { scenario: s, method: m, replicate: r, outcome }
    });
    let mut report = MetricsReport { variant: cfg.variant, rows: Vec::new(), replicates: records };
    for (s, scenario) in grid.iter().enumerate() {
        let truth = scenario.true_gamma();
        for (m, method) in methods.iter().enumerate() {
            let fits: Vec<&ReplicateFit> = report
                .replicates
                .iter()
                .filter(|r| r.scenario == s && r.method == m)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let est = report.estimates(s, m);
            let metric = |f: fn(&[Vec<f64>], &[f64], MetricVariant) -> Result<f64>| {
                if est.is_empty() { f64::NAN } else { f(&est, &truth, cfg.variant).unwrap_or(f64::NAN) }
            };
            let avg = |get: fn(&ReplicateFit) -> f64| {
                fits.iter().map(|f| psrmse_from_sumsq(get(f), f.n, cfg.variant)).sum::<f64>() / fits.len() as f64
            };
            report.rows.push(MetricRow {
                scenario: *scenario,
                method: *method,
                succeeded: fits.len(),
                failed: nr - fits.len(),
                arrmse: metric(arrmse),
                aarbias: metric(aarbias),
                arsd: metric(arsd),
                psrmse: avg(|f| f.sumsq),
                psrmse_em: avg(|f| f.sumsq_em),
            });
        }
    }
    Ok(report)
}
