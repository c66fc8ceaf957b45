mod common;

use common::{simulate, Truth};
use ipdma_core::data::{IpdDataset, ModelSpec, TrialBlock};
use ipdma_core::exec::Sequential;
use ipdma_core::priors::{PriorMethod, ShrinkLevel, Tuning};
use ipdma_core::sampler::{
    dic, draw_state, gelman_rubin, log_likelihood, mcse, run_mcmc, run_mcmc_with, ChainConfig,
    SamplerOptions,
};
use ipdma_core::Error;
use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma_ur;

fn cfg(n_chains: usize, n_iter: usize, burn_in: usize, thin: usize, seed: u64) -> ChainConfig {
    ChainConfig {
        n_chains,
        n_iter,
        burn_in,
        thin,
        seed,
    }
}

fn small_truth(p: usize, gamma: Vec<f64>) -> Truth {
    Truth {
        mu: 2.0,
        alpha: 3.0,
        beta: (0..p).map(|k| 1.0 + 0.5 * k as f64).collect(),
        gamma,
        sigma: 2.0,
        tau: 0.5,
    }
}

/// Stacked design `[1, t, x, t x_m]` of every observation.
fn dense_design(data: &IpdDataset, moderators: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let p = data.p();
    let q = 2 + p + moderators.len();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for tb in data.trials() {
        for j in 0..tb.n() {
            let t = tb.tf(j);
            rows.push(1.0);
            rows.push(t);
            rows.extend_from_slice(tb.row(j));
            rows.extend(moderators.iter().map(|&m| t * tb.x(j, m)));
            y.push(tb.y()[j]);
        }
    }
    (
        DMatrix::from_row_slice(y.len(), q, &rows),
        DVector::from_vec(y),
    )
}

#[test]
fn log_likelihood_examples() {
    let tb = TrialBlock::new(
        "A",
        vec![1.0, 3.0, 2.0],
        vec![false, true, true],
        vec![0.0, 1.0, -1.0],
        1,
    )
    .unwrap();
    let data = IpdDataset::with_default_names(vec![tb]).unwrap();
    let mut spec = ModelSpec::new(PriorMethod::Flat, vec![0]);
    spec.moderator_random_effects = false;
    let layout = ipdma_core::state::Layout::new(&spec, 1, 1, 3);
    // mu = 1, alpha = 1.5, beta = 0.2, gamma = 0.3 gives residuals (0, 0, 0)
    let mut row = vec![0.0; layout.len()];
    let set = |row: &mut Vec<f64>, name: &str, v: f64| row[layout.index_of(name).unwrap()] = v;
    set(&mut row, "mu", 1.0);
    set(&mut row, "alpha", 1.5);
    set(&mut row, "beta[1]", 0.2);
    set(&mut row, "gamma[1]", 0.3);
    set(&mut row, "sigma2[1]", 1.0);
    set(&mut row, "tau_mu2", 1.0);
    set(&mut row, "tau_alpha2", 1.0);
    let state = layout.read(&row).unwrap();
    let ll0 = log_likelihood(&state, &data, &spec);
    assert!((ll0 + 1.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);

    let mut doubled = state.clone();
    doubled.sigma2[0] = 2.0;
    assert!((ll0 - log_likelihood(&doubled, &data, &spec) - 1.5 * 2f64.ln()).abs() < 1e-12);

    // brute force with a random effect and non-zero residuals
    let mut s = state.clone();
    s.u_mu[0] = 0.4;
    s.sigma2[0] = 0.7;
    let means = [1.4, 1.4 + 1.5 + 0.2 + 0.3, 1.4 + 1.5 - 0.2 - 0.3];
    let ys = [1.0, 3.0, 2.0];
    let brute: f64 = means
        .iter()
        .zip(ys)
        .map(|(m, y)| {
            -0.5 * (2.0 * std::f64::consts::PI * 0.7).ln() - (y - m) * (y - m) / (2.0 * 0.7)
        })
        .sum();
    assert!((log_likelihood(&s, &data, &spec) - brute).abs() < 1e-12);
}

#[test]
fn stored_deviance_matches_log_likelihood() {
    let data = simulate(5, 3, 40, &small_truth(2, vec![1.0, 0.0]));
    let spec = ModelSpec::all_moderators(PriorMethod::cmg(ShrinkLevel::S2, Tuning::N), 2);
    let draws = run_mcmc(&data, &spec, &cfg(1, 300, 100, 20, 9)).unwrap();
    let dev = draws.index_of("deviance").unwrap();
    for k in 0..draws.chains()[0].iterations.len() {
        let state = draw_state(&draws, &spec, &data, 0, k).unwrap();
        let expect = -2.0 * log_likelihood(&state, &data, &spec);
        let got = draws.row(0, k)[dev];
        assert!(
            (got - expect).abs() < 1e-6 * expect.abs(),
            "{got} vs {expect}"
        );
    }
}

#[test]
fn flat_single_trial_matches_least_squares() {
    let data = simulate(
        11,
        1,
        200,
        &Truth {
            tau: 0.0,
            ..small_truth(2, vec![1.0, -0.5])
        },
    );
    let spec = ModelSpec::all_moderators(PriorMethod::Flat, 2).without_random_effects();
    let draws = run_mcmc(&data, &spec, &cfg(1, 11_000, 1000, 1, 3)).unwrap();
    let (x, y) = dense_design(&data, &[0, 1]);
    let ls = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * y;
    let names = ["mu", "alpha", "beta[1]", "beta[2]", "gamma[1]", "gamma[2]"];
    for (j, name) in names.iter().enumerate() {
        let v = draws.pooled(name).unwrap();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let se = mcse(&draws, name).unwrap();
        assert!(
            (m - ls[j]).abs() < 4.0 * se,
            "{name}: {m} vs {} (mcse {se})",
            ls[j]
        );
    }
}

/// Dense Gaussian posterior of θ for fixed σ² and fixed g without random
/// effects: precision X'X/σ² + diag(0, …, P0_k/g), P0_k = Σ (t x_k)²/σ².
fn fixed_g_posterior(data: &IpdDataset, sigma2: f64, g: f64) -> (DVector<f64>, DMatrix<f64>) {
    let (x, y) = dense_design(data, &[0, 1]);
    let q = x.ncols();
    let mut prec = x.transpose() * &x / sigma2;
    for k in 0..2 {
        let col = x.column(q - 2 + k);
        prec[(q - 2 + k, q - 2 + k)] += col.dot(&col) / sigma2 / g;
    }
    let cov = prec.try_inverse().unwrap();
    let mean = &cov * (x.transpose() * y / sigma2);
    (mean, cov)
}

#[test]
fn fixed_g_matches_conjugate_posterior() {
    let data = simulate(
        21,
        1,
        200,
        &Truth {
            tau: 0.0,
            ..small_truth(2, vec![0.8, 0.0])
        },
    );
    let spec =
        ModelSpec::all_moderators(PriorMethod::FixedG { g: 10.0 }, 2).without_random_effects();
    let opts = SamplerOptions {
        likelihood: true,
        fixed_sigma2: Some(vec![4.0]),
    };
    let draws = run_mcmc_with(
        &data,
        &spec,
        &cfg(1, 10_500, 500, 1, 17),
        &opts,
        &Sequential,
    )
    .unwrap();
    assert_eq!(draws.n_draws(), 10_000);
    let (mean, cov) = fixed_g_posterior(&data, 4.0, 10.0);
    let names = ["mu", "alpha", "beta[1]", "beta[2]", "gamma[1]", "gamma[2]"];
    for (j, name) in names.iter().enumerate() {
        let v = draws.pooled(name).unwrap();
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
        let se = mcse(&draws, name).unwrap();
        assert!(
            (m - mean[j]).abs() < 3.0 * se,
            "{name} mean {m} vs {}",
            mean[j]
        );
        // the sampler is exact here, so draws are i.i.d.; var of the sample
        // variance ≈ 2σ⁴/(n−1)
        let var_se = (2.0 / (n - 1.0)).sqrt() * cov[(j, j)];
        assert!(
            (var - cov[(j, j)]).abs() < 3.0 * var_se,
            "{name} var {var} vs {}",
            cov[(j, j)]
        );
    }
}

#[test]
fn sigma2_draws_follow_inverse_gamma_conditional() {
    // Under the flat prior the sigma² update is an exact draw from
    // IG(n/2, SSR/2) given the SSR of the same iteration, so the
    // probability integral transforms are i.i.d. uniform.
    let data = simulate(
        31,
        1,
        60,
        &Truth {
            tau: 0.0,
            ..small_truth(1, vec![0.5])
        },
    );
    let spec = ModelSpec::all_moderators(PriorMethod::Flat, 1).without_random_effects();
    let draws = run_mcmc(&data, &spec, &cfg(1, 3000, 0, 1, 5)).unwrap();
    let s2 = draws.pooled("sigma2[1]").unwrap();
    let dev = draws.pooled("deviance").unwrap();
    let n = 60.0;
    let mut pit: Vec<f64> = s2
        .iter()
        .zip(&dev)
        .map(|(&s, &d)| {
            let ssr = s * (d - n * ((2.0 * std::f64::consts::PI).ln() + s.ln()));
            // P(σ² ≤ s) = P(1/σ² ≥ 1/s) with 1/σ² ~ Gamma(n/2, rate SSR/2)
            gamma_ur(n / 2.0, ssr / 2.0 / s)
        })
        .collect();
    pit.sort_by(f64::total_cmp);
    let m = pit.len() as f64;
    let ks = pit
        .iter()
        .enumerate()
        .map(|(i, &u)| ((i as f64 + 1.0) / m - u).max(u - i as f64 / m))
        .fold(0.0, f64::max);
    assert!(ks < 1.628 / m.sqrt(), "KS statistic {ks}");
}

#[test]
fn prior_only_recovers_shrinkage_moments() {
    let data = simulate(41, 3, 30, &small_truth(1, vec![0.0]));
    let spec = |level| ModelSpec::all_moderators(PriorMethod::cmg(level, Tuning::N), 1);
    let opts = SamplerOptions {
        likelihood: false,
        fixed_sigma2: None,
    };
    let ln2 = std::f64::consts::LN_2;
    for (level, expect) in [
        (ShrinkLevel::S1, ln2),
        (ShrinkLevel::S2, 0.5),
        (ShrinkLevel::S3, 1.0 - ln2),
    ] {
        let draws = run_mcmc_with(
            &data,
            &spec(level),
            &cfg(1, 21_000, 1000, 2, 7),
            &opts,
            &Sequential,
        )
        .unwrap();
        let g = draws.pooled("g[1]").unwrap();
        let m = g.iter().map(|g| g / (1.0 + g)).sum::<f64>() / g.len() as f64;
        assert!((m - expect).abs() < 0.02, "{level:?}: {m} vs {expect}");
    }
}

#[test]
fn prior_only_rejects_flat() {
    let data = simulate(41, 2, 10, &small_truth(1, vec![0.0]));
    let spec = ModelSpec::all_moderators(PriorMethod::Flat, 1);
    let opts = SamplerOptions {
        likelihood: false,
        fixed_sigma2: None,
    };
    let r = run_mcmc_with(&data, &spec, &cfg(1, 10, 5, 1, 0), &opts, &Sequential);
    assert!(matches!(r, Err(Error::Unsupported(_))));
}

#[test]
fn same_seed_same_draws_and_chains_are_streams() {
    let data = simulate(51, 3, 30, &small_truth(2, vec![1.0, 0.0]));
    let spec = ModelSpec::all_moderators(PriorMethod::Horseshoe, 2);
    let a = run_mcmc(&data, &spec, &cfg(2, 400, 200, 2, 99)).unwrap();
    let b = run_mcmc(&data, &spec, &cfg(2, 400, 200, 2, 99)).unwrap();
    assert_eq!(a, b);
    let one = run_mcmc(&data, &spec, &cfg(1, 400, 200, 2, 99)).unwrap();
    assert_eq!(one.chains()[0], a.chains()[0]);
    assert_ne!(a.chains()[0], a.chains()[1]);
    let other = run_mcmc(&data, &spec, &cfg(1, 400, 200, 2, 100)).unwrap();
    assert_ne!(other.chains()[0], a.chains()[0]);
}

#[test]
fn retained_draw_count_and_iterations() {
    let data = simulate(52, 2, 20, &small_truth(1, vec![0.5]));
    let spec = ModelSpec::all_moderators(PriorMethod::ZellnerSiow, 1);
    let draws = run_mcmc(&data, &spec, &cfg(2, 105, 50, 10, 1)).unwrap();
    assert_eq!(draws.n_draws(), 2 * 5);
    assert_eq!(draws.chains()[1].iterations, vec![60, 70, 80, 90, 100]);
}

#[test]
fn every_method_runs_and_stays_in_support() {
    let data = simulate(61, 3, 40, &small_truth(2, vec![1.0, 0.0]));
    for m in PriorMethod::roster() {
        let spec = ModelSpec::all_moderators(m, 2);
        let draws = run_mcmc(&data, &spec, &cfg(1, 200, 100, 5, 2)).unwrap();
        for c in 0..1 {
            for k in 0..draws.chains()[c].iterations.len() {
                draw_state(&draws, &spec, &data, c, k)
                    .unwrap()
                    .validate()
                    .unwrap();
            }
        }
        for k in 0..3 {
            if let Ok(p) = draws.pooled(&format!("p[{}]", k + 1)) {
                let (lo, hi) = match m {
                    PriorMethod::Cmg { tuning, .. } => tuning.support(40),
                    _ => Tuning::N.support(40),
                };
                assert!(p.iter().all(|v| *v > lo && *v < hi), "{m}");
            }
        }
    }
}

#[test]
fn zero_signal_cmg_gamma_near_zero() {
    let data = simulate(
        71,
        5,
        80,
        &Truth {
            mu: 0.0,
            alpha: 0.0,
            beta: vec![0.0; 3],
            gamma: vec![0.0; 3],
            sigma: 1.0,
            tau: 0.3,
        },
    );
    for level in [ShrinkLevel::S1, ShrinkLevel::S2, ShrinkLevel::S3] {
        for tuning in [Tuning::N, Tuning::Log, Tuning::Pow] {
            let spec = ModelSpec::all_moderators(PriorMethod::cmg(level, tuning), 3);
            let draws = run_mcmc(&data, &spec, &cfg(1, 2000, 1000, 2, 13)).unwrap();
            for k in 1..=3 {
                let v = draws.pooled(&format!("gamma[{k}]")).unwrap();
                let n = v.len() as f64;
                let m = v.iter().sum::<f64>() / n;
                let sd = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0)).sqrt();
                assert!(
                    m.abs() < 3.0 * sd,
                    "{level:?}-{tuning:?} gamma[{k}] {m} sd {sd}"
                );
            }
        }
    }
}

#[test]
fn dic_has_positive_effective_parameters() {
    let data = simulate(81, 4, 60, &small_truth(2, vec![1.0, 0.0]));
    let spec = ModelSpec::all_moderators(PriorMethod::Flat, 2);
    let draws = run_mcmc(&data, &spec, &cfg(1, 3000, 1000, 2, 4)).unwrap();
    let d = dic(&draws, &data, &spec).unwrap();
    assert!(d.p_d > 0.0 && d.dic.is_finite(), "{d:?}");
}

#[test]
fn dic_prefers_model_without_moderator_effects_when_none_exist() {
    let mut wins = 0;
    let reps = 5;
    for r in 0..reps {
        let truth = Truth {
            tau: 0.0,
            ..small_truth(2, vec![1.0, 0.5])
        };
        let data = simulate(900 + r, 5, 60, &truth);
        let with = ModelSpec::all_moderators(PriorMethod::Flat, 2);
        let mut without = with.clone();
        without.moderator_random_effects = false;
        let c = cfg(1, 3000, 1000, 2, r);
        let d_with = dic(&run_mcmc(&data, &with, &c).unwrap(), &data, &with).unwrap();
        let d_without = dic(&run_mcmc(&data, &without, &c).unwrap(), &data, &without).unwrap();
        if d_without.dic < d_with.dic {
            wins += 1;
        }
    }
    assert!(wins * 2 > reps, "{wins}/{reps}");
}

#[test]
fn two_chains_converge_on_small_problem() {
    let data = simulate(91, 5, 60, &small_truth(2, vec![1.0, 0.0]));
    let spec = ModelSpec::all_moderators(PriorMethod::cmg(ShrinkLevel::S3, Tuning::Log), 2);
    let draws = run_mcmc(&data, &spec, &cfg(2, 4000, 2000, 2, 8)).unwrap();
    for name in ["mu", "alpha", "gamma[1]", "gamma[2]"] {
        let r = gelman_rubin(&draws, name).unwrap();
        assert!(r < 1.1, "{name}: {r}");
    }
}

#[test]
fn degenerate_interaction_column_is_rejected() {
    // covariate identically zero among the treated
    let tb = TrialBlock::new(
        "A",
        vec![1.0, 2.0, 3.0, 4.0],
        vec![false, false, true, true],
        vec![1.0, -1.0, 0.0, 0.0],
        1,
    )
    .unwrap();
    let data = IpdDataset::with_default_names(vec![tb]).unwrap();
    let spec = ModelSpec::all_moderators(PriorMethod::Uip, 1).without_random_effects();
    let r = run_mcmc(&data, &spec, &cfg(1, 10, 5, 1, 0));
    assert_eq!(r.unwrap_err(), Error::DegeneratePrior(0));
}

#[test]
fn invalid_chain_config_rejected() {
    let data = simulate(1, 2, 10, &small_truth(1, vec![0.0]));
    let spec = ModelSpec::all_moderators(PriorMethod::Flat, 1);
    assert!(matches!(
        run_mcmc(&data, &spec, &cfg(1, 10, 10, 1, 0)),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        run_mcmc(&data, &spec, &cfg(1, 10, 5, 0, 0)),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        run_mcmc(&data, &spec, &cfg(0, 10, 5, 1, 0)),
        Err(Error::Config(_))
    ));
}
