use ipdma_core::data::{IpdDataset, TrialBlock};
use ipdma_core::exec::Sequential;
use ipdma_core::priors::{PriorMethod, ShrinkLevel, Tuning};
use ipdma_core::sampler::ChainConfig;
use ipdma_core::simulation::*;
use ipdma_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn cell(v: Variability, s: Sparsity, m: Magnitude, c: Correlation) -> ScenarioSpec {
    ScenarioSpec { variability: v, sparsity: s, magnitude: m, correlation: c }
}

#[test]
fn truth_gamma_follows_sparsity_and_magnitude() {
    let s = cell(Variability::High, Sparsity::High, Magnitude::Strong, Correlation::None);
    assert_eq!(s.true_gamma(), vec![1.5, 1.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let s = cell(Variability::None, Sparsity::Low, Magnitude::Weak, Correlation::High);
    assert_eq!(s.true_gamma().iter().filter(|g| **g == 0.75).count(), 6);
    assert_eq!(&s.true_gamma()[6..], &[0.0, 0.0]);
}

#[test]
fn generated_design_shape() {
    let s = cell(Variability::Medium, Sparsity::Medium, Magnitude::Weak, Correlation::High);
    let (data, truth) = generate_dataset(&s, 42);
    assert_eq!(data.n_trials(), 5);
    assert_eq!(data.p(), 8);
    for tb in data.trials() {
        assert!((100..=150).contains(&tb.n()));
        assert_eq!(tb.n_treated(), tb.n() / 2);
    }
    assert!(truth.tau_k.iter().all(|t| (0.5..1.5).contains(t)));
    assert_eq!(generate_dataset(&s, 42).0, data);
    assert_ne!(generate_dataset(&s, 43).0, data);
}

#[test]
fn uncorrelated_covariates_have_small_sample_correlation() {
    let s = cell(Variability::None, Sparsity::High, Magnitude::Strong, Correlation::None);
    let (data, truth) = generate_dataset(&s, 7);
    assert!(truth.tau_k.iter().all(|t| *t == 0.0));
    let n = data.n_total();
    assert!(n >= 500);
    let rows: Vec<&[f64]> = data.trials().iter().flat_map(|tb| (0..tb.n()).map(move |j| tb.row(j))).collect();
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    for a in 0..8 {
        for b in 0..a {
            let (x, y) = (col(a), col(b));
            let (mx, my) = (x.iter().sum::<f64>() / n as f64, y.iter().sum::<f64>() / n as f64);
            let sxy: f64 = x.iter().zip(&y).map(|(u, v)| (u - mx) * (v - my)).sum();
            let sxx: f64 = x.iter().map(|u| (u - mx) * (u - mx)).sum();
            let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
            assert!((sxy / (sxx * syy).sqrt()).abs() < 0.1, "x{a} x{b}");
        }
    }
}

#[test]
fn correlated_covariates_are_strongly_correlated() {
    let s = cell(Variability::None, Sparsity::High, Magnitude::Strong, Correlation::High);
    let (_, truth) = generate_dataset(&s, 8);
    for c in &truth.correlation {
        let off: Vec<f64> = (0..64).filter(|i| i / 8 != i % 8).map(|i| c[i]).collect();
        let mean = off.iter().sum::<f64>() / off.len() as f64;
        assert!(mean > 0.5 && mean < 0.9, "{mean}");
    }
}

#[test]
fn least_squares_recovers_beta() {
    // Stack many no-variability replicates; within each trial the random
    // intercept and treatment effects are absorbed by trial-by-arm dummies.
    let s = cell(Variability::None, Sparsity::Medium, Magnitude::Strong, Correlation::None);
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    let reps = 20;
    let q = 2 * 5 * reps + 16;
    for r in 0..reps {
        let (data, _) = generate_dataset(&s, 1000 + r as u64);
        for (i, tb) in data.trials().iter().enumerate() {
            for j in 0..tb.n() {
                let mut row = vec![0.0; q];
                let t = tb.tf(j);
                row[2 * (5 * r + i) + usize::from(t == 1.0)] = 1.0;
                for k in 0..8 {
                    row[10 * reps + k] = tb.x(j, k);
                    row[10 * reps + 8 + k] = t * tb.x(j, k);
                }
                rows.extend(row);
                ys.push(tb.y()[j]);
            }
        }
    }
    let n = ys.len();
    let x = DMatrix::from_row_slice(n, q, &rows);
    let y = DVector::from_vec(ys);
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let coef = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &coef;
    let s2 = resid.dot(&resid) / (n - q) as f64;
    let beta_hat = coef.rows(10 * reps, 8);
    let cov = xtx_inv.view((10 * reps, 10 * reps), (8, 8)) * s2;
    let diff = beta_hat - DVector::from_row_slice(&TRUE_BETA);
    let wald = (diff.transpose() * cov.clone().try_inverse().unwrap() * &diff)[(0, 0)];
    // 99.9% quantile of chi-square with 8 degrees of freedom
    assert!(wald < 26.12, "Wald statistic {wald}");
    for k in 0..8 {
        assert!(diff[k].abs() < 4.0 * cov[(k, k)].sqrt());
    }
}

#[test]
fn participant_errors_vanish_at_truth_and_on_controls() {
    let tb = TrialBlock::new("A", vec![0.0; 4], vec![false, false, true, true], vec![1.0, 2.0, 3.0, -1.0], 1).unwrap();
    let data = IpdDataset::with_default_names(vec![tb]).unwrap();
    assert_eq!(participant_sumsq(&data, 3.0, &[1.0], 3.0, &[1.0]), (0.0, 0.0));
    // treated rows: v_em = x (1 − 0.5) = 1.5, −0.5; v adds α − α̂ = 1
    let (ss, ss_em) = participant_sumsq(&data, 3.0, &[1.0], 2.0, &[0.5]);
    assert!((ss_em - (2.25 + 0.25)).abs() < 1e-12);
    assert!((ss - (2.5f64.powi(2) + 0.5f64.powi(2))).abs() < 1e-12);
}

fn fuzz_estimates(r: usize, d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), r),
        prop::collection::vec(prop::sample::select(vec![0.0, 0.75, 1.5, -1.0]), d),
    )
        .prop_filter("some nonzero truth", |(_, g)| g.iter().any(|v| *v != 0.0))
}

proptest! {
    #[test]
    fn decomposition_identity((est, truth) in fuzz_estimates(6, 4)) {
        let dec = decompose(&est, &truth).unwrap();
        for k in 0..4 {
            prop_assert!((dec.mse[k] - dec.variance[k] - dec.bias[k] * dec.bias[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_invariant_to_replicate_order((est, truth) in fuzz_estimates(5, 3), seed in any::<u64>()) {
        let mut perm = est.clone();
        perm.rotate_left((seed % 5) as usize);
        perm.swap(0, 4);
        for v in [MetricVariant::Literal, MetricVariant::Conventional] {
            prop_assert!((arrmse(&est, &truth, v).unwrap() - arrmse(&perm, &truth, v).unwrap()).abs() < 1e-12);
            prop_assert!((aarbias(&est, &truth, v).unwrap() - aarbias(&perm, &truth, v).unwrap()).abs() < 1e-12);
            prop_assert!((arsd(&est, &truth, v).unwrap() - arsd(&perm, &truth, v).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn arsd_translation_invariant((est, truth) in fuzz_estimates(4, 3), c in -5.0f64..5.0) {
        let shifted: Vec<Vec<f64>> = est.iter().map(|e| e.iter().map(|v| v + c).collect()).collect();
        let v = MetricVariant::Literal;
        prop_assert!((arsd(&est, &truth, v).unwrap() - arsd(&shifted, &truth, v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn arrmse_scale_invariant((est, truth) in fuzz_estimates(3, 3), c in 0.1f64..10.0) {
        let se: Vec<Vec<f64>> = est.iter().map(|e| e.iter().map(|v| v * c).collect()).collect();
        let st: Vec<f64> = truth.iter().map(|v| v * c).collect();
        for v in [MetricVariant::Literal, MetricVariant::Conventional] {
            let a = arrmse(&est, &truth, v).unwrap();
            prop_assert!((a - arrmse(&se, &st, v).unwrap()).abs() < 1e-9 * (1.0 + a));
        }
    }
}

#[test]
fn perfect_estimates_score_zero() {
    let truth = vec![1.5, 0.0, 0.75];
    let est = vec![truth.clone(); 3];
    for v in [MetricVariant::Literal, MetricVariant::Conventional] {
        assert_eq!(arrmse(&est, &truth, v).unwrap(), 0.0);
        assert_eq!(aarbias(&est, &truth, v).unwrap(), 0.0);
        assert_eq!(arsd(&est, &truth, v).unwrap(), 0.0);
    }
}

#[test]
fn study_bookkeeping_and_determinism() {
    let s = cell(Variability::Medium, Sparsity::High, Magnitude::Strong, Correlation::None);
    let methods = [PriorMethod::Flat, PriorMethod::cmg(ShrinkLevel::S2, Tuning::Pow)];
    let cfg = StudyConfig {
        replicates: 3,
        chain: ChainConfig { n_chains: 1, n_iter: 300, burn_in: 100, thin: 1, seed: 0 },
        master_seed: 11,
        variant: MetricVariant::Literal,
    };
    let a = run_study(&[s], &methods, &cfg, &Sequential).unwrap();
    assert_eq!(a.rows.len(), 2);
    for row in &a.rows {
        assert_eq!((row.succeeded, row.failed), (3, 0));
        for (name, v) in row.metrics() {
            assert!(v.is_finite() && v >= 0.0, "{name} = {v}");
        }
    }
    assert_eq!(a.replicates.len(), 6);
    assert_eq!(a.rankings()[0].1.len(), 2);
    assert_eq!(run_study(&[s], &methods, &cfg, &Sequential).unwrap(), a);
}

#[test]
fn empty_study_rejected() {
    let cfg = StudyConfig {
        replicates: 1,
        chain: ChainConfig { n_chains: 1, n_iter: 10, burn_in: 5, thin: 1, seed: 0 },
        master_seed: 0,
        variant: MetricVariant::Literal,
    };
    assert!(matches!(run_study(&[], &[PriorMethod::Flat], &cfg, &Sequential), Err(Error::Config(_))));
}
