mod common;

use common::{simulate, Truth};
use ipdma_core::data::ModelSpec;
use ipdma_core::posterior::{
    flag_by_probability, flag_moderators, kde, prior_curve, scaled_neighborhood_prob, summarize, trapezoid,
    tuning_curve, Grid, PriorCurve,
};
use ipdma_core::priors::{PriorMethod, ShrinkLevel, Tuning};
use ipdma_core::sampler::{run_mcmc, ChainConfig, ChainDraws, PosteriorDraws, Provenance};
use ipdma_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use statrs::distribution::{Beta, Continuous};

fn one_param(values: Vec<f64>) -> PosteriorDraws {
    let chains = vec![ChainDraws { iterations: (1..=values.len()).collect(), values }];
    let prov = Provenance { config: ChainConfig::default(), method: "Flat".into() };
    PosteriorDraws::new(vec!["gamma[1]".into()], chains, prov).unwrap()
}

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[test]
fn summary_of_three_draws() {
    let s = summarize(&one_param(vec![1.0, 2.0, 3.0])).unwrap();
    let g = s.get("gamma[1]").unwrap();
    assert_eq!((g.mean, g.sd), (2.0, 1.0));
    assert!(g.ci_low <= g.ci_high);
}

#[test]
fn summary_of_symmetric_draws_centered() {
    let mut x = normals(1, 5000);
    x.extend(x.clone().iter().map(|v| -v));
    let s = summarize(&one_param(x.clone())).unwrap();
    let g = s.get("gamma[1]").unwrap();
    assert!(g.mean.abs() < 3.0 * g.sd / (x.len() as f64).sqrt());
}

#[test]
fn uniform_quantiles_and_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = Uniform::new(0.0, 1.0).unwrap();
    let x: Vec<f64> = (0..10_000).map(|_| u.sample(&mut rng)).collect();
    let s = summarize(&one_param(x.clone())).unwrap();
    let g = s.get("gamma[1]").unwrap();
    assert!((g.ci_low - 0.025).abs() < 0.01 && (g.ci_high - 0.975).abs() < 0.01);
    let inside = x.iter().filter(|v| **v >= g.ci_low && **v <= g.ci_high).count() as f64 / x.len() as f64;
    assert!((inside - 0.95).abs() <= 1.0 / x.len() as f64 + 1e-12, "{inside}");
}

#[test]
fn empty_draws_rejected() {
    assert_eq!(summarize(&one_param(vec![])).unwrap_err(), Error::EmptyDraws);
}

#[test]
fn scaled_neighborhood_examples() {
    assert_eq!(scaled_neighborhood_prob(&[-1.0, 1.0, -1.0, 1.0]).unwrap(), 1.0);
    let clustered: Vec<f64> = normals(3, 1000).iter().map(|v| 10.0 + 0.1 * v).collect();
    assert_eq!(scaled_neighborhood_prob(&clustered).unwrap(), 0.0);
    let p = scaled_neighborhood_prob(&normals(4, 10_000)).unwrap();
    assert!((p - 0.6827).abs() < 0.02, "{p}");
    assert!(matches!(scaled_neighborhood_prob(&[2.0, 2.0, 2.0]), Err(Error::DegeneratePosterior(_))));
}

#[test]
fn flag_examples() {
    assert_eq!(flag_by_probability(&[0.68, 0.20, 0.58], 0.5), vec![1]);
    assert!(flag_by_probability(&[0.5, 0.5], 0.5).is_empty());
    assert_eq!(flag_by_probability(&[0.9, 0.2, 0.99], 1.0), vec![0, 1, 2]);
}

#[test]
fn flags_from_summary_include_ci_rule() {
    let s = summarize(&one_param(normals(5, 2000).iter().map(|v| 5.0 + v).collect())).unwrap();
    let f = flag_moderators(&s, 0.5);
    assert_eq!(f.neighborhood, vec![0]);
    assert_eq!(f.ci_excludes_zero, vec![0]);
}

#[test]
fn kde_of_standard_normal_at_zero() {
    let x = normals(6, 10_000);
    let k = kde(&x, &Grid::new(0.0, 1.0, 2).unwrap()).unwrap();
    assert!((k[0].1 - 0.398_942).abs() < 0.02, "{}", k[0].1);
}

#[test]
fn kde_integrates_to_one_over_six_sd() {
    let x: Vec<f64> = normals(7, 3000).iter().map(|v| v * v).collect();
    let curve = kde(&x, &Grid::around(&x, 2001).unwrap()).unwrap();
    assert!((trapezoid(&curve) - 1.0).abs() < 0.01);
}

#[test]
fn s2_factor_density_is_flat() {
    let m = PriorMethod::cmg(ShrinkLevel::S2, Tuning::N);
    let c = prior_curve(&m, PriorCurve::Factor, None, 500, &Grid::new(0.05, 0.95, 19).unwrap()).unwrap();
    assert!(c.iter().all(|(_, y)| (y - 1.0).abs() < 1e-10));
}

#[test]
fn s3_conditional_factor_density_is_beta() {
    let m = PriorMethod::cmg(ShrinkLevel::S3, Tuning::Pow);
    let grid = Grid::new(1e-6, 1.0 - 1e-6, 20_001).unwrap();
    let c = prior_curve(&m, PriorCurve::Factor, Some(1.2), 500, &grid).unwrap();
    let oracle = Beta::new(1.2, 2.0).unwrap();
    for &(x, y) in c.iter().step_by(997) {
        assert!((y - oracle.pdf(x)).abs() < 1e-9 * (1.0 + y), "{x}: {y}");
    }
    assert!((trapezoid(&c) - 1.0).abs() < 1e-3);
}

#[test]
fn improper_prior_curve_rejected() {
    let g = Grid::new(0.1, 1.0, 5).unwrap();
    for m in [PriorMethod::Flat, PriorMethod::Uip, PriorMethod::Horseshoe] {
        assert!(matches!(prior_curve(&m, PriorCurve::G, None, 100, &g), Err(Error::Unsupported(_))));
    }
}

#[test]
fn tuning_curve_stays_in_support() {
    let c = tuning_curve(Tuning::Log, 100, &Grid::new(0.0, 1.0, 101).unwrap());
    assert!(c.iter().all(|(p, f)| *p > std::f64::consts::E / 100.0 && *f >= 1.0));
    assert_eq!(c.last().unwrap().0, 1.0);
}

#[test]
fn cmg_s3_posterior_sd_not_wider_than_flat() {
    let truth = Truth { mu: 2.0, alpha: 3.0, beta: vec![1.0, 1.5, 2.0], gamma: vec![0.75, 0.0, 0.0], sigma: 2.5, tau: 0.5 };
    let data = simulate(17, 5, 120, &truth);
    let c = ChainConfig { n_chains: 1, n_iter: 6000, burn_in: 2000, thin: 2, seed: 3 };
    let sd_of = |m| {
        let spec = ModelSpec::all_moderators(m, 3);
        let s = summarize(&run_mcmc(&data, &spec, &c).unwrap()).unwrap();
        s.gammas().iter().map(|g| g.sd).collect::<Vec<_>>()
    };
    let flat = sd_of(PriorMethod::Flat);
    for tuning in [Tuning::N, Tuning::Log, Tuning::Pow] {
        let s3 = sd_of(PriorMethod::cmg(ShrinkLevel::S3, tuning));
        for k in 0..3 {
            // 5% allowance for Monte Carlo error in the SD estimates
            assert!(s3[k] <= 1.05 * flat[k], "{tuning:?} gamma[{}]: {} vs flat {}", k + 1, s3[k], flat[k]);
        }
    }
}

proptest! {
    #[test]
    fn neighborhood_sign_invariant(x in prop::collection::vec(-10.0f64..10.0, 3..50)) {
        prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-6));
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(scaled_neighborhood_prob(&x).unwrap(), scaled_neighborhood_prob(&neg).unwrap());
    }

    #[test]
    fn flags_monotone_in_threshold(p in prop::collection::vec(0.0f64..1.0, 1..20), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = flag_by_probability(&p, lo);
        let b = flag_by_probability(&p, hi);
        prop_assert!(a.iter().all(|k| b.contains(k)));
    }

    #[test]
    fn probability_in_unit_interval(x in prop::collection::vec(-5.0f64..5.0, 2..40)) {
        prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-6));
        let p = scaled_neighborhood_prob(&x).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }
}
