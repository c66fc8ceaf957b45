//! One Markov chain: initialisation, the update sweep and draw recording.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::design::Design;
use super::gaussian::{centered_draw, factor, GaussianBlock};
use super::{ChainConfig, ChainDraws, SamplerOptions};
use crate::data::ModelSpec;
use crate::error::{Error, Result};
use crate::math::{beta_ln_pdf, ln_sigmoid_pair, normal_ln_pdf, LN_2PI};
use crate::priors::{tuning_f, Calibration, GHyper, PriorMethod, ShrinkageLaw, B_MAX};
use crate::slice::{slice_bounded, slice_stepping_out};
use crate::state::{Layout, ParameterState, PriorLatents};

const SLICE_WIDTH: f64 = 2.0;
const SLICE_STEPS: usize = 32;

// Update-block bits for the per-iteration sweep audit.
const UPD_THETA: u32 = 1;
const UPD_U: u32 = 1 << 1;
const UPD_SIGMA2: u32 = 1 << 2;
const UPD_TAU2: u32 = 1 << 3;
const UPD_G: u32 = 1 << 4;
const UPD_B: u32 = 1 << 5;
const UPD_P: u32 = 1 << 6;
const UPD_HS: u32 = 1 << 7;
const UPD_SSVS: u32 = 1 << 8;

/// Draw from `IG(shape, scale)`.
fn inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    scale / g
}

#[derive(Debug, Clone)]
enum Latent {
    Flat,
    G {
        hyper: GHyper,
        tuning: Option<crate::priors::Tuning>,
        /// `f(n_i)` per trial.
        f: Vec<f64>,
        g: Vec<f64>,
        b: Vec<f64>,
        p: Vec<f64>,
    },
    Horseshoe {
        lambda2: Vec<f64>,
        nu: Vec<f64>,
        tau2: f64,
        xi: f64,
    },
    Ssvs {
        ind: Vec<bool>,
        eta: f64,
        c: f64,
        h: f64,
    },
}

pub(crate) struct Chain<'a> {
    design: &'a Design,
    likelihood: bool,
    fixed_sigma2: bool,
    theta: DVector<f64>,
    u: Vec<DVector<f64>>,
    sigma2: Vec<f64>,
    /// One variance per random-effect column, with its half-Cauchy auxiliary.
    tau2: Vec<f64>,
    tau_aux: Vec<f64>,
    latent: Latent,
    ssr: Vec<f64>,
    c_chol: Vec<Option<Cholesky<f64, Dyn>>>,
    rng: ChaCha8Rng,
    expected: u32,
    done: u32,
}

impl<'a> Chain<'a> {
    pub fn new(
        design: &'a Design,
        spec: &'a ModelSpec,
        opts: &SamplerOptions,
        seed: u64,
        chain: usize,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain as u64);
        let (q, r) = (design.q, design.r);
        let n_trials = design.trials.len();

        // Ridge-stabilised least squares ignoring the random effects.
        let mut xtx = DMatrix::zeros(q, q);
        let mut xty = DVector::zeros(q);
        for td in &design.trials {
            xtx += &td.xtx;
            xty += &td.xty;
        }
        let ridge = 1e-8 * (xtx.trace() / q as f64).max(1.0);
        for a in 0..q {
            xtx[(a, a)] += ridge;
        }
        let theta = factor(&xtx, 0)?.solve(&xty);
        let u = vec![DVector::zeros(r); n_trials];
        let ssr: Vec<f64> = (0..n_trials)
            .map(|i| design.ssr(i, &theta, &u[i]))
            .collect();

        let sigma2 = match &opts.fixed_sigma2 {
            Some(s) => {
                if s.len() != n_trials || s.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::Config(format!(
                        "fixed_sigma2 needs {n_trials} positive values"
                    )));
                }
                s.clone()
            }
            None => design
                .trials
                .iter()
                .zip(&ssr)
                .map(|(td, s)| (s / td.n.saturating_sub(1).max(1) as f64).max(1e-8))
                .collect(),
        };

        let latent = init_latent(design, &spec.prior)?;
        let mut expected = UPD_THETA;
        if opts.likelihood {
            if r > 0 {
                expected |= UPD_U | UPD_TAU2;
            }
            if opts.fixed_sigma2.is_none() {
                expected |= UPD_SIGMA2;
            }
        }
        match &latent {
            Latent::G { hyper, tuning, .. } => {
                if !matches!(hyper, GHyper::Fixed(_)) {
                    expected |= UPD_G;
                }
                if matches!(hyper, GHyper::Shrinkage { law, .. } if law.needs_b()) {
                    expected |= UPD_B;
                }
                if tuning.is_some() {
                    expected |= UPD_P;
                }
            }
            Latent::Horseshoe { .. } => expected |= UPD_HS,
            Latent::Ssvs { .. } => expected |= UPD_SSVS,
            Latent::Flat => {
                if !opts.likelihood {
                    return Err(Error::Unsupported(
                        "prior-only sampling needs a proper prior on gamma".to_string(),
                    ));
                }
            }
        }
        Ok(Chain {
            design,
            likelihood: opts.likelihood,
            fixed_sigma2: opts.fixed_sigma2.is_some(),
            theta,
            u,
            sigma2,
            tau2: vec![1.0; r],
            tau_aux: vec![1.0; r],
            latent,
            ssr,
            c_chol: vec![None; n_trials],
            rng,
            expected,
            done: 0,
        })
    }

    pub fn run(mut self, cfg: &ChainConfig, layout: &Layout) -> Result<ChainDraws> {
        let kept = cfg.retained_per_chain();
        let mut values = Vec::with_capacity(kept * layout.len());
        let mut iterations = Vec::with_capacity(kept);
        for it in 1..=cfg.n_iter {
            self.sweep(it)?;
            if it > cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
                let dev = self.deviance();
                if !dev.is_finite() {
                    return Err(Error::Numerical {
                        iteration: it,
                        message: "non-finite log-likelihood".to_string(),
                    });
                }
                layout.write(&self.state(), dev, &mut values);
                iterations.push(it);
            }
        }
        Ok(ChainDraws { iterations, values })
    }

    fn sweep(&mut self, it: usize) -> Result<()> {
        self.done = 0;
        if self.likelihood {
            self.update_theta(it)?;
            if self.design.r > 0 {
                self.update_u();
            }
            for i in 0..self.sigma2.len() {
                self.ssr[i] = self.design.ssr(i, &self.theta, &self.u[i]);
            }
            if !self.fixed_sigma2 {
                self.update_sigma2();
            }
            if self.design.r > 0 {
                self.update_tau2();
            }
        } else {
            self.update_gamma_prior_only();
        }
        self.update_latents();
        debug_assert_eq!(
            self.done & self.expected,
            self.expected,
            "iteration {it}: blocks {:#b} expected but only {:#b} updated",
            self.expected,
            self.done
        );
        Ok(())
    }

    /// `P0_k = Σ_i S_ik / (σ_i² f_i)`.
    fn p0(&self) -> Vec<f64> {
        let d = self.design.d;
        let f = match &self.latent {
            Latent::G { f, .. } => Some(f),
            _ => None,
        };
        let mut out = vec![0.0; d];
        for (i, td) in self.design.trials.iter().enumerate() {
            let w = 1.0 / (self.sigma2[i] * f.map_or(1.0, |f| f[i]));
            for k in 0..d {
                out[k] += td.s[k] * w;
            }
        }
        out
    }

    /// Prior precision of each `gamma_k` given the current latents.
    fn gamma_precision(&self) -> Vec<f64> {
        match &self.latent {
            Latent::Flat => vec![0.0; self.design.d],
            Latent::G { g, hyper, .. } => {
                let p0 = self.p0();
                p0.iter()
                    .enumerate()
                    .map(|(k, v)| v / g_value(hyper, g, k))
                    .collect()
            }
            Latent::Horseshoe { lambda2, tau2, .. } => {
                lambda2.iter().map(|l| 1.0 / (l * tau2)).collect()
            }
            Latent::Ssvs { ind, eta, h, .. } => ind
                .iter()
                .map(|&i| 1.0 / (eta * eta * if i { *h } else { 1.0 }))
                .collect(),
        }
    }

    fn update_theta(&mut self, it: usize) -> Result<()> {
        let des = self.design;
        let (q, r) = (des.q, des.r);
        let mut prec = DMatrix::zeros(q, q);
        let mut lin = DVector::zeros(q);
        for (i, td) in des.trials.iter().enumerate() {
            let w = 1.0 / self.sigma2[i];
            prec += &td.xtx * w;
            lin += &td.xty * w;
            if r > 0 {
                let mut c = &td.ztz * w;
                for a in 0..r {
                    c[(a, a)] += 1.0 / self.tau2[a];
                }
                let chol = factor(&c, it)?;
                let xtz = &td.xtz * w;
                let a_mat = chol.solve(&xtz.transpose());
                prec -= &xtz * a_mat;
                lin -= &xtz * chol.solve(&(&td.zty * w));
                self.c_chol[i] = Some(chol);
            }
        }
        for (k, v) in self.gamma_precision().into_iter().enumerate() {
            let j = des.gamma_index(k);
            prec[(j, j)] += v;
        }
        prec.fill_lower_triangle_with_upper_triangle();
        self.theta = GaussianBlock::new(&prec, &lin, it)?.draw(&mut self.rng);
        self.done |= UPD_THETA;
        Ok(())
    }

    fn update_u(&mut self) {
        for (i, td) in self.design.trials.iter().enumerate() {
            let chol = self.c_chol[i]
                .as_ref()
                .expect("factored in the theta update");
            let w = 1.0 / self.sigma2[i];
            let resid = (&td.zty - td.xtz.tr_mul(&self.theta)) * w;
            self.u[i] = chol.solve(&resid) + centered_draw(chol, &mut self.rng);
        }
        self.done |= UPD_U;
    }

    /// `Σ_k [½ ln P_k − ½ γ_k² P_k]` over g-prior precisions `P_k`; the
    /// part of the g-prior density that depends on `σ²` and `p`.
    fn g_prior_log_kernel(&self, p0: &[f64]) -> f64 {
        let Latent::G { g, hyper, .. } = &self.latent else {
            return 0.0;
        };
        (0..self.design.d)
            .map(|k| {
                let pk = p0[k] / g_value(hyper, g, k);
                let gk = self.theta[self.design.gamma_index(k)];
                0.5 * log(pk) - 0.5 * gk * gk * pk
            })
            .sum()
    }

    fn update_sigma2(&mut self) {
        let g_prior = matches!(self.latent, Latent::G { .. });
        for i in 0..self.sigma2.len() {
            let n = self.design.trials[i].n as f64;
            let scale = (0.5 * self.ssr[i]).max(1e-300);
            let prop = inv_gamma(0.5 * n, scale, &mut self.rng);
            if !g_prior {
                self.sigma2[i] = prop;
                continue;
            }
            // The g-prior precision scales with 1/σ_i², so the inverse-gamma
            // conditional of the likelihood is used as an independence proposal.
            let old = self.sigma2[i];
            let cur = self.g_prior_log_kernel(&self.p0());
            self.sigma2[i] = prop;
            let new = self.g_prior_log_kernel(&self.p0());
            if log(self.rng.random::<f64>()) >= new - cur {
                self.sigma2[i] = old;
            }
        }
        self.done |= UPD_SIGMA2;
    }

    fn update_tau2(&mut self) {
        let n_trials = self.u.len() as f64;
        for c in 0..self.design.r {
            let ss: f64 = self.u.iter().map(|u| u[c] * u[c]).sum();
            self.tau2[c] = inv_gamma(
                0.5 * (n_trials + 1.0),
                1.0 / self.tau_aux[c] + 0.5 * ss,
                &mut self.rng,
            );
            self.tau_aux[c] = inv_gamma(1.0, 1.0 + 1.0 / self.tau2[c], &mut self.rng);
        }
        self.done |= UPD_TAU2;
    }

    fn update_gamma_prior_only(&mut self) {
        for (k, v) in self.gamma_precision().into_iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.theta[self.design.gamma_index(k)] = z / libm::sqrt(v);
        }
        self.done |= UPD_THETA;
    }

    fn update_latents(&mut self) {
        let d = self.design.d;
        let gamma: Vec<f64> = (0..d)
            .map(|k| self.theta[self.design.gamma_index(k)])
            .collect();
        let p0 = if matches!(self.latent, Latent::G { .. }) {
            self.p0()
        } else {
            Vec::new()
        };
        let rng = &mut self.rng;
        match &mut self.latent {
            Latent::Flat => {}
            Latent::G { hyper, g, b, .. } => {
                match *hyper {
                    GHyper::Fixed(_) => {}
                    GHyper::InvGamma { shape, scale } => {
                        for k in 0..d {
                            g[k] = inv_gamma(
                                shape + 0.5,
                                scale + 0.5 * gamma[k] * gamma[k] * p0[k],
                                rng,
                            );
                        }
                        self.done |= UPD_G;
                    }
                    GHyper::Shrinkage { law, scale } => {
                        let ln_c = log(scale);
                        for k in 0..d {
                            let (sa, sb) = law.params(b.get(k).copied().unwrap_or(1.0));
                            let q = gamma[k] * gamma[k] * p0[k] / (2.0 * scale);
                            // z = logit(s) = ln(g / c)
                            let target = |z: f64| {
                                let (ls, l1s) = ln_sigmoid_pair(z);
                                sa * ls + sb * l1s - 0.5 * (ln_c + z) - q * exp(-z)
                            };
                            let z0 = log(g[k]) - ln_c;
                            g[k] = scale
                                * exp(slice_stepping_out(
                                    z0,
                                    SLICE_WIDTH,
                                    SLICE_STEPS,
                                    target,
                                    rng,
                                ));
                        }
                        self.done |= UPD_G;
                        if law.needs_b() {
                            for k in 0..d {
                                let s = g[k] / (g[k] + scale);
                                let target = |bb: f64| {
                                    let (x, y) = law.params(bb);
                                    beta_ln_pdf(s, x, y)
                                };
                                b[k] = slice_bounded(b[k], 0.0, B_MAX, target, rng);
                            }
                            self.done |= UPD_B;
                        }
                    }
                }
            }
            Latent::Horseshoe {
                lambda2,
                nu,
                tau2,
                xi,
            } => {
                for k in 0..d {
                    lambda2[k] =
                        inv_gamma(1.0, 1.0 / nu[k] + gamma[k] * gamma[k] / (2.0 * *tau2), rng);
                    nu[k] = inv_gamma(1.0, 1.0 + 1.0 / lambda2[k], rng);
                }
                let ss: f64 = (0..d).map(|k| gamma[k] * gamma[k] / lambda2[k]).sum();
                *tau2 = inv_gamma(0.5 * (d as f64 + 1.0), 1.0 / *xi + 0.5 * ss, rng);
                *xi = inv_gamma(1.0, 1.0 + 1.0 / *tau2, rng);
                self.done |= UPD_HS;
            }
            Latent::Ssvs { ind, eta, c, h } => {
                for k in 0..d {
                    let slab = normal_ln_pdf(gamma[k], *h * *eta * *eta);
                    let spike = normal_ln_pdf(gamma[k], *eta * *eta);
                    let p_slab = 1.0 / (1.0 + exp(spike - slab));
                    ind[k] = rng.random::<f64>() < p_slab;
                }
                let ind_ref = &*ind;
                let hh = *h;
                let target = |e: f64| {
                    (0..d)
                        .map(|k| normal_ln_pdf(gamma[k], e * e * if ind_ref[k] { hh } else { 1.0 }))
                        .sum::<f64>()
                };
                *eta = slice_bounded(*eta, 0.0, *c, target, rng);
                self.done |= UPD_SSVS;
            }
        }
        self.update_tuning(&gamma);
    }

    /// Slice update of each trial's tuning parameter `p_i`.
    fn update_tuning(&mut self, gamma: &[f64]) {
        let Latent::G {
            tuning: Some(kind), ..
        } = self.latent
        else {
            return;
        };
        let d = self.design.d;
        let mut p0 = self.p0();
        for i in 0..self.sigma2.len() {
            let Latent::G { f, g, p, hyper, .. } = &mut self.latent else {
                unreachable!()
            };
            let td = &self.design.trials[i];
            let s2 = self.sigma2[i];
            let rest: Vec<f64> = (0..d).map(|k| p0[k] - td.s[k] / (s2 * f[i])).collect();
            let gv: Vec<f64> = (0..d).map(|k| g_value(hyper, g, k)).collect();
            let n = td.n;
            let target = |pp: f64| {
                let Ok(fv) = tuning_f(kind, n, pp) else {
                    return f64::NEG_INFINITY;
                };
                (0..d)
                    .map(|k| {
                        let pk = (rest[k] + td.s[k] / (s2 * fv)) / gv[k];
                        0.5 * log(pk) - 0.5 * gamma[k] * gamma[k] * pk
                    })
                    .sum::<f64>()
            };
            let (lo, hi) = kind.support(n);
            p[i] = slice_bounded(p[i], lo, hi, target, &mut self.rng);
            f[i] = tuning_f(kind, n, p[i]).expect("p stays inside its support");
            for k in 0..d {
                p0[k] = rest[k] + td.s[k] / (s2 * f[i]);
            }
        }
        self.done |= UPD_P;
    }

    /// `−2 × log-likelihood` given the current random effects.
    fn deviance(&self) -> f64 {
        let mut ll = 0.0;
        for (i, td) in self.design.trials.iter().enumerate() {
            let s2 = self.sigma2[i];
            ll -= 0.5 * (td.n as f64 * (LN_2PI + log(s2)) + self.ssr[i] / s2);
        }
        -2.0 * ll
    }

    fn state(&self) -> ParameterState {
        let des = self.design;
        let (p, d) = (des.p, des.d);
        let th = &self.theta;
        let off = if des.trial_re { 2 } else { 0 };
        let latents = match &self.latent {
            Latent::Flat => PriorLatents::None,
            Latent::G {
                hyper,
                g,
                b,
                p,
                tuning,
                ..
            } => PriorLatents::G {
                g: if matches!(hyper, GHyper::Fixed(_)) {
                    Vec::new()
                } else {
                    g.clone()
                },
                b: matches!(hyper, GHyper::Shrinkage { law, .. } if law.needs_b())
                    .then(|| b.clone()),
                p: tuning.is_some().then(|| p.clone()),
            },
            Latent::Horseshoe { lambda2, tau2, .. } => PriorLatents::Horseshoe {
                lambda2: lambda2.clone(),
                tau2: *tau2,
            },
            Latent::Ssvs { ind, eta, .. } => PriorLatents::Ssvs {
                indicator: ind.clone(),
                eta: *eta,
            },
        };
        ParameterState {
            mu: th[0],
            alpha: th[1],
            beta: th.rows(2, p).iter().copied().collect(),
            gamma: th.rows(2 + p, d).iter().copied().collect(),
            sigma2: self.sigma2.clone(),
            tau_mu2: des.trial_re.then(|| self.tau2[0]),
            tau_alpha2: des.trial_re.then(|| self.tau2[1]),
            tau_k2: des.moderator_re.then(|| self.tau2[off..off + d].to_vec()),
            u_mu: self
                .u
                .iter()
                .map(|u| if des.trial_re { u[0] } else { 0.0 })
                .collect(),
            u_alpha: self
                .u
                .iter()
                .map(|u| if des.trial_re { u[1] } else { 0.0 })
                .collect(),
            u: self
                .u
                .iter()
                .map(|u| {
                    if des.moderator_re {
                        u.rows(off, d).iter().copied().collect()
                    } else {
                        Vec::new()
                    }
                })
                .collect(),
            latents,
        }
    }
}

fn g_value(hyper: &GHyper, g: &[f64], k: usize) -> f64 {
    match hyper {
        GHyper::Fixed(v) => *v,
        _ => g[k],
    }
}

fn init_latent(design: &Design, prior: &PriorMethod) -> Result<Latent> {
    let d = design.d;
    Ok(match *prior {
        PriorMethod::Flat => Latent::Flat,
        PriorMethod::Horseshoe => Latent::Horseshoe {
            lambda2: vec![1.0; d],
            nu: vec![1.0; d],
            tau2: 1.0,
            xi: 1.0,
        },
        PriorMethod::Ssvs { c, h } => Latent::Ssvs {
            ind: vec![true; d],
            eta: 0.5 * c,
            c,
            h,
        },
        ref m => {
            let hyper = m.g_hyper(design.n_total).expect("g-type prior");
            for k in 0..d {
                if design.trials.iter().all(|td| td.s[k] == 0.0) {
                    return Err(Error::DegeneratePrior(k));
                }
            }
            let n_trials = design.trials.len();
            let (tuning, f, p) = match m.calibration(design.n_total) {
                Calibration::Unit => (None, vec![1.0; n_trials], Vec::new()),
                Calibration::Constant(c) => (None, vec![c; n_trials], Vec::new()),
                Calibration::Tuned(kind) => {
                    let mut p = Vec::with_capacity(n_trials);
                    let mut f = Vec::with_capacity(n_trials);
                    for td in &design.trials {
                        let (lo, hi) = kind.support(td.n);
                        let p0 = if lo < 0.5 && 0.5 < hi {
                            0.5
                        } else {
                            0.5 * (lo + hi)
                        };
                        p.push(p0);
                        f.push(tuning_f(kind, td.n, p0)?);
                    }
                    (Some(kind), f, p)
                }
            };
            let b = match hyper {
                GHyper::Shrinkage {
                    law: ShrinkageLaw::S1 | ShrinkageLaw::S3,
                    ..
                } => vec![1.0; d],
                _ => Vec::new(),
            };
            let g = match hyper {
                GHyper::Fixed(v) => vec![v; d],
                _ => vec![1.0; d],
            };
            Latent::G {
                hyper,
                tuning,
                f,
                g,
                b,
                p,
            }
        }
    })
}
