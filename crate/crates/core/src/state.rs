//! The full parameter vector of the hierarchical model and its flat,
//! named representation used for stored draws.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::ModelSpec;
use crate::error::{Error, Result};
use crate::priors::{Calibration, GHyper, PriorMethod};

/// Prior-specific latent variables.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorLatents {
    None,
    /// g-type priors. `g` is empty when `g_k` is fixed; `b` holds the S1/S3
    /// skewness parameters; `p` the per-trial tuning parameters.
    G {
        g: Vec<f64>,
        b: Option<Vec<f64>>,
        p: Option<Vec<f64>>,
    },
    /// Squared local and global horseshoe scales.
    Horseshoe {
        lambda2: Vec<f64>,
        tau2: f64,
    },
    Ssvs {
        indicator: Vec<bool>,
        eta: f64,
    },
}

/// One point in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    pub mu: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// `None` when the trial random effects are excluded.
    pub tau_mu2: Option<f64>,
    pub tau_alpha2: Option<f64>,
    /// `None` when the moderator random effects are excluded.
    pub tau_k2: Option<Vec<f64>>,
    pub u_mu: Vec<f64>,
    pub u_alpha: Vec<f64>,
    /// `u[i][k]`; inner vectors are empty without moderator random effects.
    pub u: Vec<Vec<f64>>,
    pub latents: PriorLatents,
}

impl ParameterState {
    /// Check the support constraints of every component.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("invalid parameter state: {what}")));
        if self.sigma2.iter().any(|v| !(*v > 0.0)) {
            return bad("sigma2 must be positive");
        }
        let taus = self
            .tau_mu2
            .iter()
            .chain(self.tau_alpha2.iter())
            .chain(self.tau_k2.iter().flatten());
        if taus.into_iter().any(|v| !(*v > 0.0)) {
            return bad("random-effect variances must be positive");
        }
        match &self.latents {
            PriorLatents::G { g, b, .. } => {
                if g.iter().any(|v| !(*v > 0.0)) {
                    return bad("g must be positive");
                }
                if b.iter().flatten().any(|v| !(*v > 0.0 && *v <= 2.0)) {
                    return bad("b must lie in (0, 2]");
                }
            }
            PriorLatents::Horseshoe { lambda2, tau2 } => {
                if lambda2.iter().any(|v| !(*v > 0.0)) || !(*tau2 > 0.0) {
                    return bad("horseshoe scales must be positive");
                }
            }
            PriorLatents::Ssvs { eta, .. } if !(*eta > 0.0) => return bad("eta must be positive"),
            _ => {}
        }
        Ok(())
    }
}

/// Maps a [`ParameterState`] to a flat row of named values and back.
///
/// Column order: `mu, alpha, beta[1..p], gamma[1..d], sigma2[1..I]`, the
/// random-effect variances and effects when present, prior latents, and
/// finally `deviance` (−2 × log-likelihood at the draw).
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    names: Vec<String>,
    n_trials: usize,
    p: usize,
    d: usize,
    trial_re: bool,
    moderator_re: bool,
    latent_kind: LatentKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LatentKind {
    None,
    G { random_g: bool, b: bool, p: bool },
    Horseshoe,
    Ssvs,
}

impl Layout {
    pub fn new(spec: &ModelSpec, n_trials: usize, p: usize, n_total: usize) -> Layout {
        let d = spec.d();
        let latent_kind = latent_kind(&spec.prior, n_total);
        let mut names = vec![String::from("mu"), String::from("alpha")];
        names.extend((1..=p).map(|k| format!("beta[{k}]")));
        names.extend((1..=d).map(|k| format!("gamma[{k}]")));
        names.extend((1..=n_trials).map(|i| format!("sigma2[{i}]")));
        if spec.trial_random_effects {
            names.push("tau_mu2".into());
            names.push("tau_alpha2".into());
        }
        if spec.moderator_random_effects {
            names.extend((1..=d).map(|k| format!("tau2[{k}]")));
        }
        if spec.trial_random_effects {
            names.extend((1..=n_trials).map(|i| format!("u_mu[{i}]")));
            names.extend((1..=n_trials).map(|i| format!("u_alpha[{i}]")));
        }
        if spec.moderator_random_effects {
            for i in 1..=n_trials {
                names.extend((1..=d).map(|k| format!("u[{i},{k}]")));
            }
        }
        match latent_kind {
            LatentKind::None => {}
            LatentKind::G { random_g, b, p } => {
                if random_g {
                    names.extend((1..=d).map(|k| format!("g[{k}]")));
                }
                if b {
                    names.extend((1..=d).map(|k| format!("b[{k}]")));
                }
                if p {
                    names.extend((1..=n_trials).map(|i| format!("p[{i}]")));
                }
            }
            LatentKind::Horseshoe => {
                names.extend((1..=d).map(|k| format!("lambda[{k}]")));
                names.push("tau_hs".into());
            }
            LatentKind::Ssvs => {
                names.extend((1..=d).map(|k| format!("ind[{k}]")));
                names.push("eta".into());
            }
        }
        names.push("deviance".into());
        Layout {
            names,
            n_trials,
            p,
            d,
            trial_re: spec.trial_random_effects,
            moderator_re: spec.moderator_random_effects,
            latent_kind,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Append the flattened state and its deviance to `out`.
    pub fn write(&self, s: &ParameterState, deviance: f64, out: &mut Vec<f64>) {
        out.push(s.mu);
        out.push(s.alpha);
        out.extend_from_slice(&s.beta);
        out.extend_from_slice(&s.gamma);
        out.extend_from_slice(&s.sigma2);
        if self.trial_re {
            out.push(s.tau_mu2.unwrap_or(f64::NAN));
            out.push(s.tau_alpha2.unwrap_or(f64::NAN));
        }
        if self.moderator_re {
            match &s.tau_k2 {
                Some(t) => out.extend_from_slice(t),
                None => out.extend(core::iter::repeat_n(f64::NAN, self.d)),
            }
        }
        if self.trial_re {
            out.extend_from_slice(&s.u_mu);
            out.extend_from_slice(&s.u_alpha);
        }
        if self.moderator_re {
            for row in &s.u {
                out.extend_from_slice(row);
            }
        }
        match (&s.latents, self.latent_kind) {
            (
                PriorLatents::G { g, b, p },
                LatentKind::G {
                    random_g,
                    b: has_b,
                    p: has_p,
                },
            ) => {
                if random_g {
                    out.extend_from_slice(g);
                }
                if has_b {
                    out.extend_from_slice(b.as_deref().unwrap_or(&[]));
                }
                if has_p {
                    out.extend_from_slice(p.as_deref().unwrap_or(&[]));
                }
            }
            (PriorLatents::Horseshoe { lambda2, tau2 }, LatentKind::Horseshoe) => {
                out.extend(lambda2.iter().map(|v| libm::sqrt(*v)));
                out.push(libm::sqrt(*tau2));
            }
            (PriorLatents::Ssvs { indicator, eta }, LatentKind::Ssvs) => {
                out.extend(indicator.iter().map(|&v| if v { 1.0 } else { 0.0 }));
                out.push(*eta);
            }
            _ => {}
        }
        out.push(deviance);
    }

    /// Rebuild a state from a flat row (e.g. a row of posterior means).
    /// Fixed `g` values are not stored and are left empty.
    pub fn read(&self, row: &[f64]) -> Result<ParameterState> {
        if row.len() != self.len() {
            return Err(Error::Domain(format!(
                "row has {} values, layout has {}",
                row.len(),
                self.len()
            )));
        }
        let mut it = row.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        let head = take(2);
        let beta = take(self.p);
        let gamma = take(self.d);
        let sigma2 = take(self.n_trials);
        let (tau_mu2, tau_alpha2) = if self.trial_re {
            let t = take(2);
            (Some(t[0]), Some(t[1]))
        } else {
            (None, None)
        };
        let tau_k2 = self.moderator_re.then(|| take(self.d));
        let (u_mu, u_alpha) = if self.trial_re {
            (take(self.n_trials), take(self.n_trials))
        } else {
            (vec![0.0; self.n_trials], vec![0.0; self.n_trials])
        };
        let u = if self.moderator_re {
            (0..self.n_trials).map(|_| take(self.d)).collect()
        } else {
            vec![Vec::new(); self.n_trials]
        };
        let latents = match self.latent_kind {
            LatentKind::None => PriorLatents::None,
            LatentKind::G { random_g, b, p } => PriorLatents::G {
                g: if random_g { take(self.d) } else { Vec::new() },
                b: b.then(|| take(self.d)),
                p: p.then(|| take(self.n_trials)),
            },
            LatentKind::Horseshoe => {
                let lambda2 = take(self.d).into_iter().map(|v| v * v).collect();
                let t = take(1)[0];
                PriorLatents::Horseshoe {
                    lambda2,
                    tau2: t * t,
                }
            }
            LatentKind::Ssvs => {
                let indicator = take(self.d).into_iter().map(|v| v >= 0.5).collect();
                PriorLatents::Ssvs {
                    indicator,
                    eta: take(1)[0],
                }
            }
        };
        Ok(ParameterState {
            mu: head[0],
            alpha: head[1],
            beta,
            gamma,
            sigma2,
            tau_mu2,
            tau_alpha2,
            tau_k2,
            u_mu,
            u_alpha,
            u,
            latents,
        })
    }
}

fn latent_kind(prior: &PriorMethod, n_total: usize) -> LatentKind {
    match prior {
        PriorMethod::Flat => LatentKind::None,
        PriorMethod::Horseshoe => LatentKind::Horseshoe,
        PriorMethod::Ssvs { .. } => LatentKind::Ssvs,
        m => {
            let hyper = m.g_hyper(n_total);
            LatentKind::G {
                random_g: !matches!(hyper, Some(GHyper::Fixed(_))),
                b: matches!(hyper, Some(GHyper::Shrinkage { law, .. }) if law.needs_b()),
                p: matches!(m.calibration(n_total), Calibration::Tuned(_)),
            }
        }
    }
}
