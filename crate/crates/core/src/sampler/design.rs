//! Per-trial sufficient statistics of the fixed- and random-effect designs.
//!
//! Fixed effects `θ = (μ, α, β_1..β_p, γ_1..γ_d)` use the columns
//! `[1, t, x_1..x_p, t x_m1..t x_md]`; random effects use `[1, t]` (trial
//! effects) followed by `[t x_m1..t x_md]` (moderator effects), each part
//! only when enabled. Every Gaussian update only needs the cross products.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::{IpdDataset, ModelSpec};

#[derive(Debug, Clone)]
pub(crate) struct TrialDesign {
    pub n: usize,
    pub xtx: DMatrix<f64>,
    pub xtz: DMatrix<f64>,
    pub ztz: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub zty: DVector<f64>,
    pub yty: f64,
    /// `Σ_j (t x_mk)²` per moderator.
    pub s: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub trials: Vec<TrialDesign>,
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub r: usize,
    pub trial_re: bool,
    pub moderator_re: bool,
    pub n_total: usize,
}

impl Design {
    pub fn new(data: &IpdDataset, spec: &ModelSpec) -> Design {
        let p = data.p();
        let d = spec.d();
        let q = 2 + p + d;
        let trial_re = spec.trial_random_effects;
        let moderator_re = spec.moderator_random_effects;
        let r = if trial_re { 2 } else { 0 } + if moderator_re { d } else { 0 };
        let mut xr = vec![0.0; q];
        let mut zr = vec![0.0; r];
        let trials = data
            .trials()
            .iter()
            .map(|tb| {
                let mut td = TrialDesign {
                    n: tb.n(),
                    xtx: DMatrix::zeros(q, q),
                    xtz: DMatrix::zeros(q, r),
                    ztz: DMatrix::zeros(r, r),
                    xty: DVector::zeros(q),
                    zty: DVector::zeros(r),
                    yty: 0.0,
                    s: vec![0.0; d],
                };
                for j in 0..tb.n() {
                    let t = tb.tf(j);
                    let y = tb.y()[j];
                    xr[0] = 1.0;
                    xr[1] = t;
                    xr[2..2 + p].copy_from_slice(tb.row(j));
                    for (k, &m) in spec.moderators.iter().enumerate() {
                        xr[2 + p + k] = t * tb.x(j, m);
                    }
                    let mut c = 0;
                    if trial_re {
                        zr[0] = 1.0;
                        zr[1] = t;
                        c = 2;
                    }
                    if moderator_re {
                        zr[c..c + d].copy_from_slice(&xr[2 + p..]);
                    }
                    for a in 0..q {
                        td.xty[a] += xr[a] * y;
                        for b in a..q {
                            td.xtx[(a, b)] += xr[a] * xr[b];
                        }
                        for b in 0..r {
                            td.xtz[(a, b)] += xr[a] * zr[b];
                        }
                    }
                    for a in 0..r {
                        td.zty[a] += zr[a] * y;
                        for b in a..r {
                            td.ztz[(a, b)] += zr[a] * zr[b];
                        }
                    }
                    td.yty += y * y;
                }
                td.xtx.fill_lower_triangle_with_upper_triangle();
                td.ztz.fill_lower_triangle_with_upper_triangle();
                for k in 0..d {
                    td.s[k] = td.xtx[(2 + p + k, 2 + p + k)];
                }
                td
            })
            .collect();
        Design {
            trials,
            p,
            d,
            q,
            r,
            trial_re,
            moderator_re,
            n_total: data.n_total(),
        }
    }

    /// Index of `gamma_k` in `θ`.
    pub fn gamma_index(&self, k: usize) -> usize {
        2 + self.p + k
    }

    /// `‖y − Xθ − Zu‖²` for one trial.
    pub fn ssr(&self, i: usize, theta: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let td = &self.trials[i];
        let mut v = td.yty - 2.0 * td.xty.dot(theta) + theta.dot(&(&td.xtx * theta));
        if self.r > 0 {
            v += -2.0 * td.zty.dot(u) + 2.0 * theta.dot(&(&td.xtz * u)) + u.dot(&(&td.ztz * u));
        }
        v.max(0.0)
    }
}
