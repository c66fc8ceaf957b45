//! The prior roster for the moderation effects `gamma_k`.
//!
//! Every g-type method places
//!
//! ```text
//! gamma_k | g_k ~ N(0, g_k / P0_k),   P0_k = Σ_obs w_obs (t ∘ x_[k])²_obs
//! w_obs = 1 / (sigma_i² f(n_i))       (observation in trial i)
//! ```
//!
//! where `f ≡ 1` for the naive mixtures (UIP, ZS, HG, HGN), `f ≡ √N` for
//! CUIP and a tuned `f(n_i | p_i)` for CZS and the CMG family. The methods
//! differ in the hyperprior on `g_k`. Horseshoe and SSVS are scale
//! mixtures that do not involve `P0_k`, and Flat puts no prior on `gamma`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::{exp, log, pow, sqrt};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::data::IpdDataset;
use crate::error::{Error, Result};
use crate::math::{beta_ln_pdf, inv_gamma_ln_pdf, midpoint_integral, normal_ln_pdf};

pub const DEFAULT_SSVS_C: f64 = 5.0;
pub const DEFAULT_SSVS_H: f64 = 100.0;

/// Upper bound of the uniform hyperprior on `b_k` (S1 and S3).
pub const B_MAX: f64 = 2.0;

/// Prior shrinkage level of the CMG hyperprior on `g_k / (1 + g_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShrinkLevel {
    /// `Beta(2, b_k)`: least shrinkage.
    S1,
    /// `Beta(1, 1)`.
    S2,
    /// `Beta(b_k, 2)`: most shrinkage.
    S3,
}

/// Sample-size tuning function `f(n_i | p_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tuning {
    /// `n_i p_i`
    N,
    /// `ln(n_i p_i)`
    Log,
    /// `n_i^{p_i}`
    Pow,
}

impl Tuning {
    /// Support of the uniform prior on `p_i` for a trial of size `n`.
    ///
    /// For `Log` the lower end is `e / n` rather than `1 / n`, which keeps
    /// `f ≥ 1` and avoids the singular prior precision as `n p → 1`.
    pub fn support(self, n: usize) -> (f64, f64) {
        let n = n as f64;
        match self {
            Tuning::N => (1.0 / n, 1.0),
            Tuning::Log => (core::f64::consts::E / n, 1.0),
            Tuning::Pow => (0.0, 1.0),
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Tuning::N => "n",
            Tuning::Log => "log",
            Tuning::Pow => "pow",
        }
    }
}

/// Evaluate `f(n | p)`.
pub fn tuning_f(kind: Tuning, n: usize, p: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "tuning parameter p = {p} for n = {n}"
        )));
    }
    match kind {
        Tuning::N => Ok(nf * p),
        Tuning::Log => {
            let np = nf * p;
            if np <= 1.0 + 1e-12 {
                return Err(Error::Domain(format!("log tuning needs n p > 1, got {np}")));
            }
            Ok(log(np))
        }
        Tuning::Pow => Ok(pow(nf, p)),
    }
}

/// The prior placed on the moderation effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorMethod {
    /// `gamma_k ∝ 1`.
    Flat,
    /// Horseshoe: `gamma_k ~ N(0, λ_k² τ²)`, `λ_k, τ ~ C⁺(0, 1)`.
    Horseshoe,
    /// Spike-and-slab mixture of `N(0, η²)` and `N(0, h η²)`,
    /// `I_k ~ Bernoulli(1/2)`, `η ~ Uniform(0, c)`.
    Ssvs { c: f64, h: f64 },
    /// Unit information prior, `g_k = N`.
    Uip,
    /// Zellner–Siow, `g_k ~ IG(1/2, N/2)`.
    ZellnerSiow,
    /// Hyper-g, `g_k / (1 + g_k) ~ Beta(1, a/2 − 1)`.
    HyperG { a: f64 },
    /// Hyper-g/N, `g_k / (g_k + N) ~ Beta(1, a/2 − 1)`.
    HyperGN { a: f64 },
    /// Calibrated UIP: `g_k = 1`, `f(n_i) = √N`.
    CalibratedUip,
    /// Calibrated ZS: `g_k ~ IG(1/2, 1/2)`, `f(n_i | p_i) = n_i p_i`.
    CalibratedZs,
    /// Calibrated mixture of g-priors.
    Cmg { level: ShrinkLevel, tuning: Tuning },
    /// Zellner's g-prior with a fixed `g` and `f ≡ 1`. Not part of the
    /// comparison roster; used for closed-form checks.
    FixedG { g: f64 },
}

/// How `g_k` is distributed a priori.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GHyper {
    Fixed(f64),
    InvGamma {
        shape: f64,
        scale: f64,
    },
    /// `g / (g + scale)` follows the given Beta law.
    Shrinkage {
        law: ShrinkageLaw,
        scale: f64,
    },
}

/// Beta law of the shrinkage factor; `S1` / `S3` depend on `b_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShrinkageLaw {
    Beta(f64, f64),
    /// `Beta(2, b)`
    S1,
    /// `Beta(b, 2)`
    S3,
}

impl ShrinkageLaw {
    pub fn params(self, b: f64) -> (f64, f64) {
        match self {
            ShrinkageLaw::Beta(x, y) => (x, y),
            ShrinkageLaw::S1 => (2.0, b),
            ShrinkageLaw::S3 => (b, 2.0),
        }
    }

    pub fn needs_b(self) -> bool {
        !matches!(self, ShrinkageLaw::Beta(..))
    }
}

/// Per-trial scaling of the g-prior precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibration {
    /// `f ≡ 1`
    Unit,
    /// `f ≡ c` for every trial.
    Constant(f64),
    Tuned(Tuning),
}

impl PriorMethod {
    pub fn ssvs() -> Self {
        PriorMethod::Ssvs {
            c: DEFAULT_SSVS_C,
            h: DEFAULT_SSVS_H,
        }
    }

    pub fn cmg(level: ShrinkLevel, tuning: Tuning) -> Self {
        PriorMethod::Cmg { level, tuning }
    }

    /// The twenty methods compared in the simulation study, in table order.
    pub fn roster() -> Vec<PriorMethod> {
        let mut v = alloc::vec![
            PriorMethod::Flat,
            PriorMethod::Horseshoe,
            PriorMethod::ssvs(),
            PriorMethod::Uip,
            PriorMethod::ZellnerSiow,
            PriorMethod::HyperG { a: 3.0 },
            PriorMethod::HyperG { a: 4.0 },
            PriorMethod::HyperGN { a: 3.0 },
            PriorMethod::HyperGN { a: 4.0 },
            PriorMethod::CalibratedUip,
            PriorMethod::CalibratedZs,
        ];
        for tuning in [Tuning::N, Tuning::Log, Tuning::Pow] {
            for level in [ShrinkLevel::S1, ShrinkLevel::S2, ShrinkLevel::S3] {
                v.push(PriorMethod::cmg(level, tuning));
            }
        }
        v
    }

    pub fn roster_names() -> String {
        PriorMethod::roster()
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorMethod::HyperG { a } | PriorMethod::HyperGN { a } if !(a > 2.0) => {
                Err(Error::Domain(format!("hyper-g requires a > 2, got {a}")))
            }
            PriorMethod::Ssvs { c, h } if !(c > 0.0 && h > 0.0) => Err(Error::Domain(format!(
                "SSVS requires c > 0 and h > 0, got c = {c}, h = {h}"
            ))),
            PriorMethod::FixedG { g } if !(g > 0.0) => {
                Err(Error::Domain(format!("fixed g must be positive, got {g}")))
            }
            _ => Ok(()),
        }
    }

    /// True for methods whose `gamma_k` prior is a (mixture of) g-prior.
    pub fn is_g_prior(&self) -> bool {
        !matches!(
            self,
            PriorMethod::Flat | PriorMethod::Horseshoe | PriorMethod::Ssvs { .. }
        )
    }

    /// Hyperprior on `g_k`, or `None` for non-g methods.
    pub fn g_hyper(&self, n_total: usize) -> Option<GHyper> {
        let n = n_total as f64;
        Some(match *self {
            PriorMethod::Flat | PriorMethod::Horseshoe | PriorMethod::Ssvs { .. } => return None,
            PriorMethod::Uip => GHyper::Fixed(n),
            PriorMethod::CalibratedUip => GHyper::Fixed(1.0),
            PriorMethod::FixedG { g } => GHyper::Fixed(g),
            PriorMethod::ZellnerSiow => GHyper::InvGamma {
                shape: 0.5,
                scale: n / 2.0,
            },
            PriorMethod::CalibratedZs => GHyper::InvGamma {
                shape: 0.5,
                scale: 0.5,
            },
            PriorMethod::HyperG { a } => GHyper::Shrinkage {
                law: ShrinkageLaw::Beta(1.0, a / 2.0 - 1.0),
                scale: 1.0,
            },
            PriorMethod::HyperGN { a } => GHyper::Shrinkage {
                law: ShrinkageLaw::Beta(1.0, a / 2.0 - 1.0),
                scale: n,
            },
            PriorMethod::Cmg { level, .. } => GHyper::Shrinkage {
                law: match level {
                    ShrinkLevel::S1 => ShrinkageLaw::S1,
                    ShrinkLevel::S2 => ShrinkageLaw::Beta(1.0, 1.0),
                    ShrinkLevel::S3 => ShrinkageLaw::S3,
                },
                scale: 1.0,
            },
        })
    }

    pub fn calibration(&self, n_total: usize) -> Calibration {
        match *self {
            PriorMethod::CalibratedUip => Calibration::Constant(sqrt(n_total as f64)),
            PriorMethod::CalibratedZs => Calibration::Tuned(Tuning::N),
            PriorMethod::Cmg { tuning, .. } => Calibration::Tuned(tuning),
            _ => Calibration::Unit,
        }
    }

    /// Whether `g_k` is random (has a proper hyperprior).
    pub fn has_proper_g_hyperprior(&self) -> bool {
        matches!(
            self.g_hyper(1),
            Some(GHyper::InvGamma { .. } | GHyper::Shrinkage { .. })
        )
    }

    /// Build a method from the individual config fields
    /// (`prior.tag`, `prior.a`, `prior.shrink_level`, `prior.tuning`,
    /// `prior.ssvs_c`, `prior.ssvs_h`).
    pub fn from_parts(
        tag: &str,
        a: Option<f64>,
        shrink_level: Option<&str>,
        tuning: Option<&str>,
        ssvs_c: Option<f64>,
        ssvs_h: Option<f64>,
    ) -> Result<PriorMethod> {
        let need = |what: &str| Error::Config(format!("prior.tag = {tag} requires prior.{what}"));
        let m = match tag.to_ascii_uppercase().as_str() {
            "FLAT" => PriorMethod::Flat,
            "HS" => PriorMethod::Horseshoe,
            "SSVS" => PriorMethod::Ssvs { c: ssvs_c.unwrap_or(DEFAULT_SSVS_C), h: ssvs_h.unwrap_or(DEFAULT_SSVS_H) },
            "UIP" => PriorMethod::Uip,
            "ZS" => PriorMethod::ZellnerSiow,
            "HG" => PriorMethod::HyperG { a: a.ok_or_else(|| need("a"))? },
            "HGN" => PriorMethod::HyperGN { a: a.ok_or_else(|| need("a"))? },
            "CUIP" => PriorMethod::CalibratedUip,
            "CZS" => {
                if let Some(t) = tuning {
                    if parse_tuning(t)? != Tuning::N {
                        return Err(Error::Config("CZS only supports prior.tuning = n".to_string()));
                    }
                }
                PriorMethod::CalibratedZs
            }
            "CMG" => PriorMethod::Cmg {
                level: parse_level(shrink_level.ok_or_else(|| need("shrink_level"))?)?,
                tuning: parse_tuning(tuning.ok_or_else(|| need("tuning"))?)?,
            },
            _ => {
                return Err(Error::Config(format!(
                    "unknown prior.tag `{tag}` (expected Flat, HS, SSVS, UIP, ZS, HG, HGN, CUIP, CZS or CMG)"
                )))
            }
        };
        m.validate()?;
        Ok(m)
    }
}

fn parse_level(s: &str) -> Result<ShrinkLevel> {
    match s.to_ascii_uppercase().as_str() {
        "S1" => Ok(ShrinkLevel::S1),
        "S2" => Ok(ShrinkLevel::S2),
        "S3" => Ok(ShrinkLevel::S3),
        _ => Err(Error::Config(format!("unknown shrink level `{s}`"))),
    }
}

fn parse_tuning(s: &str) -> Result<Tuning> {
    match s.to_ascii_lowercase().as_str() {
        "n" => Ok(Tuning::N),
        "log" => Ok(Tuning::Log),
        "pow" => Ok(Tuning::Pow),
        _ => Err(Error::Config(format!("unknown tuning function `{s}`"))),
    }
}

impl fmt::Display for PriorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMethod::Flat => f.write_str("Flat"),
            PriorMethod::Horseshoe => f.write_str("HS"),
            PriorMethod::Ssvs { .. } => f.write_str("SSVS"),
            PriorMethod::Uip => f.write_str("UIP"),
            PriorMethod::ZellnerSiow => f.write_str("ZS"),
            PriorMethod::HyperG { a } => write!(f, "HG(a={a})"),
            PriorMethod::HyperGN { a } => write!(f, "HGN(a={a})"),
            PriorMethod::CalibratedUip => f.write_str("CUIP"),
            PriorMethod::CalibratedZs => f.write_str("CZS"),
            PriorMethod::Cmg { level, tuning } => write!(f, "CMG-{level:?}-{}", tuning.suffix()),
            PriorMethod::FixedG { g } => write!(f, "G(g={g})"),
        }
    }
}

impl FromStr for PriorMethod {
    type Err = Error;

    /// Accepts the roster names (`Flat`, `HG(a=4)`, `CMG-S3-pow`, ...),
    /// ignoring case and whitespace, plus `G(g=<value>)` for a fixed g.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        let unknown = || Error::UnknownMethod {
            name: s.to_string(),
            roster: PriorMethod::roster_names(),
        };
        let param = |prefix: &str, name: &str| -> Option<f64> {
            key.strip_prefix(prefix)?
                .strip_prefix(name)?
                .strip_suffix(')')?
                .parse()
                .ok()
        };
        let m = if let Some(a) = param("hgn(", "a=") {
            PriorMethod::HyperGN { a }
        } else if let Some(a) = param("hg(", "a=") {
            PriorMethod::HyperG { a }
        } else if let Some(g) = param("g(", "g=") {
            PriorMethod::FixedG { g }
        } else if let Some(rest) = key.strip_prefix("cmg-") {
            let (lvl, tun) = rest.split_once('-').ok_or_else(unknown)?;
            PriorMethod::Cmg {
                level: parse_level(lvl).map_err(|_| unknown())?,
                tuning: parse_tuning(tun).map_err(|_| unknown())?,
            }
        } else {
            match key.as_str() {
                "flat" => PriorMethod::Flat,
                "hs" => PriorMethod::Horseshoe,
                "ssvs" => PriorMethod::ssvs(),
                "uip" => PriorMethod::Uip,
                "zs" => PriorMethod::ZellnerSiow,
                "cuip" => PriorMethod::CalibratedUip,
                "czs" => PriorMethod::CalibratedZs,
                _ => return Err(unknown()),
            }
        };
        m.validate()?;
        Ok(m)
    }
}

/// Per-observation weights `1 / (sigma_i² f(n_i))`, trials stacked in order.
pub fn lambda_star(sigma2: &[f64], f_vals: &[f64], n: &[usize]) -> Result<Vec<f64>> {
    if sigma2.len() != f_vals.len() || sigma2.len() != n.len() {
        return Err(Error::Domain(
            "sigma2, f and n must have one entry per trial".to_string(),
        ));
    }
    if let Some(bad) = sigma2.iter().chain(f_vals).find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!(
            "variances and tuning values must be positive, got {bad}"
        )));
    }
    Ok(sigma2
        .iter()
        .zip(f_vals)
        .zip(n)
        .flat_map(|((s, f), &ni)| core::iter::repeat_n(1.0 / (s * f), ni))
        .collect())
}

/// Scalar prior precision of `gamma_k`: `(1/g_k) Σ_obs w (t ∘ x_[k])²`.
/// `k` is the 0-based covariate index of the moderator.
pub fn gamma_prior_precision(k: usize, g: f64, weights: &[f64], data: &IpdDataset) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::Domain(format!("g must be positive, got {g}")));
    }
    let col = data.moderator_column(k)?;
    if weights.len() != col.len() {
        return Err(Error::Domain(format!(
            "{} weights for {} observations",
            weights.len(),
            col.len()
        )));
    }
    if col.iter().all(|&v| v == 0.0) {
        return Err(Error::DegeneratePrior(k));
    }
    Ok(col.iter().zip(weights).map(|(v, w)| w * v * v).sum::<f64>() / g)
}

/// Number of midpoints used when integrating `b ~ Uniform(0, 2)` out.
const B_QUADRATURE_POINTS: usize = 2000;

/// Log density of `g` under the method's hyperprior. `b` is the S1/S3
/// skewness parameter; when `None` for those levels, `b ~ Uniform(0, 2)`
/// is integrated out. Returns `Ok(None)` for methods with a fixed or no `g`.
pub fn log_hyperprior_g(
    method: &PriorMethod,
    g: f64,
    b: Option<f64>,
    n_total: usize,
) -> Result<Option<f64>> {
    if !(g > 0.0) {
        return Err(Error::Domain(format!("g must be positive, got {g}")));
    }
    if let Some(b) = b {
        if !(b > 0.0 && b <= B_MAX) {
            return Err(Error::Domain(format!("b must lie in (0, 2], got {b}")));
        }
    }
    let Some(hyper) = method.g_hyper(n_total) else {
        return Ok(None);
    };
    Ok(match hyper {
        GHyper::Fixed(_) => None,
        GHyper::InvGamma { shape, scale } => Some(inv_gamma_ln_pdf(g, shape, scale)),
        GHyper::Shrinkage { law, scale } => {
            // s = g/(g+c), ds/dg = c/(g+c)²
            let s = g / (g + scale);
            let jac = log(scale) - 2.0 * log(g + scale);
            match (law.needs_b(), b) {
                (false, _) | (true, Some(_)) => {
                    let (x, y) = law.params(b.unwrap_or(1.0));
                    Some(beta_ln_pdf(s, x, y) + jac)
                }
                (true, None) => {
                    let dens = midpoint_integral(
                        |bb| {
                            let (x, y) = law.params(bb);
                            exp(beta_ln_pdf(s, x, y))
                        },
                        0.0,
                        B_MAX,
                        B_QUADRATURE_POINTS,
                    ) / B_MAX;
                    Some(log(dens) + jac)
                }
            }
        }
    })
}

/// Density of `g` under the method's hyperprior (see [`log_hyperprior_g`]).
pub fn hyperprior_g_density(
    method: &PriorMethod,
    g: f64,
    b: Option<f64>,
    n_total: usize,
) -> Result<f64> {
    match log_hyperprior_g(method, g, b, n_total)? {
        Some(l) => Ok(exp(l)),
        None => Err(Error::Unsupported(format!(
            "{method} has no proper hyperprior on g"
        ))),
    }
}

/// Density of the shrinkage factor `s = g / (1 + g)` implied by the
/// method's hyperprior.
pub fn shrinkage_factor_density(
    method: &PriorMethod,
    s: f64,
    b: Option<f64>,
    n_total: usize,
) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Ok(0.0);
    }
    let g = s / (1.0 - s);
    let dens = hyperprior_g_density(method, g, b, n_total)?;
    Ok(dens / ((1.0 - s) * (1.0 - s)))
}

/// Draw the shrinkage factor `g / (1 + g)` from the method's hyperprior.
/// For S1/S3, `b` is drawn from `Uniform(0, 2)` when not supplied.
pub fn sample_prior_shrinkage<R: Rng + ?Sized>(
    method: &PriorMethod,
    b: Option<f64>,
    n_total: usize,
    rng: &mut R,
) -> Result<f64> {
    let unsupported = || Error::Unsupported(format!("{method} has no proper hyperprior on g"));
    match method.g_hyper(n_total).ok_or_else(unsupported)? {
        GHyper::Fixed(_) => Err(unsupported()),
        GHyper::InvGamma { shape, scale } => {
            // 1/g ~ Gamma(shape, rate = scale)
            let prec = Gamma::new(shape, 1.0 / scale)
                .map_err(|e| Error::Domain(e.to_string()))?
                .sample(rng);
            Ok(1.0 / (1.0 + prec))
        }
        GHyper::Shrinkage { law, scale } => {
            let b = match b {
                Some(b) => b,
                None => rng.random::<f64>() * B_MAX,
            };
            let (x, y) = law.params(b);
            let s = Beta::new(x, y)
                .map_err(|e| Error::Domain(e.to_string()))?
                .sample(rng);
            // g = scale s/(1-s); g/(1+g) = scale s / (1 - s + scale s)
            Ok(scale * s / (1.0 - s + scale * s))
        }
    }
}

/// Latent state needed to evaluate a non-g prior on one `gamma_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaLatents {
    Flat,
    Horseshoe { lambda: f64, tau: f64 },
    Ssvs { indicator: bool, eta: f64 },
}

/// Log prior density of `gamma_k` under Flat, HS or SSVS.
pub fn log_prior_gamma_non_g(
    method: &PriorMethod,
    gamma: f64,
    latents: &GammaLatents,
) -> Result<f64> {
    match (method, latents) {
        (PriorMethod::Flat, _) => Ok(0.0),
        (PriorMethod::Horseshoe, &GammaLatents::Horseshoe { lambda, tau }) => {
            if !(lambda > 0.0 && tau > 0.0) {
                return Err(Error::Domain(format!(
                    "horseshoe scales must be positive (λ = {lambda}, τ = {tau})"
                )));
            }
            Ok(normal_ln_pdf(gamma, lambda * lambda * tau * tau))
        }
        (PriorMethod::Ssvs { c, h }, &GammaLatents::Ssvs { indicator, eta }) => {
            if !(eta > 0.0 && eta < *c) {
                return Err(Error::Domain(format!(
                    "SSVS requires 0 < η < {c}, got {eta}"
                )));
            }
            let var = if indicator { h * eta * eta } else { eta * eta };
            Ok(normal_ln_pdf(gamma, var))
        }
        (m, l) => Err(Error::Domain(format!(
            "latents {l:?} do not match method {m}"
        ))),
    }
}
