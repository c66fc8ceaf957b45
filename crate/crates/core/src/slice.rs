//! Univariate slice sampling (Neal, 2003) on the log scale.

use libm::log;
use rand::Rng;

/// Hard cap on shrinkage iterations; reaching it means the log density is
/// not finite at the current point.
const MAX_SHRINK: usize = 200;

/// One slice-sampling update on a bounded interval `(lo, hi)`, starting
/// from the whole interval and shrinking towards `x0`.
pub fn slice_bounded<R, F>(x0: f64, lo: f64, hi: f64, log_f: F, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let level = log_f(x0) + log(1.0 - rng.random::<f64>());
    let (mut l, mut r) = (lo, hi);
    for _ in 0..MAX_SHRINK {
        let x1 = l + rng.random::<f64>() * (r - l);
        if x1 > lo && x1 < hi && log_f(x1) > level {
            return x1;
        }
        if x1 < x0 {
            l = x1;
        } else {
            r = x1;
        }
    }
    x0
}

/// One slice-sampling update on the real line using stepping out with
/// initial width `w` (at most `max_steps` expansions per side).
pub fn slice_stepping_out<R, F>(x0: f64, w: f64, max_steps: usize, log_f: F, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let level = log_f(x0) + log(1.0 - rng.random::<f64>());
    let mut l = x0 - w * rng.random::<f64>();
    let mut r = l + w;
    let j = (max_steps as f64 * rng.random::<f64>()) as usize;
    let mut k = max_steps - 1 - j;
    let mut j = j;
    while j > 0 && log_f(l) > level {
        l -= w;
        j -= 1;
    }
    while k > 0 && log_f(r) > level {
        r += w;
        k -= 1;
    }
    for _ in 0..MAX_SHRINK {
        let x1 = l + rng.random::<f64>() * (r - l);
        if log_f(x1) > level {
            return x1;
        }
        if x1 < x0 {
            l = x1;
        } else {
            r = x1;
        }
    }
    x0
}
