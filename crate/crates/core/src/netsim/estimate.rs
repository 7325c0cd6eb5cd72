use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Seed of trial `i`, derived with splitmix64.
pub fn trial_seed(base: u64, i: u64) -> u64 {
    let mut z = base.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
    pub accepted: usize,
}

impl Estimate {
    pub fn from_counts(accepted: usize, trials: usize) -> Self {
        let (lo, hi) = wilson_interval(accepted, trials);
        Estimate {
            p_hat: if trials == 0 { 0.0 } else { accepted as f64 / trials as f64 },
            ci_low: lo,
            ci_high: hi,
            trials,
            accepted,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Runs `trial(seed_i)` for `trials` derived seeds and counts acceptances.
pub fn estimate_acceptance<F>(trial: F, trials: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(u64) -> Result<bool> + Sync,
{
    let accepted = (0..trials as u64)
        .into_par_iter()
        .map(|i| trial(trial_seed(seed, i)).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(Estimate::from_counts(accepted, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wilson_reference_values() {
        // 50/100: centre 0.5, half-width z·sqrt(.25/100 + z²/40000)/(1 + z²/100).
        let (lo, hi) = wilson_interval(50, 100);
        let z = WILSON_Z;
        let half = z * (0.25f64 / 100.0 + z * z / 40000.0).sqrt() / (1.0 + z * z / 100.0);
        assert!((lo - (0.5 - half)).abs() < 1e-12);
        assert!((hi - (0.5 + half)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(hi == 1.0 && lo < 1.0);
    }

    #[test]
    fn deterministic_accept() {
        let e = estimate_acceptance(|_| Ok(true), 100, 1).unwrap();
        assert_eq!(e.p_hat, 1.0);
        assert_eq!(e.ci_high, 1.0);
    }

    #[test]
    fn fair_coin() {
        let e = estimate_acceptance(
            |s| Ok(ChaCha8Rng::seed_from_u64(s).random::<bool>()),
            10_000,
            7,
        )
        .unwrap();
        assert!(e.contains(0.5));
        let again = estimate_acceptance(
            |s| Ok(ChaCha8Rng::seed_from_u64(s).random::<bool>()),
            10_000,
            7,
        )
        .unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }
}
