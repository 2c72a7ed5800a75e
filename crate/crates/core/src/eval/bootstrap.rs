use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const SIGN_FLIP_ROUNDS: usize = 10_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BootstrapError {
    #[error("sample size {sample_size} exceeds the {available} available sections")]
    SampleTooLarge { sample_size: usize, available: usize },
    #[error("need at least one sample")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean_a: f64,
    pub mean_b: f64,
    pub p_value: f64,
    /// Paired `(a, b)` scores of every sample.
    pub samples: Vec<(f64, f64)>,
}

/// Paired bootstrap over sections: each round draws `sample_size` distinct
/// section indices and scores both systems on them with `score`. The p-value
/// comes from [`sign_flip_p_value`] on the paired differences.
pub fn bootstrap_compare<R: Rng>(
    n_sections: usize,
    n_samples: usize,
    sample_size: usize,
    mut score: impl FnMut(&[usize]) -> (f64, f64),
    rng: &mut R,
) -> Result<BootstrapResult, BootstrapError> {
    if sample_size > n_sections {
        return Err(BootstrapError::SampleTooLarge {
            sample_size,
            available: n_sections,
        });
    }
    if n_samples == 0 {
        return Err(BootstrapError::NoSamples);
    }
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut idx = sample(rng, n_sections, sample_size).into_vec();
        idx.sort_unstable();
        samples.push(score(&idx));
    }
    let n = n_samples as f64;
    let mean_a = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_b = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let diffs: Vec<f64> = samples.iter().map(|(a, b)| b - a).collect();
    let p_value = sign_flip_p_value(&diffs, SIGN_FLIP_ROUNDS, rng);
    Ok(BootstrapResult {
        mean_a,
        mean_b,
        p_value,
        samples,
    })
}

/// Two-sided Monte Carlo paired sign-flip test on the mean difference:
/// `(#{|mean(s * d)| >= |mean(d)|} + 1) / (rounds + 1)` over random signs `s`.
pub fn sign_flip_p_value<R: Rng>(diffs: &[f64], rounds: usize, rng: &mut R) -> f64 {
    if diffs.is_empty() {
        return 1.0;
    }
    let n = diffs.len() as f64;
    let observed = (diffs.iter().sum::<f64>() / n).abs();
    // tolerance so that exact ties survive summation-order rounding
    let tol = 1e-12 * (1.0 + observed);
    let mut extreme = 0usize;
    for _ in 0..rounds {
        let s: f64 = diffs.iter().map(|&d| if rng.random::<bool>() { d } else { -d }).sum();
        if (s / n).abs() >= observed - tol {
            extreme += 1;
        }
    }
    (extreme + 1) as f64 / (rounds + 1) as f64
}
