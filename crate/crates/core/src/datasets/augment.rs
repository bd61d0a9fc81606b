//! Weak and strong feature augmentation, the desk-scale analog of the
//! image augmentations used at paper scale.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    Weak,
    Strong,
}

/// Weak = small additive Gaussian noise; strong = larger noise plus
/// independent coordinate dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Augmenter {
    pub sigma_weak: f64,
    pub sigma_strong: f64,
    pub drop_prob: f64,
}

impl Default for Augmenter {
    fn default() -> Self {
        Augmenter {
            sigma_weak: 0.1,
            sigma_strong: 0.5,
            drop_prob: 0.15,
        }
    }
}

impl Augmenter {
    pub fn apply<R: Rng + ?Sized>(
        &self,
        features: &[f64],
        mode: AugmentMode,
        rng: &mut R,
    ) -> Vec<f64> {
        match mode {
            AugmentMode::Weak => features
                .iter()
                .map(|&v| v + self.sigma_weak * normal(rng))
                .collect(),
            AugmentMode::Strong => features
                .iter()
                .map(|&v| {
                    let noisy = v + self.sigma_strong * normal(rng);
                    if rng.random_range(0.0..1.0) < self.drop_prob {
                        0.0
                    } else {
                        noisy
                    }
                })
                .collect(),
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_weak_is_the_identity() {
        let aug = Augmenter {
            sigma_weak: 0.0,
            ..Augmenter::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![1.0, -2.0, 0.5];
        assert_eq!(aug.apply(&x, AugmentMode::Weak, &mut rng), x);
    }

    #[test]
    fn full_dropout_zeroes_everything() {
        let aug = Augmenter {
            drop_prob: 1.0,
            ..Augmenter::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = aug.apply(&[3.0, -4.0], AugmentMode::Strong, &mut rng);
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn weak_noise_variance_matches_sigma_squared() {
        // Monte-Carlo oracle: the sample variance of sigma*N(0,1) over 1e5
        // draws is within a few percent of sigma^2.
        let aug = Augmenter::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let out = aug.apply(&[0.0], AugmentMode::Weak, &mut rng);
            sum += out[0];
            sum_sq += out[0] * out[0];
        }
        let mean = sum / trials as f64;
        let var = sum_sq / trials as f64 - mean * mean;
        let rel = (var - aug.sigma_weak * aug.sigma_weak).abs() / (aug.sigma_weak * aug.sigma_weak);
        assert!(rel < 0.05, "relative variance error {rel}");
    }
}
