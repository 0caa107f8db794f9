use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Behavior-policy exploration: ε-greedy for discrete actions, Gaussian
/// action noise (the entropy/noise scale) for continuous ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    EpsGreedy { start: f64, end: f64, fraction: f64 },
    Gaussian { std: f64 },
}

impl Exploration {
    pub fn epsilon_at(&self, iter: usize, max_iters: usize) -> f64 {
        match self {
            Exploration::EpsGreedy { start, end, fraction } => {
                let span = (fraction * max_iters as f64).max(1.0);
                let t = (iter as f64 / span).min(1.0);
                start + (end - start) * t
            }
            Exploration::Gaussian { .. } => 0.0,
        }
    }

    pub fn gaussian_std(&self) -> f64 {
        match self {
            Exploration::Gaussian { std } => *std,
            Exploration::EpsGreedy { .. } => 0.0,
        }
    }
}

/// All knobs of one adversarial estimation run. Everything that affects the
/// numbers is in here and hashed into `digest()`, so identical configs
/// reproduce identical results bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Adversarial tuning parameter α ≥ 0.
    pub alpha: f64,
    /// λ1: policy update learning rate.
    pub lr_policy: f64,
    /// λ2: encoder/decoder update learning rate.
    pub lr_enc_dec: f64,
    pub lr_critic: f64,
    /// Batch size B.
    pub batch_size: usize,
    pub max_iters: usize,
    /// Rollouts behind the final return estimate and admissibility test.
    pub eval_rollouts: usize,
    /// Rollouts behind the during-training evaluation curve.
    pub curve_eval_rollouts: usize,
    pub admissibility_tolerance: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub exploration: Exploration,
    pub seed: u64,
    /// Environment transitions collected per task per iteration.
    pub env_steps_per_iter: usize,
    /// Evaluate / log the curve every this many iterations.
    pub eval_every: usize,
    /// Convergence window, in evaluations: converged when the moving average
    /// of both return curves moved < 1% between adjacent windows.
    pub convergence_window: usize,
    pub target_update_every: usize,
    /// Transitions required in a buffer before updates begin.
    pub warmup_steps: usize,
    pub hidden_width: usize,
    pub critic_hidden_layers: usize,
    pub critic_updates_per_iter: usize,
}

impl EstimatorConfig {
    /// Defaults for the discrete Q-learning estimator: batch 1000, 1000
    /// iterations, ε decaying 1.0 → 0.05 over the first third of training.
    pub fn q_learning_defaults(seed: u64) -> Self {
        EstimatorConfig {
            alpha: 1.0,
            lr_policy: 3e-3,
            lr_enc_dec: 3e-3,
            lr_critic: 1e-3,
            batch_size: 1000,
            max_iters: 1000,
            eval_rollouts: 20,
            curve_eval_rollouts: 6,
            admissibility_tolerance: 0.05,
            gamma: 0.99,
            replay_capacity: 50_000,
            exploration: Exploration::EpsGreedy { start: 1.0, end: 0.05, fraction: 1.0 / 3.0 },
            seed,
            env_steps_per_iter: 128,
            eval_every: 10,
            convergence_window: 50,
            target_update_every: 100,
            warmup_steps: 1000,
            hidden_width: 64,
            critic_hidden_layers: 2,
            critic_updates_per_iter: 1,
        }
    }

    /// Defaults for the continuous actor-critic estimator: batch 200, up to
    /// 50,000 iterations, Gaussian exploration noise.
    pub fn actor_critic_defaults(seed: u64) -> Self {
        EstimatorConfig {
            alpha: 1.0,
            lr_policy: 3e-4,
            lr_enc_dec: 3e-4,
            lr_critic: 1e-3,
            batch_size: 200,
            max_iters: 50_000,
            eval_rollouts: 20,
            curve_eval_rollouts: 4,
            admissibility_tolerance: 0.05,
            gamma: 0.99,
            replay_capacity: 100_000,
            exploration: Exploration::Gaussian { std: 0.1 },
            seed,
            env_steps_per_iter: 4,
            eval_every: 50,
            convergence_window: 50,
            target_update_every: 100,
            warmup_steps: 1000,
            hidden_width: 64,
            critic_hidden_layers: 2,
            critic_updates_per_iter: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 {
            return Err(Error::Config("alpha must be >= 0".into()));
        }
        for (name, v) in [
            ("lr_policy", self.lr_policy),
            ("lr_enc_dec", self.lr_enc_dec),
            ("lr_critic", self.lr_critic),
        ] {
            if v <= 0.0 {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        if self.batch_size == 0 || self.max_iters == 0 || self.eval_rollouts == 0 {
            return Err(Error::Config("counts must be >= 1".into()));
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::Config("batch size exceeds replay capacity".into()));
        }
        if self.admissibility_tolerance < 0.0 {
            return Err(Error::Config("admissibility tolerance must be >= 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must be in (0, 1]".into()));
        }
        if self.env_steps_per_iter == 0 || self.eval_every == 0 || self.convergence_window == 0 {
            return Err(Error::Config("loop cadence fields must be >= 1".into()));
        }
        if self.hidden_width == 0 {
            return Err(Error::Config("hidden width must be >= 1".into()));
        }
        if let Exploration::EpsGreedy { start, end, fraction } = self.exploration {
            if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) || fraction <= 0.0 {
                return Err(Error::Config("invalid epsilon schedule".into()));
            }
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self).expect("config serializes").as_bytes());
        hasher.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_alpha_seed(&self, alpha: f64, seed: u64) -> Self {
        let mut c = self.clone();
        c.alpha = alpha;
        c.seed = seed;
        c
    }
}

/// splitmix64-style derivation for decorrelated child seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EstimatorConfig::q_learning_defaults(0).validate().unwrap();
        EstimatorConfig::actor_critic_defaults(0).validate().unwrap();
    }

    #[test]
    fn epsilon_schedule_decays_over_first_third() {
        let c = EstimatorConfig::q_learning_defaults(0);
        let e0 = c.exploration.epsilon_at(0, 900);
        let e_third = c.exploration.epsilon_at(300, 900);
        let e_end = c.exploration.epsilon_at(899, 900);
        assert!((e0 - 1.0).abs() < 1e-12);
        assert!((e_third - 0.05).abs() < 1e-9);
        assert!((e_end - 0.05).abs() < 1e-12);
    }

    #[test]
    fn digest_tracks_fields() {
        let a = EstimatorConfig::q_learning_defaults(0);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.alpha = 2.0;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn batch_must_fit_replay() {
        let mut c = EstimatorConfig::q_learning_defaults(0);
        c.replay_capacity = 10;
        assert!(c.validate().is_err());
    }
}
