use std::sync::Arc;

use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::taskcore::space::{Elem, Space};

const ROW_SUM_TOL: f64 = 1e-12;

/// Sparse probability row: (index, probability) pairs, probabilities > 0,
/// summing to 1 within `ROW_SUM_TOL`.
pub type ProbRow = Vec<(usize, f64)>;

fn check_row(row: &ProbRow, domain: usize, what: &str) -> Result<()> {
    let mut sum = 0.0;
    for &(i, p) in row {
        if i >= domain {
            return Err(Error::Config(format!("{what}: index {i} out of range {domain}")));
        }
        if p < 0.0 {
            return Err(Error::Config(format!("{what}: negative probability {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::Config(format!("{what}: row sums to {sum}, not 1")));
    }
    Ok(())
}

/// Sample an index from a sparse probability row.
pub fn sample_row(row: &ProbRow, rng: &mut ChaCha12Rng) -> usize {
    use rand::Rng;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(i, p) in row {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.last().map(|&(i, _)| i).unwrap_or(0)
}

/// Tabular POMDP kernels over finite spaces.
#[derive(Debug, Clone)]
pub struct TabularModel {
    /// `transition[s][a]` = distribution over next states.
    pub transition: Vec<Vec<ProbRow>>,
    /// `sensor[s]` = distribution over observations.
    pub sensor: Vec<ProbRow>,
    /// `reward[s][a]`, nonnegative.
    pub reward: Vec<Vec<f64>>,
    /// Initial state distribution.
    pub init: ProbRow,
    /// Absorbing failure/goal states; rollouts stop on entering them.
    pub terminal: Vec<bool>,
}

/// Closed-form dynamics for continuous-state tasks. Implementations must be
/// pure given the rng, so rollouts replay bit-identically per seed.
pub trait Simulator: Send + Sync {
    fn sample_init(&self, rng: &mut ChaCha12Rng) -> Vec<f64>;
    fn observe(&self, state: &[f64], rng: &mut ChaCha12Rng) -> Elem;
    /// Returns (next state, reward). `reward` must be nonnegative.
    fn step(&self, state: &[f64], action: &Elem, rng: &mut ChaCha12Rng) -> (Vec<f64>, f64);
    fn terminal(&self, state: &[f64]) -> bool;
    /// Stable description of the generator parameters, hashed into the digest.
    fn params_digest(&self) -> String;
}

/// The task model: tabular kernels or a simulator.
#[derive(Clone)]
pub enum Model {
    Tabular(Arc<TabularModel>),
    Sim(Arc<dyn Simulator>),
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Model::Tabular(_) => write!(f, "Model::Tabular"),
            Model::Sim(s) => write!(f, "Model::Sim({})", s.params_digest()),
        }
    }
}

/// A task: POMDP dynamics, sensing, nonnegative reward, initial distribution,
/// success threshold, and a finite horizon with absorbing terminal states.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub name: String,
    pub states: Space,
    pub actions: Space,
    pub observations: Space,
    pub model: Model,
    /// Success threshold `R*`; the clipped return never exceeds it.
    pub success_threshold: f64,
    /// Horizon `T` in time steps.
    pub horizon: usize,
    digest: String,
}

impl TaskSpec {
    /// Build a finite task from tabular kernels, validating the invariants:
    /// rows sum to 1 within 1e-12, rewards nonnegative, `R*` > 0.
    pub fn tabular(
        name: impl Into<String>,
        n_states: usize,
        n_actions: usize,
        n_observations: usize,
        model: TabularModel,
        success_threshold: f64,
        horizon: usize,
    ) -> Result<Self> {
        let name = name.into();
        if success_threshold <= 0.0 {
            return Err(Error::Config("success threshold R* must be > 0".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if model.transition.len() != n_states
            || model.sensor.len() != n_states
            || model.reward.len() != n_states
            || model.terminal.len() != n_states
        {
            return Err(Error::Config("kernel row counts do not match |S|".into()));
        }
        for (s, rows) in model.transition.iter().enumerate() {
            if rows.len() != n_actions {
                return Err(Error::Config(format!("transition[{s}] has wrong action count")));
            }
            for (a, row) in rows.iter().enumerate() {
                check_row(row, n_states, &format!("transition[{s}][{a}]"))?;
            }
        }
        for (s, row) in model.sensor.iter().enumerate() {
            check_row(row, n_observations, &format!("sensor[{s}]"))?;
        }
        for (s, rewards) in model.reward.iter().enumerate() {
            if rewards.len() != n_actions {
                return Err(Error::Config(format!("reward[{s}] has wrong action count")));
            }
            for &r in rewards {
                if r < 0.0 {
                    return Err(Error::Config(format!("reward[{s}] contains negative {r}")));
                }
            }
        }
        check_row(&model.init, n_states, "init")?;

        let digest = digest_tabular(&name, &model, success_threshold, horizon);
        Ok(TaskSpec {
            name,
            states: Space::finite(n_states)?,
            actions: Space::finite(n_actions)?,
            observations: Space::finite(n_observations)?,
            model: Model::Tabular(Arc::new(model)),
            success_threshold,
            horizon,
            digest,
        })
    }

    /// Build a simulated task over continuous states.
    pub fn simulated(
        name: impl Into<String>,
        states: Space,
        actions: Space,
        observations: Space,
        sim: Arc<dyn Simulator>,
        success_threshold: f64,
        horizon: usize,
    ) -> Result<Self> {
        let name = name.into();
        if success_threshold <= 0.0 {
            return Err(Error::Config("success threshold R* must be > 0".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        let mut hasher = Sha256::new();
        hasher.update(name.as_bytes());
        hasher.update(sim.params_digest().as_bytes());
        hasher.update(success_threshold.to_le_bytes());
        hasher.update((horizon as u64).to_le_bytes());
        let digest = hex_digest(hasher);
        Ok(TaskSpec {
            name,
            states,
            actions,
            observations,
            model: Model::Sim(sim),
            success_threshold,
            horizon,
            digest,
        })
    }

    /// A copy of this task with a different success threshold (used by
    /// calibration; tasks are otherwise immutable).
    pub fn with_success_threshold(&self, threshold: f64) -> Result<Self> {
        if threshold <= 0.0 {
            return Err(Error::Config("success threshold R* must be > 0".into()));
        }
        let mut t = self.clone();
        t.success_threshold = threshold;
        let mut hasher = Sha256::new();
        hasher.update(t.digest.as_bytes());
        hasher.update(threshold.to_le_bytes());
        t.digest = hex_digest(hasher);
        Ok(t)
    }

    pub fn is_finite(&self) -> bool {
        self.states.is_finite() && self.actions.is_finite() && self.observations.is_finite()
    }

    pub fn tabular_model(&self) -> Result<&TabularModel> {
        match &self.model {
            Model::Tabular(m) => Ok(m),
            Model::Sim(_) => Err(Error::Unsupported(format!(
                "task '{}' has no tabular kernels",
                self.name
            ))),
        }
    }

    /// Canonical parameter digest embedded in result records.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}

fn digest_tabular(name: &str, m: &TabularModel, r_star: f64, horizon: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(name.as_bytes());
    for rows in &m.transition {
        for row in rows {
            for &(i, p) in row {
                hasher.update((i as u64).to_le_bytes());
                hasher.update(p.to_le_bytes());
            }
        }
    }
    for row in &m.sensor {
        for &(i, p) in row {
            hasher.update((i as u64).to_le_bytes());
            hasher.update(p.to_le_bytes());
        }
    }
    for rewards in &m.reward {
        for &r in rewards {
            hasher.update(r.to_le_bytes());
        }
    }
    for &(i, p) in &m.init {
        hasher.update((i as u64).to_le_bytes());
        hasher.update(p.to_le_bytes());
    }
    for &t in &m.terminal {
        hasher.update([t as u8]);
    }
    hasher.update(r_star.to_le_bytes());
    hasher.update((horizon as u64).to_le_bytes());
    hex_digest(hasher)
}

fn hex_digest(hasher: Sha256) -> String {
    let out = hasher.finalize();
    out.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_chain() -> TaskSpec {
        // 1 state, 1 action, 1 observation, reward 1 every step.
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)]]],
            sensor: vec![vec![(0, 1.0)]],
            reward: vec![vec![1.0]],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        TaskSpec::tabular("chain", 1, 1, 1, model, 10.0, 3).unwrap()
    }

    #[test]
    fn tabular_validation() {
        let t = unit_chain();
        assert!(t.is_finite());
        assert_eq!(t.horizon, 3);
    }

    #[test]
    fn rejects_unnormalized_rows() {
        let model = TabularModel {
            transition: vec![vec![vec![(0, 0.5)]]],
            sensor: vec![vec![(0, 1.0)]],
            reward: vec![vec![1.0]],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        assert!(TaskSpec::tabular("bad", 1, 1, 1, model, 1.0, 1).is_err());
    }

    #[test]
    fn rejects_negative_reward() {
        let model = TabularModel {
            transition: vec![vec![vec![(0, 1.0)]]],
            sensor: vec![vec![(0, 1.0)]],
            reward: vec![vec![-0.5]],
            init: vec![(0, 1.0)],
            terminal: vec![false],
        };
        assert!(TaskSpec::tabular("bad", 1, 1, 1, model, 1.0, 1).is_err());
    }

    #[test]
    fn digest_changes_with_parameters() {
        let a = unit_chain();
        let b = a.with_success_threshold(5.0).unwrap();
        assert_ne!(a.digest(), b.digest());
    }
}
