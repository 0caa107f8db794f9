use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::advest::config::EstimatorConfig;
use crate::advest::nets::MapNet;
use crate::complexity::{ComplexityResult, Method, PairRef, PolicyRef, RESULT_SCHEMA};
use crate::diffnet::MlpNet;
use crate::error::{Error, Result};
use crate::taskcore::{featurize, sample_row, Elem, Model, ReturnEstimate, TaskSpec};

/// Persistent environment stepper used by the collection loops: keeps the
/// current state and its sampled observation, tracks horizon truncation.
pub(crate) struct EnvCursor<'t> {
    task: &'t TaskSpec,
    state: EnvState,
    pub current_obs: Elem,
    steps: usize,
    pub done: bool,
}

enum EnvState {
    Tab(usize),
    Sim(Vec<f64>),
}

impl<'t> EnvCursor<'t> {
    pub fn new(task: &'t TaskSpec, rng: &mut ChaCha12Rng) -> Result<Self> {
        let mut cursor = EnvCursor {
            task,
            state: EnvState::Tab(0),
            current_obs: Elem::Discrete(0),
            steps: 0,
            done: false,
        };
        cursor.reset(rng)?;
        Ok(cursor)
    }

    pub fn reset(&mut self, rng: &mut ChaCha12Rng) -> Result<()> {
        self.steps = 0;
        match &self.task.model {
            Model::Tabular(m) => {
                let s = sample_row(&m.init, rng);
                self.done = m.terminal[s];
                self.current_obs = Elem::Discrete(sample_row(&m.sensor[s], rng));
                self.state = EnvState::Tab(s);
            }
            Model::Sim(sim) => {
                let s = sim.sample_init(rng);
                self.done = sim.terminal(&s);
                self.current_obs = sim.observe(&s, rng);
                self.state = EnvState::Sim(s);
            }
        }
        Ok(())
    }

    pub fn obs_feat(&self) -> Result<Vec<f64>> {
        featurize(&self.task.observations, &self.current_obs)
    }

    /// Take one step: returns (reward, next observation features, done) and
    /// advances the cursor. `done` covers both terminal states and horizon
    /// truncation.
    pub fn step(&mut self, action: &Elem, rng: &mut ChaCha12Rng) -> Result<(f64, Vec<f64>, bool)> {
        if self.done {
            return Err(Error::Training("stepping a finished episode".into()));
        }
        self.steps += 1;
        let (reward, next_obs, terminal) = match &self.task.model {
            Model::Tabular(m) => {
                let s = match self.state {
                    EnvState::Tab(s) => s,
                    EnvState::Sim(_) => unreachable!(),
                };
                let a = action.index()?;
                let reward = m.reward[s][a];
                let s2 = sample_row(&m.transition[s][a], rng);
                let obs = Elem::Discrete(sample_row(&m.sensor[s2], rng));
                self.state = EnvState::Tab(s2);
                (reward, obs, m.terminal[s2])
            }
            Model::Sim(sim) => {
                let s = match &self.state {
                    EnvState::Sim(s) => s.clone(),
                    EnvState::Tab(_) => unreachable!(),
                };
                let (s2, reward) = sim.step(&s, action, rng);
                let obs = sim.observe(&s2, rng);
                let terminal = sim.terminal(&s2);
                self.state = EnvState::Sim(s2);
                (reward, obs, terminal)
            }
        };
        self.done = terminal || self.steps >= self.task.horizon;
        let next_feat = featurize(&self.task.observations, &next_obs)?;
        self.current_obs = next_obs;
        Ok((reward, next_feat, self.done))
    }
}

/// One logged point of a training run: evaluated returns and the latest
/// step-1/step-2 objective values.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CurvePoint {
    pub iter: usize,
    pub r2: f64,
    pub r1_composed: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Convergence detector: both return curves' moving averages changed by
/// less than 1% between the last two windows.
pub(crate) struct ConvergenceTracker {
    window: usize,
    r2: Vec<f64>,
    r1: Vec<f64>,
}

impl ConvergenceTracker {
    pub fn new(window: usize) -> Self {
        ConvergenceTracker { window, r2: Vec::new(), r1: Vec::new() }
    }

    pub fn push(&mut self, r2: f64, r1: f64) {
        self.r2.push(r2);
        self.r1.push(r1);
    }

    fn curve_converged(values: &[f64], w: usize) -> bool {
        if values.len() < 2 * w {
            return false;
        }
        let last: f64 = values[values.len() - w..].iter().sum::<f64>() / w as f64;
        let prev: f64 =
            values[values.len() - 2 * w..values.len() - w].iter().sum::<f64>() / w as f64;
        (last - prev).abs() / prev.abs().max(1e-9) < 0.01
    }

    pub fn converged(&self) -> bool {
        Self::curve_converged(&self.r2, self.window) && Self::curve_converged(&self.r1, self.window)
    }
}

/// A finished adversarial estimation run: the result record plus the trained
/// triple and the training curve, so the value can be recomputed from the
/// checkpoints.
#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub result: ComplexityResult,
    pub pi2: MlpNet,
    pub h: MapNet,
    pub g: MapNet,
    pub curve: Vec<CurvePoint>,
    pub r1_final: ReturnEstimate,
    pub r2_final: ReturnEstimate,
    pub iters_run: usize,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_result(
    config: &EstimatorConfig,
    task1: &TaskSpec,
    task2: &TaskSpec,
    arch_note: &str,
    value: f64,
    inner_admissible: bool,
    pi2: &MlpNet,
    h: &MapNet,
    g: &MapNet,
) -> ComplexityResult {
    let mut hasher = Sha256::new();
    hasher.update(config.digest().as_bytes());
    hasher.update(arch_note.as_bytes());
    hasher.update(task1.digest().as_bytes());
    hasher.update(task2.digest().as_bytes());
    let config_digest: String =
        hasher.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect();
    ComplexityResult {
        schema: RESULT_SCHEMA,
        value,
        method: Method::Adversarial,
        attaining_policy: Some(PolicyRef::Checkpoint { digest: crate::advest::nets::net_digest(pi2) }),
        attaining_pair: Some(PairRef::Checkpoints { encoder: h.digest(), decoder: g.digest() }),
        alpha: Some(config.alpha),
        seed: Some(config.seed),
        inner_admissible,
        config_digest,
        task1_digest: task1.digest().to_string(),
        task2_digest: task2.digest().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn tracker_needs_two_full_windows() {
        let mut t = ConvergenceTracker::new(3);
        for _ in 0..5 {
            t.push(1.0, 1.0);
            assert!(!t.converged());
        }
        t.push(1.0, 1.0);
        assert!(t.converged());
    }

    #[test]
    fn tracker_sees_movement() {
        let mut t = ConvergenceTracker::new(3);
        for i in 0..6 {
            t.push(i as f64 * 10.0, 1.0);
        }
        assert!(!t.converged());
    }

    #[test]
    fn cursor_truncates_at_horizon() {
        let task = crate::envs::toy::matching_task();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut cursor = EnvCursor::new(&task, &mut rng).unwrap();
        assert!(!cursor.done);
        let (_, _, done) = cursor.step(&Elem::Discrete(0), &mut rng).unwrap();
        assert!(done, "horizon 1 task finishes after one step");
        assert!(cursor.step(&Elem::Discrete(0), &mut rng).is_err());
        cursor.reset(&mut rng).unwrap();
        assert!(!cursor.done);
    }
}
