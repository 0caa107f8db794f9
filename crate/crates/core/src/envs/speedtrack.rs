use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::advest::{train_single_actor_critic, EstimatorConfig};
use crate::error::{Error, Result};
use crate::taskcore::{Elem, ReturnEstimate, Simulator, Space, TaskSpec};

/// 1-D point-mass speed tracking: bounded force, mild drag, reward
/// max(0, 1 - |v_t - v| - penalty * a^2) per step.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SpeedTrackParams {
    pub target_speed: f64,
    pub horizon: usize,
    pub force_max: f64,
    pub drag: f64,
    pub dt: f64,
    /// Trial stops when |velocity| exceeds this bound.
    pub velocity_bound: f64,
    /// Weight on the squared-action reward penalty.
    pub action_penalty: f64,
    pub init_noise: f64,
}

impl SpeedTrackParams {
    pub fn new(target_speed: f64) -> Self {
        SpeedTrackParams {
            target_speed,
            horizon: 1000,
            force_max: 2.0,
            drag: 0.5,
            dt: 0.05,
            velocity_bound: 3.0,
            action_penalty: 0.001,
            init_noise: 0.05,
        }
    }
}

/// State (position, velocity); the observation is the velocity alone, which
/// determines the reward.
#[derive(Debug, Clone)]
pub struct SpeedTrackSim {
    pub params: SpeedTrackParams,
}

impl SpeedTrackSim {
    pub fn reward(&self, velocity: f64, action: f64) -> f64 {
        let p = &self.params;
        (1.0 - (velocity - p.target_speed).abs() - p.action_penalty * action * action).max(0.0)
    }
}

impl Simulator for SpeedTrackSim {
    fn sample_init(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let e = self.params.init_noise;
        vec![0.0, rng.gen_range(-e..e)]
    }

    fn observe(&self, state: &[f64], _rng: &mut ChaCha12Rng) -> Elem {
        Elem::Vector(vec![state[1]])
    }

    fn step(&self, state: &[f64], action: &Elem, _rng: &mut ChaCha12Rng) -> (Vec<f64>, f64) {
        let p = &self.params;
        let a = match action {
            Elem::Vector(v) => v[0].clamp(-p.force_max, p.force_max),
            Elem::Discrete(_) => 0.0,
        };
        let reward = self.reward(state[1], a);
        let vel = state[1] + p.dt * (a - p.drag * state[1]);
        let pos = state[0] + p.dt * vel;
        (vec![pos, vel], reward)
    }

    fn terminal(&self, state: &[f64]) -> bool {
        state[1].abs() > self.params.velocity_bound
    }

    fn params_digest(&self) -> String {
        format!("{:?}", self.params)
    }
}

/// Build the tracking task for target speed v. The success threshold starts
/// at the horizon (an upper bound; per-step reward <= 1) and is replaced by
/// [`calibrate_success_threshold`] before any relative-complexity run.
pub fn make_speed_tracker(target_speed: f64) -> Result<TaskSpec> {
    if !(0.3..=2.0).contains(&target_speed) {
        return Err(Error::Config(format!(
            "target speed {target_speed} outside the supported range [0.3, 2.0]"
        )));
    }
    make_speed_tracker_with(SpeedTrackParams::new(target_speed))
}

pub fn make_speed_tracker_with(params: SpeedTrackParams) -> Result<TaskSpec> {
    let horizon = params.horizon;
    let name = format!("speed-tracker-v{:.2}", params.target_speed);
    let bound = params.velocity_bound;
    let force = params.force_max;
    let sim = Arc::new(SpeedTrackSim { params });
    TaskSpec::simulated(
        name,
        Space::boxed(vec![-1e6, -bound], vec![1e6, bound])?,
        Space::boxed(vec![-force], vec![force])?,
        Space::boxed(vec![-bound], vec![bound])?,
        sim,
        horizon as f64,
        horizon,
    )
}

/// Result of success-threshold calibration for one family member.
#[derive(Debug, Clone)]
pub struct CalibrationOutcome {
    /// The task with the calibrated threshold installed.
    pub task: TaskSpec,
    /// The individually trained policy's estimated return.
    pub individual_return: ReturnEstimate,
    pub seed: u64,
}

/// Minimum acceptable individually-trained return, as a fraction of the
/// horizon; below it calibration fails loudly.
pub const CALIBRATION_FLOOR_FRACTION: f64 = 0.1;

/// Train an individual policy on the task in isolation and set
/// R* = 0.95 x its estimated return. Idempotent for a fixed seed.
pub fn calibrate_success_threshold(
    task: &TaskSpec,
    trainer_config: &EstimatorConfig,
) -> Result<CalibrationOutcome> {
    let outcome = train_single_actor_critic(task, trainer_config)?;
    let floor = CALIBRATION_FLOOR_FRACTION * task.horizon as f64;
    if outcome.final_return.value < floor {
        return Err(Error::Calibration(format!(
            "individual training reached {:.1}, below the floor {floor:.1} on task '{}'",
            outcome.final_return.value, task.name
        )));
    }
    let threshold = 0.95 * outcome.final_return.value;
    Ok(CalibrationOutcome {
        task: task.with_success_threshold(threshold)?,
        individual_return: outcome.final_return,
        seed: trainer_config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn reward_formula_cases() {
        let sim = SpeedTrackSim { params: SpeedTrackParams::new(1.0) };
        // Holding v exactly with zero action: reward 1 per step.
        assert_eq!(sim.reward(1.0, 0.0), 1.0);
        // One off: floored at 0. Half off: 0.5.
        assert_eq!(sim.reward(2.0, 0.0), 0.0);
        assert_eq!(sim.reward(0.0, 0.0), 0.0);
        assert_eq!(sim.reward(1.5, 0.0), 0.5);
        assert_eq!(sim.reward(0.5, 0.0), 0.5);
        // Action penalty shaves the reward.
        assert!(sim.reward(1.0, 2.0) < 1.0);
        assert!(sim.reward(1.0, 2.0) >= 0.0);
    }

    #[test]
    fn target_speed_range_is_validated() {
        assert!(make_speed_tracker(0.1).is_err());
        assert!(make_speed_tracker(2.5).is_err());
        assert!(make_speed_tracker(1.0).is_ok());
    }

    #[test]
    fn per_step_reward_bounds_the_threshold() {
        // R* <= horizon since per-step reward <= 1.
        let task = make_speed_tracker(0.8).unwrap();
        assert!(task.success_threshold <= task.horizon as f64);
    }

    #[test]
    fn drag_decays_unforced_velocity() {
        let sim = SpeedTrackSim { params: SpeedTrackParams::new(1.0) };
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0);
        let mut state = vec![0.0, 1.0];
        for _ in 0..200 {
            let (next, _) = sim.step(&state, &Elem::Vector(vec![0.0]), &mut rng);
            state = next;
        }
        assert!(state[1].abs() < 0.01, "velocity should decay, got {}", state[1]);
    }
}
