use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::taskcore::{Elem, Simulator, Space, TaskSpec};

/// Which way gravity acts: the up task (-y, pole balanced at the unstable
/// equilibrium) or the down task (+y, the same equilibrium made stable).
/// Only the sign of gravity differs, so the in-bounds states are identical
/// between the two tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GravityDir {
    Up,
    Down,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CartpoleParams {
    pub gravity_dir: GravityDir,
    pub angle_limit_deg: f64,
    pub position_limit: f64,
    pub horizon: usize,
    pub gravity: f64,
    pub masscart: f64,
    pub masspole: f64,
    pub half_length: f64,
    pub force_mag: f64,
    pub dt: f64,
    /// Initial state uniform in ±init_noise per coordinate.
    pub init_noise: f64,
}

impl CartpoleParams {
    pub fn new(gravity_dir: GravityDir) -> Self {
        CartpoleParams {
            gravity_dir,
            angle_limit_deg: 24.0,
            position_limit: 2.4,
            horizon: 200,
            gravity: 9.8,
            masscart: 1.0,
            masspole: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            dt: 0.02,
            init_noise: 0.05,
        }
    }
}

/// Cartpole dynamics with Euler integration; state (x, xdot, theta, thetadot).
/// Actions: 0 = no force, 1 = push left, 2 = push right.
#[derive(Debug, Clone)]
pub struct CartpoleSim {
    pub params: CartpoleParams,
}

impl CartpoleSim {
    fn angle_limit_rad(&self) -> f64 {
        self.params.angle_limit_deg.to_radians()
    }

    pub fn in_bounds(&self, state: &[f64]) -> bool {
        state[0].abs() <= self.params.position_limit && state[2].abs() <= self.angle_limit_rad()
    }

    /// One Euler step under the task's signed gravity.
    pub fn integrate(&self, state: &[f64], force: f64) -> Vec<f64> {
        let p = &self.params;
        let g_signed = match p.gravity_dir {
            GravityDir::Up => p.gravity,
            GravityDir::Down => -p.gravity,
        };
        let (x, x_dot, theta, theta_dot) = (state[0], state[1], state[2], state[3]);
        let total_mass = p.masscart + p.masspole;
        let polemass_length = p.masspole * p.half_length;
        let cos = theta.cos();
        let sin = theta.sin();
        let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (g_signed * sin - cos * temp)
            / (p.half_length * (4.0 / 3.0 - p.masspole * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
        vec![
            x + p.dt * x_dot,
            x_dot + p.dt * x_acc,
            theta + p.dt * theta_dot,
            theta_dot + p.dt * theta_acc,
        ]
    }

    fn force_of(&self, action: &Elem) -> f64 {
        match action {
            Elem::Discrete(0) => 0.0,
            Elem::Discrete(1) => -self.params.force_mag,
            Elem::Discrete(2) => self.params.force_mag,
            _ => 0.0,
        }
    }
}

impl Simulator for CartpoleSim {
    fn sample_init(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        let e = self.params.init_noise;
        (0..4).map(|_| rng.gen_range(-e..e)).collect()
    }

    fn observe(&self, state: &[f64], _rng: &mut ChaCha12Rng) -> Elem {
        Elem::Vector(state.to_vec())
    }

    fn step(&self, state: &[f64], action: &Elem, _rng: &mut ChaCha12Rng) -> (Vec<f64>, f64) {
        let reward = if self.in_bounds(state) { 1.0 } else { 0.0 };
        let next = self.integrate(state, self.force_of(action));
        (next, reward)
    }

    fn terminal(&self, state: &[f64]) -> bool {
        !self.in_bounds(state)
    }

    fn params_digest(&self) -> String {
        format!("{:?}", self.params)
    }
}

/// The balancing task for one gravity direction: 3 actions, full state
/// observations, reward 1 per in-bounds step, R* = horizon = 200.
pub fn make_cartpole(direction: GravityDir) -> Result<TaskSpec> {
    let params = CartpoleParams::new(direction);
    make_cartpole_with(params)
}

pub fn make_cartpole_with(params: CartpoleParams) -> Result<TaskSpec> {
    let horizon = params.horizon;
    let name = match params.gravity_dir {
        GravityDir::Up => "cartpole-up",
        GravityDir::Down => "cartpole-down",
    };
    let limit = params.angle_limit_deg.to_radians();
    let pos = params.position_limit;
    let sim = Arc::new(CartpoleSim { params });
    let states = Space::boxed(
        vec![-2.0 * pos, -1e3, -std::f64::consts::PI, -1e3],
        vec![2.0 * pos, 1e3, std::f64::consts::PI, 1e3],
    )?;
    let observations = Space::boxed(
        vec![-2.0 * pos, -1e3, -2.0 * limit, -1e3],
        vec![2.0 * pos, 1e3, 2.0 * limit, 1e3],
    )?;
    TaskSpec::simulated(
        name,
        states,
        Space::finite(3)?,
        observations,
        sim,
        horizon as f64,
        horizon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{Activation, MlpNet};
    use crate::taskcore::{estimate_return, rollout, ActionDecode, Policy};

    fn zero_force_policy(task: &TaskSpec) -> Policy {
        // All-zero logits tie-break to action 0 = no force.
        let net = MlpNet::zeros(&[4, 4, 3], Activation::Tanh).unwrap();
        Policy::neural(net, ActionDecode::Argmax, task.observations.clone(), task.actions.clone())
            .unwrap()
    }

    #[test]
    fn down_task_is_passively_stable() {
        let task = make_cartpole(GravityDir::Down).unwrap();
        let policy = zero_force_policy(&task);
        let est = estimate_return(&task, &policy, 20, 0).unwrap();
        assert_eq!(est.value, 200.0, "passive pendulum should survive all 200 steps");
    }

    #[test]
    fn up_task_is_passively_unstable() {
        let task = make_cartpole(GravityDir::Up).unwrap();
        let policy = zero_force_policy(&task);
        let est = estimate_return(&task, &policy, 20, 0).unwrap();
        assert!(est.value < 200.0, "unstable equilibrium should fall, got {}", est.value);
    }

    #[test]
    fn trajectory_stops_when_the_pole_falls() {
        let task = make_cartpole(GravityDir::Up).unwrap();
        let policy = zero_force_policy(&task);
        let traj = rollout(&task, &policy, 5).unwrap();
        assert!(traj.len() < 200);
        // Every collected reward is 1 (in-bounds steps), so return = length.
        assert!(traj.iter().all(|s| s.reward == 1.0));
    }

    #[test]
    fn return_never_exceeds_success_threshold() {
        let task = make_cartpole(GravityDir::Down).unwrap();
        let policy = zero_force_policy(&task);
        for seed in 0..5 {
            let est = estimate_return(&task, &policy, 5, seed).unwrap();
            assert!(est.value <= 200.0);
        }
    }

    #[test]
    fn flipped_gravity_matches_the_mirrored_hanging_pendulum() {
        // Down-task dynamics at (x, xd, th, thd) with force F equal the
        // up-task dynamics at (-x, -xd, th + pi, thd) with force -F, mapped
        // back through the same mirror. This is the theta -> theta + pi
        // reparameterization that makes the two success sets consistent.
        let down = CartpoleSim { params: CartpoleParams::new(GravityDir::Down) };
        let up = CartpoleSim { params: CartpoleParams::new(GravityDir::Up) };
        let state = [0.3, -0.2, 0.1, 0.4];
        let force = 10.0;
        let mirrored = [-state[0], -state[1], state[2] + std::f64::consts::PI, state[3]];
        let a = down.integrate(&state, force);
        let b = up.integrate(&mirrored, -force);
        assert!((a[0] + b[0]).abs() < 1e-12);
        assert!((a[1] + b[1]).abs() < 1e-12);
        assert!((a[2] - (b[2] - std::f64::consts::PI)).abs() < 1e-12);
        assert!((a[3] - b[3]).abs() < 1e-12);
    }

    #[test]
    fn success_predicate_is_shared_between_tasks() {
        let down = CartpoleSim { params: CartpoleParams::new(GravityDir::Down) };
        let up = CartpoleSim { params: CartpoleParams::new(GravityDir::Up) };
        for state in [[0.0, 0.0, 0.1, 0.0], [2.5, 0.0, 0.0, 0.0], [0.0, 0.0, 0.5, 0.0]] {
            assert_eq!(down.in_bounds(&state), up.in_bounds(&state));
        }
    }
}
