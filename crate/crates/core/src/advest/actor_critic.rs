use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::advest::config::{derive_seed, EstimatorConfig};
use crate::advest::driver::{
    assemble_result, ConvergenceTracker, CurvePoint, EnvCursor, EstimateOutcome,
};
use crate::advest::nets::{build_decoder_net, build_encoder_net, build_policy_net, ContinuousComposed, MapNet};
use crate::advest::replay::{ReplayBuffer, StoredAction, Transition, TransitionBatch};
use crate::advest::MapArch;
use crate::diffnet::{Activation, Adam, GradTape, MlpNet};
use crate::error::{Error, Result};
use crate::taskcore::{
    estimate_return, tanh_scale, ActionDecode, Elem, Policy, ReturnEstimate, Space, TaskSpec,
};

/// Critic losses above this are treated as divergence.
const CRITIC_DIVERGENCE_LIMIT: f64 = 1e8;

fn box_bounds(space: &Space) -> Result<(Vec<f64>, Vec<f64>)> {
    match space {
        Space::Box { lower, upper, .. } => Ok((lower.clone(), upper.clone())),
        Space::Finite { .. } => {
            Err(Error::Config("the actor-critic estimator needs box action spaces".into()))
        }
    }
}

fn critic_input(obs: &[f64], action: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(obs.len() + action.len());
    v.extend_from_slice(obs);
    v.extend_from_slice(action);
    v
}

fn critic_forward(q: &MlpNet, obs: &[f64], action: &[f64]) -> Result<f64> {
    Ok(q.forward(&critic_input(obs, action))?[0])
}

fn critic_forward_tape(q: &MlpNet, obs: &[f64], action: &[f64]) -> Result<(f64, GradTape)> {
    let (out, tape) = q.forward_tape(&critic_input(obs, action))?;
    Ok((out[0], tape))
}

/// d(Q)/d(action): the critic's input gradient restricted to action dims.
fn critic_action_grad(
    q: &MlpNet,
    tape: &GradTape,
    obs_dim: usize,
    upstream: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (grad, dinput) = q.backward(tape, &[upstream])?;
    Ok((grad, dinput[obs_dim..].to_vec()))
}

fn gaussian_noise(rng: &mut ChaCha12Rng, dim: usize, std: f64) -> Vec<f64> {
    (0..dim).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Alternating-update state for the continuous estimator: one critic per
/// task (step 0), policy ascent on `Q2 - α Q1` (step 1), encoder/decoder
/// ascent on `Q1` (step 2).
pub struct Alg2Trainer<'t> {
    pub task1: &'t TaskSpec,
    pub task2: &'t TaskSpec,
    pub config: EstimatorConfig,
    pub comp: ContinuousComposed,
    q1: MlpNet,
    q1_target: MlpNet,
    q2: MlpNet,
    q2_target: MlpNet,
    opt_pi: Adam,
    opt_h: Option<Adam>,
    opt_g: Option<Adam>,
    opt_q1: Adam,
    opt_q2: Adam,
    buf1: ReplayBuffer,
    buf2: ReplayBuffer,
    cur1: EnvCursor<'t>,
    cur2: EnvCursor<'t>,
    rng: ChaCha12Rng,
    critic_updates: usize,
}

impl<'t> Alg2Trainer<'t> {
    pub fn new(
        task1: &'t TaskSpec,
        task2: &'t TaskSpec,
        h_arch: MapArch,
        g_arch: MapArch,
        pi_hidden_layers: usize,
        config: EstimatorConfig,
    ) -> Result<Self> {
        config.validate()?;
        let (act1_dim, act2_dim) = match (&task1.actions, &task2.actions) {
            (Space::Box { dims: d1, .. }, Space::Box { dims: d2, .. }) => (*d1, *d2),
            _ => return Err(Error::Config("the actor-critic estimator needs box actions".into())),
        };
        let w = config.hidden_width;
        let h = build_encoder_net(h_arch, &task1.observations, &task2.observations, w, derive_seed(config.seed, 2))?;
        let g = build_decoder_net(g_arch, &task2.actions, &task1.actions, w, derive_seed(config.seed, 3))?;
        let pi = build_policy_net(&task2.observations, act2_dim, pi_hidden_layers, w, derive_seed(config.seed, 1))?;
        let critic_dims = |task: &TaskSpec, act_dim: usize| -> Vec<usize> {
            let mut d = vec![task.observations.feature_dim() + act_dim];
            d.extend(std::iter::repeat(w).take(config.critic_hidden_layers));
            d.push(1);
            d
        };
        let q1 = MlpNet::init(&critic_dims(task1, act1_dim), Activation::Tanh, derive_seed(config.seed, 4))?;
        let q2 = MlpNet::init(&critic_dims(task2, act2_dim), Activation::Tanh, derive_seed(config.seed, 5))?;
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, 0));
        let cur1 = EnvCursor::new(task1, &mut rng)?;
        let cur2 = EnvCursor::new(task2, &mut rng)?;
        let opt_h = match &h {
            MapNet::Identity => None,
            MapNet::Net(n) => Some(Adam::new(config.lr_enc_dec, n.param_count())),
        };
        let opt_g = match &g {
            MapNet::Identity => None,
            MapNet::Net(n) => Some(Adam::new(config.lr_enc_dec, n.param_count())),
        };
        Ok(Alg2Trainer {
            task1,
            task2,
            comp: ContinuousComposed {
                h,
                pi: pi.clone(),
                g,
                obs1: task1.observations.clone(),
                obs2: task2.observations.clone(),
                act2: task2.actions.clone(),
                act1: task1.actions.clone(),
            },
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            opt_pi: Adam::new(config.lr_policy, pi.param_count()),
            opt_h,
            opt_g,
            opt_q1: Adam::new(config.lr_critic, q1.param_count()),
            opt_q2: Adam::new(config.lr_critic, q2.param_count()),
            q1,
            q2,
            buf1: ReplayBuffer::new(config.replay_capacity),
            buf2: ReplayBuffer::new(config.replay_capacity),
            cur1,
            cur2,
            rng,
            critic_updates: 0,
            config,
        })
    }

    fn noisy_policy_action(&mut self, obs_feat: &[f64]) -> Result<Vec<f64>> {
        let std = self.config.exploration.gaussian_std();
        let m = self.comp.pi.forward(obs_feat)?;
        let noise = gaussian_noise(&mut self.rng, m.len(), std);
        let pre: Vec<f64> = m.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let (lo, hi) = box_bounds(&self.comp.act2)?;
        Ok(tanh_scale(&pre, &lo, &hi))
    }

    fn noisy_composed_action(&mut self, obs_feat: &[f64]) -> Result<Vec<f64>> {
        let std = self.config.exploration.gaussian_std();
        let (a1, _tape) = self.comp.forward_tape(obs_feat)?;
        // Noise on the final action, clipped back into the box.
        let (lo, hi) = box_bounds(&self.comp.act1)?;
        let noise = gaussian_noise(&mut self.rng, a1.len(), std);
        Ok(a1
            .iter()
            .zip(&noise)
            .zip(lo.iter().zip(&hi))
            .map(|((a, n), (l, u))| (a + n).clamp(*l, *u))
            .collect())
    }

    pub fn collect(&mut self) -> Result<()> {
        for which in 0..2 {
            for _ in 0..self.config.env_steps_per_iter {
                {
                    let cursor = if which == 0 { &mut self.cur2 } else { &mut self.cur1 };
                    while cursor.done {
                        cursor.reset(&mut self.rng)?;
                    }
                }
                let obs = if which == 0 { self.cur2.obs_feat()? } else { self.cur1.obs_feat()? };
                let a = if which == 0 {
                    self.noisy_policy_action(&obs)?
                } else {
                    self.noisy_composed_action(&obs)?
                };
                let cursor = if which == 0 { &mut self.cur2 } else { &mut self.cur1 };
                let (reward, next_obs, done) = cursor.step(&Elem::Vector(a.clone()), &mut self.rng)?;
                let buf = if which == 0 { &mut self.buf2 } else { &mut self.buf1 };
                buf.push(Transition {
                    obs,
                    action: StoredAction::Continuous(a),
                    reward,
                    next_obs,
                    done,
                });
            }
        }
        Ok(())
    }

    pub fn buffers_ready(&self) -> bool {
        let need = self.config.batch_size.max(self.config.warmup_steps);
        self.buf1.len() >= need && self.buf2.len() >= need
    }

    fn td_grads(
        &mut self,
        which_task: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let b = self.config.batch_size;
        let batch: TransitionBatch = if which_task == 2 {
            self.buf2.sample(b, &mut self.rng)?
        } else {
            self.buf1.sample(b, &mut self.rng)?
        };
        let (q, q_target) = if which_task == 2 {
            (&self.q2, &self.q2_target)
        } else {
            (&self.q1, &self.q1_target)
        };
        let bn = batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; q.param_count()];
        for t in &batch.transitions {
            let a = match &t.action {
                StoredAction::Continuous(a) => a,
                StoredAction::Discrete(_) => {
                    return Err(Error::Config("continuous critic got a discrete action".into()))
                }
            };
            let bootstrap = if t.done {
                0.0
            } else {
                let next_a = if which_task == 2 {
                    let (lo, hi) = box_bounds(&self.comp.act2)?;
                    tanh_scale(&self.comp.pi.forward(&t.next_obs)?, &lo, &hi)
                } else {
                    self.comp.mean_action(&t.next_obs)?
                };
                critic_forward(q_target, &t.next_obs, &next_a)?
            };
            let y = t.reward + self.config.gamma * bootstrap;
            let (qv, tape) = critic_forward_tape(q, &t.obs, a)?;
            let err = qv - y;
            loss += err * err / bn;
            let (g, _) = q.backward(&tape, &[2.0 * err / bn])?;
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += v;
            }
        }
        if !loss.is_finite() || loss > CRITIC_DIVERGENCE_LIMIT {
            return Err(Error::Training(format!(
                "critic {which_task} diverged: td loss {loss:.3e} (updates: {})",
                self.critic_updates
            )));
        }
        Ok((loss, grad))
    }

    /// Step 0: TD updates for both critics with target networks.
    pub fn critic_update(&mut self) -> Result<(f64, f64)> {
        let (l2, g2) = self.td_grads(2)?;
        self.opt_q2.step(&mut self.q2.params, &g2)?;
        let (l1, g1) = self.td_grads(1)?;
        self.opt_q1.step(&mut self.q1.params, &g1)?;
        self.critic_updates += 1;
        if self.critic_updates % self.config.target_update_every == 0 {
            self.q1_target = self.q1.clone();
            self.q2_target = self.q2.clone();
        }
        Ok((l2, l1))
    }

    /// Mean Q1 over a task-1 batch and its gradients through the composed
    /// chain (all three stages).
    fn composed_q1_ascent(
        &mut self,
    ) -> Result<(f64, Option<Vec<f64>>, Vec<f64>, Option<Vec<f64>>)> {
        let b = self.config.batch_size;
        let batch = self.buf1.sample(b, &mut self.rng)?;
        let bn = batch.len() as f64;
        let obs_dim = self.task1.observations.feature_dim();
        let mut mean_q = 0.0;
        let mut gh_acc = match &self.comp.h {
            MapNet::Identity => None,
            MapNet::Net(n) => Some(vec![0.0; n.param_count()]),
        };
        let mut gpi_acc = vec![0.0; self.comp.pi.param_count()];
        let mut gg_acc = match &self.comp.g {
            MapNet::Identity => None,
            MapNet::Net(n) => Some(vec![0.0; n.param_count()]),
        };
        for t in &batch.transitions {
            let (a1, tape) = self.comp.forward_tape(&t.obs)?;
            let (qv, qtape) = critic_forward_tape(&self.q1, &t.obs, &a1)?;
            mean_q += qv / bn;
            let (_, da1) = critic_action_grad(&self.q1, &qtape, obs_dim, 1.0 / bn)?;
            let (gh, gpi, gg) = self.comp.backward(&tape, &da1)?;
            if let (Some(acc), Some(g)) = (gh_acc.as_mut(), gh.as_ref()) {
                for (a, v) in acc.iter_mut().zip(g) {
                    *a += v;
                }
            }
            for (a, v) in gpi_acc.iter_mut().zip(&gpi) {
                *a += v;
            }
            if let (Some(acc), Some(g)) = (gg_acc.as_mut(), gg.as_ref()) {
                for (a, v) in acc.iter_mut().zip(g) {
                    *a += v;
                }
            }
        }
        Ok((mean_q, gh_acc, gpi_acc, gg_acc))
    }

    /// Step 1: ascend `Q2(π2) - α Q1(g ∘ π2 ∘ h)` in the policy parameters.
    pub fn step1(&mut self) -> Result<f64> {
        let b = self.config.batch_size;
        let obs_dim2 = self.task2.observations.feature_dim();
        let (lo2, hi2) = box_bounds(&self.comp.act2)?;
        let batch = self.buf2.sample(b, &mut self.rng)?;
        let bn = batch.len() as f64;
        let mut mean_q2 = 0.0;
        let mut gpi_q2 = vec![0.0; self.comp.pi.param_count()];
        for t in &batch.transitions {
            let (m, pi_tape) = self.comp.pi.forward_tape(&t.obs)?;
            let a2 = tanh_scale(&m, &lo2, &hi2);
            let (qv, qtape) = critic_forward_tape(&self.q2, &t.obs, &a2)?;
            mean_q2 += qv / bn;
            let (_, da2) = critic_action_grad(&self.q2, &qtape, obs_dim2, 1.0 / bn)?;
            let dm: Vec<f64> = m
                .iter()
                .zip(lo2.iter().zip(&hi2))
                .zip(&da2)
                .map(|((&y, (&lo, &hi)), &d)| {
                    let tv = y.tanh();
                    d * 0.5 * (hi - lo) * (1.0 - tv * tv)
                })
                .collect();
            let (g, _) = self.comp.pi.backward(&pi_tape, &dm)?;
            for (acc, v) in gpi_q2.iter_mut().zip(&g) {
                *acc += v;
            }
        }
        let (mean_q1, _, gpi_q1, _) = self.composed_q1_ascent()?;
        let alpha = self.config.alpha;
        // Ascent: Adam minimizes, so feed the negated objective gradient.
        let grad: Vec<f64> =
            gpi_q2.iter().zip(&gpi_q1).map(|(a, b)| -(a - alpha * b)).collect();
        self.opt_pi.step(&mut self.comp.pi.params, &grad)?;
        Ok(mean_q2 - alpha * mean_q1)
    }

    /// Step 2: ascend `Q1(g ∘ π2 ∘ h)` in the encoder/decoder parameters.
    pub fn step2(&mut self) -> Result<f64> {
        let (mean_q1, gh, _, gg) = self.composed_q1_ascent()?;
        if let (Some(opt), Some(grad)) = (self.opt_h.as_mut(), gh.as_ref()) {
            let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
            let params = self.comp.h.params_mut().expect("net encoder");
            opt.step(params, &neg)?;
        }
        if let (Some(opt), Some(grad)) = (self.opt_g.as_mut(), gg.as_ref()) {
            let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
            let params = self.comp.g.params_mut().expect("net decoder");
            opt.step(params, &neg)?;
        }
        Ok(mean_q1)
    }

    pub fn greedy_policy2(&self) -> Result<Policy> {
        Policy::neural(
            self.comp.pi.clone(),
            ActionDecode::TanhBox,
            self.task2.observations.clone(),
            self.task2.actions.clone(),
        )
    }

    pub fn evaluate(&self, rollouts: usize, seed: u64) -> Result<(ReturnEstimate, ReturnEstimate)> {
        let pi2 = self.greedy_policy2()?;
        let r2 = estimate_return(self.task2, &pi2, rollouts, seed)?;
        let r1 = estimate_return(self.task1, &self.comp, rollouts, derive_seed(seed, 1))?;
        Ok((r2, r1))
    }
}

/// Algorithm-2 estimator for continuous-action task pairs (actor-critic
/// with one critic per task and plus-signed updates).
pub fn estimate_alg2(
    task1: &TaskSpec,
    task2: &TaskSpec,
    h_arch: MapArch,
    g_arch: MapArch,
    pi_hidden_layers: usize,
    config: &EstimatorConfig,
) -> Result<EstimateOutcome> {
    let mut trainer = Alg2Trainer::new(task1, task2, h_arch, g_arch, pi_hidden_layers, config.clone())?;
    let config = config.clone();
    let mut curve = Vec::new();
    let mut tracker = ConvergenceTracker::new(config.convergence_window);
    let (mut last_c1, mut last_c2) = (0.0, 0.0);
    let mut admissible_now = false;
    let mut iters_run = 0;
    let tol = config.admissibility_tolerance;

    for iter in 0..config.max_iters {
        trainer.collect()?;
        if trainer.buffers_ready() {
            for _ in 0..config.critic_updates_per_iter {
                trainer.critic_update()?;
            }
            last_c1 = trainer.step1()?;
            last_c2 = trainer.step2()?;
        }
        if iter % config.eval_every == 0 {
            let (r2, r1) = trainer
                .evaluate(config.curve_eval_rollouts, derive_seed(config.seed, 0x1000 + iter as u64))?;
            curve.push(CurvePoint {
                iter,
                r2: r2.value,
                r1_composed: r1.value,
                c1: last_c1,
                c2: last_c2,
            });
            tracker.push(r2.value, r1.value);
            admissible_now = r2.value >= (1.0 - tol) * task2.success_threshold;
        }
        iters_run = iter + 1;
        if tracker.converged() && admissible_now {
            break;
        }
    }

    let r2_final = {
        let pi2 = trainer.greedy_policy2()?;
        estimate_return(task2, &pi2, config.eval_rollouts, derive_seed(config.seed, 0x2000_0001))?
    };
    let r1_final = estimate_return(
        task1,
        &trainer.comp,
        config.eval_rollouts,
        derive_seed(config.seed, 0x2000_0002),
    )?;
    let inner_admissible = r2_final.value >= (1.0 - tol) * task2.success_threshold;
    let value = (1.0 - r1_final.value / task1.success_threshold).clamp(0.0, 1.0);
    let arch_note = format!("alg2;h={};g={};pi={pi_hidden_layers}", h_arch.label(), g_arch.label());
    let result = assemble_result(
        &config,
        task1,
        task2,
        &arch_note,
        value,
        inner_admissible,
        &trainer.comp.pi,
        &trainer.comp.h,
        &trainer.comp.g,
    );
    Ok(EstimateOutcome {
        result,
        pi2: trainer.comp.pi.clone(),
        h: trainer.comp.h.clone(),
        g: trainer.comp.g.clone(),
        curve,
        r1_final,
        r2_final,
        iters_run,
    })
}

/// A single-task actor-critic training run, used by success-threshold
/// calibration: the α-free half of the estimator (no encoder/decoder).
#[derive(Debug, Clone)]
pub struct SingleTrainOutcome {
    pub policy: Policy,
    pub pi_net: MlpNet,
    pub final_return: ReturnEstimate,
    pub iters_run: usize,
}

pub fn train_single_actor_critic(
    task: &TaskSpec,
    config: &EstimatorConfig,
) -> Result<SingleTrainOutcome> {
    // Reuse the two-task trainer on the degenerate pair (task, task) with
    // α = 0 and fixed identity maps; only the π2 half trains.
    let mut cfg = config.clone();
    cfg.alpha = 0.0;
    let mut trainer =
        Alg2Trainer::new(task, task, MapArch::Identity, MapArch::Identity, 3, cfg.clone())?;
    let mut tracker = ConvergenceTracker::new(cfg.convergence_window);
    let mut iters_run = 0;
    for iter in 0..cfg.max_iters {
        trainer.collect()?;
        if trainer.buffers_ready() {
            for _ in 0..cfg.critic_updates_per_iter {
                trainer.critic_update()?;
            }
            trainer.step1()?;
        }
        if iter % cfg.eval_every == 0 {
            let (r2, _) =
                trainer.evaluate(cfg.curve_eval_rollouts, derive_seed(cfg.seed, 0x1000 + iter as u64))?;
            tracker.push(r2.value, r2.value);
        }
        iters_run = iter + 1;
        if tracker.converged() {
            break;
        }
    }
    let policy = trainer.greedy_policy2()?;
    let final_return =
        estimate_return(task, &policy, cfg.eval_rollouts, derive_seed(cfg.seed, 0x2000_0001))?;
    Ok(SingleTrainOutcome { policy, pi_net: trainer.comp.pi.clone(), final_return, iters_run })
}
