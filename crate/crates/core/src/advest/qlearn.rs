use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::advest::config::{derive_seed, EstimatorConfig};
use crate::advest::driver::{
    assemble_result, ConvergenceTracker, CurvePoint, EnvCursor, EstimateOutcome,
};
use crate::advest::nets::{
    build_decoder_net, build_encoder_net, build_policy_net, softmax, DiscreteComposed, MapNet,
    LOGP_FLOOR,
};
use crate::advest::replay::{ReplayBuffer, StoredAction, Transition, TransitionBatch};
use crate::advest::{policy_weighted_logp_grads, MapArch};
use crate::diffnet::{Adam, MlpNet};
use crate::error::{Error, Result};
use crate::taskcore::{
    argmax_lowest, estimate_return, ActionDecode, Elem, Policy, ReturnEstimate, TaskSpec,
};

/// The Q-learning policy loss: `-(1/B) Σ_b Q(s_b, a_b) log p(a_b)` with
/// `p` the softmax of the supplied logits, floored at log(1e-8).
pub fn q_learning_loss(
    actions: &[usize],
    q_values: &[f64],
    policy_logits: &[Vec<f64>],
) -> Result<f64> {
    if actions.len() != q_values.len() || actions.len() != policy_logits.len() {
        return Err(Error::Config("loss inputs must have equal batch length".into()));
    }
    if actions.is_empty() {
        return Err(Error::Config("loss needs a nonempty batch".into()));
    }
    let b = actions.len() as f64;
    let mut loss = 0.0;
    for ((&a, &q), logits) in actions.iter().zip(q_values).zip(policy_logits) {
        let p = softmax(logits);
        let pa = p.get(a).copied().ok_or_else(|| Error::Config("action index out of range".into()))?;
        loss += -q * pa.max(LOGP_FLOOR).ln() / b;
    }
    Ok(loss)
}

/// One-step TD regression with Q-learning (max) targets on a discrete
/// critic. Returns the batch loss and the parameter gradient.
fn dqn_td_grads(
    q: &MlpNet,
    q_target: &MlpNet,
    batch: &TransitionBatch,
    gamma: f64,
) -> Result<(f64, Vec<f64>)> {
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; q.param_count()];
    for t in &batch.transitions {
        let a = match t.action {
            StoredAction::Discrete(a) => a,
            StoredAction::Continuous(_) => {
                return Err(Error::Config("discrete critic got a continuous action".into()))
            }
        };
        let bootstrap = if t.done {
            0.0
        } else {
            q_target.forward(&t.next_obs)?.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        let y = t.reward + gamma * bootstrap;
        let (qv, tape) = q.forward_tape(&t.obs)?;
        let err = qv[a] - y;
        loss += err * err / b;
        let mut upstream = vec![0.0; qv.len()];
        upstream[a] = 2.0 * err / b;
        let (g, _) = q.backward(&tape, &upstream)?;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    Ok((loss, grad))
}

/// Alternating-update state for the discrete estimator. Step 1 only touches
/// the policy's parameters, step 2 only the encoder/decoder's.
pub struct Alg1Trainer<'t> {
    pub task1: &'t TaskSpec,
    pub task2: &'t TaskSpec,
    pub config: EstimatorConfig,
    pub comp: DiscreteComposed,
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
    n_act1: usize,
    n_act2: usize,
}

impl<'t> Alg1Trainer<'t> {
    pub fn new(
        task1: &'t TaskSpec,
        task2: &'t TaskSpec,
        h_arch: MapArch,
        g_arch: MapArch,
        pi_hidden_layers: usize,
        config: EstimatorConfig,
    ) -> Result<Self> {
        config.validate()?;
        let n_act1 = task1
            .actions
            .size()
            .ok_or_else(|| Error::Config("the discrete estimator needs finite actions".into()))?;
        let n_act2 = task2
            .actions
            .size()
            .ok_or_else(|| Error::Config("the discrete estimator needs finite actions".into()))?;
        let w = config.hidden_width;
        let h = build_encoder_net(h_arch, &task1.observations, &task2.observations, w, derive_seed(config.seed, 2))?;
        let g = build_decoder_net(g_arch, &task2.actions, &task1.actions, w, derive_seed(config.seed, 3))?;
        let pi = build_policy_net(&task2.observations, n_act2, pi_hidden_layers, w, derive_seed(config.seed, 1))?;
        let critic_dims = |task: &TaskSpec, n_act: usize| -> Vec<usize> {
            let mut d = vec![task.observations.feature_dim()];
            d.extend(std::iter::repeat(w).take(config.critic_hidden_layers));
            d.push(n_act);
            d
        };
        let q1 = MlpNet::init(&critic_dims(task1, n_act1), crate::diffnet::Activation::Tanh, derive_seed(config.seed, 4))?;
        let q2 = MlpNet::init(&critic_dims(task2, n_act2), crate::diffnet::Activation::Tanh, derive_seed(config.seed, 5))?;
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
        Ok(Alg1Trainer {
            task1,
            task2,
            comp: DiscreteComposed {
                h,
                pi: pi.clone(),
                g,
                obs1: task1.observations.clone(),
                obs2: task2.observations.clone(),
                n_act2,
                n_act1,
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
            n_act1,
            n_act2,
            config,
        })
    }

    fn greedy_action_task2(&self, obs_feat: &[f64]) -> Result<usize> {
        Ok(argmax_lowest(&self.comp.pi.forward(obs_feat)?))
    }

    fn greedy_action_task1(&self, obs_feat: &[f64]) -> Result<usize> {
        Ok(argmax_lowest(&self.comp.comp_prob(obs_feat)?))
    }

    /// Collect `env_steps_per_iter` ε-greedy transitions on each task.
    pub fn collect(&mut self, iter: usize) -> Result<()> {
        let eps = self.config.exploration.epsilon_at(iter, self.config.max_iters);
        for which in 0..2 {
            for _ in 0..self.config.env_steps_per_iter {
                let (cursor, n_act) = if which == 0 {
                    (&mut self.cur2, self.n_act2)
                } else {
                    (&mut self.cur1, self.n_act1)
                };
                while cursor.done {
                    cursor.reset(&mut self.rng)?;
                }
                let obs = cursor.obs_feat()?;
                let explore: f64 = self.rng.gen();
                let a = if explore < eps {
                    self.rng.gen_range(0..n_act)
                } else if which == 0 {
                    self.greedy_action_task2(&obs)?
                } else {
                    self.greedy_action_task1(&obs)?
                };
                let cursor = if which == 0 { &mut self.cur2 } else { &mut self.cur1 };
                let (reward, next_obs, done) = cursor.step(&Elem::Discrete(a), &mut self.rng)?;
                let buf = if which == 0 { &mut self.buf2 } else { &mut self.buf1 };
                buf.push(Transition {
                    obs,
                    action: StoredAction::Discrete(a),
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

    /// TD updates for both critics, target nets synced every
    /// `target_update_every` updates.
    pub fn critic_update(&mut self) -> Result<(f64, f64)> {
        let b = self.config.batch_size;
        let batch2 = self.buf2.sample(b, &mut self.rng)?;
        let (l2, g2) = dqn_td_grads(&self.q2, &self.q2_target, &batch2, self.config.gamma)?;
        self.opt_q2.step(&mut self.q2.params, &g2)?;
        let batch1 = self.buf1.sample(b, &mut self.rng)?;
        let (l1, g1) = dqn_td_grads(&self.q1, &self.q1_target, &batch1, self.config.gamma)?;
        self.opt_q1.step(&mut self.q1.params, &g1)?;
        self.critic_updates += 1;
        if self.critic_updates % self.config.target_update_every == 0 {
            self.q1_target = self.q1.clone();
            self.q2_target = self.q2.clone();
        }
        Ok((l2, l1))
    }

    fn batch_samples(
        &mut self,
        which_task: usize,
    ) -> Result<Vec<(Vec<f64>, usize, f64)>> {
        let b = self.config.batch_size;
        let (buf, q) = if which_task == 2 { (&self.buf2, &self.q2) } else { (&self.buf1, &self.q1) };
        let batch = buf.sample(b, &mut self.rng)?;
        batch
            .transitions
            .iter()
            .map(|t| {
                let a = match t.action {
                    StoredAction::Discrete(a) => a,
                    StoredAction::Continuous(_) => unreachable!("discrete buffers"),
                };
                let qv = q.forward(&t.obs)?[a];
                Ok((t.obs.clone(), a, qv))
            })
            .collect()
    }

    /// Step 1: update π2 by descending `L2(π2) - α L1(g ∘ π2 ∘ h)`; the
    /// encoder and decoder parameters are left untouched.
    pub fn step1(&mut self) -> Result<f64> {
        let samples2 = self.batch_samples(2)?;
        let (l2, grad_l2) = policy_weighted_logp_grads(&self.comp.pi, &samples2)?;
        let samples1 = self.batch_samples(1)?;
        let cg = self.comp.weighted_logp_grads(&samples1)?;
        let alpha = self.config.alpha;
        let grad: Vec<f64> =
            grad_l2.iter().zip(&cg.grad_pi).map(|(a, b)| a - alpha * b).collect();
        self.opt_pi.step(&mut self.comp.pi.params, &grad)?;
        Ok(l2 - alpha * cg.loss)
    }

    /// Step 2: update [h, g] by descending `L1(g ∘ π2 ∘ h)`; the policy's
    /// parameters are left untouched.
    pub fn step2(&mut self) -> Result<f64> {
        let samples1 = self.batch_samples(1)?;
        let cg = self.comp.weighted_logp_grads(&samples1)?;
        if let (Some(opt), Some(grad)) = (self.opt_h.as_mut(), cg.grad_h.as_ref()) {
            let params = self.comp.h.params_mut().expect("net encoder");
            opt.step(params, grad)?;
        }
        if let (Some(opt), Some(grad)) = (self.opt_g.as_mut(), cg.grad_g.as_ref()) {
            let params = self.comp.g.params_mut().expect("net decoder");
            opt.step(params, grad)?;
        }
        Ok(cg.loss)
    }

    pub fn greedy_policy2(&self) -> Result<Policy> {
        Policy::neural(
            self.comp.pi.clone(),
            ActionDecode::Argmax,
            self.task2.observations.clone(),
            self.task2.actions.clone(),
        )
    }

    /// Greedy-policy return estimates (R2(π2), R1(g ∘ π2 ∘ h)).
    pub fn evaluate(&self, rollouts: usize, seed: u64) -> Result<(ReturnEstimate, ReturnEstimate)> {
        let pi2 = self.greedy_policy2()?;
        let r2 = estimate_return(self.task2, &pi2, rollouts, seed)?;
        let r1 = estimate_return(self.task1, &self.comp, rollouts, derive_seed(seed, 1))?;
        Ok((r2, r1))
    }
}

/// Algorithm-1 estimator for discrete-action task pairs: alternating
/// adversarial policy updates and encoder/decoder repair updates, stopping
/// when converged and admissible (or at `max_iters`), then
/// `C = 1 - R1(g ∘ π2 ∘ h) / R*1`.
pub fn estimate_alg1(
    task1: &TaskSpec,
    task2: &TaskSpec,
    h_arch: MapArch,
    g_arch: MapArch,
    pi_hidden_layers: usize,
    config: &EstimatorConfig,
) -> Result<EstimateOutcome> {
    let mut trainer = Alg1Trainer::new(task1, task2, h_arch, g_arch, pi_hidden_layers, config.clone())?;
    let config = config.clone();
    let mut curve = Vec::new();
    let mut tracker = ConvergenceTracker::new(config.convergence_window);
    let (mut last_c1, mut last_c2) = (0.0, 0.0);
    let mut admissible_now = false;
    let mut iters_run = 0;
    let tol = config.admissibility_tolerance;

    for iter in 0..config.max_iters {
        trainer.collect(iter)?;
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
    let arch_note = format!("alg1;h={};g={};pi={pi_hidden_layers}", h_arch.label(), g_arch.label());
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

/// Invariant check used by the property suite: step 1 must change only the
/// policy's parameters, step 2 only the encoder/decoder's.
pub fn check_gradient_partitioning(seed: u64) -> Result<()> {
    let task1 = crate::envs::toy::graded_task();
    let task2 = crate::envs::toy::matching_task();
    let mut config = EstimatorConfig::q_learning_defaults(seed);
    config.batch_size = 16;
    config.warmup_steps = 16;
    config.hidden_width = 8;
    config.env_steps_per_iter = 32;
    let mut trainer = Alg1Trainer::new(
        &task1,
        &task2,
        MapArch::Mlp { hidden_layers: 1 },
        MapArch::Mlp { hidden_layers: 1 },
        1,
        config,
    )?;
    trainer.collect(0)?;
    trainer.critic_update()?;

    let h_before = match &trainer.comp.h {
        MapNet::Net(n) => n.params.clone(),
        MapNet::Identity => vec![],
    };
    let g_before = match &trainer.comp.g {
        MapNet::Net(n) => n.params.clone(),
        MapNet::Identity => vec![],
    };
    let pi_before = trainer.comp.pi.params.clone();
    trainer.step1()?;
    let h_mid = match &trainer.comp.h {
        MapNet::Net(n) => n.params.clone(),
        MapNet::Identity => vec![],
    };
    let g_mid = match &trainer.comp.g {
        MapNet::Net(n) => n.params.clone(),
        MapNet::Identity => vec![],
    };
    if h_mid != h_before || g_mid != g_before {
        return Err(Error::Training("step 1 moved encoder/decoder parameters".into()));
    }
    if trainer.comp.pi.params == pi_before {
        return Err(Error::Training("step 1 did not move the policy".into()));
    }
    let pi_mid = trainer.comp.pi.params.clone();
    trainer.step2()?;
    if trainer.comp.pi.params != pi_mid {
        return Err(Error::Training("step 2 moved policy parameters".into()));
    }
    let h_after = match &trainer.comp.h {
        MapNet::Net(n) => n.params.clone(),
        MapNet::Identity => vec![],
    };
    let g_after = match &trainer.comp.g {
        MapNet::Net(n) => n.params.clone(),
        MapNet::Identity => vec![],
    };
    if h_after == h_mid && g_after == g_mid {
        return Err(Error::Training("step 2 did not move encoder/decoder".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        // Q = 0 everywhere: loss 0 regardless of the policy.
        let logits = vec![vec![0.3, -0.2, 0.5]];
        assert_eq!(q_learning_loss(&[1], &[0.0], &logits).unwrap(), 0.0);

        // B = 1, Q = 2, p(a) = e^-1 => loss = 2. Build logits with
        // softmax 'p0 = e^-1' by solving a two-action system: logits
        // (0, ln(e - 1)) give p0 = 1/e.
        let logits = vec![vec![0.0, (std::f64::consts::E - 1.0).ln()]];
        let loss = q_learning_loss(&[0], &[2.0], &logits).unwrap();
        assert!((loss - 2.0).abs() < 1e-12, "{loss}");

        // Uniform over 3 actions, Q = 1 each, B = 3 => loss = ln 3.
        let logits = vec![vec![0.0; 3]; 3];
        let loss = q_learning_loss(&[0, 1, 2], &[1.0, 1.0, 1.0], &logits).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_partitioning_holds() {
        check_gradient_partitioning(7).unwrap();
    }

    #[test]
    fn estimator_runs_are_bit_deterministic() {
        let task1 = crate::envs::toy::graded_task();
        let task2 = crate::envs::toy::matching_task();
        let mut config = EstimatorConfig::q_learning_defaults(11);
        config.max_iters = 30;
        config.batch_size = 32;
        config.warmup_steps = 32;
        config.hidden_width = 8;
        config.env_steps_per_iter = 16;
        config.eval_every = 5;
        config.eval_rollouts = 10;
        let run = || {
            estimate_alg1(
                &task1,
                &task2,
                MapArch::Mlp { hidden_layers: 1 },
                MapArch::Mlp { hidden_layers: 1 },
                1,
                &config,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.result, b.result);
        assert_eq!(a.pi2.params, b.pi2.params);
        assert_eq!(
            serde_json::to_string(&a.result).unwrap(),
            serde_json::to_string(&b.result).unwrap()
        );
    }
}
