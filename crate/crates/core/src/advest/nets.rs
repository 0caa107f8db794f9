use sha2::{Digest, Sha256};

use crate::diffnet::{Activation, GradTape, MlpNet};
use crate::error::{Error, Result};
use crate::reduction::MapArch;
use crate::taskcore::{argmax_lowest, featurize, tanh_scale, Actor, Elem, Space, TaskSpec};

/// Probability floor inside log terms: log p is floored at log(1e-8).
pub const LOGP_FLOOR: f64 = 1e-8;

/// A trainable map stage: the fixed identity or an MLP.
#[derive(Debug, Clone)]
pub enum MapNet {
    Identity,
    Net(MlpNet),
}

impl MapNet {
    pub fn params_mut(&mut self) -> Option<&mut Vec<f64>> {
        match self {
            MapNet::Identity => None,
            MapNet::Net(n) => Some(&mut n.params),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            MapNet::Identity => 0,
            MapNet::Net(n) => n.param_count(),
        }
    }

    pub fn digest(&self) -> String {
        match self {
            MapNet::Identity => "identity".to_string(),
            MapNet::Net(n) => net_digest(n),
        }
    }
}

pub fn net_digest(net: &MlpNet) -> String {
    let mut hasher = Sha256::new();
    for &d in &net.layer_dims {
        hasher.update((d as u64).to_le_bytes());
    }
    for &p in &net.params {
        hasher.update(p.to_le_bytes());
    }
    hasher.finalize().iter().take(16).map(|b| format!("{b:02x}")).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// dL/dz from dL/dp through the softmax: dz_i = p_i (dp_i - Σ_j p_j dp_j).
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, dpi)| pi * (dpi - dot)).collect()
}

fn one_hot(i: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// What a near-identity initialization should reproduce: values (ε-scaled
/// linear chain) or one-hot argmax structure (boosted diagonal logits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityKind {
    Affine,
    Categorical,
}

/// Initialize an MLP that approximates the identity at start of training:
/// diagonal pass-through blocks, everything else zero.
pub fn init_near_identity(
    dims: &[usize],
    activation: Activation,
    kind: IdentityKind,
) -> Result<MlpNet> {
    let channels = dims[0];
    if *dims.last().unwrap() != channels {
        return Err(Error::Config("near-identity init needs matching input/output dims".into()));
    }
    if dims.iter().any(|&d| d < channels) {
        return Err(Error::Config("near-identity init needs hidden width >= input dim".into()));
    }
    if activation != Activation::Tanh {
        return Err(Error::Config("near-identity init is defined for tanh nets".into()));
    }
    let mut net = MlpNet::zeros(dims, activation)?;
    let n_layers = dims.len() - 1;
    let eps = 0.05;
    let mut offset = 0;
    for (l, w) in dims.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let scale = match kind {
            IdentityKind::Affine => {
                if l == 0 {
                    eps
                } else if l + 1 == n_layers {
                    1.0 / eps
                } else {
                    1.0
                }
            }
            IdentityKind::Categorical => {
                if l == 0 {
                    1.0
                } else if l + 1 == n_layers {
                    4.0
                } else {
                    2.0
                }
            }
        };
        for c in 0..channels {
            net.params[offset + c * n_in + c] = scale;
        }
        offset += (n_in + 1) * n_out;
    }
    Ok(net)
}

fn mlp_dims(input: usize, output: usize, hidden_layers: usize, width: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden_layers + 2);
    dims.push(input);
    dims.extend(std::iter::repeat(width).take(hidden_layers));
    dims.push(output);
    dims
}

/// Build the encoder stage for the given architecture descriptor. Finite
/// codomains get a logits head, box codomains a raw vector head.
pub fn build_encoder_net(
    arch: MapArch,
    obs1: &Space,
    obs2: &Space,
    width: usize,
    seed: u64,
) -> Result<MapNet> {
    let input = obs1.feature_dim();
    let output = obs2.feature_dim();
    match arch {
        MapArch::Identity => {
            if obs1 != obs2 {
                return Err(Error::Config(
                    "identity encoder needs identical observation spaces".into(),
                ));
            }
            Ok(MapNet::Identity)
        }
        MapArch::Mlp { hidden_layers } => Ok(MapNet::Net(MlpNet::init(
            &mlp_dims(input, output, hidden_layers, width),
            Activation::Tanh,
            seed,
        )?)),
        MapArch::MlpNearIdentity { hidden_layers } => {
            if obs1 != obs2 {
                return Err(Error::Config("near-identity encoder needs identical spaces".into()));
            }
            let kind =
                if obs2.is_finite() { IdentityKind::Categorical } else { IdentityKind::Affine };
            Ok(MapNet::Net(init_near_identity(
                &mlp_dims(input, output, hidden_layers, width),
                Activation::Tanh,
                kind,
            )?))
        }
    }
}

pub fn build_decoder_net(
    arch: MapArch,
    act2: &Space,
    act1: &Space,
    width: usize,
    seed: u64,
) -> Result<MapNet> {
    let input = act2.feature_dim();
    let output = act1.feature_dim();
    match arch {
        MapArch::Identity => {
            if act2 != act1 {
                return Err(Error::Config("identity decoder needs identical action spaces".into()));
            }
            Ok(MapNet::Identity)
        }
        MapArch::Mlp { hidden_layers } => Ok(MapNet::Net(MlpNet::init(
            &mlp_dims(input, output, hidden_layers, width),
            Activation::Tanh,
            seed,
        )?)),
        MapArch::MlpNearIdentity { hidden_layers } => {
            if act2 != act1 {
                return Err(Error::Config("near-identity decoder needs identical spaces".into()));
            }
            let kind =
                if act1.is_finite() { IdentityKind::Categorical } else { IdentityKind::Affine };
            Ok(MapNet::Net(init_near_identity(
                &mlp_dims(input, output, hidden_layers, width),
                Activation::Tanh,
                kind,
            )?))
        }
    }
}

pub fn build_policy_net(
    obs: &Space,
    action_head: usize,
    hidden_layers: usize,
    width: usize,
    seed: u64,
) -> Result<MlpNet> {
    MlpNet::init(&mlp_dims(obs.feature_dim(), action_head, hidden_layers, width), Activation::Tanh, seed)
}

// ---------------------------------------------------------------------------
// Discrete (Q-learning) composition: probabilities marginalized through the
// encoder/policy/decoder stages so the weighted log-likelihood loss is
// differentiable in all three parameter sets.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DiscreteComposed {
    pub h: MapNet,
    pub pi: MlpNet,
    pub g: MapNet,
    pub obs1: Space,
    pub obs2: Space,
    pub n_act2: usize,
    pub n_act1: usize,
}

/// Gradients of a composed-loss batch; `None` for identity stages.
#[derive(Debug)]
pub struct ComposedGrads {
    pub loss: f64,
    pub grad_h: Option<Vec<f64>>,
    pub grad_pi: Vec<f64>,
    pub grad_g: Option<Vec<f64>>,
}

impl DiscreteComposed {
    fn decoder_rows(&self) -> Result<Vec<(Vec<f64>, Option<GradTape>)>> {
        (0..self.n_act2)
            .map(|a2| match &self.g {
                MapNet::Identity => Ok((one_hot(a2, self.n_act1), None)),
                MapNet::Net(net) => {
                    let (out, tape) = net.forward_tape(&one_hot(a2, self.n_act2))?;
                    Ok((softmax(&out), Some(tape)))
                }
            })
            .collect()
    }

    /// Marginal action distribution of g ∘ π ∘ h at one task-1 observation.
    pub fn comp_prob(&self, o1_feat: &[f64]) -> Result<Vec<f64>> {
        let pg: Vec<Vec<f64>> = self
            .decoder_rows()?
            .into_iter()
            .map(|(p, _)| p)
            .collect();
        let mut pc = vec![0.0; self.n_act1];
        match &self.obs2 {
            Space::Finite { size } => {
                let ph = match &self.h {
                    MapNet::Identity => o1_feat.to_vec(),
                    MapNet::Net(net) => softmax(&net.forward(o1_feat)?),
                };
                for o2 in 0..*size {
                    if ph[o2] == 0.0 {
                        continue;
                    }
                    let pp = softmax(&self.pi.forward(&one_hot(o2, *size))?);
                    for a2 in 0..self.n_act2 {
                        for a1 in 0..self.n_act1 {
                            pc[a1] += ph[o2] * pp[a2] * pg[a2][a1];
                        }
                    }
                }
            }
            Space::Box { .. } => {
                let u = match &self.h {
                    MapNet::Identity => o1_feat.to_vec(),
                    MapNet::Net(net) => net.forward(o1_feat)?,
                };
                let pp = softmax(&self.pi.forward(&u)?);
                for a2 in 0..self.n_act2 {
                    for a1 in 0..self.n_act1 {
                        pc[a1] += pp[a2] * pg[a2][a1];
                    }
                }
            }
        }
        Ok(pc)
    }

    /// Batch loss `-(1/B) Σ q_b log p_comp(a_b | o_b)` and its gradients in
    /// each stage's parameters. Samples are (features of o1, taken a1, Q).
    pub fn weighted_logp_grads(&self, samples: &[(Vec<f64>, usize, f64)]) -> Result<ComposedGrads> {
        let b = samples.len() as f64;
        if samples.is_empty() {
            return Err(Error::Training("empty batch".into()));
        }
        let mut loss = 0.0;
        let mut grad_h = match &self.h {
            MapNet::Identity => None,
            MapNet::Net(n) => Some(vec![0.0; n.param_count()]),
        };
        let mut grad_pi = vec![0.0; self.pi.param_count()];
        let mut grad_g = match &self.g {
            MapNet::Identity => None,
            MapNet::Net(n) => Some(vec![0.0; n.param_count()]),
        };

        let dec = self.decoder_rows()?;
        let pg: Vec<&Vec<f64>> = dec.iter().map(|(p, _)| p).collect();
        // Decoder inputs are the fixed one-hots, so dL/dp accumulates across
        // the whole batch and one backward per a2 suffices.
        let mut dpg_acc = vec![vec![0.0; self.n_act1]; self.n_act2];

        match self.obs2.clone() {
            Space::Finite { size: n2 } => {
                // Same trick for the policy: its inputs are the n2 one-hots.
                let pi_rows: Vec<(Vec<f64>, GradTape)> = (0..n2)
                    .map(|o2| {
                        let (out, tape) = self.pi.forward_tape(&one_hot(o2, n2))?;
                        Ok((softmax(&out), tape))
                    })
                    .collect::<Result<_>>()?;
                let mut dpp_acc = vec![vec![0.0; self.n_act2]; n2];

                for (o1_feat, a1, q) in samples {
                    let (ph, h_tape) = match &self.h {
                        MapNet::Identity => (o1_feat.clone(), None),
                        MapNet::Net(net) => {
                            let (out, tape) = net.forward_tape(o1_feat)?;
                            (softmax(&out), Some((out, tape)))
                        }
                    };
                    let mut pc = 0.0;
                    let mut inner = vec![0.0; n2];
                    for o2 in 0..n2 {
                        let pp = &pi_rows[o2].0;
                        let mut m = 0.0;
                        for a2 in 0..self.n_act2 {
                            m += pp[a2] * pg[a2][*a1];
                        }
                        inner[o2] = m;
                        pc += ph[o2] * m;
                    }
                    if pc <= LOGP_FLOOR {
                        loss += -q * LOGP_FLOOR.ln() / b;
                        continue;
                    }
                    loss += -q * pc.ln() / b;
                    let w = -q / (b * pc);
                    for o2 in 0..n2 {
                        let pp = &pi_rows[o2].0;
                        for a2 in 0..self.n_act2 {
                            dpp_acc[o2][a2] += w * ph[o2] * pg[a2][*a1];
                            dpg_acc[a2][*a1] += w * ph[o2] * pp[a2];
                        }
                    }
                    if let (MapNet::Net(net), Some((out, tape))) = (&self.h, h_tape) {
                        let dph: Vec<f64> = inner.iter().map(|m| w * m).collect();
                        let p = softmax(&out);
                        let dz = softmax_backward(&p, &dph);
                        let (g, _) = net.backward(&tape, &dz)?;
                        let acc = grad_h.as_mut().expect("net has grads");
                        for (a, v) in acc.iter_mut().zip(&g) {
                            *a += v;
                        }
                    }
                }
                for (o2, (pp, tape)) in pi_rows.iter().enumerate() {
                    let dz = softmax_backward(pp, &dpp_acc[o2]);
                    let (g, _) = self.pi.backward(tape, &dz)?;
                    for (a, v) in grad_pi.iter_mut().zip(&g) {
                        *a += v;
                    }
                }
            }
            Space::Box { .. } => {
                for (o1_feat, a1, q) in samples {
                    let (u, h_tape) = match &self.h {
                        MapNet::Identity => (o1_feat.clone(), None),
                        MapNet::Net(net) => {
                            let (out, tape) = net.forward_tape(o1_feat)?;
                            (out, Some(tape))
                        }
                    };
                    let (logits, pi_tape) = self.pi.forward_tape(&u)?;
                    let pp = softmax(&logits);
                    let mut pc = 0.0;
                    for a2 in 0..self.n_act2 {
                        pc += pp[a2] * pg[a2][*a1];
                    }
                    if pc <= LOGP_FLOOR {
                        loss += -q * LOGP_FLOOR.ln() / b;
                        continue;
                    }
                    loss += -q * pc.ln() / b;
                    let w = -q / (b * pc);
                    let dpp: Vec<f64> = (0..self.n_act2).map(|a2| w * pg[a2][*a1]).collect();
                    for a2 in 0..self.n_act2 {
                        dpg_acc[a2][*a1] += w * pp[a2];
                    }
                    let dz = softmax_backward(&pp, &dpp);
                    let (gp, du) = self.pi.backward(&pi_tape, &dz)?;
                    for (a, v) in grad_pi.iter_mut().zip(&gp) {
                        *a += v;
                    }
                    if let (MapNet::Net(net), Some(tape)) = (&self.h, h_tape) {
                        let (g, _) = net.backward(&tape, &du)?;
                        let acc = grad_h.as_mut().expect("net has grads");
                        for (a, v) in acc.iter_mut().zip(&g) {
                            *a += v;
                        }
                    }
                }
            }
        }

        if let (MapNet::Net(net), Some(acc)) = (&self.g, grad_g.as_mut()) {
            for (a2, (p, tape)) in dec.iter().enumerate() {
                let tape = tape.as_ref().expect("net decoder has tapes");
                let dz = softmax_backward(p, &dpg_acc[a2]);
                let (g, _) = net.backward(tape, &dz)?;
                for (a, v) in acc.iter_mut().zip(&g) {
                    *a += v;
                }
            }
        }

        Ok(ComposedGrads { loss, grad_h, grad_pi, grad_g })
    }
}

impl Actor for DiscreteComposed {
    fn act(&self, obs: &Elem) -> Result<Elem> {
        let feat = featurize(&self.obs1, obs)?;
        Ok(Elem::Discrete(argmax_lowest(&self.comp_prob(&feat)?)))
    }

    fn validate_for(&self, task: &TaskSpec) -> Result<()> {
        if task.observations != self.obs1 {
            return Err(Error::Config("composed actor observation space mismatch".into()));
        }
        if task.actions != (Space::Finite { size: self.n_act1 }) {
            return Err(Error::Config("composed actor action space mismatch".into()));
        }
        Ok(())
    }
}

/// Plain weighted log-likelihood loss on a policy net over featurized
/// observations: `-(1/B) Σ q_b log softmax(π(o_b))[a_b]`.
pub fn policy_weighted_logp_grads(
    pi: &MlpNet,
    samples: &[(Vec<f64>, usize, f64)],
) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let b = samples.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pi.param_count()];
    for (feat, a, q) in samples {
        let (logits, tape) = pi.forward_tape(feat)?;
        let p = softmax(&logits);
        if p[*a] <= LOGP_FLOOR {
            loss += -q * LOGP_FLOOR.ln() / b;
            continue;
        }
        loss += -q * p[*a].ln() / b;
        let mut dp = vec![0.0; p.len()];
        dp[*a] = -q / (b * p[*a]);
        let dz = softmax_backward(&p, &dp);
        let (g, _) = pi.backward(&tape, &dz)?;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    Ok((loss, grad))
}

// ---------------------------------------------------------------------------
// Continuous (actor-critic) composition: a1 = g(π(h(o1))) with tanh-scaled
// action heads; gradients flow through critic action inputs.
// ---------------------------------------------------------------------------

fn box_bounds(space: &Space) -> Result<(Vec<f64>, Vec<f64>)> {
    match space {
        Space::Box { lower, upper, .. } => Ok((lower.clone(), upper.clone())),
        Space::Finite { .. } => Err(Error::Config("expected a box space".into())),
    }
}

fn tanh_scale_backward(pre: &[f64], lower: &[f64], upper: &[f64], dout: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(lower.iter().zip(upper))
        .zip(dout)
        .map(|((&y, (&lo, &hi)), &d)| {
            let t = y.tanh();
            d * 0.5 * (hi - lo) * (1.0 - t * t)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ContinuousComposed {
    pub h: MapNet,
    pub pi: MlpNet,
    pub g: MapNet,
    pub obs1: Space,
    pub obs2: Space,
    pub act2: Space,
    pub act1: Space,
}

pub struct ContCompTape {
    h_tape: Option<GradTape>,
    pi_tape: GradTape,
    pi_out: Vec<f64>,
    g_tape: Option<GradTape>,
    g_out: Option<Vec<f64>>,
}

impl ContinuousComposed {
    /// Mean composed action with the tapes for [`ContinuousComposed::backward`].
    pub fn forward_tape(&self, o1_feat: &[f64]) -> Result<(Vec<f64>, ContCompTape)> {
        let (u, h_tape) = match &self.h {
            MapNet::Identity => (o1_feat.to_vec(), None),
            MapNet::Net(net) => {
                let (out, tape) = net.forward_tape(o1_feat)?;
                (out, Some(tape))
            }
        };
        let (pi_out, pi_tape) = self.pi.forward_tape(&u)?;
        let (lo2, hi2) = box_bounds(&self.act2)?;
        let a2 = tanh_scale(&pi_out, &lo2, &hi2);
        let (a1, g_tape, g_out) = match &self.g {
            MapNet::Identity => (a2, None, None),
            MapNet::Net(net) => {
                let (out, tape) = net.forward_tape(&a2)?;
                let (lo1, hi1) = box_bounds(&self.act1)?;
                (tanh_scale(&out, &lo1, &hi1), Some(tape), Some(out))
            }
        };
        Ok((a1, ContCompTape { h_tape, pi_tape, pi_out, g_tape, g_out }))
    }

    /// Chain d(objective)/d(a1) back into (grad_h, grad_pi, grad_g).
    pub fn backward(
        &self,
        tape: &ContCompTape,
        da1: &[f64],
    ) -> Result<(Option<Vec<f64>>, Vec<f64>, Option<Vec<f64>>)> {
        let (lo2, hi2) = box_bounds(&self.act2)?;
        let (da2, grad_g) = match &self.g {
            MapNet::Identity => (da1.to_vec(), None),
            MapNet::Net(net) => {
                let (lo1, hi1) = box_bounds(&self.act1)?;
                let g_out = tape.g_out.as_ref().expect("net decoder recorded output");
                let dy = tanh_scale_backward(g_out, &lo1, &hi1, da1);
                let g_tape = tape.g_tape.as_ref().expect("net decoder recorded tape");
                let (gg, da2) = net.backward(g_tape, &dy)?;
                (da2, Some(gg))
            }
        };
        let dm = tanh_scale_backward(&tape.pi_out, &lo2, &hi2, &da2);
        let (grad_pi, du) = self.pi.backward(&tape.pi_tape, &dm)?;
        let grad_h = match &self.h {
            MapNet::Identity => None,
            MapNet::Net(net) => {
                let h_tape = tape.h_tape.as_ref().expect("net encoder recorded tape");
                let (gh, _) = net.backward(h_tape, &du)?;
                Some(gh)
            }
        };
        Ok((grad_h, grad_pi, grad_g))
    }

    pub fn mean_action(&self, o1_feat: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_tape(o1_feat)?.0)
    }
}

impl Actor for ContinuousComposed {
    fn act(&self, obs: &Elem) -> Result<Elem> {
        let feat = featurize(&self.obs1, obs)?;
        Ok(Elem::Vector(self.mean_action(&feat)?))
    }

    fn validate_for(&self, task: &TaskSpec) -> Result<()> {
        if task.observations != self.obs1 {
            return Err(Error::Config("composed actor observation space mismatch".into()));
        }
        if task.actions != self.act1 {
            return Err(Error::Config("composed actor action space mismatch".into()));
        }
        Ok(())
    }
}

/// Mean action of a continuous policy head at one observation.
pub fn policy_mean_action(pi: &MlpNet, obs_feat: &[f64], action_space: &Space) -> Result<Vec<f64>> {
    let (lo, hi) = box_bounds(action_space)?;
    Ok(tanh_scale(&pi.forward(obs_feat)?, &lo, &hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one_and_backward_is_zero_mean() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let dz = softmax_backward(&p, &[0.5, -1.0, 2.0]);
        // Rows of the softmax Jacobian sum to zero.
        assert!(dz.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn near_identity_affine_reproduces_inputs() {
        let net = init_near_identity(&[3, 8, 8, 3], Activation::Tanh, IdentityKind::Affine).unwrap();
        let x = [0.4, -1.1, 2.0];
        let y = net.forward(&x).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn near_identity_categorical_reproduces_argmax() {
        let net =
            init_near_identity(&[4, 16, 4], Activation::Tanh, IdentityKind::Categorical).unwrap();
        for i in 0..4 {
            let y = net.forward(&one_hot(i, 4)).unwrap();
            assert_eq!(argmax_lowest(&y), i);
        }
    }

    #[test]
    fn identity_stages_compose_to_the_inner_policy() {
        // h = g = identity, pi with fixed logits: comp_prob equals softmax(pi).
        let mut pi = MlpNet::zeros(&[2, 2], Activation::Tanh).unwrap();
        pi.params = vec![2.0, 0.0, 0.0, 2.0, 0.0, 0.0]; // logits = 2 * onehot
        let comp = DiscreteComposed {
            h: MapNet::Identity,
            pi: pi.clone(),
            g: MapNet::Identity,
            obs1: Space::finite(2).unwrap(),
            obs2: Space::finite(2).unwrap(),
            n_act2: 2,
            n_act1: 2,
        };
        for o in 0..2 {
            let pc = comp.comp_prob(&one_hot(o, 2)).unwrap();
            let direct = softmax(&pi.forward(&one_hot(o, 2)).unwrap());
            for (a, b) in pc.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-12);
            }
            let a = comp.act(&Elem::Discrete(o)).unwrap();
            assert_eq!(a, Elem::Discrete(o));
        }
    }

    #[test]
    fn comp_prob_is_a_distribution() {
        let comp = DiscreteComposed {
            h: MapNet::Net(MlpNet::init(&[3, 8, 4], Activation::Tanh, 1).unwrap()),
            pi: MlpNet::init(&[4, 8, 3], Activation::Tanh, 2).unwrap(),
            g: MapNet::Net(MlpNet::init(&[3, 8, 2], Activation::Tanh, 3).unwrap()),
            obs1: Space::boxed(vec![-1.0; 3], vec![1.0; 3]).unwrap(),
            obs2: Space::finite(4).unwrap(),
            n_act2: 3,
            n_act1: 2,
        };
        let pc = comp.comp_prob(&[0.2, -0.4, 0.9]).unwrap();
        assert!((pc.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(pc.iter().all(|&p| p >= 0.0));
    }
}
