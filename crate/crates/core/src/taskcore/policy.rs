use serde::{Deserialize, Serialize};

use crate::diffnet::MlpNet;
use crate::error::{Error, Result};
use crate::taskcore::space::{featurize, Elem, Space};
use crate::taskcore::task::TaskSpec;

/// How a neural policy's raw network output becomes an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionDecode {
    /// Discrete head: one logit per action, lowest index wins ties.
    Argmax,
    /// Continuous head: tanh-squashed and scaled to the action box.
    TanhBox,
}

/// A deterministic memoryless policy: a total map from observations to
/// actions, either tabular or neural.
#[derive(Debug, Clone)]
pub enum Policy {
    Tabular { table: Vec<usize>, n_actions: usize },
    Neural { net: MlpNet, decode: ActionDecode, obs_space: Space, action_space: Space },
}

impl Policy {
    pub fn tabular(table: Vec<usize>, n_actions: usize) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::Config("policy needs at least one action".into()));
        }
        if let Some(&bad) = table.iter().find(|&&a| a >= n_actions) {
            return Err(Error::Config(format!(
                "policy table entry {bad} out of action range {n_actions}"
            )));
        }
        Ok(Policy::Tabular { table, n_actions })
    }

    pub fn neural(net: MlpNet, decode: ActionDecode, obs_space: Space, action_space: Space) -> Result<Self> {
        if net.input_dim() != obs_space.feature_dim() {
            return Err(Error::Config(format!(
                "net input dim {} does not match observation features {}",
                net.input_dim(),
                obs_space.feature_dim()
            )));
        }
        let want = match decode {
            ActionDecode::Argmax => action_space
                .size()
                .ok_or_else(|| Error::Config("argmax decoding needs a finite action space".into()))?,
            ActionDecode::TanhBox => match &action_space {
                Space::Box { dims, .. } => *dims,
                Space::Finite { .. } => {
                    return Err(Error::Config("tanh decoding needs a box action space".into()))
                }
            },
        };
        if net.output_dim() != want {
            return Err(Error::Config(format!(
                "net output dim {} does not match action head {}",
                net.output_dim(),
                want
            )));
        }
        Ok(Policy::Neural { net, decode, obs_space, action_space })
    }
}

/// Anything that acts as a deterministic policy O -> A. Implemented by
/// [`Policy`] and by composed policies.
pub trait Actor: Sync {
    fn act(&self, obs: &Elem) -> Result<Elem>;

    /// Check the actor's spaces against a task before evaluation.
    fn validate_for(&self, task: &TaskSpec) -> Result<()>;
}

/// Lowest index wins ties, so evaluation is reproducible.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Squash raw outputs into the action box: center + half-width * tanh(y).
pub fn tanh_scale(raw: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    raw.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&y, (&lo, &hi))| 0.5 * (lo + hi) + 0.5 * (hi - lo) * y.tanh())
        .collect()
}

impl Actor for Policy {
    fn act(&self, obs: &Elem) -> Result<Elem> {
        match self {
            Policy::Tabular { table, .. } => {
                let i = obs.index()?;
                let a = *table.get(i).ok_or_else(|| {
                    Error::Config(format!("observation {i} outside policy table ({})", table.len()))
                })?;
                Ok(Elem::Discrete(a))
            }
            Policy::Neural { net, decode, obs_space, action_space } => {
                let features = featurize(obs_space, obs)?;
                let out = net.forward(&features)?;
                match decode {
                    ActionDecode::Argmax => Ok(Elem::Discrete(argmax_lowest(&out))),
                    ActionDecode::TanhBox => match action_space {
                        Space::Box { lower, upper, .. } => {
                            Ok(Elem::Vector(tanh_scale(&out, lower, upper)))
                        }
                        Space::Finite { .. } => unreachable!("validated at construction"),
                    },
                }
            }
        }
    }

    fn validate_for(&self, task: &TaskSpec) -> Result<()> {
        match self {
            Policy::Tabular { table, n_actions } => {
                let n_obs = task.observations.size().ok_or_else(|| {
                    Error::Config("tabular policy on a non-finite observation space".into())
                })?;
                let n_act = task
                    .actions
                    .size()
                    .ok_or_else(|| Error::Config("tabular policy on a non-finite action space".into()))?;
                if table.len() != n_obs {
                    return Err(Error::Config(format!(
                        "policy table covers {} observations, task has {n_obs}",
                        table.len()
                    )));
                }
                if *n_actions != n_act {
                    return Err(Error::Config(format!(
                        "policy has {n_actions} actions, task has {n_act}"
                    )));
                }
                Ok(())
            }
            Policy::Neural { obs_space, action_space, .. } => {
                if obs_space != &task.observations {
                    return Err(Error::Config("policy observation space differs from task".into()));
                }
                if action_space != &task.actions {
                    return Err(Error::Config("policy action space differs from task".into()));
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::{Activation, MlpNet};

    #[test]
    fn tabular_rejects_out_of_range_actions() {
        assert!(Policy::tabular(vec![0, 2], 2).is_err());
        assert!(Policy::tabular(vec![0, 1], 2).is_ok());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_lowest(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax_lowest(&[1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn zero_net_policy_picks_action_zero() {
        let net = MlpNet::zeros(&[3, 4, 2], Activation::Tanh).unwrap();
        let p = Policy::neural(
            net,
            ActionDecode::Argmax,
            Space::finite(3).unwrap(),
            Space::finite(2).unwrap(),
        )
        .unwrap();
        let a = p.act(&Elem::Discrete(1)).unwrap();
        assert_eq!(a, Elem::Discrete(0));
    }

    #[test]
    fn tanh_scaling_maps_into_box() {
        let out = tanh_scale(&[1000.0, -1000.0], &[-2.0, 0.0], &[2.0, 4.0]);
        assert!((out[0] - 2.0).abs() < 1e-9);
        assert!((out[1] - 0.0).abs() < 1e-9);
    }
}
