//! The adversarial relative-complexity estimator: alternating minimax
//! training of an inner policy against a trainable encoder/decoder pair,
//! with a Q-learning instantiation for discrete actions, an actor-critic
//! instantiation for continuous ones, and the α-sweep selection protocol.

mod actor_critic;
mod config;
mod driver;
mod nets;
mod qlearn;
mod replay;
mod sweep;

pub use crate::reduction::MapArch;
pub use actor_critic::{estimate_alg2, train_single_actor_critic, Alg2Trainer, SingleTrainOutcome};
pub use config::{derive_seed, EstimatorConfig, Exploration};
pub use driver::{CurvePoint, EstimateOutcome};
pub use nets::{
    build_decoder_net, build_encoder_net, build_policy_net, init_near_identity, net_digest,
    policy_mean_action, policy_weighted_logp_grads, softmax, softmax_backward, ContinuousComposed,
    DiscreteComposed, IdentityKind, MapNet, LOGP_FLOOR,
};
pub use qlearn::{check_gradient_partitioning, estimate_alg1, q_learning_loss, Alg1Trainer};
pub use replay::{ReplayBuffer, StoredAction, Transition, TransitionBatch};
pub use sweep::{alpha_sweep, model_complexity_study, StudyCell, StudySpace, SweepJob, SweepResult};
