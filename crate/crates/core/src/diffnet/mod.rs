//! Minimal differentiable MLPs with reverse-mode gradients and optimizers —
//! the parameterization behind neural policies, encoders, decoders, and
//! critics.

mod net;
mod optim;

pub use net::{Activation, GradTape, MlpNet};
pub use optim::{Adam, Sgd};
