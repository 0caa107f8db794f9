//! Tasks, policies, rollout/return evaluation, and admissibility.

mod eval;
mod policy;
mod space;
mod task;

pub use eval::{
    enumerate_admissible, estimate_return, exact_return, is_admissible, rollout, Candidates,
    EvalMode, ReturnEstimate, Step, Trajectory, ENUMERATION_CAP, EXACT_TOL,
};
pub use policy::{argmax_lowest, tanh_scale, ActionDecode, Actor, Policy};
pub use space::{featurize, Elem, Space};
pub use task::{sample_row, Model, ProbRow, Simulator, TabularModel, TaskSpec};
