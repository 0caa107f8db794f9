//! Desk-scale task generators: the rotational gridworld family with its
//! analytic encoder/decoder, the cartpole up/down pair, and a continuous
//! speed-tracking stand-in.

pub mod cartpole;
pub mod gridworld;
pub mod registry;
pub mod speedtrack;
pub mod toy;

pub use cartpole::{make_cartpole, make_cartpole_with, CartpoleParams, CartpoleSim, GravityDir};
pub use gridworld::{
    make_gridworld, rotate_point, rotation_decoder, rotation_decoder_space, GoalDir,
    GridWorldFamily, GridWorldParams,
};
pub use registry::resolve_map;
pub use speedtrack::{
    calibrate_success_threshold, make_speed_tracker, make_speed_tracker_with, CalibrationOutcome,
    SpeedTrackParams, SpeedTrackSim,
};
