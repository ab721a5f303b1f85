//! Reinforcement-learning benchmark for planar AUV docking: a 3-DOF vehicle
//! simulator, a shaped docking reward, from-scratch TD3/SAC/PPO learners and
//! a training/evaluation harness.

pub mod agents;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod reward;

pub use config::RunConfig;
pub use error::{DockError, Result};
