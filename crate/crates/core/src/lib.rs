//! Adaptive DoF mapping control for a simulated pick-and-place teleoperation task.
//!
//! The crate models a gripper driven by a two-axis input device. Besides the
//! classic mode-switching scheme it implements two adaptive variants that map
//! the single input axis onto a suggested multi-DoF direction.

pub mod batch;
pub mod cli;
pub mod config;
pub mod control;
pub mod motion;
pub mod pilot;
pub mod server;
pub mod session;
pub mod stats;
pub mod suggest;
pub mod task;
