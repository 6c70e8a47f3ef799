//! Simulation of compliant alignment between a manipulator end-effector and a
//! free-floating target.
//!
//! * [`sim1d`]: the one-dimensional manipulator/target contact model and its
//!   parameter sweeps.
//! * [`plant2d`]: planar rigid bodies with funnel-shaped contact and friction.
//! * [`control`]: impedance, force PI and apparent inertia reduction.
//! * [`scenario`]: the chase/contact/alignment experiment and its metrics.
//! * [`config`] and [`cli`]: file-driven runs from the command line.

pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod fmt;
pub mod parallel;
pub mod plant2d;
pub mod scenario;
pub mod sim1d;
pub mod types;

pub use error::{Result, SimError};
pub use types::{
    normalize_angle, rotate_wrench, wrench_project, DiagonalSelector, PlanarPose, PlanarTwist,
    PlanarWrench, TimeStamp,
};
