//! Bouncy particle samplers.
//!
//! [`global`] is the plain BPS moving every coordinate at each event.
//! [`local`] is the factor-graph LBPS driven by a priority queue of candidate
//! bounce times, one per factor, with lazily updated positions.

pub mod global;
pub mod local;
mod queue;
pub mod solvers;
pub mod trajectory;

pub use global::{bps_run_global, BouncePotential, IsotropicGaussian};
pub use local::{lbps_run, EventCounters, LbpsConfig, LbpsEngine, LbpsEvent};
pub use solvers::{reflect, solve_bounce_normal, solve_bounce_sojourn, solve_bounce_transition};
pub use trajectory::{Trajectory, Triplet};
