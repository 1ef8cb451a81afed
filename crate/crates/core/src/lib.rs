//! Smooth sliding mode control for n-th order uncertain nonlinear plants
//! `x^{(n)} = f(x) + b(x) u`, with numerical checks of the controller's
//! reaching-time guarantee and steady-state tracking-error bounds.
//!
//! The pieces, bottom-up:
//!
//! * [`surface`]: sliding surface `s = (d/dt + λ)^{n-1} x̃`, its rate and the
//!   boundary-layer distance `s_φ`.
//! * [`smoothing`]: sign, saturation and tanh switching functions.
//! * [`controller`]: equivalent control, robust gain and the control law.
//! * [`bounds`]: the ζ_i table, convergence region Φ and the 2^i comparison.
//! * [`plant`], [`trajectory`], [`sim`], [`log`]: ground-truth plants, desired
//!   trajectories, RK4 closed-loop simulation and CSV logs.
//! * [`verify`]: checks over logs, worst-case witness search, gain sampling.
//! * [`scenario`]: scenario files and the shipped benchmark plants.

pub mod bounds;
pub mod controller;
pub mod error;
pub mod figures;
pub mod log;
pub mod plant;
pub mod scenario;
pub mod sim;
pub mod smoothing;
pub mod surface;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
