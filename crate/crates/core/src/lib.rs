//! Optimal supervision control of malaria transmission under
//! insecticide-treated-net usage.
//!
//! The crate integrates the controlled host-vector model, solves the
//! first-order optimality system with a forward-backward sweep, and checks
//! the result against finite-difference gradients and an independent
//! projected-gradient direct solver.

pub mod error;
pub mod integrator;
pub mod model;
pub mod parallel;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use integrator::{ControlGrid, TimeGrid, Trajectory};
pub use model::{AdjointMode, AdjointVec, CostKind, ItnMortalityPolicy, ModelParams, StateVec};
pub use parallel::Execution;
pub use sweep::{fbs_solve, SolveResult, SweepConfig};
