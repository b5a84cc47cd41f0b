//! Minimum probability of lifetime ruin when the retiree is uncertain about
//! the drift of the risky asset.
//!
//! The crate solves the robust Hamilton-Jacobi-Bellman boundary value problem
//! on `[b, c/r]`, extracts the optimal investment and adversarial drift
//! distortion, and checks the result against closed forms, a small-ambiguity
//! expansion and Monte Carlo simulation.

pub mod asymptotics;
pub mod banded;
pub mod closed_forms;
pub mod error;
pub mod hjb_solver;
pub mod model;
pub mod montecarlo;
pub mod policy_eval;

pub use error::{ParamError, SolveError};
pub use hjb_solver::{solve, SolverOptions, ValueSolution};
pub use model::{derive, make_grid, DerivedConstants, Grid, ModelParams};
