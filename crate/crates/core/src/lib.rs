//! Direct trajectory optimization by equality-constrained Langevin
//! diffusion.
//!
//! Decision variables and Lagrange multipliers evolve together under an
//! annealed stochastic differential equation whose drift is the gradient
//! of an augmented-Lagrangian merit. Optimal control problems are
//! transcribed into equality-constrained programs ([`nlp`]), solved by the
//! diffusion ([`solver`]) or by deterministic baselines ([`baselines`]),
//! and written out as CSV traces and JSON summaries ([`io`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod diffgrad;
pub mod dual;
pub mod error;
pub mod io;
pub mod nlp;
pub mod problems;
pub mod solver;

pub use baselines::{bfgs_penalty, gradient_descent_cdo, BaselineConfig};
pub use diffgrad::GradientMethod;
pub use dual::{Dual, Scalar};
pub use error::{Error, Result};
pub use nlp::{DecisionVector, Layout, NlpProblem, OcpDefinition, Transcription};
pub use problems::{Problem, ProblemKind};
pub use solver::{
    drift, energy, noise_schedule, solve, solve_batch, step, ChainState, Solution, SolveError,
    SolverConfig, Trace,
};
