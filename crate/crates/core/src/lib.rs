//! Exact solver for box-constrained ℓ0-penalized least squares,
//!
//! ```text
//! min_x ½‖y − Ax‖² + λ‖x‖₀   s.t.  ‖x‖∞ ≤ M,
//! ```
//!
//! by branch-and-bound, with node-screening tests that fix variables or
//! discard whole subtrees from a dual point at almost no cost.
//!
//! The crate also ships the pieces needed to evaluate the solver: an
//! exhaustive reference solver ([`oracle`]), a seeded instance generator
//! ([`datagen`]) and a plain-text instance format ([`io`]).

pub mod bench;
pub mod bnb;
pub mod datagen;
pub mod error;
pub mod io;
pub mod model;
pub mod oracle;
pub mod relaxation;
pub mod screening;

pub use bnb::{solve, solve_with_trace, Exploration, NodeOutcome, NodeTrace, Solution, SolveStats, SolverConfig};
pub use error::{Error, Result};
pub use model::{Instance, Node, PivotValues, Status};
pub use relaxation::{RelaxationAlgorithm, RelaxationConfig, RelaxationResult, Termination};
pub use screening::ScreeningResult;
