//! Self-contained mixed-binary linear programming.
//!
//! The LP engine is a bounded-variable revised simplex (primal with a
//! composite phase one, plus a dual simplex used to re-optimize after bound
//! changes). [`solve_milp`] runs best-bound branch-and-bound on top of it,
//! with plunging, pseudocost branching and reduced-cost fixing.
//!
//! Problems can be written to and read from CPLEX LP text via [`lp_format`].

mod branch;
mod error;
pub mod lp_format;
mod params;
mod problem;
mod simplex;

pub use branch::{solve_milp, LogEntry, SolveResult, SolveStatus};
pub use error::MilpError;
pub use params::{Emphasis, SolverParams};
pub use problem::{Constraint, MilpProblem, ObjectiveSense, RowSense, RowViolation, VarKind, Variable};
pub use simplex::{solve_lp, LpOutcome, LpSolution};
