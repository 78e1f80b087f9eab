//! Solvers for the continuous separable convex resource allocation problem
//! with one linear constraint and box bounds.

pub mod breakpoint;
pub mod error;
pub mod family;
pub mod generate;
pub mod io;
pub mod newton;
pub mod oracle;
pub mod pegging;
pub mod problem;
pub mod relaxation;
pub mod select;
pub mod solver;
pub mod sum;

pub use breakpoint::{solve_breakpoint, solve_breakpoint_observed, BreakpointVariant};
pub use error::{Error, Result};
pub use family::interior_solve;
pub use generate::{generate, GenSpec};
pub use io::{read_instance, read_solution, write_instance, write_solution};
pub use newton::{nz_step, psi, psi_minus, psi_plus, solve_nz, NzConfig, NzStep, NzTrace};
pub use oracle::{bisection_solve, interior_count, verify, OracleConfig};
pub use pegging::{Decision, IterationEvent, PegSets, SetView, SolveObserver};
pub use problem::{
    compute_breakpoints, eval_objective, kkt_residual, primal_from_dual, Breakpoints, Family,
    KktReport, Params, ProblemInstance, Sense, Solution, Status,
};
pub use relaxation::{solve_relaxation, solve_relaxation_observed, RelaxState, RelaxVariant};
pub use select::quickselect_median;
pub use solver::{solve, Algorithm};
