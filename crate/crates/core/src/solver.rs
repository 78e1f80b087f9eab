//! Name-based access to every solver.

use std::fmt;
use std::str::FromStr;

use crate::breakpoint::{solve_breakpoint, BreakpointVariant};
use crate::error::Error;
use crate::newton::{solve_nz, NzConfig};
use crate::oracle::{bisection_solve, OracleConfig};
use crate::problem::{ProblemInstance, Solution};
use crate::relaxation::{solve_relaxation, RelaxVariant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Breakpoint(BreakpointVariant),
    Relaxation(RelaxVariant),
    Nz,
    Oracle,
}

impl Algorithm {
    /// The thirteen solvers that return exact optima.
    pub fn exact() -> Vec<Algorithm> {
        BreakpointVariant::ALL
            .into_iter()
            .map(Algorithm::Breakpoint)
            .chain(RelaxVariant::ALL.into_iter().map(Algorithm::Relaxation))
            .collect()
    }

    /// Every solver, in command-line order.
    pub fn all() -> Vec<Algorithm> {
        let mut v = Self::exact();
        v.push(Algorithm::Nz);
        v.push(Algorithm::Oracle);
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Breakpoint(v) => v.name(),
            Algorithm::Relaxation(v) => v.name(),
            Algorithm::Nz => "nz",
            Algorithm::Oracle => "oracle",
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Algorithm::Breakpoint(_) | Algorithm::Relaxation(_))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim().to_ascii_lowercase();
        Algorithm::all()
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or(Error::UnknownAlgorithm(s))
    }
}

/// Runs `alg` with its default configuration.
pub fn solve(inst: &ProblemInstance, alg: Algorithm) -> Solution {
    match alg {
        Algorithm::Breakpoint(v) => solve_breakpoint(inst, v),
        Algorithm::Relaxation(v) => solve_relaxation(inst, v),
        Algorithm::Nz => solve_nz(inst, &NzConfig::default()).0,
        Algorithm::Oracle => bisection_solve(inst, OracleConfig::default()),
    }
}
