//! Solving backends: branch-and-bound over the dense simplex, the
//! multi-start local solver for the original nonconvex problems, and an
//! exhaustive grid oracle for small instances.

pub mod bnb;
pub mod grid;
pub mod local;
pub mod simplex;

use serde::Serialize;

pub use bnb::{solve_milp, MilpParams};
pub use grid::{solve_grid_ap, solve_grid_mp};
pub use local::{polish_mp, solve_local_ap, solve_local_mp, LocalParams};
pub use simplex::{LpEngine, LpSolution, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub simplex_iterations: usize,
    pub wall_time: f64,
}

impl SolveStats {
    pub fn accumulate(&mut self, other: &SolveStats) {
        self.nodes += other.nodes;
        self.simplex_iterations += other.simplex_iterations;
        self.wall_time += other.wall_time;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective in the problem's own sense (NaN without a solution).
    pub objective: f64,
    /// Values indexed by variable; empty without a solution.
    pub assignment: Vec<f64>,
    /// Best proven bound on the objective.
    pub bound: f64,
    /// `|objective − bound| / max(1e-9, |objective|)`.
    pub gap: f64,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        !self.assignment.is_empty()
    }

    pub(crate) fn without_solution(status: SolveStatus, stats: SolveStats) -> Self {
        Self {
            status,
            objective: f64::NAN,
            assignment: Vec::new(),
            bound: f64::NAN,
            gap: f64::INFINITY,
            stats,
        }
    }
}

pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    (incumbent - bound).abs() / incumbent.abs().max(1e-9)
}
