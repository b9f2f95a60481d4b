//! Exact and heuristic solvers for [`Bilp`](crate::problems::Bilp) instances.
//!
//! * [`brute_force`]: exhaustive depth-first enumeration, the test oracle.
//! * [`solve_lp`]: Lagrangian dual bound by projected subgradient steps.
//! * [`branch_and_bound`]: best-first search over simplex relaxations.
//! * [`relaxed_heuristic`]: rounds the Lagrangian primal average and repairs it.

mod bnb;
mod brute;
mod heuristic;
mod lagrange;

use std::time::Duration;

pub use bnb::{branch_and_bound, branch_and_bound_with, solve_relaxation, BnbOptions};
pub use brute::{brute_force, MAX_BRUTE_BINARIES};
pub use heuristic::relaxed_heuristic;
pub use lagrange::{solve_lp, LagrangeOptions, LpState};

use thiserror::Error;

use crate::problems::ProblemError;

/// Default wall-clock budget per instance.
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(300);

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance has {binaries} binaries, brute force handles at most {max}")]
    TooLarge { binaries: usize, max: usize },
    #[error("no battery-feasible repair: {0}")]
    RepairFailed(String),
    #[error("relaxation failed: {0}")]
    Relaxation(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Feasible { gap: f64 },
    Infeasible,
    /// The time limit expired before any feasible point was found.
    CapExceeded,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Feasible { .. } => "feasible",
            Status::Infeasible => "infeasible",
            Status::CapExceeded => "cap_exceeded",
        }
    }

    pub fn has_solution(&self) -> bool {
        matches!(self, Status::Optimal | Status::Feasible { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: Status,
    /// Objective in Joule; `+∞` without a solution.
    pub objective: f64,
    /// Variable values (bits for binaries) of the returned solution.
    pub x: Option<Vec<f64>>,
    pub nodes: u64,
    pub wall_time: Duration,
    pub dual_bound: f64,
}

impl SolveReport {
    pub(crate) fn without_solution(status: Status, nodes: u64, wall_time: Duration, dual_bound: f64) -> Self {
        SolveReport { status, objective: f64::INFINITY, x: None, nodes, wall_time, dual_bound }
    }

    /// Relative gap `(objective - bound) / max(1, |objective|)`.
    pub fn gap(&self) -> f64 {
        relative_gap(self.objective, self.dual_bound)
    }
}

pub(crate) fn relative_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

/// Objective tolerance used for incumbent comparisons.
pub(crate) fn objective_tol(value: f64) -> f64 {
    1e-9 * value.abs().max(1.0)
}
