//! In-repo MILP machinery: a sparse revised simplex, branch-and-bound over
//! the on/off binaries, and an exhaustive oracle for small instances.

// Index loops read closer to the linear algebra they implement.
#![allow(clippy::needless_range_loop)]

mod bnb;
mod heuristic;
mod lp;
mod lu;
mod oracle;
mod simplex;

pub use bnb::{solve_milp, solve_milp_from};
pub use heuristic::warm_start_heuristic;
pub use lp::{solve_lp, LpSolution};
pub use oracle::{enumerate_oracle, ORACLE_MAX_BINARIES};
pub use simplex::LpStatus;

use serde::{Deserialize, Serialize};

use crate::model::{ModelError, Schedule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("instance too large for enumeration: {hours} hours x {modules} modules exceeds {limit} binaries")]
    TooLarge { hours: usize, modules: usize, limit: usize },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchingRule {
    /// Variable closest to 0.5; ties go to the lowest index.
    MostFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeSelection {
    /// Highest bound first, oldest first among ties, with depth-first dives.
    BestBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MipOptions {
    pub gap_tolerance: f64,
    pub integrality_tolerance: f64,
    pub node_limit: Option<usize>,
    /// Seconds. Runs stopped by time are not reproducible.
    pub time_limit: Option<f64>,
    pub branching: BranchingRule,
    pub node_selection: NodeSelection,
    /// Window improvement passes over the horizon once an incumbent exists.
    pub improvement_passes: usize,
    /// Hours freed in each improvement window.
    pub improvement_window: usize,
    /// Node budget of each improvement sub-search.
    pub improvement_nodes: usize,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-6,
            integrality_tolerance: 1e-6,
            node_limit: None,
            time_limit: None,
            branching: BranchingRule::MostFractional,
            node_selection: NodeSelection::BestBound,
            improvement_passes: 0,
            improvement_window: 6,
            improvement_nodes: 200,
        }
    }
}

impl MipOptions {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidOptions(m.into()));
        if !(self.gap_tolerance > 0.0) {
            return bad("gap tolerance must be positive");
        }
        if !(self.integrality_tolerance > 0.0 && self.integrality_tolerance < 0.5) {
            return bad("integrality tolerance must lie in (0, 0.5)");
        }
        if matches!(self.time_limit, Some(t) if !(t > 0.0)) {
            return bad("time limit must be positive");
        }
        if self.improvement_passes > 0 && self.improvement_window == 0 {
            return bad("improvement window must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    GapReached,
    LimitHit,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Schedule>,
    /// Instance vector of the incumbent.
    #[serde(skip)]
    pub solution: Vec<f64>,
    /// USD, upper bound on the optimum (maximization).
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
}

impl MipResult {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|s| s.objective_value)
    }
}

/// Relative gap between an incumbent and a bound.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((bound - incumbent) / bound.abs().max(1.0)).max(0.0)
}

/// Narrow contract for engines able to solve a [`crate::model::MilpInstance`];
/// lets an external solver replace the in-repo one.
pub trait MilpBackend {
    fn name(&self) -> &str;
    fn solve(
        &self,
        instance: &crate::model::MilpInstance,
        options: &MipOptions,
        starts: &[Schedule],
    ) -> Result<MipResult, SolverError>;
}

/// The in-repo branch-and-bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchAndBound;

impl MilpBackend for BranchAndBound {
    fn name(&self) -> &str {
        "branch-and-bound"
    }

    fn solve(
        &self,
        instance: &crate::model::MilpInstance,
        options: &MipOptions,
        starts: &[Schedule],
    ) -> Result<MipResult, SolverError> {
        solve_milp_from(instance, options, starts)
    }
}
