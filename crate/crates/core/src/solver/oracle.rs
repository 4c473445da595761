//! Exhaustive enumeration of on/off patterns for small instances.

use super::bnb::Search;
use super::{MipOptions, MipResult, MipStatus, SolverError};
use crate::model::{build_milp, ScheduleProblem};

/// Largest `T * M` accepted by [`enumerate_oracle`].
pub const ORACLE_MAX_BINARIES: usize = 16;

/// Solves the continuous LP for every on/off pattern and keeps the best.
/// Startup indicators are not enumerated; the startup rows pin them once
/// the on/off values are fixed. `nodes` in the result counts the leaves.
pub fn enumerate_oracle(problem: &ScheduleProblem) -> Result<MipResult, SolverError> {
    let (hours, modules) = (problem.horizon(), problem.n_modules());
    let n = hours * modules;
    if n > ORACLE_MAX_BINARIES {
        return Err(SolverError::TooLarge { hours, modules, limit: ORACLE_MAX_BINARIES });
    }
    let instance = build_milp(problem);
    let mut search = Search::new(&instance, MipOptions::default());
    let vars = search.branch_vars().to_vec();
    for &j in &vars {
        search.fix(j, false);
    }
    search.solve_and_offer();
    // Gray code: consecutive patterns differ in exactly one binary.
    let mut prev = 0usize;
    for k in 1..(1usize << n) {
        let gray = k ^ (k >> 1);
        let bit = (gray ^ prev).trailing_zeros() as usize;
        search.fix(vars[bit], gray & (1 << bit) != 0);
        search.solve_and_offer();
        prev = gray;
    }
    let status = if search.incumbent.is_some() { MipStatus::Optimal } else { MipStatus::Infeasible };
    let bound = search.incumbent.as_ref().map_or(f64::NEG_INFINITY, |(v, _)| *v);
    Ok(search.result(status, bound))
}
