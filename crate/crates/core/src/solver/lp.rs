//! LP relaxation of a [`MilpInstance`], with hydrogen-curve rows added on
//! demand.

use serde::{Deserialize, Serialize};

use super::simplex::{Basis, LpStatus, Simplex, FEAS_TOL};
use crate::model::{MilpInstance, RowFamily, RowSense};

/// Stand-in for infinite column bounds; a solution resting on it is
/// reported as unbounded.
const ARTIFICIAL_BOUND: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values per instance variable; empty unless optimal.
    pub primal: Vec<f64>,
    /// Maximized objective, USD.
    pub objective: f64,
    pub iterations: usize,
}

/// Solves the continuous relaxation of `instance` (binaries in their
/// bounds) and maximizes its objective.
pub fn solve_lp(instance: &MilpInstance) -> LpSolution {
    let mut relax = Relaxation::new(instance);
    let status = relax.solve(usize::MAX);
    let optimal = status == LpStatus::Optimal;
    LpSolution {
        status,
        primal: if optimal { relax.primal().to_vec() } else { Vec::new() },
        objective: if optimal { relax.objective() } else { f64::NAN },
        iterations: relax.iterations(),
    }
}

/// Relaxation state reused across branch-and-bound nodes.
#[derive(Debug, Clone)]
pub(crate) struct Relaxation<'a> {
    pub instance: &'a MilpInstance,
    lp: Simplex,
    /// Lazily separated rows, grouped so that at most one row per group is
    /// added in each separation round.
    groups: Vec<Vec<usize>>,
    in_lp: Vec<bool>,
    artificial: Vec<bool>,
}

fn row_bounds(sense: RowSense, rhs: f64) -> (f64, f64) {
    match sense {
        RowSense::Le => (f64::NEG_INFINITY, rhs),
        RowSense::Ge => (rhs, f64::INFINITY),
        RowSense::Eq => (rhs, rhs),
    }
}

impl<'a> Relaxation<'a> {
    pub fn new(instance: &'a MilpInstance) -> Self {
        Self::with_hint(instance, None)
    }

    /// As [`Relaxation::new`], also seeding each lazy group with the row
    /// tightest at `hint` and its neighbors.
    pub fn with_hint(instance: &'a MilpInstance, hint: Option<&[f64]>) -> Self {
        let n = instance.n_vars();
        let mut artificial = vec![false; n];
        let mut lo = Vec::with_capacity(n);
        let mut up = Vec::with_capacity(n);
        for (j, v) in instance.variables.iter().enumerate() {
            let l = if v.lower.is_finite() { v.lower } else { -ARTIFICIAL_BOUND };
            let u = if v.upper.is_finite() { v.upper } else { ARTIFICIAL_BOUND };
            artificial[j] = !(v.lower.is_finite() && v.upper.is_finite());
            lo.push(l);
            up.push(u);
        }
        let cost = instance.objective.iter().map(|c| -c).collect();
        let mut lp = Simplex::new(cost, lo, up);

        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
        let mut in_lp = vec![false; instance.rows.len()];
        for (i, row) in instance.rows.iter().enumerate() {
            match (row.family, row.module) {
                (RowFamily::HydrogenCurve, Some(m)) => {
                    let g = *group_of.entry((row.hour, m)).or_insert_with(|| {
                        groups.push(Vec::new());
                        groups.len() - 1
                    });
                    groups[g].push(i);
                }
                _ => {
                    let (l, u) = row_bounds(row.sense, row.rhs);
                    lp.add_row(&row.coeffs, l, u);
                    in_lp[i] = true;
                }
            }
        }
        // seed each group with its steepest and flattest segment
        for g in &groups {
            let mut seed: Vec<usize> = [g.first(), g.last()].into_iter().flatten().copied().collect();
            if let Some(x) = hint {
                let slack = |&i: &usize| instance.rows[i].rhs - instance.rows[i].activity(x);
                if let Some(k) = (0..g.len()).min_by(|&a, &b| slack(&g[a]).total_cmp(&slack(&g[b]))) {
                    seed.extend(g[k.saturating_sub(1)..(k + 2).min(g.len())].iter().copied());
                }
            }
            for &i in &seed {
                if !in_lp[i] {
                    let row = &instance.rows[i];
                    let (l, u) = row_bounds(row.sense, row.rhs);
                    lp.add_row(&row.coeffs, l, u);
                    in_lp[i] = true;
                }
            }
        }
        Self { instance, lp, groups, in_lp, artificial }
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.lp.set_bounds(j, lo, up);
    }

    pub fn save_basis(&self) -> Basis {
        self.lp.save_basis()
    }

    pub fn load_basis(&mut self, basis: &Basis) {
        self.lp.load_basis(basis);
    }

    pub fn primal(&self) -> &[f64] {
        self.lp.primal()
    }

    pub fn objective(&self) -> f64 {
        -self.lp.objective()
    }

    pub fn iterations(&self) -> usize {
        self.lp.iterations
    }

    /// Solves to optimality over all rows, adding violated lazy rows until
    /// none remain.
    pub fn solve(&mut self, max_iterations: usize) -> LpStatus {
        let start = self.lp.iterations;
        loop {
            let budget = max_iterations.saturating_sub(self.lp.iterations - start);
            let status = self.lp.solve(budget);
            if status != LpStatus::Optimal {
                return status;
            }
            if self.separate() == 0 {
                break;
            }
        }
        let x = self.lp.primal();
        let unbounded = self.artificial.iter().enumerate().any(|(j, &a)| a && x[j].abs() >= 0.5 * ARTIFICIAL_BOUND);
        if unbounded {
            LpStatus::Unbounded
        } else {
            LpStatus::Optimal
        }
    }

    /// Adds the most violated inactive row of every group; returns how many
    /// rows were added.
    fn separate(&mut self) -> usize {
        let x = self.lp.primal().to_vec();
        let mut added = 0;
        for g in 0..self.groups.len() {
            let mut worst: Option<(usize, f64)> = None;
            for &i in &self.groups[g] {
                if self.in_lp[i] {
                    continue;
                }
                let v = self.instance.rows[i].violation(&x);
                if v > FEAS_TOL && worst.is_none_or(|w| v > w.1) {
                    worst = Some((i, v));
                }
            }
            if let Some((i, _)) = worst {
                let row = &self.instance.rows[i];
                let (l, u) = row_bounds(row.sense, row.rhs);
                self.lp.add_row(&row.coeffs, l, u);
                self.in_lp[i] = true;
                added += 1;
            }
        }
        added
    }
}
