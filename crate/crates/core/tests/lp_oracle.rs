//! Checks the sparse relaxation solver against a small dense two-phase
//! tableau simplex written here from scratch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use electrolyzer_sched::curve::{fit_concave_pwl, reference_curve, ReferenceParams};
use electrolyzer_sched::market::{MarketRecord, MarketSeries};
use electrolyzer_sched::model::{build_milp, build_problem, ElectrolyzerSpec, FleetConfig, MilpInstance, RowSense};
use electrolyzer_sched::solver::{solve_lp, LpStatus};

const EPS: f64 = 1e-9;

/// Tableau over equality rows with nonnegative variables and rhs.
struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    artificial_from: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        *self.rows[i].last().unwrap()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            let f = row[c];
            if i != r && f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost` with Bland's rule. Artificial columns never enter once
    /// `lock_artificials` is set, and any still basic must stay at zero.
    fn maximize(&mut self, cost: &[f64], lock_artificials: bool) -> bool {
        let n = cost.len();
        loop {
            let entering = (0..n).find(|&j| {
                if lock_artificials && j >= self.artificial_from {
                    return false;
                }
                let d = cost[j] - self.basis.iter().zip(&self.rows).map(|(&b, row)| cost[b] * row[j]).sum::<f64>();
                d > EPS
            });
            let Some(c) = entering else { return true };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                let ratio = if lock_artificials && self.basis[i] >= self.artificial_from && a.abs() > EPS {
                    0.0
                } else if a > EPS {
                    self.rhs(i) / a
                } else {
                    continue;
                };
                let key = (ratio, self.basis[i], i);
                if best.is_none_or(|b| key.0 < b.0 - EPS || (key.0 <= b.0 + EPS && key.1 < b.1)) {
                    best = Some(key);
                }
            }
            let Some((_, _, r)) = best else { return false };
            self.pivot(r, c);
        }
    }
}

/// Dense optimum of the continuous relaxation, or `None` if infeasible.
fn dense_relaxation(instance: &MilpInstance) -> Option<f64> {
    // x_j = lower_j + y_j with y_j >= 0; every bound in these instances is finite.
    let n = instance.n_vars();
    let mut constraints: Vec<(Vec<f64>, RowSense, f64)> = Vec::new();
    let mut offset = 0.0;
    for (j, v) in instance.variables.iter().enumerate() {
        assert!(v.lower.is_finite(), "unexpected free variable");
        offset += instance.objective[j] * v.lower;
        if v.upper.is_finite() {
            let mut a = vec![0.0; n];
            a[j] = 1.0;
            constraints.push((a, RowSense::Le, v.upper - v.lower));
        }
    }
    for row in &instance.rows {
        let mut a = vec![0.0; n];
        let mut rhs = row.rhs;
        for &(j, c) in &row.coeffs {
            a[j] += c;
            rhs -= c * instance.variables[j].lower;
        }
        constraints.push((a, row.sense, rhs));
    }

    let m = constraints.len();
    let slacks = constraints.iter().filter(|c| c.1 != RowSense::Eq).count();
    let width = n + slacks + m + 1;
    let artificial_from = n + slacks;
    let mut rows = Vec::with_capacity(m);
    let mut s = n;
    for (i, (a, sense, rhs)) in constraints.into_iter().enumerate() {
        let mut row = vec![0.0; width];
        row[..n].copy_from_slice(&a);
        match sense {
            RowSense::Le => {
                row[s] = 1.0;
                s += 1;
            }
            RowSense::Ge => {
                row[s] = -1.0;
                s += 1;
            }
            RowSense::Eq => {}
        }
        row[width - 1] = rhs;
        if rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        row[artificial_from + i] = 1.0;
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis: (artificial_from..artificial_from + m).collect(), artificial_from };

    let mut phase1 = vec![0.0; width - 1];
    phase1[artificial_from..].iter_mut().for_each(|c| *c = -1.0);
    assert!(tab.maximize(&phase1, false));
    let infeasibility: f64 = (0..m).filter(|&i| tab.basis[i] >= artificial_from).map(|i| tab.rhs(i)).sum();
    if infeasibility > 1e-7 {
        return None;
    }
    let mut phase2 = vec![0.0; width - 1];
    phase2[..n].copy_from_slice(&instance.objective);
    assert!(tab.maximize(&phase2, true), "relaxation unbounded");
    let value: f64 = (0..m).map(|i| phase2[tab.basis[i]] * tab.rhs(i)).sum();
    Some(value + offset)
}

fn random_instance(rng: &mut ChaCha8Rng) -> MilpInstance {
    let hours = rng.gen_range(1..=3);
    let modules = rng.gen_range(1..=2);
    let records = (0..hours)
        .map(|hour| {
            let hsl = rng.gen_range(0.0..25.0);
            MarketRecord {
                hour,
                bid_price: rng.gen_range(0.0..50.0),
                cleared_price: rng.gen_range(-10.0..50.0),
                hsl,
                lsl: 0.0,
                cleared_power: rng.gen_range(0.0..=hsl),
            }
        })
        .collect();
    let cap = rng.gen_range(5.0..20.0);
    let segments = [1, 3, 8][rng.gen_range(0..3)];
    let pwl = fit_concave_pwl(&reference_curve(ReferenceParams::default()).unwrap(), segments, cap).unwrap();
    let problem =
        build_problem(MarketSeries::new(records).unwrap(), FleetConfig::cold(modules, ElectrolyzerSpec::new(cap)), pwl)
            .unwrap();
    build_milp(&problem)
}

#[test]
fn relaxation_matches_dense_tableau() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for k in 0..60 {
        let instance = random_instance(&mut rng);
        let dense = dense_relaxation(&instance).expect("cold-start relaxations are feasible");
        let sparse = solve_lp(&instance);
        assert_eq!(sparse.status, LpStatus::Optimal, "instance {k}");
        let rel = (sparse.objective - dense).abs() / dense.abs().max(1.0);
        assert!(rel <= 1e-6, "instance {k}: sparse {} vs dense {dense}", sparse.objective);
        assert!(instance.max_violation(&sparse.primal) <= 1e-6, "instance {k}: primal infeasible");
    }
}
