//! Best-bound branch-and-bound over the on/off binaries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use super::lp::Relaxation;
use super::simplex::{Basis, LpStatus};
use super::{relative_gap, MipOptions, MipResult, MipStatus, SolverError};
use crate::model::{MilpInstance, RowFamily, Schedule, VarKind};

/// Node LPs stopping on this many iterations leave the search incomplete.
const NODE_ITERATION_LIMIT: usize = 2_000_000;
/// Largest row violation accepted for an incumbent vector.
const INCUMBENT_TOL: f64 = 1e-7;

pub fn solve_milp(instance: &MilpInstance, options: &MipOptions) -> Result<MipResult, SolverError> {
    solve_milp_from(instance, options, &[])
}

/// Branch-and-bound seeded with known schedules. Each start contributes its
/// on/off pattern; the continuous part is re-optimized.
pub fn solve_milp_from(
    instance: &MilpInstance,
    options: &MipOptions,
    starts: &[Schedule],
) -> Result<MipResult, SolverError> {
    options.validate()?;
    let vectors = starts.iter().map(|s| instance.vector_from_schedule(s)).collect::<Result<Vec<_>, _>>()?;
    let mut search = Search::with_hint(instance, options.clone(), vectors.last().map(Vec::as_slice));
    for x in &vectors {
        search.try_pattern(x);
    }
    let mut result = search.run();
    if options.improvement_passes > 0 && search.incumbent.is_some() && result.status != MipStatus::Optimal {
        search.improve();
        result = search.result(result.status, result.best_bound);
    }
    Ok(result)
}

#[derive(Debug, Clone)]
struct Node {
    /// (variable, value) fixings on the path from the root
    fixes: Rc<Vec<(usize, bool)>>,
    basis: Option<Rc<Basis>>,
    bound: f64,
    id: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    /// Max-heap order: larger bound first, then smaller id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.id.cmp(&self.id))
    }
}

enum Outcome {
    Pruned,
    Branched(Node, Node),
}

pub(crate) struct Search<'a> {
    instance: &'a MilpInstance,
    options: MipOptions,
    relax: Relaxation<'a>,
    branch_vars: Vec<usize>,
    root_bounds: Vec<(f64, f64)>,
    applied: Vec<usize>,
    pub incumbent: Option<(f64, Vec<f64>)>,
    next_id: usize,
    pub nodes: usize,
    incomplete: bool,
    /// Simplex iterations spent in improvement windows.
    window_iterations: usize,
    started: Instant,
    hydrogen_groups: Vec<(usize, Vec<usize>)>,
}

impl<'a> Search<'a> {
    pub fn new(instance: &'a MilpInstance, options: MipOptions) -> Self {
        Self::with_hint(instance, options, None)
    }

    /// Search whose relaxation starts from the curve rows active at `hint`.
    pub fn with_hint(instance: &'a MilpInstance, options: MipOptions, hint: Option<&[f64]>) -> Self {
        let on: Vec<usize> =
            instance.integer_vars().filter(|&j| matches!(instance.variables[j].kind, VarKind::On { .. })).collect();
        let branch_vars = if on.is_empty() { instance.integer_vars().collect() } else { on };
        let root_bounds = instance.variables.iter().map(|v| (v.lower, v.upper)).collect();
        Self {
            instance,
            options,
            relax: Relaxation::with_hint(instance, hint),
            branch_vars,
            root_bounds,
            applied: Vec::new(),
            incumbent: None,
            next_id: 0,
            nodes: 0,
            incomplete: false,
            window_iterations: 0,
            started: Instant::now(),
            hydrogen_groups: hydrogen_groups(instance),
        }
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((v, _)) => v + self.options.gap_tolerance * v.abs().max(1.0),
            None => f64::NEG_INFINITY,
        }
    }

    fn out_of_budget(&self) -> bool {
        self.options.node_limit.is_some_and(|l| self.nodes >= l)
            || self.options.time_limit.is_some_and(|t| self.started.elapsed().as_secs_f64() >= t)
    }

    fn apply(&mut self, fixes: &[(usize, bool)]) {
        for &j in &self.applied {
            let (l, u) = self.root_bounds[j];
            self.relax.set_bounds(j, l, u);
        }
        self.applied.clear();
        for &(j, v) in fixes {
            let v = f64::from(u8::from(v));
            self.relax.set_bounds(j, v, v);
            self.applied.push(j);
        }
    }

    /// Fixes every branching variable to the rounding of `x`, re-optimizes
    /// the rest and offers the result as an incumbent.
    pub fn try_pattern(&mut self, x: &[f64]) -> bool {
        let fixes: Vec<(usize, bool)> = self.branch_vars.iter().map(|&j| (j, x[j] >= 0.5)).collect();
        self.apply(&fixes);
        let status = self.relax.solve(NODE_ITERATION_LIMIT);
        if status != LpStatus::Optimal {
            return false;
        }
        let x = self.relax.primal().to_vec();
        self.offer(x)
    }

    /// Accepts `x` as the incumbent when it is integral, feasible and better.
    fn offer(&mut self, mut x: Vec<f64>) -> bool {
        let tol = self.options.integrality_tolerance;
        if self.instance.integer_vars().any(|j| (x[j] - x[j].round()).abs() > tol) {
            return false;
        }
        for j in self.instance.integer_vars() {
            x[j] = x[j].round();
        }
        self.polish(&mut x);
        if self.instance.max_violation(&x) > INCUMBENT_TOL {
            log::debug!("rejected candidate with violation {}", self.instance.max_violation(&x));
            return false;
        }
        let value = self.instance.objective_value(&x);
        let better = self.incumbent.as_ref().is_none_or(|(v, _)| value > *v + 1e-9 * v.abs().max(1.0));
        if better {
            log::debug!("incumbent {value:.4} after {} nodes", self.nodes);
            self.incumbent = Some((value, x));
        }
        better
    }

    /// Raises every hydrogen variable to the tightest curve row, which is the
    /// best value the rows allow.
    fn polish(&self, x: &mut [f64]) {
        for (h, rows) in &self.hydrogen_groups {
            if self.instance.objective[*h] <= 0.0 {
                continue;
            }
            let slack = rows
                .iter()
                .map(|&i| {
                    let r = &self.instance.rows[i];
                    r.rhs - r.activity(x)
                })
                .fold(f64::INFINITY, f64::min);
            if slack.is_finite() {
                let v = &self.instance.variables[*h];
                x[*h] = (x[*h] + slack).clamp(v.lower, v.upper);
            }
        }
    }

    pub fn branch_vars(&self) -> &[usize] {
        &self.branch_vars
    }

    /// Fixes one binary without touching the others.
    pub fn fix(&mut self, j: usize, value: bool) {
        let v = f64::from(u8::from(value));
        self.relax.set_bounds(j, v, v);
    }

    /// Solves the LP under the current bounds and offers the optimum.
    pub fn solve_and_offer(&mut self) -> bool {
        self.nodes += 1;
        if self.relax.solve(NODE_ITERATION_LIMIT) != LpStatus::Optimal {
            return false;
        }
        let x = self.relax.primal().to_vec();
        self.offer(x)
    }

    fn child(&mut self, parent: &[(usize, bool)], j: usize, value: bool, bound: f64, basis: &Rc<Basis>) -> Node {
        let mut fixes = parent.to_vec();
        fixes.push((j, value));
        self.next_id += 1;
        Node { fixes: Rc::new(fixes), basis: Some(Rc::clone(basis)), bound, id: self.next_id }
    }

    fn process(&mut self, node: &Node) -> Outcome {
        self.apply(&node.fixes);
        if let Some(b) = &node.basis {
            self.relax.load_basis(b);
        }
        let status = self.relax.solve(NODE_ITERATION_LIMIT);
        self.nodes += 1;
        match status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Outcome::Pruned,
            _ => {
                self.incomplete = true;
                return Outcome::Pruned;
            }
        }
        let bound = self.relax.objective();
        if bound <= self.cutoff() {
            return Outcome::Pruned;
        }
        let x = self.relax.primal().to_vec();
        let tol = self.options.integrality_tolerance;
        let mut pick: Option<(usize, f64)> = None;
        for &j in &self.branch_vars {
            let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if frac > tol && pick.is_none_or(|(_, f)| frac > f) {
                pick = Some((j, frac));
            }
        }
        let Some((j, _)) = pick else {
            let basis = self.relax.save_basis();
            self.try_pattern(&x);
            self.relax.load_basis(&basis);
            return Outcome::Pruned;
        };
        let basis = Rc::new(self.relax.save_basis());
        let up_first = x[j] >= 0.5;
        let up = self.child(&node.fixes, j, true, bound, &basis);
        let down = self.child(&node.fixes, j, false, bound, &basis);
        if self.nodes % 16 == 1 {
            self.try_pattern(&x);
        }
        if up_first {
            Outcome::Branched(up, down)
        } else {
            Outcome::Branched(down, up)
        }
    }

    /// Searches the subtree below `extra` fixings; returns whether the tree
    /// was exhausted and the largest open bound otherwise.
    fn search(&mut self, extra: &[(usize, bool)], node_budget: Option<usize>) -> (bool, f64) {
        let mut heap = BinaryHeap::new();
        self.next_id += 1;
        heap.push(Node { fixes: Rc::new(extra.to_vec()), basis: None, bound: f64::INFINITY, id: self.next_id });
        let first = self.nodes;
        let mut pops = 0usize;
        while let Some(node) = heap.pop() {
            if node.bound <= self.cutoff() {
                continue;
            }
            let budget_hit = node_budget.is_some_and(|b| self.nodes - first >= b);
            if self.out_of_budget() || budget_hit {
                heap.push(node);
                break;
            }
            if let Some((inc, _)) = &self.incumbent {
                if node.bound.is_finite() && relative_gap(*inc, node.bound) <= self.options.gap_tolerance {
                    heap.push(node);
                    break;
                }
            }
            pops += 1;
            let dive = self.incumbent.is_none() || pops % 8 == 1;
            let mut current = node;
            loop {
                match self.process(&current) {
                    Outcome::Pruned => break,
                    Outcome::Branched(first_child, second) => {
                        heap.push(second);
                        let budget_hit = node_budget.is_some_and(|b| self.nodes - first >= b);
                        if dive && !self.out_of_budget() && !budget_hit {
                            current = first_child;
                        } else {
                            heap.push(first_child);
                            break;
                        }
                    }
                }
            }
        }
        let open = heap.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
        (heap.is_empty(), open)
    }

    pub fn run(&mut self) -> MipResult {
        let (exhausted, open) = self.search(&[], None);
        let best_bound = match &self.incumbent {
            Some((v, _)) if exhausted => *v,
            Some((v, _)) => open.max(*v),
            None => open,
        };
        let status = match (&self.incumbent, exhausted && !self.incomplete) {
            (None, true) => MipStatus::Infeasible,
            (Some(_), true) => MipStatus::Optimal,
            (Some((v, _)), false) if relative_gap(*v, best_bound) <= self.options.gap_tolerance => {
                MipStatus::GapReached
            }
            _ => MipStatus::LimitHit,
        };
        self.result(status, best_bound)
    }

    pub fn result(&self, status: MipStatus, best_bound: f64) -> MipResult {
        let (incumbent, solution, gap) = match &self.incumbent {
            Some((v, x)) => {
                let s = self.instance.schedule_from_vector(x).ok();
                (s, x.clone(), relative_gap(*v, best_bound))
            }
            None => (None, Vec::new(), f64::INFINITY),
        };
        MipResult {
            status,
            incumbent,
            solution,
            best_bound,
            gap,
            nodes: self.nodes,
            lp_iterations: self.relax.iterations() + self.window_iterations,
        }
    }

    /// Large-neighborhood search around the incumbent. Each pass first
    /// re-solves every module over the whole horizon with the other modules
    /// held fixed, then slides a window of a few hours over all modules.
    pub fn improve(&mut self) {
        let hours = self.instance.layout.hours;
        let modules = self.instance.layout.modules;
        let w = self.options.improvement_window.min(hours).max(1);
        let step = (w / 2).max(1);
        let all: Vec<usize> = (0..modules).collect();
        for pass in 0..self.options.improvement_passes {
            let before = self.incumbent.as_ref().map(|(v, _)| *v);
            if modules > 1 {
                for m in 0..modules {
                    if !self.improve_within(0, hours - 1, &[m]) {
                        return;
                    }
                }
            }
            let mut start = 0;
            loop {
                if !self.improve_within(start, start + w, &all) {
                    return;
                }
                if start + w >= hours {
                    break;
                }
                start += step;
            }
            let after = self.incumbent.as_ref().map(|(v, _)| *v);
            log::debug!("improvement pass {pass}: {before:?} -> {after:?}");
            if after == before {
                break;
            }
        }
    }

    /// Searches one restriction of the incumbent on the improvement node
    /// budget; returns false once time is up.
    fn improve_within(&mut self, start: usize, last: usize, modules: &[usize]) -> bool {
        let remaining = self.options.time_limit.map(|t| t - self.started.elapsed().as_secs_f64());
        if remaining.is_some_and(|r| r <= 0.0) {
            return false;
        }
        let Some((_, x)) = self.incumbent.clone() else { return false };
        let (sub, global) = self.instance.restrict(start, last, modules, &x);
        let local_x: Vec<f64> = global.iter().map(|&g| x[g]).collect();
        let options = MipOptions {
            node_limit: Some(self.options.improvement_nodes),
            time_limit: remaining,
            improvement_passes: 0,
            ..self.options.clone()
        };
        let mut inner = Search::with_hint(&sub, options, Some(&local_x));
        inner.try_pattern(&local_x);
        inner.search(&[], inner.options.node_limit);
        self.nodes += inner.nodes;
        self.window_iterations += inner.relax.iterations();
        if let Some((_, y)) = inner.incumbent {
            let mut candidate = x;
            for (k, &g) in global.iter().enumerate() {
                candidate[g] = y[k];
            }
            self.offer(candidate);
        }
        true
    }
}

fn hydrogen_groups(instance: &MilpInstance) -> Vec<(usize, Vec<usize>)> {
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, r) in instance.rows.iter().enumerate() {
        if r.family != RowFamily::HydrogenCurve {
            continue;
        }
        if let Some(&(h, _)) =
            r.coeffs.iter().find(|(j, a)| *a == 1.0 && matches!(instance.variables[*j].kind, VarKind::Hydrogen { .. }))
        {
            groups.entry(h).or_default().push(i);
        }
    }
    groups.into_iter().collect()
}
