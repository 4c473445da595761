//! Bounded revised simplex working on `A x - s = 0`, where `x` are the
//! structural columns and `s` the row activities (logicals). Both carry
//! bounds; the method is a dual simplex with steepest-edge pricing and a
//! bound-flipping ratio test, followed by primal cleanup when cost shifting
//! was needed.

use super::lu::LuFactor;

/// Primal feasibility tolerance on bounds.
pub(crate) const FEAS_TOL: f64 = 1e-9;
/// Smallest pivot magnitude accepted in ratio tests.
pub(crate) const PIVOT_TOL: f64 = 1e-10;
const DUAL_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
pub(crate) const BLAND_AFTER: usize = 1000;
const REFACTOR_EVERY: usize = 100;
const MIN_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarStatus {
    Basic,
    Lower,
    Upper,
}

/// Outcome of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Snapshot of a basis, restorable after rows were appended.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    status: Vec<VarStatus>,
    head: Vec<usize>,
    weights: Vec<f64>,
    n_rows: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Simplex {
    n: usize,
    m: usize,
    cost: Vec<f64>,
    shift: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    columns_stale: bool,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    x: Vec<f64>,
    d: Vec<f64>,
    weights: Vec<f64>,
    lu: Option<LuFactor>,
    need_primal: bool,
    need_dual: bool,
    degenerate_run: usize,
    pub iterations: usize,
    work: Vec<f64>,
    alpha: Vec<f64>,
}

impl Simplex {
    /// A problem with `cost.len()` structural columns and no rows. Every
    /// column needs at least one finite bound.
    pub fn new(cost: Vec<f64>, lo: Vec<f64>, up: Vec<f64>) -> Self {
        let n = cost.len();
        debug_assert!(lo.len() == n && up.len() == n);
        let status: Vec<VarStatus> = (0..n)
            .map(|j| {
                if (cost[j] < 0.0 && up[j].is_finite()) || !lo[j].is_finite() {
                    VarStatus::Upper
                } else {
                    VarStatus::Lower
                }
            })
            .collect();
        let x = (0..n).map(|j| if status[j] == VarStatus::Upper { up[j] } else { lo[j] }).collect();
        Self {
            n,
            m: 0,
            shift: vec![0.0; n],
            d: cost.clone(),
            cost,
            lo,
            up,
            rows: Vec::new(),
            col_start: vec![0; n + 1],
            col_row: Vec::new(),
            col_val: Vec::new(),
            columns_stale: false,
            status,
            head: Vec::new(),
            x,
            weights: Vec::new(),
            lu: None,
            need_primal: true,
            need_dual: true,
            degenerate_run: 0,
            iterations: 0,
            work: Vec::new(),
            alpha: vec![0.0; n],
        }
    }

    /// Appends the row `lo <= a . x <= up`; its logical enters the basis.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], lo: f64, up: f64) -> usize {
        let i = self.m;
        let activity: f64 = coeffs.iter().map(|&(j, a)| a * self.x[j]).sum();
        self.rows.push(coeffs.iter().copied().filter(|e| e.1 != 0.0).collect());
        self.cost.push(0.0);
        self.shift.push(0.0);
        self.lo.push(lo);
        self.up.push(up);
        self.status.push(VarStatus::Basic);
        self.x.push(activity);
        self.d.push(0.0);
        self.head.push(self.n + i);
        self.weights.push(1.0);
        self.m += 1;
        self.columns_stale = true;
        self.lu = None;
        i
    }

    /// Changes the bounds of structural column `j`.
    pub fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.lo[j] = lo;
        self.up[j] = up;
        match self.status[j] {
            VarStatus::Basic => {}
            VarStatus::Lower if lo.is_finite() => self.x[j] = lo,
            VarStatus::Upper if up.is_finite() => self.x[j] = up,
            _ => {
                self.status[j] = if lo.is_finite() { VarStatus::Lower } else { VarStatus::Upper };
                self.x[j] = if lo.is_finite() { lo } else { up };
                self.need_dual = true;
            }
        }
        if self.status[j] != VarStatus::Basic {
            self.need_primal = true;
        }
    }

    pub fn save_basis(&self) -> Basis {
        Basis { status: self.status.clone(), head: self.head.clone(), weights: self.weights.clone(), n_rows: self.m }
    }

    /// Restores `basis`; rows appended after it was saved keep their
    /// logicals basic.
    pub fn load_basis(&mut self, basis: &Basis) {
        let keep = self.n + basis.n_rows;
        self.status[..keep].copy_from_slice(&basis.status);
        for s in &mut self.status[keep..] {
            *s = VarStatus::Basic;
        }
        self.head.clear();
        self.head.extend_from_slice(&basis.head);
        self.head.extend(keep..self.n + self.m);
        self.weights.clear();
        self.weights.extend_from_slice(&basis.weights);
        self.weights.resize(self.m, 1.0);
        for j in 0..self.n + self.m {
            match self.status[j] {
                VarStatus::Lower => self.x[j] = self.lo[j],
                VarStatus::Upper => self.x[j] = self.up[j],
                VarStatus::Basic => {}
            }
        }
        self.lu = None;
        self.need_primal = true;
        self.need_dual = true;
    }

    /// Values of the structural columns.
    pub fn primal(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        self.cost[..self.n].iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn rebuild_columns(&mut self) {
        let mut count = vec![0usize; self.n + 1];
        for row in &self.rows {
            for &(j, _) in row {
                count[j + 1] += 1;
            }
        }
        for j in 0..self.n {
            count[j + 1] += count[j];
        }
        let nnz = count[self.n];
        let mut next = count.clone();
        self.col_row = vec![0; nnz];
        self.col_val = vec![0.0; nnz];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                self.col_row[next[j]] = i;
                self.col_val[next[j]] = a;
                next[j] += 1;
            }
        }
        self.col_start = count;
        self.columns_stale = false;
    }

    /// Column of variable `j` in `[A, -I]`, added into `out` (by row) times `scale`.
    fn scatter_column(&self, j: usize, scale: f64, out: &mut [f64]) {
        if j < self.n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                out[self.col_row[e]] += scale * self.col_val[e];
            }
        } else {
            out[j - self.n] -= scale;
        }
    }

    fn refactor(&mut self) {
        if self.columns_stale {
            self.rebuild_columns();
        }
        self.work.resize(self.m, 0.0);
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self
                .head
                .iter()
                .map(|&j| {
                    if j < self.n {
                        (self.col_start[j]..self.col_start[j + 1]).map(|e| (self.col_row[e], self.col_val[e])).collect()
                    } else {
                        vec![(j - self.n, -1.0)]
                    }
                })
                .collect();
            match LuFactor::factorize(self.m, &cols) {
                Ok(f) => {
                    self.lu = Some(f);
                    return;
                }
                Err(singular) => {
                    log::debug!("singular basis, replacing {} columns", singular.positions.len());
                    for (&pos, &row) in singular.positions.iter().zip(&singular.rows) {
                        let old = self.head[pos];
                        let to_upper = !self.lo[old].is_finite()
                            || (self.up[old].is_finite() && self.x[old] - self.lo[old] > self.up[old] - self.x[old]);
                        self.status[old] = if to_upper { VarStatus::Upper } else { VarStatus::Lower };
                        self.x[old] = if to_upper { self.up[old] } else { self.lo[old] };
                        self.head[pos] = self.n + row;
                        self.status[self.n + row] = VarStatus::Basic;
                        self.weights[pos] = 1.0;
                    }
                    self.need_primal = true;
                    self.need_dual = true;
                }
            }
        }
    }

    fn lu(&self) -> &LuFactor {
        self.lu.as_ref().expect("basis factorized")
    }

    fn ftran(&mut self, v: &mut [f64]) {
        let lu = self.lu.as_ref().expect("basis factorized");
        lu.ftran(v, &mut self.work);
    }

    fn btran(&mut self, v: &mut [f64]) {
        let lu = self.lu.as_ref().expect("basis factorized");
        lu.btran(v, &mut self.work);
    }

    fn compute_primal(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            match self.status[j] {
                VarStatus::Basic => continue,
                VarStatus::Lower => self.x[j] = self.lo[j],
                VarStatus::Upper => self.x[j] = self.up[j],
            }
            if self.x[j] != 0.0 {
                self.scatter_column(j, -self.x[j], &mut rhs);
            }
        }
        self.ftran(&mut rhs);
        for (k, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[k];
        }
        self.need_primal = false;
    }

    fn compute_duals(&mut self) {
        let mut y: Vec<f64> = self.head.iter().map(|&j| self.cost[j] + self.shift[j]).collect();
        self.btran(&mut y);
        for j in 0..self.n {
            if self.status[j] == VarStatus::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let mut dj = self.cost[j] + self.shift[j];
            for e in self.col_start[j]..self.col_start[j + 1] {
                dj -= y[self.col_row[e]] * self.col_val[e];
            }
            self.d[j] = dj;
        }
        for i in 0..self.m {
            let j = self.n + i;
            self.d[j] = if self.status[j] == VarStatus::Basic { 0.0 } else { self.cost[j] + self.shift[j] + y[i] };
        }
        self.need_dual = false;
    }

    /// Restores dual feasibility by flipping boxed columns and shifting the
    /// costs of the rest.
    fn repair_duals(&mut self) {
        let mut flipped = false;
        for j in 0..self.n + self.m {
            let dj = self.d[j];
            match self.status[j] {
                VarStatus::Lower if dj < -DUAL_TOL => {
                    if self.up[j].is_finite() {
                        self.status[j] = VarStatus::Upper;
                        flipped = true;
                    } else {
                        self.shift[j] -= dj;
                        self.d[j] = 0.0;
                    }
                }
                VarStatus::Upper if dj > DUAL_TOL => {
                    if self.lo[j].is_finite() {
                        self.status[j] = VarStatus::Lower;
                        flipped = true;
                    } else {
                        self.shift[j] -= dj;
                        self.d[j] = 0.0;
                    }
                }
                _ => {}
            }
        }
        if flipped {
            self.compute_primal();
        }
    }

    fn prepare(&mut self) {
        if self.columns_stale {
            self.rebuild_columns();
        }
        if self.lu.is_none() {
            self.refactor();
            self.need_primal = true;
            self.need_dual = true;
        }
        if self.need_primal {
            self.compute_primal();
        }
        if self.need_dual {
            self.compute_duals();
        }
        self.repair_duals();
    }

    fn fresh_factor(&mut self) {
        self.refactor();
        self.compute_primal();
        self.compute_duals();
        self.repair_duals();
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - FEAS_TOL {
            self.lo[j] - v
        } else if v > self.up[j] + FEAS_TOL {
            v - self.up[j]
        } else {
            0.0
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.head.iter().map(|&j| self.infeasibility(j)).fold(0.0, f64::max)
    }

    fn max_dual_infeasibility(&self) -> f64 {
        (0..self.n + self.m)
            .map(|j| match self.status[j] {
                VarStatus::Lower if self.lo[j] < self.up[j] => (-self.d[j]).max(0.0),
                VarStatus::Upper if self.lo[j] < self.up[j] => self.d[j].max(0.0),
                _ => 0.0,
            })
            .fold(0.0, f64::max)
    }

    /// Solves from the current basis. Deterministic for identical inputs.
    pub fn solve(&mut self, max_iterations: usize) -> LpStatus {
        let limit = self.iterations + max_iterations;
        for _round in 0..8 {
            self.prepare();
            match self.dual_loop(limit) {
                LpStatus::Optimal => {}
                other => return other,
            }
            if self.shift.iter().any(|&s| s != 0.0) {
                self.shift.iter_mut().for_each(|s| *s = 0.0);
                self.compute_duals();
                if self.max_dual_infeasibility() > DUAL_TOL {
                    match self.primal_loop(limit) {
                        LpStatus::Optimal => {}
                        other => return other,
                    }
                }
            }
            // confirm on a fresh factorization
            self.refactor();
            self.compute_primal();
            self.compute_duals();
            if self.max_primal_infeasibility() <= FEAS_TOL && self.max_dual_infeasibility() <= DUAL_TOL {
                return LpStatus::Optimal;
            }
        }
        if self.max_primal_infeasibility() <= FEAS_TOL {
            LpStatus::Optimal
        } else {
            LpStatus::IterationLimit
        }
    }

    fn choose_leaving(&self, bland: bool) -> Option<usize> {
        let mut best = None;
        let mut best_score = 0.0;
        for (k, &j) in self.head.iter().enumerate() {
            let inf = self.infeasibility(j);
            if inf <= 0.0 {
                continue;
            }
            if bland {
                if best.is_none_or(|b: usize| j < self.head[b]) {
                    best = Some(k);
                }
                continue;
            }
            let score = inf * inf / self.weights[k];
            if score > best_score {
                best_score = score;
                best = Some(k);
            }
        }
        best
    }

    /// Row `r` of `B^{-1} [A, -I]`: fills `self.alpha` for structurals and
    /// returns `rho = B^{-T} e_r` (the logical part is `-rho`).
    fn pivot_row(&mut self, r: usize) -> Vec<f64> {
        let mut rho = vec![0.0; self.m];
        rho[r] = 1.0;
        self.btran(&mut rho);
        self.alpha.iter_mut().for_each(|a| *a = 0.0);
        for (i, &ri) in rho.iter().enumerate() {
            if ri.abs() > 1e-14 {
                for &(j, a) in &self.rows[i] {
                    self.alpha[j] += ri * a;
                }
            }
        }
        rho
    }

    fn alpha_of(&self, j: usize, rho: &[f64]) -> f64 {
        if j < self.n {
            self.alpha[j]
        } else {
            -rho[j - self.n]
        }
    }

    fn dual_loop(&mut self, limit: usize) -> LpStatus {
        let mut retried = false;
        loop {
            if self.iterations >= limit {
                return LpStatus::IterationLimit;
            }
            if self.lu().n_updates() >= REFACTOR_EVERY {
                self.fresh_factor();
            }
            let bland = self.degenerate_run >= BLAND_AFTER;
            let Some(r) = self.choose_leaving(bland) else {
                return LpStatus::Optimal;
            };
            let p = self.head[r];
            let rho = self.pivot_row(r);
            let to_lower = self.x[p] < self.lo[p];
            let sgn = if to_lower { -1.0 } else { 1.0 };
            let delta = if to_lower { self.x[p] - self.lo[p] } else { self.x[p] - self.up[p] };

            // candidates: (variable, |alpha~|, ratio, |d|)
            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            let nonzero_structurals = (0..self.n).filter(|&j| self.alpha[j] != 0.0);
            let nonzero_logicals = (0..self.m).filter(|&i| rho[i] != 0.0).map(|i| self.n + i);
            for j in nonzero_structurals.chain(nonzero_logicals) {
                if self.status[j] == VarStatus::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let a = sgn * self.alpha_of(j, &rho);
                match self.status[j] {
                    VarStatus::Lower if a > PIVOT_TOL => {
                        let dj = self.d[j].max(0.0);
                        cands.push((j, a, dj / a, dj));
                    }
                    VarStatus::Upper if a < -PIVOT_TOL => {
                        let dj = (-self.d[j]).max(0.0);
                        cands.push((j, -a, dj / -a, dj));
                    }
                    _ => {}
                }
            }

            let mut slope = delta.abs();
            let mut flips: Vec<usize> = Vec::new();
            let mut entering: Option<(usize, f64)> = None;
            let mut remaining = cands;
            while !remaining.is_empty() {
                if bland {
                    let min_ratio = remaining.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                    let c =
                        remaining.iter().filter(|c| c.2 <= min_ratio).min_by_key(|c| c.0).copied().expect("nonempty");
                    entering = Some((c.0, c.2));
                    break;
                }
                let bound = remaining.iter().map(|c| (c.3 + DUAL_TOL) / c.1).fold(f64::INFINITY, f64::min);
                let group_slope: f64 =
                    remaining.iter().filter(|c| c.2 <= bound).map(|c| c.1 * (self.up[c.0] - self.lo[c.0])).sum();
                if group_slope.is_finite() && slope - group_slope > 0.0 && remaining.iter().any(|c| c.2 > bound) {
                    slope -= group_slope;
                    flips.extend(remaining.iter().filter(|c| c.2 <= bound).map(|c| c.0));
                    remaining.retain(|c| c.2 > bound);
                    continue;
                }
                let mut best: Option<(usize, f64, f64)> = None;
                for c in remaining.iter().filter(|c| c.2 <= bound) {
                    if best.is_none_or(|b| c.1 > b.1 || (c.1 == b.1 && c.0 < b.0)) {
                        best = Some((c.0, c.1, c.2));
                    }
                }
                let (q, _, ratio) = best.expect("group contains the minimum ratio");
                entering = Some((q, ratio));
                break;
            }
            let Some((q, theta_d)) = entering else {
                if !retried && self.lu().n_updates() > 0 {
                    retried = true;
                    self.fresh_factor();
                    continue;
                }
                return LpStatus::Infeasible;
            };
            retried = false;

            // transformed entering column
            let mut col = vec![0.0; self.m];
            self.scatter_column(q, 1.0, &mut col);
            self.ftran(&mut col);
            let alpha_rq = col[r];
            let alpha_row_q = self.alpha_of(q, &rho);
            if (alpha_rq - alpha_row_q).abs() > 1e-7 * (1.0 + alpha_rq.abs()) && self.lu().n_updates() > 0 {
                log::debug!("pivot mismatch {alpha_rq} vs {alpha_row_q}, refactoring");
                self.fresh_factor();
                continue;
            }
            if alpha_rq.abs() < PIVOT_TOL {
                self.fresh_factor();
                if self.lu().n_updates() == 0 && alpha_rq.abs() < PIVOT_TOL * 1e-3 {
                    return LpStatus::IterationLimit;
                }
                continue;
            }

            // dual update
            if theta_d != 0.0 {
                for j in 0..self.n {
                    if self.alpha[j] != 0.0 && self.status[j] != VarStatus::Basic {
                        self.d[j] -= theta_d * sgn * self.alpha[j];
                    }
                }
                for i in 0..self.m {
                    let j = self.n + i;
                    if rho[i] != 0.0 && self.status[j] != VarStatus::Basic {
                        self.d[j] += theta_d * sgn * rho[i];
                    }
                }
            }
            self.d[p] = -sgn * theta_d;
            self.d[q] = 0.0;

            // bound flips
            if !flips.is_empty() {
                let mut delta_col = vec![0.0; self.m];
                for &j in &flips {
                    let (from, to, st) = match self.status[j] {
                        VarStatus::Lower => (self.lo[j], self.up[j], VarStatus::Upper),
                        _ => (self.up[j], self.lo[j], VarStatus::Lower),
                    };
                    self.status[j] = st;
                    self.x[j] = to;
                    self.scatter_column(j, to - from, &mut delta_col);
                }
                self.ftran(&mut delta_col);
                for (k, &j) in self.head.iter().enumerate() {
                    self.x[j] -= delta_col[k];
                }
            }

            // primal step
            let target = if to_lower { self.lo[p] } else { self.up[p] };
            let theta_p = (self.x[p] - target) / alpha_rq;
            for (k, &j) in self.head.iter().enumerate() {
                self.x[j] -= theta_p * col[k];
            }
            self.x[q] += theta_p;
            self.x[p] = target;

            // steepest-edge weights
            let w_r: f64 = rho.iter().map(|v| v * v).sum();
            let mut tau = rho.clone();
            self.ftran(&mut tau);
            for k in 0..self.m {
                if k == r || col[k] == 0.0 {
                    continue;
                }
                let kappa = col[k] / alpha_rq;
                self.weights[k] = (self.weights[k] + kappa * (kappa * w_r - 2.0 * tau[k])).max(MIN_WEIGHT);
            }
            self.weights[r] = (w_r / (alpha_rq * alpha_rq)).max(MIN_WEIGHT);

            // basis change
            self.head[r] = q;
            self.status[q] = VarStatus::Basic;
            self.status[p] = if to_lower { VarStatus::Lower } else { VarStatus::Upper };
            self.lu.as_mut().expect("basis factorized").update(r, &col);
            self.iterations += 1;
            if theta_d <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
        }
    }

    fn primal_loop(&mut self, limit: usize) -> LpStatus {
        loop {
            if self.iterations >= limit {
                return LpStatus::IterationLimit;
            }
            if self.lu().n_updates() >= REFACTOR_EVERY {
                self.refactor();
                self.compute_primal();
                self.compute_duals();
            }
            let bland = self.degenerate_run >= BLAND_AFTER;
            let mut q = None;
            let mut best = DUAL_TOL;
            for j in 0..self.n + self.m {
                if self.lo[j] == self.up[j] {
                    continue;
                }
                let viol = match self.status[j] {
                    VarStatus::Lower => -self.d[j],
                    VarStatus::Upper => self.d[j],
                    VarStatus::Basic => 0.0,
                };
                if viol > best {
                    q = Some(j);
                    if bland {
                        break;
                    }
                    best = viol;
                }
            }
            let Some(q) = q else {
                return LpStatus::Optimal;
            };
            let dir = if self.status[q] == VarStatus::Lower { 1.0 } else { -1.0 };
            let mut col = vec![0.0; self.m];
            self.scatter_column(q, 1.0, &mut col);
            self.ftran(&mut col);

            // Harris two-pass ratio test; x_k moves at rate -dir * col[k]
            let slack_of = |s: &Self, k: usize, rate: f64| -> f64 {
                let j = s.head[k];
                if rate < 0.0 {
                    s.x[j] - s.lo[j]
                } else {
                    s.up[j] - s.x[j]
                }
            };
            let mut bound = f64::INFINITY;
            for k in 0..self.m {
                let rate = -dir * col[k];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let s = slack_of(self, k, rate);
                if s.is_finite() {
                    bound = bound.min((s.max(0.0) + FEAS_TOL) / rate.abs());
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_mag = 0.0;
            for k in 0..self.m {
                let rate = -dir * col[k];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let s = slack_of(self, k, rate);
                if !s.is_finite() {
                    continue;
                }
                let ratio = s.max(0.0) / rate.abs();
                if ratio <= bound && rate.abs() > leave_mag {
                    leave_mag = rate.abs();
                    leave = Some((k, ratio));
                }
            }
            let own_range = self.up[q] - self.lo[q];
            let step = leave.map_or(f64::INFINITY, |l| l.1);
            if own_range <= step {
                if !own_range.is_finite() {
                    return LpStatus::Unbounded;
                }
                for (k, &j) in self.head.iter().enumerate() {
                    self.x[j] -= dir * own_range * col[k];
                }
                self.status[q] = if dir > 0.0 { VarStatus::Upper } else { VarStatus::Lower };
                self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                self.iterations += 1;
                continue;
            }
            let (r, t) = leave.expect("finite step has a leaving row");
            let p = self.head[r];
            let rate_r = -dir * col[r];
            for (k, &j) in self.head.iter().enumerate() {
                self.x[j] -= dir * t * col[k];
            }
            self.x[q] += dir * t;
            let p_to_lower = rate_r < 0.0;
            self.x[p] = if p_to_lower { self.lo[p] } else { self.up[p] };

            let rho = self.pivot_row(r);
            let theta = self.d[q] / col[r];
            for j in 0..self.n {
                if self.alpha[j] != 0.0 && self.status[j] != VarStatus::Basic {
                    self.d[j] -= theta * self.alpha[j];
                }
            }
            for i in 0..self.m {
                let j = self.n + i;
                if rho[i] != 0.0 && self.status[j] != VarStatus::Basic {
                    self.d[j] += theta * rho[i];
                }
            }
            self.d[p] = -theta;
            self.d[q] = 0.0;
            self.head[r] = q;
            self.status[q] = VarStatus::Basic;
            self.status[p] = if p_to_lower { VarStatus::Lower } else { VarStatus::Upper };
            self.lu.as_mut().expect("basis factorized").update(r, &col);
            self.weights.iter_mut().for_each(|w| *w = 1.0);
            self.iterations += 1;
            if t <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
        }
    }
}
