//! Sparse LU factorization of simplex bases with Markowitz pivoting and
//! product-form updates.

/// Entries below this magnitude are never accepted as pivots.
const ABS_PIVOT_TOL: f64 = 1e-11;
/// Threshold for numerical stability relative to the largest entry in the
/// pivot column.
const REL_PIVOT_TOL: f64 = 0.1;
/// Candidates inspected before settling on the best Markowitz count.
const SEARCH_LIMIT: usize = 4;

/// Basis columns that could not be pivoted, and rows left without a pivot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactor {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// U by columns: for basis position j, (row, value) of the U rows holding j
    uc_start: Vec<usize>,
    uc_row: Vec<usize>,
    uc_val: Vec<f64>,
    /// L by rows: for row i, (pivot row, multiplier) of the etas touching i
    lr_start: Vec<usize>,
    lr_row: Vec<usize>,
    lr_val: Vec<f64>,
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

/// Intrusive doubly linked buckets keyed by nonzero count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    key: Vec<usize>,
}

const NIL: usize = usize::MAX;

impl Buckets {
    fn new(n: usize, max_key: usize) -> Self {
        Self { head: vec![NIL; max_key + 2], next: vec![NIL; n], prev: vec![NIL; n], key: vec![NIL; n] }
    }

    fn insert(&mut self, item: usize, key: usize) {
        let key = key.min(self.head.len() - 1);
        self.key[item] = key;
        self.prev[item] = NIL;
        self.next[item] = self.head[key];
        if self.head[key] != NIL {
            self.prev[self.head[key]] = item;
        }
        self.head[key] = item;
    }

    fn remove(&mut self, item: usize) {
        let key = self.key[item];
        if key == NIL {
            return;
        }
        let (p, n) = (self.prev[item], self.next[item]);
        if p != NIL {
            self.next[p] = n;
        } else {
            self.head[key] = n;
        }
        if n != NIL {
            self.prev[n] = p;
        }
        self.key[item] = NIL;
    }

    fn update(&mut self, item: usize, key: usize) {
        self.remove(item);
        self.insert(item, key);
    }
}

impl LuFactor {
    /// Factorizes the `m x m` matrix whose column `j` holds the `(row, value)`
    /// pairs in `columns[j]`.
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                if v != 0.0 {
                    rows[i].push((j, v));
                    cols[j].push(i);
                }
            }
        }
        let mut row_b = Buckets::new(m, m);
        let mut col_b = Buckets::new(m, m);
        for i in 0..m {
            row_b.insert(i, rows[i].len());
        }
        for j in 0..m {
            col_b.insert(j, cols[j].len());
        }
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];

        let mut f = LuFactor { m, ..Default::default() };
        f.l_start.push(0);
        f.u_start.push(0);
        let mut singular_cols = Vec::new();
        let mut mark = vec![NIL; m];

        for _step in 0..m {
            // Columns with no entries left cannot be pivoted.
            while col_b.head[0] != NIL {
                let j = col_b.head[0];
                col_b.remove(j);
                col_done[j] = true;
                singular_cols.push(j);
            }
            let Some((pi, pj)) = find_pivot(&rows, &cols, &row_b, &col_b) else {
                break;
            };
            let pivot_val = entry(&rows[pi], pj);
            let pivot_row = std::mem::take(&mut rows[pi]);

            for k in 0..cols[pj].len() {
                let i = cols[pj][k];
                if i == pi {
                    continue;
                }
                let row = &mut rows[i];
                let at = row.iter().position(|e| e.0 == pj).expect("column entry present");
                let l = row[at].1 / pivot_val;
                row.swap_remove(at);
                f.l_idx.push(i);
                f.l_val.push(l);
                for (k, e) in row.iter().enumerate() {
                    mark[e.0] = k;
                }
                for &(j, v) in &pivot_row {
                    if j == pj {
                        continue;
                    }
                    if mark[j] != NIL {
                        row[mark[j]].1 -= l * v;
                    } else {
                        row.push((j, -l * v));
                        cols[j].push(i);
                        col_b.update(j, cols[j].len());
                    }
                }
                for e in row.iter() {
                    mark[e.0] = NIL;
                }
                row_b.update(i, row.len());
            }
            cols[pj].clear();
            col_b.remove(pj);
            col_done[pj] = true;
            row_b.remove(pi);
            row_done[pi] = true;

            // The pivot row becomes a row of U.
            for &(j, v) in &pivot_row {
                if j == pj {
                    continue;
                }
                if let Some(k) = cols[j].iter().position(|&r| r == pi) {
                    cols[j].swap_remove(k);
                    col_b.update(j, cols[j].len());
                }
                f.u_idx.push(j);
                f.u_val.push(v);
            }
            f.piv_row.push(pi);
            f.piv_col.push(pj);
            f.u_diag.push(pivot_val);
            f.l_start.push(f.l_idx.len());
            f.u_start.push(f.u_idx.len());
        }

        for j in 0..m {
            if !col_done[j] {
                singular_cols.push(j);
            }
        }
        if !singular_cols.is_empty() {
            singular_cols.sort_unstable();
            singular_cols.dedup();
            let rows_left: Vec<usize> = (0..m).filter(|&i| !row_done[i]).collect();
            return Err(Singular { positions: singular_cols, rows: rows_left });
        }
        f.build_transposes();
        Ok(f)
    }

    fn build_transposes(&mut self) {
        let m = self.m;
        let mut count = vec![0usize; m + 1];
        for &j in &self.u_idx {
            count[j + 1] += 1;
        }
        for j in 0..m {
            count[j + 1] += count[j];
        }
        let mut next = count.clone();
        self.uc_row = vec![0; self.u_idx.len()];
        self.uc_val = vec![0.0; self.u_idx.len()];
        for k in 0..m {
            for e in self.u_start[k]..self.u_start[k + 1] {
                let j = self.u_idx[e];
                self.uc_row[next[j]] = self.piv_row[k];
                self.uc_val[next[j]] = self.u_val[e];
                next[j] += 1;
            }
        }
        self.uc_start = count;

        let mut count = vec![0usize; m + 1];
        for &i in &self.l_idx {
            count[i + 1] += 1;
        }
        for i in 0..m {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        self.lr_row = vec![0; self.l_idx.len()];
        self.lr_val = vec![0.0; self.l_idx.len()];
        for k in 0..m {
            for e in self.l_start[k]..self.l_start[k + 1] {
                let i = self.l_idx[e];
                self.lr_row[next[i]] = self.piv_row[k];
                self.lr_val[next[i]] = self.l_val[e];
                next[i] += 1;
            }
        }
        self.lr_start = count;
    }

    pub fn n_updates(&self) -> usize {
        self.eta_pos.len()
    }

    /// Solves `B x = b`. On entry `b` is indexed by row, on exit by basis
    /// position. `work` must have length `m`.
    pub fn ftran(&self, b: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let bp = b[self.piv_row[k]];
            if bp != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[e]] -= self.l_val[e] * bp;
                }
            }
        }
        for k in (0..m).rev() {
            let j = self.piv_col[k];
            let x = b[self.piv_row[k]] / self.u_diag[k];
            work[j] = x;
            if x != 0.0 {
                for e in self.uc_start[j]..self.uc_start[j + 1] {
                    b[self.uc_row[e]] -= self.uc_val[e] * x;
                }
            }
        }
        b.copy_from_slice(work);
        for u in 0..self.eta_pos.len() {
            let r = self.eta_pos[u];
            let xr = b[r] / self.eta_piv[u];
            b[r] = xr;
            if xr != 0.0 {
                for e in self.eta_start[u]..self.eta_start[u + 1] {
                    b[self.eta_idx[e]] -= self.eta_val[e] * xr;
                }
            }
        }
    }

    /// Solves `B^T y = c`. On entry `c` is indexed by basis position, on exit
    /// by row.
    pub fn btran(&self, c: &mut [f64], work: &mut [f64]) {
        let m = self.m;
        for u in (0..self.eta_pos.len()).rev() {
            let r = self.eta_pos[u];
            let mut s = c[r];
            for e in self.eta_start[u]..self.eta_start[u + 1] {
                s -= self.eta_val[e] * c[self.eta_idx[e]];
            }
            c[r] = s / self.eta_piv[u];
        }
        for k in 0..m {
            let v = c[self.piv_col[k]] / self.u_diag[k];
            work[self.piv_row[k]] = v;
            if v != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * v;
                }
            }
        }
        for k in (0..m).rev() {
            let i = self.piv_row[k];
            let v = work[i];
            if v != 0.0 {
                for e in self.lr_start[i]..self.lr_start[i + 1] {
                    work[self.lr_row[e]] -= self.lr_val[e] * v;
                }
            }
        }
        c.copy_from_slice(work);
    }

    /// Records that basis position `r` was replaced by a column whose
    /// transformed form (`B^{-1} a`) is `alpha`.
    pub fn update(&mut self, r: usize, alpha: &[f64]) {
        self.eta_pos.push(r);
        self.eta_piv.push(alpha[r]);
        for (i, &v) in alpha.iter().enumerate() {
            if i != r && v.abs() > 1e-14 {
                self.eta_idx.push(i);
                self.eta_val.push(v);
            }
        }
        if self.eta_start.is_empty() {
            self.eta_start.push(0);
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

fn entry(row: &[(usize, f64)], j: usize) -> f64 {
    row.iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
}

fn col_max(rows: &[Vec<(usize, f64)>], cols: &[Vec<usize>], j: usize) -> f64 {
    cols[j].iter().map(|&i| entry(&rows[i], j).abs()).fold(0.0, f64::max)
}

/// Markowitz search over columns and rows of increasing count, accepting
/// only entries that pass the threshold test within their column.
fn find_pivot(
    rows: &[Vec<(usize, f64)>],
    cols: &[Vec<usize>],
    row_b: &Buckets,
    col_b: &Buckets,
) -> Option<(usize, usize)> {
    let m = rows.len();
    let mut best: Option<(usize, usize)> = None;
    let mut best_cost = usize::MAX;
    let mut seen = 0usize;
    for count in 1..=m {
        if best.is_some() && best_cost <= (count - 1) * (count - 1) {
            return best;
        }
        let mut j = col_b.head.get(count).copied().unwrap_or(NIL);
        while j != NIL {
            let cmax = col_max(rows, cols, j);
            for &i in &cols[j] {
                let v = entry(&rows[i], j).abs();
                if v > ABS_PIVOT_TOL && v >= REL_PIVOT_TOL * cmax {
                    let cost = (rows[i].len() - 1) * (count - 1);
                    if cost < best_cost {
                        best_cost = cost;
                        best = Some((i, j));
                    }
                }
            }
            seen += 1;
            if best.is_some() && (best_cost <= (count - 1) * (count - 1) || seen >= SEARCH_LIMIT) {
                return best;
            }
            j = col_b.next[j];
        }
        let mut i = row_b.head.get(count).copied().unwrap_or(NIL);
        while i != NIL {
            for &(j, v) in &rows[i] {
                let v = v.abs();
                if v > ABS_PIVOT_TOL && v >= REL_PIVOT_TOL * col_max(rows, cols, j) {
                    let cost = (count - 1) * (cols[j].len() - 1);
                    if cost < best_cost {
                        best_cost = cost;
                        best = Some((i, j));
                    }
                }
            }
            seen += 1;
            if best.is_some() && (best_cost <= (count - 1) * count || seen >= SEARCH_LIMIT) {
                return best;
            }
            i = row_b.next[i];
        }
    }
    best
}
