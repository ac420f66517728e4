//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Left-looking factorization. Column singletons are pivoted first and row
//! singletons last, which leaves a (usually small) bump in between. Bump
//! columns are processed sparsest first; each column is reduced by the L
//! columns it reaches, and the pivot is picked among the bump rows by
//! threshold partial pivoting with a preference for rows that appear in few
//! basis columns.
//!
//! With `prow[k]` the pivot row of step `k` and `qcol[k]` the basis
//! position processed at step `k`, column `qcol[k]` of the basis equals
//! `sum_{j <= k} L[:, j] * U[j, k]`, where `L[:, j]` has an implicit unit
//! at row `prow[j]`.

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;

/// Basis positions that could not be pivoted, and rows left without pivot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    prow: Vec<usize>,
    qcol: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
}

const UNSET: usize = usize::MAX;

impl LuFactors {
    /// Factorizes the `m x m` matrix whose column `p` is `column(p)` given
    /// as parallel (row indices, values) slices.
    pub(crate) fn factorize<'a, F>(m: usize, column: F) -> Result<LuFactors, Singular>
    where
        F: Fn(usize) -> (&'a [usize], &'a [f64]),
    {
        let mut row_count = vec![0usize; m];
        let mut col_nnz = Vec::with_capacity(m);
        for p in 0..m {
            let (idx, _) = column(p);
            for &i in idx {
                row_count[i] += 1;
            }
            col_nnz.push(idx.len());
        }
        let (order, forced) = triangular_order(m, &column, &row_count, &col_nnz);
        let mut reserved = vec![false; m];
        for r in forced.iter().flatten() {
            reserved[*r] = true;
        }

        let mut f = LuFactors {
            m,
            prow: Vec::with_capacity(m),
            qcol: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
        };
        let mut row_step = vec![UNSET; m];
        let mut x = vec![0.0; m];
        let mut in_pattern = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut visited = vec![false; m];
        let mut reach: Vec<usize> = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        let mut failed = Vec::new();

        for (&p, &force) in order.iter().zip(&forced) {
            let (idx, val) = column(p);
            for (&i, &v) in idx.iter().zip(val) {
                x[i] += v;
                if !in_pattern[i] {
                    in_pattern[i] = true;
                    pattern.push(i);
                }
            }
            // Steps reachable through L from the pivoted rows of the column.
            for &i in idx {
                let s = row_step[i];
                if s == UNSET || visited[s] {
                    continue;
                }
                visited[s] = true;
                stack.push(s);
                while let Some(s) = stack.pop() {
                    reach.push(s);
                    for &r in &f.l_idx[f.l_start[s]..f.l_start[s + 1]] {
                        let t = row_step[r];
                        if t != UNSET && !visited[t] {
                            visited[t] = true;
                            stack.push(t);
                        }
                    }
                }
            }
            // Edges only run from earlier to later steps.
            reach.sort_unstable();
            for &s in &reach {
                visited[s] = false;
                let xs = x[f.prow[s]];
                if xs == 0.0 {
                    continue;
                }
                for k in f.l_start[s]..f.l_start[s + 1] {
                    let r = f.l_idx[k];
                    x[r] -= f.l_val[k] * xs;
                    if !in_pattern[r] {
                        in_pattern[r] = true;
                        pattern.push(r);
                    }
                }
            }

            let mut amax = 0.0f64;
            for &r in &pattern {
                if row_step[r] == UNSET && (force == Some(r) || (force.is_none() && !reserved[r])) {
                    amax = amax.max(x[r].abs());
                }
            }
            if amax <= SINGULAR_TOL {
                failed.push(p);
            } else {
                let mut best = UNSET;
                for &r in &pattern {
                    if row_step[r] != UNSET || x[r].abs() < PIVOT_THRESHOLD * amax {
                        continue;
                    }
                    if reserved[r] && force != Some(r) {
                        continue;
                    }
                    if best == UNSET {
                        best = r;
                        continue;
                    }
                    let key = (row_count[r], std::cmp::Reverse(OrdAbs(x[r])), r);
                    let cur = (row_count[best], std::cmp::Reverse(OrdAbs(x[best])), best);
                    if key < cur {
                        best = r;
                    }
                }
                let k = f.prow.len();
                for &s in &reach {
                    let v = x[f.prow[s]];
                    if v != 0.0 {
                        f.u_idx.push(s);
                        f.u_val.push(v);
                    }
                }
                f.u_start.push(f.u_idx.len());
                let piv = x[best];
                f.u_diag.push(piv);
                let mut lrows: Vec<usize> = pattern
                    .iter()
                    .copied()
                    .filter(|&r| r != best && row_step[r] == UNSET && x[r] != 0.0)
                    .collect();
                lrows.sort_unstable();
                for r in lrows {
                    f.l_idx.push(r);
                    f.l_val.push(x[r] / piv);
                }
                f.l_start.push(f.l_idx.len());
                f.prow.push(best);
                f.qcol.push(p);
                row_step[best] = k;
                for &i in idx {
                    row_count[i] = row_count[i].saturating_sub(1);
                }
            }
            for &r in &pattern {
                x[r] = 0.0;
                in_pattern[r] = false;
            }
            pattern.clear();
            reach.clear();
        }

        if failed.is_empty() {
            Ok(f)
        } else {
            let rows = (0..m).filter(|&r| row_step[r] == UNSET).collect();
            Err(Singular { positions: failed, rows })
        }
    }

    /// Solves `B z = b`. `b` is indexed by row and is destroyed; `z` is
    /// indexed by basis position.
    pub(crate) fn ftran(&self, b: &mut [f64], z: &mut [f64]) {
        for s in 0..self.m {
            let v = b[self.prow[s]];
            if v == 0.0 {
                continue;
            }
            for k in self.l_start[s]..self.l_start[s + 1] {
                b[self.l_idx[k]] -= self.l_val[k] * v;
            }
        }
        for k in (0..self.m).rev() {
            let w = b[self.prow[k]] / self.u_diag[k];
            z[self.qcol[k]] = w;
            if w == 0.0 {
                continue;
            }
            for e in self.u_start[k]..self.u_start[k + 1] {
                b[self.prow[self.u_idx[e]]] -= self.u_val[e] * w;
            }
        }
    }

    /// Solves `y^T B = c^T`. `c` is indexed by basis position; `y` by row.
    /// `g` is scratch of length m.
    pub(crate) fn btran(&self, c: &[f64], y: &mut [f64], g: &mut [f64]) {
        for k in 0..self.m {
            let mut v = c[self.qcol[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                v -= self.u_val[e] * g[self.u_idx[e]];
            }
            g[k] = v / self.u_diag[k];
        }
        for j in (0..self.m).rev() {
            let mut v = g[j];
            for k in self.l_start[j]..self.l_start[j + 1] {
                v -= self.l_val[k] * y[self.l_idx[k]];
            }
            y[self.prow[j]] = v;
        }
    }

    pub(crate) fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }
}

/// Processing order of basis positions, with the pivot row fixed for
/// singleton columns: column singletons in discovery order, then the bump
/// sparsest first, then row singletons in reverse discovery order.
fn triangular_order<'a, F>(
    m: usize,
    column: &F,
    row_count: &[usize],
    col_nnz: &[usize],
) -> (Vec<usize>, Vec<Option<usize>>)
where
    F: Fn(usize) -> (&'a [usize], &'a [f64]),
{
    // Row-wise pattern of the basis.
    let mut row_start = vec![0usize; m + 1];
    for i in 0..m {
        row_start[i + 1] = row_start[i] + row_count[i];
    }
    let mut row_cols = vec![0usize; row_start[m]];
    let mut fill = row_start.clone();
    for p in 0..m {
        for &i in column(p).0 {
            row_cols[fill[i]] = p;
            fill[i] += 1;
        }
    }
    let mut col_active = col_nnz.to_vec();
    let mut row_active = row_count.to_vec();
    let mut col_done = vec![false; m];
    let mut row_done = vec![false; m];

    let mut head = Vec::new();
    let mut head_rows = Vec::new();
    let mut queue: Vec<usize> = (0..m).rev().filter(|&p| col_active[p] == 1).collect();
    while let Some(p) = queue.pop() {
        if col_done[p] || col_active[p] != 1 {
            continue;
        }
        let Some(&r) = column(p).0.iter().find(|&&i| !row_done[i]) else {
            continue;
        };
        col_done[p] = true;
        row_done[r] = true;
        head.push(p);
        head_rows.push(r);
        for &i in column(p).0 {
            row_active[i] -= 1;
        }
        for &q in &row_cols[row_start[r]..row_start[r + 1]] {
            if !col_done[q] {
                col_active[q] -= 1;
                if col_active[q] == 1 {
                    queue.push(q);
                }
            }
        }
    }

    let mut tail = Vec::new();
    let mut tail_rows = Vec::new();
    let mut queue: Vec<usize> = (0..m).rev().filter(|&i| !row_done[i] && row_active[i] == 1).collect();
    while let Some(r) = queue.pop() {
        if row_done[r] || row_active[r] != 1 {
            continue;
        }
        let Some(&p) = row_cols[row_start[r]..row_start[r + 1]].iter().find(|&&q| !col_done[q]) else {
            continue;
        };
        col_done[p] = true;
        row_done[r] = true;
        tail.push(p);
        tail_rows.push(r);
        for &i in column(p).0 {
            if !row_done[i] {
                row_active[i] -= 1;
                if row_active[i] == 1 {
                    queue.push(i);
                }
            }
        }
    }

    let mut bump: Vec<usize> = (0..m).filter(|&p| !col_done[p]).collect();
    bump.sort_by_key(|&p| (col_nnz[p], p));
    let mut order = head;
    let mut forced: Vec<Option<usize>> = head_rows.into_iter().map(Some).collect();
    forced.extend(std::iter::repeat_n(None, bump.len()));
    order.extend(bump);
    order.extend(tail.iter().rev());
    forced.extend(tail_rows.iter().rev().map(|&r| Some(r)));
    (order, forced)
}

#[derive(Clone, Copy, PartialEq)]
struct OrdAbs(f64);

impl Eq for OrdAbs {}

impl PartialOrd for OrdAbs {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdAbs {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.abs().total_cmp(&other.0.abs())
    }
}

/// One product-form update: the basis column at `pos` was replaced by a
/// column whose representation in the previous basis is `d`.
#[derive(Debug, Clone)]
pub(crate) struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// LU factors plus the eta file accumulated since the last refactorization.
#[derive(Debug, Clone)]
pub(crate) struct BasisFactor {
    lu: LuFactors,
    etas: Vec<Eta>,
    eta_nnz: usize,
    scratch: Vec<f64>,
}

impl BasisFactor {
    pub(crate) fn new(lu: LuFactors) -> Self {
        let m = lu.m;
        BasisFactor {
            lu,
            etas: Vec::new(),
            eta_nnz: 0,
            scratch: vec![0.0; m],
        }
    }

    pub(crate) fn n_updates(&self) -> usize {
        self.etas.len()
    }

    /// True once the eta file is larger than the factors themselves.
    pub(crate) fn is_bloated(&self) -> bool {
        self.eta_nnz > self.lu.nnz().max(1000)
    }

    /// `b` by row (destroyed) to `z` by basis position.
    pub(crate) fn ftran(&self, b: &mut [f64], z: &mut [f64]) {
        self.lu.ftran(b, z);
        for eta in &self.etas {
            let zr = z[eta.pos] / eta.pivot;
            z[eta.pos] = zr;
            if zr == 0.0 {
                continue;
            }
            for (&i, &d) in eta.idx.iter().zip(&eta.val) {
                z[i] -= d * zr;
            }
        }
    }

    /// `c` by basis position (destroyed) to `y` by row.
    pub(crate) fn btran(&mut self, c: &mut [f64], y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut v = c[eta.pos];
            for (&i, &d) in eta.idx.iter().zip(&eta.val) {
                v -= d * c[i];
            }
            c[eta.pos] = v / eta.pivot;
        }
        self.lu.btran(c, y, &mut self.scratch);
    }

    /// Records that basis position `pos` now holds the column whose
    /// ftran image is `d`.
    pub(crate) fn update(&mut self, pos: usize, d: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &v) in d.iter().enumerate() {
            if i != pos && v != 0.0 {
                idx.push(i);
                val.push(v);
            }
        }
        self.eta_nnz += idx.len() + 1;
        self.etas.push(Eta {
            pos,
            pivot: d[pos],
            idx,
            val,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<(Vec<usize>, Vec<f64>)> {
        let m = a.len();
        (0..m)
            .map(|j| {
                let mut idx = vec![];
                let mut val = vec![];
                for (i, row) in a.iter().enumerate() {
                    if row[j] != 0.0 {
                        idx.push(i);
                        val.push(row[j]);
                    }
                }
                (idx, val)
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(z).map(|(x, y)| x * y).sum()).collect()
    }

    fn sample() -> Vec<Vec<f64>> {
        vec![
            vec![4.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 2.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 5.0, 2.0],
            vec![0.0, 0.0, 0.0, 1.0, -1.0],
        ]
    }

    #[test]
    fn ftran_and_btran_solve() {
        let a = sample();
        let cols = dense_cols(&a);
        let lu = LuFactors::factorize(5, |p| (&cols[p].0, &cols[p].1)).unwrap();
        let rhs = vec![1.0, -2.0, 0.5, 3.0, 4.0];
        let mut b = rhs.clone();
        let mut z = vec![0.0; 5];
        lu.ftran(&mut b, &mut z);
        let back = matvec(&a, &z);
        for (u, v) in back.iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-12);
        }
        let c = vec![0.3, 1.0, -1.0, 2.0, 0.0];
        let mut y = vec![0.0; 5];
        let mut g = vec![0.0; 5];
        lu.btran(&c, &mut y, &mut g);
        // y^T A = c^T
        for j in 0..5 {
            let s: f64 = (0..5).map(|i| y[i] * a[i][j]).sum();
            assert!((s - c[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_reports_positions() {
        let mut a = sample();
        for row in a.iter_mut() {
            row[4] = row[3] * 2.0;
        }
        let cols = dense_cols(&a);
        let err = LuFactors::factorize(5, |p| (&cols[p].0, &cols[p].1)).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut a = sample();
        let cols = dense_cols(&a);
        let lu = LuFactors::factorize(5, |p| (&cols[p].0, &cols[p].1)).unwrap();
        let mut f = BasisFactor::new(lu);
        // Replace column 2 by a new column.
        let newcol = vec![0.0, 1.0, 1.0, 0.0, 3.0];
        let mut b = newcol.clone();
        let mut d = vec![0.0; 5];
        f.ftran(&mut b, &mut d);
        f.update(2, &d);
        for (i, row) in a.iter_mut().enumerate() {
            row[2] = newcol[i];
        }
        let rhs = vec![2.0, 0.0, -1.0, 1.0, 0.5];
        let mut b = rhs.clone();
        let mut z = vec![0.0; 5];
        f.ftran(&mut b, &mut z);
        let back = matvec(&a, &z);
        for (u, v) in back.iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-12);
        }
        let mut c = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let orig = c.clone();
        let mut y = vec![0.0; 5];
        f.btran(&mut c, &mut y);
        for j in 0..5 {
            let s: f64 = (0..5).map(|i| y[i] * a[i][j]).sum();
            assert!((s - orig[j]).abs() < 1e-12);
        }
    }
}
