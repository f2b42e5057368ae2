//! Sparse matrices and a direct LU solver for indefinite saddle-point systems.
//!
//! The factorization is left-looking (one sparse triangular solve per column)
//! with threshold partial pivoting that prefers the diagonal entry. Columns are
//! pre-ordered by an approximate minimum degree heuristic on the pattern of
//! `A + A^T`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

/// Systems smaller than this are solved with dense LU.
pub const DENSE_THRESHOLD: usize = 2000;

/// Accept the diagonal as pivot if it is at least this fraction of the column maximum.
pub const PIVOT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("matrix is singular: zero pivot at elimination step {step}")]
    Singular { step: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Coordinate-format accumulator. Duplicate entries are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl TripletMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletMatrix {
            nrows,
            ncols,
            ..Default::default()
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletMatrix {
            nrows,
            ncols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            vals: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.rows.push(i);
        self.cols.push(j);
        self.vals.push(v);
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn extend(&mut self, other: &TripletMatrix) {
        self.rows.extend_from_slice(&other.rows);
        self.cols.extend_from_slice(&other.cols);
        self.vals.extend_from_slice(&other.vals);
    }

    /// Compressed columns with sorted row indices and summed duplicates.
    /// Explicit zeros produced by summation are kept, so the pattern only
    /// depends on which triplets were pushed.
    pub fn to_csc(&self) -> CscMatrix {
        let mut count = vec![0usize; self.ncols + 1];
        for &j in &self.cols {
            count[j + 1] += 1;
        }
        for j in 0..self.ncols {
            count[j + 1] += count[j];
        }
        let mut next = count.clone();
        let mut rows = vec![0usize; self.len()];
        let mut vals = vec![0.0; self.len()];
        for k in 0..self.len() {
            let j = self.cols[k];
            rows[next[j]] = self.rows[k];
            vals[next[j]] = self.vals[k];
            next[j] += 1;
        }
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::with_capacity(self.len());
        let mut values = Vec::with_capacity(self.len());
        let mut order: Vec<usize> = Vec::new();
        for j in 0..self.ncols {
            order.clear();
            order.extend(count[j]..count[j + 1]);
            order.sort_by_key(|&k| rows[k]);
            for &k in &order {
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == rows[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    row_idx.push(rows[k]);
                    values.push(vals[k]);
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let t = TripletMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            vals: self.vals.clone(),
        }
        .to_csc();
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: t.col_ptr,
            col_idx: t.row_idx,
            values: t.values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn identity(n: usize) -> Self {
        CscMatrix {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], self.values[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            if xj != 0.0 {
                for (i, v) in self.col(j) {
                    y[i] += v * xj;
                }
            }
        }
        y
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.nrows];
        for (i, v) in self.row_idx.iter().zip(&self.values) {
            sums[*i] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut t = TripletMatrix::with_capacity(self.ncols, self.nrows, self.nnz());
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                t.push(j, i, v);
            }
        }
        t.to_csc()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                d[i][j] += v;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            for (i, v) in t.col(j) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|p| self.values[p] * x[self.col_idx[p]])
                    .sum()
            })
            .collect()
    }
}

const VARIABLE: u8 = 0;
const ELEMENT: u8 = 1;
const ABSORBED: u8 = 2;

// Numerically zero entries are left out.
fn symmetric_pattern(a: &CscMatrix) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); a.ncols];
    for j in 0..a.ncols {
        for (i, v) in a.col(j) {
            if i != j && v != 0.0 {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for v in adj.iter_mut() {
        v.sort_unstable();
        v.dedup();
    }
    adj
}

/// Nodes whose degree in `A + A^T` exceeds `max(16, 10 sqrt(n))`.
pub fn dense_nodes(a: &CscMatrix) -> Vec<bool> {
    let limit = (10.0 * (a.ncols as f64).sqrt()).max(16.0) as usize;
    symmetric_pattern(a)
        .iter()
        .map(|v| v.len() > limit)
        .collect()
}

const UNMATCHED: usize = usize::MAX;

/// Degree-one peeling between `rows` (zero-diagonal nodes) and the usable
/// nonzero-diagonal nodes that are still unmatched.
///
/// A remaining node of either kind with a single remaining candidate is matched
/// to it. Any set of pairs obtained this way spans a sub-block that permutes to
/// triangular form, so no elimination order cancels a pair's coupling exactly.
/// On a stall the row with most candidates is set aside when `postpone` is true,
/// otherwise the row with fewest candidates is matched to its least connected
/// candidate. Returns the rows set aside.
fn peel(
    adj: &[Vec<usize>],
    rows: &[usize],
    usable: &dyn Fn(usize) -> bool,
    mate_of_p: &mut [usize],
    mate_of_v: &mut [usize],
    postpone: bool,
) -> Vec<usize> {
    let n = adj.len();
    let mut is_row = vec![false; n];
    let mut active = vec![false; n];
    let mut count = vec![0usize; n];
    for &p in rows {
        is_row[p] = true;
        active[p] = true;
    }
    let free: Vec<bool> = (0..n)
        .map(|j| usable(j) && mate_of_v[j] == UNMATCHED)
        .collect();
    let column = |j: usize| free[j];
    for &p in rows {
        for &v in &adj[p] {
            if column(v) {
                active[v] = true;
                count[p] += 1;
                count[v] += 1;
            }
        }
    }
    let fits = |i: usize, j: usize| {
        if is_row[i] {
            !is_row[j] && column(j)
        } else {
            is_row[j]
        }
    };
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| active[i] && count[i] == 1).collect();
    let key = |c: usize| if postpone { usize::MAX - c } else { c };
    let mut stalled: BinaryHeap<Reverse<(usize, usize)>> =
        rows.iter().map(|&p| Reverse((key(count[p]), p))).collect();
    let mut set_aside = Vec::new();
    let mut remaining = rows.len();

    let remove = |k: usize,
                  active: &mut [bool],
                  count: &mut [usize],
                  queue: &mut VecDeque<usize>,
                  remaining: &mut usize| {
        active[k] = false;
        for &m in &adj[k] {
            if active[m] && fits(k, m) {
                count[m] -= 1;
                if count[m] == 1 {
                    queue.push_back(m);
                } else if count[m] == 0 && is_row[m] {
                    active[m] = false;
                    *remaining -= 1;
                }
            }
        }
    };

    while remaining > 0 {
        let i = match queue.pop_front() {
            Some(i) if active[i] && count[i] == 1 => i,
            Some(_) => continue,
            None => {
                let Some(Reverse((c, p))) = stalled.pop() else {
                    break;
                };
                if !active[p] {
                    continue;
                }
                if c != key(count[p]) {
                    stalled.push(Reverse((key(count[p]), p)));
                    continue;
                }
                if postpone {
                    set_aside.push(p);
                    remaining -= 1;
                    remove(p, &mut active, &mut count, &mut queue, &mut remaining);
                    continue;
                }
                p
            }
        };
        let Some(j) = adj[i]
            .iter()
            .copied()
            .filter(|&j| active[j] && fits(i, j))
            .min_by_key(|&j| count[j])
        else {
            continue;
        };
        let (p, v) = if is_row[i] { (i, j) } else { (j, i) };
        mate_of_p[p] = v;
        mate_of_v[v] = p;
        remaining -= 1;
        remove(p, &mut active, &mut count, &mut queue, &mut remaining);
        remove(v, &mut active, &mut count, &mut queue, &mut remaining);
    }
    set_aside
}

/// Pairs every zero-diagonal node with a distinct neighbour that has a nonzero
/// diagonal.
///
/// Pairs come from [`peel`], first with stalled rows set aside and then for the
/// rows set aside; whatever is left is matched by augmenting paths.
/// Returns `mate[p]` for zero-diagonal `p`, `UNMATCHED` where no pair exists.
fn saddle_point_matching(adj: &[Vec<usize>], zero_diagonal: &[bool], skip: &[bool]) -> Vec<usize> {
    let n = adj.len();
    let usable = |j: usize| !zero_diagonal[j] && !skip[j];
    let mut mate_of_p = vec![UNMATCHED; n];
    let mut mate_of_v = vec![UNMATCHED; n];
    let multipliers: Vec<usize> = (0..n).filter(|&i| zero_diagonal[i] && !skip[i]).collect();
    let postponed = peel(
        adj,
        &multipliers,
        &usable,
        &mut mate_of_p,
        &mut mate_of_v,
        true,
    );
    peel(
        adj,
        &postponed,
        &usable,
        &mut mate_of_p,
        &mut mate_of_v,
        false,
    );

    let mut visited = vec![UNMATCHED; n];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for &p in &multipliers {
        if mate_of_p[p] != UNMATCHED {
            continue;
        }
        stack.clear();
        stack.push((p, 0));
        while let Some(top) = stack.last_mut() {
            let (q, idx) = *top;
            if idx >= adj[q].len() {
                stack.pop();
                continue;
            }
            top.1 += 1;
            let v = adj[q][idx];
            if !usable(v) || visited[v] == p {
                continue;
            }
            visited[v] = p;
            if mate_of_v[v] == UNMATCHED {
                let mut free = v;
                for &(q, _) in stack.iter().rev() {
                    let previous = mate_of_p[q];
                    mate_of_p[q] = free;
                    mate_of_v[free] = q;
                    free = previous;
                }
                break;
            }
            stack.push((mate_of_v[v], 0));
        }
    }
    mate_of_p
}

/// Fill-reducing column order for `A`, built for symmetric saddle-point matrices.
///
/// Dense nodes are ordered last. Every zero-diagonal node is matched to a
/// neighbour with nonzero diagonal, each pair is compressed into one node of the
/// graph of `A + A^T`, and the compressed graph is ordered by approximate
/// minimum degree. Pairs are emitted with the nonzero-diagonal member first, so
/// every 2x2 block pivot is nonsingular.
/// Returns `order` with `order[k]` the index eliminated at step `k`.
pub fn amd_order(a: &CscMatrix) -> Vec<usize> {
    let n = a.ncols;
    let adj = symmetric_pattern(a);
    let dense = dense_nodes(a);
    let zero_diagonal: Vec<bool> = (0..n).map(|j| a.get(j, j) == 0.0).collect();
    let mate = saddle_point_matching(&adj, &zero_diagonal, &dense);

    let mut id = vec![UNMATCHED; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if dense[i] || (zero_diagonal[i] && mate[i] != UNMATCHED) {
            continue;
        }
        id[i] = members.len();
        members.push(vec![i]);
    }
    for p in 0..n {
        if !dense[p] && zero_diagonal[p] && mate[p] != UNMATCHED {
            let s = id[mate[p]];
            id[p] = s;
            members[s].push(p);
        }
    }
    let compressed: Vec<Vec<usize>> = members
        .iter()
        .enumerate()
        .map(|(s, group)| {
            let mut nb: Vec<usize> = group
                .iter()
                .flat_map(|&m| adj[m].iter())
                .filter(|&&j| !dense[j] && id[j] != s)
                .map(|&j| id[j])
                .collect();
            nb.sort_unstable();
            nb.dedup();
            nb
        })
        .collect();

    let mut order = Vec::with_capacity(n);
    for s in amd_graph(compressed) {
        order.extend_from_slice(&members[s]);
    }
    order.extend((0..n).filter(|&i| dense[i]));
    order
}

/// Approximate minimum degree on an undirected graph given by adjacency lists.
fn amd_graph(mut vars: Vec<Vec<usize>>) -> Vec<usize> {
    let n = vars.len();
    let mut elems: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut elem_vars: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut status = vec![VARIABLE; n];
    let mut degree: Vec<usize> = vars.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|i| Reverse((degree[i], i))).collect();
    let mut mark = vec![usize::MAX; n];
    let mut w: Vec<isize> = vec![-1; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut order = Vec::with_capacity(n);

    for step in 0..n {
        let p = loop {
            let Reverse((d, i)) = heap.pop().expect("heap exhausted before ordering finished");
            if status[i] == VARIABLE && degree[i] == d {
                break i;
            }
        };
        order.push(p);
        mark[p] = step;

        let mut lp = Vec::new();
        for &v in &vars[p] {
            if status[v] == VARIABLE && mark[v] != step {
                mark[v] = step;
                lp.push(v);
            }
        }
        for e in std::mem::take(&mut elems[p]) {
            if status[e] != ELEMENT {
                continue;
            }
            for &v in &elem_vars[e] {
                if status[v] == VARIABLE && mark[v] != step {
                    mark[v] = step;
                    lp.push(v);
                }
            }
            status[e] = ABSORBED;
            elem_vars[e] = Vec::new();
        }
        vars[p] = Vec::new();
        status[p] = ELEMENT;

        // |Le \ Lp| for every element touching Lp.
        for &i in &lp {
            for &e in &elems[i] {
                if status[e] == ELEMENT {
                    if w[e] < 0 {
                        w[e] = elem_vars[e].len() as isize;
                        touched.push(e);
                    }
                    w[e] -= 1;
                }
            }
        }
        for &e in &touched {
            if w[e] == 0 {
                status[e] = ABSORBED;
                elem_vars[e] = Vec::new();
            }
        }

        let remaining = n - step - 1;
        let lp_ext = lp.len().saturating_sub(1);
        for &i in &lp {
            elems[i].retain(|&e| status[e] == ELEMENT);
            vars[i].retain(|&v| status[v] == VARIABLE && mark[v] != step);
            let external: usize = elems[i].iter().map(|&e| w[e].max(0) as usize).sum();
            elems[i].push(p);
            let approx = vars[i].len() + lp_ext + external;
            let d = approx
                .min(degree[i] + lp_ext)
                .min(remaining.saturating_sub(1));
            degree[i] = d;
            heap.push(Reverse((d, i)));
        }
        for e in touched.drain(..) {
            w[e] = -1;
        }
        elem_vars[p] = lp;
    }
    order
}

/// Symmetric equilibration: `d` such that every row and column of `D A D`
/// has largest entry close to one.
pub fn symmetric_scaling(a: &CscMatrix) -> Vec<f64> {
    let n = a.ncols;
    let mut d = vec![1.0; n];
    for _ in 0..8 {
        let mut m = vec![0.0f64; n];
        for j in 0..n {
            for (i, v) in a.col(j) {
                let s = (d[i] * v * d[j]).abs();
                m[i] = m[i].max(s);
                m[j] = m[j].max(s);
            }
        }
        for i in 0..n {
            if m[i] > 0.0 {
                d[i] /= m[i].sqrt();
            }
        }
    }
    d
}

/// Copy of `D A D` without its zero entries.
fn scaled_without_zeros(a: &CscMatrix, d: &[f64]) -> CscMatrix {
    let mut col_ptr = Vec::with_capacity(a.ncols + 1);
    let mut row_idx = Vec::with_capacity(a.nnz());
    let mut values = Vec::with_capacity(a.nnz());
    col_ptr.push(0);
    for j in 0..a.ncols {
        for (i, v) in a.col(j) {
            if v != 0.0 {
                row_idx.push(i);
                values.push(d[i] * v * d[j]);
            }
        }
        col_ptr.push(row_idx.len());
    }
    CscMatrix {
        nrows: a.nrows,
        ncols: a.ncols,
        col_ptr,
        row_idx,
        values,
    }
}

/// Sparse LU factors of `D A D Q = P^T L U` with a symmetric equilibration `D`.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    l: CscMatrix,
    u: CscMatrix,
    /// `pinv[i]` is the pivot step of original row `i`.
    pinv: Vec<usize>,
    /// `q[k]` is the original column eliminated at step `k`.
    q: Vec<usize>,
    /// Symmetric scaling applied before factoring.
    scale: Vec<f64>,
    /// Steps whose pivot row differs from the column index.
    pub off_diagonal_pivots: usize,
}

impl SparseLu {
    /// Factor with an AMD column ordering.
    pub fn factor(a: &CscMatrix) -> Result<Self, LinearSolveError> {
        let q = amd_order(a);
        Self::factor_with_order(a, q, PIVOT_THRESHOLD)
    }

    pub fn factor_with_order(
        a: &CscMatrix,
        q: Vec<usize>,
        threshold: f64,
    ) -> Result<Self, LinearSolveError> {
        let n = a.ncols;
        if a.nrows != n || q.len() != n {
            return Err(LinearSolveError::Dimension(format!(
                "{}x{} matrix, order of length {}",
                a.nrows,
                n,
                q.len()
            )));
        }
        const NONE: usize = usize::MAX;
        let scale = symmetric_scaling(a);
        let a = &scaled_without_zeros(a, &scale);
        // Dense rows are only used as pivots when nothing else is available,
        // otherwise their coupling spreads to every column they touch.
        let deferred = dense_nodes(a);
        let guess = 4 * a.nnz() + n;
        let mut lp = vec![0usize; n + 1];
        let mut li: Vec<usize> = Vec::with_capacity(guess);
        let mut lx: Vec<f64> = Vec::with_capacity(guess);
        let mut up = vec![0usize; n + 1];
        let mut ui: Vec<usize> = Vec::with_capacity(guess);
        let mut ux: Vec<f64> = Vec::with_capacity(guess);
        let mut pinv = vec![NONE; n];
        let mut x = vec![0.0; n];
        let mut mark = vec![NONE; n];
        let mut reach: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut off_diagonal_pivots = 0;

        for k in 0..n {
            let col = q[k];
            lp[k] = li.len();
            up[k] = ui.len();

            // Nonzero pattern of L \ A(:, col), in reverse topological order.
            reach.clear();
            for (start, _) in a.col(col) {
                if mark[start] == k {
                    continue;
                }
                mark[start] = k;
                stack.push((start, 0));
                while let Some(top) = stack.last_mut() {
                    let (node, child) = *top;
                    let j = pinv[node];
                    let children = if j == NONE { 0 } else { lp[j + 1] - lp[j] - 1 };
                    if child < children {
                        top.1 += 1;
                        let next = li[lp[j] + 1 + child];
                        if mark[next] != k {
                            mark[next] = k;
                            stack.push((next, 0));
                        }
                    } else {
                        reach.push(node);
                        stack.pop();
                    }
                }
            }

            for (i, v) in a.col(col) {
                x[i] = v;
            }
            for &i in reach.iter().rev() {
                let j = pinv[i];
                if j == NONE {
                    continue;
                }
                let xi = x[i];
                if xi != 0.0 {
                    for p in lp[j] + 1..lp[j + 1] {
                        x[li[p]] -= lx[p] * xi;
                    }
                }
            }

            // Largest candidate overall, and largest among rows that are not deferred.
            let mut amax = -1.0;
            let mut ipiv = NONE;
            let mut best = -1.0;
            let mut ibest = NONE;
            for &i in reach.iter().rev() {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > amax {
                        amax = t;
                        ipiv = i;
                    }
                    if !deferred[i] && t > best {
                        best = t;
                        ibest = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == NONE || amax <= 0.0 || !amax.is_finite() {
                return Err(LinearSolveError::Singular { step: k });
            }
            if ibest != NONE && best >= threshold * amax {
                ipiv = ibest;
            }
            if pinv[col] == NONE && mark[col] == k && x[col].abs() >= threshold * amax {
                ipiv = col;
            }
            if ipiv != col {
                off_diagonal_pivots += 1;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in reach.iter().rev() {
                if pinv[i] == NONE {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp[n] = li.len();
        up[n] = ui.len();
        for r in li.iter_mut() {
            *r = pinv[*r];
        }
        let l = CscMatrix {
            nrows: n,
            ncols: n,
            col_ptr: lp,
            row_idx: li,
            values: lx,
        };
        let u = CscMatrix {
            nrows: n,
            ncols: n,
            col_ptr: up,
            row_idx: ui,
            values: ux,
        };
        Ok(SparseLu {
            n,
            l,
            u,
            pinv,
            q,
            scale,
            off_diagonal_pivots,
        })
    }

    /// Nonzeros of `L + U`.
    pub fn fill(&self) -> usize {
        self.l.nnz() + self.u.nnz() - self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0.0; n];
        for i in 0..n {
            z[self.pinv[i]] = self.scale[i] * b[i];
        }
        for j in 0..n {
            let zj = z[j];
            if zj != 0.0 {
                for p in self.l.col_ptr[j] + 1..self.l.col_ptr[j + 1] {
                    z[self.l.row_idx[p]] -= self.l.values[p] * zj;
                }
            }
        }
        for k in (0..n).rev() {
            let last = self.u.col_ptr[k + 1] - 1;
            z[k] /= self.u.values[last];
            let zk = z[k];
            if zk != 0.0 {
                for p in self.u.col_ptr[k]..last {
                    z[self.u.row_idx[p]] -= self.u.values[p] * zk;
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.q[k]] = self.scale[self.q[k]] * z[k];
        }
        x
    }
}

/// Dense LU with partial pivoting, row-major storage.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(a: &CscMatrix) -> Result<Self, LinearSolveError> {
        let n = a.nrows;
        if a.ncols != n {
            return Err(LinearSolveError::Dimension(format!(
                "{}x{} matrix",
                a.nrows, a.ncols
            )));
        }
        let mut lu = vec![0.0; n * n];
        for j in 0..n {
            for (i, v) in a.col(j) {
                lu[i * n + j] += v;
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, amax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |m, c| if c.1 > m.1 { c } else { m });
            if amax <= 0.0 || !amax.is_finite() {
                return Err(LinearSolveError::Singular { step: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                if f != 0.0 {
                    lu[i * n + k] = f;
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                } else {
                    lu[i * n + k] = 0.0;
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

/// Solves `A x = b`: dense LU below [`DENSE_THRESHOLD`] unknowns, sparse LU otherwise.
pub fn sparse_lu_solve(a: &CscMatrix, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
    if b.len() != a.nrows {
        return Err(LinearSolveError::Dimension(format!(
            "rhs of length {} for {} rows",
            b.len(),
            a.nrows
        )));
    }
    if a.nrows < DENSE_THRESHOLD {
        Ok(DenseLu::factor(a)?.solve(b))
    } else {
        Ok(SparseLu::factor(a)?.solve(b))
    }
}

/// `||A x - b||_inf / (||A||_inf ||x||_inf + ||b||_inf)`.
pub fn relative_residual(a: &CscMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    r / (a.norm_inf() * xn + bn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn from_dense(d: &[&[f64]]) -> CscMatrix {
        let mut t = TripletMatrix::new(d.len(), d[0].len());
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csc()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = TripletMatrix::new(2, 2);
        t.push(1, 0, 2.0);
        t.push(0, 0, 1.0);
        t.push(1, 0, 3.0);
        let c = t.to_csc();
        assert_eq!(c.get(1, 0), 5.0);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.nnz(), 2);
        assert_eq!(t.to_csr().mul_vec(&[1.0, 1.0]), c.mul_vec(&[1.0, 1.0]));
    }

    #[test]
    fn identity_solves_to_rhs() {
        let a = CscMatrix::identity(5);
        let b = [1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(sparse_lu_solve(&a, &b).unwrap(), b.to_vec());
        let lu = SparseLu::factor(&a).unwrap();
        assert_eq!(lu.solve(&b), b.to_vec());
    }

    #[test]
    fn antidiagonal_needs_pivoting() {
        let a = from_dense(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let x = SparseLu::factor_with_order(&a, vec![0, 1], PIVOT_THRESHOLD)
            .unwrap()
            .solve(&[1.0, 2.0]);
        assert_eq!(x, vec![2.0, 1.0]);
        assert_eq!(
            DenseLu::factor(&a).unwrap().solve(&[1.0, 2.0]),
            vec![2.0, 1.0]
        );
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = from_dense(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            SparseLu::factor(&a),
            Err(LinearSolveError::Singular { .. })
        ));
        assert!(matches!(
            DenseLu::factor(&a),
            Err(LinearSolveError::Singular { .. })
        ));
    }

    fn random_saddle_point(n_u: usize, n_p: usize, seed: u64) -> CscMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n_u + n_p;
        let mut t = TripletMatrix::new(n, n);
        for i in 0..n_u {
            t.push(i, i, 4.0 + rng.gen::<f64>());
            for _ in 0..3 {
                let j = rng.gen_range(0..n_u);
                let v = rng.gen_range(-1.0..1.0);
                t.push(i, j, v);
                t.push(j, i, v);
            }
        }
        for p in 0..n_p {
            for _ in 0..4 {
                let j = rng.gen_range(0..n_u);
                let v = rng.gen_range(-1.0..1.0);
                t.push(n_u + p, j, v);
                t.push(j, n_u + p, v);
            }
            // Guarantee full rank of the constraint block.
            t.push(n_u + p, p, 1.0);
            t.push(p, n_u + p, 1.0);
        }
        t.to_csc()
    }

    #[test]
    fn saddle_point_against_dense_oracle() {
        let a = random_saddle_point(140, 60, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sparse = SparseLu::factor(&a).unwrap().solve(&b);
        let dense = DenseLu::factor(&a).unwrap().solve(&b);
        assert!(relative_residual(&a, &sparse, &b) <= 1e-10);
        assert!(relative_residual(&a, &dense, &b) <= 1e-10);
        let diff = sparse
            .iter()
            .zip(&dense)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let scale = dense.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-9 * scale);
    }

    #[test]
    fn amd_is_a_permutation() {
        let a = random_saddle_point(300, 100, 3);
        let mut order = amd_order(&a);
        order.sort_unstable();
        assert_eq!(order, (0..400).collect::<Vec<_>>());
    }

    #[test]
    fn amd_keeps_fill_low_on_a_grid_laplacian() {
        let m = 40;
        let n = m * m;
        let mut t = TripletMatrix::new(n, n);
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                t.push(k, k, 4.0);
                if i + 1 < m {
                    t.push(k, k + m, -1.0);
                    t.push(k + m, k, -1.0);
                }
                if j + 1 < m {
                    t.push(k, k + 1, -1.0);
                    t.push(k + 1, k, -1.0);
                }
            }
        }
        let a = t.to_csc();
        let natural = SparseLu::factor_with_order(&a, (0..n).collect(), PIVOT_THRESHOLD).unwrap();
        let amd = SparseLu::factor(&a).unwrap();
        assert!(
            amd.fill() < natural.fill(),
            "amd {} natural {}",
            amd.fill(),
            natural.fill()
        );
        let b = vec![1.0; n];
        assert!(relative_residual(&a, &amd.solve(&b), &b) < 1e-12);
    }
}
