//! Sparse symmetric positive-definite solver: up-looking LDLᵀ over a
//! caller-supplied fill-reducing ordering.

use std::collections::BTreeSet;

const NONE: usize = usize::MAX;

/// Symmetric matrix in compressed-column form holding both triangles.
#[derive(Debug, Clone, Default)]
pub(crate) struct SymmetricCsc {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SymmetricCsc {
    /// Builds from per-column `(row, value)` lists; duplicates are not merged.
    pub fn from_columns(columns: &[Vec<(usize, f64)>]) -> Self {
        let mut m = SymmetricCsc {
            n: columns.len(),
            col_ptr: Vec::with_capacity(columns.len() + 1),
            ..Default::default()
        };
        m.col_ptr.push(0);
        for col in columns {
            for &(r, v) in col {
                m.row_idx.push(r);
                m.values.push(v);
            }
            m.col_ptr.push(m.row_idx.len());
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NotPositiveDefinite {
    pub column: usize,
}

/// Solves `A x = b` for symmetric positive-definite `A`, eliminating
/// unknowns in the order given by `perm` (`perm[k]` is the k-th pivot).
pub(crate) fn ldl_solve(
    a: &SymmetricCsc,
    perm: &[usize],
    b: &[f64],
) -> Result<Vec<f64>, NotPositiveDefinite> {
    let n = a.n;
    debug_assert_eq!(perm.len(), n);
    debug_assert_eq!(b.len(), n);
    let mut pinv = vec![0; n];
    for (k, &p) in perm.iter().enumerate() {
        pinv[p] = k;
    }

    // Symbolic: elimination tree and column counts.
    let mut parent = vec![NONE; n];
    let mut flag = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        let kk = perm[k];
        for p in a.col_ptr[kk]..a.col_ptr[kk + 1] {
            let mut i = pinv[a.row_idx[p]];
            if i < k {
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
    }
    let mut lp = vec![0usize; n + 1];
    for k in 0..n {
        lp[k + 1] = lp[k] + lnz[k];
    }

    // Numeric factorisation.
    let nnz = lp[n];
    let mut li = vec![0usize; nnz];
    let mut lx = vec![0f64; nnz];
    let mut d = vec![0f64; n];
    let mut y = vec![0f64; n];
    let mut pattern = vec![0usize; n];
    flag.iter_mut().for_each(|f| *f = NONE);
    lnz.iter_mut().for_each(|c| *c = 0);
    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        let kk = perm[k];
        for p in a.col_ptr[kk]..a.col_ptr[kk + 1] {
            let mut i = pinv[a.row_idx[p]];
            if i <= k {
                y[i] += a.values[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
        }
        d[k] = y[k];
        y[k] = 0.0;
        for &i in &pattern[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let end = lp[i] + lnz[i];
            for p in lp[i]..end {
                y[li[p]] -= lx[p] * yi;
            }
            let l_ki = yi / d[i];
            d[k] -= l_ki * yi;
            li[end] = k;
            lx[end] = l_ki;
            lnz[i] += 1;
        }
        if !(d[k] > 0.0) {
            return Err(NotPositiveDefinite { column: perm[k] });
        }
    }

    // Triangular solves in permuted space.
    let mut x: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for j in 0..n {
        let xj = x[j];
        for p in lp[j]..lp[j + 1] {
            x[li[p]] -= lx[p] * xj;
        }
    }
    for j in 0..n {
        x[j] /= d[j];
    }
    for j in (0..n).rev() {
        let mut xj = x[j];
        for p in lp[j]..lp[j + 1] {
            xj -= lx[p] * x[li[p]];
        }
        x[j] = xj;
    }
    let mut out = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        out[p] = x[k];
    }
    Ok(out)
}

/// Greedy minimum-degree elimination order on an undirected graph given
/// as adjacency lists. Ties go to the lower vertex index. Returns the rank
/// of each vertex in the order.
pub(crate) fn minimum_degree_rank(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut graph: Vec<BTreeSet<usize>> = adjacency
        .iter()
        .enumerate()
        .map(|(u, adj)| adj.iter().copied().filter(|&v| v != u).collect())
        .collect();
    let mut eliminated = vec![false; n];
    let mut rank = vec![0; n];
    for step in 0..n {
        let pivot = (0..n)
            .filter(|&u| !eliminated[u])
            .min_by_key(|&u| (graph[u].len(), u))
            .expect("uneliminated vertex");
        eliminated[pivot] = true;
        rank[pivot] = step;
        let nbrs: Vec<usize> = std::mem::take(&mut graph[pivot]).into_iter().collect();
        for &u in &nbrs {
            graph[u].remove(&pivot);
        }
        for (k, &u) in nbrs.iter().enumerate() {
            for &v in &nbrs[k + 1..] {
                graph[u].insert(v);
                graph[v].insert(u);
            }
        }
    }
    rank
}
