//! Sparse LDLᵀ factorization (up-looking, elimination-tree based) with
//! reverse Cuthill–McKee ordering.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;

/// Pivots with `|D| ≤ PIVOT_RTOL · max|diag|` count as zero.
pub const PIVOT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Ldl {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    /// Number of (near-)zero pivots met during factorization.
    pub nullity: usize,
}

/// Breadth-first order from `start` over unplaced nodes, with the level of each.
fn bfs_levels(a: &CsrMatrix, start: usize, placed: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut dist = vec![usize::MAX; a.n];
    let mut order = vec![start];
    dist[start] = 0;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for (w, _) in a.row(v) {
            if !placed[w] && dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                order.push(w);
            }
        }
    }
    let levels = order.iter().map(|&v| dist[v]).collect();
    (order, levels)
}

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn rcm(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.indptr[i + 1] - a.indptr[i]).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if placed[seed] {
            continue;
        }
        // pseudo-peripheral start: hop to a low-degree node of the last level
        let mut start = seed;
        let (mut comp, mut levels) = bfs_levels(a, start, &placed);
        for _ in 0..8 {
            let depth = *levels.last().expect("component is non-empty");
            let far = comp
                .iter()
                .zip(&levels)
                .filter(|(_, l)| **l == depth)
                .map(|(v, _)| *v)
                .min_by_key(|&v| (degree[v], v))
                .expect("last level is non-empty");
            let (c2, l2) = bfs_levels(a, far, &placed);
            if *l2.last().expect("non-empty") <= depth {
                break;
            }
            start = far;
            comp = c2;
            levels = l2;
        }
        let mut queue = VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).map(|(w, _)| w).filter(|&w| !placed[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            nbrs.dedup();
            for w in nbrs {
                placed[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

impl Ldl {
    /// Factorizes a symmetric matrix given with both triangles.
    pub fn factor(a: &CsrMatrix) -> Ldl {
        let n = a.n;
        let perm = rcm(a);
        let mut pinv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        // upper triangle of P A Pᵗ, stored by column
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for old_r in 0..n {
            let r = pinv[old_r];
            for (old_c, v) in a.row(old_r) {
                let c = pinv[old_c];
                if r <= c {
                    cols[c].push((r, v));
                }
            }
        }
        for c in cols.iter_mut() {
            c.sort_by_key(|e| e.0);
        }

        // symbolic: elimination tree and column counts
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(i0, _) in &cols[k] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == usize::MAX {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // numeric
        let total = lp[n];
        let mut li = vec![0usize; total];
        let mut lx = vec![0.0f64; total];
        let mut d = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        let mut pattern = vec![0usize; n];
        let mut count = vec![0usize; n];
        let diag_max = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let pivot_tol = PIVOT_RTOL * diag_max.max(f64::MIN_POSITIVE);
        let mut nullity = 0;
        flag.iter_mut().for_each(|f| *f = usize::MAX);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for &(i0, v) in &cols[k] {
                let mut i = i0;
                y[i] += v;
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
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + count[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                dk -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                count[i] += 1;
            }
            if dk.abs() <= pivot_tol || !dk.is_finite() {
                nullity += 1;
                dk = diag_max.max(1.0);
            }
            d[k] = dk;
        }
        Ldl {
            n,
            perm,
            pinv,
            lp,
            li,
            lx,
            d,
            nullity,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.li.len()
    }

    pub fn is_singular(&self) -> bool {
        self.nullity > 0
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[self.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        (0..n).map(|old| x[self.pinv[old]]).collect()
    }

    /// Solve followed by one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn solves_tridiagonal() {
        let a = laplacian(50, 0.0);
        let f = Ldl::factor(&a);
        assert_eq!(f.nullity, 0);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = f.solve_refined(&a, &b);
        let r: f64 = a.matvec(&x).iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(r < 1e-12, "residual {r}");
    }

    #[test]
    fn detects_singularity() {
        // pure Neumann Laplacian: constant vector in the null space
        let mut t = Vec::new();
        let n = 10;
        for i in 0..n {
            let deg = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            t.push((i, i, deg));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let f = Ldl::factor(&CsrMatrix::from_triplets(n, t));
        assert_eq!(f.nullity, 1);
    }

    #[test]
    fn rcm_is_permutation() {
        let a = laplacian(30, 1.0);
        let mut p = rcm(&a);
        p.sort_unstable();
        assert_eq!(p, (0..30).collect::<Vec<_>>());
    }
}
