//! Envelope (profile) LDLᵀ factorization with reverse Cuthill–McKee ordering.
//!
//! No pivoting. Suitable for the symmetric positive definite and mildly
//! indefinite matrices that show up in shift-invert iterations; a vanishing
//! pivot is reported as an error so callers can perturb the shift.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    first: Vec<usize>,
    rowptr: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

/// Counts of negative, zero and positive pivots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, mask: &[bool]| -> Vec<Vec<usize>> {
        let mut seen = vec![false; n];
        let mut levels = vec![vec![start]];
        seen[start] = true;
        loop {
            let mut next = Vec::new();
            for &u in levels.last().unwrap() {
                for &v in &adj[u] {
                    if !seen[v] && !mask[v] {
                        seen[v] = true;
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
        // pseudo-peripheral start node
        let mut start = seed;
        let mut ecc = bfs_levels(start, &visited).len();
        for _ in 0..8 {
            let levels = bfs_levels(start, &visited);
            let candidate = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&v| (degree[v], v))
                .unwrap();
            let e = bfs_levels(candidate, &visited).len();
            if e > ecc {
                ecc = e;
                start = candidate;
            } else {
                break;
            }
        }
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

impl LdlFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "LDLᵀ needs a square matrix");
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        // envelope of the permuted lower triangle
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = iperm[old];
            for (jold, _) in a.row(old) {
                let j = iperm[jold];
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut rowptr = Vec::with_capacity(n + 1);
        rowptr.push(0);
        for i in 0..n {
            rowptr.push(rowptr[i] + (i - first[i]));
        }
        let mut lower = vec![0.0; rowptr[n]];
        let mut diag = vec![0.0; n];
        for old in 0..n {
            let i = iperm[old];
            for (jold, v) in a.row(old) {
                let j = iperm[jold];
                if j < i {
                    lower[rowptr[i] + j - first[i]] += v;
                } else if j == i {
                    diag[i] += v;
                }
            }
        }
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);

        for i in 0..n {
            let fi = first[i];
            let base_i = rowptr[i];
            // lower[base_i + (j - fi)] holds a_ij, overwritten by w_j = L_ij D_j
            for j in fi..i {
                let fj = first[j];
                let base_j = rowptr[j];
                let k0 = fi.max(fj);
                let mut s = lower[base_i + j - fi];
                for k in k0..j {
                    s -= lower[base_i + k - fi] * lower[base_j + k - fj];
                }
                lower[base_i + j - fi] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let w = lower[base_i + j - fi];
                let l = w / diag[j];
                d -= w * l;
                lower[base_i + j - fi] = l;
            }
            if !(d.abs() > 1e-14 * scale) || !d.is_finite() {
                return Err(Error::SingularPivot { row: perm[i] });
            }
            diag[i] = d;
        }
        Ok(LdlFactor {
            n,
            perm,
            first,
            rowptr,
            lower,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut z: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let base = self.rowptr[i];
            let mut s = z[i];
            for j in fi..i {
                s -= self.lower[base + j - fi] * z[j];
            }
            z[i] = s;
        }
        for i in 0..n {
            z[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let base = self.rowptr[i];
            let xi = z[i];
            for j in fi..i {
                z[j] -= self.lower[base + j - fi] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = z[new];
        }
        x
    }

    /// Sylvester inertia of the factored matrix.
    pub fn inertia(&self) -> Inertia {
        let mut out = Inertia {
            negative: 0,
            zero: 0,
            positive: 0,
        };
        for &d in &self.diag {
            if d < 0.0 {
                out.negative += 1;
            } else if d > 0.0 {
                out.positive += 1;
            } else {
                out.zero += 1;
            }
        }
        out
    }

    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }
}
