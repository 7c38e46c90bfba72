//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues (ascending) and matching eigenvectors of a symmetric matrix.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Orthonormal basis (columns) of the null space of `a`, with the numerical
/// rank. Singular values below `rel_tol · σ_max` count as zero.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let ncols = a.ncols();
    if a.nrows() == 0 || ncols == 0 {
        return (DMatrix::identity(ncols, ncols), 0);
    }
    // row space from the small Gram matrix
    let (vals, vecs) = sorted_symmetric_eigen(&(a * a.transpose()));
    let top = vals.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut frame: Vec<DVector<f64>> = Vec::new();
    for (i, &v) in vals.iter().enumerate().rev() {
        if v > 0.0 && v.sqrt() > rel_tol * top.sqrt() {
            let r = a.transpose() * vecs.column(i) / v.sqrt();
            if let Some(r) = orthonormalize(r, &frame) {
                frame.push(r);
            }
        }
    }
    let rank = frame.len();
    let mut basis = DMatrix::zeros(ncols, ncols - rank);
    let mut found = 0;
    for j in 0..ncols {
        if found == ncols - rank {
            break;
        }
        let e = DVector::from_fn(ncols, |r, _| if r == j { 1.0 } else { 0.0 });
        if let Some(q) = orthonormalize(e, &frame) {
            basis.set_column(found, &q);
            frame.push(q);
            found += 1;
        }
    }
    (basis, rank)
}

/// Projects `v` off an orthonormal frame twice and normalizes; `None` when
/// little of `v` survives.
fn orthonormalize(mut v: DVector<f64>, frame: &[DVector<f64>]) -> Option<DVector<f64>> {
    let start = v.norm();
    for _ in 0..2 {
        for q in frame {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
    }
    let norm = v.norm();
    (norm > 0.1 * start).then(|| v / norm)
}

/// Minimum-norm solution of a symmetric positive semidefinite system.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let (vals, vecs) = sorted_symmetric_eigen(a);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut x = DVector::zeros(a.ncols());
    for (i, &v) in vals.iter().enumerate() {
        if v.abs() > rel_tol * top {
            let col = vecs.column(i);
            x += col * (col.dot(b) / v);
        }
    }
    x
}
