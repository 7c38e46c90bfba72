//! Generalized symmetric eigenproblems `K x = λ M x`.
//!
//! Small problems go through a dense Cholesky reduction. Larger ones use
//! block shift-invert subspace iteration with Rayleigh–Ritz in the
//! M-inner product.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ldl::LdlFactor;
use super::sparse::{dot, CsrMatrix};
use crate::error::{Error, Result};

/// Eigenvalues closer than this (relative) are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;

const DENSE_LIMIT: usize = 400;

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// M-normalized coefficient vector.
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// The `n` smallest eigenvalues.
    Lowest(usize),
    /// The `count` eigenvalues closest to `target`.
    Near { target: f64, count: usize },
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Shift used for `Window::Lowest` (defaults to 0).
    pub shift: Option<f64>,
    /// Vectors to project out (M-orthogonally); they need not be normalized.
    pub deflation: Vec<Vec<f64>>,
    /// Warm start for the iteration subspace.
    pub initial: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-9,
            max_iter: 2000,
            shift: None,
            deflation: Vec::new(),
            initial: Vec::new(),
            seed: 7,
        }
    }
}

fn m_dot(m: &CsrMatrix, x: &[f64], y: &[f64]) -> f64 {
    m.bilinear(x, y)
}

/// M-orthonormalizes the deflation set, dropping dependent vectors.
fn orthonormal_deflation(m: &CsrMatrix, vecs: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for v in vecs {
        let mut x = v.clone();
        for _ in 0..2 {
            for (q, mq) in &out {
                let c = dot(mq, &x);
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= c * qi;
                }
            }
        }
        let nrm = m_dot(m, &x, &x).sqrt();
        let scale = m_dot(m, v, v).sqrt();
        if nrm > 1e-10 * scale && nrm > 0.0 {
            x.iter_mut().for_each(|xi| *xi /= nrm);
            let mx = m.mul_vec(&x);
            out.push((x, mx));
        }
    }
    out
}

fn project_out(defl: &[(Vec<f64>, Vec<f64>)], x: &mut [f64]) {
    for (q, mq) in defl {
        let c = dot(mq, x);
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi -= c * qi;
        }
    }
}

/// Relative residual `‖Kx − λMx‖ / (‖Kx‖ + |λ|‖Mx‖)`.
pub fn relative_residual(k: &CsrMatrix, m: &CsrMatrix, value: f64, x: &[f64]) -> f64 {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let r: f64 = kx
        .iter()
        .zip(&mx)
        .map(|(a, b)| (a - value * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = dot(&kx, &kx).sqrt() + value.abs() * dot(&mx, &mx).sqrt();
    if scale == 0.0 {
        0.0
    } else {
        r / scale
    }
}

/// Groups sorted eigenvalues into clusters of numerically equal values.
pub fn clusters(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len()
            || (values[i] - values[i - 1]).abs() > CLUSTER_TOL * (1.0 + values[i - 1].abs())
        {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Number of eigenvalues strictly below `tau`, from the inertia of `K − τM`.
pub fn count_below(k: &CsrMatrix, m: &CsrMatrix, tau: f64) -> Result<usize> {
    let shifted = k.add_scaled(m, -tau);
    Ok(LdlFactor::new(&shifted)?.inertia().negative)
}

pub fn eigensolve(
    k: &CsrMatrix,
    m: &CsrMatrix,
    window: Window,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>> {
    let n = k.nrows();
    assert_eq!(m.nrows(), n);
    let defl = orthonormal_deflation(m, &opts.deflation);
    let available = n.saturating_sub(defl.len());
    let count = match window {
        Window::Lowest(c) => c,
        Window::Near { count, .. } => count,
    }
    .min(available);
    if count == 0 {
        return Ok(Vec::new());
    }
    if n <= DENSE_LIMIT {
        dense_solve(k, m, window, count, &defl)
    } else {
        subspace_iteration(k, m, window, count, &defl, opts)
    }
}

fn dense_solve(
    k: &CsrMatrix,
    m: &CsrMatrix,
    window: Window,
    count: usize,
    defl: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<EigenPair>> {
    let n = k.nrows();
    let md = m.to_dense();
    let kd = k.to_dense();
    let chol = md
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L⁻¹ K L⁻ᵀ
    let linv_k = l
        .solve_lower_triangular(&kd)
        .ok_or(Error::SingularPivot { row: 0 })?;
    let c = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or(Error::SingularPivot { row: 0 })?;
    let mut c = (&c + c.transpose()) * 0.5;
    // deflation in the transformed coordinates y = Lᵀx
    let mut dt: Vec<DVector<f64>> = Vec::new();
    for (q, _) in defl {
        let y = l.transpose() * DVector::from_column_slice(q);
        dt.push(y);
    }
    if !dt.is_empty() {
        let mut p = DMatrix::<f64>::identity(n, n);
        for y in &dt {
            p -= y * y.transpose();
        }
        c = &p * &c * &p;
        c = (&c + c.transpose()) * 0.5;
    }
    let eig = SymmetricEigen::new(c);
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors.column(j).into_owned()))
        .filter(|(_, y)| dt.iter().all(|d| d.dot(y).abs() < 0.5))
        .collect();
    sort_window(&mut pairs, window);
    pairs.truncate(count);
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lt = l.transpose();
    Ok(pairs
        .into_iter()
        .map(|(value, y)| {
            let x = lt
                .solve_upper_triangular(&y)
                .expect("triangular factor is nonsingular");
            let mut v: Vec<f64> = x.iter().copied().collect();
            let nrm = m_dot(m, &v, &v).sqrt();
            v.iter_mut().for_each(|t| *t /= nrm);
            EigenPair { value, vector: v }
        })
        .collect())
}

fn sort_window<T>(pairs: &mut [(f64, T)], window: Window) {
    match window {
        Window::Lowest(_) => pairs.sort_by(|a, b| a.0.total_cmp(&b.0)),
        Window::Near { target, .. } => pairs.sort_by(|a, b| {
            (a.0 - target)
                .abs()
                .total_cmp(&(b.0 - target).abs())
                .then(a.0.total_cmp(&b.0))
        }),
    }
}

fn factor_with_retry(k: &CsrMatrix, m: &CsrMatrix, tau: f64) -> Result<(LdlFactor, f64)> {
    let scale = 1.0 + tau.abs();
    let mut last = None;
    for attempt in 0..6 {
        let t = if attempt == 0 {
            tau
        } else {
            let mag = 1e-7 * scale * 10f64.powi(attempt - 1);
            if attempt % 2 == 1 {
                tau - mag
            } else {
                tau + mag
            }
        };
        match LdlFactor::new(&k.add_scaled(m, -t)) {
            Ok(f) => return Ok((f, t)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

/// M-orthonormalizes the columns, dropping numerically dependent ones.
fn m_orthonormalize(m: &CsrMatrix, cols: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    let mut mout: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for mut x in cols {
        let orig = m_dot(m, &x, &x).sqrt();
        if orig == 0.0 || !orig.is_finite() {
            continue;
        }
        x.iter_mut().for_each(|t| *t /= orig);
        for _ in 0..2 {
            for (q, mq) in out.iter().zip(&mout) {
                let c = dot(mq, &x);
                for (xi, qi) in x.iter_mut().zip(q) {
                    *xi -= c * qi;
                }
            }
        }
        let nrm = m_dot(m, &x, &x).sqrt();
        if nrm > 1e-8 {
            x.iter_mut().for_each(|t| *t /= nrm);
            mout.push(m.mul_vec(&x));
            out.push(x);
        }
    }
    out
}

fn subspace_iteration(
    k: &CsrMatrix,
    m: &CsrMatrix,
    window: Window,
    count: usize,
    defl: &[(Vec<f64>, Vec<f64>)],
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>> {
    let n = k.nrows();
    let available = n - defl.len();
    let block = (2 * count).max(count + 8).min(available);
    let tau0 = match window {
        Window::Lowest(_) => opts.shift.unwrap_or(0.0),
        Window::Near { target, .. } => target,
    };
    let (factor, _tau) = factor_with_retry(k, m, tau0)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = opts
        .initial
        .iter()
        .filter(|v| v.len() == n)
        .take(block)
        .cloned()
        .collect();
    while x.len() < block {
        x.push((0..n).map(|_| rng.random::<f64>() - 0.5).collect());
    }
    for col in x.iter_mut() {
        project_out(defl, col);
    }
    let mut worst = f64::INFINITY;
    for _iter in 0..opts.max_iter {
        // Y = (K − τM)⁻¹ M X, deflated
        let y: Vec<Vec<f64>> = x
            .par_iter()
            .map(|col| {
                let mut v = factor.solve(&m.mul_vec(col));
                project_out(defl, &mut v);
                v
            })
            .collect();
        let mut q = m_orthonormalize(m, y);
        while q.len() < block {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            project_out(defl, &mut v);
            q.push(v);
            q = m_orthonormalize(m, q);
        }
        let kq: Vec<Vec<f64>> = q.par_iter().map(|c| k.mul_vec(c)).collect();
        let p = q.len();
        let mut h = DMatrix::<f64>::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = dot(&q[i], &kq[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut ritz: Vec<(f64, usize)> = (0..p).map(|j| (eig.eigenvalues[j], j)).collect();
        sort_window(&mut ritz, window);
        let new_x: Vec<Vec<f64>> = ritz
            .iter()
            .map(|&(_, j)| {
                let z = eig.eigenvectors.column(j);
                let mut v = vec![0.0; n];
                for (i, qi) in q.iter().enumerate() {
                    let c = z[i];
                    if c != 0.0 {
                        for (vt, qt) in v.iter_mut().zip(qi) {
                            *vt += c * qt;
                        }
                    }
                }
                v
            })
            .collect();
        worst = ritz[..count]
            .par_iter()
            .zip(&new_x[..count])
            .map(|(&(val, _), v)| relative_residual(k, m, val, v))
            .reduce(|| 0.0, f64::max);
        x = new_x;
        if worst <= opts.tol {
            let mut pairs: Vec<EigenPair> = ritz[..count]
                .iter()
                .zip(x)
                .map(|(&(value, _), vector)| EigenPair { value, vector })
                .collect();
            pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
            return Ok(pairs);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: worst,
    })
}

/// Lowest eigenpairs, enlarging the window until it reaches past `threshold`
/// (or exhausts the space).
pub fn lowest_through(
    k: &CsrMatrix,
    m: &CsrMatrix,
    threshold: f64,
    start: usize,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>> {
    let n = k.nrows();
    let mut want = start.max(1);
    loop {
        let pairs = eigensolve(k, m, Window::Lowest(want), opts)?;
        let saturated = pairs.len() < want || want >= n;
        if saturated || pairs.last().is_none_or(|p| p.value > threshold) {
            return Ok(pairs);
        }
        want *= 2;
    }
}
