//! Eigenvalue branches of the Robin family `σ ↦ Δ^χ_σ` on the orthogonal
//! complement of the χ-nodal eigenfunction, and their crossings of `λ*`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dtn::DtnOperator;
use crate::error::{Error, Result};
use crate::fem::SparsePencil;
use crate::linalg::eigen::CLUSTER_TOL;
use crate::linalg::{eigensolve, EigenOptions, EigenPair, Window};
use crate::weighted::{GluedSpace, Sigma};

/// Largest tolerated relative residual of the deflated eigenfunction.
pub const DEFLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Upper end of the finite grid; `None` uses ten times the largest DN
    /// eigenvalue magnitude (or 100 without a DN operator).
    pub sigma_max: Option<f64>,
    /// Number of geometric grid points after `σ = 0`.
    pub grid: usize,
    /// Relative band around `λ*` treated as equal.
    pub band: f64,
    /// Bisection tolerance for crossing locations.
    pub sigma_tol: f64,
    pub max_refinements: usize,
    /// Branches tracked above the last one starting at or below `λ*`.
    pub extra_branches: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            sigma_max: None,
            grid: 24,
            band: CLUSTER_TOL,
            sigma_tol: 1e-8,
            max_refinements: 6,
            extra_branches: 2,
        }
    }
}

/// Branches sampled on an increasing `σ` grid plus the Dirichlet endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct FlowBranchSet {
    pub sigma_grid: Vec<f64>,
    /// `branches[m][j]` is branch `m` at `sigma_grid[j]`.
    pub branches: Vec<Vec<f64>>,
    /// Branch values at `σ = ∞`.
    pub at_infinity: Vec<f64>,
    /// `matching[j][m]`: sorted index at grid point `j + 1` continuing branch `m`.
    pub matching: Vec<Vec<usize>>,
    /// Grid intervals where nearest-value matching stayed ambiguous.
    pub ambiguous: Vec<f64>,
}

impl FlowBranchSet {
    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Largest decrease of any branch between consecutive samples.
    pub fn monotonicity_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (m, b) in self.branches.iter().enumerate() {
            for w in b.windows(2) {
                worst = worst.max(w[0] - w[1]);
            }
            if let (Some(&last), Some(&inf)) = (b.last(), self.at_infinity.get(m)) {
                worst = worst.max(last - inf);
            }
        }
        worst
    }
}

/// Pencil of the family with `φ_*` checked and ready to deflate.
pub struct ReducedFamily<'a> {
    pub space: &'a GluedSpace,
    pub phi: Vec<f64>,
    pub lambda_star: f64,
    phi_interior: Vec<f64>,
}

impl<'a> ReducedFamily<'a> {
    /// Fails when `phi` is not an eigenvector of the `σ = 0` pencil.
    pub fn new(space: &'a GluedSpace, phi: Vec<f64>, lambda_star: f64) -> Result<Self> {
        let residual = space.pencil(Sigma::Finite(0.0)).residual(lambda_star, &phi);
        if !(residual <= DEFLATION_TOL) {
            return Err(Error::NotAnEigenvector { residual });
        }
        let phi_interior = space.restrict_to_interior(&phi);
        Ok(ReducedFamily {
            space,
            phi,
            lambda_star,
            phi_interior,
        })
    }

    fn pencil_and_deflation(&self, sigma: Sigma) -> (SparsePencil, Vec<f64>) {
        let pencil = self.space.pencil(sigma);
        let defl = match sigma {
            Sigma::Infinite => self.phi_interior.clone(),
            Sigma::Finite(_) => self.phi.clone(),
        };
        (pencil, defl)
    }

    /// Eigenpairs of the pencil at `σ` that are M-orthogonal to `φ_*`.
    pub fn reduced_spectrum(&self, sigma: Sigma, window: Window) -> Result<Vec<EigenPair>> {
        let (pencil, defl) = self.pencil_and_deflation(sigma);
        let opts = EigenOptions {
            tol: 1e-11,
            deflation: vec![defl],
            ..Default::default()
        };
        eigensolve(&pencil.stiffness, &pencil.mass, window, &opts)
    }

    fn values(&self, sigma: Sigma, count: usize) -> Result<Vec<f64>> {
        Ok(self
            .reduced_spectrum(sigma, Window::Lowest(count))?
            .into_iter()
            .map(|p| p.value)
            .collect())
    }

    /// Reduced eigenvalues through `threshold`.
    pub fn lowest_through(&self, sigma: Sigma, threshold: f64) -> Result<Vec<f64>> {
        let mut want = 8;
        loop {
            let vals = self.values(sigma, want)?;
            if vals.len() < want || vals.last().is_some_and(|&v| v > threshold) {
                return Ok(vals);
            }
            want *= 2;
        }
    }

    fn band(&self, rel: f64) -> f64 {
        rel * (1.0 + self.lambda_star.abs())
    }
}

/// Matches sorted spectra at consecutive grid points by the assignment of
/// least total distance to the predicted values. Returns the permutation
/// and whether any choice was ambiguous: a rival close to the chosen value
/// whose swap would make some branch decrease. Values within `tol` of each
/// other are interchangeable.
fn match_spectra(prev: &[f64], predicted: &[f64], next: &[f64], tol: f64) -> (Vec<usize>, bool) {
    let n = prev.len().min(next.len());
    // branches are non-decreasing, so moving down is penalized
    let cost = |i: usize, q: f64| {
        let (p, target) = (prev[i], predicted[i]);
        if q >= p {
            (q - target).abs()
        } else {
            (p - q) * 1e3 + (target - p).abs()
        }
    };
    let table: Vec<Vec<f64>> = (0..n).map(|i| next.iter().map(|&q| cost(i, q)).collect()).collect();
    let perm = min_cost_assignment(&table);
    // a close rival only matters when taking it would push a branch down
    let harmful = |i: usize, j: usize, r: usize| {
        let other = perm.iter().position(|&c| c == r);
        next[r] < prev[i] - tol || other.is_some_and(|i2| next[j] < prev[i2] - tol)
    };
    let ambiguous = (0..n).any(|i| {
        let j = perm[i];
        let d = table[i][j];
        d > tol
            && (0..next.len())
                .any(|r| r != j && (next[r] - next[j]).abs() > tol && table[i][r] < 2.0 * d && harmful(i, j, r))
    });
    (perm, ambiguous)
}

/// Rows-to-columns assignment of least total cost (Hungarian method with
/// potentials); needs at least as many columns as rows.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    debug_assert!(n <= m);
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; m + 1]);
    // owner[j]: row (1-based) assigned to column j; column 0 is a sentinel
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=m {
        if owner[j] > 0 {
            perm[owner[j] - 1] = j - 1;
        }
    }
    perm
}

/// Linear extrapolation of each sorted value at grid point `j` to `j + 1`,
/// using the nearest-value partner at `j − 1`.
fn predict(sigmas: &[f64], spectra: &[Vec<f64>], j: usize, tol: f64) -> Vec<f64> {
    let cur = &spectra[j];
    if j == 0 {
        return cur.clone();
    }
    let prev = &spectra[j - 1];
    let (perm, _) = match_spectra(prev, prev, cur, tol);
    let ratio = (sigmas[j + 1] - sigmas[j]) / (sigmas[j] - sigmas[j - 1]);
    let mut out = cur.clone();
    for (m, &c) in perm.iter().enumerate() {
        out[c] = cur[c] + (cur[c] - prev[m]).max(0.0) * ratio;
    }
    out
}

/// Default grid: `0` followed by `grid` geometric points up to `sigma_max`.
pub fn default_sigma_grid(sigma_max: f64, grid: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    if grid == 0 || !(sigma_max > 0.0) {
        return out;
    }
    let lo = sigma_max * 1e-3;
    let ratio = if grid > 1 { (sigma_max / lo).powf(1.0 / (grid - 1) as f64) } else { 1.0 };
    let mut s = if grid > 1 { lo } else { sigma_max };
    for _ in 0..grid {
        out.push(s);
        s *= ratio;
    }
    *out.last_mut().unwrap() = sigma_max;
    out
}

/// Traces `count` branches over `grid` (increasing, starting at 0), refining
/// intervals where matching is ambiguous. Unresolved intervals fall back to
/// sorted order, which is itself a monotone labelling, and are recorded.
pub fn trace_branches(
    family: &ReducedFamily,
    grid: &[f64],
    count: usize,
    band: f64,
    max_refinements: usize,
) -> Result<FlowBranchSet> {
    let tol = family.band(band);
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.first().is_some_and(|&s| s < 0.0) {
        return Err(Error::InvalidInput("σ grid must be increasing and nonnegative".into()));
    }
    let mut sigmas = grid.to_vec();
    let mut spectra: Vec<Vec<f64>> = sigmas
        .par_iter()
        .map(|&s| family.values(Sigma::Finite(s), count))
        .collect::<Result<_>>()?;
    let count = spectra.iter().map(Vec::len).min().unwrap_or(0);
    spectra.iter_mut().for_each(|s| s.truncate(count));

    let mut ambiguous_at = Vec::new();
    let mut j = 0;
    let mut refinements = vec![0usize; sigmas.len()];
    while j + 1 < sigmas.len() {
        let pred = predict(&sigmas, &spectra, j, tol);
        let (_, amb) = match_spectra(&spectra[j], &pred, &spectra[j + 1], tol);
        if amb && refinements[j] < max_refinements {
            let mid = 0.5 * (sigmas[j] + sigmas[j + 1]);
            let mut vals = family.values(Sigma::Finite(mid), count)?;
            vals.truncate(count);
            sigmas.insert(j + 1, mid);
            spectra.insert(j + 1, vals);
            let r = refinements[j] + 1;
            refinements[j] = r;
            refinements.insert(j + 1, r);
            continue;
        }
        if amb {
            ambiguous_at.push(sigmas[j]);
        }
        j += 1;
    }

    let mut branches = vec![Vec::with_capacity(sigmas.len()); count];
    let mut matching = Vec::new();
    let mut current: Vec<usize> = (0..count).collect();
    for (m, b) in branches.iter_mut().enumerate() {
        b.push(spectra[0][m]);
    }
    for j in 0..sigmas.len().saturating_sub(1) {
        let pred = predict(&sigmas, &spectra, j, tol);
        let (perm, amb) = match_spectra(&spectra[j], &pred, &spectra[j + 1], tol);
        let perm = if amb { (0..count).collect() } else { perm };
        current = current.iter().map(|&c| perm[c]).collect();
        for (m, b) in branches.iter_mut().enumerate() {
            b.push(spectra[j + 1][current[m]]);
        }
        matching.push(perm);
    }
    let mut inf = family.values(Sigma::Infinite, count)?;
    inf.resize(count, f64::INFINITY);
    // monotone continuation: the limit is reached in sorted order
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| branches[a].last().unwrap().total_cmp(branches[b].last().unwrap()));
    let mut at_infinity = vec![0.0; count];
    for (rank, &m) in order.iter().enumerate() {
        at_infinity[m] = inf[rank];
    }
    Ok(FlowBranchSet {
        sigma_grid: sigmas,
        branches,
        at_infinity,
        matching,
        ambiguous: ambiguous_at,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub branch: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingCount {
    pub count: usize,
    pub crossings: Vec<Crossing>,
    /// Branches that start below `λ*` but end inside the tolerance band.
    pub inconclusive: Vec<usize>,
}

/// Branches going from below `λ*` at `σ = 0` to above it by the end of the
/// finite grid; each crossing is located by bisection on the sorted index.
pub fn crossing_count(family: &ReducedFamily, set: &FlowBranchSet, band: f64, sigma_tol: f64) -> Result<CrossingCount> {
    let lam = family.lambda_star;
    let tol = family.band(band);
    let count = set.n_branches();
    let mut crossings = Vec::new();
    let mut inconclusive = Vec::new();
    for (m, b) in set.branches.iter().enumerate() {
        let (first, last) = (b[0], *b.last().unwrap());
        if first >= lam - tol {
            continue;
        }
        if last > lam + tol {
            let j = b.iter().position(|&v| v > lam).unwrap();
            let (mut lo, mut hi) = (set.sigma_grid[j - 1], set.sigma_grid[j]);
            // sorted index of this branch just before the crossing
            let below_lo = b[j - 1];
            let vals = family.values(Sigma::Finite(lo), count)?;
            let idx = vals
                .iter()
                .enumerate()
                .min_by(|x, y| (x.1 - below_lo).abs().total_cmp(&(y.1 - below_lo).abs()))
                .map_or(0, |(i, _)| i);
            while hi - lo > sigma_tol * (1.0 + hi) {
                let mid = 0.5 * (lo + hi);
                let v = family.values(Sigma::Finite(mid), count)?;
                if v.get(idx).is_some_and(|&g| g < lam) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(Crossing {
                branch: m,
                sigma: 0.5 * (lo + hi),
            });
        } else if last >= lam - tol {
            inconclusive.push(m);
        }
    }
    Ok(CrossingCount {
        count: crossings.len(),
        crossings,
        inconclusive,
    })
}

/// Robin–DN duality at one negative DN eigenvalue `μ`: the reduced pencil at
/// `σ = −μ` should have `λ*` with the same multiplicity.
#[derive(Debug, Clone, Serialize)]
pub struct DualityCheck {
    pub dtn_eigenvalue: f64,
    pub sigma: f64,
    pub dtn_multiplicity: usize,
    pub pencil_multiplicity: usize,
    /// Distance from `λ*` of the nearest reduced eigenvalue, relative.
    pub gap: f64,
    /// Distance to the nearest located crossing.
    pub crossing_offset: Option<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowReport {
    pub lambda_star: f64,
    pub sigma_max: f64,
    pub n_branches: usize,
    pub below_at_zero: usize,
    pub at_lambda_at_zero: usize,
    pub ending_at_lambda: usize,
    pub crossings: CrossingCount,
    pub monotonicity_violation: f64,
    pub duality: Vec<DualityCheck>,
    /// Crossing count equals the DN Morse index (when a DN operator was given).
    pub morse_check: Option<bool>,
    pub ambiguous: Vec<f64>,
}

/// Full flow computation: branch tracing, crossings and, given the DN
/// operator, the duality checks.
pub fn spectral_flow(
    space: &GluedSpace,
    phi: Vec<f64>,
    lambda_star: f64,
    dtn: Option<&DtnOperator>,
    opts: &FlowOptions,
) -> Result<(FlowReport, FlowBranchSet)> {
    let family = ReducedFamily::new(space, phi, lambda_star)?;
    let tol = family.band(opts.band);
    let scale = dtn
        .map(|d| d.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .filter(|&s| s > 0.0);
    let sigma_max = opts.sigma_max.unwrap_or_else(|| scale.map_or(100.0, |s| 10.0 * s));
    if !(sigma_max > 0.0) {
        return Err(Error::InvalidInput(format!("σ_max = {sigma_max} must be positive")));
    }

    // branches starting at or below λ*, plus a few above
    let start = family.lowest_through(Sigma::Finite(0.0), lambda_star + tol)?;
    let upto = start.iter().filter(|&&v| v <= lambda_star + tol).count();
    let count = (upto + opts.extra_branches).min(start.len());

    let grid = default_sigma_grid(sigma_max, opts.grid);
    let set = trace_branches(&family, &grid, count, opts.band, opts.max_refinements)?;
    let crossings = crossing_count(&family, &set, opts.band, opts.sigma_tol)?;
    let below_at_zero = set.branches.iter().filter(|b| b[0] < lambda_star - tol).count();
    let at_lambda_at_zero = set.branches.iter().filter(|b| (b[0] - lambda_star).abs() <= tol).count();
    let ending_at_lambda = set.at_infinity.iter().filter(|&&v| (v - lambda_star).abs() <= tol).count();

    let mut duality = Vec::new();
    let mut morse_check = None;
    if let Some(d) = dtn {
        let negatives: Vec<f64> = d.eigenvalues.iter().copied().filter(|&v| v < -d.tol_kernel).collect();
        for cluster in group(&negatives, d.tol_kernel) {
            let mu = cluster.iter().sum::<f64>() / cluster.len() as f64;
            let sigma = -mu;
            // a shift at λ* itself would be singular along φ_*, so take the
            // lowest values through λ*
            let near = family.lowest_through(Sigma::Finite(sigma), lambda_star + 1e-2 * (1.0 + lambda_star.abs()))?;
            // the DN matrix and the Robin pencil discretize the same
            // operator pair only up to the flux recovery, so compare loosely
            let rel = |v: f64| (v - lambda_star).abs() / (1.0 + lambda_star.abs());
            let gap = near.iter().map(|&v| rel(v)).fold(f64::INFINITY, f64::min);
            let window = (1e3 * opts.band).max(10.0 * gap);
            let pencil_multiplicity = near.iter().filter(|&&v| rel(v) <= window.max(1e-8)).count();
            let crossing_offset = crossings
                .crossings
                .iter()
                .map(|c| (c.sigma - sigma).abs())
                .min_by(f64::total_cmp);
            let holds = gap <= 1e-6 && pencil_multiplicity == cluster.len();
            duality.push(DualityCheck {
                dtn_eigenvalue: mu,
                sigma,
                dtn_multiplicity: cluster.len(),
                pencil_multiplicity,
                gap,
                crossing_offset,
                holds,
            });
        }
        morse_check = Some(crossings.count == negatives.len() && crossings.inconclusive.is_empty());
    }

    let report = FlowReport {
        lambda_star,
        sigma_max,
        n_branches: set.n_branches(),
        below_at_zero,
        at_lambda_at_zero,
        ending_at_lambda,
        monotonicity_violation: set.monotonicity_violation(),
        crossings,
        duality,
        morse_check,
        ambiguous: set.ambiguous.clone(),
    };
    Ok((report, set))
}

/// Groups sorted values into clusters closer than `tol`.
fn group(values: &[f64], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some(c) if (v - c.last().unwrap()).abs() <= tol => c.push(v),
            _ => out.push(vec![v]),
        }
    }
    out
}

/// CSV text `sigma,g1,g2,...` with one row per grid point and a final
/// `inf` row.
pub fn branches_csv(set: &FlowBranchSet) -> String {
    let mut out = String::from("sigma");
    for m in 0..set.n_branches() {
        out.push_str(&format!(",g{}", m + 1));
    }
    out.push('\n');
    for (j, s) in set.sigma_grid.iter().enumerate() {
        out.push_str(&format!("{s:.12e}"));
        for b in &set.branches {
            out.push_str(&format!(",{:.12e}", b[j]));
        }
        out.push('\n');
    }
    out.push_str("inf");
    for v in &set.at_infinity {
        out.push_str(&format!(",{v:.12e}"));
    }
    out.push('\n');
    out
}
