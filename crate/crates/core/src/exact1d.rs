//! Closed-form partitions of an interval or the circle `[0, 2π)`.
//!
//! Everything here is exact up to rounding: ground states are
//! `sin(√λ (θ − a))` on each subinterval, boundary value problems are solved
//! with `cos`/`sin` combinations and `L²(Γ)` is the dot product on the
//! division points.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dtn::{index_and_kernel, CanonicalSystem, DtnOperator};
use crate::error::{Error, Result};
use crate::linalg::dense::null_space;
use crate::partition::{
    maximal_cut_weights, BoundarySegment, Partition, SegmentGeometry, Subdomain, WeightAssignment,
};

/// Relative tolerance for "equal" closed-form quantities.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OneDTopology {
    Interval { length: f64 },
    Circle,
}

/// Which end of a subinterval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Left,
    Right,
}

/// A partition of an interval or circle by division points, with weights.
///
/// Subinterval `i` is `(θ_i, θ_{i+1})`. On the circle `θ_k = θ_0 + 2π` and
/// every division point lies on `Γ`; on `(0, L)` the points `0` and `L` are
/// outer Dirichlet ends.
#[derive(Debug, Clone)]
pub struct OneDPartition {
    pub topology: OneDTopology,
    /// All division points `θ_0 < … < θ_k` (interval) or `θ_0 < … < θ_{k−1}`
    /// (circle, in `[0, 2π)`).
    pub points: Vec<f64>,
    pub partition: Partition,
    pub weights: WeightAssignment,
}

impl OneDPartition {
    /// Circle divided at `points` (strictly increasing, in `[0, 2π)`).
    pub fn circle(points: Vec<f64>) -> Result<Self> {
        let k = points.len();
        if k < 2 {
            return Err(Error::InvalidPartition("a circle partition needs at least 2 points".into()));
        }
        check_increasing(&points)?;
        if points[0] < 0.0 || points[k - 1] >= 2.0 * PI {
            return Err(Error::InvalidPartition("circle points must lie in [0, 2π)".into()));
        }
        // segment a sits at θ_a, between subintervals a−1 and a
        let segments = (0..k)
            .map(|a| BoundarySegment {
                id: a,
                left: (a + k - 1) % k,
                right: a,
                geometry: SegmentGeometry::Point(points[a]),
            })
            .collect();
        Self::assemble(OneDTopology::Circle, points, k, segments)
    }

    /// The circle divided at `θ_i = 2πi/k`.
    pub fn circle_equipartition(k: usize) -> Result<Self> {
        Self::circle((0..k).map(|i| 2.0 * PI * i as f64 / k as f64).collect())
    }

    /// `(0, length)` divided at the interior points `interior`.
    pub fn interval(length: f64, interior: Vec<f64>) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::InvalidPartition(format!("interval length {length} must be positive")));
        }
        let mut points = vec![0.0];
        points.extend(interior);
        points.push(length);
        check_increasing(&points)?;
        let k = points.len() - 1;
        let segments = (1..k)
            .map(|a| BoundarySegment {
                id: a - 1,
                left: a - 1,
                right: a,
                geometry: SegmentGeometry::Point(points[a]),
            })
            .collect();
        Self::assemble(OneDTopology::Interval { length }, points, k, segments)
    }

    pub fn interval_equipartition(k: usize, length: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPartition("k must be positive".into()));
        }
        Self::interval(length, (1..k).map(|i| length * i as f64 / k as f64).collect())
    }

    fn assemble(topology: OneDTopology, points: Vec<f64>, k: usize, segments: Vec<BoundarySegment>) -> Result<Self> {
        let subdomains = (0..k).map(|id| Subdomain { id, cells: Vec::new() }).collect();
        let partition = Partition::new(1, subdomains, segments)?;
        let weights = maximal_cut_weights(&partition, &vec![1; partition.n_segments()]);
        Ok(OneDPartition {
            topology,
            points,
            partition,
            weights,
        })
    }

    /// Replaces the weights; they must be valid.
    pub fn with_weights(mut self, weights: WeightAssignment) -> Result<Self> {
        if weights.signs.len() != self.partition.n_segments() || !weights.is_valid(&self.partition) {
            return Err(Error::InvalidWeights("weights are not valid for this partition".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    /// Sets weights from per-subinterval end signs `[χ_i(left end), χ_i(right end)]`.
    pub fn with_end_signs(self, signs: &[[i8; 2]]) -> Result<Self> {
        if signs.len() != self.k() {
            return Err(Error::InvalidWeights(format!("expected {} sign pairs", self.k())));
        }
        let mut w = WeightAssignment::constant(&self.partition, 1);
        for i in 0..self.k() {
            for (e, end) in [End::Left, End::Right].into_iter().enumerate() {
                if let Some((a, side)) = self.segment_at(i, end) {
                    w.signs[a][side] = signs[i][e];
                }
            }
        }
        self.with_weights(w)
    }

    /// The circle weights `χ_i(θ_i) = cos(kθ_i/2)`, `χ_i(θ_{i+1}) = cos(kθ_{i+1}/2)`.
    pub fn cosine_weights(self) -> Result<Self> {
        let k = self.k();
        let signs: Vec<[i8; 2]> = (0..k)
            .map(|i| {
                let s = |j: usize| if j.is_multiple_of(2) { 1 } else { -1 };
                [s(i), s(i + 1)]
            })
            .collect();
        self.with_end_signs(&signs)
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    /// Number of points on `Γ`.
    pub fn n_gamma(&self) -> usize {
        self.partition.n_segments()
    }

    pub fn is_circle(&self) -> bool {
        self.topology == OneDTopology::Circle
    }

    /// Endpoints of subinterval `i`.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let k = self.k();
        match self.topology {
            OneDTopology::Circle => {
                let b = if i + 1 == k { self.points[0] + 2.0 * PI } else { self.points[i + 1] };
                (self.points[i], b)
            }
            OneDTopology::Interval { .. } => (self.points[i], self.points[i + 1]),
        }
    }

    pub fn lengths(&self) -> Vec<f64> {
        (0..self.k()).map(|i| {
            let (a, b) = self.bounds(i);
            b - a
        })
        .collect()
    }

    /// Segment (point of `Γ`) at one end of subinterval `i` and the side of
    /// that segment `i` occupies; `None` at an outer end.
    pub fn segment_at(&self, i: usize, end: End) -> Option<(usize, usize)> {
        let k = self.k();
        let a = match (self.topology, end) {
            (OneDTopology::Circle, End::Left) => i,
            (OneDTopology::Circle, End::Right) => (i + 1) % k,
            (OneDTopology::Interval { .. }, End::Left) => i.checked_sub(1)?,
            (OneDTopology::Interval { .. }, End::Right) => {
                if i + 1 == k {
                    return None;
                }
                i
            }
        };
        let seg = &self.partition.segments[a];
        // on a 2-circle both points join the same pair; the side follows the id
        let side = if seg.left == i { 0 } else { 1 };
        Some((a, side))
    }

    pub fn sign(&self, i: usize, end: End) -> Option<i8> {
        self.segment_at(i, end).map(|(a, side)| self.weights.signs[a][side])
    }

    /// Dirichlet ground energies `(π/L_i)²`.
    pub fn ground_energies(&self) -> Vec<f64> {
        self.lengths().iter().map(|l| (PI / l).powi(2)).collect()
    }

    /// Common ground energy when all subintervals have equal length.
    pub fn common_energy(&self) -> Option<f64> {
        let e = self.ground_energies();
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.iter().copied().fold(0.0f64, f64::max);
        ((hi - lo) <= EXACT_TOL * hi).then_some(e.iter().sum::<f64>() / e.len() as f64)
    }
}

fn check_increasing(points: &[f64]) -> Result<()> {
    if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidPartition("division points must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// One eigenvalue `(j/2)²` of the anti-periodic operator on `[0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntiPeriodicMode {
    pub j: usize,
    pub value: f64,
    pub multiplicity: usize,
}

impl AntiPeriodicMode {
    /// The two eigenfunctions `sin(jθ/2)`, `cos(jθ/2)` at `θ`.
    pub fn eval(&self, theta: f64) -> [f64; 2] {
        let x = self.j as f64 * theta / 2.0;
        [x.sin(), x.cos()]
    }

    pub fn derivative(&self, theta: f64) -> [f64; 2] {
        let s = self.j as f64 / 2.0;
        let x = s * theta;
        [s * x.cos(), -s * x.sin()]
    }
}

/// The first `n` distinct eigenvalues of `−u''` with `u(0) = −u(2π)`,
/// `u'(0) = −u'(2π)`.
pub fn anti_periodic_spectrum(n: usize) -> Vec<AntiPeriodicMode> {
    (0..n)
        .map(|m| {
            let j = 2 * m + 1;
            AntiPeriodicMode {
                j,
                value: (j as f64 / 2.0).powi(2),
                multiplicity: 2,
            }
        })
        .collect()
}

/// Closed-form Dirichlet-to-Neumann data for a 1D partition.
#[derive(Debug, Clone)]
pub struct ExactDtn {
    pub lambda_star: f64,
    /// Rows: subintervals; columns: points of `Γ`.
    pub constraints: DMatrix<f64>,
    /// Orthonormal basis of `S` (columns).
    pub basis: DMatrix<f64>,
    pub operator: DtnOperator,
    pub canonical: CanonicalSystem,
}

/// Solution of `−u'' = λu` on `(0, L)` with `u(0) = α`, `u(L) = β`,
/// orthogonal to `sin(√λ θ)` in the resonant case. Returns the outward
/// normal derivatives at both ends.
fn interval_bvp(length: f64, lambda: f64, alpha: f64, beta: f64) -> Result<[f64; 2]> {
    let s = lambda.sqrt();
    let (sn, cs) = (s * length).sin_cos();
    let c = if sn.abs() <= EXACT_TOL {
        let defect = (beta - alpha * cs).abs();
        if defect > 1e-10 * (1.0 + alpha.abs() + beta.abs()) {
            return Err(Error::Incompatible { subdomain: 0, defect });
        }
        0.0
    } else {
        (beta - alpha * cs) / sn
    };
    // u = α cos(sθ) + c sin(sθ)
    Ok([-c * s, -alpha * s * sn + c * s * cs])
}

/// The DN operator of a 1D partition at its common ground energy, built from
/// closed-form solutions.
pub fn exact_dtn_1d(p: &OneDPartition, lambda_star: f64) -> Result<ExactDtn> {
    let energy = p
        .common_energy()
        .ok_or_else(|| Error::NotChiNodal("subintervals have different ground energies".into()))?;
    if (lambda_star - energy).abs() > EXACT_TOL * energy {
        return Err(Error::InvalidInput(format!(
            "λ* = {lambda_star} is not the common ground energy {energy}"
        )));
    }
    let k = p.k();
    let n = p.n_gamma();
    let s = lambda_star.sqrt();
    // |∂_ν φ_i| = √λ at both ends of sin(√λ(θ − a)), with outward sign −
    let mut constraints = DMatrix::zeros(k, n);
    for i in 0..k {
        for end in [End::Left, End::Right] {
            if let Some((a, side)) = p.segment_at(i, end) {
                constraints[(i, a)] += p.weights.signs[a][side] as f64 * -s;
            }
        }
    }
    let (basis, rank) = null_space(&constraints, EXACT_TOL);
    if rank != k - 1 {
        return Err(Error::ConstraintRank { rank, expected: k - 1 });
    }

    let lengths = p.lengths();
    let trace = |g: &[f64]| -> Result<Vec<f64>> {
        let mut t = vec![0.0; n];
        for i in 0..k {
            let value = |end| {
                p.segment_at(i, end)
                    .map_or(0.0, |(a, side)| p.weights.signs[a][side] as f64 * g[a])
            };
            let flux = interval_bvp(lengths[i], lambda_star, value(End::Left), value(End::Right))
                .map_err(|e| match e {
                    Error::Incompatible { defect, .. } => Error::Incompatible { subdomain: i, defect },
                    other => other,
                })?;
            for (e, end) in [End::Left, End::Right].into_iter().enumerate() {
                if let Some((a, side)) = p.segment_at(i, end) {
                    t[a] += p.weights.signs[a][side] as f64 * flux[e];
                }
            }
        }
        Ok(t)
    };
    let dim = basis.ncols();
    let mut matrix = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        let q: Vec<f64> = basis.column(c).iter().copied().collect();
        let t = DVector::from_vec(trace(&q)?);
        for r in 0..dim {
            matrix[(r, c)] = basis.column(r).dot(&t);
        }
    }
    let operator = DtnOperator::from_matrix(matrix, lambda_star, EXACT_TOL);

    let mut alpha = DMatrix::zeros(k, k);
    for a in 0..n {
        let seg = &p.partition.segments[a];
        alpha[(seg.left, seg.right)] += s * s;
        alpha[(seg.right, seg.left)] += s * s;
    }
    // with the orthogonal particular solutions every flux vanishes, so d = 0
    let canonical = CanonicalSystem::from_alpha(alpha, DVector::zeros(k));
    Ok(ExactDtn {
        lambda_star,
        constraints,
        basis,
        operator,
        canonical,
    })
}

/// Verification record for an equipartition of the circle.
#[derive(Debug, Clone, Serialize)]
pub struct CircleReport {
    pub k: usize,
    pub lambda_star: f64,
    pub multiplicity: usize,
    pub label: usize,
    pub defect: i64,
    pub dim_s: usize,
    pub dtn: Vec<Vec<f64>>,
    pub morse: usize,
    pub kernel_dim: usize,
    /// `δ = Mor DN`.
    pub defect_identity: bool,
    /// `multiplicity = dim ker DN + 1`.
    pub multiplicity_identity: bool,
    /// `‖A·(1,…,1)‖` for the canonical system.
    pub canonical_constant_residual: f64,
    pub canonical_second_eigenvalue: f64,
}

/// Full closed-form record for the `k`-equipartition of the circle, `k` odd.
pub fn circle_report(k: usize) -> Result<CircleReport> {
    if k < 3 || k.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "circle_report needs odd k ≥ 3 (got {k}); even k is bipartite, see even_circle_report"
        )));
    }
    let p = OneDPartition::circle_equipartition(k)?.cosine_weights()?;
    let lambda_star = (k as f64 / 2.0).powi(2);
    let (label, multiplicity) = label_in(
        anti_periodic_spectrum(k).iter().map(|m| (m.value, m.multiplicity)),
        lambda_star,
    );
    finish_circle(k, &p, lambda_star, label, multiplicity)
}

/// The bipartite case: even `k` with `χ ≡ 1`, where the weighted operator is
/// the periodic Laplacian with eigenvalues `m²`.
pub fn even_circle_report(k: usize) -> Result<CircleReport> {
    if k < 2 || k % 2 == 1 {
        return Err(Error::InvalidInput(format!("even_circle_report needs even k ≥ 2 (got {k})")));
    }
    let p = OneDPartition::circle_equipartition(k)?;
    let signs: Vec<[i8; 2]> = (0..k).map(|i| if i % 2 == 0 { [1, 1] } else { [-1, -1] }).collect();
    let p = p.with_end_signs(&signs)?;
    let lambda_star = (k as f64 / 2.0).powi(2);
    let periodic = (0..=k / 2).map(|m| ((m * m) as f64, if m == 0 { 1 } else { 2 }));
    let (label, multiplicity) = label_in(periodic, lambda_star);
    finish_circle(k, &p, lambda_star, label, multiplicity)
}

fn label_in(spectrum: impl Iterator<Item = (f64, usize)>, lambda_star: f64) -> (usize, usize) {
    let mut below = 0;
    let mut mult = 0;
    for (v, m) in spectrum {
        if (v - lambda_star).abs() <= EXACT_TOL * lambda_star {
            mult += m;
        } else if v < lambda_star {
            below += m;
        }
    }
    (below + 1, mult)
}

fn finish_circle(k: usize, p: &OneDPartition, lambda_star: f64, label: usize, multiplicity: usize) -> Result<CircleReport> {
    let exact = exact_dtn_1d(p, lambda_star)?;
    let ik = index_and_kernel(&exact.operator);
    let defect = label as i64 - k as i64;
    let dtn = (0..exact.operator.dim())
        .map(|r| exact.operator.matrix.row(r).iter().copied().collect())
        .collect();
    let eig = exact.canonical.eigenvalues();
    Ok(CircleReport {
        k,
        lambda_star,
        multiplicity,
        label,
        defect,
        dim_s: exact.basis.ncols(),
        dtn,
        morse: ik.morse,
        kernel_dim: ik.kernel_dim,
        defect_identity: defect == ik.morse as i64,
        multiplicity_identity: multiplicity == ik.kernel_dim + 1,
        canonical_constant_residual: exact.canonical.constant_residual(),
        canonical_second_eigenvalue: eig.get(1).copied().unwrap_or(0.0),
    })
}

/// Verification record for a partition of an interval.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub k: usize,
    pub length: f64,
    pub points: Vec<f64>,
    pub is_chi_nodal: bool,
    pub energies: Vec<f64>,
    pub lambda_star: Option<f64>,
    pub label: Option<usize>,
    pub defect: Option<i64>,
    pub simple: Option<bool>,
    pub dim_s: usize,
    pub morse: usize,
    pub kernel_dim: usize,
    pub reasons: Vec<String>,
}

/// Record for the `k`-equipartition of `(0, length)`.
pub fn interval_report(k: usize, length: f64) -> Result<IntervalReport> {
    interval_report_for(&OneDPartition::interval_equipartition(k, length)?)
}

/// Record for an arbitrary interval partition; unequal subintervals give a
/// record with `is_chi_nodal = false`.
pub fn interval_report_for(p: &OneDPartition) -> Result<IntervalReport> {
    let OneDTopology::Interval { length } = p.topology else {
        return Err(Error::InvalidInput("not an interval partition".into()));
    };
    let k = p.k();
    let energies = p.ground_energies();
    let mut report = IntervalReport {
        k,
        length,
        points: p.points.clone(),
        is_chi_nodal: false,
        energies,
        lambda_star: None,
        label: None,
        defect: None,
        simple: None,
        dim_s: 0,
        morse: 0,
        kernel_dim: 0,
        reasons: Vec::new(),
    };
    let Some(lambda_star) = p.common_energy() else {
        report
            .reasons
            .push("subintervals have different lengths, so the ground energies differ".into());
        return Ok(report);
    };
    let exact = exact_dtn_1d(p, lambda_star)?;
    let ik = index_and_kernel(&exact.operator);
    // Dirichlet spectrum (mπ/L)², all simple
    let dirichlet = (1..=k + 1).map(|m| ((m as f64 * PI / length).powi(2), 1));
    let (label, multiplicity) = label_in(dirichlet, lambda_star);
    report.is_chi_nodal = true;
    report.lambda_star = Some(lambda_star);
    report.label = Some(label);
    report.defect = Some(label as i64 - k as i64);
    report.simple = Some(multiplicity == 1);
    report.dim_s = exact.basis.ncols();
    report.morse = ik.morse;
    report.kernel_dim = ik.kernel_dim;
    Ok(report)
}
