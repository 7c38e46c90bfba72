//! The two-sided weighted Dirichlet-to-Neumann operator on a χ-nodal
//! partition.
//!
//! Boundary data `g` lives on the interface dofs of a [`GluedSpace`]. It is
//! the common value `χ_i u_i` on Γ, so for domain-equivalent weights the
//! same vector describes the same data. Subdomain `i` sees `u_i = χ_i g` on
//! its interface nodes and zero on the outer boundary.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{facet_mass, SubdomainProblem};
use crate::linalg::dense::{min_norm_solve, null_space, sorted_symmetric_eigen};
use crate::linalg::sparse::{dot, norm};
use crate::linalg::{CsrMatrix, LdlFactor};
use crate::mesh::Mesh;
use crate::partition::{Partition, WeightAssignment};
use crate::spcc::{eigenfunction_orientation, NodalSetup};
use crate::weighted::{DofKind, GluedSpace};

/// Slope `C` of the kernel threshold `max(1e-8, C·h)`.
pub const KERNEL_SLOPE: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct DtnOptions {
    /// Relative singular value cutoff when ranking the constraints.
    pub rank_tol: f64,
    pub kernel_slope: f64,
    /// Largest relative violation of a subdomain's solvability condition.
    pub compat_tol: f64,
    /// Solve the boundary value problems at this value instead of each
    /// subdomain's own ground energy.
    pub lambda: Option<f64>,
}

impl Default for DtnOptions {
    fn default() -> Self {
        DtnOptions {
            rank_tol: 1e-5,
            kernel_slope: KERNEL_SLOPE,
            compat_tol: 1e-8,
            lambda: None,
        }
    }
}

pub fn kernel_tolerance(h: f64, slope: f64) -> f64 {
    (slope * h).max(1e-8)
}

/// Interface dofs of a glued space with the Γ mass matrix in `g`
/// coordinates.
#[derive(Debug, Clone)]
pub struct TraceSpace {
    /// Glued dof behind each trace index.
    pub dofs: Vec<usize>,
    pub nodes: Vec<usize>,
    pub mass: DMatrix<f64>,
    /// Per subdomain: (position in its boundary list, trace index, sign
    /// with `u_i = sign · g`).
    pub sides: Vec<Vec<(usize, usize, f64)>>,
}

impl TraceSpace {
    pub fn new(mesh: &Mesh, p: &Partition, space: &GluedSpace, problems: &[SubdomainProblem]) -> Self {
        let dofs = space.interface_dofs();
        let index: HashMap<usize, usize> = dofs.iter().enumerate().map(|(t, &d)| (d, t)).collect();
        let nodes = dofs.iter().map(|&d| space.dof_nodes[d]).collect();
        let n = dofs.len();
        let mut mass = DMatrix::zeros(n, n);
        for &(f, s) in &space.interface_facets {
            let left = p.segments[s].left;
            let v = mesh.facet(f);
            let fm = facet_mass(mesh, f);
            // g on this segment is χ_left u_left; at junctions that can be
            // the negative of the dof's g
            let t: Vec<Option<(usize, f64)>> = v
                .iter()
                .map(|&node| {
                    let c = space.copy(left, node)?;
                    index.get(&c.dof).map(|&t| (t, c.trace_sign))
                })
                .collect();
            for a in 0..v.len() {
                for b in 0..v.len() {
                    if let (Some((ta, sa)), Some((tb, sb))) = (t[a], t[b]) {
                        mass[(ta, tb)] += sa * sb * fm[a][b];
                    }
                }
            }
        }
        let sides = problems
            .iter()
            .enumerate()
            .map(|(i, pr)| {
                pr.boundary
                    .iter()
                    .enumerate()
                    .filter_map(|(pos, &l)| {
                        let c = space.copy(i, pr.nodes[l])?;
                        if space.dof_kind[c.dof] != DofKind::Interface {
                            return None;
                        }
                        Some((pos, index[&c.dof], c.trace_sign))
                    })
                    .collect()
            })
            .collect();
        TraceSpace { dofs, nodes, mass, sides }
    }

    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    /// Functional on Γ collecting `Σ_i χ_i ∂_ν u_i` from per-subdomain
    /// boundary fluxes.
    pub fn pair_fluxes(&self, fluxes: &[Vec<f64>]) -> Vec<f64> {
        let mut t = vec![0.0; self.dim()];
        for (side, flux) in self.sides.iter().zip(fluxes) {
            for &(pos, ti, sign) in side {
                t[ti] += sign * flux[pos];
            }
        }
        t
    }
}

/// The orthogonal complement of the ground-state normal derivatives.
#[derive(Debug, Clone)]
pub struct SubspaceS {
    /// Row `i`: pairing of `χ_i ∂_ν φ_{*,i}` with the Γ basis functions.
    pub constraints: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Columns span the subspace and are orthonormal in the Γ mass.
    pub basis: DMatrix<f64>,
    mass_chol: Option<DMatrix<f64>>,
}

impl SubspaceS {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn codimension(&self) -> usize {
        self.basis.nrows() - self.basis.ncols()
    }

    /// `B⁻¹ v` for the Γ mass `B`.
    pub fn mass_solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.mass_chol {
            None => v.clone(),
            Some(l) => {
                let y = l.solve_lower_triangular(v).expect("nonsingular factor");
                l.transpose().solve_upper_triangular(&y).expect("nonsingular factor")
            }
        }
    }
}

/// Builds the discrete subspace from the ground-state fluxes.
pub fn build_subspace_s(trace: &TraceSpace, setup: &NodalSetup, orientation: &[i8], rank_tol: f64) -> Result<SubspaceS> {
    let k = setup.problems.len();
    let n = trace.dim();
    let mut constraints = DMatrix::zeros(k, n);
    for i in 0..k {
        let amp = orientation[i] as f64 * setup.scales[i];
        for &(pos, t, sign) in &trace.sides[i] {
            constraints[(i, t)] += sign * (amp * setup.ground[i].flux[pos]);
        }
    }
    if n == 0 {
        return Ok(SubspaceS {
            constraints,
            singular_values: Vec::new(),
            rank: 0,
            basis: DMatrix::zeros(0, 0),
            mass_chol: None,
        });
    }
    // sign-normalized rows, so flipping a subdomain's weights changes nothing
    let mut canonical = constraints.clone();
    for i in 0..k {
        let row = canonical.row(i);
        let peak = row.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if peak < 0.0 {
            canonical.row_mut(i).neg_mut();
        }
    }
    let l = trace
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("interface mass matrix is not positive definite".into()))?
        .l();
    // C L⁻ᵀ
    let scaled = l
        .solve_lower_triangular(&canonical.transpose())
        .ok_or(Error::SingularPivot { row: 0 })?
        .transpose();
    let mut singular_values: Vec<f64> = scaled.clone().svd(false, false).singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let (y, rank) = null_space(&scaled, rank_tol);
    let expected = k - 1;
    if rank != expected {
        return Err(Error::ConstraintRank { rank, expected });
    }
    let basis = l.transpose().solve_upper_triangular(&y).ok_or(Error::SingularPivot { row: 0 })?;
    Ok(SubspaceS {
        constraints,
        singular_values,
        rank,
        basis,
        mass_chol: Some(l),
    })
}

/// Solver for `(K − λM) u = 0` inside one subdomain with prescribed
/// boundary values and `u` M-orthogonal to the subdomain's ground state.
#[derive(Debug, Clone)]
pub struct BvpSolver {
    pub lambda: f64,
    a_full: CsrMatrix,
    m_phi: Vec<f64>,
    interior: Vec<usize>,
    pin: usize,
    rest: Vec<usize>,
    factor: Option<LdlFactor>,
    a_rest_pin: Vec<f64>,
    y_pin: Vec<f64>,
    y_mphi: Vec<f64>,
    a_pin_pin: f64,
}

impl BvpSolver {
    /// `phi` is the ground state over all region nodes.
    pub fn new(problem: &SubdomainProblem, phi: &[f64], lambda: f64) -> Result<Self> {
        let a_full = problem.k_full.add_scaled(&problem.m_full, -lambda);
        let m_phi = problem.m_full.mul_vec(phi);
        let interior = problem.interior.clone();
        let pin_pos = (0..interior.len())
            .max_by(|&a, &b| phi[interior[a]].abs().total_cmp(&phi[interior[b]].abs()))
            .ok_or(Error::EmptyRegion)?;
        let pin = interior[pin_pos];
        let rest: Vec<usize> = interior.iter().copied().filter(|&l| l != pin).collect();
        let a_rest_pin: Vec<f64> = rest.iter().map(|&r| a_full.get(r, pin)).collect();
        let a_pin_pin = a_full.get(pin, pin);
        let (factor, y_pin, y_mphi) = if rest.is_empty() {
            (None, Vec::new(), Vec::new())
        } else {
            let f = LdlFactor::new(&a_full.submatrix(&rest, &rest))?;
            let y_pin = f.solve(&a_rest_pin);
            let mr: Vec<f64> = rest.iter().map(|&r| m_phi[r]).collect();
            let y_mphi = f.solve(&mr);
            (Some(f), y_pin, y_mphi)
        };
        Ok(BvpSolver {
            lambda,
            a_full,
            m_phi,
            interior,
            pin,
            rest,
            factor,
            a_rest_pin,
            y_pin,
            y_mphi,
            a_pin_pin,
        })
    }

    /// Completes `u` (boundary values set, interior ignored) to the
    /// constrained solution. Returns the Lagrange multiplier, which vanishes
    /// for compatible data.
    pub fn solve(&self, u: &mut [f64]) -> f64 {
        for &l in &self.interior {
            u[l] = 0.0;
        }
        let au = self.a_full.mul_vec(u);
        let b_rest: Vec<f64> = self.rest.iter().map(|&r| -au[r]).collect();
        let b_pin = -au[self.pin];
        let beta = -dot(&self.m_phi, u);
        let mr: Vec<f64> = self.rest.iter().map(|&r| self.m_phi[r]).collect();
        let y0 = match &self.factor {
            Some(f) => f.solve(&b_rest),
            None => Vec::new(),
        };
        let mp = self.m_phi[self.pin];
        // 2×2 system for (u_pin, μ)
        let a11 = self.a_pin_pin - dot(&self.a_rest_pin, &self.y_pin);
        let a12 = mp - dot(&self.a_rest_pin, &self.y_mphi);
        let a21 = mp - dot(&mr, &self.y_pin);
        let a22 = -dot(&mr, &self.y_mphi);
        let r1 = b_pin - dot(&self.a_rest_pin, &y0);
        let r2 = beta - dot(&mr, &y0);
        let det = a11 * a22 - a12 * a21;
        let x_pin = (r1 * a22 - a12 * r2) / det;
        let mu = (a11 * r2 - a21 * r1) / det;
        u[self.pin] = x_pin;
        for (k, &r) in self.rest.iter().enumerate() {
            u[r] = y0[k] - x_pin * self.y_pin[k] - mu * self.y_mphi[k];
        }
        mu
    }

    /// Boundary rows of `(K − λM) u`.
    pub fn flux(&self, problem: &SubdomainProblem, u: &[f64]) -> Vec<f64> {
        let r = self.a_full.mul_vec(u);
        problem.boundary.iter().map(|&i| r[i]).collect()
    }

    /// `vᵀ (K − λM) u` over the region.
    pub fn energy_form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.a_full.bilinear(v, u)
    }
}

/// Everything needed to apply the DN operator for one choice of weights.
#[derive(Debug, Clone)]
pub struct DtnProblem<'a> {
    pub mesh: &'a Mesh,
    pub partition: &'a Partition,
    pub setup: &'a NodalSetup,
    pub weights: WeightAssignment,
    /// Sign of the χ-nodal eigenfunction on each subdomain.
    pub orientation: Vec<i8>,
    pub space: GluedSpace,
    pub trace: TraceSpace,
    pub subspace: SubspaceS,
    pub solvers: Vec<BvpSolver>,
    pub options: DtnOptions,
}

/// Per-subdomain solutions with their boundary fluxes.
#[derive(Debug, Clone)]
pub struct Lift {
    pub values: Vec<Vec<f64>>,
    pub fluxes: Vec<Vec<f64>>,
    pub multipliers: Vec<f64>,
}

impl<'a> DtnProblem<'a> {
    pub fn new(
        mesh: &'a Mesh,
        partition: &'a Partition,
        setup: &'a NodalSetup,
        weights: &WeightAssignment,
        options: DtnOptions,
    ) -> Result<Self> {
        let space = GluedSpace::new(mesh, partition, weights)?;
        let orientation = eigenfunction_orientation(partition, weights)?;
        let trace = TraceSpace::new(mesh, partition, &space, &setup.problems);
        let subspace = build_subspace_s(&trace, setup, &orientation, options.rank_tol)?;
        let solvers = (0..partition.k())
            .into_par_iter()
            .map(|i| {
                let phi = setup.oriented_ground_state(i, orientation[i]);
                let lambda = options.lambda.unwrap_or(setup.ground[i].energy);
                BvpSolver::new(&setup.problems[i], &phi, lambda)
            })
            .collect::<Result<_>>()?;
        Ok(DtnProblem {
            mesh,
            partition,
            setup,
            weights: weights.clone(),
            orientation,
            space,
            trace,
            subspace,
            solvers,
            options,
        })
    }

    pub fn k(&self) -> usize {
        self.partition.k()
    }

    /// Solves every subdomain problem for Γ data `g`.
    pub fn lift(&self, g: &[f64]) -> Result<Lift> {
        let gnorm = norm(g);
        let results: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..self.k())
            .map(|i| {
                let pr = &self.setup.problems[i];
                let mut u = vec![0.0; pr.n_local()];
                let mut defect = 0.0;
                for &(pos, t, sign) in &self.trace.sides[i] {
                    u[pr.boundary[pos]] = sign * g[t];
                }
                let row = self.subspace.constraints.row(i);
                for t in 0..g.len() {
                    defect += row[t] * g[t];
                }
                let scale = row.norm() * gnorm;
                if scale > 0.0 && defect.abs() > self.options.compat_tol * scale {
                    return Err(Error::Incompatible {
                        subdomain: i,
                        defect: defect.abs() / scale,
                    });
                }
                let mu = self.solvers[i].solve(&mut u);
                let flux = self.solvers[i].flux(pr, &u);
                Ok((u, flux, mu))
            })
            .collect::<Result<_>>()?;
        let mut lift = Lift {
            values: Vec::new(),
            fluxes: Vec::new(),
            multipliers: Vec::new(),
        };
        for (u, f, mu) in results {
            lift.values.push(u);
            lift.fluxes.push(f);
            lift.multipliers.push(mu);
        }
        Ok(lift)
    }

    pub fn two_sided_trace(&self, lift: &Lift) -> Vec<f64> {
        self.trace.pair_fluxes(&lift.fluxes)
    }

    pub fn mesh_size(&self) -> f64 {
        self.mesh.max_edge_length()
    }

    pub fn assemble(&self) -> Result<DtnOperator> {
        let basis = &self.subspace.basis;
        let dim = basis.ncols();
        let columns: Vec<Vec<f64>> = (0..dim).map(|p| basis.column(p).iter().copied().collect()).collect();
        let traces: Vec<Vec<f64>> = columns
            .par_iter()
            .map(|g| Ok(self.two_sided_trace(&self.lift(g)?)))
            .collect::<Result<_>>()?;
        let mut raw = DMatrix::zeros(dim, dim);
        for p in 0..dim {
            for q in 0..dim {
                raw[(q, p)] = dot(&traces[p], &columns[q]);
            }
        }
        let norm_raw = raw.norm();
        let asymmetry = if dim == 0 { 0.0 } else { (&raw - raw.transpose()).amax() / norm_raw.max(f64::MIN_POSITIVE) };
        let matrix = (&raw + raw.transpose()) * 0.5;
        let (eigenvalues, _) = sorted_symmetric_eigen(&matrix);
        let lambda_star = self.options.lambda.unwrap_or(self.setup.lambda_star);
        Ok(DtnOperator {
            matrix,
            lambda_star,
            tol_kernel: kernel_tolerance(self.mesh_size(), self.options.kernel_slope),
            asymmetry,
            eigenvalues,
        })
    }

    /// The volume form `Σ_i ∫ ∇u_i·∇v_i − λ u_i v_i` on the basis of S.
    pub fn green_matrix(&self) -> Result<DMatrix<f64>> {
        let basis = &self.subspace.basis;
        let dim = basis.ncols();
        let lifts: Vec<Lift> = (0..dim)
            .into_par_iter()
            .map(|p| self.lift(basis.column(p).as_slice()))
            .collect::<Result<_>>()?;
        let mut g = DMatrix::zeros(dim, dim);
        for p in 0..dim {
            for q in 0..dim {
                g[(q, p)] = (0..self.k())
                    .map(|i| self.solvers[i].energy_form(&lifts[p].values[i], &lifts[q].values[i]))
                    .sum();
            }
        }
        Ok(g)
    }

    /// Appendix-style canonical correction of the lift of `g`: adds
    /// multiples of the ground states so the two-sided trace lies in S.
    pub fn canonical_solution(&self, g: &[f64]) -> Result<CanonicalSolution> {
        let lift = self.lift(g)?;
        let trace = DVector::from_vec(self.two_sided_trace(&lift));
        let c_mat = &self.subspace.constraints;
        let k = self.k();
        let mut b_inv_ct = DMatrix::zeros(self.trace.dim(), k);
        for i in 0..k {
            let col = self.subspace.mass_solve(&c_mat.row(i).transpose());
            b_inv_ct.set_column(i, &col);
        }
        let a = c_mat * &b_inv_ct;
        let a = (&a + a.transpose()) * 0.5;
        let d = -(c_mat * self.subspace.mass_solve(&trace));
        let system = CanonicalSystem::from_matrix(a, d);
        let coefficients = min_norm_solve(&system.matrix, &system.d, 1e-10);
        let solve_residual = (&system.matrix * &coefficients - &system.d).norm() / system.d.norm().max(f64::MIN_POSITIVE);

        let mut corrected = lift.clone();
        for i in 0..k {
            let phi = self.setup.oriented_ground_state(i, self.orientation[i]);
            for (u, p) in corrected.values[i].iter_mut().zip(&phi) {
                *u += coefficients[i] * p;
            }
            corrected.fluxes[i] = self.solvers[i].flux(&self.setup.problems[i], &corrected.values[i]);
        }
        let new_trace = DVector::from_vec(self.two_sided_trace(&corrected));
        let violation = c_mat * self.subspace.mass_solve(&new_trace);
        let scale = c_mat.norm() * self.subspace.mass_solve(&new_trace).norm().max(f64::MIN_POSITIVE);
        let trace_residual = violation.norm() / scale;
        // projections onto S agree
        let q = &self.subspace.basis;
        let projection_gap = (q.transpose() * (&new_trace - &trace)).norm() / (q.transpose() * &trace).norm().max(1e-300);
        Ok(CanonicalSolution {
            system,
            coefficients: coefficients.iter().copied().collect(),
            solve_residual,
            trace_residual,
            projection_gap,
            lift: corrected,
        })
    }
}

impl NodalSetup {
    /// Scaled ground state of subdomain `i` with the given sign, over its
    /// region nodes.
    pub fn oriented_ground_state(&self, i: usize, sign: i8) -> Vec<f64> {
        let amp = sign as f64 * self.scales[i];
        self.ground[i].vector.iter().map(|v| amp * v).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DtnOperator {
    #[serde(serialize_with = "serialize_matrix")]
    pub matrix: DMatrix<f64>,
    pub lambda_star: f64,
    pub tol_kernel: f64,
    /// Largest `|D − Dᵀ|` entry relative to `‖D‖` before symmetrization.
    pub asymmetry: f64,
    pub eigenvalues: Vec<f64>,
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

impl DtnOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn from_matrix(matrix: DMatrix<f64>, lambda_star: f64, tol_kernel: f64) -> Self {
        let asymmetry = if matrix.nrows() == 0 { 0.0 } else { (&matrix - matrix.transpose()).amax() };
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let (eigenvalues, _) = sorted_symmetric_eigen(&sym);
        DtnOperator {
            matrix: sym,
            lambda_star,
            tol_kernel,
            asymmetry,
            eigenvalues,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexKernel {
    pub morse: usize,
    pub kernel_dim: usize,
    pub positive: usize,
}

pub fn index_and_kernel(dtn: &DtnOperator) -> IndexKernel {
    let tol = dtn.tol_kernel;
    IndexKernel {
        morse: dtn.eigenvalues.iter().filter(|&&v| v < -tol).count(),
        kernel_dim: dtn.eigenvalues.iter().filter(|&&v| v.abs() <= tol).count(),
        positive: dtn.eigenvalues.iter().filter(|&&v| v > tol).count(),
    }
}

/// DN operator of a χ-nodal partition for weights `w`.
pub fn assemble_dtn(mesh: &Mesh, p: &Partition, setup: &NodalSetup, w: &WeightAssignment, opts: DtnOptions) -> Result<DtnOperator> {
    DtnProblem::new(mesh, p, setup, w, opts)?.assemble()
}

/// The constrained subdomain solve for boundary data on one subdomain.
pub fn solve_bvp_orthogonal(solver: &BvpSolver, boundary_values: &[f64]) -> (Vec<f64>, f64) {
    let mut u = boundary_values.to_vec();
    let mu = solver.solve(&mut u);
    (u, mu)
}

/// The linear system fixing the ground-state multiples of a canonical
/// solution: `Σ_{j≠i} (c_i − c_j) α_ij = d_i`.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalSystem {
    #[serde(serialize_with = "serialize_matrix")]
    pub alpha: DMatrix<f64>,
    #[serde(skip)]
    pub d: DVector<f64>,
    #[serde(serialize_with = "serialize_matrix")]
    pub matrix: DMatrix<f64>,
}

impl CanonicalSystem {
    /// From a symmetric coupling with zero diagonal.
    pub fn from_alpha(alpha: DMatrix<f64>, d: DVector<f64>) -> Self {
        let k = alpha.nrows();
        let mut matrix = -alpha.clone();
        for i in 0..k {
            matrix[(i, i)] = (0..k).filter(|&j| j != i).map(|j| alpha[(i, j)]).sum();
        }
        CanonicalSystem { alpha, d, matrix }
    }

    pub fn from_matrix(matrix: DMatrix<f64>, d: DVector<f64>) -> Self {
        let k = matrix.nrows();
        let mut alpha = -matrix.clone();
        for i in 0..k {
            alpha[(i, i)] = 0.0;
        }
        CanonicalSystem { alpha, d, matrix }
    }

    pub fn sum_d(&self) -> f64 {
        self.d.sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_symmetric_eigen(&self.matrix).0
    }

    /// `‖A·1‖` relative to `‖A‖`.
    pub fn constant_residual(&self) -> f64 {
        let ones = DVector::from_element(self.matrix.nrows(), 1.0);
        (&self.matrix * ones).norm() / self.matrix.norm().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone)]
pub struct CanonicalSolution {
    pub system: CanonicalSystem,
    pub coefficients: Vec<f64>,
    pub solve_residual: f64,
    /// How far the corrected two-sided trace is from S (relative).
    pub trace_residual: f64,
    /// Relative change of the projected trace caused by the correction.
    pub projection_gap: f64,
    pub lift: Lift,
}
