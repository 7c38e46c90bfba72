//! P1 finite elements: assembly, Dirichlet subproblems, consistent fluxes.

use crate::error::{Error, Result};
use crate::linalg::eigen::{self, EigenOptions, EigenPair, Window};
use crate::linalg::sparse::{dot, norm};
use crate::linalg::{CsrMatrix, LdlFactor};
use crate::mesh::{Mesh, Topology, NONE};

/// Element stiffness and mass; only the leading `arity × arity` block is used.
pub fn element_matrices(mesh: &Mesh, c: usize) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    match mesh.topology() {
        Topology::Line { .. } => {
            let len = mesh.cell_measure(c);
            k[0][0] = 1.0 / len;
            k[1][1] = 1.0 / len;
            k[0][1] = -1.0 / len;
            k[1][0] = -1.0 / len;
            m[0][0] = len / 3.0;
            m[1][1] = len / 3.0;
            m[0][1] = len / 6.0;
            m[1][0] = len / 6.0;
        }
        Topology::Triangle => {
            let v = mesh.cell(c);
            let p: Vec<[f64; 2]> = v.iter().map(|&i| mesh.node(i)).collect();
            let area = mesh.cell_measure(c);
            // ∇φ_a = rot90(p_{a+2} - p_{a+1}) / (2A)
            let grads: Vec<[f64; 2]> = (0..3)
                .map(|a| {
                    let (q1, q2) = (p[(a + 1) % 3], p[(a + 2) % 3]);
                    [(q1[1] - q2[1]) / (2.0 * area), (q2[0] - q1[0]) / (2.0 * area)]
                })
                .collect();
            for a in 0..3 {
                for b in 0..3 {
                    k[a][b] = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    m[a][b] = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                }
            }
        }
    }
    (k, m)
}

/// Mass matrix of a boundary facet (an edge in 2D, a point in 1D).
pub fn facet_mass(mesh: &Mesh, f: usize) -> [[f64; 2]; 2] {
    match mesh.topology() {
        Topology::Line { .. } => [[1.0, 0.0], [0.0, 0.0]],
        Topology::Triangle => {
            let l = mesh.facet_measure(f);
            [[l / 3.0, l / 6.0], [l / 6.0, l / 3.0]]
        }
    }
}

/// Boundary mass over a set of facets given by their node pairs (use
/// `[n, n]` for 1D points), embedded in the full node numbering.
pub fn boundary_mass(mesh: &Mesh, facets: &[[usize; 2]]) -> Result<CsrMatrix> {
    let mut trips = Vec::new();
    for pair in facets {
        let f = mesh
            .find_facet(pair[0], pair[1])
            .ok_or_else(|| Error::InvalidInput(format!("segment piece {pair:?} is not a mesh facet")))?;
        push_facet_mass(mesh, f, |a| Some((mesh.facet(f)[a], 1.0)), &mut trips);
    }
    Ok(CsrMatrix::from_triplets(mesh.n_nodes(), mesh.n_nodes(), &trips))
}

/// Adds the facet mass of `f` through a local-node → (dof, sign) map.
pub(crate) fn push_facet_mass(
    mesh: &Mesh,
    f: usize,
    dof: impl Fn(usize) -> Option<(usize, f64)>,
    trips: &mut Vec<(usize, usize, f64)>,
) {
    let fm = facet_mass(mesh, f);
    let arity = mesh.facet_arity();
    for a in 0..arity {
        let Some((da, sa)) = dof(a) else { continue };
        for b in 0..arity {
            let Some((db, sb)) = dof(b) else { continue };
            trips.push((da, db, sa * sb * fm[a][b]));
        }
    }
}

/// Stiffness/mass pair together with the mesh node behind each dof.
#[derive(Debug, Clone)]
pub struct SparsePencil {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub dof_nodes: Vec<usize>,
}

impl SparsePencil {
    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn eigensolve(&self, window: Window) -> Result<Vec<EigenPair>> {
        self.eigensolve_with(window, &EigenOptions::default())
    }

    pub fn eigensolve_with(&self, window: Window, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
        eigen::eigensolve(&self.stiffness, &self.mass, window, opts)
    }

    pub fn residual(&self, value: f64, x: &[f64]) -> f64 {
        eigen::relative_residual(&self.stiffness, &self.mass, value, x)
    }
}

/// Checks that a set of cells is edge connected.
pub fn is_edge_connected(mesh: &Mesh, cells: &[usize]) -> bool {
    if cells.is_empty() {
        return false;
    }
    let mut inside = vec![false; mesh.n_cells()];
    for &c in cells {
        inside[c] = true;
    }
    let mut seen = vec![false; mesh.n_cells()];
    let mut stack = vec![cells[0]];
    seen[cells[0]] = true;
    let mut count = 0;
    while let Some(c) = stack.pop() {
        count += 1;
        for &f in mesh.cell_facets(c) {
            let (a, b) = mesh.facet_cells(f);
            for d in [Some(a), b].into_iter().flatten() {
                if inside[d] && !seen[d] {
                    seen[d] = true;
                    stack.push(d);
                }
            }
        }
    }
    count == cells.len()
}

/// Residual tolerance for subdomain ground states; the pairing identities
/// downstream are checked close to machine precision.
pub const GROUND_STATE_TOL: f64 = 1e-12;

/// A Dirichlet problem on a union of cells.
#[derive(Debug, Clone)]
pub struct SubdomainProblem {
    pub cells: Vec<usize>,
    /// Region nodes (mesh ids), sorted.
    pub nodes: Vec<usize>,
    local: Vec<usize>,
    /// Local indices of free nodes.
    pub interior: Vec<usize>,
    /// Local indices of nodes on the region boundary.
    pub boundary: Vec<usize>,
    /// Mesh facets on the region boundary.
    pub boundary_facets: Vec<usize>,
    pub k_full: CsrMatrix,
    pub m_full: CsrMatrix,
    pub pencil: SparsePencil,
}

impl SubdomainProblem {
    pub fn new(mesh: &Mesh, cells: &[usize]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptyRegion);
        }
        if !is_edge_connected(mesh, cells) {
            return Err(Error::InvalidPartition("region is not edge connected".into()));
        }
        let mut inside = vec![false; mesh.n_cells()];
        for &c in cells {
            inside[c] = true;
        }
        let mut nodes: Vec<usize> = cells.iter().flat_map(|&c| mesh.cell(c).to_vec()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut local = vec![NONE; mesh.n_nodes()];
        for (i, &n) in nodes.iter().enumerate() {
            local[n] = i;
        }
        let mut on_boundary = vec![false; nodes.len()];
        let mut boundary_facets = Vec::new();
        for f in 0..mesh.n_facets() {
            let (a, b) = mesh.facet_cells(f);
            let ina = inside[a];
            let inb = b.is_some_and(|b| inside[b]);
            if ina != inb {
                boundary_facets.push(f);
                for &v in mesh.facet(f) {
                    on_boundary[local[v]] = true;
                }
            }
        }
        let interior: Vec<usize> = (0..nodes.len()).filter(|&i| !on_boundary[i]).collect();
        let boundary: Vec<usize> = (0..nodes.len()).filter(|&i| on_boundary[i]).collect();
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        let mut sorted_cells = cells.to_vec();
        sorted_cells.sort_unstable();
        for &c in &sorted_cells {
            let (ke, me) = element_matrices(mesh, c);
            let v = mesh.cell(c);
            for a in 0..v.len() {
                for b in 0..v.len() {
                    kt.push((local[v[a]], local[v[b]], ke[a][b]));
                    mt.push((local[v[a]], local[v[b]], me[a][b]));
                }
            }
        }
        let nl = nodes.len();
        let k_full = CsrMatrix::from_triplets(nl, nl, &kt);
        let m_full = CsrMatrix::from_triplets(nl, nl, &mt);
        let pencil = SparsePencil {
            stiffness: k_full.submatrix(&interior, &interior),
            mass: m_full.submatrix(&interior, &interior),
            dof_nodes: interior.iter().map(|&i| nodes[i]).collect(),
        };
        Ok(SubdomainProblem {
            cells: sorted_cells,
            nodes,
            local,
            interior,
            boundary,
            boundary_facets,
            k_full,
            m_full,
            pencil,
        })
    }

    /// Local index of a mesh node, if it belongs to the region.
    pub fn local_index(&self, node: usize) -> Option<usize> {
        match self.local[node] {
            NONE => None,
            i => Some(i),
        }
    }

    pub fn n_local(&self) -> usize {
        self.nodes.len()
    }

    /// Extends interior values by zero to all region nodes.
    pub fn extend(&self, interior_values: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.nodes.len()];
        for (&i, &v) in self.interior.iter().zip(interior_values) {
            u[i] = v;
        }
        u
    }

    /// `(K − λM) u` over all region nodes.
    pub fn residual_full(&self, u_full: &[f64], lambda: f64) -> Vec<f64> {
        let ku = self.k_full.mul_vec(u_full);
        let mu = self.m_full.mul_vec(u_full);
        ku.iter().zip(&mu).map(|(a, b)| a - lambda * b).collect()
    }

    /// Consistent flux on the boundary nodes (ordered as `self.boundary`),
    /// with no check of the interior equations.
    pub fn consistent_flux(&self, u_full: &[f64], lambda: f64) -> Vec<f64> {
        let r = self.residual_full(u_full, lambda);
        self.boundary.iter().map(|&i| r[i]).collect()
    }

    /// Discrete variational normal derivative: the boundary part of
    /// `(K − λM) u`, after checking that the interior part vanishes.
    pub fn normal_derivative(&self, u_full: &[f64], lambda: f64, tol: f64) -> Result<Vec<f64>> {
        let r = self.residual_full(u_full, lambda);
        let interior_r: Vec<f64> = self.interior.iter().map(|&i| r[i]).collect();
        let scale = norm(&self.k_full.mul_vec(u_full)) + lambda.abs() * norm(&self.m_full.mul_vec(u_full));
        let res = norm(&interior_r);
        if res > tol * scale.max(f64::MIN_POSITIVE) && res > 0.0 {
            return Err(Error::InteriorResidual {
                residual: if scale > 0.0 { res / scale } else { res },
                tol,
            });
        }
        Ok(self.boundary.iter().map(|&i| r[i]).collect())
    }

    /// Mass matrix of the region boundary, indexed like `self.boundary`.
    pub fn boundary_mass(&self, mesh: &Mesh) -> CsrMatrix {
        let mut pos = vec![NONE; self.nodes.len()];
        for (k, &i) in self.boundary.iter().enumerate() {
            pos[i] = k;
        }
        let mut trips = Vec::new();
        for &f in &self.boundary_facets {
            let v = mesh.facet(f);
            push_facet_mass(mesh, f, |a| Some((pos[self.local[v[a]]], 1.0)), &mut trips);
        }
        let nb = self.boundary.len();
        CsrMatrix::from_triplets(nb, nb, &trips)
    }

    /// Pointwise normal derivative recovered from a consistent flux with the
    /// lumped boundary mass. Lumping keeps the sign of the flux, which the
    /// consistent mass does not near corners.
    pub fn recover_pointwise(&self, mesh: &Mesh, flux: &[f64]) -> Vec<f64> {
        let lumped = self.boundary_mass(mesh).mul_vec(&vec![1.0; flux.len()]);
        flux.iter().zip(&lumped).map(|(r, w)| r / w).collect()
    }

    /// Pointwise normal derivative from a solve with the consistent boundary
    /// mass.
    pub fn recover_pointwise_consistent(&self, mesh: &Mesh, flux: &[f64]) -> Result<Vec<f64>> {
        if flux.is_empty() {
            return Ok(Vec::new());
        }
        Ok(LdlFactor::new(&self.boundary_mass(mesh))?.solve(flux))
    }

    /// Lowest Dirichlet eigenpair, M-normalized with positive mean, extended
    /// to all region nodes.
    pub fn ground_state(&self) -> Result<GroundState> {
        if self.pencil.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let pair = self
            .pencil
            .eigensolve_with(Window::Lowest(1), &EigenOptions { tol: GROUND_STATE_TOL, ..Default::default() })?
            .into_iter()
            .next()
            .ok_or(Error::EmptyRegion)?;
        let mut full = self.extend(&pair.vector);
        let ones = vec![1.0; full.len()];
        if self.m_full.bilinear(&ones, &full) < 0.0 {
            full.iter_mut().for_each(|v| *v = -*v);
        }
        let flux = self.consistent_flux(&full, pair.value);
        let residual = self.pencil.residual(pair.value, &pair.vector);
        Ok(GroundState {
            energy: pair.value,
            vector: full,
            flux,
            residual,
        })
    }
}

/// Positive ground state of a subdomain.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    /// Values at all region nodes (zero on the boundary).
    pub vector: Vec<f64>,
    /// Consistent flux on the region boundary at `energy`.
    pub flux: Vec<f64>,
    pub residual: f64,
}

/// Dirichlet Laplacian pencil on a cell set.
pub fn assemble_dirichlet(mesh: &Mesh, region: &[usize]) -> Result<SparsePencil> {
    Ok(SubdomainProblem::new(mesh, region)?.pencil)
}

/// Values of a function at the mesh nodes, as a vector over pencil dofs.
pub fn interpolate(mesh: &Mesh, dof_nodes: &[usize], f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    dof_nodes.iter().map(|&n| f(mesh.node(n))).collect()
}

/// `‖x‖_M`
pub fn mass_norm(m: &CsrMatrix, x: &[f64]) -> f64 {
    dot(x, &m.mul_vec(x)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, rectangle_grid, Shape};
    use std::f64::consts::PI;

    fn all_cells(mesh: &Mesh) -> Vec<usize> {
        (0..mesh.n_cells()).collect()
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = rectangle_grid(1.0, 1.0, 6, 6).unwrap();
        let p = SubdomainProblem::new(&mesh, &all_cells(&mesh)).unwrap();
        let ones = vec![1.0; p.n_local()];
        let row_sums = p.k_full.mul_vec(&ones);
        assert!(row_sums.iter().all(|s| s.abs() < 1e-12));
        assert!(p.k_full.asymmetry() < 1e-14 && p.m_full.asymmetry() < 1e-14);
        let area: f64 = p.m_full.bilinear(&ones, &ones);
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_square_ground_energy() {
        let mesh = generate_mesh(&Shape::Rectangle { a: 1.0, b: 1.0 }, 0.02).unwrap();
        let pencil = assemble_dirichlet(&mesh, &all_cells(&mesh)).unwrap();
        let pairs = pencil.eigensolve(Window::Lowest(3)).unwrap();
        let l1 = 2.0 * PI * PI;
        assert!((pairs[0].value - l1).abs() / l1 < 0.01);
        assert!((pairs[1].value - pairs[2].value).abs() / pairs[1].value < 1e-4);
        assert!((pairs[1].value - 5.0 * PI * PI).abs() / (5.0 * PI * PI) < 0.01);
    }

    #[test]
    fn eigenvalue_error_is_second_order() {
        let l1 = 2.0 * PI * PI;
        let err = |n: usize| {
            let mesh = rectangle_grid(1.0, 1.0, n, n).unwrap();
            let pencil = assemble_dirichlet(&mesh, &all_cells(&mesh)).unwrap();
            pencil.eigensolve(Window::Lowest(1)).unwrap()[0].value - l1
        };
        let ratio = err(16) / err(32);
        assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn single_triangle_has_no_free_dofs() {
        let mesh = rectangle_grid(1.0, 1.0, 2, 2).unwrap();
        let pencil = assemble_dirichlet(&mesh, &[0]).unwrap();
        assert!(pencil.is_empty());
        assert!(matches!(assemble_dirichlet(&mesh, &[]), Err(Error::EmptyRegion)));
    }

    #[test]
    fn edge_mass_entries() {
        let mesh = rectangle_grid(1.0, 1.0, 1, 1).unwrap();
        let b = boundary_mass(&mesh, &[[0, 1]]).unwrap();
        assert!((b.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.get(0, 1) - 1.0 / 6.0).abs() < 1e-15);
        let two = rectangle_grid(1.0, 1.0, 2, 1).unwrap();
        let b2 = boundary_mass(&two, &[[0, 1], [1, 2]]).unwrap();
        let sums = b2.mul_vec(&vec![1.0; two.n_nodes()]);
        assert!((sums[0] - 0.25).abs() < 1e-15 && (sums[1] - 0.5).abs() < 1e-15 && (sums[2] - 0.25).abs() < 1e-15);
        let empty = boundary_mass(&two, &[]).unwrap();
        assert_eq!(empty.nnz(), 0);
        assert!(boundary_mass(&two, &[[0, 5]]).is_err());
    }

    #[test]
    fn ground_state_flux_approximates_normal_derivative() {
        let mesh = rectangle_grid(1.0, 1.0, 40, 40).unwrap();
        let p = SubdomainProblem::new(&mesh, &all_cells(&mesh)).unwrap();
        let gs = p.ground_state().unwrap();
        let q = p.recover_pointwise(&mesh, &gs.flux);
        // normalization of sin(πx)sin(πy) in L²: factor 2
        let mut worst: f64 = 0.0;
        for (k, &i) in p.boundary.iter().enumerate() {
            let [x, y] = mesh.node(p.nodes[i]);
            let exact = if y == 0.0 || y == 1.0 {
                -2.0 * PI * (PI * x).sin()
            } else {
                -2.0 * PI * (PI * y).sin()
            };
            assert!(q[k] <= 1e-6, "positive normal derivative {}", q[k]);
            let corner = (x == 0.0 || x == 1.0) && (y == 0.0 || y == 1.0);
            if !corner {
                worst = worst.max((q[k] - exact).abs());
            }
        }
        assert!(worst < 0.3, "boundary error {worst}");
    }

    #[test]
    fn normal_derivative_checks_interior() {
        let mesh = rectangle_grid(1.0, 1.0, 10, 10).unwrap();
        let p = SubdomainProblem::new(&mesh, &all_cells(&mesh)).unwrap();
        let zero = vec![0.0; p.n_local()];
        assert!(p.normal_derivative(&zero, 3.0, 1e-8).unwrap().iter().all(|&v| v == 0.0));
        let gs = p.ground_state().unwrap();
        assert!(p.normal_derivative(&gs.vector, gs.energy, 1e-7).is_ok());
        assert!(p.normal_derivative(&gs.vector, gs.energy + 1.0, 1e-7).is_err());
    }

    #[test]
    fn green_identity_is_exact() {
        let mesh = rectangle_grid(1.0, 1.0, 8, 8).unwrap();
        let p = SubdomainProblem::new(&mesh, &all_cells(&mesh)).unwrap();
        let gs = p.ground_state().unwrap();
        let w: Vec<f64> = (0..p.n_local()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let r = p.consistent_flux(&gs.vector, gs.energy);
        let lhs: f64 = p.boundary.iter().zip(&r).map(|(&i, ri)| ri * w[i]).sum();
        let a = p.k_full.add_scaled(&p.m_full, -gs.energy);
        // interior part of (K − λM)u vanishes up to the eigen-solver residual
        let rhs = a.bilinear(&gs.vector, &w);
        assert!((lhs - rhs).abs() < 1e-6 * (1.0 + lhs.abs()));
    }
}
