//! Pair compatibility of a partition and the χ-nodal eigenfunction it
//! carries: ground states, equipartition, normal-derivative matching, the
//! minimal label and the nodal deficiency.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{GroundState, SubdomainProblem};
use crate::linalg::eigen::{count_below, lowest_through, EigenOptions, CLUSTER_TOL};
use crate::linalg::sparse::norm;
use crate::mesh::Mesh;
use crate::partition::{
    is_valid_cut, maximal_cut_weights, nearest_node, traversal_directions, cut_from_weights, Partition,
    SegmentGeometry, WeightAssignment,
};
use crate::weighted::{GluedSpace, Junction, Sigma};

#[derive(Debug, Clone, Copy)]
pub struct SpccOptions {
    /// Relative spread allowed between subdomain ground energies.
    pub energy_tol: f64,
    /// Relative mismatch allowed between scaled normal derivatives.
    pub flux_tol: f64,
    /// Relative band around `λ*` for counting eigenvalues as equal to it.
    pub eig_tol: f64,
}

impl Default for SpccOptions {
    fn default() -> Self {
        SpccOptions {
            energy_tol: 1e-6,
            flux_tol: 1e-6,
            eig_tol: CLUSTER_TOL,
        }
    }
}

/// Per-subdomain Dirichlet data of a partition.
#[derive(Debug, Clone)]
pub struct NodalSetup {
    pub problems: Vec<SubdomainProblem>,
    pub ground: Vec<GroundState>,
    /// Positive factors making the scaled ground states' normal derivatives
    /// agree across segments; `Σ scale² = 1`.
    pub scales: Vec<f64>,
    /// Mean ground energy.
    pub lambda_star: f64,
    pub energy_spread: f64,
    /// Largest relative mismatch of scaled normal derivatives over segments.
    pub normal_match_residual: f64,
    /// Mesh nodes used to compare normal derivatives, per segment.
    pub segment_nodes: Vec<Vec<usize>>,
}

/// Nodes of a segment where both one-sided normal derivatives are compared:
/// interior polyline nodes, or all of them when there are none.
fn comparison_nodes(mesh: &Mesh, geometry: &SegmentGeometry) -> Result<Vec<usize>> {
    match geometry {
        SegmentGeometry::Edges(edges) => {
            let mut nodes: Vec<usize> = edges.iter().flat_map(|e| e.iter().copied()).collect();
            nodes.sort_unstable();
            nodes.dedup();
            let mut degree = std::collections::HashMap::new();
            for e in edges {
                for &n in e {
                    *degree.entry(n).or_insert(0usize) += 1;
                }
            }
            let outer = mesh.outer_boundary_nodes();
            let inner: Vec<usize> = nodes.iter().copied().filter(|n| degree[n] == 2 && !outer[*n]).collect();
            Ok(if inner.is_empty() { nodes } else { inner })
        }
        SegmentGeometry::Point(x) => Ok(vec![nearest_node(mesh, *x)?]),
        SegmentGeometry::Abstract => Err(Error::InvalidPartition("segment has no geometry".into())),
    }
}

impl NodalSetup {
    pub fn new(mesh: &Mesh, p: &Partition) -> Result<Self> {
        let problems: Vec<SubdomainProblem> = p
            .subdomains
            .par_iter()
            .map(|s| SubdomainProblem::new(mesh, &s.cells))
            .collect::<Result<_>>()?;
        let ground: Vec<GroundState> = problems.par_iter().map(|pr| pr.ground_state()).collect::<Result<_>>()?;
        let energies: Vec<f64> = ground.iter().map(|g| g.energy).collect();
        let lambda_star = energies.iter().sum::<f64>() / energies.len() as f64;
        let (lo, hi) = energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
        let energy_spread = (hi - lo) / lambda_star.abs().max(f64::MIN_POSITIVE);

        // pointwise normal derivatives of each ground state on its boundary
        let pointwise: Vec<Vec<f64>> = problems
            .iter()
            .zip(&ground)
            .map(|(pr, g)| pr.recover_pointwise(mesh, &g.flux))
            .collect();
        let at = |i: usize, n: usize| -> f64 {
            let pr = &problems[i];
            let l = pr.local_index(n).expect("segment node lies in both subdomains");
            let pos = pr.boundary.binary_search(&l).expect("segment node is a boundary node");
            pointwise[i][pos]
        };
        let segment_nodes: Vec<Vec<usize>> = p
            .segments
            .iter()
            .map(|s| comparison_nodes(mesh, &s.geometry))
            .collect::<Result<_>>()?;

        // scales along a spanning forest of the neighbor graph
        let k = p.k();
        let mut scales = vec![f64::NAN; k];
        for root in 0..k {
            if !scales[root].is_nan() {
                continue;
            }
            scales[root] = 1.0;
            let mut stack = vec![root];
            while let Some(i) = stack.pop() {
                for a in p.segments_of(i) {
                    let s = &p.segments[a];
                    let j = if s.left == i { s.right } else { s.left };
                    if !scales[j].is_nan() {
                        continue;
                    }
                    let (mut num, mut den) = (0.0, 0.0);
                    for &n in &segment_nodes[a] {
                        let (qi, qj) = (at(i, n), at(j, n));
                        num += qi * qj;
                        den += qj * qj;
                    }
                    scales[j] = if den > 0.0 && num > 0.0 { scales[i] * num / den } else { scales[i] };
                    stack.push(j);
                }
            }
        }
        let total = scales.iter().map(|c| c * c).sum::<f64>().sqrt();
        scales.iter_mut().for_each(|c| *c /= total);

        let mut normal_match_residual = 0.0f64;
        for (a, s) in p.segments.iter().enumerate() {
            let (ci, cj) = (scales[s.left], scales[s.right]);
            let mut diff = Vec::new();
            let mut size = 0.0f64;
            for &n in &segment_nodes[a] {
                let (qi, qj) = (ci * at(s.left, n), cj * at(s.right, n));
                diff.push(qi - qj);
                size = size.max(qi.abs()).max(qj.abs());
            }
            let r = if size > 0.0 { norm(&diff) / (size * (diff.len() as f64).sqrt()) } else { 0.0 };
            normal_match_residual = normal_match_residual.max(r);
        }

        Ok(NodalSetup {
            problems,
            ground,
            scales,
            lambda_star,
            energy_spread,
            normal_match_residual,
            segment_nodes,
        })
    }

    pub fn energies(&self) -> Vec<f64> {
        self.ground.iter().map(|g| g.energy).collect()
    }

    /// Value of the scaled ground state of subdomain `i` at mesh node `n`.
    pub fn scaled_value(&self, i: usize, n: usize) -> f64 {
        self.problems[i]
            .local_index(n)
            .map_or(0.0, |l| self.scales[i] * self.ground[i].vector[l])
    }

    /// The χ-nodal eigenfunction in the coordinates of `space`: subdomain
    /// `i` carries `orient[i]` times its scaled ground state.
    pub fn glued_eigenfunction(&self, space: &GluedSpace, orient: &[i8]) -> Vec<f64> {
        space.glue(|i, n| orient[i] as f64 * self.scaled_value(i, n))
    }
}

/// Subdomain signs of the χ-nodal eigenfunction for weights `w`: a witness
/// orientation of the induced cut.
pub fn eigenfunction_orientation(p: &Partition, w: &WeightAssignment) -> Result<Vec<i8>> {
    is_valid_cut(p, &cut_from_weights(w).members)
        .ok_or_else(|| Error::InvalidWeights("induced cut is not valid".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiNodalReport {
    pub is_chi_nodal: bool,
    pub k: usize,
    pub lambda_star: f64,
    pub energies: Vec<f64>,
    pub energy_spread: f64,
    pub normal_match_residual: f64,
    /// Relative residual of the glued eigenfunction in the weighted pencil.
    pub eigen_residual: f64,
    pub label: Option<usize>,
    pub defect: Option<i64>,
    /// Eigenvalues of the weighted operator equal to `λ*` within tolerance.
    pub multiplicity: Option<usize>,
    pub spectrum: Vec<f64>,
    pub junctions: Vec<Junction>,
    pub reasons: Vec<String>,
    #[serde(skip)]
    pub ground_states: Vec<Vec<f64>>,
}

/// Minimal label and multiplicity of `λ*` in the weighted operator.
#[derive(Debug, Clone)]
pub struct LabelCount {
    pub below: usize,
    pub multiplicity: usize,
    pub spectrum: Vec<f64>,
    pub inertia_below: Option<usize>,
}

pub fn label_count(space: &GluedSpace, lambda_star: f64, eig_tol: f64) -> Result<LabelCount> {
    let pencil = space.pencil(Sigma::Finite(0.0));
    let band = eig_tol * (1.0 + lambda_star.abs());
    let pairs = lowest_through(
        &pencil.stiffness,
        &pencil.mass,
        lambda_star + band,
        8,
        &EigenOptions::default(),
    )?;
    let spectrum: Vec<f64> = pairs.iter().map(|p| p.value).collect();
    let below = spectrum.iter().filter(|&&v| v < lambda_star - band).count();
    let multiplicity = spectrum.iter().filter(|&&v| (v - lambda_star).abs() <= band).count();
    let inertia_below = count_below(&pencil.stiffness, &pencil.mass, lambda_star - band).ok();
    Ok(LabelCount {
        below,
        multiplicity,
        spectrum,
        inertia_below,
    })
}

/// Checks pair compatibility and, when it holds, computes the label and
/// defect of the χ-nodal eigenfunction built with maximal-cut weights.
pub fn check_spcc(mesh: &Mesh, p: &Partition, opts: &SpccOptions) -> Result<ChiNodalReport> {
    let setup = NodalSetup::new(mesh, p)?;
    Ok(report_for(mesh, p, &setup, opts)?.0)
}

/// As [`check_spcc`], reusing a computed setup; also returns the glued space
/// and eigenfunction for the maximal-cut weights.
pub fn report_for(
    mesh: &Mesh,
    p: &Partition,
    setup: &NodalSetup,
    opts: &SpccOptions,
) -> Result<(ChiNodalReport, GluedSpace, Vec<f64>)> {
    let mut reasons = Vec::new();
    if setup.energy_spread > opts.energy_tol {
        reasons.push(format!(
            "ground energies differ by {:.3e} (relative), above {:.1e}",
            setup.energy_spread, opts.energy_tol
        ));
    }
    if setup.normal_match_residual > opts.flux_tol {
        reasons.push(format!(
            "normal derivatives mismatch by {:.3e} (relative), above {:.1e}",
            setup.normal_match_residual, opts.flux_tol
        ));
    }
    let trav = traversal_directions(p, Some(mesh))?;
    let w = maximal_cut_weights(p, &trav);
    let space = GluedSpace::new(mesh, p, &w)?;
    let phi = setup.glued_eigenfunction(&space, &vec![1; p.k()]);
    let eigen_residual = space.pencil(Sigma::Finite(0.0)).residual(setup.lambda_star, &phi);
    let is_chi_nodal = reasons.is_empty();

    let (mut label, mut defect, mut multiplicity, mut spectrum) = (None, None, None, Vec::new());
    if is_chi_nodal {
        let lc = label_count(&space, setup.lambda_star, opts.eig_tol)?;
        if let Some(ib) = lc.inertia_below {
            if ib != lc.below {
                reasons.push(format!("inertia count {ib} disagrees with eigenvalue count {}", lc.below));
            }
        }
        let l = lc.below + 1;
        label = Some(l);
        defect = Some(l as i64 - p.k() as i64);
        multiplicity = Some(lc.multiplicity);
        spectrum = lc.spectrum;
    }
    let report = ChiNodalReport {
        is_chi_nodal,
        k: p.k(),
        lambda_star: setup.lambda_star,
        energies: setup.energies(),
        energy_spread: setup.energy_spread,
        normal_match_residual: setup.normal_match_residual,
        eigen_residual,
        label,
        defect,
        multiplicity,
        spectrum,
        junctions: space.junctions.clone(),
        reasons,
        ground_states: setup.ground.iter().map(|g| g.vector.clone()).collect(),
    };
    Ok((report, space, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::interpolate;
    use crate::mesh::rectangle_grid;
    use crate::nodal::{extract_nodal_partition, partition_from_labels};
    use std::f64::consts::PI;

    fn square_mode(n: usize, mx: f64, my: f64) -> (Mesh, Partition) {
        let mesh = rectangle_grid(1.0, 1.0, n, n).unwrap();
        let all: Vec<usize> = (0..mesh.n_nodes()).collect();
        let v = interpolate(&mesh, &all, |p| (mx * PI * p[0]).sin() * (my * PI * p[1]).sin());
        let p = extract_nodal_partition(&mesh, &v).unwrap();
        (mesh, p)
    }

    #[test]
    fn two_by_one_square_mode_is_chi_nodal_with_label_two() {
        let (mesh, p) = square_mode(16, 2.0, 1.0);
        let r = check_spcc(&mesh, &p, &SpccOptions::default()).unwrap();
        assert!(r.is_chi_nodal, "{:?}", r.reasons);
        assert_eq!(r.k, 2);
        assert_eq!(r.label, Some(2));
        assert_eq!(r.defect, Some(0));
        assert_eq!(r.multiplicity, Some(2));
        assert!(r.eigen_residual < 1e-8);
        assert!((r.lambda_star - 5.0 * PI * PI).abs() / (5.0 * PI * PI) < 0.05);
    }

    #[test]
    fn unequal_strips_fail_equipartition() {
        let mesh = rectangle_grid(2.0, 1.0, 12, 4).unwrap();
        let labels: Vec<usize> = (0..mesh.n_cells())
            .map(|c| usize::from(mesh.centroid(c)[0] > 2.0 / 3.0))
            .collect();
        let p = partition_from_labels(&mesh, &labels).unwrap();
        let r = check_spcc(&mesh, &p, &SpccOptions::default()).unwrap();
        assert!(!r.is_chi_nodal);
        assert!(r.label.is_none());
        assert!(!r.reasons.is_empty());
    }

    #[test]
    fn checkerboard_cross_has_four_domains() {
        let (mesh, p) = square_mode(12, 2.0, 2.0);
        let r = check_spcc(&mesh, &p, &SpccOptions::default()).unwrap();
        assert!(r.is_chi_nodal, "{:?}", r.reasons);
        // 8π² is the fifth-lowest eigenvalue on the square (2, 5, 5, 8)
        assert_eq!(r.label, Some(4));
        assert_eq!(r.defect, Some(0));
        assert_eq!(r.junctions.len(), 1);
        assert_eq!(r.junctions[0].valence, 4);
    }

    #[test]
    fn circle_three_partition_has_no_defect() {
        let mesh = Mesh::circle(60).unwrap();
        let labels: Vec<usize> = (0..mesh.n_cells()).map(|c| c / 20).collect();
        let p = partition_from_labels(&mesh, &labels).unwrap();
        assert_eq!(p.k(), 3);
        let r = check_spcc(&mesh, &p, &SpccOptions::default()).unwrap();
        assert!(r.is_chi_nodal, "{:?}", r.reasons);
        assert_eq!(r.label, Some(3));
        assert_eq!(r.defect, Some(0));
        assert_eq!(r.multiplicity, Some(2));
    }
}
