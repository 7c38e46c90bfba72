use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use nodaldtn_core::dtn::{assemble_dtn, index_and_kernel, CanonicalSystem, DtnOptions};
use nodaldtn_core::exact1d::{exact_dtn_1d, OneDPartition};
use nodaldtn_core::mesh::{Mesh, Shape};
use nodaldtn_core::nodal::partition_from_labels;
use nodaldtn_core::partition::{maximal_cut_weights, traversal_directions, weights_from_orientations};
use nodaldtn_core::pipeline::{analyze, dtn_for, prepare, MeshSource, PartitionSource, RunConfig, Tolerances};
use nodaldtn_core::spcc::NodalSetup;

fn pm1() -> impl Strategy<Value = i8> {
    prop::bool::ANY.prop_map(|b| if b { 1 } else { -1 })
}

/// Positive couplings on a random spanning tree, then extra couplings that
/// are either positive or zero.
fn connected_alpha() -> impl Strategy<Value = DMatrix<f64>> {
    (2usize..=10).prop_flat_map(|k| {
        (
            prop::collection::vec((0usize..1000, 0.05f64..5.0), k - 1),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], k * k),
        )
            .prop_map(move |(tree, fill)| {
                let mut a = DMatrix::zeros(k, k);
                for i in 0..k {
                    for j in 0..i {
                        a[(i, j)] = fill[i * k + j];
                        a[(j, i)] = fill[i * k + j];
                    }
                }
                for (v, &(parent, w)) in (1..k).zip(&tree) {
                    let u = parent % v;
                    a[(u, v)] = w;
                    a[(v, u)] = w;
                }
                a
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_matrix_is_psd_with_constant_kernel(alpha in connected_alpha()) {
        let k = alpha.nrows();
        let sys = CanonicalSystem::from_alpha(alpha, DVector::zeros(k));
        let norm = sys.matrix.norm();
        prop_assert!((&sys.matrix - sys.matrix.transpose()).amax() == 0.0);
        prop_assert!(sys.constant_residual() < 1e-14);
        let eig = sys.eigenvalues();
        prop_assert!(eig[0].abs() < 1e-12 * norm);
        prop_assert!(eig[1] > 1e-9 * norm, "second eigenvalue {}", eig[1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_circle_dtn_is_weight_independent(
        half in 1usize..5,
        domains in prop::collection::vec(pm1(), 9),
        segments in prop::collection::vec(pm1(), 9),
        flip in 0usize..9,
    ) {
        let k = 2 * half + 1;
        let base = OneDPartition::circle_equipartition(k).unwrap();
        let lam = (k as f64 / 2.0).powi(2);
        let p = base.partition.clone();
        let trav = vec![1; p.n_segments()];
        let w = weights_from_orientations(&p, &trav, &domains[..k], &segments[..k]);
        let chosen = base.clone().with_weights(w.clone()).unwrap();
        let d0 = exact_dtn_1d(&base, lam).unwrap().operator;
        let d1 = exact_dtn_1d(&chosen, lam).unwrap().operator;
        prop_assert!((&d1.matrix - d1.matrix.transpose()).amax() <= 1e-12);
        prop_assert_eq!(index_and_kernel(&d0), index_and_kernel(&d1));
        let flipped = chosen.clone().with_weights(w.flip_subdomain(&p, flip % k)).unwrap();
        prop_assert_eq!(exact_dtn_1d(&flipped, lam).unwrap().operator.matrix, d1.matrix);
    }

    #[test]
    fn exact_interval_dtn_is_weight_independent(
        k in 2usize..8,
        length in 0.5f64..6.0,
        domains in prop::collection::vec(pm1(), 8),
        segments in prop::collection::vec(pm1(), 8),
    ) {
        let base = OneDPartition::interval_equipartition(k, length).unwrap();
        let lam = (PI * k as f64 / length).powi(2);
        let p = base.partition.clone();
        let trav = vec![1; p.n_segments()];
        let w = weights_from_orientations(&p, &trav, &domains[..k], &segments[..k - 1]);
        let d0 = exact_dtn_1d(&base, lam).unwrap();
        let d1 = exact_dtn_1d(&base.clone().with_weights(w).unwrap(), lam).unwrap();
        prop_assert_eq!(index_and_kernel(&d0.operator), index_and_kernel(&d1.operator));
        prop_assert!(d1.canonical.constant_residual() < 1e-12);
    }
}

#[test]
fn fem_circle_dtn_approaches_exact() {
    let k = 3;
    let lam = 2.25;
    let exact = exact_dtn_1d(&OneDPartition::circle_equipartition(k).unwrap(), lam).unwrap().operator;
    let mut errors = Vec::new();
    for n in [48, 96] {
        let mesh = Mesh::circle(n).unwrap();
        let labels: Vec<usize> = (0..n).map(|c| c * k / n).collect();
        let p = partition_from_labels(&mesh, &labels).unwrap();
        let setup = NodalSetup::new(&mesh, &p).unwrap();
        let trav = traversal_directions(&p, Some(&mesh)).unwrap();
        let w = maximal_cut_weights(&p, &trav);
        let opts = DtnOptions { lambda: Some(lam), ..DtnOptions::default() };
        let d = assemble_dtn(&mesh, &p, &setup, &w, opts).unwrap();
        assert_eq!(d.dim(), exact.dim());
        let e: f64 = d.eigenvalues.iter().zip(&exact.eigenvalues).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        errors.push(e);
    }
    assert!(errors[1] < errors[0] / 3.0, "{errors:?}");
    assert!(errors[1] < 5e-3, "{errors:?}");
}

#[test]
fn rectangle_dtn_is_symmetric_and_matches_volume_form() {
    let shape = Shape::Rectangle { a: PI, b: PI / 2f64.sqrt() };
    let cfg = RunConfig::new(
        MeshSource::Shape { shape, h: PI / 12.0, align: 6 },
        PartitionSource::Eigenfunction { index: 3, mode: None },
    );
    let prep = prepare(&cfg).unwrap();
    let tol = Tolerances::default();
    let analysis = analyze(&prep, &tol).unwrap();
    assert!(analysis.report.is_chi_nodal);
    let w = maximal_cut_weights(&prep.partition, &analysis.traversal);
    let (problem, d) = dtn_for(&prep, &analysis, &w, &tol).unwrap();
    assert!(d.asymmetry <= 1e-10 * d.matrix.norm().max(1.0), "asymmetry {}", d.asymmetry);
    let g = problem.green_matrix().unwrap();
    let gap = (&g - &d.matrix).amax();
    assert!(gap <= 1e-6 * d.matrix.amax().max(1.0), "gap {gap}");
    let ik = index_and_kernel(&d);
    assert_eq!((ik.morse, ik.kernel_dim), (1, 0));
}
