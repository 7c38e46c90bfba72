use std::f64::consts::PI;

use proptest::prelude::*;

use nodaldtn_core::fem::assemble_dirichlet;
use nodaldtn_core::flow::{default_sigma_grid, trace_branches, ReducedFamily};
use nodaldtn_core::linalg::Window;
use nodaldtn_core::mesh::{rectangle_grid, Shape};
use nodaldtn_core::nodal::{nodal_count, nodal_values};
use nodaldtn_core::pipeline::{analyze, prepare, Analysis, MeshSource, PartitionSource, Prepared, RunConfig, Tolerances};
use nodaldtn_core::weighted::Sigma;

fn rectangle_case(index: usize) -> (Prepared, Analysis) {
    let shape = Shape::Rectangle { a: PI, b: PI / 2f64.sqrt() };
    let cfg = RunConfig::new(
        MeshSource::Shape { shape, h: PI / 12.0, align: 6 },
        PartitionSource::Eigenfunction { index, mode: None },
    );
    let prep = prepare(&cfg).unwrap();
    let analysis = analyze(&prep, &Tolerances::default()).unwrap();
    (prep, analysis)
}

#[test]
fn glued_ground_states_are_an_eigenvector_for_every_sigma() {
    for index in [2, 3, 4] {
        let (_, a) = rectangle_case(index);
        assert!(a.report.is_chi_nodal, "eig {index}");
        let lam = a.report.lambda_star;
        for s in [0.0, 0.3, 4.0, 250.0] {
            let r = a.space.pencil(Sigma::Finite(s)).residual(lam, &a.phi);
            assert!(r < 1e-8, "eig {index} σ {s}: {r}");
        }
        let inner = a.space.restrict_to_interior(&a.phi);
        assert!(a.space.pencil(Sigma::Infinite).residual(lam, &inner) < 1e-8);
    }
}

#[test]
fn deflating_a_non_eigenvector_fails() {
    let (_, a) = rectangle_case(3);
    let junk: Vec<f64> = (0..a.phi.len()).map(|i| (i as f64 * 0.37).sin()).collect();
    assert!(ReducedFamily::new(&a.space, junk, a.report.lambda_star).is_err());
}

#[test]
fn traced_branches_are_non_decreasing() {
    for index in [3, 4, 5] {
        let (_, a) = rectangle_case(index);
        let family = ReducedFamily::new(&a.space, a.phi.clone(), a.report.lambda_star).unwrap();
        let grid = default_sigma_grid(60.0, 16);
        let set = trace_branches(&family, &grid, 6, 1e-6, 6).unwrap();
        assert!(set.monotonicity_violation() <= 1e-8, "eig {index}: {}", set.monotonicity_violation());
        let at_zero: Vec<f64> = family
            .reduced_spectrum(Sigma::Finite(0.0), Window::Lowest(6))
            .unwrap()
            .iter()
            .map(|p| p.value)
            .collect();
        for (b, v) in set.branches.iter().zip(&at_zero) {
            assert!((b[0] - v).abs() <= 1e-8 * (1.0 + v), "eig {index}: {} vs {v}", b[0]);
        }
        let lam = a.report.lambda_star;
        let at_star = set.at_infinity.iter().filter(|&&v| (v - lam).abs() <= 1e-6 * (1.0 + lam)).count();
        assert_eq!(at_star, a.report.k - 1, "eig {index}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The `m`-th Dirichlet eigenfunction has at most `m` nodal domains.
    /// Grids are aligned with the nodal lines of the low separable modes,
    /// and near-degenerate eigenvalues are skipped since their computed
    /// eigenvectors may mix modes with curved nodal lines.
    #[test]
    fn nodal_domains_obey_courant_bound(a in 1.0f64..3.0, b in 1.0f64..3.0) {
        let mesh = rectangle_grid(a, b, 24, 24).unwrap();
        let cells: Vec<usize> = (0..mesh.n_cells()).collect();
        let pencil = assemble_dirichlet(&mesh, &cells).unwrap();
        let pairs = pencil.eigensolve(Window::Lowest(9)).unwrap();
        for m in 0..8 {
            let v = pairs[m].value;
            let isolated = (m == 0 || v - pairs[m - 1].value > 0.02 * v) && pairs[m + 1].value - v > 0.02 * v;
            if !isolated {
                continue;
            }
            let values = nodal_values(mesh.n_nodes(), &pencil.dof_nodes, &pairs[m].vector);
            let count = nodal_count(&mesh, &values).unwrap();
            prop_assert!(count <= m + 1, "eigenfunction {} ({}) has {} domains", m + 1, v, count);
        }
    }
}
