use std::f64::consts::PI;

use proptest::prelude::*;

use nodaldtn_core::fem::{assemble_dirichlet, element_matrices, mass_norm, SubdomainProblem};
use nodaldtn_core::linalg::Window;
use nodaldtn_core::mesh::{rectangle_grid, refine, Mesh};

fn unit_square_lambda1(n: usize) -> f64 {
    let mesh = rectangle_grid(1.0, 1.0, n, n).unwrap();
    let cells: Vec<usize> = (0..mesh.n_cells()).collect();
    let pencil = assemble_dirichlet(&mesh, &cells).unwrap();
    pencil.eigensolve(Window::Lowest(1)).unwrap()[0].value
}

#[test]
fn dirichlet_eigenvalue_converges_quadratically() {
    let exact = 2.0 * PI * PI;
    let errors: Vec<f64> = [8, 16, 32].iter().map(|&n| unit_square_lambda1(n) - exact).collect();
    for w in errors.windows(2) {
        let rate = w[0] / w[1];
        assert!((3.3..4.7).contains(&rate), "errors {errors:?}");
    }
    assert!(errors.iter().all(|&e| e > 0.0));
}

#[test]
fn eigenpairs_are_mass_normalized_with_small_residual() {
    let mesh = rectangle_grid(PI, 2.0, 18, 12).unwrap();
    let cells: Vec<usize> = (0..mesh.n_cells()).collect();
    let pencil = assemble_dirichlet(&mesh, &cells).unwrap();
    let pairs = pencil.eigensolve(Window::Lowest(6)).unwrap();
    assert!(pairs.windows(2).all(|w| w[0].value <= w[1].value));
    for p in &pairs {
        assert!((mass_norm(&pencil.mass, &p.vector) - 1.0).abs() < 1e-10);
        assert!(pencil.residual(p.value, &p.vector) < 1e-8);
    }
}

fn jiggled_grid(nx: usize, ny: usize, shifts: &[(f64, f64)]) -> Mesh {
    let base = rectangle_grid(1.0, 1.0, nx, ny).unwrap();
    let h = 1.0 / nx.max(ny) as f64;
    let nodes: Vec<[f64; 2]> = base
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &[x, y])| {
            let interior = x > 1e-12 && x < 1.0 - 1e-12 && y > 1e-12 && y < 1.0 - 1e-12;
            let (dx, dy) = if interior { shifts[i % shifts.len()] } else { (0.0, 0.0) };
            [x + 0.25 * h * dx, y + 0.25 * h * dy]
        })
        .collect();
    let tris: Vec<[usize; 3]> = (0..base.n_cells()).map(|c| {
        let v = base.cell(c);
        [v[0], v[1], v[2]]
    }).collect();
    Mesh::from_triangles(nodes, tris).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn element_matrices_are_symmetric_with_constant_kernel(
        nx in 2usize..7, ny in 2usize..7,
        shifts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
    ) {
        let mesh = jiggled_grid(nx, ny, &shifts);
        for c in 0..mesh.n_cells() {
            prop_assert!(mesh.cell_measure(c) > 0.0);
            let (k, m) = element_matrices(&mesh, c);
            for a in 0..3 {
                prop_assert!(k[a].iter().sum::<f64>().abs() < 1e-12 * (1.0 + k[a][a].abs()));
                for b in 0..3 {
                    prop_assert!((k[a][b] - k[b][a]).abs() < 1e-14 * (1.0 + k[a][a].abs()));
                    prop_assert_eq!(m[a][b], m[b][a]);
                }
            }
        }
    }

    #[test]
    fn stiffness_rows_vanish_on_interior_nodes(
        nx in 2usize..7, ny in 2usize..7,
        shifts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
    ) {
        let mesh = jiggled_grid(nx, ny, &shifts);
        let cells: Vec<usize> = (0..mesh.n_cells()).collect();
        let prob = SubdomainProblem::new(&mesh, &cells).unwrap();
        let ones = vec![1.0; prob.nodes.len()];
        let row_sums = prob.k_full.mul_vec(&ones);
        for &i in &prob.interior {
            prop_assert!(row_sums[i].abs() < 1e-12);
        }
        let k = &prob.pencil.stiffness;
        for i in 0..k.nrows() {
            for (j, v) in k.row(i) {
                prop_assert!((v - k.get(j, i)).abs() < 1e-13);
            }
        }
    }

    /// `rᵀ g_b = uᵀ (K − λM) w` for every `w`; with a discrete eigenfunction
    /// `u` only the boundary values of `w` matter.
    #[test]
    fn normal_derivative_satisfies_green_identity(
        nx in 4usize..9, ny in 4usize..9,
        w in prop::collection::vec(-1.0f64..1.0, 100),
    ) {
        let mesh = rectangle_grid(1.0, 1.0, nx, ny).unwrap();
        let cells: Vec<usize> = (0..mesh.n_cells()).collect();
        let prob = SubdomainProblem::new(&mesh, &cells).unwrap();
        let ground = prob.pencil.eigensolve(Window::Lowest(1)).unwrap().remove(0);
        let u = prob.extend(&ground.vector);
        let r = prob.normal_derivative(&u, ground.value, 1e-8).unwrap();
        let wv: Vec<f64> = (0..prob.nodes.len()).map(|i| w[i % w.len()]).collect();
        let lhs: f64 = prob.boundary.iter().zip(&r).map(|(&i, ri)| ri * wv[i]).sum();
        let kw = prob.k_full.mul_vec(&wv);
        let mw = prob.m_full.mul_vec(&wv);
        let rhs: f64 = u.iter().zip(kw.iter().zip(&mw)).map(|(ui, (a, b))| ui * (a - ground.value * b)).sum();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
    }
}

#[test]
fn refinement_quarters_every_triangle() {
    let mesh = rectangle_grid(2.0, 1.0, 4, 3).unwrap();
    let fine = refine(&mesh).unwrap();
    assert_eq!(fine.n_cells(), 4 * mesh.n_cells());
    let area = |m: &Mesh| (0..m.n_cells()).map(|c| m.cell_measure(c)).sum::<f64>();
    assert!((area(&fine) - 2.0).abs() < 1e-12);
    assert!((fine.max_edge_length() - mesh.max_edge_length() / 2.0).abs() < 1e-12);
}
