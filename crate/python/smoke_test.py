"""Smoke test for the nodaldtn extension module.

Build and install first:
    pip install --no-build-isolation -e crates/python
"""

import math

import nodaldtn


def main():
    circle = nodaldtn.circle_report(3)
    assert circle["defect"] == 0 and circle["multiplicity"] == 2, circle

    dtn = nodaldtn.circle_dtn(5)
    assert dtn["morse"] == 0 and dtn["kernel_dim"] == 1, dtn

    interval = nodaldtn.interval_report(3.0, points=[1.0, 2.5])
    assert not interval["is_chi_nodal"]

    triangle = nodaldtn.Partition.from_graph(3, [(0, 1), (1, 2), (0, 2)])
    assert not triangle.is_bipartite()
    assert triangle.is_valid_cut([]) is None
    assert len(triangle.minimal_cut()) == 1
    again = nodaldtn.Partition.from_json(triangle.to_json())
    assert again.k == 3 and again.n_segments == 3

    eig = nodaldtn.canonical_eigenvalues([[0, 1, 0], [1, 0, 2], [0, 2, 0]])
    assert abs(eig[0]) < 1e-12 and eig[1] > 0

    mesh = nodaldtn.Mesh.rectangle(math.pi, 2.0, 6, 4)
    assert mesh.n_cells == 48 and len(mesh.nodes) == 35

    report = nodaldtn.verify(shape="rect:1,1", h=0.1, eig=2, flow=False)
    assert report["passed"] and report["k"] == 2, report

    try:
        nodaldtn.verify(shape="rect:1,1", eig=2)
    except ValueError:
        pass
    else:
        raise AssertionError("missing mesh size should raise ValueError")

    print("nodaldtn smoke test passed")


if __name__ == "__main__":
    main()
