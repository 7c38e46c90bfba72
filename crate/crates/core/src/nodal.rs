//! Nodal partitions of mesh functions.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Topology};
use crate::partition::{BoundarySegment, Partition, SegmentGeometry, Subdomain};

/// Cells whose average is below this fraction of the largest average are
/// treated as lying on the nodal set.
pub const AMBIGUOUS_REL: f64 = 1e-6;
/// Largest tolerated fraction of ambiguous cells.
pub const AMBIGUOUS_LIMIT: f64 = 0.05;

/// Nodal values over all mesh nodes from a vector over pencil dofs.
pub fn nodal_values(n_nodes: usize, dof_nodes: &[usize], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n_nodes];
    for (&n, &v) in dof_nodes.iter().zip(x) {
        out[n] = v;
    }
    out
}

/// Sign of a function on each cell, from the cell average. Cells lying on
/// the nodal set (all vertices near zero, as at crossings of nodal lines or
/// in corners of the domain) use a quadratic fit over the surrounding
/// nodes evaluated at the centroid; failing that, their largest nodal value.
pub fn cell_signs(mesh: &Mesh, values: &[f64]) -> Result<Vec<i8>> {
    let averages: Vec<f64> = (0..mesh.n_cells())
        .map(|c| {
            let v = mesh.cell(c);
            v.iter().map(|&n| values[n]).sum::<f64>() / v.len() as f64
        })
        .collect();
    let scale = averages.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if scale == 0.0 {
        return Err(Error::MisalignedNodalSet { fraction: 1.0 });
    }
    let mut node_cells: Vec<Vec<usize>> = Vec::new();
    let mut ambiguous = 0usize;
    let mut signs = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let a = averages[c];
        if a.abs() > AMBIGUOUS_REL * scale {
            signs.push(if a > 0.0 { 1 } else { -1 });
            continue;
        }
        ambiguous += 1;
        if node_cells.is_empty() {
            node_cells = vec![Vec::new(); mesh.n_nodes()];
            for d in 0..mesh.n_cells() {
                for &n in mesh.cell(d) {
                    node_cells[n].push(d);
                }
            }
        }
        let fit = quadratic_at_centroid(mesh, values, c, &node_cells).filter(|v| v.abs() > 0.0);
        let pick = fit.unwrap_or_else(|| {
            mesh.cell(c)
                .iter()
                .map(|&n| values[n])
                .max_by(|x, y| x.abs().total_cmp(&y.abs()))
                .unwrap_or(0.0)
        });
        signs.push(if pick >= 0.0 { 1 } else { -1 });
    }
    let fraction = ambiguous as f64 / mesh.n_cells().max(1) as f64;
    if fraction > AMBIGUOUS_LIMIT {
        return Err(Error::MisalignedNodalSet { fraction });
    }
    Ok(signs)
}

/// Least-squares quadratic through the nodes of all cells touching triangle
/// `c`, evaluated at its centroid. `None` on line meshes or when the patch
/// cannot determine a quadratic.
fn quadratic_at_centroid(mesh: &Mesh, values: &[f64], c: usize, node_cells: &[Vec<usize>]) -> Option<f64> {
    if mesh.topology() != Topology::Triangle {
        return None;
    }
    let mut nodes = BTreeSet::new();
    for &n in mesh.cell(c) {
        for &d in &node_cells[n] {
            nodes.extend(mesh.cell(d).iter().copied());
        }
    }
    if nodes.len() < 6 {
        return None;
    }
    let x0 = mesh.centroid(c);
    let h = mesh.cell(c).iter().map(|&n| {
        let p = mesh.node(n);
        (p[0] - x0[0]).hypot(p[1] - x0[1])
    })
    .fold(0.0f64, f64::max);
    let rows: Vec<usize> = nodes.into_iter().collect();
    let a = DMatrix::from_fn(rows.len(), 6, |r, j| {
        let p = mesh.node(rows[r]);
        let (dx, dy) = ((p[0] - x0[0]) / h, (p[1] - x0[1]) / h);
        [1.0, dx, dy, dx * dx, dx * dy, dy * dy][j]
    });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|&n| values[n]));
    let svd = a.svd(true, true);
    if svd.rank(1e-8 * svd.singular_values.max()) < 6 {
        return None;
    }
    svd.solve(&b, 1e-12).ok().map(|coef| coef[0])
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Partition of the mesh into connected sign components of `values`
/// (nodal values over all mesh nodes).
pub fn extract_nodal_partition(mesh: &Mesh, values: &[f64]) -> Result<Partition> {
    if values.len() != mesh.n_nodes() {
        return Err(Error::InvalidInput(format!(
            "expected {} nodal values, got {}",
            mesh.n_nodes(),
            values.len()
        )));
    }
    let signs = cell_signs(mesh, values)?;
    let labels = sign_components(mesh, &signs);
    partition_from_labels(mesh, &labels)
}

/// Edge-connected components of equal sign, numbered by smallest cell.
pub fn sign_components(mesh: &Mesh, signs: &[i8]) -> Vec<usize> {
    let n = mesh.n_cells();
    let mut parent: Vec<usize> = (0..n).collect();
    for f in 0..mesh.n_facets() {
        if let (a, Some(b)) = mesh.facet_cells(f) {
            if signs[a] == signs[b] {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut id = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|c| {
            let r = find(&mut parent, c);
            if id[r] == usize::MAX {
                id[r] = next;
                next += 1;
            }
            id[r]
        })
        .collect()
}

/// Builds a partition from a cell labelling (labels `0..k`, each label an
/// edge-connected set). Interfaces between two labels are split into simple
/// polylines at junctions.
pub fn partition_from_labels(mesh: &Mesh, labels: &[usize]) -> Result<Partition> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut cells = vec![Vec::new(); k];
    for (c, &l) in labels.iter().enumerate() {
        cells[l].push(c);
    }
    if cells.iter().any(Vec::is_empty) {
        return Err(Error::InvalidPartition("labels must be contiguous from 0".into()));
    }
    let subdomains: Vec<Subdomain> = cells.into_iter().enumerate().map(|(id, cells)| Subdomain { id, cells }).collect();

    let mut by_pair: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut touching: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); mesh.n_nodes()];
    for c in 0..mesh.n_cells() {
        for &n in mesh.cell(c) {
            touching[n].insert(labels[c]);
        }
    }
    for f in 0..mesh.n_facets() {
        if let (a, Some(b)) = mesh.facet_cells(f) {
            let (la, lb) = (labels[a], labels[b]);
            if la != lb {
                by_pair.entry((la.min(lb), la.max(lb))).or_default().push(f);
            }
        }
    }

    let mut segments = Vec::new();
    let one_d = matches!(mesh.topology(), Topology::Line { .. });
    for ((l, r), facets) in by_pair {
        if one_d {
            for f in facets {
                let n = mesh.facet(f)[0];
                segments.push(BoundarySegment {
                    id: segments.len(),
                    left: l,
                    right: r,
                    geometry: SegmentGeometry::Point(mesh.node(n)[0]),
                });
            }
            continue;
        }
        for chain in split_chains(mesh, &facets, &touching) {
            segments.push(BoundarySegment {
                id: segments.len(),
                left: l,
                right: r,
                geometry: SegmentGeometry::Edges(chain),
            });
        }
    }
    Partition::new(mesh.dim(), subdomains, segments)
}

/// Splits a set of edges into simple polylines, breaking at nodes of degree
/// other than two, on the outer boundary, and where three or more labels meet.
fn split_chains(mesh: &Mesh, facets: &[usize], touching: &[BTreeSet<usize>]) -> Vec<Vec<[usize; 2]>> {
    let mut adj: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (e, &f) in facets.iter().enumerate() {
        let v = mesh.facet(f);
        adj.entry(v[0]).or_default().push((v[1], e));
        adj.entry(v[1]).or_default().push((v[0], e));
    }
    let outer = mesh.outer_boundary_nodes();
    let is_break = |n: usize| adj[&n].len() != 2 || touching[n].len() >= 3 || outer[n];
    let walk = |start: usize, first: (usize, usize), used: &mut Vec<bool>| {
        let mut chain = vec![[start, first.0]];
        used[first.1] = true;
        let mut at = first.0;
        while !is_break(at) && at != start {
            let Some(&(next, e)) = adj[&at].iter().find(|&&(_, e)| !used[e]) else { break };
            used[e] = true;
            chain.push([at, next]);
            at = next;
        }
        chain
    };
    let mut used = vec![false; facets.len()];
    let mut chains = Vec::new();
    let starts: Vec<usize> = adj.keys().copied().filter(|&n| is_break(n)).collect();
    for s in starts {
        for &(next, e) in &adj[&s] {
            if !used[e] {
                chains.push(walk(s, (next, e), &mut used));
            }
        }
    }
    // closed loops without break nodes
    while let Some(e) = used.iter().position(|u| !u) {
        let v = mesh.facet(facets[e]);
        let s = v[0].min(v[1]);
        let first = *adj[&s].iter().filter(|&&(_, e2)| !used[e2]).min().unwrap();
        chains.push(walk(s, first, &mut used));
    }
    chains
}

/// Number of nodal domains of a function.
pub fn nodal_count(mesh: &Mesh, values: &[f64]) -> Result<usize> {
    let signs = cell_signs(mesh, values)?;
    Ok(sign_components(mesh, &signs).into_iter().max().map_or(0, |m| m + 1))
}
