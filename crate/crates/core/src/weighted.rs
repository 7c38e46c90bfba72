//! The sign-glued space on a cut mesh and the weighted Laplacian family.
//!
//! Every subdomain keeps its own copy of the nodes on its closure. Copies
//! across an interface facet are tied by `u_i = χ_i χ_j u_j`. Each class of
//! tied copies becomes one dof holding the value of its reference copy (the
//! copy with the smallest subdomain id). A class whose parity constraints
//! contradict each other (odd junctions) is forced to zero.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{element_matrices, push_facet_mass, SparsePencil};
use crate::linalg::CsrMatrix;
use crate::mesh::{Mesh, Topology};
use crate::partition::{nearest_node, Partition, SegmentGeometry, WeightAssignment};

/// Robin parameter of the family; `Infinite` imposes Dirichlet data on Γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DofKind {
    Interior,
    Interface,
}

/// How one subdomain's copy of a node relates to the dofs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopyInfo {
    pub dof: usize,
    /// `u_i(n) = sign · x[dof]`
    pub sign: f64,
    /// `u_i(n) = trace_sign · g[dof]` with `g = χ u` on the segment that fixes
    /// the trace orientation at this node.
    pub trace_sign: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Junction {
    pub node: usize,
    pub position: [f64; 2],
    /// Interface facets meeting at the node.
    pub valence: usize,
    pub subdomains: usize,
    /// False when the sign constraints force the value to zero.
    pub consistent: bool,
}

#[derive(Debug, Clone)]
pub struct GluedSpace {
    pub n_dofs: usize,
    pub dof_nodes: Vec<usize>,
    pub dof_kind: Vec<DofKind>,
    copies: HashMap<(usize, usize), CopyInfo>,
    pub cell_labels: Vec<usize>,
    /// (facet, segment) for every interface facet, in facet order.
    pub interface_facets: Vec<(usize, usize)>,
    pub junctions: Vec<Junction>,
    pub forced_zero_nodes: Vec<usize>,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// `∫_Γ u v` in the dof coordinates.
    pub gamma_mass: CsrMatrix,
}

struct SignedUnionFind {
    parent: Vec<usize>,
    parity: Vec<u8>,
    conflict: Vec<bool>,
}

impl SignedUnionFind {
    fn new(n: usize) -> Self {
        SignedUnionFind {
            parent: (0..n).collect(),
            parity: vec![0; n],
            conflict: vec![false; n],
        }
    }

    fn find(&mut self, x: usize) -> (usize, u8) {
        if self.parent[x] == x {
            return (x, 0);
        }
        let p = self.parent[x];
        let (root, par) = self.find(p);
        self.parity[x] ^= par;
        self.parent[x] = root;
        (root, self.parity[x])
    }

    /// Records `value(a) = (-1)^rel · value(b)`.
    fn union(&mut self, a: usize, b: usize, rel: u8) {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            if pa ^ pb != rel {
                self.conflict[ra] = true;
            }
            return;
        }
        self.parent[ra] = rb;
        self.parity[ra] = pa ^ pb ^ rel;
        let c = self.conflict[ra] || self.conflict[rb];
        self.conflict[rb] = c;
    }
}

/// Maps each interface facet of the mesh to its segment.
fn interface_segments(mesh: &Mesh, p: &Partition, labels: &[usize]) -> Result<Vec<(usize, usize)>> {
    let mut seg_of_facet: HashMap<usize, usize> = HashMap::new();
    for seg in &p.segments {
        let facets: Vec<usize> = match &seg.geometry {
            SegmentGeometry::Edges(edges) => edges
                .iter()
                .map(|&[a, b]| {
                    mesh.find_facet(a, b).ok_or_else(|| {
                        Error::InvalidPartition(format!("segment {} edge ({a},{b}) is not a mesh edge", seg.id))
                    })
                })
                .collect::<Result<_>>()?,
            SegmentGeometry::Point(x) => {
                let n = nearest_node(mesh, *x)?;
                vec![mesh.find_facet(n, n).unwrap()]
            }
            SegmentGeometry::Abstract => {
                return Err(Error::InvalidPartition(format!("segment {} has no geometry", seg.id)))
            }
        };
        for f in facets {
            if let Some(prev) = seg_of_facet.insert(f, seg.id) {
                return Err(Error::InvalidPartition(format!("facet {f} is in segments {prev} and {}", seg.id)));
            }
        }
    }
    let mut out = Vec::new();
    for f in 0..mesh.n_facets() {
        let (a, b) = mesh.facet_cells(f);
        let Some(b) = b else { continue };
        let (la, lb) = (labels[a], labels[b]);
        let seg = seg_of_facet.get(&f).copied();
        if la == lb {
            if seg.is_some() {
                return Err(Error::InvalidPartition(format!("facet {f} lies inside subdomain {la} but is listed in a segment")));
            }
            continue;
        }
        let s = seg.ok_or_else(|| Error::InvalidPartition(format!("interface facet {f} is not covered by a segment")))?;
        let sd = &p.segments[s];
        if (sd.left, sd.right) != (la.min(lb), la.max(lb)) {
            return Err(Error::InvalidPartition(format!(
                "segment {s} is listed between {} and {} but separates {la} and {lb}",
                sd.left, sd.right
            )));
        }
        out.push((f, s));
    }
    Ok(out)
}

impl GluedSpace {
    pub fn new(mesh: &Mesh, p: &Partition, w: &WeightAssignment) -> Result<Self> {
        if w.signs.len() != p.n_segments() {
            return Err(Error::InvalidWeights("weights do not match the partition".into()));
        }
        if !w.is_valid(p) {
            return Err(Error::InvalidWeights("induced cut is not valid".into()));
        }
        let labels = p.cell_labels(mesh.n_cells())?;
        let interface = interface_segments(mesh, p, &labels)?;
        let outer = mesh.outer_boundary_nodes();
        let n_nodes = mesh.n_nodes();

        // subdomains touching each node, ascending
        let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for c in 0..mesh.n_cells() {
            for &v in mesh.cell(c) {
                if !touching[v].contains(&labels[c]) {
                    touching[v].push(labels[c]);
                }
            }
        }
        for t in touching.iter_mut() {
            t.sort_unstable();
        }

        // copies that take part in interface constraints
        let mut copy_id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut copy_key: Vec<(usize, usize)> = Vec::new();
        let mut facets_at: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for &(f, s) in &interface {
            let seg = &p.segments[s];
            for &n in mesh.facet(f) {
                if outer[n] {
                    continue;
                }
                facets_at.entry(n).or_default().push((f, s));
                for i in [seg.left, seg.right] {
                    copy_id.entry((i, n)).or_insert_with(|| {
                        copy_key.push((i, n));
                        copy_key.len() - 1
                    });
                }
            }
        }
        let mut uf = SignedUnionFind::new(copy_key.len());
        let products = w.products();
        for &(f, s) in &interface {
            let seg = &p.segments[s];
            let rel = if products[s] < 0 { 1 } else { 0 };
            for &n in mesh.facet(f) {
                if outer[n] {
                    continue;
                }
                uf.union(copy_id[&(seg.left, n)], copy_id[&(seg.right, n)], rel);
            }
        }

        // dof numbering by (node, reference subdomain)
        let mut copies: HashMap<(usize, usize), CopyInfo> = HashMap::new();
        let mut dof_nodes = Vec::new();
        let mut dof_kind = Vec::new();
        let mut forced_zero_nodes = Vec::new();
        let mut junctions = Vec::new();
        for n in 0..n_nodes {
            if outer[n] {
                continue;
            }
            let mut root_dof: HashMap<usize, (usize, u8)> = HashMap::new();
            let mut zero_here = false;
            for &i in &touching[n] {
                match copy_id.get(&(i, n)) {
                    None => {
                        copies.insert((i, n), CopyInfo { dof: dof_nodes.len(), sign: 1.0, trace_sign: 1.0 });
                        dof_nodes.push(n);
                        dof_kind.push(DofKind::Interior);
                    }
                    Some(&cid) => {
                        let (root, par) = uf.find(cid);
                        if uf.conflict[root] {
                            zero_here = true;
                            continue;
                        }
                        let (dof, ref_par) = *root_dof.entry(root).or_insert_with(|| {
                            dof_nodes.push(n);
                            dof_kind.push(DofKind::Interface);
                            (dof_nodes.len() - 1, par)
                        });
                        let sign = if par ^ ref_par == 1 { -1.0 } else { 1.0 };
                        copies.insert((i, n), CopyInfo { dof, sign, trace_sign: sign });
                    }
                }
            }
            if zero_here {
                forced_zero_nodes.push(n);
            }
            if let Some(fs) = facets_at.get(&n) {
                if touching[n].len() >= 3 {
                    junctions.push(Junction {
                        node: n,
                        position: mesh.node(n),
                        valence: fs.len(),
                        subdomains: touching[n].len(),
                        consistent: !zero_here,
                    });
                }
            }
        }

        // trace orientation: per dof, g = χ_left(a) u_left(a) on the smallest segment a reaching it
        let mut nodes_at: Vec<&usize> = facets_at.keys().collect();
        nodes_at.sort_unstable();
        for &n in nodes_at {
            let mut segs: Vec<usize> = facets_at[&n].iter().map(|&(_, s)| s).collect();
            segs.sort_unstable();
            segs.dedup();
            let mut orient: HashMap<usize, f64> = HashMap::new();
            for a in segs {
                let left = p.segments[a].left;
                if let Some(c) = copies.get(&(left, n)) {
                    orient.entry(c.dof).or_insert(c.sign * w.signs[a][0] as f64);
                }
            }
            for &i in &touching[n] {
                if let Some(c) = copies.get_mut(&(i, n)) {
                    if let Some(o) = orient.get(&c.dof) {
                        c.trace_sign = c.sign * o;
                    }
                }
            }
        }

        let n_dofs = dof_nodes.len();
        let mut kt = Vec::new();
        let mut mt = Vec::new();
        for c in 0..mesh.n_cells() {
            let i = labels[c];
            let (ke, me) = element_matrices(mesh, c);
            let v = mesh.cell(c);
            let d: Vec<Option<CopyInfo>> = v.iter().map(|&n| copies.get(&(i, n)).copied()).collect();
            for a in 0..v.len() {
                let Some(ca) = d[a] else { continue };
                for b in 0..v.len() {
                    let Some(cb) = d[b] else { continue };
                    let s = ca.sign * cb.sign;
                    kt.push((ca.dof, cb.dof, s * ke[a][b]));
                    mt.push((ca.dof, cb.dof, s * me[a][b]));
                }
            }
        }
        let mut bt = Vec::new();
        for &(f, s) in &interface {
            let left = p.segments[s].left;
            let v = mesh.facet(f);
            push_facet_mass(mesh, f, |a| copies.get(&(left, v[a])).map(|c| (c.dof, c.sign)), &mut bt);
        }
        Ok(GluedSpace {
            n_dofs,
            dof_nodes,
            dof_kind,
            copies,
            cell_labels: labels,
            interface_facets: interface,
            junctions,
            forced_zero_nodes,
            stiffness: CsrMatrix::from_triplets(n_dofs, n_dofs, &kt),
            mass: CsrMatrix::from_triplets(n_dofs, n_dofs, &mt),
            gamma_mass: CsrMatrix::from_triplets(n_dofs, n_dofs, &bt),
        })
    }

    pub fn copy(&self, subdomain: usize, node: usize) -> Option<CopyInfo> {
        self.copies.get(&(subdomain, node)).copied()
    }

    pub fn interface_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs).filter(|&d| self.dof_kind[d] == DofKind::Interface).collect()
    }

    pub fn interior_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs).filter(|&d| self.dof_kind[d] == DofKind::Interior).collect()
    }

    /// Pencil of the Robin family at `σ`.
    pub fn pencil(&self, sigma: Sigma) -> SparsePencil {
        match sigma {
            Sigma::Finite(0.0) => SparsePencil {
                stiffness: self.stiffness.clone(),
                mass: self.mass.clone(),
                dof_nodes: self.dof_nodes.clone(),
            },
            Sigma::Finite(s) => SparsePencil {
                stiffness: self.stiffness.add_scaled(&self.gamma_mass, s),
                mass: self.mass.clone(),
                dof_nodes: self.dof_nodes.clone(),
            },
            Sigma::Infinite => {
                let keep = self.interior_dofs();
                SparsePencil {
                    stiffness: self.stiffness.submatrix(&keep, &keep),
                    mass: self.mass.submatrix(&keep, &keep),
                    dof_nodes: keep.iter().map(|&d| self.dof_nodes[d]).collect(),
                }
            }
        }
    }

    /// Restricts a dof vector to the interior dofs (the `σ = ∞` space).
    pub fn restrict_to_interior(&self, x: &[f64]) -> Vec<f64> {
        self.interior_dofs().iter().map(|&d| x[d]).collect()
    }

    /// Dof vector from per-subdomain nodal values, read at reference copies.
    pub fn glue(&self, value: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n_dofs];
        let mut set = vec![false; self.n_dofs];
        let mut keys: Vec<&(usize, usize)> = self.copies.keys().collect();
        keys.sort_unstable();
        for &(i, n) in keys {
            let c = self.copies[&(i, n)];
            if !set[c.dof] {
                x[c.dof] = c.sign * value(i, n);
                set[c.dof] = true;
            }
        }
        x
    }

    /// Value of subdomain `i`'s copy at node `n`.
    pub fn component(&self, x: &[f64], subdomain: usize, node: usize) -> f64 {
        self.copy(subdomain, node).map_or(0.0, |c| c.sign * x[c.dof])
    }

    /// Nodal values of the glued function as seen from each cell's subdomain:
    /// one value per (cell, local vertex).
    pub fn cell_values(&self, mesh: &Mesh, x: &[f64]) -> Vec<Vec<f64>> {
        (0..mesh.n_cells())
            .map(|c| {
                let i = self.cell_labels[c];
                mesh.cell(c).iter().map(|&n| self.component(x, i, n)).collect()
            })
            .collect()
    }

    pub fn is_one_dimensional(mesh: &Mesh) -> bool {
        matches!(mesh.topology(), Topology::Line { .. })
    }
}

/// Pencil of the weighted Laplacian family for given weights and `σ`.
pub fn assemble_weighted(mesh: &Mesh, p: &Partition, w: &WeightAssignment, sigma: Sigma) -> Result<SparsePencil> {
    if let Sigma::Finite(s) = sigma {
        if !(s >= 0.0) {
            return Err(Error::InvalidInput(format!("σ = {s} must be nonnegative")));
        }
    }
    Ok(GluedSpace::new(mesh, p, w)?.pencil(sigma))
}
