//! Partitions, neighbor multigraphs, valid weights and valid cuts.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{self, BitRow};
use crate::mesh::Mesh;

/// Exhaustive cut search is used up to this many subdomains.
pub const EXHAUSTIVE_CUT_LIMIT: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentGeometry {
    /// Mesh edges given by node pairs, in polyline order.
    Edges(Vec<[usize; 2]>),
    /// A division point of a 1D domain.
    Point(f64),
    /// No geometry; for purely combinatorial use.
    Abstract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub id: usize,
    pub left: usize,
    pub right: usize,
    pub geometry: SegmentGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subdomain {
    pub id: usize,
    /// Empty for abstract partitions.
    #[serde(default)]
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub dim: usize,
    pub subdomains: Vec<Subdomain>,
    pub segments: Vec<BoundarySegment>,
}

impl Partition {
    /// Validates and normalizes (`left < right`) a partition.
    pub fn new(dim: usize, subdomains: Vec<Subdomain>, mut segments: Vec<BoundarySegment>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidPartition(format!("dimension {dim} unsupported")));
        }
        let k = subdomains.len();
        if k == 0 {
            return Err(Error::InvalidPartition("no subdomains".into()));
        }
        for (i, s) in subdomains.iter().enumerate() {
            if s.id != i {
                return Err(Error::InvalidPartition(format!("subdomain ids must be 0..k in order (found {} at {i})", s.id)));
            }
        }
        let mut owner = std::collections::HashMap::new();
        for s in &subdomains {
            for &c in &s.cells {
                if let Some(prev) = owner.insert(c, s.id) {
                    return Err(Error::InvalidPartition(format!("cell {c} in subdomains {prev} and {}", s.id)));
                }
            }
        }
        if k >= 2 && segments.is_empty() {
            return Err(Error::InvalidPartition("a partition with k ≥ 2 needs segments".into()));
        }
        for (a, seg) in segments.iter_mut().enumerate() {
            if seg.id != a {
                return Err(Error::InvalidPartition(format!("segment ids must be 0..n in order (found {} at {a})", seg.id)));
            }
            if seg.left == seg.right {
                return Err(Error::InvalidPartition(format!("segment {a} borders subdomain {} on both sides", seg.left)));
            }
            if seg.left >= k || seg.right >= k {
                return Err(Error::InvalidPartition(format!("segment {a} references a missing subdomain")));
            }
            if seg.left > seg.right {
                std::mem::swap(&mut seg.left, &mut seg.right);
            }
            if let SegmentGeometry::Edges(e) = &seg.geometry {
                if e.is_empty() {
                    return Err(Error::InvalidPartition(format!("segment {a} has no edges")));
                }
            }
        }
        Ok(Partition {
            dim,
            subdomains,
            segments,
        })
    }

    /// Combinatorial partition from a list of subdomain pairs.
    pub fn abstract_graph(k: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let subdomains = (0..k).map(|id| Subdomain { id, cells: Vec::new() }).collect();
        let segments = pairs
            .iter()
            .enumerate()
            .map(|(id, &(l, r))| BoundarySegment {
                id,
                left: l,
                right: r,
                geometry: SegmentGeometry::Abstract,
            })
            .collect();
        Partition::new(2, subdomains, segments)
    }

    pub fn k(&self) -> usize {
        self.subdomains.len()
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    /// Segments touching a subdomain.
    pub fn segments_of(&self, i: usize) -> Vec<usize> {
        self.segments
            .iter()
            .filter(|s| s.left == i || s.right == i)
            .map(|s| s.id)
            .collect()
    }

    pub fn neighbor_graph(&self) -> NeighborGraph {
        NeighborGraph {
            n_vertices: self.k(),
            edges: self.segments.iter().map(|s| (s.left, s.right)).collect(),
        }
    }

    /// Subdomain index of every mesh cell.
    pub fn cell_labels(&self, n_cells: usize) -> Result<Vec<usize>> {
        let mut labels = vec![usize::MAX; n_cells];
        for s in &self.subdomains {
            for &c in &s.cells {
                if c >= n_cells {
                    return Err(Error::InvalidPartition(format!("cell {c} is not in the mesh")));
                }
                labels[c] = s.id;
            }
        }
        if let Some(c) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidPartition(format!("cell {c} belongs to no subdomain")));
        }
        Ok(labels)
    }
}

pub fn build_neighbor_graph(p: &Partition) -> NeighborGraph {
    p.neighbor_graph()
}

/// Multigraph with one edge per boundary segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborGraph {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl NeighborGraph {
    /// A proper 2-coloring (entries 0/1), if one exists.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        let n = self.n_vertices;
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            if a == b {
                return None;
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut color = vec![u8::MAX; n];
        for s in 0..n {
            if color[s] != u8::MAX {
                continue;
            }
            color[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if color[v] == u8::MAX {
                        color[v] = 1 - color[u];
                        queue.push_back(v);
                    } else if color[v] == color[u] {
                        return None;
                    }
                }
            }
        }
        Some(color)
    }

    /// Is the graph connected using only the edges with `keep[e]`?
    pub fn connected_with(&self, keep: impl Fn(usize) -> bool) -> bool {
        let n = self.n_vertices;
        if n == 0 {
            return true;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut components = n;
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if keep(e) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                    components -= 1;
                }
            }
        }
        components == 1
    }
}

pub fn is_bipartite(g: &NeighborGraph) -> Option<Vec<u8>> {
    g.bipartition()
}

/// Signs `χ_i` on each side of every segment: `signs[a] = [χ_left, χ_right]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightAssignment {
    pub signs: Vec<[i8; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignRecord {
    pub subdomain: usize,
    pub segment: usize,
    pub sign: i8,
}

impl WeightAssignment {
    pub fn constant(p: &Partition, sign: i8) -> Self {
        WeightAssignment {
            signs: vec![[sign, sign]; p.n_segments()],
        }
    }

    /// Sign of subdomain `i` on segment `a`.
    pub fn get(&self, p: &Partition, i: usize, a: usize) -> Option<i8> {
        let s = &p.segments[a];
        if s.left == i {
            Some(self.signs[a][0])
        } else if s.right == i {
            Some(self.signs[a][1])
        } else {
            None
        }
    }

    /// `χ_left · χ_right` on each segment.
    pub fn products(&self) -> Vec<i8> {
        self.signs.iter().map(|s| s[0] * s[1]).collect()
    }

    pub fn to_records(&self, p: &Partition) -> Vec<SignRecord> {
        let mut out = Vec::with_capacity(2 * self.signs.len());
        for (a, s) in p.segments.iter().enumerate() {
            out.push(SignRecord { subdomain: s.left, segment: a, sign: self.signs[a][0] });
            out.push(SignRecord { subdomain: s.right, segment: a, sign: self.signs[a][1] });
        }
        out
    }

    pub fn from_records(p: &Partition, records: &[SignRecord]) -> Result<Self> {
        let mut signs = vec![[0i8; 2]; p.n_segments()];
        for r in records {
            if r.segment >= p.n_segments() {
                return Err(Error::InvalidWeights(format!("segment {} does not exist", r.segment)));
            }
            if r.sign != 1 && r.sign != -1 {
                return Err(Error::InvalidWeights(format!("sign {} is not ±1", r.sign)));
            }
            let s = &p.segments[r.segment];
            let side = if s.left == r.subdomain {
                0
            } else if s.right == r.subdomain {
                1
            } else {
                return Err(Error::InvalidWeights(format!(
                    "subdomain {} does not border segment {}",
                    r.subdomain, r.segment
                )));
            };
            signs[r.segment][side] = r.sign;
        }
        if let Some(a) = signs.iter().position(|s| s[0] == 0 || s[1] == 0) {
            return Err(Error::InvalidWeights(format!("segment {a} is missing a sign")));
        }
        Ok(WeightAssignment { signs })
    }

    /// Flips every sign of one subdomain.
    pub fn flip_subdomain(&self, p: &Partition, i: usize) -> Self {
        let mut w = self.clone();
        for (a, s) in p.segments.iter().enumerate() {
            if s.left == i {
                w.signs[a][0] = -w.signs[a][0];
            }
            if s.right == i {
                w.signs[a][1] = -w.signs[a][1];
            }
        }
        w
    }

    pub fn is_valid(&self, p: &Partition) -> bool {
        is_valid_cut(p, &cut_from_weights(self).members).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cut {
    pub members: Vec<usize>,
    pub witness: Option<Vec<i8>>,
}

/// Direction of the left subdomain's counterclockwise boundary along each
/// segment relative to the segment's own orientation. The right side always
/// runs the other way.
pub fn traversal_directions(p: &Partition, mesh: Option<&Mesh>) -> Result<Vec<i8>> {
    let labels = match mesh {
        Some(m) if p.subdomains.iter().any(|s| !s.cells.is_empty()) => Some(p.cell_labels(m.n_cells())?),
        _ => None,
    };
    p.segments
        .iter()
        .map(|seg| match (&seg.geometry, mesh, &labels) {
            (SegmentGeometry::Edges(edges), Some(m), Some(lab)) => {
                let [a, b] = edges[0];
                let f = m
                    .find_facet(a, b)
                    .ok_or_else(|| Error::InvalidPartition(format!("segment {} edge ({a},{b}) not in mesh", seg.id)))?;
                let (c0, c1) = m.facet_cells(f);
                let cell = [Some(c0), c1]
                    .into_iter()
                    .flatten()
                    .find(|&c| lab[c] == seg.left)
                    .ok_or_else(|| Error::InvalidPartition(format!("segment {} does not touch its left side", seg.id)))?;
                Ok(if m.cell_traverses(cell, a, b) { 1 } else { -1 })
            }
            (SegmentGeometry::Point(x), Some(m), Some(lab)) => {
                let node = nearest_node(m, *x)?;
                let f = m.find_facet(node, node).unwrap();
                let (c0, c1) = m.facet_cells(f);
                let cell = [Some(c0), c1]
                    .into_iter()
                    .flatten()
                    .find(|&c| lab[c] == seg.left)
                    .ok_or_else(|| Error::InvalidPartition(format!("segment {} does not touch its left side", seg.id)))?;
                // the point is the right end of a cell lying to its left
                Ok(if m.cell(cell)[1] == node { 1 } else { -1 })
            }
            _ => Ok(1),
        })
        .collect()
}

/// Mesh node at a 1D coordinate.
pub fn nearest_node(mesh: &Mesh, x: f64) -> Result<usize> {
    let (best, dist) = (0..mesh.n_nodes())
        .map(|i| (i, (mesh.node(i)[0] - x).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidMesh("empty mesh".into()))?;
    if dist > 1e-9 * (1.0 + x.abs()) {
        return Err(Error::InvalidPartition(format!("point {x} is not a mesh node")));
    }
    Ok(best)
}

/// Weights induced by orientations of subdomains and segments: `χ_i = +1`
/// on a segment exactly when the boundary orientation of `D_i` agrees with
/// the segment's orientation.
pub fn weights_from_orientations(
    p: &Partition,
    traversal: &[i8],
    domain_orient: &[i8],
    segment_orient: &[i8],
) -> WeightAssignment {
    let signs = p
        .segments
        .iter()
        .enumerate()
        .map(|(a, s)| {
            let t = traversal[a] * segment_orient[a];
            [domain_orient[s.left] * t, -domain_orient[s.right] * t]
        })
        .collect();
    WeightAssignment { signs }
}

pub fn maximal_cut_weights(p: &Partition, traversal: &[i8]) -> WeightAssignment {
    weights_from_orientations(p, traversal, &vec![1; p.k()], &vec![1; p.n_segments()])
}

/// Weights realizing a given valid cut, or `None` if the cut is invalid.
pub fn weights_for_cut(p: &Partition, traversal: &[i8], members: &[usize]) -> Option<WeightAssignment> {
    let witness = is_valid_cut(p, members)?;
    Some(weights_from_orientations(p, traversal, &witness, &vec![1; p.n_segments()]))
}

pub fn cut_from_weights(w: &WeightAssignment) -> Cut {
    Cut {
        members: w
            .signs
            .iter()
            .enumerate()
            .filter(|(_, s)| s[0] * s[1] == -1)
            .map(|(a, _)| a)
            .collect(),
        witness: None,
    }
}

/// Solves for domain orientations with `a ∈ cut ⇔ o_i(a) = o_j(a)`.
pub fn is_valid_cut(p: &Partition, members: &[usize]) -> Option<Vec<i8>> {
    let k = p.k();
    let mut in_cut = vec![false; p.n_segments()];
    for &a in members {
        if a < in_cut.len() {
            in_cut[a] = true;
        }
    }
    let equations: Vec<(BitRow, bool)> = p
        .segments
        .iter()
        .map(|s| {
            let mut row = BitRow::zeros(k);
            row.flip(s.left);
            row.flip(s.right);
            (row, !in_cut[s.id])
        })
        .collect();
    gf2::solve(k, &equations).map(|x| x.into_iter().map(|b| if b { -1 } else { 1 }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutReport {
    /// Valid cut leaving the complement connected, of smallest cardinality.
    pub minimal: Cut,
    /// Valid cut of smallest cardinality, connected or not.
    pub smallest: Cut,
    /// Whether all orientations were enumerated.
    pub exhaustive: bool,
}

fn cut_key(members: &[usize]) -> (usize, Vec<usize>) {
    (members.len(), members.to_vec())
}

/// Minimal valid cut (connected complement), ties by cardinality then
/// lexicographic order of members.
pub fn minimal_valid_cut(p: &Partition) -> Cut {
    cut_report(p).minimal
}

pub fn cut_report(p: &Partition) -> CutReport {
    let g = p.neighbor_graph();
    let k = p.k();
    let monochromatic = |o: &[i8]| -> Vec<usize> {
        p.segments
            .iter()
            .filter(|s| o[s.left] == o[s.right])
            .map(|s| s.id)
            .collect()
    };
    if k <= EXHAUSTIVE_CUT_LIMIT {
        let mut best_min: Option<(Vec<usize>, Vec<i8>)> = None;
        let mut best_small: Option<(Vec<usize>, Vec<i8>)> = None;
        for mask in 0u64..(1u64 << (k - 1)) {
            let o: Vec<i8> = (0..k)
                .map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { -1 } else { 1 })
                .collect();
            let members = monochromatic(&o);
            let better = |cur: &Option<(Vec<usize>, Vec<i8>)>| match cur {
                None => true,
                Some((m, _)) => cut_key(&members) < cut_key(m),
            };
            if better(&best_small) {
                best_small = Some((members.clone(), o.clone()));
            }
            let mut in_cut = vec![false; p.n_segments()];
            for &a in &members {
                in_cut[a] = true;
            }
            if better(&best_min) && g.connected_with(|e| !in_cut[e]) {
                best_min = Some((members, o));
            }
        }
        let (sm, so) = best_small.expect("at least one orientation");
        let (mm, mo) = best_min.unwrap_or_else(|| (sm.clone(), so.clone()));
        return CutReport {
            minimal: Cut { members: mm, witness: Some(mo) },
            smallest: Cut { members: sm, witness: Some(so) },
            exhaustive: true,
        };
    }
    // spanning-tree 2-coloring: tree edges are never cut, so the complement stays connected
    let mut o = vec![0i8; k];
    let mut adj = vec![Vec::new(); k];
    for s in &p.segments {
        adj[s.left].push(s.right);
        adj[s.right].push(s.left);
    }
    for start in 0..k {
        if o[start] != 0 {
            continue;
        }
        o[start] = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if o[v] == 0 {
                    o[v] = -o[u];
                    queue.push_back(v);
                }
            }
        }
    }
    let members = monochromatic(&o);
    let cut = Cut { members, witness: Some(o) };
    CutReport {
        minimal: cut.clone(),
        smallest: cut,
        exhaustive: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Equivalence {
    pub edge: bool,
    pub domain: bool,
}

pub fn weight_equivalence(p: &Partition, w1: &WeightAssignment, w2: &WeightAssignment) -> Equivalence {
    let edge = w1.products() == w2.products();
    let mut ratio = vec![0i8; p.k()];
    let mut domain = true;
    for (a, s) in p.segments.iter().enumerate() {
        for (side, i) in [(0, s.left), (1, s.right)] {
            let r = w1.signs[a][side] * w2.signs[a][side];
            if ratio[i] == 0 {
                ratio[i] = r;
            } else if ratio[i] != r {
                domain = false;
            }
        }
    }
    Equivalence { edge, domain }
}

/// JSON document holding a partition and optionally its weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionDocument {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub dim: usize,
    pub subdomains: Vec<Subdomain>,
    pub segments: Vec<SegmentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<SignRecord>>,
}

fn default_schema() -> String {
    "nodaldtn.partition/1".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub id: usize,
    pub left: usize,
    pub right: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
}

impl PartitionDocument {
    pub fn from_partition(p: &Partition, w: Option<&WeightAssignment>) -> Self {
        PartitionDocument {
            schema: default_schema(),
            dim: p.dim,
            subdomains: p.subdomains.clone(),
            segments: p
                .segments
                .iter()
                .map(|s| SegmentRecord {
                    id: s.id,
                    left: s.left,
                    right: s.right,
                    edges: match &s.geometry {
                        SegmentGeometry::Edges(e) => Some(e.clone()),
                        _ => None,
                    },
                    point: match s.geometry {
                        SegmentGeometry::Point(x) => Some(x),
                        _ => None,
                    },
                })
                .collect(),
            signs: w.map(|w| w.to_records(p)),
        }
    }

    pub fn into_parts(self) -> Result<(Partition, Option<WeightAssignment>)> {
        let segments = self
            .segments
            .into_iter()
            .map(|r| {
                let geometry = match (r.edges, r.point) {
                    (Some(e), None) => SegmentGeometry::Edges(e),
                    (None, Some(x)) => SegmentGeometry::Point(x),
                    (None, None) => SegmentGeometry::Abstract,
                    (Some(_), Some(_)) => {
                        return Err(Error::InvalidPartition(format!("segment {} has both edges and a point", r.id)))
                    }
                };
                Ok(BoundarySegment { id: r.id, left: r.left, right: r.right, geometry })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = Partition::new(self.dim, self.subdomains, segments)?;
        let w = match self.signs {
            Some(records) => Some(WeightAssignment::from_records(&p, &records)?),
            None => None,
        };
        Ok((p, w))
    }

    pub fn parse(text: &str) -> Result<(Partition, Option<WeightAssignment>)> {
        let doc: PartitionDocument = serde_json::from_str(text)?;
        doc.into_parts()
    }
}
