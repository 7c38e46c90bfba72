//! Simplicial meshes in one and two dimensions.
//!
//! 2D meshes are P1 triangulations. 1D meshes are chains of intervals,
//! optionally periodic (a circle parametrized by arc length).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    /// Chain of intervals; `period` set for a closed loop.
    Line { period: Option<f64> },
    Triangle,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    topology: Topology,
    nodes: Vec<[f64; 2]>,
    cells: Vec<usize>,
    facets: Vec<usize>,
    facet_cells: Vec<[usize; 2]>,
    cell_facets: Vec<usize>,
    facet_index: HashMap<(usize, usize), usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rectangle { a: f64, b: f64 },
    Disk { r: f64 },
    Polygon(Vec<[f64; 2]>),
}

impl Shape {
    /// Parses `rect:a,b`, `disk:r` or `poly:x0,y0;x1,y1;...`.
    pub fn parse(s: &str) -> Result<Shape> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("shape '{s}' needs kind:params")))?;
        let nums = |t: &str| -> Result<Vec<f64>> {
            t.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad number '{x}' in shape")))
                })
                .collect()
        };
        match kind {
            "rect" | "rectangle" => {
                let v = nums(args)?;
                if v.len() != 2 {
                    return Err(Error::InvalidInput("rect needs a,b".into()));
                }
                Ok(Shape::Rectangle { a: v[0], b: v[1] })
            }
            "disk" => {
                let v = nums(args)?;
                if v.len() != 1 {
                    return Err(Error::InvalidInput("disk needs r".into()));
                }
                Ok(Shape::Disk { r: v[0] })
            }
            "poly" | "polygon" => {
                let mut pts = Vec::new();
                for p in args.split(';') {
                    let v = nums(p)?;
                    if v.len() != 2 {
                        return Err(Error::InvalidInput(format!("bad polygon vertex '{p}'")));
                    }
                    pts.push([v[0], v[1]]);
                }
                Ok(Shape::Polygon(pts))
            }
            _ => Err(Error::InvalidInput(format!("unknown shape kind '{kind}'"))),
        }
    }
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Triangle mesh. Clockwise triangles are reoriented; degenerate ones and
    /// non-manifold edges are rejected.
    pub fn from_triangles(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        let n = nodes.len();
        let mut cells = Vec::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            let scale = [tri[0], tri[1], tri[2]]
                .iter()
                .map(|&v| nodes[v][0].abs().max(nodes[v][1].abs()))
                .fold(1e-300f64, f64::max);
            if area.abs() <= 1e-14 * scale * scale {
                return Err(Error::InvalidMesh(format!("triangle {t} has zero area")));
            }
            if area > 0.0 {
                cells.extend_from_slice(tri);
            } else {
                cells.extend_from_slice(&[tri[0], tri[2], tri[1]]);
            }
        }
        let mut mesh = Mesh {
            topology: Topology::Triangle,
            nodes,
            cells,
            facets: Vec::new(),
            facet_cells: Vec::new(),
            cell_facets: Vec::new(),
            facet_index: HashMap::new(),
        };
        mesh.build_facets()?;
        Ok(mesh)
    }

    /// 1D mesh through the given increasing coordinates. With `period`, the
    /// last node connects back to the first and coordinates must lie in
    /// `[0, period)`.
    pub fn from_line(points: Vec<f64>, period: Option<f64>) -> Result<Mesh> {
        if points.len() < 2 {
            return Err(Error::InvalidMesh("a line mesh needs at least two nodes".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMesh("line nodes must be strictly increasing".into()));
        }
        let n = points.len();
        let mut cells = Vec::new();
        for i in 0..n - 1 {
            cells.extend_from_slice(&[i, i + 1]);
        }
        if let Some(p) = period {
            if points[0] < 0.0 || points[n - 1] >= p {
                return Err(Error::InvalidMesh("periodic nodes must lie in [0, period)".into()));
            }
            if n < 3 {
                return Err(Error::InvalidMesh("a closed loop needs at least three nodes".into()));
            }
            cells.extend_from_slice(&[n - 1, 0]);
        }
        let mut mesh = Mesh {
            topology: Topology::Line { period },
            nodes: points.iter().map(|&x| [x, 0.0]).collect(),
            cells,
            facets: Vec::new(),
            facet_cells: Vec::new(),
            cell_facets: Vec::new(),
            facet_index: HashMap::new(),
        };
        mesh.build_facets()?;
        Ok(mesh)
    }

    /// Uniform mesh of `(0, length)` with `n` intervals.
    pub fn interval(length: f64, n: usize) -> Result<Mesh> {
        if !(length > 0.0) || n == 0 {
            return Err(Error::InvalidMesh("interval needs positive length and cells".into()));
        }
        Mesh::from_line((0..=n).map(|i| length * i as f64 / n as f64).collect(), None)
    }

    /// Uniform mesh of the circle `[0, 2π)` with `n` intervals.
    pub fn circle(n: usize) -> Result<Mesh> {
        Mesh::from_line(
            (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect(),
            Some(2.0 * PI),
        )
    }

    fn build_facets(&mut self) -> Result<()> {
        let arity = self.cell_arity();
        let nf_per_cell = self.facets_per_cell();
        let ncells = self.n_cells();
        self.cell_facets = vec![NONE; ncells * nf_per_cell];
        for c in 0..ncells {
            let cell: Vec<usize> = self.cell(c).to_vec();
            for lf in 0..nf_per_cell {
                let key = match self.topology {
                    Topology::Line { .. } => (cell[lf], cell[lf]),
                    Topology::Triangle => edge_key(cell[(lf + 1) % arity], cell[(lf + 2) % arity]),
                };
                let f = match self.facet_index.get(&key) {
                    Some(&f) => {
                        let slot = &mut self.facet_cells[f];
                        if slot[1] != NONE {
                            return Err(Error::InvalidMesh(format!(
                                "facet {key:?} is shared by more than two cells"
                            )));
                        }
                        slot[1] = c;
                        f
                    }
                    None => {
                        let f = self.facet_cells.len();
                        self.facet_index.insert(key, f);
                        match self.topology {
                            Topology::Line { .. } => self.facets.push(key.0),
                            Topology::Triangle => {
                                self.facets.push(key.0);
                                self.facets.push(key.1);
                            }
                        }
                        self.facet_cells.push([c, NONE]);
                        f
                    }
                };
                self.cell_facets[c * nf_per_cell + lf] = f;
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn dim(&self) -> usize {
        match self.topology {
            Topology::Line { .. } => 1,
            Topology::Triangle => 2,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.topology {
            Topology::Line { period } => period,
            Topology::Triangle => None,
        }
    }

    pub fn cell_arity(&self) -> usize {
        self.dim() + 1
    }

    pub fn facet_arity(&self) -> usize {
        self.dim()
    }

    pub fn facets_per_cell(&self) -> usize {
        self.dim() + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / self.cell_arity()
    }

    pub fn n_facets(&self) -> usize {
        self.facet_cells.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let a = self.cell_arity();
        &self.cells[c * a..(c + 1) * a]
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        let a = self.facet_arity();
        &self.facets[f * a..(f + 1) * a]
    }

    /// The one or two cells adjacent to a facet.
    pub fn facet_cells(&self, f: usize) -> (usize, Option<usize>) {
        let [a, b] = self.facet_cells[f];
        (a, if b == NONE { None } else { Some(b) })
    }

    pub fn cell_facets(&self, c: usize) -> &[usize] {
        let k = self.facets_per_cell();
        &self.cell_facets[c * k..(c + 1) * k]
    }

    /// Facet joining two nodes (2D) or the facet at a node (1D, pass `b == a`).
    pub fn find_facet(&self, a: usize, b: usize) -> Option<usize> {
        self.facet_index.get(&edge_key(a, b)).copied()
    }

    pub fn is_outer_facet(&self, f: usize) -> bool {
        self.facet_cells[f][1] == NONE
    }

    /// Nodes lying on the outer boundary.
    pub fn outer_boundary_nodes(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_nodes()];
        for f in 0..self.n_facets() {
            if self.is_outer_facet(f) {
                for &v in self.facet(f) {
                    out[v] = true;
                }
            }
        }
        out
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        let v = self.cell(c);
        match self.topology {
            Topology::Line { period } => {
                let d = self.nodes[v[1]][0] - self.nodes[v[0]][0];
                match period {
                    Some(p) if d <= 0.0 => d + p,
                    _ => d,
                }
            }
            Topology::Triangle => signed_area(self.nodes[v[0]], self.nodes[v[1]], self.nodes[v[2]]),
        }
    }

    pub fn facet_measure(&self, f: usize) -> f64 {
        match self.topology {
            Topology::Line { .. } => 1.0,
            Topology::Triangle => {
                let v = self.facet(f);
                let (a, b) = (self.nodes[v[0]], self.nodes[v[1]]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            }
        }
    }

    pub fn centroid(&self, c: usize) -> [f64; 2] {
        match self.topology {
            Topology::Line { .. } => {
                let v = self.cell(c);
                [self.nodes[v[0]][0] + 0.5 * self.cell_measure(c), 0.0]
            }
            Topology::Triangle => {
                let v = self.cell(c);
                let mut p = [0.0; 2];
                for &i in v {
                    p[0] += self.nodes[i][0] / 3.0;
                    p[1] += self.nodes[i][1] / 3.0;
                }
                p
            }
        }
    }

    pub fn max_edge_length(&self) -> f64 {
        match self.topology {
            Topology::Line { .. } => (0..self.n_cells()).map(|c| self.cell_measure(c)).fold(0.0, f64::max),
            Topology::Triangle => (0..self.n_facets()).map(|f| self.facet_measure(f)).fold(0.0, f64::max),
        }
    }

    /// Is the triangle's counterclockwise boundary traversed from `a` to `b`?
    pub fn cell_traverses(&self, c: usize, a: usize, b: usize) -> bool {
        let v = self.cell(c);
        (0..3).any(|i| v[i] == a && v[(i + 1) % 3] == b)
    }

    /// Reads the text mesh format: `nodes N`, N coordinate lines,
    /// `triangles T`, T index lines, and an optional `regions` block (header
    /// `regions` or `regions T`) with one subdomain id per triangle.
    pub fn parse(text: &str) -> Result<(Mesh, Option<Vec<usize>>)> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = |line: Option<&str>, key: &str| -> Result<usize> {
            let line = line.ok_or_else(|| Error::InvalidMesh(format!("missing '{key}' header")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::InvalidMesh(format!("expected '{key}', found '{line}'")));
            }
            it.next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| Error::InvalidMesh(format!("bad count in '{line}'")))
        };
        let n = header(lines.next(), "nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| Error::InvalidMesh("truncated node list".into()))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidMesh(format!("bad node line '{line}'")))?;
            if v.len() != 2 {
                return Err(Error::InvalidMesh(format!("bad node line '{line}'")));
            }
            nodes.push([v[0], v[1]]);
        }
        let t = header(lines.next(), "triangles")?;
        let mut tris = Vec::with_capacity(t);
        for _ in 0..t {
            let line = lines.next().ok_or_else(|| Error::InvalidMesh("truncated triangle list".into()))?;
            let v: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidMesh(format!("bad triangle line '{line}'")))?;
            if v.len() != 3 {
                return Err(Error::InvalidMesh(format!("bad triangle line '{line}'")));
            }
            tris.push([v[0], v[1], v[2]]);
        }
        let regions = match lines.next() {
            None => None,
            Some(line) => {
                // the count after `regions` is optional
                let r = if line == "regions" { t } else { header(Some(line), "regions")? };
                if r != t {
                    return Err(Error::InvalidMesh("regions block must list every triangle".into()));
                }
                let mut ids = Vec::with_capacity(r);
                for _ in 0..r {
                    let line = lines.next().ok_or_else(|| Error::InvalidMesh("truncated regions".into()))?;
                    ids.push(
                        line.parse::<usize>()
                            .map_err(|_| Error::InvalidMesh(format!("bad region id '{line}'")))?,
                    );
                }
                Some(ids)
            }
        };
        Ok((Mesh::from_triangles(nodes, tris)?, regions))
    }

    pub fn read(path: &Path) -> Result<(Mesh, Option<Vec<usize>>)> {
        Mesh::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self, regions: Option<&[usize]>) -> String {
        let mut s = String::new();
        writeln!(s, "nodes {}", self.n_nodes()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{} {}", p[0], p[1]).unwrap();
        }
        writeln!(s, "triangles {}", self.n_cells()).unwrap();
        for c in 0..self.n_cells() {
            let v = self.cell(c);
            writeln!(s, "{} {} {}", v[0], v[1], v[2]).unwrap();
        }
        if let Some(r) = regions {
            writeln!(s, "regions {}", r.len()).unwrap();
            for id in r {
                writeln!(s, "{id}").unwrap();
            }
        }
        s
    }
}

/// Structured rectangle mesh with `nx × ny` cells, each split into two right
/// triangles. The diagonal alternates in a checkerboard so the mesh is
/// mirror symmetric about every grid line.
pub fn rectangle_grid(a: f64, b: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(a > 0.0 && b > 0.0) || nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh("rectangle needs positive sides and cell counts".into()));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([a * i as f64 / nx as f64, b * j as f64 / ny as f64]);
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p01, p11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                tris.push([p00, p10, p11]);
                tris.push([p00, p11, p01]);
            } else {
                tris.push([p00, p10, p01]);
                tris.push([p10, p11, p01]);
            }
        }
    }
    Mesh::from_triangles(nodes, tris)
}

/// Disk mesh built from concentric rings with `6j` nodes on ring `j`.
/// Radial edges exist along every multiple of 60°.
pub fn disk_mesh(r: f64, rings: usize) -> Result<Mesh> {
    if !(r > 0.0) || rings == 0 {
        return Err(Error::InvalidMesh("disk needs positive radius and ring count".into()));
    }
    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for j in 1..=rings {
        ring_start.push(nodes.len());
        let rad = r * j as f64 / rings as f64;
        for t in 0..6 * j {
            let th = 2.0 * PI * t as f64 / (6 * j) as f64;
            nodes.push([rad * th.cos(), rad * th.sin()]);
        }
    }
    let ring_node = |j: usize, t: usize| -> usize {
        if j == 0 {
            0
        } else {
            ring_start[j] + t % (6 * j)
        }
    };
    let mut tris = Vec::new();
    for j in 1..=rings {
        for s in 0..6 {
            let inner = |t: usize| ring_node(j - 1, s * (j - 1) + t);
            let outer = |t: usize| ring_node(j, s * j + t);
            for t in 0..j {
                tris.push([outer(t), outer(t + 1), inner(t)]);
            }
            for t in 0..j.saturating_sub(1) {
                tris.push([inner(t), outer(t + 1), inner(t + 1)]);
            }
        }
    }
    Mesh::from_triangles(nodes, tris)
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = signed_area(q1, q2, p1);
    let d2 = signed_area(q1, q2, p2);
    let d3 = signed_area(p1, p2, q1);
    let d4 = signed_area(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], p: [f64; 2], d: f64| {
        d == 0.0
            && p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn point_in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    signed_area(a, b, p) >= 0.0 && signed_area(b, c, p) >= 0.0 && signed_area(c, a, p) >= 0.0
}

/// Simple polygon mesh: ear clipping followed by uniform refinement.
pub fn polygon_mesh(vertices: &[[f64; 2]], h: f64) -> Result<Mesh> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::InvalidMesh("polygon needs at least three vertices".into()));
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n]) {
                return Err(Error::InvalidMesh(format!("polygon edges {i} and {j} intersect")));
            }
        }
    }
    let area: f64 = (0..n)
        .map(|i| {
            let (p, q) = (vertices[i], vertices[(i + 1) % n]);
            0.5 * (p[0] * q[1] - q[0] * p[1])
        })
        .sum();
    if area.abs() < 1e-300 {
        return Err(Error::InvalidMesh("polygon has zero area".into()));
    }
    let mut ring: Vec<usize> = (0..n).collect();
    if area < 0.0 {
        ring.reverse();
    }
    let mut tris = Vec::new();
    while ring.len() > 3 {
        let m = ring.len();
        let ear = (0..m).find(|&i| {
            let (a, b, c) = (ring[(i + m - 1) % m], ring[i], ring[(i + 1) % m]);
            let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
            signed_area(pa, pb, pc) > 0.0
                && ring
                    .iter()
                    .filter(|&&v| v != a && v != b && v != c)
                    .all(|&v| !point_in_triangle(vertices[v], pa, pb, pc))
        });
        let i = ear.ok_or_else(|| Error::InvalidMesh("ear clipping failed".into()))?;
        tris.push([ring[(i + m - 1) % m], ring[i], ring[(i + 1) % m]]);
        ring.remove(i);
    }
    tris.push([ring[0], ring[1], ring[2]]);
    let mut mesh = Mesh::from_triangles(vertices.to_vec(), tris)?;
    while mesh.max_edge_length() > 1.5 * h {
        mesh = refine(&mesh)?;
    }
    Ok(mesh)
}

/// Splits every triangle into four through edge midpoints.
pub fn refine(mesh: &Mesh) -> Result<Mesh> {
    let mut nodes = mesh.nodes.clone();
    let mut mid = vec![NONE; mesh.n_facets()];
    for f in 0..mesh.n_facets() {
        let v = mesh.facet(f);
        let (a, b) = (mesh.nodes[v[0]], mesh.nodes[v[1]]);
        mid[f] = nodes.len();
        nodes.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mut tris = Vec::with_capacity(4 * mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let v = mesh.cell(c);
        let m = |a: usize, b: usize| mid[mesh.find_facet(a, b).unwrap()];
        let (m01, m12, m20) = (m(v[0], v[1]), m(v[1], v[2]), m(v[2], v[0]));
        tris.push([v[0], m01, m20]);
        tris.push([m01, v[1], m12]);
        tris.push([m20, m12, v[2]]);
        tris.push([m01, m12, m20]);
    }
    Mesh::from_triangles(nodes, tris)
}

fn aligned_count(len: f64, h: f64, align: usize) -> usize {
    let raw = (len / h - 1e-9).ceil().max(1.0) as usize;
    let align = align.max(1);
    raw.div_ceil(align) * align
}

/// Meshes a shape with target edge length `h`.
pub fn generate_mesh(shape: &Shape, h: f64) -> Result<Mesh> {
    generate_mesh_aligned(shape, h, 1)
}

/// Like [`generate_mesh`], rounding rectangle subdivision counts up to a
/// multiple of `align` so nodal lines at rational positions fall on edges.
pub fn generate_mesh_aligned(shape: &Shape, h: f64, align: usize) -> Result<Mesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidMesh("mesh size must be positive".into()));
    }
    match shape {
        Shape::Rectangle { a, b } => {
            if !(*a > 0.0 && *b > 0.0) {
                return Err(Error::InvalidMesh("rectangle sides must be positive".into()));
            }
            rectangle_grid(*a, *b, aligned_count(*a, h, align), aligned_count(*b, h, align))
        }
        Shape::Disk { r } => {
            if !(*r > 0.0) {
                return Err(Error::InvalidMesh("disk radius must be positive".into()));
            }
            disk_mesh(*r, (r / h - 1e-9).ceil().max(1.0) as usize)
        }
        Shape::Polygon(v) => polygon_mesh(v, h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_two_by_two() {
        let m = generate_mesh(&Shape::Rectangle { a: 1.0, b: 1.0 }, 0.5).unwrap();
        assert_eq!(m.n_cells(), 8);
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_facets(), 16);
        assert_eq!((0..m.n_facets()).filter(|&f| m.is_outer_facet(f)).count(), 8);
    }

    #[test]
    fn disk_has_positive_areas_and_bounded_edges() {
        let m = generate_mesh(&Shape::Disk { r: 1.0 }, 0.1).unwrap();
        assert!((0..m.n_cells()).all(|c| m.cell_measure(c) > 0.0));
        assert!(m.max_edge_length() <= 0.15 + 1e-12);
        let area: f64 = (0..m.n_cells()).map(|c| m.cell_measure(c)).sum();
        assert!((area - PI).abs() < 0.05);
    }

    #[test]
    fn self_intersecting_polygon_is_rejected() {
        let bowtie = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(polygon_mesh(&bowtie, 0.2).is_err());
    }

    #[test]
    fn l_shape_polygon() {
        let l = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let m = polygon_mesh(&l, 0.25).unwrap();
        let area: f64 = (0..m.n_cells()).map(|c| m.cell_measure(c)).sum();
        assert!((area - 3.0).abs() < 1e-12);
        assert!(m.max_edge_length() <= 0.375);
    }

    #[test]
    fn circle_is_closed() {
        let m = Mesh::circle(12).unwrap();
        assert_eq!(m.n_cells(), 12);
        assert!((0..m.n_facets()).all(|f| !m.is_outer_facet(f)));
        let len: f64 = (0..m.n_cells()).map(|c| m.cell_measure(c)).sum();
        assert!((len - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let m = rectangle_grid(2.0, 1.0, 3, 2).unwrap();
        let regions: Vec<usize> = (0..m.n_cells()).map(|c| c % 2).collect();
        let (back, r) = Mesh::parse(&m.to_text(Some(&regions))).unwrap();
        assert_eq!(back.n_cells(), m.n_cells());
        assert_eq!(r.unwrap(), regions);
    }

    #[test]
    fn regions_header_without_count() {
        let text = "nodes 4\n0 0\n1 0\n1 1\n0 1\ntriangles 2\n0 1 2\n0 2 3\nregions\n0\n1\n";
        let (m, r) = Mesh::parse(text).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(r.unwrap(), vec![0, 1]);
    }

    #[test]
    fn shape_parsing() {
        assert_eq!(Shape::parse("rect:1,2").unwrap(), Shape::Rectangle { a: 1.0, b: 2.0 });
        assert_eq!(Shape::parse("disk:1").unwrap(), Shape::Disk { r: 1.0 });
        assert!(Shape::parse("blob:1").is_err());
    }
}
