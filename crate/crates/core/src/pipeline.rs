//! End-to-end runs: mesh, eigenfunction, partition, weights, DN operator,
//! spectral flow, and the reports and CSV files written from them.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dtn::{index_and_kernel, DtnOperator, DtnOptions, DtnProblem};
use crate::error::{Error, Result};
use crate::exact1d::{circle_report, interval_report, CircleReport, IntervalReport};
use crate::fem::{assemble_dirichlet, interpolate, SparsePencil};
use crate::flow::{branches_csv, spectral_flow, FlowBranchSet, FlowOptions, FlowReport};
use crate::linalg::eigen::{clusters, CLUSTER_TOL};
use crate::linalg::{EigenPair, Window};
use crate::mesh::{generate_mesh_aligned, Mesh, Shape, Topology};
use crate::nodal::{extract_nodal_partition, nodal_values, partition_from_labels};
use crate::partition::{
    cut_from_weights, cut_report, maximal_cut_weights, traversal_directions, weight_equivalence,
    weights_for_cut, weights_from_orientations, Partition, PartitionDocument, SegmentGeometry,
    WeightAssignment,
};
use crate::spcc::{report_for, ChiNodalReport, NodalSetup, SpccOptions};
use crate::weighted::{GluedSpace, Sigma};

pub const REPORT_SCHEMA: &str = "nodaldtn.report/1";

/// Default alignment of rectangle subdivisions.
pub const DEFAULT_ALIGN: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    Shape { shape: Shape, h: f64, align: usize },
    Circle { n: usize },
    Interval { length: f64, n: usize },
}

impl MeshSource {
    /// From CLI-style arguments. Besides the planar shapes, `circle` and
    /// `interval:L` give 1D meshes with about `length / h` cells.
    pub fn from_args(mesh: Option<&Path>, shape: Option<&str>, h: Option<f64>, align: usize) -> Result<Self> {
        match (mesh, shape) {
            (Some(_), Some(_)) => Err(Error::InvalidInput("give either a mesh file or a shape, not both".into())),
            (None, None) => Err(Error::InvalidInput("a mesh file or a shape is required".into())),
            (Some(path), None) => Ok(MeshSource::File(path.to_path_buf())),
            (None, Some(s)) => {
                let h = h.ok_or_else(|| Error::InvalidInput("a shape needs a mesh size".into()))?;
                if !(h > 0.0) || !h.is_finite() {
                    return Err(Error::InvalidInput(format!("mesh size {h} must be positive")));
                }
                let cells = |len: f64| ((len / h - 1e-9).ceil().max(1.0) as usize).div_ceil(align.max(1)) * align.max(1);
                if s == "circle" {
                    return Ok(MeshSource::Circle { n: cells(2.0 * PI).max(3) });
                }
                if let Some(rest) = s.strip_prefix("interval:") {
                    let length: f64 = rest
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad interval length '{rest}'")))?;
                    if !(length > 0.0) {
                        return Err(Error::InvalidInput("interval length must be positive".into()));
                    }
                    return Ok(MeshSource::Interval { length, n: cells(length) });
                }
                Ok(MeshSource::Shape {
                    shape: Shape::parse(s)?,
                    h,
                    align,
                })
            }
        }
    }

    pub fn build(&self) -> Result<(Mesh, Option<Vec<usize>>)> {
        match self {
            MeshSource::File(path) => Mesh::read(path),
            MeshSource::Shape { shape, h, align } => Ok((generate_mesh_aligned(shape, *h, *align)?, None)),
            MeshSource::Circle { n } => Ok((Mesh::circle(*n)?, None)),
            MeshSource::Interval { length, n } => Ok((Mesh::interval(*length, *n)?, None)),
        }
    }

    /// The same source with half the mesh size; files cannot be refined.
    pub fn refined(&self) -> Option<MeshSource> {
        match self {
            MeshSource::File(_) => None,
            MeshSource::Shape { shape, h, align } => Some(MeshSource::Shape {
                shape: shape.clone(),
                h: h / 2.0,
                align: *align,
            }),
            MeshSource::Circle { n } => Some(MeshSource::Circle { n: 2 * n }),
            MeshSource::Interval { length, n } => Some(MeshSource::Interval { length: *length, n: 2 * n }),
        }
    }

    /// Rounds 1D cell counts up to a multiple of `k`.
    fn with_multiple(&self, k: usize) -> MeshSource {
        let up = |n: usize| n.div_ceil(k) * k;
        match self {
            MeshSource::Circle { n } => MeshSource::Circle { n: up(*n) },
            MeshSource::Interval { length, n } => MeshSource::Interval { length: *length, n: up(*n) },
            other => other.clone(),
        }
    }

    fn describe(&self) -> String {
        match self {
            MeshSource::File(p) => format!("mesh file {}", p.display()),
            MeshSource::Shape { shape, h, .. } => format!("{shape:?} with h = {h}"),
            MeshSource::Circle { n } => format!("circle with {n} cells"),
            MeshSource::Interval { length, n } => format!("interval (0, {length}) with {n} cells"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionSource {
    /// Nodal partition of the `index`-th Dirichlet eigenfunction (1-based).
    /// `mode` picks a separable `(m, n)` mode inside a degenerate rectangle
    /// eigenspace.
    Eigenfunction { index: usize, mode: Option<[usize; 2]> },
    /// A partition document (JSON file).
    Document(PathBuf),
    /// The `regions` block of the mesh file.
    Regions,
    /// `k` equal subintervals of a 1D mesh.
    Equipartition(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    MaximalCut,
    MinimalCut,
    /// Random valid weights from random orientations.
    Random,
    /// Sign records from a JSON file (a partition document or a bare list).
    Explicit(PathBuf),
    /// Maximal cut for the main run, then the χ-independence comparison
    /// against minimal-cut and random weights.
    All,
}

impl WeightSource {
    pub fn parse(s: &str) -> WeightSource {
        match s {
            "max" | "maximal" | "maximal-cut" => WeightSource::MaximalCut,
            "min" | "minimal" | "minimal-cut" => WeightSource::MinimalCut,
            "random" => WeightSource::Random,
            "all" => WeightSource::All,
            path => WeightSource::Explicit(PathBuf::from(path)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub spcc: SpccOptions,
    /// Absolute DN kernel band; `None` uses the mesh-size rule.
    pub kernel: Option<f64>,
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            spcc: SpccOptions::default(),
            kernel: None,
            rank: DtnOptions::default().rank_tol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub partition: PartitionSource,
    pub weights: WeightSource,
    pub flow: FlowOptions,
    pub tol: Tolerances,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub run_flow: bool,
    /// Repeat the integer outputs at half the mesh size.
    pub check_refinement: bool,
}

impl RunConfig {
    pub fn new(mesh: MeshSource, partition: PartitionSource) -> Self {
        RunConfig {
            mesh,
            partition,
            weights: WeightSource::All,
            flow: FlowOptions::default(),
            tol: Tolerances::default(),
            out: None,
            seed: 1,
            run_flow: true,
            check_refinement: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tol;
        let positive = [t.spcc.energy_tol, t.spcc.flux_tol, t.spcc.eig_tol, t.rank, self.flow.band, self.flow.sigma_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || t.kernel.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.flow.sigma_max.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::InvalidInput("sigma-max must be positive".into()));
        }
        if self.flow.grid < 2 {
            return Err(Error::InvalidInput("the sigma grid needs at least 2 points".into()));
        }
        match self.partition {
            PartitionSource::Eigenfunction { index: 0, .. } => Err(Error::InvalidInput("eigenfunction index is 1-based".into())),
            PartitionSource::Equipartition(0) => Err(Error::InvalidInput("k must be positive".into())),
            PartitionSource::Equipartition(_) if matches!(self.mesh, MeshSource::File(_) | MeshSource::Shape { .. }) => {
                Err(Error::InvalidInput("equipartitions need a circle or interval mesh".into()))
            }
            _ => Ok(()),
        }
    }
}

/// How a degenerate eigenspace was resolved.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub index: usize,
    pub value: f64,
    pub cluster: Vec<f64>,
    /// `solver` for simple eigenvalues, or the closed-form mode projected
    /// onto the computed eigenspace.
    pub selection: String,
}

/// Mesh and partition ready for analysis.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mesh: Mesh,
    pub partition: Partition,
    pub document_weights: Option<WeightAssignment>,
    pub eigen: Option<EigenSummary>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let source = match cfg.partition {
        PartitionSource::Equipartition(k) => cfg.mesh.with_multiple(k),
        _ => cfg.mesh.clone(),
    };
    let (mesh, regions) = source.build()?;
    let (partition, document_weights, eigen) = match &cfg.partition {
        PartitionSource::Document(path) => {
            let (p, w) = PartitionDocument::parse(&fs::read_to_string(path)?)?;
            (p, w, None)
        }
        PartitionSource::Regions => {
            let labels = regions.ok_or_else(|| Error::InvalidInput("the mesh file has no regions block".into()))?;
            (partition_from_labels(&mesh, &labels)?, None, None)
        }
        PartitionSource::Equipartition(k) => {
            let n = mesh.n_cells();
            let labels: Vec<usize> = (0..n).map(|c| c * k / n).collect();
            (partition_from_labels(&mesh, &labels)?, None, None)
        }
        PartitionSource::Eigenfunction { index, mode } => {
            let (values, summary) = eigenfunction(&mesh, &source, *index, *mode)?;
            (extract_nodal_partition(&mesh, &values)?, None, Some(summary))
        }
    };
    Ok(Prepared {
        mesh,
        partition,
        document_weights,
        eigen,
    })
}

/// Nodal values of the `index`-th Dirichlet eigenfunction, with positive
/// mean.
fn eigenfunction(mesh: &Mesh, source: &MeshSource, index: usize, mode: Option<[usize; 2]>) -> Result<(Vec<f64>, EigenSummary)> {
    let all: Vec<usize> = (0..mesh.n_cells()).collect();
    let pencil = assemble_dirichlet(mesh, &all)?;
    let want = (index + 4).min(pencil.dim());
    if index > want {
        return Err(Error::InvalidInput(format!("the mesh has only {} dofs", pencil.dim())));
    }
    let pairs = pencil.eigensolve(Window::Lowest(want))?;
    let values: Vec<f64> = pairs.iter().map(|p| p.value).collect();
    let cluster = clusters(&values)
        .into_iter()
        .find(|r| r.contains(&(index - 1)))
        .unwrap_or(index - 1..index);
    let complete = cluster.end < values.len();
    let mut selection = "solver".to_string();
    let mut x = pairs[index - 1].vector.clone();
    if cluster.len() > 1 {
        match closed_form_mode(mesh, source, &values[cluster.clone()], index - 1 - cluster.start, mode) {
            Some((label, f)) if complete => {
                let target = interpolate(mesh, &pencil.dof_nodes, f);
                x = project(&pencil, &pairs[cluster.clone()], &target);
                selection = label;
            }
            _ => selection = "solver (degenerate eigenspace, no closed form)".into(),
        }
    }
    let weights = pencil.mass.mul_vec(&vec![1.0; x.len()]);
    if x.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let summary = EigenSummary {
        index,
        value: values[index - 1],
        cluster: values[cluster].to_vec(),
        selection,
    };
    Ok((nodal_values(mesh.n_nodes(), &pencil.dof_nodes, &x), summary))
}

type ModeFn = Box<dyn Fn([f64; 2]) -> f64>;

/// Separable `sin(mπx/a) sin(nπy/b)` modes of a rectangle whose closed-form
/// eigenvalue matches the cluster, ordered by `m`.
fn closed_form_mode(mesh: &Mesh, source: &MeshSource, cluster: &[f64], position: usize, mode: Option<[usize; 2]>) -> Option<(String, ModeFn)> {
    let MeshSource::Shape { shape: Shape::Rectangle { a, b }, .. } = source else {
        return None;
    };
    let (a, b) = (*a, *b);
    debug_assert_eq!(mesh.topology(), Topology::Triangle);
    let lambda = cluster.iter().sum::<f64>() / cluster.len() as f64;
    let exact = |m: usize, n: usize| PI * PI * ((m * m) as f64 / (a * a) + (n * n) as f64 / (b * b));
    let (m, n) = match mode {
        Some([m, n]) => (m, n),
        None => {
            let reach = ((lambda * 2.0).sqrt() * a.max(b) / PI).ceil() as usize + 1;
            let mut modes: Vec<(usize, usize, f64)> = (1..=reach)
                .flat_map(|m| (1..=reach).map(move |n| (m, n)))
                .map(|(m, n)| (m, n, exact(m, n)))
                .collect();
            modes.sort_by(|x, y| x.2.total_cmp(&y.2));
            // the group of closed-form values nearest the cluster
            let nearest = modes.iter().min_by(|x, y| (x.2 - lambda).abs().total_cmp(&(y.2 - lambda).abs()))?.2;
            let mut group: Vec<(usize, usize)> = modes
                .iter()
                .filter(|t| (t.2 - nearest).abs() <= CLUSTER_TOL * (1.0 + nearest))
                .map(|t| (t.0, t.1))
                .collect();
            if group.len() != cluster.len() {
                return None;
            }
            group.sort();
            group[position]
        }
    };
    let f: ModeFn = Box::new(move |p: [f64; 2]| (m as f64 * PI * p[0] / a).sin() * (n as f64 * PI * p[1] / b).sin());
    Some((format!("closed-form mode ({m}, {n}) projected onto the eigenspace"), f))
}

/// M-orthogonal projection of `target` onto the span of `pairs`.
fn project(pencil: &SparsePencil, pairs: &[EigenPair], target: &[f64]) -> Vec<f64> {
    let mt = pencil.mass.mul_vec(target);
    let mut x = vec![0.0; target.len()];
    for p in pairs {
        let c: f64 = p.vector.iter().zip(&mt).map(|(a, b)| a * b).sum();
        for (xi, vi) in x.iter_mut().zip(&p.vector) {
            *xi += c * vi;
        }
    }
    x
}

/// SPCC analysis of a prepared partition.
pub struct Analysis {
    pub setup: NodalSetup,
    pub report: ChiNodalReport,
    /// Glued space for maximal-cut weights.
    pub space: GluedSpace,
    pub phi: Vec<f64>,
    pub traversal: Vec<i8>,
}

pub fn analyze(prep: &Prepared, tol: &Tolerances) -> Result<Analysis> {
    let setup = NodalSetup::new(&prep.mesh, &prep.partition)?;
    let (report, space, phi) = report_for(&prep.mesh, &prep.partition, &setup, &tol.spcc)?;
    let traversal = traversal_directions(&prep.partition, Some(&prep.mesh))?;
    Ok(Analysis {
        setup,
        report,
        space,
        phi,
        traversal,
    })
}

/// Named weight assignments selected by `source`; the first one drives the
/// main run.
pub fn select_weights(prep: &Prepared, traversal: &[i8], source: &WeightSource, seed: u64) -> Result<Vec<(String, WeightAssignment)>> {
    let p = &prep.partition;
    let maximal = || ("maximal-cut".to_string(), maximal_cut_weights(p, traversal));
    let minimal = || -> Result<(String, WeightAssignment)> {
        let cut = cut_report(p).minimal;
        let w = weights_for_cut(p, traversal, &cut.members)
            .ok_or_else(|| Error::InvalidWeights("minimal cut is not valid".into()))?;
        Ok(("minimal-cut".to_string(), w))
    };
    let random = || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sign = || if rng.random::<bool>() { 1 } else { -1 };
        let domain: Vec<i8> = (0..p.k()).map(|_| sign()).collect();
        let segment: Vec<i8> = (0..p.n_segments()).map(|_| sign()).collect();
        ("random".to_string(), weights_from_orientations(p, traversal, &domain, &segment))
    };
    Ok(match source {
        WeightSource::MaximalCut => vec![maximal()],
        WeightSource::MinimalCut => vec![minimal()?],
        WeightSource::Random => vec![random()],
        WeightSource::All => vec![maximal(), minimal()?, random()],
        WeightSource::Explicit(path) => {
            let w = read_weights(p, &fs::read_to_string(path)?)?;
            if !w.is_valid(p) {
                return Err(Error::InvalidWeights("the given weights do not come from orientations".into()));
            }
            vec![("explicit".to_string(), w)]
        }
    })
}

/// Sign records from either a partition document or a bare record list.
pub fn read_weights(p: &Partition, text: &str) -> Result<WeightAssignment> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let records = match value.get("signs") {
        Some(s) => s.clone(),
        None => value,
    };
    let records: Vec<crate::partition::SignRecord> = serde_json::from_value(records)?;
    WeightAssignment::from_records(p, &records)
}

/// DN operator for one weight choice, with the kernel band overridden when
/// requested.
pub fn dtn_for<'a>(prep: &'a Prepared, analysis: &'a Analysis, w: &WeightAssignment, tol: &Tolerances) -> Result<(DtnProblem<'a>, DtnOperator)> {
    let opts = DtnOptions {
        rank_tol: tol.rank,
        ..DtnOptions::default()
    };
    let problem = DtnProblem::new(&prep.mesh, &prep.partition, &analysis.setup, w, opts)?;
    let mut dtn = problem.assemble()?;
    if let Some(k) = tol.kernel {
        dtn.tol_kernel = k;
    }
    Ok((problem, dtn))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl IdentityCheck {
    fn new(name: &str, ok: bool, detail: String) -> Self {
        IdentityCheck {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    fn inconclusive(name: &str, detail: String) -> Self {
        IdentityCheck {
            name: name.into(),
            status: Status::Inconclusive,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshSummary {
    pub source: String,
    pub dim: usize,
    pub nodes: usize,
    pub cells: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightRun {
    pub name: String,
    pub cut: Vec<usize>,
    pub morse: usize,
    pub kernel_dim: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiIndependence {
    pub runs: Vec<WeightRun>,
    pub consistent: bool,
    /// Flipping one subdomain's signs leaves the DN matrix bit-identical.
    pub domain_equivalent_identical: bool,
    /// Negating both signs on one segment leaves the weighted operator
    /// bit-identical.
    pub edge_equivalent_identical: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicalSummary {
    pub sum_d: f64,
    pub d_norm: f64,
    pub constant_residual: f64,
    pub second_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementCheck {
    pub mesh: MeshSummary,
    pub k: usize,
    pub label: Option<usize>,
    pub defect: Option<i64>,
    pub morse: Option<usize>,
    pub kernel_dim: Option<usize>,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DtnSummary {
    pub weights: String,
    pub dim_s: usize,
    pub eigenvalues: Vec<f64>,
    pub morse: usize,
    pub kernel_dim: usize,
    pub tol_kernel: f64,
    pub asymmetry: f64,
    pub canonical: Option<CanonicalSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub schema: String,
    pub mesh: MeshSummary,
    pub eigen: Option<EigenSummary>,
    pub k: usize,
    pub is_chi_nodal: bool,
    pub chi_nodal: ChiNodalReport,
    pub lambda_star: f64,
    pub label: Option<usize>,
    pub defect: Option<i64>,
    pub multiplicity: Option<usize>,
    pub dtn: Option<DtnSummary>,
    pub flow: Option<FlowReport>,
    pub chi_independence: Option<ChiIndependence>,
    pub refinement: Option<RefinementCheck>,
    pub identities: Vec<IdentityCheck>,
    pub passed: bool,
}

/// Everything produced by a verification run.
pub struct VerifyOutcome {
    pub report: VerifyReport,
    pub prepared: Prepared,
    pub dtn: Option<DtnOperator>,
    pub branches: Option<FlowBranchSet>,
}

fn mesh_summary(source: &MeshSource, mesh: &Mesh) -> MeshSummary {
    MeshSummary {
        source: source.describe(),
        dim: mesh.dim(),
        nodes: mesh.n_nodes(),
        cells: mesh.n_cells(),
        h: mesh.max_edge_length(),
    }
}

/// Runs the whole chain and assembles the report; writes files when
/// `cfg.out` is set.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyOutcome> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let analysis = analyze(&prepared, &cfg.tol)?;
    let chi = &analysis.report;
    let mut identities = Vec::new();
    let mut dtn_summary = None;
    let mut dtn_out = None;
    let mut flow_out = None;
    let mut branches = None;
    let mut independence = None;

    if !chi.is_chi_nodal {
        let why = format!("partition is not chi-nodal: {}", chi.reasons.join("; "));
        for name in ["defect_equals_morse", "multiplicity_equals_kernel_plus_one"] {
            identities.push(IdentityCheck::inconclusive(name, why.clone()));
        }
    } else {
        let weights = select_weights(&prepared, &analysis.traversal, &cfg.weights, cfg.seed)?;
        let (name, w) = &weights[0];
        let (problem, dtn) = dtn_for(&prepared, &analysis, w, &cfg.tol)?;
        let ik = index_and_kernel(&dtn);
        let canonical = match problem.subspace.dim() {
            0 => None,
            _ => {
                let g: Vec<f64> = problem.subspace.basis.column(0).iter().copied().collect();
                let sol = problem.canonical_solution(&g)?;
                let eig = sol.system.eigenvalues();
                Some(CanonicalSummary {
                    sum_d: sol.system.sum_d(),
                    d_norm: sol.system.d.norm(),
                    constant_residual: sol.system.constant_residual(),
                    second_eigenvalue: eig.get(1).copied().unwrap_or(0.0),
                })
            }
        };
        let defect = chi.defect.unwrap_or(0);
        let multiplicity = chi.multiplicity.unwrap_or(0);
        identities.push(IdentityCheck::new(
            "defect_equals_morse",
            defect == ik.morse as i64,
            format!("defect {defect}, Morse index {}", ik.morse),
        ));
        identities.push(IdentityCheck::new(
            "multiplicity_equals_kernel_plus_one",
            multiplicity == ik.kernel_dim + 1,
            format!("multiplicity {multiplicity}, kernel dimension {}", ik.kernel_dim),
        ));
        if let Some(c) = &canonical {
            identities.push(IdentityCheck::new(
                "canonical_sum_d_zero",
                c.sum_d.abs() <= 1e-8 * c.d_norm.max(f64::MIN_POSITIVE) || c.d_norm == 0.0,
                format!("sum d = {:.3e}, |d| = {:.3e}", c.sum_d, c.d_norm),
            ));
        }

        if weights.len() > 1 {
            let ci = chi_independence(&prepared, &analysis, &weights, &cfg.tol, &dtn)?;
            identities.push(IdentityCheck::new(
                "chi_independence",
                ci.consistent && ci.domain_equivalent_identical && ci.edge_equivalent_identical,
                format!(
                    "{} weight choices agree: {}, domain-equivalent identical: {}, edge-equivalent identical: {}",
                    ci.runs.len(),
                    ci.consistent,
                    ci.domain_equivalent_identical,
                    ci.edge_equivalent_identical
                ),
            ));
            independence = Some(ci);
        }

        if cfg.run_flow {
            let (report, set) = spectral_flow(&analysis.space, analysis.phi.clone(), chi.lambda_star, Some(&dtn), &cfg.flow)?;
            let c = &report.crossings;
            if c.inconclusive.is_empty() {
                identities.push(IdentityCheck::new(
                    "crossings_equal_morse",
                    c.count == ik.morse,
                    format!("{} crossings, Morse index {}", c.count, ik.morse),
                ));
            } else {
                identities.push(IdentityCheck::inconclusive(
                    "crossings_equal_morse",
                    format!("crossing search inconclusive on branches {:?}", c.inconclusive),
                ));
            }
            let label = chi.label.unwrap_or(1);
            identities.push(IdentityCheck::new(
                "branches_below_at_zero",
                report.below_at_zero + 1 == label,
                format!("{} branches below λ* at σ = 0, label {label}", report.below_at_zero),
            ));
            identities.push(IdentityCheck::new(
                "branch_monotonicity",
                report.monotonicity_violation <= 1e-8,
                format!("largest decrease {:.3e}", report.monotonicity_violation),
            ));
            let dual_ok = report.duality.iter().all(|d| d.holds);
            identities.push(IdentityCheck::new(
                "robin_dtn_duality",
                dual_ok,
                format!("{} negative DN eigenvalues checked", report.duality.len()),
            ));
            flow_out = Some(report);
            branches = Some(set);
        }

        dtn_summary = Some(DtnSummary {
            weights: name.clone(),
            dim_s: problem.subspace.dim(),
            eigenvalues: dtn.eigenvalues.clone(),
            morse: ik.morse,
            kernel_dim: ik.kernel_dim,
            tol_kernel: dtn.tol_kernel,
            asymmetry: dtn.asymmetry,
            canonical,
        });
        dtn_out = Some(dtn);
    }

    let refinement = if cfg.check_refinement {
        let r = refinement_check(cfg, chi, dtn_summary.as_ref())?;
        match &r {
            Some(r) => identities.push(IdentityCheck::new(
                "refinement_stability",
                r.stable,
                format!("integers at h = {:.4e}: k {}, label {:?}, morse {:?}, kernel {:?}", r.mesh.h, r.k, r.label, r.morse, r.kernel_dim),
            )),
            None => identities.push(IdentityCheck::inconclusive(
                "refinement_stability",
                "this mesh source cannot be refined".into(),
            )),
        }
        r
    } else {
        None
    };

    let passed = identities.iter().all(|c| c.status != Status::Fail);
    let report = VerifyReport {
        schema: REPORT_SCHEMA.into(),
        mesh: mesh_summary(&cfg.mesh, &prepared.mesh),
        eigen: prepared.eigen.clone(),
        k: prepared.partition.k(),
        is_chi_nodal: chi.is_chi_nodal,
        chi_nodal: chi.clone(),
        lambda_star: chi.lambda_star,
        label: chi.label,
        defect: chi.defect,
        multiplicity: chi.multiplicity,
        dtn: dtn_summary,
        flow: flow_out,
        chi_independence: independence,
        refinement,
        identities,
        passed,
    };
    let outcome = VerifyOutcome {
        report,
        prepared,
        dtn: dtn_out,
        branches,
    };
    if let Some(dir) = &cfg.out {
        write_json(&dir.join("report.json"), &outcome.report)?;
        emit_plot_data(
            &PlotData {
                branches: outcome.branches.as_ref(),
                dtn: outcome.dtn.as_ref(),
                partition: Some((&outcome.prepared.mesh, &outcome.prepared.partition)),
            },
            dir,
        )?;
    }
    Ok(outcome)
}

fn chi_independence(
    prep: &Prepared,
    analysis: &Analysis,
    weights: &[(String, WeightAssignment)],
    tol: &Tolerances,
    primary: &DtnOperator,
) -> Result<ChiIndependence> {
    let p = &prep.partition;
    let mut runs = Vec::new();
    for (i, (name, w)) in weights.iter().enumerate() {
        let ik = if i == 0 {
            index_and_kernel(primary)
        } else {
            index_and_kernel(&dtn_for(prep, analysis, w, tol)?.1)
        };
        runs.push(WeightRun {
            name: name.clone(),
            cut: cut_from_weights(w).members,
            morse: ik.morse,
            kernel_dim: ik.kernel_dim,
        });
    }
    let consistent = runs.windows(2).all(|r| r[0].morse == r[1].morse && r[0].kernel_dim == r[1].kernel_dim);

    let base = &weights[0].1;
    let flipped = base.flip_subdomain(p, 0);
    debug_assert!(weight_equivalence(p, base, &flipped).domain);
    let (_, flipped_dtn) = dtn_for(prep, analysis, &flipped, tol)?;
    let domain_equivalent_identical = flipped_dtn.matrix == primary.matrix;

    let edge_equivalent_identical = match p.n_segments() {
        0 => true,
        _ => {
            let mut negated = base.clone();
            negated.signs[0] = [-negated.signs[0][0], -negated.signs[0][1]];
            let a = GluedSpace::new(&prep.mesh, p, base)?.pencil(Sigma::Finite(0.0));
            let b = GluedSpace::new(&prep.mesh, p, &negated)?.pencil(Sigma::Finite(0.0));
            a.stiffness == b.stiffness && a.mass == b.mass
        }
    };
    Ok(ChiIndependence {
        runs,
        consistent,
        domain_equivalent_identical,
        edge_equivalent_identical,
    })
}

fn refinement_check(cfg: &RunConfig, chi: &ChiNodalReport, dtn: Option<&DtnSummary>) -> Result<Option<RefinementCheck>> {
    let Some(mesh) = cfg.mesh.refined() else {
        return Ok(None);
    };
    if matches!(cfg.partition, PartitionSource::Document(_) | PartitionSource::Regions) {
        return Ok(None);
    }
    let fine = RunConfig {
        mesh,
        weights: WeightSource::MaximalCut,
        run_flow: false,
        check_refinement: false,
        out: None,
        ..cfg.clone()
    };
    let prep = prepare(&fine)?;
    let analysis = analyze(&prep, &fine.tol)?;
    let r = &analysis.report;
    let (morse, kernel_dim) = if r.is_chi_nodal {
        let w = maximal_cut_weights(&prep.partition, &analysis.traversal);
        let ik = index_and_kernel(&dtn_for(&prep, &analysis, &w, &fine.tol)?.1);
        (Some(ik.morse), Some(ik.kernel_dim))
    } else {
        (None, None)
    };
    let stable = r.k == chi.k
        && r.label == chi.label
        && r.defect == chi.defect
        && morse == dtn.map(|d| d.morse)
        && kernel_dim == dtn.map(|d| d.kernel_dim);
    Ok(Some(RefinementCheck {
        mesh: mesh_summary(&fine.mesh, &prep.mesh),
        k: r.k,
        label: r.label,
        defect: r.defect,
        morse,
        kernel_dim,
        stable,
    }))
}

/// Closed-form verification of a 1D equipartition.
#[derive(Debug, Clone, Serialize)]
pub struct ExactReport {
    pub schema: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circle: Option<CircleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<IntervalReport>,
    pub identities: Vec<IdentityCheck>,
    pub passed: bool,
}

pub fn verify_exact_circle(k: usize) -> Result<ExactReport> {
    let r = circle_report(k)?;
    let identities = vec![
        IdentityCheck::new(
            "defect_equals_morse",
            r.defect_identity,
            format!("defect {}, Morse index {}", r.defect, r.morse),
        ),
        IdentityCheck::new(
            "multiplicity_equals_kernel_plus_one",
            r.multiplicity_identity,
            format!("multiplicity {}, kernel dimension {}", r.multiplicity, r.kernel_dim),
        ),
        IdentityCheck::new(
            "canonical_constant_kernel",
            r.canonical_constant_residual == 0.0 && r.canonical_second_eigenvalue > 0.0,
            format!("|A·1| = {:.1e}, second eigenvalue {:.3}", r.canonical_constant_residual, r.canonical_second_eigenvalue),
        ),
    ];
    let passed = identities.iter().all(|c| c.status != Status::Fail);
    Ok(ExactReport {
        schema: REPORT_SCHEMA.into(),
        circle: Some(r),
        interval: None,
        identities,
        passed,
    })
}

pub fn verify_exact_interval(k: usize, length: f64) -> Result<ExactReport> {
    let r = interval_report(k, length)?;
    let identities = vec![
        IdentityCheck::new(
            "defect_equals_morse",
            r.defect == Some(r.morse as i64),
            format!("defect {:?}, Morse index {}", r.defect, r.morse),
        ),
        IdentityCheck::new(
            "simple_eigenvalue",
            r.simple == Some(true) && r.kernel_dim == 0,
            format!("simple {:?}, kernel dimension {}", r.simple, r.kernel_dim),
        ),
    ];
    let passed = identities.iter().all(|c| c.status != Status::Fail);
    Ok(ExactReport {
        schema: REPORT_SCHEMA.into(),
        circle: None,
        interval: Some(r),
        identities,
        passed,
    })
}

/// Results to be written as CSV.
#[derive(Default)]
pub struct PlotData<'a> {
    pub branches: Option<&'a FlowBranchSet>,
    pub dtn: Option<&'a DtnOperator>,
    pub partition: Option<(&'a Mesh, &'a Partition)>,
}

/// Writes `branches.csv`, `dtn_spectrum.csv` and `partition.csv` for the
/// parts present; returns the written paths.
pub fn emit_plot_data(data: &PlotData, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    if let Some(set) = data.branches {
        put("branches.csv", branches_csv(set))?;
    }
    if let Some(dtn) = data.dtn {
        put("dtn_spectrum.csv", dtn_spectrum_csv(&dtn.eigenvalues))?;
    }
    if let Some((mesh, p)) = data.partition {
        put("partition.csv", partition_csv(mesh, p))?;
    }
    Ok(written)
}

/// `index,eigenvalue`, ascending; just the header when empty.
pub fn dtn_spectrum_csv(eigenvalues: &[f64]) -> String {
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = String::from("index,eigenvalue\n");
    for (i, v) in sorted.iter().enumerate() {
        out.push_str(&format!("{},{v:.17e}\n", i + 1));
    }
    out
}

/// The DN matrix, one row per line.
pub fn dtn_matrix_csv(dtn: &DtnOperator) -> String {
    let mut out = String::new();
    for r in 0..dtn.matrix.nrows() {
        let row: Vec<String> = dtn.matrix.row(r).iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One line per segment piece: `segment,left,right,x0,y0,x1,y1`.
pub fn partition_csv(mesh: &Mesh, p: &Partition) -> String {
    let mut out = String::from("segment,left,right,x0,y0,x1,y1\n");
    for s in &p.segments {
        match &s.geometry {
            SegmentGeometry::Edges(edges) => {
                for &[a, b] in edges {
                    let (pa, pb) = (mesh.node(a), mesh.node(b));
                    out.push_str(&format!("{},{},{},{},{},{},{}\n", s.id, s.left, s.right, pa[0], pa[1], pb[0], pb[1]));
                }
            }
            SegmentGeometry::Point(x) => out.push_str(&format!("{},{},{},{x},0,{x},0\n", s.id, s.left, s.right)),
            SegmentGeometry::Abstract => out.push_str(&format!("{},{},{},,,,\n", s.id, s.left, s.right)),
        }
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
