use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nodaldtn_core::dtn::index_and_kernel;
use nodaldtn_core::exact1d::{even_circle_report, interval_report_for, OneDPartition};
use nodaldtn_core::flow::{spectral_flow, FlowOptions};
use nodaldtn_core::partition::{cut_from_weights, cut_report, is_valid_cut, PartitionDocument};
use nodaldtn_core::pipeline::{
    analyze, dtn_for, dtn_matrix_csv, emit_plot_data, prepare, run_verify, select_weights,
    verify_exact_circle, verify_exact_interval, write_json, IdentityCheck, MeshSource,
    PartitionSource, PlotData, RunConfig, Status, Tolerances, WeightSource, DEFAULT_ALIGN,
};
use nodaldtn_core::{Error, Result};

/// Sign-weighted Laplacians and two-sided Dirichlet-to-Neumann maps for
/// nodal partitions.
#[derive(Parser)]
#[command(name = "nodaldtn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form record for the k-equipartition of the circle.
    Circle {
        #[arg(long)]
        k: usize,
        /// Accept even k through the periodic (bipartite) case.
        #[arg(long)]
        even: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form record for a partition of (0, L).
    Interval {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        length: f64,
        /// Interior division points, comma separated (instead of --k).
        #[arg(long, value_delimiter = ',')]
        points: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Valid cuts of a partition document.
    Cuts {
        /// Partition document (JSON).
        document: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pair compatibility, label and defect of a partition.
    Analyze(RunArgs),
    /// The DN operator on Γ with its index and kernel.
    Dtn(RunArgs),
    /// Spectral flow of the Robin family.
    Flow(RunArgs),
    /// Full verification run; writes report.json and plot data.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Closed-form 1D verification instead of a mesh run.
        #[arg(long, value_enum)]
        exact: Option<ExactKind>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        length: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExactKind {
    Circle,
    Interval,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Mesh file (nodes/triangles text format).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// rect:a,b | disk:r | poly:x,y;... | circle | interval:L
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    /// Rectangle subdivisions are rounded up to a multiple of this.
    #[arg(long, default_value_t = DEFAULT_ALIGN)]
    align: usize,
    /// Nodal partition of this Dirichlet eigenfunction (1-based).
    #[arg(long)]
    eig: Option<usize>,
    /// Separable mode m,n inside a degenerate rectangle eigenspace.
    #[arg(long, value_name = "M,N", value_delimiter = ',')]
    mode: Option<Vec<usize>>,
    /// Partition document (JSON).
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Use the regions block of the mesh file.
    #[arg(long)]
    regions: bool,
    /// k equal pieces of a circle or interval mesh.
    #[arg(long)]
    equipartition: Option<usize>,
    /// max | min | random | all | path to sign records.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long, default_value_t = FlowOptions::default().grid)]
    grid: usize,
    /// Absolute band for zero DN eigenvalues (default scales with h).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Repeat the integer outputs at half the mesh size.
    #[arg(long)]
    check_refinement: bool,
}

impl RunArgs {
    fn config(&self, default_weights: WeightSource) -> Result<RunConfig> {
        let mesh = MeshSource::from_args(self.mesh.as_deref(), self.shape.as_deref(), self.h, self.align)?;
        let sources = [self.eig.is_some(), self.partition.is_some(), self.regions, self.equipartition.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::InvalidInput(
                "give exactly one of --eig, --partition, --regions, --equipartition".into(),
            ));
        }
        let partition = if let Some(index) = self.eig {
            let mode = match self.mode.as_deref() {
                None => None,
                Some(&[m, n]) => Some([m, n]),
                Some(_) => return Err(Error::InvalidInput("--mode takes two integers m,n".into())),
            };
            PartitionSource::Eigenfunction { index, mode }
        } else if let Some(p) = &self.partition {
            PartitionSource::Document(p.clone())
        } else if self.regions {
            PartitionSource::Regions
        } else {
            PartitionSource::Equipartition(self.equipartition.unwrap_or(1))
        };
        let mut cfg = RunConfig::new(mesh, partition);
        cfg.weights = self.weights.as_deref().map_or(default_weights, WeightSource::parse);
        cfg.flow.sigma_max = self.sigma_max;
        cfg.flow.grid = self.grid;
        cfg.tol = Tolerances {
            kernel: self.tol,
            ..Tolerances::default()
        };
        cfg.out = self.out.clone();
        cfg.seed = self.seed;
        cfg.check_refinement = self.check_refinement;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("NODALDTN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

/// Pretty JSON on stdout; a closed pipe is not an error.
fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, name: &str) -> Result<()> {
    print_json(value)?;
    if let Some(dir) = out {
        write_json(&dir.join(name), value)?;
    }
    Ok(())
}

fn print_checks(checks: &[IdentityCheck]) {
    for c in checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        };
        eprintln!("{tag} {}: {}", c.name, c.detail);
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Circle { k, even, out } => {
            let r = if even && k % 2 == 0 {
                even_circle_report(k)?
            } else {
                nodaldtn_core::exact1d::circle_report(k)?
            };
            emit(&r, out.as_deref(), "circle.json")?;
            Ok(r.defect_identity && r.multiplicity_identity)
        }
        Command::Interval { k, length, points, out } => {
            let p = match (k, points.is_empty()) {
                (Some(k), true) => OneDPartition::interval_equipartition(k, length)?,
                (None, false) => OneDPartition::interval(length, points)?,
                _ => return Err(Error::InvalidInput("give either --k or --points".into())),
            };
            let r = interval_report_for(&p)?;
            emit(&r, out.as_deref(), "interval.json")?;
            Ok(!r.is_chi_nodal || r.defect == Some(r.morse as i64))
        }
        Command::Cuts { document, out } => {
            let (p, w) = PartitionDocument::parse(&std::fs::read_to_string(&document)?)?;
            let report = cut_report(&p);
            let bipartite = is_valid_cut(&p, &[]).is_some();
            let weights = w.as_ref().map(|w| {
                let cut = cut_from_weights(w);
                serde_json::json!({ "cut": cut.members, "valid": w.is_valid(&p) })
            });
            let value = serde_json::json!({
                "k": p.k(),
                "segments": p.n_segments(),
                "bipartite": bipartite,
                "minimal_cut": report.minimal,
                "smallest_cut": report.smallest,
                "exhaustive": report.exhaustive,
                "weights": weights,
            });
            emit(&value, out.as_deref(), "cuts.json")?;
            Ok(true)
        }
        Command::Analyze(args) => {
            let cfg = args.config(WeightSource::MaximalCut)?;
            let prep = prepare(&cfg)?;
            let analysis = analyze(&prep, &cfg.tol)?;
            let weights = select_weights(&prep, &analysis.traversal, &cfg.weights, cfg.seed)?;
            let value = serde_json::json!({
                "eigen": prep.eigen,
                "report": analysis.report,
                "weights": weights[0].0,
                "cut": cut_from_weights(&weights[0].1).members,
            });
            emit(&value, cfg.out.as_deref(), "analysis.json")?;
            if let Some(dir) = &cfg.out {
                emit_plot_data(&PlotData { partition: Some((&prep.mesh, &prep.partition)), ..Default::default() }, dir)?;
            }
            Ok(true)
        }
        Command::Dtn(args) => {
            let mut cfg = args.config(WeightSource::MaximalCut)?;
            cfg.run_flow = false;
            if matches!(cfg.weights, WeightSource::All) {
                cfg.weights = WeightSource::MaximalCut;
            }
            let out = run_verify(&cfg)?;
            let r = &out.report;
            let value = serde_json::json!({
                "schema": r.schema,
                "k": r.k,
                "label": r.label,
                "defect": r.defect,
                "multiplicity": r.multiplicity,
                "is_chi_nodal": r.is_chi_nodal,
                "dtn": r.dtn,
                "identities": r.identities,
            });
            emit(&value, cfg.out.as_deref(), "dtn.json")?;
            if let (Some(dir), Some(d)) = (&cfg.out, &out.dtn) {
                std::fs::write(dir.join("dtn_matrix.csv"), dtn_matrix_csv(d))?;
            }
            print_checks(&r.identities);
            Ok(r.passed)
        }
        Command::Flow(args) => {
            let cfg = args.config(WeightSource::MaximalCut)?;
            let prep = prepare(&cfg)?;
            let analysis = analyze(&prep, &cfg.tol)?;
            if !analysis.report.is_chi_nodal {
                return Err(Error::NotChiNodal(analysis.report.reasons.join("; ")));
            }
            let weights = select_weights(&prep, &analysis.traversal, &cfg.weights, cfg.seed)?;
            let (_, dtn) = dtn_for(&prep, &analysis, &weights[0].1, &cfg.tol)?;
            let ik = index_and_kernel(&dtn);
            let (report, set) = spectral_flow(&analysis.space, analysis.phi.clone(), analysis.report.lambda_star, Some(&dtn), &cfg.flow)?;
            let pass = report.morse_check == Some(true);
            let value = serde_json::json!({
                "crossings": report.crossings.count,
                "morse": ik.morse,
                "morse_check": if pass { "pass" } else { "fail" },
                "flow": report,
            });
            emit(&value, cfg.out.as_deref(), "flow.json")?;
            if let Some(dir) = &cfg.out {
                emit_plot_data(&PlotData { branches: Some(&set), ..Default::default() }, dir)?;
            }
            Ok(pass)
        }
        Command::Verify { run: args, exact, k, length } => {
            if let Some(kind) = exact {
                let k = k.ok_or_else(|| Error::InvalidInput("--exact needs --k".into()))?;
                let r = match kind {
                    ExactKind::Circle => verify_exact_circle(k)?,
                    ExactKind::Interval => verify_exact_interval(k, length)?,
                };
                emit(&r, args.out.as_deref(), "report.json")?;
                print_checks(&r.identities);
                return Ok(r.passed);
            }
            let cfg = args.config(WeightSource::All)?;
            let out = run_verify(&cfg)?;
            print_json(&out.report)?;
            print_checks(&out.report.identities);
            Ok(out.report.passed)
        }
    }
}
