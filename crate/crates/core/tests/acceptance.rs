//! Acceptance run: one PASS/FAIL line per criterion.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nodaldtn_core::dtn::{assemble_dtn, index_and_kernel, CanonicalSystem, DtnOptions};
use nodaldtn_core::exact1d::{circle_report, exact_dtn_1d, interval_report, OneDPartition};
use nodaldtn_core::mesh::{disk_mesh, Mesh, Shape};
use nodaldtn_core::nodal::partition_from_labels;
use nodaldtn_core::partition::{
    build_neighbor_graph, cut_report, is_bipartite, is_valid_cut, maximal_cut_weights, traversal_directions,
    weights_from_orientations, Partition,
};
use nodaldtn_core::pipeline::{run_verify, MeshSource, PartitionSource, RunConfig, VerifyReport, WeightSource};
use nodaldtn_core::spcc::NodalSetup;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

/// Runs a check, turning panics and errors into failures.
fn criterion(n: usize, name: &str, f: impl FnOnce() -> Result<Outcome, String>) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
    let (ok, detail) = match result {
        Ok(Ok(o)) => (o.ok, o.detail),
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(_) => (false, "panicked".to_string()),
    };
    println!(
        "criterion {n} {name}: {} ({detail}; {:.2} s)",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    ok
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Closed-form `(m, n)` of the `index`-th Dirichlet eigenvalue `m² + 2n²` of
/// `(0, π) × (0, π/√2)`.
fn rectangle_mode(index: usize) -> (usize, usize) {
    let mut modes: Vec<(usize, usize, usize)> = (1..12).flat_map(|m| (1..12).map(move |n| (m * m + 2 * n * n, m, n))).collect();
    modes.sort();
    let (_, m, n) = modes[index - 1];
    (m, n)
}

fn rectangle_config(index: usize, h: f64) -> RunConfig {
    let shape = Shape::Rectangle { a: PI, b: PI / 2f64.sqrt() };
    let mut cfg = RunConfig::new(MeshSource::Shape { shape, h, align: 6 }, PartitionSource::Eigenfunction { index, mode: None });
    cfg.weights = WeightSource::All;
    cfg
}

fn circle_config(k: usize, n: usize) -> RunConfig {
    let mut cfg = RunConfig::new(MeshSource::Circle { n }, PartitionSource::Equipartition(k));
    cfg.weights = WeightSource::All;
    cfg
}

fn square_config(h: f64) -> RunConfig {
    let shape = Shape::Rectangle { a: 1.0, b: 1.0 };
    let mut cfg = RunConfig::new(MeshSource::Shape { shape, h, align: 12 }, PartitionSource::Eigenfunction { index: 2, mode: None });
    cfg.weights = WeightSource::All;
    cfg
}

struct Run {
    name: String,
    report: VerifyReport,
    partition: Partition,
    elapsed: Duration,
}

fn verify(name: String, cfg: &RunConfig) -> Result<Run, String> {
    let start = Instant::now();
    let out = run_verify(cfg).map_err(|e| format!("{name}: {e}"))?;
    Ok(Run {
        name,
        report: out.report,
        partition: out.prepared.partition,
        elapsed: start.elapsed(),
    })
}

fn integers(r: &VerifyReport) -> (usize, Option<usize>, Option<i64>, Option<usize>, Option<usize>) {
    let d = r.dtn.as_ref();
    (r.k, r.label, r.defect, d.map(|d| d.morse), d.map(|d| d.kernel_dim))
}

fn main() {
    let mut results = Vec::new();

    results.push(criterion(1, "circle_exact", || {
        let start = Instant::now();
        let mut bad = Vec::new();
        for k in [3usize, 5, 7] {
            let r = circle_report(k).map_err(err)?;
            let lam = (k as f64 / 2.0).powi(2);
            let ok = r.lambda_star == lam
                && r.multiplicity == 2
                && r.label == k
                && r.defect == 0
                && r.dim_s == 1
                && r.dtn.len() == 1
                && r.dtn[0][0].abs() < 1e-12
                && r.morse == 0
                && r.kernel_dim == 1
                && r.defect_identity
                && r.multiplicity_identity;
            if !ok {
                bad.push(k);
            }
        }
        let t = start.elapsed();
        Ok(outcome(bad.is_empty() && t < Duration::from_secs(1), format!("k = 3, 5, 7; failing {bad:?}; {:.1} ms", t.as_secs_f64() * 1e3)))
    }));

    results.push(criterion(2, "interval_sturm", || {
        let start = Instant::now();
        let mut bad = Vec::new();
        for k in 1..=6 {
            let r = interval_report(k, PI).map_err(err)?;
            if !(r.is_chi_nodal && r.dim_s == 0 && r.defect == Some(0) && r.simple == Some(true)) {
                bad.push(k);
            }
        }
        let t = start.elapsed();
        Ok(outcome(bad.is_empty() && t < Duration::from_secs(1), format!("k = 1..6; failing {bad:?}")))
    }));

    // Mesh runs shared by later criteria.
    let mut rectangle_runs: Vec<(usize, Run, Run)> = Vec::new();
    let mut circle_runs: Vec<Run> = Vec::new();
    let mut square_runs: Vec<Run> = Vec::new();
    let mut setup_error = None;
    for index in 2..=6 {
        let coarse = verify(format!("rectangle eig {index} h"), &rectangle_config(index, PI / 24.0));
        let fine = verify(format!("rectangle eig {index} h/2"), &rectangle_config(index, PI / 48.0));
        match (coarse, fine) {
            (Ok(c), Ok(f)) => rectangle_runs.push((index, c, f)),
            (Err(e), _) | (_, Err(e)) => setup_error = Some(e),
        }
    }
    for k in [3usize, 5, 7] {
        match verify(format!("FEM circle k = {k}"), &circle_config(k, 60)) {
            Ok(r) => circle_runs.push(r),
            Err(e) => setup_error = Some(e),
        }
    }
    for h in [1.0 / 24.0, 1.0 / 48.0] {
        match verify(format!("unit square h = {h:.4}"), &square_config(h)) {
            Ok(r) => square_runs.push(r),
            Err(e) => setup_error = Some(e),
        }
    }
    let setup_ok = setup_error.is_none();
    if let Some(e) = &setup_error {
        println!("mesh run failed: {e}");
    }

    results.push(criterion(3, "canonical_system", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut bad = 0;
        for _ in 0..200 {
            let k = rng.random_range(2..=10);
            let mut alpha = DMatrix::zeros(k, k);
            // every i > 0 touches an earlier subdomain; other pairs are
            // random, often zero
            for i in 1..k {
                let j = rng.random_range(0..i);
                let a = rng.random_range(0.1..5.0);
                alpha[(i, j)] = a;
                alpha[(j, i)] = a;
            }
            for i in 0..k {
                for j in 0..i {
                    if alpha[(i, j)] == 0.0 && rng.random_bool(0.3) {
                        let a = rng.random_range(0.0..5.0);
                        alpha[(i, j)] = a;
                        alpha[(j, i)] = a;
                    }
                }
            }
            let s = CanonicalSystem::from_alpha(alpha, DVector::zeros(k));
            let eig = s.eigenvalues();
            let scale = eig.last().copied().unwrap_or(1.0).max(1.0);
            let psd = eig[0] >= -1e-12 * scale;
            let kernel_one = eig[1] > 1e-10 * scale && s.constant_residual() < 1e-12;
            if !(psd && kernel_one) {
                bad += 1;
            }
        }
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for run in rectangle_runs.iter().flat_map(|(_, c, f)| [c, f]).chain(&circle_runs).chain(&square_runs) {
            if let Some(c) = run.report.dtn.as_ref().and_then(|d| d.canonical.as_ref()) {
                checked += 1;
                if c.d_norm > 0.0 {
                    worst = worst.max(c.sum_d.abs() / c.d_norm);
                }
            }
        }
        Ok(outcome(
            bad == 0 && worst <= 1e-8 && setup_ok,
            format!("200 random systems, {bad} failing; {checked} FEM cases, worst |sum d|/|d| = {worst:.2e}"),
        ))
    }));

    results.push(criterion(4, "rectangle_nodal", || {
        let mut lines = Vec::new();
        let mut ok = setup_ok && rectangle_runs.len() == 5;
        for (index, c, f) in &rectangle_runs {
            let (m, n) = rectangle_mode(*index);
            let (ic, iff) = (integers(&c.report), integers(&f.report));
            let morse_ok = |r: &VerifyReport| r.defect.is_some() && r.defect == r.dtn.as_ref().map(|d| d.morse as i64);
            let case_ok = c.report.is_chi_nodal
                && f.report.is_chi_nodal
                && ic == iff
                && ic.0 == m * n
                && morse_ok(&c.report)
                && ic.4 == Some(0)
                && c.elapsed.max(f.elapsed) < Duration::from_secs(120);
            ok &= case_ok;
            lines.push(format!(
                "eig {index}: k {} l {:?} d {:?} morse {:?} ker {:?}{}",
                ic.0,
                ic.1,
                ic.2,
                ic.3,
                ic.4,
                if case_ok { "" } else { " MISMATCH" }
            ));
        }
        Ok(outcome(ok, lines.join("; ")))
    }));

    results.push(criterion(5, "degenerate_square", || {
        let mut ok = setup_ok && square_runs.len() == 2;
        let mut lines = Vec::new();
        for r in &square_runs {
            let rep = &r.report;
            let ker = rep.dtn.as_ref().map(|d| d.kernel_dim);
            ok &= rep.k == 2 && rep.multiplicity == Some(2) && ker.map(|k| k + 1) == Some(2);
            lines.push(format!("{}: k {} mult {:?} ker {:?}", r.name, rep.k, rep.multiplicity, ker));
        }
        Ok(outcome(ok, lines.join("; ")))
    }));

    results.push(criterion(6, "spectral_flow", || {
        let mut ok = setup_ok;
        let mut bad = Vec::new();
        let runs = circle_runs.iter().chain(rectangle_runs.iter().flat_map(|(_, c, f)| [c, f])).chain(&square_runs);
        let mut count = 0;
        for r in runs {
            count += 1;
            let rep = &r.report;
            let Some(flow) = &rep.flow else {
                bad.push(format!("{}: no flow", r.name));
                continue;
            };
            let morse = rep.dtn.as_ref().map_or(usize::MAX, |d| d.morse);
            let case_ok = flow.crossings.inconclusive.is_empty()
                && flow.crossings.count == morse
                && flow.monotonicity_violation <= 1e-8
                && Some(flow.below_at_zero + 1) == rep.label;
            if !case_ok {
                bad.push(format!(
                    "{}: crossings {} morse {morse} mono {:.1e} below {} label {:?}",
                    r.name, flow.crossings.count, flow.monotonicity_violation, flow.below_at_zero, rep.label
                ));
            }
        }
        ok &= bad.is_empty();
        Ok(outcome(ok, format!("{count} cases; {}", if bad.is_empty() { "all consistent".into() } else { bad.join("; ") })))
    }));

    results.push(criterion(7, "chi_independence", || {
        let mut bad = Vec::new();
        // closed-form circle: three weight choices and a domain flip
        for k in [3usize, 5, 7] {
            let base = OneDPartition::circle_equipartition(k).map_err(err)?;
            let lam = (k as f64 / 2.0).powi(2);
            let p = base.partition.clone();
            let trav = vec![1; p.n_segments()];
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let mut sign = || if rng.random::<bool>() { 1 } else { -1 };
            let random = weights_from_orientations(&p, &trav, &(0..k).map(|_| sign()).collect::<Vec<_>>(), &(0..k).map(|_| sign()).collect::<Vec<_>>());
            let choices = [
                base.clone(),
                base.clone().cosine_weights().map_err(err)?,
                base.clone().with_weights(random).map_err(err)?,
            ];
            let mut seen = BTreeSet::new();
            for c in &choices {
                let ik = index_and_kernel(&exact_dtn_1d(c, lam).map_err(err)?.operator);
                seen.insert((ik.morse, ik.kernel_dim));
            }
            let flipped = base.clone().with_weights(base.weights.flip_subdomain(&p, 0)).map_err(err)?;
            let same = exact_dtn_1d(&base, lam).map_err(err)?.operator.matrix == exact_dtn_1d(&flipped, lam).map_err(err)?.operator.matrix;
            if seen.len() != 1 || !same {
                bad.push(format!("exact circle k = {k}"));
            }
        }
        let runs = circle_runs.iter().chain(rectangle_runs.iter().flat_map(|(_, c, f)| [c, f]));
        let mut count = 0;
        for r in runs {
            count += 1;
            match &r.report.chi_independence {
                Some(ci) if ci.runs.len() == 3 && ci.consistent && ci.domain_equivalent_identical && ci.edge_equivalent_identical => {}
                _ => bad.push(r.name.clone()),
            }
        }
        Ok(outcome(
            setup_ok && bad.is_empty(),
            format!("3 exact circles and {count} mesh cases; failing {bad:?}"),
        ))
    }));

    results.push(criterion(8, "cut_combinatorics", || {
        let mut corpus: Vec<(String, Partition)> = Vec::new();
        for k in 2..=10 {
            let pairs: Vec<(usize, usize)> = (0..k).map(|i| (i, (i + 1) % k)).collect();
            corpus.push((format!("cycle {k}"), Partition::abstract_graph(k, &pairs).map_err(err)?));
        }
        let mercedes_graph = Partition::abstract_graph(3, &[(0, 1), (1, 2), (0, 2)]).map_err(err)?;
        corpus.push(("mercedes graph".into(), mercedes_graph));
        let mercedes = mercedes_disk()?;
        corpus.push(("mercedes disk".into(), mercedes));
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        for t in 0..60 {
            let k = rng.random_range(2..=10);
            let mut pairs: Vec<(usize, usize)> = (1..k).map(|i| (rng.random_range(0..i), i)).collect();
            for _ in 0..rng.random_range(0..6) {
                let a = rng.random_range(0..k);
                let b = rng.random_range(0..k);
                if a != b {
                    pairs.push((a.min(b), a.max(b)));
                }
            }
            corpus.push((format!("random {t}"), Partition::abstract_graph(k, &pairs).map_err(err)?));
        }
        for (_, c, f) in &rectangle_runs {
            corpus.push((c.name.clone(), c.partition.clone()));
            corpus.push((f.name.clone(), f.partition.clone()));
        }
        for r in circle_runs.iter().chain(&square_runs) {
            corpus.push((r.name.clone(), r.partition.clone()));
        }

        let mut bad = Vec::new();
        let mut subsets = 0usize;
        for (name, p) in &corpus {
            if p.k() > 10 {
                continue;
            }
            let valid = brute_force_valid_cuts(p);
            let ns = p.n_segments();
            let candidates: Vec<Vec<usize>> = if ns <= 12 {
                (0..1usize << ns).map(|mask| (0..ns).filter(|a| mask >> a & 1 == 1).collect()).collect()
            } else {
                let mut c: Vec<Vec<usize>> = valid.iter().cloned().collect();
                for _ in 0..2000 {
                    c.push((0..ns).filter(|_| rng.random_bool(0.5)).collect());
                }
                c
            };
            for members in &candidates {
                subsets += 1;
                if is_valid_cut(p, members).is_some() != valid.contains(members) {
                    bad.push(format!("{name} {members:?}"));
                    break;
                }
            }
            let bipartite = is_bipartite(&build_neighbor_graph(p)).is_some();
            if bipartite != is_valid_cut(p, &[]).is_some() {
                bad.push(format!("{name}: bipartite test"));
            }
        }
        let m1 = cut_report(&corpus.iter().find(|c| c.0 == "mercedes graph").unwrap().1).minimal.members.len();
        let m2 = cut_report(&corpus.iter().find(|c| c.0 == "mercedes disk").unwrap().1).minimal.members.len();
        Ok(outcome(
            bad.is_empty() && m1 == 1 && m2 == 1,
            format!("{} partitions, {subsets} subsets; Mercedes minimal cut sizes {m1}, {m2}; failing {bad:?}", corpus.len()),
        ))
    }));

    results.push(criterion(9, "oracle_equivalence", || {
        let exact = exact_dtn_1d(&OneDPartition::circle_equipartition(3).map_err(err)?, 2.25).map_err(err)?;
        let exact_entry = exact.operator.matrix[(0, 0)];
        let mut entries = Vec::new();
        for n in [60usize, 120] {
            let mesh = Mesh::circle(n).map_err(err)?;
            let labels: Vec<usize> = (0..n).map(|c| c * 3 / n).collect();
            let p = partition_from_labels(&mesh, &labels).map_err(err)?;
            let setup = NodalSetup::new(&mesh, &p).map_err(err)?;
            let w = maximal_cut_weights(&p, &traversal_directions(&p, Some(&mesh)).map_err(err)?);
            let opts = DtnOptions {
                lambda: Some(2.25),
                ..DtnOptions::default()
            };
            let d = assemble_dtn(&mesh, &p, &setup, &w, opts).map_err(err)?;
            if d.dim() != 1 {
                return Ok(outcome(false, format!("dim S = {} at n = {n}", d.dim())));
            }
            let h = 2.0 * PI / n as f64;
            entries.push(((d.matrix[(0, 0)] - exact_entry).abs(), h));
        }
        let ratio = entries[0].0 / entries[1].0;
        let c = entries.iter().map(|(e, h)| e / (h * h)).fold(0.0f64, f64::max);
        Ok(outcome(
            (ratio - 4.0).abs() <= 1.2 && c < 1.0,
            format!(
                "|DN - exact| = {:.3e}, {:.3e}; ratio {ratio:.3}; max C = |e|/h² = {c:.3}",
                entries[0].0, entries[1].0
            ),
        ))
    }));

    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

/// Three sectors of the unit disk meeting at the centre.
fn mercedes_disk() -> Result<Partition, String> {
    let mesh = disk_mesh(1.0, 6).map_err(err)?;
    let labels: Vec<usize> = (0..mesh.n_cells())
        .map(|c| {
            let [x, y] = mesh.centroid(c);
            let t = (y.atan2(x) + PI / 2.0).rem_euclid(2.0 * PI);
            ((t / (2.0 * PI / 3.0)) as usize).min(2)
        })
        .collect();
    partition_from_labels(&mesh, &labels).map_err(err)
}

/// Valid cuts from all `2^k` orientation assignments.
fn brute_force_valid_cuts(p: &Partition) -> BTreeSet<Vec<usize>> {
    let k = p.k();
    (0..1usize << k)
        .map(|mask| {
            p.segments
                .iter()
                .enumerate()
                .filter(|(_, s)| (mask >> s.left & 1) == (mask >> s.right & 1))
                .map(|(a, _)| a)
                .collect()
        })
        .collect()
}
