use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use quasirank::decomposition::{component_stats, split_escc_pout, tarjan_scc, Decomposition};
use quasirank::perturbation::{run_expansions, PerturbationFamily};
use quasirank::rank::{damping_sweep, divergence_report, generate_album_graph, tau_table, AlbumGraphSpec};
use quasirank::report::{self, OutputBatch};
use quasirank::spectral::{
    bar_stationary, bar_transition, check_stationary, exit_scaled, pagerank, pagerank_escc, pseudo_stationary_auto,
    quasi_stationary, right_eigenvector, CentralityVector, QsMeasures, SolverOptions,
};
use quasirank::walk::compare_walks;
use quasirank::{parse_edge_list, Error, Result, WebGraph};
use serde::Serialize;

use crate::{MeasureName, RunConfig};

fn opts(cfg: &RunConfig) -> SolverOptions {
    SolverOptions { tol: cfg.tol, max_iter: cfg.max_iter }
}

fn input(cfg: &RunConfig) -> Result<&Path> {
    cfg.input.as_deref().ok_or_else(|| Error::InvalidParameter("--input is required".into()))
}

fn load(cfg: &RunConfig) -> Result<(WebGraph, Decomposition)> {
    let file = File::open(input(cfg)?)?;
    let g = WebGraph::build(&parse_edge_list(BufReader::new(file))?);
    let d = split_escc_pout(&g)?;
    Ok((g, d))
}

fn escc_labels<'a>(g: &'a WebGraph, d: &Decomposition) -> Vec<&'a str> {
    d.escc.iter().map(|&v| g.label(v)).collect()
}

pub fn decompose(cfg: &RunConfig) -> Result<OutputBatch> {
    let file = File::open(input(cfg)?)?;
    let g = WebGraph::build(&parse_edge_list(BufReader::new(file))?);
    let scc = tarjan_scc(&g);
    let d = split_escc_pout(&g)?;
    let mut out = OutputBatch::new();
    out.add("stats.json", report::json(&component_stats(&g, &scc, &d)?)?);
    out.add("partition.csv", report::partition_csv(g.labels(), &d)?);
    Ok(out)
}

pub fn rank(cfg: &RunConfig) -> Result<OutputBatch> {
    let (g, d) = load(cfg)?;
    let o = opts(cfg);
    let labels = escc_labels(&g, &d);
    let all_labels: Vec<&str> = g.labels().iter().map(String::as_str).collect();
    let wants = |m: MeasureName| cfg.measures.contains(&m);
    let mut out = OutputBatch::new();
    let mut escc_vectors: Vec<CentralityVector> = Vec::new();

    if wants(MeasureName::Pagerank) {
        let pr = pagerank(&g, cfg.damping, o)?;
        out.add("pagerank.csv", report::centrality_csv(&all_labels, &pr)?);
        escc_vectors.push(pr.restrict(&d.escc)?);
    }
    if wants(MeasureName::PagerankEscc) {
        let v = pagerank_escc(&d.t, cfg.damping, o)?;
        out.add("pagerank_escc.csv", report::centrality_csv(&labels, &v)?);
        escc_vectors.push(v);
    }
    if wants(MeasureName::PiHat) {
        let v = pseudo_stationary_auto(&d.t, o)?;
        out.add("pi_hat.csv", report::centrality_csv(&labels, &v)?);
        escc_vectors.push(v);
    }
    let pi_bar = if wants(MeasureName::PiBar) || wants(MeasureName::PiCheck) {
        Some(bar_stationary(&bar_transition(&d.t)?, o)?)
    } else {
        None
    };
    if let (true, Some(v)) = (wants(MeasureName::PiBar), &pi_bar) {
        out.add("pi_bar.csv", report::centrality_csv(&labels, v)?);
        escc_vectors.push(v.clone());
    }
    if wants(MeasureName::PiTilde) || wants(MeasureName::PiCheck) {
        let spectral = quasi_stationary(&d.t, o)?;
        let qs = QsSidecar::new(&spectral, &d.exit);
        if wants(MeasureName::PiTilde) {
            out.add("pi_tilde.csv", report::centrality_csv(&labels, &spectral.pi_tilde)?);
            escc_vectors.push(spectral.pi_tilde.clone());
        }
        if let Some(pi_bar) = &pi_bar.filter(|_| wants(MeasureName::PiCheck)) {
            let right = right_eigenvector(&d.t, &pi_bar.scores, &spectral.pi_tilde.scores, o)?;
            let v = check_stationary(&spectral.pi_tilde.scores, &right.u_tilde)?;
            out.add("pi_check.csv", report::centrality_csv(&labels, &v)?);
            escc_vectors.push(v);
        }
        out.add("spectral.json", report::json(&qs)?);
    }
    if escc_vectors.len() > 1 {
        let refs: Vec<&CentralityVector> = escc_vectors.iter().collect();
        out.add("ranks.csv", report::rank_table_csv(&labels, &refs)?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct QsSidecar {
    lambda1: f64,
    lambda1_from_exit: f64,
    iterations: usize,
    residual: f64,
}

impl QsSidecar {
    fn new(s: &quasirank::SpectralResult, exit: &[f64]) -> Self {
        QsSidecar {
            lambda1: s.lambda1,
            lambda1_from_exit: quasirank::spectral::lambda_from_exit(&s.pi_tilde.scores, exit),
            iterations: s.iterations,
            residual: s.residual,
        }
    }
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    damping: f64,
    exit_scale: f64,
    lambda1: f64,
    measures: &'a [String],
    tau_variants: Vec<Vec<&'static str>>,
    sweep_variants: Vec<&'static str>,
    flagged: Vec<&'a str>,
}

pub fn compare(cfg: &RunConfig) -> Result<OutputBatch> {
    let (g, d) = load(cfg)?;
    let o = opts(cfg);
    let labels = escc_labels(&g, &d);
    let t = if cfg.exit_scale < 1.0 { exit_scaled(&d.t, cfg.exit_scale)? } else { d.t.clone() };
    let exit: Vec<f64> = if cfg.exit_scale < 1.0 {
        t.row_sums().iter().map(|s| 1.0 - s).collect()
    } else {
        d.exit.clone()
    };
    let qs = QsMeasures::compute(&t, Some(&exit), o)?;
    let pr = pagerank(&g, cfg.damping, o)?.restrict(&d.escc)?;
    let pr_escc = pagerank_escc(&t, cfg.damping, o)?;

    let mut vectors: Vec<&CentralityVector> = Vec::new();
    for m in &cfg.measures {
        vectors.push(match m {
            MeasureName::Pagerank => &pr,
            MeasureName::PagerankEscc => &pr_escc,
            MeasureName::PiHat => &qs.pi_hat,
            MeasureName::PiBar => &qs.pi_bar,
            MeasureName::PiTilde => &qs.pi_tilde,
            MeasureName::PiCheck => &qs.pi_check,
        });
    }
    let taus = tau_table(&vectors)?;
    let sweep = damping_sweep(&t, &qs.pi_tilde, &cfg.c_grid, o)?;
    let divergence = divergence_report(&pr, &qs.pi_tilde, cfg.top_k)?;

    let summary = CompareSummary {
        damping: cfg.damping,
        exit_scale: cfg.exit_scale,
        lambda1: qs.spectral.lambda1,
        measures: &taus.measures,
        tau_variants: taus.variants.iter().map(|r| r.iter().map(|v| v.as_str()).collect()).collect(),
        sweep_variants: sweep.iter().map(|p| p.variant.as_str()).collect(),
        flagged: divergence.flagged.iter().map(|&k| labels[k]).collect(),
    };
    let mut out = OutputBatch::new();
    out.add("tau_matrix.csv", report::tau_matrix_csv(&taus)?);
    out.add("sweep.csv", report::sweep_csv(&sweep)?);
    out.add("divergence.csv", report::divergence_csv(&labels, &divergence)?);
    out.add("compare.json", report::json(&summary)?);
    Ok(out)
}

pub fn perturb(cfg: &RunConfig) -> Result<OutputBatch> {
    let (_, d) = load(cfg)?;
    let family = PerturbationFamily::from_block(&d.t, &cfg.eps_grid)?;
    let rep = run_expansions(&family)?;
    let mut out = OutputBatch::new();
    out.add("expansion.csv", report::expansion_csv(&rep)?);
    out.add("perturb.json", report::json(&rep)?);
    Ok(out)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    start: &'a str,
    seed: u64,
    samples: u64,
    horizons: &'a [usize],
    max_abs_z: f64,
}

pub fn simulate(cfg: &RunConfig) -> Result<OutputBatch> {
    let (g, d) = load(cfg)?;
    let labels = escc_labels(&g, &d);
    let start = match &cfg.start {
        Some(label) => {
            let node = (0..g.node_count())
                .find(|&v| g.label(v) == label)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown node label {label}")))?;
            d.escc_index(node)
                .ok_or_else(|| Error::InvalidParameter(format!("node {label} is outside the ESCC")))?
        }
        None => 0,
    };
    if d.n_t() == 0 {
        return Err(Error::NoRecurrentCore);
    }
    let mut rows = Vec::new();
    for &n in &cfg.horizons {
        rows.extend(compare_walks(&d.t, start, n, cfg.samples, cfg.seed)?);
    }
    let max_abs_z = rows.iter().map(|r| r.z_score.abs()).fold(0.0, f64::max);
    let summary =
        SimulateSummary { start: labels[start], seed: cfg.seed, samples: cfg.samples, horizons: &cfg.horizons, max_abs_z };
    let mut out = OutputBatch::new();
    out.add("walk.csv", report::walk_csv(&labels, &rows)?);
    out.add("simulate.json", report::json(&summary)?);
    Ok(out)
}

#[derive(Serialize)]
struct AlbumSummary<'a> {
    spec: &'a AlbumGraphSpec,
    nodes: usize,
    edges: usize,
    hubs: Vec<&'a str>,
    album_index: Vec<&'a str>,
    leaves: Vec<&'a str>,
    sink: Vec<&'a str>,
}

pub fn gen_album(cfg: &RunConfig) -> Result<OutputBatch> {
    let spec = match &cfg.input {
        Some(path) => {
            let mut spec: AlbumGraphSpec = serde_json::from_reader(BufReader::new(File::open(path)?))?;
            spec.seed = cfg.seed;
            spec
        }
        None => AlbumGraphSpec::standard(cfg.seed),
    };
    let album = generate_album_graph(&spec)?;
    let name = |v: &usize| album.graph.label(*v);
    let summary = AlbumSummary {
        spec: &album.spec,
        nodes: album.graph.node_count(),
        edges: album.graph.edge_count(),
        hubs: album.hubs.iter().map(name).collect(),
        album_index: album.album_index.iter().map(name).collect(),
        leaves: album.leaves.iter().map(name).collect(),
        sink: album.sink.iter().map(name).collect(),
    };
    let mut out = OutputBatch::new();
    out.add("graph.tsv", album.edges.render().into_bytes());
    out.add("album.json", report::json(&summary)?);
    Ok(out)
}
