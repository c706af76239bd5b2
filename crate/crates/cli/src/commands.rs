//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use txgraph_core::bench::{
    inputs_for, load_reports, render_table, run_experiment, write_outcome, BenchError, ExperimentConfig, FeatureMode,
    ReportRow, SplitSpec,
};
use txgraph_core::features::{aggregate_neighbor_stats, assemble, AggregateConfig, FeatureError, FeatureMatrix, FeatureSet, Provenance};
use txgraph_core::graph::synth::{generate, SyntheticConfig};
use txgraph_core::graph::{export, ingest, validate, DatasetPaths, GraphError, IngestOptions, TemporalGraph};
use txgraph_core::models::{extract_embeddings, DataView, ModelArtifact, ModelError, ModelRegistry, Overrides};
use txgraph_server::{build_layout, LayoutMode, ProjectionLayout, ServerError, Snapshot};

use crate::args::{Cli, Command, DataArgs, Global, ModelArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Ingest { data, features, json } => cmd_ingest(&data, features, json),
        Command::Features { data, set, aggregate, output } => cmd_features(g, &data, set, aggregate, output),
        Command::Train { data, model, features, through, output } => cmd_train(g, &data, &model, features, through, output),
        Command::Eval { data, model, features, boundary, retrain_per_step, ne_epochs, ne_hidden, ne_lr, ne_skip } => {
            let ne = Overrides { epochs: ne_epochs, hidden: ne_hidden, lr: ne_lr, ..Default::default() };
            cmd_eval(g, &data, &model, features, boundary, retrain_per_step, ne, ne_skip)
        }
        Command::Embed { data, model, output } => cmd_embed(g, &data, &model, output),
        Command::Layout { data, mode, model, output } => cmd_layout(g, &data, mode, model, output),
        Command::Serve { data, bind, model, embedding, layout_model, static_dir } => {
            cmd_serve(g, &data, bind, model, embedding, layout_model, static_dir)
        }
        Command::Report { csv } => cmd_report(g, csv),
        Command::Synth { output, steps, min_nodes, max_nodes, shift_step } => {
            let cfg = SyntheticConfig { steps, min_nodes, max_nodes, shift_step, seed: g.seed, ..Default::default() };
            let graph = generate(&cfg)?;
            export(&graph, &DatasetPaths::in_dir(&output))?;
            println!("wrote {} nodes, {} edges, {} steps to {}", graph.node_count(), graph.edge_count(), graph.max_step(), output.display());
            Ok(())
        }
    }
}

/// Resolves file locations before any data is read.
fn dataset_paths(data: &DataArgs, features: Option<PathBuf>) -> Result<DatasetPaths, CliError> {
    let base = data.data_dir.as_ref().map(DatasetPaths::in_dir);
    let pick = |explicit: Option<&PathBuf>, from_dir: Option<PathBuf>, flag: &str| {
        explicit.cloned().or(from_dir).ok_or_else(|| usage(format!("no {flag} file: pass --{flag} or --data-dir (or set TXGRAPH_DATA_DIR)")))
    };
    Ok(DatasetPaths {
        features: pick(features.as_ref(), base.as_ref().map(|b| b.features.clone()), "features")?,
        edges: pick(data.edges.as_ref(), base.as_ref().map(|b| b.edges.clone()), "edges")?,
        classes: pick(data.classes.as_ref(), base.as_ref().map(|b| b.classes.clone()), "classes")?,
    })
}

fn load_graph(data: &DataArgs) -> Result<TemporalGraph, CliError> {
    load_graph_from(&dataset_paths(data, None)?, data)
}

fn load_graph_from(paths: &DatasetPaths, data: &DataArgs) -> Result<TemporalGraph, CliError> {
    let graph = ingest(paths, IngestOptions { local_count: data.local_count })?;
    for w in graph.warnings() {
        log::warn!("{w}");
    }
    Ok(graph)
}

fn cmd_ingest(data: &DataArgs, features: Option<PathBuf>, json: bool) -> Result<(), CliError> {
    let paths = dataset_paths(data, features)?;
    let graph = load_graph_from(&paths, data)?;
    let v = validate(&graph);
    if json {
        println!("{}", serde_json::to_string_pretty(&v).expect("report serializes"));
        return Ok(());
    }
    println!("N={} E={} T={}", v.node_count, v.edge_count, v.time_step_count);
    println!("illicit={} licit={} unknown={}", v.illicit_count, v.licit_count, v.unknown_count);
    println!("cross-step edges={}", v.cross_step_edge_count);
    let counts: Vec<String> = v.per_step_node_counts.iter().map(|c| c.to_string()).collect();
    println!("nodes per step: {}", counts.join(" "));
    for w in &v.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

fn cmd_features(g: &Global, data: &DataArgs, set: FeatureSet, aggregate: bool, output: Option<PathBuf>) -> Result<(), CliError> {
    let graph = load_graph(data)?;
    let (matrix, name) = if aggregate {
        let cols: Vec<usize> = (1..graph.nodes().local_count()).collect();
        (aggregate_neighbor_stats(&graph, &AggregateConfig::all_statistics(cols))?, "aggregates".to_string())
    } else {
        (assemble(graph.nodes(), set, None)?, set.tag().to_ascii_lowercase())
    };
    let path = output.unwrap_or_else(|| g.out.join("features").join(format!("{name}.csv")));
    matrix.write_csv(&graph, &path)?;
    println!("wrote {} x {} to {}", matrix.rows(), matrix.cols(), path.display());
    Ok(())
}

/// Registry name after applying `--skip`, plus the overrides to apply.
fn resolve_model(m: &ModelArgs) -> Result<(String, Overrides), CliError> {
    let family = ModelRegistry::builtin().get(&m.model).map_err(|e| usage(e.to_string()))?;
    let name = match (m.skip, family.name()) {
        (false, n) => n.to_string(),
        (true, "gcn" | "skip-gcn") => "skip-gcn".to_string(),
        (true, n) => return Err(usage(format!("--skip applies only to gcn, not {n}"))),
    };
    let overrides = Overrides {
        epochs: m.epochs,
        lr: m.lr,
        l2: m.l2,
        hidden: m.hidden,
        class_weights: m.weights,
        estimators: m.estimators,
        max_features: m.max_features,
        bootstrap: m.no_bootstrap.then_some(false),
    };
    Ok((name, overrides))
}

fn cmd_train(
    g: &Global,
    data: &DataArgs,
    m: &ModelArgs,
    features: FeatureMode,
    through: u32,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    if features.with_embeddings() {
        return Err(usage("train takes --features lf or af; use eval for +ne inputs"));
    }
    let (name, overrides) = resolve_model(m)?;
    let family = ModelRegistry::builtin().get(&name)?;
    let mut hp = family.default_hyperparameters();
    hp.apply(&overrides).map_err(|e| usage(e.to_string()))?;
    let graph = load_graph(data)?;
    if through == 0 || through > graph.max_step() {
        return Err(usage(format!("--through {through} must lie in 1..={}", graph.max_step())));
    }
    let x = assemble(graph.nodes(), features.base(), None)?.values().clone();
    let view = DataView::new(&graph, &x, 1..=through)?;
    let artifact = family.fit(&view, &hp, g.seed)?;
    let path = output.unwrap_or_else(|| {
        g.out.join("artifacts").join(format!("{name}-{}-t{through}-s{}.json", features.slug(), g.seed))
    });
    artifact.save(&path)?;
    println!("{}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    g: &Global,
    data: &DataArgs,
    m: &ModelArgs,
    features: FeatureMode,
    boundary: u32,
    retrain_per_step: bool,
    ne: Overrides,
    ne_skip: bool,
) -> Result<(), CliError> {
    let (name, overrides) = resolve_model(m)?;
    let mut cfg = ExperimentConfig::new(&name, features)?;
    cfg.hyperparameters.apply(&overrides).map_err(|e| usage(e.to_string()))?;
    if ne_skip {
        cfg.embedding_model = "skip-gcn".into();
        cfg.embedding_hyperparameters = ModelRegistry::builtin().get("skip-gcn")?.default_hyperparameters();
    }
    cfg.embedding_hyperparameters.apply(&ne).map_err(|e| usage(e.to_string()))?;
    cfg.split = SplitSpec { boundary };
    cfg.seed = g.seed;
    cfg.retrain_per_step = retrain_per_step;
    let graph = load_graph(data)?;
    cfg.split.validate(&graph).map_err(|e| usage(e.to_string()))?;
    let outcome = run_experiment(&graph, &cfg, None)?;
    let paths = write_outcome(&g.out, &outcome)?;
    print!("{}", render_table(std::slice::from_ref(&outcome.report.row)));
    println!("report: {}", paths.report_json.display());
    println!("series: {}", paths.series_csv.display());
    println!("artifact: {}", paths.artifact.display());
    if let Some(p) = &paths.embedding_artifact {
        println!("embedding artifact: {}", p.display());
    }
    Ok(())
}

fn load_artifact(path: &Path) -> Result<ModelArtifact, CliError> {
    Ok(ModelArtifact::load(path)?)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into())
}

fn cmd_embed(g: &Global, data: &DataArgs, model: &Path, output: Option<PathBuf>) -> Result<(), CliError> {
    let art = load_artifact(model)?;
    let graph = load_graph(data)?;
    let x = inputs_for(&graph, &art, None)?;
    let (nodes, h1) = extract_embeddings(&art, &DataView::full(&graph, &x)?)?;
    let mut rows = txgraph_core::numerics::DenseMatrix::zeros(graph.node_count(), h1.cols());
    for (k, &i) in nodes.iter().enumerate() {
        rows.row_mut(i).copy_from_slice(h1.row(k));
    }
    let matrix = FeatureMatrix::uniform(rows, Provenance::Embedding, "ne");
    let path = output.unwrap_or_else(|| g.out.join("embeddings").join(format!("{}.csv", stem(model))));
    matrix.write_csv(&graph, &path)?;
    println!("wrote {} x {} to {}", matrix.rows(), matrix.cols(), path.display());
    Ok(())
}

fn make_layout(graph: &TemporalGraph, mode: LayoutMode, model: Option<&Path>) -> Result<ProjectionLayout, CliError> {
    match (mode, model) {
        (LayoutMode::RawFeatures, _) => Ok(build_layout(graph, mode, None)?),
        (LayoutMode::GcnActivations, None) => Err(usage("--mode gcn needs --model <gcn artifact>")),
        (LayoutMode::GcnActivations, Some(p)) => {
            let art = load_artifact(p)?;
            Ok(build_layout(graph, mode, Some((&stem(p), &art)))?)
        }
    }
}

fn cmd_layout(g: &Global, data: &DataArgs, mode: LayoutMode, model: Option<PathBuf>, output: Option<PathBuf>) -> Result<(), CliError> {
    if mode == LayoutMode::GcnActivations && model.is_none() {
        return Err(usage("--mode gcn needs --model <gcn artifact>"));
    }
    let graph = load_graph(data)?;
    let layout = make_layout(&graph, mode, model.as_deref())?;
    let path = output.unwrap_or_else(|| g.out.join("layouts").join(format!("{}.json", mode.short())));
    layout.save(&path)?;
    println!("wrote {} coordinates to {}", layout.coords.len(), path.display());
    Ok(())
}

fn cmd_serve(
    g: &Global,
    data: &DataArgs,
    bind: std::net::SocketAddr,
    model: Option<PathBuf>,
    embedding: Option<PathBuf>,
    layout_model: Option<PathBuf>,
    static_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    if embedding.is_some() && model.is_none() {
        return Err(usage("--embedding needs --model"));
    }
    let graph = load_graph(data)?;
    let active = model.as_deref().map(load_artifact).transpose()?;
    let embedder = embedding.as_deref().map(load_artifact).transpose()?;
    let gcn_source = layout_model.or_else(|| {
        active.as_ref().filter(|a| a.family.ends_with("gcn") && a.family != "evolvegcn").and(model.clone())
    });

    let mut layouts = vec![build_layout(&graph, LayoutMode::RawFeatures, None)?];
    if let Some(p) = &gcn_source {
        layouts.push(make_layout(&graph, LayoutMode::GcnActivations, Some(p))?);
    }
    let prediction = match (&active, &model) {
        (Some(art), Some(path)) => {
            let x = inputs_for(&graph, art, embedder.as_ref())?;
            Some((stem(path), art.predict(&DataView::full(&graph, &x)?)?))
        }
        _ => None,
    };
    let reports = load_reports(&g.out)?;
    let snapshot = Arc::new(Snapshot::new(graph, layouts, prediction, reports)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: PathBuf::from("<runtime>"), source })?;
    runtime.block_on(txgraph_server::serve(snapshot, bind, static_dir))?;
    Ok(())
}

fn cmd_report(g: &Global, csv: bool) -> Result<(), CliError> {
    let reports = load_reports(&g.out)?;
    if reports.is_empty() {
        return Err(CliError::Io {
            path: g.out.join("reports"),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no report files"),
        });
    }
    let rows: Vec<ReportRow> = reports.iter().map(|r| r.row.clone()).collect();
    if csv {
        println!("{}", txgraph_core::bench::TABLE_HEADER.join(","));
        for r in &rows {
            println!("{},{},{},{},{}", r.method, r.illicit_precision, r.illicit_recall, r.illicit_f1, r.micro_f1);
        }
    } else {
        print!("{}", render_table(&rows));
    }
    Ok(())
}
