//! Command-line surface.

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use txgraph_core::bench::FeatureMode;
use txgraph_core::features::FeatureSet;
use txgraph_core::label::ClassWeights;
use txgraph_server::LayoutMode;

#[derive(Debug, Parser)]
#[command(name = "txgraph", version, about = "Temporal transaction-graph classification pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Output tree root (artifacts/, reports/, series/, layouts/).
    #[arg(long, global = true, env = "TXGRAPH_OUT_DIR", default_value = "out")]
    pub out: PathBuf,
    /// Root seed for every random stream.
    #[arg(long, global = true, env = "TXGRAPH_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Log at debug level.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Directory holding the release's features, edge list and classes CSVs.
    #[arg(long, env = "TXGRAPH_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Edge list CSV; overrides the file in --data-dir.
    #[arg(long, value_name = "CSV")]
    pub edges: Option<PathBuf>,
    /// Classes CSV; overrides the file in --data-dir.
    #[arg(long, value_name = "CSV")]
    pub classes: Option<PathBuf>,
    /// Width of the local block, time-step column included.
    #[arg(long, env = "TXGRAPH_LOCAL_COUNT", default_value_t = txgraph_core::graph::DEFAULT_LOCAL_COUNT)]
    pub local_count: usize,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model family: logreg, mlp, rf, gcn, skip-gcn or evolvegcn.
    #[arg(long)]
    pub model: String,
    /// Use the skip connection (only with --model gcn).
    #[arg(long)]
    pub skip: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// L2 penalty (logreg, mlp).
    #[arg(long)]
    pub l2: Option<f64>,
    /// Hidden width (mlp, gcn, evolvegcn).
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Loss weights as `licit,illicit`.
    #[arg(long, value_name = "LICIT,ILLICIT")]
    pub weights: Option<ClassWeights>,
    /// Trees in the forest.
    #[arg(long)]
    pub estimators: Option<usize>,
    /// Features examined per split.
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Train every tree on the full training set.
    #[arg(long)]
    pub no_bootstrap: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the data set, then print its counts.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Features CSV; overrides the file in --data-dir.
        #[arg(long, value_name = "CSV")]
        features: Option<PathBuf>,
        /// Print the validation report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Export an assembled feature matrix, or recomputed neighbour aggregates.
    Features {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "af")]
        set: FeatureSet,
        /// Recompute min/max/mean/std neighbour aggregates of the local block.
        #[arg(long)]
        aggregate: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train one model on the steps up to --through and save its artifact.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// lf or af.
        #[arg(long, default_value = "af")]
        features: FeatureMode,
        /// Last training step.
        #[arg(long, default_value_t = txgraph_core::bench::DEFAULT_BOUNDARY)]
        through: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the temporal-split experiment and write report, series and artifacts.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// lf, af, lf+ne or af+ne.
        #[arg(long, default_value = "af")]
        features: FeatureMode,
        /// Last training step.
        #[arg(long, default_value_t = txgraph_core::bench::DEFAULT_BOUNDARY)]
        boundary: u32,
        /// Retrain before every test step on all earlier steps.
        #[arg(long)]
        retrain_per_step: bool,
        /// Embedding model epochs for +ne modes.
        #[arg(long)]
        ne_epochs: Option<usize>,
        /// Embedding width for +ne modes.
        #[arg(long)]
        ne_hidden: Option<usize>,
        #[arg(long)]
        ne_lr: Option<f64>,
        /// Take embeddings from a Skip-GCN instead of a GCN.
        #[arg(long)]
        ne_skip: bool,
    },
    /// Write hidden-layer embeddings of a (Skip-)GCN artifact for every node.
    Embed {
        #[command(flatten)]
        data: DataArgs,
        /// GCN artifact JSON.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute a global 2D projection.
    Layout {
        #[command(flatten)]
        data: DataArgs,
        /// raw or gcn.
        #[arg(long, default_value = "raw")]
        mode: LayoutMode,
        /// GCN artifact, required for --mode gcn.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Serve the HTTP API and, optionally, the UI bundle.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Artifact whose predictions colour the nodes.
        #[arg(long)]
        model: Option<PathBuf>,
        /// GCN artifact supplying embeddings when --model was trained on +ne inputs.
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// GCN artifact for the activation layout; defaults to --model when it is a GCN.
        #[arg(long)]
        layout_model: Option<PathBuf>,
        /// Directory with the built UI.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Print the results table from the report JSON files under --out.
    Report {
        /// Emit CSV instead of an aligned table.
        #[arg(long)]
        csv: bool,
    },
    /// Write a seeded synthetic data set in the release's CSV layout.
    Synth {
        /// Destination directory.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 12)]
        steps: u32,
        #[arg(long, default_value_t = 60)]
        min_nodes: usize,
        #[arg(long, default_value_t = 120)]
        max_nodes: usize,
        /// First step whose illicit nodes change their signature.
        #[arg(long)]
        shift_step: Option<u32>,
    },
}
