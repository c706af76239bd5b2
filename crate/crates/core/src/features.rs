//! Feature-set assembly and one-hop neighbour aggregates.
//!
//! [`aggregate_neighbor_stats`] recomputes generic neighbourhood statistics
//! (min, max, mean, sample std) over in- and out-neighbours. It is used to
//! build the aggregated block of synthetic data sets; for the public release
//! the shipped aggregated columns are used as they are.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeTable, TemporalGraph};
use crate::numerics::{DenseMatrix, NumericsError};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("invalid aggregate config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Min,
    Max,
    Mean,
    Std,
}

impl Statistic {
    pub const ALL: [Statistic; 4] = [Statistic::Min, Statistic::Max, Statistic::Mean, Statistic::Std];

    fn name(self) -> &'static str {
        match self {
            Statistic::Min => "min",
            Statistic::Max => "max",
            Statistic::Mean => "mean",
            Statistic::Std => "std",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    fn name(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateConfig {
    pub statistics: Vec<Statistic>,
    pub directions: Vec<Direction>,
    /// Indices into the local block of the node table.
    pub source_columns: Vec<usize>,
}

impl AggregateConfig {
    pub fn all_statistics(source_columns: Vec<usize>) -> Self {
        Self { statistics: Statistic::ALL.to_vec(), directions: vec![Direction::In, Direction::Out], source_columns }
    }

    pub fn validate(&self, local_count: usize) -> Result<(), FeatureError> {
        if self.statistics.is_empty() || self.directions.is_empty() || self.source_columns.is_empty() {
            return Err(FeatureError::Config("statistics, directions and source columns must be non-empty".into()));
        }
        if let Some(c) = self.source_columns.iter().find(|&&c| c >= local_count) {
            return Err(FeatureError::Config(format!("source column {c} outside the {local_count} local columns")));
        }
        Ok(())
    }

    /// Output width: one column per (direction, source, statistic) plus a
    /// neighbour count per direction.
    pub fn output_width(&self) -> usize {
        self.directions.len() * (self.source_columns.len() * self.statistics.len() + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Local,
    Aggregated,
    Embedding,
}

impl Provenance {
    fn name(self) -> &'static str {
        match self {
            Provenance::Local => "local",
            Provenance::Aggregated => "aggregated",
            Provenance::Embedding => "embedding",
        }
    }
}

/// Model input: one row per node, each column tagged with its origin.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    values: DenseMatrix,
    provenance: Vec<Provenance>,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: DenseMatrix, provenance: Vec<Provenance>, names: Vec<String>) -> Result<Self, FeatureError> {
        if provenance.len() != values.cols() || names.len() != values.cols() {
            return Err(FeatureError::Dimension(format!(
                "{} columns, {} provenance tags, {} names",
                values.cols(),
                provenance.len(),
                names.len()
            )));
        }
        Ok(Self { values, provenance, names })
    }

    /// Every column tagged with the same provenance, named `{prefix}{j}`.
    pub fn uniform(values: DenseMatrix, provenance: Provenance, prefix: &str) -> Self {
        let cols = values.cols();
        Self { values, provenance: vec![provenance; cols], names: (0..cols).map(|j| format!("{prefix}{j}")).collect() }
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn hcat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if self.rows() != other.rows() {
            return Err(FeatureError::Dimension(format!("{} rows vs {} rows", self.rows(), other.rows())));
        }
        Ok(Self {
            values: self.values.hcat(&other.values)?,
            provenance: [self.provenance.clone(), other.provenance.clone()].concat(),
            names: [self.names.clone(), other.names.clone()].concat(),
        })
    }

    /// Columnar CSV: a provenance row, a name row, then one row per node
    /// keyed by transaction id.
    pub fn write_csv(&self, graph: &TemporalGraph, path: &Path) -> Result<(), FeatureError> {
        let io = |source| FeatureError::Io { path: path.to_path_buf(), source };
        if self.rows() != graph.node_count() {
            return Err(FeatureError::Dimension(format!(
                "{} rows for {} nodes",
                self.rows(),
                graph.node_count()
            )));
        }
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let tags: Vec<&str> = self.provenance.iter().map(|p| p.name()).collect();
        writeln!(w, "provenance,{}", tags.join(",")).map_err(io)?;
        writeln!(w, "txId,{}", self.names.join(",")).map_err(io)?;
        for r in 0..self.rows() {
            write!(w, "{}", graph.tx_id(r)).map_err(io)?;
            for v in self.values.row(r) {
                write!(w, ",{v}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Which raw columns feed a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    /// The local block only.
    #[serde(rename = "LF")]
    Local,
    /// Local and aggregated columns.
    #[serde(rename = "AF")]
    All,
}

impl FeatureSet {
    pub fn tag(self) -> &'static str {
        match self {
            FeatureSet::Local => "LF",
            FeatureSet::All => "AF",
        }
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lf" | "local" => Ok(FeatureSet::Local),
            "af" | "all" => Ok(FeatureSet::All),
            other => Err(format!("unknown feature set `{other}` (expected lf or af)")),
        }
    }
}

/// Selects the local prefix or every column and appends embeddings, if
/// given, after the raw features.
pub fn assemble(
    nodes: &NodeTable,
    set: FeatureSet,
    embeddings: Option<&DenseMatrix>,
) -> Result<FeatureMatrix, FeatureError> {
    let all = nodes.features();
    let width = match set {
        FeatureSet::Local => nodes.local_count(),
        FeatureSet::All => nodes.total_count(),
    };
    let values = if width == all.cols() { all.clone() } else { all.select_cols(&(0..width).collect::<Vec<_>>()) };
    let provenance = (0..width)
        .map(|j| if j < nodes.local_count() { Provenance::Local } else { Provenance::Aggregated })
        .collect();
    let names = (0..width).map(|j| format!("f{j}")).collect();
    let base = FeatureMatrix { values, provenance, names };
    match embeddings {
        None => Ok(base),
        Some(e) => {
            if e.rows() != nodes.len() {
                return Err(FeatureError::Dimension(format!(
                    "{} embedding rows for {} nodes",
                    e.rows(),
                    nodes.len()
                )));
            }
            base.hcat(&FeatureMatrix::uniform(e.clone(), Provenance::Embedding, "ne"))
        }
    }
}

/// Neighbour statistics per node. Empty neighbourhoods give zeros and a
/// zero count; std is the sample deviation and 0 for fewer than two values.
pub fn aggregate_neighbor_stats(
    graph: &TemporalGraph,
    config: &AggregateConfig,
) -> Result<FeatureMatrix, FeatureError> {
    config.validate(graph.nodes().local_count())?;
    let width = config.output_width();
    let n = graph.node_count();
    let x = graph.features();
    let mut values = DenseMatrix::zeros(n, width);
    if width > 0 {
        values.as_mut_slice().par_chunks_mut(width).enumerate().for_each(|(i, out)| {
            let mut k = 0;
            for &dir in &config.directions {
                let nbrs = match dir {
                    Direction::In => graph.in_neighbors(i),
                    Direction::Out => graph.out_neighbors(i),
                };
                for &col in &config.source_columns {
                    let vals = nbrs.iter().map(|&j| x.get(j, col));
                    let s = Summary::of(vals);
                    for &stat in &config.statistics {
                        out[k] = s.get(stat);
                        k += 1;
                    }
                }
                out[k] = nbrs.len() as f64;
                k += 1;
            }
        });
    }
    let mut provenance = Vec::with_capacity(width);
    let mut names = Vec::with_capacity(width);
    for &dir in &config.directions {
        for &col in &config.source_columns {
            for &stat in &config.statistics {
                provenance.push(Provenance::Aggregated);
                names.push(format!("{}_{}_f{col}", dir.name(), stat.name()));
            }
        }
        provenance.push(Provenance::Aggregated);
        names.push(format!("{}_count", dir.name()));
    }
    FeatureMatrix::new(values, provenance, names)
}

struct Summary {
    n: usize,
    min: f64,
    max: f64,
    mean: f64,
    std: f64,
}

impl Summary {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut n, mut sum, mut min, mut max) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values.clone() {
            n += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        if n == 0 {
            return Self { n, min: 0.0, max: 0.0, mean: 0.0, std: 0.0 };
        }
        let mean = sum / n as f64;
        let std = if n > 1 {
            let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        // rounding can push the mean a hair outside [min, max]
        Self { n, min, max, mean: mean.clamp(min, max), std }
    }

    fn get(&self, stat: Statistic) -> f64 {
        debug_assert!(self.n > 0 || (self.min == 0.0 && self.max == 0.0));
        match stat {
            Statistic::Min => self.min,
            Statistic::Max => self.max,
            Statistic::Mean => self.mean,
            Statistic::Std => self.std,
        }
    }
}
