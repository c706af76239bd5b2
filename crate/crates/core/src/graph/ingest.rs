//! Reader and writer for the three-file CSV release layout:
//!
//! * features: headerless `txId,ts,f2,...,fK`
//! * edges: header `txId1,txId2`
//! * classes: header `txId,class`, class in `{1, 2, unknown}`
//!
//! UTF-8, LF or CRLF line endings, no quoted fields.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::label::Label;
use crate::numerics::DenseMatrix;

use super::{GraphError, NodeTable, TemporalGraph, TxId, DEFAULT_LOCAL_COUNT};

pub const FEATURES_FILE: &str = "elliptic_txs_features.csv";
pub const EDGES_FILE: &str = "elliptic_txs_edgelist.csv";
pub const CLASSES_FILE: &str = "elliptic_txs_classes.csv";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetPaths {
    pub features: PathBuf,
    pub edges: PathBuf,
    pub classes: PathBuf,
}

impl DatasetPaths {
    /// Standard release file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            features: dir.join(FEATURES_FILE),
            edges: dir.join(EDGES_FILE),
            classes: dir.join(CLASSES_FILE),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IngestOptions {
    pub local_count: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { local_count: DEFAULT_LOCAL_COUNT }
    }
}

pub fn ingest_dir(dir: impl AsRef<Path>, options: IngestOptions) -> Result<TemporalGraph, GraphError> {
    ingest(&DatasetPaths::in_dir(dir), options)
}

pub fn ingest(paths: &DatasetPaths, options: IngestOptions) -> Result<TemporalGraph, GraphError> {
    let nodes = read_features(&paths.features, options)?;
    let edges = read_pairs(&paths.edges, |a, b, file, line| {
        Ok((parse_id(a, file, line)?, parse_id(b, file, line)?))
    })?;
    let labels = read_pairs(&paths.classes, |a, b, file, line| {
        let id = parse_id(a, file, line)?;
        let label = Label::parse(b).ok_or_else(|| GraphError::Parse {
            file: file.to_string(),
            line,
            message: format!("class `{b}` is not one of 1, 2, unknown"),
        })?;
        Ok((id, label))
    })?;
    // from_parts reports positions as 1-based entry numbers; shift by the header
    TemporalGraph::from_parts(nodes, &edges, &labels).map_err(|e| match e {
        GraphError::MissingEndpoint { from, to, line } => {
            GraphError::MissingEndpoint { from, to, line: line + 1 }
        }
        GraphError::UnknownLabelledNode { id, line } => GraphError::UnknownLabelledNode { id, line: line + 1 },
        GraphError::DuplicateLabel { id, line } => GraphError::DuplicateLabel { id, line: line + 1 },
        other => other,
    })
}

fn open(path: &Path) -> Result<csv::Reader<BufReader<File>>, GraphError> {
    let file = File::open(path).map_err(|source| GraphError::Io { path: path.to_path_buf(), source })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_reader(BufReader::new(file)))
}

fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned())
}

fn record_error(path: &Path, e: csv::Error) -> GraphError {
    let line = e.position().map_or(0, |p| p.line());
    GraphError::Parse { file: file_name(path), line, message: e.to_string() }
}

fn parse_id(raw: &str, file: &str, line: u64) -> Result<TxId, GraphError> {
    raw.trim().parse::<u64>().map(TxId).map_err(|_| GraphError::Parse {
        file: file.to_string(),
        line,
        message: format!("transaction id `{raw}` is not an unsigned integer"),
    })
}

fn read_features(path: &Path, options: IngestOptions) -> Result<NodeTable, GraphError> {
    let name = file_name(path);
    let mut reader = open(path)?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| record_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected || expected < 2 {
            return Err(GraphError::Parse {
                file: name,
                line,
                message: format!("expected {expected} columns, found {}", record.len()),
            });
        }
        let id = parse_id(&record[0], &name, line)?;
        if !seen.insert(id) {
            return Err(GraphError::DuplicateNode { id, file: name, line });
        }
        ids.push(id);
        for (col, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| GraphError::Parse {
                file: name.clone(),
                line,
                message: format!("column {}: `{field}` is not a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(GraphError::Parse {
                    file: name.clone(),
                    line,
                    message: format!("column {}: non-finite value", col + 1),
                });
            }
            values.push(v);
        }
    }
    let cols = width.map_or(0, |w| w - 1);
    let features = DenseMatrix::from_vec(ids.len(), cols, values)?;
    NodeTable::new(ids, features, options.local_count)
}

fn read_pairs<T>(
    path: &Path,
    parse: impl Fn(&str, &str, &str, u64) -> Result<T, GraphError>,
) -> Result<Vec<T>, GraphError> {
    let name = file_name(path);
    let mut reader = open(path)?;
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| record_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if k == 0 {
            // header
            if record.len() != 2 {
                return Err(GraphError::Parse { file: name, line, message: "expected a two-column header".into() });
            }
            continue;
        }
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != 2 {
            return Err(GraphError::Parse {
                file: name,
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        out.push(parse(&record[0], &record[1], &name, line)?);
    }
    Ok(out)
}

/// Writes the graph back to the three-file layout, nodes in index order.
pub fn export(graph: &TemporalGraph, paths: &DatasetPaths) -> Result<(), GraphError> {
    let create = |p: &Path| {
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|source| GraphError::Io { path: parent.to_path_buf(), source })?;
        }
        File::create(p)
            .map(BufWriter::new)
            .map_err(|source| GraphError::Io { path: p.to_path_buf(), source })
    };
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| GraphError::Io { path: p.clone(), source }
    };

    let mut w = create(&paths.features)?;
    for i in 0..graph.node_count() {
        write!(w, "{}", graph.tx_id(i)).map_err(io(&paths.features))?;
        for v in graph.features().row(i) {
            write!(w, ",{v}").map_err(io(&paths.features))?;
        }
        writeln!(w).map_err(io(&paths.features))?;
    }
    w.flush().map_err(io(&paths.features))?;

    let mut w = create(&paths.edges)?;
    writeln!(w, "txId1,txId2").map_err(io(&paths.edges))?;
    for &(u, v) in graph.edges() {
        writeln!(w, "{},{}", graph.tx_id(u), graph.tx_id(v)).map_err(io(&paths.edges))?;
    }
    w.flush().map_err(io(&paths.edges))?;

    let mut w = create(&paths.classes)?;
    writeln!(w, "txId,class").map_err(io(&paths.classes))?;
    for i in 0..graph.node_count() {
        writeln!(w, "{},{}", graph.tx_id(i), graph.label(i).encode()).map_err(io(&paths.classes))?;
    }
    w.flush().map_err(io(&paths.classes))
}
