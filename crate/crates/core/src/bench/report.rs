//! Report files and the plain-text results table.
//!
//! Layout under an output directory:
//!
//! ```text
//! reports/<id>.json   full report
//! reports/<id>.csv    one table row
//! series/<id>.csv     time_step,f1,support_illicit,flags
//! artifacts/<id>.json trained model (and <id>.embedding.json for +NE)
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{ExperimentOutcome, ExperimentReport, ReportRow};
use super::BenchError;

pub const TABLE_HEADER: [&str; 5] = ["Method", "Illicit Precision", "Illicit Recall", "Illicit F1", "MicroAVG F1"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPaths {
    pub report_json: PathBuf,
    pub report_csv: PathBuf,
    pub series_csv: PathBuf,
    pub artifact: PathBuf,
    pub embedding_artifact: Option<PathBuf>,
}

fn write(path: &Path, body: &str) -> Result<(), BenchError> {
    let io = |source| BenchError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, body).map_err(io)
}

fn row_csv(row: &ReportRow) -> String {
    format!(
        "{}\n{},{},{},{},{}\n",
        TABLE_HEADER.join(","),
        row.method,
        row.illicit_precision,
        row.illicit_recall,
        row.illicit_f1,
        row.micro_f1
    )
}

fn series_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("time_step,f1,support_illicit,flags\n");
    for s in &report.series {
        let f1 = s.f1.map_or_else(String::new, |v| v.to_string());
        let _ = writeln!(out, "{},{},{},{}", s.time_step, f1, s.support_illicit, s.flags.join(";"));
    }
    out
}

/// Writes every file for one experiment under `root`.
pub fn write_outcome(root: &Path, outcome: &ExperimentOutcome) -> Result<OutputPaths, BenchError> {
    let id = &outcome.report.id;
    let paths = OutputPaths {
        report_json: root.join("reports").join(format!("{id}.json")),
        report_csv: root.join("reports").join(format!("{id}.csv")),
        series_csv: root.join("series").join(format!("{id}.csv")),
        artifact: root.join("artifacts").join(format!("{id}.json")),
        embedding_artifact: outcome
            .embedding_artifact
            .as_ref()
            .map(|_| root.join("artifacts").join(format!("{id}.embedding.json"))),
    };
    let json = serde_json::to_string_pretty(&outcome.report).map_err(|e| BenchError::Format(e.to_string()))?;
    write(&paths.report_json, &(json + "\n"))?;
    write(&paths.report_csv, &row_csv(&outcome.report.row))?;
    write(&paths.series_csv, &series_csv(&outcome.report))?;
    outcome.artifact.save(&paths.artifact)?;
    if let (Some(a), Some(p)) = (&outcome.embedding_artifact, &paths.embedding_artifact) {
        a.save(p)?;
    }
    Ok(paths)
}

/// Every `reports/*.json` under `root`, ordered by id.
pub fn load_reports(root: &Path) -> Result<Vec<ExperimentReport>, BenchError> {
    let dir = root.join("reports");
    let entries = match fs::read_dir(&dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(BenchError::Io { path: dir, source }),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let raw = fs::read_to_string(&p).map_err(|source| BenchError::Io { path: p.clone(), source })?;
        let report: ExperimentReport =
            serde_json::from_str(&raw).map_err(|e| BenchError::Format(format!("{}: {e}", p.display())))?;
        out.push(report);
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Fixed-width text table with three decimals.
pub fn render_table(rows: &[ReportRow]) -> String {
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                format!("{:.3}", r.illicit_precision),
                format!("{:.3}", r.illicit_recall),
                format!("{:.3}", r.illicit_f1),
                format!("{:.3}", r.micro_f1),
            ]
        })
        .collect();
    let mut widths: Vec<usize> = TABLE_HEADER.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cols: &[&str]| {
        let parts: Vec<String> = cols
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (c, w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut out, &TABLE_HEADER);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &cells {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
