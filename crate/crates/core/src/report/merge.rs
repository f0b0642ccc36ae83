use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

use super::{ResultRow, RunManifest};

/// Rows of several runs sharing experiment, parameters, label and abscissa.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergedRow {
    pub experiment: String,
    pub label: String,
    pub x: Option<f64>,
    /// Sample-weighted mean over runs.
    pub estimate: f64,
    /// `sqrt(sum w_i^2 se_i^2) / sum w_i`.
    pub std_error: Option<f64>,
    pub reference: Option<f64>,
    pub tolerance: Option<f64>,
    /// Every contributing row passed.
    pub pass: bool,
    pub runs: u64,
    pub samples: u64,
    pub param_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub manifests: usize,
    pub rows: Vec<MergedRow>,
    pub files: Vec<PathBuf>,
}

type Key = (String, String, String, Option<u64>);

fn key(r: &ResultRow) -> Key {
    (r.experiment.clone(), r.param_fingerprint.clone(), r.label.clone(), r.x.map(f64::to_bits))
}

/// Repeated seeds reproduce the same row, so only distinct seeds are pooled;
/// `runs` still counts every contributing manifest.
fn pool(all: &[&ResultRow]) -> MergedRow {
    let first = all[0];
    let mut seen = std::collections::BTreeSet::new();
    let rows: Vec<&ResultRow> = all
        .iter()
        .copied()
        .filter(|r| seen.insert((r.master_seed, r.stream_index)))
        .collect();
    let weights: Vec<f64> = rows.iter().map(|r| r.samples.max(1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let estimate = rows.iter().zip(&weights).map(|(r, w)| w * r.estimate).sum::<f64>() / total;
    let std_error = rows
        .iter()
        .zip(&weights)
        .map(|(r, w)| r.std_error.map(|s| (w * s).powi(2)))
        .sum::<Option<f64>>()
        .map(|v| v.sqrt() / total);
    MergedRow {
        experiment: first.experiment.clone(),
        label: first.label.clone(),
        x: first.x,
        estimate,
        std_error,
        reference: first.reference,
        tolerance: first.tolerance,
        pass: all.iter().all(|r| r.pass),
        runs: all.len() as u64,
        samples: rows.iter().map(|r| r.samples).sum(),
        param_fingerprint: first.param_fingerprint.clone(),
    }
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Merges manifests into `report.csv` plus one `series/<experiment>__<label>.csv`
/// per labelled series with abscissae.
pub fn report(manifest_paths: &[PathBuf], out_dir: &Path) -> Result<ReportSummary> {
    if manifest_paths.is_empty() {
        return Err(Error::Report("no manifests given".into()));
    }
    let manifests = manifest_paths
        .iter()
        .map(|p| RunManifest::load(p))
        .collect::<Result<Vec<_>>>()?;

    let mut configs: BTreeMap<&str, &serde_json::Value> = BTreeMap::new();
    let mut param_owner: BTreeMap<&str, &str> = BTreeMap::new();
    for (m, path) in manifests.iter().zip(manifest_paths) {
        if let Some(prev) = configs.insert(&m.config_fingerprint, &m.config) {
            if prev != &m.config {
                return Err(Error::Report(format!(
                    "fingerprint collision: {} has differing parameters in {}",
                    m.config_fingerprint,
                    path.display()
                )));
            }
        }
        for r in &m.rows {
            if let Some(prev) = param_owner.insert(&r.param_fingerprint, &r.experiment) {
                if prev != r.experiment {
                    return Err(Error::Report(format!(
                        "fingerprint collision: parameters {} used by `{prev}` and `{}`",
                        r.param_fingerprint, r.experiment
                    )));
                }
            }
        }
    }

    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, Vec<&ResultRow>> = BTreeMap::new();
    for r in manifests.iter().flat_map(|m| &m.rows) {
        let k = key(r);
        let entry = groups.entry(k.clone()).or_default();
        if entry.is_empty() {
            order.push(k);
        }
        entry.push(r);
    }
    let rows: Vec<MergedRow> = order.iter().map(|k| pool(&groups[k])).collect();

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();
    let report_path = out_dir.join("report.csv");
    let mut wtr = csv::Writer::from_path(&report_path)?;
    for r in &rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io(&report_path, e))?;
    files.push(report_path);

    let mut series: BTreeMap<(String, String), Vec<&MergedRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.x.is_some()) {
        series.entry((r.experiment.clone(), r.label.clone())).or_default().push(r);
    }
    if !series.is_empty() {
        let dir = out_dir.join("series");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for ((exp, label), mut pts) in series {
            pts.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite abscissae"));
            let path = dir.join(format!("{}__{}.csv", file_stem(&exp), file_stem(&label)));
            let mut wtr = csv::Writer::from_path(&path)?;
            wtr.write_record(["x", "estimate", "std_error", "reference", "runs"])?;
            for p in pts {
                wtr.serialize((p.x, p.estimate, p.std_error, p.reference, p.runs))?;
            }
            wtr.flush().map_err(|e| Error::io(&path, e))?;
            files.push(path);
        }
    }
    Ok(ReportSummary {
        manifests: manifests.len(),
        rows,
        files,
    })
}
