use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{execute, write_rows_csv, ExperimentOutput, Hooks, ResultRow, RunConfig, RunManifest};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Overrides the config worker count.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            seed: None,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.manifest.all_pass
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRow> {
        self.manifest.rows.iter().filter(|r| !r.pass)
    }
}

pub(crate) fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |p| p.get())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `<id>.csv` and `<id>.<table>.csv`; returns the file names.
pub(crate) fn write_outputs(out_dir: &Path, id: &str, output: &ExperimentOutput) -> Result<Vec<String>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut names = vec![format!("{id}.csv")];
    let mut buf = Vec::new();
    write_rows_csv(&output.rows, &mut buf)?;
    write_file(&out_dir.join(&names[0]), &buf)?;
    for (table, bytes) in &output.tables {
        let name = format!("{id}.{table}.csv");
        write_file(&out_dir.join(&name), bytes)?;
        names.push(name);
    }
    Ok(names)
}

/// Effective config in canonical JSON form: seed applied, worker count and
/// output directory dropped (they do not affect results).
pub(crate) fn canonical_config(cfg: &RunConfig, seed: u64) -> serde_json::Value {
    let mut c = cfg.clone();
    c.seed = seed;
    serde_json::to_value(&c).expect("config serializes")
}

/// Validates and executes every experiment, writes result CSVs and a new
/// manifest. The first runtime failure aborts the run.
pub fn run(cfg: &RunConfig, opts: &RunOptions, hooks: &Hooks) -> Result<RunOutcome> {
    cfg.validate()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let workers = opts.workers.or(cfg.workers).unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for exp in &cfg.experiment {
        let output = execute(exp, seed, workers, hooks)?;
        files.extend(write_outputs(&opts.out_dir, &exp.id, &output)?);
        rows.extend(output.rows);
    }
    let manifest = RunManifest::new(canonical_config(cfg, seed), seed, files, rows);
    let manifest_path = manifest.write_new(&opts.out_dir)?;
    Ok(RunOutcome { manifest, manifest_path })
}
