//! Runs a small TOML experiment config twice with different master seeds,
//! then merges the two manifests into a consolidated report.
//!
//! usage: config_run [out_dir]

use std::path::PathBuf;

use bvmax::report::{self, Hooks, RunConfig, RunOptions};

const CONFIG: &str = r#"
seed = 1

[[experiment]]
id = "stay"
kind = "halfline_mc"
ns = [2, 10]
samples = 20000

[[experiment]]
id = "perimeter"
kind = "halfspace_perimeter"
dims = [1, 10]
samples = 20000
bridge_ns = [2, 10]
bridge_samples = 20000
"#;

fn main() -> bvmax::Result<()> {
    let out: PathBuf = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("bvmax-config-run"), PathBuf::from);
    let mut cfg = RunConfig::parse(CONFIG)?;
    let mut manifests = Vec::new();
    for seed in [1, 2] {
        cfg.seed = seed;
        let outcome = report::run(&cfg, &RunOptions::new(out.join(format!("seed{seed}"))), &Hooks::default())?;
        println!("seed {seed}: {} rows, all pass = {}", outcome.manifest.rows.len(), outcome.all_pass());
        manifests.push(outcome.manifest_path);
    }
    let summary = report::report(&manifests, &out.join("report"))?;
    println!("merged {} manifests into {} rows", summary.manifests, summary.rows.len());
    for row in summary.rows.iter().take(6) {
        println!("  {} {} x={:?}: {:.5} (runs {})", row.experiment, row.label, row.x, row.estimate, row.runs);
    }
    Ok(())
}
