//! The quick verification preset, fault injection through the library hooks,
//! and bitwise reproducibility of runs.

use bvmax::fluctuation::halfline_prob_exact;
use bvmax::rational::ExactRational;
use bvmax::report::{self, Hooks, Preset, RunConfig, RunOptions};

fn corrupted_halfline(n: u64) -> ExactRational {
    if n == 10 {
        ExactRational::new(46_190, 262_144).unwrap()
    } else {
        halfline_prob_exact(n)
    }
}

#[test]
fn quick_preset_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let report = report::verify(Preset::Quick, &RunOptions::new(tmp.path()), &Hooks::default(), |_| {}).unwrap();
    for o in &report.outcomes {
        assert!(o.pass, "{o}");
    }
    let numbers: Vec<u8> = report.outcomes.iter().map(|o| o.number).collect();
    assert_eq!(numbers, vec![1, 2, 3, 4, 5, 6, 7, 8, 11, 12]);
    assert!(report.manifest_path.exists());
}

#[test]
fn corrupted_reference_fails_and_names_the_check() {
    let tmp = tempfile::tempdir().unwrap();
    let hooks = Hooks {
        halfline_prob_exact: corrupted_halfline,
    };
    let mut lines = Vec::new();
    let report = report::verify(Preset::Quick, &RunOptions::new(tmp.path()), &hooks, |o| lines.push(o.to_string())).unwrap();
    assert!(!report.all_pass());
    // the series check and the exact bounds consume the reference values
    let failed: Vec<u8> = report.outcomes.iter().filter(|o| !o.pass).map(|o| o.number).collect();
    assert_eq!(failed, vec![1, 5], "{lines:?}");
    let text = lines.join("\n");
    assert!(text.contains("FAIL criterion  1"), "{text}");
    assert!(text.contains("series_vs_central_binomial"), "{text}");
    assert!(text.contains("FAIL criterion  5") && text.contains("halfline_vs_product"), "{text}");
}

const CONFIG: &str = r#"
seed = 77

[[experiment]]
id = "argmax"
kind = "bridge_argmax"
n = 12
samples = 30000

[[experiment]]
id = "witness"
kind = "concentration"
n = 200
samples = 30000
scatter_points = 200
"#;

fn csv_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn runs_are_bitwise_reproducible_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig::parse(CONFIG).unwrap();
    let mut outputs = Vec::new();
    for (i, workers) in [1usize, 1, 3].into_iter().enumerate() {
        let dir = tmp.path().join(format!("r{i}"));
        let opts = RunOptions {
            workers: Some(workers),
            ..RunOptions::new(&dir)
        };
        report::run(&cfg, &opts, &Hooks::default()).unwrap();
        outputs.push(csv_bytes(&dir));
    }
    assert!(outputs[0].len() >= 4, "{:?}", outputs[0].iter().map(|f| &f.0).collect::<Vec<_>>());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn changing_one_experiment_leaves_the_other_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let a = RunConfig::parse(CONFIG).unwrap();
    let b = RunConfig::parse(&CONFIG.replace("samples = 30000\nscatter_points", "samples = 20000\nscatter_points")).unwrap();
    report::run(&a, &RunOptions::new(tmp.path().join("a")), &Hooks::default()).unwrap();
    report::run(&b, &RunOptions::new(tmp.path().join("b")), &Hooks::default()).unwrap();
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("argmax.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}
