//! Verification suites. `Full` evaluates every acceptance criterion at its
//! stated size; `Quick` runs the exact identities plus small Monte Carlo.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

use super::config::*;
use super::run::{canonical_config, default_workers, write_outputs};
use super::{execute, ExperimentConfig, Hooks, ResultRow, RunConfig, RunManifest, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Quick,
    Full,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Preset::Quick),
            "full" => Ok(Preset::Full),
            other => Err(Error::InvalidArgument(format!("unknown preset `{other}` (quick|full)"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::Quick => "quick",
            Preset::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub number: u8,
    pub name: &'static str,
    pub experiments: Vec<ExperimentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub number: u8,
    pub name: String,
    pub pass: bool,
    pub checks: usize,
    /// Failed checks as `observed vs expected (tolerance)`, or runtime errors.
    pub failures: Vec<String>,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} criterion {:>2} {} ({} checks, {:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.number,
            self.name,
            self.checks,
            self.seconds
        )?;
        for msg in &self.failures {
            write!(f, "\n       {msg}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub preset: Preset,
    pub outcomes: Vec<CriterionOutcome>,
    pub manifest_path: std::path::PathBuf,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }
}

fn exp(id: &str, spec: ExperimentSpec) -> ExperimentConfig {
    ExperimentConfig::new(id, spec)
}

/// Criteria evaluated by a preset, in order.
pub fn criteria(preset: Preset) -> Vec<Criterion> {
    use ExperimentSpec::*;
    let full = preset == Preset::Full;
    let mut out = vec![
        Criterion {
            number: 1,
            name: "series identity for the half-line probabilities",
            experiments: vec![exp("c01_andersen", AndersenSeries(AndersenParams { order: 64 }))],
        },
        Criterion {
            number: 2,
            name: "bridge stay probability 1/n",
            experiments: vec![exp(
                "c02_bridge_stay",
                BridgeStay(if full {
                    StayParams::default()
                } else {
                    StayParams {
                        ns: vec![2, 5, 10],
                        samples: 20_000,
                    }
                }),
            )],
        },
        Criterion {
            number: 3,
            name: "bridge argmax uniformity",
            experiments: vec![exp(
                "c03_bridge_argmax",
                BridgeArgmax(ArgmaxParams {
                    samples: if full { 100_000 } else { 10_000 },
                    ..Default::default()
                }),
            )],
        },
        Criterion {
            number: 4,
            name: "halfspace and restricted perimeters",
            experiments: vec![exp(
                "c04_perimeter",
                HalfspacePerimeter(if full {
                    PerimeterParams::default()
                } else {
                    PerimeterParams {
                        samples: 100_000,
                        bridge_ns: vec![2, 10],
                        bridge_samples: 20_000,
                        ..Default::default()
                    }
                }),
            )],
        },
        Criterion {
            number: 5,
            name: "half-line bounds and asymptote",
            experiments: vec![exp("c05_halfline_bounds", HalflineBounds(HalflineBoundsParams::default()))],
        },
        Criterion {
            number: 6,
            name: "gradient of the maximum",
            experiments: vec![exp(
                "c06_grad_max",
                GradMax(if full {
                    GradMaxParams::default()
                } else {
                    GradMaxParams {
                        n: 200,
                        samples: 200,
                        ..Default::default()
                    }
                }),
            )],
        },
        Criterion {
            number: 7,
            name: "vanishing second differences and tied-peak divergence",
            experiments: vec![exp(
                "c07_second_difference",
                SecondDifference(if full {
                    SecondDiffParams::default()
                } else {
                    SecondDiffParams {
                        n: 200,
                        samples: 200,
                        ..Default::default()
                    }
                }),
            )],
        },
        Criterion {
            number: 8,
            name: "double integration by parts",
            experiments: vec![exp(
                "c08_double_ibp",
                DoubleIbp(if full {
                    DoubleIbpParams::default()
                } else {
                    DoubleIbpParams {
                        n: 50,
                        samples: 20_000,
                        ..Default::default()
                    }
                }),
            )],
        },
    ];
    if full {
        out.extend([
            Criterion {
                number: 9,
                name: "chain-rule cross-check of the second derivative",
                experiments: vec![exp("c09_chain_max", ChainMax(ChainMaxParams::default()))],
            },
            Criterion {
                number: 10,
                name: "density of the maximum difference at zero",
                experiments: vec![exp("c10_density", Density(DensityParams::default()))],
            },
        ]);
    }
    out.extend([
        Criterion {
            number: 11,
            name: "total-variation bound",
            experiments: vec![exp("c11_tv_bound", TvBound(TvBoundParams::default()))],
        },
        Criterion {
            number: 12,
            name: "limit integral",
            experiments: vec![exp("c12_limit_integral", LimitIntegral(LimitParams::default()))],
        },
    ]);
    if full {
        out.push(Criterion {
            number: 13,
            name: "concentration trends",
            experiments: vec![exp("c13_concentration", Concentration(ConcentrationParams::default()))],
        });
    }
    out
}

/// Monte Carlo experiments re-run with 1 and 8 workers.
fn worker_probe() -> Vec<ExperimentConfig> {
    use ExperimentSpec::*;
    vec![
        exp("c14_workers_bridge", BridgeStay(StayParams { ns: vec![5, 50], samples: 20_000 })),
        exp(
            "c14_workers_chain",
            ChainMax(ChainMaxParams {
                n: 100,
                samples: 20_000,
                functions: vec!["sigmoid".into()],
                ..Default::default()
            }),
        ),
    ]
}

fn csv_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") {
            let bytes = std::fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
            files.push((name, bytes));
        }
    }
    files.sort();
    Ok(files)
}

fn reproducibility(opts: &RunOptions, seed: u64, workers: usize, hooks: &Hooks) -> Result<(usize, Vec<String>)> {
    let mut failures = Vec::new();
    let mut checks = 0;
    let base = opts.out_dir.join("reproducibility");
    let mut listings = Vec::new();
    for run in ["a", "b"] {
        let sub = RunOptions {
            out_dir: base.join(run),
            seed: Some(seed),
            workers: Some(workers),
        };
        let report = verify(Preset::Quick, &sub, hooks, |_| {})?;
        if !report.all_pass() {
            failures.push(format!("quick preset run `{run}` did not pass"));
        }
        listings.push(csv_files(&sub.out_dir)?);
    }
    checks += 1;
    if listings[0] != listings[1] {
        let differing: Vec<&str> = listings[0]
            .iter()
            .zip(&listings[1])
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.0.as_str())
            .collect();
        failures.push(format!("quick preset CSVs differ between runs: {differing:?}"));
    }
    for e in worker_probe() {
        checks += 1;
        let one = execute(&e, seed, 1, hooks)?;
        let eight = execute(&e, seed, 8, hooks)?;
        if one != eight {
            failures.push(format!("`{}` differs between 1 and 8 workers", e.id));
        }
    }
    Ok((checks, failures))
}

/// Runs the preset, writing result CSVs and one manifest under `opts.out_dir`.
/// `progress` sees each criterion as it completes. Experiment errors fail
/// their criterion without aborting the suite.
pub fn verify(preset: Preset, opts: &RunOptions, hooks: &Hooks, mut progress: impl FnMut(&CriterionOutcome)) -> Result<VerifyReport> {
    let seed = opts.seed.unwrap_or(RunConfig::new(0, vec![]).seed);
    let workers = opts.workers.unwrap_or_else(default_workers);
    let crits = criteria(preset);
    let mut all_rows: Vec<ResultRow> = Vec::new();
    let mut files = Vec::new();
    let mut outcomes = Vec::new();
    for c in &crits {
        let start = Instant::now();
        let mut checks = 0;
        let mut failures = Vec::new();
        for e in &c.experiments {
            match execute(e, seed, workers, hooks) {
                Ok(output) => {
                    files.extend(write_outputs(&opts.out_dir, &e.id, &output)?);
                    checks += output.rows.iter().filter(|r| r.reference.is_some() || r.tolerance.is_some() || !r.pass).count();
                    failures.extend(output.rows.iter().filter(|r| !r.pass).map(ResultRow::describe));
                    all_rows.extend(output.rows);
                }
                Err(err) => failures.push(err.to_string()),
            }
        }
        let outcome = CriterionOutcome {
            number: c.number,
            name: c.name.to_string(),
            pass: failures.is_empty(),
            checks,
            failures,
            seconds: start.elapsed().as_secs_f64(),
        };
        progress(&outcome);
        outcomes.push(outcome);
    }
    if preset == Preset::Full {
        let start = Instant::now();
        let (checks, failures) = match reproducibility(opts, seed, workers, hooks) {
            Ok(r) => r,
            Err(e) => (1, vec![e.to_string()]),
        };
        let outcome = CriterionOutcome {
            number: 14,
            name: "reproducibility".into(),
            pass: failures.is_empty(),
            checks,
            failures,
            seconds: start.elapsed().as_secs_f64(),
        };
        progress(&outcome);
        outcomes.push(outcome);
    }
    let cfg = RunConfig::new(seed, crits.into_iter().flat_map(|c| c.experiments).collect());
    let manifest = RunManifest::new(canonical_config(&cfg, seed), seed, files, all_rows);
    let manifest_path = manifest.write_new(&opts.out_dir)?;
    Ok(VerifyReport {
        preset,
        outcomes,
        manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_preset_covers_thirteen_experiment_criteria() {
        let numbers: Vec<u8> = criteria(Preset::Full).iter().map(|c| c.number).collect();
        assert_eq!(numbers, (1..=13).collect::<Vec<_>>());
        for c in criteria(Preset::Full).iter().chain(&criteria(Preset::Quick)) {
            for e in &c.experiments {
                e.spec.validate(&e.id).unwrap();
            }
        }
    }

    #[test]
    fn preset_parses() {
        assert_eq!("quick".parse::<Preset>().unwrap(), Preset::Quick);
        assert!("slow".parse::<Preset>().is_err());
    }
}
