//! Experiment configs, execution, manifests, consolidated reports and the
//! verification suites behind the `bvmax` binary.

pub mod config;
mod experiments;
pub mod manifest;
mod merge;
mod run;
pub mod verify;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rational::ExactRational;
use crate::sampling::SeedSpec;

pub use config::{ExperimentConfig, ExperimentSpec, RunConfig};
pub use experiments::execute;
pub use manifest::RunManifest;
pub use merge::{report, ReportSummary};
pub use run::{run, RunOptions, RunOutcome};
pub use verify::{verify, CriterionOutcome, Preset, VerifyReport};

/// One checked (or informational) number produced by an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub label: String,
    pub x: Option<f64>,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub reference: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub samples: u64,
    pub master_seed: u64,
    pub stream_index: u64,
    pub param_fingerprint: String,
}

impl ResultRow {
    /// `observed vs expected (tolerance)` for failure listings.
    pub fn describe(&self) -> String {
        let mut s = format!("{}/{}", self.experiment, self.label);
        if let Some(x) = self.x {
            s.push_str(&format!("[x={x}]"));
        }
        s.push_str(&format!(": observed {}", self.estimate));
        if let Some(r) = self.reference {
            s.push_str(&format!(", expected {r}"));
        }
        if let Some(t) = self.tolerance {
            s.push_str(&format!(", tolerance {t}"));
        }
        s
    }
}

/// Rows plus auxiliary CSV tables (`<id>.<name>.csv`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub tables: Vec<(String, Vec<u8>)>,
}

/// Replaceable internals, used to check that the suites detect faults.
#[derive(Debug, Clone, Copy)]
pub struct Hooks {
    pub halfline_prob_exact: fn(u64) -> ExactRational,
}

impl Default for Hooks {
    fn default() -> Self {
        Self {
            halfline_prob_exact: crate::fluctuation::halfline_prob_exact,
        }
    }
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the canonical JSON form (object keys sorted).
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value).expect("serializable");
    sha256_hex(canonical.to_string().as_bytes())
}

/// Stream index of an experiment: derived from its id so that adding or
/// reordering experiments never changes another experiment's numbers.
pub fn stream_for(id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn experiment_seed(master_seed: u64, id: &str) -> SeedSpec {
    SeedSpec::new(master_seed, stream_for(id))
}

pub(crate) fn write_rows_csv<W: std::io::Write>(rows: &[ResultRow], writer: W) -> crate::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in rows {
        wtr.serialize(r)?;
    }
    if rows.is_empty() {
        wtr.write_record([
            "experiment",
            "label",
            "x",
            "estimate",
            "std_error",
            "reference",
            "tolerance",
            "pass",
            "samples",
            "master_seed",
            "stream_index",
            "param_fingerprint",
        ])?;
    }
    wtr.flush().map_err(|e| crate::Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn fingerprint_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":[1,2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"b":[1,2],"a":1}"#).unwrap();
        assert_eq!(fingerprint(&a), fingerprint(&b));
    }

    #[test]
    fn streams_depend_on_id_only() {
        assert_eq!(stream_for("x"), stream_for("x"));
        assert_ne!(stream_for("x"), stream_for("y"));
    }
}
