//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [[experiment]]
//! id = "andersen"
//! kind = "andersen_series"
//! order = 64
//! ```
//!
//! Unknown keys are rejected everywhere; errors carry the offending field path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{CylindricalFunction, DirectionKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub experiment: Vec<ExperimentConfig>,
}

fn default_seed() -> u64 {
    20_240_601
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    #[serde(flatten)]
    pub spec: ExperimentSpec,
}

impl ExperimentConfig {
    pub fn new(id: impl Into<String>, spec: ExperimentSpec) -> Self {
        Self { id: id.into(), spec }
    }
}

macro_rules! experiment_kinds {
    ($($variant:ident($params:ident)),* $(,)?) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(tag = "kind", rename_all = "snake_case")]
        pub enum ExperimentSpec {
            $($variant($params),)*
        }

        /// Externally tagged mirror, so parameter errors keep their field path.
        #[derive(Deserialize)]
        #[serde(rename_all = "snake_case")]
        enum TaggedSpec {
            $($variant($params),)*
        }

        impl From<TaggedSpec> for ExperimentSpec {
            fn from(t: TaggedSpec) -> Self {
                match t {
                    $(TaggedSpec::$variant(p) => ExperimentSpec::$variant(p),)*
                }
            }
        }
    };
}

experiment_kinds! {
    AndersenSeries(AndersenParams),
    HalflineBounds(HalflineBoundsParams),
    HalflineMc(StayParams),
    BridgeStay(StayParams),
    BridgeArgmax(ArgmaxParams),
    HalfspacePerimeter(PerimeterParams),
    GradMax(GradMaxParams),
    SecondDifference(SecondDiffParams),
    SigmaFd(SigmaFdParams),
    DoubleIbp(DoubleIbpParams),
    ChainMax(ChainMaxParams),
    Density(DensityParams),
    TvBound(TvBoundParams),
    LimitIntegral(LimitParams),
    Concentration(ConcentrationParams),
}

macro_rules! params {
    ($(#[$m:meta])* $name:ident { $($(#[$fm:meta])* $field:ident : $ty:ty = $default:expr),* $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $($(#[$fm])* pub $field: $ty,)*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }
    };
}

params!(AndersenParams { order: usize = 64 });

params!(HalflineBoundsParams {
    /// Bounds are checked exactly for `1 <= n <= n_max`.
    n_max: u64 = 64,
    asymptote_n: u64 = 1000,
    asymptote_tolerance: f64 = 3e-4,
});

params!(StayParams {
    ns: Vec<usize> = vec![2, 5, 10, 100],
    samples: u64 = 1_000_000,
});

params!(ArgmaxParams {
    n: usize = 20,
    samples: u64 = 100_000,
    p_min: f64 = 1e-3,
});

params!(PerimeterParams {
    /// Dimensions of `{W_d > 0}` whose exact perimeter is reported.
    dims: Vec<usize> = vec![1, 10, 100],
    tube_dim: usize = 1,
    eps: f64 = 0.01,
    samples: u64 = 1_000_000,
    bridge_ns: Vec<usize> = vec![2, 10, 100],
    bridge_samples: u64 = 1_000_000,
});

params!(GradMaxParams {
    n: usize = 1000,
    horizon: f64 = 1.0,
    samples: u64 = 1000,
    /// Relative to `sqrt(T)`.
    eps: f64 = 1e-5,
    tolerance: f64 = 1e-6,
    directions: Vec<DirectionKind> = DirectionKind::CATALOG.to_vec(),
    min_fraction: f64 = 0.99,
});

params!(SecondDiffParams {
    n: usize = 1000,
    horizon: f64 = 1.0,
    samples: u64 = 1000,
    /// Relative to `sqrt(T)`.
    eps: f64 = 1e-3,
    min_fraction: f64 = 0.99,
    /// First bump size on the tied-peak path, halved twice.
    tied_eps: f64 = 1e-3,
    ratio_tolerance: f64 = 0.15,
});

params!(SigmaFdParams {
    n: usize = 1000,
    horizon: f64 = 1.0,
    samples: u64 = 1000,
    eps: f64 = 1e-6,
    min_fraction: f64 = 0.99,
});

params!(DoubleIbpParams {
    n: usize = 200,
    horizon: f64 = 1.0,
    samples: u64 = 100_000,
    functions: Vec<String> = CylindricalFunction::CATALOG_IDS.iter().map(|s| s.to_string()).collect(),
    k: DirectionKind = DirectionKind::FirstHalf,
    h: DirectionKind = DirectionKind::Cosine,
    /// `W_t` for the linear-functional pairing.
    t_fraction: f64 = 0.5,
});

params!(ChainMaxParams {
    n: usize = 1000,
    horizon: f64 = 1.0,
    samples: u64 = 1_000_000,
    functions: Vec<String> = vec!["one".into(), "sigmoid".into()],
    k: DirectionKind = DirectionKind::Constant,
    h: DirectionKind = DirectionKind::Constant,
    /// Defaults to `samples^{-1/5} sd(Delta)`.
    bandwidth: Option<f64> = None,
});

params!(DensityParams {
    ts: Vec<f64> = vec![0.25, 0.5, 0.75],
    n: usize = 2000,
    horizon: f64 = 1.0,
    samples: u64 = 1_000_000,
    constancy_tolerance: f64 = 1e-10,
    rel_tolerance: f64 = 0.02,
    bandwidth: Option<f64> = None,
    /// Also estimate the density of the grid-maximum difference (informational).
    grid_comparison: bool = true,
});

params!(TvBoundParams {
    ns: Vec<usize> = vec![100, 1000, 2000],
    horizon: f64 = 1.0,
    /// Second horizon for the `sqrt(T)` scaling check.
    scaled_horizon: f64 = 4.0,
    rel_change_tolerance: f64 = 0.01,
});

params!(LimitParams {
    tolerance: f64 = 1e-6,
    riemann_n: usize = 2000,
    riemann_rel_tolerance: f64 = 0.05,
});

params!(ConcentrationParams {
    n: usize = 1000,
    horizon: f64 = 1.0,
    samples: u64 = 1_000_000,
    t_fraction: f64 = 0.5,
    /// All ladders are relative to `sqrt(T)`. The both-excess trend is
    /// checked on `eps_ladder`; `eps_fine` rows are reported only.
    eps_ladder: Vec<f64> = vec![0.8, 0.4, 0.2, 0.1],
    eps_fine: Vec<f64> = vec![0.05, 0.025, 0.01],
    witness_delta: f64 = 0.05,
    /// Regression floor for the both-excess fraction at the smallest eps.
    witness_floor: f64 = 0.87,
    excess_eps: f64 = 0.01,
    delta_ladder: Vec<f64> = vec![0.2, 0.1, 0.05, 0.025],
    gap_deltas: Vec<f64> = vec![1e-1, 1e-2, 1e-3, 1e-4],
    scatter_points: usize = 5000,
});

fn bad(path: String, message: impl Into<String>) -> Error {
    Error::Config {
        path,
        message: message.into(),
    }
}

fn check_n(path: &str, field: &str, n: usize, min: usize) -> Result<()> {
    if n < min || n > 1_000_000 {
        return Err(bad(format!("{path}.{field}"), format!("must be in {min}..=1000000, got {n}")));
    }
    Ok(())
}

fn check_samples(path: &str, samples: u64) -> Result<()> {
    if !(2..=1_000_000_000).contains(&samples) {
        return Err(bad(format!("{path}.samples"), format!("must be in 2..=1e9, got {samples}")));
    }
    Ok(())
}

fn check_pos(path: &str, field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(bad(format!("{path}.{field}"), format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_all_pos(path: &str, field: &str, vs: &[f64]) -> Result<()> {
    if vs.is_empty() {
        return Err(bad(format!("{path}.{field}"), "must not be empty"));
    }
    vs.iter().try_for_each(|&v| check_pos(path, field, v))
}

fn check_fraction(path: &str, field: &str, v: f64, open: bool) -> Result<()> {
    let ok = if open { v > 0.0 && v < 1.0 } else { (0.0..=1.0).contains(&v) };
    if !ok {
        return Err(bad(format!("{path}.{field}"), format!("must be a fraction, got {v}")));
    }
    Ok(())
}

fn check_functions(path: &str, ids: &[String]) -> Result<()> {
    if ids.is_empty() {
        return Err(bad(format!("{path}.functions"), "must not be empty"));
    }
    for id in ids {
        if !CylindricalFunction::CATALOG_IDS.contains(&id.as_str()) {
            return Err(bad(
                format!("{path}.functions"),
                format!("unknown test function `{id}`, expected one of {:?}", CylindricalFunction::CATALOG_IDS),
            ));
        }
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::AndersenSeries(_) => "andersen_series",
            ExperimentSpec::HalflineBounds(_) => "halfline_bounds",
            ExperimentSpec::HalflineMc(_) => "halfline_mc",
            ExperimentSpec::BridgeStay(_) => "bridge_stay",
            ExperimentSpec::BridgeArgmax(_) => "bridge_argmax",
            ExperimentSpec::HalfspacePerimeter(_) => "halfspace_perimeter",
            ExperimentSpec::GradMax(_) => "grad_max",
            ExperimentSpec::SecondDifference(_) => "second_difference",
            ExperimentSpec::SigmaFd(_) => "sigma_fd",
            ExperimentSpec::DoubleIbp(_) => "double_ibp",
            ExperimentSpec::ChainMax(_) => "chain_max",
            ExperimentSpec::Density(_) => "density",
            ExperimentSpec::TvBound(_) => "tv_bound",
            ExperimentSpec::LimitIntegral(_) => "limit_integral",
            ExperimentSpec::Concentration(_) => "concentration",
        }
    }

    /// Range checks; `path` prefixes reported field paths.
    pub fn validate(&self, path: &str) -> Result<()> {
        use ExperimentSpec::*;
        match self {
            AndersenSeries(p) => {
                if !(1..=4096).contains(&p.order) {
                    return Err(bad(format!("{path}.order"), "must be in 1..=4096"));
                }
            }
            HalflineBounds(p) => {
                if !(1..=4096).contains(&p.n_max) {
                    return Err(bad(format!("{path}.n_max"), "must be in 1..=4096"));
                }
                if p.asymptote_n == 0 {
                    return Err(bad(format!("{path}.asymptote_n"), "must be >= 1"));
                }
                check_pos(path, "asymptote_tolerance", p.asymptote_tolerance)?;
            }
            HalflineMc(p) | BridgeStay(p) => {
                let min = if matches!(self, BridgeStay(_)) { 2 } else { 1 };
                if p.ns.is_empty() {
                    return Err(bad(format!("{path}.ns"), "must not be empty"));
                }
                for &n in &p.ns {
                    check_n(path, "ns", n, min)?;
                }
                check_samples(path, p.samples)?;
            }
            BridgeArgmax(p) => {
                check_n(path, "n", p.n, 2)?;
                check_samples(path, p.samples)?;
                check_fraction(path, "p_min", p.p_min, true)?;
            }
            HalfspacePerimeter(p) => {
                if p.dims.is_empty() || p.dims.contains(&0) || p.tube_dim == 0 {
                    return Err(bad(format!("{path}.dims"), "dimensions must be >= 1"));
                }
                check_pos(path, "eps", p.eps)?;
                check_samples(path, p.samples)?;
                for &n in &p.bridge_ns {
                    check_n(path, "bridge_ns", n, 2)?;
                }
                check_samples(path, p.bridge_samples)?;
            }
            GradMax(p) => {
                check_n(path, "n", p.n, 2)?;
                check_pos(path, "horizon", p.horizon)?;
                check_samples(path, p.samples)?;
                check_pos(path, "eps", p.eps)?;
                check_pos(path, "tolerance", p.tolerance)?;
                check_fraction(path, "min_fraction", p.min_fraction, false)?;
                if p.directions.is_empty() {
                    return Err(bad(format!("{path}.directions"), "must not be empty"));
                }
            }
            SecondDifference(p) => {
                check_n(path, "n", p.n, 2)?;
                check_pos(path, "horizon", p.horizon)?;
                check_samples(path, p.samples)?;
                check_pos(path, "eps", p.eps)?;
                check_pos(path, "tied_eps", p.tied_eps)?;
                check_pos(path, "ratio_tolerance", p.ratio_tolerance)?;
                check_fraction(path, "min_fraction", p.min_fraction, false)?;
            }
            SigmaFd(p) => {
                check_n(path, "n", p.n, 2)?;
                check_pos(path, "horizon", p.horizon)?;
                check_samples(path, p.samples)?;
                check_pos(path, "eps", p.eps)?;
                check_fraction(path, "min_fraction", p.min_fraction, false)?;
            }
            DoubleIbp(p) => {
                check_n(path, "n", p.n, 4)?;
                check_pos(path, "horizon", p.horizon)?;
                check_samples(path, p.samples)?;
                check_functions(path, &p.functions)?;
                check_fraction(path, "t_fraction", p.t_fraction, true)?;
            }
            ChainMax(p) => {
                check_n(path, "n", p.n, 4)?;
                check_pos(path, "horizon", p.horizon)?;
                check_samples(path, p.samples)?;
                check_functions(path, &p.functions)?;
                if let Some(b) = p.bandwidth {
                    check_pos(path, "bandwidth", b)?;
                }
            }
            Density(p) => {
                check_n(path, "n", p.n, 2)?;
                check_pos(path, "horizon", p.horizon)?;
                check_samples(path, p.samples)?;
                if p.ts.is_empty() {
                    return Err(bad(format!("{path}.ts"), "must not be empty"));
                }
                for &t in &p.ts {
                    check_fraction(path, "ts", t, true)?;
                }
                check_pos(path, "constancy_tolerance", p.constancy_tolerance)?;
                check_pos(path, "rel_tolerance", p.rel_tolerance)?;
                if let Some(b) = p.bandwidth {
                    check_pos(path, "bandwidth", b)?;
                }
            }
            TvBound(p) => {
                if p.ns.len() < 2 {
                    return Err(bad(format!("{path}.ns"), "needs at least two sizes"));
                }
                for &n in &p.ns {
                    if !(3..=20_000).contains(&n) {
                        return Err(bad(format!("{path}.ns"), format!("sizes must be in 3..=20000, got {n}")));
                    }
                }
                check_pos(path, "horizon", p.horizon)?;
                check_pos(path, "scaled_horizon", p.scaled_horizon)?;
                check_pos(path, "rel_change_tolerance", p.rel_change_tolerance)?;
            }
            LimitIntegral(p) => {
                check_pos(path, "tolerance", p.tolerance)?;
                check_pos(path, "riemann_rel_tolerance", p.riemann_rel_tolerance)?;
                if !(3..=20_000).contains(&p.riemann_n) {
                    return Err(bad(format!("{path}.riemann_n"), "must be in 3..=20000"));
                }
            }
            Concentration(p) => {
                check_n(path, "n", p.n, 4)?;
                check_pos(path, "horizon", p.horizon)?;
                check_samples(path, p.samples)?;
                check_fraction(path, "t_fraction", p.t_fraction, true)?;
                check_all_pos(path, "eps_ladder", &p.eps_ladder)?;
                if !p.eps_fine.is_empty() {
                    check_all_pos(path, "eps_fine", &p.eps_fine)?;
                }
                check_fraction(path, "witness_floor", p.witness_floor, false)?;
                check_all_pos(path, "delta_ladder", &p.delta_ladder)?;
                check_all_pos(path, "gap_deltas", &p.gap_deltas)?;
                check_pos(path, "witness_delta", p.witness_delta)?;
                check_pos(path, "excess_eps", p.excess_eps)?;
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    experiment: Vec<toml::Table>,
}

fn take_string(table: &mut toml::Table, path: &str, key: &str) -> Result<String> {
    match table.remove(key) {
        Some(toml::Value::String(s)) => Ok(s),
        Some(other) => Err(bad(format!("{path}.{key}"), format!("expected a string, got {}", other.type_str()))),
        None => Err(bad(path.to_string(), format!("missing field `{key}`"))),
    }
}

fn parse_experiment(index: usize, mut table: toml::Table) -> Result<ExperimentConfig> {
    let path = format!("experiment[{index}]");
    let id = take_string(&mut table, &path, "id")?;
    let kind = take_string(&mut table, &path, "kind")?;
    let tagged = toml::Value::Table(toml::Table::from_iter([(kind.clone(), toml::Value::Table(table))]));
    let spec: TaggedSpec = serde_path_to_error::deserialize(tagged).map_err(|e| {
        // drop the leading kind segment of the path
        let inner = e.path().to_string();
        let field = inner.split_once('.').map(|(_, rest)| rest.to_string());
        let message = e.into_inner().message().to_string();
        match field {
            Some(f) => bad(format!("{path}.{f}"), message),
            None if message.contains("unknown variant") => bad(format!("{path}.kind"), format!("unknown kind `{kind}`")),
            None => bad(path.clone(), message),
        }
    })?;
    Ok(ExperimentConfig { id, spec: spec.into() })
}

impl RunConfig {
    pub fn new(seed: u64, experiment: Vec<ExperimentConfig>) -> Self {
        Self {
            seed,
            workers: None,
            out: None,
            experiment,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| bad("<toml>".into(), e.to_string()))?;
        let raw: RawRunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            bad(path, e.into_inner().message().to_string())
        })?;
        let experiment = raw
            .experiment
            .into_iter()
            .enumerate()
            .map(|(i, t)| parse_experiment(i, t))
            .collect::<Result<Vec<_>>>()?;
        let cfg = RunConfig {
            seed: raw.seed,
            workers: raw.workers,
            out: raw.out,
            experiment,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.is_empty() {
            return Err(bad("experiment".into(), "experiment list is empty"));
        }
        if self.workers == Some(0) {
            return Err(bad("workers".into(), "must be >= 1"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, e) in self.experiment.iter().enumerate() {
            let path = format!("experiment[{i}]");
            if e.id.is_empty() || !e.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(bad(format!("{path}.id"), format!("ids are [A-Za-z0-9_-]+, got `{}`", e.id)));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(bad(format!("{path}.id"), format!("duplicate id `{}`", e.id)));
            }
            e.spec.validate(&path)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
