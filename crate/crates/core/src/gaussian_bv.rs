//! Gaussian perimeters in `(R^n, gamma_n)`.
//!
//! For a halfspace `{<a, x> > c}` the Gaussian perimeter reduces by rotation
//! invariance to the one-dimensional density `phi(c / |a|)`. The restricted
//! perimeter of `{W_n > 0}` on the stay-below event `A_n` is
//! `(2 pi)^{-1/2}` times the bridge stay probability.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fluctuation::mc_bridge_stay_prob;
use crate::sampling::{self, MCEstimate, SeedSpec};
use crate::{std_normal_pdf, INV_SQRT_2PI};

/// The open halfspace `{x : <normal, x> > offset}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSpec {
    normal: Vec<f64>,
    offset: f64,
}

impl HalfspaceSpec {
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let norm2: f64 = normal.iter().map(|v| v * v).sum();
        if normal.is_empty() || !(norm2 > 0.0) || !norm2.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidArgument(
                "halfspace needs a nonzero finite normal and finite offset".into(),
            ));
        }
        Ok(Self { normal, offset })
    }

    /// `{W_n > 0}` in increment coordinates: normal `(1, ..., 1)`.
    pub fn walk_endpoint(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n], 0.0)
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn norm(&self) -> f64 {
        self.normal.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Signed distance of the boundary hyperplane from the origin.
    pub fn standardized_offset(&self) -> f64 {
        self.offset / self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceMethod {
    Exact,
    Tube,
    BridgeMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceMeasureEstimate {
    pub value: f64,
    pub method: SurfaceMethod,
    /// For Monte Carlo methods: `3 * std_error + bias bound`.
    pub error_bound: f64,
    pub std_error: f64,
    pub bias_bound: f64,
    pub samples: u64,
    pub seed: Option<SeedSpec>,
}

impl SurfaceMeasureEstimate {
    pub fn csv_header() -> [&'static str; 7] {
        ["n", "method", "value", "error_bound", "std_error", "samples", "seed"]
    }

    pub fn csv_record(&self, n: usize) -> Vec<String> {
        let method = match self.method {
            SurfaceMethod::Exact => "exact",
            SurfaceMethod::Tube => "tube",
            SurfaceMethod::BridgeMc => "bridge-mc",
        };
        vec![
            n.to_string(),
            method.to_string(),
            self.value.to_string(),
            self.error_bound.to_string(),
            self.std_error.to_string(),
            self.samples.to_string(),
            self.seed
                .map(|s| format!("{}:{}", s.master_seed, s.stream_index))
                .unwrap_or_default(),
        ]
    }
}

pub fn halfspace_perimeter(spec: &HalfspaceSpec) -> SurfaceMeasureEstimate {
    SurfaceMeasureEstimate {
        value: std_normal_pdf(spec.standardized_offset()),
        method: SurfaceMethod::Exact,
        error_bound: 0.0,
        std_error: 0.0,
        bias_bound: 0.0,
        samples: 0,
        seed: None,
    }
}

/// `|D_gamma 1_{W_n > 0}|(A_n)` by bridge Monte Carlo.
pub fn restricted_perimeter_bridge(n: usize, samples: u64, workers: usize, seed: SeedSpec) -> Result<SurfaceMeasureEstimate> {
    let stay = mc_bridge_stay_prob(n, samples, workers, seed)?;
    let est = stay.scaled(INV_SQRT_2PI);
    Ok(SurfaceMeasureEstimate {
        value: est.mean,
        method: SurfaceMethod::BridgeMc,
        error_bound: 3.0 * est.std_error,
        std_error: est.std_error,
        bias_bound: 0.0,
        samples,
        seed: Some(seed),
    })
}

/// Exact `gamma(tube) / (2 eps)` for the slab `|z - c| < eps`, `z ~ N(0, 1)`.
pub fn tube_mass_ratio(c: f64, eps: f64) -> f64 {
    let s = std::f64::consts::SQRT_2;
    0.5 * (erf((c + eps) / s) - erf((c - eps) / s)) / (2.0 * eps)
}

/// Deterministic bias bound `eps^2 / 6 * sup |phi''|` of the tube ratio.
pub fn tube_bias_bound(eps: f64) -> f64 {
    eps * eps / 6.0 * INV_SQRT_2PI
}

fn projection(spec: &HalfspaceSpec, rng: &mut sampling::StreamRng, inv_norm: f64) -> f64 {
    spec.normal
        .iter()
        .map(|a| a * sampling::normal(rng))
        .sum::<f64>()
        * inv_norm
}

/// Monte Carlo `gamma({|<a, x>/|a| - c/|a|| < eps}) / (2 eps)` in the full dimension.
pub fn tube_perimeter(spec: &HalfspaceSpec, eps: f64, samples: u64, workers: usize, seed: SeedSpec) -> Result<SurfaceMeasureEstimate> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("tube width must be positive, got {eps}")));
    }
    let inv_norm = 1.0 / spec.norm();
    let c = spec.standardized_offset();
    let est = sampling::mc_run(samples, workers, seed, |rng| {
        let z = projection(spec, rng, inv_norm);
        if (z - c).abs() < eps {
            1.0 / (2.0 * eps)
        } else {
            0.0
        }
    })?;
    let bias_bound = tube_bias_bound(eps);
    Ok(SurfaceMeasureEstimate {
        value: est.mean,
        method: SurfaceMethod::Tube,
        error_bound: 3.0 * est.std_error + bias_bound,
        std_error: est.std_error,
        bias_bound,
        samples,
        seed: Some(seed),
    })
}

/// Fraction of the tube mass of `{X > 0}`, `X = W_n / sqrt(n)`, lying at
/// distance more than `band` from the level set `{X = 0}`.
///
/// The estimate is `E[1{band < |X| < eps}] / E[1{|X| < eps}]` as a ratio
/// estimator; its standard error uses the delta method.
pub fn concentration_offband_mass(n: usize, eps: f64, band: f64, samples: u64, workers: usize, seed: SeedSpec) -> Result<MCEstimate> {
    if n == 0 || !(eps > 0.0) || !(band > 0.0) {
        return Err(Error::InvalidArgument("need n >= 1, eps > 0, band > 0".into()));
    }
    let spec = HalfspaceSpec::walk_endpoint(n)?;
    let inv_norm = 1.0 / spec.norm();
    let est = sampling::mc_run_vec(samples, workers, seed, 2, || (), |rng, _, out| {
        let x = projection(&spec, rng, inv_norm).abs();
        let in_tube = x < eps;
        out[0] = if in_tube { 1.0 } else { 0.0 };
        out[1] = if in_tube && x > band { 1.0 } else { 0.0 };
    })?;
    let (tube, off) = (est[0], est[1]);
    if tube.mean == 0.0 {
        return Err(Error::TooFewSamples {
            effective: 0,
            required: 1,
        });
    }
    let frac = off.mean / tube.mean;
    // binomial error of the fraction among tube hits
    let hits = tube.mean * samples as f64;
    let std_error = (frac * (1.0 - frac) / hits).sqrt();
    Ok(MCEstimate {
        mean: frac,
        std_error,
        samples: hits.round() as u64,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_halfspace_values() {
        for n in [1usize, 2, 7, 100] {
            let p = halfspace_perimeter(&HalfspaceSpec::walk_endpoint(n).unwrap());
            assert!((p.value - INV_SQRT_2PI).abs() < 1e-16);
            assert_eq!(p.method, SurfaceMethod::Exact);
        }
        let p = halfspace_perimeter(&HalfspaceSpec::new(vec![0.6, 0.8], 1.0).unwrap());
        assert!((p.value - 0.241_970_724_519_143_37).abs() < 1e-15);
        let far = halfspace_perimeter(&HalfspaceSpec::new(vec![1.0], 1e3).unwrap());
        assert_eq!(far.value, 0.0);
        assert!(HalfspaceSpec::new(vec![0.0, 0.0], 0.0).is_err());
        assert!(HalfspaceSpec::new(vec![], 0.0).is_err());
    }

    #[test]
    fn tube_bias_is_second_order() {
        for c in [0.0, 0.5, 1.3] {
            let bias = |eps: f64| tube_mass_ratio(c, eps) - std_normal_pdf(c);
            let ratio = bias(0.02) / bias(0.01);
            assert!((ratio - 4.0).abs() < 0.01, "c = {c}: ratio {ratio}");
            assert!(bias(0.01).abs() <= tube_bias_bound(0.01));
        }
    }

    #[test]
    fn tube_far_offset_is_zero() {
        let spec = HalfspaceSpec::new(vec![1.0, 1.0], 1e6).unwrap();
        let t = tube_perimeter(&spec, 0.1, 2_000, 1, SeedSpec::new(1, 1)).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(tube_perimeter(&spec, 0.0, 10, 1, SeedSpec::new(1, 1)).is_err());
    }

    #[test]
    fn offband_empty_when_band_exceeds_eps() {
        let f = concentration_offband_mass(5, 0.1, 0.2, 50_000, 1, SeedSpec::new(2, 0)).unwrap();
        assert_eq!(f.mean, 0.0);
    }
}
