//! Reproducible Gaussian sampling and the block-parallel Monte Carlo driver.
//!
//! Every random draw comes from a ChaCha8 stream keyed by
//! `(master_seed, stream_index)`. The Monte Carlo driver cuts the sample index
//! range into fixed blocks of [`BLOCK_SIZE`]; block `b` always reads ChaCha
//! stream `b`, so the draws a sample sees do not depend on which worker runs
//! it. Block results are merged in block order.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{DiscretePath, TimeGrid};

pub type StreamRng = ChaCha8Rng;

/// Samples per block. Part of the reproducibility contract: changing it
/// changes every Monte Carlo result.
pub const BLOCK_SIZE: u64 = 1024;

/// Normal generator pinned into config fingerprints.
pub const NORMAL_ALGORITHM: &str = "chacha8-block1024/rand_distr-ziggurat";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// The same master seed on another stream.
    pub fn with_stream(&self, stream_index: u64) -> Self {
        Self::new(self.master_seed, stream_index)
    }

    pub fn rng(&self) -> StreamRng {
        self.block_rng(0)
    }

    pub fn block_rng(&self, block: u64) -> StreamRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_index.to_le_bytes());
        key[16..24].copy_from_slice(b"bvmax-v1");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(block);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: SeedSpec,
}

impl MCEstimate {
    /// `|mean - target| <= k * std_error + slack`.
    pub fn within(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error + slack
    }

    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error
    }

    pub(crate) fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            ..*self
        }
    }
}

/// Length-`n` Gaussian random walk.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    increments: Vec<f64>,
    partial_sums: Vec<f64>,
}

impl Walk {
    pub fn from_increments(increments: Vec<f64>) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::InvalidArgument("walk length must be >= 1".into()));
        }
        let mut partial_sums = Vec::with_capacity(increments.len() + 1);
        partial_sums.push(0.0);
        let mut acc = 0.0;
        for x in &increments {
            acc += x;
            partial_sums.push(acc);
        }
        Ok(Self {
            increments,
            partial_sums,
        })
    }

    pub fn n(&self) -> usize {
        self.increments.len()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W_0 = 0, W_1, ..., W_n`.
    pub fn partial_sums(&self) -> &[f64] {
        &self.partial_sums
    }

    /// Indicator of `A_n = {W_k <= 0 for all k}`.
    pub fn stays_nonpositive(&self) -> bool {
        self.partial_sums.iter().all(|w| *w <= 0.0)
    }
}

/// One standard normal draw.
#[inline]
pub fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Writes `W_0..W_n` into `sums` (length `n + 1`).
pub(crate) fn fill_walk(rng: &mut StreamRng, sums: &mut [f64]) {
    let mut acc = 0.0;
    sums[0] = 0.0;
    for s in sums.iter_mut().skip(1) {
        acc += normal(rng);
        *s = acc;
    }
}

/// Brownian values `sqrt(T/n) W_i` on the grid, written into `values`.
pub(crate) fn fill_brownian(rng: &mut StreamRng, grid: &TimeGrid, values: &mut [f64]) {
    fill_walk(rng, values);
    let scale = grid.dt().sqrt();
    for v in values.iter_mut() {
        *v *= scale;
    }
}

/// Exact maxima of the Brownian path between consecutive grid points given
/// the grid values: the bridge maximum `(a + b + sqrt((b - a)^2 - 2 dt ln U)) / 2`
/// with `U` uniform on `(0, 1]`. `out` has length `n`.
pub(crate) fn fill_interval_maxima(rng: &mut StreamRng, grid: &TimeGrid, values: &[f64], out: &mut [f64]) {
    let two_dt = 2.0 * grid.dt();
    for (m, w) in out.iter_mut().zip(values.windows(2)) {
        let u: f64 = 1.0 - rng.random::<f64>();
        let d = w[1] - w[0];
        *m = 0.5 * (w[0] + w[1] + (d * d - two_dt * u.ln()).sqrt());
    }
}

/// Bridge increments `x - mean(x)`; returns `|W_n|` before it is pinned to 0.
pub(crate) fn fill_bridge(rng: &mut StreamRng, increments: &mut [f64], sums: &mut [f64]) -> f64 {
    let n = increments.len();
    let mut total = 0.0;
    for x in increments.iter_mut() {
        *x = normal(rng);
        total += *x;
    }
    let mean = total / n as f64;
    let mut acc = 0.0;
    sums[0] = 0.0;
    for (x, s) in increments.iter_mut().zip(sums.iter_mut().skip(1)) {
        *x -= mean;
        acc += *x;
        *s = acc;
    }
    let residual = sums[n].abs();
    sums[n] = 0.0;
    residual
}

pub fn sample_walk(n: usize, seed: SeedSpec) -> Result<Walk> {
    if n == 0 {
        return Err(Error::InvalidArgument("walk length must be >= 1".into()));
    }
    let mut rng = seed.rng();
    let increments = (0..n).map(|_| normal(&mut rng)).collect();
    Walk::from_increments(increments)
}

pub fn sample_brownian(grid: TimeGrid, seed: SeedSpec) -> DiscretePath {
    let mut values = vec![0.0; grid.n() + 1];
    fill_brownian(&mut seed.rng(), &grid, &mut values);
    DiscretePath::from_parts_unchecked(grid, values)
}

/// Walk conditioned on `W_n = 0`, by projecting i.i.d. normals onto the
/// hyperplane `sum x_i = 0`.
pub fn sample_bridge(n: usize, seed: SeedSpec) -> Result<Walk> {
    if n == 0 {
        return Err(Error::InvalidArgument("bridge length must be >= 1".into()));
    }
    let mut increments = vec![0.0; n];
    let mut sums = vec![0.0; n + 1];
    fill_bridge(&mut seed.rng(), &mut increments, &mut sums);
    Ok(Walk {
        increments,
        partial_sums: sums,
    })
}

/// Runs `block_fn` on every block and returns the block results in block order.
///
/// `block_fn` receives the block's RNG and the global sample indices it covers.
pub fn mc_blocks<A, F>(samples: u64, workers: usize, seed: SeedSpec, block_fn: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(&mut StreamRng, u64, Range<u64>) -> Result<A> + Sync,
{
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    let blocks = samples.div_ceil(BLOCK_SIZE);
    let run_block = |b: u64| {
        let start = b * BLOCK_SIZE;
        let end = (start + BLOCK_SIZE).min(samples);
        block_fn(&mut seed.block_rng(b), b, start..end)
    };
    if workers == 1 || blocks <= 1 {
        return (0..blocks).map(run_block).collect();
    }
    let workers = workers.min(blocks as usize);
    let mut slots: Vec<Option<Result<A>>> = (0..blocks).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run_block = &run_block;
                scope.spawn(move || {
                    (w as u64..blocks)
                        .step_by(workers)
                        .map(|b| (b, run_block(b)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (b, r) in h.join().expect("monte carlo worker panicked") {
                slots[b as usize] = Some(r);
            }
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every block is scheduled"))
        .collect()
}

/// Streaming first and second moments (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self, seed: SeedSpec) -> MCEstimate {
        MCEstimate {
            mean: self.mean,
            std_error: (self.variance() / self.count as f64).sqrt(),
            samples: self.count,
            seed,
        }
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples < 2 {
        Err(Error::InvalidArgument(format!("need at least 2 samples, got {samples}")))
    } else {
        Ok(())
    }
}

/// Scalar Monte Carlo estimate of `E[stat]`.
pub fn mc_run<F>(samples: u64, workers: usize, seed: SeedSpec, stat: F) -> Result<MCEstimate>
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    let est = mc_run_vec(samples, workers, seed, 1, || (), |rng, _, out| out[0] = stat(rng))?;
    Ok(est[0])
}

/// Vector-valued Monte Carlo: `stat` writes `dim` outputs per sample, using a
/// per-block scratch value built by `scratch`.
pub fn mc_run_vec<S, Init, F>(
    samples: u64,
    workers: usize,
    seed: SeedSpec,
    dim: usize,
    scratch: Init,
    stat: F,
) -> Result<Vec<MCEstimate>>
where
    Init: Fn() -> S + Sync,
    F: Fn(&mut StreamRng, &mut S, &mut [f64]) + Sync,
{
    check_samples(samples)?;
    let blocks = mc_blocks(samples, workers, seed, |rng, block, range| {
        let mut s = scratch();
        let mut out = vec![0.0; dim];
        let mut acc = vec![Moments::default(); dim];
        for sample in range {
            stat(rng, &mut s, &mut out);
            for (m, &x) in acc.iter_mut().zip(out.iter()) {
                if !x.is_finite() {
                    return Err(Error::NonFinite {
                        seed,
                        block,
                        sample,
                    });
                }
                m.push(x);
            }
        }
        Ok(acc)
    })?;
    let mut total = vec![Moments::default(); dim];
    for b in &blocks {
        for (t, m) in total.iter_mut().zip(b) {
            t.merge(m);
        }
    }
    Ok(total.iter().map(|m| m.estimate(seed)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walk_is_deterministic() {
        let seed = SeedSpec::new(7, 3);
        assert_eq!(sample_walk(20, seed).unwrap(), sample_walk(20, seed).unwrap());
        assert_ne!(
            sample_walk(20, seed).unwrap(),
            sample_walk(20, seed.with_stream(4)).unwrap()
        );
        assert!(sample_walk(0, seed).is_err());
        assert!(sample_bridge(0, seed).is_err());
    }

    #[test]
    fn walk_partial_sums_match_increments() {
        let w = sample_walk(50, SeedSpec::new(1, 1)).unwrap();
        assert_eq!(w.partial_sums()[0], 0.0);
        let mut acc = 0.0;
        for (x, s) in w.increments().iter().zip(&w.partial_sums()[1..]) {
            acc += x;
            assert_eq!(acc, *s);
        }
    }

    #[test]
    fn brownian_is_scaled_walk() {
        let grid = TimeGrid::new(64, 2.5).unwrap();
        let seed = SeedSpec::new(11, 0);
        let path = sample_brownian(grid, seed);
        let walk = sample_walk(64, seed).unwrap();
        let scale = grid.dt().sqrt();
        for (v, w) in path.values().iter().zip(walk.partial_sums()) {
            assert_eq!(*v, scale * w);
        }
        assert_eq!(path.values()[0], 0.0);
    }

    #[test]
    fn bridge_pins_endpoint() {
        let mut rng = SeedSpec::new(5, 5).rng();
        for n in [1usize, 2, 7, 100] {
            let mut inc = vec![0.0; n];
            let mut sums = vec![0.0; n + 1];
            for _ in 0..200 {
                let residual = fill_bridge(&mut rng, &mut inc, &mut sums);
                assert!(residual <= 1e-12, "residual {residual}");
                assert_eq!(sums[n], 0.0);
            }
        }
        let b = sample_bridge(1, SeedSpec::new(1, 2)).unwrap();
        assert_eq!(b.partial_sums(), &[0.0, 0.0]);
    }

    #[test]
    fn block_streams_are_distinct() {
        let seed = SeedSpec::new(9, 0);
        let a: u64 = seed.block_rng(0).random();
        let b: u64 = seed.block_rng(1).random();
        let c: u64 = seed.with_stream(1).block_rng(0).random();
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn mc_run_worker_invariance() {
        let seed = SeedSpec::new(42, 0);
        let stat = |rng: &mut StreamRng| {
            let x = normal(rng);
            x * x + x
        };
        let one = mc_run(10_000, 1, seed, stat).unwrap();
        let eight = mc_run(10_000, 8, seed, stat).unwrap();
        assert_eq!(one, eight);
        let three = mc_run(10_000, 3, seed, stat).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn mc_run_constant_statistic() {
        let est = mc_run(5_000, 2, SeedSpec::new(1, 0), |_| 1.0).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.samples, 5_000);
    }

    #[test]
    fn mc_run_rejects_non_finite() {
        let seed = SeedSpec::new(3, 8);
        let err = mc_run(3_000, 2, seed, |rng| {
            let u: f64 = rng.random();
            if u < 1e-3 {
                f64::NAN
            } else {
                u
            }
        })
        .unwrap_err();
        match err {
            Error::NonFinite { seed: s, .. } => assert_eq!(s, seed),
            other => panic!("unexpected {other}"),
        }
        assert!(mc_run(1, 1, seed, |_| 0.0).is_err());
        assert!(mc_run(10, 0, seed, |_| 0.0).is_err());
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|x| all.push(*x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..333].iter().for_each(|x| a.push(*x));
        xs[333..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-9);
    }
}
