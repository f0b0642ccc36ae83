//! Finite-difference Malliavin derivatives of path functionals and
//! integration-by-parts estimators of the second derivative measure `D^2 M`.
//!
//! All estimators work with the discrete maximum `M_n = max_i w_i`. For `t`
//! in the grid interval `(t_j, t_{j+1})` its gradient is
//! `d_t M_n = 1{Delta_j > 0}` with `Delta_j = M_[j+1,n] - M_[0,j]`
//! (see [`IntervalSplit`](crate::path::IntervalSplit)), which is what the
//! chain-rule estimator conditions on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{
    adjoint_unchecked, bump, interval_split, segment_max_unchecked, top_two_gap,
    wiener_integral_unchecked, CylindricalFunction, DiscretePath, Direction, TimeGrid,
};
use crate::sampling::{self, mc_blocks, MCEstimate, SeedSpec};

/// Central finite-difference settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FDConfig {
    pub eps: f64,
    pub tolerance: f64,
}

impl FDConfig {
    pub fn new(eps: f64, tolerance: f64) -> Result<Self> {
        if !(eps > 0.0) || !(tolerance > 0.0) {
            return Err(Error::InvalidArgument("fd eps and tolerance must be positive".into()));
        }
        Ok(Self { eps, tolerance })
    }

    /// `eps = 1e-5 sqrt(T)` for first differences.
    pub fn first_order(horizon: f64) -> Self {
        Self {
            eps: 1e-5 * horizon.sqrt(),
            tolerance: 1e-6,
        }
    }

    /// `eps = 1e-3 sqrt(T)`; second differences only certify zeros.
    pub fn second_order(horizon: f64) -> Self {
        Self {
            eps: 1e-3 * horizon.sqrt(),
            tolerance: 1e-6,
        }
    }
}

/// `M_n`.
pub fn max_functional(path: &DiscretePath) -> f64 {
    path.global_max().max_value
}

/// First attainment time of the maximum.
pub fn sigma_functional(path: &DiscretePath) -> f64 {
    path.grid().time(path.global_max().argmax_index)
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("functional returned non-finite value in {what}")))
    }
}

/// `(F(w + eps h) - F(w - eps h)) / (2 eps)`.
pub fn fd_directional<F>(f: F, path: &DiscretePath, h: &Direction, cfg: &FDConfig) -> Result<f64>
where
    F: Fn(&DiscretePath) -> f64,
{
    let up = finite(f(&bump(path, h, cfg.eps)?), "fd_directional")?;
    let dn = finite(f(&bump(path, h, -cfg.eps)?), "fd_directional")?;
    Ok((up - dn) / (2.0 * cfg.eps))
}

/// Mixed central second difference along `h` and `k`.
pub fn fd_second<F>(f: F, path: &DiscretePath, h: &Direction, k: &Direction, cfg: &FDConfig) -> Result<f64>
where
    F: Fn(&DiscretePath) -> f64,
{
    let e = cfg.eps;
    let eval = |a: f64, b: f64| -> Result<f64> {
        finite(f(&bump(&bump(path, h, a)?, k, b)?), "fd_second")
    };
    let pp = eval(e, e)?;
    let pm = eval(e, -e)?;
    let mp = eval(-e, e)?;
    let mm = eval(-e, -e)?;
    Ok(((pp - pm) - (mp - mm)) / (4.0 * e * e))
}

/// Size below which a mixed second difference of `M` is indistinguishable
/// from rounding: four evaluations of magnitude `A` divided by `4 eps^2`.
pub fn second_difference_rounding_floor(path: &DiscretePath, h: &Direction, k: &Direction, eps: f64) -> f64 {
    let scale = path.values().iter().fold(0.0f64, |m, v| m.max(v.abs())) + eps * (h.sup_norm() + k.sup_norm());
    16.0 * f64::EPSILON * scale / (4.0 * eps * eps)
}

/// Paths whose top-two gap is below this are excluded from FD checks.
pub fn gap_threshold(cfg: &FDConfig, h: &Direction) -> f64 {
    10.0 * cfg.eps * h.sup_norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradMaxCheck {
    pub samples: u64,
    /// Paths that passed the gap rule.
    pub checked: u64,
    pub passed: u64,
    pub excluded: u64,
    /// `passed / checked`.
    pub fraction: f64,
    /// Largest `|fd - h(sigma)|` among checked paths.
    pub max_error: f64,
    pub seed: SeedSpec,
}

/// Checks `d_h M = h(sigma)` by central differences on sampled paths.
pub fn verify_grad_max(grid: TimeGrid, h: &Direction, samples: u64, workers: usize, seed: SeedSpec, cfg: &FDConfig) -> Result<GradMaxCheck> {
    grid.ensure_same(h.grid(), "verify_grad_max")?;
    let threshold = gap_threshold(cfg, h);
    let blocks = mc_blocks(samples, workers, seed, |rng, _, range| {
        let mut values = vec![0.0; grid.n() + 1];
        let (mut checked, mut passed, mut excluded, mut max_error) = (0u64, 0u64, 0u64, 0.0f64);
        for _ in range {
            sampling::fill_brownian(rng, &grid, &mut values);
            if top_two_gap(&values) <= threshold {
                excluded += 1;
                continue;
            }
            let path = DiscretePath::from_parts_unchecked(grid, values.clone());
            let fd = fd_directional(max_functional, &path, h, cfg)?;
            let exact = h.at(path.global_max().argmax_index);
            let err = (fd - exact).abs();
            checked += 1;
            max_error = max_error.max(err);
            if err <= cfg.tolerance {
                passed += 1;
            }
        }
        Ok((checked, passed, excluded, max_error))
    })?;
    let (mut checked, mut passed, mut excluded, mut max_error) = (0, 0, 0, 0.0f64);
    for (c, p, e, m) in blocks {
        checked += c;
        passed += p;
        excluded += e;
        max_error = max_error.max(m);
    }
    Ok(GradMaxCheck {
        samples,
        checked,
        passed,
        excluded,
        fraction: if checked == 0 { 0.0 } else { passed as f64 / checked as f64 },
        max_error,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondDiffCheck {
    pub samples: u64,
    pub checked: u64,
    /// Checked paths whose mixed second difference is zero to rounding.
    pub zero: u64,
    pub excluded: u64,
    pub fraction: f64,
    pub max_abs: f64,
    pub seed: SeedSpec,
}

/// Off the tie set `M` is locally the linear map `w -> w_sigma`, so its mixed
/// second differences vanish once the bump is smaller than the top-two gap.
pub fn second_difference_zero_fraction(
    grid: TimeGrid,
    h: &Direction,
    k: &Direction,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
    cfg: &FDConfig,
) -> Result<SecondDiffCheck> {
    grid.ensure_same(h.grid(), "second difference")?;
    grid.ensure_same(k.grid(), "second difference")?;
    let threshold = 10.0 * cfg.eps * h.sup_norm().max(k.sup_norm());
    let blocks = mc_blocks(samples, workers, seed, |rng, _, range| {
        let mut values = vec![0.0; grid.n() + 1];
        let (mut checked, mut zero, mut excluded, mut max_abs) = (0u64, 0u64, 0u64, 0.0f64);
        for _ in range {
            sampling::fill_brownian(rng, &grid, &mut values);
            if top_two_gap(&values) <= threshold {
                excluded += 1;
                continue;
            }
            let path = DiscretePath::from_parts_unchecked(grid, values.clone());
            let d2 = fd_second(max_functional, &path, h, k, cfg)?;
            checked += 1;
            max_abs = max_abs.max(d2.abs());
            if d2.abs() <= second_difference_rounding_floor(&path, h, k, cfg.eps) {
                zero += 1;
            }
        }
        Ok((checked, zero, excluded, max_abs))
    })?;
    let (mut checked, mut zero, mut excluded, mut max_abs) = (0, 0, 0, 0.0f64);
    for (c, z, e, m) in blocks {
        checked += c;
        zero += z;
        excluded += e;
        max_abs = max_abs.max(m);
    }
    Ok(SecondDiffCheck {
        samples,
        checked,
        zero,
        excluded,
        fraction: if checked == 0 { 0.0 } else { zero as f64 / checked as f64 },
        max_abs,
        seed,
    })
}

/// Path on `n = 8`, `T = 1` with two exactly tied peaks at `t = 2/8` and
/// `t = 5/8`; every other value is at least `0.5` below the peak.
pub fn tied_peak_path() -> DiscretePath {
    DiscretePath::from_values(1.0, vec![0.0, 0.5, 1.0, 0.25, 0.5, 1.0, 0.5, 0.25, 0.0])
        .expect("handcrafted path is valid")
}

/// `d*_k (d*_h g) = d_k d_h g - d_k g I(h) - g <k', h'> - I(k) (d_h g - g I(h))`.
pub fn skorokhod_second_adjoint(g: &CylindricalFunction, k: &Direction, h: &Direction, path: &DiscretePath) -> Result<f64> {
    g.grid().ensure_same(path.grid(), "second adjoint")?;
    g.grid().ensure_same(k.grid(), "second adjoint")?;
    g.grid().ensure_same(h.grid(), "second adjoint")?;
    let kh = k.inner(h)?;
    Ok(second_adjoint_unchecked(g, k, h, kh, path.values()))
}

fn second_adjoint_unchecked(g: &CylindricalFunction, k: &Direction, h: &Direction, kh: f64, values: &[f64]) -> f64 {
    let jet = g.jet(values);
    let ik = wiener_integral_unchecked(k.density(), values);
    let ih = wiener_integral_unchecked(h.density(), values);
    let dk = g.contract1(&jet.gradient, k);
    let dh = g.contract1(&jet.gradient, h);
    let dkh = g.contract2(&jet.hessian, k, h);
    dkh - dk * ih - jet.value * kh - ik * (dh - jet.value * ih)
}

fn check_grids(grid: &TimeGrid, g: &CylindricalFunction, dirs: &[&Direction]) -> Result<()> {
    grid.ensure_same(g.grid(), "estimator test function")?;
    for d in dirs {
        grid.ensure_same(d.grid(), "estimator direction")?;
    }
    Ok(())
}

/// `E[X(w) d*_k(d*_h g)]` for a path functional `X`.
pub fn weak_second_pairing<X>(
    x: X,
    g: &CylindricalFunction,
    k: &Direction,
    h: &Direction,
    grid: TimeGrid,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
) -> Result<MCEstimate>
where
    X: Fn(&[f64]) -> f64 + Sync,
{
    check_grids(&grid, g, &[k, h])?;
    let kh = k.inner(h)?;
    sampling::mc_run_vec(
        samples,
        workers,
        seed,
        1,
        || vec![0.0; grid.n() + 1],
        |rng, values, out| {
            sampling::fill_brownian(rng, &grid, values);
            out[0] = x(values) * second_adjoint_unchecked(g, k, h, kh, values);
        },
    )
    .map(|v| v[0])
}

/// `E[M d*_k(d*_h g)]`, the pairing `int g d<D^2 M, k' (x) h'>`.
pub fn d2m_weak_estimator(
    g: &CylindricalFunction,
    k: &Direction,
    h: &Direction,
    grid: TimeGrid,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
) -> Result<MCEstimate> {
    weak_second_pairing(
        |v| segment_max_unchecked(v, 0, v.len() - 1).max_value,
        g,
        k,
        h,
        grid,
        samples,
        workers,
        seed,
    )
}

/// `E[g d_h M + M d*_h g]` with `d_h M` by central differences; vanishes by duality.
pub fn duality_residual(
    g: &CylindricalFunction,
    h: &Direction,
    grid: TimeGrid,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
    cfg: &FDConfig,
) -> Result<MCEstimate> {
    check_grids(&grid, g, &[h])?;
    sampling::mc_run_vec(
        samples,
        workers,
        seed,
        1,
        || (vec![0.0; grid.n() + 1], vec![0.0; grid.n() + 1], vec![0.0; grid.n() + 1]),
        |rng, (values, up, dn), out| {
            sampling::fill_brownian(rng, &grid, values);
            for ((u, d), (w, p)) in up.iter_mut().zip(dn.iter_mut()).zip(values.iter().zip(h.primitive())) {
                *u = w + cfg.eps * p;
                *d = w - cfg.eps * p;
            }
            let n = grid.n();
            let fd = (segment_max_unchecked(up, 0, n).max_value - segment_max_unchecked(dn, 0, n).max_value) / (2.0 * cfg.eps);
            let m = segment_max_unchecked(values, 0, n).max_value;
            out[0] = g.jet(values).value * fd + m * adjoint_unchecked(g, h, values);
        },
    )
    .map(|v| v[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `(1 - |u|)_+`.
    Triangular,
    Gaussian,
}

impl Kernel {
    #[inline]
    pub fn weight(&self, x: f64, bandwidth: f64) -> f64 {
        let u = x / bandwidth;
        match self {
            Kernel::Triangular => {
                let a = 1.0 - u.abs();
                if a > 0.0 {
                    a / bandwidth
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => crate::std_normal_pdf(u) / bandwidth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub target: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64, kernel: Kernel) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self {
            bandwidth,
            kernel,
            target: 0.0,
        })
    }

    /// `b = samples^{-1/5} sd(Delta_t M)` with `sd = sqrt(T (1 - 2/pi))`, the
    /// standard deviation of a difference of independent half-normals of
    /// variances `t` and `T - t` (free of `t`).
    pub fn default_for(samples: u64, horizon: f64) -> Self {
        let sd = (horizon * (1.0 - 2.0 / std::f64::consts::PI)).sqrt();
        Self {
            bandwidth: (samples as f64).powf(-0.2) * sd,
            kernel: Kernel::Triangular,
            target: 0.0,
        }
    }

    fn weights(&self, delta: f64) -> (f64, f64) {
        let x = delta - self.target;
        (self.kernel.weight(x, self.bandwidth), self.kernel.weight(x, 0.5 * self.bandwidth))
    }
}

/// Kernel estimate at bandwidths `b` and `b/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelEstimate {
    pub bandwidth: f64,
    pub at_bandwidth: MCEstimate,
    pub at_half_bandwidth: MCEstimate,
    /// `|est(b) - est(b/2)|`.
    pub bias_diagnostic: f64,
    /// Samples with nonzero weight at `b/2`.
    pub effective_samples: u64,
    /// Set when fewer than 100 samples carry weight.
    pub low_effective_samples: bool,
}

pub const MIN_EFFECTIVE_SAMPLES: u64 = 100;

fn kernel_estimates(outputs: &[MCEstimate], effective: u64, bandwidth: f64) -> KernelEstimate {
    KernelEstimate {
        bandwidth,
        at_bandwidth: outputs[0],
        at_half_bandwidth: outputs[1],
        bias_diagnostic: (outputs[0].mean - outputs[1].mean).abs(),
        effective_samples: effective,
        low_effective_samples: effective < MIN_EFFECTIVE_SAMPLES,
    }
}

/// Runs a per-path kernel statistic producing `(value at b, value at b/2,
/// has weight at b/2)` and collects moments.
fn kernel_mc<F>(
    grid: TimeGrid,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
    dim: usize,
    bridge_maxima: bool,
    stat: F,
) -> Result<(Vec<MCEstimate>, Vec<u64>)>
where
    F: Fn(&[f64], &mut PathScratch, &mut [f64], &mut [bool]) + Sync,
{
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let blocks = mc_blocks(samples, workers, seed, |rng, block, range| {
        let mut values = vec![0.0; grid.n() + 1];
        let mut scratch = PathScratch::new(grid.n());
        let mut out = vec![0.0; 2 * dim];
        let mut hit = vec![false; dim];
        let mut moments = vec![sampling::Moments::default(); 2 * dim];
        let mut effective = vec![0u64; dim];
        for sample in range {
            sampling::fill_brownian(rng, &grid, &mut values);
            if bridge_maxima {
                sampling::fill_interval_maxima(rng, &grid, &values, &mut scratch.interval_max);
            }
            hit.iter_mut().for_each(|h| *h = false);
            stat(&values, &mut scratch, &mut out, &mut hit);
            for (m, &x) in moments.iter_mut().zip(out.iter()) {
                if !x.is_finite() {
                    return Err(Error::NonFinite { seed, block, sample });
                }
                m.push(x);
            }
            for (e, h) in effective.iter_mut().zip(&hit) {
                *e += *h as u64;
            }
        }
        Ok((moments, effective))
    })?;
    let mut moments = vec![sampling::Moments::default(); 2 * dim];
    let mut effective = vec![0u64; dim];
    for (m, e) in &blocks {
        for (a, b) in moments.iter_mut().zip(m) {
            a.merge(b);
        }
        for (a, b) in effective.iter_mut().zip(e) {
            *a += b;
        }
    }
    Ok((moments.iter().map(|m| m.estimate(seed)).collect(), effective))
}

/// Running maxima from the left and from the right with first-attainment argmax.
pub(crate) struct PathScratch {
    prefix_max: Vec<f64>,
    prefix_arg: Vec<usize>,
    suffix_max: Vec<f64>,
    suffix_arg: Vec<usize>,
    /// Exact path maxima over each grid interval, when sampled.
    interval_max: Vec<f64>,
}

impl PathScratch {
    fn new(n: usize) -> Self {
        Self {
            prefix_max: vec![0.0; n + 1],
            prefix_arg: vec![0; n + 1],
            suffix_max: vec![0.0; n + 1],
            suffix_arg: vec![0; n + 1],
            interval_max: vec![0.0; n],
        }
    }

    fn fill(&mut self, values: &[f64]) {
        let n = values.len() - 1;
        let (mut m, mut a) = (values[0], 0);
        for (i, &v) in values.iter().enumerate() {
            if v > m {
                m = v;
                a = i;
            }
            self.prefix_max[i] = m;
            self.prefix_arg[i] = a;
        }
        let (mut m, mut a) = (values[n], n);
        for i in (0..=n).rev() {
            // >= keeps the smallest index among ties
            if values[i] >= m {
                m = values[i];
                a = i;
            }
            self.suffix_max[i] = m;
            self.suffix_arg[i] = a;
        }
    }

    /// `(Delta_j, sigma_left, sigma_right)` for the split after index `j`.
    #[inline]
    fn split(&self, j: usize) -> (f64, usize, usize) {
        (
            self.suffix_max[j + 1] - self.prefix_max[j],
            self.prefix_arg[j],
            self.suffix_arg[j + 1],
        )
    }
}

fn check_interval(grid: &TimeGrid, interval: usize) -> Result<()> {
    if interval >= grid.n() {
        return Err(Error::IndexOutOfRange {
            index: interval,
            max: grid.n() - 1,
        });
    }
    Ok(())
}

/// Kernel estimate of `l(0) E[g (h(sigma_R) - h(sigma_L)) | Delta_j = 0]` at
/// the grid interval `j`, with the density factor kept inside the average.
pub fn chain_max_estimator(
    g: &CylindricalFunction,
    h: &Direction,
    interval: usize,
    grid: TimeGrid,
    kcfg: &KernelConfig,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
) -> Result<KernelEstimate> {
    check_grids(&grid, g, &[h])?;
    check_interval(&grid, interval)?;
    let (est, eff) = kernel_mc(grid, samples, workers, seed, 1, false, |values, scratch, out, hit| {
        let _ = scratch;
        let n = grid.n();
        let left = segment_max_unchecked(values, 0, interval);
        let right = segment_max_unchecked(values, interval + 1, n);
        let (wb, wh) = kcfg.weights(right.max_value - left.max_value);
        if wb == 0.0 && wh == 0.0 {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        let mark = g.jet(values).value * (h.at(right.argmax_index) - h.at(left.argmax_index));
        out[0] = mark * wb;
        out[1] = mark * wh;
        hit[0] = wh > 0.0;
    })?;
    Ok(kernel_estimates(&est, eff[0], kcfg.bandwidth))
}

/// `sum_j k'_j dt * chain_max_estimator(g, h, j)` from a single path sweep:
/// the disintegrated form of `int g d<D^2 M, k' (x) h'>`.
pub fn chain_max_integrated(
    g: &CylindricalFunction,
    k: &Direction,
    h: &Direction,
    grid: TimeGrid,
    kcfg: &KernelConfig,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
) -> Result<KernelEstimate> {
    check_grids(&grid, g, &[k, h])?;
    let dt = grid.dt();
    let (est, eff) = kernel_mc(grid, samples, workers, seed, 1, false, |values, scratch, out, hit| {
        scratch.fill(values);
        let (mut sb, mut sh) = (0.0, 0.0);
        for (j, kj) in k.density().iter().enumerate() {
            if *kj == 0.0 {
                continue;
            }
            let (delta, sl, sr) = scratch.split(j);
            let (wb, wh) = kcfg.weights(delta);
            if wb == 0.0 && wh == 0.0 {
                continue;
            }
            let mark = kj * dt * (h.at(sr) - h.at(sl));
            sb += mark * wb;
            sh += mark * wh;
            if wh > 0.0 {
                hit[0] = true;
            }
        }
        let gv = if sb == 0.0 && sh == 0.0 { 0.0 } else { g.jet(values).value };
        out[0] = gv * sb;
        out[1] = gv * sh;
    })?;
    Ok(kernel_estimates(&est, eff[0], kcfg.bandwidth))
}

/// Which difference of maxima a density estimate targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSampling {
    /// `Delta_j` of the discrete maximum at grid interval `j`.
    Grid,
    /// `Delta_t M` of the continuous path at grid time `t_j`, `0 < j < n`,
    /// using exact bridge maxima between grid points.
    Continuous,
}

/// Kernel density estimates at `kcfg.target` of the difference of maxima at
/// several indices, from one set of paths.
pub fn kde_delta(
    indices: &[usize],
    sampling_mode: DeltaSampling,
    grid: TimeGrid,
    kcfg: &KernelConfig,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
) -> Result<Vec<KernelEstimate>> {
    for &j in indices {
        check_interval(&grid, j)?;
        if sampling_mode == DeltaSampling::Continuous && j == 0 {
            return Err(Error::InvalidArgument("continuous split needs 0 < t_index < n".into()));
        }
    }
    let dim = indices.len();
    let continuous = sampling_mode == DeltaSampling::Continuous;
    let (est, eff) = kernel_mc(grid, samples, workers, seed, dim, continuous, |values, scratch, out, hit| {
        if continuous {
            let maxima = std::mem::take(&mut scratch.interval_max);
            scratch.fill(&maxima);
            for (i, &j) in indices.iter().enumerate() {
                // intervals [0, j) form [0, t_j], intervals [j, n) form [t_j, T]
                let delta = scratch.suffix_max[j] - scratch.prefix_max[j - 1];
                let (wb, wh) = kcfg.weights(delta);
                out[2 * i] = wb;
                out[2 * i + 1] = wh;
                hit[i] = wh > 0.0;
            }
            scratch.interval_max = maxima;
        } else {
            scratch.fill(values);
            for (i, &j) in indices.iter().enumerate() {
                let (delta, _, _) = scratch.split(j);
                let (wb, wh) = kcfg.weights(delta);
                out[2 * i] = wb;
                out[2 * i + 1] = wh;
                hit[i] = wh > 0.0;
            }
        }
    })?;
    Ok((0..dim)
        .map(|i| kernel_estimates(&est[2 * i..2 * i + 2], eff[i], kcfg.bandwidth))
        .collect())
}

/// Grid interval containing time `t` (left-closed).
pub fn interval_at_time(grid: &TimeGrid, t: f64) -> usize {
    ((t / grid.dt()).floor() as usize).min(grid.n() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaCheck {
    pub sigma: f64,
    /// `sum_i 1{sigma > t_i} dt`.
    pub riemann: f64,
    pub consistent: bool,
}

/// `sigma = int_0^T d_s M ds` checked against the grid sum of the gradient.
pub fn sigma_check(path: &DiscretePath) -> SigmaCheck {
    let grid = path.grid();
    let sigma = sigma_functional(path);
    let riemann = (0..=grid.n()).filter(|&i| sigma > grid.time(i)).count() as f64 * grid.dt();
    SigmaCheck {
        sigma,
        riemann,
        consistent: (sigma - riemann).abs() <= grid.dt() * (1.0 + 1e-12),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaFdCheck {
    pub samples: u64,
    /// Paths with `fd_directional(sigma) == 0` exactly.
    pub zero: u64,
    /// Paths whose top-two gap exceeds the bump size.
    pub gap_ok: u64,
    /// Paths with a gap above the bump size but a nonzero difference.
    pub gap_ok_nonzero: u64,
    pub fraction: f64,
    pub seed: SeedSpec,
}

/// `sigma` is locally constant off the tie set, so its central difference is
/// exactly zero whenever the bump cannot move the argmax.
pub fn sigma_fd_zero_fraction(grid: TimeGrid, h: &Direction, samples: u64, workers: usize, seed: SeedSpec, cfg: &FDConfig) -> Result<SigmaFdCheck> {
    grid.ensure_same(h.grid(), "sigma fd")?;
    let bump_size = 2.0 * cfg.eps * h.sup_norm();
    let blocks = mc_blocks(samples, workers, seed, |rng, _, range| {
        let mut values = vec![0.0; grid.n() + 1];
        let (mut zero, mut gap_ok, mut bad) = (0u64, 0u64, 0u64);
        for _ in range {
            sampling::fill_brownian(rng, &grid, &mut values);
            let path = DiscretePath::from_parts_unchecked(grid, values.clone());
            let fd = fd_directional(sigma_functional, &path, h, cfg)?;
            let ok = top_two_gap(&values) > bump_size;
            zero += (fd == 0.0) as u64;
            gap_ok += ok as u64;
            bad += (ok && fd != 0.0) as u64;
        }
        Ok((zero, gap_ok, bad))
    })?;
    let (mut zero, mut gap_ok, mut bad) = (0, 0, 0);
    for (z, g, b) in blocks {
        zero += z;
        gap_ok += g;
        bad += b;
    }
    Ok(SigmaFdCheck {
        samples,
        zero,
        gap_ok,
        gap_ok_nonzero: bad,
        fraction: zero as f64 / samples as f64,
        seed,
    })
}

/// Interval-split statistics of a path; thin wrapper for callers that only
/// hold a path.
pub fn split_delta(path: &DiscretePath, interval: usize) -> Result<f64> {
    interval_split(path, interval).map(|s| s.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::DirectionKind;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(n, 1.0).unwrap()
    }

    #[test]
    fn fd_of_terminal_value_is_h_at_t() {
        let g = grid(50);
        let path = sampling::sample_brownian(g, SeedSpec::new(3, 0));
        let cfg = FDConfig::first_order(1.0);
        for kind in DirectionKind::CATALOG {
            let h = Direction::from_kind(g, kind);
            let fd = fd_directional(|p| p.terminal(), &path, &h, &cfg).unwrap();
            assert!((fd - h.at(50)).abs() < 1e-9);
        }
    }

    #[test]
    fn fd_of_max_is_h_at_sigma() {
        let g = grid(200);
        let cfg = FDConfig::first_order(1.0);
        let h = Direction::from_kind(g, DirectionKind::Constant);
        let mut tested = 0;
        for s in 0..50 {
            let path = sampling::sample_brownian(g, SeedSpec::new(4, s));
            if path.top_two_gap() <= gap_threshold(&cfg, &h) {
                continue;
            }
            tested += 1;
            let fd = fd_directional(max_functional, &path, &h, &cfg).unwrap();
            assert!((fd - sigma_functional(&path)).abs() < 1e-6);
        }
        assert!(tested > 40);
    }

    #[test]
    fn fd_of_max_vanishes_past_sigma() {
        let g = grid(8);
        let path = DiscretePath::new(g, vec![0.0, 1.0, 2.0, 1.5, 0.5, 0.0, -1.0, 0.5, 1.0]).unwrap();
        let h = Direction::from_fn(g, |t| if t > 0.25 { 1.0 } else { 0.0 }).unwrap();
        let fd = fd_directional(max_functional, &path, &h, &FDConfig::first_order(1.0)).unwrap();
        assert_eq!(fd, 0.0);
    }

    #[test]
    fn constant_functional_has_zero_derivative() {
        let g = grid(20);
        let path = sampling::sample_brownian(g, SeedSpec::new(5, 0));
        let h = Direction::from_kind(g, DirectionKind::Cosine);
        assert_eq!(fd_directional(|_| 3.5, &path, &h, &FDConfig::first_order(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn second_difference_of_linear_functional_is_rounding() {
        let g = grid(30);
        let path = sampling::sample_brownian(g, SeedSpec::new(6, 0));
        let h = Direction::from_kind(g, DirectionKind::Constant);
        let k = Direction::from_kind(g, DirectionKind::Cosine);
        let cfg = FDConfig::second_order(1.0);
        let d2 = fd_second(|p| 2.0 * p.values()[10] - p.terminal(), &path, &h, &k, &cfg).unwrap();
        assert!(d2.abs() <= second_difference_rounding_floor(&path, &h, &k, cfg.eps));
    }

    #[test]
    fn tied_peaks_give_divergent_second_difference() {
        let path = tied_peak_path();
        let g = *path.grid();
        let h = Direction::from_kind(g, DirectionKind::Constant);
        let dh = h.at(5) - h.at(2);
        let mut last = None;
        for eps in [1e-3, 5e-4, 2.5e-4] {
            let cfg = FDConfig::new(eps, 1e-6).unwrap();
            let d2 = fd_second(max_functional, &path, &h, &h, &cfg).unwrap();
            assert!((d2 - dh / (2.0 * eps)).abs() / d2 < 1e-6, "eps {eps}: {d2}");
            if let Some(prev) = last {
                let ratio: f64 = d2 / prev;
                assert!((ratio - 2.0).abs() < 1e-6);
            }
            last = Some(d2);
        }
    }

    #[test]
    fn second_adjoint_of_constant() {
        let g = grid(16);
        let path = sampling::sample_brownian(g, SeedSpec::new(7, 0));
        let one = CylindricalFunction::from_catalog(g, "one").unwrap();
        let k = Direction::from_kind(g, DirectionKind::FirstHalf);
        let h = Direction::from_kind(g, DirectionKind::Cosine);
        let got = skorokhod_second_adjoint(&one, &k, &h, &path).unwrap();
        let ik = crate::path::wiener_integral(&k, &path).unwrap();
        let ih = crate::path::wiener_integral(&h, &path).unwrap();
        assert!((got - (ik * ih - k.inner(&h).unwrap())).abs() < 1e-14);
    }

    #[test]
    fn second_adjoint_is_symmetric() {
        let g = grid(16);
        let path = sampling::sample_brownian(g, SeedSpec::new(8, 0));
        let k = Direction::from_kind(g, DirectionKind::FirstHalf);
        let h = Direction::from_kind(g, DirectionKind::Cosine);
        for f in CylindricalFunction::catalog(g) {
            let a = skorokhod_second_adjoint(&f, &k, &h, &path).unwrap();
            let b = skorokhod_second_adjoint(&f, &h, &k, &path).unwrap();
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{}", f.id());
        }
    }

    #[test]
    fn zero_direction_gives_zero_chain_estimate() {
        let g = grid(64);
        let one = CylindricalFunction::from_catalog(g, "one").unwrap();
        let zero = Direction::from_kind(g, DirectionKind::Zero);
        let kcfg = KernelConfig::default_for(5_000, 1.0);
        let est = chain_max_estimator(&one, &zero, 32, g, &kcfg, 5_000, 1, SeedSpec::new(9, 0)).unwrap();
        assert_eq!(est.at_bandwidth.mean, 0.0);
        assert_eq!(est.at_half_bandwidth.mean, 0.0);
    }

    #[test]
    fn chain_estimate_is_positive_for_constant_direction() {
        let g = grid(64);
        let one = CylindricalFunction::from_catalog(g, "one").unwrap();
        let h = Direction::from_kind(g, DirectionKind::Constant);
        let kcfg = KernelConfig::default_for(20_000, 1.0);
        let est = chain_max_estimator(&one, &h, 32, g, &kcfg, 20_000, 1, SeedSpec::new(10, 0)).unwrap();
        assert!(est.at_bandwidth.mean > 0.0);
        assert!(!est.low_effective_samples);
        assert!(chain_max_estimator(&one, &h, 64, g, &kcfg, 100, 1, SeedSpec::new(10, 0)).is_err());
    }

    #[test]
    fn tiny_bandwidth_is_flagged() {
        let g = grid(32);
        let one = CylindricalFunction::from_catalog(g, "one").unwrap();
        let h = Direction::from_kind(g, DirectionKind::Constant);
        let kcfg = KernelConfig::new(1e-9, Kernel::Triangular).unwrap();
        let est = chain_max_estimator(&one, &h, 16, g, &kcfg, 2_000, 1, SeedSpec::new(11, 0)).unwrap();
        assert!(est.low_effective_samples);
    }

    #[test]
    fn sigma_on_monotone_paths() {
        let up = DiscretePath::from_values(1.0, vec![0.0, 0.1, 0.2, 0.3]).unwrap();
        let down = DiscretePath::from_values(1.0, vec![0.0, -0.1, -0.2, -0.3]).unwrap();
        assert_eq!(sigma_functional(&up), 1.0);
        assert_eq!(sigma_functional(&down), 0.0);
        assert!(sigma_check(&up).consistent);
        assert!(sigma_check(&down).consistent);
    }

    #[test]
    fn prefix_suffix_scratch_matches_direct_split() {
        let g = grid(40);
        for s in 0..20 {
            let path = sampling::sample_brownian(g, SeedSpec::new(12, s));
            let mut scratch = PathScratch::new(40);
            scratch.fill(path.values());
            for j in 0..40 {
                let direct = interval_split(&path, j).unwrap();
                let (delta, sl, sr) = scratch.split(j);
                assert_eq!(delta, direct.delta);
                assert_eq!(sl, direct.left.argmax_index);
                assert_eq!(sr, direct.right.argmax_index);
            }
        }
    }
}
