//! Monte Carlo witnesses that second-derivative mass of the maximum sits on
//! paths attaining their maximum twice, while the path measure itself puts
//! no mass there.
//!
//! Conditioning is by the hard window `|Delta_j| < eps` on the interval split
//! after grid index `j`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{segment_max_unchecked, top_two_gap, IntervalSplit, TimeGrid};
use crate::sampling::{self, mc_blocks, MCEstimate, Moments, SeedSpec};

pub const MIN_CONDITIONED: u64 = 100;

fn split_of(values: &[f64], interval: usize) -> IntervalSplit {
    let n = values.len() - 1;
    let left = segment_max_unchecked(values, 0, interval);
    let right = segment_max_unchecked(values, interval + 1, n);
    IntervalSplit {
        interval,
        delta: right.max_value - left.max_value,
        left_excess: left.max_value - values[interval],
        right_excess: right.max_value - values[interval + 1],
        left,
        right,
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

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(**v > 0.0)) {
        Some(v) => Err(Error::InvalidArgument(format!("{name} must be positive, got {v}"))),
        None => Ok(()),
    }
}

/// A path seen through the interval split, with its kernel weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionedSample {
    pub split: IntervalSplit,
    pub max_value: f64,
    pub sigma_index: usize,
    pub top_two_gap: f64,
    pub weight: f64,
}

impl ConditionedSample {
    /// Window weight `1{|Delta| < eps}`.
    pub fn from_values(values: &[f64], interval: usize, eps: f64) -> Self {
        let split = split_of(values, interval);
        let global = if split.right.max_value > split.left.max_value {
            split.right
        } else {
            split.left
        };
        Self {
            split,
            max_value: global.max_value,
            sigma_index: global.argmax_index,
            top_two_gap: top_two_gap(values),
            weight: if split.delta.abs() < eps { 1.0 } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TieStatistics {
    pub samples: u64,
    /// Paths whose two largest values coincide exactly.
    pub exact_ties: u64,
    pub deltas: Vec<f64>,
    /// `#{G_n < delta}` per delta.
    pub below: Vec<u64>,
    /// `#{G_n < delta / 2}` per delta.
    pub below_half: Vec<u64>,
    pub fractions: Vec<f64>,
    pub seed: SeedSpec,
}

impl TieStatistics {
    /// Fractions are nondecreasing in delta.
    pub fn monotone(&self) -> bool {
        let mut idx: Vec<usize> = (0..self.deltas.len()).collect();
        idx.sort_by(|&a, &b| self.deltas[a].total_cmp(&self.deltas[b]));
        idx.windows(2).all(|w| self.below[w[0]] <= self.below[w[1]])
    }

    /// `count(G < delta/2) / count(G < delta)`; near `1/2` for a gap law with
    /// a positive continuous density at 0, near `1` for an atom.
    pub fn halving_ratios(&self) -> Vec<f64> {
        self.below
            .iter()
            .zip(&self.below_half)
            .map(|(&b, &h)| if b == 0 { 0.0 } else { h as f64 / b as f64 })
            .collect()
    }
}

/// Tie count and small-gap fractions of the top-two gap `G_n` of Brownian paths.
pub fn unique_max_check(grid: TimeGrid, deltas: &[f64], samples: u64, workers: usize, seed: SeedSpec) -> Result<TieStatistics> {
    if grid.n() < 2 {
        return Err(Error::InvalidArgument("unique_max_check needs n >= 2".into()));
    }
    check_positive("delta", deltas)?;
    let d = deltas.len();
    let blocks = mc_blocks(samples, workers, seed, |rng, _, range| {
        let mut values = vec![0.0; grid.n() + 1];
        let mut ties = 0u64;
        let mut below = vec![0u64; d];
        let mut half = vec![0u64; d];
        for _ in range {
            sampling::fill_brownian(rng, &grid, &mut values);
            let gap = top_two_gap(&values);
            ties += (gap == 0.0) as u64;
            for (i, &delta) in deltas.iter().enumerate() {
                below[i] += (gap < delta) as u64;
                half[i] += (gap < 0.5 * delta) as u64;
            }
        }
        Ok((ties, below, half))
    })?;
    let mut exact_ties = 0;
    let mut below = vec![0u64; d];
    let mut below_half = vec![0u64; d];
    for (t, b, h) in blocks {
        exact_ties += t;
        below.iter_mut().zip(&b).for_each(|(a, x)| *a += x);
        below_half.iter_mut().zip(&h).for_each(|(a, x)| *a += x);
    }
    Ok(TieStatistics {
        samples,
        exact_ties,
        deltas: deltas.to_vec(),
        fractions: below.iter().map(|&b| b as f64 / samples as f64).collect(),
        below,
        below_half,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalFraction {
    pub eps: f64,
    pub delta: f64,
    /// Fraction among conditioned samples; `samples` counts those.
    pub estimate: MCEstimate,
    pub low_sample_count: bool,
}

impl ConditionalFraction {
    fn from_moments(eps: f64, delta: f64, m: &Moments, seed: SeedSpec) -> Self {
        Self {
            eps,
            delta,
            estimate: m.estimate(seed),
            low_sample_count: m.count < MIN_CONDITIONED,
        }
    }
}

fn conditioned_pass<F>(
    interval: usize,
    eps_ladder: &[f64],
    grid: TimeGrid,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
    dim: usize,
    mut_stat: F,
) -> Result<Vec<Vec<Moments>>>
where
    F: Fn(&IntervalSplit, &mut [f64]) + Sync,
{
    check_interval(&grid, interval)?;
    check_positive("eps", eps_ladder)?;
    let e = eps_ladder.len();
    let blocks = mc_blocks(samples, workers, seed, |rng, _, range| {
        let mut values = vec![0.0; grid.n() + 1];
        let mut out = vec![0.0; dim];
        let mut acc = vec![vec![Moments::default(); dim]; e];
        for _ in range {
            sampling::fill_brownian(rng, &grid, &mut values);
            let split = split_of(&values, interval);
            let mut computed = false;
            for (i, &eps) in eps_ladder.iter().enumerate() {
                if split.delta.abs() < eps {
                    if !computed {
                        mut_stat(&split, &mut out);
                        computed = true;
                    }
                    for (m, &x) in acc[i].iter_mut().zip(&out) {
                        m.push(x);
                    }
                }
            }
        }
        Ok(acc)
    })?;
    let mut total = vec![vec![Moments::default(); dim]; e];
    for b in &blocks {
        for (t, row) in total.iter_mut().zip(b) {
            for (a, m) in t.iter_mut().zip(row) {
                a.merge(m);
            }
        }
    }
    Ok(total)
}

/// `P(left_excess < delta or right_excess < delta | |Delta_j| < eps)` for
/// each delta of the ladder, from one set of paths.
pub fn excess_conditional(
    interval: usize,
    eps: f64,
    deltas: &[f64],
    grid: TimeGrid,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
) -> Result<Vec<ConditionalFraction>> {
    check_positive("delta", deltas)?;
    let rows = conditioned_pass(interval, &[eps], grid, samples, workers, seed, deltas.len(), |s, out| {
        for (o, &d) in out.iter_mut().zip(deltas) {
            *o = (s.left_excess < d || s.right_excess < d) as u8 as f64;
        }
    })?;
    Ok(deltas
        .iter()
        .zip(&rows[0])
        .map(|(&d, m)| ConditionalFraction::from_moments(eps, d, m, seed))
        .collect())
}

/// Summary of the conditioned joint law of the two excesses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSummary {
    pub interval: usize,
    pub delta: f64,
    /// Both-excess fraction per eps, in ladder order.
    pub rows: Vec<ConditionalFraction>,
    /// Both-excess fraction without conditioning.
    pub baseline: MCEstimate,
    /// Conditioned samples with both excesses positive whose argmaxima do
    /// not straddle the interval.
    pub separation_violations: u64,
    /// `(left_excess, right_excess)` of conditioned samples at the smallest eps,
    /// in sample order, truncated to `scatter_cap`.
    pub scatter: Vec<(f64, f64)>,
}

impl WitnessSummary {
    /// Both-excess fraction nondecreasing as eps shrinks.
    pub fn increasing_as_eps_shrinks(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        rows.windows(2).all(|w| w[1].estimate.mean >= w[0].estimate.mean)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["eps", "delta", "fraction", "std_error", "conditioned"])?;
        for r in &self.rows {
            wtr.serialize((r.eps, r.delta, r.estimate.mean, r.estimate.std_error, r.estimate.samples))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_scatter_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["left_excess", "right_excess"])?;
        for p in &self.scatter {
            wtr.serialize(p)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Fraction of `|Delta_j| < eps` paths whose excesses both exceed `delta`,
/// across an eps ladder, with an unconditioned baseline from the same paths.
pub fn double_max_witness(
    interval: usize,
    eps_ladder: &[f64],
    delta: f64,
    grid: TimeGrid,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
    scatter_cap: usize,
) -> Result<WitnessSummary> {
    check_interval(&grid, interval)?;
    check_positive("eps", eps_ladder)?;
    check_positive("delta", &[delta])?;
    let smallest = eps_ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let e = eps_ladder.len();
    let blocks = mc_blocks(samples, workers, seed, |rng, _, range| {
        let mut values = vec![0.0; grid.n() + 1];
        let mut acc = vec![Moments::default(); e];
        let mut base = Moments::default();
        let mut violations = 0u64;
        let mut scatter = Vec::new();
        for _ in range {
            sampling::fill_brownian(rng, &grid, &mut values);
            let s = split_of(&values, interval);
            let both = s.left_excess > delta && s.right_excess > delta;
            base.push(both as u8 as f64);
            if s.delta.abs() >= eps_ladder.iter().copied().fold(0.0, f64::max) {
                continue;
            }
            for (m, &eps) in acc.iter_mut().zip(eps_ladder) {
                if s.delta.abs() < eps {
                    m.push(both as u8 as f64);
                }
            }
            if s.left_excess > 0.0
                && s.right_excess > 0.0
                && !(s.left.argmax_index < interval && s.right.argmax_index > interval + 1)
            {
                violations += 1;
            }
            if s.delta.abs() < smallest && scatter.len() < scatter_cap {
                scatter.push((s.left_excess, s.right_excess));
            }
        }
        Ok((acc, base, violations, scatter))
    })?;
    let mut acc = vec![Moments::default(); e];
    let mut base = Moments::default();
    let mut separation_violations = 0;
    let mut scatter = Vec::new();
    for (a, b, v, s) in blocks {
        acc.iter_mut().zip(&a).for_each(|(x, y)| x.merge(y));
        base.merge(&b);
        separation_violations += v;
        scatter.extend(s);
    }
    scatter.truncate(scatter_cap);
    Ok(WitnessSummary {
        interval,
        delta,
        rows: eps_ladder
            .iter()
            .zip(&acc)
            .map(|(&eps, m)| ConditionalFraction::from_moments(eps, delta, m, seed))
            .collect(),
        baseline: base.estimate(seed),
        separation_violations,
        scatter,
    })
}

/// Every conditioned path for every eps of a ladder, as summary statistics.
/// Shares the pass structure of [`excess_conditional`].
pub fn conditioned_excess_means(
    interval: usize,
    eps_ladder: &[f64],
    grid: TimeGrid,
    samples: u64,
    workers: usize,
    seed: SeedSpec,
) -> Result<Vec<(MCEstimate, MCEstimate)>> {
    let rows = conditioned_pass(interval, eps_ladder, grid, samples, workers, seed, 2, |s, out| {
        out[0] = s.left_excess;
        out[1] = s.right_excess;
    })?;
    Ok(rows.iter().map(|r| (r[0].estimate(seed), r[1].estimate(seed))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(200, 1.0).unwrap()
    }

    #[test]
    fn no_ties_and_nested_fractions() {
        let stats = unique_max_check(grid(), &[0.1, 0.01, 0.001], 20_000, 1, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(stats.exact_ties, 0);
        assert!(stats.monotone());
        assert!(stats.fractions[0] > stats.fractions[1]);
        for (b, h) in stats.below.iter().zip(&stats.below_half) {
            assert!(h <= b);
        }
    }

    #[test]
    fn huge_delta_saturates() {
        let rows = excess_conditional(100, 0.05, &[100.0], grid(), 5_000, 1, SeedSpec::new(2, 0)).unwrap();
        assert_eq!(rows[0].estimate.mean, 1.0);
        assert!(!rows[0].low_sample_count);
    }

    #[test]
    fn excess_fraction_shrinks_with_delta() {
        let rows = excess_conditional(100, 0.05, &[0.2, 0.1, 0.05], grid(), 40_000, 1, SeedSpec::new(3, 0)).unwrap();
        assert!(rows[0].estimate.mean > rows[1].estimate.mean);
        assert!(rows[1].estimate.mean > rows[2].estimate.mean);
    }

    #[test]
    fn tiny_window_is_flagged() {
        let rows = excess_conditional(100, 1e-9, &[0.1], grid(), 2_000, 1, SeedSpec::new(4, 0)).unwrap();
        assert!(rows[0].low_sample_count);
    }

    #[test]
    fn witness_separates_argmaxima() {
        let w = double_max_witness(100, &[10.0, 0.1, 0.02], 0.05, grid(), 40_000, 1, SeedSpec::new(5, 0), 50).unwrap();
        assert_eq!(w.separation_violations, 0);
        assert!(w.scatter.len() <= 50);
        assert!(w.rows[2].estimate.mean > w.baseline.mean);
        // an eps above the path range conditions on nothing
        assert_eq!(w.rows[0].estimate.mean, w.baseline.mean);
    }

    #[test]
    fn conditioned_sample_window() {
        let values = [0.0, 1.0, 0.5, 0.2, 1.05, 0.0];
        let s = ConditionedSample::from_values(&values, 2, 0.1);
        assert_eq!(s.weight, 1.0);
        assert_eq!(s.sigma_index, 4);
        assert!((s.top_two_gap - 0.05).abs() < 1e-12);
        assert_eq!(ConditionedSample::from_values(&values, 2, 0.01).weight, 0.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(excess_conditional(200, 0.1, &[0.1], grid(), 100, 1, SeedSpec::new(0, 0)).is_err());
        assert!(excess_conditional(10, -0.1, &[0.1], grid(), 100, 1, SeedSpec::new(0, 0)).is_err());
        assert!(unique_max_check(TimeGrid::new(1, 1.0).unwrap(), &[0.1], 10, 1, SeedSpec::new(0, 0)).is_err());
    }
}
