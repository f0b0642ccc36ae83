//! Random-walk fluctuation identities: the half-line stay probability
//! `C(2n, n) / 4^n`, its generating function `(1 - t)^{-1/2}`, and the bridge
//! identity `P(A_n | W_n = 0) = 1/n` with its cyclic decomposition.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::rational::{ExactRational, SeriesCoefficients};
use crate::sampling::{self, mc_blocks, MCEstimate, SeedSpec};

fn central_binomial(n: u64) -> BigInt {
    let mut c = BigInt::one();
    // C(2n, n) = prod_{i=1}^n (n + i) / i, exact at every step
    for i in 1..=n {
        c = c * BigInt::from(n + i) / BigInt::from(i);
    }
    c
}

/// `P(W_k <= 0, k = 0..n) = C(2n, n) / 4^n`.
pub fn halfline_prob_exact(n: u64) -> ExactRational {
    let denom = BigInt::one() << (2 * n);
    ExactRational::new(central_binomial(n), denom).expect("power of two is nonzero")
}

/// Both sides of the generating-function identity, truncated at `order`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AndersenCheck {
    /// `exp(sum_k t^k / (2k))`.
    pub lhs: SeriesCoefficients,
    /// Binomial series of `(1 - t)^{-1/2}`.
    pub rhs: SeriesCoefficients,
}

impl AndersenCheck {
    pub fn exact_match(&self) -> bool {
        self.lhs == self.rhs
    }

    /// First index where the two sides differ.
    pub fn first_mismatch(&self) -> Option<usize> {
        self.lhs
            .coefficients
            .iter()
            .zip(&self.rhs.coefficients)
            .position(|(a, b)| a != b)
    }
}

/// Exponentiates `sum_k (t^k / k) P(W_k <= 0)` with `P(W_k <= 0) = 1/2` and
/// compares it with the generalized binomial coefficients of `(1 - t)^{-1/2}`.
pub fn andersen_series_check(order: usize) -> Result<AndersenCheck> {
    if order == 0 {
        return Err(Error::InvalidArgument("series order must be >= 1".into()));
    }
    let half = BigRational::new(1.into(), 2.into());
    let log: Vec<BigRational> = (0..=order)
        .map(|k| {
            if k == 0 {
                BigRational::zero()
            } else {
                &half / BigRational::from_integer(BigInt::from(k))
            }
        })
        .collect();
    let lhs = SeriesCoefficients::exp_of(&log)?;

    // (-1)^n binom(-1/2, n) = prod_{i=1}^n (i - 1/2) / i
    let mut c = BigRational::one();
    let mut rhs = vec![ExactRational::one()];
    for i in 1..=order {
        let i = BigInt::from(i);
        c *= BigRational::new(BigInt::from(2) * &i - 1, BigInt::from(2) * &i);
        rhs.push(c.clone().into());
    }
    Ok(AndersenCheck {
        lhs,
        rhs: SeriesCoefficients { coefficients: rhs },
    })
}

/// `P(A_n | W_n = 0) = 1/n`.
pub fn bridge_stay_prob_exact(n: u64) -> Result<ExactRational> {
    if n == 0 {
        return Err(Error::InvalidArgument("bridge length must be >= 1".into()));
    }
    ExactRational::new(1, n)
}

/// Monte Carlo estimate of `P(A_n)` for the Gaussian walk.
pub fn mc_halfline_prob(n: usize, samples: u64, workers: usize, seed: SeedSpec) -> Result<MCEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("walk length must be >= 1".into()));
    }
    sampling::mc_run_vec(
        samples,
        workers,
        seed,
        1,
        || vec![0.0; n + 1],
        |rng, sums, out| {
            sampling::fill_walk(rng, sums);
            out[0] = if sums.iter().all(|w| *w <= 0.0) { 1.0 } else { 0.0 };
        },
    )
    .map(|v| v[0])
}

/// Monte Carlo estimate of `P(bridge stays <= 0)`.
pub fn mc_bridge_stay_prob(n: usize, samples: u64, workers: usize, seed: SeedSpec) -> Result<MCEstimate> {
    if n < 2 {
        return Err(Error::InvalidArgument("bridge stay probability needs n >= 2".into()));
    }
    sampling::mc_run_vec(
        samples,
        workers,
        seed,
        1,
        || (vec![0.0; n], vec![0.0; n + 1]),
        |rng, (inc, sums), out| {
            sampling::fill_bridge(rng, inc, sums);
            out[0] = if sums.iter().all(|w| *w <= 0.0) { 1.0 } else { 0.0 };
        },
    )
    .map(|v| v[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgmaxHistogram {
    pub n: usize,
    pub samples: u64,
    /// `counts[m]` = number of bridges whose first argmax over `W_0..W_{n-1}` is `m`.
    pub counts: Vec<u64>,
    pub chi_square: f64,
    pub p_value: f64,
    /// Bridges where the maximum over `W_0..W_{n-1}` was attained twice.
    pub ties: u64,
    pub seed: SeedSpec,
}

impl ArgmaxHistogram {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["m", "count", "expected"])?;
        let expected = self.samples as f64 / self.n as f64;
        for (m, c) in self.counts.iter().enumerate() {
            wtr.serialize((m, c, expected))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Pearson statistic and upper-tail p-value against the uniform law.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = (counts.len() - 1) as f64;
    let p = ChiSquared::new(dof).map(|d| d.sf(stat)).unwrap_or(f64::NAN);
    (stat, p)
}

/// Histogram of the first argmax of `(W_0, ..., W_{n-1})` over sampled bridges.
/// The events `{argmax = m}` are the sets `B_m`, permuted cyclically by a
/// rotation of the increments, so each has mass `1/n`.
pub fn bridge_argmax_histogram(n: usize, samples: u64, workers: usize, seed: SeedSpec) -> Result<ArgmaxHistogram> {
    if n < 2 {
        return Err(Error::InvalidArgument("argmax histogram needs n >= 2".into()));
    }
    let blocks = mc_blocks(samples, workers, seed, |rng, _, range| {
        let mut inc = vec![0.0; n];
        let mut sums = vec![0.0; n + 1];
        let mut counts = vec![0u64; n];
        let mut ties = 0u64;
        for _ in range {
            sampling::fill_bridge(rng, &mut inc, &mut sums);
            let head = &sums[..n];
            let mut best = 0usize;
            for (i, &v) in head.iter().enumerate().skip(1) {
                if v > head[best] {
                    best = i;
                }
            }
            if head.iter().filter(|&&v| v == head[best]).count() > 1 {
                ties += 1;
            }
            counts[best] += 1;
        }
        Ok((counts, ties))
    })?;
    let mut counts = vec![0u64; n];
    let mut ties = 0;
    for (c, t) in blocks {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        ties += t;
    }
    let (chi_square, p_value) = chi_square_uniform(&counts);
    Ok(ArgmaxHistogram {
        n,
        samples,
        counts,
        chi_square,
        p_value,
        ties,
        seed,
    })
}

/// `gamma(A_n)` in floating point: exact rational up to `n = 64`, then the
/// product `(2k - 1) / (2k)` (relative error `O(n eps)`).
pub fn halfline_prob_f64(n: u64) -> f64 {
    if n <= 64 {
        return halfline_prob_exact(n).to_f64();
    }
    (65..=n).fold(halfline_prob_exact(64).to_f64(), |g, k| g * (2 * k - 1) as f64 / (2 * k) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfline_examples() {
        assert_eq!(halfline_prob_exact(0), ExactRational::one());
        assert_eq!(halfline_prob_exact(1).to_string(), "1/2");
        assert_eq!(halfline_prob_exact(2).to_string(), "3/8");
        assert_eq!(halfline_prob_exact(10).to_string(), "46189/262144");
    }

    #[test]
    fn halfline_strictly_decreasing() {
        for n in 0..64 {
            assert!(halfline_prob_exact(n + 1) < halfline_prob_exact(n));
        }
    }

    #[test]
    fn andersen_low_orders() {
        let c = andersen_series_check(2).unwrap();
        assert_eq!(c.lhs.coefficients[1].to_string(), "1/2");
        assert_eq!(c.rhs.coefficients[1].to_string(), "1/2");
        assert_eq!(c.lhs.coefficients[2].to_string(), "3/8");
        assert_eq!(c.rhs.coefficients[2].to_string(), "3/8");
        assert!(andersen_series_check(0).is_err());
    }

    #[test]
    fn andersen_order_64_matches_closed_form() {
        let c = andersen_series_check(64).unwrap();
        assert!(c.exact_match());
        assert_eq!(c.lhs.coefficients.len(), 65);
        for (n, coef) in c.lhs.coefficients.iter().enumerate() {
            assert_eq!(*coef, halfline_prob_exact(n as u64), "n = {n}");
        }
    }

    #[test]
    fn bridge_exact_values() {
        assert_eq!(bridge_stay_prob_exact(1).unwrap(), ExactRational::one());
        assert_eq!(bridge_stay_prob_exact(2).unwrap().to_string(), "1/2");
        assert_eq!(bridge_stay_prob_exact(10).unwrap().to_string(), "1/10");
        assert!(bridge_stay_prob_exact(0).is_err());
    }

    #[test]
    fn log_domain_agrees_with_recurrence() {
        let mut g = 1.0f64;
        for n in 1..=3000u64 {
            g *= (2 * n - 1) as f64 / (2 * n) as f64;
            let l = halfline_prob_f64(n);
            assert!((l - g).abs() / g < 1e-11, "n = {n}: {l} vs {g}");
        }
    }

    #[test]
    fn chi_square_uniform_counts() {
        let (s, p) = chi_square_uniform(&[100, 100, 100, 100]);
        assert_eq!(s, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let (_, p) = chi_square_uniform(&[400, 0, 0, 0]);
        assert!(p < 1e-10);
    }

    #[test]
    fn rejects_short_bridges() {
        let seed = SeedSpec::new(1, 1);
        assert!(mc_bridge_stay_prob(1, 10, 1, seed).is_err());
        assert!(bridge_argmax_histogram(1, 10, 1, seed).is_err());
        assert!(mc_halfline_prob(0, 10, 1, seed).is_err());
    }
}
