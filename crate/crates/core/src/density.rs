//! Reflection-principle densities, the density `l_t` of
//! `Delta_t M = M_[t,T] - M_[0,t]`, and the total-variation bound for the
//! discretized maximum `M_n`.
//!
//! `Delta_t M = M' - R` where `M' = M_[t,T] - W_t` and `R = M_[0,t] - W_t`
//! are independent half-normal variables with variances `T - t` and `t`.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::fluctuation::halfline_prob_f64;
use crate::quadrature::{integrate_half_line, integrate_sqrt_endpoints, QuadResult};
use crate::{std_normal_pdf, INV_SQRT_2PI};

const DENSITY_TOL: f64 = 1e-13;

/// Density of `max_{s <= length} W_s` at `y`: `2 phi(y / sqrt(L)) / sqrt(L)` on `y >= 0`.
pub fn segment_max_density(y: f64, length: f64) -> Result<f64> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("segment length must be positive, got {length}")));
    }
    if y < 0.0 {
        return Ok(0.0);
    }
    let s = length.sqrt();
    Ok(2.0 * std_normal_pdf(y / s) / s)
}

fn check_split(t: f64, horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !(t > 0.0 && t < horizon) {
        return Err(Error::InvalidArgument(format!(
            "split time must lie in (0, T), got t = {t}, T = {horizon}"
        )));
    }
    Ok(())
}

/// Density of `Delta_t M` at `x`, by quadrature of the half-normal convolution.
pub fn delta_density(x: f64, t: f64, horizon: f64) -> Result<QuadResult> {
    check_split(t, horizon)?;
    let right = horizon - t;
    integrate_half_line(
        |y| {
            // y is the value of R; M' = y + x
            segment_max_density(y + x, right).unwrap_or(0.0) * segment_max_density(y, t).unwrap_or(0.0)
        },
        (-x).max(0.0),
        DENSITY_TOL,
        1e-13,
    )
}

/// `l_t(0)` by adaptive quadrature.
pub fn lt_zero(t: f64, horizon: f64) -> Result<f64> {
    delta_density(0.0, t, horizon).map(|r| r.value)
}

/// Closed form of the convolution at zero: `sqrt(2 / (pi T))`, free of `t`.
pub fn lt_zero_closed_form(horizon: f64) -> f64 {
    (2.0 / (std::f64::consts::PI * horizon)).sqrt()
}

/// Tabulated density with a normalization check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoidal mass on the covered range plus the analytic tail mass.
    pub total_mass_check: f64,
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// `P(|N(0, var)| > u)`.
fn half_normal_tail(u: f64, var: f64) -> f64 {
    erfc(u / (2.0 * var).sqrt())
}

impl DensityCurve {
    /// Segment-maximum density on `[0, upper]`.
    pub fn segment_max(length: f64, upper: f64, points: usize) -> Result<Self> {
        if points < 2 || !(upper > 0.0) {
            return Err(Error::InvalidArgument("density curve needs >= 2 points and upper > 0".into()));
        }
        let abscissae = linspace(0.0, upper, points);
        let values = abscissae
            .iter()
            .map(|&y| segment_max_density(y, length))
            .collect::<Result<Vec<_>>>()?;
        let total_mass_check = trapezoid(&abscissae, &values) + half_normal_tail(upper, length);
        Ok(Self {
            abscissae,
            values,
            total_mass_check,
        })
    }

    /// Density of `Delta_t M` on `[-half_width, half_width]`; `points` is
    /// forced odd so that the kink at 0 is a node.
    pub fn delta(t: f64, horizon: f64, half_width: f64, points: usize) -> Result<Self> {
        check_split(t, horizon)?;
        let points = points.max(3) | 1;
        let abscissae = linspace(-half_width, half_width, points);
        let values = abscissae
            .iter()
            .map(|&x| delta_density(x, t, horizon).map(|r| r.value.max(0.0)))
            .collect::<Result<Vec<_>>>()?;
        // P(Delta > u) <= P(M' > u), P(Delta < -u) <= P(R > u)
        let tails = half_normal_tail(half_width, horizon - t) + half_normal_tail(half_width, t);
        let total_mass_check = trapezoid(&abscissae, &values) + tails;
        Ok(Self {
            abscissae,
            values,
            total_mass_check,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["x", "density"])?;
        for (x, v) in self.abscissae.iter().zip(&self.values) {
            wtr.serialize((x, v))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// One row of the bound on `|D^2 M_n|(Omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvBoundRow {
    pub n: usize,
    pub horizon: f64,
    /// Full double sum over `0 <= m < k <= n`.
    pub bound: f64,
    /// Terms with `0 < m < k < n`.
    pub bulk: f64,
    /// Terms with `m = 0` or `k = n`.
    pub remainder: f64,
    /// Terms with `m = 0`.
    pub remainder_left: f64,
    /// Terms with `k = n`.
    pub remainder_right: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TVBoundTable {
    pub rows: Vec<TvBoundRow>,
}

impl TVBoundTable {
    pub fn compute(ns: &[usize], horizon: f64) -> Result<Self> {
        let rows = ns
            .iter()
            .map(|&n| tv_bound_discrete(n, horizon))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.rows {
            wtr.serialize(r)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Bound on `|D^2 M_n|(Omega)` assembled from exact factors:
///
/// `B(n) = sqrt(T/n) sum_{0<=m<k<=n} sqrt(k-m) gamma(A_m) gamma(A_{n-k}) (2 pi)^{-1/2} / (k-m)`.
///
/// The two outer factors are the stay-below probabilities before `m` and
/// after `k`; the middle one is the perimeter of `{W_k > W_m}` restricted to
/// paths staying below `W_m` in between.
pub fn tv_bound_discrete(n: usize, horizon: f64) -> Result<TvBoundRow> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("tv bound needs n >= 3, got {n}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let stay: Vec<f64> = (0..=n as u64).map(halfline_prob_f64).collect();
    let inv_sqrt: Vec<f64> = (0..=n).map(|d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() }).collect();

    let mut bulk = 0.0;
    for m in 1..n {
        let mut row = 0.0;
        for k in (m + 1)..n {
            row += stay[n - k] * inv_sqrt[k - m];
        }
        bulk += stay[m] * row;
    }
    let mut left = 0.0;
    for k in 1..=n {
        left += stay[n - k] * inv_sqrt[k];
    }
    let mut right = 0.0;
    for m in 1..n {
        right += stay[m] * inv_sqrt[n - m];
    }
    // scaling by sqrt(T) last keeps B exactly proportional to sqrt(T)
    let scale = INV_SQRT_2PI / (n as f64).sqrt() * horizon.sqrt();
    let remainder_left = scale * left;
    let remainder_right = scale * right;
    let bulk = scale * bulk;
    Ok(TvBoundRow {
        n,
        horizon,
        bound: bulk + remainder_left + remainder_right,
        bulk,
        remainder: remainder_left + remainder_right,
        remainder_left,
        remainder_right,
    })
}

/// Limit of the bulk sum as a Riemann sum over the simplex at resolution `n`:
/// `sum_{0<m<k<n} n^{-2} / sqrt((m/n)((k-m)/n)((n-k)/n))`.
pub fn riemann_limit_sum(n: usize) -> f64 {
    let nf = n as f64;
    let inv_sqrt: Vec<f64> = (0..=n).map(|d| if d == 0 { 0.0 } else { (nf / d as f64).sqrt() }).collect();
    let mut total = 0.0;
    for m in 1..n {
        let mut row = 0.0;
        for k in (m + 1)..n {
            row += inv_sqrt[k - m] * inv_sqrt[n - k];
        }
        total += inv_sqrt[m] * row;
    }
    total / (nf * nf)
}

/// `int_t^1 ds / sqrt((s - t)(1 - s))`.
pub fn arcsine_inner(t: f64) -> Result<QuadResult> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("inner integral needs t in [0, 1), got {t}")));
    }
    integrate_sqrt_endpoints(|_, ds, dr| 1.0 / (ds * dr).sqrt(), t, 1.0, 1e-13, 1e-14)
}

/// `int_0^1 dt int_t^1 ds / sqrt(t (s - t)(1 - s))`.
pub fn limit_integral() -> Result<QuadResult> {
    let mut inner_error = 0.0f64;
    let mut failure = None;
    let outer = integrate_sqrt_endpoints(
        |_, t, _| match arcsine_inner(t) {
            Ok(r) => {
                inner_error = inner_error.max(r.error);
                r.value / t.sqrt()
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1.0,
        1e-11,
        1e-13,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    // each inner error is weighted by 1/sqrt(t), whose integral is 2
    Ok(QuadResult {
        value: outer.value,
        error: outer.error + 2.0 * inner_error,
        evaluations: outer.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticMatch {
    pub n: u64,
    /// `sqrt(n) gamma(A_n)`.
    pub scaled: f64,
    /// `1 / sqrt(pi)`.
    pub limit: f64,
    pub relative_gap: f64,
}

pub fn asymptotic_match(n: u64) -> Result<AsymptoticMatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("asymptotic match needs n >= 1".into()));
    }
    let scaled = (n as f64).sqrt() * halfline_prob_f64(n);
    let limit = 1.0 / std::f64::consts::PI.sqrt();
    Ok(AsymptoticMatch {
        n,
        scaled,
        limit,
        relative_gap: (scaled / limit - 1.0).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn segment_max_density_values() {
        assert!((segment_max_density(0.0, 1.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-15);
        assert_eq!(segment_max_density(-0.1, 1.0).unwrap(), 0.0);
        assert!(segment_max_density(0.0, 0.0).is_err());
    }

    #[test]
    fn segment_max_density_normalized() {
        let r = integrate_half_line(|y| segment_max_density(y, 2.5).unwrap(), 0.0, 1e-12, 0.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lt_zero_matches_closed_form() {
        for &t in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            let q = lt_zero(t, 1.0).unwrap();
            assert!((q - lt_zero_closed_form(1.0)).abs() < 1e-12, "t = {t}: {q}");
        }
        let q1 = lt_zero(0.5, 1.0).unwrap();
        let q4 = lt_zero(2.0, 4.0).unwrap();
        assert!((q4 - 0.5 * q1).abs() < 1e-8);
        assert!(lt_zero(0.0, 1.0).is_err());
        assert!(lt_zero(1.0, 1.0).is_err());
    }

    #[test]
    fn curves_have_unit_mass() {
        let c = DensityCurve::segment_max(1.0, 10.0, 4001).unwrap();
        assert!((c.total_mass_check - 1.0).abs() < 1e-6, "{}", c.total_mass_check);
        let d = DensityCurve::delta(0.3, 1.0, 8.0, 2001).unwrap();
        // trapezoid error at the kink is O(h^2)
        assert!((d.total_mass_check - 1.0).abs() < 5e-5, "{}", d.total_mass_check);
        assert!(d.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn tv_bound_tiny_n_by_hand() {
        // n = 3: gamma(A_0..3) = 1, 1/2, 3/8, 5/16
        let g = [1.0, 0.5, 0.375, 0.3125];
        let mut s = 0.0;
        for m in 0..3usize {
            for k in (m + 1)..=3usize {
                s += g[m] * g[3 - k] / ((k - m) as f64).sqrt();
            }
        }
        let expected = (1.0f64 / 3.0).sqrt() * INV_SQRT_2PI * s;
        let row = tv_bound_discrete(3, 1.0).unwrap();
        assert!((row.bound - expected).abs() < 1e-15);
        assert!(tv_bound_discrete(2, 1.0).is_err());
    }

    #[test]
    fn tv_bound_scales_with_sqrt_horizon() {
        for n in [3, 10, 257] {
            let a = tv_bound_discrete(n, 1.0).unwrap();
            let b = tv_bound_discrete(n, 4.0).unwrap();
            assert_eq!(b.bound, 2.0 * a.bound);
        }
    }

    #[test]
    fn asymptotic_gap_shrinks() {
        let a = asymptotic_match(10).unwrap();
        let b = asymptotic_match(1000).unwrap();
        assert!(a.relative_gap < 0.03);
        assert!(b.relative_gap < 3e-4);
        assert!(b.relative_gap < a.relative_gap);
        assert!((a.limit - 0.564_189_583_547_756_3).abs() < 1e-15);
    }

    #[test]
    fn inner_integral_is_pi() {
        let r = arcsine_inner(0.3).unwrap();
        assert!((r.value - PI).abs() < 1e-8);
    }
}
