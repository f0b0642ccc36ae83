//! Grids, discrete Brownian paths and the segment statistics built on them.
//!
//! A [`DiscretePath`] stores `w_0 = 0, w_1, ..., w_n` on a uniform [`TimeGrid`].
//! All segment statistics use inclusive index ranges and break ties in favour
//! of the first index, so `argmax` is the infimum of the attainment set.

mod cylindrical;
mod direction;

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

pub use cylindrical::{adjoint_apply, CylindricalFunction, Monomial, Outer};
pub(crate) use cylindrical::adjoint_unchecked;
pub use direction::{Direction, DirectionKind};

/// Uniform grid `t_i = i T / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    n: usize,
    horizon: f64,
}

impl TimeGrid {
    pub fn new(n: usize, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid needs n >= 1".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(Self { n, horizon })
    }

    /// Number of steps.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.n {
            self.horizon
        } else {
            i as f64 * self.horizon / self.n as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.time(i)).collect()
    }

    /// Grid index closest to `fraction * T`.
    pub fn index_at_fraction(&self, fraction: f64) -> usize {
        ((fraction * self.n as f64).round() as usize).min(self.n)
    }

    pub(crate) fn check_index(&self, index: usize) -> Result<()> {
        if index > self.n {
            Err(Error::IndexOutOfRange {
                index,
                max: self.n,
            })
        } else {
            Ok(())
        }
    }

    pub(crate) fn ensure_same(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: (n={}, T={}) vs (n={}, T={})",
                self.n, self.horizon, other.n, other.horizon
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl DiscretePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() + 1 {
            return Err(Error::InvalidArgument(format!(
                "path needs {} values, got {}",
                grid.n() + 1,
                values.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "path must start at 0, got {}",
                values[0]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite path value {v}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a path on a grid of horizon `T` from raw values (`w_0` must be 0).
    pub fn from_values(horizon: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len().saturating_sub(1);
        let grid = TimeGrid::new(n, horizon)?;
        Self::new(grid, values)
    }

    pub(crate) fn from_parts_unchecked(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n() + 1);
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.grid.n()]
    }

    /// `M = max_i w_i` together with its first attainment index.
    pub fn global_max(&self) -> SegmentMaxStat {
        segment_max_unchecked(&self.values, 0, self.grid.n())
    }

    /// Gap between the maximum and the largest value at any other index.
    pub fn top_two_gap(&self) -> f64 {
        top_two_gap(&self.values)
    }

    /// Writes `index,time,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_grid_csv(&self.grid, &self.values, writer)
    }
}

pub(crate) fn write_grid_csv<W: Write>(grid: &TimeGrid, values: &[f64], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["index", "time", "value"])?;
    for (i, v) in values.iter().enumerate() {
        wtr.serialize((i, grid.time(i), v))?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// `M_[a,b]` and `sigma_[a,b]` as grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentMaxStat {
    pub a: usize,
    pub b: usize,
    pub max_value: f64,
    pub argmax_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaStat {
    pub t_index: usize,
    /// `M_[t,T] - M_[0,t]`.
    pub delta: f64,
    /// `M_[0,t] - W_t`.
    pub left_excess: f64,
    /// `M_[t,T] - W_t`.
    pub right_excess: f64,
    pub left: SegmentMaxStat,
    pub right: SegmentMaxStat,
}

/// Split of the index set between grid points `j` and `j + 1`: left block
/// `[0, j]`, right block `[j + 1, n]`.
///
/// For `t` in `(t_j, t_{j+1})` the discrete maximum satisfies
/// `d_t M_n = 1{delta > 0}`, so this is the split that carries the level set
/// of the discrete gradient. Excesses are measured against the block's own
/// boundary value (`w_j` on the left, `w_{j+1}` on the right).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalSplit {
    pub interval: usize,
    pub delta: f64,
    pub left_excess: f64,
    pub right_excess: f64,
    pub left: SegmentMaxStat,
    pub right: SegmentMaxStat,
}

pub fn running_max(path: &DiscretePath, a: usize, b: usize) -> Result<SegmentMaxStat> {
    path.grid.check_index(a)?;
    path.grid.check_index(b)?;
    if a > b {
        return Err(Error::InvalidArgument(format!("segment start {a} > end {b}")));
    }
    Ok(segment_max_unchecked(&path.values, a, b))
}

pub(crate) fn segment_max_unchecked(values: &[f64], a: usize, b: usize) -> SegmentMaxStat {
    let mut argmax = a;
    let mut max = values[a];
    for (i, &v) in values.iter().enumerate().take(b + 1).skip(a + 1) {
        if v > max {
            max = v;
            argmax = i;
        }
    }
    SegmentMaxStat {
        a,
        b,
        max_value: max,
        argmax_index: argmax,
    }
}

pub(crate) fn top_two_gap(values: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in values {
        if v > best {
            second = best;
            best = v;
        } else if v > second {
            second = v;
        }
    }
    best - second
}

pub fn delta_stat(path: &DiscretePath, t_index: usize) -> Result<DeltaStat> {
    path.grid.check_index(t_index)?;
    let n = path.grid.n();
    let left = segment_max_unchecked(&path.values, 0, t_index);
    let right = segment_max_unchecked(&path.values, t_index, n);
    let w_t = path.values[t_index];
    let left_excess = left.max_value - w_t;
    let right_excess = right.max_value - w_t;
    Ok(DeltaStat {
        t_index,
        // computed from the excesses so the decomposition holds bit-for-bit
        delta: right_excess - left_excess,
        left_excess,
        right_excess,
        left,
        right,
    })
}

pub fn interval_split(path: &DiscretePath, interval: usize) -> Result<IntervalSplit> {
    let n = path.grid.n();
    if interval >= n {
        return Err(Error::IndexOutOfRange {
            index: interval,
            max: n - 1,
        });
    }
    let left = segment_max_unchecked(&path.values, 0, interval);
    let right = segment_max_unchecked(&path.values, interval + 1, n);
    Ok(IntervalSplit {
        interval,
        delta: right.max_value - left.max_value,
        left_excess: left.max_value - path.values[interval],
        right_excess: right.max_value - path.values[interval + 1],
        left,
        right,
    })
}

/// `w + eps h` on the grid.
pub fn bump(path: &DiscretePath, h: &Direction, eps: f64) -> Result<DiscretePath> {
    path.grid.ensure_same(h.grid(), "bump")?;
    if !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("bump size must be finite, got {eps}")));
    }
    let values = path
        .values
        .iter()
        .zip(h.primitive())
        .map(|(w, p)| w + eps * p)
        .collect();
    Ok(DiscretePath::from_parts_unchecked(path.grid, values))
}

/// Discrete Ito integral `sum_j h'_j (w_{j+1} - w_j)`.
pub fn wiener_integral(h: &Direction, path: &DiscretePath) -> Result<f64> {
    path.grid.ensure_same(h.grid(), "wiener integral")?;
    Ok(wiener_integral_unchecked(h.density(), &path.values))
}

pub(crate) fn wiener_integral_unchecked(density: &[f64], values: &[f64]) -> f64 {
    density
        .iter()
        .zip(values.windows(2))
        .map(|(d, w)| d * (w[1] - w[0]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(values: &[f64]) -> DiscretePath {
        DiscretePath::from_values(1.0, values.to_vec()).unwrap()
    }

    #[test]
    fn running_max_examples() {
        let p = path(&[0.0, 1.0, -1.0]);
        let s = running_max(&p, 0, 2).unwrap();
        assert_eq!((s.max_value, s.argmax_index), (1.0, 1));

        let z = path(&[0.0; 5]);
        for a in 0..5 {
            for b in a..5 {
                let s = running_max(&z, a, b).unwrap();
                assert_eq!((s.max_value, s.argmax_index), (0.0, a));
            }
        }

        let p = path(&[0.0, 2.0, 2.0, 1.0]);
        let s = running_max(&p, 0, 3).unwrap();
        assert_eq!((s.max_value, s.argmax_index), (2.0, 1));
    }

    #[test]
    fn running_max_rejects_bad_indices() {
        let p = path(&[0.0, 1.0, -1.0]);
        assert!(matches!(
            running_max(&p, 0, 3),
            Err(Error::IndexOutOfRange { index: 3, max: 2 })
        ));
        assert!(running_max(&p, 2, 1).is_err());
    }

    #[test]
    fn first_argmax_exhaustive_small_paths() {
        // every path of length <= 6 with values in {-1, 0, 1}
        for len in 1..=6usize {
            let total = 3usize.pow(len as u32);
            for code in 0..total {
                let mut values = vec![0.0];
                let mut c = code;
                for _ in 0..len {
                    values.push((c % 3) as f64 - 1.0);
                    c /= 3;
                }
                let p = path(&values);
                for a in 0..=len {
                    for b in a..=len {
                        let s = running_max(&p, a, b).unwrap();
                        assert_eq!(p.values()[s.argmax_index], s.max_value);
                        assert!((a..=b).all(|i| p.values()[i] <= s.max_value));
                        assert!((a..s.argmax_index).all(|i| p.values()[i] < s.max_value));
                    }
                }
            }
        }
    }

    #[test]
    fn delta_stat_examples() {
        let p = path(&[0.0, 1.0, 0.0, 2.0]);
        let d = delta_stat(&p, 2).unwrap();
        assert_eq!((d.delta, d.left_excess, d.right_excess), (1.0, 1.0, 2.0));

        let d0 = delta_stat(&p, 0).unwrap();
        assert_eq!(d0.left_excess, 0.0);
        assert_eq!(d0.delta, 2.0);

        let p = path(&[0.0, 1.5, 0.5]);
        let dn = delta_stat(&p, 2).unwrap();
        assert_eq!(dn.right_excess, 0.0);
        assert_eq!(dn.delta, 0.5 - 1.5);

        assert!(delta_stat(&p, 3).is_err());
    }

    #[test]
    fn interval_split_separates_blocks() {
        let p = path(&[0.0, 1.0, 0.0, 2.0]);
        let s = interval_split(&p, 1).unwrap();
        assert_eq!(s.left.argmax_index, 1);
        assert_eq!(s.right.argmax_index, 3);
        assert_eq!(s.delta, 1.0);
        assert_eq!(s.left_excess, 0.0);
        assert_eq!(s.right_excess, 2.0);
        assert!(interval_split(&p, 3).is_err());
    }

    #[test]
    fn bump_examples() {
        let grid = TimeGrid::new(4, 1.0).unwrap();
        let p = DiscretePath::new(grid, vec![0.0, 0.3, -0.2, 0.1, 0.7]).unwrap();
        let h = Direction::constant(grid, 1.0);
        assert_eq!(bump(&p, &h, 0.0).unwrap(), p);

        let up = bump(&p, &h, 1.0).unwrap();
        for (i, v) in up.values().iter().enumerate() {
            assert_eq!(*v, p.values()[i] + grid.time(i));
        }

        let back = bump(&bump(&p, &h, 0.37).unwrap(), &h, -0.37).unwrap();
        for (a, b) in back.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-15);
        }

        let other = Direction::constant(TimeGrid::new(5, 1.0).unwrap(), 1.0);
        assert!(matches!(bump(&p, &other, 1.0), Err(Error::GridMismatch(_))));
        assert!(bump(&p, &h, f64::NAN).is_err());
    }

    #[test]
    fn path_validation() {
        let grid = TimeGrid::new(2, 1.0).unwrap();
        assert!(DiscretePath::new(grid, vec![0.0, 1.0]).is_err());
        assert!(DiscretePath::new(grid, vec![0.1, 1.0, 2.0]).is_err());
        assert!(TimeGrid::new(0, 1.0).is_err());
        assert!(TimeGrid::new(3, 0.0).is_err());
        assert_eq!(grid.times(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn csv_layout() {
        let p = path(&[0.0, 1.0, -1.0]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,time,value\n0,0.0,0.0\n1,0.5,1.0\n2,1.0,-1.0\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn delta_decomposition_is_exact(
                incs in prop::collection::vec(-3.0f64..3.0, 1..40),
                t_frac in 0.0f64..=1.0,
            ) {
                let mut values = vec![0.0];
                for x in &incs {
                    let last = *values.last().unwrap();
                    values.push(last + x);
                }
                let p = path(&values);
                let t = ((incs.len() as f64) * t_frac) as usize;
                let d = delta_stat(&p, t).unwrap();
                prop_assert_eq!(d.delta, d.right_excess - d.left_excess);
                prop_assert!(d.left_excess >= 0.0 && d.right_excess >= 0.0);
            }

            // Dyadic path values and step sizes keep every sum exact.
            #[test]
            fn bump_is_additive_in_eps(
                steps in prop::collection::vec(-64i32..64, 1..16),
                a in -16i32..16,
                b in -16i32..16,
            ) {
                let n = steps.len();
                let grid = TimeGrid::new(n, n as f64).unwrap();
                let mut values = vec![0.0];
                for s in &steps {
                    let last = *values.last().unwrap();
                    values.push(last + *s as f64 / 8.0);
                }
                let p = DiscretePath::new(grid, values).unwrap();
                let h = Direction::from_density(grid, steps.iter().map(|s| (*s % 5) as f64).collect()).unwrap();
                let (ea, eb) = (a as f64 / 4.0, b as f64 / 4.0);
                let once = bump(&p, &h, ea + eb).unwrap();
                let twice = bump(&bump(&p, &h, ea).unwrap(), &h, eb).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
