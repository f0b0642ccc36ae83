use serde::{Deserialize, Serialize};

use super::TimeGrid;
use crate::error::{Error, Result};

/// Cameron-Martin direction with step-function density `h'` (one constant per
/// grid interval) and primitive `h(t_i) = sum_{j<i} h'_j dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    grid: TimeGrid,
    density: Vec<f64>,
    primitive: Vec<f64>,
}

/// Named directions used by the experiments and the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKind {
    /// `h' = 1`, so `h(t) = t`.
    Constant,
    /// `h' = 1` on `[0, T/2]`.
    FirstHalf,
    /// `h' = 1` on `[T/2, T]`.
    SecondHalf,
    /// `h'(t) = cos(2 pi t / T)`.
    Cosine,
    /// `h' = 0`.
    Zero,
}

impl DirectionKind {
    pub const CATALOG: [DirectionKind; 3] = [
        DirectionKind::Constant,
        DirectionKind::FirstHalf,
        DirectionKind::Cosine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DirectionKind::Constant => "constant",
            DirectionKind::FirstHalf => "first_half",
            DirectionKind::SecondHalf => "second_half",
            DirectionKind::Cosine => "cosine",
            DirectionKind::Zero => "zero",
        }
    }
}

impl Direction {
    pub fn from_density(grid: TimeGrid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.n() {
            return Err(Error::InvalidArgument(format!(
                "direction density needs {} entries, got {}",
                grid.n(),
                density.len()
            )));
        }
        if density.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("non-finite direction density".into()));
        }
        let dt = grid.dt();
        let mut primitive = Vec::with_capacity(grid.n() + 1);
        let mut acc = 0.0;
        primitive.push(acc);
        for d in &density {
            acc += d * dt;
            primitive.push(acc);
        }
        Ok(Self {
            grid,
            density,
            primitive,
        })
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self::from_density(grid, vec![value; grid.n()]).expect("constant density is valid")
    }

    /// Density sampled at interval midpoints.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let dt = grid.dt();
        let density = (0..grid.n()).map(|j| f((j as f64 + 0.5) * dt)).collect();
        Self::from_density(grid, density)
    }

    /// Indicator of `[a, b]` in time, resolved on interval midpoints.
    pub fn indicator(grid: TimeGrid, a: f64, b: f64) -> Self {
        Self::from_fn(grid, |t| if t >= a && t <= b { 1.0 } else { 0.0 })
            .expect("indicator density is finite")
    }

    pub fn from_kind(grid: TimeGrid, kind: DirectionKind) -> Self {
        let horizon = grid.horizon();
        match kind {
            DirectionKind::Constant => Self::constant(grid, 1.0),
            DirectionKind::FirstHalf => Self::indicator(grid, 0.0, horizon / 2.0),
            DirectionKind::SecondHalf => Self::indicator(grid, horizon / 2.0, horizon),
            DirectionKind::Cosine => Self::from_fn(grid, |t| {
                (2.0 * std::f64::consts::PI * t / horizon).cos()
            })
            .expect("cosine density is finite"),
            DirectionKind::Zero => Self::constant(grid, 0.0),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn primitive(&self) -> &[f64] {
        &self.primitive
    }

    /// `h(t_i)`.
    pub fn at(&self, i: usize) -> f64 {
        self.primitive[i]
    }

    pub fn sup_norm(&self) -> f64 {
        self.primitive.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    /// `<k', h'>_{L^2(0,T)}` for step densities.
    pub fn inner(&self, other: &Direction) -> Result<f64> {
        self.grid.ensure_same(&other.grid, "inner product")?;
        let dt = self.grid.dt();
        Ok(self
            .density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * dt)
    }

    /// Writes `index,time,value` rows of the primitive.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        super::write_grid_csv(&self.grid, &self.primitive, writer)
    }
}
