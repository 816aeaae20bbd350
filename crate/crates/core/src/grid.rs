//! Uniform grids, grid-aligned intervals and exact step functions.
//!
//! A [`StepFunction`] is constant on each cell of a [`Grid`], so every
//! integral, average and local `L^q` norm over a [`GridInterval`] is a finite
//! sum. The only approximation in the whole crate is the replacement of a
//! closed-form function by its cell averages.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::{abs_pow, compensated_sum};

/// Uniform partition of `[a, b]` into a power-of-two number of cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    a: f64,
    b: f64,
    n_cells: usize,
    h: f64,
}

/// Builds a grid on `[a, b]` with `n_cells` cells.
pub fn make_grid(a: f64, b: f64, n_cells: usize) -> Result<Grid> {
    Grid::new(a, b, n_cells)
}

impl Grid {
    pub fn new(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFiniteEndpoint { a, b });
        }
        if b <= a {
            return Err(Error::EmptyDomain { a, b });
        }
        if n_cells < 2 || !n_cells.is_power_of_two() {
            return Err(Error::BadCellCount(n_cells));
        }
        Ok(Self { a, b, n_cells, h: (b - a) / n_cells as f64 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Coordinate of grid point `i` (`0 ..= n_cells`).
    pub fn point(&self, i: usize) -> f64 {
        if i == self.n_cells {
            return self.b;
        }
        self.a + (self.b - self.a) * (i as f64 / self.n_cells as f64)
    }

    pub fn cell_bounds(&self, cell: usize) -> (f64, f64) {
        (self.point(cell), self.point(cell + 1))
    }

    pub fn cell_mid(&self, cell: usize) -> f64 {
        let (x0, x1) = self.cell_bounds(cell);
        0.5 * (x0 + x1)
    }

    /// Index of the grid point at coordinate `x`, if `x` is one (up to a
    /// few ulps of the domain length).
    pub fn point_index(&self, x: f64) -> Option<usize> {
        let t = (x - self.a) / self.h;
        let i = t.round();
        if i < 0.0 || i > self.n_cells as f64 {
            return None;
        }
        let i = i as usize;
        let slack = 8.0 * f64::EPSILON * (self.b - self.a).abs().max(self.a.abs()).max(self.b.abs());
        ((self.point(i) - x).abs() <= slack).then_some(i)
    }

    /// The whole domain as an interval.
    pub fn full(&self) -> GridInterval {
        GridInterval { start: 0, end: self.n_cells }
    }

    pub fn interval(&self, start: usize, end: usize) -> Result<GridInterval> {
        if start >= end || end > self.n_cells {
            return Err(Error::BadInterval { start, end, n_cells: self.n_cells });
        }
        Ok(GridInterval { start, end })
    }

    /// Interval with endpoints at the grid points `x0 < x1`.
    pub fn interval_at(&self, x0: f64, x1: f64) -> Result<GridInterval> {
        let s = self.point_index(x0).ok_or(Error::NotAGridPoint(x0))?;
        let e = self.point_index(x1).ok_or(Error::NotAGridPoint(x1))?;
        self.interval(s, e)
    }

    /// Measure `|I|`.
    pub fn measure(&self, i: GridInterval) -> f64 {
        i.len() as f64 * self.h
    }

    /// Domain coordinates of an interval's endpoints.
    pub fn coords(&self, i: GridInterval) -> (f64, f64) {
        (self.point(i.start), self.point(i.end))
    }

    /// Same domain, `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.a, self.b, self.n_cells * factor)
    }
}

/// Half-open cell range `[start, end)` standing for a subinterval `I`.
///
/// Ordering is by `start`, then `end`, which is also the tie-break order of
/// every arg-max over interval families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GridInterval {
    pub start: usize,
    pub end: usize,
}

impl GridInterval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn contains_cell(&self, cell: usize) -> bool {
        self.start <= cell && cell < self.end
    }
}

/// Piecewise-constant function on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells {
            return Err(Error::LengthMismatch { expected: grid.n_cells, got: values.len() });
        }
        if let Some((cell, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { cell, value });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n_cells])
    }

    /// Samples `g` at cell midpoints.
    pub fn from_fn(grid: Grid, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, (0..grid.n_cells).map(|c| g(grid.cell_mid(c))).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn cells(&self, i: GridInterval) -> &[f64] {
        &self.values[i.range()]
    }

    /// `∫_I f = h · Σ` of the covered values.
    pub fn integrate(&self, i: GridInterval) -> f64 {
        self.grid.h * compensated_sum(self.cells(i).iter().copied())
    }

    /// `I(f) = (1/|I|) ∫_I f`.
    pub fn average(&self, i: GridInterval) -> f64 {
        compensated_sum(self.cells(i).iter().copied()) / i.len() as f64
    }

    /// `(∫_I |f|^q)^{1/q}` for `q ≥ 1`.
    pub fn lq_norm_local(&self, i: GridInterval, q: f64) -> Result<f64> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::ExponentBelowOne(q));
        }
        let s = compensated_sum(self.cells(i).iter().map(|v| abs_pow(*v, q)));
        Ok((self.grid.h * s).powf(1.0 / q))
    }

    /// Essential infimum over `I`: the smallest covered cell value.
    pub fn ess_inf(&self, i: GridInterval) -> f64 {
        self.cells(i).iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_on(&self, i: GridInterval) -> f64 {
        self.cells(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `‖f‖_∞` over the whole grid.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| g(*v)).collect())
    }

    pub fn abs(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn scale(&self, lambda: f64) -> Result<Self> {
        self.map(|v| lambda * v)
    }

    fn zip_with(&self, other: &Self, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("pointwise operation on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| g(*a, *b)).collect();
        Self::new(self.grid, values)
    }

    /// Cellwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Cellwise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    /// The same function on a grid with `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.refined(factor)?;
        let values = self
            .values
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, factor))
            .collect();
        Self::new(grid, values)
    }
}
