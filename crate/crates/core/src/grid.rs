//! Uniform square lattice and scalar grid fields.
//!
//! Cells are squares of side `h = 2*half_width/n`; values live at cell
//! centers `x_i = -half_width + (i + 1/2) h`. With `n` even no cell center
//! sits exactly at the origin, which keeps `log|x|` integrands finite.

use crate::error::{Error, Result};
use crate::exec;

/// Geometry of a uniform `n x n` grid covering `[-half_width, half_width]^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    n: usize,
    half_width: f64,
}

impl Grid2D {
    /// `n` must be a power of two (fast-transform friendly), `half_width > 0`.
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Grid(format!(
                "cells per side must be a power of two >= 8, got {n}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Grid(format!("half_width must be positive, got {half_width}")));
        }
        Ok(Self { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Lattice spacing.
    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Cell-center coordinate along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h()
    }

    /// Index of the cell whose center is nearest to coordinate `x` (clamped).
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = ((x + self.half_width) / self.h() - 0.5).round();
        raw.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    /// Cell area `h^2`, the quadrature weight of every functional.
    pub fn cell_area(&self) -> f64 {
        let h = self.h();
        h * h
    }
}

/// Scalar function sampled at cell centers, row-major: `data[iy * n + ix]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field2D {
    grid: Grid2D,
    data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, data: vec![0.0; grid.cell_count()] }
    }

    /// Sample a closure `f(x, y)` at every cell center.
    pub fn from_fn<F>(grid: Grid2D, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let mut field = Self::zeros(grid);
        let n = grid.n();
        exec::for_each_row_mut(&mut field.data, n, |iy, row| {
            let y = grid.coord(iy);
            for (ix, v) in row.iter_mut().enumerate() {
                *v = f(grid.coord(ix), y);
            }
        });
        field
    }

    pub fn from_vec(grid: Grid2D, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.cell_count() {
            return Err(Error::Grid(format!(
                "field payload has {} values, grid needs {}",
                data.len(),
                grid.cell_count()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.data[iy * self.grid.n + ix]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        self.data[iy * self.grid.n + ix] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Apply `f(ix, iy, value) -> value` over all cells.
    pub fn map_cells<F>(&mut self, f: F)
    where
        F: Fn(usize, usize, f64) -> f64 + Sync,
    {
        let n = self.grid.n();
        exec::for_each_row_mut(&mut self.data, n, |iy, row| {
            for (ix, v) in row.iter_mut().enumerate() {
                *v = f(ix, iy, *v);
            }
        });
    }

    /// Deterministic sum of `w(cell) * value(cell)` (no `h^2` factor).
    pub fn weighted_sum<F>(&self, w: F) -> f64
    where
        F: Fn(usize, usize, f64) -> f64 + Sync,
    {
        let n = self.grid.n();
        let data = &self.data;
        exec::sum_rows(n, |iy| {
            let row = &data[iy * n..(iy + 1) * n];
            let mut acc = 0.0;
            for (ix, &v) in row.iter().enumerate() {
                acc += w(ix, iy, v);
            }
            acc
        })
    }

    /// Plain deterministic sum of all values.
    pub fn sum(&self) -> f64 {
        self.weighted_sum(|_, _, v| v)
    }

    pub fn sup_norm(&self) -> f64 {
        let n = self.grid.n();
        let data = &self.data;
        exec::max_rows(n, |iy| {
            data[iy * n..(iy + 1) * n]
                .iter()
                .fold(0.0f64, |a, &b| a.max(b.abs()))
        })
    }

    pub fn min(&self) -> f64 {
        let n = self.grid.n();
        let data = &self.data;
        -exec::max_rows(n, |iy| {
            data[iy * n..(iy + 1) * n].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(-b))
        })
    }

    pub fn max(&self) -> f64 {
        let n = self.grid.n();
        let data = &self.data;
        exec::max_rows(n, |iy| {
            data[iy * n..(iy + 1) * n].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        })
    }

    /// Sup norm of `self - other`.
    pub fn sup_distance(&self, other: &Field2D) -> f64 {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        let n = self.grid.n();
        let (a, b) = (&self.data, &other.data);
        exec::max_rows(n, |iy| {
            let ra = &a[iy * n..(iy + 1) * n];
            let rb = &b[iy * n..(iy + 1) * n];
            ra.iter().zip(rb).fold(0.0f64, |acc, (&x, &y)| acc.max((x - y).abs()))
        })
    }

    pub fn has_non_finite(&self) -> bool {
        self.data.iter().any(|v| !v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_non_power_of_two() {
        assert!(Grid2D::new(100, 10.0).is_err());
        assert!(Grid2D::new(128, 10.0).is_ok());
    }

    #[test]
    fn coords_are_symmetric_and_center_free() {
        let g = Grid2D::new(64, 8.0).unwrap();
        assert!((g.coord(0) + g.coord(63)).abs() < 1e-14);
        for i in 0..64 {
            assert!(g.coord(i).abs() > 1e-12);
        }
        assert!((g.h() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weighted_sum_matches_naive() {
        let g = Grid2D::new(32, 4.0).unwrap();
        let f = Field2D::from_fn(g, |x, y| x * x + 0.3 * y);
        let naive: f64 = f.as_slice().iter().sum();
        assert!((f.sum() - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn nearest_index_roundtrip() {
        let g = Grid2D::new(64, 8.0).unwrap();
        for i in [0usize, 1, 31, 32, 63] {
            assert_eq!(g.nearest_index(g.coord(i)), i);
        }
    }
}
