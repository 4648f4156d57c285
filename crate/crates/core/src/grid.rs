//! Uniform Cartesian sampling of `[-1, 1]^2` and scalar fields on it.
//!
//! Node `(ix, iy)` sits at `(-1 + ix*h, -1 + iy*h)` with `h = 2/(n-1)` and is
//! stored at flat index `iy*n + ix` (rows run along `x`, row `iy` is the
//! `y = -1 + iy*h` line).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::vec2::Vec2;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid2D {
    n: usize,
}

/// Bilinear interpolation stencil: lower-left node and cell fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub base: usize,
    pub fx: f64,
    pub fy: f64,
}

impl Stencil {
    /// Weights of the nodes `base`, `base+1`, `base+n`, `base+n+1`.
    #[inline]
    pub fn weights(&self) -> [f64; 4] {
        let (fx, fy) = (self.fx, self.fy);
        [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ]
    }
}

impl Grid2D {
    pub const MIN_N: usize = 16;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_N {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points per axis, got {n}",
                Self::MIN_N
            )));
        }
        if n > u32::MAX as usize / n {
            return Err(Error::InvalidGrid(format!("{n} points per axis is too many")));
        }
        Ok(Grid2D { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 / (self.n - 1) as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.spacing()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n + ix
    }

    #[inline]
    pub fn node(&self, index: usize) -> Vec2 {
        Vec2::new(self.coord(index % self.n), self.coord(index / self.n))
    }

    /// Locates `p` for bilinear interpolation; points outside the square are
    /// clamped to the nearest cell edge.
    #[inline]
    pub fn locate(&self, p: Vec2) -> Stencil {
        let h = self.spacing();
        let last = (self.n - 2) as f64;
        let u = ((p.x + 1.0) / h).clamp(0.0, last + 1.0);
        let v = ((p.y + 1.0) / h).clamp(0.0, last + 1.0);
        let ix = libm::floor(u).min(last);
        let iy = libm::floor(v).min(last);
        Stencil {
            base: iy as usize * self.n + ix as usize,
            fx: u - ix,
            fy: v - iy,
        }
    }

    /// True if node `index` lies in the open unit disk.
    #[inline]
    pub fn in_disk(&self, index: usize) -> bool {
        self.node(index).norm_sq() < 1.0
    }

    fn check(&self, other: &Grid2D) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

/// A real function sampled on every node of a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField2D {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        ScalarField2D {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(Vec2) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        ScalarField2D { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: (grid.n(), grid.n()),
                found: (values.len(), 1),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {i}")));
        }
        Ok(ScalarField2D { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// Bilinear interpolation at `p` (clamped to the square).
    #[inline]
    pub fn eval(&self, p: Vec2) -> f64 {
        self.eval_stencil(&self.grid.locate(p))
    }

    #[inline]
    pub fn eval_stencil(&self, s: &Stencil) -> f64 {
        let n = self.grid.n;
        let w = s.weights();
        let v = &self.values;
        w[0] * v[s.base] + w[1] * v[s.base + 1] + w[2] * v[s.base + n] + w[3] * v[s.base + n + 1]
    }

    pub fn same_grid(&self, other: &ScalarField2D) -> Result<()> {
        self.grid.check(&other.grid)
    }

    pub fn check_grid(&self, grid: Grid2D) -> Result<()> {
        grid.check(&self.grid)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField2D {
        ScalarField2D {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField2D) -> Result<ScalarField2D> {
        self.same_grid(other)?;
        Ok(ScalarField2D {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ScalarField2D) -> Result<()> {
        self.same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Flat inner product `sum f g h^2`.
    pub fn dot(&self, other: &ScalarField2D) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_area())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Centered-difference gradient; one-sided on the square's edges.
    pub fn gradient(&self) -> (ScalarField2D, ScalarField2D) {
        let n = self.grid.n;
        let h = self.grid.spacing();
        let mut gx = ScalarField2D::zeros(self.grid);
        let mut gy = ScalarField2D::zeros(self.grid);
        for iy in 0..n {
            for ix in 0..n {
                let (xl, xr, dx) = match ix {
                    0 => (0, 1, h),
                    _ if ix == n - 1 => (n - 2, n - 1, h),
                    _ => (ix - 1, ix + 1, 2.0 * h),
                };
                let (yl, yr, dy) = match iy {
                    0 => (0, 1, h),
                    _ if iy == n - 1 => (n - 2, n - 1, h),
                    _ => (iy - 1, iy + 1, 2.0 * h),
                };
                let i = self.grid.index(ix, iy);
                gx.values[i] = (self.get(xr, iy) - self.get(xl, iy)) / dx;
                gy.values[i] = (self.get(ix, yr) - self.get(ix, yl)) / dy;
            }
        }
        (gx, gy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_square() {
        let g = Grid2D::new(33).unwrap();
        assert_eq!(g.coord(0), -1.0);
        assert!((g.coord(32) - 1.0).abs() < 1e-15);
        assert!((g.spacing() - 2.0 / 32.0).abs() < 1e-15);
        assert!(Grid2D::new(15).is_err());
    }

    #[test]
    fn bilinear_reproduces_affine_functions() {
        let g = Grid2D::new(17).unwrap();
        let f = ScalarField2D::from_fn(g, |p| 2.0 * p.x - 3.0 * p.y + 0.5);
        for &(x, y) in &[(0.13, -0.71), (-1.0, 1.0), (0.999, -0.999), (1.0, 1.0)] {
            let want = 2.0 * x - 3.0 * y + 0.5;
            assert!((f.eval(Vec2::new(x, y)) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn from_values_rejects_nan() {
        let g = Grid2D::new(16).unwrap();
        let mut v = vec![0.0; g.len()];
        v[7] = f64::NAN;
        assert!(matches!(
            ScalarField2D::from_values(g, v),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn gradient_exact_for_quadratic_interior() {
        let g = Grid2D::new(21).unwrap();
        let f = ScalarField2D::from_fn(g, |p| p.x * p.x + p.x * p.y);
        let (gx, gy) = f.gradient();
        let i = g.index(7, 12);
        let p = g.node(i);
        assert!((gx.values()[i] - (2.0 * p.x + p.y)).abs() < 1e-12);
        assert!((gy.values()[i] - p.x).abs() < 1e-12);
    }
}
