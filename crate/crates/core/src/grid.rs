//! Uniform rectangular grids and cell-averaged density fields.
//!
//! Values are stored row-major: cell `(i, j)` lives at `j * nx + i`, with `i`
//! running along x and `j` along y. Everything outside the grid is treated as
//! vacuum, which is what the norms below assume.

use crate::error::{Error, Result};

/// Geometry of a uniform cell-centered grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl GridSpec {
    pub fn new(x0: f64, y0: f64, nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 cells per axis, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell widths must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        Ok(Self { x0, y0, nx, ny, dx, dy })
    }

    /// Grid covering `[xmin, xmax] x [ymin, ymax]` with `nx x ny` cells.
    pub fn covering(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(xmax > xmin && ymax > ymin) {
            return Err(Error::InvalidGrid(format!(
                "empty extent [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Self::new(xmin, ymin, nx, ny, (xmax - xmin) / nx as f64, (ymax - ymin) / ny as f64)
    }

    /// Square grid `[-half, half]^2` with `n x n` cells.
    pub fn centered_square(half: f64, n: usize) -> Result<Self> {
        Self::covering(-half, half, -half, half, n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.x0 + (i as f64 + 0.5) * self.dx,
            self.y0 + (j as f64 + 0.5) * self.dy,
        ]
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.nx as f64 * self.dx
    }

    pub fn y_max(&self) -> f64 {
        self.y0 + self.ny as f64 * self.dy
    }

    pub fn max_cell_width(&self) -> f64 {
        self.dx.max(self.dy)
    }

    pub fn min_cell_width(&self) -> f64 {
        self.dx.min(self.dy)
    }

    /// Index range of cells whose centers may lie within `radius` of `point`
    /// along one axis, clipped to the grid.
    pub(crate) fn axis_window(origin: f64, h: f64, n: usize, center: f64, radius: f64) -> (usize, usize) {
        let lo = ((center - radius - origin) / h - 0.5).floor();
        let hi = ((center + radius - origin) / h - 0.5).ceil();
        let lo = lo.max(0.0) as usize;
        let hi = if hi < 0.0 { 0 } else { (hi as usize + 1).min(n) };
        (lo.min(n), hi)
    }
}

/// Cell-averaged density on a [`GridSpec`], valued in `[0, rho_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: GridSpec,
    values: Vec<f64>,
    rho_max: f64,
}

impl DensityField {
    pub fn zeros(grid: GridSpec, rho_max: f64) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            rho_max,
        }
    }

    pub fn constant(grid: GridSpec, rho_max: f64, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            rho_max,
        }
    }

    pub fn from_values(grid: GridSpec, rho_max: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("value {k} is not finite")));
        }
        if !(rho_max > 0.0 && rho_max.is_finite()) {
            return Err(Error::param("rho_max", "must be positive"));
        }
        Ok(Self { grid, values, rho_max })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: GridSpec, rho_max: f64, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.cell_center(i, j)));
            }
        }
        Self { grid, values, rho_max }
    }

    pub(crate) fn from_raw(grid: GridSpec, rho_max: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, rho_max }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = value;
    }

    /// Pointwise `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &DensityField, beta: f64) -> Result<DensityField> {
        same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self::from_raw(self.grid, self.rho_max, values))
    }

    pub fn scaled(&self, factor: f64) -> DensityField {
        let values = self.values.iter().map(|v| v * factor).collect();
        Self::from_raw(self.grid, self.rho_max, values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Discrete integral `sum rho * dx * dy`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Mass inside an axis-aligned rectangle, counting cells whose centers are inside.
    pub fn mass_in_rect(&self, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> f64 {
        let g = &self.grid;
        let mut sum = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let [x, y] = g.cell_center(i, j);
                if x >= xmin && x <= xmax && y >= ymin && y <= ymax {
                    sum += self.values[g.index(i, j)];
                }
            }
        }
        sum * g.cell_area()
    }

    /// `sum |a - b| * dx * dy`.
    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        same_grid(self, other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(s * self.grid.cell_area())
    }

    /// Total variation with zero ghost cells around the grid, so the jump at
    /// the edge of a compact blob counts toward its perimeter.
    pub fn total_variation(&self) -> f64 {
        let g = &self.grid;
        let mut tv_x = 0.0;
        let mut tv_y = 0.0;
        for j in 0..g.ny {
            let row = &self.values[j * g.nx..(j + 1) * g.nx];
            let mut prev = 0.0;
            for &v in row {
                tv_x += (v - prev).abs();
                prev = v;
            }
            tv_x += prev.abs();
        }
        for i in 0..g.nx {
            let mut prev = 0.0;
            for j in 0..g.ny {
                let v = self.values[g.index(i, j)];
                tv_y += (v - prev).abs();
                prev = v;
            }
            tv_y += prev.abs();
        }
        tv_x * g.dy + tv_y * g.dx
    }

    /// Largest distance from the origin of a cell center whose value exceeds
    /// `threshold`; zero when no cell does.
    pub fn support_radius(&self, threshold: f64) -> f64 {
        self.support_radius_from([0.0, 0.0], threshold)
    }

    pub fn support_radius_from(&self, center: [f64; 2], threshold: f64) -> f64 {
        let g = &self.grid;
        let mut r2 = 0.0f64;
        for j in 0..g.ny {
            for i in 0..g.nx {
                if self.values[g.index(i, j)] > threshold {
                    let [x, y] = g.cell_center(i, j);
                    let (ex, ey) = (x - center[0], y - center[1]);
                    r2 = r2.max(ex * ex + ey * ey);
                }
            }
        }
        r2.sqrt()
    }

    /// Number of 4-connected components of `{cells : value > threshold}`.
    pub fn connected_components(&self, threshold: f64) -> usize {
        let g = &self.grid;
        let mut seen = vec![false; g.len()];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..g.len() {
            if seen[start] || self.values[start] <= threshold {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(k) = stack.pop() {
                let (i, j) = (k % g.nx, k / g.nx);
                let mut visit = |n: usize| {
                    if !seen[n] && self.values[n] > threshold {
                        seen[n] = true;
                        stack.push(n);
                    }
                };
                if i > 0 {
                    visit(k - 1);
                }
                if i + 1 < g.nx {
                    visit(k + 1);
                }
                if j > 0 {
                    visit(k - g.nx);
                }
                if j + 1 < g.ny {
                    visit(k + g.nx);
                }
            }
        }
        count
    }

    /// Largest value within `cells` cells of the grid edge.
    pub fn max_in_boundary_band(&self, cells: usize) -> f64 {
        let g = &self.grid;
        let mut m = 0.0f64;
        for j in 0..g.ny {
            let edge_row = j < cells || j + cells >= g.ny;
            for i in 0..g.nx {
                if edge_row || i < cells || i + cells >= g.nx {
                    m = m.max(self.values[g.index(i, j)]);
                }
            }
        }
        m
    }
}

fn same_grid(a: &DensityField, b: &DensityField) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", a.grid, b.grid)));
    }
    Ok(())
}
