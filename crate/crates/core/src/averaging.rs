//! Nonlocal averages of the density sampled at agent positions.
//!
//! The kernel is the compactly supported bump
//!
//! ```text
//! eta(x) = 3 / (pi r^6) * max(0, r^2 - |x|^2)^2
//! ```
//!
//! which integrates to one over the plane. Averages are midpoint sums over
//! cell centers; cells outside the grid hold no density and contribute
//! nothing.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};

/// Radially symmetric mollifier with support radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierKernel {
    radius: f64,
    norm: f64,
}

impl MollifierKernel {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(
                "r_p",
                format!("kernel radius must be positive, got {radius}"),
            ));
        }
        Ok(Self {
            radius,
            norm: 3.0 / (PI * radius.powi(6)),
        })
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn value(&self, d: [f64; 2]) -> f64 {
        let gap = self.radius * self.radius - (d[0] * d[0] + d[1] * d[1]);
        if gap <= 0.0 {
            0.0
        } else {
            self.norm * gap * gap
        }
    }

    /// Analytic gradient `-4 * norm * max(0, r^2 - |x|^2) * x`.
    #[inline]
    pub fn gradient(&self, d: [f64; 2]) -> [f64; 2] {
        let gap = self.radius * self.radius - (d[0] * d[0] + d[1] * d[1]);
        if gap <= 0.0 {
            [0.0, 0.0]
        } else {
            let s = -4.0 * self.norm * gap;
            [s * d[0], s * d[1]]
        }
    }

    /// `max eta = eta(0) = 3 / (pi r^2)`.
    pub fn max_value(&self) -> f64 {
        3.0 / (PI * self.radius * self.radius)
    }

    /// `max |grad eta|`, attained at `|x| = r / sqrt(3)`: `8 / (sqrt(3) pi r^3)`.
    pub fn max_gradient_norm(&self) -> f64 {
        8.0 / (3f64.sqrt() * PI * self.radius.powi(3))
    }

    /// Midpoint sum of the kernel over the cells of `grid`, centered at `point`.
    pub fn discrete_mass(&self, grid: &GridSpec, point: [f64; 2]) -> f64 {
        let mut sum = 0.0;
        self.for_each_cell(grid, point, |_, d| sum += self.value(d));
        sum * grid.cell_area()
    }

    fn for_each_cell(&self, grid: &GridSpec, point: [f64; 2], mut visit: impl FnMut(usize, [f64; 2])) {
        let (i0, i1) = GridSpec::axis_window(grid.x0, grid.dx, grid.nx, point[0], self.radius);
        let (j0, j1) = GridSpec::axis_window(grid.y0, grid.dy, grid.ny, point[1], self.radius);
        let r2 = self.radius * self.radius;
        for j in j0..j1 {
            for i in i0..i1 {
                let [x, y] = grid.cell_center(i, j);
                let d = [point[0] - x, point[1] - y];
                if d[0] * d[0] + d[1] * d[1] < r2 {
                    visit(grid.index(i, j), d);
                }
            }
        }
    }
}

/// Whether an agent senses the averaged density or its averaged gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingMode {
    Value,
    Gradient,
}

impl AveragingMode {
    /// Number of output components per sample point.
    pub fn width(self) -> usize {
        match self {
            AveragingMode::Value => 1,
            AveragingMode::Gradient => 2,
        }
    }
}

/// `(rho * eta)(point)`.
pub fn convolve_at(field: &DensityField, kernel: &MollifierKernel, point: [f64; 2]) -> f64 {
    let grid = field.grid();
    let values = field.values();
    let mut sum = 0.0;
    kernel.for_each_cell(grid, point, |k, d| sum += values[k] * kernel.value(d));
    sum * grid.cell_area()
}

/// `(rho * grad eta)(point)`.
pub fn convolve_grad_at(field: &DensityField, kernel: &MollifierKernel, point: [f64; 2]) -> [f64; 2] {
    let grid = field.grid();
    let values = field.values();
    let mut sum = [0.0, 0.0];
    kernel.for_each_cell(grid, point, |k, d| {
        let g = kernel.gradient(d);
        sum[0] += values[k] * g[0];
        sum[1] += values[k] * g[1];
    });
    let area = grid.cell_area();
    [sum[0] * area, sum[1] * area]
}

/// Concatenated averages at each point: one scalar per point in value mode,
/// two components per point in gradient mode.
pub fn stack_at(field: &DensityField, kernel: &MollifierKernel, points: &[[f64; 2]], mode: AveragingMode) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len() * mode.width());
    for &p in points {
        match mode {
            AveragingMode::Value => out.push(convolve_at(field, kernel, p)),
            AveragingMode::Gradient => out.extend_from_slice(&convolve_grad_at(field, kernel, p)),
        }
    }
    out
}
