//! Lax-Friedrichs finite volumes with dimensional splitting.
//!
//! One sweep along an axis with cell width `h` updates
//!
//! ```text
//! rho_i' = (rho_{i-1} + rho_{i+1}) / 2 - dt / (2h) * (F_{i+1} - F_{i-1})
//! ```
//!
//! where `F_j` is the axis component of the flux at cell `j`'s own center.
//! Ghost cells outside the grid hold vacuum, where the flux is zero. The
//! agent state is frozen for the whole step.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};
use crate::models::Flux;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Fraction of the stable time step, in `(0, 1]`.
    pub cfl_factor: f64,
    /// Clip to `[0, R]` after each step, recording the clipped mass.
    pub clamp_to_range: bool,
    /// Accept `cfl_factor > 1` and skip the per-sweep stability check.
    /// Only useful for instability probes.
    pub unchecked_cfl: bool,
    /// Density, relative to `R`, above which a cell next to the grid edge
    /// aborts a run.
    pub margin_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl_factor: 0.9,
            clamp_to_range: false,
            unchecked_cfl: false,
            margin_threshold: crate::engine::MARGIN_THRESHOLD,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let limit = if self.unchecked_cfl { f64::INFINITY } else { 1.0 };
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= limit && self.cfl_factor.is_finite()) {
            return Err(Error::param(
                "solver.cfl_factor",
                format!("must lie in (0, 1], got {}", self.cfl_factor),
            ));
        }
        if !(self.margin_threshold > 0.0 && self.margin_threshold.is_finite()) {
            return Err(Error::param(
                "solver.margin_threshold",
                format!("must be positive, got {}", self.margin_threshold),
            ));
        }
        Ok(())
    }
}

/// `cfl_factor * min(dx, dy) / V_cfl`.
pub fn cfl_dt(flux: &impl Flux, grid: &GridSpec, config: &SolverConfig) -> Result<f64> {
    config.validate()?;
    let speed = flux.cfl_speed();
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(Error::InvalidSpeed(speed));
    }
    Ok(config.cfl_factor * grid.min_cell_width() / speed)
}

fn check_cfl(flux: &impl Flux, h: f64, dt: f64) -> Result<()> {
    let limit = h / flux.cfl_speed();
    if dt.is_nan() || dt <= 0.0 || dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    Ok(())
}

/// One Lax-Friedrichs sweep along `axis`. Refuses a `dt` above the stable limit.
pub fn lxf_sweep(
    field: &DensityField,
    flux: &impl Flux,
    t: f64,
    p: &[f64],
    dt: f64,
    axis: Axis,
) -> Result<DensityField> {
    let g = field.grid();
    let h = match axis {
        Axis::X => g.dx,
        Axis::Y => g.dy,
    };
    check_cfl(flux, h, dt)?;
    Ok(sweep(field, flux, t, p, dt, axis))
}

fn sweep(field: &DensityField, flux: &impl Flux, t: f64, p: &[f64], dt: f64, axis: Axis) -> DensityField {
    let g = *field.grid();
    let (nx, ny) = (g.nx, g.ny);
    let rho = field.values();
    let c = match axis {
        Axis::X => 0,
        Axis::Y => 1,
    };

    let mut fluxes = vec![0.0; g.len()];
    fluxes.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, out) in row.iter_mut().enumerate() {
            let r = rho[j * nx + i];
            if r != 0.0 {
                *out = flux.flux(t, g.cell_center(i, j), r, p)[c];
            }
        }
    });

    let mut next = vec![0.0; g.len()];
    match axis {
        Axis::X => {
            let lambda = dt / (2.0 * g.dx);
            next.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
                let r = &rho[j * nx..(j + 1) * nx];
                let f = &fluxes[j * nx..(j + 1) * nx];
                for i in 0..nx {
                    let (rl, fl) = if i > 0 { (r[i - 1], f[i - 1]) } else { (0.0, 0.0) };
                    let (rr, fr) = if i + 1 < nx { (r[i + 1], f[i + 1]) } else { (0.0, 0.0) };
                    row[i] = 0.5 * (rl + rr) - lambda * (fr - fl);
                }
            });
        }
        Axis::Y => {
            let lambda = dt / (2.0 * g.dy);
            let zeros = vec![0.0; nx];
            next.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
                let (rl, fl) = if j > 0 {
                    (&rho[(j - 1) * nx..j * nx], &fluxes[(j - 1) * nx..j * nx])
                } else {
                    (&zeros[..], &zeros[..])
                };
                let (rr, fr) = if j + 1 < ny {
                    (&rho[(j + 1) * nx..(j + 2) * nx], &fluxes[(j + 1) * nx..(j + 2) * nx])
                } else {
                    (&zeros[..], &zeros[..])
                };
                for i in 0..nx {
                    row[i] = 0.5 * (rl[i] + rr[i]) - lambda * (fr[i] - fl[i]);
                }
            });
        }
    }
    DensityField::from_raw(g, field.rho_max(), next)
}

/// Result of one split step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub field: DensityField,
    /// Mass removed by clipping to `[0, R]` (absolute value of the change).
    pub clipped_mass: f64,
}

/// Two full-`dt` sweeps: X then Y on even `step_index`, Y then X on odd.
pub fn pde_step(
    field: &DensityField,
    flux: &impl Flux,
    t: f64,
    p: &[f64],
    dt: f64,
    step_index: usize,
    config: &SolverConfig,
) -> Result<StepOutput> {
    config.validate()?;
    let g = field.grid();
    if !config.unchecked_cfl {
        check_cfl(flux, g.min_cell_width(), dt)?;
    }
    let (first, second) = if step_index.is_multiple_of(2) {
        (Axis::X, Axis::Y)
    } else {
        (Axis::Y, Axis::X)
    };
    let half = sweep(field, flux, t, p, dt, first);
    let mut out = sweep(&half, flux, t, p, dt, second);
    let mut clipped = 0.0;
    if config.clamp_to_range {
        let r = out.rho_max();
        for v in out.values_mut() {
            let c = v.clamp(0.0, r);
            clipped += (c - *v).abs();
            *v = c;
        }
        clipped *= g.cell_area();
    }
    Ok(StepOutput {
        field: out,
        clipped_mass: clipped,
    })
}
