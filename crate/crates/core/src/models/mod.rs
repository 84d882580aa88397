//! Flux laws, agent speed laws and initial data for the built-in scenarios.
//!
//! Every scenario couples a density `rho` on the plane with an agent state
//! `p` through
//!
//! ```text
//! d/dt rho + div_x f(t, x, rho, p(t)) = 0
//! d/dt p   = phi(t, p, (A rho)(p))
//! ```
//!
//! where `A` is a kernel average sampled at the agent positions. All fluxes
//! here have the form `rho * v(rho) * w(x, p)` with `v(R) = 0`, so they vanish
//! at vacuum and at congestion.

mod dogs;
mod piper;
mod prey;

pub use dogs::{DogsModel, DogsParams};
pub use piper::{Heading, PiperModel, PiperParams, RouteHeading};
pub use prey::{PreyModel, PreyParams};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::averaging::{AveragingMode, MollifierKernel};
use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};

/// A flux `f(t, x, rho, p)` together with a bound on its characteristic speed.
pub trait Flux: Sync {
    fn flux(&self, t: f64, x: [f64; 2], rho: f64, p: &[f64]) -> [f64; 2];

    /// Upper bound on `|d f / d rho . e|` for each axis direction `e`, over
    /// the densities and states a run visits.
    fn cfl_speed(&self) -> f64;
}

/// Analytic constants entering the total variation estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvConstants {
    /// `sup |grad_x d_rho f|` (Frobenius norm).
    pub grad_dflux: f64,
    /// `int sup |grad_x div_x f| dx`, the supremum taken over densities in
    /// `[0, R]` and agent positions in the ball of the given radius.
    pub grad_div_integral: f64,
}

/// Region initially filled at density `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Empty,
    Rect { xmin: f64, xmax: f64, ymin: f64, ymax: f64 },
    Disc { center: [f64; 2], radius: f64 },
}

impl Shape {
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match *self {
            Shape::Empty => false,
            Shape::Rect { xmin, xmax, ymin, ymax } => x[0] >= xmin && x[0] <= xmax && x[1] >= ymin && x[1] <= ymax,
            Shape::Disc { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) <= radius,
        }
    }

    /// `[xmin, xmax, ymin, ymax]`, or `None` for the empty shape.
    pub fn bounding_box(&self) -> Option<[f64; 4]> {
        match *self {
            Shape::Empty => None,
            Shape::Rect { xmin, xmax, ymin, ymax } => Some([xmin, xmax, ymin, ymax]),
            Shape::Disc { center, radius } => Some([
                center[0] - radius,
                center[0] + radius,
                center[1] - radius,
                center[1] + radius,
            ]),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Empty => 0.0,
            Shape::Rect { xmin, xmax, ymin, ymax } => (xmax - xmin) * (ymax - ymin),
            Shape::Disc { radius, .. } => PI * radius * radius,
        }
    }

    /// Cell values `R * (fraction of the cell inside the shape)`, the fraction
    /// estimated on a 4x4 subgrid of each cell.
    ///
    /// The shape's bounding box must sit at least `margin` inside the grid.
    pub fn rasterize(&self, grid: &GridSpec, rho_max: f64, margin: f64) -> Result<DensityField> {
        let Some([xmin, xmax, ymin, ymax]) = self.bounding_box() else {
            return Ok(DensityField::zeros(*grid, rho_max));
        };
        if xmin - margin < grid.x0
            || xmax + margin > grid.x_max()
            || ymin - margin < grid.y0
            || ymax + margin > grid.y_max()
        {
            return Err(Error::DomainTooSmall(format!(
                "initial datum needs [{}, {}] x [{}, {}], grid covers [{}, {}] x [{}, {}]",
                xmin - margin,
                xmax + margin,
                ymin - margin,
                ymax + margin,
                grid.x0,
                grid.x_max(),
                grid.y0,
                grid.y_max()
            )));
        }
        const SUB: usize = 4;
        let mut field = DensityField::zeros(*grid, rho_max);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let [cx, cy] = grid.cell_center(i, j);
                if cx + grid.dx < xmin || cx - grid.dx > xmax || cy + grid.dy < ymin || cy - grid.dy > ymax {
                    continue;
                }
                let mut inside = 0;
                for b in 0..SUB {
                    for a in 0..SUB {
                        let x = cx + ((a as f64 + 0.5) / SUB as f64 - 0.5) * grid.dx;
                        let y = cy + ((b as f64 + 0.5) / SUB as f64 - 0.5) * grid.dy;
                        if self.contains([x, y]) {
                            inside += 1;
                        }
                    }
                }
                if inside > 0 {
                    field.set(i, j, rho_max * inside as f64 / (SUB * SUB) as f64);
                }
            }
        }
        Ok(field)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Empty => write!(f, "empty"),
            Shape::Rect { xmin, xmax, ymin, ymax } => write!(f, "rect {xmin} {xmax} {ymin} {ymax}"),
            Shape::Disc { center, radius } => write!(f, "disc {} {} {radius}", center[0], center[1]),
        }
    }
}

impl FromStr for Shape {
    type Err = String;

    /// `empty`, `rect xmin xmax ymin ymax` or `disc cx cy radius`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut words = s.split_whitespace();
        let kind = words.next().ok_or("empty shape description")?;
        let nums: Vec<f64> = words
            .map(|w| w.parse::<f64>().map_err(|_| format!("malformed number `{w}`")))
            .collect::<std::result::Result<_, _>>()?;
        match (kind, nums.as_slice()) {
            ("empty", []) => Ok(Shape::Empty),
            ("rect", &[xmin, xmax, ymin, ymax]) if xmax > xmin && ymax > ymin => {
                Ok(Shape::Rect { xmin, xmax, ymin, ymax })
            }
            ("disc", &[cx, cy, radius]) if radius > 0.0 => Ok(Shape::Disc {
                center: [cx, cy],
                radius,
            }),
            _ => Err(format!(
                "expected `empty`, `rect xmin xmax ymin ymax` or `disc cx cy radius`, got `{s}`"
            )),
        }
    }
}

/// One of the built-in scenarios.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioModel {
    Piper(PiperModel),
    Dogs(DogsModel),
    Prey(PreyModel),
}

/// Names accepted by [`ScenarioModel::by_name`].
pub const SCENARIO_NAMES: [&str; 3] = ["piper", "dogs", "prey"];

impl ScenarioModel {
    /// Scenario with its default parameters.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "piper" => Ok(ScenarioModel::Piper(PiperModel::new(PiperParams::default())?)),
            "dogs" => Ok(ScenarioModel::Dogs(DogsModel::new(DogsParams::default())?)),
            "prey" => Ok(ScenarioModel::Prey(PreyModel::new(PreyParams::default())?)),
            other => Err(Error::param(
                "scenario",
                format!(
                    "unknown scenario `{other}`, expected one of {}",
                    SCENARIO_NAMES.join(", ")
                ),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioModel::Piper(_) => "piper",
            ScenarioModel::Dogs(_) => "dogs",
            ScenarioModel::Prey(_) => "prey",
        }
    }

    pub fn rho_max(&self) -> f64 {
        match self {
            ScenarioModel::Piper(m) => m.params().rho_max,
            ScenarioModel::Dogs(m) => m.params().rho_max,
            ScenarioModel::Prey(m) => m.params().rho_max,
        }
    }

    pub fn kernel(&self) -> MollifierKernel {
        match self {
            ScenarioModel::Piper(m) => m.kernel(),
            ScenarioModel::Dogs(m) => m.kernel(),
            ScenarioModel::Prey(m) => m.kernel(),
        }
    }

    pub fn averaging_mode(&self) -> AveragingMode {
        match self {
            ScenarioModel::Piper(_) => AveragingMode::Value,
            ScenarioModel::Dogs(_) | ScenarioModel::Prey(_) => AveragingMode::Gradient,
        }
    }

    /// Dimension of the agent state.
    pub fn agent_dim(&self) -> usize {
        match self {
            ScenarioModel::Piper(_) => 2,
            ScenarioModel::Dogs(m) => 2 * m.params().dogs.len(),
            ScenarioModel::Prey(_) => 4,
        }
    }

    pub fn initial_state(&self) -> Vec<f64> {
        match self {
            ScenarioModel::Piper(m) => m.params().start.to_vec(),
            ScenarioModel::Dogs(m) => m.params().dogs.iter().flatten().copied().collect(),
            ScenarioModel::Prey(m) => {
                let p = m.params();
                vec![p.position[0], p.position[1], p.velocity[0], p.velocity[1]]
            }
        }
    }

    pub fn initial_shape(&self) -> Shape {
        match self {
            ScenarioModel::Piper(m) => m.params().initial,
            ScenarioModel::Dogs(m) => m.params().initial,
            ScenarioModel::Prey(m) => m.params().initial,
        }
    }

    /// Initial density on `grid`. The shape must clear the grid edge by the
    /// kernel radius plus two cells.
    pub fn initial_density(&self, grid: &GridSpec) -> Result<DensityField> {
        let margin = self.kernel().radius() + 2.0 * grid.max_cell_width();
        self.initial_shape().rasterize(grid, self.rho_max(), margin)
    }

    /// Points at which the density average is sampled.
    pub fn agent_positions(&self, p: &[f64]) -> Result<Vec<[f64; 2]>> {
        let expected = self.agent_dim();
        if p.len() != expected {
            return Err(Error::DimensionMismatch {
                model: self.name(),
                expected,
                found: p.len(),
            });
        }
        Ok(match self {
            ScenarioModel::Piper(_) | ScenarioModel::Dogs(_) => p.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            ScenarioModel::Prey(_) => vec![[p[0], p[1]]],
        })
    }

    /// Agent velocity `phi(t, p, r)`.
    pub fn speed(&self, t: f64, p: &[f64], r: &[f64]) -> Vec<f64> {
        match self {
            ScenarioModel::Piper(m) => m.speed(t, r[0]).to_vec(),
            ScenarioModel::Dogs(m) => m.speed(r),
            ScenarioModel::Prey(m) => m.speed(p, [r[0], r[1]]).to_vec(),
        }
    }

    /// Constant `C` with `|phi(t, p, r)| <= C (1 + |p|)` on the run's data.
    /// `mass` is the (conserved) density mass.
    pub fn sublinear_constant(&self, mass: f64) -> f64 {
        match self {
            ScenarioModel::Piper(m) => m.params().speed_max,
            ScenarioModel::Dogs(m) => m.params().v_d,
            ScenarioModel::Prey(m) => {
                let k = m.kernel();
                1f64.max(m.params().accel * k.max_gradient_norm() * mass)
            }
        }
    }

    /// Constants of the total variation estimate when agent positions stay
    /// in the ball of radius `agent_radius`.
    pub fn tv_constants(&self, agent_radius: f64) -> Option<TvConstants> {
        Some(match self {
            ScenarioModel::Piper(m) => m.tv_constants(agent_radius),
            ScenarioModel::Dogs(m) => m.tv_constants(agent_radius),
            ScenarioModel::Prey(m) => m.tv_constants(agent_radius),
        })
    }

    /// Applies a `<scenario>.<key> = value` override (the key without prefix).
    pub fn apply_override(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match self {
            ScenarioModel::Piper(m) => m.apply_override(key, value),
            ScenarioModel::Dogs(m) => m.apply_override(key, value),
            ScenarioModel::Prey(m) => m.apply_override(key, value),
        }
    }

    /// Override keys understood by this scenario.
    pub fn override_keys(&self) -> &'static [&'static str] {
        match self {
            ScenarioModel::Piper(_) => piper::OVERRIDE_KEYS,
            ScenarioModel::Dogs(_) => dogs::OVERRIDE_KEYS,
            ScenarioModel::Prey(_) => prey::OVERRIDE_KEYS,
        }
    }

    /// Checks the declared CFL speed against centered differences of the
    /// flux in `rho`, sampled over the grid with agent state `p`.
    pub fn check_speed_bound(&self, grid: &GridSpec, p: &[f64]) -> Result<f64> {
        let sampled = sampled_flux_speed(self, grid, p, self.rho_max());
        let declared = self.cfl_speed();
        if sampled > declared * (1.0 + 1e-6) {
            return Err(Error::SpeedBound { sampled, declared });
        }
        Ok(sampled)
    }
}

impl Flux for ScenarioModel {
    #[inline]
    fn flux(&self, _t: f64, x: [f64; 2], rho: f64, p: &[f64]) -> [f64; 2] {
        match self {
            ScenarioModel::Piper(m) => m.flux(x, rho, [p[0], p[1]]),
            ScenarioModel::Dogs(m) => m.flux(x, rho, p),
            ScenarioModel::Prey(m) => m.flux(x, rho, [p[0], p[1]]),
        }
    }

    fn cfl_speed(&self) -> f64 {
        match self {
            ScenarioModel::Piper(m) => m.cfl_speed(),
            ScenarioModel::Dogs(m) => m.cfl_speed(),
            ScenarioModel::Prey(m) => m.cfl_speed(),
        }
    }
}

/// Largest centered-difference estimate of `|d f / d rho|` per axis over a
/// 17x17 sample of the grid and 33 densities in `[0, R]`.
pub fn sampled_flux_speed(flux: &impl Flux, grid: &GridSpec, p: &[f64], rho_max: f64) -> f64 {
    const NS: usize = 17;
    const NR: usize = 33;
    let h = 1e-6 * rho_max;
    let mut best = 0.0f64;
    for b in 0..NS {
        for a in 0..NS {
            let x = [
                grid.x0 + (a as f64 + 0.5) / NS as f64 * (grid.x_max() - grid.x0),
                grid.y0 + (b as f64 + 0.5) / NS as f64 * (grid.y_max() - grid.y0),
            ];
            for k in 0..NR {
                let rho = (k as f64 / (NR - 1) as f64 * rho_max).clamp(h, rho_max - h);
                let hi = flux.flux(0.0, x, rho + h, p);
                let lo = flux.flux(0.0, x, rho - h, p);
                for c in 0..2 {
                    best = best.max(((hi[c] - lo[c]) / (2.0 * h)).abs());
                }
            }
        }
    }
    best
}

/// x-independent flux `rho * v_max * (1 - rho / R) * direction`, for which
/// the Lax-Friedrichs scheme is total-variation diminishing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformFlux {
    pub v_max: f64,
    pub rho_max: f64,
    pub direction: [f64; 2],
}

impl Flux for UniformFlux {
    fn flux(&self, _t: f64, _x: [f64; 2], rho: f64, _p: &[f64]) -> [f64; 2] {
        let g = rho * self.v_max * (1.0 - rho / self.rho_max);
        [g * self.direction[0], g * self.direction[1]]
    }

    fn cfl_speed(&self) -> f64 {
        self.v_max * self.direction[0].abs().max(self.direction[1].abs())
    }
}

/// `2 pi int_0^inf s * max{ h(u) : |s - shift| <= u <= s + shift, u >= 0 } ds`.
///
/// This is `int_{R^2} sup_{|q| <= shift} h(|x - q|) dx` for a radial profile
/// `h`. `critical` lists the interior local maxima of `h`; the maximum over
/// each window is taken among them and the window endpoints. `reach` is a
/// radius beyond which `h` is negligible.
pub(crate) fn radial_sup_integral(h: impl Fn(f64) -> f64, shift: f64, critical: &[f64], reach: f64) -> f64 {
    const N: usize = 20_000;
    let upper = reach + shift;
    let ds = upper / N as f64;
    let window_max = |s: f64| {
        let lo = (s - shift).max(0.0);
        let hi = s + shift;
        let mut m = h(lo).max(h(hi));
        for &c in critical {
            if c >= lo && c <= hi {
                m = m.max(h(c));
            }
        }
        m
    };
    let mut sum = 0.0;
    for k in 0..=N {
        let s = k as f64 * ds;
        let w = if k == 0 || k == N { 0.5 } else { 1.0 };
        sum += w * s * window_max(s);
    }
    2.0 * PI * sum * ds
}

pub(crate) fn parse_f64(key: &str, value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("malformed number `{}` for `{key}`", value.trim()))?;
    if !v.is_finite() {
        return Err(format!("`{key}` must be finite"));
    }
    Ok(v)
}

pub(crate) fn parse_vec(key: &str, value: &str) -> std::result::Result<Vec<f64>, String> {
    let value = value.trim();
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|w| parse_f64(key, w)).collect()
}

pub(crate) fn parse_point(key: &str, value: &str) -> std::result::Result<[f64; 2], String> {
    match parse_vec(key, value)?.as_slice() {
        &[a, b] => Ok([a, b]),
        _ => Err(format!("`{key}` expects two comma-separated numbers")),
    }
}

pub(crate) fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}
