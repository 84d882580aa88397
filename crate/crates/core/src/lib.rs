//! Finite-volume simulation of crowds steered by a few agents.
//!
//! A density `rho(t, x)` on the plane obeys a scalar conservation law whose
//! flux depends on agent positions `p(t)`, and the agents move by an ODE that
//! sees the crowd only through a kernel average of `rho`:
//!
//! ```text
//! d/dt rho + div f(t, x, rho, p) = 0
//! d/dt p   = phi(t, p, (A rho)(p))
//! ```
//!
//! The density is advanced by a split Lax-Friedrichs scheme, the agents by
//! explicit Euler, both from the same start-of-step state.
//!
//! ```
//! use agentflow::{run, GridSpec, ScenarioModel, SolverConfig};
//!
//! let model = ScenarioModel::by_name("dogs")?;
//! let grid = GridSpec::centered_square(1.5, 60)?;
//! let traj = run(&model, &grid, &SolverConfig::default(), 0.05, &[0.0, 0.05])?;
//! let mass0 = traj.snapshots[0].field.mass();
//! assert!((traj.final_field.mass() - mass0).abs() < 1e-12 * mass0);
//! # Ok::<(), agentflow::Error>(())
//! ```

pub mod averaging;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod grid;
pub mod io;
pub mod models;
pub mod ode;
pub mod optimizer;
pub mod pde;

pub use averaging::{AveragingMode, MollifierKernel};
pub use config::RunConfig;
pub use diagnostics::{check_run, stability_report, DiagnosticsReport, RunCheck};
pub use engine::{run, run_from, run_pair_perturbed, Trajectory};
pub use error::{Error, Result};
pub use grid::{DensityField, GridSpec};
pub use models::{Flux, ScenarioModel, Shape, UniformFlux};
pub use optimizer::{objective, optimize, project, ObjectiveSpec, Rect, RouteParam};
pub use pde::{cfl_dt, lxf_sweep, pde_step, Axis, SolverConfig};

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/averaging.md")]
    mod averaging {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/coupling.md")]
    mod coupling {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
