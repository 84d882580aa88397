//! The coupled time loop.
//!
//! Each step advances the density by one split Lax-Friedrichs step with the
//! agents frozen, and the agents by one Euler step against the start-of-step
//! density. Both substeps read only `(rho^n, p^n)`, so they run concurrently.

use crate::diagnostics::{DiagnosticsReport, SnapshotRecord, StepRecord};
use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};
use crate::models::ScenarioModel;
use crate::ode::ode_step;
use crate::pde::{cfl_dt, pde_step, SolverConfig};

/// Cells next to the edge that must stay (numerically) empty.
pub const MARGIN_CELLS: usize = 2;

/// Default density level, relative to `R`, above which a cell in the margin
/// aborts the run. Equal to the support threshold: the support must not
/// touch the band, and what leaks through the edge at this level is far
/// below the mass tolerance.
pub const MARGIN_THRESHOLD: f64 = crate::diagnostics::SUPPORT_THRESHOLD;

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: DensityField,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: GridSpec,
    /// Nominal (CFL) time step.
    pub dt: f64,
    /// Step boundaries, starting at 0.
    pub times: Vec<f64>,
    /// Agent state at each entry of `times`.
    pub agent_states: Vec<Vec<f64>>,
    pub snapshots: Vec<Snapshot>,
    pub final_field: DensityField,
    pub diagnostics: DiagnosticsReport,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has an initial state")
    }

    pub fn final_state(&self) -> &[f64] {
        self.agent_states.last().expect("trajectory has an initial state")
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.t == t)
    }
}

/// Runs `model` from its own initial data.
pub fn run(
    model: &ScenarioModel,
    grid: &GridSpec,
    config: &SolverConfig,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let initial = model.initial_density(grid)?;
    run_from(model, initial, config, t_end, snapshot_times)
}

/// Runs `model` from the density `initial` and the model's initial agent state.
pub fn run_from(
    model: &ScenarioModel,
    initial: DensityField,
    config: &SolverConfig,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end", format!("must be nonnegative, got {t_end}")));
    }
    let mut requested: Vec<f64> = snapshot_times.to_vec();
    if requested.iter().any(|&s| !(0.0..=t_end).contains(&s)) {
        return Err(Error::param("snapshot_times", format!("must lie in [0, {t_end}]")));
    }
    requested.sort_by(f64::total_cmp);
    requested.dedup();

    let grid = *initial.grid();
    let dt_cfl = cfl_dt(model, &grid, config)?;
    let p0 = model.initial_state();
    model.agent_positions(&p0)?;
    model.check_speed_bound(&grid, &p0)?;
    margin_check(&initial, 0.0, config.margin_threshold)?;

    let mut report = DiagnosticsReport::new(&initial, dt_cfl, model.sublinear_constant(initial.mass()));
    let mut times = vec![0.0];
    let mut states = vec![p0.clone()];
    let mut snapshots = Vec::new();
    let mut agent_radius = norm(&p0);

    report.steps.push(StepRecord::observe(0.0, &initial, 0.0));
    let mut pending = requested.into_iter().peekable();
    if pending.peek() == Some(&0.0) {
        pending.next();
        report
            .snapshots
            .push(SnapshotRecord::observe(0.0, 0, &initial, &p0, agent_radius));
        snapshots.push(Snapshot {
            t: 0.0,
            field: initial.clone(),
        });
    }

    let mut rho = initial;
    let mut p = p0;
    let mut t = 0.0;
    let mut step = 0usize;
    while t < t_end {
        let target = pending.peek().copied().unwrap_or(t_end);
        let remaining = target - t;
        let (dt, t_next) = if remaining <= dt_cfl * (1.0 + 1e-9) {
            (remaining, target)
        } else {
            (dt_cfl, t + dt_cfl)
        };

        let (pde, agents) = rayon::join(
            || pde_step(&rho, model, t, &p, dt, step, config),
            || ode_step(&p, model, &rho, t, dt),
        );
        let pde = pde?;
        let p_next = agents?;

        rho = pde.field;
        p = p_next;
        t = t_next;
        step += 1;

        let record = StepRecord::observe(t, &rho, pde.clipped_mass);
        if !(record.min.is_finite() && record.max.is_finite()) {
            return Err(Error::NonFiniteDensity { t });
        }
        report.steps.push(record);
        margin_check(&rho, t, config.margin_threshold)?;
        agent_radius = agent_radius.max(norm(&p));
        times.push(t);
        states.push(p.clone());

        if pending.peek() == Some(&t) {
            pending.next();
            report
                .snapshots
                .push(SnapshotRecord::observe(t, step, &rho, &p, agent_radius));
            snapshots.push(Snapshot { t, field: rho.clone() });
        }
    }

    Ok(Trajectory {
        grid,
        dt: dt_cfl,
        times,
        agent_states: states,
        snapshots,
        final_field: rho,
        diagnostics: report,
    })
}

fn margin_check(rho: &DensityField, t: f64, threshold: f64) -> Result<()> {
    let edge = rho.max_in_boundary_band(MARGIN_CELLS);
    if edge > threshold * rho.rho_max() {
        return Err(Error::MarginViolation {
            t,
            value: edge,
            cells: MARGIN_CELLS,
        });
    }
    Ok(())
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Drift between a run and its copy with initial density scaled by `1 - delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCurves {
    pub delta: f64,
    pub times: Vec<f64>,
    /// `|rho_1(t) - rho_2(t)|_{L1}` at each time.
    pub density_drift: Vec<f64>,
    /// `|p_1(t) - p_2(t)|` at each time.
    pub agent_drift: Vec<f64>,
}

/// Runs the reference and the perturbed problem side by side and compares
/// them at `snapshot_times`.
pub fn run_pair_perturbed(
    model: &ScenarioModel,
    grid: &GridSpec,
    config: &SolverConfig,
    t_end: f64,
    delta: f64,
    snapshot_times: &[f64],
) -> Result<PerturbationCurves> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param("delta", format!("must lie in [0, 1), got {delta}")));
    }
    let base = model.initial_density(grid)?;
    let perturbed = base.scaled(1.0 - delta);
    let (a, b) = rayon::join(
        || run_from(model, base, config, t_end, snapshot_times),
        || run_from(model, perturbed, config, t_end, snapshot_times),
    );
    let (a, b) = (a?, b?);
    let mut curves = PerturbationCurves {
        delta,
        times: Vec::new(),
        density_drift: Vec::new(),
        agent_drift: Vec::new(),
    };
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let step = a.times.iter().position(|&t| t == sa.t).expect("snapshot on a step");
        let pa = &a.agent_states[step];
        let pb = &b.agent_states[step];
        let diff: Vec<f64> = pa.iter().zip(pb).map(|(x, y)| x - y).collect();
        curves.times.push(sa.t);
        curves.density_drift.push(sa.field.l1_distance(&sb.field)?);
        curves.agent_drift.push(norm(&diff));
    }
    Ok(curves)
}
