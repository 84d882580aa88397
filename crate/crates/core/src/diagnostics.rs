//! Run-time checks of the qualitative guarantees of the coupled problem:
//! the maximum principle, mass conservation, the total variation estimate,
//! finite propagation speed, the a priori bound on the agents, and linear
//! dependence on the initial density.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::engine::{norm, run_pair_perturbed, Trajectory};
use crate::error::Result;
use crate::grid::{DensityField, GridSpec};
use crate::models::ScenarioModel;
use crate::pde::SolverConfig;

/// Support threshold, relative to `R`.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;
/// Threshold, relative to `R`, for counting connected groups.
pub const COMPONENT_THRESHOLD: f64 = 1e-2;
/// Allowed excursion outside `[0, R]`, relative to `R`.
pub const RANGE_TOLERANCE: f64 = 1e-6;
/// Allowed relative mass drift over a run.
pub const MASS_TOLERANCE: f64 = 1e-10;
/// Allowed clipped mass, relative to the initial mass.
pub const CLIP_TOLERANCE: f64 = 1e-8;
/// Relative slack on the total variation bound.
pub const TV_SLACK: f64 = 1e-6;
/// Relative slack on the agent norm bound.
pub const AGENT_SLACK: f64 = 0.05;
/// Extra cells allowed on top of the numerical domain of dependence.
pub const SUPPORT_SLACK_CELLS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub min: f64,
    pub max: f64,
    pub mass: f64,
    pub clipped_mass: f64,
}

impl StepRecord {
    pub(crate) fn observe(t: f64, rho: &DensityField, clipped_mass: f64) -> Self {
        Self {
            t,
            min: rho.min(),
            max: rho.max(),
            mass: rho.mass(),
            clipped_mass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRecord {
    pub t: f64,
    /// Number of steps taken to reach `t`.
    pub step: usize,
    pub tv: f64,
    pub support_radius: f64,
    pub components: usize,
    pub agent_norm: f64,
    /// `max |p(s)|` for `s <= t`.
    pub agent_radius: f64,
}

impl SnapshotRecord {
    pub(crate) fn observe(t: f64, step: usize, rho: &DensityField, p: &[f64], agent_radius: f64) -> Self {
        let r = rho.rho_max();
        Self {
            t,
            step,
            tv: rho.total_variation(),
            support_radius: rho.support_radius(SUPPORT_THRESHOLD * r),
            components: rho.connected_components(COMPONENT_THRESHOLD * r),
            agent_norm: norm(p),
            agent_radius,
        }
    }
}

/// Observed quantities of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub grid: GridSpec,
    pub rho_max: f64,
    pub dt: f64,
    pub initial_mass: f64,
    pub initial_tv: f64,
    pub initial_support_radius: f64,
    /// Constant of the sublinear growth bound on the agent velocity.
    pub sublinear_constant: f64,
    pub steps: Vec<StepRecord>,
    pub snapshots: Vec<SnapshotRecord>,
}

impl DiagnosticsReport {
    pub(crate) fn new(initial: &DensityField, dt: f64, sublinear_constant: f64) -> Self {
        Self {
            grid: *initial.grid(),
            rho_max: initial.rho_max(),
            dt,
            initial_mass: initial.mass(),
            initial_tv: initial.total_variation(),
            initial_support_radius: initial.support_radius(SUPPORT_THRESHOLD * initial.rho_max()),
            sublinear_constant,
            steps: Vec::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn min_density(&self) -> f64 {
        self.steps.iter().map(|s| s.min).fold(f64::INFINITY, f64::min)
    }

    pub fn max_density(&self) -> f64 {
        self.steps.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|mass(t) - mass(0)|`, relative to `mass(0)` (absolute when
    /// the initial mass is zero).
    pub fn mass_drift(&self) -> f64 {
        let scale = if self.initial_mass > 0.0 {
            self.initial_mass
        } else {
            1.0
        };
        self.steps
            .iter()
            .map(|s| (s.mass - self.initial_mass).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn clipped_mass(&self) -> f64 {
        self.steps.iter().map(|s| s.clipped_mass).sum()
    }
}

/// `W_n = int_0^{pi/2} cos^n`, by the Wallis recurrence.
pub fn wallis(n: usize) -> f64 {
    match n {
        0 => FRAC_PI_2,
        1 => 1.0,
        _ => (n - 1) as f64 / n as f64 * wallis(n - 2),
    }
}

/// Right-hand side of the total variation estimate in two space dimensions,
///
/// ```text
/// (TV(rho_0) + 2 W_2 t int sup |grad div f|) exp(5 sup |grad d_rho f| t)
/// ```
///
/// with agent positions in the ball of radius `agent_radius`. Returns `None`
/// when the model provides no constants.
pub fn tv_bound(model: &ScenarioModel, t: f64, initial_tv: f64, agent_radius: f64) -> Option<f64> {
    let c = model.tv_constants(agent_radius)?;
    Some(tv_bound_from(initial_tv, c.grad_dflux, c.grad_div_integral, t))
}

pub(crate) fn tv_bound_from(initial_tv: f64, grad_dflux: f64, grad_div_integral: f64, t: f64) -> f64 {
    const NX: usize = 2;
    let kappa = (2 * NX + 1) as f64 * grad_dflux;
    (initial_tv + NX as f64 * wallis(NX) * t * grad_div_integral) * (kappa * t).exp()
}

/// `(|p_0| + 1) exp(C t) - 1`.
pub fn agent_bound(initial_norm: f64, sublinear_constant: f64, t: f64) -> f64 {
    (initial_norm + 1.0) * (sublinear_constant * t).exp() - 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotBounds {
    pub t: f64,
    pub tv_bound: Option<f64>,
    pub support_bound: f64,
    pub agent_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunCheck {
    pub findings: Vec<Finding>,
    pub bounds: Vec<SnapshotBounds>,
}

impl RunCheck {
    pub fn passed(&self) -> bool {
        self.findings.iter().all(|f| f.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| !f.passed)
    }
}

/// Checks a finished run against the maximum principle, mass conservation,
/// the total variation estimate, the numerical domain of dependence and the
/// agent norm bound.
pub fn check_run(trajectory: &Trajectory, model: &ScenarioModel) -> RunCheck {
    let d = &trajectory.diagnostics;
    let r = d.rho_max;
    // each split step moves the support one cell along both axes
    let h = d.grid.dx.hypot(d.grid.dy);
    let p0 = norm(&trajectory.agent_states[0]);
    let mut findings = Vec::new();

    let (lo, hi) = (d.min_density(), d.max_density());
    findings.push(Finding {
        name: "range",
        passed: lo >= -RANGE_TOLERANCE * r && hi <= r * (1.0 + RANGE_TOLERANCE),
        detail: format!("density in [{lo:e}, {hi:e}], R = {r}"),
    });

    let drift = d.mass_drift();
    findings.push(Finding {
        name: "mass",
        passed: drift <= MASS_TOLERANCE,
        detail: format!("relative mass drift {drift:e}"),
    });

    let clipped = d.clipped_mass();
    findings.push(Finding {
        name: "clipping",
        passed: clipped <= CLIP_TOLERANCE * d.initial_mass,
        detail: format!("clipped mass {clipped:e}"),
    });

    let mut bounds = Vec::with_capacity(d.snapshots.len());
    let mut tv_ok = true;
    let mut tv_detail = String::from("no snapshots");
    let mut support_ok = true;
    let mut support_detail = String::from("no snapshots");
    let mut agent_ok = true;
    let mut agent_detail = String::from("no snapshots");
    for s in &d.snapshots {
        let tvb = tv_bound(model, s.t, d.initial_tv, s.agent_radius);
        if let Some(b) = tvb {
            let ok = s.tv <= b * (1.0 + TV_SLACK);
            if !ok || tv_ok {
                tv_detail = format!("t = {}: TV {:.6e} <= bound {:.6e}", s.t, s.tv, b);
            }
            tv_ok &= ok;
        }
        let sb = d.initial_support_radius + s.step as f64 * h + SUPPORT_SLACK_CELLS * h;
        let ok = s.support_radius <= sb;
        if !ok || support_ok {
            support_detail = format!("t = {}: support radius {:.6} <= {:.6}", s.t, s.support_radius, sb);
        }
        support_ok &= ok;
        let ab = agent_bound(p0, d.sublinear_constant, s.t);
        let ok = s.agent_norm <= ab * (1.0 + AGENT_SLACK);
        if !ok || agent_ok {
            agent_detail = format!("t = {}: |p| {:.6} <= {:.6e}", s.t, s.agent_norm, ab);
        }
        agent_ok &= ok;
        bounds.push(SnapshotBounds {
            t: s.t,
            tv_bound: tvb,
            support_bound: sb,
            agent_bound: ab,
        });
    }
    findings.push(Finding {
        name: "tv_bound",
        passed: tv_ok,
        detail: tv_detail,
    });
    findings.push(Finding {
        name: "finite_speed",
        passed: support_ok,
        detail: support_detail,
    });
    findings.push(Finding {
        name: "agent_bound",
        passed: agent_ok,
        detail: agent_detail,
    });
    RunCheck { findings, bounds }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub delta: f64,
    pub density_drift: f64,
    pub agent_drift: f64,
    /// `density_drift / delta`, zero when `delta` is zero.
    pub density_ratio: f64,
    pub agent_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityTable {
    pub t_end: f64,
    pub rows: Vec<StabilityRow>,
    /// Set when a ratio changes by more than a factor 2 between consecutive deltas.
    pub flagged: bool,
}

fn ratios_consistent(a: f64, b: f64) -> bool {
    if a == 0.0 && b == 0.0 {
        return true;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    lo > 0.0 && hi / lo <= 2.0
}

/// Final-time drift of runs whose initial density is scaled by `1 - delta`,
/// for each `delta`.
pub fn stability_report(
    model: &ScenarioModel,
    grid: &GridSpec,
    config: &SolverConfig,
    t_end: f64,
    deltas: &[f64],
) -> Result<StabilityTable> {
    for &delta in deltas {
        if !(0.0..=0.1).contains(&delta) {
            return Err(crate::error::Error::param(
                "deltas",
                format!("each delta must lie in [0, 0.1], got {delta}"),
            ));
        }
    }
    let rows = deltas
        .par_iter()
        .map(|&delta| {
            let c = run_pair_perturbed(model, grid, config, t_end, delta, &[t_end])?;
            let density_drift = c.density_drift.last().copied().unwrap_or(0.0);
            let agent_drift = c.agent_drift.last().copied().unwrap_or(0.0);
            let (density_ratio, agent_ratio) = if delta > 0.0 {
                (density_drift / delta, agent_drift / delta)
            } else {
                (0.0, 0.0)
            };
            Ok(StabilityRow {
                delta,
                density_drift,
                agent_drift,
                density_ratio,
                agent_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let flagged = rows.windows(2).any(|w| {
        w[0].delta > 0.0
            && w[1].delta > 0.0
            && !(ratios_consistent(w[0].density_ratio, w[1].density_ratio)
                && ratios_consistent(w[0].agent_ratio, w[1].agent_ratio))
    });
    Ok(StabilityTable { t_end, rows, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use std::f64::consts::PI;

    #[test]
    fn wallis_values() {
        assert!((wallis(2) - PI / 4.0).abs() < 1e-15);
        assert_eq!(wallis(1), 1.0);
        // quadrature oracle for n = 3
        let n = 200_000;
        let q: f64 = (0..n)
            .map(|k| ((k as f64 + 0.5) * FRAC_PI_2 / n as f64).cos().powi(3))
            .sum::<f64>()
            * FRAC_PI_2
            / n as f64;
        assert!((wallis(3) - q).abs() < 1e-9);
    }

    #[test]
    fn tv_bound_limits() {
        let model = ScenarioModel::by_name("piper").unwrap();
        assert_eq!(tv_bound(&model, 0.0, 1.7, 1.2), Some(1.7));
        assert_eq!(tv_bound_from(1.7, 0.0, 0.0, 12.0), 1.7);
    }

    #[test]
    fn tv_bound_is_monotone_and_finite() {
        for name in ["piper", "dogs", "prey"] {
            let model = ScenarioModel::by_name(name).unwrap();
            let mut prev = 0.0;
            for k in 0..=20 {
                let t = 0.02 * k as f64;
                let b = tv_bound(&model, t, 2.0, 1.0).unwrap();
                assert!(b.is_finite() && b >= prev, "{name} t={t}: {b}");
                prev = b;
            }
        }
    }

    #[test]
    fn agent_bound_starts_at_initial_norm() {
        assert!((agent_bound(1.5, 7.0, 0.0) - 1.5).abs() < 1e-15);
        assert!(agent_bound(1.5, 7.0, 0.1) > 1.5);
    }

    #[test]
    fn empty_run_passes_every_check() {
        let mut model = ScenarioModel::by_name("piper").unwrap();
        model.apply_override("initial", "empty").unwrap();
        let grid = GridSpec::centered_square(2.0, 40).unwrap();
        let traj = run(&model, &grid, &SolverConfig::default(), 0.5, &[0.0, 0.25, 0.5]).unwrap();
        let check = check_run(&traj, &model);
        assert!(check.passed(), "{:?}", check.findings);
        for s in &traj.diagnostics.snapshots {
            assert_eq!((s.tv, s.support_radius, s.components), (0.0, 0.0, 0));
        }
        assert!(check.bounds.iter().all(|b| b.agent_bound > 0.0));
    }

    #[test]
    fn check_run_is_deterministic() {
        let model = ScenarioModel::by_name("prey").unwrap();
        let grid = GridSpec::centered_square(1.5, 60).unwrap();
        let traj = run(&model, &grid, &SolverConfig::default(), 0.1, &[0.0, 0.05, 0.1]).unwrap();
        let a = check_run(&traj, &model);
        let b = check_run(&traj, &model);
        assert_eq!(a, b);
        assert!(a.passed(), "{:?}", a.findings);
    }

    #[test]
    fn zero_delta_table() {
        let model = ScenarioModel::by_name("piper").unwrap();
        let grid = GridSpec::centered_square(2.0, 40).unwrap();
        let table = stability_report(&model, &grid, &SolverConfig::default(), 0.1, &[0.0]).unwrap();
        assert_eq!(table.rows[0].density_drift, 0.0);
        assert_eq!(table.rows[0].agent_drift, 0.0);
        assert!(!table.flagged);
        assert!(stability_report(&model, &grid, &SolverConfig::default(), 0.1, &[0.5]).is_err());
    }

    #[test]
    fn ratio_consistency() {
        assert!(ratios_consistent(1.0, 1.9));
        assert!(!ratios_consistent(1.0, 2.1));
        assert!(ratios_consistent(0.0, 0.0));
        assert!(!ratios_consistent(0.0, 1.0));
    }
}
