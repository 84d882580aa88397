//! Derivative-free search for a piper route that empties a target region.
//!
//! A route is a start point inside the target `K` and `M` heading nodes,
//! linearly interpolated in time. Admissible routes satisfy `|psi_k| <= 1` and
//! `|psi_{k+1} - psi_k| <= spacing`, a discrete Lipschitz bound. The search
//! is a projected Nelder-Mead with seeded restarts; the sampled circular
//! heading is always one of the starting points, so the result never does
//! worse than it.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::run;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::models::{PiperModel, RouteHeading, ScenarioModel};
use crate::pde::SolverConfig;

pub const DEFAULT_NODES: usize = 8;

/// Relative slack used when testing the route constraints, to absorb rounding
/// in the projection.
const FEASIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(Error::param(
                "optimizer.target",
                format!("need xmin < xmax and ymin < ymax, got {xmin} {xmax} {ymin} {ymax}"),
            ));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.xmin..=self.xmax).contains(&p[0]) && (self.ymin..=self.ymax).contains(&p[1])
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(self.xmin, self.xmax), p[1].clamp(self.ymin, self.ymax)]
    }

    pub fn expanded(&self, by: f64) -> Self {
        Self {
            xmin: self.xmin - by,
            xmax: self.xmax + by,
            ymin: self.ymin - by,
            ymax: self.ymax + by,
        }
    }
}

/// Target region and horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSpec {
    pub target: Rect,
    pub t_max: f64,
}

impl ObjectiveSpec {
    /// Bounding box of the initial crowd expanded by 0.25.
    pub fn default_for(model: &PiperModel, t_max: f64) -> Result<Self> {
        let [xmin, xmax, ymin, ymax] = model
            .params()
            .initial
            .bounding_box()
            .ok_or_else(|| Error::param("optimizer.target", "the initial density is empty; give a target"))?;
        Ok(Self {
            target: Rect::new(xmin, xmax, ymin, ymax)?.expanded(0.25),
            t_max,
        })
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::param(
                "t_end",
                format!("horizon must be positive, got {}", self.t_max),
            ));
        }
        let k = &self.target;
        if k.xmin < grid.x0 || k.xmax > grid.x_max() || k.ymin < grid.y0 || k.ymax > grid.y_max() {
            return Err(Error::param(
                "optimizer.target",
                "target region must lie inside the grid",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteParam {
    pub start: [f64; 2],
    pub nodes: Vec<[f64; 2]>,
    /// Time between consecutive nodes.
    pub spacing: f64,
}

impl RouteParam {
    /// `m` nodes spread uniformly over `[0, t_max]`.
    pub fn uniform(start: [f64; 2], nodes: Vec<[f64; 2]>, t_max: f64) -> Self {
        let spacing = t_max / (nodes.len().max(2) - 1) as f64;
        Self { start, nodes, spacing }
    }

    /// The circular heading of `model` sampled at `m` nodes, from the model's start.
    pub fn circular(model: &PiperModel, m: usize, t_max: f64) -> Self {
        let spacing = t_max / (m.max(2) - 1) as f64;
        let omega = model.params().omega;
        let nodes = (0..m)
            .map(|k| {
                let w = omega * k as f64 * spacing;
                [w.cos(), -w.sin()]
            })
            .collect();
        Self {
            start: model.params().start,
            nodes,
            spacing,
        }
    }

    pub fn heading(&self) -> RouteHeading {
        RouteHeading {
            spacing: self.spacing,
            nodes: self.nodes.clone(),
        }
    }

    pub fn is_feasible(&self, target: &Rect) -> bool {
        let tol = 1.0 + FEASIBILITY_SLACK;
        target.contains(self.start)
            && self.nodes.iter().all(|n| n[0].hypot(n[1]) <= tol)
            && self
                .nodes
                .windows(2)
                .all(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]) <= self.spacing * tol)
    }

    fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + 2 * self.nodes.len());
        v.extend_from_slice(&self.start);
        v.extend(self.nodes.iter().flatten());
        v
    }

    fn from_vector(v: &[f64], spacing: f64) -> Self {
        Self {
            start: [v[0], v[1]],
            nodes: v[2..].chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            spacing,
        }
    }

    /// Route as CSV: a `# start=x,y` line, then `t,psi_x,psi_y` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# start={},{}\nt,psi_x,psi_y\n", self.start[0], self.start[1]);
        for (k, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", k as f64 * self.spacing, n[0], n[1]);
        }
        out
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut start = None;
        let mut times = Vec::new();
        let mut nodes = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line == "t,psi_x,psi_y" {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("start=") {
                    start = Some(parse_pair(v).ok_or(format!("line {}: bad start `{v}`", n + 1))?);
                }
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", n + 1))?;
            if cols.len() != 3 {
                return Err(format!("line {}: expected 3 columns, found {}", n + 1, cols.len()));
            }
            times.push(cols[0]);
            nodes.push([cols[1], cols[2]]);
        }
        let start = start.ok_or("missing `# start=x,y` line")?;
        if nodes.len() < 2 {
            return Err("a route needs at least two nodes".into());
        }
        let spacing = times[1] - times[0];
        let uniform = times
            .iter()
            .enumerate()
            .all(|(k, &t)| (t - k as f64 * spacing).abs() <= 1e-9 * (1.0 + t.abs()));
        if spacing.is_nan() || spacing <= 0.0 || !uniform || times[0] != 0.0 {
            return Err("node times must be 0, h, 2h, ... with h > 0".into());
        }
        Ok(Self { start, nodes, spacing })
    }
}

fn parse_pair(s: &str) -> Option<[f64; 2]> {
    let (a, b) = s.split_once(',')?;
    Some([a.trim().parse().ok()?, b.trim().parse().ok()?])
}

/// Nearest-ish admissible route: clip every node to the unit disc, limit
/// consecutive differences to `spacing` in a forward then a backward pass,
/// and clamp the start into `target`.
pub fn project(route: &RouteParam, target: &Rect) -> RouteParam {
    let mut nodes = route.nodes.clone();
    for n in &mut nodes {
        let r = n[0].hypot(n[1]);
        if r > 1.0 {
            *n = [n[0] / r, n[1] / r];
        }
    }
    let h = route.spacing;
    let limit = |anchor: [f64; 2], n: &mut [f64; 2]| {
        let d = [n[0] - anchor[0], n[1] - anchor[1]];
        let len = d[0].hypot(d[1]);
        if len > h {
            let s = h / len;
            *n = [anchor[0] + s * d[0], anchor[1] + s * d[1]];
        }
    };
    for k in 1..nodes.len() {
        let anchor = nodes[k - 1];
        limit(anchor, &mut nodes[k]);
    }
    for k in (0..nodes.len().saturating_sub(1)).rev() {
        let anchor = nodes[k + 1];
        limit(anchor, &mut nodes[k]);
    }
    RouteParam {
        start: target.clamp(route.start),
        nodes,
        spacing: h,
    }
}

/// Edge density, relative to `R`, tolerated while scoring a route. Coarse
/// grids carry wide numerical tails; mass at this level reaching the edge
/// cannot move the objective.
pub const OBJECTIVE_MARGIN_THRESHOLD: f64 = 1e-6;

/// Mass left in the target at `t_max` when the piper walks `route`.
/// Aborted runs score `+inf`. The margin threshold is raised to at least
/// [`OBJECTIVE_MARGIN_THRESHOLD`].
pub fn objective(
    route: &RouteParam,
    spec: &ObjectiveSpec,
    model: &PiperModel,
    grid: &GridSpec,
    config: &SolverConfig,
) -> f64 {
    let m = ScenarioModel::Piper(model.with_route(route.start, route.heading()));
    let config = SolverConfig {
        margin_threshold: config.margin_threshold.max(OBJECTIVE_MARGIN_THRESHOLD),
        ..*config
    };
    match run(&m, grid, &config, spec.t_max, &[]) {
        Ok(traj) => {
            let k = &spec.target;
            traj.final_field.mass_in_rect(k.xmin, k.xmax, k.ymin, k.ymax)
        }
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub best: RouteParam,
    pub value: f64,
    /// Objective of the projected circular heading.
    pub baseline: f64,
    /// Best value after each evaluation.
    pub history: Vec<f64>,
}

/// Projected Nelder-Mead with restarts. Uses exactly `budget` objective
/// evaluations unless every restart converges first.
pub fn optimize(
    spec: &ObjectiveSpec,
    model: &PiperModel,
    grid: &GridSpec,
    config: &SolverConfig,
    nodes: usize,
    budget: usize,
    seed: u64,
) -> Result<OptimizeResult> {
    if budget == 0 {
        return Err(Error::param("optimizer.budget", "must be at least 1"));
    }
    if nodes < 2 {
        return Err(Error::param("optimizer.nodes", "need at least two nodes"));
    }
    spec.validate(grid)?;
    let target = spec.target;

    let baseline_route = project(&RouteParam::circular(model, nodes, spec.t_max), &target);
    let baseline = objective(&baseline_route, spec, model, grid, config);

    let remaining = budget - 1;
    let dim = 2 + 2 * nodes;
    let restarts = (remaining / (25 * dim)).clamp(1, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![(baseline_route.clone(), Some(baseline))];
    for _ in 1..restarts {
        starts.push((random_route(&mut rng, &target, nodes, baseline_route.spacing), None));
    }
    let shares: Vec<usize> = (0..restarts)
        .map(|k| remaining / restarts + usize::from(k < remaining % restarts))
        .collect();

    let eval = |x: &[f64]| -> (Vec<f64>, f64) {
        let r = project(&RouteParam::from_vector(x, baseline_route.spacing), &target);
        let v = objective(&r, spec, model, grid, config);
        (r.to_vector(), v)
    };

    let runs: Vec<(Vec<f64>, f64, Vec<f64>)> = starts
        .par_iter()
        .zip(shares.par_iter())
        .map(|((start, known), &share)| nelder_mead(&eval, &start.to_vector(), *known, share))
        .collect();

    let mut best = baseline_route;
    let mut value = baseline;
    let mut history = vec![baseline];
    for (x, v, values) in runs {
        for e in values {
            let last = *history.last().expect("nonempty");
            history.push(last.min(e));
        }
        if v < value {
            value = v;
            best = RouteParam::from_vector(&x, best.spacing);
        }
    }
    Ok(OptimizeResult {
        best,
        value,
        baseline,
        history,
    })
}

fn random_route(rng: &mut ChaCha8Rng, target: &Rect, m: usize, spacing: f64) -> RouteParam {
    let start = [
        rng.gen_range(target.xmin..=target.xmax),
        rng.gen_range(target.ymin..=target.ymax),
    ];
    let mut nodes = Vec::with_capacity(m);
    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    nodes.push([a.cos(), a.sin()]);
    for _ in 1..m {
        let prev: [f64; 2] = *nodes.last().expect("nonempty");
        let b: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let len = rng.gen_range(0.0..=spacing);
        nodes.push([prev[0] + len * b.cos(), prev[1] + len * b.sin()]);
    }
    project(&RouteParam { start, nodes, spacing }, target)
}

/// Minimizes over the simplex spanned from `x0`, replacing each proposal by
/// what `eval` returns for it (the projected point). At most `budget` calls
/// to `eval`; `known` is the value at `x0` if already computed. Returns the
/// best point, its value, and the value of every evaluation in order.
fn nelder_mead(
    eval: &(impl Fn(&[f64]) -> (Vec<f64>, f64) + Sync),
    x0: &[f64],
    known: Option<f64>,
    budget: usize,
) -> (Vec<f64>, f64, Vec<f64>) {
    let n = x0.len();
    let mut values = Vec::with_capacity(budget);
    let call = |x: &[f64], values: &mut Vec<f64>| -> Option<(Vec<f64>, f64)> {
        if values.len() >= budget {
            return None;
        }
        let (px, v) = eval(x);
        values.push(v);
        Some((px, v))
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    match known {
        Some(v) => simplex.push((x0.to_vec(), v)),
        None => match call(x0, &mut values) {
            Some(p) => simplex.push(p),
            None => return (x0.to_vec(), f64::INFINITY, values),
        },
    }
    for i in 0..n {
        let step = if i < 2 { 0.1 } else { 0.25 };
        let mut x = x0.to_vec();
        x[i] += step;
        let Some(mut p) = call(&x, &mut values) else {
            break;
        };
        if p.0 == x0 {
            // projected back onto the start; try the other direction
            x[i] = x0[i] - step;
            match call(&x, &mut values) {
                Some(q) => p = q,
                None => break,
            }
        }
        simplex.push(p);
    }

    while simplex.len() == n + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if worst - best <= 1e-14 * (1.0 + best.abs()) && spread(&simplex) < 1e-10 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |s: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + s * (c - w))
                .collect()
        };
        let Some(reflected) = call(&along(1.0), &mut values) else {
            break;
        };
        if reflected.1 < simplex[0].1 {
            let Some(expanded) = call(&along(2.0), &mut values) else {
                simplex[n] = reflected;
                break;
            };
            simplex[n] = if expanded.1 < reflected.1 { expanded } else { reflected };
            continue;
        }
        if reflected.1 < simplex[n - 1].1 {
            simplex[n] = reflected;
            continue;
        }
        let s = if reflected.1 < simplex[n].1 { 0.5 } else { -0.5 };
        let Some(contracted) = call(&along(s), &mut values) else {
            break;
        };
        if contracted.1 < simplex[n].1.min(reflected.1) {
            simplex[n] = contracted;
            continue;
        }
        // shrink toward the best vertex
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
            match call(&x, &mut values) {
                Some(p) => *vertex = p,
                None => break,
            }
        }
    }

    let (x, v) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((x0.to_vec(), f64::INFINITY));
    (x, v, values)
}

fn spread(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let x0 = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(x, _)| x.iter().zip(x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}
