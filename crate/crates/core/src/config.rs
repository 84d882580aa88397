//! Run configuration in a flat `key = value` format.
//!
//! ```text
//! # comment
//! scenario = piper
//! grid.n = 200
//! t_end = 1.0
//! piper.v_max = 4.5
//! ```
//!
//! Lines are ASCII `key = value` pairs, `#` starts a comment. Scenario
//! parameters are overridden with `<scenario>.<key>`. Everything not given
//! takes the scenario's default. [`RunConfig::emit`] writes every field
//! explicitly, and parsing the emitted text gives back the same config.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::models::{parse_vec, ScenarioModel, SCENARIO_NAMES};
use crate::optimizer::{Rect, DEFAULT_NODES};
use crate::pde::SolverConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub pgm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub nodes: usize,
    pub seed: u64,
    /// Defaults to the initial crowd's bounding box expanded by 0.25.
    pub target: Option<Rect>,
    /// Cells per side of the coarse search grid.
    pub grid_n: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            nodes: DEFAULT_NODES,
            seed: 0,
            target: None,
            grid_n: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: &'static str,
    /// Model with the overrides applied.
    pub model: ScenarioModel,
    /// `(key, value)` scenario overrides in file order, keys without the scenario prefix.
    pub overrides: Vec<(String, String)>,
    pub grid: GridSpec,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub optimizer: OptimizerConfig,
}

struct Defaults {
    half: f64,
    n: usize,
    t_end: f64,
    snapshots: &'static [f64],
}

fn defaults(scenario: &str) -> Defaults {
    match scenario {
        "piper" => Defaults {
            half: 2.0,
            n: 400,
            t_end: 1.93,
            snapshots: &[0.0, 0.171, 0.543, 0.945, 1.447, 1.93],
        },
        "dogs" => Defaults {
            half: 2.5,
            n: 300,
            t_end: 0.2,
            snapshots: &[0.0, 0.044, 0.067, 0.111, 0.156, 0.2],
        },
        _ => Defaults {
            half: 2.0,
            n: 300,
            t_end: 0.5,
            snapshots: &[0.0, 0.091, 0.267, 0.358, 0.449, 0.491],
        },
    }
}

const GLOBAL_KEYS: &[&str] = &[
    "scenario",
    "grid.x0",
    "grid.y0",
    "grid.nx",
    "grid.ny",
    "grid.n",
    "grid.dx",
    "grid.dy",
    "grid.extent",
    "t_end",
    "snapshot_times",
    "solver.cfl_factor",
    "solver.clamp",
    "solver.unchecked_cfl",
    "solver.margin_threshold",
    "output.dir",
    "output.formats",
    "optimizer.budget",
    "optimizer.nodes",
    "optimizer.seed",
    "optimizer.target",
    "optimizer.grid_n",
];

impl RunConfig {
    /// Scenario defaults.
    pub fn for_scenario(name: &str) -> Result<Self> {
        let model = ScenarioModel::by_name(name)?;
        let d = defaults(name);
        Ok(Self {
            scenario: model.name(),
            model,
            overrides: Vec::new(),
            grid: GridSpec::centered_square(d.half, d.n)?,
            t_end: d.t_end,
            snapshot_times: d.snapshots.to_vec(),
            solver: SolverConfig::default(),
            output: OutputConfig {
                dir: PathBuf::from("out"),
                csv: true,
                pgm: false,
            },
            optimizer: OptimizerConfig::default(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(Error::Config {
                    line,
                    message: "empty key".into(),
                });
            }
            if let Some(first) = seen.insert(key, line) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            entries.push((line, key, value));
        }

        let (scenario_line, _, scenario) =
            entries
                .iter()
                .find(|e| e.1 == "scenario")
                .copied()
                .ok_or_else(|| Error::Config {
                    line: text.lines().count().max(1),
                    message: format!("missing `scenario`, expected one of {}", SCENARIO_NAMES.join(", ")),
                })?;
        let mut cfg = Self::for_scenario(scenario).map_err(|e| Error::Config {
            line: scenario_line,
            message: e.to_string(),
        })?;

        let mut grid = GridKeys::default();
        let prefix = format!("{}.", cfg.scenario);
        for &(line, key, value) in &entries {
            let err = |message: String| Error::Config { line, message };
            if let Some(sub) = key.strip_prefix(&prefix) {
                cfg.model.apply_override(sub, value).map_err(err)?;
                cfg.overrides.push((sub.to_string(), value.to_string()));
                continue;
            }
            match key {
                "scenario" => {}
                "grid.x0" => grid.x0 = Some(num(key, value).map_err(err)?),
                "grid.y0" => grid.y0 = Some(num(key, value).map_err(err)?),
                "grid.dx" => grid.dx = Some(num(key, value).map_err(err)?),
                "grid.dy" => grid.dy = Some(num(key, value).map_err(err)?),
                "grid.nx" => grid.nx = Some(int(key, value).map_err(err)?),
                "grid.ny" => grid.ny = Some(int(key, value).map_err(err)?),
                "grid.n" => grid.n = Some(int(key, value).map_err(err)?),
                "grid.extent" => {
                    grid.extent = Some(four(key, value).map_err(err)?);
                }
                "t_end" => cfg.t_end = num(key, value).map_err(err)?,
                "snapshot_times" => cfg.snapshot_times = parse_vec(key, value).map_err(err)?,
                "solver.cfl_factor" => cfg.solver.cfl_factor = num(key, value).map_err(err)?,
                "solver.clamp" => cfg.solver.clamp_to_range = boolean(key, value).map_err(err)?,
                "solver.unchecked_cfl" => cfg.solver.unchecked_cfl = boolean(key, value).map_err(err)?,
                "solver.margin_threshold" => cfg.solver.margin_threshold = num(key, value).map_err(err)?,
                "output.dir" => cfg.output.dir = PathBuf::from(value),
                "output.formats" => {
                    let (mut csv, mut pgm) = (false, false);
                    for f in value.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                        match f {
                            "csv" => csv = true,
                            "pgm" => pgm = true,
                            other => return Err(err(format!("unknown output format `{other}`, expected csv or pgm"))),
                        }
                    }
                    cfg.output.csv = csv;
                    cfg.output.pgm = pgm;
                }
                "optimizer.budget" => cfg.optimizer.budget = int(key, value).map_err(err)?,
                "optimizer.nodes" => cfg.optimizer.nodes = int(key, value).map_err(err)?,
                "optimizer.seed" => {
                    cfg.optimizer.seed = value
                        .parse()
                        .map_err(|_| err(format!("`{key}`: expected an unsigned integer, found `{value}`")))?
                }
                "optimizer.target" => {
                    cfg.optimizer.target = if value == "auto" {
                        None
                    } else {
                        let [a, b, c, d] = four(key, value).map_err(err)?;
                        Some(Rect::new(a, b, c, d).map_err(|e| err(e.to_string()))?)
                    }
                }
                "optimizer.grid_n" => cfg.optimizer.grid_n = int(key, value).map_err(err)?,
                _ => {
                    let message = if SCENARIO_NAMES.iter().any(|s| key.starts_with(&format!("{s}."))) {
                        format!("`{key}` does not belong to scenario `{}`", cfg.scenario)
                    } else {
                        format!(
                            "unknown key `{key}`; expected one of {} or `{}<param>`",
                            GLOBAL_KEYS.join(", "),
                            prefix
                        )
                    };
                    return Err(err(message));
                }
            }
        }

        let grid_line = entries
            .iter()
            .find(|e| e.1.starts_with("grid."))
            .map_or(scenario_line, |e| e.0);
        cfg.grid = grid.resolve(&cfg.grid).map_err(|e| Error::Config {
            line: grid_line,
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|e| {
            // point at the offending key, or at `t_end` when a default no longer fits
            let line_of = |k: &str| entries.iter().find(|e| e.1 == k).map(|e| e.0);
            let line = match &e {
                Error::InvalidParameter { name, .. } => line_of(name).or_else(|| line_of("t_end")),
                _ => None,
            };
            Error::Config {
                line: line.unwrap_or(scenario_line),
                message: e.to_string(),
            }
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param(
                "t_end",
                format!("must be nonnegative, got {}", self.t_end),
            ));
        }
        if let Some(s) = self.snapshot_times.iter().find(|&&s| !(0.0..=self.t_end).contains(&s)) {
            return Err(Error::param(
                "snapshot_times",
                format!("{s} is outside [0, {}]", self.t_end),
            ));
        }
        if self.optimizer.budget == 0 {
            return Err(Error::param("optimizer.budget", "must be at least 1"));
        }
        if self.optimizer.nodes < 2 {
            return Err(Error::param("optimizer.nodes", "need at least two nodes"));
        }
        if self.optimizer.grid_n < 3 {
            return Err(Error::param("optimizer.grid_n", "need at least 3 cells"));
        }
        Ok(())
    }

    /// Every field as `key = value` lines.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "grid.x0 = {}", g.x0);
        let _ = writeln!(s, "grid.y0 = {}", g.y0);
        let _ = writeln!(s, "grid.nx = {}", g.nx);
        let _ = writeln!(s, "grid.ny = {}", g.ny);
        let _ = writeln!(s, "grid.dx = {}", g.dx);
        let _ = writeln!(s, "grid.dy = {}", g.dy);
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let times: Vec<String> = self.snapshot_times.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "snapshot_times = {}", times.join(", "));
        let _ = writeln!(s, "solver.cfl_factor = {}", self.solver.cfl_factor);
        let _ = writeln!(s, "solver.clamp = {}", self.solver.clamp_to_range);
        let _ = writeln!(s, "solver.unchecked_cfl = {}", self.solver.unchecked_cfl);
        let _ = writeln!(s, "solver.margin_threshold = {}", self.solver.margin_threshold);
        let _ = writeln!(s, "output.dir = {}", self.output.dir.display());
        let formats: Vec<&str> = [(self.output.csv, "csv"), (self.output.pgm, "pgm")]
            .iter()
            .filter(|f| f.0)
            .map(|f| f.1)
            .collect();
        let _ = writeln!(s, "output.formats = {}", formats.join(", "));
        let o = &self.optimizer;
        let _ = writeln!(s, "optimizer.budget = {}", o.budget);
        let _ = writeln!(s, "optimizer.nodes = {}", o.nodes);
        let _ = writeln!(s, "optimizer.seed = {}", o.seed);
        match &o.target {
            Some(k) => {
                let _ = writeln!(s, "optimizer.target = {}, {}, {}, {}", k.xmin, k.xmax, k.ymin, k.ymax);
            }
            None => {
                let _ = writeln!(s, "optimizer.target = auto");
            }
        }
        let _ = writeln!(s, "optimizer.grid_n = {}", o.grid_n);
        for (k, v) in &self.overrides {
            let _ = writeln!(s, "{}.{} = {}", self.scenario, k, v);
        }
        s
    }
}

#[derive(Default)]
struct GridKeys {
    x0: Option<f64>,
    y0: Option<f64>,
    dx: Option<f64>,
    dy: Option<f64>,
    nx: Option<usize>,
    ny: Option<usize>,
    n: Option<usize>,
    extent: Option<[f64; 4]>,
}

impl GridKeys {
    fn resolve(&self, default: &GridSpec) -> Result<GridSpec> {
        if self.n.is_some() && (self.nx.is_some() || self.ny.is_some()) {
            return Err(Error::InvalidGrid("give either grid.n or grid.nx / grid.ny".into()));
        }
        let nx = self.nx.or(self.n).unwrap_or(default.nx);
        let ny = self.ny.or(self.n).unwrap_or(default.ny);
        let explicit = self.x0.is_some() || self.y0.is_some() || self.dx.is_some() || self.dy.is_some();
        match self.extent {
            Some(_) if explicit => Err(Error::InvalidGrid(
                "grid.extent cannot be combined with grid.x0, grid.y0, grid.dx or grid.dy".into(),
            )),
            Some([xmin, xmax, ymin, ymax]) => GridSpec::covering(xmin, xmax, ymin, ymax, nx, ny),
            None if explicit || self.nx.is_some() || self.ny.is_some() || self.n.is_some() => {
                let resized = self.dx.is_none() && self.dy.is_none() && (nx != default.nx || ny != default.ny);
                if resized && self.x0.is_none() && self.y0.is_none() {
                    // keep the default extent, refine the cells
                    GridSpec::covering(default.x0, default.x_max(), default.y0, default.y_max(), nx, ny)
                } else {
                    GridSpec::new(
                        self.x0.unwrap_or(default.x0),
                        self.y0.unwrap_or(default.y0),
                        nx,
                        ny,
                        self.dx.unwrap_or(default.dx),
                        self.dy.unwrap_or(default.dy),
                    )
                }
            }
            None => Ok(*default),
        }
    }
}

fn num(key: &str, value: &str) -> std::result::Result<f64, String> {
    let v: f64 = value
        .parse()
        .map_err(|_| format!("`{key}`: expected a number, found `{value}`"))?;
    if !v.is_finite() {
        return Err(format!("`{key}`: expected a finite number, found `{value}`"));
    }
    Ok(v)
}

fn int(key: &str, value: &str) -> std::result::Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("`{key}`: expected a nonnegative integer, found `{value}`"))
}

fn boolean(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{key}`: expected true or false, found `{value}`")),
    }
}

fn four(key: &str, value: &str) -> std::result::Result<[f64; 4], String> {
    let v = parse_vec(key, value)?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("`{key}`: expected 4 numbers xmin, xmax, ymin, ymax, found {}", v.len()))
}
