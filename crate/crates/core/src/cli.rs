//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime abort,
//! 3 failed diagnostics (`diagnose` only).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::diagnostics::{check_run, stability_report};
use crate::engine::run;
use crate::error::Error;
use crate::grid::GridSpec;
use crate::io;
use crate::models::ScenarioModel;
use crate::optimizer::{objective, optimize, project, ObjectiveSpec, RouteParam};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_DIAGNOSTIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "agentflow",
    version,
    about = "Crowds driven by agents: coupled conservation law / ODE simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write snapshots, the agent trajectory and a report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario, check the a priori estimates and the dependence on the initial data.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Relative perturbations of the initial density.
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.01")]
        deltas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for a piper route that empties the target region.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: e.to_string(),
    }
}

/// Errors in the input map to exit code 1, everything else to 2.
fn classify(e: Error) -> Failure {
    let code = match e {
        Error::InvalidGrid(_)
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::DomainTooSmall(_)
        | Error::InvalidSpeed(_)
        | Error::SpeedBound { .. }
        | Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::Diagnose { config, deltas, out } => diagnose(&config, &deltas, out),
        Command::Optimize { config, out } => optimize_cmd(&config, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn output_dir(cfg: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir).map_err(|e| classify(Error::io(&dir, e)))?;
    Ok(dir)
}

fn simulate(path: &Path, out: Option<PathBuf>) -> Result<i32, Failure> {
    let cfg = load(path)?;
    let dir = output_dir(&cfg, out)?;
    let traj = run(&cfg.model, &cfg.grid, &cfg.solver, cfg.t_end, &cfg.snapshot_times).map_err(classify)?;
    let check = check_run(&traj, &cfg.model);
    for (k, snap) in traj.snapshots.iter().enumerate() {
        if cfg.output.csv {
            io::write_snapshot(&snap.field, snap.t, &dir.join(format!("rho_t{k:03}.csv"))).map_err(classify)?;
        }
        if cfg.output.pgm {
            io::write_pgm(&snap.field, &dir.join(format!("rho_t{k:03}.pgm"))).map_err(classify)?;
        }
    }
    io::write_trajectory(&traj, &dir.join("agents.csv")).map_err(classify)?;
    io::write_report(Some(&cfg), &traj.diagnostics, Some(&check), &dir.join("report.txt")).map_err(classify)?;
    fs::write(dir.join("config.txt"), cfg.emit()).map_err(|e| classify(Error::io(dir.join("config.txt"), e)))?;
    println!(
        "{}: {} steps to t = {}, {} snapshots written to {}",
        cfg.scenario,
        traj.times.len() - 1,
        traj.final_time(),
        traj.snapshots.len(),
        dir.display()
    );
    for f in check.failures() {
        println!("warning: check {} failed: {}", f.name, f.detail);
    }
    Ok(EXIT_OK)
}

fn diagnose(path: &Path, deltas: &[f64], out: Option<PathBuf>) -> Result<i32, Failure> {
    let cfg = load(path)?;
    if let Some(d) = deltas.iter().find(|d| !(0.0..=0.1).contains(*d)) {
        return Err(config_error(format!("--deltas: {d} is outside [0, 0.1]")));
    }
    let dir = output_dir(&cfg, out)?;
    let traj = match run(&cfg.model, &cfg.grid, &cfg.solver, cfg.t_end, &cfg.snapshot_times) {
        Ok(t) => t,
        // an aborted run is itself a failed diagnosis, unless the input was bad
        Err(e) => {
            let f = classify(e);
            if f.code == EXIT_CONFIG {
                return Err(f);
            }
            println!("FAIL run: {}", f.message);
            return Ok(EXIT_DIAGNOSTIC);
        }
    };
    let check = check_run(&traj, &cfg.model);
    io::write_report(Some(&cfg), &traj.diagnostics, Some(&check), &dir.join("report.txt")).map_err(classify)?;
    for f in &check.findings {
        println!("{} {}: {}", if f.passed { "pass" } else { "FAIL" }, f.name, f.detail);
    }
    let mut ok = check.passed();
    if !deltas.is_empty() {
        match stability_report(&cfg.model, &cfg.grid, &cfg.solver, cfg.t_end, deltas) {
            Ok(table) => {
                fs::write(dir.join("stability.txt"), io::stability_text(&table))
                    .map_err(|e| classify(Error::io(dir.join("stability.txt"), e)))?;
                for r in &table.rows {
                    println!(
                        "delta {}: density drift {:.6e} (ratio {:.6}), agent drift {:.6e} (ratio {:.6})",
                        r.delta, r.density_drift, r.density_ratio, r.agent_drift, r.agent_ratio
                    );
                }
                println!("{} stability", if table.flagged { "FAIL" } else { "pass" });
                ok &= !table.flagged;
            }
            Err(e) => {
                println!("FAIL stability: {e}");
                ok = false;
            }
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_DIAGNOSTIC })
}

fn optimize_cmd(path: &Path, out: Option<PathBuf>) -> Result<i32, Failure> {
    let cfg = load(path)?;
    let ScenarioModel::Piper(piper) = &cfg.model else {
        return Err(config_error(format!(
            "optimize needs the piper scenario, the config selects `{}`",
            cfg.scenario
        )));
    };
    let dir = output_dir(&cfg, out)?;
    let spec = match cfg.optimizer.target {
        Some(target) => ObjectiveSpec {
            target,
            t_max: cfg.t_end,
        },
        None => ObjectiveSpec::default_for(piper, cfg.t_end).map_err(classify)?,
    };
    let g = &cfg.grid;
    let n = cfg.optimizer.grid_n;
    let coarse = GridSpec::covering(g.x0, g.x_max(), g.y0, g.y_max(), n, n).map_err(classify)?;
    let o = &cfg.optimizer;
    let res = optimize(&spec, piper, &coarse, &cfg.solver, o.nodes, o.budget, o.seed).map_err(classify)?;

    // re-score the winner and the baseline on the full grid
    let baseline_route = project(&RouteParam::circular(piper, o.nodes, spec.t_max), &spec.target);
    let (fine_best, fine_base) = rayon::join(
        || objective(&res.best, &spec, piper, g, &cfg.solver),
        || objective(&baseline_route, &spec, piper, g, &cfg.solver),
    );

    fs::write(dir.join("route.csv"), res.best.to_csv()).map_err(|e| classify(Error::io(dir.join("route.csv"), e)))?;
    let mut history = String::from("evaluation,best\n");
    for (k, v) in res.history.iter().enumerate() {
        history.push_str(&format!("{},{}\n", k + 1, io::format_g(*v, 17)));
    }
    fs::write(dir.join("history.csv"), history).map_err(|e| classify(Error::io(dir.join("history.csv"), e)))?;
    let k = &spec.target;
    let report = format!(
        "target = {}, {}, {}, {}\nt_max = {}\nevaluations = {}\ncoarse_grid = {n}\nbaseline = {}\nbest = {}\n\
         full_grid_baseline = {}\nfull_grid_best = {}\nfeasible = {}\n",
        k.xmin,
        k.xmax,
        k.ymin,
        k.ymax,
        spec.t_max,
        res.history.len(),
        io::format_g(res.baseline, 12),
        io::format_g(res.value, 12),
        io::format_g(fine_base, 12),
        io::format_g(fine_best, 12),
        res.best.is_feasible(&spec.target),
    );
    fs::write(dir.join("optimize.txt"), &report).map_err(|e| classify(Error::io(dir.join("optimize.txt"), e)))?;
    print!("{report}");
    Ok(EXIT_OK)
}
