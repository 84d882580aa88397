//! Output formats: snapshot and trajectory CSV, flat text reports and PGM images.
//!
//! Numbers in snapshots are printed like C's `%.9g`, so files are
//! byte-identical to those written by other implementations of the format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::diagnostics::{DiagnosticsReport, RunCheck, StabilityTable};
use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::grid::{DensityField, GridSpec};

/// `printf("%.{digits}g", v)`.
pub fn format_g(v: f64, digits: usize) -> String {
    let p = digits.max(1);
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", p - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Header line, then one line per row from low to high `y`.
pub fn snapshot_csv(field: &DensityField, t: f64) -> String {
    let g = field.grid();
    let mut s = String::with_capacity(g.len() * 12 + 64);
    let _ = writeln!(
        s,
        "# t={} nx={} ny={} x0={} y0={} dx={} dy={}",
        format_g(t, 9),
        g.nx,
        g.ny,
        format_g(g.x0, 17),
        format_g(g.y0, 17),
        format_g(g.dx, 17),
        format_g(g.dy, 17)
    );
    for row in field.values().chunks(g.nx) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&format_g(*v, 9));
        }
        s.push('\n');
    }
    s
}

pub fn write_snapshot(field: &DensityField, t: f64, path: &Path) -> Result<()> {
    write_file(path, snapshot_csv(field, t).as_bytes())
}

/// Reads a snapshot written by [`write_snapshot`]. Returns the time and the
/// field, with `rho_max` supplied by the caller.
pub fn read_snapshot(path: &Path, rho_max: f64) -> Result<(f64, DensityField)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, rho_max).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_snapshot(text: &str, rho_max: f64) -> std::result::Result<(f64, DensityField), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty snapshot")?;
    let header = header.strip_prefix('#').ok_or("missing `#` header line")?;
    let mut meta = std::collections::HashMap::new();
    for item in header.split_whitespace() {
        let (k, v) = item.split_once('=').ok_or(format!("bad header item `{item}`"))?;
        meta.insert(k, v);
    }
    let get = |k: &str| -> std::result::Result<f64, String> {
        meta.get(k)
            .ok_or(format!("header lacks `{k}`"))?
            .parse::<f64>()
            .map_err(|e| format!("header `{k}`: {e}"))
    };
    let (nx, ny) = (get("nx")? as usize, get("ny")? as usize);
    let grid = GridSpec::new(get("x0")?, get("y0")?, nx, ny, get("dx")?, get("dy")?).map_err(|e| e.to_string())?;
    let mut values = Vec::with_capacity(nx * ny);
    for (j, line) in lines.enumerate() {
        let before = values.len();
        for v in line.split(',') {
            values.push(v.trim().parse::<f64>().map_err(|e| format!("row {j}: {e}"))?);
        }
        if values.len() - before != nx {
            return Err(format!(
                "row {j}: expected {nx} values, found {}",
                values.len() - before
            ));
        }
    }
    if values.len() != nx * ny {
        return Err(format!("expected {ny} rows, found {}", values.len() / nx.max(1)));
    }
    let field = DensityField::from_values(grid, rho_max, values).map_err(|e| e.to_string())?;
    Ok((get("t")?, field))
}

/// `t,p1,...,pN` then one row per step.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let dim = traj.agent_states.first().map_or(0, Vec::len);
    let mut s = String::from("t");
    for k in 1..=dim {
        let _ = write!(s, ",p{k}");
    }
    s.push('\n');
    for (t, p) in traj.times.iter().zip(&traj.agent_states) {
        s.push_str(&format_g(*t, 17));
        for v in p {
            s.push(',');
            s.push_str(&format_g(*v, 17));
        }
        s.push('\n');
    }
    s
}

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_file(path, trajectory_csv(traj).as_bytes())
}

/// Flat `key = value` report of a run and, if given, its checks.
pub fn report_text(config: Option<&RunConfig>, report: &DiagnosticsReport, check: Option<&RunCheck>) -> String {
    let mut s = String::new();
    if let Some(c) = config {
        let _ = writeln!(s, "scenario = {}", c.scenario);
        let _ = writeln!(s, "t_end = {}", c.t_end);
    }
    let g = &report.grid;
    let _ = writeln!(
        s,
        "grid = {} x {} cells, origin ({}, {}), width ({}, {})",
        g.nx, g.ny, g.x0, g.y0, g.dx, g.dy
    );
    let _ = writeln!(s, "dt = {}", format_g(report.dt, 9));
    let _ = writeln!(s, "steps = {}", report.steps.len().saturating_sub(1));
    let _ = writeln!(s, "initial_mass = {}", format_g(report.initial_mass, 12));
    let _ = writeln!(s, "initial_tv = {}", format_g(report.initial_tv, 9));
    let _ = writeln!(
        s,
        "initial_support_radius = {}",
        format_g(report.initial_support_radius, 9)
    );
    let _ = writeln!(s, "min_density = {}", format_g(report.min_density(), 9));
    let _ = writeln!(s, "max_density = {}", format_g(report.max_density(), 9));
    let _ = writeln!(s, "mass_drift = {}", format_g(report.mass_drift(), 3));
    let _ = writeln!(s, "clipped_mass = {}", format_g(report.clipped_mass(), 3));
    let _ = writeln!(s, "sublinear_constant = {}", format_g(report.sublinear_constant, 9));
    for (k, snap) in report.snapshots.iter().enumerate() {
        let pre = format!("snapshot.{k}");
        let _ = writeln!(s, "{pre}.t = {}", format_g(snap.t, 9));
        let _ = writeln!(s, "{pre}.tv = {}", format_g(snap.tv, 9));
        let _ = writeln!(s, "{pre}.support_radius = {}", format_g(snap.support_radius, 9));
        let _ = writeln!(s, "{pre}.components = {}", snap.components);
        let _ = writeln!(s, "{pre}.agent_norm = {}", format_g(snap.agent_norm, 9));
        if let Some(b) = check.and_then(|c| c.bounds.get(k)) {
            let tv = b.tv_bound.map_or("none".to_string(), |v| format_g(v, 9));
            let _ = writeln!(s, "{pre}.tv_bound = {tv}");
            let _ = writeln!(s, "{pre}.support_bound = {}", format_g(b.support_bound, 9));
            let _ = writeln!(s, "{pre}.agent_bound = {}", format_g(b.agent_bound, 9));
        }
    }
    if let Some(c) = check {
        for f in &c.findings {
            let _ = writeln!(
                s,
                "check.{} = {} ({})",
                f.name,
                if f.passed { "pass" } else { "FAIL" },
                f.detail
            );
        }
        let _ = writeln!(s, "check = {}", if c.passed() { "pass" } else { "FAIL" });
    }
    s
}

pub fn write_report(
    config: Option<&RunConfig>,
    report: &DiagnosticsReport,
    check: Option<&RunCheck>,
    path: &Path,
) -> Result<()> {
    write_file(path, report_text(config, report, check).as_bytes())
}

pub fn stability_text(table: &StabilityTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "t_end = {}", table.t_end);
    for (k, r) in table.rows.iter().enumerate() {
        let _ = writeln!(s, "row.{k}.delta = {}", r.delta);
        let _ = writeln!(s, "row.{k}.density_drift = {}", format_g(r.density_drift, 9));
        let _ = writeln!(s, "row.{k}.agent_drift = {}", format_g(r.agent_drift, 9));
        let _ = writeln!(s, "row.{k}.density_ratio = {}", format_g(r.density_ratio, 9));
        let _ = writeln!(s, "row.{k}.agent_ratio = {}", format_g(r.agent_ratio, 9));
    }
    let _ = writeln!(s, "flagged = {}", table.flagged);
    s
}

/// Binary 8-bit PGM, first row at the largest `y`.
pub fn pgm_bytes(field: &DensityField) -> Vec<u8> {
    let g = field.grid();
    let r = field.rho_max();
    let mut out = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
    out.reserve(g.len());
    for row in field.values().chunks(g.nx).rev() {
        out.extend(row.iter().map(|v| (255.0 * v.clamp(0.0, r) / r).round() as u8));
    }
    out
}

pub fn write_pgm(field: &DensityField, path: &Path) -> Result<()> {
    write_file(path, &pgm_bytes(field))
}
