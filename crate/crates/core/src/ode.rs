//! Explicit Euler step for the agents.

use crate::averaging::stack_at;
use crate::error::{Error, Result};
use crate::grid::DensityField;
use crate::models::ScenarioModel;

/// Points at which `model` samples the density average for state `p`.
pub fn agent_positions(p: &[f64], model: &ScenarioModel) -> Result<Vec<[f64; 2]>> {
    model.agent_positions(p)
}

/// `p + dt * phi(t, p, (A rho)(p))`, the average taken over `field`.
pub fn ode_step(p: &[f64], model: &ScenarioModel, field: &DensityField, t: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let points = model.agent_positions(p)?;
    let r = stack_at(field, &model.kernel(), &points, model.averaging_mode());
    let velocity = model.speed(t, p, &r);
    if velocity.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteAgent {
            t,
            state: p.to_vec(),
            velocity,
        });
    }
    Ok(p.iter().zip(&velocity).map(|(x, v)| x + dt * v).collect())
}
