//! A predator with second-order dynamics attacking a flock. Preys drift with
//! a fixed velocity and flee the predator; the predator accelerates along the
//! averaged density gradient.

use super::{parse_f64, parse_point, radial_sup_integral, require_positive, Shape, TvConstants};
use crate::averaging::MollifierKernel;
use crate::error::Result;

pub(super) const OVERRIDE_KEYS: &[&str] = &[
    "v_max", "rho_max", "c", "b", "drift", "accel", "r_p", "initial", "position", "velocity",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PreyParams {
    pub v_max: f64,
    pub rho_max: f64,
    /// Inverse length over which preys sense the predator.
    pub c: f64,
    /// Escape strength.
    pub b: f64,
    /// Prey drift velocity.
    pub drift: [f64; 2],
    /// Predator acceleration gain.
    pub accel: f64,
    pub r_p: f64,
    pub initial: Shape,
    /// Predator initial position.
    pub position: [f64; 2],
    /// Predator initial velocity.
    pub velocity: [f64; 2],
}

impl Default for PreyParams {
    fn default() -> Self {
        Self {
            v_max: 2.0,
            rho_max: 1.0,
            c: 5.25,
            b: 40.0,
            drift: [0.0, -0.5],
            accel: 400.0,
            r_p: 0.5,
            initial: Shape::Rect {
                xmin: -0.2,
                xmax: 0.2,
                ymin: -0.2,
                ymax: -0.1,
            },
            position: [0.0, -0.8],
            velocity: [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreyModel {
    params: PreyParams,
}

impl PreyModel {
    pub fn new(params: PreyParams) -> Result<Self> {
        require_positive("prey.v_max", params.v_max)?;
        require_positive("prey.rho_max", params.rho_max)?;
        require_positive("prey.c", params.c)?;
        require_positive("prey.b", params.b)?;
        require_positive("prey.accel", params.accel)?;
        require_positive("prey.r_p", params.r_p)?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &PreyParams {
        &self.params
    }

    pub fn kernel(&self) -> MollifierKernel {
        MollifierKernel::new(self.params.r_p).expect("validated radius")
    }

    /// `rho V (1 - rho / R) (drift + B exp(-C |x - P|) (x - P))`.
    #[inline]
    pub fn flux(&self, x: [f64; 2], rho: f64, predator: [f64; 2]) -> [f64; 2] {
        let PreyParams {
            v_max,
            rho_max,
            c,
            b,
            drift,
            ..
        } = self.params;
        let g = rho * v_max * (1.0 - rho / rho_max);
        if g == 0.0 {
            return [0.0, 0.0];
        }
        let d = [x[0] - predator[0], x[1] - predator[1]];
        let e = b * (-c * d[0].hypot(d[1])).exp();
        [g * (drift[0] + e * d[0]), g * (drift[1] + e * d[1])]
    }

    /// `(P, V) -> (V, accel * r)`.
    pub fn speed(&self, p: &[f64], r: [f64; 2]) -> [f64; 4] {
        let a = self.params.accel;
        [p[2], p[3], a * r[0], a * r[1]]
    }

    /// `V * (|drift| + B max_s s exp(-C s)) = V * (|drift| + B / (C e))`.
    pub fn cfl_speed(&self) -> f64 {
        let PreyParams { v_max, c, b, drift, .. } = self.params;
        v_max * (drift[0].hypot(drift[1]) + b / (c * std::f64::consts::E))
    }

    pub(super) fn tv_constants(&self, agent_radius: f64) -> TvConstants {
        let PreyParams {
            v_max, rho_max, c, b, ..
        } = self.params;
        // |grad div (exp(-C s) y)| = C exp(-C s) |3 - C s|
        let profile = |s: f64| c * (-c * s).exp() * (3.0 - c * s).abs();
        TvConstants {
            grad_dflux: v_max * b * 2f64.sqrt(),
            grad_div_integral: v_max * rho_max / 4.0
                * b
                * radial_sup_integral(profile, agent_radius, &[4.0 / c], 40.0 / c),
        }
    }

    pub(super) fn apply_override(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let mut params = self.params.clone();
        match key {
            "v_max" => params.v_max = parse_f64(key, value)?,
            "rho_max" => params.rho_max = parse_f64(key, value)?,
            "c" => params.c = parse_f64(key, value)?,
            "b" => params.b = parse_f64(key, value)?,
            "drift" => params.drift = parse_point(key, value)?,
            "accel" => params.accel = parse_f64(key, value)?,
            "r_p" => params.r_p = parse_f64(key, value)?,
            "initial" => params.initial = value.parse()?,
            "position" => params.position = parse_point(key, value)?,
            "velocity" => params.velocity = parse_point(key, value)?,
            _ => {
                return Err(format!(
                    "unknown key `prey.{key}`, expected one of {}",
                    OVERRIDE_KEYS.join(", ")
                ))
            }
        }
        *self = PreyModel::new(params).map_err(|e| e.to_string())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> PreyModel {
        PreyModel::new(PreyParams::default()).unwrap()
    }

    #[test]
    fn flux_examples() {
        let m = model();
        assert_eq!(m.flux([0.3, 0.1], 1.0, [0.0, -0.8]), [0.0, 0.0]);
        // at the predator the escape term vanishes: 0.5 * 2 * 0.5 * (0, -0.5)
        let f = m.flux([0.0, -0.8], 0.5, [0.0, -0.8]);
        assert_eq!(f, [0.0, -0.25]);
    }

    #[test]
    fn far_field_is_pure_drift() {
        let m = model();
        let x = [3.0, 4.0];
        let f = m.flux(x, 0.5, [0.0, 0.0]);
        let dist: f64 = 5.0;
        let slack = 0.5 * (-5.25 * dist).exp() * 40.0 * dist;
        assert!((f[0] - 0.0).abs() <= slack);
        assert!((f[1] - -0.25).abs() <= slack);
    }

    #[test]
    fn speed_examples() {
        let m = model();
        assert_eq!(m.speed(&[0.0, -0.8, 0.0, 1.0], [0.0, 0.0]), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.speed(&[0.0, 0.0, 0.0, 0.0], [1.0, 0.0]), [0.0, 0.0, 400.0, 0.0]);
        let p = [1.5, -2.0, 0.25, -0.75];
        let s = m.speed(&p, [0.3, 0.4]);
        assert_eq!(&s[..2], &p[2..]);
    }

    #[test]
    fn cfl_speed_value() {
        assert!((model().cfl_speed() - 6.605782).abs() < 1e-6);
    }
}
