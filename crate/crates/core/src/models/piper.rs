//! A piper leading rats: the rats are attracted toward the piper, who walks
//! a prescribed heading and speeds up when surrounded by rats.

use std::f64::consts::FRAC_1_SQRT_2;

use super::{parse_f64, parse_point, radial_sup_integral, require_positive, Shape, TvConstants};
use crate::averaging::MollifierKernel;
use crate::error::{Error, Result};

pub(super) const OVERRIDE_KEYS: &[&str] = &[
    "v_max",
    "rho_max",
    "speed_max",
    "speed_min",
    "omega",
    "r_p",
    "initial",
    "start",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PiperParams {
    /// Rat speed at vacuum.
    pub v_max: f64,
    pub rho_max: f64,
    /// Piper speed at averaged density `R`.
    pub speed_max: f64,
    /// Piper speed at averaged density zero.
    pub speed_min: f64,
    /// Angular frequency of the default circular heading.
    pub omega: f64,
    pub r_p: f64,
    pub initial: Shape,
    pub start: [f64; 2],
}

impl Default for PiperParams {
    fn default() -> Self {
        Self {
            v_max: 9.0,
            rho_max: 1.0,
            speed_max: 7.0,
            speed_min: 1.0,
            omega: 1.0,
            r_p: 0.15,
            initial: Shape::Rect {
                xmin: -0.5,
                xmax: 0.0,
                ymin: 0.35,
                ymax: 0.85,
            },
            start: [-1.0, 0.5],
        }
    }
}

/// Piecewise-linear heading through `nodes`, node `k` at time `k * spacing`;
/// held constant after the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteHeading {
    pub spacing: f64,
    pub nodes: Vec<[f64; 2]>,
}

impl RouteHeading {
    pub fn eval(&self, t: f64) -> [f64; 2] {
        match self.nodes.len() {
            0 => [0.0, 0.0],
            1 => self.nodes[0],
            n => {
                let s = (t / self.spacing).max(0.0);
                let k = s.floor() as usize;
                if k >= n - 1 {
                    return self.nodes[n - 1];
                }
                let w = s - k as f64;
                let (a, b) = (self.nodes[k], self.nodes[k + 1]);
                [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Heading {
    /// `(cos omega t, -sin omega t)`.
    Circular,
    Route(RouteHeading),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiperModel {
    params: PiperParams,
    heading: Heading,
}

impl PiperModel {
    pub fn new(params: PiperParams) -> Result<Self> {
        require_positive("piper.v_max", params.v_max)?;
        require_positive("piper.rho_max", params.rho_max)?;
        require_positive("piper.speed_max", params.speed_max)?;
        require_positive("piper.r_p", params.r_p)?;
        if !(params.speed_min >= 0.0 && params.speed_min <= params.speed_max) {
            return Err(Error::param(
                "piper.speed_min",
                format!("need 0 <= speed_min <= speed_max, got {}", params.speed_min),
            ));
        }
        if !params.omega.is_finite() {
            return Err(Error::param("piper.omega", "must be finite"));
        }
        Ok(Self {
            params,
            heading: Heading::Circular,
        })
    }

    pub fn params(&self) -> &PiperParams {
        &self.params
    }

    pub fn heading(&self) -> &Heading {
        &self.heading
    }

    /// Same model walking `route` instead of the circular heading.
    pub fn with_route(&self, start: [f64; 2], route: RouteHeading) -> Self {
        let mut params = self.params.clone();
        params.start = start;
        Self {
            params,
            heading: Heading::Route(route),
        }
    }

    pub fn kernel(&self) -> MollifierKernel {
        MollifierKernel::new(self.params.r_p).expect("validated radius")
    }

    pub fn heading_at(&self, t: f64) -> [f64; 2] {
        match &self.heading {
            Heading::Circular => {
                let w = self.params.omega * t;
                [w.cos(), -w.sin()]
            }
            Heading::Route(r) => r.eval(t),
        }
    }

    /// `rho * V (1 - rho / R) * (p - x) exp(-|p - x|^2)`.
    #[inline]
    pub fn flux(&self, x: [f64; 2], rho: f64, p: [f64; 2]) -> [f64; 2] {
        let PiperParams { v_max, rho_max, .. } = self.params;
        let d = [p[0] - x[0], p[1] - x[1]];
        let g = rho * v_max * (1.0 - rho / rho_max) * (-(d[0] * d[0] + d[1] * d[1])).exp();
        [g * d[0], g * d[1]]
    }

    /// `(v_p + (V_p - v_p) r / R) * heading(t)`.
    pub fn speed(&self, t: f64, r: f64) -> [f64; 2] {
        let PiperParams {
            speed_max,
            speed_min,
            rho_max,
            ..
        } = self.params;
        let q = speed_min + (speed_max - speed_min) / rho_max * r;
        let h = self.heading_at(t);
        [q * h[0], q * h[1]]
    }

    /// `V * max |1 - 2 rho / R| * max_s s exp(-s^2) = V exp(-1/2) / sqrt(2)`.
    pub fn cfl_speed(&self) -> f64 {
        self.params.v_max * FRAC_1_SQRT_2 * (-0.5f64).exp()
    }

    pub(super) fn tv_constants(&self, agent_radius: f64) -> TvConstants {
        let PiperParams { v_max, rho_max, .. } = self.params;
        // |grad div_y (y exp(-|y|^2))| = 4 s exp(-s^2) |2 - s^2|
        let profile = |s: f64| 4.0 * s * (-s * s).exp() * (2.0 - s * s).abs();
        let critical = [((7.0 - 33f64.sqrt()) / 4.0).sqrt(), ((7.0 + 33f64.sqrt()) / 4.0).sqrt()];
        TvConstants {
            grad_dflux: v_max * 2f64.sqrt(),
            grad_div_integral: v_max * rho_max / 4.0 * radial_sup_integral(profile, agent_radius, &critical, 8.0),
        }
    }

    pub(super) fn apply_override(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let mut params = self.params.clone();
        match key {
            "v_max" => params.v_max = parse_f64(key, value)?,
            "rho_max" => params.rho_max = parse_f64(key, value)?,
            "speed_max" => params.speed_max = parse_f64(key, value)?,
            "speed_min" => params.speed_min = parse_f64(key, value)?,
            "omega" => params.omega = parse_f64(key, value)?,
            "r_p" => params.r_p = parse_f64(key, value)?,
            "initial" => params.initial = value.parse()?,
            "start" => params.start = parse_point(key, value)?,
            _ => {
                return Err(format!(
                    "unknown key `piper.{key}`, expected one of {}",
                    OVERRIDE_KEYS.join(", ")
                ))
            }
        }
        let heading = self.heading.clone();
        *self = PiperModel::new(params).map_err(|e| e.to_string())?;
        self.heading = heading;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn model() -> PiperModel {
        PiperModel::new(PiperParams::default()).unwrap()
    }

    #[test]
    fn flux_vanishes_at_vacuum_and_congestion() {
        let m = model();
        assert_eq!(m.flux([0.3, -0.1], 1.0, [0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(m.flux([0.3, -0.1], 0.0, [0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn flux_hand_value() {
        // rho = 0.5, p - x = (1, 0): 0.5 * 9 * 0.5 * e^-1
        let f = model().flux([0.0, 0.0], 0.5, [1.0, 0.0]);
        assert!((f[0] - 2.25 * (-1f64).exp()).abs() < 1e-14);
        assert!((f[0] - 0.8277).abs() < 1e-4);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn speed_examples() {
        let m = model();
        assert_eq!(m.speed(0.0, 0.0), [1.0, 0.0]);
        assert_eq!(m.speed(0.0, 1.0), [7.0, -0.0]);
        let s = m.speed(FRAC_PI_2, 0.0);
        assert!(s[0].abs() < 1e-15 && (s[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn cfl_speed_value() {
        assert!((model().cfl_speed() - 3.8601).abs() < 1e-3);
    }

    #[test]
    fn route_interpolation() {
        let r = RouteHeading {
            spacing: 0.5,
            nodes: vec![[1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
        };
        assert_eq!(r.eval(0.0), [1.0, 0.0]);
        assert_eq!(r.eval(0.25), [0.5, 0.5]);
        assert_eq!(r.eval(0.75), [0.0, 0.0]);
        assert_eq!(r.eval(5.0), [0.0, -1.0]);
    }

    #[test]
    fn overrides_validate() {
        let mut m = model();
        m.apply_override("v_max", "4.5").unwrap();
        assert_eq!(m.params().v_max, 4.5);
        assert!(m.apply_override("v_max", "-1").is_err());
        assert!(m.apply_override("v_max", "fast").is_err());
        assert!(m.apply_override("speed_min", "8").is_err());
        assert!(m.apply_override("colour", "1").is_err());
        m.apply_override("start", "0, 0.5").unwrap();
        assert_eq!(m.params().start, [0.0, 0.5]);
    }
}
