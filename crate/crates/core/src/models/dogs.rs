//! Shepherd dogs containing a dispersing herd. Sheep drift outward and flee
//! the dogs; each dog runs orthogonally to the averaged density gradient.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::{parse_f64, parse_vec, radial_sup_integral, require_positive, Shape, TvConstants};
use crate::averaging::MollifierKernel;
use crate::error::{Error, Result};

pub(super) const OVERRIDE_KEYS: &[&str] = &[
    "v_max",
    "rho_max",
    "alpha",
    "ell",
    "beta",
    "r_p",
    "v_d",
    "initial",
    "positions",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DogsParams {
    pub v_max: f64,
    pub rho_max: f64,
    /// Strength of the repulsion from each dog.
    pub alpha: f64,
    /// Squared length scale of the repulsion.
    pub ell: f64,
    /// Strength of the outward drift.
    pub beta: f64,
    pub r_p: f64,
    /// Dog speed scale.
    pub v_d: f64,
    pub initial: Shape,
    /// Initial dog positions; may be empty for a dog-free reference run.
    pub dogs: Vec<[f64; 2]>,
}

impl Default for DogsParams {
    fn default() -> Self {
        Self {
            v_max: 1.0,
            rho_max: 1.0,
            alpha: 20.0,
            ell: 0.2,
            beta: 1.0,
            r_p: 1.0,
            v_d: 100.0,
            initial: Shape::Disc {
                center: [0.0, 0.0],
                radius: 0.2,
            },
            dogs: vec![[0.7, 0.0], [-0.7, 0.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DogsModel {
    params: DogsParams,
}

impl DogsModel {
    pub fn new(params: DogsParams) -> Result<Self> {
        require_positive("dogs.v_max", params.v_max)?;
        require_positive("dogs.rho_max", params.rho_max)?;
        require_positive("dogs.alpha", params.alpha)?;
        require_positive("dogs.ell", params.ell)?;
        require_positive("dogs.beta", params.beta)?;
        require_positive("dogs.r_p", params.r_p)?;
        require_positive("dogs.v_d", params.v_d)?;
        if params.dogs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::param("dogs.positions", "must be finite"));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &DogsParams {
        &self.params
    }

    pub fn kernel(&self) -> MollifierKernel {
        MollifierKernel::new(self.params.r_p).expect("validated radius")
    }

    /// Repulsion `alpha / sqrt(ell) * exp(-|x|^2 / ell) * x`.
    #[inline]
    fn repulsion(&self, d: [f64; 2]) -> [f64; 2] {
        let DogsParams { alpha, ell, .. } = self.params;
        let s = alpha / ell.sqrt() * (-(d[0] * d[0] + d[1] * d[1]) / ell).exp();
        [s * d[0], s * d[1]]
    }

    /// `rho v(rho) (beta x / (1 + |x|^2) + sum_i repulsion(x - p_i))`.
    #[inline]
    pub fn flux(&self, x: [f64; 2], rho: f64, p: &[f64]) -> [f64; 2] {
        let DogsParams {
            v_max, rho_max, beta, ..
        } = self.params;
        let g = rho * v_max * (1.0 - rho / rho_max);
        if g == 0.0 {
            return [0.0, 0.0];
        }
        let drift = beta / (1.0 + x[0] * x[0] + x[1] * x[1]);
        let mut w = [drift * x[0], drift * x[1]];
        for dog in p.chunks_exact(2) {
            let r = self.repulsion([x[0] - dog[0], x[1] - dog[1]]);
            w[0] += r[0];
            w[1] += r[1];
        }
        [g * w[0], g * w[1]]
    }

    /// Dog `i` moves with `V_d * (r_i)^perp / sqrt(1 + |r|^2)`, `(a, b)^perp = (b, -a)`.
    pub fn speed(&self, r: &[f64]) -> Vec<f64> {
        let norm2: f64 = r.iter().map(|v| v * v).sum();
        let scale = self.params.v_d / (1.0 + norm2).sqrt();
        r.chunks_exact(2).flat_map(|c| [scale * c[1], -scale * c[0]]).collect()
    }

    /// `V * (sup |drift| + n * sup |repulsion|)` with `sup |drift| = beta / 2`
    /// and `sup |repulsion| = alpha exp(-1/2) / sqrt(2)`.
    pub fn cfl_speed(&self) -> f64 {
        let DogsParams { v_max, alpha, beta, .. } = self.params;
        let n = self.params.dogs.len() as f64;
        v_max * (0.5 * beta + n * alpha * FRAC_1_SQRT_2 * (-0.5f64).exp())
    }

    pub(super) fn tv_constants(&self, agent_radius: f64) -> TvConstants {
        let DogsParams {
            v_max,
            rho_max,
            alpha,
            ell,
            beta,
            ..
        } = self.params;
        let n = self.params.dogs.len() as f64;
        // |grad div (repulsion)| = 4 alpha / ell^1.5 * s exp(-s^2/ell) |2 - s^2/ell|
        let profile = |s: f64| {
            let u2 = s * s / ell;
            4.0 * alpha / ell.powf(1.5) * s * (-u2).exp() * (2.0 - u2).abs()
        };
        let critical = [
            (ell * (7.0 - 33f64.sqrt()) / 4.0).sqrt(),
            (ell * (7.0 + 33f64.sqrt()) / 4.0).sqrt(),
        ];
        let repulsion = radial_sup_integral(profile, agent_radius, &critical, 8.0 * ell.sqrt());
        // int |grad div drift| = int 8 beta s / (1 + s^2)^3 dx = pi^2 beta
        let drift = PI * PI * beta;
        TvConstants {
            grad_dflux: v_max * 2f64.sqrt() * (beta + n * alpha / ell.sqrt()),
            grad_div_integral: v_max * rho_max / 4.0 * (drift + n * repulsion),
        }
    }

    pub(super) fn apply_override(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let mut params = self.params.clone();
        match key {
            "v_max" => params.v_max = parse_f64(key, value)?,
            "rho_max" => params.rho_max = parse_f64(key, value)?,
            "alpha" => params.alpha = parse_f64(key, value)?,
            "ell" => params.ell = parse_f64(key, value)?,
            "beta" => params.beta = parse_f64(key, value)?,
            "r_p" => params.r_p = parse_f64(key, value)?,
            "v_d" => params.v_d = parse_f64(key, value)?,
            "initial" => params.initial = value.parse()?,
            "positions" => {
                let v = parse_vec(key, value)?;
                if v.len() % 2 != 0 {
                    return Err("`dogs.positions` expects x,y pairs".into());
                }
                params.dogs = v.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
            }
            _ => {
                return Err(format!(
                    "unknown key `dogs.{key}`, expected one of {}",
                    OVERRIDE_KEYS.join(", ")
                ))
            }
        }
        *self = DogsModel::new(params).map_err(|e| e.to_string())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> DogsModel {
        DogsModel::new(DogsParams::default()).unwrap()
    }

    const DOGS: [f64; 4] = [0.7, 0.0, -0.7, 0.0];

    #[test]
    fn flux_vanishes_at_congestion() {
        assert_eq!(model().flux([0.1, 0.2], 1.0, &DOGS), [0.0, 0.0]);
    }

    #[test]
    fn symmetric_dogs_cancel_at_origin() {
        let f = model().flux([0.0, 0.0], 0.5, &DOGS);
        assert!(f[0].abs() < 1e-15 && f[1].abs() < 1e-15);
    }

    #[test]
    fn flux_hand_value() {
        // rho = 0.5, x = (0.1, 0): g = 0.25
        // drift: 0.1 / 1.01
        // dog at 0.7: d = -0.6, 20/sqrt(0.2) e^{-1.8} (-0.6)
        // dog at -0.7: d = 0.8, 20/sqrt(0.2) e^{-3.2} (0.8)
        let a = 20.0 / 0.2f64.sqrt();
        let w = 0.1 / 1.01 + a * (-1.8f64).exp() * -0.6 + a * (-3.2f64).exp() * 0.8;
        let expected = 0.25 * w;
        let f = model().flux([0.1, 0.0], 0.5, &DOGS);
        assert!((f[0] - expected).abs() < 1e-13, "{} vs {expected}", f[0]);
        assert!((expected - -0.719518).abs() < 1e-6, "{expected}");
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn speed_examples() {
        let m = DogsModel::new(DogsParams {
            dogs: vec![[0.0, 0.0]],
            ..DogsParams::default()
        })
        .unwrap();
        assert_eq!(m.speed(&[0.0, 0.0]), vec![0.0, -0.0]);
        let s = m.speed(&[0.0, 1.0]);
        assert!((s[0] - 100.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((s[0] - 70.71).abs() < 1e-2);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn speed_is_bounded_by_v_d() {
        let m = model();
        for r in [[1e3, -2e3, 5.0, 1.0], [0.1, 0.2, 0.3, 0.4]] {
            let s = m.speed(&r);
            let n: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n < 100.0);
        }
    }

    #[test]
    fn dog_free_model_is_allowed() {
        let mut m = model();
        m.apply_override("positions", "").unwrap();
        assert!(m.params().dogs.is_empty());
        assert!((m.cfl_speed() - 0.5).abs() < 1e-15);
        assert!(m.apply_override("positions", "1,2,3").is_err());
    }
}
