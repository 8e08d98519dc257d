//! Radiative cooling of a body to a cold sky: m·c·dT/dt = ε·σ·A·(T_amb⁴ − T⁴).

use serde::Serialize;
use thiserror::Error;

use crate::error::ValidationError;
use crate::scenario::ThermalBody;
use crate::units::STEFAN_BOLTZMANN;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermalError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("closed form needs zero ambient temperature, got {0} K")]
    NonZeroAmbient(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolingCurve {
    pub times: Vec<f64>,
    pub temperatures: Vec<f64>,
    /// First crossing of the limit, interpolated between steps. `None` when
    /// the limit was not reached within the horizon.
    pub time_to_limit: Option<f64>,
}

impl CoolingCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time_s,temperature_k\n");
        for (t, k) in self.times.iter().zip(&self.temperatures) {
            s.push_str(&format!("{t},{k}\n"));
        }
        s
    }
}

/// Net radiated heat flow out of the body, W.
pub fn radiated_power(body: &ThermalBody, t: f64) -> f64 {
    body.emissivity * STEFAN_BOLTZMANN * body.area * (t.powi(4) - body.t_ambient.powi(4))
}

fn rate(body: &ThermalBody, t: f64) -> f64 {
    -radiated_power(body, t) / body.heat_capacity()
}

/// Integrate the cooling ODE with classical RK4 until the body reaches
/// `t_limit` or `max_time` elapses.
pub fn cooldown(
    body: &ThermalBody,
    step: f64,
    max_time: f64,
) -> Result<CoolingCurve, ThermalError> {
    body.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(ValidationError::new("step", "must be positive").into());
    }
    if !(max_time >= 0.0 && max_time.is_finite()) {
        return Err(ValidationError::new("max_time", "must be non-negative").into());
    }

    let mut times = vec![0.0];
    let mut temps = vec![body.t_initial];
    if body.t_initial <= body.t_limit {
        return Ok(CoolingCurve {
            times,
            temperatures: temps,
            time_to_limit: Some(0.0),
        });
    }

    let steps = (max_time / step).ceil() as usize;
    let mut temp = body.t_initial;
    for i in 1..=steps {
        let t0 = (i - 1) as f64 * step;
        let h = step.min(max_time - t0);
        let k1 = rate(body, temp);
        let k2 = rate(body, temp + 0.5 * h * k1);
        let k3 = rate(body, temp + 0.5 * h * k2);
        let k4 = rate(body, temp + h * k3);
        let next = temp + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t1 = t0 + h;
        times.push(t1);
        temps.push(next);
        if next <= body.t_limit {
            let frac = (temp - body.t_limit) / (temp - next);
            return Ok(CoolingCurve {
                times,
                temperatures: temps,
                time_to_limit: Some(t0 + frac * h),
            });
        }
        temp = next;
    }
    log::warn!("limit {} K not reached within {max_time} s", body.t_limit);
    Ok(CoolingCurve {
        times,
        temperatures: temps,
        time_to_limit: None,
    })
}

/// Analytic cooldown time for zero ambient temperature:
/// t = m·c / (3·ε·σ·A) · (1/T_limit³ − 1/T_initial³).
pub fn cooldown_closed_form_check(body: &ThermalBody) -> Result<f64, ThermalError> {
    body.validate()?;
    if body.t_ambient != 0.0 {
        return Err(ThermalError::NonZeroAmbient(body.t_ambient));
    }
    let k = body.heat_capacity() / (3.0 * body.emissivity * STEFAN_BOLTZMANN * body.area);
    Ok(k * (body.t_limit.powi(-3) - body.t_initial.powi(-3)))
}

/// Largest relative mismatch, over all steps, between the stored-energy
/// change m·c·ΔT and the trapezoidal integral of radiated power.
pub fn energy_residual(body: &ThermalBody, curve: &CoolingCurve) -> f64 {
    let mc = body.heat_capacity();
    curve
        .times
        .windows(2)
        .zip(curve.temperatures.windows(2))
        .map(|(t, k)| {
            let stored = mc * (k[0] - k[1]);
            let radiated =
                0.5 * (t[1] - t[0]) * (radiated_power(body, k[0]) + radiated_power(body, k[1]));
            (stored - radiated).abs() / radiated.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}
