//! Joint temperature/irradiance estimation from two measured operating points.
//!
//! Both measurements lie on the same (unknown) I-V curve. Newton-Raphson on
//! the 2x2 system `i_k(T, λ; v_k) = i_k,measured` recovers `(T, λ)`; the
//! Jacobian rows are the closed-form current sensitivities evaluated on the
//! curve of the current estimate.

use crate::error::{Error, Result};
use crate::math::abs;
use crate::pv::{pv_current, pv_current_sensitivities, Environment, OperatingPoint, PvArrayParams};

/// Two operating points measured `delta_t` apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementPair {
    pub first: OperatingPoint,
    pub second: OperatingPoint,
}

impl MeasurementPair {
    pub fn new(first: OperatingPoint, second: OperatingPoint) -> Result<Self> {
        let pair = Self { first, second };
        pair.validate()?;
        Ok(pair)
    }

    /// Synthesizes a noiseless pair on the model curve of `env`.
    pub fn synthesize(params: &PvArrayParams, env: &Environment, v1: f64, v2: f64) -> Result<Self> {
        let i1 = pv_current(params, env, v1)?;
        let i2 = pv_current(params, env, v2)?;
        Self::new(OperatingPoint::new(v1, i1), OperatingPoint::new(v2, i2))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.first.v, self.first.i, self.second.v, self.second.i]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite measurement"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Interval between estimator updates (s).
    pub delta_t: f64,
    pub max_iters: usize,
    /// Stop once the temperature update is below this (K)...
    pub tol_temperature: f64,
    /// ...and the irradiance update below this (W/m²).
    pub tol_irradiance: f64,
    /// Relative PV voltage/current change that triggers a new estimate.
    pub min_change: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            delta_t: 0.05,
            max_iters: 20,
            tol_temperature: 1e-4,
            tol_irradiance: 1e-3,
            min_change: 0.02,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters >= 1
            && self.tol_temperature > 0.0
            && self.tol_irradiance > 0.0
            && self.delta_t > 0.0
            && self.min_change >= 0.0
        {
            Ok(())
        } else {
            Err(Error::InvalidInput("estimator configuration out of range"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub temperature: f64,
    pub irradiance: f64,
    pub iterations_used: usize,
}

impl EstimatorState {
    pub const fn new(temperature: f64, irradiance: f64) -> Self {
        Self {
            temperature,
            irradiance,
            iterations_used: 0,
        }
    }

    pub fn environment(&self) -> Environment {
        Environment::new(self.temperature, self.irradiance)
    }
}

const DET_EPS: f64 = 1e-12;
const MAX_HALVINGS: usize = 20;
const CAP_T: f64 = 60.0;
const CAP_IRR: f64 = 1000.0;

/// Model currents at the measured voltages and the Newton update for `state`.
fn newton_update(
    params: &PvArrayParams,
    state: &EstimatorState,
    pair: &MeasurementPair,
) -> Result<(f64, f64, [f64; 2])> {
    let env = state.environment();
    let i1k = pv_current(params, &env, pair.first.v)?;
    let i2k = pv_current(params, &env, pair.second.v)?;
    let s1 = pv_current_sensitivities(params, &env, &OperatingPoint::new(pair.first.v, i1k))?;
    let s2 = pv_current_sensitivities(params, &env, &OperatingPoint::new(pair.second.v, i2k))?;

    let det = s1.d_temperature * s2.d_irradiance - s1.d_irradiance * s2.d_temperature;
    if !(abs(det) >= DET_EPS) {
        return Err(Error::SingularJacobian { det });
    }
    let r1 = pair.first.i - i1k;
    let r2 = pair.second.i - i2k;
    let d_t = (s2.d_irradiance * r1 - s1.d_irradiance * r2) / det;
    let d_irr = (-s2.d_temperature * r1 + s1.d_temperature * r2) / det;
    Ok((d_t, d_irr, [r1, r2]))
}

/// One Newton-Raphson update of `(T, λ)`.
///
/// If the raw step would make the temperature non-positive or the irradiance
/// negative, it is halved until feasible.
pub fn nr_step(params: &PvArrayParams, state: &EstimatorState, pair: &MeasurementPair) -> Result<EstimatorState> {
    pair.validate()?;
    let (d_t, d_irr, _) = newton_update(params, state, pair)?;
    apply_step(state, d_t, d_irr)
}

fn apply_step(state: &EstimatorState, d_t: f64, d_irr: f64) -> Result<EstimatorState> {
    let mut scale = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let t = state.temperature + scale * d_t;
        let irr = state.irradiance + scale * d_irr;
        if t > 0.0 && irr >= 0.0 {
            return Ok(EstimatorState {
                temperature: t,
                irradiance: irr,
                iterations_used: state.iterations_used + 1,
            });
        }
        scale *= 0.5;
    }
    Err(Error::NoConvergence {
        iterations: state.iterations_used + 1,
    })
}

/// Current residual norm `|i_measured - i_model|` for an estimate.
pub fn residual_norm(params: &PvArrayParams, state: &EstimatorState, pair: &MeasurementPair) -> Result<f64> {
    let env = state.environment();
    let r1 = pair.first.i - pv_current(params, &env, pair.first.v)?;
    let r2 = pair.second.i - pv_current(params, &env, pair.second.v)?;
    Ok(crate::math::sqrt(r1 * r1 + r2 * r2))
}

/// Iterates Newton steps until both updates fall below tolerance.
///
/// Each step is limited to 60 K and 1000 W/m², halved into the feasible
/// region as in [`nr_step`], and then halved further while it does not
/// reduce the current residual. This keeps iterates started far from the
/// truth out of the flat part of the curve, where `T` and `λ` are nearly
/// indistinguishable.
///
/// `iterations_used` counts the Newton steps taken, including the final one
/// whose update was below tolerance.
pub fn estimate(
    params: &PvArrayParams,
    pair: &MeasurementPair,
    init: &EstimatorState,
    cfg: &EstimatorConfig,
) -> Result<EstimatorState> {
    cfg.validate()?;
    pair.validate()?;
    let mut state = EstimatorState {
        iterations_used: 0,
        ..*init
    };
    for _ in 0..cfg.max_iters {
        let (d_t, d_irr, [r1, r2]) = newton_update(params, &state, pair)?;
        let before = crate::math::sqrt(r1 * r1 + r2 * r2);
        let cap = (CAP_T / abs(d_t)).min(CAP_IRR / abs(d_irr)).min(1.0);
        let mut next = apply_step(&state, cap * d_t, cap * d_irr)?;
        let (mut step_t, mut step_irr) = (next.temperature - state.temperature, next.irradiance - state.irradiance);
        for _ in 0..MAX_HALVINGS {
            if residual_norm(params, &next, pair).is_ok_and(|r| r < before) {
                break;
            }
            step_t *= 0.5;
            step_irr *= 0.5;
            next.temperature = state.temperature + step_t;
            next.irradiance = state.irradiance + step_irr;
        }
        state = next;
        if abs(step_t) <= cfg.tol_temperature && abs(step_irr) <= cfg.tol_irradiance {
            return Ok(state);
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iters,
    })
}

/// True iff the relative change in voltage or current exceeds `min_change`.
pub fn should_reestimate(prev: &OperatingPoint, current: &OperatingPoint, min_change: f64) -> bool {
    let rel = |a: f64, b: f64| {
        let scale = abs(a).max(abs(b));
        if scale == 0.0 {
            0.0
        } else {
            abs(b - a) / scale
        }
    };
    rel(prev.v, current.v) > min_change || rel(prev.i, current.i) > min_change
}
