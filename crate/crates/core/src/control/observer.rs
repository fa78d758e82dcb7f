//! Back-stepping with disturbance observers.
//!
//! The PV current `d1`, battery EMF `d2` and load admittance `d3` are
//! replaced by estimates whose update laws come out of the augmented
//! Lyapunov function `W + Σ ½ (d_k - d̂_k)² / ρ_k`:
//! `d/dt d̂1 = ρ1 e1`, `d/dt d̂2 = ρ2 e4`, `d/dt d̂3 = -ρ3 x6 e6`.

use crate::error::{Error, Result};
use crate::plant::{RefSet, SpvdgParams, SpvdgState};

use super::backstep::{
    battery_duty, pv_duty, saturate, tracking_errors, x2_rate, BackstepGains, BackstepOptions, BatteryChannel,
    PvChannel, TrackingErrors,
};

/// Observer adaptation gains `ρ1..ρ3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    pub rho: [f64; 3],
}

impl ObserverGains {
    pub const fn new(rho1: f64, rho2: f64, rho3: f64) -> Self {
        Self {
            rho: [rho1, rho2, rho3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.iter().all(|r| *r > 0.0 && r.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("observer gains must be positive"))
        }
    }
}

/// Disturbance estimates `(d̂1, d̂2, d̂3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub d_hat: [f64; 3],
}

/// Duties and observer rates produced by one evaluation of the law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DobOutput {
    pub u1: f64,
    pub u2: f64,
    pub observer_rates: [f64; 3],
    pub guard_fired: bool,
}

/// Observer update rates for the given tracking errors.
pub fn observer_rates(x: &SpvdgState, errors: &TrackingErrors, rho: &ObserverGains) -> [f64; 3] {
    let [e1, _, _, e4, _, e6] = errors.e;
    [rho.rho[0] * e1, rho.rho[1] * e4, -rho.rho[2] * x.x6 * e6]
}

/// Observer-based back-stepping law.
///
/// `prev` supplies the duties held when a denominator falls inside the
/// guard band. The observer rates are returned so the caller can integrate
/// them together with the plant.
#[allow(clippy::too_many_arguments)]
pub fn dob_backstep_control(
    p: &SpvdgParams,
    x: &SpvdgState,
    refs: &RefSet,
    obs: &ObserverState,
    gains: &BackstepGains,
    rho: &ObserverGains,
    opts: &BackstepOptions,
    prev: (f64, f64),
) -> DobOutput {
    let [d1, d2, d3] = obs.d_hat;
    let errors = tracking_errors(p, x, refs, d1, d3, gains);
    let rates = observer_rates(x, &errors, rho);
    let pv = PvChannel {
        d1,
        d1_rate: rates[0],
        x1_rate: (d1 - x.x3) / p.c_pvi,
    };
    let mut guard_fired = false;
    let u1 = match pv_duty(p, x, &errors, &pv, gains, opts) {
        Ok(u) => saturate(u),
        Err(_) => {
            guard_fired = true;
            prev.0
        }
    };
    let bat = BatteryChannel {
        d2,
        d3,
        d3_rate: rates[2],
        x2_rate: x2_rate(p, x, u1),
        x6_rate: super::backstep::x6_rate(p, x, d3),
    };
    let u2 = match battery_duty(p, x, &errors, &bat, gains, opts) {
        Ok(u) => saturate(u),
        Err(_) => {
            guard_fired = true;
            prev.1
        }
    };
    DobOutput {
        u1,
        u2,
        observer_rates: rates,
        guard_fired,
    }
}
