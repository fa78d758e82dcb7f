//! Back-stepping duty laws for the six-state microgrid.
//!
//! The PV side is stabilised through the virtual current `α3 = d1 + K1 e1`
//! followed by a duty `u1` that makes `d/dt ½(C_pvo e2² + L_pv e3²)` equal to
//! `-K2 e2² - K3 e3²`. The battery side mirrors it with the virtual voltage
//! `α5` that regulates the bus and a duty `u2` for `(e4, e5)`.
//!
//! Both duties are ratios `(-num - Σ K e²) / den` whose denominators vanish
//! exactly at the equilibrium; the guard turns a near-zero denominator into
//! [`Error::DegenerateDenominator`] and [`BackstepController`] then holds the
//! previous duty.

use crate::error::{Error, Result};
use crate::math::abs;
use crate::plant::{Disturbances, RefSet, SpvdgParams, SpvdgState};

/// Positive back-stepping gains `K1..K6`, one per error channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackstepGains {
    pub k: [f64; 6],
}

impl BackstepGains {
    pub const fn new(k1: f64, k2: f64, k3: f64, k4: f64, k5: f64, k6: f64) -> Self {
        Self {
            k: [k1, k2, k3, k4, k5, k6],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k.iter().all(|k| *k > 0.0 && k.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("back-stepping gains must be positive"))
        }
    }
}

/// Options shared by both back-stepping variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackstepOptions {
    /// Denominator guard threshold.
    pub guard: f64,
    /// Adds `+e1 e3` to the `u1` numerator and `-e5 e6 / R_bo` to the `u2`
    /// numerator so the interconnection terms between the sub-Lyapunov
    /// functions cancel and the composite function decreases as `-Σ K e²`.
    pub cancel_cross_terms: bool,
}

impl Default for BackstepOptions {
    fn default() -> Self {
        Self {
            guard: 1e-4,
            cancel_cross_terms: true,
        }
    }
}

/// Virtual PV inductor current that makes `½ C_pvi e1²` decrease as `-K1 e1²`.
pub fn backstep_virtual_alpha3(e1: f64, d1: f64, k1: f64) -> f64 {
    d1 + k1 * e1
}

/// Virtual battery-converter voltage that regulates the bus.
pub fn backstep_virtual_alpha5(p: &SpvdgParams, x2: f64, x6: f64, e6: f64, d3: f64, k6: f64) -> f64 {
    -p.r_bo / p.r_pvo * x2 + p.r_bo * x6 * (1.0 / p.r_pvo + 1.0 / p.r_bo + d3) - k6 * e6 * p.r_bo
}

/// Tracking errors, with `e3`/`e5` measured against the virtual controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingErrors {
    pub e: [f64; 6],
    pub alpha3: f64,
    pub alpha5: f64,
}

/// Errors of `x` against `refs` for disturbance values `d1` and `d3`.
pub fn tracking_errors(
    p: &SpvdgParams,
    x: &SpvdgState,
    refs: &RefSet,
    d1: f64,
    d3: f64,
    gains: &BackstepGains,
) -> TrackingErrors {
    let e1 = x.x1 - refs.x1;
    let e2 = x.x2 - refs.x2;
    let e4 = x.x4 - refs.x4;
    let e6 = x.x6 - refs.x6;
    let alpha3 = backstep_virtual_alpha3(e1, d1, gains.k[0]);
    let alpha5 = backstep_virtual_alpha5(p, x.x2, x.x6, e6, d3, gains.k[5]);
    TrackingErrors {
        e: [e1, e2, x.x3 - alpha3, e4, x.x5 - alpha5, e6],
        alpha3,
        alpha5,
    }
}

/// Composite Lyapunov value `½ Σ w_k e_k²` with the state storage weights.
pub fn lyapunov_value(p: &SpvdgParams, errors: &TrackingErrors) -> f64 {
    let w = p.storage_weights();
    0.5 * (0..6).map(|k| w[k] * errors.e[k] * errors.e[k]).sum::<f64>()
}

/// Inputs to the PV-side duty law. Disturbance and rate values are whatever
/// the variant has available: measured, held constant, or observed.
#[derive(Debug, Clone, Copy)]
pub struct PvChannel {
    pub d1: f64,
    pub d1_rate: f64,
    /// `dx1/dt` used inside `dα3/dt`.
    pub x1_rate: f64,
}

/// Inputs to the battery-side duty law.
#[derive(Debug, Clone, Copy)]
pub struct BatteryChannel {
    pub d2: f64,
    pub d3: f64,
    pub d3_rate: f64,
    /// `dx2/dt` at the PV duty that will be applied.
    pub x2_rate: f64,
    /// `dx6/dt` used inside `dα5/dt`.
    pub x6_rate: f64,
}

/// Unsaturated PV duty `u1`.
pub fn pv_duty(
    p: &SpvdgParams,
    x: &SpvdgState,
    errors: &TrackingErrors,
    ch: &PvChannel,
    gains: &BackstepGains,
    opts: &BackstepOptions,
) -> Result<f64> {
    let [e1, e2, e3, ..] = errors.e;
    let alpha3_rate = gains.k[0] * ch.x1_rate + ch.d1_rate;
    let num = e2 * (x.x3 + (x.x6 - x.x2) / p.r_pvo) + e3 * (x.x1 - x.x2 - p.r_pv * x.x3 - p.l_pv * alpha3_rate);
    let den = e3 * x.x2 - e2 * x.x3;
    if !(abs(den) >= opts.guard) {
        return Err(Error::DegenerateDenominator { channel: 1, value: den });
    }
    let mut target = -gains.k[1] * e2 * e2 - gains.k[2] * e3 * e3;
    if opts.cancel_cross_terms {
        target += e1 * e3;
    }
    Ok((target - num) / den)
}

/// Unsaturated battery duty `u2`.
pub fn battery_duty(
    p: &SpvdgParams,
    x: &SpvdgState,
    errors: &TrackingErrors,
    ch: &BatteryChannel,
    gains: &BackstepGains,
    opts: &BackstepOptions,
) -> Result<f64> {
    let [_, _, _, e4, e5, e6] = errors.e;
    let alpha5_rate = -p.r_bo / p.r_pvo * ch.x2_rate
        + p.r_bo * x.x6 * ch.d3_rate
        + ch.x6_rate * (-gains.k[5] * p.r_bo + p.r_bo / p.r_pvo + 1.0 + p.r_bo * ch.d3);
    let num = e5 * (x.x4 + (x.x6 - x.x5) / p.r_bo - p.c_bo * alpha5_rate) + e4 * (ch.d2 - x.x5 - p.r_b * x.x4);
    let den = e4 * x.x5 - e5 * x.x4;
    if !(abs(den) >= opts.guard) {
        return Err(Error::DegenerateDenominator { channel: 2, value: den });
    }
    let mut target = -gains.k[3] * e4 * e4 - gains.k[4] * e5 * e5;
    if opts.cancel_cross_terms {
        target -= e5 * e6 / p.r_bo;
    }
    Ok((target - num) / den)
}

/// `dx2/dt` for a given PV duty (independent of the disturbances).
pub fn x2_rate(p: &SpvdgParams, x: &SpvdgState, u1: f64) -> f64 {
    (x.x3 * (1.0 - u1) + (x.x6 - x.x2) / p.r_pvo) / p.c_pvo
}

/// `dx6/dt` for a given load admittance.
pub fn x6_rate(p: &SpvdgParams, x: &SpvdgState, d3: f64) -> f64 {
    ((x.x2 - x.x6) / p.r_pvo + (x.x5 - x.x6) / p.r_bo - x.x6 * d3) / p.c_bus
}

pub(crate) fn saturate(u: f64) -> f64 {
    u.clamp(0.0, 1.0)
}

/// Rates of the measured disturbances; zero between events for
/// piecewise-constant disturbances.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisturbanceRates {
    pub d1: f64,
    pub d3: f64,
}

/// Raw (unsaturated) duties of the known-disturbance law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDuties {
    pub u1: Result<f64>,
    pub u2: Result<f64>,
}

/// Known-disturbance back-stepping law. `held_u1` is the PV duty used for
/// `dx2/dt` when `u1` itself is degenerate.
#[allow(clippy::too_many_arguments)]
pub fn backstep_raw(
    p: &SpvdgParams,
    x: &SpvdgState,
    refs: &RefSet,
    d: &Disturbances,
    d_rates: &DisturbanceRates,
    gains: &BackstepGains,
    opts: &BackstepOptions,
    held_u1: f64,
) -> RawDuties {
    let errors = tracking_errors(p, x, refs, d.d1, d.d3, gains);
    let pv = PvChannel {
        d1: d.d1,
        d1_rate: d_rates.d1,
        x1_rate: (d.d1 - x.x3) / p.c_pvi,
    };
    let u1 = pv_duty(p, x, &errors, &pv, gains, opts);
    let applied_u1 = u1.map(saturate).unwrap_or(held_u1);
    let bat = BatteryChannel {
        d2: d.d2,
        d3: d.d3,
        d3_rate: d_rates.d3,
        x2_rate: x2_rate(p, x, applied_u1),
        x6_rate: x6_rate(p, x, d.d3),
    };
    let u2 = battery_duty(p, x, &errors, &bat, gains, opts);
    RawDuties { u1, u2 }
}

/// Known-disturbance back-stepping duties, saturated to `[0, 1]`.
///
/// Fails with [`Error::DegenerateDenominator`] if either denominator is
/// inside the guard band; use [`BackstepController`] to hold the previous
/// duty instead.
pub fn backstep_control(
    p: &SpvdgParams,
    x: &SpvdgState,
    refs: &RefSet,
    d: &Disturbances,
    gains: &BackstepGains,
    opts: &BackstepOptions,
) -> Result<(f64, f64)> {
    let raw = backstep_raw(p, x, refs, d, &DisturbanceRates::default(), gains, opts, refs.u1);
    Ok((saturate(raw.u1?), saturate(raw.u2?)))
}

/// Back-stepping controller that holds the previous duty on a guard event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackstepController {
    pub gains: BackstepGains,
    pub opts: BackstepOptions,
    pub u1: f64,
    pub u2: f64,
    /// Number of ticks at which a guard fired.
    pub guard_events: u64,
}

impl BackstepController {
    /// Starts holding the steady duties of `refs`.
    pub fn new(gains: BackstepGains, opts: BackstepOptions, refs: &RefSet) -> Self {
        Self {
            gains,
            opts,
            u1: refs.u1,
            u2: refs.u2,
            guard_events: 0,
        }
    }

    /// Returns the duties to apply and whether a guard fired on this tick.
    pub fn update(&mut self, p: &SpvdgParams, x: &SpvdgState, refs: &RefSet, d: &Disturbances) -> (f64, f64, bool) {
        let raw = backstep_raw(
            p,
            x,
            refs,
            d,
            &DisturbanceRates::default(),
            &self.gains,
            &self.opts,
            self.u1,
        );
        let mut fired = false;
        match raw.u1 {
            Ok(u) => self.u1 = saturate(u),
            Err(_) => fired = true,
        }
        match raw.u2 {
            Ok(u) => self.u2 = saturate(u),
            Err(_) => fired = true,
        }
        if fired {
            self.guard_events += 1;
        }
        (self.u1, self.u2, fired)
    }
}
