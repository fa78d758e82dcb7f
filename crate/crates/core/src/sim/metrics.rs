use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorConfig, EstimatorState, MeasurementPair};
use crate::pv::{open_circuit_voltage, Environment, PvArrayParams};

use super::{Sample, Trace};

/// Selects one scalar from a [`Sample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    /// `x1..x6` as indices `0..6`.
    State(usize),
    Duty(usize),
    Disturbance(usize),
    Estimate(usize),
    PvPower,
    BatteryPower,
    LoadPower,
}

impl Signal {
    pub fn value(&self, s: &Sample) -> f64 {
        match *self {
            Signal::State(k) => s.x[k],
            Signal::Duty(k) => s.u[k],
            Signal::Disturbance(k) => s.d[k],
            Signal::Estimate(k) => s.d_hat.map_or(f64::NAN, |d| d[k]),
            Signal::PvPower => s.p_pv,
            Signal::BatteryPower => s.p_batt,
            Signal::LoadPower => s.p_load,
        }
    }
}

/// Time after `from` at which `signal` enters `target ± band·|target|` and
/// stays there until the next event (or the end of the trace).
///
/// The entry instant is interpolated linearly between the last sample
/// outside the band and the first one inside.
pub fn settling_time(trace: &Trace, signal: Signal, target: f64, band: f64, from: f64) -> Result<f64> {
    settling_time_abs(trace, signal, target, band * target.abs(), from)
}

/// [`settling_time`] with an absolute tolerance.
pub fn settling_time_abs(trace: &Trace, signal: Signal, target: f64, tol: f64, from: f64) -> Result<f64> {
    let end = trace.segment_end(from);
    let lo = trace.samples.partition_point(|s| s.t < from - 1e-12);
    let hi = trace.samples.partition_point(|s| s.t <= end + 1e-12);
    let window = &trace.samples[lo..hi];
    if window.is_empty() {
        return Err(Error::InvalidInput("settling window holds no samples"));
    }
    let dev = |s: &Sample| (signal.value(s) - target).abs();
    let Some(j) = window.iter().rposition(|s| !(dev(s) <= tol)) else {
        return Ok(0.0);
    };
    if j + 1 == window.len() {
        return Err(Error::NeverSettles);
    }
    let (a, b) = (&window[j], &window[j + 1]);
    let (da, db) = (dev(a), dev(b));
    let frac = if da.is_finite() && da > db {
        (da - tol) / (da - db)
    } else {
        1.0
    };
    Ok(a.t + frac * (b.t - a.t) - from)
}

/// `P_pv + P_batt - P_load - P_loss` at the sample nearest `t`.
pub fn power_balance(trace: &Trace, t: f64) -> f64 {
    trace.index_at(t).map_or(f64::NAN, |k| {
        let s = &trace.samples[k];
        s.p_pv + s.p_batt - s.p_load - s.p_loss
    })
}

/// Summary of one schedule segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentReport {
    pub start: f64,
    pub end: f64,
    /// Settling of `x6` to its reference.
    pub bus_settle: Option<f64>,
    /// Settling of `x1` to the MPP voltage.
    pub pv_settle: Option<f64>,
    /// Relative `x6` error at the segment end.
    pub bus_error: f64,
    /// Relative `x1` error against the MPP voltage at the segment end.
    pub pv_error: f64,
    /// Battery inductor current at the segment end.
    pub battery_current: f64,
    /// Relative observer errors at the segment end.
    pub estimate_error: Option<[f64; 3]>,
}

/// Per-segment settling and end-of-segment errors.
pub fn segment_reports(trace: &Trace, bus_band: f64, pv_band: f64) -> Vec<SegmentReport> {
    let mut starts = Vec::with_capacity(trace.events.len() + 1);
    starts.push(0.0);
    starts.extend_from_slice(&trace.events);
    starts
        .iter()
        .filter_map(|&start| {
            let end = trace.segment_end(start);
            let lo = trace.samples.partition_point(|s| s.t < start - 1e-12);
            let hi = trace.samples.partition_point(|s| s.t <= end + 1e-12);
            if hi <= lo + 1 {
                return None;
            }
            // the first sample can still carry the previous references
            let last = &trace.samples[hi - 1];
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            Some(SegmentReport {
                start,
                end,
                bus_settle: settling_time(trace, Signal::State(5), last.refs[5], bus_band, start).ok(),
                pv_settle: settling_time(trace, Signal::State(0), last.refs[0], pv_band, start).ok(),
                bus_error: rel(last.x[5], last.refs[5]),
                pv_error: rel(last.x[0], last.refs[0]),
                battery_current: last.x[3],
                estimate_error: last
                    .d_hat
                    .map(|h| [rel(h[0], last.d[0]), rel(h[1], last.d[1]), rel(h[2], last.d[2])]),
            })
        })
        .collect()
}

/// One line of the estimator accuracy table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationRow {
    pub truth: Environment,
    pub estimate: EstimatorState,
    /// Relative temperature error (%).
    pub temperature_error: f64,
    /// Relative irradiance error (%).
    pub irradiance_error: f64,
}

/// Estimates each case from a noiseless pair at `fractions` of its
/// open-circuit voltage.
pub fn estimation_report(
    pv: &PvArrayParams,
    cases: &[Environment],
    fractions: (f64, f64),
    init: &EstimatorState,
    cfg: &EstimatorConfig,
) -> Result<Vec<EstimationRow>> {
    cases
        .iter()
        .map(|truth| {
            let voc = open_circuit_voltage(pv, truth)?;
            let pair = MeasurementPair::synthesize(pv, truth, fractions.0 * voc, fractions.1 * voc)?;
            let est = estimate(pv, &pair, init, cfg)?;
            Ok(EstimationRow {
                truth: *truth,
                estimate: est,
                temperature_error: 100.0 * (est.temperature - truth.temperature).abs() / truth.temperature,
                irradiance_error: 100.0 * (est.irradiance - truth.irradiance).abs() / truth.irradiance,
            })
        })
        .collect()
}
