//! Fixed-step co-simulation of plant, controller and observers.

mod metrics;
mod run;
mod schedule;

pub use metrics::{
    estimation_report, power_balance, segment_reports, settling_time, settling_time_abs, EstimationRow, SegmentReport,
    Signal,
};
pub use run::{run_scenario, ControllerKind, D1Mode, RefSource, ScenarioParams, SimConfig};
pub use schedule::{Conditions, Schedule, Segment};

use alloc::vec::Vec;

use crate::control::feedforward::EstimateEvent;
use crate::error::{Error, Result};
use crate::pv::Environment;

/// Classical fourth-order Runge-Kutta step of `dx/dt = f(x)`.
///
/// Inputs such as duties are whatever `f` captures, so they are held for the
/// whole step. Fails with [`Error::NonFinite`] (time left at 0 for the caller
/// to fill in) if the result is not finite.
pub fn rk4_step<const N: usize, F>(mut f: F, x: &[f64; N], dt: f64) -> Result<[f64; N]>
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive"));
    }
    let add = |a: &[f64; N], k: &[f64; N], h: f64| {
        let mut out = *a;
        for (o, k) in out.iter_mut().zip(k) {
            *o += h * k;
        }
        out
    };
    let k1 = f(x);
    let k2 = f(&add(x, &k1, 0.5 * dt));
    let k3 = f(&add(x, &k2, 0.5 * dt));
    let k4 = f(&add(x, &k3, dt));
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { time: 0.0 })
    }
}

/// One recorded sample. For the boost plant `x1`, `x3` and `x6` carry the PV
/// voltage, inductor current and output voltage; the other states are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: [f64; 6],
    pub u: [f64; 2],
    /// True disturbances `(d1, d2, d3)`.
    pub d: [f64; 3],
    pub d_hat: Option<[f64; 3]>,
    /// References in force (same layout as `x`).
    pub refs: [f64; 6],
    pub p_pv: f64,
    pub p_batt: f64,
    pub p_load: f64,
    pub p_loss: f64,
    /// A denominator guard fired since the previous sample.
    pub guard: bool,
    /// A duty was clipped to `[0, 1]` since the previous sample.
    pub saturated: bool,
}

/// Estimator run in the boost scenario together with the truth at that time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    pub event: EstimateEvent,
    pub truth: Environment,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub samples: Vec<Sample>,
    /// Schedule event times inside the run.
    pub events: Vec<f64>,
    pub duration: f64,
    pub estimates: Vec<EstimateRecord>,
    pub guard_events: u64,
}

impl Trace {
    /// Index of the sample closest to `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        if self.samples.is_empty() {
            return None;
        }
        let k = self.samples.partition_point(|s| s.t < t);
        if k == 0 {
            return Some(0);
        }
        if k == self.samples.len() {
            return Some(k - 1);
        }
        if (self.samples[k].t - t).abs() < (t - self.samples[k - 1].t).abs() {
            Some(k)
        } else {
            Some(k - 1)
        }
    }

    /// End of the segment containing `t`: the next event or the trace end.
    pub fn segment_end(&self, t: f64) -> f64 {
        self.events
            .iter()
            .copied()
            .find(|e| *e > t + 1e-12)
            .unwrap_or(self.duration)
    }
}
