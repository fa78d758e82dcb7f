//! Estimator-driven MPPT for the single-stage boost converter.
//!
//! Every `delta_t` the latest PV operating point is compared with the one
//! sampled before. If it moved by more than `min_change`, the two points are
//! treated as a measurement pair on one curve, `(T, λ)` is re-estimated, and
//! the duty is set to the steady-state value that parks the array at the MPP
//! of the estimated curve.

use crate::error::Result;
use crate::estimator::{estimate, EstimatorConfig, EstimatorState, MeasurementPair};
use crate::plant::{boost_steady_refs, BoostParams};
use crate::pv::{find_mpp, OperatingPoint, PvArrayParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedforwardMppt {
    pub cfg: EstimatorConfig,
    pub estimate: EstimatorState,
    pub duty: f64,
    pub last_sample: Option<OperatingPoint>,
    pub next_at: f64,
    /// Count of estimates that failed (the duty is then left unchanged).
    pub failures: u64,
}

/// One estimator run, reported for tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateEvent {
    pub time: f64,
    pub estimate: EstimatorState,
    pub duty: f64,
}

impl FeedforwardMppt {
    /// Starts from the operating point that is optimal for `initial`.
    pub fn new(pv: &PvArrayParams, boost: &BoostParams, cfg: EstimatorConfig, initial: EstimatorState) -> Result<Self> {
        cfg.validate()?;
        let mpp = find_mpp(pv, &initial.environment())?;
        let refs = boost_steady_refs(mpp.v, mpp.i, boost)?;
        Ok(Self {
            cfg,
            estimate: initial,
            duty: refs.duty,
            last_sample: None,
            next_at: 0.0,
            failures: 0,
        })
    }

    /// Feeds the measured PV operating point at time `now` and returns the
    /// duty to hold, plus the estimate if one was made on this call.
    pub fn update(
        &mut self,
        pv: &PvArrayParams,
        boost: &BoostParams,
        now: f64,
        measured: OperatingPoint,
    ) -> (f64, Option<EstimateEvent>) {
        if now + 1e-12 < self.next_at {
            return (self.duty, None);
        }
        while self.next_at <= now + 1e-12 {
            self.next_at += self.cfg.delta_t;
        }
        let prev = self.last_sample.replace(measured);
        let Some(prev) = prev else {
            return (self.duty, None);
        };
        if !crate::estimator::should_reestimate(&prev, &measured, self.cfg.min_change) {
            return (self.duty, None);
        }
        match self.solve(pv, boost, prev, measured) {
            Ok((est, duty)) => {
                self.estimate = est;
                self.duty = duty;
                (
                    duty,
                    Some(EstimateEvent {
                        time: now,
                        estimate: est,
                        duty,
                    }),
                )
            }
            Err(_) => {
                self.failures += 1;
                (self.duty, None)
            }
        }
    }

    fn solve(
        &self,
        pv: &PvArrayParams,
        boost: &BoostParams,
        a: OperatingPoint,
        b: OperatingPoint,
    ) -> Result<(EstimatorState, f64)> {
        let pair = MeasurementPair::new(a, b)?;
        let est = estimate(pv, &pair, &self.estimate, &self.cfg)?;
        let mpp = find_mpp(pv, &est.environment())?;
        let refs = boost_steady_refs(mpp.v, mpp.i, boost)?;
        Ok((est, refs.duty))
    }
}
