//! Perturbation of the PV boost duty driven by the battery converter duty.
//!
//! The battery converter duty reacts to the PV power reaching the bus: in
//! buck (charge) mode more PV power means a larger buck duty, in boost
//! (discharge) mode a smaller boost duty. Comparing the sign of the last PV
//! duty step with the sign of the resulting battery duty step therefore
//! tells whether the step increased PV power.

use crate::error::{Error, Result};
use crate::math::signum;

use super::pi::BdcMode;

/// Direction for the next PV duty step: `+1` keeps the last direction,
/// `-1` reverses it. A zero delta counts as positive.
pub fn perturb_decision(d_dpv: f64, d_db: f64, mode: BdcMode) -> f64 {
    let product = signum(d_dpv) * signum(d_db);
    match mode {
        BdcMode::Charge => product,
        BdcMode::Discharge => -product,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbState {
    pub d_pv: f64,
    pub d_pv_old: f64,
    pub d_b: f64,
    pub d_b_old: f64,
    pub d_bp: f64,
    pub d_bp_old: f64,
    pub mode: BdcMode,
    pub del_d: f64,
    pub period: f64,
    /// Time of the next perturbation.
    pub next_at: f64,
}

impl PerturbState {
    pub fn new(d_pv: f64, del_d: f64, period: f64) -> Result<Self> {
        if !(del_d > 0.0 && period > 0.0 && (0.0..=1.0).contains(&d_pv)) {
            return Err(Error::InvalidInput(
                "perturbation needs del_d > 0, period > 0, duty in [0, 1]",
            ));
        }
        Ok(Self {
            d_pv,
            // the first step goes upward
            d_pv_old: (d_pv - del_d).max(0.0),
            d_b: 0.0,
            d_b_old: 0.0,
            d_bp: 0.0,
            d_bp_old: 0.0,
            mode: BdcMode::Discharge,
            del_d,
            period,
            next_at: period,
        })
    }

    /// Records the latest battery converter duties.
    pub fn observe(&mut self, d_b: f64, d_bp: f64, mode: BdcMode) {
        self.d_b = d_b;
        self.d_bp = d_bp;
        self.mode = mode;
    }
}

/// Advances the perturbation at period boundaries; between them the state
/// is returned unchanged.
pub fn perturb_step(st: &PerturbState, now: f64) -> (PerturbState, f64) {
    if now + 1e-12 < st.next_at {
        return (*st, st.d_pv);
    }
    let mut next = *st;
    let d_dpv = st.d_pv - st.d_pv_old;
    let d_bat = match st.mode {
        BdcMode::Charge => st.d_bp - st.d_bp_old,
        BdcMode::Discharge => st.d_b - st.d_b_old,
    };
    let last_dir = signum(d_dpv);
    let dir = last_dir * perturb_decision(d_dpv, d_bat, st.mode);
    next.d_pv_old = st.d_pv;
    next.d_pv = (st.d_pv + dir * st.del_d).clamp(0.0, 1.0);
    next.d_b_old = st.d_b;
    next.d_bp_old = st.d_bp;
    while next.next_at <= now + 1e-12 {
        next.next_at += st.period;
    }
    (next, next.d_pv)
}
