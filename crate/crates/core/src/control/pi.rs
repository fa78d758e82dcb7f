//! Cascaded bus-voltage / inductor-current PI loops for the battery converter.
//!
//! Both loops are discrete and sum-based: each tick adds the current error
//! to the accumulator, and the output is `Kp e + Ki Σe`. The sign of the
//! current reference selects the converter mode.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

/// Gains of both loops plus the execution period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualLoopGains {
    pub voltage: PiGains,
    pub current: PiGains,
    /// Loop period (s).
    pub period: f64,
    /// Bound on the inductor current reference (A).
    pub i_ref_limit: f64,
}

impl Default for DualLoopGains {
    fn default() -> Self {
        Self {
            voltage: PiGains { kp: 0.2, ki: 0.1 },
            current: PiGains { kp: 0.2, ki: 0.01 },
            period: 2e-4,
            i_ref_limit: 20.0,
        }
    }
}

impl DualLoopGains {
    pub fn validate(&self) -> Result<()> {
        let g = [self.voltage.kp, self.voltage.ki, self.current.kp, self.current.ki];
        if self.period > 0.0 && self.i_ref_limit > 0.0 && g.iter().all(|k| *k >= 0.0) && self.current.ki > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput("PI gains must be non-negative with period > 0"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdcMode {
    /// Buck operation, battery absorbs surplus bus power.
    Charge,
    /// Boost operation, battery supplies the deficit.
    Discharge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiState {
    pub voltage_sum: f64,
    pub current_sum: f64,
    pub mode: BdcMode,
}

impl Default for PiState {
    fn default() -> Self {
        Self {
            voltage_sum: 0.0,
            current_sum: 0.0,
            mode: BdcMode::Discharge,
        }
    }
}

impl PiState {
    /// Integrator values that reproduce `i_ref` and the applied duty `u2`
    /// with zero errors.
    pub fn steady(gains: &DualLoopGains, i_ref: f64, u2: f64) -> Self {
        let (mode, y) = if i_ref < 0.0 {
            (BdcMode::Charge, u2 - 1.0)
        } else {
            (BdcMode::Discharge, u2)
        };
        Self {
            voltage_sum: i_ref / gains.voltage.ki,
            current_sum: y / gains.current.ki,
            mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOutput {
    pub i_ref: f64,
    /// Boost-mode duty (active in discharge).
    pub d_b: f64,
    /// Buck-mode duty (active in charge).
    pub d_bp: f64,
    pub mode: BdcMode,
}

impl PiOutput {
    /// Averaged battery-converter duty: `D_b` in discharge, `1 - D_bp` in charge.
    pub fn plant_duty(&self) -> f64 {
        match self.mode {
            BdcMode::Discharge => self.d_b,
            BdcMode::Charge => 1.0 - self.d_bp,
        }
    }
}

/// One PI step. Accumulators only integrate while their output is unsaturated
/// or the error pulls it back inside. On a mode change the current
/// accumulator is shifted so the averaged duty is continuous.
pub fn dual_loop_pi(vg: f64, v_ref: f64, i_l: f64, gains: &DualLoopGains, st: &PiState) -> (PiOutput, PiState) {
    let mut next = *st;

    let ev = v_ref - vg;
    let lim = gains.i_ref_limit;
    let trial = gains.voltage.kp * ev + gains.voltage.ki * (st.voltage_sum + ev);
    if (trial < lim || ev < 0.0) && (trial > -lim || ev > 0.0) {
        next.voltage_sum += ev;
    }
    let i_ref = (gains.voltage.kp * ev + gains.voltage.ki * next.voltage_sum).clamp(-lim, lim);

    let mode = if i_ref > 0.0 {
        BdcMode::Discharge
    } else if i_ref < 0.0 {
        BdcMode::Charge
    } else {
        st.mode
    };
    if mode != st.mode {
        // discharge applies u2 = y, charge applies u2 = 1 + y
        let shift = match mode {
            BdcMode::Charge => -1.0,
            BdcMode::Discharge => 1.0,
        };
        next.current_sum += shift / gains.current.ki;
    }
    next.mode = mode;

    // y ∈ [0, 1] in discharge (D_b = y) and [-1, 0] in charge (D_bp = -y)
    let (lo, hi) = match mode {
        BdcMode::Discharge => (0.0, 1.0),
        BdcMode::Charge => (-1.0, 0.0),
    };
    next.current_sum = next
        .current_sum
        .clamp(lo / gains.current.ki - 1.0, hi / gains.current.ki + 1.0);
    let ei = i_ref - i_l;
    let trial = gains.current.kp * ei + gains.current.ki * (next.current_sum + ei);
    if (trial < hi || ei < 0.0) && (trial > lo || ei > 0.0) {
        next.current_sum += ei;
    }
    let y = (gains.current.kp * ei + gains.current.ki * next.current_sum).clamp(lo, hi);
    let out = match mode {
        BdcMode::Discharge => PiOutput {
            i_ref,
            d_b: y,
            d_bp: 0.0,
            mode,
        },
        BdcMode::Charge => PiOutput {
            i_ref,
            d_b: 0.0,
            d_bp: -y,
            mode,
        },
    };
    (out, next)
}
