//! State-space-averaged converter models and steady-state reference generation.
//!
//! Two plants are modelled: a PV-fed boost converter with a resistive load
//! (three states), and the PV + battery microgrid with a boost converter on
//! the PV side and a bidirectional converter on the battery side (six states).

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::pv::OperatingPoint;

/// Boost converter between the PV array and a resistive load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    /// Inductance (H).
    pub l: f64,
    /// Inductor resistance (Ω).
    pub r: f64,
    /// PV-side capacitance (F).
    pub c_in: f64,
    /// Output capacitance (F).
    pub c_out: f64,
    /// Diode forward drop (V).
    pub v_diode: f64,
    /// Load resistance (Ω).
    pub r_load: f64,
}

impl BoostParams {
    /// Circuit values of the single-converter MPPT study. The load resistance
    /// is not part of that table; 20 Ω keeps every MPP duty inside (0, 1).
    pub const fn single_stage() -> Self {
        Self {
            l: 5e-3,
            r: 0.2,
            c_in: 200e-6,
            c_out: 200e-6,
            v_diode: 0.6,
            r_load: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.l, self.r, self.c_in, self.c_out, self.v_diode, self.r_load];
        if all.iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("boost parameters must be positive"))
        }
    }
}

/// Inductor current, PV voltage and output voltage of the boost stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoostState {
    pub i_l: f64,
    pub v_pv: f64,
    pub v_o: f64,
}

impl BoostState {
    pub fn to_array(self) -> [f64; 3] {
        [self.i_l, self.v_pv, self.v_o]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self {
            i_l: x[0],
            v_pv: x[1],
            v_o: x[2],
        }
    }
}

/// Time derivative of the averaged boost model for duty `u` and PV current `i_pv`.
pub fn boost_derivatives(params: &BoostParams, state: &BoostState, i_pv: f64, u: f64) -> BoostState {
    let BoostState { i_l, v_pv, v_o } = *state;
    BoostState {
        i_l: (v_pv - params.r * i_l - params.v_diode - v_o) / params.l + (params.v_diode + v_o) * u / params.l,
        v_pv: (i_pv - i_l) / params.c_in,
        v_o: (i_l - v_o / params.r_load) / params.c_out - i_l * u / params.c_out,
    }
}

/// Steady-state boost references for a desired PV operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostRefs {
    pub i_l: f64,
    pub v_o: f64,
    pub duty: f64,
}

/// Output voltage that balances the boost stage at `(v_pvr, i_pvr)`:
/// the positive root of `v_o^2 + V_D v_o - i_pvr R_ld (v_pvr - r i_pvr) = 0`.
pub fn boost_output_voltage(v_pvr: f64, i_pvr: f64, params: &BoostParams) -> Result<f64> {
    let disc = params.v_diode * params.v_diode + 4.0 * i_pvr * params.r_load * (v_pvr - params.r * i_pvr);
    if !(disc >= 0.0) {
        return Err(Error::InfeasibleOperatingPoint);
    }
    Ok((-params.v_diode + sqrt(disc)) / 2.0)
}

/// Inductor current, output voltage and duty holding the PV array at `(v_pvr, i_pvr)`.
pub fn boost_steady_refs(v_pvr: f64, i_pvr: f64, params: &BoostParams) -> Result<BoostRefs> {
    let v_o = boost_output_voltage(v_pvr, i_pvr, params)?;
    let duty = 1.0 - (v_pvr - i_pvr * params.r) / (params.v_diode + v_o);
    if !(duty > 0.0 && duty < 1.0) {
        return Err(Error::InfeasibleOperatingPoint);
    }
    Ok(BoostRefs { i_l: i_pvr, v_o, duty })
}

/// Passive components of the PV + battery microgrid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpvdgParams {
    /// PV input capacitor (F).
    pub c_pvi: f64,
    /// PV converter output capacitor (F).
    pub c_pvo: f64,
    /// Battery converter output capacitor (F).
    pub c_bo: f64,
    /// DC bus capacitor (F).
    pub c_bus: f64,
    /// PV converter inductance (H).
    pub l_pv: f64,
    /// Battery converter inductance (H).
    pub l_b: f64,
    pub r_pv: f64,
    pub r_b: f64,
    /// Coupling resistance PV converter -> bus (Ω).
    pub r_pvo: f64,
    /// Coupling resistance battery converter -> bus (Ω).
    pub r_bo: f64,
}

impl SpvdgParams {
    /// 200 W KC200GT array, 24 V battery, 40 V bus. The bus capacitance is not
    /// listed with the other components; 3 mF matches the other capacitors.
    pub const fn kc200gt_bus() -> Self {
        Self {
            c_pvi: 3e-3,
            c_pvo: 3e-3,
            c_bo: 3e-3,
            c_bus: 3e-3,
            l_pv: 10e-3,
            l_b: 10e-3,
            r_pv: 0.5,
            r_b: 0.5,
            r_pvo: 0.1,
            r_bo: 0.1,
        }
    }

    /// 64 W module, 15 V battery, 20 V bus. Only C1-C3, L_pv, L_bat and R_bat
    /// are specified for this system; the remaining values are assumptions
    /// (PV inductor resistance 0.05 Ω, coupling resistors 0.1 Ω, bus 500 µF).
    pub const fn small_bus() -> Self {
        Self {
            c_pvi: 100e-6,
            c_pvo: 500e-6,
            c_bo: 100e-6,
            c_bus: 500e-6,
            l_pv: 0.35e-3,
            l_b: 0.3e-3,
            r_pv: 0.05,
            r_b: 0.3,
            r_pvo: 0.1,
            r_bo: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.c_pvi, self.c_pvo, self.c_bo, self.c_bus, self.l_pv, self.l_b, self.r_pv, self.r_b, self.r_pvo,
            self.r_bo,
        ];
        if all.iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("microgrid parameters must be positive"))
        }
    }

    /// Energy-storage weights `[C_pvi, C_pvo, L_pv, L_b, C_bo, C_bus]`, one per state.
    pub fn storage_weights(&self) -> [f64; 6] {
        [self.c_pvi, self.c_pvo, self.l_pv, self.l_b, self.c_bo, self.c_bus]
    }
}

/// The six averaged states.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpvdgState {
    /// PV input capacitor voltage (V).
    pub x1: f64,
    /// PV converter output capacitor voltage (V).
    pub x2: f64,
    /// PV inductor current (A).
    pub x3: f64,
    /// Battery inductor current (A), positive when discharging.
    pub x4: f64,
    /// Battery converter output capacitor voltage (V).
    pub x5: f64,
    /// DC bus voltage (V).
    pub x6: f64,
}

impl SpvdgState {
    pub fn to_array(self) -> [f64; 6] {
        [self.x1, self.x2, self.x3, self.x4, self.x5, self.x6]
    }

    pub fn from_array(x: [f64; 6]) -> Self {
        Self {
            x1: x[0],
            x2: x[1],
            x3: x[2],
            x4: x[3],
            x5: x[4],
            x6: x[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Exogenous inputs: PV source current, battery EMF, load admittance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbances {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Disturbances {
    pub fn validate(&self) -> Result<()> {
        if self.d2 > 0.0 && self.d3 >= 0.0 && self.d1.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput("disturbances need d2 > 0 and d3 >= 0"))
        }
    }
}

/// Averaged six-state microgrid dynamics for duties `u1` (PV boost) and `u2`
/// (battery converter).
pub fn spvdg_derivatives(p: &SpvdgParams, x: &SpvdgState, d: &Disturbances, u1: f64, u2: f64) -> SpvdgState {
    let SpvdgState { x1, x2, x3, x4, x5, x6 } = *x;
    SpvdgState {
        x1: (d.d1 - x3) / p.c_pvi,
        x2: x3 / p.c_pvo - x2 / (p.r_pvo * p.c_pvo) + x6 / (p.r_pvo * p.c_pvo) - x3 * u1 / p.c_pvo,
        x3: x1 / p.l_pv - x2 / p.l_pv - x3 * p.r_pv / p.l_pv + x2 * u1 / p.l_pv,
        x4: d.d2 / p.l_b - x4 * p.r_b / p.l_b - x5 / p.l_b + x5 * u2 / p.l_b,
        x5: x4 / p.c_bo - x5 / (p.r_bo * p.c_bo) + x6 / (p.r_bo * p.c_bo) - x4 * u2 / p.c_bo,
        x6: x2 / (p.c_bus * p.r_pvo) + x5 / (p.c_bus * p.r_bo) - x6 / p.c_bus * (1.0 / p.r_pvo + 1.0 / p.r_bo + d.d3),
    }
}

/// Equilibrium references for all six states plus the duties that hold them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSet {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
    pub x5: f64,
    pub x6: f64,
    pub u1: f64,
    pub u2: f64,
}

impl RefSet {
    pub fn state(&self) -> SpvdgState {
        SpvdgState {
            x1: self.x1,
            x2: self.x2,
            x3: self.x3,
            x4: self.x4,
            x5: self.x5,
            x6: self.x6,
        }
    }
}

/// Secondary-level references for bus voltage `v_dc`, PV maximum power point
/// `mpp`, battery EMF `d2` and load admittance `d3`.
///
/// With `x1`, `x3` and `x6` pinned, zeroing the PV-side equations eliminates
/// `u1` and leaves `x2^2 - x6 x2 + R_pvo x3 (R_pv x3 - x1) = 0`; the bus
/// equation gives `x5`; zeroing the battery-side equations eliminates `u2`
/// and leaves `R_b R_bo x4^2 - R_bo d2 x4 + x5 (x5 - x6) = 0`. The PV root is
/// the `+` branch (`x2 > x6` while the array exports power); the battery root
/// is the branch continuous through `x4 = 0` (the other one shorts the
/// battery through `R_b`). Duties follow from `dx3/dt = 0` and `dx4/dt = 0`.
pub fn generate_references(p: &SpvdgParams, v_dc: f64, mpp: &OperatingPoint, d2: f64, d3: f64) -> Result<RefSet> {
    if !(v_dc > 0.0) {
        return Err(Error::InfeasibleReferences("bus voltage must be positive"));
    }
    let x6 = v_dc;
    let x1 = mpp.v;
    let x3 = mpp.i;

    let (a1, b1, c1) = (1.0, -x6, x3 * x3 * p.r_pvo * p.r_pv - x1 * x3 * p.r_pvo);
    let disc1 = b1 * b1 - 4.0 * a1 * c1;
    if !(disc1 >= 0.0) {
        return Err(Error::InfeasibleReferences("PV-side discriminant is negative"));
    }
    let x2 = (-b1 + sqrt(disc1)) / (2.0 * a1);

    let x5 = -p.r_bo / p.r_pvo * x2 + x6 * (1.0 + p.r_bo / p.r_pvo + p.r_bo * d3);

    let (a2, b2, c2) = (p.r_b * p.r_bo, -p.r_bo * d2, x5 * x5 - x5 * x6);
    let disc2 = b2 * b2 - 4.0 * a2 * c2;
    if !(disc2 >= 0.0) {
        return Err(Error::InfeasibleReferences("battery-side discriminant is negative"));
    }
    // (-b - sqrt(disc)) / 2a written in the cancellation-free form 2c / (-b + sqrt(disc)).
    let x4 = 2.0 * c2 / (-b2 + sqrt(disc2));

    if !(x2 > 0.0 && x5 > 0.0 && x1 > 0.0) {
        return Err(Error::InfeasibleReferences("negative capacitor voltage"));
    }
    let u1 = 1.0 - (x1 - p.r_pv * x3) / x2;
    let u2 = 1.0 - (d2 - p.r_b * x4) / x5;
    if !(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0) {
        return Err(Error::InfeasibleReferences("steady duty outside (0, 1)"));
    }
    Ok(RefSet {
        x1,
        x2,
        x3,
        x4,
        x5,
        x6,
        u1,
        u2,
    })
}

/// Ohmic losses `R_pv x3^2 + R_b x4^2 + (x2-x6)^2/R_pvo + (x5-x6)^2/R_bo`.
pub fn resistive_losses(p: &SpvdgParams, x: &SpvdgState) -> f64 {
    let a = x.x2 - x.x6;
    let b = x.x5 - x.x6;
    p.r_pv * x.x3 * x.x3 + p.r_b * x.x4 * x.x4 + a * a / p.r_pvo + b * b / p.r_bo
}

/// Rate of change of the stored energy `Σ ½ C v^2 + ½ L i^2`.
pub fn stored_energy_rate(p: &SpvdgParams, x: &SpvdgState, dx: &SpvdgState) -> f64 {
    let w = p.storage_weights();
    let xs = x.to_array();
    let ds = dx.to_array();
    (0..6).map(|k| w[k] * xs[k] * ds[k]).sum()
}
