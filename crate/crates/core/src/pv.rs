//! Single-diode PV array model.
//!
//! The array current solves the implicit relation
//!
//! ```text
//! i = n_p I_g - n_p I_s (exp(q (v + i R_s) / (n_s p K T)) - 1) - (v + i R_s) / R_sh
//! ```
//!
//! with the photo current `I_g(T, λ)` linear in irradiance and the saturation
//! current `I_s(T)` following the cubic/bandgap temperature law. The residual
//! is strictly decreasing in `i` for `R_s, R_sh > 0`, so a bracketing solver is
//! always safe.

use crate::error::{Error, Result};
use crate::math::{abs, exp};

/// Electron charge (C).
pub const ELECTRON_CHARGE: f64 = 1.6e-19;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.38e-23;
/// Silicon bandgap (eV).
pub const BANDGAP_EV: f64 = 1.1;

/// Physical constants and panel parameters of the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvArrayParams {
    /// Reference cell temperature (K).
    pub t_ref: f64,
    /// Reference irradiance (W/m²).
    pub irr_ref: f64,
    /// Diode ideality factor.
    pub ideality: f64,
    /// Reverse saturation current at `t_ref` (A).
    pub i_sat_ref: f64,
    /// Short-circuit current at STC (A).
    pub i_sc: f64,
    /// Short-circuit current temperature coefficient (A/K).
    pub k_i: f64,
    /// Array series resistance (Ω).
    pub r_s: f64,
    /// Array shunt resistance (Ω).
    pub r_sh: f64,
    pub n_series: u32,
    pub n_parallel: u32,
    pub q: f64,
    pub k_b: f64,
    pub e_gap: f64,
}

impl PvArrayParams {
    /// Small 36-cell module used by the single-converter MPPT study.
    ///
    /// `k_i` is not part of that parameter table; 0.01 A/K is an assumed
    /// value (see README).
    pub const fn module_36cell() -> Self {
        Self {
            t_ref: 298.0,
            irr_ref: 1000.0,
            ideality: 1.0,
            i_sat_ref: 1.37e-8,
            i_sc: 4.8,
            k_i: 0.01,
            r_s: 0.2,
            r_sh: 150.0,
            n_series: 36,
            n_parallel: 1,
            q: ELECTRON_CHARGE,
            k_b: BOLTZMANN,
            e_gap: BANDGAP_EV,
        }
    }

    /// Kyocera KC200GT (54 cells): 32.9 V open circuit, 8.21 A short circuit,
    /// 26.3 V / 7.61 A at the maximum power point.
    pub const fn kc200gt() -> Self {
        Self {
            t_ref: 298.0,
            irr_ref: 1000.0,
            ideality: 1.3,
            i_sat_ref: 9.825e-8,
            i_sc: 8.21,
            k_i: 0.003_18,
            r_s: 0.221,
            r_sh: 415.405,
            n_series: 54,
            n_parallel: 1,
            q: ELECTRON_CHARGE,
            k_b: BOLTZMANN,
            e_gap: BANDGAP_EV,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_ref > 0.0
            && self.irr_ref > 0.0
            && self.ideality >= 1.0
            && self.r_s >= 0.0
            && self.r_sh > 0.0
            && self.i_sc > 0.0
            && self.i_sat_ref > 0.0
            && self.n_series >= 1
            && self.n_parallel >= 1
            && self.q > 0.0
            && self.k_b > 0.0
            && self.k_i.is_finite()
            && self.e_gap.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("PV array parameters out of range"))
        }
    }

    fn np(&self) -> f64 {
        self.n_parallel as f64
    }

    /// `q / (n_s p K T)`, the inverse thermal voltage of the series string.
    fn inv_thermal_voltage(&self, t: f64) -> f64 {
        self.q / (self.n_series as f64 * self.ideality * self.k_b * t)
    }
}

impl Default for PvArrayParams {
    fn default() -> Self {
        Self::module_36cell()
    }
}

/// Cell temperature and irradiance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    /// Cell temperature (K).
    pub temperature: f64,
    /// Irradiance (W/m²).
    pub irradiance: f64,
}

impl Environment {
    pub const fn new(temperature: f64, irradiance: f64) -> Self {
        Self {
            temperature,
            irradiance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature > 0.0 && self.irradiance >= 0.0 && self.irradiance.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput("environment needs T > 0 and irradiance >= 0"))
        }
    }
}

/// A terminal voltage/current pair; `power` is always `v * i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub v: f64,
    pub i: f64,
    pub power: f64,
}

impl OperatingPoint {
    pub fn new(v: f64, i: f64) -> Self {
        Self { v, i, power: v * i }
    }
}

/// Photo-generated current of a single cell string, `(I_sc + k_I (T - T_r)) λ / λ_r`.
pub fn photo_current(params: &PvArrayParams, env: &Environment) -> f64 {
    (params.i_sc + params.k_i * (env.temperature - params.t_ref)) * env.irradiance / params.irr_ref
}

/// Reverse saturation current `I_r (T/T_r)^3 exp(q E_gp (1/T_r - 1/T) / (p K))`.
pub fn saturation_current(params: &PvArrayParams, t: f64) -> f64 {
    let ratio = t / params.t_ref;
    let activation = params.q * params.e_gap / (params.ideality * params.k_b);
    params.i_sat_ref * ratio * ratio * ratio * exp(activation * (1.0 / params.t_ref - 1.0 / t))
}

/// `dI_s/dT = I_s (3/T + q E_gp / (p K T^2))`.
pub fn saturation_current_dt(params: &PvArrayParams, t: f64) -> f64 {
    let activation = params.q * params.e_gap / (params.ideality * params.k_b);
    saturation_current(params, t) * (3.0 / t + activation / (t * t))
}

/// Temperature-dependent terms that do not depend on the operating point.
#[derive(Debug, Clone, Copy)]
struct Cell {
    photo: f64,
    sat: f64,
    inv_vt: f64,
}

impl Cell {
    fn new(params: &PvArrayParams, env: &Environment) -> Self {
        Self {
            photo: photo_current(params, env),
            sat: saturation_current(params, env.temperature),
            inv_vt: params.inv_thermal_voltage(env.temperature),
        }
    }

    /// Residual `f(i)` and its derivative `df/di`.
    fn residual(&self, params: &PvArrayParams, v: f64, i: f64) -> (f64, f64) {
        let np = params.np();
        let vd = v + i * params.r_s;
        let e = exp(self.inv_vt * vd);
        let f = np * self.photo - np * self.sat * (e - 1.0) - vd / params.r_sh - i;
        let df = -np * self.sat * self.inv_vt * params.r_s * e - params.r_s / params.r_sh - 1.0;
        (f, df)
    }
}

/// Residual of the implicit I-V relation at `(v, i)`; zero on the curve.
pub fn iv_residual(params: &PvArrayParams, env: &Environment, v: f64, i: f64) -> f64 {
    Cell::new(params, env).residual(params, v, i).0
}

/// Array current at terminal voltage `v_pv`.
///
/// Newton steps are taken inside a sign-change bracket and replaced by
/// bisection whenever they leave it, so the iteration cannot diverge. The
/// bracket starts at `[-n_p I_g - 1, n_p I_g + 1]` and is widened
/// geometrically if the residual does not change sign there.
pub fn pv_current(params: &PvArrayParams, env: &Environment, v_pv: f64) -> Result<f64> {
    if !v_pv.is_finite() {
        return Err(Error::InvalidInput("non-finite PV voltage"));
    }
    let cell = Cell::new(params, env);
    solve_current(params, &cell, v_pv)
}

fn solve_current(params: &PvArrayParams, cell: &Cell, v: f64) -> Result<f64> {
    let span = params.np() * abs(cell.photo) + 1.0;
    let (mut lo, mut hi) = (-span, span);
    let (mut f_lo, _) = cell.residual(params, v, lo);
    let (mut f_hi, _) = cell.residual(params, v, hi);
    let mut widen = 0;
    // f is decreasing in i: need f(lo) > 0 > f(hi)
    while !(f_lo >= 0.0 && f_hi <= 0.0) {
        widen += 1;
        if widen > 60 {
            return Err(Error::NoBracket { voltage: v });
        }
        if f_lo < 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo *= 4.0;
            f_lo = cell.residual(params, v, lo).0;
        } else {
            lo = hi;
            f_lo = f_hi;
            hi *= 4.0;
            f_hi = cell.residual(params, v, hi).0;
        }
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }

    // Start Newton from the short-circuit side: the diode term is small there.
    let mut i = if 0.0 > lo && 0.0 < hi {
        params.np() * cell.photo
    } else {
        0.5 * (lo + hi)
    };
    if !(i > lo && i < hi) {
        i = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let (f, df) = cell.residual(params, v, i);
        if f == 0.0 {
            return Ok(i);
        }
        if f > 0.0 {
            lo = i;
        } else {
            hi = i;
        }
        let newton = i - f / df;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = abs(next - i);
        i = next;
        if step <= 1e-15 * (1.0 + abs(i)) || hi - lo <= 1e-15 * (1.0 + abs(i)) {
            return Ok(i);
        }
    }
    Ok(i)
}

/// Partial derivatives of the array current with respect to temperature
/// (A/K) and irradiance (A·m²/W) at an on-curve operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivities {
    pub d_temperature: f64,
    pub d_irradiance: f64,
}

/// Closed-form implicit derivatives of the I-V relation.
///
/// Both partials share the denominator `1 + n_p I_s a R_s e^{a(v + i R_s)} + R_s/R_sh`
/// with `a = q / (n_s p K T)`; the temperature partial also carries the
/// `dI_s/dT` term and the explicit `1/T` dependence of the exponent.
pub fn pv_current_sensitivities(
    params: &PvArrayParams,
    env: &Environment,
    op: &OperatingPoint,
) -> Result<Sensitivities> {
    let cell = Cell::new(params, env);
    let (residual, df_di) = cell.residual(params, op.v, op.i);
    if !(abs(residual) <= 1e-6) {
        return Err(Error::OffCurve { residual });
    }
    let np = params.np();
    let t = env.temperature;
    let vd = op.v + op.i * params.r_s;
    let e = exp(cell.inv_vt * vd);
    let denom = -df_di;

    let d_photo_dt = params.k_i * env.irradiance / params.irr_ref;
    let df_dt =
        np * d_photo_dt - np * saturation_current_dt(params, t) * (e - 1.0) + np * cell.sat * e * cell.inv_vt * vd / t;
    let df_dirr = np * (params.i_sc + params.k_i * (t - params.t_ref)) / params.irr_ref;

    Ok(Sensitivities {
        d_temperature: df_dt / denom,
        d_irradiance: df_dirr / denom,
    })
}

/// Open-circuit voltage: the `v` at which the array current is zero.
pub fn open_circuit_voltage(params: &PvArrayParams, env: &Environment) -> Result<f64> {
    let cell = Cell::new(params, env);
    if cell.photo <= 0.0 {
        return Ok(0.0);
    }
    let current = |v: f64| solve_current(params, &cell, v);
    let mut hi = params.n_series as f64;
    let mut guard = 0;
    while current(hi)? > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 40 {
            return Err(Error::NoBracket { voltage: hi });
        }
    }
    let mut lo = 0.0;
    // i(v) is smooth and decreasing; bisection to full precision is cheap here.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if current(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A solved I-V curve for one environment, with its open-circuit voltage cached.
#[derive(Debug, Clone, Copy)]
pub struct PvCurve {
    params: PvArrayParams,
    env: Environment,
    cell: Cell,
    v_oc: f64,
}

impl PvCurve {
    pub fn new(params: &PvArrayParams, env: &Environment) -> Result<Self> {
        params.validate()?;
        env.validate()?;
        Ok(Self {
            params: *params,
            env: *env,
            cell: Cell::new(params, env),
            v_oc: open_circuit_voltage(params, env)?,
        })
    }

    pub fn environment(&self) -> Environment {
        self.env
    }

    pub fn v_oc(&self) -> f64 {
        self.v_oc
    }

    pub fn current(&self, v: f64) -> Result<f64> {
        solve_current(&self.params, &self.cell, v)
    }

    pub fn power(&self, v: f64) -> Result<f64> {
        Ok(v * self.current(v)?)
    }

    /// Number of sign changes of `dP/dV` over an `n`-point sweep of `[0, V_oc]`.
    pub fn slope_sign_changes(&self, n: usize) -> Result<usize> {
        let mut changes = 0;
        let mut prev_power = self.power(0.0)?;
        let mut prev_sign = 0.0;
        for k in 1..n {
            let v = self.v_oc * k as f64 / (n - 1) as f64;
            let p = self.power(v)?;
            let d = p - prev_power;
            if d != 0.0 {
                let s = if d > 0.0 { 1.0 } else { -1.0 };
                if prev_sign != 0.0 && s != prev_sign {
                    changes += 1;
                }
                prev_sign = s;
            }
            prev_power = p;
        }
        Ok(changes)
    }

    /// Maximum power point.
    ///
    /// A 256-point sweep locates the peak cell, then golden-section search
    /// refines it inside the neighbouring cells to well below 1 mV.
    pub fn mpp(&self) -> Result<OperatingPoint> {
        const COARSE: usize = 256;
        let step = self.v_oc / (COARSE - 1) as f64;
        let mut best = (0usize, f64::NEG_INFINITY);
        for k in 0..COARSE {
            let p = self.power(k as f64 * step)?;
            if p > best.1 {
                best = (k, p);
            }
        }
        let mut a = step * best.0.saturating_sub(1) as f64;
        let mut b = (step * (best.0 + 1) as f64).min(self.v_oc);

        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut pc = self.power(c)?;
        let mut pd = self.power(d)?;
        while b - a > 1e-9 {
            if pc > pd {
                b = d;
                d = c;
                pd = pc;
                c = b - INV_PHI * (b - a);
                pc = self.power(c)?;
            } else {
                a = c;
                c = d;
                pc = pd;
                d = a + INV_PHI * (b - a);
                pd = self.power(d)?;
            }
        }
        let v = 0.5 * (a + b);
        Ok(OperatingPoint::new(v, self.current(v)?))
    }
}

/// Maximum power point of the array for `env` (requires irradiance > 0).
pub fn find_mpp(params: &PvArrayParams, env: &Environment) -> Result<OperatingPoint> {
    if !(env.irradiance > 0.0) {
        return Err(Error::InvalidInput("maximum power point needs irradiance > 0"));
    }
    PvCurve::new(params, env)?.mpp()
}
