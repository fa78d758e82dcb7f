//! Named scenarios with their parameter tables.

use crate::control::backstep::{BackstepGains, BackstepOptions};
use crate::control::observer::ObserverGains;
use crate::control::pi::DualLoopGains;
use crate::estimator::{EstimatorConfig, EstimatorState};
use crate::plant::{BoostParams, SpvdgParams};
use crate::pv::{Environment, PvArrayParams};
use crate::sim::{ControllerKind, D1Mode, RefSource, ScenarioParams, Schedule, SimConfig};

/// Celsius to kelvin.
pub const fn kelvin(c: f64) -> f64 {
    c + 273.15
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Simulation,
    /// Estimator accuracy table, no time-domain run.
    EstimationTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub kind: PresetKind,
    /// Component table of the underlying system.
    pub table: &'static str,
    pub schedule: Schedule,
    pub params: ScenarioParams,
    pub sim: SimConfig,
}

pub const NAMES: [&str; 9] = [
    "ch2-estimate",
    "ch2-mppt",
    "ch3-unified",
    "ch4-case1",
    "ch4-case2",
    "ch4-case3",
    "ch5-case1",
    "ch5-case2",
    "ch5-case3",
];

pub const CH4_GAINS: BackstepGains = BackstepGains::new(10.0, 0.04, 0.04, 0.04, 0.04, 15.0);
pub const CH5_GAINS: BackstepGains = BackstepGains::new(17.0, 0.04, 0.04, 0.06, 0.06, 19.0);
/// `ρ2` is not tabulated; 1.0 is an assumption.
pub const CH5_OBSERVER: ObserverGains = ObserverGains::new(10.0, 1.0, 0.01);

/// Temperature/irradiance pairs of the single-stage MPP table.
pub const CH2_CASES: [Environment; 4] = [
    Environment::new(298.0, 500.0),
    Environment::new(298.0, 1000.0),
    Environment::new(323.0, 1000.0),
    Environment::new(323.0, 500.0),
];

/// Tabulated MPP `(v, i, p)` for [`CH2_CASES`].
pub const CH2_MPP: [(f64, f64, f64); 4] = [
    (14.4, 2.15, 31.0),
    (14.6, 4.40, 64.2),
    (12.7, 4.52, 57.5),
    (12.3, 2.26, 28.5),
];

const CH2_TABLE: &str = "\
PV array: T_r 298 K, lambda_r 1000 W/m2, p 1, I_r 1.37e-8 A, I_sc 4.8 A, R_s 0.2 ohm, R_sh 150 ohm, n_s 36, n_p 1
Circuit: C_a 200 uF, C_b 200 uF, L 5 mH, r 0.2 ohm, V_d 0.6 V
Controller: f_s 20 kHz, K_c 1.5 (unused), t_o 0.025 s (unused), delta_t 0.05 s
Assumed: k_I 0.010 A/K, R_ld 20 ohm";

const CH3_TABLE: &str = "\
PV array at STC: V_oc 16 V, I_sc 4.8 A, V_mpp 14.6 V, I_mpp 4.4 A (modelled with the single-stage array parameters)
Battery: 15 V
DC/DC converter: C_1 100 uF, C_2 500 uF, L_pv 0.35 mH, f_sw 10 kHz
Bidirectional converter: C_3 100 uF, R_bat 0.3 ohm, L_bat 0.3 mH, f_sw 10 kHz
PI gains: Kp_v 0.2, Ki_v 0.1, Kp_i 0.2, Ki_i 0.01
Assumed: R_pv 0.05 ohm, R_pvo 0.1 ohm, R_bo 0.1 ohm, C_bus 500 uF, delD 0.005, period 0.05 s, PI period 0.2 ms";

const CH4_TABLE: &str = "\
Battery voltage: 24 V
PV array at STC: Kyocera KC200GT, V_oc 32.9 V, I_sc 8.21 A, V_mpp 26.3 V, I_mpp 7.61 A
DC/DC converter: C_pvi 3 mF, C_pvo 3 mF, L_pv 10 mH, R_pv 0.5 ohm, R_pvo 0.1 ohm
Bidirectional converter: C_bo 3 mF, R_b 0.5 ohm, L_b 10 mH, R_bo 0.1 ohm
Back-stepping gains: K1 10, K2 0.04, K3 0.04, K4 0.04, K5 0.04, K6 15.0
Assumed: C_bus 3 mF";

const CH5_TABLE: &str = "\
Battery voltage: 24 V
PV array at STC: Kyocera KC200GT, V_oc 32.9 V, I_sc 8.21 A, V_mpp 26.3 V, I_mpp 7.61 A
DC/DC converter: C_pvi 3 mF, C_pvo 3 mF, L_pv 10 mH, R_pv 0.5 ohm, R_pvo 0.1 ohm
Bidirectional converter: C_bo 3 mF, R_b 0.5 ohm, L_b 10 mH, R_bo 0.1 ohm
Back-stepping gains: K1 17, K2 0.04, K3 0.04, K4 0.06, K5 0.06, K6 19.0
Observer gains: rho1 10, rho3 0.01
Assumed: C_bus 3 mF, rho2 1.0";

/// Shared defaults; each preset overrides what its system differs in.
pub fn base_params() -> ScenarioParams {
    ScenarioParams {
        pv: PvArrayParams::kc200gt(),
        microgrid: SpvdgParams::kc200gt_bus(),
        boost: BoostParams::single_stage(),
        bus_voltage: 40.0,
        battery_voltage: 24.0,
        backstep: CH4_GAINS,
        backstep_opts: BackstepOptions::default(),
        observer: CH5_OBSERVER,
        observer_init_scale: [1.0; 3],
        ref_refresh: 0.0,
        ref_source: RefSource::Observer,
        pi: DualLoopGains::default(),
        perturb_step: 0.005,
        perturb_period: 0.05,
        estimator: EstimatorConfig::default(),
        estimator_init: EstimatorState::new(298.0, 1000.0),
        initial_state: None,
    }
}

const CH45_TIMES: [f64; 5] = [0.0, 1.5, 3.0, 4.5, 6.0];

fn staged(values: [f64; 5]) -> alloc::vec::Vec<crate::sim::Segment> {
    let pts: [(f64, f64); 5] = core::array::from_fn(|k| (CH45_TIMES[k], values[k]));
    Schedule::steps(&pts)
}

fn ch45_schedule(case: u8, load: f64) -> Schedule {
    let mut s = Schedule::constant(kelvin(25.0), 1000.0, load);
    match case {
        1 => s.irradiance = staged([1500.0, 1200.0, 1000.0, 500.0, 200.0]),
        2 => s.temperature = staged([kelvin(75.0), kelvin(50.0), kelvin(25.0), kelvin(10.0), kelvin(0.0)]),
        _ => s.load = staged([5.0, 7.0, 9.0, 11.0, 8.0]),
    }
    s
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Option<Preset> {
    let sim = SimConfig {
        dt: 1e-5,
        duration: 7.5,
        controller: ControllerKind::Backstep,
        record_stride: 10,
        d1_mode: D1Mode::Coupled,
    };
    let p = match name {
        "ch2-estimate" | "ch2-mppt" => {
            let mut params = base_params();
            params.pv = PvArrayParams::module_36cell();
            let mut schedule = Schedule::constant(298.0, 500.0, 20.0);
            schedule.irradiance = Schedule::steps(&[(0.0, 500.0), (1.0, 1000.0), (3.0, 500.0)]);
            schedule.temperature = Schedule::steps(&[(0.0, 298.0), (2.0, 323.0)]);
            let estimate = name == "ch2-estimate";
            Preset {
                name: if estimate { "ch2-estimate" } else { "ch2-mppt" },
                description: if estimate {
                    "estimator accuracy for the four single-stage MPP cases"
                } else {
                    "estimator-driven MPPT of a boost converter through four (T, irradiance) cases"
                },
                kind: if estimate {
                    PresetKind::EstimationTable
                } else {
                    PresetKind::Simulation
                },
                table: CH2_TABLE,
                schedule,
                params,
                sim: SimConfig {
                    duration: 4.0,
                    controller: ControllerKind::FeedforwardMppt,
                    ..sim
                },
            }
        }
        "ch3-unified" => {
            let mut params = base_params();
            params.pv = PvArrayParams::module_36cell();
            params.microgrid = SpvdgParams::small_bus();
            params.bus_voltage = 20.0;
            params.battery_voltage = 15.0;
            let mut schedule = Schedule::constant(298.0, 1000.0, 10.0);
            schedule.irradiance = Schedule::steps(&[(0.0, 1000.0), (0.25, 800.0), (0.5, 500.0), (0.75, 750.0)]);
            Preset {
                name: "ch3-unified",
                description: "PV + battery on a 20 V bus, dual-loop PI with duty perturbation, irradiance steps",
                kind: PresetKind::Simulation,
                table: CH3_TABLE,
                schedule,
                params,
                sim: SimConfig {
                    duration: 1.0,
                    controller: ControllerKind::PiPerturb,
                    ..sim
                },
            }
        }
        "ch4-case1" | "ch4-case2" | "ch4-case3" => {
            let case = name.as_bytes()[8] - b'0';
            Preset {
                name: ["ch4-case1", "ch4-case2", "ch4-case3"][case as usize - 1],
                description: [
                    "back-stepping, irradiance 1500-1200-1000-500-200 W/m2, 200 W load",
                    "back-stepping, temperature 75-50-25-10-0 C, 200 W load",
                    "back-stepping, load 5-7-9-11-8 ohm",
                ][case as usize - 1],
                kind: PresetKind::Simulation,
                table: CH4_TABLE,
                schedule: ch45_schedule(case, 8.0),
                params: base_params(),
                sim,
            }
        }
        "ch5-case1" | "ch5-case2" | "ch5-case3" => {
            let case = name.as_bytes()[8] - b'0';
            let mut params = base_params();
            params.backstep = CH5_GAINS;
            params.ref_refresh = 1e-3;
            // 266.7 W at 40 V
            let load = if case == 2 { 6.0 } else { 8.0 };
            Preset {
                name: ["ch5-case1", "ch5-case2", "ch5-case3"][case as usize - 1],
                description: [
                    "observer back-stepping, irradiance 1500-1200-1000-500-200 W/m2, 200 W load",
                    "observer back-stepping, temperature 75-50-25-10-0 C, 266.7 W load",
                    "observer back-stepping, load 5-7-9-11-8 ohm",
                ][case as usize - 1],
                kind: PresetKind::Simulation,
                table: CH5_TABLE,
                schedule: ch45_schedule(case, load),
                params,
                sim: SimConfig {
                    controller: ControllerKind::DobBackstep,
                    ..sim
                },
            }
        }
        _ => return None,
    };
    Some(p)
}
