use alloc::vec::Vec;

use crate::control::backstep::{tracking_errors, BackstepController, BackstepGains, BackstepOptions};
use crate::control::feedforward::FeedforwardMppt;
use crate::control::observer::{dob_backstep_control, observer_rates, ObserverGains, ObserverState};
use crate::control::perturb::{perturb_step, PerturbState};
use crate::control::pi::{dual_loop_pi, DualLoopGains, PiState};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, EstimatorState};
use crate::plant::{
    boost_derivatives, boost_steady_refs, generate_references, resistive_losses, spvdg_derivatives, BoostParams,
    BoostState, Disturbances, RefSet, SpvdgParams, SpvdgState,
};
use crate::pv::{Environment, OperatingPoint, PvArrayParams, PvCurve};

use super::{rk4_step, EstimateRecord, Sample, Schedule, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Backstep,
    DobBackstep,
    PiPerturb,
    /// Estimator-driven MPPT on the single-stage boost plant.
    FeedforwardMppt,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [
        ControllerKind::Backstep,
        ControllerKind::DobBackstep,
        ControllerKind::PiPerturb,
        ControllerKind::FeedforwardMppt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Backstep => "backstep",
            ControllerKind::DobBackstep => "dob-backstep",
            ControllerKind::PiPerturb => "pi-perturb",
            ControllerKind::FeedforwardMppt => "feedforward-mppt",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Disturbance values used when the observer variant regenerates references.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefSource {
    /// Battery EMF and load admittance from the observer.
    Observer,
    /// Measured battery EMF and load admittance.
    Truth,
}

/// How the PV current disturbance `d1` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum D1Mode {
    /// `d1 = i_pv(T, λ, x1)` at every integrator stage.
    Coupled,
    /// `d1` frozen at the MPP current of the current segment.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub controller: ControllerKind,
    pub record_stride: usize,
    pub d1_mode: D1Mode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-5,
            duration: 1.0,
            controller: ControllerKind::Backstep,
            record_stride: 10,
            d1_mode: D1Mode::Coupled,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt > 0.0 && self.duration > 0.0 && self.record_stride >= 1 && self.duration >= self.dt {
            Ok(())
        } else {
            Err(Error::InvalidInput("need dt > 0, duration >= dt, record_stride >= 1"))
        }
    }
}

/// Everything a run needs besides the schedule and the integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub pv: PvArrayParams,
    pub microgrid: SpvdgParams,
    /// Boost plant; its load resistance is taken from the schedule.
    pub boost: BoostParams,
    pub bus_voltage: f64,
    pub battery_voltage: f64,
    pub backstep: BackstepGains,
    pub backstep_opts: BackstepOptions,
    pub observer: ObserverGains,
    /// Initial estimates as multiples of the true disturbances at t = 0.
    pub observer_init_scale: [f64; 3],
    /// Period (s) at which observer-driven references are regenerated
    /// between events; 0 regenerates only at events.
    pub ref_refresh: f64,
    pub ref_source: RefSource,
    pub pi: DualLoopGains,
    pub perturb_step: f64,
    pub perturb_period: f64,
    pub estimator: EstimatorConfig,
    pub estimator_init: EstimatorState,
    /// Overrides the equilibrium start (microgrid layout).
    pub initial_state: Option<[f64; 6]>,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        self.pv.validate()?;
        self.microgrid.validate()?;
        self.boost.validate()?;
        self.backstep.validate()?;
        self.observer.validate()?;
        self.pi.validate()?;
        self.estimator.validate()?;
        let ok = self.bus_voltage > 0.0
            && self.battery_voltage > 0.0
            && self.perturb_step > 0.0
            && self.perturb_period > 0.0
            && self.ref_refresh >= 0.0
            && self.observer_init_scale.iter().all(|s| s.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("scenario parameters out of range"))
        }
    }
}

/// Advances the configured plant and controller over `schedule`.
///
/// The plant starts at the equilibrium of the first segment (unless
/// `initial_state` is given). PV current is recomputed from the array model
/// at every integrator stage in [`D1Mode::Coupled`]. References follow new
/// MPPs at schedule events.
pub fn run_scenario(schedule: &Schedule, params: &ScenarioParams, cfg: &SimConfig) -> Result<Trace> {
    schedule.validate()?;
    params.validate()?;
    cfg.validate()?;
    match cfg.controller {
        ControllerKind::FeedforwardMppt => run_boost(schedule, params, cfg),
        _ => run_microgrid(schedule, params, cfg),
    }
}

fn steps(t: f64, dt: f64) -> usize {
    crate::math::round(t / dt) as usize
}

fn event_steps(schedule: &Schedule, cfg: &SimConfig, n: usize) -> Vec<(usize, f64)> {
    schedule
        .events()
        .into_iter()
        .map(|e| (steps(e, cfg.dt), e))
        .filter(|(k, _)| *k > 0 && *k < n)
        .collect()
}

/// Operating conditions fixed over one schedule segment.
struct SegmentData {
    curve: PvCurve,
    mpp: OperatingPoint,
    d3: f64,
}

impl SegmentData {
    fn new(pv: &PvArrayParams, schedule: &Schedule, t: f64) -> Result<Self> {
        let c = schedule.at(t);
        let curve = PvCurve::new(pv, &Environment::new(c.temperature, c.irradiance))?;
        let mpp = curve.mpp()?;
        Ok(Self {
            curve,
            mpp,
            d3: 1.0 / c.load,
        })
    }

    fn d1(&self, mode: D1Mode, v: f64) -> f64 {
        match mode {
            D1Mode::Coupled => self.curve.current(v).unwrap_or(f64::NAN),
            D1Mode::Constant => self.mpp.i,
        }
    }
}

enum MicrogridCtl {
    Backstep(BackstepController),
    Dob {
        prev: (f64, f64),
    },
    Pi {
        pi: PiState,
        perturb: PerturbState,
        every: usize,
    },
}

fn run_microgrid(schedule: &Schedule, params: &ScenarioParams, cfg: &SimConfig) -> Result<Trace> {
    let p = &params.microgrid;
    let dt = cfg.dt;
    let n = steps(cfg.duration, dt);
    let events = event_steps(schedule, cfg, n);
    let dob = cfg.controller == ControllerKind::DobBackstep;
    let d2 = params.battery_voltage;

    let mut seg = SegmentData::new(&params.pv, schedule, 0.0)?;
    let truth_refs = generate_references(p, params.bus_voltage, &seg.mpp, d2, seg.d3)?;
    let x0 = params
        .initial_state
        .map(SpvdgState::from_array)
        .unwrap_or_else(|| truth_refs.state());
    let d1_0 = seg.d1(cfg.d1_mode, x0.x1);
    let s = params.observer_init_scale;
    let mut obs = ObserverState {
        d_hat: [d1_0 * s[0], d2 * s[1], seg.d3 * s[2]],
    };

    let regen = |seg: &SegmentData, obs: &ObserverState| -> Result<RefSet> {
        if dob && params.ref_source == RefSource::Observer {
            generate_references(p, params.bus_voltage, &seg.mpp, obs.d_hat[1], obs.d_hat[2])
        } else {
            generate_references(p, params.bus_voltage, &seg.mpp, d2, seg.d3)
        }
    };
    let mut refs = regen(&seg, &obs)?;

    let mut ctl = match cfg.controller {
        ControllerKind::Backstep => MicrogridCtl::Backstep(BackstepController::new(
            params.backstep,
            params.backstep_opts,
            &truth_refs,
        )),
        ControllerKind::DobBackstep => MicrogridCtl::Dob {
            prev: (truth_refs.u1, truth_refs.u2),
        },
        ControllerKind::PiPerturb => {
            let pi = PiState::steady(&params.pi, truth_refs.x4, truth_refs.u2);
            let mut perturb = PerturbState::new(truth_refs.u1, params.perturb_step, params.perturb_period)?;
            let (out, _) = dual_loop_pi(x0.x6, params.bus_voltage, x0.x4, &params.pi, &pi);
            perturb.observe(out.d_b, out.d_bp, out.mode);
            perturb.d_b_old = out.d_b;
            perturb.d_bp_old = out.d_bp;
            MicrogridCtl::Pi {
                pi,
                perturb,
                every: steps(params.pi.period, dt).max(1),
            }
        }
        ControllerKind::FeedforwardMppt => unreachable!(),
    };
    let mut u = (truth_refs.u1, truth_refs.u2);
    let refresh = if dob && params.ref_refresh > 0.0 {
        steps(params.ref_refresh, dt).max(1)
    } else {
        0
    };

    let mut z = [0.0; 9];
    z[..6].copy_from_slice(&x0.to_array());
    z[6..].copy_from_slice(&obs.d_hat);

    let mut trace = Trace {
        duration: cfg.duration,
        ..Default::default()
    };
    trace.samples.reserve(n / cfg.record_stride + 2);
    let mut next_event = 0;
    let mut guard = false;
    let mut saturated = false;

    let record =
        |trace: &mut Trace, t: f64, z: &[f64; 9], u: (f64, f64), refs: &RefSet, seg: &SegmentData, guard, saturated| {
            let x = SpvdgState::from_array([z[0], z[1], z[2], z[3], z[4], z[5]]);
            let d1 = seg.d1(cfg.d1_mode, x.x1);
            trace.samples.push(Sample {
                t,
                x: x.to_array(),
                u: [u.0, u.1],
                d: [d1, d2, seg.d3],
                d_hat: if dob { Some([z[6], z[7], z[8]]) } else { None },
                refs: refs.state().to_array(),
                p_pv: x.x1 * d1,
                p_batt: d2 * x.x4,
                p_load: x.x6 * x.x6 * seg.d3,
                p_loss: resistive_losses(p, &x),
                guard,
                saturated,
            });
        };
    record(&mut trace, 0.0, &z, u, &refs, &seg, false, false);

    for k in 0..n {
        let t = k as f64 * dt;
        obs.d_hat = [z[6], z[7], z[8]];
        if next_event < events.len() && events[next_event].0 == k {
            let te = events[next_event].1;
            seg = SegmentData::new(&params.pv, schedule, te)?;
            refs = regen(&seg, &obs)?;
            trace.events.push(te);
            next_event += 1;
        } else if refresh > 0 && k > 0 && k % refresh == 0 {
            // a transiently infeasible estimate keeps the old references
            if let Ok(r) = regen(&seg, &obs) {
                refs = r;
            }
        }
        let x = SpvdgState::from_array([z[0], z[1], z[2], z[3], z[4], z[5]]);
        let d = Disturbances {
            d1: seg.d1(cfg.d1_mode, x.x1),
            d2,
            d3: seg.d3,
        };
        match &mut ctl {
            MicrogridCtl::Backstep(c) => {
                let (u1, u2, fired) = c.update(p, &x, &refs, &d);
                u = (u1, u2);
                guard |= fired;
            }
            MicrogridCtl::Dob { prev } => {
                let out = dob_backstep_control(
                    p,
                    &x,
                    &refs,
                    &obs,
                    &params.backstep,
                    &params.observer,
                    &params.backstep_opts,
                    *prev,
                );
                u = (out.u1, out.u2);
                *prev = u;
                guard |= out.guard_fired;
            }
            MicrogridCtl::Pi { pi, perturb, every } => {
                if k % *every == 0 {
                    let (out, st) = dual_loop_pi(x.x6, params.bus_voltage, x.x4, &params.pi, pi);
                    *pi = st;
                    perturb.observe(out.d_b, out.d_bp, out.mode);
                    let (next, d_pv) = perturb_step(perturb, t);
                    *perturb = next;
                    u = (d_pv, out.plant_duty());
                }
            }
        }
        debug_assert!((0.0..=1.0).contains(&u.0) && (0.0..=1.0).contains(&u.1));
        saturated |= u.0 == 0.0 || u.0 == 1.0 || u.1 == 0.0 || u.1 == 1.0;

        let (u1, u2) = u;
        let refs_now = refs;
        let seg_ref = &seg;
        z = rk4_step(
            |z: &[f64; 9]| {
                let x = SpvdgState::from_array([z[0], z[1], z[2], z[3], z[4], z[5]]);
                let d = Disturbances {
                    d1: seg_ref.d1(cfg.d1_mode, x.x1),
                    d2,
                    d3: seg_ref.d3,
                };
                let dx = spvdg_derivatives(p, &x, &d, u1, u2).to_array();
                let rates = if dob {
                    let e = tracking_errors(p, &x, &refs_now, z[6], z[8], &params.backstep);
                    observer_rates(&x, &e, &params.observer)
                } else {
                    [0.0; 3]
                };
                [dx[0], dx[1], dx[2], dx[3], dx[4], dx[5], rates[0], rates[1], rates[2]]
            },
            &z,
            dt,
        )
        .map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { time: t },
            e => e,
        })?;

        if (k + 1) % cfg.record_stride == 0 {
            record(&mut trace, (k + 1) as f64 * dt, &z, u, &refs, &seg, guard, saturated);
            guard = false;
            saturated = false;
        }
    }
    if let MicrogridCtl::Backstep(c) = &ctl {
        trace.guard_events = c.guard_events;
    }
    Ok(trace)
}

fn run_boost(schedule: &Schedule, params: &ScenarioParams, cfg: &SimConfig) -> Result<Trace> {
    let dt = cfg.dt;
    let n = steps(cfg.duration, dt);
    let events = event_steps(schedule, cfg, n);
    let mut boost = params.boost;
    boost.r_load = schedule.at(0.0).load;

    let mut seg = SegmentData::new(&params.pv, schedule, 0.0)?;
    let mut target = boost_steady_refs(seg.mpp.v, seg.mpp.i, &boost)?;
    let mut ctl = FeedforwardMppt::new(&params.pv, &boost, params.estimator, params.estimator_init)?;
    let mut z = match params.initial_state {
        Some(x) => [x[2], x[0], x[5]],
        None => BoostState {
            i_l: target.i_l,
            v_pv: seg.mpp.v,
            v_o: target.v_o,
        }
        .to_array(),
    };

    let mut trace = Trace {
        duration: cfg.duration,
        ..Default::default()
    };
    trace.samples.reserve(n / cfg.record_stride + 2);
    let mut next_event = 0;
    let mut duty = ctl.duty;

    let record = |trace: &mut Trace,
                  t: f64,
                  z: &[f64; 3],
                  duty: f64,
                  seg: &SegmentData,
                  target: &crate::plant::BoostRefs,
                  boost: &BoostParams| {
        let s = BoostState::from_array(*z);
        let i_pv = seg.curve.current(s.v_pv).unwrap_or(f64::NAN);
        trace.samples.push(Sample {
            t,
            x: [s.v_pv, 0.0, s.i_l, 0.0, 0.0, s.v_o],
            u: [duty, 0.0],
            d: [i_pv, 0.0, 1.0 / boost.r_load],
            d_hat: None,
            refs: [seg.mpp.v, 0.0, seg.mpp.i, 0.0, 0.0, target.v_o],
            p_pv: s.v_pv * i_pv,
            p_batt: 0.0,
            p_load: s.v_o * s.v_o / boost.r_load,
            p_loss: boost.r * s.i_l * s.i_l + boost.v_diode * s.i_l * (1.0 - duty),
            guard: false,
            saturated: false,
        });
    };
    record(&mut trace, 0.0, &z, duty, &seg, &target, &boost);

    for k in 0..n {
        let t = k as f64 * dt;
        if next_event < events.len() && events[next_event].0 == k {
            let te = events[next_event].1;
            seg = SegmentData::new(&params.pv, schedule, te)?;
            boost.r_load = schedule.at(te).load;
            target = boost_steady_refs(seg.mpp.v, seg.mpp.i, &boost)?;
            trace.events.push(te);
            next_event += 1;
        }
        let s = BoostState::from_array(z);
        let i_pv = seg.curve.current(s.v_pv)?;
        let (d, est) = ctl.update(&params.pv, &boost, t, OperatingPoint::new(s.v_pv, i_pv));
        duty = d;
        if let Some(event) = est {
            trace.estimates.push(EstimateRecord {
                event,
                truth: seg.curve.environment(),
            });
        }
        let seg_ref = &seg;
        let b = boost;
        z = rk4_step(
            |z: &[f64; 3]| {
                let s = BoostState::from_array(*z);
                let i_pv = seg_ref.curve.current(s.v_pv).unwrap_or(f64::NAN);
                boost_derivatives(&b, &s, i_pv, duty).to_array()
            },
            &z,
            dt,
        )
        .map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { time: t },
            e => e,
        })?;
        if (k + 1) % cfg.record_stride == 0 {
            record(&mut trace, (k + 1) as f64 * dt, &z, duty, &seg, &target, &boost);
        }
    }
    Ok(trace)
}
