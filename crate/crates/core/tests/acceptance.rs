//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! A FAIL line does not fail the test run; set `ACCEPTANCE_STRICT=1` to turn
//! any FAIL into a test failure. Every scenario must still run to completion
//! without non-finite values or duties outside `[0, 1]`.

use std::io::Write;
use std::time::{Duration, Instant};

use pvdg_core::control::{lyapunov_value, perturb_decision, tracking_errors, BdcMode};
use pvdg_core::estimator::{estimate, EstimatorConfig, EstimatorState, MeasurementPair};
use pvdg_core::plant::{
    boost_derivatives, boost_steady_refs, generate_references, spvdg_derivatives, BoostState, Disturbances,
};
use pvdg_core::presets::{preset, Preset, CH2_CASES, CH2_MPP};
use pvdg_core::pv::{
    find_mpp, iv_residual, open_circuit_voltage, pv_current, pv_current_sensitivities, Environment, OperatingPoint,
    PvArrayParams,
};
use pvdg_core::sim::{run_scenario, settling_time, settling_time_abs, D1Mode, Signal, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

/// Written to the stdout handle directly so the lines survive libtest's
/// output capture.
fn report(lines: &[Line]) -> bool {
    let mut out = std::io::stdout().lock();
    for l in lines {
        let _ = writeln!(out, "{} [{}] {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail);
    }
    lines.iter().all(|l| l.pass)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn run(p: &Preset) -> (Trace, Duration) {
    let t0 = Instant::now();
    let tr = run_scenario(&p.schedule, &p.params, &p.sim).unwrap_or_else(|e| panic!("{} failed: {e}", p.name));
    let el = t0.elapsed();
    assert!(
        tr.samples.iter().all(|s| s.x.iter().chain(&s.u).all(|v| v.is_finite())),
        "{} produced non-finite samples",
        p.name
    );
    assert!(tr.samples.iter().all(|s| s.u.iter().all(|u| (0.0..=1.0).contains(u))));
    (tr, el)
}

/// Last sample at or before the end of the segment starting at `start`.
fn segment_last(tr: &Trace, start: f64) -> &pvdg_core::sim::Sample {
    let end = tr.segment_end(start);
    let k = tr.samples.partition_point(|s| s.t <= end + 1e-12);
    &tr.samples[k - 1]
}

fn mpp_table() -> Line {
    let t0 = Instant::now();
    let pv = PvArrayParams::module_36cell();
    let mut worst: f64 = 0.0;
    for (env, (v, i, p)) in CH2_CASES.iter().zip(CH2_MPP) {
        let m = find_mpp(&pv, env).unwrap();
        worst = worst.max(rel(m.v, v)).max(rel(m.i, i)).max(rel(m.power, p));
    }
    let el = t0.elapsed();
    Line {
        id: "1 mpp-table",
        pass: worst <= 0.02 && el < Duration::from_secs(1),
        detail: format!("worst relative error {:.2}% (<= 2%), {:.1?} (< 1 s)", 100.0 * worst, el),
    }
}

fn estimator_accuracy() -> Line {
    let t0 = Instant::now();
    let pv = PvArrayParams::module_36cell();
    let cfg = EstimatorConfig::default();
    let init = EstimatorState::new(298.0, 1000.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut iters = Vec::new();
    let mut failures = 0;
    for _ in 0..100 {
        let truth = Environment::new(rng.gen_range(273.0..350.0), rng.gen_range(100.0..1500.0));
        let voc = open_circuit_voltage(&pv, &truth).unwrap();
        let pair = MeasurementPair::synthesize(&pv, &truth, 0.6 * voc, 0.8 * voc).unwrap();
        match estimate(&pv, &pair, &init, &cfg) {
            Ok(e) => {
                worst = worst
                    .max(rel(e.temperature, truth.temperature))
                    .max(rel(e.irradiance, truth.irradiance));
                iters.push(e.iterations_used);
            }
            Err(_) => failures += 1,
        }
    }
    let el = t0.elapsed();
    iters.sort_unstable();
    let median = iters.get(iters.len() / 2).copied().unwrap_or(usize::MAX);
    Line {
        id: "2 estimator",
        pass: failures == 0 && worst <= 0.005 && median <= 6 && el < Duration::from_secs(5),
        detail: format!(
            "{failures} failures, worst error {:.2e}% (<= 0.5%), median iterations {median} (<= 6), {:.1?} (< 5 s)",
            100.0 * worst,
            el
        ),
    }
}

fn ch4() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["ch4-case1", "ch4-case2", "ch4-case3"] {
        let p = preset(name).unwrap();
        let (tr, el) = run(&p);
        let mut worst_settle: f64 = 0.0;
        let mut worst_pv: f64 = 0.0;
        for &e in &tr.events {
            let s = settling_time(&tr, Signal::State(5), p.params.bus_voltage, 0.01, e).unwrap_or(f64::INFINITY);
            worst_settle = worst_settle.max(s);
            let c = p.schedule.at(e);
            let mpp = find_mpp(&p.params.pv, &Environment::new(c.temperature, c.irradiance)).unwrap();
            worst_pv = worst_pv.max(rel(segment_last(&tr, e).x[0], mpp.v));
        }
        pass &= worst_settle <= 0.080 && worst_pv <= 0.02 && el < Duration::from_secs(60);
        parts.push(format!(
            "{name}: x6 settle {:.1} ms, x1 error {:.3}%, {:.1?}",
            1e3 * worst_settle,
            100.0 * worst_pv,
            el
        ));
    }
    Line {
        id: "3 ch4 (x6 1% band <= 80 ms, x1 <= 2%, < 60 s)",
        pass,
        detail: parts.join("; "),
    }
}

fn ch5() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["ch5-case1", "ch5-case2", "ch5-case3"] {
        let p = preset(name).unwrap();
        let (tr, _) = run(&p);
        let mut worst_state: f64 = 0.0;
        let mut worst_bus: f64 = 0.0;
        let mut worst_obs: f64 = 0.0;
        let mut worst_est: f64 = 0.0;
        for &e in &tr.events {
            let last = segment_last(&tr, e);
            worst_bus = worst_bus
                .max(settling_time(&tr, Signal::State(5), p.params.bus_voltage, 0.01, e).unwrap_or(f64::INFINITY));
            for k in 0..6 {
                // currents can sit near zero; their band is relative to max(|ref|, 1 A)
                let tol = 0.02 * last.refs[k].abs().max(1.0);
                let s = settling_time_abs(&tr, Signal::State(k), last.refs[k], tol, e).unwrap_or(f64::INFINITY);
                worst_state = worst_state.max(s);
            }
            for k in [0, 2] {
                let s = settling_time(&tr, Signal::Estimate(k), last.d[k], 0.05, e).unwrap_or(f64::INFINITY);
                worst_obs = worst_obs.max(s);
                let h = last.d_hat.expect("observer estimates recorded")[k];
                worst_est = worst_est.max(rel(h, last.d[k]));
            }
        }
        pass &= worst_state <= 0.1 && worst_obs <= 0.1 && worst_bus <= 0.1 && worst_est <= 0.05;
        parts.push(format!(
            "{name}: states {:.0} ms, observers {:.0} ms, x6 {:.0} ms, d1hat/d3hat error {:.2}%",
            1e3 * worst_state,
            1e3 * worst_obs,
            1e3 * worst_bus,
            100.0 * worst_est
        ));
    }
    Line {
        id: "4 ch5 (settle <= 100 ms, d1hat/d3hat <= 5%)",
        pass,
        detail: parts.join("; "),
    }
}

fn ch3() -> Line {
    let p = preset("ch3-unified").unwrap();
    let (tr, _) = run(&p);
    let mut starts = vec![0.0];
    starts.extend_from_slice(&tr.events);
    let mut bus_ok = true;
    let mut signs_ok = true;
    let mut worst_bus: f64 = 0.0;
    let mut currents = Vec::new();
    for &start in &starts {
        let end = tr.segment_end(start);
        // steady state: second half of the segment
        let window: Vec<_> = tr
            .samples
            .iter()
            .filter(|s| s.t > 0.5 * (start + end) && s.t <= end)
            .collect();
        let dev = window
            .iter()
            .map(|s| rel(s.x[5], p.params.bus_voltage))
            .fold(0.0, f64::max);
        worst_bus = worst_bus.max(dev);
        bus_ok &= dev <= 0.05;
        let mean_i = window.iter().map(|s| s.x[3]).sum::<f64>() / window.len() as f64;
        // PV power below load power means the battery must discharge
        let c = p.schedule.at(start + 1e-9);
        let mpp = find_mpp(&p.params.pv, &Environment::new(c.temperature, c.irradiance)).unwrap();
        let load = p.params.bus_voltage * p.params.bus_voltage / c.load;
        let deficit = mpp.power < load;
        signs_ok &= (mean_i > 0.0) == deficit;
        currents.push(format!(
            "{mean_i:+.2} A ({})",
            if deficit { "deficit" } else { "surplus" }
        ));
    }
    let flips = currents
        .windows(2)
        .any(|w| w[0].starts_with('-') != w[1].starts_with('-'));
    Line {
        id: "5 ch3 (bus 20 V +-5%, battery current sign follows deficit)",
        pass: bus_ok && signs_ok && flips,
        detail: format!(
            "worst bus deviation {:.2}%, mean battery current {}",
            100.0 * worst_bus,
            currents.join(", ")
        ),
    }
}

fn residuals() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for k in 0..10_000 {
        let pv = if k % 2 == 0 {
            PvArrayParams::module_36cell()
        } else {
            PvArrayParams::kc200gt()
        };
        let env = Environment::new(rng.gen_range(250.0..360.0), rng.gen_range(0.0..1500.0));
        let voc = open_circuit_voltage(&pv, &env).unwrap();
        let v = rng.gen_range(-0.1..1.1) * voc.max(1.0);
        let i = pv_current(&pv, &env, v).unwrap();
        worst = worst.max(iv_residual(&pv, &env, v, i).abs());
    }
    Line {
        id: "6a I-V residual",
        pass: worst <= 1e-9,
        detail: format!("worst |f(i)| {worst:.2e} A over 10^4 points (<= 1e-9)"),
    }
}

fn sensitivities() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pv = PvArrayParams::module_36cell();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let env = Environment::new(rng.gen_range(273.0..350.0), rng.gen_range(100.0..1500.0));
        let voc = open_circuit_voltage(&pv, &env).unwrap();
        let v = rng.gen_range(0.05..0.9) * voc;
        let i = pv_current(&pv, &env, v).unwrap();
        let s = pv_current_sensitivities(&pv, &env, &OperatingPoint::new(v, i)).unwrap();
        let (ht, hl) = (1e-3, 1e-2);
        let at = |t: f64, l: f64| pv_current(&pv, &Environment::new(t, l), v).unwrap();
        let fd_t = (at(env.temperature + ht, env.irradiance) - at(env.temperature - ht, env.irradiance)) / (2.0 * ht);
        let fd_l = (at(env.temperature, env.irradiance + hl) - at(env.temperature, env.irradiance - hl)) / (2.0 * hl);
        worst = worst.max(rel(s.d_temperature, fd_t)).max(rel(s.d_irradiance, fd_l));
    }
    Line {
        id: "6b sensitivities",
        pass: worst <= 1e-4,
        detail: format!("worst relative gap to central differences {worst:.2e} (<= 1e-4)"),
    }
}

fn lyapunov() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let base = preset("ch4-case1").unwrap();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for _ in 0..20 {
        let mut p = base.clone();
        p.schedule = pvdg_core::sim::Schedule::constant(298.15, rng.gen_range(400.0..1500.0), rng.gen_range(5.0..11.0));
        p.sim.duration = 0.3;
        p.sim.record_stride = 1;
        p.sim.d1_mode = D1Mode::Constant;
        let c = p.schedule.at(0.0);
        let mpp = find_mpp(&p.params.pv, &Environment::new(c.temperature, c.irradiance)).unwrap();
        let d = Disturbances {
            d1: mpp.i,
            d2: p.params.battery_voltage,
            d3: 1.0 / c.load,
        };
        let refs = generate_references(&p.params.microgrid, p.params.bus_voltage, &mpp, d.d2, d.d3).unwrap();
        let scale = [0.5, 0.5, 0.2, 0.2, 0.5, 0.5];
        let mut x0 = refs.state().to_array();
        for (x, s) in x0.iter_mut().zip(scale) {
            *x += rng.gen_range(-s..s);
        }
        p.params.initial_state = Some(x0);
        let tr = run_scenario(&p.schedule, &p.params, &p.sim).unwrap();
        let w = |s: &pvdg_core::sim::Sample| {
            let x = pvdg_core::plant::SpvdgState::from_array(s.x);
            lyapunov_value(
                &p.params.microgrid,
                &tracking_errors(&p.params.microgrid, &x, &refs, d.d1, d.d3, &p.params.backstep),
            )
        };
        let w0 = w(&tr.samples[0]);
        for pair in tr.samples.windows(2) {
            let b = &pair[1];
            if b.guard || b.saturated || pair[0].saturated {
                continue;
            }
            checked += 1;
            worst = worst.max((w(b) - w(&pair[0])) / w0);
        }
    }
    Line {
        id: "6c Lyapunov",
        pass: checked > 0 && worst <= 1e-6,
        detail: format!("max W(t+dt) - W(t) = {worst:.2e} W(0) over {checked} intervals, 20 initial states (<= 1e-6)"),
    }
}

fn back_substitution() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let pv = PvArrayParams::kc200gt();
    let mp = pvdg_core::plant::SpvdgParams::kc200gt_bus();
    let bp = pvdg_core::plant::BoostParams::single_stage();
    let small = PvArrayParams::module_36cell();
    let mut worst_grid: f64 = 0.0;
    let mut worst_boost: f64 = 0.0;
    let (mut n_grid, mut n_boost) = (0, 0);
    while n_grid < 100 || n_boost < 100 {
        let env = Environment::new(rng.gen_range(273.0..350.0), rng.gen_range(100.0..1500.0));
        if n_grid < 100 {
            let mpp = find_mpp(&pv, &env).unwrap();
            let d = Disturbances {
                d1: mpp.i,
                d2: 24.0,
                d3: 1.0 / rng.gen_range(5.0..20.0),
            };
            if let Ok(r) = generate_references(&mp, 40.0, &mpp, d.d2, d.d3) {
                let dx = spvdg_derivatives(&mp, &r.state(), &d, r.u1, r.u2).to_array();
                let w = mp.storage_weights();
                for k in 0..6 {
                    worst_grid = worst_grid.max((w[k] * dx[k]).abs());
                }
                n_grid += 1;
            }
        }
        if n_boost < 100 {
            let mpp = find_mpp(&small, &env).unwrap();
            if let Ok(r) = boost_steady_refs(mpp.v, mpp.i, &bp) {
                let st = BoostState {
                    i_l: r.i_l,
                    v_pv: mpp.v,
                    v_o: r.v_o,
                };
                let dx = boost_derivatives(&bp, &st, mpp.i, r.duty);
                let imbalance = [bp.l * dx.i_l, bp.c_in * dx.v_pv, bp.c_out * dx.v_o];
                worst_boost = imbalance.iter().fold(worst_boost, |m, v| m.max(v.abs()));
                n_boost += 1;
            }
        }
    }
    // C dv/dt in A and L di/dt in V
    let worst = worst_grid.max(worst_boost);
    Line {
        id: "6d back-substitution",
        pass: worst <= 1e-6,
        detail: format!("six-state {worst_grid:.2e}, boost {worst_boost:.2e} (A or V) over 100 points each (<= 1e-6)"),
    }
}

fn perturb_table() -> Line {
    // (dD_pv > 0, dD_battery > 0, mode) -> continue (+1) or reverse (-1)
    let rows = [
        (true, true, BdcMode::Charge, 1.0),
        (true, false, BdcMode::Charge, -1.0),
        (false, true, BdcMode::Charge, -1.0),
        (false, false, BdcMode::Charge, 1.0),
        (true, true, BdcMode::Discharge, -1.0),
        (true, false, BdcMode::Discharge, 1.0),
        (false, true, BdcMode::Discharge, 1.0),
        (false, false, BdcMode::Discharge, -1.0),
    ];
    let sgn = |b: bool| if b { 0.005 } else { -0.005 };
    let ok = rows
        .iter()
        .filter(|(a, b, m, want)| perturb_decision(sgn(*a), sgn(*b), *m) == *want)
        .count();
    Line {
        id: "6e perturb table",
        pass: ok == 8,
        detail: format!("{ok}/8 rows"),
    }
}

fn max_rel_gap(coarse: &Trace, fine: &Trace) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, b) in coarse.samples.iter().zip(&fine.samples) {
        assert!((a.t - b.t).abs() < 1e-9);
        for k in 0..6 {
            worst = worst.max((a.x[k] - b.x[k]).abs() / b.x[k].abs().max(1.0));
        }
    }
    worst
}

fn halved(p: &Preset) -> f64 {
    let coarse = run_scenario(&p.schedule, &p.params, &p.sim).unwrap();
    let mut q = p.clone();
    q.sim.dt /= 2.0;
    q.sim.record_stride *= 2;
    let fine = run_scenario(&q.schedule, &q.params, &q.sim).unwrap();
    max_rel_gap(&coarse, &fine)
}

/// Six-state plant under fixed duties from a displaced start.
fn open_loop(dt: f64) -> Vec<[f64; 6]> {
    let p = pvdg_core::plant::SpvdgParams::kc200gt_bus();
    let pv = PvArrayParams::kc200gt();
    let curve = pvdg_core::pv::PvCurve::new(&pv, &Environment::new(298.15, 1000.0)).unwrap();
    let mpp = curve.mpp().unwrap();
    let refs = generate_references(&p, 40.0, &mpp, 24.0, 0.125).unwrap();
    let mut x = refs.state().to_array();
    x[0] += 1.0;
    x[3] -= 0.5;
    x[5] += 1.0;
    let per_ms = pvdg_core::math::round(1e-3 / dt) as usize;
    let mut out = vec![x];
    for k in 1..=100 * per_ms {
        x = pvdg_core::sim::rk4_step(
            |z: &[f64; 6]| {
                let s = pvdg_core::plant::SpvdgState::from_array(*z);
                let d = Disturbances {
                    d1: curve.current(s.x1).unwrap(),
                    d2: 24.0,
                    d3: 0.125,
                };
                spvdg_derivatives(&p, &s, &d, refs.u1, refs.u2).to_array()
            },
            &x,
            dt,
        )
        .unwrap();
        if k % per_ms == 0 {
            out.push(x);
        }
    }
    out
}

fn halving_dt() -> Line {
    let mut boost = preset("ch2-mppt").unwrap();
    boost.sim.duration = 2.0;
    let g_boost = halved(&boost);
    let (a, b) = (open_loop(1e-5), open_loop(5e-6));
    let g_open = a
        .iter()
        .zip(&b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs() / v.abs().max(1.0)))
        .fold(0.0, f64::max);
    let mut ch4 = preset("ch4-case1").unwrap();
    ch4.sim.duration = 2.0;
    let g_ch4 = halved(&ch4);
    Line {
        id: "6f halving dt",
        pass: g_boost <= 1e-4 && g_open <= 1e-4,
        detail: format!(
            "boost loop {g_boost:.2e}, open-loop six-state {g_open:.2e} (<= 1e-4); \
             closed-loop ch4-case1 {g_ch4:.2e} (battery law switches within a step, not an integrator property)"
        ),
    }
}

#[test]
fn acceptance_report() {
    let lines = vec![
        mpp_table(),
        estimator_accuracy(),
        ch4(),
        ch5(),
        ch3(),
        residuals(),
        sensitivities(),
        lyapunov(),
        back_substitution(),
        perturb_table(),
        halving_dt(),
    ];
    let all = report(&lines);
    if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        assert!(all, "acceptance criteria failed");
    }
}
