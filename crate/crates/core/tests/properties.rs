use proptest::prelude::*;

use pvdg_core::control::{
    backstep_control, dob_backstep_control, dual_loop_pi, lyapunov_value, perturb_decision, perturb_step,
    tracking_errors, BackstepOptions, BdcMode, DualLoopGains, ObserverState, PerturbState, PiState,
};
use pvdg_core::estimator::{estimate, nr_step, EstimatorConfig, EstimatorState, MeasurementPair};
use pvdg_core::plant::{
    boost_derivatives, boost_steady_refs, generate_references, spvdg_derivatives, BoostParams, BoostState,
    Disturbances, SpvdgParams, SpvdgState,
};
use pvdg_core::presets::{CH4_GAINS, CH5_GAINS, CH5_OBSERVER};
use pvdg_core::pv::{
    find_mpp, iv_residual, open_circuit_voltage, pv_current, pv_current_sensitivities, Environment, OperatingPoint,
    PvArrayParams, PvCurve,
};

fn env() -> impl Strategy<Value = Environment> {
    (273.0..350.0f64, 100.0..1500.0f64).prop_map(|(t, l)| Environment::new(t, l))
}

fn small_pv() -> PvArrayParams {
    PvArrayParams::module_36cell()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn solved_current_is_on_the_curve(e in env(), frac in -0.2..1.2f64) {
        for pv in [small_pv(), PvArrayParams::kc200gt()] {
            let v = frac * open_circuit_voltage(&pv, &e).unwrap();
            let i = pv_current(&pv, &e, v).unwrap();
            prop_assert!(iv_residual(&pv, &e, v, i).abs() <= 1e-9);
        }
    }

    #[test]
    fn power_curve_is_unimodal(e in env()) {
        let curve = PvCurve::new(&small_pv(), &e).unwrap();
        prop_assert_eq!(curve.slope_sign_changes(512).unwrap(), 1);
    }

    #[test]
    fn mpp_voltage_falls_with_temperature(e in env(), dt in 1.0..30.0f64) {
        let pv = small_pv();
        let cold = find_mpp(&pv, &e).unwrap();
        let hot = find_mpp(&pv, &Environment::new(e.temperature + dt, e.irradiance)).unwrap();
        prop_assert!(hot.v < cold.v);
    }

    #[test]
    fn sensitivities_match_central_differences(e in env(), frac in 0.05..0.9f64) {
        let pv = small_pv();
        let v = frac * open_circuit_voltage(&pv, &e).unwrap();
        let i = pv_current(&pv, &e, v).unwrap();
        let s = pv_current_sensitivities(&pv, &e, &OperatingPoint::new(v, i)).unwrap();
        let at = |t: f64, l: f64| pv_current(&pv, &Environment::new(t, l), v).unwrap();
        let fd_t = (at(e.temperature + 1e-3, e.irradiance) - at(e.temperature - 1e-3, e.irradiance)) / 2e-3;
        let fd_l = (at(e.temperature, e.irradiance + 1e-2) - at(e.temperature, e.irradiance - 1e-2)) / 2e-2;
        prop_assert!((s.d_temperature - fd_t).abs() <= 1e-4 * fd_t.abs());
        prop_assert!((s.d_irradiance - fd_l).abs() <= 1e-4 * fd_l.abs());
    }

    #[test]
    fn estimator_round_trip(truth in env(), a in 0.6..0.8f64, gap in 0.1..0.18f64) {
        let pv = small_pv();
        let voc = open_circuit_voltage(&pv, &truth).unwrap();
        let pair = MeasurementPair::synthesize(&pv, &truth, a * voc, (a + gap) * voc).unwrap();
        let est = estimate(&pv, &pair, &EstimatorState::new(298.0, 1000.0), &EstimatorConfig::default()).unwrap();
        prop_assert!((est.temperature - truth.temperature).abs() <= 0.005 * truth.temperature);
        prop_assert!((est.irradiance - truth.irradiance).abs() <= 0.005 * truth.irradiance);
        prop_assert!(est.iterations_used <= 10);
    }

    #[test]
    fn nr_step_is_deterministic(truth in env()) {
        let pv = small_pv();
        let voc = open_circuit_voltage(&pv, &truth).unwrap();
        let pair = MeasurementPair::synthesize(&pv, &truth, 0.6 * voc, 0.8 * voc).unwrap();
        let s = EstimatorState::new(310.0, 900.0);
        let a = nr_step(&pv, &s, &pair).unwrap();
        let b = nr_step(&pv, &s, &pair).unwrap();
        prop_assert_eq!(a.temperature.to_bits(), b.temperature.to_bits());
        prop_assert_eq!(a.irradiance.to_bits(), b.irradiance.to_bits());
    }

    #[test]
    fn generated_equilibrium_balances_power(e in env(), load in 5.0..20.0f64) {
        let p = SpvdgParams::kc200gt_bus();
        let mpp = find_mpp(&PvArrayParams::kc200gt(), &e).unwrap();
        let d3 = 1.0 / load;
        if let Ok(r) = generate_references(&p, 40.0, &mpp, 24.0, d3) {
            let x = r.state();
            let load_power = r.x6 * r.x6 * d3;
            let losses = p.r_pv * r.x3 * r.x3 + p.r_b * r.x4 * r.x4
                + (r.x2 - r.x6).powi(2) / p.r_pvo + (r.x5 - r.x6).powi(2) / p.r_bo;
            let gap = r.x1 * r.x3 + 24.0 * r.x4 - load_power - losses;
            prop_assert!(gap.abs() <= 1e-3 * load_power);
            let d = Disturbances { d1: mpp.i, d2: 24.0, d3 };
            let dx = spvdg_derivatives(&p, &x, &d, r.u1, r.u2).to_array();
            let w = p.storage_weights();
            for k in 0..6 {
                prop_assert!((w[k] * dx[k]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn boost_refs_zero_the_derivatives(e in env(), load in 10.0..40.0f64) {
        let bp = BoostParams { r_load: load, ..BoostParams::single_stage() };
        let mpp = find_mpp(&small_pv(), &e).unwrap();
        if let Ok(r) = boost_steady_refs(mpp.v, mpp.i, &bp) {
            let st = BoostState { i_l: r.i_l, v_pv: mpp.v, v_o: r.v_o };
            let dx = boost_derivatives(&bp, &st, mpp.i, r.duty);
            prop_assert!((bp.l * dx.i_l).abs() <= 1e-9);
            prop_assert!((bp.c_in * dx.v_pv).abs() <= 1e-9);
            prop_assert!((bp.c_out * dx.v_o).abs() <= 1e-9);
        }
    }

    #[test]
    fn plant_is_affine_in_duties(
        x in prop::array::uniform6(1.0..50.0f64),
        u in (0.0..1.0f64, 0.0..1.0f64),
        s in 0.1..3.0f64,
    ) {
        let p = SpvdgParams::kc200gt_bus();
        let st = SpvdgState::from_array(x);
        let d = Disturbances { d1: 7.0, d2: 24.0, d3: 0.125 };
        let f0 = spvdg_derivatives(&p, &st, &d, 0.0, 0.0).to_array();
        let f1 = spvdg_derivatives(&p, &st, &d, u.0, u.1).to_array();
        let fs = spvdg_derivatives(&p, &st, &d, s * u.0, s * u.1).to_array();
        for k in 0..6 {
            let lin = s * (f1[k] - f0[k]);
            prop_assert!((fs[k] - f0[k] - lin).abs() <= 1e-9 * (lin.abs() + f0[k].abs() + 1.0));
        }
    }

    #[test]
    fn backstep_duties_are_saturated(dx in prop::array::uniform6(-2.0..2.0f64)) {
        let p = SpvdgParams::kc200gt_bus();
        let mpp = find_mpp(&PvArrayParams::kc200gt(), &Environment::new(298.15, 1000.0)).unwrap();
        let refs = generate_references(&p, 40.0, &mpp, 24.0, 0.125).unwrap();
        let mut x = refs.state().to_array();
        for k in 0..6 {
            x[k] += dx[k];
        }
        let d = Disturbances { d1: mpp.i, d2: 24.0, d3: 0.125 };
        if let Ok((u1, u2)) = backstep_control(&p, &SpvdgState::from_array(x), &refs, &d, &CH4_GAINS, &BackstepOptions::default()) {
            prop_assert!((0.0..=1.0).contains(&u1) && (0.0..=1.0).contains(&u2));
        }
    }

    #[test]
    fn perturb_decision_is_total(a in -1.0..1.0f64, b in -1.0..1.0f64, charge in any::<bool>()) {
        let mode = if charge { BdcMode::Charge } else { BdcMode::Discharge };
        let r = perturb_decision(a, b, mode);
        prop_assert!(r == 1.0 || r == -1.0);
    }

    #[test]
    fn perturbed_duty_moves_by_one_step(d_pv in 0.1..0.9f64, d_b in 0.0..1.0f64, charge in any::<bool>()) {
        let mut st = PerturbState::new(d_pv, 0.005, 0.05).unwrap();
        let mode = if charge { BdcMode::Charge } else { BdcMode::Discharge };
        st.observe(d_b, 1.0 - d_b, mode);
        let (_, d) = perturb_step(&st, 0.05);
        prop_assert!(((d - d_pv).abs() - 0.005).abs() <= 1e-12);
    }

    #[test]
    fn pi_integrators_stay_bounded_under_saturation(v in 0.0..40.0f64, i in -30.0..30.0f64) {
        let g = DualLoopGains::default();
        let mut st = PiState::default();
        for _ in 0..10_000 {
            let (out, next) = dual_loop_pi(v, 20.0, i, &g, &st);
            prop_assert!(out.i_ref.abs() <= g.i_ref_limit);
            st = next;
        }
        prop_assert!((g.voltage.ki * st.voltage_sum).abs() <= g.i_ref_limit + g.voltage.kp * 40.0 + 1e-9);
        prop_assert!(st.current_sum.is_finite());
    }
}

/// Augmented Lyapunov function of the observer law.
fn augmented_w(
    p: &SpvdgParams,
    x: &[f64; 6],
    d_hat: &[f64; 3],
    d: &Disturbances,
    refs: &pvdg_core::plant::RefSet,
) -> f64 {
    let e = tracking_errors(p, &SpvdgState::from_array(*x), refs, d_hat[0], d_hat[2], &CH5_GAINS);
    let truth = [d.d1, d.d2, d.d3];
    lyapunov_value(p, &e)
        + (0..3)
            .map(|k| (truth[k] - d_hat[k]).powi(2) / (2.0 * CH5_OBSERVER.rho[k]))
            .sum::<f64>()
}

#[test]
fn observer_law_lyapunov_rate() {
    // dW/dt = -Σ K e² plus the two terms that come from evaluating dα3/dt
    // and dα5/dt with estimated instead of true disturbances; both vanish
    // when the estimates are exact.
    use rand::{Rng, SeedableRng};
    let p = SpvdgParams::kc200gt_bus();
    let mpp = find_mpp(&PvArrayParams::kc200gt(), &Environment::new(298.15, 1000.0)).unwrap();
    let d = Disturbances {
        d1: mpp.i,
        d2: 24.0,
        d3: 0.125,
    };
    let refs = generate_references(&p, 40.0, &mpp, d.d2, d.d3).unwrap();
    let k = CH5_GAINS.k;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    while checked < 200 {
        let mut x = refs.state().to_array();
        for v in x.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
        let d_hat = [
            d.d1 * rng.gen_range(0.95..1.05),
            d.d2 * rng.gen_range(0.98..1.02),
            d.d3 * rng.gen_range(0.9..1.1),
        ];
        let out = dob_backstep_control(
            &p,
            &SpvdgState::from_array(x),
            &refs,
            &ObserverState { d_hat },
            &CH5_GAINS,
            &CH5_OBSERVER,
            &BackstepOptions::default(),
            (refs.u1, refs.u2),
        );
        if out.guard_fired || [out.u1, out.u2].iter().any(|u| *u <= 0.0 || *u >= 1.0) {
            continue;
        }
        let xdot = spvdg_derivatives(&p, &SpvdgState::from_array(x), &d, out.u1, out.u2).to_array();
        let h = 1e-6;
        let shift = |s: f64| {
            let xs: [f64; 6] = core::array::from_fn(|i| x[i] + s * h * xdot[i]);
            let ds: [f64; 3] = core::array::from_fn(|i| d_hat[i] + s * h * out.observer_rates[i]);
            augmented_w(&p, &xs, &ds, &d, &refs)
        };
        let numeric = (shift(1.0) - shift(-1.0)) / (2.0 * h);

        let e = tracking_errors(&p, &SpvdgState::from_array(x), &refs, d_hat[0], d_hat[2], &CH5_GAINS).e;
        let slope = -k[5] * p.r_bo + p.r_bo / p.r_pvo + 1.0 + p.r_bo * d_hat[2];
        let expected = -(0..6).map(|j| k[j] * e[j] * e[j]).sum::<f64>()
            - p.l_pv * k[0] * e[2] * (d.d1 - d_hat[0]) / p.c_pvi
            + p.c_bo * slope * x[5] * e[4] * (d.d3 - d_hat[2]) / p.c_bus;
        let scale = (0..6).map(|j| k[j] * e[j] * e[j]).sum::<f64>().max(1e-6);
        assert!(
            (numeric - expected).abs() <= 1e-5 * scale.max(expected.abs()),
            "{numeric} vs {expected}"
        );
        checked += 1;
    }
}

#[test]
fn observer_law_with_exact_estimates_decreases_w() {
    let p = SpvdgParams::kc200gt_bus();
    let mpp = find_mpp(&PvArrayParams::kc200gt(), &Environment::new(298.15, 1000.0)).unwrap();
    let d = Disturbances {
        d1: mpp.i,
        d2: 24.0,
        d3: 0.125,
    };
    let refs = generate_references(&p, 40.0, &mpp, d.d2, d.d3).unwrap();
    let mut x = refs.state().to_array();
    x[0] += 0.2;
    x[3] -= 0.1;
    x[5] += 0.2;
    let d_hat = [d.d1, d.d2, d.d3];
    let out = dob_backstep_control(
        &p,
        &SpvdgState::from_array(x),
        &refs,
        &ObserverState { d_hat },
        &CH5_GAINS,
        &CH5_OBSERVER,
        &BackstepOptions::default(),
        (refs.u1, refs.u2),
    );
    assert!(!out.guard_fired);
    let xdot = spvdg_derivatives(&p, &SpvdgState::from_array(x), &d, out.u1, out.u2).to_array();
    let h = 1e-6;
    let at = |s: f64| {
        let xs: [f64; 6] = core::array::from_fn(|i| x[i] + s * h * xdot[i]);
        let ds: [f64; 3] = core::array::from_fn(|i| d_hat[i] + s * h * out.observer_rates[i]);
        augmented_w(&p, &xs, &ds, &d, &refs)
    };
    assert!((at(1.0) - at(-1.0)) / (2.0 * h) < 0.0);
}
