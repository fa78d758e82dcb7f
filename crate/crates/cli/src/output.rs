//! trace.csv, metrics.txt and manifest.txt.

use std::fmt::Write as _;
use std::io::{self, Write};

use pvdg_core::presets::{CH2_CASES, CH2_MPP};
use pvdg_core::pv::find_mpp;
use pvdg_core::sim::{segment_reports, EstimationRow, Trace};

use crate::config::{Origin, Setup};

pub const TRACE_HEADER: &str = "t,x1,x2,x3,x4,x5,x6,u1,u2,d1,d2,d3,d1hat,d2hat,d3hat,P_pv,P_batt,P_load";

/// Settling band of the bus voltage (fraction of its reference).
pub const BUS_BAND: f64 = 0.01;
/// Settling band of the PV voltage (fraction of the MPP voltage).
pub const PV_BAND: f64 = 0.02;

pub fn write_trace<W: Write>(out: &mut W, trace: &Trace) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for s in &trace.samples {
        write!(out, "{:e}", s.t)?;
        for v in s.x.iter().chain(&s.u).chain(&s.d) {
            write!(out, ",{v:e}")?;
        }
        match s.d_hat {
            Some(h) => write!(out, ",{:e},{:e},{:e}", h[0], h[1], h[2])?,
            None => write!(out, ",,,")?,
        }
        writeln!(out, ",{:e},{:e},{:e}", s.p_pv, s.p_batt, s.p_load)?;
    }
    Ok(())
}

fn ms(v: Option<f64>) -> String {
    v.map_or_else(|| "never".to_string(), |t| format!("{:.1}", 1e3 * t))
}

pub fn simulation_metrics(setup: &Setup, trace: &Trace) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "scenario: {}", setup.name);
    let _ = writeln!(m, "controller: {}", setup.sim.controller.name());
    let _ = writeln!(m, "samples: {}", trace.samples.len());
    let _ = writeln!(m, "guard_events: {}", trace.guard_events);
    let _ = writeln!(
        m,
        "\n# per segment; settling in ms after the segment start, x6 band {}%, x1 band {}% of the MPP voltage",
        100.0 * BUS_BAND,
        100.0 * PV_BAND
    );
    let _ = writeln!(
        m,
        "{:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12} {:>10} {:>10} {:>10}",
        "start_s",
        "T_K",
        "irr_W/m2",
        "load_ohm",
        "x6_ref",
        "x6_settle",
        "x1_settle",
        "x6_err%",
        "x1_err%",
        "x4_A",
        "balance_W",
        "d1hat_err%",
        "d2hat_err%",
        "d3hat_err%"
    );
    for r in segment_reports(trace, BUS_BAND, PV_BAND) {
        let c = setup.schedule.at(r.start + 1e-9);
        let k = trace.samples.partition_point(|s| s.t <= r.end + 1e-12);
        let last = &trace.samples[k - 1];
        let hat = |k: usize| {
            r.estimate_error
                .map_or_else(|| "-".to_string(), |e| format!("{:.3}", 100.0 * e[k]))
        };
        let _ = writeln!(
            m,
            "{:>8.3} {:>8.2} {:>8.1} {:>8.3} {:>8.3} {:>10} {:>10} {:>10.3} {:>10.3} {:>10.4} {:>12.3e} {:>10} {:>10} {:>10}",
            r.start,
            c.temperature,
            c.irradiance,
            c.load,
            last.refs[5],
            ms(r.bus_settle),
            ms(r.pv_settle),
            100.0 * r.bus_error,
            100.0 * r.pv_error,
            r.battery_current,
            last.p_pv + last.p_batt - last.p_load - last.p_loss,
            hat(0),
            hat(1),
            hat(2)
        );
    }
    if !trace.estimates.is_empty() {
        let _ = writeln!(m, "\n# estimator events");
        let _ = writeln!(
            m,
            "{:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6} {:>8}",
            "t_s", "T_true", "T_est", "T_err%", "irr_true", "irr_est", "irr_err%", "iters", "duty"
        );
        for r in &trace.estimates {
            let e = r.event.estimate;
            let _ = writeln!(
                m,
                "{:>8.3} {:>8.2} {:>8.2} {:>8.3} {:>8.1} {:>8.1} {:>8.3} {:>6} {:>8.4}",
                r.event.time,
                r.truth.temperature,
                e.temperature,
                100.0 * (e.temperature - r.truth.temperature).abs() / r.truth.temperature,
                r.truth.irradiance,
                e.irradiance,
                100.0 * (e.irradiance - r.truth.irradiance).abs() / r.truth.irradiance,
                e.iterations_used,
                r.event.duty
            );
        }
    }
    m
}

pub fn estimation_metrics(setup: &Setup, rows: &[EstimationRow]) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "scenario: {}", setup.name);
    let _ = writeln!(
        m,
        "measurement pair at {} and {} of V_oc, initial guess {} K / {} W/m2",
        setup.fractions.0,
        setup.fractions.1,
        setup.params.estimator_init.temperature,
        setup.params.estimator_init.irradiance
    );
    let _ = writeln!(m, "\n# estimator accuracy");
    let _ = writeln!(
        m,
        "{:>6} {:>8} {:>10} {:>8} {:>10} {:>10} {:>8} {:>6}",
        "T_K", "irr", "T_est", "T_err%", "irr_est", "irr_err%", "ok", "iters"
    );
    for r in rows {
        let ok = r.temperature_error <= 0.5 && r.irradiance_error <= 0.5;
        let _ = writeln!(
            m,
            "{:>6.1} {:>8.1} {:>10.4} {:>8.4} {:>10.3} {:>10.4} {:>8} {:>6}",
            r.truth.temperature,
            r.truth.irradiance,
            r.estimate.temperature,
            r.temperature_error,
            r.estimate.irradiance,
            r.irradiance_error,
            if ok { "yes" } else { "no" },
            r.estimate.iterations_used
        );
    }
    let _ = writeln!(m, "\n# maximum power points against the tabulated values");
    let _ = writeln!(
        m,
        "{:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "T_K", "irr", "V", "V_tab", "I", "I_tab", "P", "P_tab"
    );
    for (env, (v, i, p)) in CH2_CASES.iter().zip(CH2_MPP) {
        match find_mpp(&setup.params.pv, env) {
            Ok(o) => {
                let _ = writeln!(
                    m,
                    "{:>6.1} {:>8.1} {:>8.3} {:>8.2} {:>8.3} {:>8.2} {:>8.3} {:>8.1}",
                    env.temperature, env.irradiance, o.v, v, o.i, i, o.power, p
                );
            }
            Err(e) => {
                let _ = writeln!(m, "{:>6.1} {:>8.1} {e}", env.temperature, env.irradiance);
            }
        }
    }
    m
}

pub struct ManifestInfo<'a> {
    pub outputs: &'a [String],
    pub timestamp: u64,
}

pub fn manifest(setup: &Setup, info: &ManifestInfo) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "name = {}", setup.name);
    let _ = writeln!(m, "scenario = {}", setup.base);
    let _ = writeln!(m, "description = {}", setup.description);
    let _ = writeln!(m, "controller = {}", setup.sim.controller.name());
    let _ = writeln!(m, "config_hash = sha256:{}", setup.hash());
    let _ = writeln!(m, "timestamp_unix = {}", info.timestamp);
    let _ = writeln!(m, "k_i_assumed = {}", setup.k_i_assumed());
    let _ = writeln!(m, "outputs = {}", info.outputs.join(", "));
    let _ = writeln!(m, "\n## settings applied to the preset");
    if setup.applied.is_empty() {
        let _ = writeln!(m, "none");
    }
    for (k, v, origin) in &setup.applied {
        let src = match origin {
            Origin::File => "file",
            Origin::Override => "--set",
        };
        let _ = writeln!(m, "{k} = {v}  ({src})");
    }
    let _ = writeln!(m, "\n## parameter table\n{}", setup.table);
    let _ = writeln!(m, "\n## resolved parameters");
    for (k, v) in setup.entries() {
        let _ = writeln!(m, "{k} = {v}");
    }
    m
}
