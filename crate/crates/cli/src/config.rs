//! Flat `key = value` configuration on top of a named preset.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use pvdg_core::presets::{preset, PresetKind};
use pvdg_core::sim::{ControllerKind, D1Mode, RefSource, ScenarioParams, Schedule, Segment, SimConfig};
use sha2::{Digest, Sha256};

/// Where a setting came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    File,
    Override,
}

/// A preset with every configurable value resolved.
#[derive(Debug, Clone)]
pub struct Setup {
    pub name: String,
    /// Preset the setup was built from.
    pub base: &'static str,
    pub description: &'static str,
    pub kind: PresetKind,
    pub table: &'static str,
    pub schedule: Schedule,
    pub params: ScenarioParams,
    pub sim: SimConfig,
    /// Measurement voltages of the estimator table, as fractions of `V_oc`.
    pub fractions: (f64, f64),
    /// Settings applied on top of the preset, in order.
    pub applied: Vec<(String, String, Origin)>,
}

/// Numeric keys backed by a single `f64`.
const REAL_KEYS: [&str; 58] = [
    "dt",
    "duration",
    "bus_voltage",
    "battery_voltage",
    "k1",
    "k2",
    "k3",
    "k4",
    "k5",
    "k6",
    "guard",
    "rho1",
    "rho2",
    "rho3",
    "dhat1_init_scale",
    "dhat2_init_scale",
    "dhat3_init_scale",
    "ref_refresh",
    "kp_v",
    "ki_v",
    "kp_i",
    "ki_i",
    "pi_period",
    "i_ref_limit",
    "perturb_step",
    "perturb_period",
    "pv.t_ref",
    "pv.irr_ref",
    "pv.ideality",
    "pv.i_sat_ref",
    "pv.i_sc",
    "pv.k_i",
    "pv.r_s",
    "pv.r_sh",
    "pv.e_gap",
    "grid.c_pvi",
    "grid.c_pvo",
    "grid.c_bo",
    "grid.c_bus",
    "grid.l_pv",
    "grid.l_b",
    "grid.r_pv",
    "grid.r_b",
    "grid.r_pvo",
    "grid.r_bo",
    "boost.l",
    "boost.r",
    "boost.c_in",
    "boost.c_out",
    "boost.v_diode",
    "estimator.delta_t",
    "estimator.tol_temperature",
    "estimator.tol_irradiance",
    "estimator.min_change",
    "estimator.init_temperature",
    "estimator.init_irradiance",
    "estimate.v1_fraction",
    "estimate.v2_fraction",
];

/// Keys with non-real values.
const OTHER_KEYS: [&str; 11] = [
    "controller",
    "d1_mode",
    "ref_source",
    "cancel_cross_terms",
    "record_stride",
    "pv.n_series",
    "pv.n_parallel",
    "estimator.max_iters",
    "temperature",
    "irradiance",
    "load",
];

impl Setup {
    pub fn from_preset(name: &str) -> Option<Self> {
        let p = preset(name)?;
        Some(Self {
            name: p.name.to_string(),
            base: p.name,
            description: p.description,
            kind: p.kind,
            table: p.table,
            schedule: p.schedule,
            params: p.params,
            sim: p.sim,
            fractions: (0.6, 0.8),
            applied: Vec::new(),
        })
    }

    /// A preset name, or a config file whose `scenario` key names the preset.
    pub fn resolve(target: &str) -> Result<Self> {
        if let Some(s) = Self::from_preset(target) {
            return Ok(s);
        }
        let path = Path::new(target);
        if !path.is_file() {
            bail!("`{target}` is neither a preset (see `pvdg list`) nor a config file");
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("config");
        Self::from_config(&text, stem).with_context(|| format!("in {}", path.display()))
    }

    pub fn from_config(text: &str, name: &str) -> Result<Self> {
        let entries = parse(text)?;
        let Some((_, base)) = entries
            .iter()
            .find(|(_, (k, _))| k == "scenario")
            .map(|(n, (_, v))| (n, v))
        else {
            bail!("missing `scenario = <preset>` line");
        };
        let mut s = Self::from_preset(base).ok_or_else(|| anyhow!("unknown scenario `{base}`"))?;
        s.name = name.to_string();
        for (line, (k, v)) in &entries {
            if k != "scenario" {
                s.set(k, v, Origin::File).with_context(|| format!("line {line}"))?;
            }
        }
        Ok(s)
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{kv}` is not key=value"))?;
        self.set(k.trim(), v.trim(), Origin::Override)
    }

    fn real(&mut self, key: &str) -> Option<&mut f64> {
        let p = &mut self.params;
        Some(match key {
            "dt" => &mut self.sim.dt,
            "duration" => &mut self.sim.duration,
            "bus_voltage" => &mut p.bus_voltage,
            "battery_voltage" => &mut p.battery_voltage,
            "k1" => &mut p.backstep.k[0],
            "k2" => &mut p.backstep.k[1],
            "k3" => &mut p.backstep.k[2],
            "k4" => &mut p.backstep.k[3],
            "k5" => &mut p.backstep.k[4],
            "k6" => &mut p.backstep.k[5],
            "guard" => &mut p.backstep_opts.guard,
            "rho1" => &mut p.observer.rho[0],
            "rho2" => &mut p.observer.rho[1],
            "rho3" => &mut p.observer.rho[2],
            "dhat1_init_scale" => &mut p.observer_init_scale[0],
            "dhat2_init_scale" => &mut p.observer_init_scale[1],
            "dhat3_init_scale" => &mut p.observer_init_scale[2],
            "ref_refresh" => &mut p.ref_refresh,
            "kp_v" => &mut p.pi.voltage.kp,
            "ki_v" => &mut p.pi.voltage.ki,
            "kp_i" => &mut p.pi.current.kp,
            "ki_i" => &mut p.pi.current.ki,
            "pi_period" => &mut p.pi.period,
            "i_ref_limit" => &mut p.pi.i_ref_limit,
            "perturb_step" => &mut p.perturb_step,
            "perturb_period" => &mut p.perturb_period,
            "pv.t_ref" => &mut p.pv.t_ref,
            "pv.irr_ref" => &mut p.pv.irr_ref,
            "pv.ideality" => &mut p.pv.ideality,
            "pv.i_sat_ref" => &mut p.pv.i_sat_ref,
            "pv.i_sc" => &mut p.pv.i_sc,
            "pv.k_i" => &mut p.pv.k_i,
            "pv.r_s" => &mut p.pv.r_s,
            "pv.r_sh" => &mut p.pv.r_sh,
            "pv.e_gap" => &mut p.pv.e_gap,
            "grid.c_pvi" => &mut p.microgrid.c_pvi,
            "grid.c_pvo" => &mut p.microgrid.c_pvo,
            "grid.c_bo" => &mut p.microgrid.c_bo,
            "grid.c_bus" => &mut p.microgrid.c_bus,
            "grid.l_pv" => &mut p.microgrid.l_pv,
            "grid.l_b" => &mut p.microgrid.l_b,
            "grid.r_pv" => &mut p.microgrid.r_pv,
            "grid.r_b" => &mut p.microgrid.r_b,
            "grid.r_pvo" => &mut p.microgrid.r_pvo,
            "grid.r_bo" => &mut p.microgrid.r_bo,
            "boost.l" => &mut p.boost.l,
            "boost.r" => &mut p.boost.r,
            "boost.c_in" => &mut p.boost.c_in,
            "boost.c_out" => &mut p.boost.c_out,
            "boost.v_diode" => &mut p.boost.v_diode,
            "estimator.delta_t" => &mut p.estimator.delta_t,
            "estimator.tol_temperature" => &mut p.estimator.tol_temperature,
            "estimator.tol_irradiance" => &mut p.estimator.tol_irradiance,
            "estimator.min_change" => &mut p.estimator.min_change,
            "estimator.init_temperature" => &mut p.estimator_init.temperature,
            "estimator.init_irradiance" => &mut p.estimator_init.irradiance,
            "estimate.v1_fraction" => &mut self.fractions.0,
            "estimate.v2_fraction" => &mut self.fractions.1,
            _ => return None,
        })
    }

    fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<()> {
        let bad = || anyhow!("bad value `{value}` for `{key}`");
        if let Some(slot) = self.real(key) {
            *slot = value.parse().map_err(|_| bad())?;
        } else {
            match key {
                "controller" => self.sim.controller = ControllerKind::from_name(value).ok_or_else(bad)?,
                "d1_mode" => {
                    self.sim.d1_mode = match value {
                        "coupled" => D1Mode::Coupled,
                        "constant" => D1Mode::Constant,
                        _ => return Err(bad()),
                    }
                }
                "ref_source" => {
                    self.params.ref_source = match value {
                        "observer" => RefSource::Observer,
                        "truth" => RefSource::Truth,
                        _ => return Err(bad()),
                    }
                }
                "cancel_cross_terms" => {
                    self.params.backstep_opts.cancel_cross_terms = value.parse().map_err(|_| bad())?
                }
                "record_stride" => self.sim.record_stride = value.parse().map_err(|_| bad())?,
                "pv.n_series" => self.params.pv.n_series = value.parse().map_err(|_| bad())?,
                "pv.n_parallel" => self.params.pv.n_parallel = value.parse().map_err(|_| bad())?,
                "estimator.max_iters" => self.params.estimator.max_iters = value.parse().map_err(|_| bad())?,
                "temperature" => self.schedule.temperature = parse_steps(value).ok_or_else(bad)?,
                "irradiance" => self.schedule.irradiance = parse_steps(value).ok_or_else(bad)?,
                "load" => self.schedule.load = parse_steps(value).ok_or_else(bad)?,
                "scenario" => bail!("`scenario` can only be set in a config file"),
                _ => bail!("unknown key `{key}`"),
            }
        }
        self.applied.push((key.to_string(), value.to_string(), origin));
        Ok(())
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut copy = self.clone();
        let mut out: Vec<(&'static str, String)> = vec![
            ("controller", self.sim.controller.name().to_string()),
            (
                "d1_mode",
                match self.sim.d1_mode {
                    D1Mode::Coupled => "coupled",
                    D1Mode::Constant => "constant",
                }
                .to_string(),
            ),
            (
                "ref_source",
                match self.params.ref_source {
                    RefSource::Observer => "observer",
                    RefSource::Truth => "truth",
                }
                .to_string(),
            ),
            (
                "cancel_cross_terms",
                self.params.backstep_opts.cancel_cross_terms.to_string(),
            ),
            ("record_stride", self.sim.record_stride.to_string()),
            ("pv.n_series", self.params.pv.n_series.to_string()),
            ("pv.n_parallel", self.params.pv.n_parallel.to_string()),
            ("estimator.max_iters", self.params.estimator.max_iters.to_string()),
            ("temperature", format_steps(&self.schedule.temperature)),
            ("irradiance", format_steps(&self.schedule.irradiance)),
            ("load", format_steps(&self.schedule.load)),
        ];
        for key in REAL_KEYS {
            if let Some(v) = copy.real(key) {
                out.push((key, format!("{:e}", *v)));
            }
        }
        out
    }

    /// SHA-256 over the base preset and the resolved values.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("scenario = {}\n", self.base));
        for (k, v) in self.entries() {
            h.update(format!("{k} = {v}\n"));
        }
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// The resolved setup in config-file form.
    pub fn render(&self) -> String {
        let mut s = format!("# {}\nscenario = {}\n", self.description, self.base);
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// True when the array's current temperature coefficient is the
    /// untabulated default of the 36-cell module and was not overridden.
    pub fn k_i_assumed(&self) -> bool {
        let module = pvdg_core::pv::PvArrayParams::module_36cell();
        self.params.pv.i_sc == module.i_sc
            && self.params.pv.k_i == module.k_i
            && !self.applied.iter().any(|(k, _, _)| k == "pv.k_i")
    }
}

/// `(line number, (key, value))` for every setting line.
fn parse(text: &str) -> Result<Vec<(usize, (String, String))>> {
    let mut out: Vec<(usize, (String, String))> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            bail!("line {}: empty key or value", n + 1);
        }
        if out.iter().any(|(_, (seen, _))| seen == k) {
            bail!("line {}: `{k}` set twice", n + 1);
        }
        out.push((n + 1, (k.to_string(), v.to_string())));
    }
    Ok(out)
}

/// `t0:v0, t1:v1, ...`; a bare number is a constant.
fn parse_steps(s: &str) -> Option<Vec<Segment>> {
    if let Ok(v) = s.parse::<f64>() {
        return Some(Schedule::steps(&[(0.0, v)]));
    }
    s.split(',')
        .map(|item| {
            let (t, v) = item.split_once(':')?;
            Some(Segment {
                start: t.trim().parse().ok()?,
                value: v.trim().parse().ok()?,
            })
        })
        .collect()
}

fn format_steps(ch: &[Segment]) -> String {
    ch.iter()
        .map(|s| format!("{:e}:{:e}", s.start, s.value))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn all_keys() -> impl Iterator<Item = &'static str> {
    OTHER_KEYS.into_iter().chain(REAL_KEYS)
}
