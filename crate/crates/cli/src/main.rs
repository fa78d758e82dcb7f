mod config;
mod output;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pvdg_core::presets::{PresetKind, CH2_CASES, NAMES};
use pvdg_core::sim::{estimation_report, run_scenario};

use config::Setup;
use output::ManifestInfo;

#[derive(Parser)]
#[command(name = "pvdg", version, about = "PV + battery DC microgrid scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run presets or config files; `all` expands to every preset.
    Run {
        #[arg(required = true, value_name = "SCENARIO|PATH")]
        targets: Vec<String>,
        /// `key=value`, applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Each run writes to `<out>/<name>/`.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Presets with one-line descriptions.
    List,
    /// Print the resolved configuration in config-file form.
    Show {
        #[arg(value_name = "SCENARIO|PATH")]
        target: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Every configuration key.
    Keys,
}

fn resolve(target: &str, overrides: &[String]) -> Result<Setup> {
    let mut s = Setup::resolve(target)?;
    for kv in overrides {
        s.apply_override(kv)?;
    }
    Ok(s)
}

/// Writes the outputs of one setup into `dir`.
fn execute(setup: &Setup, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = |f: &str| dir.join(f);
    let mut outputs = Vec::new();
    let metrics = match setup.kind {
        PresetKind::Simulation => {
            let trace = run_scenario(&setup.schedule, &setup.params, &setup.sim)?;
            let file = fs::File::create(path("trace.csv"))?;
            let mut w = BufWriter::new(file);
            output::write_trace(&mut w, &trace)?;
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
            outputs.push(path("trace.csv").display().to_string());
            output::simulation_metrics(setup, &trace)
        }
        PresetKind::EstimationTable => {
            let rows = estimation_report(
                &setup.params.pv,
                &CH2_CASES,
                setup.fractions,
                &setup.params.estimator_init,
                &setup.params.estimator,
            )?;
            output::estimation_metrics(setup, &rows)
        }
    };
    fs::write(path("metrics.txt"), metrics)?;
    outputs.push(path("metrics.txt").display().to_string());
    outputs.push(path("manifest.txt").display().to_string());
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    fs::write(
        path("manifest.txt"),
        output::manifest(
            setup,
            &ManifestInfo {
                outputs: &outputs,
                timestamp,
            },
        ),
    )?;
    Ok(())
}

fn run(targets: &[String], overrides: &[String], out: &Path, jobs: usize) -> Result<()> {
    let names: Vec<String> = targets
        .iter()
        .flat_map(|t| {
            if t == "all" {
                NAMES.iter().map(|n| n.to_string()).collect()
            } else {
                vec![t.clone()]
            }
        })
        .collect();
    let setups = names
        .iter()
        .map(|t| resolve(t, overrides))
        .collect::<Result<Vec<_>>>()?;
    for (k, s) in setups.iter().enumerate() {
        if setups[..k].iter().any(|o| o.name == s.name) {
            bail!(
                "two runs named `{}` would share {}",
                s.name,
                out.join(&s.name).display()
            );
        }
    }

    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, setups.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(s) = setups.get(k) else { break };
                let dir = out.join(&s.name);
                match execute(s, &dir).with_context(|| format!("running {}", s.name)) {
                    Ok(()) => println!("{}: wrote {}", s.name, dir.display()),
                    Err(e) => failures.lock().unwrap().push(format!("{e:#}")),
                }
            });
        }
    });
    let failures = failures.into_inner().unwrap();
    for f in &failures {
        eprintln!("error: {f}");
    }
    if !failures.is_empty() {
        bail!("{} of {} runs failed", failures.len(), setups.len());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            targets,
            overrides,
            out,
            jobs,
        } => run(&targets, &overrides, &out, jobs),
        Command::List => {
            for n in NAMES {
                let s = Setup::from_preset(n).expect("preset names resolve");
                println!("{n:<13} {}", s.description);
            }
            Ok(())
        }
        Command::Show { target, overrides } => {
            print!("{}", resolve(&target, &overrides)?.render());
            Ok(())
        }
        Command::Keys => {
            for k in config::all_keys() {
                println!("{k}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
