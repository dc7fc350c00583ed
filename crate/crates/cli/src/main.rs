//! `pagecurve`: batch runner producing entropy curves as CSV plus a TOML manifest.

mod config;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use toml::{Table, Value};

use config::{Axis, ExperimentConfig, Model};
use runner::{Outcome, Status};

/// Exit code for runs that finished but failed their convergence check.
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pagecurve",
    version,
    about = "Entropy dynamics of a damped oscillator and a spin-boson qubit"
)]
struct Cli {
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment.
    Run {
        #[arg(long, value_enum)]
        model: Option<Model>,
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set gamma=0.002`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Cartesian product of `--vary` axes over a config template.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=v1,v2,...`; an empty list yields no runs.
        #[arg(long = "vary", value_name = "KEY=V1,V2,...")]
        vary: Vec<Axis>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce one of the shipped figure presets (fig1..fig4).
    Preset {
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct RunRecord {
    name: String,
    status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    seconds: f64,
    config: Value,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    outcome: Option<Outcome>,
}

#[derive(Serialize)]
struct Manifest {
    tool: String,
    command: String,
    runs: Vec<RunRecord>,
}

/// A run that is either ready to execute or was rejected while resolving.
enum Job {
    Ready(ExperimentConfig),
    Invalid {
        name: String,
        table: Table,
        error: String,
    },
}

fn resolve_all(tables: Vec<Table>) -> Vec<Job> {
    tables
        .into_iter()
        .map(|t| match ExperimentConfig::from_table(t.clone()) {
            Ok(c) => Job::Ready(c),
            Err(e) => Job::Invalid {
                name: t
                    .get("name")
                    .and_then(Value::as_str)
                    .unwrap_or("run")
                    .to_string(),
                table: t,
                error: format!("{e:#}"),
            },
        })
        .collect()
}

fn execute(job: &Job, out: &Path) -> RunRecord {
    let cfg = match job {
        Job::Ready(c) => c,
        Job::Invalid { name, table, error } => {
            eprintln!("{name}: rejected: {error}");
            return RunRecord {
                name: name.clone(),
                status: Status::Failed,
                csv: None,
                error: Some(error.clone()),
                seconds: 0.0,
                config: Value::Table(table.clone()),
                outcome: None,
            };
        }
    };
    let start = Instant::now();
    log::info!("starting {}", cfg.name);
    let result = runner::run(cfg, out);
    let seconds = start.elapsed().as_secs_f64();
    let config = Value::try_from(cfg).unwrap_or_else(|_| Value::Table(Table::new()));
    let csv = format!("{}.csv", cfg.name);
    match result {
        Ok(o) => {
            let s = &o.summary;
            println!(
                "{}: {}, S_max = {:.6} at t = {:.3}, S(end) = {:.6} ({seconds:.1} s)",
                cfg.name, o.status, s.s_max, s.t_page, s.s_final
            );
            RunRecord {
                name: cfg.name.clone(),
                status: o.status,
                csv: Some(csv),
                error: None,
                seconds,
                config,
                outcome: Some(o),
            }
        }
        Err(e) => {
            eprintln!("{}: failed: {e:#}", cfg.name);
            RunRecord {
                name: cfg.name.clone(),
                status: Status::Failed,
                csv: None,
                error: Some(format!("{e:#}")),
                seconds,
                config,
                outcome: None,
            }
        }
    }
}

fn run_jobs(jobs: &[Job], out: &Path, threads: Option<usize>) -> Result<Vec<RunRecord>> {
    let mut names: Vec<&str> = jobs
        .iter()
        .filter_map(|j| match j {
            Job::Ready(c) => Some(c.name.as_str()),
            Job::Invalid { .. } => None,
        })
        .collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        anyhow::bail!("two runs would both write {}.csv", w[0]);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()?;
    Ok(pool.install(|| jobs.par_iter().map(|j| execute(j, out)).collect()))
}

fn write_manifest(out: &Path, command: String, runs: Vec<RunRecord>) -> Result<ExitCode> {
    let code = if runs.iter().any(|r| r.status == Status::Failed) {
        ExitCode::FAILURE
    } else if runs.iter().any(|r| r.status == Status::NotConverged) {
        ExitCode::from(EXIT_NOT_CONVERGED)
    } else {
        ExitCode::SUCCESS
    };
    let manifest = Manifest {
        tool: format!("pagecurve {}", env!("CARGO_PKG_VERSION")),
        command,
        runs,
    };
    let path = out.join("manifest.toml");
    let text = toml::to_string_pretty(&manifest).context("serializing manifest")?;
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(code)
}

/// Build the job list. Errors here are usage errors.
fn plan(command: &Command) -> Result<(Vec<Job>, &Path, String)> {
    Ok(match command {
        Command::Run {
            model,
            config,
            sets,
            out,
        } => {
            let mut table = config::read_table(config)?;
            config::apply_overrides(&mut table, sets)?;
            if let Some(m) = model {
                table.insert("model".into(), Value::String(m.to_string()));
            }
            let cfg = ExperimentConfig::from_table(table)?;
            (
                vec![Job::Ready(cfg)],
                out.as_path(),
                format!("run {}", config.display()),
            )
        }
        Command::Sweep {
            config,
            vary,
            sets,
            out,
        } => {
            let mut template = config::read_table(config)?;
            config::apply_overrides(&mut template, sets)?;
            let jobs = resolve_all(config::expand(&template, vary));
            let axes: Vec<&str> = vary.iter().map(|a| a.key.as_str()).collect();
            (
                jobs,
                out.as_path(),
                format!("sweep {} over [{}]", config.display(), axes.join(", ")),
            )
        }
        Command::Preset { name, out } => {
            let jobs = config::preset(name)?
                .into_iter()
                .map(ExperimentConfig::from_table)
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .map(Job::Ready)
                .collect();
            (jobs, out.as_path(), format!("preset {name}"))
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (jobs, out, command) = match plan(&cli.command) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let result = std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .and_then(|_| run_jobs(&jobs, out, cli.jobs))
        .and_then(|runs| write_manifest(out, command, runs));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
