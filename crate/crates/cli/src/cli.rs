//! Command-line entry points.

use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cellsched::api::{Command, Service, ServiceConfig};
use cellsched::assignment::solve_assignment;
use cellsched::eventlog::{read_log_file, render, Payload, Replay, WireEvent};
use cellsched::job::{load_job, AgentId, JobSpec};
use cellsched::scheduler::SchedulerEvent;
use cellsched::sim::{baseline_run, run_scenario, ScenarioScript, SimConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "cellsched", version, about = "Task allocation and reactive scheduling for a human-robot cell")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Solve the nominal assignment of a job file.
    Assign {
        job: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario against a job and print the run metrics.
    Simulate {
        job: PathBuf,
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
        /// Disable list reordering.
        #[arg(long)]
        baseline: bool,
        /// Write the event log to this file.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Re-emit a recorded event log.
    Replay {
        log: PathBuf,
        /// Print the log lines unchanged instead of a readable trace.
        #[arg(long)]
        raw: bool,
    },
    /// Serve the live cell over HTTP.
    Serve {
        #[arg(long)]
        job: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, env = "CELLSCHED_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "CELLSCHED_LOG_DIR")]
        log_dir: Option<PathBuf>,
        /// Wall-clock seconds per normalized time unit.
        #[arg(long, env = "CELLSCHED_TIME_SCALE", default_value_t = 40.0)]
        time_scale: f64,
        /// Start a run immediately instead of waiting for a start command.
        #[arg(long)]
        start: bool,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SimArgs {
    /// Clock increment in normalized time units.
    #[arg(long, env = "CELLSCHED_TICK")]
    pub tick: Option<f64>,
    /// Robot tasks overrunning this multiple of their duration are handed over.
    #[arg(long, env = "CELLSCHED_TIMEOUT_FACTOR")]
    pub timeout_factor: Option<f64>,
}

impl SimArgs {
    pub fn config(self) -> SimConfig {
        let mut c = SimConfig::default();
        if let Some(t) = self.tick {
            c.tick = t;
        }
        if let Some(f) = self.timeout_factor {
            c.scheduler.timeout_factor = f;
        }
        c
    }
}

fn read_job(path: &Path) -> Result<JobSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_job(&text).with_context(|| format!("loading {}", path.display()))
}

fn read_scenario(path: &Path) -> Result<ScenarioScript> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioScript::parse(&text).with_context(|| format!("loading {}", path.display()))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Cmd::Assign { job, json } => assign(&read_job(&job)?, json, out),
        Cmd::Simulate { job, scenario, json, baseline, log, sim } => {
            let job = read_job(&job)?;
            let script = read_scenario(&scenario)?;
            let config = sim.config();
            let outcome = if baseline { baseline_run(&job, &script, &config)? } else { run_scenario(&job, &script, &config)? };
            if let Some(path) = log {
                fs::write(&path, render(&outcome.log)).with_context(|| format!("writing {}", path.display()))?;
            }
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&outcome.metrics)?)?;
            } else {
                write!(out, "{}", outcome.metrics.render())?;
            }
            Ok(())
        }
        Cmd::Replay { log, raw } => replay(&read_log_file(&log).with_context(|| format!("reading {}", log.display()))?, raw, out),
        Cmd::Serve { job, scenario, listen, log_dir, time_scale, start, sim } => {
            if time_scale.is_nan() || time_scale <= 0.0 {
                bail!("time scale must be positive");
            }
            let job_spec = read_job(&job)?;
            let config = sim.config();
            let mut service = Service::new(ServiceConfig { sim: config, log_dir });
            let job_name = job_spec.name.clone();
            service.add_job(&job_name, job_spec);
            let scenario_name = match scenario {
                Some(path) => {
                    let name = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
                    service.add_scenario(&name, read_scenario(&path)?);
                    Some(name)
                }
                None => None,
            };
            if start {
                let ack = service.post_command(Command::StartRun { job: job_name, scenario: scenario_name })?;
                if !ack.is_accepted() {
                    bail!("could not start run: {ack:?}");
                }
            }
            let interval = Duration::from_secs_f64(config.tick * time_scale);
            serve(AppState::new(service), listen, interval)
        }
    }
}

fn assign(job: &JobSpec, json: bool, out: &mut dyn Write) -> Result<()> {
    let s = solve_assignment(job)?;
    if json {
        let value = json!({
            "job": job.name,
            "human": s.human_list,
            "robot": s.robot_list,
            "cycle_time": s.cycle_time,
            "objective": s.objective,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&value)?)?;
    } else {
        writeln!(out, "job        {}", job.name)?;
        writeln!(out, "human      {}", s.human_list)?;
        writeln!(out, "robot      {}", s.robot_list)?;
        writeln!(out, "cycle time {:.6}", s.cycle_time)?;
        writeln!(out, "objective  {:.6}", s.objective)?;
    }
    Ok(())
}

fn describe(e: &SchedulerEvent) -> String {
    match e {
        SchedulerEvent::TaskStarted { agent, task } => format!("{agent} starts {task}"),
        SchedulerEvent::TaskCompleted { agent, task } => format!("{agent} completes {task}"),
        SchedulerEvent::TaskAborted { agent, task } => format!("{agent} aborts {task}"),
        SchedulerEvent::TaskRestarted { agent, task } => format!("{agent} restarts {task}"),
        SchedulerEvent::RescheduleApplied(f) => {
            format!("reschedule t_res={:.3} budget={:.3} fill {} -> robot {}", f.t_res, f.budget, f.filled, f.after)
        }
        SchedulerEvent::MessageReceived { message } => format!("message {:?}", message.kind),
        SchedulerEvent::MessageRejected { message, reason } => format!("message {:?} rejected: {reason}", message.kind),
        SchedulerEvent::Delegation { task, from, to } => format!("{task} moves {from} -> {to}"),
        SchedulerEvent::HomingInserted => "robot homing queued".into(),
        SchedulerEvent::RunCompleted => "run complete".into(),
    }
}

fn replay(log: &[WireEvent], raw: bool, out: &mut dyn Write) -> Result<()> {
    if raw {
        write!(out, "{}", render(log))?;
        return Ok(());
    }
    for e in log {
        let line = match &e.payload {
            Payload::Event(ev) => describe(ev),
            Payload::Script(a) => format!("script {a:?}"),
            Payload::Snapshot(_) => continue,
        };
        writeln!(out, "{:>5} {:>8.3}  {line}", e.seq, e.clock)?;
    }
    let end = Replay::fold(log);
    if let Some(s) = end.snapshot {
        writeln!(out, "human {}  robot {}  done {}", s.human_list, s.robot_list, end.done.len())?;
        let by = |agent: AgentId| {
            log.iter()
                .filter_map(|e| match e.payload {
                    Payload::Event(SchedulerEvent::TaskCompleted { agent: a, task }) if a == agent && !task.is_homing() => Some(task.to_string()),
                    _ => None,
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(out, "human did {}", by(AgentId::Human))?;
        writeln!(out, "robot did {}", by(AgentId::Robot))?;
    }
    Ok(())
}

fn serve(state: AppState, listen: SocketAddr, interval: Duration) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen).await.with_context(|| format!("binding {listen}"))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        tokio::spawn(server::drive(state.clone(), interval));
        axum::serve(listener, server::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

pub fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    run(cli, &mut io::stdout().lock())
}
