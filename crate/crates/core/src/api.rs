//! Service boundary for a live run.
//!
//! [`Service`] is synchronous and owns at most one simulation. A transport
//! (the HTTP server in the CLI crate) wraps it in a lock, calls
//! [`Service::tick`] on a timer and forwards client requests, so every read
//! sees the state between two ticks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventlog::{render, LogError, StateSnapshot, WireEvent};
use crate::job::{load_job, JobSpec, TaskId};
use crate::scheduler::{MessageKind, RejectReason};
use crate::sim::{RunMetrics, ScenarioScript, ScriptAction, SimConfig, SimError, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    /// Starts a run of an uploaded job; without a scenario the run is
    /// interactive.
    StartRun {
        job: String,
        #[serde(default)]
        scenario: Option<String>,
    },
    Delegate { task: TaskId },
    Reassign { task: TaskId },
    ConfirmDone { task: TaskId },
    SetHumanSpeed { factor: f64 },
    Pause,
    Resume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandRejection {
    NoRun,
    RunActive,
    UnknownJob,
    UnknownScenario,
    InvalidFactor,
    /// Confirming a task the operator is not working on.
    NotCurrent,
    Scheduler(RejectReason),
}

impl std::fmt::Display for CommandRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommandRejection::NoRun => f.write_str("no active run"),
            CommandRejection::RunActive => f.write_str("a run is already active"),
            CommandRejection::UnknownJob => f.write_str("unknown job"),
            CommandRejection::UnknownScenario => f.write_str("unknown scenario"),
            CommandRejection::InvalidFactor => f.write_str("speed factor must be positive"),
            CommandRejection::NotCurrent => f.write_str("task is not the operator's current task"),
            CommandRejection::Scheduler(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Ack {
    /// `clock` is the server-side stamp; the effect appears in the log at
    /// sequence `from_seq` or later.
    Accepted { clock: f64, from_seq: u64 },
    Rejected { reason: CommandRejection },
}

impl Ack {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Ack::Accepted { .. })
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no active run")]
    NotFound,
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid upload: {0}")]
    Upload(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceState {
    pub run_id: String,
    pub job: String,
    pub scenario: Option<String>,
    #[serde(flatten)]
    pub snapshot: StateSnapshot,
    pub paused: bool,
    pub human_speed: f64,
    /// Sequence number of the last log entry, if any.
    pub last_seq: Option<u64>,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub sim: SimConfig,
    /// Directory for per-run log files; none keeps logs in memory only.
    pub log_dir: Option<PathBuf>,
}

struct Run {
    id: String,
    job: String,
    scenario: Option<String>,
    sim: Simulation,
    paused: bool,
    log_path: Option<PathBuf>,
}

pub struct Service {
    config: ServiceConfig,
    jobs: BTreeMap<String, Arc<JobSpec>>,
    scenarios: BTreeMap<String, ScenarioScript>,
    run: Option<Run>,
    runs_started: u64,
}

impl Service {
    pub fn new(config: ServiceConfig) -> Self {
        Self { config, jobs: BTreeMap::new(), scenarios: BTreeMap::new(), run: None, runs_started: 0 }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn add_job(&mut self, name: &str, job: JobSpec) {
        self.jobs.insert(name.to_string(), Arc::new(job));
    }

    pub fn upload_job(&mut self, name: &str, source: &str) -> Result<(), ApiError> {
        let job = load_job(source).map_err(|e| ApiError::Upload(e.to_string()))?;
        self.add_job(name, job);
        Ok(())
    }

    pub fn upload_scenario(&mut self, name: &str, source: &str) -> Result<(), ApiError> {
        let script = ScenarioScript::parse(source).map_err(|e| ApiError::Upload(e.to_string()))?;
        self.scenarios.insert(name.to_string(), script);
        Ok(())
    }

    pub fn add_scenario(&mut self, name: &str, script: ScenarioScript) {
        self.scenarios.insert(name.to_string(), script);
    }

    pub fn job_names(&self) -> impl Iterator<Item = &str> {
        self.jobs.keys().map(String::as_str)
    }

    pub fn scenario_names(&self) -> impl Iterator<Item = &str> {
        self.scenarios.keys().map(String::as_str)
    }

    pub fn has_run(&self) -> bool {
        self.run.is_some()
    }

    pub fn is_running(&self) -> bool {
        self.run.as_ref().is_some_and(|r| !r.sim.is_complete())
    }

    pub fn get_state(&self) -> Result<ServiceState, ApiError> {
        let run = self.run.as_ref().ok_or(ApiError::NotFound)?;
        let log = run.sim.log();
        Ok(ServiceState {
            run_id: run.id.clone(),
            job: run.job.clone(),
            scenario: run.scenario.clone(),
            snapshot: run.sim.snapshot(),
            paused: run.paused,
            human_speed: run.sim.human_speed(),
            last_seq: log.entries().last().map(|e| e.seq),
            metrics: run.sim.metrics().clone(),
        })
    }

    pub fn post_command(&mut self, command: Command) -> Result<Ack, ApiError> {
        if let Command::StartRun { job, scenario } = command {
            return self.start_run(&job, scenario.as_deref());
        }
        let Some(run) = self.run.as_mut() else {
            return Ok(Ack::Rejected { reason: CommandRejection::NoRun });
        };
        let from_seq = run.sim.log().len() as u64;
        let action = match command {
            Command::StartRun { .. } => unreachable!("handled above"),
            Command::Pause | Command::Resume => {
                if run.sim.is_complete() {
                    return Ok(reject(RejectReason::RunComplete));
                }
                run.paused = command == Command::Pause;
                return Ok(Ack::Accepted { clock: run.sim.clock(), from_seq });
            }
            Command::Delegate { task } => {
                if let Err(r) = run.sim.check_operator_message(MessageKind::Delegate(task)) {
                    return Ok(reject(r));
                }
                ScriptAction::Delegate { task }
            }
            Command::Reassign { task } => {
                if let Err(r) = run.sim.check_operator_message(MessageKind::Reassign(task)) {
                    return Ok(reject(r));
                }
                ScriptAction::Reassign { task }
            }
            Command::ConfirmDone { task } => {
                if run.sim.is_complete() {
                    return Ok(reject(RejectReason::RunComplete));
                }
                if run.sim.state().current_human != Some(task) {
                    return Ok(Ack::Rejected { reason: CommandRejection::NotCurrent });
                }
                ScriptAction::ConfirmDone { task }
            }
            Command::SetHumanSpeed { factor } => {
                if !(factor > 0.0 && factor.is_finite()) {
                    return Ok(Ack::Rejected { reason: CommandRejection::InvalidFactor });
                }
                ScriptAction::HumanSpeed { factor }
            }
        };
        match run.sim.inject(action) {
            Ok(clock) => Ok(Ack::Accepted { clock, from_seq }),
            Err(r) => Ok(reject(r)),
        }
    }

    fn start_run(&mut self, job_name: &str, scenario: Option<&str>) -> Result<Ack, ApiError> {
        if self.is_running() {
            return Ok(Ack::Rejected { reason: CommandRejection::RunActive });
        }
        let Some(job) = self.jobs.get(job_name).cloned() else {
            return Ok(Ack::Rejected { reason: CommandRejection::UnknownJob });
        };
        let script = match scenario {
            None => ScenarioScript::new(self.config.sim.seed),
            Some(name) => match self.scenarios.get(name) {
                Some(s) => s.clone(),
                None => return Ok(Ack::Rejected { reason: CommandRejection::UnknownScenario }),
            },
        };
        self.runs_started += 1;
        let id = format!("run-{}", self.runs_started);
        let mut sim = Simulation::nominal(job, script, self.config.sim)?;
        let log_path = match &self.config.log_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(LogError::from)?;
                let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
                let path = dir.join(format!("{id}-{stamp}.jsonl"));
                sim = sim.with_log_file(&path)?;
                Some(path)
            }
            None => None,
        };
        tracing::info!(run = %id, job = job_name, scenario = ?scenario, "run started");
        self.run = Some(Run {
            id,
            job: job_name.to_string(),
            scenario: scenario.map(str::to_string),
            sim,
            paused: false,
            log_path,
        });
        Ok(Ack::Accepted { clock: 0.0, from_seq: 0 })
    }

    /// Advances the active run by one tick unless paused or finished.
    /// Returns the number of new log entries.
    pub fn tick(&mut self) -> Result<usize, ApiError> {
        let Some(run) = self.run.as_mut() else { return Ok(0) };
        if run.paused || run.sim.is_complete() {
            return Ok(0);
        }
        let before = run.sim.log().len();
        run.sim.tick()?;
        if run.sim.is_complete() {
            tracing::info!(run = %run.id, makespan = run.sim.metrics().makespan, "run complete");
        }
        Ok(run.sim.log().len() - before)
    }

    /// Ticks until the run completes or `max_ticks` elapse.
    pub fn run_to_end(&mut self, max_ticks: u64) -> Result<(), ApiError> {
        for _ in 0..max_ticks {
            if !self.is_running() || self.run.as_ref().is_some_and(|r| r.paused) {
                break;
            }
            self.tick()?;
        }
        Ok(())
    }

    /// Log entries from sequence `from` on. `from` may equal the next
    /// sequence number, giving an empty tail.
    pub fn stream_events(&self, from: i64) -> Result<Vec<WireEvent>, ApiError> {
        let run = self.run.as_ref().ok_or(ApiError::NotFound)?;
        Ok(run.sim.log().since(from)?.to_vec())
    }

    /// The run log as JSON lines.
    pub fn run_log(&self) -> Result<String, ApiError> {
        let run = self.run.as_ref().ok_or(ApiError::NotFound)?;
        Ok(render(run.sim.log().entries()))
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.run.as_ref().and_then(|r| r.log_path.as_deref())
    }
}

fn reject(reason: RejectReason) -> Ack {
    Ack::Rejected { reason: CommandRejection::Scheduler(reason) }
}
