//! Fixed-tick simulation of the collaborative cell.
//!
//! The simulated operator replays each task's reference trajectory at the
//! current speed factor with Gaussian jitter; the monitor sees only those
//! samples. Task end conditions are not random: the operator finishes a task
//! after exactly `t_H / speed` of work, and the robot after exactly `t_R`
//! unless a failure was scripted for that attempt.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{solve_assignment, AssignError};
use crate::eventlog::{EventLog, LogError, Payload, StateSnapshot, WireEvent};
use crate::job::{AgentId, JobSpec, TaskId, TaskList};
use crate::monitor::{HumanMonitor, MonitorError, ReferenceLibrary, DEFAULT_DIM};
use crate::scheduler::{
    FillRecord, Message, MessageKind, MonitorInputs, RejectReason, RobotVerdict, Scheduler, SchedulerConfig, SchedulerEvent,
    SchedulerFault, SchedulerState,
};

/// Slack for comparing a clock value to a scripted time or a duration.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptAction {
    /// Operator works at `factor` times nominal speed from now on.
    HumanSpeed { factor: f64 },
    /// The robot's next attempt at `task` (or the running one) never finishes.
    RobotFailure { task: TaskId },
    Delegate { task: TaskId },
    Reassign { task: TaskId },
    /// Operator declares the current task finished.
    ConfirmDone { task: TaskId },
}

impl ScriptAction {
    pub fn task(&self) -> Option<TaskId> {
        match *self {
            ScriptAction::HumanSpeed { .. } => None,
            ScriptAction::RobotFailure { task }
            | ScriptAction::Delegate { task }
            | ScriptAction::Reassign { task }
            | ScriptAction::ConfirmDone { task } => Some(task),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub at: f64,
    #[serde(flatten)]
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "event", default)]
    pub events: Vec<ScriptEvent>,
}

impl ScenarioScript {
    pub fn new(seed: u64) -> Self {
        Self { seed, events: Vec::new() }
    }

    pub fn at(mut self, at: f64, action: ScriptAction) -> Self {
        self.events.push(ScriptEvent { at, action });
        self
    }

    /// Parses a TOML scenario:
    ///
    /// ```toml
    /// seed = 7
    /// [[event]]
    /// at = 0.75
    /// kind = "human_speed"
    /// factor = 0.5
    /// ```
    pub fn parse(source: &str) -> Result<Self, SimError> {
        let script: Self = toml::from_str(source).map_err(|e| SimError::Script(e.to_string()))?;
        script.check_shape()?;
        Ok(script)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("scenario scripts always serialize")
    }

    fn check_shape(&self) -> Result<(), SimError> {
        let mut last = 0.0;
        for (i, e) in self.events.iter().enumerate() {
            if !e.at.is_finite() || e.at < 0.0 {
                return Err(SimError::Script(format!("event {i}: time {} must be finite and non-negative", e.at)));
            }
            if e.at < last {
                return Err(SimError::Script(format!("event {i}: events must be sorted by time")));
            }
            last = e.at;
            if let ScriptAction::HumanSpeed { factor } = e.action {
                if !(factor > 0.0 && factor.is_finite()) {
                    return Err(SimError::Script(format!("event {i}: speed factor must be positive")));
                }
            }
        }
        Ok(())
    }

    /// Shape checks plus task ids known to `job`.
    pub fn validate(&self, job: &JobSpec) -> Result<(), SimError> {
        self.check_shape()?;
        for (i, e) in self.events.iter().enumerate() {
            if let Some(t) = e.action.task() {
                if !job.contains(t) {
                    return Err(SimError::Script(format!("event {i}: unknown task {t}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Clock increment and monitor sample period.
    pub tick: f64,
    pub scheduler: SchedulerConfig,
    pub jitter_sigma: f64,
    pub dim: usize,
    /// Mixed into the script seed; lets a caller rerun one script with
    /// different trajectory noise.
    pub seed: u64,
    pub max_ticks: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick: 0.005,
            scheduler: SchedulerConfig::default(),
            jitter_sigma: 0.01,
            dim: DEFAULT_DIM,
            seed: 0,
            max_ticks: 2_000_000,
        }
    }
}

impl SimConfig {
    pub fn baseline(mut self) -> Self {
        self.scheduler.rescheduling = false;
        self
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return Err(SimError::Config("tick must be positive".into()));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(SimError::Config("jitter sigma must be non-negative".into()));
        }
        if self.dim == 0 {
            return Err(SimError::Config("trajectory dimension must be positive".into()));
        }
        if !(self.scheduler.timeout_factor >= 1.0) {
            return Err(SimError::Config("timeout factor must be at least 1".into()));
        }
        if !(self.scheduler.homing_duration >= 0.0) {
            return Err(SimError::Config("homing duration must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Script(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error(transparent)]
    Fault(#[from] SchedulerFault),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("run did not finish within {ticks} ticks")]
    Stalled { ticks: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: TaskId,
    pub agent: AgentId,
    pub start: f64,
    pub finish: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub clock: f64,
    pub message: Message,
    pub rejected: Option<RejectReason>,
}

/// Idle time is time an agent spends without a task before it stops working
/// for good (its last completion or abort); after that it is done, not idle.
/// So
/// `busy + idle == finish <= makespan` per agent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub makespan: f64,
    pub human_finish: f64,
    pub robot_finish: f64,
    pub human_busy: f64,
    pub robot_busy: f64,
    pub human_idle: f64,
    pub robot_idle: f64,
    /// One record per job task, in completion order.
    pub tasks: Vec<TaskRecord>,
    pub reschedules: usize,
    pub fills: Vec<FillRecord>,
    pub messages: Vec<MessageRecord>,
}

impl RunMetrics {
    pub fn agent_of(&self, task: TaskId) -> Option<AgentId> {
        self.tasks.iter().find(|r| r.task == task).map(|r| r.agent)
    }

    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "makespan    {:.4}", self.makespan);
        let _ = writeln!(out, "human busy  {:.4}  idle {:.4}  done at {:.4}", self.human_busy, self.human_idle, self.human_finish);
        let _ = writeln!(out, "robot busy  {:.4}  idle {:.4}  done at {:.4}", self.robot_busy, self.robot_idle, self.robot_finish);
        let _ = writeln!(out, "reschedules {}", self.reschedules);
        for r in &self.tasks {
            let _ = writeln!(out, "  {:<6} {:<5} {:>8.4} {:>8.4}", r.task.to_string(), r.agent.to_string(), r.start, r.finish);
        }
        for m in &self.messages {
            let verdict = m.rejected.map_or("accepted".to_string(), |r| format!("rejected ({r})"));
            let _ = writeln!(out, "  msg {:>8.4} {:?} {}", m.clock, m.message.kind, verdict);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub log: Vec<WireEvent>,
}

#[derive(Debug)]
struct HumanAgent {
    task: Option<TaskId>,
    monitor: Option<HumanMonitor>,
    /// Nominal work done on the current task, in normalized time.
    work: f64,
    speed: f64,
    confirmed: bool,
}

#[derive(Debug, Default)]
struct RobotAgent {
    pending_failures: BTreeSet<TaskId>,
    attempt_fails: bool,
}

/// A simulation in progress. Drive it with [`Simulation::tick`] or
/// [`Simulation::run`]; [`Simulation::inject`] queues live events.
pub struct Simulation {
    job: Arc<JobSpec>,
    refs: Arc<ReferenceLibrary>,
    config: SimConfig,
    scheduler: Scheduler,
    rng: ChaCha8Rng,
    jitter: Normal<f64>,
    script: VecDeque<ScriptEvent>,
    injected: Vec<ScriptAction>,
    ticks: u64,
    human: HumanAgent,
    robot: RobotAgent,
    log: EventLog,
    metrics: RunMetrics,
    started: BTreeMap<TaskId, f64>,
    human_busy_ticks: u64,
    robot_busy_ticks: u64,
}

impl Simulation {
    /// Starts from the optimal nominal assignment of `job`.
    pub fn nominal(job: Arc<JobSpec>, script: ScenarioScript, config: SimConfig) -> Result<Self, SimError> {
        let solution = solve_assignment(&job)?;
        Self::new(job, solution.human_list, solution.robot_list, script, config)
    }

    pub fn new(
        job: Arc<JobSpec>,
        human_list: TaskList,
        robot_list: TaskList,
        script: ScenarioScript,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        config.check()?;
        script.validate(&job)?;
        let refs = Arc::new(ReferenceLibrary::synthetic(&job, config.dim, config.tick));
        let scheduler = Scheduler::new(Arc::clone(&job), human_list, robot_list, config.scheduler)?;
        let seed = script.seed ^ config.seed.rotate_left(32);
        Ok(Self {
            refs,
            scheduler,
            rng: ChaCha8Rng::seed_from_u64(seed),
            jitter: Normal::new(0.0, config.jitter_sigma).expect("sigma checked"),
            script: script.events.into_iter().collect(),
            injected: Vec::new(),
            ticks: 0,
            human: HumanAgent { task: None, monitor: None, work: 0.0, speed: 1.0, confirmed: false },
            robot: RobotAgent::default(),
            log: EventLog::new(),
            metrics: RunMetrics::default(),
            started: BTreeMap::new(),
            human_busy_ticks: 0,
            robot_busy_ticks: 0,
            job,
            config,
        })
    }

    /// Replaces the synthetic reference trajectories.
    pub fn with_references(mut self, refs: ReferenceLibrary) -> Self {
        self.refs = Arc::new(refs);
        self
    }

    /// Mirrors the event log to an append-only file.
    pub fn with_log_file(mut self, path: &Path) -> Result<Self, SimError> {
        self.log = EventLog::with_file(path)?;
        Ok(self)
    }

    pub fn job(&self) -> &Arc<JobSpec> {
        &self.job
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SchedulerState {
        self.scheduler.state()
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot::of(self.scheduler.state())
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    /// Clock value of the next tick.
    pub fn clock(&self) -> f64 {
        self.ticks as f64 * self.config.tick
    }

    pub fn is_complete(&self) -> bool {
        self.scheduler.is_complete()
    }

    /// Whether an operator message would pass the scheduler's guards now.
    pub fn check_operator_message(&self, kind: MessageKind) -> Result<(), RejectReason> {
        self.scheduler.check_operator_message(kind)
    }

    pub fn human_speed(&self) -> f64 {
        self.human.speed
    }

    /// Queues `action` for the next tick. Rejected once the run is over.
    pub fn inject(&mut self, action: ScriptAction) -> Result<f64, RejectReason> {
        if self.is_complete() {
            return Err(RejectReason::RunComplete);
        }
        if let Some(t) = action.task() {
            if !self.job.contains(t) {
                return Err(RejectReason::UnknownTask);
            }
        }
        if let ScriptAction::HumanSpeed { factor } = action {
            if !(factor > 0.0 && factor.is_finite()) {
                return Err(RejectReason::Inexecutable);
            }
        }
        self.injected.push(action);
        Ok(self.clock())
    }

    pub fn run(mut self) -> Result<RunOutcome, SimError> {
        while self.tick()? {}
        self.log.flush()?;
        let log = std::mem::take(&mut self.log).into_entries();
        Ok(RunOutcome { metrics: self.metrics, log })
    }

    /// Advances one tick. Returns false once the run has completed.
    pub fn tick(&mut self) -> Result<bool, SimError> {
        if self.is_complete() {
            return Ok(false);
        }
        if self.ticks >= self.config.max_ticks {
            return Err(SimError::Stalled { ticks: self.ticks });
        }
        let clock = self.clock();

        let mut due = Vec::new();
        while self.script.front().is_some_and(|e| e.at <= clock + TIME_EPS) {
            let e = self.script.pop_front().expect("front exists");
            due.push((e.at, e.action));
        }
        due.extend(self.injected.drain(..).map(|a| (clock, a)));
        let mut messages = Vec::new();
        for (at, action) in due {
            self.log.append(clock, Payload::Script(action))?;
            self.apply_action(at, action, &mut messages);
        }

        let inputs = self.monitor_inputs(clock);
        let events = self.scheduler.step(clock, inputs, messages)?;
        let changed = !events.is_empty();
        for stamped in events {
            self.observe(clock, &stamped.event);
            self.log.append(clock, Payload::Event(stamped.event))?;
        }
        if changed {
            self.log.append(clock, Payload::Snapshot(self.snapshot()))?;
        }

        if self.is_complete() {
            self.finish_metrics(clock);
            return Ok(false);
        }
        let state = self.scheduler.state();
        self.human_busy_ticks += state.current_human.is_some() as u64;
        self.robot_busy_ticks += state.current_robot.is_some() as u64;
        self.advance_human()?;
        self.ticks += 1;
        Ok(true)
    }

    fn apply_action(&mut self, at: f64, action: ScriptAction, messages: &mut Vec<Message>) {
        match action {
            ScriptAction::HumanSpeed { factor } => self.human.speed = factor,
            ScriptAction::RobotFailure { task } => {
                if self.scheduler.state().current_robot == Some(task) {
                    self.robot.attempt_fails = true;
                } else {
                    self.robot.pending_failures.insert(task);
                }
            }
            ScriptAction::Delegate { task } => messages.push(Message::delegate(task, at)),
            ScriptAction::Reassign { task } => messages.push(Message::reassign(task, at)),
            ScriptAction::ConfirmDone { task } => {
                if self.human.task == Some(task) {
                    self.human.confirmed = true;
                }
            }
        }
    }

    fn monitor_inputs(&mut self, clock: f64) -> MonitorInputs {
        let state = self.scheduler.state();
        let human_t_res = match (self.human.task, self.human.monitor.as_mut()) {
            (Some(task), Some(monitor)) => {
                let nominal = self.job.task(task).map_or(0.0, |t| t.duration_human);
                if self.human.confirmed || self.human.work >= nominal - TIME_EPS {
                    0.0
                } else {
                    // The estimate drives reordering only; the operator's task
                    // ends when the operator actually finishes it.
                    let floor = 2.0 * self.config.scheduler.done_epsilon;
                    monitor.estimate(clock - state.human_started_at).t_res.max(floor)
                }
            }
            _ => 0.0,
        };
        let robot = match state.current_robot {
            Some(t) if !t.is_homing() => {
                let nominal = self.job.task(t).map_or(f64::INFINITY, |s| s.duration_robot);
                if !self.robot.attempt_fails && clock - state.robot_started_at >= nominal - TIME_EPS {
                    RobotVerdict::Completed
                } else {
                    RobotVerdict::Working
                }
            }
            _ => RobotVerdict::Working,
        };
        MonitorInputs { human_t_res, robot }
    }

    fn observe(&mut self, clock: f64, event: &SchedulerEvent) {
        match *event {
            SchedulerEvent::TaskStarted { agent, task } => {
                self.started.insert(task, clock);
                match agent {
                    AgentId::Human => {
                        self.human.task = Some(task);
                        self.human.monitor = HumanMonitor::start(task, &self.refs, &self.job).ok();
                        self.human.work = 0.0;
                        self.human.confirmed = false;
                    }
                    AgentId::Robot => self.robot.attempt_fails = self.robot.pending_failures.remove(&task),
                }
            }
            SchedulerEvent::TaskCompleted { agent, task } => {
                match agent {
                    AgentId::Human => {
                        self.human.task = None;
                        self.human.monitor = None;
                        self.metrics.human_finish = clock;
                    }
                    AgentId::Robot => self.metrics.robot_finish = clock,
                }
                if !task.is_homing() {
                    let start = self.started.get(&task).copied().unwrap_or(clock);
                    self.metrics.tasks.push(TaskRecord { task, agent, start, finish: clock });
                }
            }
            SchedulerEvent::TaskAborted { agent, .. } => match agent {
                AgentId::Human => {
                    self.human.task = None;
                    self.human.monitor = None;
                    self.metrics.human_finish = clock;
                }
                AgentId::Robot => {
                    self.robot.attempt_fails = false;
                    self.metrics.robot_finish = clock;
                }
            },
            SchedulerEvent::TaskRestarted { agent: AgentId::Robot, .. } => self.robot.attempt_fails = false,
            SchedulerEvent::RescheduleApplied(ref fill) => {
                self.metrics.reschedules += 1;
                self.metrics.fills.push(fill.clone());
            }
            SchedulerEvent::MessageReceived { message } => {
                self.metrics.messages.push(MessageRecord { clock, message, rejected: None });
            }
            SchedulerEvent::MessageRejected { message, reason } => {
                if let Some(r) = self.metrics.messages.iter_mut().rev().find(|r| r.message == message) {
                    r.rejected = Some(reason);
                }
            }
            _ => {}
        }
    }

    /// One tick of operator motion: emit a jittered sample of the reference
    /// at the current position, then move along it.
    fn advance_human(&mut self) -> Result<(), SimError> {
        let Some(task) = self.human.task else { return Ok(()) };
        let nominal = self.job.task(task).map_or(0.0, |t| t.duration_human);
        if let (Some(monitor), Some(reference)) = (self.human.monitor.as_mut(), self.refs.get(task)) {
            let n = reference.len();
            let pos = ((self.human.work / nominal * n as f64).floor() as usize).min(n - 1);
            let sample: Vec<f64> = reference.sample(pos).iter().map(|v| v + self.jitter.sample(&mut self.rng)).collect();
            monitor.observe(&sample)?;
        }
        self.human.work += self.human.speed * self.config.tick;
        Ok(())
    }

    fn finish_metrics(&mut self, clock: f64) {
        let tick = self.config.tick;
        let m = &mut self.metrics;
        m.makespan = clock;
        m.human_busy = self.human_busy_ticks as f64 * tick;
        m.robot_busy = self.robot_busy_ticks as f64 * tick;
        m.human_idle = (m.human_finish - m.human_busy).max(0.0);
        m.robot_idle = (m.robot_finish - m.robot_busy).max(0.0);
    }
}

/// Runs `script` from the optimal nominal assignment to completion.
pub fn run_scenario(job: &JobSpec, script: &ScenarioScript, config: &SimConfig) -> Result<RunOutcome, SimError> {
    Simulation::nominal(Arc::new(job.clone()), script.clone(), *config)?.run()
}

/// [`run_scenario`] with list reordering disabled.
pub fn baseline_run(job: &JobSpec, script: &ScenarioScript, config: &SimConfig) -> Result<RunOutcome, SimError> {
    run_scenario(job, script, &config.baseline())
}
