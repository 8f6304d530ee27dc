//! Online scheduler for the collaborative cell.
//!
//! Each call to [`Scheduler::step`] runs one pass of the control loop:
//!
//! 1. ask the robot monitor whether the robot's task is over (or timed out);
//! 2. estimate the human's remaining time and, when the robot has slack,
//!    pull the best-fitting future robot tasks forward (knapsack fill);
//! 3. apply operator and robot messages, operator first;
//! 4. hand each agent its next task.
//!
//! Lists keep an agent's current task at the head followed by its pending
//! tasks; finished tasks leave the list and enter the done set. A robot with
//! no current task is waiting: either the collaborative phase has not opened
//! yet or its next task does not fit in the human's remaining time.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::job::{AgentId, JobSpec, ListError, TaskId, TaskList};
use crate::knapsack::{knapsack_fill, FIT_TOLERANCE};

/// How the robot decides whether to start its next task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchPolicy {
    /// Start only tasks that end before the human's current task does, as
    /// long as the human has further tasks queued.
    FitWindow,
    /// Start the next task as soon as the robot is free.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// A robot task not finished after `timeout_factor * t_R` is delegated.
    pub timeout_factor: f64,
    pub homing_duration: f64,
    /// Minimum change of the remaining-time estimate that triggers a new fill.
    pub reschedule_hysteresis: f64,
    /// Remaining time at or below this counts as finished.
    pub done_epsilon: f64,
    /// When false the robot list is never reordered (ablation baseline).
    pub rescheduling: bool,
    pub dispatch: DispatchPolicy,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            timeout_factor: 2.0,
            homing_duration: 0.1,
            reschedule_hysteresis: 0.02,
            done_epsilon: 1e-6,
            rescheduling: true,
            dispatch: DispatchPolicy::FitWindow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "task", rename_all = "snake_case")]
pub enum MessageKind {
    /// Operator takes over a task from the robot's list.
    Reassign(TaskId),
    /// Operator hands one of its tasks to the robot.
    Delegate(TaskId),
    /// Robot gives up its current task.
    RobotDelegate(TaskId),
}

impl MessageKind {
    pub fn task(self) -> TaskId {
        match self {
            MessageKind::Reassign(t) | MessageKind::Delegate(t) | MessageKind::RobotDelegate(t) => t,
        }
    }

    pub fn sender(self) -> AgentId {
        match self {
            MessageKind::Reassign(_) | MessageKind::Delegate(_) => AgentId::Human,
            MessageKind::RobotDelegate(_) => AgentId::Robot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    #[serde(flatten)]
    pub kind: MessageKind,
    pub timestamp: f64,
}

impl Message {
    pub fn reassign(task: TaskId, timestamp: f64) -> Self {
        Self { kind: MessageKind::Reassign(task), timestamp }
    }

    pub fn delegate(task: TaskId, timestamp: f64) -> Self {
        Self { kind: MessageKind::Delegate(task), timestamp }
    }

    pub fn robot_delegate(task: TaskId, timestamp: f64) -> Self {
        Self { kind: MessageKind::RobotDelegate(task), timestamp }
    }

    pub fn sender(&self) -> AgentId {
        self.kind.sender()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    UnknownTask,
    /// The task is already done or no longer where the sender thought it was.
    Stale,
    /// The receiving agent cannot execute the task.
    Inexecutable,
    /// The task is not in the sender-side list.
    NotAssigned,
    RunComplete,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RejectReason::UnknownTask => "unknown task",
            RejectReason::Stale => "stale",
            RejectReason::Inexecutable => "inexecutable",
            RejectReason::NotAssigned => "not assigned to sender",
            RejectReason::RunComplete => "run complete",
        };
        f.write_str(s)
    }
}

/// Record of one knapsack fill that changed the robot's list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRecord {
    pub t_res: f64,
    pub robot_remaining: f64,
    pub budget: f64,
    pub candidates: TaskList,
    pub filled: TaskList,
    pub before: TaskList,
    pub after: TaskList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SchedulerEvent {
    TaskStarted { agent: AgentId, task: TaskId },
    TaskCompleted { agent: AgentId, task: TaskId },
    TaskAborted { agent: AgentId, task: TaskId },
    TaskRestarted { agent: AgentId, task: TaskId },
    RescheduleApplied(FillRecord),
    MessageReceived { message: Message },
    MessageRejected { message: Message, reason: RejectReason },
    Delegation { task: TaskId, from: AgentId, to: AgentId },
    HomingInserted,
    RunCompleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StampedEvent {
    pub clock: f64,
    #[serde(flatten)]
    pub event: SchedulerEvent,
}

/// What the robot reports about its current task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RobotVerdict {
    #[default]
    Working,
    Completed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MonitorInputs {
    /// Estimated remaining time of the human's current task.
    pub human_t_res: f64,
    pub robot: RobotVerdict,
}

#[derive(Debug, Error)]
#[error("scheduler invariant violated: {reason}\nstate: {state:#?}")]
pub struct SchedulerFault {
    pub reason: String,
    pub state: Box<SchedulerState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub current_human: Option<TaskId>,
    pub current_robot: Option<TaskId>,
    pub human_list: TaskList,
    pub robot_list: TaskList,
    pub end_human: bool,
    pub end_robot: bool,
    pub done: BTreeSet<TaskId>,
    pub clock: f64,
    pub robot_started_at: f64,
    pub human_started_at: f64,
    pub t_res: f64,
    pub complete: bool,
}

impl SchedulerState {
    pub fn robot_elapsed(&self) -> f64 {
        if self.current_robot.is_some() {
            self.clock - self.robot_started_at
        } else {
            0.0
        }
    }

    pub fn human_elapsed(&self) -> f64 {
        if self.current_human.is_some() {
            self.clock - self.human_started_at
        } else {
            0.0
        }
    }

    /// Tasks queued behind the current one.
    pub fn pending(&self, agent: AgentId) -> impl Iterator<Item = TaskId> + '_ {
        let (list, current) = match agent {
            AgentId::Human => (&self.human_list, self.current_human),
            AgentId::Robot => (&self.robot_list, self.current_robot),
        };
        list.iter().skip(current.is_some() as usize)
    }
}

pub fn ex_robot(job: &JobSpec, task: TaskId) -> Result<bool, RejectReason> {
    if task.is_homing() {
        return Ok(true);
    }
    job.task(task).map(|t| t.executable_by(AgentId::Robot)).ok_or(RejectReason::UnknownTask)
}

pub fn ex_human(job: &JobSpec, task: TaskId) -> Result<bool, RejectReason> {
    if task.is_homing() {
        return Ok(false);
    }
    job.task(task).map(|t| t.executable_by(AgentId::Human)).ok_or(RejectReason::UnknownTask)
}

/// Robot-side completion check. Returns whether the task is over and, when
/// it has overrun its timeout, a delegation request to the human.
pub fn monitor_robot(
    task: TaskId,
    elapsed: f64,
    verdict: RobotVerdict,
    job: &JobSpec,
    config: &SchedulerConfig,
) -> (bool, Option<Message>) {
    if task.is_homing() {
        return (elapsed >= config.homing_duration - FIT_TOLERANCE, None);
    }
    if verdict == RobotVerdict::Completed {
        return (true, None);
    }
    let nominal = job.task(task).map_or(f64::INFINITY, |t| t.duration_robot);
    if elapsed >= config.timeout_factor * nominal - FIT_TOLERANCE {
        return (false, Some(Message::robot_delegate(task, f64::NAN)));
    }
    (false, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescheduleOutcome {
    pub robot_list: TaskList,
    pub end_human: bool,
    pub fill: Option<FillRecord>,
}

/// Reorders the robot's future tasks so that those fitting in the human's
/// slack run next. `current_robot` is `None` when the robot is waiting. A
/// homing task queued right after the current one keeps its place.
pub fn reschedule(
    current_robot: Option<TaskId>,
    robot_list: &TaskList,
    t_res: f64,
    robot_remaining: f64,
    done_epsilon: f64,
    duration_robot: impl Fn(TaskId) -> f64,
) -> Result<RescheduleOutcome, ListError> {
    let end_human = t_res <= done_epsilon;
    let mut outcome = RescheduleOutcome { robot_list: robot_list.clone(), end_human, fill: None };
    if end_human || t_res <= robot_remaining {
        return Ok(outcome);
    }
    let (mut head, mut future) = match current_robot {
        Some(t) => robot_list.split(t)?,
        None => (TaskList::new(), robot_list.clone()),
    };
    if let Some(first) = future.first().filter(|t| t.is_homing()) {
        head = TaskList::concat(&head, &TaskList::from_ids([first])?, &TaskList::new())?;
        future = future.delete(first);
    }
    let budget = t_res - robot_remaining;
    let filled = knapsack_fill(&future, budget, &duration_robot);
    let rest = TaskList::from_ids(future.iter().filter(|t| !filled.contains(*t)))?;
    let after = TaskList::concat(&head, &filled, &rest)?;
    if &after != robot_list {
        outcome.fill = Some(FillRecord {
            t_res,
            robot_remaining,
            budget,
            candidates: future,
            filled,
            before: robot_list.clone(),
            after: after.clone(),
        });
        outcome.robot_list = after;
    }
    Ok(outcome)
}

/// Inserts `task` so it becomes the agent's next task: right after the
/// current one, and after a queued homing mission.
fn push_next(list: &TaskList, current: Option<TaskId>, task: TaskId) -> Result<TaskList, ListError> {
    let (mut head, mut tail) = match current {
        Some(c) => list.split(c)?,
        None => (TaskList::new(), list.clone()),
    };
    if let Some(h) = tail.first().filter(|t| t.is_homing()) {
        head = TaskList::concat(&head, &TaskList::from_ids([h])?, &TaskList::new())?;
        tail = tail.delete(h);
    }
    TaskList::concat(&head, &tail.push(task)?, &TaskList::new())
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    job: Arc<JobSpec>,
    config: SchedulerConfig,
    state: SchedulerState,
    preparatory: BTreeSet<TaskId>,
    /// Robot task and remaining-time estimate at the last fill evaluation.
    last_fill: Option<(Option<TaskId>, f64)>,
    lists_changed: bool,
    human_started_this_step: bool,
}

impl Scheduler {
    pub fn new(job: Arc<JobSpec>, human_list: TaskList, robot_list: TaskList, config: SchedulerConfig) -> Result<Self, SchedulerFault> {
        let preparatory = job.preparatory_ids();
        let scheduler = Self {
            job,
            config,
            state: SchedulerState {
                current_human: None,
                current_robot: None,
                human_list,
                robot_list,
                end_human: false,
                end_robot: false,
                done: BTreeSet::new(),
                clock: 0.0,
                robot_started_at: 0.0,
                human_started_at: 0.0,
                t_res: 0.0,
                complete: false,
            },
            preparatory,
            last_fill: None,
            lists_changed: true,
            human_started_this_step: false,
        };
        scheduler.check_invariants()?;
        Ok(scheduler)
    }

    pub fn state(&self) -> &SchedulerState {
        &self.state
    }

    pub fn job(&self) -> &Arc<JobSpec> {
        &self.job
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn is_complete(&self) -> bool {
        self.state.complete
    }

    /// True once every preparatory task is done.
    pub fn collaboration_open(&self) -> bool {
        self.preparatory.iter().all(|t| self.state.done.contains(t))
    }

    fn duration_robot(&self, task: TaskId) -> f64 {
        if task.is_homing() {
            self.config.homing_duration
        } else {
            self.job.task(task).map_or(0.0, |t| t.duration_robot)
        }
    }

    fn robot_remaining(&self) -> f64 {
        match self.state.current_robot {
            Some(t) => (self.duration_robot(t) - self.state.robot_elapsed()).max(0.0),
            None => 0.0,
        }
    }

    /// Runs one pass of the control loop at time `clock`.
    pub fn step(&mut self, clock: f64, inputs: MonitorInputs, messages: Vec<Message>) -> Result<Vec<StampedEvent>, SchedulerFault> {
        let mut events = Vec::new();
        self.state.clock = clock;
        if self.state.complete {
            for message in messages {
                events.push(SchedulerEvent::MessageRejected { message, reason: RejectReason::RunComplete });
            }
            return Ok(stamp(clock, events));
        }
        self.human_started_this_step = false;

        // Robot monitor.
        let (end_robot, robot_message) = match self.state.current_robot {
            None => (true, None),
            Some(t) => monitor_robot(t, self.state.robot_elapsed(), inputs.robot, &self.job, &self.config),
        };
        self.state.end_robot = end_robot;
        if end_robot {
            if let Some(t) = self.state.current_robot.take() {
                self.finish_head(AgentId::Robot, t)?;
                events.push(SchedulerEvent::TaskCompleted { agent: AgentId::Robot, task: t });
            }
        }

        // Remaining-time estimate and fill.
        let t_res = match self.state.current_human {
            Some(_) => inputs.human_t_res.max(0.0),
            None => 0.0,
        };
        self.state.t_res = t_res;
        if let Some(record) = self.maybe_reschedule(t_res)? {
            events.push(SchedulerEvent::RescheduleApplied(record));
        }
        self.state.end_human = self.state.current_human.is_none() || t_res <= self.config.done_epsilon;
        if self.state.end_human {
            if let Some(t) = self.state.current_human.take() {
                self.finish_head(AgentId::Human, t)?;
                events.push(SchedulerEvent::TaskCompleted { agent: AgentId::Human, task: t });
            }
        }

        // Messages: operator first, each stream in timestamp order.
        let mut human_msgs: Vec<Message> = messages.iter().copied().filter(|m| m.sender() == AgentId::Human).collect();
        let mut robot_msgs: Vec<Message> = messages.iter().copied().filter(|m| m.sender() == AgentId::Robot).collect();
        if let Some(mut m) = robot_message {
            m.timestamp = clock;
            robot_msgs.push(m);
        }
        human_msgs.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        robot_msgs.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        for message in human_msgs.into_iter().chain(robot_msgs) {
            events.push(SchedulerEvent::MessageReceived { message });
            if let Err(reason) = self.apply_message(message, &mut events) {
                events.push(SchedulerEvent::MessageRejected { message, reason });
            }
        }

        self.assign_next(&mut events)?;

        if self.state.current_human.is_none()
            && self.state.current_robot.is_none()
            && self.state.human_list.is_empty()
            && self.state.robot_list.is_empty()
        {
            self.state.complete = true;
            events.push(SchedulerEvent::RunCompleted);
        }
        self.check_invariants()?;
        Ok(stamp(clock, events))
    }

    fn finish_head(&mut self, agent: AgentId, task: TaskId) -> Result<(), SchedulerFault> {
        let list = match agent {
            AgentId::Human => &mut self.state.human_list,
            AgentId::Robot => &mut self.state.robot_list,
        };
        if list.first() != Some(task) {
            return Err(self.fault(format!("{agent} finished {task} which is not at the head of its list")));
        }
        *list = list.delete(task);
        if !task.is_homing() {
            self.state.done.insert(task);
        }
        Ok(())
    }

    fn maybe_reschedule(&mut self, t_res: f64) -> Result<Option<FillRecord>, SchedulerFault> {
        if !self.config.rescheduling || self.state.current_human.is_none() || !self.collaboration_open() {
            return Ok(None);
        }
        let key = (self.state.current_robot, t_res);
        let due = self.lists_changed
            || match self.last_fill {
                None => true,
                Some((robot, last)) => robot != key.0 || (t_res - last).abs() > self.config.reschedule_hysteresis,
            };
        if !due {
            return Ok(None);
        }
        self.last_fill = Some(key);
        self.lists_changed = false;
        let remaining = self.robot_remaining();
        let job = Arc::clone(&self.job);
        let homing = self.config.homing_duration;
        let outcome = reschedule(
            self.state.current_robot,
            &self.state.robot_list,
            t_res,
            remaining,
            self.config.done_epsilon,
            |t| if t.is_homing() { homing } else { job.task(t).map_or(0.0, |s| s.duration_robot) },
        )
        .map_err(|e| self.fault(format!("reschedule: {e}")))?;
        self.state.robot_list = outcome.robot_list;
        Ok(outcome.fill)
    }

    /// The guards an operator message must pass against the current state.
    pub fn check_operator_message(&self, kind: MessageKind) -> Result<(), RejectReason> {
        if self.state.complete {
            return Err(RejectReason::RunComplete);
        }
        let task = kind.task();
        if !self.job.contains(task) {
            return Err(RejectReason::UnknownTask);
        }
        if self.state.done.contains(&task) {
            return Err(RejectReason::Stale);
        }
        match kind {
            MessageKind::Reassign(t) => {
                if !self.state.robot_list.contains(t) {
                    return Err(RejectReason::NotAssigned);
                }
                if !ex_human(&self.job, t)? {
                    return Err(RejectReason::Inexecutable);
                }
            }
            MessageKind::Delegate(t) => {
                if !self.state.human_list.contains(t) {
                    return Err(RejectReason::NotAssigned);
                }
                if !ex_robot(&self.job, t)? {
                    return Err(RejectReason::Inexecutable);
                }
            }
            MessageKind::RobotDelegate(_) => return Err(RejectReason::NotAssigned),
        }
        Ok(())
    }

    /// Applies one message; the caller logs the rejection.
    fn apply_message(&mut self, message: Message, events: &mut Vec<SchedulerEvent>) -> Result<(), RejectReason> {
        let task = message.kind.task();
        if !self.job.contains(task) {
            return Err(RejectReason::UnknownTask);
        }
        if self.state.done.contains(&task) {
            return Err(RejectReason::Stale);
        }
        match message.kind {
            MessageKind::Reassign(t) => {
                self.check_operator_message(message.kind)?;
                if self.state.current_robot == Some(t) {
                    self.abort_robot(events);
                } else {
                    self.state.robot_list = self.state.robot_list.delete(t);
                }
                self.give_to(AgentId::Human, t, events);
            }
            MessageKind::Delegate(t) => {
                self.check_operator_message(message.kind)?;
                if self.state.current_human == Some(t) {
                    self.state.current_human = None;
                    self.state.end_human = true;
                    events.push(SchedulerEvent::TaskAborted { agent: AgentId::Human, task: t });
                }
                self.state.human_list = self.state.human_list.delete(t);
                self.give_to(AgentId::Robot, t, events);
            }
            MessageKind::RobotDelegate(t) => {
                if self.state.current_robot != Some(t) {
                    return Err(RejectReason::Stale);
                }
                if !ex_human(&self.job, t)? {
                    // The robot keeps the task and tries again from scratch.
                    self.state.robot_started_at = self.state.clock;
                    events.push(SchedulerEvent::TaskRestarted { agent: AgentId::Robot, task: t });
                    return Err(RejectReason::Inexecutable);
                }
                self.abort_robot(events);
                self.give_to(AgentId::Human, t, events);
            }
        }
        self.lists_changed = true;
        Ok(())
    }

    /// Stops the robot's current task and queues a homing mission in front.
    fn abort_robot(&mut self, events: &mut Vec<SchedulerEvent>) {
        let Some(t) = self.state.current_robot.take() else { return };
        self.state.robot_list = self.state.robot_list.delete(t);
        self.state.end_robot = true;
        events.push(SchedulerEvent::TaskAborted { agent: AgentId::Robot, task: t });
        if !self.state.robot_list.contains(TaskId::HOMING) {
            self.state.robot_list = self.state.robot_list.push(TaskId::HOMING).expect("homing absent");
            events.push(SchedulerEvent::HomingInserted);
        }
    }

    fn give_to(&mut self, agent: AgentId, task: TaskId, events: &mut Vec<SchedulerEvent>) {
        let (list, current) = match agent {
            AgentId::Human => (&mut self.state.human_list, self.state.current_human),
            AgentId::Robot => (&mut self.state.robot_list, self.state.current_robot),
        };
        *list = push_next(list, current, task).expect("task was removed from the other list");
        events.push(SchedulerEvent::Delegation { task, from: agent.other(), to: agent });
    }

    fn assign_next(&mut self, events: &mut Vec<SchedulerEvent>) -> Result<(), SchedulerFault> {
        if self.state.current_human.is_none() {
            if let Some(next) = self.state.human_list.next(None).map_err(|e| self.fault(e.to_string()))? {
                self.state.current_human = Some(next);
                self.state.human_started_at = self.state.clock;
                self.human_started_this_step = true;
                events.push(SchedulerEvent::TaskStarted { agent: AgentId::Human, task: next });
            }
        }
        if self.state.current_robot.is_none() {
            let Some(mut next) = self.state.robot_list.next(None).map_err(|e| self.fault(e.to_string()))? else {
                return Ok(());
            };
            if !self.collaboration_open() && !next.is_homing() && !self.preparatory.contains(&next) {
                // Before the collaborative phase only preparatory work may start.
                let first_prep = self.state.robot_list.iter().find(|t| self.preparatory.contains(t));
                match first_prep {
                    Some(prep) => {
                        let rest = self.state.robot_list.delete(prep);
                        self.state.robot_list = rest.push(prep).expect("prep removed");
                        next = prep;
                    }
                    None => return Ok(()),
                }
            }
            if self.robot_may_start(next) {
                self.state.current_robot = Some(next);
                self.state.robot_started_at = self.state.clock;
                events.push(SchedulerEvent::TaskStarted { agent: AgentId::Robot, task: next });
            }
        }
        Ok(())
    }

    fn robot_may_start(&self, task: TaskId) -> bool {
        if task.is_homing() || self.config.dispatch == DispatchPolicy::Greedy {
            return true;
        }
        // Nothing left to line up with once the operator is on its last task.
        if self.state.human_list.len() <= 1 {
            return true;
        }
        let window = match self.state.current_human {
            None => return true,
            Some(h) if self.human_started_this_step => self.job.task(h).map_or(0.0, |t| t.duration_human),
            Some(_) => self.state.t_res,
        };
        self.duration_robot(task) <= window + FIT_TOLERANCE
    }

    fn fault(&self, reason: String) -> SchedulerFault {
        SchedulerFault { reason, state: Box::new(self.state.clone()) }
    }

    /// Task conservation and list/current consistency.
    pub fn check_invariants(&self) -> Result<(), SchedulerFault> {
        let s = &self.state;
        if s.current_human.is_some() && s.human_list.first() != s.current_human {
            return Err(self.fault("current human task is not at the head of the human list".into()));
        }
        if s.current_robot.is_some() && s.robot_list.first() != s.current_robot {
            return Err(self.fault("current robot task is not at the head of the robot list".into()));
        }
        if s.human_list.contains(TaskId::HOMING) {
            return Err(self.fault("homing task in the human list".into()));
        }
        for id in self.job.ids() {
            let places = s.done.contains(&id) as u8 + s.human_list.contains(id) as u8 + s.robot_list.contains(id) as u8;
            if places != 1 {
                return Err(self.fault(format!("{id} is held in {places} places")));
            }
        }
        let strays = s.human_list.iter().chain(s.robot_list.iter()).chain(s.done.iter().copied());
        if let Some(bad) = strays.filter(|t| !t.is_homing()).find(|&t| !self.job.contains(t)) {
            return Err(self.fault(format!("{bad} is not a job task")));
        }
        Ok(())
    }
}

fn stamp(clock: f64, events: Vec<SchedulerEvent>) -> Vec<StampedEvent> {
    events.into_iter().map(|event| StampedEvent { clock, event }).collect()
}
