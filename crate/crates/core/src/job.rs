//! Job and task data model, ordered task lists, and the job definition file.
//!
//! Durations are stored normalized: every raw duration (seconds) is divided by
//! the job's normalization base, so the longest nominal duration of the job is
//! exactly one time unit.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weight at or above which an agent is treated as unable to execute a task.
pub const PROHIBITIVE_WEIGHT: f64 = 1e6;

/// The two agents of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentId {
    Human,
    Robot,
}

impl AgentId {
    pub fn other(self) -> AgentId {
        match self {
            AgentId::Human => AgentId::Robot,
            AgentId::Robot => AgentId::Human,
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentId::Human => f.write_str("human"),
            AgentId::Robot => f.write_str("robot"),
        }
    }
}

/// Task index. Job tasks are numbered `1..=N`; `0` is reserved for the
/// robot's homing mission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl TaskId {
    pub const HOMING: TaskId = TaskId(0);

    pub fn is_homing(self) -> bool {
        self == Self::HOMING
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_homing() {
            f.write_str("T_home")
        } else {
            write!(f, "T{}", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub label: String,
    pub weight_robot: f64,
    pub weight_human: f64,
    /// Nominal robot duration, normalized units.
    pub duration_robot: f64,
    /// Nominal human duration, normalized units.
    pub duration_human: f64,
    pub robot_executable: bool,
    pub human_executable: bool,
    /// Must be finished before the collaborative phase starts.
    pub preparatory: bool,
}

impl TaskSpec {
    pub fn weight(&self, agent: AgentId) -> f64 {
        match agent {
            AgentId::Human => self.weight_human,
            AgentId::Robot => self.weight_robot,
        }
    }

    pub fn duration(&self, agent: AgentId) -> f64 {
        match agent {
            AgentId::Human => self.duration_human,
            AgentId::Robot => self.duration_robot,
        }
    }

    /// Executability flag, refined by the prohibitive-weight convention.
    pub fn executable_by(&self, agent: AgentId) -> bool {
        let flag = match agent {
            AgentId::Human => self.human_executable,
            AgentId::Robot => self.robot_executable,
        };
        flag && self.weight(agent) < PROHIBITIVE_WEIGHT
    }

    fn validate(&self) -> Result<(), JobError> {
        let id = self.id;
        if self.weight_robot.is_nan() || self.weight_robot <= 0.0 || self.weight_human.is_nan() || self.weight_human <= 0.0 {
            return Err(JobError::Validation(format!("{id}: weights must be positive")));
        }
        let finite_pos = |d: f64| d.is_finite() && d > 0.0;
        if !finite_pos(self.duration_robot) || !finite_pos(self.duration_human) {
            return Err(JobError::Validation(format!("{id}: durations must be positive and finite")));
        }
        if !self.robot_executable && !self.human_executable {
            return Err(JobError::Validation(format!("{id}: not executable by either agent")));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum JobError {
    #[error("cannot parse job file: {0}")]
    Parse(String),
    #[error("invalid job: {0}")]
    Validation(String),
}

/// A validated job: tasks `1..=N` in id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub name: String,
    /// Seconds corresponding to one normalized time unit.
    pub normalization_base: f64,
    tasks: Vec<TaskSpec>,
}

impl JobSpec {
    /// Builds a job from tasks whose durations are already normalized.
    /// Tasks may be given in any order; they are stored sorted by id.
    pub fn new(name: impl Into<String>, normalization_base: f64, mut tasks: Vec<TaskSpec>) -> Result<Self, JobError> {
        if !(normalization_base.is_finite() && normalization_base > 0.0) {
            return Err(JobError::Validation("normalization base must be positive".into()));
        }
        if tasks.is_empty() {
            return Err(JobError::Validation("a job needs at least one task".into()));
        }
        tasks.sort_by_key(|t| t.id);
        for (i, task) in tasks.iter().enumerate() {
            let expected = TaskId(i as u32 + 1);
            if task.id != expected {
                if i > 0 && tasks[i - 1].id == task.id {
                    return Err(JobError::Validation(format!("duplicate task id {}", task.id.0)));
                }
                return Err(JobError::Validation(format!(
                    "task ids must be dense 1..N; expected {} found {}",
                    expected.0, task.id.0
                )));
            }
            task.validate()?;
        }
        Ok(Self { name: name.into(), normalization_base, tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> Option<&TaskSpec> {
        if id.is_homing() {
            return None;
        }
        self.tasks.get(id.0 as usize - 1)
    }

    pub fn contains(&self, id: TaskId) -> bool {
        self.task(id).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.tasks.iter().map(|t| t.id)
    }

    pub fn preparatory_ids(&self) -> BTreeSet<TaskId> {
        self.tasks.iter().filter(|t| t.preparatory).map(|t| t.id).collect()
    }

    /// Largest nominal duration over all tasks and both agents.
    pub fn max_duration(&self) -> f64 {
        self.tasks
            .iter()
            .flat_map(|t| [t.duration_robot, t.duration_human])
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Job definition file
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobFile {
    name: String,
    /// Seconds; must equal the longest raw duration in the file.
    normalization_base: f64,
    #[serde(rename = "task", default)]
    tasks: Vec<TaskRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRecord {
    id: u32,
    #[serde(default)]
    label: String,
    w_robot: f64,
    t_robot: f64,
    w_human: f64,
    t_human: f64,
    #[serde(default = "yes")]
    robot_executable: bool,
    #[serde(default = "yes")]
    human_executable: bool,
    #[serde(default)]
    preparatory: bool,
}

fn yes() -> bool {
    true
}

/// Relative slack allowed between the declared normalization base and the
/// longest raw duration.
const BASE_MATCH_TOLERANCE: f64 = 1e-9;

/// Parses and validates a job file; raw durations are divided by the
/// normalization base.
pub fn load_job(source: &str) -> Result<JobSpec, JobError> {
    let file: JobFile = toml::from_str(source).map_err(|e| JobError::Parse(e.to_string()))?;
    let base = file.normalization_base;
    if !(base.is_finite() && base > 0.0) {
        return Err(JobError::Validation("normalization base must be positive".into()));
    }
    let raw_max = file
        .tasks
        .iter()
        .flat_map(|t| [t.t_robot, t.t_human])
        .fold(0.0, f64::max);
    if file.tasks.iter().any(|t| t.id == 0) {
        return Err(JobError::Validation("task id 0 is reserved".into()));
    }
    let tasks = file
        .tasks
        .into_iter()
        .map(|r| TaskSpec {
            id: TaskId(r.id),
            label: r.label,
            weight_robot: r.w_robot,
            weight_human: r.w_human,
            duration_robot: r.t_robot / base,
            duration_human: r.t_human / base,
            robot_executable: r.robot_executable,
            human_executable: r.human_executable,
            preparatory: r.preparatory,
        })
        .collect();
    let job = JobSpec::new(file.name, base, tasks)?;
    if ((raw_max - base) / base).abs() > BASE_MATCH_TOLERANCE {
        return Err(JobError::Validation(format!(
            "normalization base {base} s does not match the longest nominal duration {raw_max} s"
        )));
    }
    Ok(job)
}

/// Renders a job in the job file format (raw seconds).
pub fn write_job(job: &JobSpec) -> String {
    let base = job.normalization_base;
    let file = JobFile {
        name: job.name.clone(),
        normalization_base: base,
        tasks: job
            .tasks
            .iter()
            .map(|t| TaskRecord {
                id: t.id.0,
                label: t.label.clone(),
                w_robot: t.weight_robot,
                t_robot: t.duration_robot * base,
                w_human: t.weight_human,
                t_human: t.duration_human * base,
                robot_executable: t.robot_executable,
                human_executable: t.human_executable,
                preparatory: t.preparatory,
            })
            .collect(),
    };
    toml::to_string(&file).expect("job file serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Task lists
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ListError {
    #[error("{0} is not in the list")]
    NotInList(TaskId),
    #[error("{0} is already in the list")]
    AlreadyInList(TaskId),
    #[error("lists overlap on {0}")]
    Overlap(TaskId),
}

/// An ordered sequence of task ids without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskList(Vec<TaskId>);

impl TaskList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a list, rejecting duplicates.
    pub fn from_ids(ids: impl IntoIterator<Item = TaskId>) -> Result<Self, ListError> {
        let mut list = Vec::new();
        for id in ids {
            if list.contains(&id) {
                return Err(ListError::AlreadyInList(id));
            }
            list.push(id);
        }
        Ok(Self(list))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<TaskId> {
        self.0.first().copied()
    }

    pub fn contains(&self, id: TaskId) -> bool {
        self.0.contains(&id)
    }

    pub fn position(&self, id: TaskId) -> Option<usize> {
        self.0.iter().position(|&t| t == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[TaskId] {
        &self.0
    }

    /// Task after `current`; with no current task, the head of the list.
    pub fn next(&self, current: Option<TaskId>) -> Result<Option<TaskId>, ListError> {
        match current {
            None => Ok(self.first()),
            Some(t) => {
                let pos = self.position(t).ok_or(ListError::NotInList(t))?;
                Ok(self.0.get(pos + 1).copied())
            }
        }
    }

    /// Splits after `t`: the first part ends with `t`.
    pub fn split(&self, t: TaskId) -> Result<(TaskList, TaskList), ListError> {
        let pos = self.position(t).ok_or(ListError::NotInList(t))?;
        Ok((TaskList(self.0[..=pos].to_vec()), TaskList(self.0[pos + 1..].to_vec())))
    }

    /// Inserts `t` at the head.
    pub fn push(&self, t: TaskId) -> Result<TaskList, ListError> {
        if self.contains(t) {
            return Err(ListError::AlreadyInList(t));
        }
        let mut ids = Vec::with_capacity(self.len() + 1);
        ids.push(t);
        ids.extend_from_slice(&self.0);
        Ok(TaskList(ids))
    }

    /// Removes `t` if present.
    pub fn delete(&self, t: TaskId) -> TaskList {
        TaskList(self.0.iter().copied().filter(|&x| x != t).collect())
    }

    pub fn concat(a: &TaskList, b: &TaskList, c: &TaskList) -> Result<TaskList, ListError> {
        let mut seen = BTreeSet::new();
        let mut ids = Vec::with_capacity(a.len() + b.len() + c.len());
        for id in a.iter().chain(b.iter()).chain(c.iter()) {
            if !seen.insert(id) {
                return Err(ListError::Overlap(id));
            }
            ids.push(id);
        }
        Ok(TaskList(ids))
    }
}

impl fmt::Display for TaskList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if t.is_homing() {
                f.write_str("home")?;
            } else {
                write!(f, "{}", t.0)?;
            }
        }
        f.write_str(")")
    }
}

/// Shorthand for building a list of job task ids in tests and fixtures.
pub fn list(ids: &[u32]) -> TaskList {
    TaskList::from_ids(ids.iter().map(|&i| TaskId(i))).expect("duplicate id in list literal")
}
