//! Nominal task assignment.
//!
//! Minimizes `sum_i (w_Ri x_Ri + w_Hi x_Hi) + c` subject to every task going
//! to exactly one agent and `c` bounding both agents' total nominal load.
//! For a fixed assignment the optimal `c` is the larger of the two loads, so
//! the search runs over assignments only.
//!
//! Ties are resolved deterministically: among all assignments whose objective
//! is within [`OBJECTIVE_TOLERANCE`] of the optimum, the one that gives the
//! human the lowest-indexed tasks wins (compare tasks `1..N` in order, the
//! first task on which two assignments differ decides, human beats robot).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::job::{AgentId, JobSpec, TaskId, TaskList, PROHIBITIVE_WEIGHT};

pub const OBJECTIVE_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_EXACT_CAP: usize = 24;
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum AssignError {
    #[error("{n} tasks exceed the exact-solve cap of {cap}; use a heuristic mode for jobs this large")]
    Capacity { n: usize, cap: usize },
    #[error("{0} cannot be executed by the agent it was assigned to")]
    Inexecutable(TaskId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSolution {
    /// `to_robot[i]` is true when task `i + 1` goes to the robot.
    pub to_robot: Vec<bool>,
    pub cycle_time: f64,
    pub objective: f64,
    pub human_list: TaskList,
    pub robot_list: TaskList,
}

impl AssignmentSolution {
    pub fn to_human(&self) -> Vec<bool> {
        self.to_robot.iter().map(|r| !r).collect()
    }

    pub fn agent_of(&self, id: TaskId) -> Option<AgentId> {
        let idx = (id.0 as usize).checked_sub(1)?;
        self.to_robot.get(idx).map(|&r| if r { AgentId::Robot } else { AgentId::Human })
    }
}

/// Weight used by the optimizer: the declared weight, or a prohibitive one
/// when the agent cannot execute the task at all.
fn effective_weight(job: &JobSpec, idx: usize, agent: AgentId) -> f64 {
    let task = &job.tasks()[idx];
    if task.executable_by(agent) {
        task.weight(agent)
    } else {
        task.weight(agent).max(PROHIBITIVE_WEIGHT)
    }
}

/// Canonical objective of an assignment: sums run in task-id order.
pub fn evaluate(job: &JobSpec, to_robot: &[bool]) -> (f64, f64) {
    let mut weights = 0.0;
    let mut load_robot = 0.0;
    let mut load_human = 0.0;
    for (idx, &robot) in to_robot.iter().enumerate() {
        let task = &job.tasks()[idx];
        if robot {
            weights += effective_weight(job, idx, AgentId::Robot);
            load_robot += task.duration_robot;
        } else {
            weights += effective_weight(job, idx, AgentId::Human);
            load_human += task.duration_human;
        }
    }
    let cycle = f64::max(load_robot, load_human);
    (weights + cycle, cycle)
}

pub fn build_nominal_schedules(to_robot: &[bool]) -> (TaskList, TaskList) {
    let ids = |robot: bool| {
        to_robot
            .iter()
            .enumerate()
            .filter(move |(_, &r)| r == robot)
            .map(|(i, _)| TaskId(i as u32 + 1))
    };
    let human = TaskList::from_ids(ids(false)).expect("ids are unique");
    let robot = TaskList::from_ids(ids(true)).expect("ids are unique");
    (human, robot)
}

fn finish(job: &JobSpec, to_robot: Vec<bool>) -> Result<AssignmentSolution, AssignError> {
    for (idx, &robot) in to_robot.iter().enumerate() {
        let agent = if robot { AgentId::Robot } else { AgentId::Human };
        if !job.tasks()[idx].executable_by(agent) {
            return Err(AssignError::Inexecutable(TaskId(idx as u32 + 1)));
        }
    }
    let (objective, cycle_time) = evaluate(job, &to_robot);
    let (human_list, robot_list) = build_nominal_schedules(&to_robot);
    Ok(AssignmentSolution { to_robot, cycle_time, objective, human_list, robot_list })
}

/// Picks the preferred assignment among those within tolerance of the best.
fn select(candidates: Vec<(f64, Vec<bool>)>) -> Vec<bool> {
    let best = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    candidates
        .into_iter()
        .filter(|c| c.0 <= best + OBJECTIVE_TOLERANCE)
        .map(|c| c.1)
        // Human (false) sorts first.
        .min()
        .expect("at least one candidate")
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub exact_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { exact_cap: DEFAULT_EXACT_CAP }
    }
}

pub fn solve_assignment(job: &JobSpec) -> Result<AssignmentSolution, AssignError> {
    solve_assignment_with(job, SolverOptions::default())
}

/// Exact depth-first branch and bound over task-to-agent assignments.
pub fn solve_assignment_with(job: &JobSpec, options: SolverOptions) -> Result<AssignmentSolution, AssignError> {
    let n = job.len();
    if n > options.exact_cap {
        return Err(AssignError::Capacity { n, cap: options.exact_cap });
    }
    let mut search = Search::new(job);
    search.minimize(0, 0.0, 0.0, 0.0);
    let cutoff = search.incumbent + OBJECTIVE_TOLERANCE;
    let chosen = search.first_within(0, 0.0, 0.0, 0.0, cutoff).expect("the optimum is within its own tolerance");
    finish(job, chosen)
}

struct Search<'a> {
    job: &'a JobSpec,
    w: [Vec<f64>; 2],
    t: [Vec<f64>; 2],
    /// Suffix sums of `min(w_R, w_H)` and `min(t_R, t_H)` from each depth.
    rest_weight: Vec<f64>,
    rest_time: Vec<f64>,
    path: Vec<bool>,
    incumbent: f64,
}

/// Slack on pruning so rounding in partial sums never discards an optimum.
const ROUNDING_SLACK: f64 = 1e-12;

impl<'a> Search<'a> {
    fn new(job: &'a JobSpec) -> Self {
        let n = job.len();
        let w_h: Vec<f64> = (0..n).map(|i| effective_weight(job, i, AgentId::Human)).collect();
        let w_r: Vec<f64> = (0..n).map(|i| effective_weight(job, i, AgentId::Robot)).collect();
        let t_h: Vec<f64> = job.tasks().iter().map(|t| t.duration_human).collect();
        let t_r: Vec<f64> = job.tasks().iter().map(|t| t.duration_robot).collect();
        let mut rest_weight = vec![0.0; n + 1];
        let mut rest_time = vec![0.0; n + 1];
        for i in (0..n).rev() {
            rest_weight[i] = rest_weight[i + 1] + w_h[i].min(w_r[i]);
            rest_time[i] = rest_time[i + 1] + t_h[i].min(t_r[i]);
        }
        Self {
            job,
            w: [w_h, w_r],
            t: [t_h, t_r],
            rest_weight,
            rest_time,
            path: Vec::with_capacity(n),
            incumbent: f64::INFINITY,
        }
    }

    /// Admissible bound: committed weights plus the cheapest weight of every
    /// open task, plus the best cycle time any completion could reach.
    fn lower_bound(&self, depth: usize, weights: f64, load_h: f64, load_r: f64) -> f64 {
        let balanced = 0.5 * (load_h + load_r + self.rest_time[depth]);
        weights + self.rest_weight[depth] + load_h.max(load_r).max(balanced)
    }

    fn children(&self, depth: usize, weights: f64, load_h: f64, load_r: f64) -> [(bool, f64, f64, f64); 2] {
        let human = (false, weights + self.w[0][depth], load_h + self.t[0][depth], load_r);
        let robot = (true, weights + self.w[1][depth], load_h, load_r + self.t[1][depth]);
        [human, robot]
    }

    /// First pass: the optimal objective value.
    fn minimize(&mut self, depth: usize, weights: f64, load_h: f64, load_r: f64) {
        if depth == self.job.len() {
            let (objective, _) = evaluate(self.job, &self.path);
            self.incumbent = self.incumbent.min(objective);
            return;
        }
        if self.lower_bound(depth, weights, load_h, load_r) > self.incumbent + ROUNDING_SLACK {
            return;
        }
        for (robot, w, h, r) in self.children(depth, weights, load_h, load_r) {
            self.path.push(robot);
            self.minimize(depth + 1, w, h, r);
            self.path.pop();
        }
    }

    /// Second pass: leaves are visited in preference order, so the first one
    /// within the cutoff is the answer.
    fn first_within(&mut self, depth: usize, weights: f64, load_h: f64, load_r: f64, cutoff: f64) -> Option<Vec<bool>> {
        if depth == self.job.len() {
            let (objective, _) = evaluate(self.job, &self.path);
            return (objective <= cutoff).then(|| self.path.clone());
        }
        if self.lower_bound(depth, weights, load_h, load_r) > cutoff + ROUNDING_SLACK {
            return None;
        }
        for (robot, w, h, r) in self.children(depth, weights, load_h, load_r) {
            self.path.push(robot);
            let found = self.first_within(depth + 1, w, h, r, cutoff);
            self.path.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }
}

/// Exhaustive search over all `2^N` assignments; the reference the branch and
/// bound is checked against.
pub fn enumerate_assignments(job: &JobSpec) -> Result<AssignmentSolution, AssignError> {
    let n = job.len();
    if n > ENUMERATION_CAP {
        return Err(AssignError::Capacity { n, cap: ENUMERATION_CAP });
    }
    let candidates = (0u64..1 << n)
        .map(|mask| {
            let x: Vec<bool> = (0..n).map(|i| mask >> (n - 1 - i) & 1 == 1).collect();
            (evaluate(job, &x).0, x)
        })
        .collect();
    finish(job, select(candidates))
}

/// All assignments whose objective is within tolerance of the optimum.
pub fn optimal_tie_set(job: &JobSpec) -> Result<Vec<Vec<bool>>, AssignError> {
    let n = job.len();
    if n > ENUMERATION_CAP {
        return Err(AssignError::Capacity { n, cap: ENUMERATION_CAP });
    }
    let all: Vec<(f64, Vec<bool>)> = (0u64..1 << n)
        .map(|mask| {
            let x: Vec<bool> = (0..n).map(|i| mask >> (n - 1 - i) & 1 == 1).collect();
            (evaluate(job, &x).0, x)
        })
        .collect();
    let best = all.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    Ok(all.into_iter().filter(|c| c.0 <= best + OBJECTIVE_TOLERANCE).map(|c| c.1).collect())
}
