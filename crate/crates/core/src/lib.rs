//! Scheduling engine for a two-agent (human and robot) collaborative cell.
//!
//! * [`job`] – tasks, jobs, ordered task lists and the job file format.
//! * [`assignment`] – exact nominal assignment of tasks to agents.
//! * [`scheduler`] – the online loop that reorders the robot's list and
//!   handles delegate/reassign messages.
//! * [`monitor`] – open-ended DTW estimation of the human's progress.
//! * [`sim`] – a tick-based simulation of the cell for offline experiments.
//! * [`api`] – the service boundary: snapshots, commands and event streams.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod api;
pub mod assignment;
pub mod eventlog;
pub mod fixtures;
pub mod job;
pub mod knapsack;
pub mod monitor;
pub mod scheduler;
pub mod sim;

pub use assignment::{enumerate_assignments, solve_assignment, AssignmentSolution};
pub use job::{load_job, AgentId, JobSpec, TaskId, TaskList, TaskSpec};
