//! Built-in job fixtures.

use crate::job::{load_job, JobSpec};
use crate::sim::ScenarioScript;

/// Source text of the 11-task collaborative assembly job.
pub const ASSEMBLY11_SOURCE: &str = include_str!("../../../data/assembly11.job");

/// The 11-task collaborative assembly job with its nominal weights and
/// durations.
pub fn assembly11() -> JobSpec {
    load_job(ASSEMBLY11_SOURCE).expect("bundled job file is valid")
}

/// Operator slowdown during the screwing task.
pub const EXPERIMENT1_SOURCE: &str = include_str!("../../../data/experiment1.scenario");

/// Delegate T2, then reassign T9 while the robot is on it.
pub const EXPERIMENT2_SOURCE: &str = include_str!("../../../data/experiment2.scenario");

pub fn experiment1() -> ScenarioScript {
    ScenarioScript::parse(EXPERIMENT1_SOURCE).expect("bundled scenario is valid")
}

pub fn experiment2() -> ScenarioScript {
    ScenarioScript::parse(EXPERIMENT2_SOURCE).expect("bundled scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::job::TaskId;

    #[test]
    fn bundled_job_matches_table() {
        let job = assembly11();
        assert_eq!(job.len(), 11);
        assert_eq!(job.normalization_base, 40.0);
        assert_eq!(job.task(TaskId(6)).unwrap().duration_robot, 1.0);
        assert_eq!(job.task(TaskId(7)).unwrap().duration_robot, 0.35);
        assert_eq!(job.task(TaskId(3)).unwrap().duration_human, 0.625);
        assert_eq!(job.task(TaskId(11)).unwrap().duration_human, 0.75);
        assert_eq!(job.max_duration(), 1.0);
        let prep: Vec<_> = job.preparatory_ids().into_iter().collect();
        assert_eq!(prep, vec![TaskId(1), TaskId(2)]);
    }

    #[test]
    fn bundled_scenarios_parse() {
        let job = assembly11();
        experiment1().validate(&job).unwrap();
        assert_eq!(experiment2().events.len(), 2);
    }
}
