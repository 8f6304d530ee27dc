//! Brute-force oracles and generators shared by the integration suites.
#![allow(dead_code)]

use cellsched::job::{JobSpec, TaskId, TaskSpec};
use cellsched::sim::{ScenarioScript, ScriptAction};
use rand::Rng;

/// Draws from (0, 1].
pub fn unit(rng: &mut impl Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

pub fn task(id: u32, w_r: f64, w_h: f64, t_r: f64, t_h: f64) -> TaskSpec {
    TaskSpec {
        id: TaskId(id),
        label: format!("task {id}"),
        weight_robot: w_r,
        weight_human: w_h,
        duration_robot: t_r,
        duration_human: t_h,
        robot_executable: true,
        human_executable: true,
        preparatory: false,
    }
}

pub fn random_job(rng: &mut impl Rng, n: usize) -> JobSpec {
    let tasks = (1..=n as u32).map(|id| task(id, unit(rng), unit(rng), unit(rng), unit(rng))).collect();
    JobSpec::new("random", 1.0, tasks).unwrap()
}

/// Random job with occasional preparatory tasks and one-agent tasks.
pub fn random_cell_job(rng: &mut impl Rng, n: usize) -> JobSpec {
    let tasks = (1..=n as u32)
        .map(|id| {
            let mut t = task(id, unit(rng), unit(rng), 0.05 + 0.95 * unit(rng), 0.05 + 0.95 * unit(rng));
            t.preparatory = id <= 2 && rng.random_bool(0.5);
            match rng.random_range(0..8) {
                0 => t.robot_executable = false,
                1 => t.human_executable = false,
                _ => {}
            }
            t
        })
        .collect();
    JobSpec::new("cell", 1.0, tasks).unwrap()
}

/// Objective of one assignment, summed in id order.
pub fn objective(job: &JobSpec, to_robot: &[bool]) -> f64 {
    let (mut w, mut lr, mut lh) = (0.0, 0.0, 0.0);
    for (t, &r) in job.tasks().iter().zip(to_robot) {
        let blocked = if r { !t.robot_executable } else { !t.human_executable };
        if r {
            w += if blocked { 1e6 } else { t.weight_robot };
            lr += t.duration_robot;
        } else {
            w += if blocked { 1e6 } else { t.weight_human };
            lh += t.duration_human;
        }
    }
    w + f64::max(lr, lh)
}

/// Every assignment, its objective, and the minimum.
pub fn brute_assignment(job: &JobSpec) -> (f64, Vec<(f64, Vec<bool>)>) {
    let n = job.len();
    let mut all = Vec::with_capacity(1 << n);
    for mask in 0u32..1 << n {
        let x: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
        all.push((objective(job, &x), x));
    }
    let best = all.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    (best, all)
}

/// Best fill by subset enumeration: largest total within `budget + 1e-9`,
/// then the lexicographically smallest sorted id sequence among totals
/// within 1e-9 of it.
pub fn brute_knapsack(items: &[(TaskId, f64)], budget: f64) -> Vec<TaskId> {
    let mut sorted = items.to_vec();
    sorted.sort_by_key(|i| i.0);
    let n = sorted.len();
    let mut subsets = Vec::with_capacity(1 << n);
    for mask in 0u32..1 << n {
        let mut total = 0.0;
        let mut ids = Vec::new();
        for (k, (id, d)) in sorted.iter().enumerate() {
            if mask & (1 << k) != 0 {
                total += d;
                ids.push(*id);
            }
        }
        if total <= budget + 1e-9 {
            subsets.push((total, ids));
        }
    }
    let best = subsets.iter().map(|s| s.0).fold(0.0, f64::max);
    subsets.into_iter().filter(|s| s.0 >= best - 1e-9).map(|s| s.1).min().unwrap_or_default()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Completion from the full cumulative-cost table: the reference prefix
/// whose end aligns cheapest with the whole input, latest on ties.
pub fn dtw_table_completion(input: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let (n, m) = (input.len(), reference.len());
    if n == 0 {
        return 0.0;
    }
    let mut d = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let c = dist(&input[i], &reference[j]);
            d[i][j] = match (i, j) {
                (0, 0) => c,
                (0, _) => c + d[0][j - 1],
                (_, 0) => c + d[i - 1][0],
                _ => c + d[i - 1][j - 1].min(d[i - 1][j]).min(d[i][j - 1]),
            };
        }
    }
    let last = &d[n - 1];
    let mut best = 0;
    for j in 0..m {
        if last[j] <= last[best] {
            best = j;
        }
    }
    (best + 1) as f64 / m as f64
}

pub fn random_series(rng: &mut impl Rng, len: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..len).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// One slowdown of the operator while T3 runs, then a return to full speed.
pub fn random_slowdown(rng: &mut impl Rng, seed: u64) -> ScenarioScript {
    let start = rng.random_range(0.65..1.2);
    let factor = rng.random_range(0.3..0.8);
    let length = rng.random_range(0.1..0.8);
    ScenarioScript::new(seed)
        .at(start, ScriptAction::HumanSpeed { factor })
        .at(start + length, ScriptAction::HumanSpeed { factor: 1.0 })
}

/// Speed changes, robot failures, confirmations and a storm of operator
/// messages at random times.
pub fn random_storm(rng: &mut impl Rng, job: &JobSpec, seed: u64, horizon: f64) -> ScenarioScript {
    let n = job.len() as u32;
    let count = rng.random_range(5..40);
    let mut events: Vec<(f64, ScriptAction)> = (0..count)
        .map(|_| {
            let at = rng.random_range(0.0..horizon);
            let task = TaskId(rng.random_range(1..=n));
            let action = match rng.random_range(0..10) {
                0 | 1 => ScriptAction::HumanSpeed { factor: rng.random_range(0.2..2.0) },
                2 => ScriptAction::RobotFailure { task },
                3 => ScriptAction::ConfirmDone { task },
                4..=6 => ScriptAction::Delegate { task },
                _ => ScriptAction::Reassign { task },
            };
            (at, action)
        })
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events.into_iter().fold(ScenarioScript::new(seed), |s, (at, a)| s.at(at, a))
}
