//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use cellsched::assignment::{enumerate_assignments, optimal_tie_set, solve_assignment};
use cellsched::eventlog::{render, Payload, WireEvent};
use cellsched::fixtures::{assembly11, experiment1, experiment2};
use cellsched::job::{list, AgentId, JobSpec, TaskId, TaskList};
use cellsched::knapsack::knapsack_fill;
use cellsched::monitor::{estimate_remaining, HumanMonitor, OpenEndedDtw, ReferenceLibrary, TimeSeries};
use cellsched::scheduler::SchedulerEvent;
use cellsched::sim::{baseline_run, run_scenario, ScriptAction, SimConfig, Simulation};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    ensure!(elapsed < limit, "took {elapsed:?}, limit {limit:?}");
    Ok(format!("{elapsed:.2?}"))
}

fn nominal_schedule() -> Outcome {
    let job = assembly11();
    let start = Instant::now();
    let s = solve_assignment(&job).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(s.human_list == list(&[1, 2, 3, 4, 5, 6]), "human list {}", s.human_list);
    ensure!(s.robot_list == list(&[7, 8, 9, 10, 11]), "robot list {}", s.robot_list);
    within(elapsed, Duration::from_secs(1))?;

    let e = enumerate_assignments(&job).map_err(|e| e.to_string())?;
    ensure!((e.objective - s.objective).abs() <= 1e-9, "enumeration {} vs solver {}", e.objective, s.objective);
    ensure!(e.to_robot == s.to_robot, "enumeration picked {}", e.robot_list);
    let ties = optimal_tie_set(&job).map_err(|e| e.to_string())?;
    let (best, all) = brute_assignment(&job);
    let oracle_ties: Vec<Vec<bool>> = all.into_iter().filter(|a| a.0 <= best + 1e-9).map(|a| a.1).collect();
    ensure!((best - s.objective).abs() <= 1e-9, "oracle {best} vs solver {}", s.objective);
    ensure!(ties.len() == oracle_ties.len(), "tie set {} vs oracle {}", ties.len(), oracle_ties.len());
    ensure!(ties.iter().all(|t| oracle_ties.contains(t)), "tie sets differ");
    Ok(format!("objective {:.6}, {} optimal assignment(s), solve {elapsed:.2?}", s.objective, ties.len()))
}

fn solver_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let start = Instant::now();
    for k in 0..200 {
        let n = rng.random_range(1..=12);
        let job = random_job(&mut rng, n);
        let s = solve_assignment(&job).map_err(|e| e.to_string())?;
        let (best, _) = brute_assignment(&job);
        ensure!(s.objective == best, "job {k} (N={n}): solver {} oracle {best}", s.objective);
        ensure!(objective(&job, &s.to_robot) == s.objective, "job {k}: reported objective does not match its assignment");
    }
    within(start.elapsed(), Duration::from_secs(30)).map(|t| format!("200 jobs in {t}"))
}

fn knapsack_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let start = Instant::now();
    for k in 0..500 {
        let n = rng.random_range(0..=15);
        let mut ids: Vec<u32> = (1..=40).collect();
        for i in 0..n {
            let j = rng.random_range(i..ids.len());
            ids.swap(i, j);
        }
        // Coarse durations make exact ties common.
        let items: Vec<(TaskId, f64)> = ids[..n]
            .iter()
            .map(|&id| {
                let d = if rng.random_bool(0.5) { rng.random_range(1..=8) as f64 * 0.125 } else { unit(&mut rng) };
                (TaskId(id), d)
            })
            .collect();
        let total: f64 = items.iter().map(|i| i.1).sum();
        let budget = rng.random_range(0.0..=total.max(0.1));
        let durations: BTreeMap<TaskId, f64> = items.iter().copied().collect();
        let candidates = TaskList::from_ids(items.iter().map(|i| i.0)).unwrap();
        let got: Vec<TaskId> = knapsack_fill(&candidates, budget, |t| durations[&t]).iter().collect();
        let want = brute_knapsack(&items, budget);
        ensure!(got == want, "instance {k}: fill {got:?}, oracle {want:?}, budget {budget}");
    }
    within(start.elapsed(), Duration::from_secs(10)).map(|t| format!("500 instances in {t}"))
}

fn fill_matches_oracle(job: &JobSpec, config: &SimConfig, events: &[WireEvent]) -> Result<usize, String> {
    let mut fills = 0;
    for e in events {
        if let Payload::Event(SchedulerEvent::RescheduleApplied(f)) = &e.payload {
            let items: Vec<(TaskId, f64)> = f
                .candidates
                .iter()
                .map(|t| (t, if t.is_homing() { config.scheduler.homing_duration } else { job.task(t).unwrap().duration_robot }))
                .collect();
            let want = brute_knapsack(&items, f.budget);
            let got: Vec<TaskId> = f.filled.iter().collect();
            ensure!(got == want, "fill at {}: {got:?}, oracle {want:?}", e.clock);
            fills += 1;
        }
    }
    Ok(fills)
}

fn experiment_one() -> Outcome {
    let job = assembly11();
    let config = SimConfig::default();
    let script = experiment1();
    let run = run_scenario(&job, &script, &config).map_err(|e| e.to_string())?;
    let base = baseline_run(&job, &script, &config).map_err(|e| e.to_string())?;
    let fills = fill_matches_oracle(&job, &config, &run.log)?;
    ensure!(fills > 0, "no reschedule fired");
    let (idle, base_idle) = (run.metrics.robot_idle, base.metrics.robot_idle);
    ensure!(idle < base_idle, "robot idle {idle} not below baseline {base_idle}");

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let (mut wins, mut worse) = (0, 0);
    for i in 0..100 {
        let script = random_slowdown(&mut rng, i);
        let a = run_scenario(&job, &script, &config).map_err(|e| e.to_string())?;
        let b = baseline_run(&job, &script, &config).map_err(|e| e.to_string())?;
        fill_matches_oracle(&job, &config, &a.log)?;
        if a.metrics.robot_idle < b.metrics.robot_idle {
            wins += 1;
        } else if a.metrics.robot_idle > b.metrics.robot_idle {
            worse += 1;
        }
    }
    ensure!(wins >= 95, "only {wins}/100 random slowdowns lowered robot idle");
    Ok(format!("{fills} fill(s), robot idle {idle:.3} vs {base_idle:.3}, paired {wins}/100 lower, {worse} higher"))
}

fn experiment_two() -> Outcome {
    use AgentId::{Human as H, Robot as R};
    use SchedulerEvent::*;
    let job = assembly11();
    let run = run_scenario(&job, &experiment2(), &SimConfig::default()).map_err(|e| e.to_string())?;
    let home = TaskId(0);
    let t = TaskId;
    let expected: Vec<(f64, SchedulerEvent)> = vec![
        (0.0, TaskStarted { agent: H, task: t(1) }),
        (0.375, TaskCompleted { agent: H, task: t(1) }),
        (0.375, TaskStarted { agent: H, task: t(2) }),
        (0.4, TaskAborted { agent: H, task: t(2) }),
        (0.4, Delegation { task: t(2), from: H, to: R }),
        (0.4, TaskStarted { agent: H, task: t(3) }),
        (0.4, TaskStarted { agent: R, task: t(2) }),
        (0.775, TaskCompleted { agent: R, task: t(2) }),
        (0.775, TaskStarted { agent: R, task: t(11) }),
        (1.025, TaskCompleted { agent: R, task: t(11) }),
        (1.025, TaskCompleted { agent: H, task: t(3) }),
        (1.025, TaskStarted { agent: H, task: t(4) }),
        (1.025, TaskStarted { agent: R, task: t(7) }),
        (1.375, TaskCompleted { agent: R, task: t(7) }),
        (1.65, TaskCompleted { agent: H, task: t(4) }),
        (1.65, TaskStarted { agent: H, task: t(5) }),
        (1.65, TaskStarted { agent: R, task: t(8) }),
        (2.0, TaskCompleted { agent: R, task: t(8) }),
        (2.275, TaskCompleted { agent: H, task: t(5) }),
        (2.275, TaskStarted { agent: H, task: t(6) }),
        (2.275, TaskStarted { agent: R, task: t(9) }),
        (2.4, TaskAborted { agent: R, task: t(9) }),
        (2.4, HomingInserted),
        (2.4, Delegation { task: t(9), from: R, to: H }),
        (2.4, TaskStarted { agent: R, task: home }),
        (2.5, TaskCompleted { agent: R, task: home }),
        (2.65, TaskCompleted { agent: H, task: t(6) }),
        (2.65, TaskStarted { agent: H, task: t(9) }),
        (2.65, TaskStarted { agent: R, task: t(10) }),
        (2.9, TaskCompleted { agent: H, task: t(9) }),
        (3.0, TaskCompleted { agent: R, task: t(10) }),
        (3.0, RunCompleted),
    ];
    let actual: Vec<(f64, SchedulerEvent)> = run
        .log
        .iter()
        .filter_map(|e| match &e.payload {
            Payload::Event(ev) if !matches!(ev, MessageReceived { .. } | MessageRejected { .. } | RescheduleApplied(_)) => {
                Some((e.clock, ev.clone()))
            }
            _ => None,
        })
        .collect();
    ensure!(actual.len() == expected.len(), "{} task events, expected {}: {actual:?}", actual.len(), expected.len());
    for (k, ((ac, ae), (ec, ee))) in actual.iter().zip(&expected).enumerate() {
        ensure!((ac - ec).abs() <= 1e-9 && ae == ee, "event {k}: got {ae:?} at {ac}, expected {ee:?} at {ec}");
    }

    // The structural claims, checked independently of the timeline above.
    let m = &run.metrics;
    ensure!(m.agent_of(t(2)) == Some(R), "T2 not done by the robot");
    ensure!(m.agent_of(t(9)) == Some(H), "T9 not done by the human");
    let pos = |want: &SchedulerEvent| actual.iter().position(|(_, e)| e == want);
    let reassign = pos(&TaskAborted { agent: R, task: t(9) });
    ensure!(reassign.is_some() == pos(&HomingInserted).is_some(), "homing without an aborted robot task");
    let t10 = pos(&TaskStarted { agent: R, task: t(10) }).ok_or("robot never starts T10")?;
    ensure!(reassign.is_some_and(|r| r < t10), "T10 did not follow the reassignment");
    let rejected = run.metrics.messages.iter().filter(|m| m.rejected.is_some()).count();
    ensure!(rejected == 0, "{rejected} message(s) rejected");
    Ok(format!("{} events match, makespan {:.3}", expected.len(), m.makespan))
}

fn monitor_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let job = assembly11();
    let mut prefixes = 0;
    for k in 0..50 {
        let dim = rng.random_range(1..=6);
        let (n, m) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let input = random_series(&mut rng, n, dim);
        let reference = random_series(&mut rng, m, dim);
        let series = TimeSeries::from_samples(dim, 0.01, &reference).map_err(|e| e.to_string())?;
        let mut dtw = OpenEndedDtw::new(Arc::new(series.clone())).map_err(|e| e.to_string())?;

        let task = TaskId(rng.random_range(1..=11));
        let mut refs = ReferenceLibrary::new();
        refs.insert(task, series).map_err(|e| e.to_string())?;
        let mut monitor = HumanMonitor::start(task, &refs, &job).map_err(|e| e.to_string())?;
        let t_h = job.task(task).unwrap().duration_human;
        let mut last = 0.0;
        for i in 0..n {
            dtw.push(&input[i]).map_err(|e| e.to_string())?;
            let want = dtw_table_completion(&input[..=i], &reference);
            ensure!(dtw.completion() == want, "pair {k} prefix {}: {} vs table {want}", i + 1, dtw.completion());

            monitor.observe(&input[i]).map_err(|e| e.to_string())?;
            let est = monitor.estimate((i + 1) as f64 * 0.01);
            ensure!(est.completion >= last, "pair {k}: completion fell from {last} to {}", est.completion);
            last = est.completion;
            ensure!(
                (est.t_res - (1.0 - est.completion) * t_h).abs() <= 1e-12,
                "pair {k}: t_res {} for completion {}",
                est.t_res,
                est.completion
            );
            let direct = estimate_remaining(task, want, &job).map_err(|e| e.to_string())?;
            ensure!((direct.t_res - (1.0 - want) * t_h).abs() <= 1e-12, "pair {k}: t_res {}", direct.t_res);
            prefixes += 1;
        }
    }
    Ok(format!("{prefixes} prefixes over 50 pairs"))
}

/// The lists and the done set of every snapshot must partition the job,
/// with each running task at the head of its agent's list.
fn check_conservation(n: usize, events: &[WireEvent]) -> Result<(), String> {
    let mut completed: BTreeMap<TaskId, usize> = BTreeMap::new();
    for e in events {
        match &e.payload {
            Payload::Snapshot(s) => {
                ensure!(s.human_current.is_none() || s.human_current == s.human_list.first(), "seq {}: human runs off-list", e.seq);
                ensure!(s.robot_current.is_none() || s.robot_current == s.robot_list.first(), "seq {}: robot runs off-list", e.seq);
                let mut seen = BTreeSet::new();
                let ids = s.human_list.iter().chain(s.robot_list.iter()).chain(s.done.iter().copied()).filter(|t| !t.is_homing());
                for id in ids {
                    ensure!(seen.insert(id), "seq {}: {id} held twice", e.seq);
                }
                ensure!(seen.len() == n, "seq {}: {} of {n} tasks accounted for", e.seq, seen.len());
                ensure!(seen.iter().all(|t| (1..=n as u32).contains(&t.0)), "seq {}: foreign task id", e.seq);
            }
            Payload::Event(SchedulerEvent::TaskCompleted { task, .. }) if !task.is_homing() => {
                *completed.entry(*task).or_default() += 1;
            }
            _ => {}
        }
    }
    ensure!(completed.len() == n, "{} of {n} tasks completed", completed.len());
    if let Some((t, c)) = completed.iter().find(|(_, &c)| c != 1) {
        return Err(format!("{t} completed {c} times"));
    }
    Ok(())
}

fn conservation_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let fixture = assembly11();
    let config = SimConfig { max_ticks: 100_000, ..SimConfig::default() };
    let (mut rejected, mut injected) = (0, 0);
    for run in 0..1000u64 {
        let size = rng.random_range(1..=9);
        let job = if run % 4 == 0 { fixture.clone() } else { random_cell_job(&mut rng, size) };
        let n = job.len();
        let script = random_storm(&mut rng, &job, run, 3.0);
        let mut sim = Simulation::nominal(Arc::new(job), script, config).map_err(|e| format!("run {run}: {e}"))?;
        let mut ticks = 0u64;
        while !sim.is_complete() {
            if rng.random_bool(0.02) {
                let task = TaskId(rng.random_range(0..=n as u32 + 1));
                let action = match rng.random_range(0..3) {
                    0 => ScriptAction::Delegate { task },
                    1 => ScriptAction::Reassign { task },
                    _ => ScriptAction::ConfirmDone { task },
                };
                injected += 1;
                if sim.inject(action).is_err() {
                    rejected += 1;
                }
            }
            sim.tick().map_err(|e| format!("run {run}: {e}"))?;
            ticks += 1;
            ensure!(ticks <= config.max_ticks, "run {run} did not terminate");
        }
        check_conservation(n, sim.log().entries()).map_err(|e| format!("run {run}: {e}"))?;
        let m = sim.metrics();
        ensure!(m.tasks.len() == n, "run {run}: {} task records", m.tasks.len());
    }
    Ok(format!("1000 runs, {injected} live injections ({rejected} refused up front)"))
}

fn determinism() -> Outcome {
    let job = assembly11();
    let config = SimConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let storm = random_storm(&mut rng, &job, 99, 3.0);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = 0;
    for (name, script) in [("experiment1", experiment1()), ("experiment2", experiment2()), ("storm", storm)] {
        let first = run_scenario(&job, &script, &config).map_err(|e| e.to_string())?;
        let second = run_scenario(&job, &script, &config).map_err(|e| e.to_string())?;
        let (a, b) = (render(&first.log), render(&second.log));
        ensure!(a == b, "{name}: rendered logs differ");

        let path = dir.path().join(format!("{name}.jsonl"));
        let sim = Simulation::nominal(Arc::new(job.clone()), script, config)
            .and_then(|s| s.with_log_file(&path))
            .map_err(|e| e.to_string())?;
        sim.run().map_err(|e| e.to_string())?;
        let on_disk = std::fs::read(&path).map_err(|e| e.to_string())?;
        ensure!(on_disk == a.as_bytes(), "{name}: file log differs from in-memory log");
        bytes += on_disk.len();
    }
    Ok(format!("3 scenarios, {bytes} bytes compared"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("nominal schedule reproduction", nominal_schedule),
        ("solver optimality", solver_optimality),
        ("knapsack oracle equivalence", knapsack_equivalence),
        ("slowdown rescheduling", experiment_one),
        ("delegate and reassign replay", experiment_two),
        ("monitor correctness", monitor_correctness),
        ("conservation fuzzing", conservation_fuzz),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
