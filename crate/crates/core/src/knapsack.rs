//! Exact 0/1 knapsack over real-valued task durations.
//!
//! Value and weight coincide (a task's robot duration), so the fill picks the
//! subset of candidates with the largest total duration that fits the budget.
//! Among subsets whose totals are within [`VALUE_TOLERANCE`] of the best, the
//! lexicographically smallest sorted id sequence wins.

use crate::job::{TaskId, TaskList};

/// A subset fits when its total is at most `budget + FIT_TOLERANCE`.
pub const FIT_TOLERANCE: f64 = 1e-9;
pub const VALUE_TOLERANCE: f64 = 1e-9;

struct Fill {
    ids: Vec<TaskId>,
    durations: Vec<f64>,
    /// `rest[k]`: total duration of items `k..`.
    rest: Vec<f64>,
    limit: f64,
}

impl Fill {
    fn best_value(&self, k: usize, total: f64, best: &mut f64) {
        *best = best.max(total);
        if k == self.ids.len() || total + self.rest[k] <= *best {
            return;
        }
        let with = total + self.durations[k];
        if with <= self.limit {
            self.best_value(k + 1, with, best);
        }
        self.best_value(k + 1, total, best);
    }

    /// Pre-order walk in which each node is a sorted id prefix, the node
    /// itself precedes its extensions, and extensions go by increasing id.
    /// That is exactly lexicographic order over sorted id sequences.
    fn first_at_least(&self, start: usize, total: f64, target: f64, chosen: &mut Vec<usize>) -> bool {
        if total >= target {
            return true;
        }
        if total + self.rest[start] < target {
            return false;
        }
        for k in start..self.ids.len() {
            let with = total + self.durations[k];
            if with > self.limit {
                continue;
            }
            chosen.push(k);
            if self.first_at_least(k + 1, with, target, chosen) {
                return true;
            }
            chosen.pop();
        }
        false
    }
}

/// Selects the subset of `candidates` to run next, returned in increasing id
/// order.
pub fn knapsack_fill(candidates: &TaskList, budget: f64, duration: impl Fn(TaskId) -> f64) -> TaskList {
    if !(budget >= 0.0) || candidates.is_empty() {
        return TaskList::new();
    }
    let mut ids: Vec<TaskId> = candidates.iter().collect();
    ids.sort();
    let durations: Vec<f64> = ids.iter().map(|&t| duration(t)).collect();
    let mut rest = vec![0.0; ids.len() + 1];
    for k in (0..ids.len()).rev() {
        rest[k] = rest[k + 1] + durations[k];
    }
    let fill = Fill { ids, durations, rest, limit: budget + FIT_TOLERANCE };

    let mut best = 0.0;
    fill.best_value(0, 0.0, &mut best);
    if best <= 0.0 {
        return TaskList::new();
    }
    let mut chosen = Vec::new();
    let found = fill.first_at_least(0, 0.0, best - VALUE_TOLERANCE, &mut chosen);
    debug_assert!(found, "the optimal subset satisfies its own target");
    TaskList::from_ids(chosen.into_iter().map(|k| fill.ids[k])).expect("indices are distinct")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::job::list;

    fn by_table(table: &'static [(u32, f64)]) -> impl Fn(TaskId) -> f64 {
        move |t| table.iter().find(|e| e.0 == t.0).unwrap().1
    }

    #[test]
    fn empty_budget_or_candidates() {
        let d = by_table(&[(1, 0.3)]);
        assert_eq!(knapsack_fill(&list(&[1]), 0.0, &d), TaskList::new());
        assert_eq!(knapsack_fill(&TaskList::new(), 1.0, &d), TaskList::new());
    }

    #[test]
    fn picks_the_pair_that_fills_exactly() {
        let d = by_table(&[(1, 0.35), (2, 0.35), (3, 0.25)]);
        assert_eq!(knapsack_fill(&list(&[1, 2, 3]), 0.60, &d), list(&[1, 3]));
    }

    #[test]
    fn unconstrained_budget_takes_everything_sorted() {
        let d = by_table(&[(9, 0.35), (8, 0.35), (11, 0.25)]);
        assert_eq!(knapsack_fill(&list(&[11, 9, 8]), 5.0, &d), list(&[8, 9, 11]));
    }

    #[test]
    fn shorter_prefix_wins_ties() {
        // {1,2} and {1,2,3} reach the same total only if item 3 is free; with
        // equal totals across different sets, the smaller sequence wins.
        let d = by_table(&[(1, 0.2), (2, 0.3), (3, 0.5)]);
        assert_eq!(knapsack_fill(&list(&[1, 2, 3]), 0.5, &d), list(&[1, 2]));
    }
}
