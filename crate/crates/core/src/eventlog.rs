//! Append-only run log.
//!
//! Every entry is one JSON object per line:
//!
//! ```text
//! {"v":1,"seq":0,"clock":0.0,"event":{"type":"task_started","agent":"human","task":1}}
//! {"v":1,"seq":1,"clock":0.0,"snapshot":{"human_current":1,...}}
//! ```
//!
//! Field names are stable; readers ignore fields they do not know. A
//! `snapshot` entry closes every tick that produced events, so folding a log
//! prefix reconstructs the scheduler state at that point.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::job::{TaskId, TaskList};
use crate::scheduler::{SchedulerEvent, SchedulerState};
use crate::sim::ScriptAction;

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub human_current: Option<TaskId>,
    pub robot_current: Option<TaskId>,
    pub human_list: TaskList,
    pub robot_list: TaskList,
    pub done: Vec<TaskId>,
    pub clock: f64,
    pub t_res: f64,
    pub complete: bool,
}

impl StateSnapshot {
    pub fn of(state: &SchedulerState) -> Self {
        Self {
            human_current: state.current_human,
            robot_current: state.current_robot,
            human_list: state.human_list.clone(),
            robot_list: state.robot_list.clone(),
            done: state.done.iter().copied().collect(),
            clock: state.clock,
            t_res: state.t_res,
            complete: state.complete,
        }
    }

    /// Same assignment of tasks, ignoring clock and estimates.
    pub fn same_schedule(&self, other: &StateSnapshot) -> bool {
        self.human_current == other.human_current
            && self.robot_current == other.robot_current
            && self.human_list == other.human_list
            && self.robot_list == other.robot_list
            && self.done == other.done
            && self.complete == other.complete
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Event(SchedulerEvent),
    /// A script or operator event taking effect in the simulated cell.
    Script(ScriptAction),
    Snapshot(StateSnapshot),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    pub v: u32,
    pub seq: u64,
    pub clock: f64,
    #[serde(flatten)]
    pub payload: Payload,
}

impl WireEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("wire events always serialize")
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Decode { line: usize, source: serde_json::Error },
    #[error("line {line}: sequence {found} follows {previous}")]
    Sequence { line: usize, previous: u64, found: u64 },
    #[error("sequence {requested} is out of range (log holds 0..={last})")]
    Range { requested: i64, last: i64 },
}

/// In-memory log with an optional file mirror that only ever grows.
#[derive(Debug, Default)]
pub struct EventLog {
    entries: Vec<WireEvent>,
    sink: Option<BufWriter<File>>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_file(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { entries: Vec::new(), sink: Some(BufWriter::new(file)) })
    }

    pub fn append(&mut self, clock: f64, payload: Payload) -> Result<u64, LogError> {
        let seq = self.entries.len() as u64;
        let entry = WireEvent { v: WIRE_VERSION, seq, clock, payload };
        if let Some(sink) = self.sink.as_mut() {
            writeln!(sink, "{}", entry.to_line())?;
        }
        self.entries.push(entry);
        Ok(seq)
    }

    pub fn flush(&mut self) -> Result<(), LogError> {
        if let Some(sink) = self.sink.as_mut() {
            sink.flush()?;
        }
        Ok(())
    }

    pub fn entries(&self) -> &[WireEvent] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries from `from` on. `from == len` is a valid empty tail.
    pub fn since(&self, from: i64) -> Result<&[WireEvent], LogError> {
        if from < 0 || from as usize > self.entries.len() {
            return Err(LogError::Range { requested: from, last: self.entries.len() as i64 - 1 });
        }
        Ok(&self.entries[from as usize..])
    }

    pub fn into_entries(mut self) -> Vec<WireEvent> {
        let _ = self.flush();
        std::mem::take(&mut self.entries)
    }

    pub fn render(&self) -> String {
        render(&self.entries)
    }
}

impl Drop for EventLog {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

pub fn render(entries: &[WireEvent]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&e.to_line());
        out.push('\n');
    }
    out
}

/// Reads a log, checking that sequence numbers run 0, 1, 2, ...
pub fn read_log(reader: impl io::Read) -> Result<Vec<WireEvent>, LogError> {
    let mut out: Vec<WireEvent> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: WireEvent = serde_json::from_str(&line).map_err(|source| LogError::Decode { line: i + 1, source })?;
        let expected = out.len() as u64;
        if entry.seq != expected {
            return Err(LogError::Sequence { line: i + 1, previous: expected.wrapping_sub(1), found: entry.seq });
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn read_log_file(path: &Path) -> Result<Vec<WireEvent>, LogError> {
    read_log(File::open(path)?)
}

/// Folds a log prefix into the last known schedule. Completion events keep
/// `done` current between snapshots.
#[derive(Debug, Clone, Default)]
pub struct Replay {
    pub snapshot: Option<StateSnapshot>,
    pub done: BTreeSet<TaskId>,
    pub last_seq: Option<u64>,
}

impl Replay {
    pub fn apply(&mut self, entry: &WireEvent) {
        match &entry.payload {
            Payload::Snapshot(s) => {
                self.done = s.done.iter().copied().collect();
                self.snapshot = Some(s.clone());
            }
            Payload::Event(SchedulerEvent::TaskCompleted { task, .. }) if !task.is_homing() => {
                self.done.insert(*task);
            }
            _ => {}
        }
        self.last_seq = Some(entry.seq);
    }

    pub fn fold<'a>(entries: impl IntoIterator<Item = &'a WireEvent>) -> Self {
        let mut r = Self::default();
        for e in entries {
            r.apply(e);
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::job::AgentId;

    fn sample() -> Vec<Payload> {
        vec![
            Payload::Event(SchedulerEvent::TaskStarted { agent: AgentId::Human, task: TaskId(1) }),
            Payload::Script(ScriptAction::HumanSpeed { factor: 0.5 }),
            Payload::Snapshot(StateSnapshot {
                human_current: Some(TaskId(1)),
                robot_current: None,
                human_list: crate::job::list(&[1, 2]),
                robot_list: crate::job::list(&[3]),
                done: vec![],
                clock: 0.0,
                t_res: 0.375,
                complete: false,
            }),
        ]
    }

    #[test]
    fn lines_round_trip_and_sequence_is_checked() {
        let mut log = EventLog::new();
        for p in sample() {
            log.append(0.0, p).unwrap();
        }
        let text = log.render();
        assert!(text.starts_with(r#"{"v":1,"seq":0,"clock":0.0,"event":{"type":"task_started","agent":"human","task":1}}"#));
        let back = read_log(text.as_bytes()).unwrap();
        assert_eq!(back, log.entries());

        let skipped: String = text.lines().enumerate().filter(|(i, _)| *i != 1).map(|(_, l)| format!("{l}\n")).collect();
        assert!(matches!(read_log(skipped.as_bytes()), Err(LogError::Sequence { line: 2, found: 2, .. })));
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let line = r#"{"v":1,"seq":0,"clock":0.5,"event":{"type":"homing_inserted"},"extra":true}"#;
        let back = read_log(line.as_bytes()).unwrap();
        assert_eq!(back[0].payload, Payload::Event(SchedulerEvent::HomingInserted));
    }

    #[test]
    fn since_handles_tail_and_range() {
        let mut log = EventLog::new();
        for p in sample() {
            log.append(0.0, p).unwrap();
        }
        assert_eq!(log.since(0).unwrap().len(), 3);
        assert_eq!(log.since(3).unwrap().len(), 0);
        assert!(matches!(log.since(-1), Err(LogError::Range { .. })));
        assert!(matches!(log.since(4), Err(LogError::Range { .. })));
    }

    #[test]
    fn file_log_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        {
            let mut log = EventLog::with_file(&path).unwrap();
            for p in sample() {
                log.append(0.0, p).unwrap();
            }
        }
        let back = read_log_file(&path).unwrap();
        assert_eq!(back.len(), 3);
        let replay = Replay::fold(&back);
        assert_eq!(replay.snapshot.unwrap().robot_list, crate::job::list(&[3]));
    }
}
