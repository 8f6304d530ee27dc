//! Human progress estimation with open-ended dynamic time warping.
//!
//! An incomplete trace of the operator's motion is aligned against every
//! prefix of a reference execution of the same task. The reference prefix
//! with the cheapest alignment tells how far into the task the operator is;
//! the remaining time is that fraction's complement times the task's nominal
//! human duration.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::fmt::Write as _;

use thiserror::Error;

use crate::job::{JobSpec, TaskId};

/// Two 3-D wrist positions.
pub const DEFAULT_DIM: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error("sample dimension {got} does not match series dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("reference series must not be empty")]
    EmptyReference,
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("malformed reference file, line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Equally spaced samples of a `dim`-dimensional signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dim: usize,
    sample_period: f64,
    data: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dim: usize, sample_period: f64) -> Self {
        assert!(dim >= 1, "series dimension must be at least one");
        assert!(sample_period > 0.0, "sample period must be positive");
        Self { dim, sample_period, data: Vec::new() }
    }

    pub fn from_samples(dim: usize, sample_period: f64, samples: &[Vec<f64>]) -> Result<Self, MonitorError> {
        let mut s = Self::new(dim, sample_period);
        for sample in samples {
            s.push(sample)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<(), MonitorError> {
        if sample.len() != self.dim {
            return Err(MonitorError::Dimension { expected: self.dim, got: sample.len() });
        }
        self.data.extend_from_slice(sample);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// The first `len` samples.
    pub fn prefix(&self, len: usize) -> TimeSeries {
        Self { dim: self.dim, sample_period: self.sample_period, data: self.data[..len * self.dim].to_vec() }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Incremental open-ended DTW against one reference.
///
/// Keeps only the last row of the cumulative cost table (one entry per
/// reference sample), so each new input sample costs `O(len(reference))`.
#[derive(Debug, Clone)]
pub struct OpenEndedDtw {
    reference: Arc<TimeSeries>,
    row: Vec<f64>,
    consumed: usize,
}

impl OpenEndedDtw {
    pub fn new(reference: Arc<TimeSeries>) -> Result<Self, MonitorError> {
        if reference.is_empty() {
            return Err(MonitorError::EmptyReference);
        }
        Ok(Self { row: vec![0.0; reference.len()], reference, consumed: 0 })
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<(), MonitorError> {
        if sample.len() != self.reference.dim() {
            return Err(MonitorError::Dimension { expected: self.reference.dim(), got: sample.len() });
        }
        let m = self.reference.len();
        if self.consumed == 0 {
            let mut acc = 0.0;
            for j in 0..m {
                acc += euclidean(sample, self.reference.sample(j));
                self.row[j] = acc;
            }
        } else {
            let mut diag = self.row[0];
            self.row[0] += euclidean(sample, self.reference.sample(0));
            for j in 1..m {
                let up = self.row[j];
                let left = self.row[j - 1];
                self.row[j] = euclidean(sample, self.reference.sample(j)) + diag.min(up).min(left);
                diag = up;
            }
        }
        self.consumed += 1;
        Ok(())
    }

    /// Index of the reference sample the input currently aligns to; ties go
    /// to the later sample.
    pub fn matched_index(&self) -> Option<usize> {
        if self.consumed == 0 {
            return None;
        }
        let mut best = 0;
        for (j, &v) in self.row.iter().enumerate() {
            if v <= self.row[best] {
                best = j;
            }
        }
        Some(best)
    }

    pub fn completion(&self) -> f64 {
        match self.matched_index() {
            None => 0.0,
            Some(j) => (j + 1) as f64 / self.reference.len() as f64,
        }
    }
}

/// Fraction of `reference` that `prefix` corresponds to, in `[0, 1]`.
pub fn oe_dtw_completion(prefix: &TimeSeries, reference: &TimeSeries) -> Result<f64, MonitorError> {
    if prefix.dim() != reference.dim() {
        return Err(MonitorError::Dimension { expected: reference.dim(), got: prefix.dim() });
    }
    let mut dtw = OpenEndedDtw::new(Arc::new(reference.clone()))?;
    for s in prefix.samples() {
        dtw.push(s)?;
    }
    Ok(dtw.completion())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressEstimate {
    pub completion: f64,
    /// Remaining human time, normalized units.
    pub t_res: f64,
}

pub fn estimate_remaining(task: TaskId, completion: f64, job: &JobSpec) -> Result<ProgressEstimate, MonitorError> {
    let spec = job.task(task).ok_or(MonitorError::UnknownTask(task))?;
    let completion = completion.clamp(0.0, 1.0);
    Ok(ProgressEstimate { completion, t_res: (1.0 - completion) * spec.duration_human })
}

/// Per-task reference executions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceLibrary {
    series: BTreeMap<TaskId, Arc<TimeSeries>>,
}

impl ReferenceLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: TaskId, series: TimeSeries) -> Result<(), MonitorError> {
        if series.is_empty() {
            return Err(MonitorError::EmptyReference);
        }
        self.series.insert(task, Arc::new(series));
        Ok(())
    }

    pub fn get(&self, task: TaskId) -> Option<&TimeSeries> {
        self.series.get(&task).map(|s| s.as_ref())
    }

    pub fn shared(&self, task: TaskId) -> Option<Arc<TimeSeries>> {
        self.series.get(&task).cloned()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Smooth synthetic wrist trajectories for every human-executable task,
    /// one sample per `sample_period` of nominal human time.
    pub fn synthetic(job: &JobSpec, dim: usize, sample_period: f64) -> Self {
        let mut lib = Self::new();
        for task in job.tasks().iter().filter(|t| t.human_executable) {
            let n = ((task.duration_human / sample_period).round() as usize).max(2);
            let mut s = TimeSeries::new(dim, sample_period);
            let phase = task.id.0 as f64 * 0.7;
            for j in 0..n {
                let u = j as f64 / (n - 1) as f64;
                let sample: Vec<f64> = (0..dim)
                    .map(|d| {
                        let d = d as f64;
                        let sweep = 0.3 * u * (1.0 + 0.1 * d);
                        let wobble = 0.05 * (std::f64::consts::TAU * (1.0 + 0.5 * d) * u + phase + d).sin();
                        sweep + wobble
                    })
                    .collect();
                s.push(&sample).expect("dimension is fixed");
            }
            lib.series.insert(task.id, Arc::new(s));
        }
        lib
    }

    /// Parses the columnar reference format: a `task <id> dim <D> period <s>`
    /// header followed by one whitespace-separated sample per line. Blank
    /// lines and `#` comments are ignored.
    pub fn parse(source: &str) -> Result<Self, MonitorError> {
        let mut lib = Self::new();
        let mut current: Option<(TaskId, TimeSeries)> = None;
        for (no, raw) in source.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| MonitorError::Parse { line: line_no, reason };
            if line.starts_with("task") {
                if let Some((id, s)) = current.take() {
                    lib.insert(id, s).map_err(|e| err(e.to_string()))?;
                }
                let words: Vec<&str> = line.split_whitespace().collect();
                if words.len() != 6 || words[2] != "dim" || words[4] != "period" {
                    return Err(err("expected `task <id> dim <D> period <seconds>`".into()));
                }
                let id: u32 = words[1].parse().map_err(|_| err("bad task id".into()))?;
                let dim: usize = words[3].parse().map_err(|_| err("bad dimension".into()))?;
                let period: f64 = words[5].parse().map_err(|_| err("bad period".into()))?;
                if dim == 0 || !(period > 0.0) {
                    return Err(err("dimension and period must be positive".into()));
                }
                if lib.get(TaskId(id)).is_some() {
                    return Err(err(format!("duplicate reference for task {id}")));
                }
                current = Some((TaskId(id), TimeSeries::new(dim, period)));
            } else {
                let (_, series) = current.as_mut().ok_or_else(|| err("sample before header".into()))?;
                let sample = line
                    .split_whitespace()
                    .map(|w| w.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| err(e.to_string()))?;
                series.push(&sample).map_err(|e| err(e.to_string()))?;
            }
        }
        if let Some((id, s)) = current {
            lib.insert(id, s).map_err(|e| MonitorError::Parse { line: source.lines().count(), reason: e.to_string() })?;
        }
        Ok(lib)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (id, s) in &self.series {
            let _ = writeln!(out, "task {} dim {} period {}", id.0, s.dim(), s.sample_period());
            for sample in s.samples() {
                let cols: Vec<String> = sample.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", cols.join(" "));
            }
        }
        out
    }
}

/// Estimates progress on `task` from the trace observed so far. Tasks
/// without a reference fall back to elapsed time over nominal duration.
pub fn monitor_human(
    task: TaskId,
    live_prefix: &TimeSeries,
    elapsed: f64,
    refs: &ReferenceLibrary,
    job: &JobSpec,
) -> Result<ProgressEstimate, MonitorError> {
    let spec = job.task(task).ok_or(MonitorError::UnknownTask(task))?;
    let completion = match refs.get(task) {
        Some(reference) => oe_dtw_completion(live_prefix, reference)?,
        None => {
            tracing::debug!(%task, "no reference series, estimating from elapsed time");
            elapsed / spec.duration_human
        }
    };
    estimate_remaining(task, completion, job)
}

/// Progress monitor bound to one execution of one human task. Reported
/// completion never decreases.
#[derive(Debug, Clone)]
pub struct HumanMonitor {
    task: TaskId,
    duration: f64,
    dtw: Option<OpenEndedDtw>,
    best: f64,
}

impl HumanMonitor {
    pub fn start(task: TaskId, refs: &ReferenceLibrary, job: &JobSpec) -> Result<Self, MonitorError> {
        let spec = job.task(task).ok_or(MonitorError::UnknownTask(task))?;
        let dtw = match refs.shared(task) {
            Some(r) => Some(OpenEndedDtw::new(r)?),
            None => {
                tracing::warn!(%task, "no reference series; progress monitor running in degraded mode");
                None
            }
        };
        Ok(Self { task, duration: spec.duration_human, dtw, best: 0.0 })
    }

    pub fn task(&self) -> TaskId {
        self.task
    }

    pub fn is_degraded(&self) -> bool {
        self.dtw.is_none()
    }

    pub fn observe(&mut self, sample: &[f64]) -> Result<(), MonitorError> {
        match self.dtw.as_mut() {
            Some(dtw) => dtw.push(sample),
            None => Ok(()),
        }
    }

    pub fn estimate(&mut self, elapsed: f64) -> ProgressEstimate {
        let raw = match &self.dtw {
            Some(dtw) => dtw.completion(),
            None => elapsed / self.duration,
        };
        self.best = self.best.max(raw.clamp(0.0, 1.0));
        ProgressEstimate { completion: self.best, t_res: (1.0 - self.best) * self.duration }
    }
}
