//! Workload-shift trigger over entry-point invocation streams.
//!
//! Invocations are counted in tumbling windows of `window_ms`, aligned to
//! the first event. For each pair of adjacent windows the controller
//! compares invocation probabilities `p_i = N_i / ΣN` and fires when the
//! ℓ1 distance `Σ|Δp_i|` exceeds `epsilon`. Windows without traffic have no
//! distribution, so boundaries touching one never fire.

use std::collections::{BTreeMap, HashSet};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::profile::InvocationEvent;

pub const DEFAULT_WINDOW_MS: i64 = 43_200_000;
pub const DEFAULT_EPSILON: f64 = 0.002;

#[derive(Debug, Error, PartialEq)]
pub enum AdaptiveError {
    #[error("invocation stream is empty")]
    EmptyStream,
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("unrecognized trace header `{0}` (expected app_id,entry_point,timestamp_ms or app_id,entry_point,window_start_ms,count)")]
    UnknownTraceFormat(String),
    #[error("trace CSV error: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub window_ms: i64,
    pub epsilon: f64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            window_ms: DEFAULT_WINDOW_MS,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), AdaptiveError> {
        if self.window_ms <= 0 {
            return Err(AdaptiveError::InvalidConfig(format!(
                "window_ms must be positive, got {}",
                self.window_ms
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(AdaptiveError::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start_ms: i64,
    pub end_ms: i64,
    pub counts: BTreeMap<String, u64>,
}

impl Window {
    pub fn new(start_ms: i64, window_ms: i64) -> Self {
        Window {
            start_ms,
            end_ms: start_ms + window_ms,
            counts: BTreeMap::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Invocation probabilities, or `None` for a window without traffic.
    pub fn probabilities(&self) -> Option<BTreeMap<String, f64>> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        Some(
            self.counts
                .iter()
                .map(|(k, &n)| (k.clone(), n as f64 / total as f64))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerDecision {
    /// Index of the later window of the compared pair.
    pub window_index: usize,
    pub window_end_ms: i64,
    pub total_delta: f64,
    pub fired: bool,
    pub per_entry_delta: BTreeMap<String, f64>,
    /// True when either window had no traffic.
    pub skipped: bool,
}

/// Compares two adjacent windows.
pub fn delta(prev: &Window, cur: &Window, epsilon: f64, window_index: usize) -> TriggerDecision {
    let (Some(p), Some(q)) = (prev.probabilities(), cur.probabilities()) else {
        return TriggerDecision {
            window_index,
            window_end_ms: cur.end_ms,
            total_delta: 0.0,
            fired: false,
            per_entry_delta: BTreeMap::new(),
            skipped: true,
        };
    };
    let keys: std::collections::BTreeSet<&String> = p.keys().chain(q.keys()).collect();
    let per_entry_delta: BTreeMap<String, f64> = keys
        .into_iter()
        .map(|k| {
            let d = q.get(k).copied().unwrap_or(0.0) - p.get(k).copied().unwrap_or(0.0);
            (k.clone(), d)
        })
        .collect();
    let total_delta = per_entry_delta.values().map(|d| d.abs()).sum::<f64>().min(2.0);
    TriggerDecision {
        window_index,
        window_end_ms: cur.end_ms,
        total_delta,
        fired: total_delta > epsilon,
        per_entry_delta,
        skipped: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerTimeline {
    pub config: AdaptiveConfig,
    pub windows: usize,
    pub decisions: Vec<TriggerDecision>,
}

impl TriggerTimeline {
    pub fn fired(&self) -> impl Iterator<Item = &TriggerDecision> {
        self.decisions.iter().filter(|d| d.fired)
    }

    pub fn fired_windows(&self) -> Vec<usize> {
        self.fired().map(|d| d.window_index).collect()
    }
}

/// One observation: `count` invocations of `entry_point` at `timestamp_ms`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub app_id: String,
    pub entry_point: String,
    pub timestamp_ms: i64,
    pub count: u64,
}

impl From<&InvocationEvent> for TraceRow {
    fn from(e: &InvocationEvent) -> Self {
        TraceRow {
            app_id: String::new(),
            entry_point: e.entry_point.clone(),
            timestamp_ms: e.timestamp_ms,
            count: 1,
        }
    }
}

/// Buckets rows into contiguous windows aligned to the earliest timestamp.
/// Gaps in the stream become empty windows.
pub fn bucket(rows: &[TraceRow], window_ms: i64) -> Result<Vec<Window>, AdaptiveError> {
    let start = rows
        .iter()
        .map(|r| r.timestamp_ms)
        .min()
        .ok_or(AdaptiveError::EmptyStream)?;
    let last = rows.iter().map(|r| r.timestamp_ms).max().unwrap_or(start);
    let n = ((last - start) / window_ms) as usize + 1;
    let mut windows: Vec<Window> = (0..n)
        .map(|i| Window::new(start + i as i64 * window_ms, window_ms))
        .collect();
    for r in rows {
        let idx = ((r.timestamp_ms - start) / window_ms) as usize;
        *windows[idx].counts.entry(r.entry_point.clone()).or_insert(0) += r.count;
    }
    Ok(windows)
}

/// Decisions for every adjacent pair of windows.
pub fn run_windows(windows: &[Window], cfg: &AdaptiveConfig, exec: Execution) -> TriggerTimeline {
    let pairs = windows.len().saturating_sub(1);
    let decisions = exec.map_range(pairs, |i| delta(&windows[i], &windows[i + 1], cfg.epsilon, i + 1));
    TriggerTimeline {
        config: *cfg,
        windows: windows.len(),
        decisions,
    }
}

pub fn run_rows(rows: &[TraceRow], cfg: &AdaptiveConfig, exec: Execution) -> Result<TriggerTimeline, AdaptiveError> {
    cfg.validate()?;
    let windows = bucket(rows, cfg.window_ms)?;
    Ok(run_windows(&windows, cfg, exec))
}

/// Runs the controller over invocation events (sorted defensively).
pub fn run_stream(
    events: &[InvocationEvent],
    cfg: &AdaptiveConfig,
    exec: Execution,
) -> Result<TriggerTimeline, AdaptiveError> {
    let rows: Vec<TraceRow> = events.iter().map(TraceRow::from).collect();
    run_rows(&rows, cfg, exec)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TraceFormat {
    Events,
    Bucketed,
}

/// Parses a trace CSV in either accepted layout. Rows that fail to parse
/// are returned with their 1-based line numbers instead of aborting.
pub fn parse_trace_csv(text: &str) -> Result<(Vec<TraceRow>, Vec<RejectedRow>), AdaptiveError> {
    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    read_trace(text.as_bytes(), |r| match r {
        Ok(row) => rows.push(row),
        Err(bad) => rejected.push(bad),
    })?;
    Ok((rows, rejected))
}

/// Streams rows of a trace CSV from `input` as they are read. Only an
/// unreadable or unrecognized header is an error; bad rows are passed to
/// `on_row` as [`RejectedRow`]s.
pub fn read_trace<R: std::io::Read>(
    input: R,
    mut on_row: impl FnMut(Result<TraceRow, RejectedRow>),
) -> Result<(), AdaptiveError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| AdaptiveError::Csv(e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let format = match names.as_slice() {
        ["app_id", "entry_point", "timestamp_ms"] => TraceFormat::Events,
        ["app_id", "entry_point", "window_start_ms", "count"] => TraceFormat::Bucketed,
        _ => return Err(AdaptiveError::UnknownTraceFormat(names.join(","))),
    };
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
                on_row(parse_row(&record, format).map_err(|reason| RejectedRow { line, reason }));
            }
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(AdaptiveError::Csv(e.to_string()));
                }
                on_row(Err(RejectedRow {
                    line,
                    reason: e.to_string(),
                }));
            }
        }
    }
    Ok(())
}

fn parse_row(record: &csv::StringRecord, format: TraceFormat) -> Result<TraceRow, String> {
    let expected = match format {
        TraceFormat::Events => 3,
        TraceFormat::Bucketed => 4,
    };
    if record.len() != expected {
        return Err(format!("expected {expected} fields, found {}", record.len()));
    }
    let app_id = record[0].to_string();
    let entry_point = record[1].to_string();
    if entry_point.is_empty() {
        return Err("empty entry_point".into());
    }
    let timestamp_ms: i64 = record[2]
        .parse()
        .map_err(|_| format!("invalid timestamp `{}`", &record[2]))?;
    let count = match format {
        TraceFormat::Events => 1,
        TraceFormat::Bucketed => record[3]
            .parse()
            .map_err(|_| format!("invalid count `{}`", &record[3]))?,
    };
    Ok(TraceRow {
        app_id,
        entry_point,
        timestamp_ms,
        count,
    })
}

/// Pre-bucketed CSV (`app_id,entry_point,window_start_ms,count`).
pub fn windows_to_csv(app_id: &str, windows: &[Window]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["app_id", "entry_point", "window_start_ms", "count"])
        .expect("writing to memory");
    for win in windows {
        for (ep, n) in &win.counts {
            w.write_record([app_id, ep, &win.start_ms.to_string(), &n.to_string()])
                .expect("writing to memory");
        }
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}

/// Incremental controller for live streams.
///
/// Events may arrive out of order by up to a grace period of `window_ms /
/// 10`; a window is closed once an event beyond its end plus the grace
/// period is seen. Events carrying an invocation id are deduplicated, so
/// at-least-once delivery is safe. Later stragglers are dropped and counted.
#[derive(Debug)]
pub struct StreamController {
    cfg: AdaptiveConfig,
    grace_ms: i64,
    start_ms: Option<i64>,
    open: BTreeMap<usize, Window>,
    seen: HashSet<String>,
    last_closed: Option<(usize, Window)>,
    next_to_close: usize,
    watermark: i64,
    late_dropped: u64,
    windows_closed: usize,
}

impl StreamController {
    pub fn new(cfg: AdaptiveConfig) -> Result<Self, AdaptiveError> {
        cfg.validate()?;
        Ok(StreamController {
            cfg,
            grace_ms: cfg.window_ms / 10,
            start_ms: None,
            open: BTreeMap::new(),
            seen: HashSet::new(),
            last_closed: None,
            next_to_close: 0,
            watermark: i64::MIN,
            late_dropped: 0,
            windows_closed: 0,
        })
    }

    pub fn late_dropped(&self) -> u64 {
        self.late_dropped
    }

    /// Records an observation; returns decisions for windows it closed.
    pub fn observe(
        &mut self,
        entry_point: &str,
        timestamp_ms: i64,
        count: u64,
        id: Option<&str>,
    ) -> Vec<TriggerDecision> {
        let start = *self.start_ms.get_or_insert(timestamp_ms);
        if timestamp_ms < start {
            self.late_dropped += count;
            return Vec::new();
        }
        let idx = ((timestamp_ms - start) / self.cfg.window_ms) as usize;
        if idx < self.next_to_close {
            self.late_dropped += count;
            return Vec::new();
        }
        if let Some(id) = id {
            if !self.seen.insert(id.to_string()) {
                return Vec::new();
            }
        }
        let window_ms = self.cfg.window_ms;
        let w = self
            .open
            .entry(idx)
            .or_insert_with(|| Window::new(start + idx as i64 * window_ms, window_ms));
        *w.counts.entry(entry_point.to_string()).or_insert(0) += count;
        self.watermark = self.watermark.max(timestamp_ms);
        self.close_ready(false)
    }

    pub fn observe_event(&mut self, e: &InvocationEvent) -> Vec<TriggerDecision> {
        self.observe(&e.entry_point, e.timestamp_ms, 1, Some(&e.invocation_id))
    }

    /// Closes every remaining window.
    pub fn finish(&mut self) -> Vec<TriggerDecision> {
        self.close_ready(true)
    }

    fn close_ready(&mut self, all: bool) -> Vec<TriggerDecision> {
        let Some(start) = self.start_ms else {
            return Vec::new();
        };
        let last_idx = match self.open.keys().next_back() {
            Some(&i) => i,
            None => return Vec::new(),
        };
        let mut out = Vec::new();
        loop {
            let idx = self.next_to_close;
            let end = start + (idx as i64 + 1) * self.cfg.window_ms;
            let ready = if all {
                idx <= last_idx
            } else {
                self.watermark >= end + self.grace_ms
            };
            if !ready {
                break;
            }
            let w = self
                .open
                .remove(&idx)
                .unwrap_or_else(|| Window::new(end - self.cfg.window_ms, self.cfg.window_ms));
            if let Some((_, prev)) = &self.last_closed {
                out.push(delta(prev, &w, self.cfg.epsilon, idx));
            }
            self.last_closed = Some((idx, w));
            self.next_to_close += 1;
            self.windows_closed += 1;
        }
        if all {
            self.seen.clear();
        }
        out
    }

    pub fn windows_closed(&self) -> usize {
        self.windows_closed
    }
}

/// A message to a controller thread.
#[derive(Debug, Clone)]
pub struct Observation {
    pub entry_point: String,
    pub timestamp_ms: i64,
    pub count: u64,
    pub id: Option<String>,
}

pub struct ControllerOutput {
    pub decisions: Vec<TriggerDecision>,
    pub late_dropped: u64,
}

/// Runs a [`StreamController`] on its own thread behind a bounded queue.
/// `on_decision` is called for every closed boundary as it happens.
pub fn spawn_controller<F>(
    cfg: AdaptiveConfig,
    capacity: usize,
    mut on_decision: F,
) -> Result<(SyncSender<Observation>, JoinHandle<ControllerOutput>), AdaptiveError>
where
    F: FnMut(&TriggerDecision) + Send + 'static,
{
    let mut controller = StreamController::new(cfg)?;
    let (tx, rx): (SyncSender<Observation>, Receiver<Observation>) = sync_channel(capacity.max(1));
    let handle = std::thread::spawn(move || {
        let mut decisions = Vec::new();
        for obs in rx {
            for d in controller.observe(&obs.entry_point, obs.timestamp_ms, obs.count, obs.id.as_deref()) {
                on_decision(&d);
                decisions.push(d);
            }
        }
        for d in controller.finish() {
            on_decision(&d);
            decisions.push(d);
        }
        ControllerOutput {
            decisions,
            late_dropped: controller.late_dropped(),
        }
    });
    Ok((tx, handle))
}
