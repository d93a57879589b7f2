//! Frame ↔ event-clock alignment through shared trigger timestamps.

use std::io::BufRead;

use thiserror::Error;

use crate::event::Event;

#[derive(Debug, Error, PartialEq)]
pub enum SyncError {
    #[error("{triggers} trigger timestamps cannot cover {frames} frames")]
    TooFewTriggers { triggers: usize, frames: usize },
    #[error("trigger {index} at t={t} does not follow t={prev}")]
    NotIncreasing { index: usize, t: u64, prev: u64 },
    #[error("frame index {index} out of range (frame count {count})")]
    FrameOutOfRange { index: usize, count: usize },
    #[error("trigger file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Which events belong to a frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EventWindow {
    /// `(frame_time(i-1), frame_time(i)]`, from the stream start for frame 0.
    #[default]
    SincePrevious,
    /// `(frame_time(i) - duration, frame_time(i)]`.
    HalfOpen { duration_us: u64 },
}

impl std::str::FromStr for EventWindow {
    type Err = String;

    /// `since-prev` or `half-open:<microseconds>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "since-prev" | "since_prev" => Ok(EventWindow::SincePrevious),
            _ => {
                let d = s
                    .strip_prefix("half-open:")
                    .or_else(|| s.strip_prefix("half_open:"))
                    .ok_or_else(|| format!("unknown window '{s}' (since-prev | half-open:<us>)"))?;
                let duration_us = d
                    .parse()
                    .map_err(|_| format!("bad half-open duration '{d}'"))?;
                Ok(EventWindow::HalfOpen { duration_us })
            }
        }
    }
}

impl std::fmt::Display for EventWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventWindow::SincePrevious => f.write_str("since-prev"),
            EventWindow::HalfOpen { duration_us } => write!(f, "half-open:{duration_us}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameTimeline {
    triggers: Vec<u64>,
    frame_count: usize,
}

impl FrameTimeline {
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn triggers(&self) -> &[u64] {
        &self.triggers
    }

    /// Triggers beyond the last frame (dropped frames).
    pub fn surplus(&self) -> usize {
        self.triggers.len() - self.frame_count
    }

    /// Frame timestamps, one per frame.
    pub fn frame_times(&self) -> &[u64] {
        &self.triggers[..self.frame_count]
    }

    pub fn frame_time(&self, i: usize) -> Result<u64, SyncError> {
        if i >= self.frame_count {
            return Err(SyncError::FrameOutOfRange {
                index: i,
                count: self.frame_count,
            });
        }
        Ok(self.triggers[i])
    }

    /// The events of `events` (sorted by timestamp) that fall in frame `i`'s
    /// window. Right edges are inclusive.
    pub fn events_for_frame<'a>(
        &self,
        events: &'a [Event],
        i: usize,
        window: EventWindow,
    ) -> Result<&'a [Event], SyncError> {
        let end_t = self.frame_time(i)?;
        let start = match window {
            EventWindow::SincePrevious if i == 0 => 0,
            EventWindow::SincePrevious => {
                let prev = self.triggers[i - 1];
                events.partition_point(|e| e.t <= prev)
            }
            EventWindow::HalfOpen { duration_us } => match end_t.checked_sub(duration_us) {
                Some(lo) => events.partition_point(|e| e.t <= lo),
                None => 0,
            },
        };
        let end = events.partition_point(|e| e.t <= end_t);
        Ok(&events[start.min(end)..end])
    }
}

pub fn register_triggers(trigger_t: Vec<u64>, frame_count: usize) -> Result<FrameTimeline, SyncError> {
    for (index, w) in trigger_t.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(SyncError::NotIncreasing {
                index: index + 1,
                t: w[1],
                prev: w[0],
            });
        }
    }
    if trigger_t.len() < frame_count {
        return Err(SyncError::TooFewTriggers {
            triggers: trigger_t.len(),
            frames: frame_count,
        });
    }
    Ok(FrameTimeline {
        triggers: trigger_t,
        frame_count,
    })
}

/// One decimal microsecond timestamp per line; blank lines are skipped.
pub fn read_triggers<R: BufRead>(reader: R) -> Result<Vec<u64>, SyncError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SyncError::Io(e.to_string()))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        out.push(text.parse().map_err(|_| SyncError::Parse {
            line: i + 1,
            reason: format!("bad timestamp '{text}'"),
        })?);
    }
    Ok(out)
}

pub fn write_triggers<W: std::io::Write>(triggers: &[u64], mut sink: W) -> std::io::Result<()> {
    for t in triggers {
        writeln!(sink, "{t}")?;
    }
    sink.flush()
}
