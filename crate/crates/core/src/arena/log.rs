//! Append-only JSONL match logs and their replay.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::clock::Clock;
use super::session::MatchLogRecord;
use super::wire::{MatchResult, Score, WireMessage};
use crate::env::CONTROL_HZ;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Tick(MatchLogRecord),
    End { result: MatchResult, score: Score },
}

pub struct MatchLogWriter<W: Write> {
    out: W,
    records: u64,
}

impl<W: Write> MatchLogWriter<W> {
    pub fn new(out: W) -> Self {
        MatchLogWriter { out, records: 0 }
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn append(&mut self, record: &MatchLogRecord) -> Result<()> {
        self.line(&LogLine::Tick(record.clone()))?;
        self.records += 1;
        Ok(())
    }

    /// Writes the closing record and flushes.
    pub fn finish(&mut self, result: MatchResult, score: Score) -> Result<()> {
        self.line(&LogLine::End { result, score })?;
        self.out.flush()?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }

    fn line(&mut self, line: &LogLine) -> Result<()> {
        serde_json::to_writer(&mut self.out, line)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

/// A parsed log. `end` is `None` when the log stops early or a line is
/// damaged; the records before the damage are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchLog {
    pub records: Vec<MatchLogRecord>,
    pub end: Option<(MatchResult, Score)>,
}

impl MatchLog {
    pub fn read<R: BufRead>(input: R) -> Result<MatchLog> {
        let mut records = Vec::new();
        let mut end = None;
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if end.is_some() {
                return Err(Error::Malformed(
                    "records after the end of the match".into(),
                ));
            }
            match serde_json::from_str::<LogLine>(&line) {
                Ok(LogLine::Tick(r)) => records.push(r),
                Ok(LogLine::End { result, score }) => end = Some((result, score)),
                Err(_) => break,
            }
        }
        Ok(MatchLog { records, end })
    }

    /// The message stream a client receives when the log is replayed.
    pub fn messages(&self) -> Vec<WireMessage> {
        let mut out: Vec<WireMessage> = self
            .records
            .iter()
            .map(|r| WireMessage::State(r.state.clone()))
            .collect();
        out.push(self.end_message());
        out
    }

    pub fn end_message(&self) -> WireMessage {
        match self.end {
            Some((result, score)) => WireMessage::End { result, score },
            None => WireMessage::End {
                result: MatchResult::Truncated,
                score: self
                    .records
                    .last()
                    .map(|r| r.state.score)
                    .unwrap_or_default(),
            },
        }
    }
}

/// Streams a log at `speed` times the recorded cadence. No physics runs.
pub fn replay(
    log: &MatchLog,
    speed: f64,
    clock: &mut dyn Clock,
    sink: &mut dyn FnMut(WireMessage),
) -> Result<()> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(Error::invalid(format!(
            "replay speed must be positive, got {speed}"
        )));
    }
    let start = clock.now();
    let first = log.records.first().map_or(0, |r| r.state.tick);
    for r in &log.records {
        let offset = (r.state.tick - first) as f64 / (CONTROL_HZ * speed);
        clock.sleep_until(start + std::time::Duration::from_secs_f64(offset));
        sink(WireMessage::State(r.state.clone()));
    }
    sink(log.end_message());
    Ok(())
}
