use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{LogEvent, ServiceState};
use crate::error::{Error, Result};

/// Append-only JSONL event log; every append is flushed to disk before it
/// returns.
#[derive(Debug)]
pub struct EventLog {
    file: File,
    path: PathBuf,
}

impl EventLog {
    /// Opens (or creates) the log and returns the events already in it. A
    /// final line without a newline is an unacknowledged partial write and
    /// is cut off.
    pub fn open(path: &Path) -> Result<(EventLog, Vec<LogEvent>)> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::file(path, e))?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(|e| Error::file(path, e))?;
        let complete = match text.rfind('\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if complete < text.len() {
            tracing::warn!(path = %path.display(), bytes = text.len() - complete, "dropping partial last log line");
            file.set_len(complete as u64).map_err(|e| Error::file(path, e))?;
            file.sync_all().map_err(|e| Error::file(path, e))?;
        }
        let mut events = Vec::new();
        for (i, line) in text[..complete].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ev = serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            events.push(ev);
        }
        Ok((EventLog { file, path: path.to_owned() }, events))
    }

    pub fn append(&mut self, ev: &LogEvent) -> Result<()> {
        let mut line = serde_json::to_string(ev)?;
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(|e| Error::file(&self.path, e))?;
        self.file.sync_data().map_err(|e| Error::file(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Replays logged events onto a fresh state.
pub fn replay(mut state: ServiceState, events: Vec<LogEvent>) -> Result<ServiceState> {
    for (i, ev) in events.into_iter().enumerate() {
        state
            .apply(ev)
            .map_err(|e| Error::Parse { line: i + 1, message: format!("log does not replay: {e}") })?;
    }
    Ok(state)
}

/// State plus its log; the only write path.
#[derive(Debug)]
pub struct Store {
    pub state: ServiceState,
    log: EventLog,
}

impl Store {
    pub fn open(fresh: ServiceState, path: &Path) -> Result<Store> {
        let (log, events) = EventLog::open(path)?;
        let n = events.len();
        let state = replay(fresh, events)?;
        tracing::info!(path = %path.display(), events = n, "service log replayed");
        Ok(Store { state, log })
    }

    /// Validates, persists, then applies.
    pub fn submit(&mut self, ev: LogEvent) -> Result<()> {
        self.state.check(&ev)?;
        self.log.append(&ev)?;
        self.state.apply(ev)
    }
}
