//! Append-only session transcript, persisted as JSON lines.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::protocol::ActionSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    User,
    Coordinator,
    Controller,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Text(String),
    Sequence(ActionSequence),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    /// Entry index; strictly increasing.
    pub turn: u64,
    pub actor: Actor,
    pub kind: String,
    pub payload: Payload,
    /// Simulation clock (ms) when the entry was written.
    pub timestamp: f64,
}

impl TranscriptEntry {
    pub fn text(&self) -> Option<&str> {
        match &self.payload {
            Payload::Text(t) => Some(t),
            Payload::Sequence(_) => None,
        }
    }

    pub fn sequence(&self) -> Option<&ActionSequence> {
        match &self.payload {
            Payload::Sequence(s) => Some(s),
            Payload::Text(_) => None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("transcript entries serialize")
    }
}

/// In-memory transcript with an optional JSON-lines sink flushed per entry.
#[derive(Debug, Default)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
    sink: Option<File>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also write every entry to `path` (truncated first).
    pub fn with_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self { entries: Vec::new(), sink: Some(File::create(path)?) })
    }

    pub fn push(&mut self, actor: Actor, kind: &str, payload: Payload, timestamp: f64) -> &TranscriptEntry {
        let entry = TranscriptEntry { turn: self.entries.len() as u64, actor, kind: kind.to_string(), payload, timestamp };
        if let Some(f) = self.sink.as_mut() {
            let line = entry.to_line();
            if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
                tracing::error!(error = %e, "transcript write failed");
            }
        }
        self.entries.push(entry);
        self.entries.last().expect("just pushed")
    }

    pub fn text(&mut self, actor: Actor, kind: &str, text: impl Into<String>, timestamp: f64) -> &TranscriptEntry {
        self.push(actor, kind, Payload::Text(text.into()), timestamp)
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// JSON-lines text of all entries.
    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| e.to_line() + "\n").collect()
    }

    pub fn read_jsonl(path: &Path) -> std::io::Result<Vec<TranscriptEntry>> {
        Self::parse_jsonl(&std::fs::read_to_string(path)?)
    }

    pub fn parse_jsonl(text: &str) -> std::io::Result<Vec<TranscriptEntry>> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry = serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
            out.push(e);
        }
        Ok(out)
    }
}
