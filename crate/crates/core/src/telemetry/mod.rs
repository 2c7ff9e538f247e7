//! Consent-gated usage logging and engagement statistics.
//!
//! Events and diary notes are scrubbed of personal data before they reach
//! disk and are appended to JSON-lines files (`events.jsonl`, `notes.jsonl`)
//! in a log directory. With consent off nothing is written at all.

mod scrub;
mod stats;

use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scrub::{scrub, ScrubConfig, Scrubber, EMAIL_TOKEN, NAME_TOKEN, PHONE_TOKEN, QUERY_TOKEN};
pub use stats::{
    aggregate, aggregate_with, daily_matrix, reflection_query, DailyEngagementMatrix, DayCell, EngagementStats, Metric,
    MetricStats, ParticipantCounts, ReflectionConfig, ReflectionFigures, TimeWindow,
};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const NOTES_FILE: &str = "notes.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    PageVisited,
    ProbeTriggered,
    AwarenessPanelOpened,
    ActionPanelOpened,
    EnhancementSaved,
    EnhancementTriggered,
    EnhancementCleared,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::PageVisited,
        EventKind::ProbeTriggered,
        EventKind::AwarenessPanelOpened,
        EventKind::ActionPanelOpened,
        EventKind::EnhancementSaved,
        EventKind::EnhancementTriggered,
        EventKind::EnhancementCleared,
    ];

    pub fn is_enhancement(self) -> bool {
        matches!(self, EventKind::EnhancementSaved | EventKind::EnhancementTriggered | EventKind::EnhancementCleared)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub kind: EventKind,
    pub timestamp: DateTime<Utc>,
    pub site: String,
    /// Opaque per-page token, used to count distinct pages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enhancement_id: Option<String>,
    pub participant_id: String,
}

impl TelemetryEvent {
    pub fn new(kind: EventKind, timestamp: DateTime<Utc>, site: &str, participant_id: &str) -> Self {
        TelemetryEvent {
            kind,
            timestamp,
            site: site.into(),
            page: None,
            pattern_id: None,
            enhancement_id: None,
            participant_id: participant_id.into(),
        }
    }

    pub fn with_page(mut self, page: &str) -> Self {
        self.page = Some(page.into());
        self
    }

    pub fn with_enhancement(mut self, pattern_id: &str, enhancement_id: &str) -> Self {
        self.pattern_id = Some(pattern_id.into());
        self.enhancement_id = Some(enhancement_id.into());
        self
    }

    /// Enhancement events name both ids; page visits name neither.
    pub fn validate(&self) -> Result<(), String> {
        let ids = (self.pattern_id.is_some(), self.enhancement_id.is_some());
        if self.kind.is_enhancement() && ids != (true, true) {
            return Err(format!("{:?} events need pattern_id and enhancement_id", self.kind));
        }
        if self.kind == EventKind::PageVisited && ids != (false, false) {
            return Err("page-visited events carry no pattern or enhancement".into());
        }
        if self.participant_id.is_empty() {
            return Err("participant_id is empty".into());
        }
        Ok(())
    }

    fn scrubbed(mut self, s: &Scrubber) -> Self {
        for field in [&mut self.site, &mut self.participant_id] {
            *field = s.scrub(field);
        }
        for field in [&mut self.page, &mut self.pattern_id, &mut self.enhancement_id].into_iter().flatten() {
            *field = s.scrub(field);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiaryNote {
    pub timestamp: DateTime<Utc>,
    pub participant_id: String,
    pub body: String,
    /// Opaque references (file names, ids) to screenshots held elsewhere.
    #[serde(default)]
    pub attachments: Vec<String>,
}

pub const MAX_ATTACHMENT_REF_LEN: usize = 512;

impl DiaryNote {
    pub fn validate(&self) -> Result<(), String> {
        if self.participant_id.is_empty() {
            return Err("participant_id is empty".into());
        }
        for a in &self.attachments {
            if a.len() > MAX_ATTACHMENT_REF_LEN || a.trim_start().to_ascii_lowercase().starts_with("data:") {
                return Err("attachments must be references, not inline content".into());
            }
        }
        Ok(())
    }

    fn scrubbed(mut self, s: &Scrubber) -> Self {
        self.participant_id = s.scrub(&self.participant_id);
        self.body = s.scrub(&self.body);
        for a in &mut self.attachments {
            *a = s.scrub(a);
        }
        self
    }
}

/// Anything that can be written to a log directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Event(TelemetryEvent),
    Note(DiaryNote),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ack {
    Appended,
    /// Consent is off; nothing was written.
    Suppressed,
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("telemetry sink I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("telemetry recorder has stopped")]
    Stopped,
}

/// Scrubbing, validating writer for one log directory.
#[derive(Debug, Clone)]
pub struct TelemetryLog {
    dir: PathBuf,
    scrubber: Scrubber,
}

impl TelemetryLog {
    pub fn new(dir: impl Into<PathBuf>, config: &ScrubConfig) -> Self {
        TelemetryLog { dir: dir.into(), scrubber: Scrubber::new(config) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn events_path(&self) -> PathBuf {
        self.dir.join(EVENTS_FILE)
    }

    pub fn notes_path(&self) -> PathBuf {
        self.dir.join(NOTES_FILE)
    }

    /// Validates, scrubs and durably appends `record`. With `consent` false
    /// this returns [`Ack::Suppressed`] without touching the file system.
    pub fn record(&self, record: Record, consent: bool) -> Result<Ack, TelemetryError> {
        if !consent {
            return Ok(Ack::Suppressed);
        }
        let (path, line) = match record {
            Record::Event(e) => {
                e.validate().map_err(TelemetryError::Invalid)?;
                (self.events_path(), serde_json::to_string(&e.scrubbed(&self.scrubber)))
            }
            Record::Note(n) => {
                n.validate().map_err(TelemetryError::Invalid)?;
                (self.notes_path(), serde_json::to_string(&n.scrubbed(&self.scrubber)))
            }
        };
        let mut line = line.map_err(io::Error::other)?;
        line.push('\n');
        fs::create_dir_all(&self.dir)?;
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(Ack::Appended)
    }

    pub fn record_event(&self, e: TelemetryEvent, consent: bool) -> Result<Ack, TelemetryError> {
        self.record(Record::Event(e), consent)
    }

    pub fn record_note(&self, n: DiaryNote, consent: bool) -> Result<Ack, TelemetryError> {
        self.record(Record::Note(n), consent)
    }
}

type Job = (Record, bool, mpsc::Sender<Result<Ack, TelemetryError>>);

/// Single consumer thread in front of a [`TelemetryLog`]. Any number of
/// threads may submit through clones of the handle; appends happen one at a
/// time in submission order and each call returns once its line is on disk.
#[derive(Debug, Clone)]
pub struct Recorder {
    tx: mpsc::Sender<Job>,
}

impl Recorder {
    pub fn spawn(log: TelemetryLog) -> Recorder {
        let (tx, rx) = mpsc::channel::<Job>();
        thread::Builder::new()
            .name("pita-telemetry".into())
            .spawn(move || {
                for (record, consent, reply) in rx {
                    let _ = reply.send(log.record(record, consent));
                }
            })
            .expect("spawn telemetry thread");
        Recorder { tx }
    }

    pub fn record(&self, record: Record, consent: bool) -> Result<Ack, TelemetryError> {
        let (reply, ack) = mpsc::channel();
        self.tx.send((record, consent, reply)).map_err(|_| TelemetryError::Stopped)?;
        ack.recv().map_err(|_| TelemetryError::Stopped)?
    }
}

/// Everything read back from a log directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogSnapshot {
    pub events: Vec<TelemetryEvent>,
    pub notes: Vec<DiaryNote>,
    /// Lines that were neither a valid event nor a valid note.
    pub malformed: usize,
    pub files: usize,
}

/// Reads every `*.jsonl` file in `dir` (in name order), telling events and
/// notes apart by shape. Bad lines are counted and skipped.
pub fn read_log_dir(dir: &Path) -> io::Result<LogSnapshot> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut snap = LogSnapshot { files: paths.len(), ..LogSnapshot::default() };
    for path in paths {
        for line in BufReader::new(fs::File::open(&path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(&line) {
                Ok(Record::Event(e)) if e.validate().is_ok() => snap.events.push(e),
                Ok(Record::Note(n)) if n.validate().is_ok() => snap.notes.push(n),
                _ => snap.malformed += 1,
            }
        }
    }
    Ok(snap)
}
