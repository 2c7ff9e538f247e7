//! Wire format of `POST /v1/message`.
//!
//! A request is one JSON object:
//!
//! ```json
//! {"version": 1, "type": "detect", "request_id": "r1", "payload": {...}}
//! ```
//!
//! and its response echoes the id with either a result or an error:
//!
//! ```json
//! {"version": 1, "request_id": "r1", "status": "ok", "result": {...}}
//! {"version": 1, "request_id": "r1", "status": "error", "error": {"code": "invalid_payload", "message": "..."}}
//! ```
//!
//! The full schema for every message type is in `docs/protocol.md`.

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, Utc};
use pita_core::catalog::{DarkAttribute, Dimension, Impact, InterventionStrategy};
use pita_core::detector::Detection;
use pita_core::patch::{DiffSummary, PatchReceipt, PatchWarning};
use pita_core::profile::{Profile, ProfileWarning};
use pita_core::telemetry::{Ack, DiaryNote, ReflectionConfig, ReflectionFigures, TelemetryEvent, TimeWindow};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

fn default_version() -> u32 {
    PROTOCOL_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    Detect,
    Apply,
    Revert,
    SaveSelection,
    ClearSelection,
    GetProfile,
    LogEvent,
    SubmitNote,
    GetReflection,
    Ping,
}

impl MessageType {
    pub const ALL: [MessageType; 10] = [
        MessageType::Detect,
        MessageType::Apply,
        MessageType::Revert,
        MessageType::SaveSelection,
        MessageType::ClearSelection,
        MessageType::GetProfile,
        MessageType::LogEvent,
        MessageType::SubmitNote,
        MessageType::GetReflection,
        MessageType::Ping,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub request_id: String,
    #[serde(default)]
    pub payload: Value,
    /// Per-message override of the service's consent flag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consent: Option<bool>,
}

impl Request {
    pub fn new(kind: MessageType, request_id: impl Into<String>, payload: impl Serialize) -> Self {
        Request {
            version: PROTOCOL_VERSION,
            kind,
            request_id: request_id.into(),
            payload: serde_json::to_value(payload).expect("payload serializes"),
            consent: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// The frame was not a JSON request object.
    Malformed,
    UnsupportedVersion,
    InvalidPayload,
    UnknownPattern,
    UnknownEnhancement,
    NotOffered,
    StaleLocator,
    Conflict,
    PatchFailed,
    ReceiptMismatch,
    InvalidRecord,
    Storage,
    TelemetryUnavailable,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Malformed => "malformed",
            ErrorCode::UnsupportedVersion => "unsupported_version",
            ErrorCode::InvalidPayload => "invalid_payload",
            ErrorCode::UnknownPattern => "unknown_pattern",
            ErrorCode::UnknownEnhancement => "unknown_enhancement",
            ErrorCode::NotOffered => "not_offered",
            ErrorCode::StaleLocator => "stale_locator",
            ErrorCode::Conflict => "conflict",
            ErrorCode::PatchFailed => "patch_failed",
            ErrorCode::ReceiptMismatch => "receipt_mismatch",
            ErrorCode::InvalidRecord => "invalid_record",
            ErrorCode::Storage => "storage",
            ErrorCode::TelemetryUnavailable => "telemetry_unavailable",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub code: ErrorCode,
    pub message: String,
}

impl WireError {
    pub fn new(code: ErrorCode, message: impl fmt::Display) -> Self {
        WireError { code, message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok { result: Value },
    Error { error: WireError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub version: u32,
    pub request_id: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl Response {
    pub fn ok(request_id: &str, result: impl Serialize) -> Self {
        Response {
            version: PROTOCOL_VERSION,
            request_id: request_id.into(),
            outcome: Outcome::Ok { result: serde_json::to_value(result).expect("result serializes") },
        }
    }

    pub fn error(request_id: &str, error: WireError) -> Self {
        Response { version: PROTOCOL_VERSION, request_id: request_id.into(), outcome: Outcome::Error { error } }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self.outcome, Outcome::Ok { .. })
    }

    pub fn result(&self) -> Option<&Value> {
        match &self.outcome {
            Outcome::Ok { result } => Some(result),
            Outcome::Error { .. } => None,
        }
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        match &self.outcome {
            Outcome::Error { error } => Some(error.code),
            Outcome::Ok { .. } => None,
        }
    }
}

// Payloads, one per message type.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectPayload {
    pub html: String,
    pub site: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyPayload {
    pub html: String,
    pub detection: Detection,
    pub enhancement_id: String,
    /// Compute the diff without producing a patch.
    #[serde(default)]
    pub preview_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevertPayload {
    /// The page as currently patched.
    pub html: String,
    pub receipt: PatchReceipt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionPayload {
    pub site: String,
    pub pattern_id: String,
    pub enhancement_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearSelectionPayload {
    pub site: String,
    pub pattern_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEventPayload {
    pub event: TelemetryEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitNotePayload {
    pub note: DiaryNote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionPayload {
    pub site: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<TimeWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ReflectionConfig>,
    /// Restrict to one participant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_id: Option<String>,
}

// Results.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternInfo {
    pub id: String,
    pub name: String,
    pub pattern_types: Vec<String>,
    pub attributes: BTreeSet<DarkAttribute>,
    /// Hover text for each attribute tag, same order as `attributes`.
    pub attribute_tooltips: Vec<String>,
    pub mechanism_text: String,
    pub impact: Impact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnhancementInfo {
    pub id: String,
    pub strategy: InterventionStrategy,
    pub dimension: Dimension,
    pub effect_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedPattern {
    pub detection: Detection,
    pub pattern: PatternInfo,
    pub enhancements: Vec<EnhancementInfo>,
}

/// A saved selection applied automatically to a freshly detected page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reapplied {
    pub pattern_id: String,
    pub enhancement_id: String,
    /// Where the untouched element sits in the page that was sent.
    pub detection: Detection,
    /// Markup replacing that element, including any inserted siblings.
    pub fragment: String,
    pub receipt: PatchReceipt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectResult {
    pub site: String,
    pub catalog_version: String,
    pub detections: Vec<DetectedPattern>,
    pub reapplied: Vec<Reapplied>,
    pub warnings: Vec<PatchWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyResult {
    pub diff: DiffSummary,
    /// Absent for previews.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt: Option<PatchReceipt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevertResult {
    /// Markup of the restored element.
    pub fragment: String,
    pub detection: Detection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub profile: Profile,
    pub warnings: Vec<ProfileWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckResult {
    pub ack: Ack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionResult {
    pub site: String,
    pub figures: ReflectionFigures,
    pub events_considered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PingResult {
    pub pong: bool,
    pub protocol_version: u32,
    pub catalog_version: String,
    pub consent: bool,
    pub server_time: DateTime<Utc>,
}
