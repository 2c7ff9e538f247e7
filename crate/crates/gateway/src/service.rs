//! Message dispatch. Everything here is synchronous and transport-agnostic;
//! the HTTP layer only moves bytes in and out of [`Service::handle_body`].

use std::io;
use std::path::PathBuf;
use std::sync::Mutex;

use chrono::Utc;
use pita_core::catalog::Catalog;
use pita_core::detector::{Detection, Detector};
use pita_core::dom::{parse_html, serialize_node, HtmlDocument, Node};
use pita_core::patch::{affected_fragment, apply_enhancement, apply_profile, preview_diff, revert, PatchError};
use pita_core::profile::{Profile, ProfileError, ProfileStore, Selection};
use pita_core::telemetry::{
    read_log_dir, reflection_query, Ack, Record, Recorder, ScrubConfig, TelemetryError, TelemetryLog, TimeWindow,
};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::protocol::*;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub catalog: Catalog,
    pub profile_path: Option<PathBuf>,
    pub log_dir: Option<PathBuf>,
    /// Default for messages that do not carry their own `consent` field.
    pub consent: bool,
    pub scrub: ScrubConfig,
}

impl ServiceConfig {
    pub fn new(catalog: Catalog) -> Self {
        ServiceConfig { catalog, profile_path: None, log_dir: None, consent: false, scrub: ScrubConfig::default() }
    }
}

pub struct Service {
    catalog: Catalog,
    profile: Option<ProfileStore>,
    /// Serializes read-modify-write cycles on the profile file.
    profile_lock: Mutex<()>,
    log_dir: Option<PathBuf>,
    recorder: Option<Recorder>,
    consent: bool,
}

type Handled = Result<Value, WireError>;

fn ok(v: impl serde::Serialize) -> Handled {
    Ok(serde_json::to_value(v).expect("result serializes"))
}

fn payload<T: DeserializeOwned>(v: &Value) -> Result<T, WireError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let at = e.path().to_string();
        WireError::new(ErrorCode::InvalidPayload, format!("payload.{at}: {}", e.into_inner()))
    })
}

fn patch_error(e: PatchError) -> WireError {
    let code = match e {
        PatchError::PatternMismatch { .. } => ErrorCode::NotOffered,
        PatchError::Stale(_) => ErrorCode::StaleLocator,
        PatchError::Conflict { .. } => ErrorCode::Conflict,
        PatchError::ReceiptMismatch(_) => ErrorCode::ReceiptMismatch,
        _ => ErrorCode::PatchFailed,
    };
    WireError::new(code, e)
}

fn profile_error(e: ProfileError) -> WireError {
    match e {
        ProfileError::Validation { .. } => WireError::new(ErrorCode::NotOffered, e),
        other => WireError::new(ErrorCode::Storage, other),
    }
}

fn parse_page(html: &str) -> Result<HtmlDocument, WireError> {
    parse_html(html.as_bytes(), "payload.html").map_err(|e| WireError::new(ErrorCode::InvalidPayload, e))
}

impl Service {
    pub fn new(config: ServiceConfig) -> Self {
        let recorder = config.log_dir.as_ref().map(|d| Recorder::spawn(TelemetryLog::new(d, &config.scrub)));
        Service {
            catalog: config.catalog,
            profile: config.profile_path.map(ProfileStore::open),
            profile_lock: Mutex::new(()),
            log_dir: config.log_dir,
            recorder,
            consent: config.consent,
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Handles one HTTP body. A body holding a single JSON value gets a
    /// single response; otherwise each non-blank line is its own message and
    /// gets its own response, in order.
    pub fn handle_body(&self, body: &[u8]) -> Vec<Response> {
        if let Ok(v) = serde_json::from_slice::<Value>(body) {
            return vec![self.handle_value(v)];
        }
        body.split(|&b| b == b'\n')
            .filter(|line| !line.iter().all(u8::is_ascii_whitespace))
            .map(|line| match serde_json::from_slice::<Value>(line) {
                Ok(v) => self.handle_value(v),
                Err(e) => Response::error("", WireError::new(ErrorCode::Malformed, format!("not JSON: {e}"))),
            })
            .collect()
    }

    pub fn handle_value(&self, v: Value) -> Response {
        let request_id = v.get("request_id").and_then(Value::as_str).unwrap_or_default().to_string();
        if !v.is_object() {
            return Response::error(&request_id, WireError::new(ErrorCode::Malformed, "message must be a JSON object"));
        }
        match serde_json::from_value::<Request>(v) {
            Ok(req) => self.handle(req),
            Err(e) => Response::error(&request_id, WireError::new(ErrorCode::Malformed, e)),
        }
    }

    pub fn handle(&self, req: Request) -> Response {
        if req.version != PROTOCOL_VERSION {
            let msg = format!("protocol version {} is not supported (expected {PROTOCOL_VERSION})", req.version);
            return Response::error(&req.request_id, WireError::new(ErrorCode::UnsupportedVersion, msg));
        }
        let consent = req.consent.unwrap_or(self.consent);
        let p = &req.payload;
        let outcome = match req.kind {
            MessageType::Detect => payload(p).and_then(|x| self.detect(x)),
            MessageType::Apply => payload(p).and_then(|x| self.apply(x)),
            MessageType::Revert => payload(p).and_then(|x| self.revert(x)),
            MessageType::SaveSelection => payload(p).and_then(|x| self.save_selection(x)),
            MessageType::ClearSelection => payload(p).and_then(|x| self.clear_selection(x)),
            MessageType::GetProfile => self.get_profile(),
            MessageType::LogEvent => {
                payload::<LogEventPayload>(p).and_then(|x| self.record(Record::Event(x.event), consent))
            }
            MessageType::SubmitNote => {
                payload::<SubmitNotePayload>(p).and_then(|x| self.record(Record::Note(x.note), consent))
            }
            MessageType::GetReflection => payload(p).and_then(|x| self.reflection(x)),
            MessageType::Ping => ok(PingResult {
                pong: true,
                protocol_version: PROTOCOL_VERSION,
                catalog_version: self.catalog.version().to_string(),
                consent,
                server_time: Utc::now(),
            }),
        };
        match outcome {
            Ok(result) => Response { version: PROTOCOL_VERSION, request_id: req.request_id, outcome: Outcome::Ok { result } },
            Err(e) => Response::error(&req.request_id, e),
        }
    }

    fn detector(&self) -> Detector<'_> {
        Detector::new(&self.catalog).expect("catalog rules were validated on load")
    }

    fn describe(&self, d: Detection) -> DetectedPattern {
        let p = self.catalog.pattern(&d.pattern_id).expect("detections come from this catalog");
        let enhancements = self
            .catalog
            .enhancements_for_pattern(&p.id)
            .expect("pattern exists")
            .into_iter()
            .map(|e| EnhancementInfo {
                id: e.id.clone(),
                strategy: e.strategy,
                dimension: e.dimension(),
                effect_text: e.effect_text.clone(),
            })
            .collect();
        DetectedPattern {
            detection: d,
            pattern: PatternInfo {
                id: p.id.clone(),
                name: p.name.clone(),
                pattern_types: p.pattern_types.clone(),
                attributes: p.attributes.clone(),
                attribute_tooltips: p.attributes.iter().map(|a| self.catalog.tooltip(*a).to_string()).collect(),
                mechanism_text: p.mechanism_text.clone(),
                impact: p.impact.clone(),
            },
            enhancements,
        }
    }

    fn load_profile(&self) -> Result<(Profile, Vec<pita_core::profile::ProfileWarning>), WireError> {
        match &self.profile {
            Some(store) => store.load(&self.catalog).map_err(profile_error),
            None => Ok((Profile::empty(self.catalog.version()), Vec::new())),
        }
    }

    fn detect(&self, x: DetectPayload) -> Handled {
        let doc = parse_page(&x.html)?;
        let detections = self.detector().scan(&doc, &x.site);
        let (profile, _) = self.load_profile()?;
        let selections = profile.selections_for_site(&x.site);
        let applied = apply_profile(&doc, &self.catalog, &selections, &x.site);
        let mut reapplied = Vec::with_capacity(applied.receipts.len());
        // Fragments are computed against the page as sent, one enhancement at
        // a time, so each can be spliced in place of its own element.
        for r in &applied.receipts {
            let e = self.catalog.enhancement(&r.enhancement_id).expect("offered");
            let (alone, receipt) = apply_enhancement(&doc, &r.detection, e).map_err(patch_error)?;
            reapplied.push(Reapplied {
                pattern_id: r.detection.pattern_id.clone(),
                enhancement_id: r.enhancement_id.clone(),
                detection: r.detection.clone(),
                fragment: affected_fragment(&alone, &receipt).map_err(patch_error)?,
                receipt,
            });
        }
        reapplied.sort_by(|a, b| a.detection.locator.path.cmp(&b.detection.locator.path));
        ok(DetectResult {
            site: x.site,
            catalog_version: self.catalog.version().to_string(),
            detections: detections.into_iter().map(|d| self.describe(d)).collect(),
            reapplied,
            warnings: applied.warnings,
        })
    }

    fn apply(&self, x: ApplyPayload) -> Handled {
        let e = self
            .catalog
            .enhancement(&x.enhancement_id)
            .ok_or_else(|| WireError::new(ErrorCode::UnknownEnhancement, format!("no enhancement {:?}", x.enhancement_id)))?;
        if self.catalog.pattern(&x.detection.pattern_id).is_none() {
            return Err(WireError::new(ErrorCode::UnknownPattern, format!("no pattern {:?}", x.detection.pattern_id)));
        }
        let doc = parse_page(&x.html)?;
        let diff = preview_diff(&doc, &x.detection, e).map_err(patch_error)?;
        if x.preview_only {
            return ok(ApplyResult { diff, fragment: None, receipt: None });
        }
        let (patched, receipt) = apply_enhancement(&doc, &x.detection, e).map_err(patch_error)?;
        let fragment = affected_fragment(&patched, &receipt).map_err(patch_error)?;
        ok(ApplyResult { diff, fragment: Some(fragment), receipt: Some(receipt) })
    }

    fn revert(&self, x: RevertPayload) -> Handled {
        let doc = parse_page(&x.html)?;
        let restored = revert(&doc, &x.receipt).map_err(patch_error)?;
        let path = restored.resolve_path(&x.receipt.detection.locator).map_err(|e| patch_error(e.into()))?;
        let node = restored.node_at(&path).expect("resolved path");
        debug_assert!(matches!(node, Node::Element(_)));
        ok(RevertResult { fragment: serialize_node(node), detection: x.receipt.detection })
    }

    fn store(&self) -> Result<&ProfileStore, WireError> {
        self.profile
            .as_ref()
            .ok_or_else(|| WireError::new(ErrorCode::Storage, "the service was started without a profile store"))
    }

    fn save_selection(&self, x: SelectionPayload) -> Handled {
        let store = self.store()?;
        let _guard = self.profile_lock.lock().unwrap_or_else(|p| p.into_inner());
        let (current, warnings) = store.load(&self.catalog).map_err(profile_error)?;
        let s = Selection::new(&x.site, &x.pattern_id, &x.enhancement_id);
        let profile = store.save_selection(&current, s, &self.catalog).map_err(profile_error)?;
        ok(ProfileResult { profile, warnings })
    }

    fn clear_selection(&self, x: ClearSelectionPayload) -> Handled {
        let store = self.store()?;
        let _guard = self.profile_lock.lock().unwrap_or_else(|p| p.into_inner());
        let (current, warnings) = store.load(&self.catalog).map_err(profile_error)?;
        let profile = store.clear_selection(&current, &x.site, &x.pattern_id).map_err(profile_error)?;
        ok(ProfileResult { profile, warnings })
    }

    fn get_profile(&self) -> Handled {
        let store = self.store()?;
        let (profile, warnings) = store.load(&self.catalog).map_err(profile_error)?;
        ok(ProfileResult { profile, warnings })
    }

    fn record(&self, record: Record, consent: bool) -> Handled {
        let ack = match &self.recorder {
            Some(r) => r.record(record, consent),
            None if !consent => Ok(Ack::Suppressed),
            None => return Err(WireError::new(ErrorCode::TelemetryUnavailable, "the service was started without a log directory")),
        };
        match ack {
            Ok(ack) => ok(AckResult { ack }),
            Err(TelemetryError::Invalid(m)) => Err(WireError::new(ErrorCode::InvalidRecord, m)),
            Err(e) => Err(WireError::new(ErrorCode::Storage, e)),
        }
    }

    fn reflection(&self, x: ReflectionPayload) -> Handled {
        let dir = self
            .log_dir
            .as_ref()
            .ok_or_else(|| WireError::new(ErrorCode::TelemetryUnavailable, "the service was started without a log directory"))?;
        let mut events = match read_log_dir(dir) {
            Ok(s) => s.events,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(WireError::new(ErrorCode::Storage, e)),
        };
        if let Some(p) = &x.participant_id {
            events.retain(|e| &e.participant_id == p);
        }
        let window = x.window.unwrap_or_else(TimeWindow::unbounded);
        let considered = events.iter().filter(|e| e.site == x.site && window.contains(&e.timestamp)).count();
        let figures = reflection_query(&events, &x.site, window, x.config.unwrap_or_default());
        ok(ReflectionResult { site: x.site, figures, events_considered: considered })
    }
}
