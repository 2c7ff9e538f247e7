//! Direct tallies over raw event streams, one linear pass per question.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use pita_core::telemetry::{DiaryNote, EventKind, TelemetryEvent};

/// Per-participant counts in the order: log entries, diary entries,
/// distinct pages, probe triggers, enhancements set up, enhancement
/// triggers.
pub fn tally(events: &[TelemetryEvent], notes: &[DiaryNote]) -> BTreeMap<String, [u64; 6]> {
    let mut people: BTreeSet<String> = events.iter().map(|e| e.participant_id.clone()).collect();
    people.extend(notes.iter().map(|n| n.participant_id.clone()));
    people
        .into_iter()
        .map(|p| {
            let mine: Vec<&TelemetryEvent> = events.iter().filter(|e| e.participant_id == p).collect();
            let kind = |k: EventKind| mine.iter().filter(|e| e.kind == k).count() as u64;
            let mut pages = Vec::new();
            for e in mine.iter().filter(|e| e.kind == EventKind::PageVisited) {
                let key = format!("{}\u{0}{}", e.site, e.page.clone().unwrap_or_default());
                if !pages.contains(&key) {
                    pages.push(key);
                }
            }
            let row = [
                mine.len() as u64,
                notes.iter().filter(|n| n.participant_id == p).count() as u64,
                pages.len() as u64,
                kind(EventKind::ProbeTriggered),
                kind(EventKind::EnhancementSaved),
                kind(EventKind::EnhancementTriggered),
            ];
            (p, row)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub total: u64,
    pub mean: f64,
    pub std: f64,
    pub min: u64,
    pub max: u64,
}

/// Spread of `xs` using the sum-of-squares form of the n - 1 variance.
pub fn summarize(xs: &[u64]) -> Summary {
    if xs.is_empty() {
        return Summary { total: 0, mean: 0.0, std: 0.0, min: 0, max: 0 };
    }
    let n = xs.len() as f64;
    let total: u64 = xs.iter().sum();
    let sum_sq: f64 = xs.iter().map(|&x| (x as f64) * (x as f64)).sum();
    let mean = total as f64 / n;
    let std = if xs.len() < 2 { 0.0 } else { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0).sqrt() };
    Summary { total, mean, std, min: *xs.iter().min().unwrap(), max: *xs.iter().max().unwrap() }
}

/// `(visited, modified, diarized)` for participant `p` on day `d`.
pub fn day_flags(
    events: &[TelemetryEvent],
    notes: &[DiaryNote],
    p: &str,
    start: NaiveDate,
    d: usize,
) -> (bool, bool, bool) {
    let day = start + chrono::Days::new(d as u64);
    let on_day = |e: &&TelemetryEvent| e.participant_id == p && e.timestamp.date_naive() == day;
    let visited = events.iter().filter(on_day).any(|e| e.kind == EventKind::PageVisited);
    let modified = events
        .iter()
        .filter(on_day)
        .any(|e| matches!(e.kind, EventKind::EnhancementSaved | EventKind::EnhancementTriggered));
    let diarized = notes.iter().any(|n| n.participant_id == p && n.timestamp.date_naive() == day);
    (visited, modified, diarized)
}
