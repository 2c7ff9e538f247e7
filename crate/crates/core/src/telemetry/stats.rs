use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::{DiaryNote, EventKind, TelemetryEvent};
use crate::exec::{map_slice, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    LogEntries,
    DiaryEntries,
    DistinctPages,
    ProbeTriggers,
    EnhancementsSetUp,
    EnhancementTriggers,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::LogEntries,
        Metric::DiaryEntries,
        Metric::DistinctPages,
        Metric::ProbeTriggers,
        Metric::EnhancementsSetUp,
        Metric::EnhancementTriggers,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::LogEntries => "log entries",
            Metric::DiaryEntries => "diary entries",
            Metric::DistinctPages => "distinct pages",
            Metric::ProbeTriggers => "probe triggers",
            Metric::EnhancementsSetUp => "enhancements set up",
            Metric::EnhancementTriggers => "enhancement triggers",
        }
    }
}

/// Summary of one metric across participants. `std` is the sample standard
/// deviation (divisor n - 1), and 0 for a single participant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricStats {
    pub total: u64,
    pub mean: f64,
    pub std: f64,
    pub min: u64,
    pub max: u64,
}

impl MetricStats {
    pub fn from_counts(counts: &[u64]) -> Self {
        let n = counts.len();
        if n == 0 {
            return MetricStats::default();
        }
        let total: u64 = counts.iter().sum();
        let mean = total as f64 / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        MetricStats {
            total,
            mean,
            std,
            min: *counts.iter().min().unwrap(),
            max: *counts.iter().max().unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantCounts {
    pub participant_id: String,
    pub counts: BTreeMap<Metric, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementStats {
    pub participants: usize,
    /// Set when there was no input at all.
    pub empty: bool,
    pub metrics: BTreeMap<Metric, MetricStats>,
    pub per_participant: Vec<ParticipantCounts>,
}

impl EngagementStats {
    pub fn metric(&self, m: Metric) -> MetricStats {
        self.metrics.get(&m).copied().unwrap_or_default()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "participants: {}", self.participants);
        let _ = writeln!(out, "{:<22} {:>10} {:>10} {:>10} {:>8} {:>8}", "metric", "total", "mean", "std", "min", "max");
        for m in Metric::ALL {
            let s = self.metric(m);
            let _ = writeln!(
                out,
                "{:<22} {:>10} {:>10.2} {:>10.2} {:>8} {:>8}",
                m.label(),
                s.total,
                s.mean,
                s.std,
                s.min,
                s.max
            );
        }
        out
    }
}

fn participant_ids(events: &[TelemetryEvent], notes: &[DiaryNote]) -> Vec<String> {
    let ids: BTreeSet<&str> = events
        .iter()
        .map(|e| e.participant_id.as_str())
        .chain(notes.iter().map(|n| n.participant_id.as_str()))
        .collect();
    ids.into_iter().map(str::to_string).collect()
}

/// Per-participant totals of each metric, then their spread across
/// participants.
pub fn aggregate(events: &[TelemetryEvent], notes: &[DiaryNote]) -> EngagementStats {
    aggregate_with(events, notes, Execution::default())
}

pub fn aggregate_with(events: &[TelemetryEvent], notes: &[DiaryNote], exec: Execution) -> EngagementStats {
    let ids = participant_ids(events, notes);
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let mut groups: Vec<(Vec<&TelemetryEvent>, u64)> = vec![(Vec::new(), 0); ids.len()];
    for e in events {
        groups[index[e.participant_id.as_str()]].0.push(e);
    }
    for n in notes {
        groups[index[n.participant_id.as_str()]].1 += 1;
    }

    let counts: Vec<[u64; 6]> = map_slice(&groups, exec, |(evs, diary)| {
        let count = |k: EventKind| evs.iter().filter(|e| e.kind == k).count() as u64;
        let pages: HashSet<(&str, &str)> = evs
            .iter()
            .filter(|e| e.kind == EventKind::PageVisited)
            .map(|e| (e.site.as_str(), e.page.as_deref().unwrap_or("")))
            .collect();
        [
            evs.len() as u64,
            *diary,
            pages.len() as u64,
            count(EventKind::ProbeTriggered),
            count(EventKind::EnhancementSaved),
            count(EventKind::EnhancementTriggered),
        ]
    });

    let metrics = Metric::ALL
        .iter()
        .enumerate()
        .map(|(m, &metric)| (metric, MetricStats::from_counts(&counts.iter().map(|c| c[m]).collect::<Vec<_>>())))
        .collect();
    let per_participant = ids
        .into_iter()
        .zip(&counts)
        .map(|(participant_id, c)| ParticipantCounts {
            participant_id,
            counts: Metric::ALL.iter().copied().zip(c.iter().copied()).collect(),
        })
        .collect();
    EngagementStats { participants: counts.len(), empty: counts.is_empty(), metrics, per_participant }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DayCell {
    pub visited: bool,
    pub modified: bool,
    pub diarized: bool,
}

/// Participant by day grid. Day 0 is `start_day`; days are UTC calendar days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyEngagementMatrix {
    pub start_day: NaiveDate,
    pub n_days: usize,
    pub participants: Vec<String>,
    pub cells: Vec<Vec<DayCell>>,
}

impl DailyEngagementMatrix {
    pub fn cell(&self, participant_id: &str, day: usize) -> Option<DayCell> {
        let p = self.participants.iter().position(|x| x == participant_id)?;
        self.cells[p].get(day).copied()
    }

    /// One row per participant, three characters per day: `v`, `m` and `d`
    /// for visited, modified and diarized, `.` when unset.
    pub fn to_ascii(&self) -> String {
        let width = self.participants.iter().map(String::len).max().unwrap_or(0).max(11);
        let mut out = format!("{:<width$}", "participant");
        for d in 0..self.n_days {
            let _ = write!(out, " {d:>3}");
        }
        out.push('\n');
        for (p, row) in self.participants.iter().zip(&self.cells) {
            let _ = write!(out, "{p:<width$}");
            for c in row {
                let flag = |on: bool, ch: char| if on { ch } else { '.' };
                let _ = write!(out, " {}{}{}", flag(c.visited, 'v'), flag(c.modified, 'm'), flag(c.diarized, 'd'));
            }
            out.push('\n');
        }
        out
    }
}

fn day_index(ts: &DateTime<Utc>, start: NaiveDate, n_days: usize) -> Option<usize> {
    let d = (ts.date_naive() - start).num_days();
    (0..n_days as i64).contains(&d).then_some(d as usize)
}

pub fn daily_matrix(
    events: &[TelemetryEvent],
    notes: &[DiaryNote],
    start_day: NaiveDate,
    n_days: usize,
) -> DailyEngagementMatrix {
    let participants = participant_ids(events, notes);
    let index: HashMap<&str, usize> = participants.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let mut cells = vec![vec![DayCell::default(); n_days]; participants.len()];
    for e in events {
        let Some(d) = day_index(&e.timestamp, start_day, n_days) else { continue };
        let cell = &mut cells[index[e.participant_id.as_str()]][d];
        match e.kind {
            EventKind::PageVisited => cell.visited = true,
            EventKind::EnhancementSaved | EventKind::EnhancementTriggered => cell.modified = true,
            _ => {}
        }
    }
    for n in notes {
        if let Some(d) = day_index(&n.timestamp, start_day, n_days) {
            cells[index[n.participant_id.as_str()]][d].diarized = true;
        }
    }
    DailyEngagementMatrix { start_day, n_days, participants, cells }
}

/// Half-open time range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn unbounded() -> Self {
        TimeWindow { start: DateTime::<Utc>::MIN_UTC, end: DateTime::<Utc>::MAX_UTC }
    }

    pub fn contains(&self, t: &DateTime<Utc>) -> bool {
        self.start <= *t && *t < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionConfig {
    /// Visits further apart than this start a new session.
    pub idle_threshold_secs: i64,
    /// Activity this long after a flagged interaction is attributed to it.
    pub attribution_window_secs: i64,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig { idle_threshold_secs: 5 * 60, attribution_window_secs: 10 * 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReflectionFigures {
    pub active_time_secs: f64,
    pub flagged_interactions: usize,
    pub attributed_extra_time_secs: f64,
}

/// Merges sorted points into `[first, last]` runs whose gaps are at most `gap`.
fn stitch(points: &[i64], gap: i64) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = Vec::new();
    for &t in points {
        match out.last_mut() {
            Some((_, end)) if t - *end <= gap => *end = t,
            _ => out.push((t, t)),
        }
    }
    out
}

/// Total length of the intersection of two sorted, disjoint interval lists.
fn overlap(a: &[(i64, i64)], b: &[(i64, i64)]) -> i64 {
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        total += (hi - lo).max(0);
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Time and attention figures for one site. Sessions are stitched from page
/// visits per participant; flagged interactions are enhancement triggers.
pub fn reflection_query(
    events: &[TelemetryEvent],
    site: &str,
    window: TimeWindow,
    config: ReflectionConfig,
) -> ReflectionFigures {
    let mut visits: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    let mut flagged: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for e in events.iter().filter(|e| e.site == site && window.contains(&e.timestamp)) {
        let ms = e.timestamp.timestamp_millis();
        match e.kind {
            EventKind::PageVisited => visits.entry(&e.participant_id).or_default().push(ms),
            EventKind::EnhancementTriggered => flagged.entry(&e.participant_id).or_default().push(ms),
            _ => {}
        }
    }
    let idle = config.idle_threshold_secs.max(0) * 1000;
    let span = config.attribution_window_secs.max(0) * 1000;
    let (mut active, mut attributed) = (0i64, 0i64);
    for (p, points) in &mut visits {
        points.sort_unstable();
        let sessions = stitch(points, idle);
        active += sessions.iter().map(|(a, b)| b - a).sum::<i64>();
        if let Some(flags) = flagged.get_mut(p) {
            flags.sort_unstable();
            let mut windows: Vec<(i64, i64)> = Vec::new();
            for &t in flags.iter() {
                match windows.last_mut() {
                    Some((_, end)) if t <= *end => *end = (*end).max(t + span),
                    _ => windows.push((t, t + span)),
                }
            }
            attributed += overlap(&sessions, &windows);
        }
    }
    ReflectionFigures {
        active_time_secs: active as f64 / 1000.0,
        flagged_interactions: flagged.values().map(Vec::len).sum(),
        attributed_extra_time_secs: attributed as f64 / 1000.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Duration;

    fn at(min: i64) -> DateTime<Utc> {
        "2026-03-01T08:00:00Z".parse::<DateTime<Utc>>().unwrap() + Duration::minutes(min)
    }

    fn ev(kind: EventKind, p: &str, min: i64) -> TelemetryEvent {
        let e = TelemetryEvent::new(kind, at(min), "youtube", p);
        match kind {
            EventKind::EnhancementSaved | EventKind::EnhancementTriggered | EventKind::EnhancementCleared => {
                e.with_enhancement("video-autoplay", "hiding-youtube-autoplay")
            }
            _ => e,
        }
    }

    #[test]
    fn single_participant_degenerate() {
        let events: Vec<_> = (0..5).map(|i| ev(EventKind::ProbeTriggered, "a", i)).collect();
        let s = aggregate(&events, &[]);
        let m = s.metric(Metric::LogEntries);
        assert_eq!((m.total, m.mean, m.std, m.min, m.max), (5, 5.0, 0.0, 5, 5));
    }

    #[test]
    fn sample_std_of_one_two_three() {
        let events: Vec<_> = [("a", 1), ("b", 2), ("c", 3)]
            .iter()
            .flat_map(|&(p, n)| (0..n).map(move |i| ev(EventKind::PageVisited, p, i)))
            .collect();
        let m = aggregate(&events, &[]).metric(Metric::LogEntries);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
    }

    #[test]
    fn empty_input_is_flagged() {
        let s = aggregate(&[], &[]);
        assert!(s.empty);
        assert_eq!(s.metric(Metric::DiaryEntries), MetricStats::default());
    }

    #[test]
    fn distinct_pages_use_page_tokens() {
        let mk = |page: &str| ev(EventKind::PageVisited, "a", 0).with_page(page);
        let events = [mk("p1"), mk("p1"), mk("p2")];
        assert_eq!(aggregate(&events, &[]).metric(Metric::DistinctPages).total, 2);
    }

    #[test]
    fn matrix_flags() {
        let start = at(0).date_naive();
        assert!(daily_matrix(&[], &[], start, 14).participants.is_empty());
        let saved = TelemetryEvent { timestamp: at(3 * 24 * 60), ..ev(EventKind::EnhancementSaved, "a", 0) };
        let m = daily_matrix(&[saved], &[], start, 14);
        for d in 0..14 {
            let c = m.cell("a", d).unwrap();
            assert_eq!(c, DayCell { modified: d == 3, ..DayCell::default() });
        }
        assert!(m.to_ascii().contains(" .m."));
    }

    #[test]
    fn reflection_rules() {
        let cfg = ReflectionConfig::default();
        let w = TimeWindow::unbounded();
        assert_eq!(reflection_query(&[], "youtube", w, cfg), ReflectionFigures::default());

        let two = [ev(EventKind::PageVisited, "a", 0), ev(EventKind::PageVisited, "a", 3)];
        assert_eq!(reflection_query(&two, "youtube", w, cfg).active_time_secs, 180.0);

        let gap = [ev(EventKind::PageVisited, "a", 0), ev(EventKind::PageVisited, "a", 6)];
        assert_eq!(reflection_query(&gap, "youtube", w, cfg).active_time_secs, 0.0);

        let flagged = [
            ev(EventKind::PageVisited, "a", 0),
            ev(EventKind::EnhancementTriggered, "a", 0),
            ev(EventKind::PageVisited, "a", 2),
            ev(EventKind::PageVisited, "a", 4),
        ];
        let f = reflection_query(&flagged, "youtube", w, cfg);
        assert_eq!((f.flagged_interactions, f.attributed_extra_time_secs), (1, 240.0));
        assert_eq!(reflection_query(&flagged, "netflix", w, cfg), ReflectionFigures::default());
    }

    #[test]
    fn attribution_is_clipped_to_window() {
        let cfg = ReflectionConfig { idle_threshold_secs: 3600, attribution_window_secs: 120 };
        let evs = [
            ev(EventKind::PageVisited, "a", 0),
            ev(EventKind::EnhancementTriggered, "a", 1),
            ev(EventKind::EnhancementTriggered, "a", 2),
            ev(EventKind::PageVisited, "a", 30),
        ];
        let f = reflection_query(&evs, "youtube", TimeWindow::unbounded(), cfg);
        assert_eq!(f.active_time_secs, 1800.0);
        assert_eq!(f.attributed_extra_time_secs, 180.0);
    }
}
