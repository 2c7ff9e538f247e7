//! Seeded synthetic study data.

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use pita_core::catalog::Catalog;
use pita_core::telemetry::{DiaryNote, EventKind, TelemetryEvent};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// Text fragments that each trip at least one scrub rule.
pub const PII_SAMPLES: &[&str] = &[
    "write to jane.doe@example.com",
    "call me at (555) 201-3344",
    "see https://www.amazon.com/s?k=headphones&ref=nb",
    "+44 20 7946 0958 is the office",
    "www.youtube.com/watch?v=dQw4w9WgXcQ",
    "backup: j_d+test@mail.co.uk",
];

#[derive(Debug, Clone)]
pub struct Study {
    pub start_day: NaiveDate,
    pub n_days: usize,
    pub participants: Vec<String>,
    pub events: Vec<TelemetryEvent>,
    pub notes: Vec<DiaryNote>,
}

/// Opaque participant token made only of letters.
pub fn participant_token(rng: &mut impl Rng) -> String {
    let mut s = String::from("p");
    for _ in 0..16 {
        s.push(rng.gen_range(b'a'..=b'z') as char);
    }
    s
}

/// `n_events` events and a smaller number of notes spread over
/// `n_participants` people and `n_days` days. About one event in twenty
/// falls just outside the study window. With `with_pii` some notes and page
/// tokens carry scrub-worthy text.
pub fn study(seed: u64, n_events: usize, n_participants: usize, n_days: usize, with_pii: bool) -> Study {
    let mut rng = StdRng::seed_from_u64(seed);
    let catalog = Catalog::seed();
    let start_day = NaiveDate::from_ymd_opt(2026, 3, 2).unwrap();
    let start: DateTime<Utc> = Utc.from_utc_datetime(&start_day.and_hms_opt(0, 0, 0).unwrap());
    let participants: Vec<String> = (0..n_participants).map(|_| participant_token(&mut rng)).collect();
    let pairs: Vec<(&str, &str, &str)> = catalog
        .enhancements()
        .iter()
        .map(|e| {
            let p = catalog.pattern(&e.pattern_id).unwrap();
            (p.site.as_str(), p.id.as_str(), e.id.as_str())
        })
        .collect();
    let span = n_days as i64 * 86_400;
    let when = |rng: &mut StdRng| {
        let secs = if rng.gen_ratio(1, 20) { rng.gen_range(-86_400..span + 86_400) } else { rng.gen_range(0..span) };
        start + Duration::seconds(secs)
    };
    let mut events = Vec::with_capacity(n_events);
    for _ in 0..n_events {
        let p = participants.choose(&mut rng).unwrap();
        let kind = *EventKind::ALL.choose(&mut rng).unwrap();
        let (site, pattern, enhancement) = *pairs.choose(&mut rng).unwrap();
        let ts = when(&mut rng);
        let mut e = TelemetryEvent::new(kind, ts, site, p);
        match kind {
            EventKind::PageVisited => {
                let page = if with_pii && rng.gen_ratio(1, 10) {
                    PII_SAMPLES.choose(&mut rng).unwrap().to_string()
                } else {
                    format!("page-{}", rng.gen_range(0..12))
                };
                e = e.with_page(&page);
            }
            k if k.is_enhancement() => e = e.with_enhancement(pattern, enhancement),
            _ => e.pattern_id = Some(pattern.to_string()),
        }
        events.push(e);
    }
    let n_notes = (n_events / 10).max(1);
    let notes = (0..n_notes)
        .map(|i| {
            let body = if with_pii && i % 3 == 0 {
                format!("Noticed something odd; {}", PII_SAMPLES.choose(&mut rng).unwrap())
            } else {
                format!("Diary entry {i}: the banner showed up again")
            };
            DiaryNote {
                timestamp: when(&mut rng),
                participant_id: participants.choose(&mut rng).unwrap().clone(),
                body,
                attachments: if rng.gen_ratio(1, 4) { vec![format!("screenshot-{i}.png")] } else { Vec::new() },
            }
        })
        .collect();
    Study { start_day, n_days, participants, events, notes }
}
