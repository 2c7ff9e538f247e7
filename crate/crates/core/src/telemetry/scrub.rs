use std::sync::LazyLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

pub const EMAIL_TOKEN: &str = "[REDACTED-EMAIL]";
pub const PHONE_TOKEN: &str = "[REDACTED-PHONE]";
pub const QUERY_TOKEN: &str = "[REDACTED-QUERY]";
pub const NAME_TOKEN: &str = "[REDACTED-NAME]";

static TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[REDACTED-(?:EMAIL|PHONE|QUERY|NAME)\]").expect("token regex"));
static QUERY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b((?:https?://)?[a-z0-9-]+(?:\.[a-z0-9-]+)+(?::\d+)?(?:/[^\s?#]*)?)\?[^\s#]+")
        .expect("query regex")
});
static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}").expect("email regex")
});
static PHONE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"(?:\+\d{1,3}[\s.-]?)?(?:\(\d{3}\)|\b\d{3})[\s.-]?\d{3}[\s.-]?\d{4}\b",
        r"|\+\d{1,3}(?:[\s.-]?\(?\d{1,4}\)?){2,4}\b",
    ))
    .expect("phone regex")
});

/// Extra literals to redact, such as names a participant asked to hide.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrubConfig {
    #[serde(default)]
    pub names: Vec<String>,
}

/// Compiled scrub rules.
#[derive(Debug, Clone)]
pub struct Scrubber {
    names: Option<Regex>,
}

impl Scrubber {
    pub fn new(config: &ScrubConfig) -> Self {
        let alternatives: Vec<String> =
            config.names.iter().map(|n| n.trim()).filter(|n| !n.is_empty()).map(regex::escape).collect();
        let names = (!alternatives.is_empty()).then(|| {
            RegexBuilder::new(&format!(r"\b(?:{})\b", alternatives.join("|")))
                .case_insensitive(true)
                .build()
                .expect("escaped literals always compile")
        });
        Scrubber { names }
    }

    /// Replaces every match with its redaction token. Existing tokens are
    /// left alone and the rules are re-run until nothing changes, so the
    /// result is a fixed point.
    pub fn scrub(&self, text: &str) -> String {
        let mut current = text.to_string();
        loop {
            let next = map_outside_tokens(&current, |segment| self.scrub_segment(segment));
            if next == current {
                return current;
            }
            current = next;
        }
    }

    fn scrub_segment(&self, segment: &str) -> String {
        let s = QUERY.replace_all(segment, format!("${{1}}?{QUERY_TOKEN}").as_str());
        let s = EMAIL.replace_all(&s, EMAIL_TOKEN);
        let s = PHONE.replace_all(&s, PHONE_TOKEN);
        match &self.names {
            Some(names) => names.replace_all(&s, NAME_TOKEN).into_owned(),
            None => s.into_owned(),
        }
    }

    /// Number of rule matches outside redaction tokens; zero for any output
    /// of [`scrub`](Self::scrub).
    pub fn hits(&self, text: &str) -> usize {
        let mut n = 0;
        map_outside_tokens(text, |segment| {
            n += QUERY.find_iter(segment).count() + EMAIL.find_iter(segment).count() + PHONE.find_iter(segment).count();
            n += self.names.as_ref().map_or(0, |r| r.find_iter(segment).count());
            String::new()
        });
        n
    }
}

fn map_outside_tokens(text: &str, mut f: impl FnMut(&str) -> String) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in TOKEN.find_iter(text) {
        out.push_str(&f(&text[last..m.start()]));
        out.push_str(m.as_str());
        last = m.end();
    }
    out.push_str(&f(&text[last..]));
    out
}

pub fn scrub(text: &str, config: &ScrubConfig) -> String {
    Scrubber::new(config).scrub(text)
}
