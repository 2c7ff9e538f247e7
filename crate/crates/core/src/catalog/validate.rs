use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Catalog, RuleKind, MAX_ENHANCEMENTS_PER_PATTERN};
use crate::detector::compile_regex;
use crate::patch::validate_primitive;
use crate::selector::Selector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    DuplicateId,
    InvalidId,
    EnhancementCount,
    DuplicateListing,
    DanglingEnhancement,
    DanglingPattern,
    UnlistedEnhancement,
    EmptyAttributes,
    EmptyRules,
    EmptyText,
    InvalidRule,
    EmptyPatch,
    InvalidPatch,
    UnknownEnumValue,
    MalformedEntry,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            DuplicateId => "duplicate-id",
            InvalidId => "invalid-id",
            EnhancementCount => "enhancement-count",
            DuplicateListing => "duplicate-listing",
            DanglingEnhancement => "dangling-enhancement",
            DanglingPattern => "dangling-pattern",
            UnlistedEnhancement => "unlisted-enhancement",
            EmptyAttributes => "empty-attributes",
            EmptyRules => "empty-rules",
            EmptyText => "empty-text",
            InvalidRule => "invalid-rule",
            EmptyPatch => "empty-patch",
            InvalidPatch => "invalid-patch",
            UnknownEnumValue => "unknown-enum-value",
            MalformedEntry => "malformed-entry",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub id: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code, self.id, self.message)
    }
}

fn is_slug(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('-')
        && !id.ends_with('-')
        && id.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

/// Every invariant violation in the catalog; empty means valid.
pub fn validate_catalog(c: &Catalog) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, id: &str, message: String| out.push(Violation { code, id: id.to_string(), message });

    let mut seen = HashSet::new();
    for p in c.patterns() {
        if !seen.insert(p.id.as_str()) {
            push(ViolationCode::DuplicateId, &p.id, "pattern id appears more than once".into());
        }
        if !is_slug(&p.id) {
            push(ViolationCode::InvalidId, &p.id, "pattern ids are lowercase kebab-case slugs".into());
        }
        let n = p.enhancement_ids.len();
        if !(1..=MAX_ENHANCEMENTS_PER_PATTERN).contains(&n) {
            push(
                ViolationCode::EnhancementCount,
                &p.id,
                format!("lists {n} enhancements; expected 1 to {MAX_ENHANCEMENTS_PER_PATTERN}"),
            );
        }
        let mut listed = HashSet::new();
        for eid in &p.enhancement_ids {
            if !listed.insert(eid.as_str()) {
                push(ViolationCode::DuplicateListing, &p.id, format!("lists enhancement {eid:?} twice"));
            }
            match c.enhancement(eid) {
                None => push(ViolationCode::DanglingEnhancement, &p.id, format!("enhancement {eid:?} does not exist")),
                Some(e) if e.pattern_id != p.id => push(
                    ViolationCode::DanglingEnhancement,
                    &p.id,
                    format!("enhancement {eid:?} belongs to pattern {:?}", e.pattern_id),
                ),
                Some(_) => {}
            }
        }
        if p.attributes.is_empty() {
            push(ViolationCode::EmptyAttributes, &p.id, "no dark attributes".into());
        }
        for (field, text) in [
            ("name", &p.name),
            ("site", &p.site),
            ("mechanism_text", &p.mechanism_text),
            ("severity_text", &p.impact.severity_text),
        ] {
            if text.trim().is_empty() {
                push(ViolationCode::EmptyText, &p.id, format!("{field} is empty"));
            }
        }
        if p.rules.is_empty() {
            push(ViolationCode::EmptyRules, &p.id, "no detection rules".into());
        }
        for (i, rule) in p.rules.iter().enumerate() {
            let problem = match rule.kind {
                RuleKind::AttributeRegex if rule.target.is_empty() => Some("attribute name is empty".to_string()),
                RuleKind::AttributeRegex => compile_regex(&rule.pattern).err().map(|e| e.to_string()),
                RuleKind::InnerTextContains if rule.pattern.is_empty() => Some("substring is empty".to_string()),
                RuleKind::InnerTextContains => None,
                RuleKind::StructuralSelector => Selector::parse(&rule.target).err().map(|e| e.to_string()),
            };
            let scope_problem = rule.scope.as_deref().and_then(|s| Selector::parse(s).err()).map(|e| e.to_string());
            for msg in problem.into_iter().chain(scope_problem) {
                push(ViolationCode::InvalidRule, &p.id, format!("rule {i}: {msg}"));
            }
        }
    }

    let mut seen = HashSet::new();
    for e in c.enhancements() {
        if !seen.insert(e.id.as_str()) {
            push(ViolationCode::DuplicateId, &e.id, "enhancement id appears more than once".into());
        }
        if !is_slug(&e.id) {
            push(ViolationCode::InvalidId, &e.id, "enhancement ids are lowercase kebab-case slugs".into());
        }
        match c.pattern(&e.pattern_id) {
            None => push(ViolationCode::DanglingPattern, &e.id, format!("pattern {:?} does not exist", e.pattern_id)),
            Some(p) if !p.enhancement_ids.contains(&e.id) => push(
                ViolationCode::UnlistedEnhancement,
                &e.id,
                format!("pattern {:?} does not list this enhancement", p.id),
            ),
            Some(_) => {}
        }
        if e.effect_text.trim().is_empty() {
            push(ViolationCode::EmptyText, &e.id, "effect_text is empty".into());
        }
        if e.patch.is_empty() {
            push(ViolationCode::EmptyPatch, &e.id, "patch has no primitives".into());
        }
        for (i, prim) in e.patch.iter().enumerate() {
            if let Err(msg) = validate_primitive(prim) {
                push(ViolationCode::InvalidPatch, &e.id, format!("primitive {i}: {msg}"));
            }
        }
    }
    out
}
