//! Rule evaluation: finds catalog dark patterns in a document.
//!
//! Rules of one pattern are OR-combined. When a pattern matches both an
//! element and one of its descendants only the outermost element is kept, so
//! highlights never stack. Results come back in document order, then by
//! pattern id, regardless of execution mode.

mod report;

use std::collections::HashSet;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, DarkPatternSpec, DetectionRule, RuleKind};
use crate::dom::{FingerprintIndex, FlatDocument, HtmlDocument, LocatorError, NodeLocator};
use crate::exec::{flat_map_indices, map_slice, Execution};
use crate::selector::{Selector, SelectorError};

pub use report::{scan_report, Report, ReportGroup};

pub const EXCERPT_LIMIT: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub pattern_id: String,
    pub locator: NodeLocator,
    pub site: String,
    pub rule_index: usize,
    pub matched_excerpt: String,
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error(transparent)]
    Stale(#[from] LocatorError),
    #[error("invalid regex: {0}")]
    Regex(#[from] regex::Error),
    #[error(transparent)]
    Selector(#[from] SelectorError),
    #[error("detection references unknown pattern {0:?}")]
    UnknownPattern(String),
}

/// Attribute regexes are case-insensitive; markup casing varies between page
/// variants.
pub fn compile_regex(source: &str) -> Result<Regex, regex::Error> {
    RegexBuilder::new(source).case_insensitive(true).size_limit(1 << 20).build()
}

enum Matcher {
    Attribute { name: String, regex: Regex },
    Text(String),
    Structure(Selector),
}

struct CompiledRule {
    matcher: Matcher,
    scope: Option<Selector>,
}

impl CompiledRule {
    fn compile(rule: &DetectionRule) -> Result<Self, DetectError> {
        let matcher = match rule.kind {
            RuleKind::AttributeRegex => {
                Matcher::Attribute { name: rule.target.to_ascii_lowercase(), regex: compile_regex(&rule.pattern)? }
            }
            RuleKind::InnerTextContains => Matcher::Text(rule.pattern.clone()),
            RuleKind::StructuralSelector => Matcher::Structure(Selector::parse(&rule.target)?),
        };
        let scope = rule.scope.as_deref().map(Selector::parse).transpose()?;
        Ok(CompiledRule { matcher, scope })
    }

    /// The excerpt of what matched, or `None` when the rule does not hold.
    fn eval(&self, flat: &FlatDocument<'_>, i: usize) -> Option<String> {
        let excerpt = match &self.matcher {
            Matcher::Attribute { name, regex } => {
                let value = flat.element(i).attr(name)?;
                regex.is_match(value).then(|| excerpt(value, 0))?
            }
            Matcher::Text(literal) => {
                let text = flat.text(i);
                excerpt(text, text.find(literal.as_str())?)
            }
            Matcher::Structure(sel) => {
                if !sel.matches(flat, i) {
                    return None;
                }
                let text = flat.text(i);
                if text.trim().is_empty() {
                    format!("<{}>", flat.element(i).name)
                } else {
                    excerpt(text, 0)
                }
            }
        };
        match &self.scope {
            Some(scope) if !scope.matches_ancestor_of(flat, i) => None,
            _ => Some(excerpt),
        }
    }
}

/// Whitespace-collapsed snippet starting near `at`, at most
/// [`EXCERPT_LIMIT`] characters.
fn excerpt(text: &str, at: usize) -> String {
    let start = text[..at].char_indices().rev().nth(20).map(|(i, _)| i).unwrap_or(0);
    let collapsed = text[start..].split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.chars().take(EXCERPT_LIMIT).collect()
}

struct CompiledPattern<'c> {
    spec: &'c DarkPatternSpec,
    rules: Vec<CompiledRule>,
}

/// Catalog rules compiled once for repeated scanning.
pub struct Detector<'c> {
    patterns: Vec<CompiledPattern<'c>>,
}

impl<'c> Detector<'c> {
    pub fn new(catalog: &'c Catalog) -> Result<Self, DetectError> {
        let patterns = catalog
            .patterns()
            .iter()
            .map(|spec| {
                let rules = spec.rules.iter().map(CompiledRule::compile).collect::<Result<_, _>>()?;
                Ok(CompiledPattern { spec, rules })
            })
            .collect::<Result<_, DetectError>>()?;
        Ok(Detector { patterns })
    }

    pub fn scan(&self, doc: &HtmlDocument, site: &str) -> Vec<Detection> {
        self.scan_with(doc, site, Execution::default())
    }

    pub fn scan_with(&self, doc: &HtmlDocument, site: &str, exec: Execution) -> Vec<Detection> {
        let active: Vec<&CompiledPattern<'_>> = self.patterns.iter().filter(|p| p.spec.site == site).collect();
        if active.is_empty() {
            return Vec::new();
        }
        let flat = FlatDocument::new(doc);
        let hits: Vec<(usize, usize, usize, String)> = flat_map_indices(flat.len(), exec, |i| {
            active
                .iter()
                .enumerate()
                .filter_map(|(p, pattern)| {
                    pattern.rules.iter().enumerate().find_map(|(r, rule)| rule.eval(&flat, i).map(|ex| (i, p, r, ex)))
                })
                .collect()
        });

        let matched: HashSet<(usize, usize)> = hits.iter().map(|&(i, p, _, _)| (p, i)).collect();
        let mut kept: Vec<_> = hits
            .into_iter()
            .filter(|&(i, p, _, _)| !flat.ancestors(i).any(|a| matched.contains(&(p, a))))
            .collect();
        kept.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| active[a.1].spec.id.cmp(&active[b.1].spec.id)));

        let fingerprints = FingerprintIndex::new(doc);
        kept.into_iter()
            .map(|(i, p, rule_index, matched_excerpt)| Detection {
                pattern_id: active[p].spec.id.clone(),
                locator: NodeLocator { path: flat.path(i).to_vec(), fingerprint: fingerprints.fingerprint_for(flat.element(i)) },
                site: site.to_string(),
                rule_index,
                matched_excerpt,
            })
            .collect()
    }

    /// Scans many documents of one site; output order follows `docs`.
    pub fn scan_batch(&self, docs: &[HtmlDocument], site: &str, exec: Execution) -> Vec<Vec<Detection>> {
        // Inner scans stay sequential to avoid nesting the pool.
        map_slice(docs, exec, |d| self.scan_with(d, site, Execution::Sequential))
    }
}

/// Scans `doc` for every pattern the catalog defines for `site`.
pub fn scan(doc: &HtmlDocument, catalog: &Catalog, site: &str) -> Vec<Detection> {
    Detector::new(catalog).expect("catalog rules were validated on load").scan(doc, site)
}

/// Evaluates one rule against one element.
pub fn match_rule(rule: &DetectionRule, doc: &HtmlDocument, element: &NodeLocator) -> Result<bool, DetectError> {
    let path = doc.resolve_path(element)?;
    let compiled = CompiledRule::compile(rule)?;
    let flat = FlatDocument::new(doc);
    let i = flat.index_of(&path).expect("resolved element is in the flat table");
    Ok(compiled.eval(&flat, i).is_some())
}
