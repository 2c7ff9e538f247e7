use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Element, HtmlDocument};

/// Attributes tried, in order, when capturing a fingerprint. Only a value
/// that is unique in the document at capture time is used.
pub const FINGERPRINT_ATTRIBUTES: &[&str] = &["id", "data-testid", "data-uia", "name"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    pub name: String,
    pub value: String,
}

/// Address of an element: child indices from the document root plus an
/// optional identifying attribute used to re-anchor a stale path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeLocator {
    pub path: Vec<usize>,
    #[serde(default)]
    pub fingerprint: Option<Fingerprint>,
}

impl NodeLocator {
    pub fn from_path(path: Vec<usize>) -> Self {
        NodeLocator { path, fingerprint: None }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocatorError {
    #[error("stale locator: path {path:?} does not reach an element")]
    PathMiss { path: Vec<usize> },
    #[error("stale locator: path {path:?} is stale and fingerprint {name}={value:?} matches {matches} elements")]
    FingerprintMiss { path: Vec<usize>, name: String, value: String, matches: usize },
}

pub(crate) struct FingerprintIndex {
    counts: HashMap<(String, String), usize>,
}

impl FingerprintIndex {
    pub(crate) fn new(doc: &HtmlDocument) -> Self {
        let mut counts = HashMap::new();
        for (_, el) in doc.elements() {
            for name in FINGERPRINT_ATTRIBUTES {
                if let Some(v) = el.attr(name) {
                    if !v.is_empty() {
                        *counts.entry((name.to_string(), v.to_string())).or_insert(0) += 1;
                    }
                }
            }
        }
        FingerprintIndex { counts }
    }

    pub(crate) fn fingerprint_for(&self, el: &Element) -> Option<Fingerprint> {
        FINGERPRINT_ATTRIBUTES.iter().find_map(|name| {
            let value = el.attr(name).filter(|v| !v.is_empty())?;
            (self.counts.get(&(name.to_string(), value.to_string())) == Some(&1))
                .then(|| Fingerprint { name: name.to_string(), value: value.to_string() })
        })
    }
}

pub(crate) fn unique_fingerprint(doc: &HtmlDocument, el: &Element) -> Option<Fingerprint> {
    FingerprintIndex::new(doc).fingerprint_for(el)
}

pub(crate) fn resolve_path(doc: &HtmlDocument, loc: &NodeLocator) -> Result<Vec<usize>, LocatorError> {
    if let Some(el) = doc.element_at(&loc.path) {
        let fingerprint_ok = match &loc.fingerprint {
            None => true,
            Some(fp) => el.attr(&fp.name) == Some(fp.value.as_str()),
        };
        if fingerprint_ok {
            return Ok(loc.path.clone());
        }
    }
    let Some(fp) = &loc.fingerprint else {
        return Err(LocatorError::PathMiss { path: loc.path.clone() });
    };
    let hits: Vec<_> = doc
        .elements()
        .into_iter()
        .filter(|(_, el)| el.attr(&fp.name) == Some(fp.value.as_str()))
        .map(|(p, _)| p)
        .collect();
    match hits.as_slice() {
        [only] => Ok(only.clone()),
        _ => Err(LocatorError::FingerprintMiss {
            path: loc.path.clone(),
            name: fp.name.clone(),
            value: fp.value.clone(),
            matches: hits.len(),
        }),
    }
}
