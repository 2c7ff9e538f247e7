//! Declarative catalog of dark patterns and the UI enhancements that counter
//! them.
//!
//! A catalog is a versioned JSON file (see `data/seed_catalog.json` for the
//! bundled one). Patterns carry the awareness side: dark attributes, the
//! mechanism explanation and the welfare impact. Enhancements carry the
//! action side: an intervention strategy, an effect explanation and the patch
//! primitives that implement it. [`load_catalog`] only returns catalogs that
//! pass [`validate_catalog`].

mod types;
mod validate;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use types::{
    DarkAttribute, DarkPatternSpec, DetectionRule, Dimension, EnhancementSpec, Impact, InterventionStrategy,
    PreviewRefs, RuleKind, WelfareCategory,
};
pub use validate::{validate_catalog, Violation, ViolationCode};

/// The bundled seed catalog, byte for byte.
pub const SEED_CATALOG_JSON: &str = include_str!("../../data/seed_catalog.json");

pub const MAX_ENHANCEMENTS_PER_PATTERN: usize = 4;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("catalog field {field} of {id:?}: {message}")]
    Field { id: String, field: String, code: ViolationCode, message: String },
    #[error("catalog failed validation: {}", summarize(.0))]
    Validation(Vec<Violation>),
    #[error("unknown pattern id {0:?}")]
    UnknownPattern(String),
}

fn summarize(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    version: String,
    patterns: Vec<DarkPatternSpec>,
    enhancements: Vec<EnhancementSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    attribute_tooltips: BTreeMap<DarkAttribute, String>,
}

/// Immutable catalog value. Lookups by id use indices built at construction;
/// iteration follows file order.
#[derive(Debug, Clone)]
pub struct Catalog {
    version: String,
    patterns: Vec<DarkPatternSpec>,
    enhancements: Vec<EnhancementSpec>,
    attribute_tooltips: BTreeMap<DarkAttribute, String>,
    pattern_index: HashMap<String, usize>,
    enhancement_index: HashMap<String, usize>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.patterns == other.patterns
            && self.enhancements == other.enhancements
            && self.attribute_tooltips == other.attribute_tooltips
    }
}

impl Catalog {
    /// Builds a catalog without validating it. Duplicate ids resolve to their
    /// first occurrence; [`validate_catalog`] reports them.
    pub fn new(version: impl Into<String>, patterns: Vec<DarkPatternSpec>, enhancements: Vec<EnhancementSpec>) -> Self {
        let mut pattern_index = HashMap::new();
        for (i, p) in patterns.iter().enumerate() {
            pattern_index.entry(p.id.clone()).or_insert(i);
        }
        let mut enhancement_index = HashMap::new();
        for (i, e) in enhancements.iter().enumerate() {
            enhancement_index.entry(e.id.clone()).or_insert(i);
        }
        Catalog {
            version: version.into(),
            patterns,
            enhancements,
            attribute_tooltips: BTreeMap::new(),
            pattern_index,
            enhancement_index,
        }
    }

    /// The bundled seed catalog.
    pub fn seed() -> Catalog {
        load_catalog(SEED_CATALOG_JSON.as_bytes()).expect("bundled seed catalog is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn patterns(&self) -> &[DarkPatternSpec] {
        &self.patterns
    }

    pub fn enhancements(&self) -> &[EnhancementSpec] {
        &self.enhancements
    }

    pub fn pattern(&self, id: &str) -> Option<&DarkPatternSpec> {
        self.pattern_index.get(id).map(|&i| &self.patterns[i])
    }

    pub fn enhancement(&self, id: &str) -> Option<&EnhancementSpec> {
        self.enhancement_index.get(id).map(|&i| &self.enhancements[i])
    }

    pub fn tooltip(&self, attribute: DarkAttribute) -> &str {
        self.attribute_tooltips.get(&attribute).map(String::as_str).unwrap_or_else(|| attribute.tooltip())
    }

    /// All patterns for `site`, in catalog order.
    pub fn patterns_for_site(&self, site: &str) -> Vec<&DarkPatternSpec> {
        self.patterns.iter().filter(|p| p.site == site).collect()
    }

    /// The pattern's enhancements in its declared order. Dangling ids are
    /// skipped; a validated catalog has none.
    pub fn enhancements_for_pattern(&self, pattern_id: &str) -> Result<Vec<&EnhancementSpec>, CatalogError> {
        let pattern = self.pattern(pattern_id).ok_or_else(|| CatalogError::UnknownPattern(pattern_id.to_string()))?;
        Ok(pattern.enhancement_ids.iter().filter_map(|id| self.enhancement(id)).collect())
    }

    /// True when `enhancement_id` is one of the pattern's listed options.
    pub fn offers(&self, pattern_id: &str, enhancement_id: &str) -> bool {
        self.pattern(pattern_id).is_some_and(|p| p.enhancement_ids.iter().any(|e| e == enhancement_id))
            && self.enhancement(enhancement_id).is_some_and(|e| e.pattern_id == pattern_id)
    }

    pub fn sites(&self) -> Vec<&str> {
        let mut sites: Vec<&str> = Vec::new();
        for p in &self.patterns {
            if !sites.contains(&p.site.as_str()) {
                sites.push(&p.site);
            }
        }
        sites
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            version: self.version.clone(),
            patterns: self.patterns.clone(),
            enhancements: self.enhancements.clone(),
            attribute_tooltips: self.attribute_tooltips.clone(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }
}

/// Parses and validates a catalog file.
pub fn load_catalog(source: &[u8]) -> Result<Catalog, CatalogError> {
    let root: Value = serde_json::from_slice(source).map_err(|e| CatalogError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(mut root) = root else {
        return Err(field_error("<catalog>", "", ViolationCode::MalformedEntry, "top level must be an object"));
    };
    let version = match root.remove("version") {
        Some(Value::String(v)) => v,
        _ => return Err(field_error("<catalog>", "version", ViolationCode::MalformedEntry, "missing string field")),
    };
    let patterns: Vec<DarkPatternSpec> = entries(root.remove("patterns"), "patterns")?;
    let enhancements: Vec<EnhancementSpec> = entries(root.remove("enhancements"), "enhancements")?;
    let attribute_tooltips = match root.remove("attribute_tooltips") {
        None => BTreeMap::new(),
        Some(v) => decode(v, "<catalog>", "attribute_tooltips")?,
    };
    let mut catalog = Catalog::new(version, patterns, enhancements);
    catalog.attribute_tooltips = attribute_tooltips;
    let violations = validate_catalog(&catalog);
    if violations.is_empty() {
        Ok(catalog)
    } else {
        Err(CatalogError::Validation(violations))
    }
}

fn field_error(id: &str, field: &str, code: ViolationCode, message: &str) -> CatalogError {
    CatalogError::Field { id: id.to_string(), field: field.to_string(), code, message: message.to_string() }
}

/// Decodes each array entry on its own so errors can name the entry's id.
fn entries<T: serde::de::DeserializeOwned>(value: Option<Value>, field: &str) -> Result<Vec<T>, CatalogError> {
    let Some(Value::Array(items)) = value else {
        return Err(field_error("<catalog>", field, ViolationCode::MalformedEntry, "missing array field"));
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let id = item.get("id").and_then(Value::as_str).map(str::to_string).unwrap_or_else(|| format!("{field}[{i}]"));
            decode(item, &id, field)
        })
        .collect()
}

fn decode<T: serde::de::DeserializeOwned>(value: Value, id: &str, prefix: &str) -> Result<T, CatalogError> {
    serde_path_to_error::deserialize(value).map_err(|err| {
        let message = err.inner().to_string();
        let code = if message.contains("unknown variant") {
            ViolationCode::UnknownEnumValue
        } else {
            ViolationCode::MalformedEntry
        };
        let path = err.path().to_string();
        let field = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        CatalogError::Field { id: id.to_string(), field, code, message }
    })
}
