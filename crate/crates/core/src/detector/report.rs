use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DetectError, Detection};
use crate::catalog::{Catalog, DarkAttribute, WelfareCategory};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportGroup {
    pub pattern_id: String,
    pub name: String,
    pub site: String,
    pub attributes: BTreeSet<DarkAttribute>,
    pub category: WelfareCategory,
    pub mechanism_text: String,
    pub count: usize,
    pub excerpts: Vec<String>,
}

/// Detections grouped per pattern, in catalog order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Report {
    pub total: usize,
    pub groups: Vec<ReportGroup>,
}

pub fn scan_report(detections: &[Detection], catalog: &Catalog) -> Result<Report, DetectError> {
    if let Some(d) = detections.iter().find(|d| catalog.pattern(&d.pattern_id).is_none()) {
        return Err(DetectError::UnknownPattern(d.pattern_id.clone()));
    }
    let groups = catalog
        .patterns()
        .iter()
        .filter_map(|p| {
            let excerpts: Vec<String> =
                detections.iter().filter(|d| d.pattern_id == p.id).map(|d| d.matched_excerpt.clone()).collect();
            (!excerpts.is_empty()).then(|| ReportGroup {
                pattern_id: p.id.clone(),
                name: p.name.clone(),
                site: p.site.clone(),
                attributes: p.attributes.clone(),
                category: p.impact.category,
                mechanism_text: p.mechanism_text.clone(),
                count: excerpts.len(),
                excerpts,
            })
        })
        .collect();
    Ok(Report { total: detections.len(), groups })
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table for terminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let noun = if self.total == 1 { "pattern" } else { "patterns" };
        let _ = writeln!(out, "{} dark {noun} detected", self.total);
        if self.groups.is_empty() {
            return out;
        }
        let width = self.groups.iter().map(|g| g.name.chars().count()).max().unwrap_or(0).max(7);
        let _ = writeln!(out, "{:<width$}  {:>5}  {:<20}  attributes", "pattern", "count", "impact");
        for g in &self.groups {
            let attrs: Vec<&str> = g.attributes.iter().map(|a| a.label()).collect();
            let _ = writeln!(out, "{:<width$}  {:>5}  {:<20}  {}", g.name, g.count, g.category.label(), attrs.join(", "));
            for e in &g.excerpts {
                let _ = writeln!(out, "    - {e}");
            }
        }
        out
    }
}
