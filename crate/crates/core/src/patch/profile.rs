use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{apply_enhancement, revert, PatchError, PatchReceipt};
use crate::catalog::Catalog;
use crate::detector::Detector;
use crate::dom::{HtmlDocument, NodeLocator};

/// A selection or detection that could not be applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchWarning {
    pub pattern_id: String,
    pub enhancement_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locator: Option<NodeLocator>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ProfileApplication {
    pub document: HtmlDocument,
    /// In application order; revert them last to first.
    pub receipts: Vec<PatchReceipt>,
    pub warnings: Vec<PatchWarning>,
}

/// Scans `d` and applies the selected enhancement to every detection of a
/// selected pattern. Detections are patched from the end of the document
/// backwards so insertions never shift a pending target.
pub fn apply_profile(
    d: &HtmlDocument,
    c: &Catalog,
    selections: &[(String, String)],
    site: &str,
) -> ProfileApplication {
    let mut out = ProfileApplication { document: d.clone(), receipts: Vec::new(), warnings: Vec::new() };
    let mut chosen = HashMap::new();
    for (pattern_id, enhancement_id) in selections {
        if c.offers(pattern_id, enhancement_id) {
            chosen.insert(pattern_id.as_str(), enhancement_id.as_str());
        } else {
            out.warnings.push(PatchWarning {
                pattern_id: pattern_id.clone(),
                enhancement_id: enhancement_id.clone(),
                locator: None,
                message: "selection is not offered by the catalog".into(),
            });
        }
    }
    if chosen.is_empty() {
        return out;
    }
    let detector = match Detector::new(c) {
        Ok(d) => d,
        Err(e) => {
            out.warnings.push(PatchWarning {
                pattern_id: String::new(),
                enhancement_id: String::new(),
                locator: None,
                message: e.to_string(),
            });
            return out;
        }
    };
    let detections = detector.scan(d, site);
    // Where an already patched element now lives, keyed by its original path.
    let mut moved: HashMap<Vec<usize>, NodeLocator> = HashMap::new();
    for det in detections.iter().rev() {
        let Some(&enhancement_id) = chosen.get(det.pattern_id.as_str()) else { continue };
        let e = c.enhancement(enhancement_id).expect("offered enhancements exist");
        let mut target = det.clone();
        if let Some(loc) = moved.get(&det.locator.path) {
            target.locator = loc.clone();
        }
        match apply_enhancement(&out.document, &target, e) {
            Ok((doc, receipt)) => {
                moved.insert(det.locator.path.clone(), receipt.element.clone());
                out.document = doc;
                out.receipts.push(receipt);
            }
            Err(err) => out.warnings.push(PatchWarning {
                pattern_id: det.pattern_id.clone(),
                enhancement_id: enhancement_id.to_string(),
                locator: Some(det.locator.clone()),
                message: err.to_string(),
            }),
        }
    }
    out
}

/// Reverts receipts last to first.
pub fn revert_all(d: &HtmlDocument, receipts: &[PatchReceipt]) -> Result<HtmlDocument, PatchError> {
    receipts.iter().rev().try_fold(d.clone(), |doc, r| revert(&doc, r))
}
