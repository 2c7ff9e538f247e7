//! Reversible application of enhancement patches.
//!
//! Applying an enhancement never mutates its input: it returns a patched copy
//! plus a [`PatchReceipt`] holding the inverse of every edit. Reverting with
//! that receipt checks that each edit is still in place before undoing it, so
//! a receipt for the wrong document is rejected instead of corrupting it.

mod primitive;
mod profile;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::EnhancementSpec;
use crate::detector::Detection;
use crate::dom::{
    is_void, parse_html_with_warnings, serialize, serialize_node, Attribute, Element, HtmlDocument, LocatorError,
    Node, NodeLocator, RAW_TEXT_ELEMENTS,
};

pub use primitive::{validate_primitive, InsertPosition, PatchPrimitive, WidgetKind, REFLECTION_SLOTS};
pub use profile::{apply_profile, revert_all, PatchWarning, ProfileApplication};

/// Set on every element an enhancement has been applied to.
pub const MARKER_ATTRIBUTE: &str = "data-pita-enhancement";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatchError {
    #[error("detection is for pattern {detection:?} but the enhancement targets {enhancement:?}")]
    PatternMismatch { detection: String, enhancement: String },
    #[error(transparent)]
    Stale(#[from] LocatorError),
    #[error("invalid patch primitive: {0}")]
    InvalidPrimitive(String),
    #[error("cannot apply {op} to <{element}>")]
    UnsupportedTarget { op: &'static str, element: String },
    #[error("element already carries enhancement {existing:?}")]
    Conflict { existing: String },
    #[error("patched document would not re-parse cleanly: {0}")]
    InvalidResult(String),
    #[error("receipt does not match the document: {0}")]
    ReceiptMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorAttribute {
    pub index: usize,
    pub value: String,
}

/// Where an inserted node sits relative to the target element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "kebab-case")]
pub enum Anchor {
    Before,
    After,
    Child { index: usize },
}

/// Data needed to undo one edit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "edit", rename_all = "kebab-case")]
pub enum InverseEdit {
    /// An attribute of the target changed from `prior` to `applied`.
    Attribute { name: String, prior: Option<PriorAttribute>, applied: Option<String> },
    /// A node, serialized as `markup`, was inserted.
    Inserted { anchor: Anchor, markup: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptEntry {
    pub primitive: PatchPrimitive,
    pub inverse: Vec<InverseEdit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchReceipt {
    pub enhancement_id: String,
    pub detection: Detection,
    /// The target element in the patched document.
    pub element: NodeLocator,
    pub entries: Vec<ReceiptEntry>,
    pub applied_at: DateTime<Utc>,
    /// True when the element already carried this enhancement and nothing
    /// was changed.
    #[serde(default)]
    pub noop: bool,
}

impl PatchReceipt {
    fn inserted(&self, anchor: Anchor) -> usize {
        self.entries
            .iter()
            .flat_map(|e| &e.inverse)
            .filter(|edit| matches!(edit, InverseEdit::Inserted { anchor: a, .. } if *a == anchor))
            .count()
    }

    /// Number of sibling nodes inserted directly before the element.
    pub fn inserted_before(&self) -> usize {
        self.inserted(Anchor::Before)
    }

    pub fn inserted_after(&self) -> usize {
        self.inserted(Anchor::After)
    }
}

/// Before/after view of one enhancement, for previews.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub enhancement_id: String,
    pub before: String,
    pub after: String,
    pub changes: Vec<PatchPrimitive>,
    pub noop: bool,
}

fn anchor_of(position: InsertPosition, el: &Element) -> Anchor {
    match position {
        InsertPosition::Before => Anchor::Before,
        InsertPosition::After => Anchor::After,
        InsertPosition::Prepend => Anchor::Child { index: 0 },
        InsertPosition::Append => Anchor::Child { index: el.children.len() },
    }
}

/// Mutable view of a document plus the current path of the target element.
struct Target<'d> {
    doc: &'d mut HtmlDocument,
    path: Vec<usize>,
}

impl Target<'_> {
    fn element(&mut self) -> &mut Element {
        self.doc.element_at_mut(&self.path).expect("target path stays valid")
    }

    fn set_attr(&mut self, name: &str, value: Option<String>) -> InverseEdit {
        let el = self.element();
        let prior = el.attr_index(name).map(|index| PriorAttribute { index, value: el.attrs[index].value.clone() });
        match &value {
            Some(v) => el.set_attr(name, v.clone()),
            None => {
                el.remove_attr(name);
            }
        }
        InverseEdit::Attribute { name: name.to_string(), prior, applied: value }
    }

    fn set_style(&mut self, property: &str, value: &str) -> InverseEdit {
        let style = primitive::style_with(self.element().attr("style"), property, value);
        self.set_attr("style", Some(style))
    }

    fn insert(&mut self, anchor: Anchor, node: Element, op: &'static str) -> Result<InverseEdit, PatchError> {
        let markup = serialize_node(&Node::Element(node.clone()));
        let idx = *self.path.last().expect("element paths are non-empty");
        match anchor {
            Anchor::Before | Anchor::After => {
                let at = if anchor == Anchor::Before { idx } else { idx + 1 };
                self.doc.siblings_mut(&self.path).expect("target has a sibling list").insert(at, Node::Element(node));
                if anchor == Anchor::Before {
                    *self.path.last_mut().unwrap() += 1;
                }
            }
            Anchor::Child { index } => {
                let el = self.element();
                if is_void(&el.name) || RAW_TEXT_ELEMENTS.contains(&el.name.as_str()) {
                    return Err(PatchError::UnsupportedTarget { op, element: el.name.clone() });
                }
                el.children.insert(index, Node::Element(node));
            }
        }
        Ok(InverseEdit::Inserted { anchor, markup })
    }

    fn apply(&mut self, p: &PatchPrimitive) -> Result<Vec<InverseEdit>, PatchError> {
        let invalid = PatchError::InvalidPrimitive;
        Ok(match p {
            PatchPrimitive::Hide => vec![
                self.set_attr(primitive::HIDDEN_ATTRIBUTE, Some("true".into())),
                self.set_style("display", "none !important"),
            ],
            PatchPrimitive::SetStyle { property, value } => vec![self.set_style(property, value)],
            PatchPrimitive::SetAttribute { name, value } => vec![self.set_attr(name, Some(value.clone()))],
            PatchPrimitive::RemoveAttribute { name } => vec![self.set_attr(name, None)],
            PatchPrimitive::InsertLabel { position, markup } => {
                let node = primitive::parse_single_element(markup).map_err(invalid)?;
                let anchor = anchor_of(*position, self.element());
                vec![self.insert(anchor, node, "insert-label")?]
            }
            PatchPrimitive::WrapOverlay { markup, revealable } => {
                let node = primitive::overlay(markup, *revealable).map_err(invalid)?;
                vec![self.insert(Anchor::Child { index: 0 }, node, "wrap-overlay")?, self.set_style("position", "relative")]
            }
            PatchPrimitive::Annotate { marker } => vec![
                self.set_attr(primitive::ANNOTATED_ATTRIBUTE, Some("true".into())),
                self.set_style("border", marker),
            ],
            PatchPrimitive::InjectWidget { kind, params } => {
                vec![self.insert(Anchor::After, primitive::widget(*kind, params), "inject-widget")?]
            }
        })
    }

    fn undo(&mut self, edit: &InverseEdit) -> Result<(), PatchError> {
        let mismatch = |m: String| Err(PatchError::ReceiptMismatch(m));
        match edit {
            InverseEdit::Attribute { name, prior, applied } => {
                let el = self.element();
                if el.attr(name) != applied.as_deref() {
                    return mismatch(format!("attribute {name} no longer holds the patched value"));
                }
                el.remove_attr(name);
                if let Some(prior) = prior {
                    if prior.index > el.attrs.len() {
                        return mismatch(format!("attribute {name} cannot return to position {}", prior.index));
                    }
                    el.attrs.insert(prior.index, Attribute { name: name.clone(), value: prior.value.clone() });
                }
            }
            InverseEdit::Inserted { anchor, markup } => {
                let idx = *self.path.last().expect("element paths are non-empty");
                let (list, at) = match anchor {
                    Anchor::Before if idx == 0 => return mismatch("no node before the element".into()),
                    Anchor::Before => (self.doc.siblings_mut(&self.path).unwrap(), idx - 1),
                    Anchor::After => (self.doc.siblings_mut(&self.path).unwrap(), idx + 1),
                    Anchor::Child { index } => (&mut self.element().children, *index),
                };
                if list.get(at).map(serialize_node).as_deref() != Some(markup.as_str()) {
                    return mismatch("inserted node is missing or was modified".into());
                }
                list.remove(at);
                if *anchor == Anchor::Before {
                    *self.path.last_mut().unwrap() -= 1;
                }
            }
        }
        Ok(())
    }
}

/// The patched document must serialize to markup that parses back, without
/// repairs, to the same tree.
fn check_validity(doc: &HtmlDocument) -> Result<(), PatchError> {
    let markup = serialize(doc);
    let (reparsed, warnings) =
        parse_html_with_warnings(markup.as_bytes(), "").map_err(|e| PatchError::InvalidResult(e.to_string()))?;
    if let Some(w) = warnings.iter().find(|w| w.is_repair()) {
        return Err(PatchError::InvalidResult(w.to_string()));
    }
    if reparsed != *doc {
        return Err(PatchError::InvalidResult("tree changes when re-parsed".into()));
    }
    Ok(())
}

/// Applies `e` to the element `det` points at.
pub fn apply_enhancement(
    d: &HtmlDocument,
    det: &Detection,
    e: &EnhancementSpec,
) -> Result<(HtmlDocument, PatchReceipt), PatchError> {
    if det.pattern_id != e.pattern_id {
        return Err(PatchError::PatternMismatch { detection: det.pattern_id.clone(), enhancement: e.pattern_id.clone() });
    }
    let path = d.resolve_path(&det.locator)?;
    let receipt = |element: NodeLocator, entries, noop| PatchReceipt {
        enhancement_id: e.id.clone(),
        detection: det.clone(),
        element,
        entries,
        applied_at: Utc::now(),
        noop,
    };
    match d.element_at(&path).and_then(|el| el.attr(MARKER_ATTRIBUTE)) {
        Some(existing) if existing == e.id => {
            let element = d.locator_of(&path).expect("resolved path is an element");
            return Ok((d.clone(), receipt(element, Vec::new(), true)));
        }
        Some(existing) => return Err(PatchError::Conflict { existing: existing.to_string() }),
        None => {}
    }
    for p in &e.patch {
        validate_primitive(p).map_err(PatchError::InvalidPrimitive)?;
    }

    let mut doc = d.clone();
    let mut target = Target { doc: &mut doc, path };
    let mut entries = Vec::with_capacity(e.patch.len());
    for p in &e.patch {
        entries.push(ReceiptEntry { primitive: p.clone(), inverse: target.apply(p)? });
    }
    target.element().set_attr(MARKER_ATTRIBUTE, e.id.as_str());
    let path = target.path;
    check_validity(&doc)?;
    let element = doc.locator_of(&path).expect("target is an element");
    Ok((doc, receipt(element, entries, false)))
}

/// Undoes everything `r` recorded.
pub fn revert(d: &HtmlDocument, r: &PatchReceipt) -> Result<HtmlDocument, PatchError> {
    if r.noop {
        return Ok(d.clone());
    }
    let path = d.resolve_path(&r.element).map_err(|e| PatchError::ReceiptMismatch(e.to_string()))?;
    let mut doc = d.clone();
    let mut target = Target { doc: &mut doc, path };
    match target.element().attr(MARKER_ATTRIBUTE) {
        Some(id) if id == r.enhancement_id => {}
        Some(id) => return Err(PatchError::ReceiptMismatch(format!("element carries enhancement {id:?}"))),
        None => return Err(PatchError::ReceiptMismatch("element carries no enhancement marker".into())),
    }
    target.element().remove_attr(MARKER_ATTRIBUTE);
    for entry in r.entries.iter().rev() {
        for edit in entry.inverse.iter().rev() {
            target.undo(edit)?;
        }
    }
    Ok(doc)
}

/// Serialized element together with any siblings the receipt inserted around
/// it; this is the span a client replaces when splicing a patch into a live
/// page.
pub fn affected_fragment(doc: &HtmlDocument, r: &PatchReceipt) -> Result<String, PatchError> {
    let path = doc.resolve_path(&r.element)?;
    Ok(fragment(doc, &path, r.inserted_before(), r.inserted_after(), true))
}

fn fragment(doc: &HtmlDocument, path: &[usize], before: usize, after: usize, with_marker: bool) -> String {
    let idx = *path.last().expect("element paths are non-empty");
    let siblings = match path.split_last() {
        Some((_, [])) => &doc.children,
        Some((_, parent)) => &doc.element_at(parent).expect("parent exists").children,
        None => unreachable!(),
    };
    siblings[idx - before..=idx + after]
        .iter()
        .map(|node| match node {
            Node::Element(el) if !with_marker && el.attr(MARKER_ATTRIBUTE).is_some() => {
                let mut el = el.clone();
                el.remove_attr(MARKER_ATTRIBUTE);
                serialize_node(&Node::Element(el))
            }
            other => serialize_node(other),
        })
        .collect()
}

/// What applying `e` would change, without changing anything. Fragments leave
/// out the enhancement marker so they show only the visible edit.
pub fn preview_diff(d: &HtmlDocument, det: &Detection, e: &EnhancementSpec) -> Result<DiffSummary, PatchError> {
    let path = d.resolve_path(&det.locator)?;
    let (patched, receipt) = apply_enhancement(d, det, e)?;
    let after_path = patched.resolve_path(&receipt.element)?;
    Ok(DiffSummary {
        enhancement_id: e.id.clone(),
        before: fragment(d, &path, 0, 0, false),
        after: fragment(&patched, &after_path, receipt.inserted_before(), receipt.inserted_after(), false),
        changes: receipt.entries.iter().map(|en| en.primitive.clone()).collect(),
        noop: receipt.noop,
    })
}
