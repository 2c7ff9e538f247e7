use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MARKER_ATTRIBUTE;
use crate::dom::{parse_fragment, Element, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsertPosition {
    Before,
    After,
    Prepend,
    Append,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidgetKind {
    Reflection,
    ActionGuide,
}

impl WidgetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WidgetKind::Reflection => "reflection",
            WidgetKind::ActionGuide => "action-guide",
        }
    }
}

/// One edit an enhancement makes to its target element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum PatchPrimitive {
    /// Marks the element non-rendered without removing it.
    Hide,
    SetStyle { property: String, value: String },
    SetAttribute { name: String, value: String },
    RemoveAttribute { name: String },
    InsertLabel { position: InsertPosition, markup: String },
    /// Covers the element with `markup`, optionally with a reveal button.
    WrapOverlay {
        markup: String,
        #[serde(default)]
        revealable: bool,
    },
    /// Draws a border using the given CSS border shorthand.
    Annotate { marker: String },
    /// Inert widget with empty `data-slot` holes for the UI to fill.
    InjectWidget {
        kind: WidgetKind,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        params: BTreeMap<String, String>,
    },
}

pub(super) const HIDDEN_ATTRIBUTE: &str = "data-pita-hidden";
pub(super) const OVERLAY_ATTRIBUTE: &str = "data-pita-overlay";
pub(super) const REVEAL_ATTRIBUTE: &str = "data-pita-reveal";
pub(super) const ANNOTATED_ATTRIBUTE: &str = "data-pita-annotated";

/// Slots the reflection widget exposes, in display order.
pub const REFLECTION_SLOTS: [(&str, &str); 3] = [
    ("active-time", "Time spent here"),
    ("flagged-count", "Flagged interactions"),
    ("extra-time", "Time after flagged interactions"),
];

/// Checks a primitive in isolation, without a document.
pub fn validate_primitive(p: &PatchPrimitive) -> Result<(), String> {
    match p {
        PatchPrimitive::Hide => Ok(()),
        PatchPrimitive::SetStyle { property, value } => {
            check_property(property)?;
            check_style_value(value)
        }
        PatchPrimitive::SetAttribute { name, .. } | PatchPrimitive::RemoveAttribute { name } => check_attr_name(name),
        PatchPrimitive::InsertLabel { markup, .. } | PatchPrimitive::WrapOverlay { markup, .. } => {
            parse_single_element(markup).map(|_| ())
        }
        PatchPrimitive::Annotate { marker } => check_style_value(marker),
        PatchPrimitive::InjectWidget { params, .. } => {
            match params.keys().find(|k| k.is_empty() || !k.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')) {
                Some(k) => Err(format!("widget parameter name {k:?} is not a lowercase slug")),
                None => Ok(()),
            }
        }
    }
}

fn check_property(property: &str) -> Result<(), String> {
    if property.is_empty() || !property.chars().all(|c| c.is_ascii_alphabetic() || c == '-') {
        return Err(format!("invalid style property {property:?}"));
    }
    Ok(())
}

fn check_style_value(value: &str) -> Result<(), String> {
    if value.trim().is_empty() || value.contains([';', '{', '}']) {
        return Err(format!("invalid style value {value:?}"));
    }
    Ok(())
}

fn check_attr_name(name: &str) -> Result<(), String> {
    let ok = !name.is_empty()
        && name.chars().all(|c| !c.is_whitespace() && !c.is_ascii_uppercase() && !"\"'<>/=".contains(c));
    if !ok {
        return Err(format!("invalid attribute name {name:?}"));
    }
    if name == MARKER_ATTRIBUTE {
        return Err(format!("{MARKER_ATTRIBUTE} is reserved for the enhancement marker"));
    }
    Ok(())
}

/// Parses `markup` into exactly one element, rejecting anything the parser
/// had to repair.
pub(super) fn parse_single_element(markup: &str) -> Result<Element, String> {
    let (mut nodes, warnings) = parse_fragment(markup);
    if let Some(w) = warnings.first() {
        return Err(format!("markup is not well formed: {w}"));
    }
    match (nodes.len(), nodes.pop()) {
        (1, Some(Node::Element(el))) => Ok(el),
        _ => Err("markup must consist of exactly one element".into()),
    }
}

/// `current` with `property` set to `value`. Other declarations keep their
/// text and order.
pub(super) fn style_with(current: Option<&str>, property: &str, value: &str) -> String {
    let mut decls: Vec<String> =
        current.unwrap_or("").split(';').map(str::trim).filter(|d| !d.is_empty()).map(str::to_string).collect();
    let new = format!("{property}: {value}");
    let existing = decls.iter().position(|d| {
        d.split_once(':').is_some_and(|(k, _)| k.trim().eq_ignore_ascii_case(property))
    });
    match existing {
        Some(i) => decls[i] = new,
        None => decls.push(new),
    }
    decls.join("; ")
}

fn escape_text(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn element(name: &str, attrs: &[(&str, &str)], children: Vec<Node>) -> Element {
    let mut el = Element::new(name);
    for (k, v) in attrs {
        el.set_attr(k, *v);
    }
    el.children = children;
    el
}

pub(super) fn overlay(markup: &str, revealable: bool) -> Result<Element, String> {
    let mut el = parse_single_element(markup)?;
    el.set_attr(OVERLAY_ATTRIBUTE, "");
    if revealable {
        let button = element("button", &[("type", "button"), (REVEAL_ATTRIBUTE, "")], vec![Node::Text("Reveal".into())]);
        el.children.push(Node::Element(button));
    }
    Ok(el)
}

pub(super) fn widget(kind: WidgetKind, params: &BTreeMap<String, String>) -> Element {
    let mut aside = element("aside", &[("data-pita-widget", kind.as_str())], Vec::new());
    for (k, v) in params {
        aside.set_attr(&format!("data-pita-param-{k}"), v.as_str());
    }
    match kind {
        WidgetKind::Reflection => {
            let mut dl = Vec::new();
            for (slot, label) in REFLECTION_SLOTS {
                dl.push(Node::Element(element("dt", &[], vec![Node::Text(label.into())])));
                dl.push(Node::Element(element("dd", &[("data-slot", slot)], Vec::new())));
            }
            let title = params.get("title").map(|t| escape_text(t)).unwrap_or_else(|| "Looking back".into());
            aside.children.push(Node::Element(element("p", &[("data-slot", "title")], vec![Node::Text(title)])));
            aside.children.push(Node::Element(element("dl", &[], dl)));
        }
        WidgetKind::ActionGuide => {
            let text = params.get("text").map(|t| escape_text(t)).unwrap_or_default();
            let children = if text.is_empty() { Vec::new() } else { vec![Node::Text(text)] };
            aside.children.push(Node::Element(element("p", &[("data-slot", "guide")], children)));
        }
    }
    aside
}
