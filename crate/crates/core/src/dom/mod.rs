//! Owned HTML node tree with stable element addressing.
//!
//! Documents are plain values: cloning one gives an independent copy, and
//! equality is structural (provenance is ignored). Element paths count every
//! child node, text and comments included, so a path is only meaningful
//! against the exact tree it was taken from. [`NodeLocator`] pairs a path with
//! an optional attribute fingerprint so it can re-anchor after the tree changes.

mod locator;
mod parse;
mod serialize;

use serde::{Deserialize, Serialize};

pub use locator::{Fingerprint, LocatorError, NodeLocator, FINGERPRINT_ATTRIBUTES};
pub(crate) use locator::FingerprintIndex;
pub use parse::{decode_entities, parse_fragment, parse_html, parse_html_with_warnings, ParseError, ParseWarning};
pub use serialize::{serialize, serialize_node, serialize_with_span};

use crate::selector::{Selector, SelectorError};

/// Elements that never have children or an end tag.
pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track",
    "wbr",
];

/// Elements whose content is kept verbatim as a single text node.
pub const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style", "textarea", "title"];

pub fn is_void(name: &str) -> bool {
    VOID_ELEMENTS.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<Attribute>,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Element(Element),
    /// Raw markup text, stored exactly as it appeared in the source.
    Text(String),
    Comment(String),
    Doctype(String),
}

impl Node {
    pub fn as_element(&self) -> Option<&Element> {
        match self {
            Node::Element(el) => Some(el),
            _ => None,
        }
    }

    pub fn as_element_mut(&mut self) -> Option<&mut Element> {
        match self {
            Node::Element(el) => Some(el),
            _ => None,
        }
    }
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element { name: name.into(), attrs: Vec::new(), children: Vec::new() }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|a| a.name == name).map(|a| a.value.as_str())
    }

    pub fn attr_index(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }

    /// Sets an attribute in place, or appends it when absent.
    pub fn set_attr(&mut self, name: &str, value: impl Into<String>) {
        let value = value.into();
        match self.attrs.iter_mut().find(|a| a.name == name) {
            Some(a) => a.value = value,
            None => self.attrs.push(Attribute { name: name.to_string(), value }),
        }
    }

    pub fn remove_attr(&mut self, name: &str) -> Option<(usize, String)> {
        let idx = self.attr_index(name)?;
        Some((idx, self.attrs.remove(idx).value))
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.attr("class").is_some_and(|v| v.split_ascii_whitespace().any(|c| c == class))
    }

    /// Concatenated descendant text, character references decoded per node.
    pub fn text_content(&self) -> String {
        let mut out = String::new();
        collect_text(&self.children, &mut out);
        out
    }
}

fn collect_text(nodes: &[Node], out: &mut String) {
    for node in nodes {
        match node {
            Node::Text(t) => out.push_str(&decode_entities(t)),
            Node::Element(el) => collect_text(&el.children, out),
            _ => {}
        }
    }
}

/// A parsed (and possibly patched) HTML document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HtmlDocument {
    pub children: Vec<Node>,
    pub provenance: Option<String>,
}

impl PartialEq for HtmlDocument {
    fn eq(&self, other: &Self) -> bool {
        self.children == other.children
    }
}

impl Eq for HtmlDocument {}

impl HtmlDocument {
    pub fn new(children: Vec<Node>) -> Self {
        HtmlDocument { children, provenance: None }
    }

    pub fn node_at(&self, path: &[usize]) -> Option<&Node> {
        let (first, rest) = path.split_first()?;
        let mut node = self.children.get(*first)?;
        for idx in rest {
            node = node.as_element()?.children.get(*idx)?;
        }
        Some(node)
    }

    pub fn node_at_mut(&mut self, path: &[usize]) -> Option<&mut Node> {
        let (first, rest) = path.split_first()?;
        let mut node = self.children.get_mut(*first)?;
        for idx in rest {
            node = node.as_element_mut()?.children.get_mut(*idx)?;
        }
        Some(node)
    }

    pub fn element_at(&self, path: &[usize]) -> Option<&Element> {
        self.node_at(path)?.as_element()
    }

    pub fn element_at_mut(&mut self, path: &[usize]) -> Option<&mut Element> {
        self.node_at_mut(path)?.as_element_mut()
    }

    /// Child list that contains the node at `path`; the document root list for
    /// top-level nodes.
    pub fn siblings_mut(&mut self, path: &[usize]) -> Option<&mut Vec<Node>> {
        match path.split_last() {
            None => None,
            Some((_, [])) => Some(&mut self.children),
            Some((_, parent)) => Some(&mut self.element_at_mut(parent)?.children),
        }
    }

    /// Every element in document (pre-)order with its path.
    pub fn elements(&self) -> Vec<(Vec<usize>, &Element)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        walk_elements(&self.children, &mut path, &mut out);
        out
    }

    pub fn element_count(&self) -> usize {
        self.elements().len()
    }

    /// Builds a locator for the element at `path`, capturing a fingerprint
    /// when the element carries a document-unique identifying attribute.
    pub fn locator_of(&self, path: &[usize]) -> Option<NodeLocator> {
        let el = self.element_at(path)?;
        Some(NodeLocator { path: path.to_vec(), fingerprint: locator::unique_fingerprint(self, el) })
    }

    pub fn resolve(&self, loc: &NodeLocator) -> Result<&Element, LocatorError> {
        let path = self.resolve_path(loc)?;
        Ok(self.element_at(&path).expect("resolved path points at an element"))
    }

    pub fn resolve_path(&self, loc: &NodeLocator) -> Result<Vec<usize>, LocatorError> {
        locator::resolve_path(self, loc)
    }

    /// Elements matching `selector`, in document order.
    pub fn query(&self, selector: &str) -> Result<Vec<NodeLocator>, SelectorError> {
        let selector = Selector::parse(selector)?;
        let flat = FlatDocument::new(self);
        let index = FingerprintIndex::new(self);
        Ok((0..flat.len())
            .filter(|&i| selector.matches(&flat, i))
            .map(|i| {
                let path = flat.path(i).to_vec();
                let fingerprint = index.fingerprint_for(flat.element(i));
                NodeLocator { path, fingerprint }
            })
            .collect())
    }
}

fn walk_elements<'a>(nodes: &'a [Node], path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, &'a Element)>) {
    for (i, node) in nodes.iter().enumerate() {
        if let Node::Element(el) = node {
            path.push(i);
            out.push((path.clone(), el));
            walk_elements(&el.children, path, out);
            path.pop();
        }
    }
}

struct FlatEntry<'a> {
    path: Vec<usize>,
    element: &'a Element,
    parent: Option<usize>,
    text: std::ops::Range<usize>,
}

/// Pre-order element table with parent links and per-element text ranges,
/// built once so selector and text checks don't re-walk the tree.
pub struct FlatDocument<'a> {
    entries: Vec<FlatEntry<'a>>,
    text: String,
}

impl<'a> FlatDocument<'a> {
    pub fn new(doc: &'a HtmlDocument) -> Self {
        let mut flat = FlatDocument { entries: Vec::new(), text: String::new() };
        let mut path = Vec::new();
        flat.walk(&doc.children, None, &mut path);
        flat
    }

    fn walk(&mut self, nodes: &'a [Node], parent: Option<usize>, path: &mut Vec<usize>) {
        for (i, node) in nodes.iter().enumerate() {
            match node {
                Node::Text(t) => self.text.push_str(&decode_entities(t)),
                Node::Element(el) => {
                    path.push(i);
                    let idx = self.entries.len();
                    let start = self.text.len();
                    self.entries.push(FlatEntry { path: path.clone(), element: el, parent, text: start..start });
                    self.walk(&el.children, Some(idx), path);
                    self.entries[idx].text.end = self.text.len();
                    path.pop();
                }
                _ => {}
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn element(&self, i: usize) -> &'a Element {
        self.entries[i].element
    }

    pub fn path(&self, i: usize) -> &[usize] {
        &self.entries[i].path
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.entries[i].parent
    }

    /// Strict ancestors, nearest first.
    pub fn ancestors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.parent(i), move |&p| self.parent(p))
    }

    /// Decoded descendant text of element `i`.
    pub fn text(&self, i: usize) -> &str {
        &self.text[self.entries[i].text.clone()]
    }

    pub fn index_of(&self, path: &[usize]) -> Option<usize> {
        self.entries.binary_search_by(|e| e.path.as_slice().cmp(path)).ok()
    }
}
