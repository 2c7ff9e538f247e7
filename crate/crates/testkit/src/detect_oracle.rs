//! Brute-force detection: every rule against every element, with a
//! backtracking selector matcher and no shared indexing structures.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use pita_core::catalog::{Catalog, DetectionRule, RuleKind};
use pita_core::dom::{decode_entities, Element, HtmlDocument, Node};
use regex::{Regex, RegexBuilder};

thread_local! {
    static COMPILED: RefCell<HashMap<String, Regex>> = RefCell::new(HashMap::new());
}

fn regex_matches(pattern: &str, value: &str) -> bool {
    COMPILED.with(|cache| {
        let mut cache = cache.borrow_mut();
        let re = cache
            .entry(pattern.to_string())
            .or_insert_with(|| RegexBuilder::new(pattern).case_insensitive(true).build().expect("rule regex"));
        re.is_match(value)
    })
}

/// One element in pre-order with its full path and the indices of its
/// element ancestors, nearest last.
pub struct Entry<'a> {
    pub path: Vec<usize>,
    pub element: &'a Element,
    pub ancestors: Vec<usize>,
}

pub fn entries(doc: &HtmlDocument) -> Vec<Entry<'_>> {
    fn walk<'a>(nodes: &'a [Node], path: &mut Vec<usize>, stack: &mut Vec<usize>, out: &mut Vec<Entry<'a>>) {
        for (i, n) in nodes.iter().enumerate() {
            if let Node::Element(el) = n {
                path.push(i);
                let me = out.len();
                out.push(Entry { path: path.clone(), element: el, ancestors: stack.clone() });
                stack.push(me);
                walk(&el.children, path, stack, out);
                stack.pop();
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(&doc.children, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

fn text_of(el: &Element) -> String {
    let mut s = String::new();
    for c in &el.children {
        match c {
            Node::Text(t) => s += &decode_entities(t),
            Node::Element(e) => s += &text_of(e),
            _ => {}
        }
    }
    s
}

#[derive(Debug, Clone)]
enum Part {
    Tag(String),
    Id(String),
    Class(String),
    Has(String),
    Eq(String, String),
}

/// Parses the selector subset used by the catalog: whitespace separated
/// compounds of `tag`, `*`, `#id`, `.class`, `[a]` and `[a=v]`.
fn parse_selector(s: &str) -> Vec<Vec<Part>> {
    let mut compounds = Vec::new();
    let mut cur = String::new();
    let mut quote = None;
    for ch in s.chars() {
        match quote {
            Some(q) if ch == q => quote = None,
            Some(_) => {}
            None if ch == '"' || ch == '\'' => quote = Some(ch),
            None if ch.is_whitespace() => {
                if !cur.is_empty() {
                    compounds.push(std::mem::take(&mut cur));
                }
                continue;
            }
            None => {}
        }
        cur.push(ch);
    }
    if !cur.is_empty() {
        compounds.push(cur);
    }
    compounds.iter().map(|c| parse_compound(c)).collect()
}

fn parse_compound(c: &str) -> Vec<Part> {
    let mut parts = Vec::new();
    let bytes: Vec<char> = c.chars().collect();
    let mut i = 0;
    let name = |i: &mut usize| {
        let start = *i;
        while *i < bytes.len() && (bytes[*i].is_alphanumeric() || bytes[*i] == '-' || bytes[*i] == '_') {
            *i += 1;
        }
        bytes[start..*i].iter().collect::<String>()
    };
    if bytes.first() == Some(&'*') {
        i = 1;
    } else {
        let tag = name(&mut i);
        if !tag.is_empty() {
            parts.push(Part::Tag(tag.to_lowercase()));
        }
    }
    while i < bytes.len() {
        let c = bytes[i];
        i += 1;
        match c {
            '#' => parts.push(Part::Id(name(&mut i))),
            '.' => parts.push(Part::Class(name(&mut i))),
            '[' => {
                let close = bytes[i..].iter().position(|&b| b == ']').expect("closing bracket") + i;
                let inner: String = bytes[i..close].iter().collect();
                i = close + 1;
                match inner.split_once('=') {
                    None => parts.push(Part::Has(inner.trim().to_lowercase())),
                    Some((a, v)) => {
                        let v = v.trim().trim_matches(|q| q == '"' || q == '\'');
                        parts.push(Part::Eq(a.trim().to_lowercase(), v.to_string()))
                    }
                }
            }
            other => panic!("oracle selector cannot handle {other:?} in {c}"),
        }
    }
    parts
}

fn compound_matches(parts: &[Part], el: &Element) -> bool {
    let attr = |n: &str| el.attrs.iter().find(|a| a.name == n).map(|a| a.value.as_str());
    parts.iter().all(|p| match p {
        Part::Tag(t) => &el.name == t,
        Part::Id(v) => attr("id") == Some(v),
        Part::Class(v) => attr("class").is_some_and(|c| c.split_whitespace().any(|x| x == v)),
        Part::Has(a) => attr(a).is_some(),
        Part::Eq(a, v) => attr(a) == Some(v),
    })
}

/// Full backtracking match: the last compound on `idx`, earlier compounds on
/// any chain of strict ancestors.
fn selector_matches(sel: &[Vec<Part>], all: &[Entry<'_>], idx: usize) -> bool {
    let Some((last, rest)) = sel.split_last() else { return true };
    if !compound_matches(last, all[idx].element) {
        return false;
    }
    if rest.is_empty() {
        return true;
    }
    all[idx].ancestors.iter().any(|&a| selector_matches(rest, all, a))
}

fn rule_matches(rule: &DetectionRule, all: &[Entry<'_>], idx: usize) -> bool {
    let el = all[idx].element;
    let hit = match rule.kind {
        RuleKind::AttributeRegex => el.attrs.iter().any(|a| a.name == rule.target && regex_matches(&rule.pattern, &a.value)),
        RuleKind::InnerTextContains => text_of(el).contains(&rule.pattern),
        RuleKind::StructuralSelector => selector_matches(&parse_selector(&rule.target), all, idx),
    };
    hit && match &rule.scope {
        None => true,
        Some(scope) => {
            let sel = parse_selector(scope);
            all[idx].ancestors.iter().any(|&a| selector_matches(&sel, all, a))
        }
    }
}

/// Every `(path, pattern_id)` pair where some rule of a pattern for `site`
/// matches, minus pairs whose element has a matching ancestor for the same
/// pattern.
pub fn brute_force_scan(doc: &HtmlDocument, catalog: &Catalog, site: &str) -> BTreeSet<(Vec<usize>, String)> {
    let all = entries(doc);
    let mut raw: Vec<(usize, &str)> = Vec::new();
    for p in catalog.patterns().iter().filter(|p| p.site == site) {
        for idx in 0..all.len() {
            if p.rules.iter().any(|r| rule_matches(r, &all, idx)) {
                raw.push((idx, &p.id));
            }
        }
    }
    raw.iter()
        .filter(|(idx, pid)| !raw.iter().any(|(other, q)| q == pid && all[*idx].ancestors.contains(other)))
        .map(|(idx, pid)| (all[*idx].path.clone(), pid.to_string()))
        .collect()
}

/// Whether any rule of `pattern_id` matches the element at `path`.
pub fn element_satisfies(doc: &HtmlDocument, catalog: &Catalog, pattern_id: &str, path: &[usize]) -> bool {
    let all = entries(doc);
    let Some(idx) = all.iter().position(|e| e.path == path) else { return false };
    let p = catalog.pattern(pattern_id).expect("known pattern");
    p.rules.iter().any(|r| rule_matches(r, &all, idx))
}

/// Matches `selector` against every element, returning paths in document
/// order.
pub fn naive_query(doc: &HtmlDocument, selector: &str) -> Vec<Vec<usize>> {
    let all = entries(doc);
    let sel = parse_selector(selector);
    (0..all.len()).filter(|&i| selector_matches(&sel, &all, i)).map(|i| all[i].path.clone()).collect()
}
