//! A deliberately small CSS selector subset: type selectors, `*`, `#id`,
//! `.class`, `[attr]`, `[attr=value]` and the descendant combinator.

use std::fmt;

use thiserror::Error;

use crate::dom::{Element, FlatDocument};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid selector {selector:?} at byte {offset}: {reason}")]
pub struct SelectorError {
    pub selector: String,
    pub offset: usize,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Simple {
    Id(String),
    Class(String),
    Has(String),
    Equals(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Compound {
    tag: Option<String>,
    parts: Vec<Simple>,
}

impl Compound {
    fn matches(&self, el: &Element) -> bool {
        if self.tag.as_deref().is_some_and(|t| t != el.name) {
            return false;
        }
        self.parts.iter().all(|p| match p {
            Simple::Id(id) => el.attr("id") == Some(id.as_str()),
            Simple::Class(c) => el.has_class(c),
            Simple::Has(a) => el.attr(a).is_some(),
            Simple::Equals(a, v) => el.attr(a) == Some(v.as_str()),
        })
    }
}

/// Parsed selector; compounds are stored left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    source: String,
    compounds: Vec<Compound>,
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_'
}

impl Selector {
    pub fn parse(source: &str) -> Result<Selector, SelectorError> {
        let err = |offset: usize, reason: &'static str| SelectorError { selector: source.to_string(), offset, reason };
        let chars: Vec<(usize, char)> = source.char_indices().collect();
        let mut i = 0;
        let mut compounds = Vec::new();
        let ident = |i: &mut usize| -> String {
            let start = *i;
            while *i < chars.len() && is_ident_char(chars[*i].1) {
                *i += 1;
            }
            chars[start..*i].iter().map(|(_, c)| c).collect()
        };
        loop {
            while i < chars.len() && chars[i].1.is_whitespace() {
                i += 1;
            }
            if i >= chars.len() {
                break;
            }
            let mut compound = Compound::default();
            let begin = i;
            if chars[i].1 == '*' {
                i += 1;
            } else if is_ident_char(chars[i].1) {
                compound.tag = Some(ident(&mut i).to_ascii_lowercase());
            }
            while i < chars.len() && !chars[i].1.is_whitespace() {
                let (off, c) = chars[i];
                i += 1;
                match c {
                    '#' | '.' => {
                        let name = ident(&mut i);
                        if name.is_empty() {
                            return Err(err(off, "expected a name"));
                        }
                        compound.parts.push(if c == '#' { Simple::Id(name) } else { Simple::Class(name) });
                    }
                    '[' => {
                        while i < chars.len() && chars[i].1.is_whitespace() {
                            i += 1;
                        }
                        let name = ident(&mut i).to_ascii_lowercase();
                        if name.is_empty() {
                            return Err(err(off, "expected an attribute name"));
                        }
                        while i < chars.len() && chars[i].1.is_whitespace() {
                            i += 1;
                        }
                        match chars.get(i).map(|c| c.1) {
                            Some(']') => {
                                i += 1;
                                compound.parts.push(Simple::Has(name));
                            }
                            Some('=') => {
                                i += 1;
                                while i < chars.len() && chars[i].1.is_whitespace() {
                                    i += 1;
                                }
                                let value = match chars.get(i).map(|c| c.1) {
                                    Some(q @ ('"' | '\'')) => {
                                        i += 1;
                                        let start = i;
                                        while i < chars.len() && chars[i].1 != q {
                                            i += 1;
                                        }
                                        if i >= chars.len() {
                                            return Err(err(off, "unterminated quoted value"));
                                        }
                                        let v: String = chars[start..i].iter().map(|(_, c)| c).collect();
                                        i += 1;
                                        v
                                    }
                                    _ => {
                                        let v = ident(&mut i);
                                        if v.is_empty() {
                                            return Err(err(off, "expected an attribute value"));
                                        }
                                        v
                                    }
                                };
                                while i < chars.len() && chars[i].1.is_whitespace() {
                                    i += 1;
                                }
                                if chars.get(i).map(|c| c.1) != Some(']') {
                                    return Err(err(off, "expected ']'"));
                                }
                                i += 1;
                                compound.parts.push(Simple::Equals(name, value));
                            }
                            _ => return Err(err(off, "unsupported attribute operator")),
                        }
                    }
                    _ => return Err(err(off, "unsupported syntax")),
                }
            }
            if i == begin {
                return Err(err(chars[begin].0, "empty compound selector"));
            }
            compounds.push(compound);
        }
        if compounds.is_empty() {
            return Err(err(0, "empty selector"));
        }
        Ok(Selector { source: source.to_string(), compounds })
    }

    /// Whether flat element `i` matches. Descendant-only chains can be matched
    /// greedily against the nearest qualifying ancestor.
    pub fn matches(&self, flat: &FlatDocument<'_>, i: usize) -> bool {
        let (last, rest) = self.compounds.split_last().expect("non-empty");
        if !last.matches(flat.element(i)) {
            return false;
        }
        let mut pending = rest.iter().rev().peekable();
        for anc in flat.ancestors(i) {
            match pending.peek() {
                None => break,
                Some(c) if c.matches(flat.element(anc)) => {
                    pending.next();
                }
                Some(_) => {}
            }
        }
        pending.peek().is_none()
    }

    /// True when some strict ancestor of `i` matches the whole selector.
    pub fn matches_ancestor_of(&self, flat: &FlatDocument<'_>, i: usize) -> bool {
        flat.ancestors(i).any(|a| self.matches(flat, a))
    }
}
