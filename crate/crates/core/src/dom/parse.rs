use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{is_void, Attribute, Element, HtmlDocument, Node, RAW_TEXT_ELEMENTS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty input")]
    Empty,
}

/// Something the parser had to repair or approximate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParseWarning {
    LossyUtf8,
    UnterminatedComment,
    UnterminatedTag,
    DuplicateAttribute { tag: String, name: String },
    StrayEndTag { tag: String },
    ImplicitlyClosed { tag: String },
    UnclosedAtEof { tag: String },
    SelfClosingNonVoid { tag: String },
}

impl ParseWarning {
    /// Lossy decoding is reported but is not a markup repair.
    pub fn is_repair(&self) -> bool {
        !matches!(self, ParseWarning::LossyUtf8)
    }
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::LossyUtf8 => write!(f, "input was not valid UTF-8; decoded lossily"),
            ParseWarning::UnterminatedComment => write!(f, "unterminated comment"),
            ParseWarning::UnterminatedTag => write!(f, "unterminated tag at end of input"),
            ParseWarning::DuplicateAttribute { tag, name } => write!(f, "duplicate attribute {name} on <{tag}>"),
            ParseWarning::StrayEndTag { tag } => write!(f, "stray end tag </{tag}>"),
            ParseWarning::ImplicitlyClosed { tag } => write!(f, "<{tag}> closed implicitly"),
            ParseWarning::UnclosedAtEof { tag } => write!(f, "<{tag}> not closed at end of input"),
            ParseWarning::SelfClosingNonVoid { tag } => write!(f, "self-closing syntax on non-void <{tag}>"),
        }
    }
}

pub fn parse_html(bytes: &[u8], provenance: &str) -> Result<HtmlDocument, ParseError> {
    parse_html_with_warnings(bytes, provenance).map(|(doc, _)| doc)
}

/// Error-tolerant parse. Unclosed and misnested tags are repaired with a small
/// subset of the browser tree-construction rules; unknown elements are kept.
pub fn parse_html_with_warnings(
    bytes: &[u8],
    provenance: &str,
) -> Result<(HtmlDocument, Vec<ParseWarning>), ParseError> {
    if bytes.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut warnings = Vec::new();
    let text = String::from_utf8_lossy(bytes);
    if matches!(text, Cow::Owned(_)) {
        warnings.push(ParseWarning::LossyUtf8);
    }
    let mut builder = TreeBuilder::new();
    Tokenizer::new(&text).run(&mut builder);
    let (children, mut tree_warnings) = builder.finish();
    warnings.append(&mut tree_warnings);
    let provenance = (!provenance.is_empty()).then(|| provenance.to_string());
    Ok((HtmlDocument { children, provenance }, warnings))
}

/// Parses a markup fragment (no implied context) into its top-level nodes.
pub fn parse_fragment(markup: &str) -> (Vec<Node>, Vec<ParseWarning>) {
    let mut builder = TreeBuilder::new();
    Tokenizer::new(markup).run(&mut builder);
    builder.finish()
}

enum Token {
    Start { name: String, attrs: Vec<Attribute>, self_closing: bool, duplicates: Vec<String> },
    End { name: String },
    Text(String),
    Comment(String),
    Doctype(String),
}

struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
    pending: Option<ParseWarning>,
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Tokenizer { src, pos: 0, pending: None }
    }

    fn bytes(&self) -> &'a [u8] {
        self.src.as_bytes()
    }

    /// Splits the input into tokens. A `<` that does not open markup is kept
    /// as `&lt;` so that text merged across a dropped tag can never re-form
    /// markup when serialized.
    fn run(mut self, sink: &mut TreeBuilder) {
        let mut text = String::new();
        let mut text_start = self.pos;
        while self.pos < self.src.len() {
            let b = self.bytes();
            if b[self.pos] != b'<' {
                self.pos += 1;
                continue;
            }
            let next = b.get(self.pos + 1).copied();
            let starts_markup = match next {
                Some(c) if c.is_ascii_alphabetic() => true,
                Some(b'/') => b.get(self.pos + 2).is_some_and(|c| c.is_ascii_alphabetic()),
                Some(b'!') | Some(b'?') => true,
                _ => false,
            };
            text.push_str(&self.src[text_start..self.pos]);
            if !starts_markup {
                text.push_str("&lt;");
                self.pos += 1;
                text_start = self.pos;
                continue;
            }
            if !text.is_empty() {
                sink.token(Token::Text(std::mem::take(&mut text)));
            }
            match self.markup() {
                Some(Token::Start { name, attrs, self_closing, duplicates }) => {
                    let raw = RAW_TEXT_ELEMENTS.contains(&name.as_str());
                    let left_open = sink.token(Token::Start { name: name.clone(), attrs, self_closing, duplicates });
                    if raw && left_open {
                        self.raw_text(&name, sink);
                    }
                }
                Some(tok) => {
                    sink.token(tok);
                }
                None => {
                    sink.warn(ParseWarning::UnterminatedTag);
                    self.pos = self.src.len();
                }
            }
            if let Some(w) = self.pending.take() {
                sink.warn(w);
            }
            text_start = self.pos;
        }
        text.push_str(&self.src[text_start.min(self.src.len())..]);
        if !text.is_empty() {
            sink.token(Token::Text(text));
        }
    }

    /// Consumes raw text up to the matching end tag, which is emitted too.
    fn raw_text(&mut self, name: &str, sink: &mut TreeBuilder) {
        let lower = self.src[self.pos..].to_ascii_lowercase();
        let needle = format!("</{name}");
        let mut search = 0;
        let end = loop {
            match lower[search..].find(&needle) {
                Some(off) => {
                    let at = search + off;
                    let after = lower.as_bytes().get(at + needle.len()).copied();
                    if matches!(after, None | Some(b'>') | Some(b'/')) || after.is_some_and(|c| c.is_ascii_whitespace()) {
                        break Some(at);
                    }
                    search = at + needle.len();
                }
                None => break None,
            }
        };
        match end {
            Some(at) => {
                if at > 0 {
                    sink.token(Token::Text(self.src[self.pos..self.pos + at].to_string()));
                }
                self.pos += at;
                match self.markup() {
                    Some(tok) => {
                        sink.token(tok);
                    }
                    None => {
                        sink.warn(ParseWarning::UnterminatedTag);
                        self.pos = self.src.len();
                    }
                }
            }
            None => {
                if self.pos < self.src.len() {
                    sink.token(Token::Text(self.src[self.pos..].to_string()));
                }
                self.pos = self.src.len();
            }
        }
    }

    /// Reads one markup construct starting at `<`. `None` when input ends
    /// inside a tag.
    fn markup(&mut self) -> Option<Token> {
        let rest = &self.src[self.pos..];
        if let Some(body) = rest.strip_prefix("<!--") {
            return Some(match body.find("-->") {
                Some(end) => {
                    self.pos += 4 + end + 3;
                    Token::Comment(body[..end].to_string())
                }
                None => {
                    self.pos = self.src.len();
                    self.pending = Some(ParseWarning::UnterminatedComment);
                    Token::Comment(body.to_string())
                }
            });
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            let end = rest.find('>')?;
            self.pos += end + 1;
            let inner = &rest[2..end];
            if rest.starts_with("<!") && inner.len() >= 7 && inner[..7].eq_ignore_ascii_case("doctype") {
                return Some(Token::Doctype(inner.to_string()));
            }
            // Bogus comment, e.g. <?xml ...> or <![CDATA[...]>.
            return Some(Token::Comment(rest[1..end].to_string()));
        }
        let is_end = rest.as_bytes()[1] == b'/';
        let mut i = self.pos + if is_end { 2 } else { 1 };
        let b = self.bytes();
        let name_start = i;
        while i < b.len() && !b[i].is_ascii_whitespace() && b[i] != b'/' && b[i] != b'>' {
            i += 1;
        }
        let name = self.src[name_start..i].to_ascii_lowercase();
        let mut attrs: Vec<Attribute> = Vec::new();
        let mut duplicates = Vec::new();
        let mut self_closing = false;
        loop {
            while i < b.len() && b[i].is_ascii_whitespace() {
                i += 1;
            }
            if i >= b.len() {
                return None;
            }
            match b[i] {
                b'>' => {
                    i += 1;
                    break;
                }
                b'/' => {
                    i += 1;
                    if b.get(i) == Some(&b'>') {
                        self_closing = true;
                        i += 1;
                        break;
                    }
                    continue;
                }
                _ => {}
            }
            let attr_start = i;
            while i < b.len() && !b[i].is_ascii_whitespace() && !matches!(b[i], b'/' | b'>' | b'=') {
                i += 1;
            }
            // A lone '=' where a name was expected becomes part of the name.
            if i == attr_start {
                i += 1;
            }
            let attr_name = self.src[attr_start..i].to_ascii_lowercase();
            let mut j = i;
            while j < b.len() && b[j].is_ascii_whitespace() {
                j += 1;
            }
            let mut value = String::new();
            if j < b.len() && b[j] == b'=' {
                j += 1;
                while j < b.len() && b[j].is_ascii_whitespace() {
                    j += 1;
                }
                if j >= b.len() {
                    return None;
                }
                match b[j] {
                    q @ (b'"' | b'\'') => {
                        let close = self.src[j + 1..].find(q as char)?;
                        value = decode_entities(&self.src[j + 1..j + 1 + close]);
                        j = j + 1 + close + 1;
                    }
                    _ => {
                        let vstart = j;
                        while j < b.len() && !b[j].is_ascii_whitespace() && b[j] != b'>' {
                            j += 1;
                        }
                        value = decode_entities(&self.src[vstart..j]);
                    }
                }
                i = j;
            }
            // Keep the first occurrence, as browsers do.
            if attrs.iter().any(|a| a.name == attr_name) {
                duplicates.push(attr_name);
            } else {
                attrs.push(Attribute { name: attr_name, value });
            }
        }
        self.pos = i;
        if is_end {
            return Some(Token::End { name });
        }
        Some(Token::Start { name, attrs, self_closing, duplicates })
    }
}

const P_CLOSERS: &[&str] = &[
    "address", "article", "aside", "blockquote", "center", "details", "dialog", "dir", "div", "dl", "dd", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hgroup",
    "hr", "li", "main", "menu", "nav", "ol", "p", "pre", "section", "summary", "table", "ul",
];

const SCOPE_BOUNDARY: &[&str] =
    &["applet", "button", "caption", "html", "marquee", "object", "table", "td", "template", "th"];

const LIST_BOUNDARY: &[&str] = &[
    "ul", "ol", "dl", "menu", "table", "td", "th", "body", "html", "button", "section", "article", "nav", "aside",
    "header", "footer", "main", "form",
];

const HEADINGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

struct TreeBuilder {
    stack: Vec<Element>,
    warnings: Vec<ParseWarning>,
}

impl TreeBuilder {
    fn new() -> Self {
        TreeBuilder { stack: vec![Element::new("#root")], warnings: Vec::new() }
    }

    fn warn(&mut self, w: ParseWarning) {
        self.warnings.push(w);
    }

    fn top(&mut self) -> &mut Element {
        self.stack.last_mut().expect("root is never popped")
    }

    fn current_name(&self) -> &str {
        &self.stack.last().expect("root").name
    }

    fn append(&mut self, node: Node) {
        let top = self.top();
        if let (Node::Text(new), Some(Node::Text(prev))) = (&node, top.children.last_mut()) {
            prev.push_str(new);
            return;
        }
        top.children.push(node);
    }

    fn pop(&mut self) {
        let el = self.stack.pop().expect("pop above root");
        self.append(Node::Element(el));
    }

    /// Index in the stack of the nearest open `targets` element, searching
    /// downward and giving up at any element in `boundary`.
    fn find_open(&self, targets: &[&str], boundary: &[&str]) -> Option<usize> {
        for (idx, el) in self.stack.iter().enumerate().skip(1).rev() {
            if targets.contains(&el.name.as_str()) {
                return Some(idx);
            }
            if boundary.contains(&el.name.as_str()) {
                return None;
            }
        }
        None
    }

    /// Pops down to and including stack index `idx`. Elements above it were
    /// closed implicitly.
    fn close_to(&mut self, idx: usize, explicit_end: bool) {
        while self.stack.len() > idx + 1 {
            let tag = self.current_name().to_string();
            self.warn(ParseWarning::ImplicitlyClosed { tag });
            self.pop();
        }
        if !explicit_end {
            let tag = self.current_name().to_string();
            self.warn(ParseWarning::ImplicitlyClosed { tag });
        }
        self.pop();
    }

    fn in_foreign_content(&self) -> bool {
        self.stack.iter().any(|e| e.name == "svg" || e.name == "math")
    }

    fn implied_closes(&mut self, name: &str) {
        if P_CLOSERS.contains(&name) {
            match name {
                "li" => {
                    if let Some(idx) = self.find_open(&["li"], LIST_BOUNDARY) {
                        self.close_to(idx, false);
                    }
                }
                "dd" | "dt" => {
                    if let Some(idx) = self.find_open(&["dd", "dt"], LIST_BOUNDARY) {
                        self.close_to(idx, false);
                    }
                }
                _ => {}
            }
            if let Some(idx) = self.find_open(&["p"], SCOPE_BOUNDARY) {
                self.close_to(idx, false);
            }
        }
        if HEADINGS.contains(&name) && HEADINGS.contains(&self.current_name()) {
            let idx = self.stack.len() - 1;
            self.close_to(idx, false);
        }
        match name {
            "a" | "button" => {
                if let Some(idx) = self.find_open(&[name], SCOPE_BOUNDARY) {
                    self.close_to(idx, false);
                }
            }
            "option" | "optgroup" => {
                if self.current_name() == "option" {
                    let idx = self.stack.len() - 1;
                    self.close_to(idx, false);
                }
                if name == "optgroup" && self.current_name() == "optgroup" {
                    let idx = self.stack.len() - 1;
                    self.close_to(idx, false);
                }
            }
            "tr" => {
                if let Some(idx) = self.find_open(&["tr"], &["table", "tbody", "thead", "tfoot"]) {
                    self.close_to(idx, false);
                }
            }
            "td" | "th" => {
                if let Some(idx) = self.find_open(&["td", "th"], &["tr", "table"]) {
                    self.close_to(idx, false);
                }
            }
            "tbody" | "thead" | "tfoot" => {
                if let Some(idx) = self.find_open(&["tbody", "thead", "tfoot"], &["table"]) {
                    self.close_to(idx, false);
                }
            }
            "body" => {
                if let Some(idx) = self.find_open(&["head"], &["html"]) {
                    self.close_to(idx, false);
                }
            }
            _ => {}
        }
    }

    /// Returns true when the start tag left an element open (so raw-text
    /// content should follow).
    fn token(&mut self, tok: Token) -> bool {
        match tok {
            Token::Text(t) => self.append(Node::Text(t)),
            Token::Comment(c) => self.append(Node::Comment(c)),
            Token::Doctype(d) => self.append(Node::Doctype(d)),
            Token::Start { name, attrs, self_closing, duplicates } => {
                for dup in duplicates {
                    self.warn(ParseWarning::DuplicateAttribute { tag: name.clone(), name: dup });
                }
                self.implied_closes(&name);
                let el = Element { name, attrs, children: Vec::new() };
                if is_void(&el.name) {
                    self.append(Node::Element(el));
                    return false;
                }
                if self_closing {
                    if self.in_foreign_content() {
                        self.append(Node::Element(el));
                        return false;
                    }
                    self.warn(ParseWarning::SelfClosingNonVoid { tag: el.name.clone() });
                }
                self.stack.push(el);
                return true;
            }
            Token::End { name } => {
                if is_void(&name) {
                    self.warn(ParseWarning::StrayEndTag { tag: name });
                    return false;
                }
                let open = self.stack.iter().skip(1).rposition(|e| e.name == name).map(|i| i + 1);
                match open {
                    Some(idx) => self.close_to(idx, true),
                    None => self.warn(ParseWarning::StrayEndTag { tag: name }),
                }
            }
        }
        false
    }

    fn finish(mut self) -> (Vec<Node>, Vec<ParseWarning>) {
        while self.stack.len() > 1 {
            let tag = self.current_name().to_string();
            self.warn(ParseWarning::UnclosedAtEof { tag });
            self.pop();
        }
        let root = self.stack.pop().expect("root");
        (root.children, self.warnings)
    }
}

static NAMED_REFERENCES: LazyLock<HashMap<&'static str, &'static str>> = LazyLock::new(|| {
    entities::ENTITIES
        .iter()
        .filter_map(|e| Some((e.entity.strip_prefix('&')?.strip_suffix(';')?, e.characters)))
        .collect()
});

/// Decodes semicolon-terminated named references and all numeric ones.
/// Unknown or unterminated references are left untouched.
pub fn decode_entities(raw: &str) -> String {
    if !raw.contains('&') {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest[1..].find(';').filter(|&n| n > 0 && n <= 32).and_then(|n| {
            let name = &rest[1..1 + n];
            decode_reference(name, &mut out).then_some(n + 2)
        });
        match decoded {
            Some(len) => rest = &rest[len..],
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_reference(name: &str, out: &mut String) -> bool {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok(),
            None => num.parse().ok(),
        };
        return match code.and_then(char::from_u32) {
            Some(c) => {
                out.push(c);
                true
            }
            None => false,
        };
    }
    match NAMED_REFERENCES.get(name) {
        Some(s) => {
            out.push_str(s);
            true
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> (HtmlDocument, Vec<ParseWarning>) {
        parse_html_with_warnings(src.as_bytes(), "t").unwrap()
    }

    fn el<'a>(d: &'a HtmlDocument, path: &[usize]) -> &'a Element {
        d.element_at(path).unwrap_or_else(|| panic!("no element at {path:?}"))
    }

    #[test]
    fn minimal_document() {
        let (d, w) = parse("<html><body><p>hi</p></body></html>");
        assert!(w.is_empty());
        let p = el(&d, &[0, 0, 0]);
        assert_eq!(p.name, "p");
        assert_eq!(p.children, vec![Node::Text("hi".into())]);
    }

    #[test]
    fn misnested_formatting_closes_inside_paragraph() {
        let (d, w) = parse("<p><b>x</p>");
        assert_eq!(d.children.len(), 1);
        let p = el(&d, &[0]);
        assert_eq!(p.name, "p");
        let b = el(&d, &[0, 0]);
        assert_eq!(b.name, "b");
        assert_eq!(b.children, vec![Node::Text("x".into())]);
        assert_eq!(w, vec![ParseWarning::ImplicitlyClosed { tag: "b".into() }]);
    }

    #[test]
    fn empty_input_is_the_only_error() {
        assert_eq!(parse_html(b"", "x"), Err(ParseError::Empty));
        assert!(parse_html(b"<", "x").is_ok());
        assert!(parse_html(b"<div", "x").is_ok());
    }

    #[test]
    fn lossy_utf8_is_reported() {
        let (d, w) = parse_html_with_warnings(b"<p>\xff</p>", "x").unwrap();
        assert_eq!(w, vec![ParseWarning::LossyUtf8]);
        assert_eq!(el(&d, &[0]).children, vec![Node::Text("\u{fffd}".into())]);
    }

    #[test]
    fn attributes_keep_order_and_decode() {
        let (d, _) = parse(r#"<a z='1' href="/x?a=1&amp;b=2" data-x=bare hidden>t</a>"#);
        let a = el(&d, &[0]);
        let names: Vec<_> = a.attrs.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, ["z", "href", "data-x", "hidden"]);
        assert_eq!(a.attr("href"), Some("/x?a=1&b=2"));
        assert_eq!(a.attr("hidden"), Some(""));
    }

    #[test]
    fn duplicate_attribute_keeps_first() {
        let (d, w) = parse(r#"<div id="a" ID="b"></div>"#);
        assert_eq!(el(&d, &[0]).attrs.len(), 1);
        assert_eq!(el(&d, &[0]).attr("id"), Some("a"));
        assert_eq!(w, vec![ParseWarning::DuplicateAttribute { tag: "div".into(), name: "id".into() }]);
    }

    #[test]
    fn script_content_is_opaque() {
        let (d, w) = parse("<script>if (a<b && c>d) { x = '</div>'; }</script><p>y</p>");
        assert!(w.is_empty());
        let s = el(&d, &[0]);
        assert_eq!(s.children, vec![Node::Text("if (a<b && c>d) { x = '</div>'; }".into())]);
        assert_eq!(el(&d, &[1]).name, "p");
    }

    #[test]
    fn void_and_unknown_elements() {
        let (d, w) = parse("<ytd-thing foo=bar><img src=x><br></ytd-thing>");
        assert!(w.is_empty());
        let t = el(&d, &[0]);
        assert_eq!(t.name, "ytd-thing");
        assert_eq!(t.children.len(), 2);
    }

    #[test]
    fn implied_end_tags() {
        let (d, _) = parse("<ul><li>a<li>b</ul><p>x<div>y</div>");
        let ul = el(&d, &[0]);
        assert_eq!(ul.children.len(), 2);
        assert_eq!(el(&d, &[1]).name, "p");
        assert_eq!(el(&d, &[2]).name, "div");
    }

    #[test]
    fn stray_end_tags_are_ignored() {
        let (d, w) = parse("<div>a</span></div>");
        assert_eq!(el(&d, &[0]).children, vec![Node::Text("a".into())]);
        assert_eq!(w, vec![ParseWarning::StrayEndTag { tag: "span".into() }]);
    }

    #[test]
    fn comments_and_doctype() {
        let (d, w) = parse("<!DOCTYPE html><!-- c --><p>x</p>");
        assert!(w.is_empty());
        assert_eq!(d.children[0], Node::Doctype("DOCTYPE html".into()));
        assert_eq!(d.children[1], Node::Comment(" c ".into()));
    }

    #[test]
    fn svg_self_closing_is_honored() {
        let (d, w) = parse(r#"<svg><path d="M0"/><circle r="1"/></svg>"#);
        assert!(w.is_empty());
        assert_eq!(el(&d, &[0]).children.len(), 2);
    }

    #[test]
    fn lone_angle_brackets_are_text() {
        let (d, w) = parse("<p>a < b and c <= d</p>");
        assert!(w.is_empty());
        assert_eq!(el(&d, &[0]).children, vec![Node::Text("a &lt; b and c &lt;= d".into())]);
        assert_eq!(el(&d, &[0]).text_content(), "a < b and c <= d");
    }

    #[test]
    fn bare_angle_cannot_merge_into_a_tag() {
        let (d, _) = parse("<</span>text");
        assert_eq!(d.children, vec![Node::Text("&lt;text".into())]);
    }

    #[test]
    fn entity_decoding() {
        assert_eq!(decode_entities("a&amp;b&lt;&#65;&#x42;&unknown;&"), "a&b<AB&unknown;&");
        assert_eq!(decode_entities("500&deg;F &CounterClockwiseContourIntegral; &NotEqualTilde;"), "500\u{b0}F \u{2233} \u{2242}\u{338}");
    }
}
