use std::ops::Range;

use super::{is_void, Element, HtmlDocument, Node};

/// Serializes the document. Attributes keep their parse order and are always
/// double-quoted; text is written back verbatim; every non-void element gets
/// an explicit end tag, so the output re-parses without repairs.
pub fn serialize(doc: &HtmlDocument) -> String {
    let mut w = Writer::default();
    for node in &doc.children {
        w.node(node);
    }
    w.out
}

pub fn serialize_node(node: &Node) -> String {
    let mut w = Writer::default();
    w.node(node);
    w.out
}

/// Serializes the document and reports the byte range occupied by the node at
/// `path`, or `None` if the path does not exist.
pub fn serialize_with_span(doc: &HtmlDocument, path: &[usize]) -> (String, Option<Range<usize>>) {
    let mut w = Writer { target: Some(path.to_vec()), ..Writer::default() };
    for (i, node) in doc.children.iter().enumerate() {
        w.path.push(i);
        w.node(node);
        w.path.pop();
    }
    (w.out, w.span)
}

#[derive(Default)]
struct Writer {
    out: String,
    path: Vec<usize>,
    target: Option<Vec<usize>>,
    span: Option<Range<usize>>,
}

impl Writer {
    fn node(&mut self, node: &Node) {
        let start = self.out.len();
        match node {
            Node::Text(t) => self.out.push_str(t),
            Node::Comment(c) => {
                self.out.push_str("<!--");
                self.out.push_str(c);
                self.out.push_str("-->");
            }
            Node::Doctype(d) => {
                self.out.push_str("<!");
                self.out.push_str(d);
                self.out.push('>');
            }
            Node::Element(el) => self.element(el),
        }
        if self.target.as_deref() == Some(self.path.as_slice()) {
            self.span = Some(start..self.out.len());
        }
    }

    fn element(&mut self, el: &Element) {
        let out = &mut self.out;
        out.push('<');
        out.push_str(&el.name);
        for attr in &el.attrs {
            out.push(' ');
            out.push_str(&attr.name);
            if !attr.value.is_empty() {
                out.push_str("=\"");
                escape_attr(&attr.value, out);
                out.push('"');
            }
        }
        out.push('>');
        if is_void(&el.name) {
            return;
        }
        for (i, child) in el.children.iter().enumerate() {
            self.path.push(i);
            self.node(child);
            self.path.pop();
        }
        self.out.push_str("</");
        self.out.push_str(&el.name);
        self.out.push('>');
    }
}

fn escape_attr(value: &str, out: &mut String) {
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_html;

    fn roundtrip(src: &str) -> String {
        serialize(&parse_html(src.as_bytes(), "t").unwrap())
    }

    #[test]
    fn single_quotes_become_double() {
        assert_eq!(roundtrip("<div class='a b' title='say \"hi\"'>x</div>"), r#"<div class="a b" title="say &quot;hi&quot;">x</div>"#);
    }

    #[test]
    fn text_is_not_reflowed() {
        let src = "<pre>  a\n\n   b &amp; c</pre>\n  <p> x </p>";
        assert_eq!(roundtrip(src), src);
    }

    #[test]
    fn implied_structure_is_made_explicit() {
        assert_eq!(roundtrip("<p><b>x</p>"), "<p><b>x</b></p>");
        assert_eq!(roundtrip("<ul><li>a<li>b</ul>"), "<ul><li>a</li><li>b</li></ul>");
    }

    #[test]
    fn span_covers_target_element() {
        let d = parse_html(b"<div><span id=a>x</span><i>y</i></div>", "t").unwrap();
        let (s, span) = serialize_with_span(&d, &[0, 1]);
        assert_eq!(&s[span.unwrap()], "<i>y</i>");
        let (_, none) = serialize_with_span(&d, &[0, 7]);
        assert!(none.is_none());
        let (s, span) = serialize_with_span(&d, &[0]);
        assert_eq!(&s[span.unwrap()], s.as_str());
    }
}
