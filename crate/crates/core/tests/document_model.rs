use html5ever::tendril::TendrilSink;
use markup5ever_rcdom::{Handle, NodeData, RcDom};
use pita_core::dom::{
    parse_html, parse_html_with_warnings, serialize, Element, HtmlDocument, LocatorError, Node, NodeLocator,
};
use pita_testkit::detect_oracle::naive_query;
use pita_testkit::fixtures::planted_elements;
use pita_testkit::{corpus, fixture};
use proptest::prelude::*;

fn parse(src: &str) -> HtmlDocument {
    parse_html(src.as_bytes(), "test").unwrap()
}

/// Elements in pre-order as `(name, attributes)`, skipping the document
/// scaffolding that browser parsers synthesize.
fn ours(doc: &HtmlDocument) -> Vec<(String, Vec<(String, String)>)> {
    fn walk(nodes: &[Node], out: &mut Vec<(String, Vec<(String, String)>)>) {
        for n in nodes {
            if let Node::Element(el) = n {
                if !matches!(el.name.as_str(), "html" | "head" | "body") {
                    out.push((el.name.clone(), el.attrs.iter().map(|a| (a.name.clone(), a.value.clone())).collect()));
                }
                walk(&el.children, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(&doc.children, &mut out);
    out
}

fn reference(src: &str) -> Vec<(String, Vec<(String, String)>)> {
    fn walk(h: &Handle, out: &mut Vec<(String, Vec<(String, String)>)>) {
        if let NodeData::Element { name, attrs, .. } = &h.data {
            let local = name.local.to_string();
            if !matches!(local.as_str(), "html" | "head" | "body") {
                let attrs = attrs.borrow().iter().map(|a| (a.name.local.to_string(), a.value.to_string())).collect();
                out.push((local, attrs));
            }
        }
        for c in h.children.borrow().iter() {
            walk(c, out);
        }
    }
    let dom = html5ever::parse_document(RcDom::default(), Default::default()).one(src);
    let mut out = Vec::new();
    walk(&dom.document, &mut out);
    out
}

fn reference_text(src: &str) -> String {
    fn walk(h: &Handle, out: &mut String) {
        match &h.data {
            NodeData::Text { contents } => out.push_str(&contents.borrow()),
            NodeData::Element { name, .. } if matches!(&*name.local, "script" | "style" | "title" | "head") => return,
            _ => {}
        }
        for c in h.children.borrow().iter() {
            walk(c, out);
        }
    }
    let dom = html5ever::parse_document(RcDom::default(), Default::default()).one(src);
    let mut out = String::new();
    walk(&dom.document, &mut out);
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn our_text(doc: &HtmlDocument) -> String {
    fn walk(nodes: &[Node], out: &mut String) {
        for n in nodes {
            match n {
                Node::Text(t) => out.push_str(&pita_core::dom::decode_entities(t)),
                Node::Element(el) if matches!(el.name.as_str(), "script" | "style" | "title" | "head") => {}
                Node::Element(el) => walk(&el.children, out),
                _ => {}
            }
        }
    }
    let mut out = String::new();
    walk(&doc.children, &mut out);
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[test]
fn minimal_document() {
    let d = parse("<html><body><p>hi</p></body></html>");
    let ps: Vec<&Element> = d.elements().into_iter().map(|(_, e)| e).filter(|e| e.name == "p").collect();
    assert_eq!(ps.len(), 1);
    assert_eq!(ps[0].text_content(), "hi");
}

#[test]
fn misnested_inline_matches_reference_parser() {
    let src = "<p><b>x</p>";
    let (d, warnings) = parse_html_with_warnings(src.as_bytes(), "t").unwrap();
    assert_eq!(ours(&d), reference(src));
    let p = d.element_at(&d.query("p").unwrap()[0].path).unwrap();
    assert_eq!(p.children.len(), 1);
    assert!(matches!(&p.children[0], Node::Element(b) if b.name == "b" && b.text_content() == "x"));
    assert!(warnings.iter().any(|w| w.is_repair()));
}

#[test]
fn simple_repairs_match_reference_parser() {
    for src in [
        "<div><span>a</div>b",
        "<p>one<p>two",
        "<ul><li>a<li>b</ul>",
        "<div><p>x<div>y</div></div>",
        "<input value=a><br/><img src=x alt>",
        "<script>if (a < b) { document.write('</p>') }</script><p>z</p>",
        "<textarea><b>raw</b></textarea>",
        "<x-widget data-a=1><span>k</span></x-widget>",
    ] {
        assert_eq!(ours(&parse(src)), reference(src), "{src}");
    }
}

#[test]
fn fixtures_match_reference_parser() {
    for f in corpus() {
        let html = f.html();
        let d = f.document();
        assert_eq!(ours(&d), reference(&html), "{}", f.file);
        assert_eq!(our_text(&d), reference_text(&html), "{}", f.file);
    }
}

#[test]
fn fixtures_round_trip() {
    for f in corpus() {
        let d = f.document();
        let again = parse(&serialize(&d));
        assert_eq!(again, d, "{}", f.file);
        assert_eq!(serialize(&again), serialize(&d), "{}", f.file);
    }
}

#[test]
fn amazon_fixture_has_buy_now() {
    let d = fixture("amazon_product").document();
    let re = regex::Regex::new("buy-now").unwrap();
    assert!(d.elements().iter().any(|(_, e)| e.attr("id").is_some_and(|v| re.is_match(v))));
}

#[test]
fn quoting_is_normalized() {
    let d = parse("<div title='say \"hi\"' data-x='a&amp;b' hidden></div>");
    assert_eq!(serialize(&d), "<div title=\"say &quot;hi&quot;\" data-x=\"a&amp;b\" hidden></div>");
    assert_eq!(parse(&serialize(&d)), d);
}

#[test]
fn attribute_order_and_text_whitespace_survive() {
    let src = "<div z=1 a=2 m=3>  two  spaces\n\tand tab </div>";
    let out = serialize(&parse(src));
    assert_eq!(out, "<div z=\"1\" a=\"2\" m=\"3\">  two  spaces\n\tand tab </div>");
}

#[test]
fn locator_identity_and_fingerprint_fallback() {
    let d = fixture("amazon_product").document();
    let path = d.query("#buy-now-button").unwrap()[0].path.clone();
    let loc = d.locator_of(&path).unwrap();
    assert_eq!(loc.fingerprint.as_ref().map(|f| (f.name.as_str(), f.value.as_str())), Some(("id", "buy-now-button")));
    assert_eq!(d.resolve(&loc).unwrap(), d.element_at(&path).unwrap());

    let mut moved = d.clone();
    let parent = &path[..path.len() - 1];
    let siblings = &mut moved.element_at_mut(parent).unwrap().children;
    siblings.insert(0, Node::Element(Element::new("div")));
    assert_ne!(moved.element_at(&path).map(|e| e.attr("id")), Some(Some("buy-now-button")));
    let found = moved.resolve(&loc).unwrap();
    assert_eq!(found.attr("id"), Some("buy-now-button"));
}

#[test]
fn out_of_range_path_is_stale() {
    let d = parse("<body><p>a</p><p>b</p><p>c</p></body>");
    let loc = NodeLocator::from_path(vec![0, 99]);
    assert!(matches!(d.resolve(&loc), Err(LocatorError::PathMiss { .. })));
}

#[test]
fn fingerprint_miss_is_distinguished() {
    let d = parse("<div id=a></div><div id=b></div>");
    let mut loc = d.locator_of(&[0]).unwrap();
    loc.path = vec![7];
    let gone = parse("<div id=c></div>");
    assert!(matches!(gone.resolve(&loc), Err(LocatorError::FingerprintMiss { matches: 0, .. })));
    assert_eq!(d.resolve(&loc).unwrap().attr("id"), Some("a"));
}

#[test]
fn query_examples() {
    let d = parse("<div id=x></div><span></span><div id=y></div>");
    let divs = d.query("div").unwrap();
    assert_eq!(divs.iter().map(|l| d.resolve(l).unwrap().attr("id").unwrap()).collect::<Vec<_>>(), ["x", "y"]);
    assert!(d.query("#no-such").unwrap().is_empty());
    assert!(d.query("div >").is_err());

    let netflix = fixture("netflix_home").document();
    let found: Vec<Vec<usize>> = netflix.query("[data-uia]").unwrap().into_iter().map(|l| l.path).collect();
    let planted: Vec<Vec<usize>> = planted_elements(&netflix)
        .into_iter()
        .filter(|(_, p)| p == "automatic-preview")
        .map(|(path, _)| path)
        .collect();
    assert_eq!(found, planted);
}

#[test]
fn query_matches_naive_matcher_on_fixtures() {
    let selectors = [
        "div",
        "[role=feed] div",
        "[data-testid=cellInnerDiv] h2 span",
        "span.a-button-text",
        "#related ytd-compact-video-renderer",
        "[aria-label]",
        "body div div span",
        "*",
    ];
    for f in corpus() {
        let d = f.document();
        for sel in selectors {
            let ours: Vec<Vec<usize>> = d.query(sel).unwrap().into_iter().map(|l| l.path).collect();
            assert_eq!(ours, naive_query(&d, sel), "{} {sel}", f.file);
        }
    }
}

#[test]
fn lossy_input_is_reported_but_not_a_repair() {
    let (d, w) = parse_html_with_warnings(b"<p>caf\xe9</p>", "t").unwrap();
    assert_eq!(w.len(), 1);
    assert!(!w[0].is_repair());
    assert!(d.elements()[0].1.text_content().starts_with("caf"));
    assert!(parse_html(b"", "t").is_err());
}

// Random trees built from tags that never trigger implied closes, so the
// serialized form is a faithful description of the generated tree.
fn arb_tree() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        "[a-z0-9 ,.!?]{1,12}".prop_map(|t| t),
        Just("<br>".to_string()),
        Just("<img src=\"x.png\" alt>".to_string()),
        Just("<!-- note -->".to_string()),
        Just("&amp; &lt;ok&gt;".to_string()),
    ];
    leaf.prop_recursive(5, 64, 6, |inner| {
        (
            prop::sample::select(vec!["div", "span", "section", "article", "em", "aside", "x-card"]),
            prop::collection::vec(
                (
                    prop::sample::select(vec!["id", "class", "data-testid", "name", "title", "data-k"]),
                    "[a-z0-9_-][a-z0-9 _-]{0,5}",
                ),
                0..3,
            ),
            prop::collection::vec(inner, 0..5),
        )
            .prop_map(|(tag, attrs, kids)| {
                let mut seen = std::collections::HashSet::new();
                let attrs: String = attrs
                    .into_iter()
                    .filter(|(n, _)| seen.insert(*n))
                    .map(|(n, v)| format!(" {n}=\"{v}\""))
                    .collect();
                format!("<{tag}{attrs}>{}</{tag}>", kids.concat())
            })
    })
}

fn arb_soup() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec![
            "<div>", "</div>", "<p>", "</p>", "<span class=a>", "</span>", "<li>", "<ul>", "</ul>", "<b>", "</b>",
            "text", " ", "<br>", "<br/>", "<div/>", "<!-- c -->", "<script>x<y</script>", "<title>a</title>", "&amp;",
            "<a href='q'>", "</a>", "<table>", "<tr>", "<td>", "</table>", "<input x=1 x=2>", "</nope>", "<",
        ]),
        1..40,
    )
    .prop_map(|parts| parts.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_serialize_parse_is_stable(src in arb_soup()) {
        let d = parse_html(src.as_bytes(), "p").unwrap();
        let out = serialize(&d);
        if out.is_empty() {
            prop_assert!(d.children.is_empty());
        } else {
            prop_assert_eq!(&parse_html(out.as_bytes(), "p").unwrap(), &d);
        }
    }

    #[test]
    fn generated_trees_round_trip(src in arb_tree()) {
        let d = parse_html(src.as_bytes(), "p").unwrap();
        prop_assert_eq!(serialize(&d), src.clone());
        prop_assert_eq!(parse_html(serialize(&d).as_bytes(), "p").unwrap(), d);
    }

    #[test]
    fn query_is_ordered_and_unique(src in arb_tree(), sel in prop::sample::select(vec!["div", "span", "div span", "[id]", "section [class]", "x-card em", "*"])) {
        let d = parse_html(src.as_bytes(), "p").unwrap();
        let paths: Vec<Vec<usize>> = d.query(sel).unwrap().into_iter().map(|l| l.path).collect();
        prop_assert!(paths.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(paths, naive_query(&d, sel));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn locators_resolve_to_their_element(src in arb_tree(), pick in any::<prop::sample::Index>()) {
        let d = parse_html(format!("<main>{src}</main>").as_bytes(), "p").unwrap();
        let all = d.elements();
        let (path, el) = &all[pick.index(all.len())];
        let loc = d.locator_of(path).unwrap();
        prop_assert_eq!(d.resolve(&loc).unwrap(), *el);
        prop_assert_eq!(&d.resolve_path(&loc).unwrap(), path);
    }
}
