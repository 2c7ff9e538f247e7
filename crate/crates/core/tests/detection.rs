use std::collections::BTreeSet;
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use pita_core::catalog::{Catalog, DarkAttribute, DetectionRule};
use pita_core::detector::{match_rule, scan, scan_report, Detection, Detector};
use pita_core::dom::{parse_html, Element, HtmlDocument, Node};
use pita_core::exec::Execution;
use pita_testkit::detect_oracle::{brute_force_scan, element_satisfies};
use pita_testkit::fixtures::planted_elements;
use pita_testkit::{corpus, fixture};
use proptest::prelude::*;

static CATALOG: LazyLock<Catalog> = LazyLock::new(Catalog::seed);
static DETECTOR: LazyLock<Detector<'static>> = LazyLock::new(|| Detector::new(&CATALOG).unwrap());

fn as_set(dets: &[Detection]) -> BTreeSet<(Vec<usize>, String)> {
    dets.iter().map(|d| (d.locator.path.clone(), d.pattern_id.clone())).collect()
}

#[test]
fn corpus_matches_brute_force_with_full_recall() {
    let c = Catalog::seed();
    for f in corpus() {
        let d = f.document();
        let started = Instant::now();
        let dets = scan(&d, &c, &f.site);
        assert!(started.elapsed() < Duration::from_secs(1), "{} took {:?}", f.file, started.elapsed());

        assert_eq!(as_set(&dets), brute_force_scan(&d, &c, &f.site), "{}", f.file);
        assert_eq!(as_set(&dets).len(), dets.len(), "{}: duplicate (pattern, path)", f.file);

        let planted: BTreeSet<(Vec<usize>, String)> = planted_elements(&d).into_iter().collect();
        assert_eq!(as_set(&dets), planted, "{}", f.file);
        for (pattern, n) in &f.planted {
            assert_eq!(dets.iter().filter(|x| &x.pattern_id == pattern).count(), *n, "{} {pattern}", f.file);
        }
    }
}

#[test]
fn controls_are_clean_for_every_site() {
    let c = Catalog::seed();
    let controls: Vec<_> = corpus().iter().filter(|f| f.is_control()).collect();
    assert!(controls.len() >= 10);
    for f in controls {
        let d = f.document();
        for site in c.sites() {
            assert!(scan(&d, &c, site).is_empty(), "{} on {site}", f.file);
            assert!(brute_force_scan(&d, &c, site).is_empty(), "{} on {site}", f.file);
        }
    }
}

#[test]
fn every_pattern_has_a_planted_fixture() {
    let c = Catalog::seed();
    for p in c.patterns() {
        let f = pita_testkit::Fixture::for_pattern(&p.id);
        assert_eq!(f.site, p.site);
    }
}

#[test]
fn detections_are_sound_and_resolve() {
    let c = Catalog::seed();
    for f in corpus() {
        let d = f.document();
        for det in scan(&d, &c, &f.site) {
            let el = d.resolve(&det.locator).expect("locator resolves");
            assert_eq!(el, d.element_at(&det.locator.path).unwrap());
            assert!(element_satisfies(&d, &c, &det.pattern_id, &det.locator.path), "{} {}", f.file, det.pattern_id);
            let rule = &c.pattern(&det.pattern_id).unwrap().rules[det.rule_index];
            assert!(match_rule(rule, &d, &det.locator).unwrap());
            assert!(det.matched_excerpt.chars().count() <= 120);
            assert_eq!(det.site, f.site);
        }
    }
}

#[test]
fn scanning_is_deterministic_across_modes() {
    let c = Catalog::seed();
    let detector = Detector::new(&c).unwrap();
    for f in corpus() {
        let d = f.document();
        let a = detector.scan_with(&d, &f.site, Execution::Sequential);
        let b = detector.scan_with(&d, &f.site, Execution::Parallel);
        assert_eq!(a, b, "{}", f.file);
        assert_eq!(a, detector.scan(&d, &f.site));
        let ordered: Vec<(Vec<usize>, String)> = a.iter().map(|x| (x.locator.path.clone(), x.pattern_id.clone())).collect();
        let mut sorted = ordered.clone();
        sorted.sort();
        assert_eq!(ordered, sorted);
    }
    let docs: Vec<HtmlDocument> = corpus().iter().filter(|f| f.site == "amazon").map(|f| f.document()).collect();
    assert_eq!(
        detector.scan_batch(&docs, "amazon", Execution::Sequential),
        detector.scan_batch(&docs, "amazon", Execution::Parallel)
    );
}

#[test]
fn amazon_product_has_exactly_one_buy_now() {
    let c = Catalog::seed();
    let dets = scan(&fixture("amazon_product").document(), &c, "amazon");
    assert_eq!(dets.len(), 1);
    assert_eq!(dets[0].pattern_id, "prominent-buy-now");
    assert!(scan(&fixture("amazon_product_control").document(), &c, "amazon").is_empty());
}

#[test]
fn twitter_has_three_suggested_tweets() {
    let c = Catalog::seed();
    let dets = scan(&fixture("twitter_home").document(), &c, "twitter");
    assert_eq!(dets.iter().filter(|d| d.pattern_id == "disguised-suggested-tweets").count(), 3);
}

#[test]
fn unknown_site_is_empty() {
    let c = Catalog::seed();
    assert!(scan(&fixture("amazon_product").document(), &c, "example.org").is_empty());
}

#[test]
fn match_rule_examples() {
    let d = fixture("amazon_product").document();
    let loc = d.locator_of(&d.query("#buy-now-button").unwrap()[0].path).unwrap();
    assert!(match_rule(&DetectionRule::attribute_regex("id", "buy-?now"), &d, &loc).unwrap());
    assert!(!match_rule(&DetectionRule::inner_text("Sponsored"), &d, &loc).unwrap());

    let fb = fixture("facebook_feed_control").document();
    let rail = fb.locator_of(&fb.query("[role=complementary]").unwrap()[0].path).unwrap();
    assert!(match_rule(&DetectionRule::inner_text("Sponsored"), &fb, &rail).unwrap());
    assert!(!match_rule(&DetectionRule::inner_text("Sponsored").within("[role=feed]"), &fb, &rail).unwrap());
}

#[test]
fn report_for_amazon_product() {
    let c = Catalog::seed();
    let dets = scan(&fixture("amazon_product").document(), &c, "amazon");
    let report = scan_report(&dets, &c).unwrap();
    assert_eq!(report.total, 1);
    let g = &report.groups[0];
    assert_eq!(g.name, "Prominent \"Buy Now\" Button");
    assert_eq!(g.attributes, BTreeSet::from([DarkAttribute::Asymmetric, DarkAttribute::Covert]));
    assert_eq!(g.count, 1);
    assert!(report.to_text().contains("Prominent \"Buy Now\" Button"));

    let empty = scan_report(&[], &c).unwrap();
    assert!(empty.is_empty());
    assert_eq!(empty.to_text(), "0 dark patterns detected\n");
}

fn filler(i: usize) -> Node {
    let mut el = Element::new(["div", "span", "section", "li"][i % 4]);
    el.set_attr("class", format!("filler-{i}"));
    el.set_attr("data-note", "neutral");
    Node::Element(el)
}

/// Inserts `n` fillers at pseudo-random element positions chosen by `seeds`.
fn sprinkle(doc: &HtmlDocument, seeds: &[(usize, usize)]) -> HtmlDocument {
    let mut d = doc.clone();
    for (i, &(pick, slot)) in seeds.iter().enumerate() {
        let paths: Vec<Vec<usize>> = d
            .elements()
            .into_iter()
            .filter(|(_, e)| !pita_core::dom::is_void(&e.name) && !pita_core::dom::RAW_TEXT_ELEMENTS.contains(&e.name.as_str()))
            .map(|(p, _)| p)
            .collect();
        let target = &paths[pick % paths.len()];
        let kids = &mut d.element_at_mut(target).unwrap().children;
        let at = slot % (kids.len() + 1);
        kids.insert(at, filler(i));
    }
    d
}

fn fingerprints(dets: &[Detection]) -> Vec<(String, Option<(String, String)>)> {
    let mut v: Vec<_> = dets
        .iter()
        .map(|d| (d.pattern_id.clone(), d.locator.fingerprint.as_ref().map(|f| (f.name.clone(), f.value.clone()))))
        .collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn non_matching_insertions_keep_detections(
        which in 0usize..10,
        seeds in prop::collection::vec((any::<usize>(), any::<usize>()), 1..12),
    ) {
        let planted: Vec<_> = corpus().iter().filter(|f| !f.is_control()).collect();
        let f = planted[which % planted.len()];
        let d = f.document();
        let before = DETECTOR.scan(&d, &f.site);
        let after = DETECTOR.scan(&sprinkle(&d, &seeds), &f.site);
        prop_assert_eq!(fingerprints(&before), fingerprints(&after));
    }
}

fn arb_page() -> impl Strategy<Value = String> {
    let leaf = prop::sample::select(vec![
        "<span id=\"buy-now\">Buy</span>",
        "<input id=\"BUY-NOW-x\" type=\"submit\">",
        "<div data-component-type=\"sp-sponsored-result\">ad</div>",
        "<span class=\"a-price savingsPercentage\">-20%</span>",
        "<span>Sponsored</span>",
        "<b>Spon</b><b>sored</b>",
        "<h2>Popular videos</h2>",
        "<div aria-label=\"Reels\"></div>",
        "<div aria-label=\"Timeline: Trending now\"></div>",
        "<ytd-watch-next-secondary-results-renderer></ytd-watch-next-secondary-results-renderer>",
        "<ytd-rich-grid-renderer data-inline-preview-enabled=\"true\"></ytd-rich-grid-renderer>",
        "<video data-uia=\"billboard-motion-video\" autoplay></video>",
        "<div data-uia=\"controls-time-remaining\">1:00</div>",
        "<p>plain text</p>",
        "suggested for you",
        "Suggested for you",
    ])
    .prop_map(str::to_string);
    leaf.prop_recursive(4, 48, 5, |inner| {
        (
            prop::sample::select(vec!["<div>", "<div role=\"feed\">", "<section>", "<div id=\"limited-time-deals\">", "<article>"]),
            prop::collection::vec(inner, 0..5),
        )
            .prop_map(|(open, kids)| {
                let tag = &open[1..open.find([' ', '>']).unwrap()];
                format!("{open}{}</{tag}>", kids.concat())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_pages_match_brute_force(page in arb_page()) {
        let d = parse_html(format!("<body>{page}</body>").as_bytes(), "gen").unwrap();
        for site in CATALOG.sites() {
            let dets = DETECTOR.scan(&d, site);
            prop_assert_eq!(as_set(&dets), brute_force_scan(&d, &CATALOG, site));
            prop_assert_eq!(as_set(&dets).len(), dets.len());
        }
    }
}
