use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::LazyLock;

use pita_core::dom::{parse_html, HtmlDocument, Node};
use serde::Deserialize;

/// Attribute carried by every element a fixture expects to be detected.
pub const PLANT_ATTRIBUTE: &str = "data-fixture-plant";

#[derive(Debug, Clone, Deserialize)]
pub struct Fixture {
    pub file: String,
    pub site: String,
    /// Expected detection count per pattern id. Empty for control pages.
    pub planted: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
struct Manifest {
    fixtures: Vec<Fixture>,
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

static CORPUS: LazyLock<Vec<Fixture>> = LazyLock::new(|| {
    let raw = std::fs::read_to_string(fixtures_dir().join("manifest.json")).expect("fixture manifest");
    serde_json::from_str::<Manifest>(&raw).expect("manifest parses").fixtures
});

pub fn corpus() -> &'static [Fixture] {
    &CORPUS
}

/// Looks a fixture up by file name, with or without the `.html` suffix.
pub fn fixture(name: &str) -> &'static Fixture {
    let file = if name.ends_with(".html") { name.to_string() } else { format!("{name}.html") };
    CORPUS.iter().find(|f| f.file == file).unwrap_or_else(|| panic!("no fixture {file}"))
}

impl Fixture {
    pub fn path(&self) -> PathBuf {
        fixtures_dir().join(&self.file)
    }

    pub fn html(&self) -> String {
        std::fs::read_to_string(self.path()).unwrap_or_else(|e| panic!("{}: {e}", self.file))
    }

    pub fn document(&self) -> HtmlDocument {
        parse_html(self.html().as_bytes(), &self.file).unwrap_or_else(|e| panic!("{}: {e}", self.file))
    }

    pub fn is_control(&self) -> bool {
        self.planted.is_empty()
    }

    pub fn planted_total(&self) -> usize {
        self.planted.values().sum()
    }

    /// First fixture that plants `pattern_id`.
    pub fn for_pattern(pattern_id: &str) -> &'static Fixture {
        CORPUS
            .iter()
            .find(|f| f.planted.contains_key(pattern_id))
            .unwrap_or_else(|| panic!("no fixture plants {pattern_id}"))
    }
}

/// `(path, pattern_id)` of every element marked as planted, found by a plain
/// recursive walk of the tree.
pub fn planted_elements(doc: &HtmlDocument) -> Vec<(Vec<usize>, String)> {
    fn walk(nodes: &[Node], path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, String)>) {
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Element(el) = node {
                path.push(i);
                if let Some(a) = el.attrs.iter().find(|a| a.name == PLANT_ATTRIBUTE) {
                    out.push((path.clone(), a.value.clone()));
                }
                walk(&el.children, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(&doc.children, &mut Vec::new(), &mut out);
    out
}
