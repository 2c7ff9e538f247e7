#![allow(dead_code)]

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use pita_core::catalog::Catalog;
use pita_core::dom::{parse_html, serialize, serialize_with_span, HtmlDocument};
use pita_gateway::protocol::*;
use pita_gateway::{RunningServer, Service, ServiceConfig};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub struct Env {
    pub dir: tempfile::TempDir,
}

impl Env {
    pub fn new() -> Self {
        Env { dir: tempfile::tempdir().unwrap() }
    }

    pub fn profile(&self) -> PathBuf {
        self.dir.path().join("profile.json")
    }

    pub fn logs(&self) -> PathBuf {
        self.dir.path().join("logs")
    }

    pub fn config(&self) -> ServiceConfig {
        ServiceConfig {
            profile_path: Some(self.profile()),
            log_dir: Some(self.logs()),
            ..ServiceConfig::new(Catalog::seed())
        }
    }

    pub async fn start(&self) -> RunningServer {
        RunningServer::start(Service::new(self.config()), SocketAddr::from((Ipv4Addr::LOCALHOST, 0))).await.unwrap()
    }
}

pub struct Client {
    pub http: reqwest::Client,
    pub url: String,
    next: u64,
}

impl Client {
    pub fn new(server: &RunningServer) -> Self {
        Client { http: reqwest::Client::new(), url: server.url(), next: 0 }
    }

    pub async fn raw(&self, body: impl Into<reqwest::Body>) -> (u16, String) {
        let r = self.http.post(&self.url).body(body).send().await.unwrap();
        (r.status().as_u16(), r.text().await.unwrap())
    }

    /// Sends one message and checks the envelope: matching id, version, and
    /// exactly one of result / error.
    pub async fn send(&mut self, kind: MessageType, payload: impl Serialize, consent: Option<bool>) -> Response {
        self.next += 1;
        let id = format!("req-{}", self.next);
        let mut req = Request::new(kind, &id, payload);
        req.consent = consent;
        let (status, text) = self.raw(serde_json::to_vec(&req).unwrap()).await;
        assert_eq!(status, 200, "{text}");
        let v: Value = serde_json::from_str(&text).unwrap();
        check_envelope(&v, &id);
        serde_json::from_value(v).unwrap()
    }

    pub async fn ok<T: DeserializeOwned>(&mut self, kind: MessageType, payload: impl Serialize) -> T {
        let r = self.send(kind, payload, None).await;
        typed(&r)
    }
}

pub fn check_envelope(v: &Value, id: &str) {
    let obj = v.as_object().expect("response is an object");
    assert_eq!(obj["version"], PROTOCOL_VERSION);
    assert_eq!(obj["request_id"], id);
    match obj["status"].as_str() {
        Some("ok") => assert!(obj.contains_key("result") && !obj.contains_key("error"), "{v}"),
        Some("error") => {
            let e = &obj["error"];
            assert!(e["code"].is_string() && e["message"].is_string() && !obj.contains_key("result"), "{v}");
        }
        other => panic!("bad status {other:?} in {v}"),
    }
}

pub fn typed<T: DeserializeOwned>(r: &Response) -> T {
    let result = r.result().unwrap_or_else(|| panic!("expected ok, got {r:?}"));
    serde_path_to_error::deserialize(result).unwrap_or_else(|e| panic!("result does not match its schema: {e}"))
}

/// Splices `fragment` over the element at `path`, the way a client holding
/// the live DOM would.
pub fn splice(doc: &HtmlDocument, path: &[usize], fragment: &str) -> String {
    let (text, span) = serialize_with_span(doc, path);
    let span = span.expect("element exists");
    format!("{}{}{}", &text[..span.start], fragment, &text[span.end..])
}

pub fn page(name: &str) -> (String, HtmlDocument) {
    let f = pita_testkit::fixture(name);
    let doc = f.document();
    (serialize(&doc), doc)
}

pub fn reparse(html: &str) -> HtmlDocument {
    parse_html(html.as_bytes(), "spliced").unwrap()
}

pub fn read_all(dir: &Path) -> String {
    let Ok(entries) = std::fs::read_dir(dir) else { return String::new() };
    let mut paths: Vec<_> = entries.map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect()
}
