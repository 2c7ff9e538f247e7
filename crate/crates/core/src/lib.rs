//! Rule-driven detection of UX dark patterns in HTML, with reversible
//! counter-patches, per-site enhancement profiles and scrubbed telemetry.
//!
//! The usual flow is [`catalog::Catalog::seed`] (or [`catalog::load_catalog`]),
//! [`dom::parse_html`], [`detector::Detector::scan`], then
//! [`patch::apply_enhancement`] or [`patch::apply_profile`].

pub mod catalog;
pub mod detector;
pub mod dom;
pub mod exec;
pub mod patch;
pub mod profile;
pub mod selector;
pub mod telemetry;
