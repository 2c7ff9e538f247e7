//! Command-line and loopback-service front end for `pita-core`.

pub mod commands;
pub mod protocol;
pub mod server;
pub mod service;

pub use protocol::{MessageType, Request, Response};
pub use server::RunningServer;
pub use service::{Service, ServiceConfig};

pub const CATALOG_ENV: &str = "PITA_CATALOG";
pub use pita_core::profile::PROFILE_ENV;
