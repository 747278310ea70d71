//! Command line, project config, corpus store and HTTP API around the
//! choreography engine.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod store;

pub use config::ProjectConfig;
pub use error::{Result, ServiceError};
