//! HTTP service, CLI and model-provider adapters for storyloom workspaces.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod http_provider;
pub mod session;
pub mod store;
