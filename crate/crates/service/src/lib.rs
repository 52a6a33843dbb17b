//! HTTP service and command-line front end for the Graph-RAG engine.

// `ApiError` is returned by value on every request path; boxing it buys nothing.
#![allow(clippy::result_large_err)]

pub mod api;
pub mod config;
pub mod metrics;
pub mod routes;
pub mod service;

pub use config::ServiceConfig;
pub use routes::router;
pub use service::Service;
