//! Compile OpenAPI 2.0/3.x contracts into MCP servers.
//!
//! The pipeline is `ingest` (load + normalize) → `refs` (flatten + validate) →
//! `security` (schemes + `.env` bindings) → `compiler` (tool manifest) →
//! `runtime` (JSON-RPC over stdio). `doctor` lints and repairs contracts and
//! `harness` samples endpoints and evaluates a manifest against a mock upstream.

pub mod cli;
pub mod compiler;
pub mod doctor;
pub mod envfile;
pub mod harness;
pub mod ident;
pub mod ingest;
pub mod pipeline;
pub mod pointer;
pub mod refs;
pub mod runtime;
pub mod schema;
pub mod security;

pub use compiler::{compile_manifest, EndpointDescriptor, ToolManifest, ToolSpec};
pub use ingest::{load_document, parse_document, BaseUrl, RawDocument};
pub use pipeline::{compile_document, CompileError, Compiled};
pub use refs::{flatten, FlattenedContract};
