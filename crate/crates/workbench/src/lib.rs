//! Command-line and HTTP front ends over `dse-core`, with a file-based
//! workspace for user architectures and saved results.

pub mod api;
pub mod cli;
pub mod render;
pub mod server;
pub mod workspace;
