//! Built-in reference architectures and the `.cnn.json` description format.

mod builtins;
mod format;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::arch::{analyze, AnalysisConfig, ArchError, Architecture};

pub use builtins::{
    alexnet, all_builtins, builtin, lenet, lenet_224, nin, squeezenet, vgg19, BUILTIN_NAMES,
};
pub use format::{from_json, from_value, load, save, to_json, to_value, FILE_EXTENSION};

/// An architecture plus figures reported for it elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub architecture: Architecture,
    /// Reported, not computed: accuracy, published model size and the like.
    /// Nothing here feeds into an analysis.
    pub annotations: BTreeMap<String, String>,
    /// Output sizes the entry must reproduce. Empty for user files.
    pub published_shapes: Vec<PublishedShape>,
}

impl CatalogEntry {
    pub fn new(architecture: Architecture) -> Self {
        CatalogEntry {
            architecture,
            annotations: BTreeMap::new(),
            published_shapes: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.architecture.name
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PublishedShape {
    pub layer: String,
    pub channels: u64,
    pub height: u64,
    pub width: u64,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown built-in architecture `{0}` (known: {})", BUILTIN_NAMES.join(", "))]
    UnknownBuiltin(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("{path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{source}")]
    Invalid {
        /// Document location of the offending layer, when loaded from a file.
        path: Option<String>,
        source: ArchError,
    },
    #[error("layer `{layer}` has output {got}, expected {expected}")]
    ShapeCheck {
        layer: String,
        expected: String,
        got: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CatalogError {
    /// Location of the problem inside a description document, if known.
    pub fn field_path(&self) -> Option<&str> {
        match self {
            CatalogError::Field { path, .. } | CatalogError::Parse { path, .. } => Some(path),
            CatalogError::Invalid { path, .. } => path.as_deref(),
            _ => None,
        }
    }
}

impl From<ArchError> for CatalogError {
    fn from(source: ArchError) -> Self {
        CatalogError::Invalid { path: None, source }
    }
}

/// Propagates shapes at batch 1 and compares them with `published_shapes`.
pub fn self_check(entry: &CatalogEntry) -> Result<(), CatalogError> {
    let report = analyze(&entry.architecture, &AnalysisConfig::new(1))?;
    for expected in &entry.published_shapes {
        let Some(row) = report.row(&expected.layer) else {
            return Err(CatalogError::ShapeCheck {
                layer: expected.layer.clone(),
                expected: describe(expected.channels, expected.height, expected.width),
                got: "no such layer".into(),
            });
        };
        let got = row.output_shape;
        if (got.channels, got.height, got.width)
            != (expected.channels, expected.height, expected.width)
        {
            return Err(CatalogError::ShapeCheck {
                layer: expected.layer.clone(),
                expected: describe(expected.channels, expected.height, expected.width),
                got: describe(got.channels, got.height, got.width),
            });
        }
    }
    Ok(())
}

fn describe(c: u64, h: u64, w: u64) -> String {
    format!("{c} channels at {h}x{w}")
}
