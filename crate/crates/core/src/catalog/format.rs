//! JSON architecture descriptions (`.cnn.json`).
//!
//! ```json
//! {
//!   "name": "tiny",
//!   "input": { "channels": 3, "height": 32, "width": 32 },
//!   "layers": [
//!     { "name": "data", "kind": "input", "inputs": [] },
//!     { "name": "conv1", "kind": "convolution", "filters": 16,
//!       "filter": [3, 3], "stride": 1, "pad": [1, 1], "inputs": ["data"] }
//!   ],
//!   "metadata": {}
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::arch::{
    analyze, AnalysisConfig, ArchError, Architecture, ConvParams, LayerKind, LayerOp, LayerSpec,
    Rounding, TensorShape, Window,
};

use super::{CatalogEntry, CatalogError, PublishedShape};

pub const FILE_EXTENSION: &str = ".cnn.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    name: String,
    input: InputDoc,
    layers: Vec<LayerDoc>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    annotations: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    published_shapes: Vec<ShapeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch: Option<u64>,
    channels: u64,
    height: u64,
    width: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    name: String,
    kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filters: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    filter: Option<[u64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pad: Option<[u64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rounding: Option<Rounding>,
    #[serde(default)]
    inputs: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeDoc {
    layer: String,
    channels: u64,
    height: u64,
    width: u64,
}

/// Canonical JSON value of an entry: fixed key order, optional fields only
/// when they differ from their defaults.
pub fn to_value(entry: &CatalogEntry) -> Value {
    serde_json::to_value(to_document(entry)).expect("document serializes")
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn to_json(entry: &CatalogEntry) -> String {
    let mut s = serde_json::to_string_pretty(&to_document(entry)).expect("document serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<CatalogEntry, CatalogError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CatalogError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: strip_position(&inner.to_string()),
        }
    })?;
    from_document(doc)
}

/// Like [`from_json`] for an already-parsed value (HTTP bodies).
pub fn from_value(value: Value) -> Result<CatalogEntry, CatalogError> {
    let doc: Document =
        serde_path_to_error::deserialize(value).map_err(|e| CatalogError::Field {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
    from_document(doc)
}

pub fn load(path: impl AsRef<Path>) -> Result<CatalogEntry, CatalogError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json(&text)
}

pub fn save(entry: &CatalogEntry, path: impl AsRef<Path>) -> Result<(), CatalogError> {
    let path = path.as_ref();
    fs::write(path, to_json(entry)).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn to_document(entry: &CatalogEntry) -> Document {
    let arch = &entry.architecture;
    let s = arch.input_shape;
    Document {
        name: arch.name.clone(),
        input: InputDoc {
            batch: (s.batch != 1).then_some(s.batch),
            channels: s.channels,
            height: s.height,
            width: s.width,
        },
        layers: arch.layers.iter().map(layer_doc).collect(),
        metadata: arch.metadata.clone(),
        annotations: entry.annotations.clone(),
        published_shapes: entry
            .published_shapes
            .iter()
            .map(|p| ShapeDoc {
                layer: p.layer.clone(),
                channels: p.channels,
                height: p.height,
                width: p.width,
            })
            .collect(),
    }
}

fn layer_doc(layer: &LayerSpec) -> LayerDoc {
    let mut doc = LayerDoc {
        name: layer.name.clone(),
        kind: layer.kind(),
        filters: layer.op.num_filters(),
        filter: None,
        stride: None,
        pad: None,
        groups: None,
        rounding: None,
        inputs: layer.inputs.clone(),
    };
    if let Some(w) = layer.op.window() {
        doc.filter = Some([w.filter_h, w.filter_w]);
        doc.stride = Some(w.stride);
        doc.pad = Some([w.pad_h, w.pad_w]);
        doc.rounding = (w.rounding != Rounding::Default).then_some(w.rounding);
    }
    if let LayerOp::Convolution(c) = &layer.op {
        doc.groups = (c.groups != 1).then_some(c.groups);
    }
    doc
}

fn field(path: String, message: impl Into<String>) -> CatalogError {
    CatalogError::Field {
        path,
        message: message.into(),
    }
}

fn from_document(doc: Document) -> Result<CatalogEntry, CatalogError> {
    let input = TensorShape {
        batch: doc.input.batch.unwrap_or(1),
        channels: doc.input.channels,
        height: doc.input.height,
        width: doc.input.width,
    };
    if input.validate().is_err() {
        return Err(field(
            "input".into(),
            "batch, channels, height and width must all be at least 1",
        ));
    }

    let layers = doc
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| layer_spec(i, l))
        .collect::<Result<Vec<_>, _>>()?;
    let mut arch = Architecture::new(doc.name, input, layers);
    arch.metadata = doc.metadata;
    // Shape errors only surface during propagation, so run one pass.
    if let Err(source) = analyze(&arch, &AnalysisConfig::new(1)) {
        let path = offending_layer(&source)
            .and_then(|name| arch.position(name).map(|i| format!("layers[{i}]")));
        return Err(CatalogError::Invalid { path, source });
    }

    Ok(CatalogEntry {
        architecture: arch,
        annotations: doc.annotations,
        published_shapes: doc
            .published_shapes
            .into_iter()
            .map(|s| PublishedShape {
                layer: s.layer,
                channels: s.channels,
                height: s.height,
                width: s.width,
            })
            .collect(),
    })
}

fn offending_layer(err: &ArchError) -> Option<&str> {
    match err {
        ArchError::InvalidLayer { layer, .. }
        | ArchError::Arity { layer, .. }
        | ArchError::FilterTooLarge { layer, .. }
        | ArchError::ShapeMismatch { layer, .. }
        | ArchError::UnknownPredecessor { layer, .. } => Some(layer),
        ArchError::DuplicateLayer(layer) | ArchError::Unreachable(layer) => Some(layer),
        ArchError::Cycle(members) => members.first().map(String::as_str),
        _ => None,
    }
}

/// Builds one layer, enforcing that kind-specific fields appear exactly
/// where the kind uses them.
fn layer_spec(i: usize, doc: LayerDoc) -> Result<LayerSpec, CatalogError> {
    let at = |f: &str| format!("layers[{i}].{f}");
    let kind = doc.kind;
    let windowed = matches!(
        kind,
        LayerKind::Convolution | LayerKind::MaxPool | LayerKind::AvgPool
    );
    let filtered = matches!(kind, LayerKind::Convolution | LayerKind::FullyConnected);

    let unexpected = |name: &str, present: bool, allowed: bool| {
        if present && !allowed {
            Err(field(at(name), format!("not allowed on {kind} layers")))
        } else {
            Ok(())
        }
    };
    unexpected("filters", doc.filters.is_some(), filtered)?;
    unexpected("filter", doc.filter.is_some(), windowed)?;
    unexpected("stride", doc.stride.is_some(), windowed)?;
    unexpected("pad", doc.pad.is_some(), windowed)?;
    unexpected("rounding", doc.rounding.is_some(), windowed)?;
    unexpected(
        "groups",
        doc.groups.is_some(),
        kind == LayerKind::Convolution,
    )?;

    let filters = || {
        doc.filters
            .ok_or_else(|| field(at("filters"), format!("required on {kind} layers")))
    };
    let window = || -> Result<Window, CatalogError> {
        let [filter_h, filter_w] = doc
            .filter
            .ok_or_else(|| field(at("filter"), format!("required on {kind} layers")))?;
        let [pad_h, pad_w] = doc.pad.unwrap_or([0, 0]);
        Ok(Window {
            filter_h,
            filter_w,
            stride: doc.stride.unwrap_or(1),
            pad_h,
            pad_w,
            rounding: doc.rounding.unwrap_or_default(),
        })
    };

    let op = match kind {
        LayerKind::Input => LayerOp::Input,
        LayerKind::Convolution => LayerOp::Convolution(ConvParams {
            num_filters: filters()?,
            window: window()?,
            groups: doc.groups.unwrap_or(1),
        }),
        LayerKind::MaxPool => LayerOp::MaxPool(window()?),
        LayerKind::AvgPool => LayerOp::AvgPool(window()?),
        LayerKind::GlobalAvgPool => LayerOp::GlobalAvgPool,
        LayerKind::FullyConnected => LayerOp::FullyConnected {
            num_filters: filters()?,
        },
        LayerKind::Concat => LayerOp::Concat,
        LayerKind::ElementwiseAdd => LayerOp::ElementwiseAdd,
        LayerKind::Relu => LayerOp::Relu,
        LayerKind::Dropout => LayerOp::Dropout,
    };
    let spec = LayerSpec {
        name: doc.name,
        op,
        inputs: doc.inputs,
    };
    spec.validate_params()
        .map_err(|e| field(format!("layers[{i}]"), e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{all_builtins, nin};

    #[test]
    fn builtins_round_trip() {
        for entry in all_builtins() {
            let text = to_json(&entry);
            let back = from_json(&text).unwrap();
            assert_eq!(back, entry, "{}", entry.name());
            assert_eq!(to_json(&back), text);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(format!("nin{FILE_EXTENSION}"));
        save(&nin(), &path).unwrap();
        assert_eq!(load(&path).unwrap(), nin());
    }

    #[test]
    fn save_is_canonical() {
        let text = to_json(&nin());
        let first = text.find("\"name\"").unwrap();
        assert!(first < text.find("\"input\"").unwrap());
        assert!(text.find("\"input\"").unwrap() < text.find("\"layers\"").unwrap());
        assert!(!text.contains("\"groups\""));
        assert!(!text.contains("\"rounding\""));
    }

    const TINY: &str = r#"{
  "name": "tiny",
  "input": {"channels": 3, "height": 8, "width": 8},
  "layers": [
    {"name": "data", "kind": "input"},
    {"name": "a", "kind": "convolution", "filters": 4, "filter": [3, 3], "pad": [1, 1], "inputs": ["data"]},
    {"name": "b", "kind": "max-pool", "filter": [2, 2], "stride": 2, "inputs": ["a"]}
  ]
}"#;

    #[test]
    fn defaults_fill_optional_fields() {
        let entry = from_json(TINY).unwrap();
        let arch = &entry.architecture;
        assert_eq!(arch.input_shape.batch, 1);
        let w = arch.layer("a").unwrap().op.window().copied().unwrap();
        assert_eq!((w.stride, w.pad_h, w.rounding), (1, 1, Rounding::Default));
    }

    #[test]
    fn duplicate_names_are_named() {
        let text = TINY.replace("\"name\": \"b\"", "\"name\": \"a\"");
        let err = from_json(&text).unwrap_err();
        assert!(
            err.to_string().contains("duplicate layer name `a`"),
            "{err}"
        );
        assert_eq!(err.field_path(), Some("layers[1]"));
    }

    #[test]
    fn cycles_are_listed() {
        let text = TINY.replace("\"inputs\": [\"data\"]", "\"inputs\": [\"b\"]");
        let err = from_json(&text).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("cycle") && msg.contains('a') && msg.contains('b'),
            "{msg}"
        );
    }

    #[test]
    fn shape_errors_rejected_on_load() {
        let text = TINY.replace("\"filter\": [3, 3]", "\"filter\": [30, 30]");
        let err = from_json(&text).unwrap_err();
        assert_eq!(err.field_path(), Some("layers[1]"));
        assert!(
            err.to_string().contains("larger than the padded input"),
            "{err}"
        );
    }

    #[test]
    fn missing_kind_field_has_path() {
        let text = TINY.replace("\"filters\": 4, ", "");
        let err = from_json(&text).unwrap_err();
        assert_eq!(err.field_path(), Some("layers[1].filters"));
    }

    #[test]
    fn forbidden_kind_field_has_path() {
        let text = TINY.replace(
            "\"kind\": \"max-pool\",",
            "\"kind\": \"max-pool\", \"filters\": 3,",
        );
        let err = from_json(&text).unwrap_err();
        assert_eq!(err.field_path(), Some("layers[2].filters"));
    }

    #[test]
    fn parse_errors_carry_line_and_path() {
        let text = TINY.replace("\"stride\": 2", "\"stride\": \"two\"");
        match from_json(&text).unwrap_err() {
            CatalogError::Parse { path, line, .. } => {
                assert_eq!(path, "layers[2].stride");
                assert_eq!(line, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = TINY.replace("\"kind\": \"input\"", "\"kind\": \"lstm\"");
        let err = from_json(&text).unwrap_err();
        assert_eq!(err.field_path(), Some("layers[0].kind"));
    }

    #[test]
    fn value_errors_carry_path() {
        let mut v: Value = serde_json::from_str(TINY).unwrap();
        v["input"]["channels"] = Value::from(-1);
        let err = from_value(v).unwrap_err();
        assert_eq!(err.field_path(), Some("input.channels"));
    }
}
