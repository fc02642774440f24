//! Architecture IR: layer specs, DAG validation, shape propagation and
//! exact per-layer accounting of parameters, activations and FLOPs.

mod accounting;
mod graph;
mod layer;
mod shape;

use thiserror::Error;

pub use accounting::{
    analyze, data_weight_ratio, AccountingReport, AnalysisConfig, LayerRow, Totals,
};
pub use graph::Architecture;
pub use layer::{
    layer_activation_bytes, layer_bias_bytes, layer_forward_flops, layer_params_bytes, output_dim,
    propagate_shape, ConvParams, LayerKind, LayerOp, LayerSpec, Rounding, Window,
};
pub use shape::TensorShape;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchError {
    #[error("invalid tensor shape {0}: every dimension must be at least 1")]
    InvalidShape(TensorShape),
    #[error("layer `{layer}`: {reason}")]
    InvalidLayer { layer: String, reason: String },
    #[error("layer `{layer}` ({kind}) has {got} predecessor(s), which its kind does not allow")]
    Arity {
        layer: String,
        kind: LayerKind,
        got: usize,
    },
    #[error("layer `{layer}`: filter {filter} is larger than the padded input {padded}")]
    FilterTooLarge {
        layer: String,
        filter: u64,
        padded: u64,
    },
    #[error("layer `{layer}`: input shapes differ ({expected} vs {got})")]
    ShapeMismatch {
        layer: String,
        expected: TensorShape,
        got: TensorShape,
    },
    #[error("duplicate layer name `{0}`")]
    DuplicateLayer(String),
    #[error("architecture has no input layer")]
    NoInput,
    #[error("architecture has more than one input layer: {}", .0.join(", "))]
    MultipleInputs(Vec<String>),
    #[error("layer `{layer}` references unknown predecessor `{predecessor}`")]
    UnknownPredecessor { layer: String, predecessor: String },
    #[error("cycle among layers: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("layer `{0}` is not reachable from the input layer")]
    Unreachable(String),
    #[error("architecture `{0}` has no parameters")]
    ZeroParameters(String),
    #[error("{0}")]
    InvalidConfig(String),
    #[error("arithmetic overflow while accounting")]
    Overflow,
}
