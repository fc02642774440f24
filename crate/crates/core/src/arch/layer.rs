use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ArchError, TensorShape};

/// How the output size of a sliding window is rounded when the padded input
/// is not an exact multiple of the stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Floor for convolutions, ceil for pooling.
    #[default]
    Default,
    Floor,
    Ceil,
}

/// Filter extent, stride and zero-padding of a convolution or pooling window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub filter_h: u64,
    pub filter_w: u64,
    pub stride: u64,
    pub pad_h: u64,
    pub pad_w: u64,
    pub rounding: Rounding,
}

impl Window {
    pub fn square(filter: u64, stride: u64, pad: u64) -> Self {
        Window {
            filter_h: filter,
            filter_w: filter,
            stride,
            pad_h: pad,
            pad_w: pad,
            rounding: Rounding::Default,
        }
    }

    pub fn with_rounding(self, rounding: Rounding) -> Self {
        Window { rounding, ..self }
    }

    fn validate(&self) -> Result<(), &'static str> {
        if self.filter_h == 0 || self.filter_w == 0 {
            return Err("filter dimensions must be positive");
        }
        if self.stride == 0 {
            return Err("stride must be positive");
        }
        Ok(())
    }

    /// Output (height, width) for an input of the given spatial size.
    fn output_hw(
        &self,
        layer: &str,
        input: &TensorShape,
        default_ceil: bool,
    ) -> Result<(u64, u64), ArchError> {
        let ceil = match self.rounding {
            Rounding::Default => default_ceil,
            Rounding::Floor => false,
            Rounding::Ceil => true,
        };
        let h = output_dim(input.height, self.pad_h, self.filter_h, self.stride, ceil).ok_or_else(
            || ArchError::FilterTooLarge {
                layer: layer.to_string(),
                filter: self.filter_h,
                padded: input.height + 2 * self.pad_h,
            },
        )?;
        let w = output_dim(input.width, self.pad_w, self.filter_w, self.stride, ceil).ok_or_else(
            || ArchError::FilterTooLarge {
                layer: layer.to_string(),
                filter: self.filter_w,
                padded: input.width + 2 * self.pad_w,
            },
        )?;
        Ok((h, w))
    }
}

/// `(in + 2*pad - filter) / stride + 1`, rounded down or up. `None` when the
/// filter does not fit in the padded input.
pub fn output_dim(input: u64, pad: u64, filter: u64, stride: u64, ceil: bool) -> Option<u64> {
    let padded = input.checked_add(pad.checked_mul(2)?)?;
    let span = padded.checked_sub(filter)?;
    let steps = if ceil {
        span.div_ceil(stride)
    } else {
        span / stride
    };
    Some(steps + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvParams {
    pub num_filters: u64,
    pub window: Window,
    /// Filters see `in_channels / groups` input channels each.
    pub groups: u64,
}

/// Layer type plus the hyperparameters that type requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerOp {
    Input,
    Convolution(ConvParams),
    MaxPool(Window),
    AvgPool(Window),
    GlobalAvgPool,
    /// A convolution whose filter covers the entire input activation.
    FullyConnected {
        num_filters: u64,
    },
    Concat,
    ElementwiseAdd,
    Relu,
    Dropout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Input,
    Convolution,
    MaxPool,
    AvgPool,
    GlobalAvgPool,
    FullyConnected,
    Concat,
    ElementwiseAdd,
    Relu,
    Dropout,
}

impl LayerKind {
    pub const ALL: [LayerKind; 10] = [
        LayerKind::Input,
        LayerKind::Convolution,
        LayerKind::MaxPool,
        LayerKind::AvgPool,
        LayerKind::GlobalAvgPool,
        LayerKind::FullyConnected,
        LayerKind::Concat,
        LayerKind::ElementwiseAdd,
        LayerKind::Relu,
        LayerKind::Dropout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Input => "input",
            LayerKind::Convolution => "convolution",
            LayerKind::MaxPool => "max-pool",
            LayerKind::AvgPool => "avg-pool",
            LayerKind::GlobalAvgPool => "global-avg-pool",
            LayerKind::FullyConnected => "fully-connected",
            LayerKind::Concat => "concat",
            LayerKind::ElementwiseAdd => "elementwise-add",
            LayerKind::Relu => "relu",
            LayerKind::Dropout => "dropout",
        }
    }

    pub fn parse(s: &str) -> Option<LayerKind> {
        LayerKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl LayerOp {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerOp::Input => LayerKind::Input,
            LayerOp::Convolution(_) => LayerKind::Convolution,
            LayerOp::MaxPool(_) => LayerKind::MaxPool,
            LayerOp::AvgPool(_) => LayerKind::AvgPool,
            LayerOp::GlobalAvgPool => LayerKind::GlobalAvgPool,
            LayerOp::FullyConnected { .. } => LayerKind::FullyConnected,
            LayerOp::Concat => LayerKind::Concat,
            LayerOp::ElementwiseAdd => LayerKind::ElementwiseAdd,
            LayerOp::Relu => LayerKind::Relu,
            LayerOp::Dropout => LayerKind::Dropout,
        }
    }

    pub fn num_filters(&self) -> Option<u64> {
        match self {
            LayerOp::Convolution(c) => Some(c.num_filters),
            LayerOp::FullyConnected { num_filters } => Some(*num_filters),
            _ => None,
        }
    }

    pub fn window(&self) -> Option<&Window> {
        match self {
            LayerOp::Convolution(c) => Some(&c.window),
            LayerOp::MaxPool(w) | LayerOp::AvgPool(w) => Some(w),
            _ => None,
        }
    }

    pub fn window_mut(&mut self) -> Option<&mut Window> {
        match self {
            LayerOp::Convolution(c) => Some(&mut c.window),
            LayerOp::MaxPool(w) | LayerOp::AvgPool(w) => Some(w),
            _ => None,
        }
    }

    /// Inclusive bounds on the number of predecessors.
    pub fn arity(&self) -> (usize, usize) {
        match self {
            LayerOp::Input => (0, 0),
            LayerOp::Concat | LayerOp::ElementwiseAdd => (2, usize::MAX),
            _ => (1, 1),
        }
    }
}

/// One node of an architecture DAG.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub name: String,
    pub op: LayerOp,
    /// Predecessor layer names, in order (concat order matters for channels).
    pub inputs: Vec<String>,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, op: LayerOp, inputs: &[&str]) -> Self {
        LayerSpec {
            name: name.into(),
            op,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn input(name: impl Into<String>) -> Self {
        LayerSpec::new(name, LayerOp::Input, &[])
    }

    pub fn conv(
        name: impl Into<String>,
        input: &str,
        num_filters: u64,
        filter: u64,
        stride: u64,
        pad: u64,
    ) -> Self {
        LayerSpec::new(
            name,
            LayerOp::Convolution(ConvParams {
                num_filters,
                window: Window::square(filter, stride, pad),
                groups: 1,
            }),
            &[input],
        )
    }

    pub fn max_pool(name: impl Into<String>, input: &str, filter: u64, stride: u64) -> Self {
        LayerSpec::new(
            name,
            LayerOp::MaxPool(Window::square(filter, stride, 0)),
            &[input],
        )
    }

    pub fn avg_pool(name: impl Into<String>, input: &str, filter: u64, stride: u64) -> Self {
        LayerSpec::new(
            name,
            LayerOp::AvgPool(Window::square(filter, stride, 0)),
            &[input],
        )
    }

    pub fn global_avg_pool(name: impl Into<String>, input: &str) -> Self {
        LayerSpec::new(name, LayerOp::GlobalAvgPool, &[input])
    }

    pub fn fully_connected(name: impl Into<String>, input: &str, num_filters: u64) -> Self {
        LayerSpec::new(name, LayerOp::FullyConnected { num_filters }, &[input])
    }

    pub fn kind(&self) -> LayerKind {
        self.op.kind()
    }

    /// Checks hyperparameter ranges that do not depend on the input shape.
    pub fn validate_params(&self) -> Result<(), ArchError> {
        let bad = |reason: &str| ArchError::InvalidLayer {
            layer: self.name.clone(),
            reason: reason.to_string(),
        };
        if let Some(w) = self.op.window() {
            w.validate().map_err(bad)?;
        }
        match &self.op {
            LayerOp::Convolution(c) => {
                if c.num_filters == 0 {
                    return Err(bad("num_filters must be positive"));
                }
                if c.groups == 0 {
                    return Err(bad("groups must be positive"));
                }
                if c.num_filters % c.groups != 0 {
                    return Err(bad("num_filters must be divisible by groups"));
                }
            }
            LayerOp::FullyConnected { num_filters } if *num_filters == 0 => {
                return Err(bad("num_filters must be positive"));
            }
            _ => {}
        }
        let (lo, hi) = self.op.arity();
        let n = self.inputs.len();
        if n < lo || n > hi {
            return Err(ArchError::Arity {
                layer: self.name.clone(),
                kind: self.kind(),
                got: n,
            });
        }
        Ok(())
    }
}

/// Output shape of `layer` given the shapes of its predecessors.
pub fn propagate_shape(
    layer: &LayerSpec,
    inputs: &[TensorShape],
) -> Result<TensorShape, ArchError> {
    let (lo, hi) = layer.op.arity();
    if inputs.len() < lo || inputs.len() > hi || (lo == 0 && !inputs.is_empty()) {
        return Err(ArchError::Arity {
            layer: layer.name.clone(),
            kind: layer.kind(),
            got: inputs.len(),
        });
    }
    let first = match inputs.first() {
        Some(s) => *s,
        None => {
            return Err(ArchError::InvalidLayer {
                layer: layer.name.clone(),
                reason: "input layers take their shape from the architecture".into(),
            })
        }
    };
    let out = match &layer.op {
        LayerOp::Input => unreachable!("input arity is zero"),
        LayerOp::Convolution(c) => {
            if first.channels % c.groups != 0 {
                return Err(ArchError::InvalidLayer {
                    layer: layer.name.clone(),
                    reason: format!(
                        "{} input channels not divisible by {} groups",
                        first.channels, c.groups
                    ),
                });
            }
            let (h, w) = c.window.output_hw(&layer.name, &first, false)?;
            TensorShape {
                channels: c.num_filters,
                height: h,
                width: w,
                ..first
            }
        }
        LayerOp::MaxPool(win) | LayerOp::AvgPool(win) => {
            let (h, w) = win.output_hw(&layer.name, &first, true)?;
            TensorShape {
                height: h,
                width: w,
                ..first
            }
        }
        LayerOp::GlobalAvgPool => TensorShape {
            height: 1,
            width: 1,
            ..first
        },
        LayerOp::FullyConnected { num_filters } => TensorShape {
            channels: *num_filters,
            height: 1,
            width: 1,
            ..first
        },
        LayerOp::Concat => {
            let mut channels = 0u64;
            for s in inputs {
                if !s.same_spatial(&first) || s.batch != first.batch {
                    return Err(ArchError::ShapeMismatch {
                        layer: layer.name.clone(),
                        expected: first,
                        got: *s,
                    });
                }
                channels += s.channels;
            }
            TensorShape { channels, ..first }
        }
        LayerOp::ElementwiseAdd => {
            if let Some(s) = inputs.iter().find(|s| **s != first) {
                return Err(ArchError::ShapeMismatch {
                    layer: layer.name.clone(),
                    expected: first,
                    got: *s,
                });
            }
            first
        }
        LayerOp::Relu | LayerOp::Dropout => first,
    };
    Ok(out)
}

fn product(factors: &[u128]) -> Result<u128, ArchError> {
    factors
        .iter()
        .try_fold(1u128, |acc, f| acc.checked_mul(*f))
        .ok_or(ArchError::Overflow)
}

/// Weight bytes of a layer: in_channels x filters x filter_h x filter_w x
/// bytes_per_value. Bias terms are not included; see [`layer_bias_bytes`].
pub fn layer_params_bytes(
    layer: &LayerSpec,
    input: &TensorShape,
    bytes_per_value: u64,
) -> Result<u128, ArchError> {
    let bpv = bytes_per_value as u128;
    match &layer.op {
        LayerOp::Convolution(c) => product(&[
            (input.channels / c.groups) as u128,
            c.num_filters as u128,
            c.window.filter_h as u128,
            c.window.filter_w as u128,
            bpv,
        ]),
        LayerOp::FullyConnected { num_filters } => {
            product(&[input.per_sample(), *num_filters as u128, bpv])
        }
        _ => Ok(0),
    }
}

/// One bias value per filter, for analyses that opt into counting biases.
pub fn layer_bias_bytes(layer: &LayerSpec, bytes_per_value: u64) -> u128 {
    layer
        .op
        .num_filters()
        .map_or(0, |n| n as u128 * bytes_per_value as u128)
}

/// Forward-pass arithmetic operations, including the batch factor.
///
/// Convolutions count a multiply-add as two operations. Pooling is costed
/// like a single-filter convolution: max-pool one comparison per window
/// element, average pooling an add and a scale per element. Activation
/// functions, dropout, concat and elementwise add cost nothing.
pub fn layer_forward_flops(
    layer: &LayerSpec,
    input: &TensorShape,
    out: &TensorShape,
) -> Result<u128, ArchError> {
    let batch = out.batch as u128;
    let out_hw = out.height as u128 * out.width as u128;
    match &layer.op {
        LayerOp::Convolution(c) => product(&[
            (input.channels / c.groups) as u128,
            c.num_filters as u128,
            c.window.filter_h as u128,
            c.window.filter_w as u128,
            out_hw,
            2,
            batch,
        ]),
        LayerOp::FullyConnected { num_filters } => {
            product(&[input.per_sample(), *num_filters as u128, 2, batch])
        }
        LayerOp::MaxPool(w) => product(&[
            out.channels as u128,
            out_hw,
            w.filter_h as u128,
            w.filter_w as u128,
            batch,
        ]),
        LayerOp::AvgPool(w) => product(&[
            out.channels as u128,
            out_hw,
            w.filter_h as u128,
            w.filter_w as u128,
            2,
            batch,
        ]),
        LayerOp::GlobalAvgPool => product(&[
            out.channels as u128,
            input.height as u128,
            input.width as u128,
            2,
            batch,
        ]),
        LayerOp::Input
        | LayerOp::Concat
        | LayerOp::ElementwiseAdd
        | LayerOp::Relu
        | LayerOp::Dropout => Ok(0),
    }
}

pub fn layer_activation_bytes(out: &TensorShape, bytes_per_value: u64) -> u128 {
    out.bytes(bytes_per_value)
}
