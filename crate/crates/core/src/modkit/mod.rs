//! Declarative architecture modifications and per-layer delta reports
//! against a baseline.

mod diff;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{analyze, AnalysisConfig, ArchError, Architecture, LayerOp};
use crate::rational::Rational;

pub use diff::{
    diff, diff_mods, Classification, Delta, DeltaReport, DeltaRow, DeltaTotals, Presence,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModError {
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("cannot remove `{layer}`: {reason}")]
    IllegalRemoval { layer: String, reason: String },
    #[error("layer `{0}` has no filters to scale")]
    NotFiltered(String),
    #[error("layer `{0}` has no filter window")]
    NoWindow(String),
    #[error("scale factor must be positive")]
    ZeroFactor,
    #[error("{what} would become {value}; dimensions must be at least 1")]
    NonPositive { what: String, value: u64 },
    #[error("architecture has {0} output layers; expected exactly one")]
    AmbiguousOutput(usize),
    #[error("no layer with filters on the path to the output")]
    NoFinalLayer,
    #[error("invalid modification `{0}`")]
    Parse(String),
    #[error(transparent)]
    Arch(#[from] ArchError),
}

/// One architectural change. Serialized as a tagged object, e.g.
/// `{"kind":"scale_filters","layer":"conv8","factor":4}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModSpec {
    ScaleInputChannels {
        factor: Rational,
    },
    ScaleFilters {
        layer: String,
        factor: Rational,
    },
    SetFilterSize {
        layer: String,
        filter: [u64; 2],
        #[serde(default)]
        pad: [u64; 2],
    },
    /// Scales the filters of the last filtered layer before the output.
    ScaleCategories {
        factor: Rational,
    },
    /// Splices a single-input layer out, wiring its consumers to its input.
    RemoveLayer {
        layer: String,
    },
    ScaleInputResolution {
        factor_h: Rational,
        factor_w: Rational,
    },
}

/// A modified architecture plus one note per rounded dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub architecture: Architecture,
    pub notes: Vec<String>,
}

fn positive(factor: &Rational) -> Result<(), ModError> {
    if factor.is_zero() {
        Err(ModError::ZeroFactor)
    } else {
        Ok(())
    }
}

/// `round_half_up(value * factor)`, rejecting zero and noting rounding.
fn scale(
    what: &str,
    value: u64,
    factor: &Rational,
    notes: &mut Vec<String>,
) -> Result<u64, ModError> {
    positive(factor)?;
    let (v, rounded) = factor.scale_round(value);
    if rounded {
        notes.push(format!("{what}: {value} x {factor} rounded to {v}"));
    }
    if v == 0 {
        return Err(ModError::NonPositive {
            what: what.to_string(),
            value: v,
        });
    }
    Ok(v)
}

/// The last layer with filters on the path from the unique output layer
/// back toward the input.
pub fn final_filtered_layer(arch: &Architecture) -> Result<String, ModError> {
    let sinks = arch.sinks();
    if sinks.len() != 1 {
        return Err(ModError::AmbiguousOutput(sinks.len()));
    }
    let mut cur = arch.layer(sinks[0]).expect("sink exists");
    loop {
        if cur.op.num_filters().is_some() {
            return Ok(cur.name.clone());
        }
        let Some(pred) = cur.inputs.first() else {
            return Err(ModError::NoFinalLayer);
        };
        cur = arch
            .layer(pred)
            .ok_or_else(|| ModError::UnknownLayer(pred.clone()))?;
    }
}

/// Returns a modified copy; `arch` itself is never touched. The result is
/// checked by propagating shapes once.
pub fn apply(arch: &Architecture, m: &ModSpec) -> Result<Applied, ModError> {
    let mut out = arch.clone();
    let mut notes = Vec::new();
    match m {
        ModSpec::ScaleInputChannels { factor } => {
            let c = out.input_shape.channels;
            out.input_shape.channels = scale("input channels", c, factor, &mut notes)?;
        }
        ModSpec::ScaleFilters { layer, factor } => {
            scale_filters(&mut out, layer, factor, &mut notes)?;
        }
        ModSpec::ScaleCategories { factor } => {
            let layer = final_filtered_layer(&out)?;
            scale_filters(&mut out, &layer, factor, &mut notes)?;
        }
        ModSpec::SetFilterSize { layer, filter, pad } => {
            let l = out
                .layer_mut(layer)
                .ok_or_else(|| ModError::UnknownLayer(layer.clone()))?;
            let w =
                l.op.window_mut()
                    .ok_or_else(|| ModError::NoWindow(layer.clone()))?;
            for (what, v) in [("filter height", filter[0]), ("filter width", filter[1])] {
                if v == 0 {
                    return Err(ModError::NonPositive {
                        what: format!("{layer} {what}"),
                        value: 0,
                    });
                }
            }
            w.filter_h = filter[0];
            w.filter_w = filter[1];
            w.pad_h = pad[0];
            w.pad_w = pad[1];
        }
        ModSpec::RemoveLayer { layer } => remove_layer(&mut out, layer)?,
        ModSpec::ScaleInputResolution { factor_h, factor_w } => {
            let s = out.input_shape;
            out.input_shape.height = scale("input height", s.height, factor_h, &mut notes)?;
            out.input_shape.width = scale("input width", s.width, factor_w, &mut notes)?;
        }
    }
    analyze(&out, &AnalysisConfig::new(1))?;
    Ok(Applied {
        architecture: out,
        notes,
    })
}

/// Applies modifications left to right.
pub fn apply_all(arch: &Architecture, mods: &[ModSpec]) -> Result<Applied, ModError> {
    let mut current = Applied {
        architecture: arch.clone(),
        notes: Vec::new(),
    };
    for m in mods {
        let next = apply(&current.architecture, m)?;
        current.architecture = next.architecture;
        current.notes.extend(next.notes);
    }
    Ok(current)
}

fn scale_filters(
    arch: &mut Architecture,
    layer: &str,
    factor: &Rational,
    notes: &mut Vec<String>,
) -> Result<(), ModError> {
    let l = arch
        .layer_mut(layer)
        .ok_or_else(|| ModError::UnknownLayer(layer.to_string()))?;
    let what = format!("{layer} filters");
    match &mut l.op {
        LayerOp::Convolution(c) => c.num_filters = scale(&what, c.num_filters, factor, notes)?,
        LayerOp::FullyConnected { num_filters } => {
            *num_filters = scale(&what, *num_filters, factor, notes)?
        }
        _ => return Err(ModError::NotFiltered(layer.to_string())),
    }
    Ok(())
}

fn remove_layer(arch: &mut Architecture, layer: &str) -> Result<(), ModError> {
    let illegal = |reason: &str| ModError::IllegalRemoval {
        layer: layer.to_string(),
        reason: reason.to_string(),
    };
    let idx = arch
        .position(layer)
        .ok_or_else(|| ModError::UnknownLayer(layer.to_string()))?;
    let target = &arch.layers[idx];
    if matches!(target.op, LayerOp::Input) {
        return Err(illegal("it is the input layer"));
    }
    if arch.successors(layer).is_empty() {
        return Err(illegal("it is an output layer"));
    }
    if target.inputs.len() != 1 {
        return Err(illegal("it has more than one predecessor"));
    }
    let pred = target.inputs[0].clone();
    arch.layers.remove(idx);
    for l in &mut arch.layers {
        for p in &mut l.inputs {
            if p == layer {
                *p = pred.clone();
            }
        }
    }
    Ok(())
}

impl fmt::Display for ModSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModSpec::ScaleInputChannels { factor } => write!(f, "input-channels:{factor}"),
            ModSpec::ScaleFilters { layer, factor } => write!(f, "scale-filters:{layer}:{factor}"),
            ModSpec::SetFilterSize { layer, filter, pad } => write!(
                f,
                "filter-size:{layer}:{}x{}:{}x{}",
                filter[0], filter[1], pad[0], pad[1]
            ),
            ModSpec::ScaleCategories { factor } => write!(f, "categories:{factor}"),
            ModSpec::RemoveLayer { layer } => write!(f, "remove:{layer}"),
            ModSpec::ScaleInputResolution { factor_h, factor_w } => {
                write!(f, "input-resolution:{factor_h}x{factor_w}")
            }
        }
    }
}

/// Compact command-line form:
///
/// - `remove:<layer>`
/// - `scale-filters:<layer>:<factor>`
/// - `filter-size:<layer>:<h>x<w>[:<pad_h>x<pad_w>]`
/// - `categories:<factor>`
/// - `input-channels:<factor>`
/// - `input-resolution:<factor>` or `input-resolution:<fh>x<fw>`
///
/// Factors accept integers, decimals and fractions (`3/2`).
impl FromStr for ModSpec {
    type Err = ModError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ModError::Parse(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let factor = |t: &str| t.parse::<Rational>().map_err(|_| err());
        let pair = |t: &str| -> Result<[u64; 2], ModError> {
            let (a, b) = t.split_once('x').unwrap_or((t, t));
            Ok([a.parse().map_err(|_| err())?, b.parse().map_err(|_| err())?])
        };
        let kind = parts[0].replace('_', "-");
        match (kind.as_str(), &parts[1..]) {
            ("remove" | "remove-layer", [layer]) => Ok(ModSpec::RemoveLayer {
                layer: layer.to_string(),
            }),
            ("scale-filters", [layer, f]) => Ok(ModSpec::ScaleFilters {
                layer: layer.to_string(),
                factor: factor(f)?,
            }),
            ("filter-size" | "set-filter-size", [layer, size]) => Ok(ModSpec::SetFilterSize {
                layer: layer.to_string(),
                filter: pair(size)?,
                pad: [0, 0],
            }),
            ("filter-size" | "set-filter-size", [layer, size, pad]) => Ok(ModSpec::SetFilterSize {
                layer: layer.to_string(),
                filter: pair(size)?,
                pad: pair(pad)?,
            }),
            ("categories" | "scale-categories", [f]) => {
                Ok(ModSpec::ScaleCategories { factor: factor(f)? })
            }
            ("input-channels" | "scale-input-channels", [f]) => {
                Ok(ModSpec::ScaleInputChannels { factor: factor(f)? })
            }
            ("input-resolution" | "scale-input-resolution", [f]) => {
                let (h, w) = f.split_once('x').unwrap_or((f, f));
                Ok(ModSpec::ScaleInputResolution {
                    factor_h: factor(h)?,
                    factor_w: factor(w)?,
                })
            }
            _ => Err(err()),
        }
    }
}
