use serde::{Deserialize, Serialize};

use crate::arch::{analyze, AnalysisConfig, Architecture, LayerOp, LayerSpec};

use super::FireError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BypassVariant {
    Vanilla,
    /// Parameter-free identity shortcuts around modules whose input and
    /// output channel counts match.
    Simple,
    /// Identity shortcuts where channels match, 1x1 convolutions elsewhere.
    Complex,
}

/// A Fire module located by layer names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FireModule {
    pub name: String,
    /// Layer feeding the squeeze convolution.
    pub input: String,
    /// Concat layer, or the single expand layer when the other is absent.
    pub output: String,
}

/// Finds modules by their `<module>/squeeze1x1` layers, in declaration order.
pub fn fire_modules(arch: &Architecture) -> Vec<FireModule> {
    arch.layers
        .iter()
        .filter_map(|l| {
            let module = l.name.strip_suffix("/squeeze1x1")?;
            let input = l.inputs.first()?.clone();
            let output = ["concat", "expand1x1", "expand3x3"]
                .iter()
                .map(|suffix| format!("{module}/{suffix}"))
                .find(|n| arch.layer(n).is_some())?;
            Some(FireModule {
                name: module.to_string(),
                input,
                output,
            })
        })
        .collect()
}

/// Applies a bypass variant with the default placement: identity shortcuts
/// on every channel-matching module and, for `Complex`, 1x1 convolution
/// shortcuts on the rest.
pub fn with_bypass(arch: &Architecture, variant: BypassVariant) -> Result<Architecture, FireError> {
    if variant == BypassVariant::Vanilla {
        return Ok(arch.clone());
    }
    let modules = fire_modules(arch);
    if modules.is_empty() {
        return Err(FireError::NoFireModules(arch.name.clone()));
    }
    let report = analyze(arch, &AnalysisConfig::new(1))?;
    let channels = |layer: &str| report.row(layer).map(|r| r.output_shape.channels);
    let (matching, other): (Vec<&FireModule>, Vec<&FireModule>) = modules
        .iter()
        .partition(|m| channels(&m.input) == channels(&m.output));
    let simple: Vec<&str> = matching.iter().map(|m| m.name.as_str()).collect();
    let complex: Vec<&str> = match variant {
        BypassVariant::Complex => other.iter().map(|m| m.name.as_str()).collect(),
        _ => Vec::new(),
    };
    with_bypass_at(arch, &simple, &complex)
}

/// Adds identity shortcuts around `simple` modules and 1x1 convolution
/// shortcuts around `complex` modules. The shortcut joins the module output
/// in an elementwise add named `<module>/bypass`, which takes over all of
/// the module output's consumers.
pub fn with_bypass_at(
    arch: &Architecture,
    simple: &[&str],
    complex: &[&str],
) -> Result<Architecture, FireError> {
    let modules = fire_modules(arch);
    for name in simple.iter().chain(complex) {
        if !modules.iter().any(|m| m.name == *name) {
            return Err(FireError::UnknownModule(name.to_string()));
        }
    }
    let mut out = arch.clone();
    for module in modules {
        let is_simple = simple.contains(&module.name.as_str());
        let is_complex = complex.contains(&module.name.as_str());
        if !is_simple && !is_complex {
            continue;
        }
        // Earlier shortcuts may have renamed this module's input.
        let squeeze = format!("{}/squeeze1x1", module.name);
        let input = out.layer(&squeeze).expect("module squeeze").inputs[0].clone();
        let report = analyze(&out, &AnalysisConfig::new(1))?;
        let in_ch = report.row(&input).expect("analyzed").output_shape.channels;
        let out_ch = report
            .row(&module.output)
            .expect("analyzed")
            .output_shape
            .channels;

        let mut new_layers = Vec::new();
        let shortcut = if is_complex {
            let conv = format!("{}/bypass1x1", module.name);
            new_layers.push(LayerSpec::conv(&conv, &input, out_ch, 1, 1, 0));
            conv
        } else {
            if in_ch != out_ch {
                return Err(FireError::ChannelMismatch {
                    module: module.name.clone(),
                    input: in_ch,
                    output: out_ch,
                });
            }
            input
        };
        let add = format!("{}/bypass", module.name);
        new_layers.push(LayerSpec::new(
            &add,
            LayerOp::ElementwiseAdd,
            &[&module.output, &shortcut],
        ));

        for layer in &mut out.layers {
            for pred in &mut layer.inputs {
                if *pred == module.output {
                    *pred = add.clone();
                }
            }
        }
        let at = out.position(&module.output).expect("module output") + 1;
        out.layers.splice(at..at, new_layers);
    }
    out.validate()?;
    Ok(out)
}
