//! Fire modules and SqueezeNet-family networks generated from a handful of
//! metaparameters.

mod bypass;
mod sweep;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{ArchError, Architecture, LayerOp, LayerSpec, TensorShape};
use crate::rational::Rational;

pub use bypass::{fire_modules, with_bypass, with_bypass_at, BypassVariant, FireModule};
pub use sweep::{sweep, to_csv, MetaParam, SweepPoint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("invalid metaparameters: {0}")]
    InvalidMeta(String),
    #[error("{module}: squeeze ratio yields zero squeeze filters")]
    ZeroSqueeze { module: String },
    #[error("{module}: squeeze filters ({s}) must be fewer than expand filters ({e})")]
    SqueezeTooLarge { module: String, s: u64, e: u64 },
    #[error("architecture `{0}` contains no Fire modules")]
    NoFireModules(String),
    #[error("unknown Fire module `{0}`")]
    UnknownModule(String),
    #[error("{module}: simple bypass needs matching channels, got {input} in and {output} out")]
    ChannelMismatch {
        module: String,
        input: u64,
        output: u64,
    },
    #[error(transparent)]
    Arch(#[from] ArchError),
}

/// Filter counts of one Fire module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FireSpec {
    pub s1x1: u64,
    pub e1x1: u64,
    pub e3x3: u64,
}

impl FireSpec {
    pub fn new(s1x1: u64, e1x1: u64, e3x3: u64) -> Self {
        FireSpec { s1x1, e1x1, e3x3 }
    }

    pub fn expand(&self) -> u64 {
        self.e1x1 + self.e3x3
    }

    pub fn validate(&self, module: &str) -> Result<(), FireError> {
        if self.s1x1 == 0 {
            return Err(FireError::ZeroSqueeze {
                module: module.to_string(),
            });
        }
        if self.s1x1 >= self.expand() {
            return Err(FireError::SqueezeTooLarge {
                module: module.to_string(),
                s: self.s1x1,
                e: self.expand(),
            });
        }
        Ok(())
    }

    /// Appends squeeze, expand and (when both expands exist) concat layers.
    /// Returns the name of the module's output layer.
    pub fn append(&self, layers: &mut Vec<LayerSpec>, module: &str, input: &str) -> String {
        let squeeze = format!("{module}/squeeze1x1");
        layers.push(LayerSpec::conv(&squeeze, input, self.s1x1, 1, 1, 0));
        let mut outputs = Vec::new();
        if self.e1x1 > 0 {
            let name = format!("{module}/expand1x1");
            layers.push(LayerSpec::conv(&name, &squeeze, self.e1x1, 1, 1, 0));
            outputs.push(name);
        }
        if self.e3x3 > 0 {
            let name = format!("{module}/expand3x3");
            layers.push(LayerSpec::conv(&name, &squeeze, self.e3x3, 3, 1, 1));
            outputs.push(name);
        }
        if outputs.len() == 1 {
            return outputs.pop().unwrap();
        }
        let name = format!("{module}/concat");
        let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
        layers.push(LayerSpec::new(&name, LayerOp::Concat, &refs));
        name
    }
}

/// Metaparameters of a Fire-module network.
///
/// Module `i` (0-based) has `e_i = base_e + incr_e * floor(i / freq)` expand
/// filters, of which `round(e_i * pct_3x3)` are 3x3, and
/// `round(e_i * sr)` squeeze filters. Rounding is half-up. The squeeze
/// layer must be narrower than the expand layer, except at `sr = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FireMeta {
    pub base_e: u64,
    pub incr_e: u64,
    pub freq: u64,
    pub pct_3x3: Rational,
    pub sr: Rational,
    #[serde(default = "default_modules")]
    pub num_modules: u64,
}

fn default_modules() -> u64 {
    8
}

impl FireMeta {
    /// The metaparameters that produce SqueezeNet.
    pub fn squeezenet() -> Self {
        FireMeta {
            base_e: 128,
            incr_e: 128,
            freq: 2,
            pct_3x3: Rational::new(1, 2),
            sr: Rational::new(1, 8),
            num_modules: 8,
        }
    }

    pub fn validate(&self) -> Result<(), FireError> {
        let bad = |m: &str| Err(FireError::InvalidMeta(m.to_string()));
        if self.base_e == 0 {
            return bad("base_e must be positive");
        }
        if self.freq == 0 {
            return bad("freq must be positive");
        }
        if self.num_modules == 0 {
            return bad("num_modules must be positive");
        }
        if self.pct_3x3 > Rational::integer(1) {
            return bad("pct_3x3 must be within [0, 1]");
        }
        if self.sr.is_zero() || self.sr > Rational::integer(1) {
            return bad("sr must be within (0, 1]");
        }
        Ok(())
    }

    /// Per-module dimensions plus a note for every value that was rounded.
    pub fn modules(&self) -> Result<(Vec<FireSpec>, Vec<String>), FireError> {
        self.validate()?;
        let mut specs = Vec::with_capacity(self.num_modules as usize);
        let mut notes = Vec::new();
        for i in 0..self.num_modules {
            let module = module_name(i);
            let e = self.base_e + self.incr_e * (i / self.freq);
            let (e3x3, r3) = self.pct_3x3.scale_round(e);
            let (s1x1, rs) = self.sr.scale_round(e);
            if r3 {
                notes.push(format!(
                    "{module}: e3x3 = {e} x {} rounded to {e3x3}",
                    self.pct_3x3
                ));
            }
            if rs {
                notes.push(format!(
                    "{module}: s1x1 = {e} x {} rounded to {s1x1}",
                    self.sr
                ));
            }
            let spec = FireSpec::new(s1x1, e - e3x3, e3x3);
            if s1x1 == e {
                // sr = 1 sits at the edge of the squeeze-ratio range; the
                // squeeze layer then no longer narrows the module.
                notes.push(format!("{module}: s1x1 equals the expand width {e}"));
            } else {
                spec.validate(&module)?;
            }
            if s1x1 == 0 {
                return Err(FireError::ZeroSqueeze { module });
            }
            specs.push(spec);
        }
        Ok((specs, notes))
    }
}

/// Fire module `i` is named `fire{i+2}`: `conv1` comes first.
pub fn module_name(i: u64) -> String {
    format!("fire{}", i + 2)
}

/// Stem, pooling placement and classifier around the Fire modules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroConfig {
    pub name: String,
    pub input: TensorShape,
    pub conv1_filters: u64,
    pub conv1_filter: u64,
    pub conv1_stride: u64,
    /// Module indices followed by a 3x3 stride-2 max-pool (`conv1` always is).
    pub pool_after: Vec<u64>,
    pub num_categories: u64,
    /// Dropout after the last module; costs nothing.
    pub dropout: bool,
}

impl Default for MacroConfig {
    fn default() -> Self {
        MacroConfig {
            name: "squeezenet".into(),
            input: TensorShape {
                batch: 1,
                channels: 3,
                height: 227,
                width: 227,
            },
            conv1_filters: 96,
            conv1_filter: 7,
            conv1_stride: 2,
            pool_after: vec![2, 6],
            num_categories: 1000,
            dropout: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub architecture: Architecture,
    pub modules: Vec<FireSpec>,
    /// One line per rounded metaparameter product.
    pub notes: Vec<String>,
}

pub fn generate(meta: &FireMeta, config: &MacroConfig) -> Result<Generated, FireError> {
    let (modules, notes) = meta.modules()?;
    let mut layers = vec![
        LayerSpec::input("data"),
        LayerSpec::conv(
            "conv1",
            "data",
            config.conv1_filters,
            config.conv1_filter,
            config.conv1_stride,
            0,
        ),
        LayerSpec::max_pool("maxpool1", "conv1", 3, 2),
    ];
    let mut prev = "maxpool1".to_string();
    for (i, spec) in modules.iter().enumerate() {
        let i = i as u64;
        prev = spec.append(&mut layers, &module_name(i), &prev);
        if config.pool_after.contains(&i) && i + 1 < meta.num_modules {
            let pool = format!("maxpool{}", i + 2);
            layers.push(LayerSpec::max_pool(&pool, &prev, 3, 2));
            prev = pool;
        }
    }
    let last = meta.num_modules + 1;
    if config.dropout {
        let drop = format!("drop{last}");
        layers.push(LayerSpec::new(&drop, LayerOp::Dropout, &[&prev]));
        prev = drop;
    }
    let classifier = format!("conv{}", last + 1);
    layers.push(LayerSpec::conv(
        &classifier,
        &prev,
        config.num_categories,
        1,
        1,
        0,
    ));
    layers.push(LayerSpec::global_avg_pool(
        format!("avgpool{}", last + 1),
        &classifier,
    ));

    let architecture = Architecture::new(config.name.clone(), config.input, layers);
    architecture.validate()?;
    Ok(Generated {
        architecture,
        modules,
        notes,
    })
}

/// `options ^ slots`, exactly.
pub fn count_design_space(slots: u32, options: u64) -> BigUint {
    BigUint::from(options).pow(slots)
}

/// The often-quoted "30 billion architectures" for 16 Fire-module slots with
/// 5 choices each is 5^15; 5^16 is about 152.6 billion. Flags either case.
pub fn design_space_note(slots: u32, options: u64) -> Option<String> {
    match (slots, options) {
        (16, 5) => Some(
            "5^16 = 152,587,890,625 (about 152.6 billion); the quoted figure of 30 billion matches 5^15 = 30,517,578,125"
                .into(),
        ),
        (15, 5) => Some(
            "5^15 = 30,517,578,125 matches the quoted 30 billion, which was stated for 16 slots (5^16 = 152,587,890,625)"
                .into(),
        ),
        _ => None,
    }
}
