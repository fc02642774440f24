use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arch::{analyze, AnalysisConfig, Architecture};
use crate::rational::Rational;

use super::{generate, FireError, FireMeta, MacroConfig};

/// The metaparameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaParam {
    Sr,
    Pct3x3,
    BaseE,
    IncrE,
    Freq,
}

impl MetaParam {
    pub fn parse(s: &str) -> Option<MetaParam> {
        match s {
            "sr" => Some(MetaParam::Sr),
            "pct_3x3" | "pct3x3" | "pct" => Some(MetaParam::Pct3x3),
            "base_e" => Some(MetaParam::BaseE),
            "incr_e" => Some(MetaParam::IncrE),
            "freq" => Some(MetaParam::Freq),
            _ => None,
        }
    }

    fn set(self, meta: &FireMeta, value: Rational) -> Result<FireMeta, FireError> {
        let integer = || {
            if value.denom() != 1 {
                Err(FireError::InvalidMeta(format!(
                    "{self:?} takes integer values, got {value}"
                )))
            } else {
                Ok(value.numer())
            }
        };
        let mut m = *meta;
        match self {
            MetaParam::Sr => m.sr = value,
            MetaParam::Pct3x3 => m.pct_3x3 = value,
            MetaParam::BaseE => m.base_e = integer()?,
            MetaParam::IncrE => m.incr_e = integer()?,
            MetaParam::Freq => m.freq = integer()?,
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepPoint {
    pub value: Rational,
    pub meta: FireMeta,
    #[serde(skip)]
    pub architecture: Architecture,
    pub param_bytes: u128,
    pub forward_flops: u128,
    pub activation_bytes: u128,
    pub notes: Vec<String>,
}

/// Generates and analyzes one network per value. Points are evaluated in
/// parallel and returned in the order of `values`.
pub fn sweep(
    template: &FireMeta,
    config: &MacroConfig,
    vary: MetaParam,
    values: &[Rational],
    batch: u64,
) -> Result<Vec<SweepPoint>, FireError> {
    values
        .par_iter()
        .map(|&value| {
            let meta = vary.set(template, value)?;
            let generated = generate(&meta, config)?;
            let report = analyze(&generated.architecture, &AnalysisConfig::new(batch))?;
            Ok(SweepPoint {
                value,
                meta,
                architecture: generated.architecture,
                param_bytes: report.totals.param_bytes,
                forward_flops: report.totals.forward_flops,
                activation_bytes: report.totals.activation_bytes,
                notes: generated.notes,
            })
        })
        .collect()
}

/// `value,param_bytes,flops,activation_bytes`, one line per point.
pub fn to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("value,param_bytes,flops,activation_bytes\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.value, p.param_bytes, p.forward_flops, p.activation_bytes
        ));
    }
    out
}
