use std::collections::{HashMap, HashSet};

use num_rational::Ratio;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::arch::{analyze, AccountingReport, AnalysisConfig, Architecture, LayerRow, TensorShape};
use crate::units;

use super::{apply_all, ModError, ModSpec};

/// Modified over baseline for one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    Ratio(Ratio<u128>),
    /// Zero on both sides, shown as an unchanged `1x`.
    BothZero,
    /// Zero in the baseline, non-zero after the change.
    FromZero,
}

impl Delta {
    pub fn of(baseline: u128, modified: u128) -> Delta {
        match (baseline, modified) {
            (0, 0) => Delta::BothZero,
            (0, _) => Delta::FromZero,
            (b, m) => Delta::Ratio(Ratio::new(m, b)),
        }
    }

    pub fn is_unchanged(&self) -> bool {
        match self {
            Delta::Ratio(r) => r.numer() == r.denom(),
            Delta::BothZero => true,
            Delta::FromZero => false,
        }
    }

    /// Two significant figures, e.g. `1.3x`.
    pub fn display(&self) -> String {
        match self {
            Delta::Ratio(r) => format!("{}x", units::ratio_sig_figs(r, 2)),
            Delta::BothZero => "1x".to_string(),
            Delta::FromZero => "new".to_string(),
        }
    }

    /// Two significant figures without the `x`, or `None` for `FromZero`.
    pub fn multiplier(&self) -> Option<String> {
        match self {
            Delta::Ratio(r) => Some(units::ratio_sig_figs(r, 2)),
            Delta::BothZero => Some("1".to_string()),
            Delta::FromZero => None,
        }
    }
}

impl Serialize for Delta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Delta", 4)?;
        match self {
            Delta::Ratio(r) => {
                st.serialize_field("kind", "ratio")?;
                st.serialize_field("exact", &format!("{}/{}", r.numer(), r.denom()))?;
                st.serialize_field("value", &units::ratio_decimal(r, 4))?;
            }
            Delta::BothZero => {
                st.serialize_field("kind", "both_zero")?;
                st.serialize_field("exact", "1/1")?;
                st.serialize_field("value", "1.0000")?;
            }
            Delta::FromZero => {
                st.serialize_field("kind", "from_zero")?;
                st.serialize_field("exact", &Option::<String>::None)?;
                st.serialize_field("value", &Option::<String>::None)?;
            }
        }
        st.serialize_field("display", &self.display())?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Presence {
    Both,
    BaselineOnly,
    ModifiedOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaRow {
    pub name: String,
    pub presence: Presence,
    pub baseline_shape: Option<TensorShape>,
    pub modified_shape: Option<TensorShape>,
    /// `None` unless the layer exists on both sides.
    pub activations: Option<Delta>,
    pub params: Option<Delta>,
    pub flops: Option<Delta>,
    /// Output shape, an input shape, hyperparameters or wiring differ.
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaTotals {
    pub activations: Delta,
    pub params: Delta,
    pub flops: Delta,
    pub activations_multiplier: Option<String>,
    pub params_multiplier: Option<String>,
    pub flops_multiplier: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaReport {
    pub baseline: AccountingReport,
    pub modified: AccountingReport,
    pub rows: Vec<DeltaRow>,
    pub totals: DeltaTotals,
    pub classification: Classification,
    /// First changed layer in topological order of the modified network.
    pub first_changed: Option<String>,
    /// Rounding notes from applying modifications.
    pub notes: Vec<String>,
}

impl DeltaReport {
    pub fn row(&self, name: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// Shapes feeding each layer, by layer name.
fn input_shapes(
    arch: &Architecture,
    report: &AccountingReport,
) -> HashMap<String, Vec<TensorShape>> {
    let out: HashMap<&str, TensorShape> = report
        .rows
        .iter()
        .map(|r| (r.name.as_str(), r.output_shape))
        .collect();
    arch.layers
        .iter()
        .map(|l| {
            let shapes = l.inputs.iter().map(|p| out[p.as_str()]).collect();
            (l.name.clone(), shapes)
        })
        .collect()
}

/// Compares two analyzable architectures layer by layer (matched by name).
///
/// A change is global when it reaches the output: the output layer's
/// dimensions differ and the output layer is neither the first changed
/// layer nor one of its direct consumers. Everything else is local.
pub fn diff(
    baseline: &Architecture,
    modified: &Architecture,
    config: &AnalysisConfig,
) -> Result<DeltaReport, ModError> {
    let base = analyze(baseline, config)?;
    let modi = analyze(modified, config)?;
    let base_in = input_shapes(baseline, &base);
    let mod_in = input_shapes(modified, &modi);

    let base_rows: HashMap<&str, &LayerRow> =
        base.rows.iter().map(|r| (r.name.as_str(), r)).collect();
    let base_pos: HashMap<&str, usize> = base
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.as_str(), i))
        .collect();
    let mod_names: HashSet<&str> = modi.rows.iter().map(|r| r.name.as_str()).collect();

    let baseline_only = |r: &LayerRow| DeltaRow {
        name: r.name.clone(),
        presence: Presence::BaselineOnly,
        baseline_shape: Some(r.output_shape),
        modified_shape: None,
        activations: None,
        params: None,
        flops: None,
        changed: true,
    };

    // Modified order, with removed layers slotted in at their old position.
    let mut rows = Vec::new();
    let mut next_base = 0;
    for m in &modi.rows {
        let Some(&p) = base_pos.get(m.name.as_str()) else {
            rows.push(DeltaRow {
                name: m.name.clone(),
                presence: Presence::ModifiedOnly,
                baseline_shape: None,
                modified_shape: Some(m.output_shape),
                activations: None,
                params: None,
                flops: None,
                changed: true,
            });
            continue;
        };
        while next_base < p {
            let b = &base.rows[next_base];
            if !mod_names.contains(b.name.as_str()) {
                rows.push(baseline_only(b));
            }
            next_base += 1;
        }
        next_base = next_base.max(p + 1);
        let b = base_rows[m.name.as_str()];
        let changed = b.output_shape != m.output_shape
            || base_in[&m.name] != mod_in[&m.name]
            || baseline.layer(&m.name) != modified.layer(&m.name);
        rows.push(DeltaRow {
            name: m.name.clone(),
            presence: Presence::Both,
            baseline_shape: Some(b.output_shape),
            modified_shape: Some(m.output_shape),
            activations: Some(Delta::of(b.activation_bytes, m.activation_bytes)),
            params: Some(Delta::of(b.param_bytes, m.param_bytes)),
            flops: Some(Delta::of(b.forward_flops, m.forward_flops)),
            changed,
        });
    }
    for b in &base.rows[next_base..] {
        if !mod_names.contains(b.name.as_str()) {
            rows.push(baseline_only(b));
        }
    }

    let first_changed = modi
        .rows
        .iter()
        .map(|r| r.name.as_str())
        .find(|n| rows.iter().any(|d| d.name == *n && d.changed))
        .map(str::to_string);

    let classification = classify(modified, &rows, first_changed.as_deref());

    let t = |b: u128, m: u128| Delta::of(b, m);
    let activations = t(base.totals.activation_bytes, modi.totals.activation_bytes);
    let params = t(base.totals.param_bytes, modi.totals.param_bytes);
    let flops = t(base.totals.forward_flops, modi.totals.forward_flops);
    Ok(DeltaReport {
        totals: DeltaTotals {
            activations_multiplier: activations.multiplier(),
            params_multiplier: params.multiplier(),
            flops_multiplier: flops.multiplier(),
            activations,
            params,
            flops,
        },
        baseline: base,
        modified: modi,
        rows,
        classification,
        first_changed,
        notes: Vec::new(),
    })
}

fn classify(modified: &Architecture, rows: &[DeltaRow], first: Option<&str>) -> Classification {
    let Some(first) = first else {
        // Only removals without any rewiring, or nothing at all.
        return if rows.iter().any(|r| r.changed) {
            Classification::Global
        } else {
            Classification::Local
        };
    };
    let near: HashSet<&str> = std::iter::once(first)
        .chain(modified.successors(first))
        .collect();
    let reaches_output = modified.sinks().into_iter().any(|sink| {
        let changed = rows.iter().any(|r| r.name == sink && r.changed);
        changed && !near.contains(sink)
    });
    if reaches_output {
        Classification::Global
    } else {
        Classification::Local
    }
}

/// Applies `mods` to `baseline` and diffs the result against it.
pub fn diff_mods(
    baseline: &Architecture,
    mods: &[ModSpec],
    config: &AnalysisConfig,
) -> Result<DeltaReport, ModError> {
    let applied = apply_all(baseline, mods)?;
    let mut report = diff(baseline, &applied.architecture, config)?;
    report.notes = applied.notes;
    Ok(report)
}
