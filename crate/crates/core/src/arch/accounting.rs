use num_rational::Ratio;
use serde::Serialize;

use super::{
    layer_activation_bytes, layer_bias_bytes, layer_forward_flops, layer_params_bytes,
    propagate_shape, ArchError, Architecture, LayerKind, LayerOp, TensorShape,
};

/// Knobs of a cost analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnalysisConfig {
    pub batch: u64,
    pub bytes_per_value: u64,
    /// Add one bias value per filter to the parameter count.
    pub include_bias: bool,
    /// Count the input data tensor in the activation total. The input row
    /// always reports its size either way.
    pub count_input_activations: bool,
}

impl AnalysisConfig {
    pub fn new(batch: u64) -> Self {
        AnalysisConfig {
            batch,
            ..Default::default()
        }
    }

    pub fn with_bytes_per_value(self, bytes_per_value: u64) -> Self {
        AnalysisConfig {
            bytes_per_value,
            ..self
        }
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            batch: 1,
            bytes_per_value: 4,
            include_bias: false,
            count_input_activations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerRow {
    pub name: String,
    pub kind: LayerKind,
    pub output_shape: TensorShape,
    pub param_bytes: u128,
    pub activation_bytes: u128,
    pub forward_flops: u128,
    /// Whether this row's activations are part of `totals.activation_bytes`.
    pub in_totals: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Totals {
    pub param_bytes: u128,
    pub activation_bytes: u128,
    pub forward_flops: u128,
}

/// Per-layer and end-to-end parameter, activation and FLOP accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccountingReport {
    pub architecture: String,
    pub config: AnalysisConfig,
    pub rows: Vec<LayerRow>,
    pub totals: Totals,
    /// Forward + backward cost of one batch: three forward passes.
    pub train_flops_per_batch: u128,
}

/// Walks the architecture in topological order, propagating shapes and
/// summing the per-layer costs with exact integer arithmetic.
pub fn analyze(
    arch: &Architecture,
    config: &AnalysisConfig,
) -> Result<AccountingReport, ArchError> {
    if config.batch == 0 {
        return Err(ArchError::InvalidConfig("batch must be positive".into()));
    }
    if config.bytes_per_value == 0 {
        return Err(ArchError::InvalidConfig(
            "bytes_per_value must be positive".into(),
        ));
    }
    let order = arch.validate()?;
    let bpv = config.bytes_per_value;

    let mut shapes: Vec<Option<TensorShape>> = vec![None; arch.layers.len()];
    let mut rows = Vec::with_capacity(arch.layers.len());
    let mut totals = Totals::default();

    for &i in &order {
        let layer = &arch.layers[i];
        let (out, params, flops) = if let LayerOp::Input = layer.op {
            (arch.input_shape.with_batch(config.batch), 0, 0)
        } else {
            let inputs: Vec<TensorShape> = layer
                .inputs
                .iter()
                .map(|p| {
                    let j = arch.position(p).expect("validated predecessor");
                    shapes[j].expect("predecessors precede in topological order")
                })
                .collect();
            let out = propagate_shape(layer, &inputs)?;
            let mut params = layer_params_bytes(layer, &inputs[0], bpv)?;
            if config.include_bias {
                params += layer_bias_bytes(layer, bpv);
            }
            let flops = layer_forward_flops(layer, &inputs[0], &out)?;
            (out, params, flops)
        };
        shapes[i] = Some(out);

        let activation_bytes = layer_activation_bytes(&out, bpv);
        let in_totals = config.count_input_activations || !matches!(layer.op, LayerOp::Input);
        totals.param_bytes = add(totals.param_bytes, params)?;
        totals.forward_flops = add(totals.forward_flops, flops)?;
        if in_totals {
            totals.activation_bytes = add(totals.activation_bytes, activation_bytes)?;
        }
        rows.push(LayerRow {
            name: layer.name.clone(),
            kind: layer.kind(),
            output_shape: out,
            param_bytes: params,
            activation_bytes,
            forward_flops: flops,
            in_totals,
        });
    }

    let train_flops_per_batch = totals
        .forward_flops
        .checked_mul(3)
        .ok_or(ArchError::Overflow)?;
    Ok(AccountingReport {
        architecture: arch.name.clone(),
        config: *config,
        rows,
        totals,
        train_flops_per_batch,
    })
}

fn add(a: u128, b: u128) -> Result<u128, ArchError> {
    a.checked_add(b).ok_or(ArchError::Overflow)
}

impl AccountingReport {
    pub fn row(&self, name: &str) -> Option<&LayerRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn batch(&self) -> u64 {
        self.config.batch
    }

    /// Activation bytes over parameter bytes at this report's batch size.
    pub fn data_weight_ratio(&self) -> Result<Ratio<u128>, ArchError> {
        data_weight_ratio(self)
    }

    /// Forward FLOPs for a single sample. Exact because every FLOP count is
    /// linear in the batch.
    pub fn forward_flops_per_sample(&self) -> u128 {
        self.totals.forward_flops / self.config.batch as u128
    }
}

pub fn data_weight_ratio(report: &AccountingReport) -> Result<Ratio<u128>, ArchError> {
    if report.totals.param_bytes == 0 {
        return Err(ArchError::ZeroParameters(report.architecture.clone()));
    }
    Ok(Ratio::new(
        report.totals.activation_bytes,
        report.totals.param_bytes,
    ))
}
