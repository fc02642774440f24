//! Request and response types shared by the CLI and the HTTP service, and
//! the functions that compute every response. Both front ends go through
//! here, so the same request yields the same JSON either way.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use dse_core::arch::{analyze, AnalysisConfig, LayerKind, TensorShape};
use dse_core::catalog::{self, CatalogEntry, CatalogError, BUILTIN_NAMES};
use dse_core::firegen::{
    count_design_space, design_space_note, sweep, FireMeta, MacroConfig, MetaParam, SweepPoint,
};
use dse_core::modkit::{self, DeltaReport, ModSpec};
use dse_core::rational::Rational;
use dse_core::scale::{
    iteration_time, scaling_curve, training_time, ClusterSpec, CostEstimate, ScalingCurve,
    TrainPlan, TrainingEstimate,
};
use dse_core::units;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::workspace::{EntryKind, IndexEntry, Workspace, WorkspaceError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiError {
    /// Bad input. `path` locates the offending field in the request.
    Invalid {
        path: Option<String>,
        message: String,
    },
    NotFound(String),
    Internal(String),
}

impl ApiError {
    pub fn invalid(path: &str, message: impl Into<String>) -> Self {
        ApiError::Invalid {
            path: (!path.is_empty()).then(|| path.to_string()),
            message: message.into(),
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            ApiError::Invalid { .. } => 400,
            ApiError::NotFound(_) => 404,
            ApiError::Internal(_) => 500,
        }
    }

    /// 2 for anything the user can fix, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ApiError::Invalid { .. } | ApiError::NotFound(_) => 2,
            ApiError::Internal(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let (kind, path, message) = match self {
            ApiError::Invalid { path, message } => ("validation", path.clone(), message),
            ApiError::NotFound(m) => ("not_found", None, m),
            ApiError::Internal(m) => ("internal", None, m),
        };
        json!({ "error": { "kind": kind, "path": path, "message": message } })
    }

    /// Nests the error path under `prefix`.
    fn under(self, prefix: &str) -> Self {
        match self {
            ApiError::Invalid { path, message } => ApiError::Invalid {
                path: Some(join_path(prefix, path.as_deref())),
                message,
            },
            other => other,
        }
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApiError::Invalid {
                path: Some(path),
                message,
            } => write!(f, "{path}: {message}"),
            ApiError::Invalid {
                path: None,
                message,
            } => f.write_str(message),
            ApiError::NotFound(m) | ApiError::Internal(m) => f.write_str(m),
        }
    }
}

fn join_path(prefix: &str, path: Option<&str>) -> String {
    match path {
        None | Some("") | Some(".") => prefix.to_string(),
        Some(p) if prefix.is_empty() => p.to_string(),
        Some(p) if p.starts_with('[') => format!("{prefix}{p}"),
        Some(p) => format!("{prefix}.{p}"),
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        match &e {
            CatalogError::UnknownBuiltin(_) => ApiError::NotFound(e.to_string()),
            CatalogError::Io { .. } => ApiError::Internal(e.to_string()),
            CatalogError::Invalid { path, source } => ApiError::Invalid {
                path: path.clone(),
                message: source.to_string(),
            },
            _ => ApiError::Invalid {
                path: e.field_path().map(str::to_string),
                message: match &e {
                    CatalogError::Field { message, .. } | CatalogError::Parse { message, .. } => {
                        message.clone()
                    }
                    other => other.to_string(),
                },
            },
        }
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(e: WorkspaceError) -> Self {
        match e {
            WorkspaceError::InvalidName(_) => ApiError::invalid("name", e.to_string()),
            WorkspaceError::Catalog(c) => c.into(),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

/// Deserializes a JSON request body, reporting the path of the first bad
/// field.
pub fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = if inner.is_syntax() || inner.is_eof() {
            format!("malformed JSON: {inner}")
        } else {
            strip_position(&inner.to_string())
        };
        ApiError::Invalid {
            path: (path != ".").then_some(path),
            message,
        }
    })
}

fn from_value<T: DeserializeOwned>(value: Value, path: &str) -> Result<T, ApiError> {
    serde_path_to_error::deserialize(value).map_err(|e| ApiError::Invalid {
        path: Some(join_path(path, Some(&e.path().to_string()))),
        message: e.into_inner().to_string(),
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Where named architectures come from: the built-in catalog, then the
/// workspace if one is open.
#[derive(Clone, Default)]
pub struct Context {
    pub workspace: Option<Arc<Workspace>>,
}

impl Context {
    pub fn new(workspace: Option<Workspace>) -> Self {
        Context {
            workspace: workspace.map(Arc::new),
        }
    }

    pub fn entry(&self, name: &str) -> Result<CatalogEntry, ApiError> {
        if BUILTIN_NAMES.contains(&name) {
            return Ok(catalog::builtin(name)?);
        }
        if let Some(ws) = &self.workspace {
            if let Some(entry) = ws.architecture(name)? {
                return Ok(entry);
            }
        }
        Err(ApiError::NotFound(format!(
            "unknown architecture `{name}`; see the architecture list for valid names"
        )))
    }

    /// A request field holding either an architecture name or an inline
    /// description document.
    pub fn resolve(&self, value: &Value, field: &str) -> Result<CatalogEntry, ApiError> {
        match value {
            Value::String(name) => self.entry(name),
            Value::Object(_) => {
                catalog::from_value(value.clone()).map_err(|e| ApiError::from(e).under(field))
            }
            _ => Err(ApiError::invalid(
                field,
                "expected an architecture name or description object",
            )),
        }
    }

    fn save(
        &self,
        kind: EntryKind,
        name: &Option<String>,
        body: &impl Serialize,
    ) -> Result<Option<IndexEntry>, ApiError> {
        let Some(name) = name else {
            return Ok(None);
        };
        let Some(ws) = &self.workspace else {
            return Err(ApiError::invalid("save", "no workspace is configured"));
        };
        let mut text =
            serde_json::to_string_pretty(body).map_err(|e| ApiError::Internal(e.to_string()))?;
        text.push('\n');
        let outcome = ws
            .save(kind, name, &text)
            .map_err(|e| ApiError::from(e).under("save"))?;
        Ok(Some(outcome.entry))
    }
}

/// A response plus the workspace entry it was stored as, if requested.
#[derive(Debug, Serialize)]
pub struct Saved<T> {
    #[serde(flatten)]
    pub body: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saved: Option<IndexEntry>,
}

// ---- architectures -------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct ArchitectureSummary {
    pub name: String,
    pub source: &'static str,
    pub layers: usize,
    pub input: TensorShape,
    /// Reported figures; never computed.
    pub annotations: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ArchitectureList {
    pub architectures: Vec<ArchitectureSummary>,
}

fn summary(
    entry: &CatalogEntry,
    source: &'static str,
    sha256: Option<String>,
) -> ArchitectureSummary {
    ArchitectureSummary {
        name: entry.name().to_string(),
        source,
        layers: entry.architecture.layers.len(),
        input: entry.architecture.input_shape,
        annotations: entry.annotations.clone(),
        sha256,
    }
}

/// Built-ins in catalog order, then workspace entries by name.
pub fn list_architectures(ctx: &Context) -> Result<ArchitectureList, ApiError> {
    let mut architectures: Vec<ArchitectureSummary> = catalog::all_builtins()
        .iter()
        .map(|e| summary(e, "builtin", None))
        .collect();
    if let Some(ws) = &ctx.workspace {
        for index in ws.list(Some(EntryKind::Architecture))? {
            if let Some(entry) = ws.architecture(&index.name)? {
                architectures.push(summary(&entry, "workspace", Some(index.sha256)));
            }
        }
    }
    Ok(ArchitectureList { architectures })
}

pub fn architecture_document(ctx: &Context, name: &str) -> Result<Value, ApiError> {
    Ok(catalog::to_value(&ctx.entry(name)?))
}

#[derive(Debug, Serialize)]
pub struct SaveResponse {
    pub name: String,
    pub changed: bool,
    pub entry: IndexEntry,
}

/// Validates a description document and stores it in the workspace.
pub fn save_architecture(ctx: &Context, document: Value) -> Result<SaveResponse, ApiError> {
    let entry = catalog::from_value(document)?;
    if BUILTIN_NAMES.contains(&entry.name()) {
        return Err(ApiError::invalid(
            "name",
            format!("`{}` is reserved for a built-in architecture", entry.name()),
        ));
    }
    let Some(ws) = &ctx.workspace else {
        return Err(ApiError::Internal("no workspace is configured".into()));
    };
    let outcome = ws.save_architecture(&entry)?;
    Ok(SaveResponse {
        name: entry.name().to_string(),
        changed: outcome.changed,
        entry: outcome.entry,
    })
}

// ---- analysis ------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    pub batch: u64,
    pub bytes_per_value: u64,
    pub include_bias: bool,
    pub count_input_activations: bool,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        let c = AnalysisConfig::default();
        AnalysisParams {
            batch: c.batch,
            bytes_per_value: c.bytes_per_value,
            include_bias: c.include_bias,
            count_input_activations: c.count_input_activations,
        }
    }
}

impl AnalysisParams {
    /// From query-string pairs; `bytes` is accepted for `bytes_per_value`.
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, ApiError> {
        let mut p = AnalysisParams::default();
        for (k, v) in pairs {
            let int = |v: &str| {
                v.parse::<u64>().map_err(|_| {
                    ApiError::invalid(k, format!("expected a positive integer, got `{v}`"))
                })
            };
            let flag = |v: &str| match v {
                "true" | "1" => Ok(true),
                "false" | "0" => Ok(false),
                _ => Err(ApiError::invalid(
                    k,
                    format!("expected true or false, got `{v}`"),
                )),
            };
            match k {
                "batch" => p.batch = int(v)?,
                "bytes" | "bytes_per_value" => p.bytes_per_value = int(v)?,
                "include_bias" => p.include_bias = flag(v)?,
                "count_input_activations" => p.count_input_activations = flag(v)?,
                _ => return Err(ApiError::invalid(k, "unknown parameter")),
            }
        }
        Ok(p)
    }

    fn config(&self) -> Result<AnalysisConfig, ApiError> {
        if self.batch == 0 {
            return Err(ApiError::invalid("batch", "must be at least 1"));
        }
        if self.bytes_per_value == 0 {
            return Err(ApiError::invalid("bytes_per_value", "must be at least 1"));
        }
        Ok(AnalysisConfig {
            batch: self.batch,
            bytes_per_value: self.bytes_per_value,
            include_bias: self.include_bias,
            count_input_activations: self.count_input_activations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Readable {
    pub params: String,
    pub activations: String,
    pub flops: String,
}

impl Readable {
    fn new(params: u128, activations: u128, flops: u128) -> Self {
        Readable {
            params: units::bytes(params),
            activations: units::bytes(activations),
            flops: units::flops(flops),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowOut {
    pub name: String,
    pub kind: LayerKind,
    pub output_shape: TensorShape,
    /// Channels x height x width.
    pub output: String,
    pub param_bytes: u128,
    pub activation_bytes: u128,
    pub forward_flops: u128,
    pub in_totals: bool,
    pub display: Readable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TotalsOut {
    pub param_bytes: u128,
    pub activation_bytes: u128,
    pub forward_flops: u128,
    pub train_flops_per_batch: u128,
    /// Activation bytes over parameter bytes, 4 decimals.
    pub data_weight_ratio: Option<String>,
    pub display: Readable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisResponse {
    pub architecture: String,
    pub config: AnalysisConfig,
    pub rows: Vec<RowOut>,
    pub totals: TotalsOut,
    /// Reported figures; never computed.
    pub annotations: BTreeMap<String, String>,
}

pub fn analysis(
    entry: &CatalogEntry,
    params: &AnalysisParams,
) -> Result<AnalysisResponse, ApiError> {
    let config = params.config()?;
    let report =
        analyze(&entry.architecture, &config).map_err(|e| ApiError::invalid("", e.to_string()))?;
    let rows = report
        .rows
        .iter()
        .map(|r| RowOut {
            name: r.name.clone(),
            kind: r.kind,
            output_shape: r.output_shape,
            output: format!(
                "{}x{}x{}",
                r.output_shape.channels, r.output_shape.height, r.output_shape.width
            ),
            param_bytes: r.param_bytes,
            activation_bytes: r.activation_bytes,
            forward_flops: r.forward_flops,
            in_totals: r.in_totals,
            display: Readable::new(r.param_bytes, r.activation_bytes, r.forward_flops),
        })
        .collect();
    let t = report.totals;
    Ok(AnalysisResponse {
        architecture: report.architecture.clone(),
        config,
        rows,
        totals: TotalsOut {
            param_bytes: t.param_bytes,
            activation_bytes: t.activation_bytes,
            forward_flops: t.forward_flops,
            train_flops_per_batch: report.train_flops_per_batch,
            data_weight_ratio: report
                .data_weight_ratio()
                .ok()
                .map(|r| units::ratio_decimal(&r, 4)),
            display: Readable::new(t.param_bytes, t.activation_bytes, t.forward_flops),
        },
        annotations: entry.annotations.clone(),
    })
}

// ---- diff ----------------------------------------------------------------

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffRequest {
    /// Name or inline description.
    pub baseline: Value,
    /// Applied in order to `modified` (or to the baseline when absent).
    #[serde(default)]
    pub mods: Vec<ModSpec>,
    /// Optional second architecture, for comparing hand-edited networks.
    #[serde(default)]
    pub modified: Option<Value>,
    #[serde(default = "one")]
    pub batch: u64,
    /// Store the result in the workspace under this name.
    #[serde(default)]
    pub save: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct DiffResponse {
    pub mods: Vec<ModSpec>,
    #[serde(flatten)]
    pub report: DeltaReport,
}

pub fn diff(ctx: &Context, req: &DiffRequest) -> Result<Saved<DiffResponse>, ApiError> {
    if req.batch == 0 {
        return Err(ApiError::invalid("batch", "must be at least 1"));
    }
    let baseline = ctx.resolve(&req.baseline, "baseline")?.architecture;
    let mut modified = match &req.modified {
        Some(v) => ctx.resolve(v, "modified")?.architecture,
        None => baseline.clone(),
    };
    let mut notes = Vec::new();
    for (i, m) in req.mods.iter().enumerate() {
        let applied = modkit::apply(&modified, m)
            .map_err(|e| ApiError::invalid(&format!("mods[{i}]"), e.to_string()))?;
        modified = applied.architecture;
        notes.extend(applied.notes);
    }
    let mut report = modkit::diff(&baseline, &modified, &AnalysisConfig::new(req.batch))
        .map_err(|e| ApiError::invalid("", e.to_string()))?;
    report.notes = notes;
    let body = DiffResponse {
        mods: req.mods.clone(),
        report,
    };
    let saved = ctx.save(EntryKind::Report, &req.save, &body)?;
    Ok(Saved { body, saved })
}

// ---- sweep ---------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    /// `"squeezenet"` or a metaparameter object; defaults to SqueezeNet's.
    #[serde(default)]
    pub meta: Option<Value>,
    #[serde(default)]
    pub config: MacroConfig,
    pub vary: String,
    pub values: Vec<Rational>,
    #[serde(default = "one")]
    pub batch: u64,
    #[serde(default)]
    pub save: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SweepResponse {
    pub vary: MetaParam,
    pub batch: u64,
    pub template: FireMeta,
    pub points: Vec<SweepPoint>,
}

pub fn meta_from_value(value: Option<&Value>) -> Result<FireMeta, ApiError> {
    match value {
        None => Ok(FireMeta::squeezenet()),
        Some(Value::String(s)) if s == "squeezenet" => Ok(FireMeta::squeezenet()),
        Some(Value::String(s)) => Err(ApiError::invalid(
            "meta",
            format!("unknown metaparameter preset `{s}`; the only preset is `squeezenet`"),
        )),
        Some(v) => from_value(v.clone(), "meta"),
    }
}

pub fn run_sweep(ctx: &Context, req: &SweepRequest) -> Result<Saved<SweepResponse>, ApiError> {
    let template = meta_from_value(req.meta.as_ref())?;
    let vary = MetaParam::parse(&req.vary).ok_or_else(|| {
        ApiError::invalid(
            "vary",
            format!(
                "unknown metaparameter `{}`; expected sr, pct_3x3, base_e, incr_e or freq",
                req.vary
            ),
        )
    })?;
    if req.values.is_empty() {
        return Err(ApiError::invalid(
            "values",
            "at least one value is required",
        ));
    }
    if req.batch == 0 {
        return Err(ApiError::invalid("batch", "must be at least 1"));
    }
    // Report the first failing value with its position.
    for (i, v) in req.values.iter().enumerate() {
        sweep(&template, &req.config, vary, &[*v], 1)
            .map_err(|e| ApiError::invalid(&format!("values[{i}]"), e.to_string()))?;
    }
    let points = sweep(&template, &req.config, vary, &req.values, req.batch)
        .map_err(|e| ApiError::invalid("values", e.to_string()))?;
    let body = SweepResponse {
        vary,
        batch: req.batch,
        template,
        points,
    };
    let saved = ctx.save(EntryKind::Sweep, &req.save, &body)?;
    Ok(Saved { body, saved })
}

// ---- scale ---------------------------------------------------------------

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleRequest {
    pub arch: Value,
    pub cluster: ClusterSpec,
    /// Global batch per iteration; defaults to the plan's batch.
    #[serde(default)]
    pub batch: Option<u64>,
    /// Worker counts for a scaling curve.
    #[serde(default)]
    pub workers: Option<Vec<u64>>,
    #[serde(default)]
    pub plan: Option<TrainPlan>,
    #[serde(default)]
    pub save: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ScaleResponse {
    pub architecture: String,
    pub batch: u64,
    pub param_bytes: u128,
    pub forward_flops_per_sample: u128,
    pub cluster: ClusterSpec,
    pub iteration: CostEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<ScalingCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingEstimate>,
}

pub fn scale(ctx: &Context, req: &ScaleRequest) -> Result<Saved<ScaleResponse>, ApiError> {
    let entry = ctx.resolve(&req.arch, "arch")?;
    req.cluster
        .validate()
        .map_err(|e| ApiError::invalid("cluster", e.to_string()))?;
    let batch = req
        .batch
        .or(req.plan.map(|p| p.batch))
        .ok_or_else(|| ApiError::invalid("batch", "required when no plan is given"))?;
    if batch == 0 {
        return Err(ApiError::invalid("batch", "must be at least 1"));
    }
    let report = analyze(&entry.architecture, &AnalysisConfig::new(batch))
        .map_err(|e| ApiError::invalid("arch", e.to_string()))?;
    let invalid = |field: &'static str| {
        move |e: dse_core::scale::ScaleError| ApiError::invalid(field, e.to_string())
    };
    let iteration = iteration_time(&report, &req.cluster, batch).map_err(invalid("cluster"))?;
    let curve = match &req.workers {
        Some(ps) => {
            if let Some(i) = ps.iter().position(|&p| p == 0) {
                return Err(ApiError::invalid(
                    &format!("workers[{i}]"),
                    "must be at least 1",
                ));
            }
            Some(scaling_curve(&report, &req.cluster, batch, ps).map_err(invalid("workers"))?)
        }
        None => None,
    };
    let training = match &req.plan {
        Some(plan) => {
            let plan = TrainPlan { batch, ..*plan };
            Some(training_time(&report, &req.cluster, &plan).map_err(invalid("plan"))?)
        }
        None => None,
    };
    let body = ScaleResponse {
        architecture: entry.name().to_string(),
        batch,
        param_bytes: report.totals.param_bytes,
        forward_flops_per_sample: report.forward_flops_per_sample(),
        cluster: req.cluster,
        iteration,
        curve,
        training,
    };
    let saved = ctx.save(EntryKind::Curve, &req.save, &body)?;
    Ok(Saved { body, saved })
}

// ---- design-space count --------------------------------------------------

#[derive(Debug, Serialize)]
pub struct CountResponse {
    pub slots: u32,
    pub options: u64,
    /// Exact decimal digits; may exceed any JSON number type.
    pub count: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn count_space(slots: u32, options: u64) -> CountResponse {
    CountResponse {
        slots,
        options,
        count: count_design_space(slots, options).to_string(),
        note: design_space_note(slots, options),
    }
}

pub fn count_params<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<(u32, u64), ApiError> {
    let (mut slots, mut options) = (None, None);
    for (k, v) in pairs {
        match k {
            "slots" => {
                slots = Some(v.parse::<u32>().map_err(|_| {
                    ApiError::invalid(
                        "slots",
                        format!("expected a non-negative integer, got `{v}`"),
                    )
                })?)
            }
            "options" => {
                options = Some(v.parse::<u64>().map_err(|_| {
                    ApiError::invalid(
                        "options",
                        format!("expected a non-negative integer, got `{v}`"),
                    )
                })?)
            }
            _ => return Err(ApiError::invalid(k, "unknown parameter")),
        }
    }
    let slots = slots.ok_or_else(|| ApiError::invalid("slots", "required"))?;
    let options = options.ok_or_else(|| ApiError::invalid("options", "required"))?;
    // Keep the answer to a printable size.
    if slots as f64 * (options.max(1) as f64).log10() > 100_000.0 {
        return Err(ApiError::invalid(
            "slots",
            "result would exceed 100000 digits",
        ));
    }
    Ok((slots, options))
}
