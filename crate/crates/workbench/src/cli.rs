//! Command-line front end.

use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dse_core::catalog::{self, BUILTIN_NAMES};
use dse_core::modkit::ModSpec;
use dse_core::rational::Rational;
use dse_core::scale::{ClusterSpec, Topology, TrainPlan};
use serde::Serialize;
use serde_json::Value;

use crate::api::{
    self, AnalysisParams, ApiError, Context, DiffRequest, ScaleRequest, SweepRequest,
};
use crate::render;
use crate::workspace::Workspace;

#[derive(Debug, Parser)]
#[command(
    name = "dse",
    version,
    about = "CNN architecture cost accounting and design-space exploration"
)]
pub struct Cli {
    /// Workspace directory for user architectures and saved results.
    #[arg(long, global = true, env = "DSE_WORKSPACE")]
    pub workspace: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Built-in reference architectures.
    #[command(subcommand)]
    Catalog(CatalogCmd),
    /// Stored architectures and results.
    #[command(subcommand, name = "workspace")]
    Workspace(WorkspaceCmd),
    /// Per-layer parameter, activation and FLOP accounting.
    Analyze(AnalyzeArgs),
    /// Apply modifications and compare against the original.
    Diff(DiffArgs),
    /// Generate Fire-module networks across metaparameter values.
    Sweep(SweepArgs),
    /// Distributed data-parallel training cost.
    Scale(ScaleArgs),
    /// Number of architectures in a design space: options^slots.
    CountSpace(CountArgs),
    /// Run the HTTP/JSON service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum CatalogCmd {
    /// Names of built-in and workspace architectures.
    List {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Print or write an architecture as a `.cnn.json` document.
    Export {
        name: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-derive every built-in's published output sizes.
    Check,
}

#[derive(Debug, Subcommand)]
pub enum WorkspaceCmd {
    /// Validate a `.cnn.json` file and store it.
    Add { file: PathBuf },
    /// Every stored entry.
    List,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Built-in name, workspace name or `.cnn.json` path.
    pub arch: String,
    #[arg(long, default_value_t = 1)]
    pub batch: u64,
    /// Bytes per stored value.
    #[arg(long, default_value_t = 4)]
    pub bytes: u64,
    #[arg(long)]
    pub include_bias: bool,
    /// Count the input tensor in the activation total.
    #[arg(long)]
    pub count_input: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    pub arch: String,
    /// Inline modification (e.g. `remove:pool3`, `scale-filters:conv8:4`),
    /// inline JSON, or a JSON file holding one modification or a list.
    #[arg(long = "mod", value_name = "MOD")]
    pub mods: Vec<String>,
    /// Compare against this architecture (mods are applied to it).
    #[arg(long)]
    pub against: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub batch: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Store the report in the workspace.
    #[arg(long)]
    pub save: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `squeezenet` or a JSON file of metaparameters.
    pub meta: String,
    /// sr, pct_3x3, base_e, incr_e or freq.
    #[arg(long)]
    pub vary: String,
    /// Comma-separated values; fractions like 1/8 are exact.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub batch: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub save: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    pub arch: String,
    /// Comma-separated worker counts; the first is the reported iteration.
    #[arg(long, value_delimiter = ',', required = true)]
    pub workers: Vec<u64>,
    /// Bytes per second per node.
    #[arg(long)]
    pub bw: String,
    /// ps, tree or tree:<branching>.
    #[arg(long, default_value = "tree")]
    pub topology: String,
    /// Peak FLOP/s per worker.
    #[arg(long, default_value = "3.5e12")]
    pub throughput: String,
    /// Fraction of peak achieved.
    #[arg(long, default_value = "0.2")]
    pub efficiency: String,
    #[arg(long, default_value_t = 1024)]
    pub batch: u64,
    /// Training-set size, for whole-run estimates (needs --epochs).
    #[arg(long, requires = "epochs")]
    pub frames: Option<u64>,
    #[arg(long, requires = "frames")]
    pub epochs: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long)]
    pub save: Option<String>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub slots: u32,
    #[arg(long)]
    pub options: u64,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of static UI files served at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

fn json<T: Serialize>(value: &T) -> Result<String, ApiError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| ApiError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn context(workspace: &Option<PathBuf>) -> Result<Context, ApiError> {
    match workspace {
        Some(dir) => Ok(Context::new(Some(Workspace::open(dir)?))),
        None => Ok(Context::default()),
    }
}

/// A name stays a name unless it points at an existing file.
fn arch_value(arg: &str, flag: &str) -> Result<Value, ApiError> {
    let path = Path::new(arg);
    if !path.is_file() {
        return Ok(Value::String(arg.to_string()));
    }
    let text =
        fs::read_to_string(path).map_err(|e| ApiError::invalid(flag, format!("{arg}: {e}")))?;
    let entry =
        catalog::from_json(&text).map_err(|e| ApiError::invalid(flag, format!("{arg}: {e}")))?;
    Ok(catalog::to_value(&entry))
}

fn parse_mods(args: &[String]) -> Result<Vec<ModSpec>, ApiError> {
    let mut mods = Vec::new();
    for (i, arg) in args.iter().enumerate() {
        let flag = format!("--mod[{i}]");
        let t = arg.trim();
        let text = if t.starts_with('{') || t.starts_with('[') {
            Some(t.to_string())
        } else if Path::new(t).is_file() {
            Some(fs::read_to_string(t).map_err(|e| ApiError::invalid(&flag, format!("{t}: {e}")))?)
        } else {
            None
        };
        match text {
            Some(text) => {
                let value: Value = api::parse_body(text.as_bytes()).map_err(|e| ApiError::invalid(&flag, e.to_string()))?;
                let list = match value {
                    Value::Array(items) => items,
                    one => vec![one],
                };
                for item in list {
                    mods.push(serde_json::from_value(item).map_err(|e| ApiError::invalid(&flag, e.to_string()))?);
                }
            }
            None => mods.push(t.parse().map_err(|e: dse_core::modkit::ModError| {
                ApiError::invalid(&flag, format!("{e}; expected e.g. remove:pool3, scale-filters:conv8:4, filter-size:conv7:6x6:2x2, categories:4, input-channels:4, input-resolution:2"))
            })?),
        }
    }
    Ok(mods)
}

fn rational(s: &str, flag: &str) -> Result<Rational, ApiError> {
    s.parse()
        .map_err(|_| ApiError::invalid(flag, format!("expected a number or fraction, got `{s}`")))
}

fn render<T: Serialize>(
    format: Format,
    body: &T,
    table: impl FnOnce() -> String,
    csv: impl FnOnce() -> Option<String>,
) -> Result<String, ApiError> {
    match format {
        Format::Json => json(body),
        Format::Table => Ok(table()),
        Format::Csv => csv()
            .ok_or_else(|| ApiError::invalid("--format", "csv is not available for this output")),
    }
}

/// Runs a parsed command, returning what to print on success.
pub fn run(cli: Cli) -> Result<String, ApiError> {
    let ctx = context(&cli.workspace)?;
    match cli.command {
        Command::Catalog(CatalogCmd::List { format }) => {
            let list = api::list_architectures(&ctx)?;
            match format {
                Format::Json => json(&list),
                _ => Ok(list
                    .architectures
                    .iter()
                    .map(|a| format!("{}\t{}\t{} layers\n", a.name, a.source, a.layers))
                    .collect()),
            }
        }
        Command::Catalog(CatalogCmd::Export { name, output }) => {
            let text = catalog::to_json(&ctx.entry(&name)?);
            match output {
                Some(path) => {
                    fs::write(&path, text)
                        .map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Catalog(CatalogCmd::Check) => {
            let mut out = String::new();
            for name in BUILTIN_NAMES {
                let entry = catalog::builtin(name)?;
                catalog::self_check(&entry)
                    .map_err(|e| ApiError::Internal(format!("{name}: {e}")))?;
                out.push_str(&format!(
                    "{name}: {} published shapes reproduced\n",
                    entry.published_shapes.len()
                ));
            }
            Ok(out)
        }
        Command::Workspace(cmd) => {
            let Some(ws) = &ctx.workspace else {
                return Err(ApiError::invalid(
                    "--workspace",
                    "no workspace given (use --workspace or DSE_WORKSPACE)",
                ));
            };
            match cmd {
                WorkspaceCmd::Add { file } => {
                    let doc = arch_value(&file.to_string_lossy(), "file")?;
                    if doc.is_string() {
                        return Err(ApiError::invalid(
                            "file",
                            format!("{} is not a file", file.display()),
                        ));
                    }
                    json(&api::save_architecture(&ctx, doc)?)
                }
                WorkspaceCmd::List => Ok(ws
                    .list(None)?
                    .iter()
                    .map(|e| {
                        format!(
                            "{}\t{:?}\t{}\t{}\n",
                            e.name,
                            e.kind,
                            &e.sha256[..12],
                            e.created_at.to_rfc3339()
                        )
                    })
                    .collect()),
            }
        }
        Command::Analyze(a) => {
            let params = AnalysisParams {
                batch: a.batch,
                bytes_per_value: a.bytes,
                include_bias: a.include_bias,
                count_input_activations: a.count_input,
            };
            let entry = ctx.resolve(&arch_value(&a.arch, "arch")?, "arch")?;
            let r = api::analysis(&entry, &params)?;
            render(
                a.format,
                &r,
                || render::analysis_table(&r),
                || Some(render::analysis_csv(&r)),
            )
        }
        Command::Diff(d) => {
            let req = DiffRequest {
                baseline: arch_value(&d.arch, "arch")?,
                mods: parse_mods(&d.mods)?,
                modified: d
                    .against
                    .as_deref()
                    .map(|a| arch_value(a, "--against"))
                    .transpose()?,
                batch: d.batch,
                save: d.save,
            };
            let r = api::diff(&ctx, &req)?;
            render(
                d.format,
                &r,
                || render::diff_table(&r.body),
                || Some(render::diff_csv(&r.body)),
            )
        }
        Command::Sweep(s) => {
            let meta = if s.meta == "squeezenet" {
                Value::String(s.meta.clone())
            } else {
                let text = fs::read_to_string(&s.meta)
                    .map_err(|e| ApiError::invalid("meta", format!("{}: {e}", s.meta)))?;
                api::parse_body(text.as_bytes())
                    .map_err(|e| ApiError::invalid("meta", format!("{}: {e}", s.meta)))?
            };
            let values = s
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| rational(v, &format!("--values[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let req = SweepRequest {
                meta: Some(meta),
                config: Default::default(),
                vary: s.vary,
                values,
                batch: s.batch,
                save: s.save,
            };
            let r = api::run_sweep(&ctx, &req)?;
            render(
                s.format,
                &r,
                || render::sweep_table(&r.body),
                || Some(render::sweep_csv(&r.body)),
            )
        }
        Command::Scale(s) => {
            let topology: Topology =
                s.topology
                    .parse()
                    .map_err(|e: dse_core::scale::ScaleError| {
                        ApiError::invalid("--topology", e.to_string())
                    })?;
            let cluster = ClusterSpec {
                workers: s.workers[0],
                bandwidth: rational(&s.bw, "--bw")?,
                topology,
                throughput: rational(&s.throughput, "--throughput")?,
                efficiency: rational(&s.efficiency, "--efficiency")?,
            };
            let plan = match (s.frames, s.epochs) {
                (Some(dataset_frames), Some(epochs)) => Some(TrainPlan {
                    dataset_frames,
                    epochs,
                    batch: s.batch,
                }),
                _ => None,
            };
            let req = ScaleRequest {
                arch: arch_value(&s.arch, "arch")?,
                cluster,
                batch: Some(s.batch),
                workers: Some(s.workers),
                plan,
                save: s.save,
            };
            let r = api::scale(&ctx, &req)?;
            render(
                s.format,
                &r,
                || render::scale_table(&r.body),
                || render::scale_csv(&r.body),
            )
        }
        Command::CountSpace(c) => {
            let (slots, options) = api::count_params([
                ("slots", c.slots.to_string().as_str()),
                ("options", c.options.to_string().as_str()),
            ])?;
            let r = api::count_space(slots, options);
            if c.json {
                json(&r)
            } else {
                let note = r.note.map(|n| format!("note: {n}\n")).unwrap_or_default();
                Ok(format!("{}\n{note}", r.count))
            }
        }
        Command::Serve(s) => {
            tracing_subscriber::fmt().with_target(false).init();
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| ApiError::Internal(e.to_string()))?;
            let ctx = match ctx.workspace {
                Some(_) => ctx,
                None => context(&Some(PathBuf::from("dse-workspace")))?,
            };
            let addr = SocketAddr::new(s.host, s.port);
            runtime
                .block_on(crate::server::serve(addr, ctx, s.ui))
                .map_err(|e| ApiError::Internal(format!("{addr}: {e}")))?;
            Ok(String::new())
        }
    }
}

/// Parses `args`, runs the command and writes to the given streams.
/// Returns the process exit code: 0 on success, 2 for bad input, 1 otherwise.
pub fn main_with<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(
                if code == 0 {
                    out as &mut dyn Write
                } else {
                    err as &mut dyn Write
                },
                "{}",
                e.render()
            );
            return code;
        }
    };
    match run(cli) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
