//! Command implementations behind the `biaslens` binary.
//!
//! Every command takes a resolved [`CliConfig`] and returns the rendered
//! document; [`run`] handles argument parsing, the optional JSON config file
//! named by `BIASLENS_CONFIG`, output routing and exit codes.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 inconsistent evidence,
//! 4 environment (socket bind, output file). Errors are printed as one line
//! `error:<category>:<message>`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use biaslens::beliefnet::{query_posterior, Evidence, NetworkParams};
use biaslens::dataset::{parse_attributes, parse_dataset, AttributeSchema, Dataset};
use biaslens::metrics::{group_metrics, DecisionPolicy, PolicyKind, TopK};
use biaslens::report::{
    read_metrics_csv, render_metrics, render_posterior, render_risk, render_sweep, Format,
    Posterior,
};
use biaslens::risk::{
    parse_impact_grid, parse_theta_grid, risk_report, risk_report_from_metrics, whatif_sweep,
    ImpactProfile,
};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

pub const CONFIG_ENV: &str = "BIASLENS_CONFIG";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "biaslens-sessions";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(category: &'static str, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category {
            "evidence" => 3,
            "bind" | "io" => 4,
            _ => 2,
        }
    }

    /// Single line, newlines flattened.
    pub fn line(&self) -> String {
        format!(
            "error:{}:{}",
            self.category,
            self.message.replace('\n', " ")
        )
    }
}

impl From<biaslens::Error> for CliError {
    fn from(e: biaslens::Error) -> Self {
        // reading inputs is an input problem, not an environment one
        let category = match e.category() {
            "io" => "input",
            c => c,
        };
        Self::new(category, e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "biaslens",
    version,
    about = "Demographic bias audits for face identification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-group accuracy, FNMR and FMR.
    Audit(AuditArgs),
    /// Per-group risk of bias and per-subject ensemble risk.
    Risk(RiskArgs),
    /// Posterior of one network node given evidence.
    Infer(InferArgs),
    /// Risk reports over a grid of thresholds and impacts.
    Sweep(SweepArgs),
    /// HTTP service over uploaded sessions.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Schema JSON; the built-in six-attribute schema when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// table, json or csv
    #[arg(long)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PolicyArgs {
    /// rank_threshold or score_threshold
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Positive integer or `all`.
    #[arg(long = "top-k")]
    pub top_k: Option<TopK>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RiskArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long = "impact-fmr")]
    pub impact_fmr: Option<f64>,
    #[arg(long = "impact-fnmr")]
    pub impact_fnmr: Option<f64>,
    /// Metrics CSV with counts, used instead of predictions.
    #[arg(long, conflicts_with = "predictions")]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub query: String,
    /// node=value, repeatable.
    #[arg(long)]
    pub evidence: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "min-support")]
    pub min_support: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long = "top-k")]
    pub top_k: Option<TopK>,
    /// Comma-separated thresholds.
    #[arg(long)]
    pub theta: Option<String>,
    /// Comma-separated FMR impacts, crossed with the FNMR impacts.
    #[arg(long = "impact-fmr")]
    pub impact_fmr: Option<String>,
    #[arg(long = "impact-fnmr")]
    pub impact_fnmr: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    /// Session directory root.
    #[arg(long = "data-dir")]
    pub data_dir: Option<PathBuf>,
    /// Upload cap in bytes.
    #[arg(long = "max-upload")]
    pub max_upload: Option<usize>,
}

/// Contents of the `BIASLENS_CONFIG` file. Relative paths resolve against
/// the file's directory. Flags override every field.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub predictions: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub policy: Option<PolicyKind>,
    pub theta: Option<f64>,
    pub top_k: Option<TopK>,
    pub impact_fmr: Option<f64>,
    pub impact_fnmr: Option<f64>,
    pub alpha: Option<f64>,
    pub min_support: Option<u64>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
    pub bind: Option<String>,
    pub data_dir: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::new("input", format!("config {}: {e}", path.display())))?;
        let mut cfg: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| CliError::new("input", format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.predictions,
            &mut cfg.attributes,
            &mut cfg.schema,
            &mut cfg.metrics,
            &mut cfg.out,
            &mut cfg.data_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn format(&self) -> Result<Option<Format>> {
        self.format
            .as_deref()
            .map(str::parse)
            .transpose()
            .map_err(CliError::from)
    }
}

/// Fully resolved inputs, policy, impacts and output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub predictions_path: Option<PathBuf>,
    pub attributes_path: Option<PathBuf>,
    pub schema_path: Option<PathBuf>,
    pub metrics_path: Option<PathBuf>,
    pub policy: DecisionPolicy,
    pub profile: ImpactProfile,
    pub alpha: f64,
    pub min_support: u64,
    pub output_format: Format,
    pub output_path: Option<PathBuf>,
}

impl Default for CliConfig {
    fn default() -> Self {
        let net = NetworkParams::default();
        Self {
            predictions_path: None,
            attributes_path: None,
            schema_path: None,
            metrics_path: None,
            policy: net.policy,
            profile: ImpactProfile::default(),
            alpha: net.alpha,
            min_support: net.min_support,
            output_format: Format::Table,
            output_path: None,
        }
    }
}

impl CliConfig {
    /// Flags first, then the config file, then defaults. A `--theta` without
    /// `--policy` keeps the configured (or default rank_threshold) policy.
    fn resolve(
        input: &InputArgs,
        policy: &PolicyArgs,
        output: &OutputArgs,
        file: &ConfigFile,
    ) -> Result<Self> {
        let d = CliConfig::default();
        let kind = policy.policy.or(file.policy).unwrap_or(d.policy.kind);
        let theta = policy.theta.or(file.theta).unwrap_or(d.policy.theta);
        let top_k = policy.top_k.or(file.top_k).unwrap_or(d.policy.top_k);
        Ok(Self {
            predictions_path: input
                .predictions
                .clone()
                .or_else(|| file.predictions.clone()),
            attributes_path: input.attributes.clone().or_else(|| file.attributes.clone()),
            schema_path: input.schema.clone().or_else(|| file.schema.clone()),
            metrics_path: file.metrics.clone(),
            policy: DecisionPolicy::new(kind, theta, top_k)?,
            profile: ImpactProfile::new(
                file.impact_fmr.unwrap_or(d.profile.impact_fmr),
                file.impact_fnmr.unwrap_or(d.profile.impact_fnmr),
            )?,
            alpha: file.alpha.unwrap_or(d.alpha),
            min_support: file.min_support.unwrap_or(d.min_support),
            output_format: match output.format {
                Some(f) => f,
                None => file.format()?.unwrap_or(d.output_format),
            },
            output_path: output.out.clone().or_else(|| file.out.clone()),
        })
    }

    fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| CliError::new("usage", format!("--{flag} is required")))
    }

    pub fn load_schema(&self) -> Result<AttributeSchema> {
        match &self.schema_path {
            None => Ok(AttributeSchema::default_schema()),
            Some(p) => Ok(AttributeSchema::from_json(&read_text(p)?)?),
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let schema = self.load_schema()?;
        let preds = Self::required(&self.predictions_path, "predictions")?;
        let attrs = Self::required(&self.attributes_path, "attributes")?;
        Ok(parse_dataset(open(preds)?, open(attrs)?, &schema)?)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::new("input", format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| CliError::new("input", format!("{}: {e}", path.display())))
}

pub fn cmd_audit(config: &CliConfig) -> Result<String> {
    let dataset = config.load_dataset()?;
    Ok(render_metrics(
        &group_metrics(&dataset, &config.policy),
        config.output_format,
    ))
}

/// Risk from a dataset, or from a metrics CSV when `metrics_path` is set (the
/// attributes file is then optional and only feeds the ensemble section).
pub fn cmd_risk(config: &CliConfig) -> Result<String> {
    let report = match &config.metrics_path {
        Some(m) => {
            let metrics = read_metrics_csv(open(m)?)?;
            let subjects = match &config.attributes_path {
                Some(a) => parse_attributes(open(a)?, &config.load_schema()?)?,
                None => Vec::new(),
            };
            risk_report_from_metrics(&metrics, &subjects, &config.profile)?
        }
        None => risk_report(&config.load_dataset()?, &config.policy, &config.profile)?,
    };
    Ok(render_risk(&report, config.output_format))
}

fn parse_evidence(pairs: &[String]) -> Result<Evidence> {
    let mut evidence = Evidence::new();
    for pair in pairs {
        let (node, value) = pair
            .split_once('=')
            .filter(|(n, v)| !n.is_empty() && !v.is_empty())
            .ok_or_else(|| {
                CliError::new("usage", format!("evidence `{pair}` is not node=value"))
            })?;
        if evidence.assignments.contains_key(node) {
            return Err(CliError::new(
                "usage",
                format!("evidence names `{node}` twice"),
            ));
        }
        evidence = evidence.with(node, value);
    }
    Ok(evidence)
}

pub fn cmd_infer(config: &CliConfig, query: &str, evidence: &[String]) -> Result<String> {
    let evidence = parse_evidence(evidence)?;
    let dataset = config.load_dataset()?;
    let params = NetworkParams {
        policy: config.policy,
        alpha: config.alpha,
        min_support: config.min_support,
    };
    let net = biaslens::beliefnet::build_network(
        &dataset,
        &params.policy,
        params.alpha,
        params.min_support,
    )?;
    let (distribution, rates) = query_posterior(&net, query, &evidence)?;
    Ok(render_posterior(
        &Posterior {
            params: &params,
            query,
            evidence: &evidence,
            distribution: &distribution,
            rates: rates.as_ref(),
        },
        config.output_format,
    ))
}

pub fn cmd_sweep(config: &CliConfig, profiles: &[ImpactProfile], thetas: &[f64]) -> Result<String> {
    let dataset = config.load_dataset()?;
    let points = whatif_sweep(&dataset, &config.policy, profiles, thetas)?;
    Ok(render_sweep(
        &config.policy,
        profiles,
        thetas,
        &points,
        config.output_format,
    ))
}

fn number_list(text: &str, flag: &str) -> Result<Vec<f64>> {
    let items: Vec<&str> = text
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if items.is_empty() {
        return Err(CliError::new("usage", format!("--{flag} grid is empty")));
    }
    items
        .iter()
        .map(|t| {
            t.parse::<f64>().map_err(|_| {
                CliError::new("usage", format!("--{flag} value `{t}` is not a number"))
            })
        })
        .collect()
}

/// Cartesian product of the two impact lists, FMR-major.
pub fn impact_grid(fmr: &str, fnmr: &str) -> Result<Vec<ImpactProfile>> {
    let a = number_list(fmr, "impact-fmr")?;
    let b = number_list(fnmr, "impact-fnmr")?;
    let pairs: Vec<String> = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| format!("{x}:{y}")))
        .collect();
    Ok(parse_impact_grid(&pairs.join(","))?)
}

pub fn theta_grid(text: &str) -> Result<Vec<f64>> {
    number_list(text, "theta")?;
    Ok(parse_theta_grid(text)?)
}

pub fn cmd_serve(
    bind: &str,
    data_dir: &Path,
    max_upload: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let store = biaslens_service::SessionStore::open(data_dir)
        .map_err(|e| CliError::new("io", format!("{}: {e}", data_dir.display())))?;
    let listener = std::net::TcpListener::bind(bind)
        .map_err(|e| CliError::new("bind", format!("cannot bind {bind}: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| CliError::new("bind", e.to_string()))?;
    let addr = listener
        .local_addr()
        .map_err(|e| CliError::new("bind", e.to_string()))?;
    let _ = writeln!(out, "listening on http://{addr}");
    let _ = out.flush();

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new("io", e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)
            .map_err(|e| CliError::new("bind", e.to_string()))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        biaslens_service::serve(listener, Arc::new(store), max_upload, shutdown)
            .await
            .map_err(|e| CliError::new("io", e.to_string()))
    })
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| CliError::new("io", format!("{}: {e}", p.display())))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::new("io", e.to_string())),
    }
}

fn dispatch(cli: Cli, file: &ConfigFile, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Audit(a) => {
            let config = CliConfig::resolve(&a.input, &a.policy, &a.output, file)?;
            emit(&cmd_audit(&config)?, config.output_path.as_deref(), stdout)
        }
        Command::Risk(a) => {
            let mut config = CliConfig::resolve(&a.input, &a.policy, &a.output, file)?;
            if a.input.predictions.is_some() {
                config.metrics_path = None;
            }
            if let Some(m) = a.metrics {
                config.metrics_path = Some(m);
            }
            config.profile = ImpactProfile::new(
                a.impact_fmr.unwrap_or(config.profile.impact_fmr),
                a.impact_fnmr.unwrap_or(config.profile.impact_fnmr),
            )?;
            emit(&cmd_risk(&config)?, config.output_path.as_deref(), stdout)
        }
        Command::Infer(a) => {
            let mut config = CliConfig::resolve(&a.input, &a.policy, &a.output, file)?;
            config.alpha = a.alpha.unwrap_or(config.alpha);
            config.min_support = a.min_support.unwrap_or(config.min_support);
            emit(
                &cmd_infer(&config, &a.query, &a.evidence)?,
                config.output_path.as_deref(),
                stdout,
            )
        }
        Command::Sweep(a) => {
            let policy = PolicyArgs {
                policy: a.policy,
                theta: None,
                top_k: a.top_k,
            };
            let config = CliConfig::resolve(&a.input, &policy, &a.output, file)?;
            let thetas = match &a.theta {
                Some(t) => theta_grid(t)?,
                None => vec![config.policy.theta],
            };
            let fmr = a
                .impact_fmr
                .clone()
                .unwrap_or_else(|| config.profile.impact_fmr.to_string());
            let fnmr = a
                .impact_fnmr
                .clone()
                .unwrap_or_else(|| config.profile.impact_fnmr.to_string());
            let profiles = impact_grid(&fmr, &fnmr)?;
            emit(
                &cmd_sweep(&config, &profiles, &thetas)?,
                config.output_path.as_deref(),
                stdout,
            )
        }
        Command::Serve(a) => {
            let bind = a
                .bind
                .or_else(|| file.bind.clone())
                .unwrap_or_else(|| DEFAULT_BIND.to_string());
            let dir = a
                .data_dir
                .or_else(|| file.data_dir.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
            cmd_serve(
                &bind,
                &dir,
                a.max_upload.unwrap_or(biaslens_service::DEFAULT_MAX_UPLOAD),
                stdout,
            )
        }
    }
}

/// Parses `args` (program name first), runs the command, and returns the exit code.
pub fn run<I, T>(
    args: I,
    config_path: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", CliError::new("usage", first).line());
            return 2;
        }
    };
    let result = match config_path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
    .and_then(|file| dispatch(cli, &file, stdout));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.line());
            e.exit_code()
        }
    }
}
