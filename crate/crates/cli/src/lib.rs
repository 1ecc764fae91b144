//! Command-line front end for the `rigkit` library.
//!
//! Every subcommand produces a [`Report`], rendered as canonical JSON (inside
//! the shared [`envelope::Envelope`]), human-readable text, or CSV.
//! Exit codes: 0 success, 1 internal error, 2 input parse error, 3 domain
//! validation failure.

pub mod commands;
pub mod config;
pub mod edges;
pub mod envelope;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand};
use serde::Serialize;

use crate::config::{OutputMode, RunConfig, CONFIG_ENV};
use crate::envelope::{combined_digest, digest_input, Envelope, TOOL_NAME};
use crate::error::{CliError, Result, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "rigkit", version, about = "Calibration, synchronization and evaluation tools for sensor rigs")]
pub struct Cli {
    /// Report format written to standard output [default: text]
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputMode>,
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (repeat for more)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    /// Only log errors
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transformation tree: assemble, diff, look up, validate
    #[command(subcommand)]
    Tf(commands::tf::TfCommand),
    /// Clock models and cross-sensor synchronization
    #[command(subcommand)]
    Sync(commands::sync::SyncCommand),
    /// IMU noise characterization
    #[command(subcommand)]
    Imu(commands::imu::ImuCommand),
    /// Camera model checks
    #[command(subcommand)]
    Cam(commands::cam::CamCommand),
    /// Point-cloud processing
    #[command(subcommand)]
    Cloud(commands::cam::CloudCommand),
    /// Trajectory evaluation
    #[command(subcommand)]
    Eval(commands::eval::EvalCommand),
    /// Sequence containers: validation, statistics, synthesis
    #[command(subcommand)]
    Dataset(commands::dataset::DatasetCommand),
}

/// Everything a subcommand produces.
#[derive(Clone, Debug)]
pub struct Report {
    /// Command path, e.g. `tf diff`.
    pub command: &'static str,
    pub inputs: Vec<PathBuf>,
    pub result: serde_json::Value,
    /// Fixed decimals for floats in JSON output.
    pub decimals: usize,
    pub text: String,
    /// Table for `--output csv`; the flattened result is used when absent.
    pub csv: Option<String>,
    /// Problems worth repeating on standard error.
    pub findings: Vec<String>,
    pub exit_code: i32,
}

impl Report {
    pub fn new(command: &'static str, result: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command,
            inputs: Vec::new(),
            result: serde_json::to_value(result)?,
            decimals: rigkit::report::DEFAULT_FLOAT_DECIMALS,
            text: String::new(),
            csv: None,
            findings: Vec::new(),
            exit_code: EXIT_OK,
        })
    }

    pub fn inputs(mut self, inputs: impl IntoIterator<Item = PathBuf>) -> Self {
        self.inputs.extend(inputs);
        self
    }

    pub fn decimals(mut self, d: usize) -> Self {
        self.decimals = d;
        self
    }

    pub fn text(mut self, text: String) -> Self {
        self.text = text;
        self
    }

    pub fn csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn findings(mut self, findings: Vec<String>, exit_code: i32) -> Self {
        self.findings = findings;
        self.exit_code = exit_code;
        self
    }

    pub fn render(&self, mode: OutputMode) -> Result<String> {
        match mode {
            OutputMode::Json => {
                let inputs = self
                    .inputs
                    .iter()
                    .map(|p| digest_input(p))
                    .collect::<Result<Vec<_>>>()?;
                let env = Envelope {
                    tool: TOOL_NAME,
                    version: env!("CARGO_PKG_VERSION"),
                    command: self.command,
                    inputs_digest: combined_digest(&inputs),
                    inputs: &inputs,
                    findings: &self.findings,
                    result: &self.result,
                };
                Ok(rigkit::report::to_canonical_json_with(&env, self.decimals)?)
            }
            OutputMode::Text => {
                let mut t = self.text.clone();
                if !t.is_empty() && !t.ends_with('\n') {
                    t.push('\n');
                }
                Ok(t)
            }
            OutputMode::Csv => Ok(match &self.csv {
                Some(c) => c.clone(),
                None => flatten_csv(&self.result, self.decimals),
            }),
        }
    }
}

/// `key,value` rows with dotted keys for nested objects and arrays.
pub fn flatten_csv(v: &serde_json::Value, decimals: usize) -> String {
    fn walk(prefix: &str, v: &serde_json::Value, decimals: usize, out: &mut Vec<(String, String)>) {
        use serde_json::Value;
        let key = |k: &str| {
            if prefix.is_empty() {
                k.to_string()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Value::Object(m) => {
                for (k, v) in m {
                    walk(&key(k), v, decimals, out);
                }
            }
            Value::Array(a) => {
                for (i, v) in a.iter().enumerate() {
                    walk(&key(&i.to_string()), v, decimals, out);
                }
            }
            Value::Null => out.push((prefix.to_string(), String::new())),
            Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
            Value::Number(n) => out.push((
                prefix.to_string(),
                match (n.as_i64(), n.as_u64(), n.as_f64()) {
                    (Some(i), _, _) => i.to_string(),
                    (_, Some(u), _) => u.to_string(),
                    (_, _, Some(f)) => format!("{f:.decimals$}"),
                    _ => n.to_string(),
                },
            )),
            Value::String(s) => out.push((prefix.to_string(), csv_field(s))),
        }
    }
    let mut rows = Vec::new();
    walk("", v, decimals, &mut rows);
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Shared state handed to every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub config: RunConfig,
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            2 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RIGKIT_LOG")
        .format_timestamp(None)
        .try_init();
}

/// Runs a parsed command and returns its report.
pub fn execute(cli: &Cli) -> Result<(Report, OutputMode)> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mode = cli.output.or(config.output).unwrap_or_default();
    let ctx = Context { config };
    let report = match &cli.command {
        Command::Tf(c) => commands::tf::run(c, &ctx),
        Command::Sync(c) => commands::sync::run(c, &ctx),
        Command::Imu(c) => commands::imu::run(c, &ctx),
        Command::Cam(c) => commands::cam::run_cam(c, &ctx),
        Command::Cloud(c) => commands::cam::run_cloud(c, &ctx),
        Command::Eval(c) => commands::eval::run(c, &ctx),
        Command::Dataset(c) => commands::dataset::run(c, &ctx),
    }?;
    Ok((report, mode))
}

/// Parses `args`, runs the command, writes the report and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(&cli);
    let outcome = execute(&cli).and_then(|(report, mode)| Ok((report.render(mode)?, report)));
    match outcome {
        Ok((rendered, report)) => {
            let mut out = std::io::stdout().lock();
            if let Err(e) = out.write_all(rendered.as_bytes()).and_then(|_| out.flush()) {
                eprintln!("rigkit: {}", CliError::Internal(e.to_string()));
                return error::EXIT_INTERNAL;
            }
            if report.exit_code != EXIT_OK {
                for f in &report.findings {
                    eprintln!("rigkit: {f}");
                }
            }
            report.exit_code
        }
        Err(e) => {
            eprintln!("rigkit: {e}");
            e.exit_code()
        }
    }
}
