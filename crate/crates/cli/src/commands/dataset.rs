use std::path::PathBuf;

use clap::{Args, Subcommand};
use rigkit::dataset_io::{
    sequence_stats, synthetic, validate_sequence, DatasetValidationReport, SequenceStats, Severity,
    ValidationPolicy,
};
use serde::Serialize;

use super::path_arg;
use crate::config::pick;
use crate::error::{CliError, Result, EXIT_VALIDATION};
use crate::{csv_field, Context, Report};

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Check a sequence against its manifest
    Validate(ValidateArgs),
    /// Duration, size and per-stream statistics of a sequence
    Stats(StatsArgs),
    /// Write a synthetic sequence of the reference rig
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Sequence directory [default: paths.sequence from config]
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Allowed relative rate deviation [default: 0.10]
    #[arg(long)]
    pub rate_tol: Option<f64>,
    /// Intervals longer than this many nominal periods are gaps [default: 3]
    #[arg(long)]
    pub gap_factor: Option<f64>,
    /// Minimum fraction of the sequence each stream must span [default: 0.99]
    #[arg(long)]
    pub overlap: Option<f64>,
    /// Severity of rate deviations: warning or error [default: warning]
    #[arg(long)]
    pub rate_severity: Option<String>,
    /// Severity of gaps: warning or error [default: warning]
    #[arg(long)]
    pub gap_severity: Option<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Sequence directory [default: paths.sequence from config]
    #[arg(long)]
    pub sequence: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (must not contain a sequence yet)
    #[arg(long)]
    pub out: PathBuf,
    /// Sequence id written to the manifest
    #[arg(long, default_value = "synthetic_01")]
    pub id: String,
    /// Sequence duration in seconds
    #[arg(long, default_value_t = 10.0)]
    pub duration_s: f64,
    /// First stamp in ns
    #[arg(long, default_value_t = 0)]
    pub start_ns: i64,
    /// Random seed [default: seed from config, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(cmd: &DatasetCommand, ctx: &Context) -> Result<Report> {
    match cmd {
        DatasetCommand::Validate(a) => validate(a, ctx),
        DatasetCommand::Stats(a) => stats(a, ctx),
        DatasetCommand::Synth(a) => synth(a, ctx),
    }
}

fn severity(s: Option<String>, name: &str) -> Result<Option<Severity>> {
    s.map(|s| match s.as_str() {
        "warning" => Ok(Severity::Warning),
        "error" => Ok(Severity::Error),
        _ => Err(CliError::Input(format!("{name}: expected warning or error, got {s:?}"))),
    })
    .transpose()
}

fn validate(a: &ValidateArgs, ctx: &Context) -> Result<Report> {
    let dir = path_arg(&a.sequence, &ctx.config.paths.sequence, "sequence")?;
    let c = &ctx.config.dataset;
    let d = ValidationPolicy::default();
    let policy = ValidationPolicy {
        rate_tol: pick(a.rate_tol, c.rate_tol, d.rate_tol),
        gap_factor: pick(a.gap_factor, c.gap_factor, d.gap_factor),
        overlap: pick(a.overlap, c.overlap, d.overlap),
        rate_severity: pick(
            severity(a.rate_severity.clone(), "rate_severity")?,
            severity(c.rate_severity.clone(), "rate_severity")?,
            d.rate_severity,
        ),
        gap_severity: pick(
            severity(a.gap_severity.clone(), "gap_severity")?,
            severity(c.gap_severity.clone(), "gap_severity")?,
            d.gap_severity,
        ),
    };
    let rep: DatasetValidationReport = validate_sequence(&dir, &policy)?;
    let sev = |s: Severity| match s {
        Severity::Warning => "warning",
        Severity::Error => "error",
    };
    let mut text = format!(
        "sequence {}: {} errors, {} warnings\n",
        rep.sequence_id, rep.n_errors, rep.n_warnings
    );
    let mut csv = String::from("severity,kind,stream_id,record_index,message\n");
    let mut findings = Vec::new();
    for f in &rep.findings {
        let kind = serde_json::to_value(f.kind)?;
        let kind = kind.as_str().unwrap_or_default();
        let at = f.record_index.map_or_else(String::new, |i| format!(" record {i}"));
        let line = format!("{} {} {}{at}: {}", sev(f.severity), kind, f.stream_id, f.message);
        text.push_str(&format!("  {line}\n"));
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            sev(f.severity),
            kind,
            csv_field(&f.stream_id),
            f.record_index.map_or_else(String::new, |i| i.to_string()),
            csv_field(&f.message)
        ));
        if f.severity == Severity::Error {
            findings.push(line);
        }
    }
    let code = if rep.has_errors() { EXIT_VALIDATION } else { 0 };
    Ok(Report::new("dataset validate", &rep)?
        .inputs([dir])
        .text(text)
        .csv(csv)
        .findings(findings, code))
}

fn stats(a: &StatsArgs, ctx: &Context) -> Result<Report> {
    let dir = path_arg(&a.sequence, &ctx.config.paths.sequence, "sequence")?;
    let s: SequenceStats = sequence_stats(&dir)?;
    let opt = |v: Option<f64>, p: usize| v.map_or_else(String::new, |v| format!("{v:.p$}"));
    let mut text = format!(
        "sequence {}\n  duration   {} ({:.3} s)\n  size       {:.3} GB ({} bytes)\n",
        s.sequence_id, s.duration_display, s.duration_s, s.total_gb, s.total_bytes
    );
    if let Some(l) = s.trajectory_length_m {
        text.push_str(&format!("  length     {l:.3} m\n"));
    }
    text.push_str(&format!(
        "  {:<20} {:<10} {:>8} {:>12} {:>6} {:>10} {:>14}\n",
        "stream", "kind", "count", "rate_hz", "gaps", "max_gap_s", "bytes"
    ));
    let mut csv = String::from("stream_id,kind,count,measured_rate_hz,gap_count,max_gap_s,bytes\n");
    for st in &s.streams {
        let kind = serde_json::to_value(st.kind)?;
        let kind = kind.as_str().unwrap_or_default();
        text.push_str(&format!(
            "  {:<20} {:<10} {:>8} {:>12} {:>6} {:>10.3} {:>14}\n",
            st.stream_id,
            kind,
            st.count,
            opt(st.measured_rate_hz, 3),
            st.gap_count,
            st.max_gap_s,
            st.bytes
        ));
        csv.push_str(&format!(
            "{},{},{},{},{},{:.6},{}\n",
            csv_field(&st.stream_id),
            kind,
            st.count,
            opt(st.measured_rate_hz, 6),
            st.gap_count,
            st.max_gap_s,
            st.bytes
        ));
    }
    Ok(Report::new("dataset stats", &s)?.inputs([dir]).text(text).csv(csv))
}

fn synth(a: &SynthArgs, ctx: &Context) -> Result<Report> {
    if !(a.duration_s.is_finite() && a.duration_s > 0.0) {
        return Err(CliError::Input(format!("duration must be positive, got {}", a.duration_s)));
    }
    let seed = pick(a.seed, ctx.config.seed, 0);
    let manifest = synthetic::rig_manifest(&a.id);
    let duration_ns = (a.duration_s * 1e9).round() as i64;
    let dir = synthetic::write_sequence(&a.out, &manifest, a.start_ns, duration_ns, seed)?;
    #[derive(Serialize)]
    struct SynthResult {
        out: String,
        sequence_id: String,
        duration_ns: i64,
        seed: u64,
        streams: Vec<String>,
    }
    let r = SynthResult {
        out: dir.display().to_string(),
        sequence_id: a.id.clone(),
        duration_ns,
        seed,
        streams: manifest.streams.iter().map(|s| s.stream_id.clone()).collect(),
    };
    Ok(Report::new("dataset synth", &r)?.text(format!(
        "wrote sequence {} ({} streams, {} s) to {}",
        a.id,
        r.streams.len(),
        a.duration_s,
        dir.display()
    )))
}
