use std::path::PathBuf;

use clap::{Args, Subcommand};
use rigkit::clock_sync::{
    fit_clock_model, simulate_clocks, sync_quality, ClockDomainKind, ClockModel, ClockSimSpec,
    FitOptions, StampedStream, SYNC_FLAG_THRESHOLD_NS,
};
use rigkit::dataset_io::{read_manifest, read_stream_index, SensorKind};
use serde::Serialize;

use super::{read_columns, write_file};
use crate::config::pick;
use crate::error::{CliError, Result};
use crate::{csv_field, Context, Report};

/// Default matching window for `sync report`.
pub const DEFAULT_WINDOW_NS: i64 = 50_000_000;
/// Decimals for clock-model floats; skews differ from 1 in the sixth place.
const MODEL_DECIMALS: usize = 12;

#[derive(Debug, Subcommand)]
pub enum SyncCommand {
    /// Fit an affine clock model to correspondence pairs
    Fit(FitArgs),
    /// Convert raw stamps through a fitted model
    Convert(ConvertArgs),
    /// Nearest-event offsets between streams
    Report(ReportArgs),
    /// Generate synthetic correspondence pairs
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with header source_ns,target_ns
    #[arg(long)]
    pub pairs: PathBuf,
    /// Drop pairs beyond 3x RMS residual and refit once
    #[arg(long)]
    pub robust: bool,
    /// Source clock domain
    #[arg(long, default_value = "TSC", value_parser = parse_domain)]
    pub source: ClockDomainKind,
    /// Target clock domain
    #[arg(long, default_value = "PTP", value_parser = parse_domain)]
    pub target: ClockDomainKind,
    /// Write the fitted model as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Clock model JSON written by `sync fit`
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with a raw_ns column
    #[arg(long)]
    pub input: PathBuf,
    /// Write raw_ns,converted_ns CSV here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Stream CSV files with a stamp_ns column; the stream id is the file stem
    #[arg(long, num_args = 1.., conflicts_with = "sequence")]
    pub streams: Vec<PathBuf>,
    /// Sequence directory; every non-trajectory stream is compared
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Matching window in ns [default: 50000000]
    #[arg(long)]
    pub window_ns: Option<i64>,
    /// Offsets above this are flagged, in ns [default: 1000000]
    #[arg(long)]
    pub threshold_ns: Option<i64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of correspondence pairs
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Sampling rate of the pairs in Hz
    #[arg(long, default_value_t = 10.0)]
    pub rate_hz: f64,
    /// Target seconds per source second
    #[arg(long, default_value_t = 1.0)]
    pub skew: f64,
    /// Target stamp at source stamp 0, in ns
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub offset_ns: i64,
    /// Standard deviation of the target jitter in ns
    #[arg(long, default_value_t = 0.0)]
    pub jitter_ns: f64,
    /// Random seed [default: seed from config, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write source_ns,target_ns CSV here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_domain(s: &str) -> std::result::Result<ClockDomainKind, String> {
    match s.to_ascii_uppercase().as_str() {
        "SYSTEM" => Ok(ClockDomainKind::System),
        "TSC" => Ok(ClockDomainKind::Tsc),
        "PTP" => Ok(ClockDomainKind::Ptp),
        _ => Err(format!("unknown clock domain {s:?} (expected SYSTEM, TSC or PTP)")),
    }
}

pub fn run(cmd: &SyncCommand, ctx: &Context) -> Result<Report> {
    match cmd {
        SyncCommand::Fit(a) => fit(a, ctx),
        SyncCommand::Convert(a) => convert(a),
        SyncCommand::Report(a) => report(a, ctx),
        SyncCommand::Simulate(a) => simulate(a, ctx),
    }
}

fn model_text(m: &ClockModel) -> String {
    format!(
        "{} -> {}\n  offset_ns        {}\n  skew             {:.12}\n  skew - 1 [ppm]   {:.6}\n  rms residual ns  {:.3}",
        m.source,
        m.target,
        m.offset_ns,
        m.skew,
        (m.skew - 1.0) * 1e6,
        m.rms_residual_ns
    )
}

fn fit(a: &FitArgs, ctx: &Context) -> Result<Report> {
    let rows: Vec<Vec<i64>> = read_columns(&a.pairs, &["source_ns", "target_ns"])?;
    let pairs: Vec<(i64, i64)> = rows.iter().map(|r| (r[0], r[1])).collect();
    let opts = FitOptions {
        source: a.source,
        target: a.target,
        robust: a.robust || ctx.config.sync.robust.unwrap_or(false),
    };
    let model = fit_clock_model(&pairs, &opts)?;
    if let Some(out) = &a.out {
        write_file(out, rigkit::report::to_canonical_json_with(&model, MODEL_DECIMALS)?)?;
    }
    #[derive(Serialize)]
    struct FitResult<'a> {
        model: &'a ClockModel,
        n_pairs: usize,
        robust: bool,
    }
    let result = FitResult {
        model: &model,
        n_pairs: pairs.len(),
        robust: opts.robust,
    };
    let csv = format!(
        "source,target,offset_ns,skew,rms_residual_ns,n_pairs\n{},{},{},{:.12},{:.3},{}\n",
        model.source,
        model.target,
        model.offset_ns,
        model.skew,
        model.rms_residual_ns,
        pairs.len()
    );
    Ok(Report::new("sync fit", &result)?
        .inputs([a.pairs.clone()])
        .decimals(MODEL_DECIMALS)
        .text(format!("{}\n  pairs            {}", model_text(&model), pairs.len()))
        .csv(csv))
}

fn convert(a: &ConvertArgs) -> Result<Report> {
    let text = std::fs::read_to_string(&a.model).map_err(|e| CliError::input(a.model.display(), e))?;
    let model: ClockModel =
        serde_json::from_str(&text).map_err(|e| CliError::input(a.model.display(), e))?;
    let raw: Vec<Vec<i64>> = read_columns(&a.input, &["raw_ns"])?;
    let mut csv = String::from("raw_ns,converted_ns\n");
    let mut converted = Vec::with_capacity(raw.len());
    for r in &raw {
        let c = model.convert(r[0]);
        csv.push_str(&format!("{},{}\n", r[0], c));
        converted.push([r[0], c]);
    }
    if let Some(out) = &a.out {
        write_file(out, &csv)?;
    }
    #[derive(Serialize)]
    struct ConvertResult<'a> {
        model: &'a ClockModel,
        stamps: &'a [[i64; 2]],
    }
    Ok(Report::new(
        "sync convert",
        &ConvertResult {
            model: &model,
            stamps: &converted,
        },
    )?
    .inputs([a.model.clone(), a.input.clone()])
    .decimals(MODEL_DECIMALS)
    .text(csv.clone())
    .csv(csv))
}

fn sequence_streams(dir: &std::path::Path) -> Result<Vec<StampedStream>> {
    let manifest = read_manifest(dir)?;
    let mut out = Vec::new();
    for spec in &manifest.streams {
        if spec.kind == SensorKind::Trajectory {
            continue;
        }
        let index = read_stream_index(dir, &spec.stream_id)?;
        let stamps = index
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.as_ref().map(|r| r.stamp_ns).map_err(|m| {
                    CliError::Input(format!("stream {}, record {i}: {m}", spec.stream_id))
                })
            })
            .collect::<Result<Vec<i64>>>()?;
        out.push(StampedStream::new(spec.stream_id.clone(), stamps));
    }
    Ok(out)
}

fn report(a: &ReportArgs, ctx: &Context) -> Result<Report> {
    let window_ns = pick(a.window_ns, ctx.config.sync.window_ns, DEFAULT_WINDOW_NS);
    let threshold_ns = pick(a.threshold_ns, ctx.config.sync.threshold_ns, SYNC_FLAG_THRESHOLD_NS);
    let (streams, inputs) = match &a.sequence {
        Some(dir) => (sequence_streams(dir)?, vec![dir.clone()]),
        None => {
            if a.streams.is_empty() {
                return Err(CliError::Input("give --streams or --sequence".into()));
            }
            let mut streams = Vec::new();
            for p in &a.streams {
                let rows: Vec<Vec<i64>> = read_columns(p, &["stamp_ns"])?;
                let id = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                streams.push(StampedStream::new(id, rows.into_iter().map(|r| r[0]).collect()));
            }
            (streams, a.streams.clone())
        }
    };
    let mut rep = sync_quality(&streams, window_ns)?;
    rep.threshold_ns = threshold_ns;
    rep.exceeds_threshold = rep.worst_max_offset_ns.is_some_and(|m| m > threshold_ns);

    let opt = |v: Option<i64>| v.map_or_else(String::new, |v| v.to_string());
    let mut csv = String::from("stream_a,stream_b,matched,unmatched,max_offset_ns,p95_offset_ns,median_offset_ns\n");
    let mut text = format!(
        "window {} ns, threshold {} ns\n{:<20} {:<20} {:>8} {:>9} {:>12} {:>12} {:>12}\n",
        window_ns, threshold_ns, "stream_a", "stream_b", "matched", "unmatched", "max_ns", "p95_ns", "median_ns"
    );
    for p in &rep.pairs {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csv_field(&p.stream_a),
            csv_field(&p.stream_b),
            p.matched,
            p.unmatched,
            opt(p.max_offset_ns),
            opt(p.p95_offset_ns),
            opt(p.median_offset_ns)
        ));
        text.push_str(&format!(
            "{:<20} {:<20} {:>8} {:>9} {:>12} {:>12} {:>12}\n",
            p.stream_a,
            p.stream_b,
            p.matched,
            p.unmatched,
            opt(p.max_offset_ns),
            opt(p.p95_offset_ns),
            opt(p.median_offset_ns)
        ));
    }
    let mut findings = Vec::new();
    if rep.exceeds_threshold {
        if let (Some((sa, sb)), Some(m)) = (&rep.worst_pair, rep.worst_max_offset_ns) {
            findings.push(format!("{sa} vs {sb}: max offset {m} ns exceeds {threshold_ns} ns"));
        }
    }
    for f in &findings {
        text.push_str(&format!("flagged: {f}\n"));
    }
    Ok(Report::new("sync report", &rep)?
        .inputs(inputs)
        .text(text)
        .csv(csv)
        .findings(findings, 0))
}

fn simulate(a: &SimulateArgs, ctx: &Context) -> Result<Report> {
    let seed = pick(a.seed, ctx.config.seed, 0);
    let spec = ClockSimSpec {
        true_rate_hz: a.rate_hz,
        skew: a.skew,
        offset_ns: a.offset_ns,
        jitter_ns_sigma: a.jitter_ns,
        n: a.n,
    };
    let sim = simulate_clocks(&spec, seed)?;
    let mut csv = String::from("source_ns,target_ns\n");
    for (s, t) in &sim.observations {
        csv.push_str(&format!("{s},{t}\n"));
    }
    if let Some(out) = &a.out {
        write_file(out, &csv)?;
    }
    #[derive(Serialize)]
    struct SimResult<'a> {
        spec: &'a ClockSimSpec,
        seed: u64,
        observations: &'a [(i64, i64)],
    }
    Ok(Report::new(
        "sync simulate",
        &SimResult {
            spec: &spec,
            seed,
            observations: &sim.observations,
        },
    )?
    .decimals(MODEL_DECIMALS)
    .text(csv.clone())
    .csv(csv))
}
