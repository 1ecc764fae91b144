use std::path::PathBuf;

use clap::{Args, Subcommand};
use rigkit::traj_eval::{
    associate, ate_with_residuals, duration_ns, format_duration, load_trajectory, trajectory_length,
    AlignMode, AteOptions, AteReport, Trajectory, DEFAULT_MAX_DT_NS,
};
use serde::Serialize;

use super::{path_arg, write_file};
use crate::config::pick;
use crate::error::{CliError, Result};
use crate::{Context, Report};

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Absolute trajectory error of an estimate against ground truth
    Ate(AteArgs),
    /// Length and duration of a trajectory
    Info(InfoArgs),
}

#[derive(Debug, Args)]
pub struct AteArgs {
    /// Ground-truth trajectory [default: paths.gt from config]
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Estimated trajectory [default: paths.est from config]
    #[arg(long)]
    pub est: Option<PathBuf>,
    /// Largest stamp difference for a match, in ns [default: 20000000]
    #[arg(long)]
    pub max_dt_ns: Option<i64>,
    /// Alignment before scoring: none, se3 or sim3 [default: se3]
    #[arg(long)]
    pub align: Option<String>,
    /// Write per-pair residuals (plot-ready CSV)
    #[arg(long)]
    pub residuals_csv: Option<PathBuf>,
    /// Write a residual histogram (plot-ready CSV)
    #[arg(long)]
    pub histogram_csv: Option<PathBuf>,
    /// Histogram bin count
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Write matched ground-truth and aligned estimate positions (plot-ready CSV)
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    /// Trajectory file
    #[arg(long)]
    pub traj: PathBuf,
}

pub fn run(cmd: &EvalCommand, ctx: &Context) -> Result<Report> {
    match cmd {
        EvalCommand::Ate(a) => ate_cmd(a, ctx),
        EvalCommand::Info(a) => info(a),
    }
}

fn load(path: &PathBuf) -> Result<Trajectory> {
    load_trajectory(path).map_err(|e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Equal-width bins over `[0, max]`; the last bin is closed.
fn histogram(r: &[f64], bins: usize) -> String {
    let bins = bins.max(1);
    let hi = r.iter().copied().fold(0.0, f64::max);
    let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in r {
        let b = ((x / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut s = String::from("bin_lo_m,bin_hi_m,count\n");
    for (i, c) in counts.iter().enumerate() {
        s.push_str(&format!("{:.9},{:.9},{c}\n", i as f64 * width, (i + 1) as f64 * width));
    }
    s
}

fn ate_cmd(a: &AteArgs, ctx: &Context) -> Result<Report> {
    let gt_path = path_arg(&a.gt, &ctx.config.paths.gt, "gt")?;
    let est_path = path_arg(&a.est, &ctx.config.paths.est, "est")?;
    let align: AlignMode = pick(a.align.clone(), ctx.config.eval.align.clone(), "se3".into())
        .parse()
        .map_err(CliError::Input)?;
    let opts = AteOptions {
        max_dt_ns: pick(a.max_dt_ns, ctx.config.eval.max_dt_ns, DEFAULT_MAX_DT_NS),
        align,
    };
    let gt = load(&gt_path)?;
    let est = load(&est_path)?;
    let (rep, residuals) = ate_with_residuals(&gt, &est, &opts)?;

    if a.residuals_csv.is_some() || a.trace_csv.is_some() {
        let pairs = associate(&gt, &est, opts.max_dt_ns)?.pairs;
        let scale = rep.scale.unwrap_or(1.0);
        if let Some(path) = &a.residuals_csv {
            let mut s = String::from("gt_stamp_ns,est_stamp_ns,residual_m\n");
            for (p, r) in pairs.iter().zip(&residuals) {
                s.push_str(&format!(
                    "{},{},{r:.9}\n",
                    gt.entries()[p.gt_index].stamp_ns,
                    est.entries()[p.est_index].stamp_ns
                ));
            }
            write_file(path, s)?;
        }
        if let Some(path) = &a.trace_csv {
            let mut s = String::from("stamp_ns,gt_x,gt_y,gt_z,est_x,est_y,est_z\n");
            for p in &pairs {
                let g = &gt.entries()[p.gt_index];
                let e = rep.alignment.rotation.rotate(&(est.entries()[p.est_index].pose.translation * scale))
                    + rep.alignment.translation;
                let t = &g.pose.translation;
                s.push_str(&format!(
                    "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}\n",
                    g.stamp_ns, t.x, t.y, t.z, e.x, e.y, e.z
                ));
            }
            write_file(path, s)?;
        }
    }
    if let Some(path) = &a.histogram_csv {
        write_file(path, histogram(&residuals, a.bins))?;
    }

    let mut findings = Vec::new();
    if rep.degenerate_alignment {
        findings.push("trajectory is degenerate; only translation was aligned".to_string());
    }
    let text = format!(
        "ATE over {} pairs (align {}):\n  rmse   {:.6} m\n  std    {:.6} m\n  mean   {:.6} m\n  median {:.6} m\n  max    {:.6} m{}",
        rep.n_pairs,
        align_name(rep.align_mode),
        rep.rmse_m,
        rep.std_m,
        rep.mean_m,
        rep.median_m,
        rep.max_m,
        rep.scale.map_or_else(String::new, |s| format!("\n  scale  {s:.6}"))
    );
    let csv = format!("{}\n{}\n", AteReport::CSV_HEADER, rep.csv_row());
    Ok(Report::new("eval ate", &rep)?
        .inputs([gt_path, est_path])
        .text(text)
        .csv(csv)
        .findings(findings, 0))
}

fn align_name(m: AlignMode) -> &'static str {
    match m {
        AlignMode::None => "none",
        AlignMode::Se3 => "se3",
        AlignMode::Sim3 => "sim3",
    }
}

fn info(a: &InfoArgs) -> Result<Report> {
    let t = load(&a.traj)?;
    #[derive(Serialize)]
    struct Info {
        n_poses: usize,
        length_m: f64,
        duration_ns: i64,
        duration_display: String,
    }
    let d = duration_ns(&t);
    let r = Info {
        n_poses: t.len(),
        length_m: trajectory_length(&t),
        duration_ns: d,
        duration_display: format_duration(d),
    };
    let text = format!(
        "{} poses, length {:.3} m, duration {}",
        r.n_poses, r.length_m, r.duration_display
    );
    let csv = format!(
        "n_poses,length_m,duration_ns,duration\n{},{:.6},{},{}\n",
        r.n_poses, r.length_m, r.duration_ns, r.duration_display
    );
    Ok(Report::new("eval info", &r)?.inputs([a.traj.clone()]).text(text).csv(csv))
}
