use std::fs;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use rigkit::imu_allan::{characterize, read_imu_csv_file, synthetic, ImuNoiseReport, NoiseFit, AXIS_NAMES};
use serde::Serialize;

use super::write_file;
use crate::config::pick;
use crate::error::{CliError, Result};
use crate::{Context, Report};

/// Noise parameters are often 1e-4..1e-6, so JSON keeps 12 decimals.
const IMU_DECIMALS: usize = 12;

#[derive(Debug, Subcommand)]
pub enum ImuCommand {
    /// Allan deviation and noise parameters of a static IMU log
    Allan(AllanArgs),
    /// Write a synthetic static IMU log
    Simulate(ImuSimulateArgs),
}

#[derive(Debug, Args)]
pub struct AllanArgs {
    /// IMU CSV with header t_ns,gx,gy,gz,ax,ay,az
    #[arg(long)]
    pub input: PathBuf,
    /// Sample rate in Hz [default: inferred from stamps]
    #[arg(long)]
    pub rate: Option<f64>,
    /// Averaging times in seconds, comma separated [default: log-spaced grid]
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
    /// Write one tau_s,adev CSV per axis into this directory
    #[arg(long)]
    pub curves_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImuSimulateArgs {
    /// Number of samples
    #[arg(long, default_value_t = 1_000_000)]
    pub n: usize,
    /// Sample rate in Hz
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    /// Per-sample white-noise standard deviation
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    /// Rate random walk coefficient K (0 disables the walk)
    #[arg(long, default_value_t = 0.0)]
    pub random_walk: f64,
    /// Random seed [default: seed from config, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cmd: &ImuCommand, ctx: &Context) -> Result<Report> {
    match cmd {
        ImuCommand::Allan(a) => allan(a, ctx),
        ImuCommand::Simulate(a) => simulate(a, ctx),
    }
}

fn fmt_fit(f: &Option<NoiseFit>) -> (String, String, String) {
    match f {
        Some(f) => (
            format!("{:.6e}", f.value),
            format!("{:.6}", f.diagnostics.tau_min_s),
            format!("{:.6}", f.diagnostics.tau_max_s),
        ),
        None => (String::new(), String::new(), String::new()),
    }
}

fn allan(a: &AllanArgs, ctx: &Context) -> Result<Report> {
    let rate = a.rate.or(ctx.config.imu.rate_hz);
    let log = read_imu_csv_file(&a.input, rate)?;
    let taus = if a.taus.is_empty() {
        ctx.config.imu.taus.clone()
    } else {
        Some(a.taus.clone())
    };
    let rep: ImuNoiseReport = characterize(&log, taus.as_deref())?;
    if let Some(dir) = &a.curves_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
        for axis in &rep.axes {
            let mut buf = Vec::new();
            axis.curve.write_csv(&mut buf)?;
            write_file(&dir.join(format!("{}.csv", axis.axis)), buf)?;
        }
    }
    let mut csv = String::from("axis,noise_density,nd_tau_min_s,nd_tau_max_s,random_walk,rw_tau_min_s,rw_tau_max_s\n");
    let mut text = format!(
        "{} samples at {:.3} Hz\n{:<4} {:>14} {:>22} {:>14} {:>22}\n",
        rep.n_samples, rep.rate_hz, "axis", "N", "white window [s]", "K", "walk window [s]"
    );
    let mut findings = Vec::new();
    for axis in &rep.axes {
        let (n, n0, n1) = fmt_fit(&axis.noise_density);
        let (k, k0, k1) = fmt_fit(&axis.random_walk);
        csv.push_str(&format!("{},{n},{n0},{n1},{k},{k0},{k1}\n", axis.axis));
        let win = |a: &str, b: &str| if a.is_empty() { "-".to_string() } else { format!("{a}..{b}") };
        text.push_str(&format!(
            "{:<4} {:>14} {:>22} {:>14} {:>22}\n",
            axis.axis,
            if n.is_empty() { "-" } else { &n },
            win(&n0, &n1),
            if k.is_empty() { "-" } else { &k },
            win(&k0, &k1)
        ));
        findings.extend(axis.warnings.iter().map(|w| format!("{}: {w}", axis.axis)));
    }
    let mean = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
    text.push_str(&format!(
        "gyroscope      N {}  K {}\naccelerometer  N {}  K {}\n",
        mean(rep.gyroscope.noise_density),
        mean(rep.gyroscope.random_walk),
        mean(rep.accelerometer.noise_density),
        mean(rep.accelerometer.random_walk)
    ));
    Ok(Report::new("imu allan", &rep)?
        .inputs([a.input.clone()])
        .decimals(IMU_DECIMALS)
        .text(text)
        .csv(csv)
        .findings(findings, 0))
}

fn simulate(a: &ImuSimulateArgs, ctx: &Context) -> Result<Report> {
    if !(a.rate.is_finite() && a.rate > 0.0) {
        return Err(CliError::Input(format!("rate must be positive, got {}", a.rate)));
    }
    let seed = pick(a.seed, ctx.config.seed, 0);
    let axes: Vec<Vec<f64>> = (0..AXIS_NAMES.len() as u64)
        .map(|i| {
            let mut x = synthetic::white_noise(a.sigma, a.n, seed.wrapping_add(2 * i));
            if a.random_walk > 0.0 {
                let w = synthetic::random_walk(a.random_walk, a.rate, a.n, seed.wrapping_add(2 * i + 1));
                x.iter_mut().zip(w).for_each(|(x, w)| *x += w);
            }
            x
        })
        .collect();
    let period = 1e9 / a.rate;
    let mut out = String::with_capacity(a.n * 120);
    out.push_str(rigkit::dataset_io::IMU_HEADER);
    out.push('\n');
    for k in 0..a.n {
        out.push_str(&((k as f64 * period).round() as i64).to_string());
        for axis in &axes {
            out.push(',');
            out.push_str(&format!("{:e}", axis[k]));
        }
        out.push('\n');
    }
    write_file(&a.out, out)?;
    #[derive(Serialize)]
    struct SimResult<'a> {
        out: String,
        n: usize,
        rate_hz: f64,
        sigma: f64,
        random_walk: f64,
        seed: u64,
        axes: &'a [&'a str],
    }
    let r = SimResult {
        out: a.out.display().to_string(),
        n: a.n,
        rate_hz: a.rate,
        sigma: a.sigma,
        random_walk: a.random_walk,
        seed,
        axes: &AXIS_NAMES,
    };
    Ok(Report::new("imu simulate", &r)?
        .decimals(IMU_DECIMALS)
        .text(format!("wrote {} samples at {} Hz to {}", a.n, a.rate, a.out.display())))
}
