//! Overlapping Allan deviation and IMU noise parameter extraction.
//!
//! For a rate signal `y` of `N` samples and a cluster of `m` samples
//! (`tau = m / rate`):
//!
//! ```text
//! sigma^2(tau) = 1 / (2 (N - 2m)) * sum_{k=0}^{N-2m-1} (ybar_{k+m} - ybar_k)^2
//! ```
//!
//! where `ybar_k` is the mean of `y[k..k+m]`. White noise shows up as a
//! slope of -1/2 on the log-log curve and is read off at `tau = 1 s` (noise
//! density `N`); rate random walk shows up as +1/2 and is read off at
//! `tau = 3 s` (`K`). Both read-off points follow the conventions of the
//! ROS `allan_variance_ros` tool.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Minimum cluster size in samples.
pub const MIN_CLUSTER: usize = 2;
/// Clusters per decade in the default tau grid.
pub const GRID_POINTS_PER_DECADE: usize = 10;
/// Allowed deviation of the local log-log slope from the target slope.
pub const SLOPE_TOLERANCE: f64 = 0.1;
pub const MIN_REGION_POINTS: usize = 3;
pub const WHITE_NOISE_SLOPE: f64 = -0.5;
pub const RANDOM_WALK_SLOPE: f64 = 0.5;
pub const WHITE_NOISE_READ_TAU_S: f64 = 1.0;
pub const RANDOM_WALK_READ_TAU_S: f64 = 3.0;

#[derive(Debug, Error)]
pub enum AllanError {
    #[error("signal of {len} samples is too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("no tau in the request is inside the valid range")]
    NoValidTau,
    #[error("no contiguous region of {MIN_REGION_POINTS}+ points with slope near -1/2")]
    NoWhiteNoiseRegion,
    #[error("no contiguous region of {MIN_REGION_POINTS}+ points with slope near +1/2")]
    NoRandomWalkRegion,
    #[error("IMU log: {0}")]
    BadLog(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = AllanError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllanCurve {
    pub taus_s: Vec<f64>,
    pub adev: Vec<f64>,
    /// Non-overlapping clusters per tau, `N / m`.
    pub n_clusters: Vec<usize>,
    /// Requested taus that were outside the valid range.
    pub dropped_taus_s: Vec<f64>,
}

impl AllanCurve {
    pub fn len(&self) -> usize {
        self.taus_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus_s.is_empty()
    }

    /// Curve from precomputed points; used for constructed fixtures.
    pub fn from_points(taus_s: Vec<f64>, adev: Vec<f64>) -> Self {
        let n = taus_s.len();
        Self {
            taus_s,
            adev,
            n_clusters: vec![0; n],
            dropped_taus_s: Vec::new(),
        }
    }

    /// Plot-ready `tau_s,adev` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["tau_s", "adev"])?;
        for (t, a) in self.taus_s.iter().zip(&self.adev) {
            out.write_record([format!("{t:.9e}"), format!("{a:.9e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Log-spaced taus from `2 / rate` to `len / (3 rate)`, ten per decade.
pub fn default_tau_grid(len: usize, rate_hz: f64) -> Vec<f64> {
    let lo = MIN_CLUSTER as f64 / rate_hz;
    let hi = (len / 3) as f64 / rate_hz;
    if !(hi >= lo) {
        return Vec::new();
    }
    let step = 1.0 / GRID_POINTS_PER_DECADE as f64;
    let decades = (hi / lo).log10();
    let count = (decades / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| lo * 10f64.powf(i as f64 * step)).collect()
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Overlapping Allan variance for cluster size `m`.
///
/// The window difference `sum_{i<m} (y[k+m+i] - y[k+i])` is maintained as a
/// sliding double-double sum, so constant offsets in the signal never enter
/// the arithmetic and long signals do not accumulate rounding drift.
pub fn allan_variance_cluster(samples: &[f64], m: usize) -> f64 {
    let n = samples.len();
    assert!(m >= 1 && n > 2 * m, "cluster size {m} invalid for {n} samples");
    let d = |i: usize| samples[i + m] - samples[i];
    let (mut hi, mut lo) = (0.0, 0.0);
    for i in 0..m {
        let (s, e) = two_sum(hi, d(i));
        hi = s;
        lo += e;
    }
    let terms = n - 2 * m + 1;
    let inv_m = 1.0 / m as f64;
    let (mut acc, mut comp) = (0.0, 0.0);
    for k in 0..terms {
        let w = (hi + lo) * inv_m;
        let (s, e) = two_sum(acc, w * w);
        acc = s;
        comp += e;
        if k + 1 < terms {
            let (s, e) = two_sum(hi, d(k + m));
            let (s, e2) = two_sum(s, -d(k));
            hi = s;
            lo += e + e2;
            let (s, e) = two_sum(hi, lo);
            hi = s;
            lo = e;
        }
    }
    (acc + comp) / (2.0 * terms as f64)
}

/// Allan deviation at the requested taus. Taus whose cluster size falls
/// outside `[2, len / 3]` are dropped with a warning; duplicates after
/// rounding to whole samples are merged.
pub fn allan_deviation(samples: &[f64], rate_hz: f64, taus_s: &[f64]) -> Result<AllanCurve> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(AllanError::BadRate(rate_hz));
    }
    let n = samples.len();
    if n < 3 * MIN_CLUSTER {
        return Err(AllanError::TooShort {
            len: n,
            min: 3 * MIN_CLUSTER,
        });
    }
    let max_m = n / 3;
    let mut clusters = Vec::new();
    let mut dropped = Vec::new();
    for &tau in taus_s {
        let m = (tau * rate_hz).round();
        if tau.is_finite() && m >= MIN_CLUSTER as f64 && m <= max_m as f64 {
            clusters.push(m as usize);
        } else {
            log::warn!("dropping tau {tau} s: outside [{MIN_CLUSTER}, {max_m}] samples");
            dropped.push(tau);
        }
    }
    clusters.sort_unstable();
    clusters.dedup();
    if clusters.is_empty() {
        return Err(AllanError::NoValidTau);
    }
    let adev: Vec<f64> = clusters
        .par_iter()
        .map(|&m| allan_variance_cluster(samples, m).sqrt())
        .collect();
    Ok(AllanCurve {
        taus_s: clusters.iter().map(|&m| m as f64 / rate_hz).collect(),
        adev,
        n_clusters: clusters.iter().map(|&m| n / m).collect(),
        dropped_taus_s: dropped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub target_slope: f64,
    pub tau_min_s: f64,
    pub tau_max_s: f64,
    pub n_points: usize,
    /// Unconstrained least-squares slope over the region.
    pub fitted_slope: f64,
    /// RMS of natural-log residuals of the fixed-slope line.
    pub rms_log_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseFit {
    pub value: f64,
    pub read_tau_s: f64,
    pub diagnostics: FitDiagnostics,
}

/// Centered finite-difference slopes in log-log space (one-sided at ends).
pub fn local_slopes(c: &AllanCurve) -> Vec<f64> {
    let n = c.len();
    let lt: Vec<f64> = c.taus_s.iter().map(|t| t.ln()).collect();
    let la: Vec<f64> = c.adev.iter().map(|a| a.ln()).collect();
    (0..n)
        .map(|i| {
            if n < 2 {
                return f64::NAN;
            }
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (la[b] - la[a]) / (lt[b] - lt[a])
        })
        .collect()
}

/// Longest run of indices whose local slope is within tolerance of
/// `target`; the earliest run wins ties.
fn select_region(c: &AllanCurve, target: f64) -> Option<std::ops::Range<usize>> {
    let slopes = local_slopes(c);
    let mut best: Option<std::ops::Range<usize>> = None;
    let mut start = None;
    for i in 0..=slopes.len() {
        let ok = i < slopes.len() && (slopes[i] - target).abs() <= SLOPE_TOLERANCE;
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.as_ref().is_none_or(|b| i - s > b.len()) {
                    best = Some(s..i);
                }
                start = None;
            }
            _ => {}
        }
    }
    best.filter(|r| r.len() >= MIN_REGION_POINTS)
}

fn fixed_slope_fit(c: &AllanCurve, region: std::ops::Range<usize>, slope: f64, read_tau: f64) -> NoiseFit {
    let xs: Vec<f64> = c.taus_s[region.clone()].iter().map(|t| (t / read_tau).ln()).collect();
    let ys: Vec<f64> = c.adev[region.clone()].iter().map(|a| a.ln()).collect();
    let n = xs.len() as f64;
    let intercept = xs.iter().zip(&ys).map(|(x, y)| y - slope * x).sum::<f64>() / n;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    NoiseFit {
        value: intercept.exp(),
        read_tau_s: read_tau,
        diagnostics: FitDiagnostics {
            target_slope: slope,
            tau_min_s: c.taus_s[region.start],
            tau_max_s: c.taus_s[region.end - 1],
            n_points: region.len(),
            fitted_slope: sxy / sxx,
            rms_log_residual: rms,
        },
    }
}

/// White-noise density `N`: the slope -1/2 line read at `tau = 1 s`.
pub fn estimate_noise_density(c: &AllanCurve) -> Result<NoiseFit> {
    let region = select_region(c, WHITE_NOISE_SLOPE).ok_or(AllanError::NoWhiteNoiseRegion)?;
    Ok(fixed_slope_fit(c, region, WHITE_NOISE_SLOPE, WHITE_NOISE_READ_TAU_S))
}

/// Rate random walk `K`: the slope +1/2 line read at `tau = 3 s`.
pub fn estimate_random_walk(c: &AllanCurve) -> Result<NoiseFit> {
    let region = select_region(c, RANDOM_WALK_SLOPE).ok_or(AllanError::NoRandomWalkRegion)?;
    Ok(fixed_slope_fit(c, region, RANDOM_WALK_SLOPE, RANDOM_WALK_READ_TAU_S))
}

pub const AXIS_NAMES: [&str; 6] = ["gx", "gy", "gz", "ax", "ay", "az"];

#[derive(Clone, Debug, PartialEq)]
pub struct ImuLog {
    pub rate_hz: f64,
    /// rad/s, axes x, y, z.
    pub gyro: [Vec<f64>; 3],
    /// m/s^2, axes x, y, z.
    pub accel: [Vec<f64>; 3],
    pub stamps_ns: Option<Vec<i64>>,
}

impl ImuLog {
    pub fn new(
        rate_hz: f64,
        gyro: [Vec<f64>; 3],
        accel: [Vec<f64>; 3],
        stamps_ns: Option<Vec<i64>>,
    ) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(AllanError::BadRate(rate_hz));
        }
        let len = gyro[0].len();
        if gyro.iter().chain(&accel).any(|a| a.len() != len)
            || stamps_ns.as_ref().is_some_and(|s| s.len() != len)
        {
            return Err(AllanError::BadLog("axes have different lengths".into()));
        }
        if len < 2 {
            return Err(AllanError::TooShort { len, min: 2 });
        }
        Ok(Self {
            rate_hz,
            gyro,
            accel,
            stamps_ns,
        })
    }

    pub fn len(&self) -> usize {
        self.gyro[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axes in `gx, gy, gz, ax, ay, az` order.
    pub fn axes(&self) -> [&[f64]; 6] {
        [
            &self.gyro[0],
            &self.gyro[1],
            &self.gyro[2],
            &self.accel[0],
            &self.accel[1],
            &self.accel[2],
        ]
    }
}

/// Reads `t_ns,gx,gy,gz,ax,ay,az` CSV. Without `rate_hz` the rate is
/// inferred as `(n - 1) / (t_last - t_first)`.
pub fn read_imu_csv<R: Read>(reader: R, rate_hz: Option<f64>) -> Result<ImuLog> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["t_ns", "gx", "gy", "gz", "ax", "ay", "az"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(AllanError::Parse {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut stamps = Vec::new();
    let mut cols: [Vec<f64>; 6] = Default::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |what: &str| AllanError::Parse {
            line,
            message: format!("bad {what}"),
        };
        stamps.push(rec[0].parse::<i64>().map_err(|_| bad("t_ns"))?);
        for (k, col) in cols.iter_mut().enumerate() {
            let v: f64 = rec[k + 1].parse().map_err(|_| bad(expected[k + 1]))?;
            if !v.is_finite() {
                return Err(bad(expected[k + 1]));
            }
            col.push(v);
        }
    }
    if let Some(i) = stamps.windows(2).position(|w| w[1] <= w[0]) {
        return Err(AllanError::Parse {
            line: i + 3,
            message: "timestamps must be strictly increasing".into(),
        });
    }
    let rate = match rate_hz {
        Some(r) => r,
        None => {
            if stamps.len() < 2 {
                return Err(AllanError::TooShort {
                    len: stamps.len(),
                    min: 2,
                });
            }
            let span = (stamps[stamps.len() - 1] - stamps[0]) as f64 * 1e-9;
            (stamps.len() - 1) as f64 / span
        }
    };
    let [gx, gy, gz, ax, ay, az] = cols;
    ImuLog::new(rate, [gx, gy, gz], [ax, ay, az], Some(stamps))
}

pub fn read_imu_csv_file(path: impl AsRef<Path>, rate_hz: Option<f64>) -> Result<ImuLog> {
    read_imu_csv(std::fs::File::open(path)?, rate_hz)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisNoise {
    pub axis: String,
    pub curve: AllanCurve,
    pub noise_density: Option<NoiseFit>,
    pub random_walk: Option<NoiseFit>,
    pub warnings: Vec<String>,
}

/// Per-sensor parameters: mean over the axes whose fits succeeded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImuNoiseParams {
    pub noise_density: Option<f64>,
    pub random_walk: Option<f64>,
    /// `(axis, tau_min_s, tau_max_s)` of every white-noise fit used.
    pub noise_density_windows: Vec<(String, f64, f64)>,
    pub random_walk_windows: Vec<(String, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImuNoiseReport {
    pub rate_hz: f64,
    pub n_samples: usize,
    pub axes: Vec<AxisNoise>,
    pub gyroscope: ImuNoiseParams,
    pub accelerometer: ImuNoiseParams,
}

pub fn characterize_axis(axis: &str, samples: &[f64], rate_hz: f64, taus: &[f64]) -> Result<AxisNoise> {
    let curve = allan_deviation(samples, rate_hz, taus)?;
    let mut warnings = Vec::new();
    let noise_density = estimate_noise_density(&curve)
        .map_err(|e| warnings.push(e.to_string()))
        .ok();
    let random_walk = estimate_random_walk(&curve)
        .map_err(|e| warnings.push(e.to_string()))
        .ok();
    Ok(AxisNoise {
        axis: axis.to_string(),
        curve,
        noise_density,
        random_walk,
        warnings,
    })
}

fn aggregate(axes: &[AxisNoise]) -> ImuNoiseParams {
    let mean_of = |pick: fn(&AxisNoise) -> Option<&NoiseFit>| {
        let fits: Vec<(String, &NoiseFit)> = axes
            .iter()
            .filter_map(|a| pick(a).map(|f| (a.axis.clone(), f)))
            .collect();
        let mean = (!fits.is_empty())
            .then(|| fits.iter().map(|(_, f)| f.value).sum::<f64>() / fits.len() as f64);
        let windows = fits
            .iter()
            .map(|(a, f)| (a.clone(), f.diagnostics.tau_min_s, f.diagnostics.tau_max_s))
            .collect();
        (mean, windows)
    };
    let (noise_density, noise_density_windows) = mean_of(|a| a.noise_density.as_ref());
    let (random_walk, random_walk_windows) = mean_of(|a| a.random_walk.as_ref());
    ImuNoiseParams {
        noise_density,
        random_walk,
        noise_density_windows,
        random_walk_windows,
    }
}

/// Runs every axis of the log on `taus` (default grid when `None`).
pub fn characterize(log: &ImuLog, taus: Option<&[f64]>) -> Result<ImuNoiseReport> {
    let grid = match taus {
        Some(t) => t.to_vec(),
        None => default_tau_grid(log.len(), log.rate_hz),
    };
    let axes = log
        .axes()
        .iter()
        .zip(AXIS_NAMES)
        .map(|(samples, name)| characterize_axis(name, samples, log.rate_hz, &grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImuNoiseReport {
        rate_hz: log.rate_hz,
        n_samples: log.len(),
        gyroscope: aggregate(&axes[..3]),
        accelerometer: aggregate(&axes[3..]),
        axes,
    })
}

/// Seeded noise generators with known Allan deviation.
pub mod synthetic {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Zero-mean white noise with per-sample standard deviation `sigma`.
    /// At rate `f` its noise density is `sigma / sqrt(f)`.
    pub fn white_noise(sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect()
    }

    /// Rate random walk with Allan deviation `k * sqrt(tau / 3)`: the
    /// running sum of white increments with variance `k^2 / rate`.
    pub fn random_walk(k: f64, rate_hz: f64, n: usize, seed: u64) -> Vec<f64> {
        let step = k / rate_hz.sqrt();
        let mut acc = 0.0;
        white_noise(step, n, seed)
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }
}
