//! Clock domains, affine clock models and timestamp correction.
//!
//! All stamps are integer nanoseconds. A [`ClockModel`] maps a source clock
//! into a target clock as `round(skew * raw + offset)`; it is fit by ordinary
//! least squares from `(source, target)` correspondence pairs such as those
//! logged by a PTP daemon against the local hardware counter.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Skew values outside this open interval indicate a failed fit.
pub const SKEW_RANGE: (f64, f64) = (0.9, 1.1);
/// Minimum source span accepted by [`fit_clock_model`].
pub const MIN_FIT_SPAN_NS: i64 = 1_000_000;
/// Cross-stream offsets above this are flagged by [`sync_quality`].
pub const SYNC_FLAG_THRESHOLD_NS: i64 = 1_000_000;
pub const MAX_READOUT_DELAY_NS: i64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClockError {
    #[error("need at least 2 correspondence pairs, got {0}")]
    InsufficientData(usize),
    #[error("source stamps must be strictly increasing (pair {index})")]
    NonIncreasingSource { index: usize },
    #[error("source span {span_ns} ns is shorter than {MIN_FIT_SPAN_NS} ns")]
    DegenerateSpan { span_ns: i64 },
    #[error("fitted skew {skew} is outside ({}, {})", SKEW_RANGE.0, SKEW_RANGE.1)]
    SkewOutOfRange { skew: f64 },
    #[error("readout delay spec for stream {spec} applied to stream {event}")]
    StreamMismatch { spec: String, event: String },
    #[error("readout delay {0} ns is outside [0, 1 s)")]
    BadDelay(i64),
    #[error("{0:?} stamping requires a fitted clock model")]
    MissingModel(ClockDomainKind),
    #[error("{0:?} stamping requires a hardware counter value")]
    MissingCounter(ClockDomainKind),
    #[error("counter frequency must be positive")]
    BadCounterFrequency,
    #[error("invalid simulation spec: {0}")]
    BadSpec(String),
    #[error("stream {0} has no events")]
    EmptyStream(String),
    #[error("stream {stream} is not monotonic at event {index}")]
    NonMonotonicStream { stream: String, index: usize },
    #[error("need at least 2 streams, got {0}")]
    TooFewStreams(usize),
}

pub type Result<T, E = ClockError> = std::result::Result<T, E>;

/// The three stamping sources of the acquisition driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ClockDomainKind {
    /// Host system clock at frame arrival (`TIME_FROM_ROS`).
    System,
    /// Hardware timestamp counter (`TIME_FROM_TSC`).
    Tsc,
    /// Counter converted into the PTP-disciplined domain (`TIME_FROM_PTP`).
    Ptp,
}

impl fmt::Display for ClockDomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClockDomainKind::System => "SYSTEM",
            ClockDomainKind::Tsc => "TSC",
            ClockDomainKind::Ptp => "PTP",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    /// Target stamp at source stamp 0.
    pub offset_ns: i64,
    /// Target seconds per source second.
    pub skew: f64,
    pub source: ClockDomainKind,
    pub target: ClockDomainKind,
    pub rms_residual_ns: f64,
}

impl ClockModel {
    pub fn identity(source: ClockDomainKind, target: ClockDomainKind) -> Self {
        Self {
            offset_ns: 0,
            skew: 1.0,
            source,
            target,
            rms_residual_ns: 0.0,
        }
    }

    pub fn new(
        offset_ns: i64,
        skew: f64,
        source: ClockDomainKind,
        target: ClockDomainKind,
    ) -> Result<Self> {
        check_skew(skew)?;
        Ok(Self {
            offset_ns,
            skew,
            source,
            target,
            rms_residual_ns: 0.0,
        })
    }

    /// `round(skew * raw + offset)`, evaluated as
    /// `raw + offset + round((skew - 1) * raw)` to keep full integer precision
    /// for large raw stamps.
    pub fn convert(&self, raw_ns: i64) -> i64 {
        let drift = ((self.skew - 1.0) * raw_ns as f64).round() as i64;
        raw_ns + self.offset_ns + drift
    }

    fn predict(&self, raw_ns: i64) -> f64 {
        (raw_ns + self.offset_ns) as f64 + (self.skew - 1.0) * raw_ns as f64
    }
}

pub fn convert(m: &ClockModel, raw_ns: i64) -> i64 {
    m.convert(raw_ns)
}

fn check_skew(skew: f64) -> Result<()> {
    if skew.is_finite() && skew > SKEW_RANGE.0 && skew < SKEW_RANGE.1 {
        Ok(())
    } else {
        Err(ClockError::SkewOutOfRange { skew })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub source: ClockDomainKind,
    pub target: ClockDomainKind,
    /// Drop pairs with residual above 3x RMS and refit once.
    pub robust: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            source: ClockDomainKind::Tsc,
            target: ClockDomainKind::Ptp,
            robust: false,
        }
    }
}

/// Least-squares affine fit of target stamps against source stamps.
pub fn fit_clock_model(pairs: &[(i64, i64)], opts: &FitOptions) -> Result<ClockModel> {
    if pairs.len() < 2 {
        return Err(ClockError::InsufficientData(pairs.len()));
    }
    if let Some(i) = pairs.windows(2).position(|w| w[1].0 <= w[0].0) {
        return Err(ClockError::NonIncreasingSource { index: i + 1 });
    }
    let span_ns = pairs[pairs.len() - 1].0 - pairs[0].0;
    if span_ns < MIN_FIT_SPAN_NS {
        return Err(ClockError::DegenerateSpan { span_ns });
    }
    let model = ols(pairs, opts)?;
    if !opts.robust {
        return Ok(model);
    }
    let limit = 3.0 * model.rms_residual_ns;
    let kept: Vec<(i64, i64)> = pairs
        .iter()
        .copied()
        .filter(|&(s, t)| (t as f64 - model.predict(s)).abs() <= limit)
        .collect();
    if kept.len() == pairs.len() || kept.len() < 2 {
        return Ok(model);
    }
    log::debug!(
        "robust refit dropped {} of {} pairs",
        pairs.len() - kept.len(),
        pairs.len()
    );
    ols(&kept, opts)
}

fn ols(pairs: &[(i64, i64)], opts: &FitOptions) -> Result<ClockModel> {
    // Work relative to the first pair so every difference is exact in f64.
    let (s0, t0) = pairs[0];
    let n = pairs.len() as f64;
    let ds: Vec<f64> = pairs.iter().map(|p| (p.0 - s0) as f64).collect();
    let dt: Vec<f64> = pairs.iter().map(|p| (p.1 - t0) as f64).collect();
    let ms = ds.iter().sum::<f64>() / n;
    let mt = dt.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in ds.iter().zip(&dt) {
        sxx += (x - ms) * (x - ms);
        sxy += (x - ms) * (y - mt);
    }
    let skew = sxy / sxx;
    check_skew(skew)?;
    // t = t0 + a + skew (s - s0); offset is t at s = 0.
    let a = mt - skew * ms;
    let offset_ns = (t0 - s0) + (a - (skew - 1.0) * s0 as f64).round() as i64;

    // Residuals against the unrounded line.
    let ss: f64 = ds
        .iter()
        .zip(&dt)
        .map(|(x, y)| {
            let r = y - (a + skew * x);
            r * r
        })
        .sum();
    Ok(ClockModel {
        offset_ns,
        skew,
        source: opts.source,
        target: opts.target,
        rms_residual_ns: (ss / n).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampedEvent {
    pub stream_id: String,
    pub raw_stamp_ns: i64,
    pub corrected_stamp_ns: Option<i64>,
}

impl StampedEvent {
    pub fn raw(stream_id: impl Into<String>, raw_stamp_ns: i64) -> Self {
        Self {
            stream_id: stream_id.into(),
            raw_stamp_ns,
            corrected_stamp_ns: None,
        }
    }

    /// Corrected stamp if available, raw stamp otherwise.
    pub fn stamp_ns(&self) -> i64 {
        self.corrected_stamp_ns.unwrap_or(self.raw_stamp_ns)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadoutDelaySpec {
    pub stream_id: String,
    pub delay_ns: i64,
}

impl ReadoutDelaySpec {
    pub fn new(stream_id: impl Into<String>, delay_ns: i64) -> Result<Self> {
        if !(0..MAX_READOUT_DELAY_NS).contains(&delay_ns) {
            return Err(ClockError::BadDelay(delay_ns));
        }
        Ok(Self {
            stream_id: stream_id.into(),
            delay_ns,
        })
    }
}

/// Subtracts the stream's readout delay from the event stamp.
pub fn apply_readout_correction(e: &StampedEvent, spec: &ReadoutDelaySpec) -> Result<StampedEvent> {
    if e.stream_id != spec.stream_id {
        return Err(ClockError::StreamMismatch {
            spec: spec.stream_id.clone(),
            event: e.stream_id.clone(),
        });
    }
    if !(0..MAX_READOUT_DELAY_NS).contains(&spec.delay_ns) {
        return Err(ClockError::BadDelay(spec.delay_ns));
    }
    Ok(StampedEvent {
        corrected_stamp_ns: Some(e.stamp_ns() - spec.delay_ns),
        ..e.clone()
    })
}

/// What the driver knows about a frame when it is received.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawStampInputs {
    pub stream_id: String,
    /// System clock at arrival.
    pub arrival_ns: i64,
    /// Hardware counter ticks latched at acquisition.
    pub counter: Option<u64>,
}

/// Stamping policy of one driver instance. Read-only after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct StampPolicy {
    pub kind: ClockDomainKind,
    /// Nominal counter frequency in Hz.
    pub counter_hz: u64,
    /// Counter-time to PTP-time model, required for [`ClockDomainKind::Ptp`].
    pub model: Option<ClockModel>,
}

impl StampPolicy {
    pub fn system() -> Self {
        Self {
            kind: ClockDomainKind::System,
            counter_hz: 1_000_000_000,
            model: None,
        }
    }

    pub fn tsc(counter_hz: u64) -> Self {
        Self {
            kind: ClockDomainKind::Tsc,
            counter_hz,
            model: None,
        }
    }

    pub fn ptp(counter_hz: u64, model: ClockModel) -> Self {
        Self {
            kind: ClockDomainKind::Ptp,
            counter_hz,
            model: Some(model),
        }
    }

    pub fn stamp(&self, raw: &RawStampInputs) -> Result<StampedEvent> {
        let raw_stamp_ns = match self.kind {
            ClockDomainKind::System => raw.arrival_ns,
            ClockDomainKind::Tsc | ClockDomainKind::Ptp => {
                let ticks = raw.counter.ok_or(ClockError::MissingCounter(self.kind))?;
                counter_to_ns(ticks, self.counter_hz)?
            }
        };
        let corrected = match self.kind {
            ClockDomainKind::Ptp => {
                let model = self.model.as_ref().ok_or(ClockError::MissingModel(self.kind))?;
                model.convert(raw_stamp_ns)
            }
            _ => raw_stamp_ns,
        };
        Ok(StampedEvent {
            stream_id: raw.stream_id.clone(),
            raw_stamp_ns,
            corrected_stamp_ns: Some(corrected),
        })
    }
}

pub fn stamp(policy: &StampPolicy, raw: &RawStampInputs) -> Result<StampedEvent> {
    policy.stamp(raw)
}

/// Counter ticks to nanoseconds, rounded to nearest.
pub fn counter_to_ns(ticks: u64, counter_hz: u64) -> Result<i64> {
    if counter_hz == 0 {
        return Err(ClockError::BadCounterFrequency);
    }
    let hz = counter_hz as u128;
    Ok(((ticks as u128 * 1_000_000_000 + hz / 2) / hz) as i64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockSimSpec {
    /// Correspondence sampling rate.
    pub true_rate_hz: f64,
    pub skew: f64,
    pub offset_ns: i64,
    pub jitter_ns_sigma: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimulatedClocks {
    /// `(source, target)` with Gaussian jitter on the target.
    pub observations: Vec<(i64, i64)>,
    /// Noise-free `(source, target)`.
    pub truth: Vec<(i64, i64)>,
}

/// Target stamp of the noise-free affine clock.
pub fn true_target(spec: &ClockSimSpec, source_ns: i64) -> i64 {
    source_ns + spec.offset_ns + ((spec.skew - 1.0) * source_ns as f64).round() as i64
}

/// Synthetic correspondence generator; deterministic for a given seed.
pub fn simulate_clocks(spec: &ClockSimSpec, seed: u64) -> Result<SimulatedClocks> {
    if spec.n < 2 {
        return Err(ClockError::BadSpec(format!("n = {} < 2", spec.n)));
    }
    if !(spec.jitter_ns_sigma.is_finite() && spec.jitter_ns_sigma >= 0.0) {
        return Err(ClockError::BadSpec("jitter must be finite and >= 0".into()));
    }
    if !(spec.true_rate_hz.is_finite() && spec.true_rate_hz > 0.0) {
        return Err(ClockError::BadSpec("rate must be positive".into()));
    }
    if !(spec.skew.is_finite() && spec.skew > 0.0) {
        return Err(ClockError::BadSpec("skew must be positive".into()));
    }
    let period = 1e9 / spec.true_rate_hz;
    let noise = Normal::new(0.0, spec.jitter_ns_sigma)
        .map_err(|e| ClockError::BadSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observations = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let s = (i as f64 * period).round() as i64;
        let t = true_target(spec, s);
        let jitter = if spec.jitter_ns_sigma > 0.0 {
            noise.sample(&mut rng).round() as i64
        } else {
            0
        };
        truth.push((s, t));
        observations.push((s, t + jitter));
    }
    Ok(SimulatedClocks {
        observations,
        truth,
    })
}

/// One simulated sensor for [`simulate_streams`].
#[derive(Clone, Debug, PartialEq)]
pub struct StreamSimSpec {
    pub stream_id: String,
    pub rate_hz: f64,
    /// Time of the first physical event.
    pub phase_ns: i64,
    pub readout_delay_ns: i64,
    pub jitter_ns_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampedStream {
    pub stream_id: String,
    pub stamps_ns: Vec<i64>,
}

impl StampedStream {
    pub fn new(stream_id: impl Into<String>, stamps_ns: Vec<i64>) -> Self {
        Self {
            stream_id: stream_id.into(),
            stamps_ns,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulatedCapture {
    /// Arrival stamps: event time + readout delay + jitter.
    pub arrivals: Vec<StampedStream>,
    /// Physical event times.
    pub truth: Vec<StampedStream>,
}

/// Multi-sensor capture over `[0, duration_ns)`.
pub fn simulate_streams(
    specs: &[StreamSimSpec],
    duration_ns: i64,
    seed: u64,
) -> Result<SimulatedCapture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arrivals = Vec::new();
    let mut truth = Vec::new();
    for spec in specs {
        if !(spec.rate_hz.is_finite() && spec.rate_hz > 0.0) {
            return Err(ClockError::BadSpec(format!("{}: rate", spec.stream_id)));
        }
        let noise = Normal::new(0.0, spec.jitter_ns_sigma)
            .map_err(|e| ClockError::BadSpec(e.to_string()))?;
        let period = 1e9 / spec.rate_hz;
        let mut t_stream = Vec::new();
        let mut a_stream = Vec::new();
        for k in 0.. {
            let t = spec.phase_ns + (k as f64 * period).round() as i64;
            if t >= duration_ns {
                break;
            }
            let jitter = if spec.jitter_ns_sigma > 0.0 {
                noise.sample(&mut rng).round() as i64
            } else {
                0
            };
            t_stream.push(t);
            a_stream.push(t + spec.readout_delay_ns + jitter);
        }
        truth.push(StampedStream::new(spec.stream_id.clone(), t_stream));
        arrivals.push(StampedStream::new(spec.stream_id.clone(), a_stream));
    }
    Ok(SimulatedCapture { arrivals, truth })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairSync {
    /// Stream whose events are matched.
    pub stream_a: String,
    /// Stream searched for the nearest event.
    pub stream_b: String,
    pub matched: usize,
    pub unmatched: usize,
    pub max_offset_ns: Option<i64>,
    pub p95_offset_ns: Option<i64>,
    pub median_offset_ns: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SyncReport {
    pub window_ns: i64,
    pub pairs: Vec<PairSync>,
    pub worst_pair: Option<(String, String)>,
    pub worst_max_offset_ns: Option<i64>,
    pub threshold_ns: i64,
    pub exceeds_threshold: bool,
}

/// Index of the event in `stamps` nearest to `t`; ties go to the earlier event.
pub fn nearest_event(stamps: &[i64], t: i64) -> Option<usize> {
    if stamps.is_empty() {
        return None;
    }
    let i = stamps.partition_point(|&s| s < t);
    if i == 0 {
        return Some(0);
    }
    if i == stamps.len() {
        return Some(i - 1);
    }
    let before = t - stamps[i - 1];
    let after = stamps[i] - t;
    Some(if before <= after { i - 1 } else { i })
}

/// Nearest-event offsets for every stream pair `(i, j)`, `i < j`, matching
/// each event of stream `i` to the nearest event of stream `j` within
/// `window_ns`.
pub fn sync_quality(streams: &[StampedStream], window_ns: i64) -> Result<SyncReport> {
    if streams.len() < 2 {
        return Err(ClockError::TooFewStreams(streams.len()));
    }
    for s in streams {
        if s.stamps_ns.is_empty() {
            return Err(ClockError::EmptyStream(s.stream_id.clone()));
        }
        if let Some(i) = s.stamps_ns.windows(2).position(|w| w[1] < w[0]) {
            return Err(ClockError::NonMonotonicStream {
                stream: s.stream_id.clone(),
                index: i + 1,
            });
        }
    }
    let mut pairs = Vec::new();
    for i in 0..streams.len() {
        for j in i + 1..streams.len() {
            let (a, b) = (&streams[i], &streams[j]);
            let mut offsets: Vec<i64> = a
                .stamps_ns
                .iter()
                .filter_map(|&t| {
                    let k = nearest_event(&b.stamps_ns, t)?;
                    let d = (b.stamps_ns[k] - t).abs();
                    (d <= window_ns).then_some(d)
                })
                .collect();
            offsets.sort_unstable();
            let n = offsets.len();
            pairs.push(PairSync {
                stream_a: a.stream_id.clone(),
                stream_b: b.stream_id.clone(),
                matched: n,
                unmatched: a.stamps_ns.len() - n,
                max_offset_ns: offsets.last().copied(),
                p95_offset_ns: percentile_nearest_rank(&offsets, 0.95),
                median_offset_ns: percentile_nearest_rank(&offsets, 0.5),
            });
        }
    }
    let worst = pairs
        .iter()
        .filter_map(|p| p.max_offset_ns.map(|m| (m, p)))
        .fold(None::<(i64, &PairSync)>, |acc, (m, p)| match acc {
            Some((best, _)) if best >= m => acc,
            _ => Some((m, p)),
        });
    let worst_max_offset_ns = worst.map(|(m, _)| m);
    Ok(SyncReport {
        window_ns,
        worst_pair: worst.map(|(_, p)| (p.stream_a.clone(), p.stream_b.clone())),
        worst_max_offset_ns,
        threshold_ns: SYNC_FLAG_THRESHOLD_NS,
        exceeds_threshold: worst_max_offset_ns.is_some_and(|m| m > SYNC_FLAG_THRESHOLD_NS),
        pairs,
    })
}

/// Nearest-rank percentile of sorted values.
fn percentile_nearest_rank(sorted: &[i64], q: f64) -> Option<i64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}
