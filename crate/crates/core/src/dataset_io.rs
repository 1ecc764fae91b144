//! Directory-based sequence container.
//!
//! ```text
//! <sequence>/manifest.json
//! <sequence>/<stream_id>/index.csv      stamp_ns,file,bytes
//! <sequence>/<stream_id>/<n>.png        camera frames
//! <sequence>/<stream_id>/<n>.ply        LiDAR scans
//! <sequence>/<stream_id>/data.csv       IMU rows, one per index record
//! <sequence>/<stream_id>/trajectory.txt ground-truth poses, one per index record
//! ```
//!
//! For the shared IMU and trajectory files, record `k` of the index is data
//! line `k` and `bytes` is that line's length including its newline.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera_model::{self, PointCloud};
use crate::clock_sync::ClockDomainKind;
use crate::tf_graph::FrameId;
use crate::traj_eval::{self, format_duration, Trajectory, TrajectoryEntry};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.csv";
pub const INDEX_HEADER: &str = "stamp_ns,file,bytes";
pub const IMU_DATA_FILE: &str = "data.csv";
pub const IMU_HEADER: &str = "t_ns,gx,gy,gz,ax,ay,az";
pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const BYTES_PER_GB: f64 = 1e9;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no {MANIFEST_FILE} in {0}")]
    MissingManifest(PathBuf),
    #[error("manifest: {0}")]
    Schema(String),
    #[error("unknown stream '{0}'")]
    UnknownStream(String),
    #[error("stream {stream}, record {index}: {message}")]
    CorruptRecord {
        stream: String,
        index: usize,
        message: String,
    },
    #[error("stream {stream}: {message}")]
    Writer { stream: String, message: String },
    #[error("sequence has no records")]
    EmptySequence,
    #[error(transparent)]
    Camera(#[from] camera_model::CameraError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Camera,
    Imu,
    Lidar,
    Trajectory,
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorKind::Camera => "camera",
            SensorKind::Imu => "imu",
            SensorKind::Lidar => "lidar",
            SensorKind::Trajectory => "trajectory",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Indoor,
    Outdoor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub stream_id: String,
    pub kind: SensorKind,
    /// Required for camera, IMU and LiDAR streams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_rate_hz: Option<f64>,
    pub frame: FrameId,
}

impl SensorSpec {
    pub fn new(stream_id: &str, kind: SensorKind, nominal_rate_hz: Option<f64>, frame: &str) -> Result<Self> {
        let s = Self {
            stream_id: stream_id.to_string(),
            kind,
            nominal_rate_hz,
            frame: FrameId::new(frame).map_err(|e| DatasetError::Schema(e.to_string()))?,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let id = &self.stream_id;
        let id_ok = !id.is_empty()
            && id != "."
            && id != ".."
            && id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
        if !id_ok {
            return Err(DatasetError::Schema(format!("invalid stream id '{id}'")));
        }
        match (self.kind, self.nominal_rate_hz) {
            (SensorKind::Trajectory, None) => Ok(()),
            (_, Some(r)) if r.is_finite() && r > 0.0 => Ok(()),
            (_, r) => Err(DatasetError::Schema(format!(
                "stream {id}: nominal_rate_hz must be positive, got {r:?}"
            ))),
        }
    }

    pub fn nominal_period_ns(&self) -> Option<f64> {
        self.nominal_rate_hz.map(|r| 1e9 / r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceManifest {
    pub format_version: u32,
    pub sequence_id: String,
    pub scenario: Scenario,
    #[serde(default)]
    pub description: String,
    pub clock: ClockDomainKind,
    pub streams: Vec<SensorSpec>,
}

impl SequenceManifest {
    pub fn new(sequence_id: &str, scenario: Scenario, clock: ClockDomainKind, streams: Vec<SensorSpec>) -> Result<Self> {
        let m = Self {
            format_version: MANIFEST_FORMAT_VERSION,
            sequence_id: sequence_id.to_string(),
            scenario,
            description: String::new(),
            clock,
            streams,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return Err(DatasetError::Schema(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.streams.is_empty() {
            return Err(DatasetError::Schema("no streams".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.streams {
            s.validate()?;
            if !seen.insert(&s.stream_id) {
                return Err(DatasetError::Schema(format!("duplicate stream_id '{}'", s.stream_id)));
            }
        }
        Ok(())
    }

    pub fn stream(&self, id: &str) -> Result<&SensorSpec> {
        self.streams
            .iter()
            .find(|s| s.stream_id == id)
            .ok_or_else(|| DatasetError::UnknownStream(id.to_string()))
    }
}

pub fn parse_manifest(text: &str) -> Result<SequenceManifest> {
    let m: SequenceManifest = serde_json::from_str(text).map_err(|e| DatasetError::Schema(e.to_string()))?;
    m.validate()?;
    Ok(m)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<SequenceManifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DatasetError::MissingManifest(dir.as_ref().to_path_buf()),
        _ => e.into(),
    })?;
    parse_manifest(&text)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexRecord {
    pub stamp_ns: i64,
    pub file: String,
    pub bytes: u64,
}

/// A stream's index; rows that failed to parse are kept as errors so
/// readers can report them by position.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamIndex {
    pub stream_id: String,
    pub records: Vec<std::result::Result<IndexRecord, String>>,
}

fn locator_is_safe(file: &str) -> bool {
    let p = Path::new(file);
    !file.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)))
}

pub fn read_stream_index(dir: impl AsRef<Path>, stream_id: &str) -> Result<StreamIndex> {
    let path = dir.as_ref().join(stream_id).join(INDEX_FILE);
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut records = Vec::new();
    match lines.next() {
        None => {}
        Some(h) if h.trim() == INDEX_HEADER => {}
        Some(_) => {
            return Err(DatasetError::CorruptRecord {
                stream: stream_id.to_string(),
                index: 0,
                message: format!("index header must be '{INDEX_HEADER}'"),
            })
        }
    }
    for line in lines {
        let f: Vec<&str> = line.trim().split(',').collect();
        let rec = match f.as_slice() {
            [s, file, b] => match (s.parse::<i64>(), b.parse::<u64>()) {
                (Ok(stamp_ns), Ok(bytes)) if locator_is_safe(file) => Ok(IndexRecord {
                    stamp_ns,
                    file: file.to_string(),
                    bytes,
                }),
                (Ok(_), Ok(_)) => Err(format!("locator '{file}' leaves the stream directory")),
                _ => Err(format!("unparseable index row '{line}'")),
            },
            _ => Err(format!("expected 3 columns in '{line}'")),
        };
        records.push(rec);
    }
    Ok(StreamIndex {
        stream_id: stream_id.to_string(),
        records,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ImuSample {
    pub stamp_ns: i64,
    pub gyro: [f64; 3],
    pub accel: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageRecord {
    pub stamp_ns: i64,
    pub path: PathBuf,
    pub bytes: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRecord {
    pub stamp_ns: i64,
    pub path: PathBuf,
    pub cloud: PointCloud,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StreamRecord {
    Imu(ImuSample),
    Image(ImageRecord),
    Scan(ScanRecord),
    Pose(TrajectoryEntry),
}

impl StreamRecord {
    pub fn stamp_ns(&self) -> i64 {
        match self {
            StreamRecord::Imu(r) => r.stamp_ns,
            StreamRecord::Image(r) => r.stamp_ns,
            StreamRecord::Scan(r) => r.stamp_ns,
            StreamRecord::Pose(r) => r.stamp_ns,
        }
    }
}

/// Typed records of one stream in index order. In strict mode iteration
/// ends after the first corrupt record; in lenient mode it continues.
pub struct StreamReader {
    stream_dir: PathBuf,
    spec: SensorSpec,
    index: StreamIndex,
    /// Data lines of the shared IMU or trajectory file.
    lines: Vec<String>,
    next: usize,
    lenient: bool,
    failed: bool,
}

impl StreamReader {
    pub fn spec(&self) -> &SensorSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.index.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.records.is_empty()
    }

    fn corrupt(&self, index: usize, message: impl Into<String>) -> DatasetError {
        DatasetError::CorruptRecord {
            stream: self.spec.stream_id.clone(),
            index,
            message: message.into(),
        }
    }

    fn read_record(&self, i: usize) -> Result<StreamRecord> {
        let rec = self.index.records[i].as_ref().map_err(|m| self.corrupt(i, m.clone()))?;
        let path = self.stream_dir.join(&rec.file);
        match self.spec.kind {
            SensorKind::Camera => {
                let (width, height) =
                    image::image_dimensions(&path).map_err(|e| self.corrupt(i, format!("{}: {e}", rec.file)))?;
                Ok(StreamRecord::Image(ImageRecord {
                    stamp_ns: rec.stamp_ns,
                    path,
                    bytes: rec.bytes,
                    width,
                    height,
                }))
            }
            SensorKind::Lidar => {
                let cloud =
                    camera_model::read_ply_file(&path).map_err(|e| self.corrupt(i, format!("{}: {e}", rec.file)))?;
                Ok(StreamRecord::Scan(ScanRecord {
                    stamp_ns: rec.stamp_ns,
                    path,
                    cloud,
                }))
            }
            SensorKind::Imu => {
                let line = self.lines.get(i).ok_or_else(|| self.corrupt(i, "missing data row"))?;
                let f: Vec<&str> = line.split(',').map(str::trim).collect();
                let vals: Option<Vec<f64>> = f.get(1..7).and_then(|v| v.iter().map(|x| x.parse().ok()).collect());
                match (f.len(), f[0].parse::<i64>(), vals) {
                    (7, Ok(t), Some(v)) if t == rec.stamp_ns => Ok(StreamRecord::Imu(ImuSample {
                        stamp_ns: t,
                        gyro: [v[0], v[1], v[2]],
                        accel: [v[3], v[4], v[5]],
                    })),
                    (7, Ok(t), Some(_)) => Err(self.corrupt(i, format!("row stamp {t} differs from index"))),
                    _ => Err(self.corrupt(i, format!("bad IMU row '{line}'"))),
                }
            }
            SensorKind::Trajectory => {
                let line = self.lines.get(i).ok_or_else(|| self.corrupt(i, "missing data row"))?;
                let frame = self.spec.frame.clone();
                let t = traj_eval::parse_trajectory(line, frame).map_err(|e| self.corrupt(i, e.to_string()))?;
                let e = t.entries()[0].clone();
                if e.stamp_ns != rec.stamp_ns {
                    return Err(self.corrupt(i, format!("pose stamp {} differs from index", e.stamp_ns)));
                }
                Ok(StreamRecord::Pose(e))
            }
        }
    }
}

impl Iterator for StreamReader {
    type Item = Result<StreamRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.index.records.len() || (self.failed && !self.lenient) {
            return None;
        }
        let r = self.read_record(self.next);
        self.next += 1;
        self.failed |= r.is_err();
        Some(r)
    }
}

fn shared_file(kind: SensorKind) -> Option<&'static str> {
    match kind {
        SensorKind::Imu => Some(IMU_DATA_FILE),
        SensorKind::Trajectory => Some(TRAJECTORY_FILE),
        _ => None,
    }
}

/// Data lines of a shared file, header dropped; `None` when absent.
fn read_shared_lines(stream_dir: &Path, kind: SensorKind) -> Result<Option<Vec<String>>> {
    let Some(name) = shared_file(kind) else {
        return Ok(Some(Vec::new()));
    };
    let text = match fs::read_to_string(stream_dir.join(name)) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut lines: Vec<String> = text.split_inclusive('\n').map(str::to_string).collect();
    if kind == SensorKind::Imu && lines.first().is_some_and(|l| l.trim() == IMU_HEADER) {
        lines.remove(0);
    }
    Ok(Some(lines))
}

pub fn open_stream(dir: impl AsRef<Path>, stream_id: &str, lenient: bool) -> Result<StreamReader> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let spec = manifest.stream(stream_id)?.clone();
    let stream_dir = dir.join(stream_id);
    let index = read_stream_index(dir, stream_id)?;
    let lines = read_shared_lines(&stream_dir, spec.kind)?.unwrap_or_default();
    Ok(StreamReader {
        stream_dir,
        spec,
        index,
        lines: lines.into_iter().map(|l| l.trim_end().to_string()).collect(),
        next: 0,
        lenient,
        failed: false,
    })
}

struct StreamBuffer {
    spec: SensorSpec,
    index: Vec<IndexRecord>,
    shared: Vec<u8>,
}

/// Single-owner writer for a new sequence directory. Stamps of each
/// stream must be non-decreasing.
pub struct SequenceWriter {
    dir: PathBuf,
    manifest: SequenceManifest,
    streams: Vec<StreamBuffer>,
}

impl SequenceWriter {
    pub fn create(dir: impl AsRef<Path>, manifest: SequenceManifest) -> Result<Self> {
        manifest.validate()?;
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        for s in &manifest.streams {
            fs::create_dir_all(dir.join(&s.stream_id))?;
        }
        let streams = manifest
            .streams
            .iter()
            .map(|s| StreamBuffer {
                spec: s.clone(),
                index: Vec::new(),
                shared: if s.kind == SensorKind::Imu {
                    format!("{IMU_HEADER}\n").into_bytes()
                } else {
                    Vec::new()
                },
            })
            .collect();
        Ok(Self { dir, manifest, streams })
    }

    fn buffer(&mut self, stream_id: &str, kind: SensorKind, stamp_ns: i64) -> Result<(&Path, &mut StreamBuffer)> {
        let b = self
            .streams
            .iter_mut()
            .find(|b| b.spec.stream_id == stream_id)
            .ok_or_else(|| DatasetError::UnknownStream(stream_id.to_string()))?;
        let err = |message: String| DatasetError::Writer {
            stream: stream_id.to_string(),
            message,
        };
        if b.spec.kind != kind {
            return Err(err(format!("stream holds {} records, not {kind}", b.spec.kind)));
        }
        if let Some(last) = b.index.last() {
            if stamp_ns < last.stamp_ns {
                return Err(err(format!("stamp {stamp_ns} precedes {}", last.stamp_ns)));
            }
        }
        Ok((&self.dir, b))
    }

    fn write_payload(&mut self, stream_id: &str, kind: SensorKind, stamp_ns: i64, ext: &str, bytes: &[u8]) -> Result<()> {
        let (dir, b) = self.buffer(stream_id, kind, stamp_ns)?;
        let file = format!("{:08}.{ext}", b.index.len());
        fs::write(dir.join(stream_id).join(&file), bytes)?;
        b.index.push(IndexRecord {
            stamp_ns,
            file,
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_image(&mut self, stream_id: &str, stamp_ns: i64, image: &RgbImage) -> Result<()> {
        let mut png = Vec::new();
        image.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
            .map_err(camera_model::CameraError::from)?;
        self.write_payload(stream_id, SensorKind::Camera, stamp_ns, "png", &png)
    }

    pub fn write_scan(&mut self, stream_id: &str, stamp_ns: i64, cloud: &PointCloud) -> Result<()> {
        let mut ply = Vec::new();
        camera_model::write_ply(cloud, &mut ply)?;
        self.write_payload(stream_id, SensorKind::Lidar, stamp_ns, "ply", &ply)
    }

    pub fn write_imu(&mut self, stream_id: &str, s: &ImuSample) -> Result<()> {
        let (_, b) = self.buffer(stream_id, SensorKind::Imu, s.stamp_ns)?;
        let [gx, gy, gz] = s.gyro;
        let [ax, ay, az] = s.accel;
        let line = format!("{},{gx:?},{gy:?},{gz:?},{ax:?},{ay:?},{az:?}\n", s.stamp_ns);
        b.shared.extend_from_slice(line.as_bytes());
        b.index.push(IndexRecord {
            stamp_ns: s.stamp_ns,
            file: IMU_DATA_FILE.to_string(),
            bytes: line.len() as u64,
        });
        Ok(())
    }

    pub fn write_pose(&mut self, stream_id: &str, e: &TrajectoryEntry) -> Result<()> {
        let (_, b) = self.buffer(stream_id, SensorKind::Trajectory, e.stamp_ns)?;
        let t = Trajectory::new(b.spec.frame.clone(), vec![e.clone()]).expect("single entry");
        let line = traj_eval::trajectory_to_string(&t);
        b.shared.extend_from_slice(line.as_bytes());
        b.index.push(IndexRecord {
            stamp_ns: e.stamp_ns,
            file: TRAJECTORY_FILE.to_string(),
            bytes: line.len() as u64,
        });
        Ok(())
    }

    /// Writes the manifest, every index and the shared data files.
    pub fn finish(self) -> Result<PathBuf> {
        for b in &self.streams {
            let sdir = self.dir.join(&b.spec.stream_id);
            let mut idx = std::io::BufWriter::new(fs::File::create(sdir.join(INDEX_FILE))?);
            writeln!(idx, "{INDEX_HEADER}")?;
            for r in &b.index {
                writeln!(idx, "{},{},{}", r.stamp_ns, r.file, r.bytes)?;
            }
            idx.flush()?;
            if let Some(name) = shared_file(b.spec.kind) {
                fs::write(sdir.join(name), &b.shared)?;
            }
        }
        let json = crate::report::to_canonical_json_with(&self.manifest, 6).map_err(|e| DatasetError::Schema(e.to_string()))?;
        fs::write(self.dir.join(MANIFEST_FILE), json)?;
        Ok(self.dir)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    UnreadableIndex,
    CorruptIndexRow,
    NonMonotonic,
    MissingPayload,
    PayloadSize,
    EmptyStream,
    RateDeviation,
    Gap,
    SpanOverlap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub kind: FindingKind,
    pub stream_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_index: Option<usize>,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidationPolicy {
    /// Allowed relative deviation of the measured rate from the nominal.
    pub rate_tol: f64,
    /// Intervals longer than this many nominal periods are gaps.
    pub gap_factor: f64,
    /// Minimum fraction of the sequence duration each stream must span.
    pub overlap: f64,
    pub rate_severity: Severity,
    pub gap_severity: Severity,
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        Self {
            rate_tol: 0.10,
            gap_factor: 3.0,
            overlap: 0.99,
            rate_severity: Severity::Warning,
            gap_severity: Severity::Warning,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetValidationReport {
    pub sequence_id: String,
    pub policy: ValidationPolicy,
    pub n_errors: usize,
    pub n_warnings: usize,
    /// Ordered by stream id, then record index.
    pub findings: Vec<Finding>,
}

impl DatasetValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.n_errors > 0
    }
}

struct StreamScan {
    stamps: Vec<i64>,
    findings: Vec<Finding>,
}

fn scan_stream(dir: &Path, spec: &SensorSpec, policy: &ValidationPolicy) -> StreamScan {
    let id = spec.stream_id.clone();
    let finding = |severity, kind, record_index, message: String| Finding {
        severity,
        kind,
        stream_id: id.clone(),
        record_index,
        message,
    };
    let mut findings = Vec::new();
    let index = match read_stream_index(dir, &spec.stream_id) {
        Ok(i) => i,
        Err(e) => {
            findings.push(finding(Severity::Error, FindingKind::UnreadableIndex, None, e.to_string()));
            return StreamScan {
                stamps: Vec::new(),
                findings,
            };
        }
    };
    let sdir = dir.join(&spec.stream_id);
    let shared = read_shared_lines(&sdir, spec.kind);
    let mut stamps = Vec::new();
    for (i, rec) in index.records.iter().enumerate() {
        let rec = match rec {
            Ok(r) => r,
            Err(m) => {
                findings.push(finding(Severity::Error, FindingKind::CorruptIndexRow, Some(i), m.clone()));
                continue;
            }
        };
        if let Some(&prev) = stamps.last() {
            if rec.stamp_ns < prev {
                findings.push(finding(
                    Severity::Error,
                    FindingKind::NonMonotonic,
                    Some(i),
                    format!("stamp {} precedes previous stamp {prev}", rec.stamp_ns),
                ));
            }
        }
        stamps.push(rec.stamp_ns);
        let size_mismatch = match (shared_file(spec.kind), &shared) {
            (None, _) => match fs::metadata(sdir.join(&rec.file)) {
                Ok(m) => (m.len() != rec.bytes).then_some(m.len()),
                Err(_) => {
                    findings.push(finding(
                        Severity::Error,
                        FindingKind::MissingPayload,
                        Some(i),
                        format!("payload {} is missing", rec.file),
                    ));
                    None
                }
            },
            (Some(_), Ok(Some(lines))) => match lines.get(i) {
                Some(l) => (l.len() as u64 != rec.bytes).then_some(l.len() as u64),
                None => {
                    findings.push(finding(
                        Severity::Error,
                        FindingKind::MissingPayload,
                        Some(i),
                        format!("{} has no row {i}", rec.file),
                    ));
                    None
                }
            },
            (Some(name), _) => {
                if i == 0 {
                    findings.push(finding(
                        Severity::Error,
                        FindingKind::MissingPayload,
                        None,
                        format!("{name} is missing or unreadable"),
                    ));
                }
                None
            }
        };
        if let Some(actual) = size_mismatch {
            findings.push(finding(
                Severity::Error,
                FindingKind::PayloadSize,
                Some(i),
                format!("{} holds {actual} bytes, index says {}", rec.file, rec.bytes),
            ));
        }
    }
    if stamps.is_empty() {
        findings.push(finding(Severity::Warning, FindingKind::EmptyStream, None, "stream has no records".into()));
    }
    if let (Some(rate), true) = (spec.nominal_rate_hz, stamps.len() >= 2) {
        let span = stamps[stamps.len() - 1] - stamps[0];
        if span > 0 {
            let measured = (stamps.len() - 1) as f64 / (span as f64 * 1e-9);
            let dev = (measured - rate).abs() / rate;
            if dev > policy.rate_tol {
                findings.push(finding(
                    policy.rate_severity,
                    FindingKind::RateDeviation,
                    None,
                    format!(
                        "measured {measured:.3} Hz vs nominal {rate} Hz ({:.1}% > {:.1}%)",
                        dev * 100.0,
                        policy.rate_tol * 100.0
                    ),
                ));
            }
        }
        let limit = policy.gap_factor * 1e9 / rate;
        for (i, w) in stamps.windows(2).enumerate() {
            let dt = (w[1] - w[0]) as f64;
            if dt > limit {
                findings.push(finding(
                    policy.gap_severity,
                    FindingKind::Gap,
                    Some(i + 1),
                    format!("{:.6} s without records (limit {:.6} s)", dt * 1e-9, limit * 1e-9),
                ));
            }
        }
    }
    StreamScan { stamps, findings }
}

/// Integrity report of a sequence directory. Only an unreadable manifest is
/// fatal; everything else becomes a finding.
pub fn validate_sequence(dir: impl AsRef<Path>, policy: &ValidationPolicy) -> Result<DatasetValidationReport> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let scans: Vec<StreamScan> = manifest
        .streams
        .par_iter()
        .map(|s| scan_stream(dir, s, policy))
        .collect();
    let spans: Vec<(i64, i64)> = scans
        .iter()
        .filter_map(|s| Some((*s.stamps.iter().min()?, *s.stamps.iter().max()?)))
        .collect();
    let mut findings: Vec<Finding> = Vec::new();
    if let (Some(start), Some(end)) = (spans.iter().map(|s| s.0).min(), spans.iter().map(|s| s.1).max()) {
        let total = (end - start) as f64;
        for (spec, scan) in manifest.streams.iter().zip(&scans) {
            let (Some(lo), Some(hi)) = (scan.stamps.iter().min(), scan.stamps.iter().max()) else {
                continue;
            };
            let frac = if total > 0.0 { (hi - lo) as f64 / total } else { 1.0 };
            if frac < policy.overlap {
                findings.push(Finding {
                    severity: Severity::Warning,
                    kind: FindingKind::SpanOverlap,
                    stream_id: spec.stream_id.clone(),
                    record_index: None,
                    message: format!(
                        "stream spans {:.2}% of the sequence (minimum {:.2}%)",
                        frac * 100.0,
                        policy.overlap * 100.0
                    ),
                });
            }
        }
    }
    findings.extend(scans.into_iter().flat_map(|s| s.findings));
    findings.sort_by(|a, b| {
        (&a.stream_id, a.record_index, a.kind).cmp(&(&b.stream_id, b.record_index, b.kind))
    });
    let n_errors = findings.iter().filter(|f| f.severity == Severity::Error).count();
    Ok(DatasetValidationReport {
        sequence_id: manifest.sequence_id,
        policy: *policy,
        n_warnings: findings.len() - n_errors,
        n_errors,
        findings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamStats {
    pub stream_id: String,
    pub kind: SensorKind,
    pub count: usize,
    /// `(count - 1) / span`; absent with fewer than two distinct stamps.
    pub measured_rate_hz: Option<f64>,
    pub gap_count: usize,
    pub max_gap_s: f64,
    /// On-disk size of the stream directory.
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceStats {
    pub sequence_id: String,
    pub duration_ns: i64,
    pub duration_s: f64,
    /// `MMm SSs`
    pub duration_display: String,
    /// Every file under the sequence directory.
    pub total_bytes: u64,
    /// Decimal gigabytes.
    pub total_gb: f64,
    pub streams: Vec<StreamStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_length_m: Option<f64>,
}

/// Total size of all regular files below `path`.
pub fn directory_bytes(path: &Path) -> Result<u64> {
    let mut total = 0;
    for entry in fs::read_dir(path)? {
        let entry = entry?;
        let ft = entry.file_type()?;
        if ft.is_dir() {
            total += directory_bytes(&entry.path())?;
        } else if ft.is_file() {
            total += entry.metadata()?.len();
        }
    }
    Ok(total)
}

pub fn sequence_stats(dir: impl AsRef<Path>) -> Result<SequenceStats> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let gap_factor = ValidationPolicy::default().gap_factor;
    let mut streams = Vec::new();
    let mut all: Option<(i64, i64)> = None;
    let mut trajectory_length_m = None;
    for spec in &manifest.streams {
        let index = read_stream_index(dir, &spec.stream_id)?;
        let stamps: Vec<i64> = index
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.as_ref().map(|r| r.stamp_ns).map_err(|m| DatasetError::CorruptRecord {
                    stream: spec.stream_id.clone(),
                    index: i,
                    message: m.clone(),
                })
            })
            .collect::<Result<_>>()?;
        if let (Some(&lo), Some(&hi)) = (stamps.first(), stamps.last()) {
            all = Some(all.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))));
        }
        let span = stamps.last().zip(stamps.first()).map_or(0, |(b, a)| b - a);
        let intervals = stamps.windows(2).map(|w| w[1] - w[0]);
        let max_gap_ns = intervals.clone().max().unwrap_or(0);
        let gap_count = spec
            .nominal_period_ns()
            .map_or(0, |p| intervals.filter(|&d| d as f64 > gap_factor * p).count());
        streams.push(StreamStats {
            stream_id: spec.stream_id.clone(),
            kind: spec.kind,
            count: stamps.len(),
            measured_rate_hz: (span > 0).then(|| (stamps.len() - 1) as f64 / (span as f64 * 1e-9)),
            gap_count,
            max_gap_s: max_gap_ns as f64 * 1e-9,
            bytes: directory_bytes(&dir.join(&spec.stream_id))?,
        });
        if spec.kind == SensorKind::Trajectory && trajectory_length_m.is_none() && !stamps.is_empty() {
            let text = fs::read_to_string(dir.join(&spec.stream_id).join(TRAJECTORY_FILE))?;
            let t = traj_eval::parse_trajectory(&text, spec.frame.clone()).map_err(|e| DatasetError::CorruptRecord {
                stream: spec.stream_id.clone(),
                index: 0,
                message: e.to_string(),
            })?;
            trajectory_length_m = Some(traj_eval::trajectory_length(&t));
        }
    }
    let (start, end) = all.ok_or(DatasetError::EmptySequence)?;
    let duration_ns = end - start;
    let total_bytes = directory_bytes(dir)?;
    Ok(SequenceStats {
        sequence_id: manifest.sequence_id,
        duration_ns,
        duration_s: duration_ns as f64 * 1e-9,
        duration_display: format_duration(duration_ns),
        total_bytes,
        total_gb: total_bytes as f64 / BYTES_PER_GB,
        streams,
        trajectory_length_m,
    })
}

/// Seeded sequences with exact nominal stamps, for fixtures and demos.
pub mod synthetic {
    use image::{Rgb, RgbImage};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::se3::{Transform, UnitQuaternion};

    /// Stamp of record `k` at `rate_hz`, starting at `start_ns`.
    pub fn nominal_stamp(start_ns: i64, rate_hz: f64, k: usize) -> i64 {
        start_ns + (k as f64 * 1e9 / rate_hz).round() as i64
    }

    /// Record count that spans `duration_ns` at `rate_hz`, both ends included.
    pub fn nominal_count(duration_ns: i64, rate_hz: f64) -> usize {
        (duration_ns as f64 * 1e-9 * rate_hz).round() as usize + 1
    }

    /// Writes every stream of `manifest` at its nominal rate for
    /// `duration_ns`. Trajectory streams without a rate use 10 Hz and trace a
    /// circle of radius 1 m, one revolution per 10 s.
    pub fn write_sequence(dir: &Path, manifest: &SequenceManifest, start_ns: i64, duration_ns: i64, seed: u64) -> Result<PathBuf> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = SequenceWriter::create(dir, manifest.clone())?;
        for spec in &manifest.streams {
            let rate = spec.nominal_rate_hz.unwrap_or(10.0);
            for k in 0..nominal_count(duration_ns, rate) {
                let stamp = nominal_stamp(start_ns, rate, k);
                let id = spec.stream_id.as_str();
                match spec.kind {
                    SensorKind::Camera => {
                        let shade = rng.random::<u8>();
                        let img = RgbImage::from_fn(8, 6, |x, y| Rgb([shade, x as u8 * 30, y as u8 * 40]));
                        w.write_image(id, stamp, &img)?;
                    }
                    SensorKind::Lidar => {
                        let n = rng.random_range(5..40);
                        let pts = (0..n)
                            .map(|_| Vector3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-2.0..5.0)))
                            .collect();
                        w.write_scan(id, stamp, &PointCloud::new(pts)?)?;
                    }
                    SensorKind::Imu => {
                        let mut n = || rng.random_range(-0.01..0.01);
                        w.write_imu(
                            id,
                            &ImuSample {
                                stamp_ns: stamp,
                                gyro: [n(), n(), n()],
                                accel: [n(), n(), 9.81 + n()],
                            },
                        )?;
                    }
                    SensorKind::Trajectory => {
                        let a = (stamp - start_ns) as f64 * 1e-9 * std::f64::consts::TAU / 10.0;
                        let pose = Transform::new(
                            UnitQuaternion::from_axis_angle(&Vector3::z(), a),
                            Vector3::new(a.cos(), a.sin(), 0.0),
                        );
                        w.write_pose(id, &TrajectoryEntry { stamp_ns: stamp, pose })?;
                    }
                }
            }
        }
        w.finish()
    }

    /// Nine-stream manifest of the reference rig: four cameras, the RGB-D
    /// color stream, the LiDAR, both IMUs and the ground truth.
    pub fn rig_manifest(sequence_id: &str) -> SequenceManifest {
        let s = |id: &str, kind, rate, frame: &str| SensorSpec::new(id, kind, rate, frame).expect("valid spec");
        SequenceManifest::new(
            sequence_id,
            Scenario::Indoor,
            ClockDomainKind::Ptp,
            vec![
                s("cam_front_left", SensorKind::Camera, Some(30.0), "cam_front_left"),
                s("cam_front_right", SensorKind::Camera, Some(30.0), "cam_front_right"),
                s("cam_side_left", SensorKind::Camera, Some(30.0), "cam_side_left"),
                s("cam_side_right", SensorKind::Camera, Some(30.0), "cam_side_right"),
                s("realsense_rgb", SensorKind::Camera, Some(30.0), "realsense_rgb"),
                s("os_lidar", SensorKind::Lidar, Some(10.0), "os_sensor"),
                s("os_imu", SensorKind::Imu, Some(100.0), "os_imu"),
                s("realsense_imu", SensorKind::Imu, Some(400.0), "realsense_imu"),
                s("ground_truth", SensorKind::Trajectory, None, "base_link"),
            ],
        )
        .expect("valid manifest")
    }
}
