//! Trajectories, timestamp association, closed-form alignment and absolute
//! trajectory error.
//!
//! Trajectory files use the common SLAM benchmark text layout, one pose per
//! line: `t x y z qx qy qz qw` with `t` in decimal seconds. Lines starting
//! with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::se3::{Transform, UnitQuaternion};
use crate::tf_graph::FrameId;

/// Default association tolerance: half a 30 Hz frame interval, rounded.
pub const DEFAULT_MAX_DT_NS: i64 = 20_000_000;
pub const MIN_ATE_PAIRS: usize = 3;
/// Relative size of the second singular value below which point sets are
/// treated as collinear.
pub const DEGENERACY_RATIO: f64 = 1e-10;
pub const DEFAULT_TRAJECTORY_FRAME: &str = "map";

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: stamp is not after the previous one")]
    NonMonotonic { line: usize },
    #[error("trajectory is empty")]
    Empty,
    #[error("no stamps associate within {max_dt_ns} ns")]
    NoMatches { max_dt_ns: i64 },
    #[error("{n} associated pairs, need at least {min}")]
    TooFewPairs { n: usize, min: usize },
    #[error("point sets differ in length or are empty")]
    BadPointSets,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TrajError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEntry {
    pub stamp_ns: i64,
    pub pose: Transform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub frame: FrameId,
    entries: Vec<TrajectoryEntry>,
}

impl Trajectory {
    pub fn new(frame: FrameId, entries: Vec<TrajectoryEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(TrajError::Empty);
        }
        if let Some(i) = entries.windows(2).position(|w| w[1].stamp_ns <= w[0].stamp_ns) {
            return Err(TrajError::NonMonotonic { line: i + 2 });
        }
        Ok(Self { frame, entries })
    }

    pub fn entries(&self) -> &[TrajectoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn stamps_ns(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.iter().map(|e| e.stamp_ns)
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vector3<f64>> + '_ {
        self.entries.iter().map(|e| &e.pose.translation)
    }

    /// Left-multiplies every pose by `t`.
    pub fn transformed(&self, t: &Transform) -> Self {
        Self {
            frame: self.frame.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| TrajectoryEntry {
                    stamp_ns: e.stamp_ns,
                    pose: t.compose(&e.pose),
                })
                .collect(),
        }
    }
}

/// Parses decimal seconds into integer nanoseconds without going through
/// binary floating point. Digits beyond the ninth decimal are rounded half
/// away from zero. Exponent notation falls back to `f64`.
pub fn parse_seconds_ns(s: &str) -> Option<i64> {
    if s.contains(['e', 'E']) {
        let v: f64 = s.parse().ok()?;
        let ns = (v * 1e9).round();
        return (ns.is_finite() && ns.abs() < i64::MAX as f64).then_some(ns as i64);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let secs: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let mut frac_ns: i64 = 0;
    for (i, b) in frac.bytes().take(9).enumerate() {
        frac_ns += (b - b'0') as i64 * 10i64.pow(8 - i as u32);
    }
    if frac.len() > 9 && frac.as_bytes()[9] >= b'5' {
        frac_ns += 1;
    }
    let total = secs.checked_mul(1_000_000_000)?.checked_add(frac_ns)?;
    Some(if neg { -total } else { total })
}

/// Exact decimal seconds, nine fractional digits.
pub fn format_seconds_ns(ns: i64) -> String {
    let sign = if ns < 0 { "-" } else { "" };
    let a = ns.unsigned_abs();
    format!("{sign}{}.{:09}", a / 1_000_000_000, a % 1_000_000_000)
}

pub fn parse_trajectory(text: &str, frame: FrameId) -> Result<Trajectory> {
    let mut entries: Vec<TrajectoryEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let tok: Vec<&str> = l.split_whitespace().collect();
        let err = |message: String| TrajError::Parse { line, message };
        if tok.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", tok.len())));
        }
        let stamp_ns = parse_seconds_ns(tok[0]).ok_or_else(|| err(format!("bad stamp '{}'", tok[0])))?;
        let mut v = [0.0; 7];
        for (k, t) in tok[1..].iter().enumerate() {
            v[k] = t
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("bad number '{t}'")))?;
        }
        let [x, y, z, qx, qy, qz, qw] = v;
        let q = UnitQuaternion::from_normalized(qw, qx, qy, qz)
            .or_else(|_| UnitQuaternion::new(qw, qx, qy, qz))
            .map_err(|e| err(format!("bad quaternion: {e}")))?;
        if entries.last().is_some_and(|p| stamp_ns <= p.stamp_ns) {
            return Err(TrajError::NonMonotonic { line });
        }
        entries.push(TrajectoryEntry {
            stamp_ns,
            pose: Transform::new(q, Vector3::new(x, y, z)),
        });
    }
    Trajectory::new(frame, entries)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let frame = FrameId::new(DEFAULT_TRAJECTORY_FRAME).expect("valid frame name");
    parse_trajectory(&std::fs::read_to_string(path)?, frame)
}

/// Text form; floats use the shortest representation that parses back to
/// the same value.
pub fn trajectory_to_string(t: &Trajectory) -> String {
    let mut s = String::new();
    for e in &t.entries {
        let p = &e.pose.translation;
        let [w, x, y, z] = e.pose.rotation.wxyz();
        let _ = writeln!(
            s,
            "{} {:?} {:?} {:?} {:?} {:?} {:?} {:?}",
            format_seconds_ns(e.stamp_ns),
            p.x,
            p.y,
            p.z,
            x,
            y,
            z,
            w
        );
    }
    s
}

pub fn save_trajectory(t: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, trajectory_to_string(t))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MatchPair {
    pub gt_index: usize,
    pub est_index: usize,
    /// `est - gt`
    pub dt_ns: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssociationResult {
    /// Sorted by ground-truth index.
    pub pairs: Vec<MatchPair>,
    pub max_dt_ns: i64,
}

/// Greedy globally-nearest matching: repeatedly accept the unmatched pair
/// with the smallest `|dt|` (ties toward smaller gt, then est index) until no
/// pair within `max_dt_ns` remains.
pub fn associate(gt: &Trajectory, est: &Trajectory, max_dt_ns: i64) -> Result<AssociationResult> {
    let est_stamps: Vec<i64> = est.stamps_ns().collect();
    let mut candidates = Vec::new();
    for (i, tg) in gt.stamps_ns().enumerate() {
        let lo = est_stamps.partition_point(|&t| t < tg.saturating_sub(max_dt_ns));
        for (j, &te) in est_stamps.iter().enumerate().skip(lo) {
            let dt = te - tg;
            if dt > max_dt_ns {
                break;
            }
            candidates.push((dt.unsigned_abs(), i, j, dt));
        }
    }
    candidates.sort_unstable();
    let mut gt_used = vec![false; gt.len()];
    let mut est_used = vec![false; est.len()];
    let mut pairs = Vec::new();
    for (_, i, j, dt) in candidates {
        if !gt_used[i] && !est_used[j] {
            gt_used[i] = true;
            est_used[j] = true;
            pairs.push(MatchPair {
                gt_index: i,
                est_index: j,
                dt_ns: dt,
            });
        }
    }
    if pairs.is_empty() {
        return Err(TrajError::NoMatches { max_dt_ns });
    }
    pairs.sort_unstable_by_key(|p| p.gt_index);
    Ok(AssociationResult { pairs, max_dt_ns })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Alignment {
    /// Maps estimate positions into the ground-truth frame (after scaling).
    pub transform: Transform,
    pub scale: f64,
    /// Point sets were collinear or coincident; only translation was fitted.
    pub degenerate: bool,
}

impl Alignment {
    pub fn identity() -> Self {
        Self {
            transform: Transform::IDENTITY,
            scale: 1.0,
            degenerate: false,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.transform.rotation.rotate(&(p * self.scale)) + self.transform.translation
    }
}

/// Closed-form least-squares fit of `gt ≈ s R est + t`.
pub fn umeyama_align(gt: &[Vector3<f64>], est: &[Vector3<f64>], with_scale: bool) -> Result<Alignment> {
    if gt.len() != est.len() || gt.is_empty() {
        return Err(TrajError::BadPointSets);
    }
    let n = gt.len() as f64;
    let mu_g = gt.iter().sum::<Vector3<f64>>() / n;
    let mu_e = est.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_e = 0.0;
    for (g, e) in gt.iter().zip(est) {
        let de = e - mu_e;
        cov += (g - mu_g) * de.transpose();
        var_e += de.norm_squared();
    }
    cov /= n;
    var_e /= n;

    let svd = cov.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if gt.len() < 3 || !(sv[0] > 0.0) || sv[1] <= DEGENERACY_RATIO * sv[0] {
        log::warn!("alignment point sets are degenerate; fitting translation only");
        return Ok(Alignment {
            transform: Transform::from_translation(mu_g - mu_e),
            scale: 1.0,
            degenerate: true,
        });
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut s = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    let scale = if with_scale {
        (Matrix3::from_diagonal(&svd.singular_values) * s).trace() / var_e
    } else {
        1.0
    };
    let t = mu_g - scale * r * mu_e;
    Ok(Alignment {
        transform: Transform::from_parts(&r, t),
        scale,
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    None,
    #[default]
    Se3,
    Sim3,
}

impl std::str::FromStr for AlignMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "se3" => Ok(Self::Se3),
            "sim3" => Ok(Self::Sim3),
            _ => Err(format!("unknown alignment '{s}' (none, se3, sim3)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AteOptions {
    pub max_dt_ns: i64,
    pub align: AlignMode,
}

impl Default for AteOptions {
    fn default() -> Self {
        Self {
            max_dt_ns: DEFAULT_MAX_DT_NS,
            align: AlignMode::Se3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AteReport {
    pub rmse_m: f64,
    /// Population standard deviation.
    pub std_m: f64,
    pub mean_m: f64,
    pub median_m: f64,
    pub max_m: f64,
    pub n_pairs: usize,
    pub align_mode: AlignMode,
    pub alignment: Transform,
    /// Present for Sim(3) alignment.
    pub scale: Option<f64>,
    pub degenerate_alignment: bool,
    pub max_dt_ns: i64,
}

impl AteReport {
    pub const CSV_HEADER: &'static str = "rmse_m,std_m,mean_m,median_m,max_m,n_pairs";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.rmse_m, self.std_m, self.mean_m, self.median_m, self.max_m, self.n_pairs
        )
    }
}

/// Statistics of a residual list: `(rmse, std, mean, median, max)`.
pub fn residual_stats(r: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let rmse = (r.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let std = (r.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n).sqrt();
    let mut sorted = r.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    (rmse, std, mean, median, sorted[k - 1])
}

/// ATE report together with the per-pair translational residuals.
pub fn ate_with_residuals(gt: &Trajectory, est: &Trajectory, opts: &AteOptions) -> Result<(AteReport, Vec<f64>)> {
    let assoc = associate(gt, est, opts.max_dt_ns)?;
    if assoc.pairs.len() < MIN_ATE_PAIRS {
        return Err(TrajError::TooFewPairs {
            n: assoc.pairs.len(),
            min: MIN_ATE_PAIRS,
        });
    }
    let g: Vec<Vector3<f64>> = assoc
        .pairs
        .iter()
        .map(|p| gt.entries[p.gt_index].pose.translation)
        .collect();
    let e: Vec<Vector3<f64>> = assoc
        .pairs
        .iter()
        .map(|p| est.entries[p.est_index].pose.translation)
        .collect();
    let alignment = match opts.align {
        AlignMode::None => Alignment::identity(),
        AlignMode::Se3 => umeyama_align(&g, &e, false)?,
        AlignMode::Sim3 => umeyama_align(&g, &e, true)?,
    };
    let residuals: Vec<f64> = g
        .iter()
        .zip(&e)
        .map(|(g, e)| (g - alignment.apply(e)).norm())
        .collect();
    let (rmse_m, std_m, mean_m, median_m, max_m) = residual_stats(&residuals);
    let report = AteReport {
        rmse_m,
        std_m,
        mean_m,
        median_m,
        max_m,
        n_pairs: residuals.len(),
        align_mode: opts.align,
        alignment: alignment.transform,
        scale: (opts.align == AlignMode::Sim3).then_some(alignment.scale),
        degenerate_alignment: alignment.degenerate,
        max_dt_ns: opts.max_dt_ns,
    };
    Ok((report, residuals))
}

pub fn ate(gt: &Trajectory, est: &Trajectory, opts: &AteOptions) -> Result<AteReport> {
    ate_with_residuals(gt, est, opts).map(|(r, _)| r)
}

/// Path length: sum of distances between consecutive positions.
pub fn trajectory_length(t: &Trajectory) -> f64 {
    t.entries
        .windows(2)
        .map(|w| (w[1].pose.translation - w[0].pose.translation).norm())
        .sum()
}

pub fn duration_ns(t: &Trajectory) -> i64 {
    t.entries[t.len() - 1].stamp_ns - t.entries[0].stamp_ns
}

pub fn duration_s(t: &Trajectory) -> f64 {
    duration_ns(t) as f64 * 1e-9
}

/// `MMm SSs`, seconds truncated; minutes keep counting past the hour.
pub fn format_duration(ns: i64) -> String {
    let s = ns.max(0) / 1_000_000_000;
    format!("{:02}m {:02}s", s / 60, s % 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> FrameId {
        FrameId::new("map").unwrap()
    }

    fn traj(stamps: &[i64]) -> Trajectory {
        Trajectory::new(
            frame(),
            stamps
                .iter()
                .map(|&s| TrajectoryEntry {
                    stamp_ns: s,
                    pose: Transform::from_translation(Vector3::new(s as f64 * 1e-9, 0.0, 0.0)),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn seconds_parse_exactly() {
        assert_eq!(parse_seconds_ns("0.0"), Some(0));
        assert_eq!(parse_seconds_ns("1403636579.763555527"), Some(1_403_636_579_763_555_527));
        assert_eq!(parse_seconds_ns("-0.5"), Some(-500_000_000));
        assert_eq!(parse_seconds_ns("12"), Some(12_000_000_000));
        assert_eq!(parse_seconds_ns(".25"), Some(250_000_000));
        assert_eq!(parse_seconds_ns("0.0000000015"), Some(2));
        assert_eq!(parse_seconds_ns("1.5e3"), Some(1_500_000_000_000));
        assert_eq!(parse_seconds_ns("1.2.3"), None);
        assert_eq!(parse_seconds_ns("abc"), None);
        assert_eq!(parse_seconds_ns("."), None);
        assert_eq!(format_seconds_ns(1_403_636_579_763_555_527), "1403636579.763555527");
        assert_eq!(format_seconds_ns(-1), "-0.000000001");
    }

    #[test]
    fn single_identity_line() {
        let t = parse_trajectory("0.0 0 0 0 0 0 0 1\n", frame()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.entries()[0].stamp_ns, 0);
        assert_eq!(t.entries()[0].pose, Transform::IDENTITY);
        assert_eq!(trajectory_length(&t), 0.0);
        assert_eq!(duration_s(&t), 0.0);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "# header\n1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n";
        assert!(matches!(parse_trajectory(text, frame()), Err(TrajError::NonMonotonic { line: 3 })));
        let text = "1.0 0 0 0 0 0 0 1\n2.0 0 0 zero 0 0 0 1\n";
        assert!(matches!(parse_trajectory(text, frame()), Err(TrajError::Parse { line: 2, .. })));
        let text = "1.0 0 0 0 0 0 0\n";
        assert!(matches!(parse_trajectory(text, frame()), Err(TrajError::Parse { line: 1, .. })));
        let text = "1.0 0 0 0 0 0 0 0\n";
        assert!(matches!(parse_trajectory(text, frame()), Err(TrajError::Parse { line: 1, .. })));
        assert!(matches!(parse_trajectory("# only\n", frame()), Err(TrajError::Empty)));
    }

    #[test]
    fn association_basics() {
        let a = traj(&[0, 100, 200, 300]);
        let r = associate(&a, &a, 0).unwrap();
        assert_eq!(r.pairs.len(), 4);
        assert!(r.pairs.iter().all(|p| p.gt_index == p.est_index && p.dt_ns == 0));

        let b = traj(&[11, 111, 211, 311]);
        assert!(matches!(associate(&a, &b, 10), Err(TrajError::NoMatches { max_dt_ns: 10 })));
        assert_eq!(associate(&a, &b, 11).unwrap().pairs.len(), 4);
    }

    #[test]
    fn greedy_takes_global_nearest_first() {
        // est 0 sits between gt 0 and gt 1, closer to gt 1.
        let gt = traj(&[0, 10]);
        let est = traj(&[6, 30]);
        let r = associate(&gt, &est, 20).unwrap();
        assert_eq!(
            r.pairs,
            vec![
                MatchPair { gt_index: 1, est_index: 0, dt_ns: -4 },
            ]
        );
        // Equal distances go to the smaller gt index.
        let gt = traj(&[0, 10]);
        let est = traj(&[5]);
        let r = associate(&gt, &est, 20).unwrap();
        assert_eq!(r.pairs[0].gt_index, 0);
    }

    #[test]
    fn constant_offset_without_alignment() {
        let gt = traj(&[0, 1_000, 2_000, 3_000, 4_000]);
        let off = gt.transformed(&Transform::from_translation(Vector3::new(0.1, 0.0, 0.0)));
        let opts = AteOptions {
            align: AlignMode::None,
            ..Default::default()
        };
        let r = ate(&gt, &off, &opts).unwrap();
        assert!((r.rmse_m - 0.1).abs() < 1e-12);
        assert!(r.std_m < 1e-12);
        assert_eq!(r.n_pairs, 5);
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let stamps: Vec<i64> = (0..50).map(|i| i * 33_333_333).collect();
        let t = Trajectory::new(
            frame(),
            stamps
                .iter()
                .enumerate()
                .map(|(i, &s)| TrajectoryEntry {
                    stamp_ns: s,
                    pose: Transform::from_translation(Vector3::new((i as f64).sin(), (i as f64 * 0.3).cos(), i as f64 * 0.01)),
                })
                .collect(),
        )
        .unwrap();
        for align in [AlignMode::None, AlignMode::Se3, AlignMode::Sim3] {
            let r = ate(&t, &t, &AteOptions { align, ..Default::default() }).unwrap();
            assert!(r.rmse_m < 1e-12 && r.max_m < 1e-12 && r.mean_m < 1e-12, "{align:?}");
        }
    }

    #[test]
    fn too_few_pairs() {
        let a = traj(&[0, 100]);
        assert!(matches!(
            ate(&a, &a, &AteOptions::default()),
            Err(TrajError::TooFewPairs { n: 2, min: 3 })
        ));
    }

    #[test]
    fn collinear_points_fall_back_to_translation() {
        let g: Vec<Vector3<f64>> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let e: Vec<Vector3<f64>> = g.iter().map(|p| p + Vector3::new(0.0, 1.0, 2.0)).collect();
        let a = umeyama_align(&g, &e, false).unwrap();
        assert!(a.degenerate);
        assert_eq!(a.transform.translation, Vector3::new(0.0, -1.0, -2.0));
    }

    #[test]
    fn duration_formatting() {
        assert_eq!(format_duration(89_000_000_000), "01m 29s");
        assert_eq!(format_duration(89_999_999_999), "01m 29s");
        assert_eq!(format_duration(0), "00m 00s");
        assert_eq!(format_duration(3_723_000_000_000), "62m 03s");
    }

    #[test]
    fn square_path_length() {
        let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)];
        let t = Trajectory::new(
            frame(),
            corners
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| TrajectoryEntry {
                    stamp_ns: i as i64,
                    pose: Transform::from_translation(Vector3::new(x, y, 0.0)),
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(trajectory_length(&t), 4.0);
    }

    #[test]
    fn csv_row_has_six_decimals() {
        let gt = traj(&[0, 1_000, 2_000]);
        let r = ate(&gt, &gt, &AteOptions::default()).unwrap();
        assert_eq!(AteReport::CSV_HEADER.split(',').count(), r.csv_row().split(',').count());
        assert!(r.csv_row().starts_with("0.000000,0.000000,"));
    }
}
