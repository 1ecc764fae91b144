//! Pinhole cameras with radial-tangential distortion, reprojection error
//! statistics and point-cloud colorization.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use image::RgbImage;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::Transform;
use crate::tf_graph::FrameId;

pub const UNDISTORT_MAX_ITERATIONS: usize = 50;
/// Convergence threshold of the undistortion fixed point, normalized units.
pub const UNDISTORT_TOLERANCE: f64 = 1e-14;
/// Color of points that no camera sees.
pub const SENTINEL_COLOR: [u8; 3] = [0, 0, 0];

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("undistortion did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("no observation projects into the image")]
    NoValidProjections,
    #[error("camera {camera}: image is {got_w}x{got_h}, intrinsics expect {want_w}x{want_h}")]
    DimensionMismatch {
        camera: String,
        want_w: u32,
        want_h: u32,
        got_w: u32,
        got_h: u32,
    },
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("PLY: {0}")]
    Ply(String),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CameraError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// `[k1, k2, p1, p2]`
    pub distortion: [f64; 4],
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, distortion: [f64; 4], width: u32, height: u32) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            distortion,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(fx, fy, cx, cy, [0.0; 4], width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CameraError::InvalidIntrinsics(m));
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad(format!("focal lengths must be positive, got {} {}", self.fx, self.fy));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return bad(format!("cx {} outside [0, {})", self.cx, self.width));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad(format!("cy {} outside [0, {})", self.cy, self.height));
        }
        if self.distortion.iter().any(|d| !d.is_finite()) {
            return bad("non-finite distortion coefficient".into());
        }
        Ok(())
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }
}

/// Applies radial-tangential distortion to a normalized image point.
pub fn distort(k: &CameraIntrinsics, p: [f64; 2]) -> [f64; 2] {
    let [k1, k2, p1, p2] = k.distortion;
    let [x, y] = p;
    let r2 = x * x + y * y;
    let radial = 1.0 + k1 * r2 + k2 * r2 * r2;
    [
        x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
        y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y,
    ]
}

/// Inverts [`distort`] by fixed-point iteration.
pub fn undistort(k: &CameraIntrinsics, q: [f64; 2]) -> Result<[f64; 2]> {
    let [k1, k2, p1, p2] = k.distortion;
    let mut p = q;
    for _ in 0..UNDISTORT_MAX_ITERATIONS {
        let d = distort(k, p);
        if !(d[0].is_finite() && d[1].is_finite()) {
            break;
        }
        if (d[0] - q[0]).abs() <= UNDISTORT_TOLERANCE && (d[1] - q[1]).abs() <= UNDISTORT_TOLERANCE {
            return Ok(p);
        }
        let [x, y] = p;
        let r2 = x * x + y * y;
        let radial = 1.0 + k1 * r2 + k2 * r2 * r2;
        let dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        p = [(q[0] - dx) / radial, (q[1] - dy) / radial];
    }
    Err(CameraError::NoConvergence(UNDISTORT_MAX_ITERATIONS))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// False behind the camera (`u`, `v` are NaN) or outside the image.
    pub valid: bool,
}

impl Projection {
    pub fn pixel(&self) -> Option<[f64; 2]> {
        self.valid.then_some([self.u, self.v])
    }
}

/// Projects a point given in the camera frame.
pub fn project(k: &CameraIntrinsics, p_cam: &Vector3<f64>) -> Projection {
    if !(p_cam.z > 0.0) {
        return Projection {
            u: f64::NAN,
            v: f64::NAN,
            valid: false,
        };
    }
    let [xd, yd] = distort(k, [p_cam.x / p_cam.z, p_cam.y / p_cam.z]);
    let u = k.fx * xd + k.cx;
    let v = k.fy * yd + k.cy;
    Projection {
        u,
        v,
        valid: k.in_image(u, v),
    }
}

/// Point at `depth` along the ray through pixel `(u, v)`.
pub fn backproject(k: &CameraIntrinsics, pixel: [f64; 2], depth: f64) -> Result<Vector3<f64>> {
    let q = [(pixel[0] - k.cx) / k.fx, (pixel[1] - k.cy) / k.fy];
    let [x, y] = undistort(k, q)?;
    Ok(Vector3::new(x * depth, y * depth, depth))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pixel: [f64; 2],
    pub point: Vector3<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReprojStats {
    pub mean_px: f64,
    /// Population standard deviation.
    pub std_px: f64,
    pub max_px: f64,
    pub n_points: usize,
    /// Observations skipped because their point did not project.
    pub n_invalid: usize,
}

/// Pixel error statistics of `observations` seen through `cam_from_world`.
pub fn reprojection_stats(
    observations: &[Observation],
    cam_from_world: &Transform,
    k: &CameraIntrinsics,
) -> Result<ReprojStats> {
    let errors: Vec<f64> = observations
        .iter()
        .filter_map(|o| {
            let p = project(k, &cam_from_world.transform_point(&o.point)).pixel()?;
            Some((p[0] - o.pixel[0]).hypot(p[1] - o.pixel[1]))
        })
        .collect();
    if errors.is_empty() {
        return Err(CameraError::NoValidProjections);
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(ReprojStats {
        mean_px: mean,
        std_px: var.sqrt(),
        max_px: errors.iter().copied().fold(0.0, f64::max),
        n_points: errors.len(),
        n_invalid: observations.len() - errors.len(),
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Option<Vec<[u8; 3]>>,
    /// Index into the camera list used for colorization.
    pub camera_ids: Option<Vec<Option<u32>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        let c = Self {
            points,
            colors: None,
            camera_ids: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(CameraError::InvalidCloud(format!("point {i} is not finite")));
        }
        if self.colors.as_ref().is_some_and(|c| c.len() != self.points.len()) {
            return Err(CameraError::InvalidCloud("color count differs from point count".into()));
        }
        if self.camera_ids.as_ref().is_some_and(|c| c.len() != self.points.len()) {
            return Err(CameraError::InvalidCloud("camera id count differs from point count".into()));
        }
        Ok(())
    }
}

/// A calibrated camera with the image to sample from.
#[derive(Clone, Debug)]
pub struct CameraView {
    pub id: String,
    /// Maps points from the cloud frame into the camera frame.
    pub cam_from_base: Transform,
    pub intrinsics: CameraIntrinsics,
    pub image: RgbImage,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraChoice {
    pub camera: usize,
    pub pixel: [f64; 2],
    pub off_axis_rad: f64,
}

/// Camera with the smallest off-axis angle among those that see `p`;
/// ties go to the earlier camera.
pub fn select_camera(cameras: &[CameraView], p: &Vector3<f64>) -> Option<CameraChoice> {
    let mut best: Option<CameraChoice> = None;
    for (i, cam) in cameras.iter().enumerate() {
        let pc = cam.cam_from_base.transform_point(p);
        let Some(pixel) = project(&cam.intrinsics, &pc).pixel() else {
            continue;
        };
        let angle = pc.x.hypot(pc.y).atan2(pc.z);
        if best.is_none_or(|b| angle < b.off_axis_rad) {
            best = Some(CameraChoice {
                camera: i,
                pixel,
                off_axis_rad: angle,
            });
        }
    }
    best
}

/// Nearest pixel to `(u, v)` with pixel centers at integer coordinates.
pub fn sample_nearest(image: &RgbImage, pixel: [f64; 2]) -> [u8; 3] {
    let u = (pixel[0].round() as u32).min(image.width() - 1);
    let v = (pixel[1].round() as u32).min(image.height() - 1);
    image.get_pixel(u, v).0
}

/// Colors every point from its best camera. Points no camera sees get
/// [`SENTINEL_COLOR`] and no camera id. Order is preserved.
pub fn colorize_cloud(cloud: &PointCloud, cameras: &[CameraView]) -> Result<PointCloud> {
    cloud.validate()?;
    for cam in cameras {
        cam.intrinsics.validate()?;
        let (w, h) = cam.image.dimensions();
        if (w, h) != (cam.intrinsics.width, cam.intrinsics.height) {
            return Err(CameraError::DimensionMismatch {
                camera: cam.id.clone(),
                want_w: cam.intrinsics.width,
                want_h: cam.intrinsics.height,
                got_w: w,
                got_h: h,
            });
        }
    }
    let (colors, camera_ids): (Vec<[u8; 3]>, Vec<Option<u32>>) = cloud
        .points
        .par_iter()
        .map(|p| match select_camera(cameras, p) {
            Some(c) => (sample_nearest(&cameras[c.camera].image, c.pixel), Some(c.camera as u32)),
            None => (SENTINEL_COLOR, None),
        })
        .unzip();
    Ok(PointCloud {
        points: cloud.points.clone(),
        colors: Some(colors),
        camera_ids: Some(camera_ids),
    })
}

/// Writes binary little-endian PLY: float32 `x y z`, plus uchar
/// `red green blue` when the cloud has colors.
pub fn write_ply<W: Write>(cloud: &PointCloud, w: W) -> Result<()> {
    cloud.validate()?;
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "ply\nformat binary_little_endian 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    if cloud.colors.is_some() {
        writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        for v in p.iter() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        if let Some(c) = &cloud.colors {
            w.write_all(&c[i])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ply_file(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    write_ply(cloud, std::fs::File::create(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PlyScalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyScalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

/// Reads the vertex element of a binary little-endian PLY. Properties other
/// than `x y z red green blue` are skipped.
pub fn read_ply<R: Read>(r: R) -> Result<PointCloud> {
    let mut r = BufReader::new(r);
    let err = |m: &str| CameraError::Ply(m.to_string());
    let mut line = String::new();
    let mut next_line = |r: &mut BufReader<R>| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(err("unexpected end of header"));
        }
        Ok(line.trim_end().to_string())
    };
    if next_line(&mut r)? != "ply" {
        return Err(err("missing ply magic"));
    }
    let mut count = None;
    let mut props: Vec<(PlyScalar, String)> = Vec::new();
    let mut in_vertex = false;
    loop {
        let l = next_line(&mut r)?;
        let tok: Vec<&str> = l.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "binary_little_endian", _] => {}
            ["format", f, _] => return Err(CameraError::Ply(format!("unsupported format {f}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                if count.is_some() {
                    if in_vertex {
                        in_vertex = false;
                        continue;
                    }
                    return Err(err("only one vertex element is supported"));
                }
                if *name != "vertex" {
                    return Err(err("vertex must be the first element"));
                }
                count = Some(n.parse::<usize>().map_err(|_| err("bad vertex count"))?);
                in_vertex = true;
            }
            ["property", "list", ..] if in_vertex => return Err(err("list properties on vertices are not supported")),
            ["property", ty, name] if in_vertex => {
                let ty = PlyScalar::parse(ty).ok_or_else(|| CameraError::Ply(format!("unknown type {ty}")))?;
                props.push((ty, name.to_string()));
            }
            ["property", ..] => {}
            _ => return Err(CameraError::Ply(format!("bad header line '{l}'"))),
        }
    }
    let count = count.ok_or_else(|| err("no vertex element"))?;
    let find = |n: &str| props.iter().position(|(_, p)| p == n);
    let (Some(ix), Some(iy), Some(iz)) = (find("x"), find("y"), find("z")) else {
        return Err(err("vertex lacks x, y, z"));
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        (None, None, None) => None,
        _ => return Err(err("partial color properties")),
    };
    let offsets: Vec<usize> = props
        .iter()
        .scan(0, |o, (t, _)| {
            let at = *o;
            *o += t.size();
            Some(at)
        })
        .collect();
    let stride: usize = props.iter().map(|(t, _)| t.size()).sum();
    let mut buf = vec![0u8; stride];
    let mut points = Vec::with_capacity(count);
    let mut colors = rgb.map(|_| Vec::with_capacity(count));
    let field = |buf: &[u8], i: usize| props[i].0.read(&buf[offsets[i]..]);
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|_| err("truncated vertex data"))?;
        points.push(Vector3::new(field(&buf, ix), field(&buf, iy), field(&buf, iz)));
        if let (Some(c), Some(idx)) = (colors.as_mut(), rgb) {
            c.push(idx.map(|i| field(&buf, i).clamp(0.0, 255.0) as u8));
        }
    }
    let cloud = PointCloud {
        points,
        colors,
        camera_ids: None,
    };
    cloud.validate()?;
    Ok(cloud)
}

pub fn read_ply_file(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_ply(std::fs::File::open(path)?)
}

pub fn load_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

pub fn save_png(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    image.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// One camera in a camera file; `frame` names a frame of the calibration
/// graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub id: String,
    pub frame: FrameId,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraFile {
    pub format_version: u32,
    pub cameras: Vec<CameraRecord>,
}

pub fn read_camera_file(path: impl AsRef<Path>) -> Result<CameraFile> {
    let f: CameraFile = serde_json::from_reader(BufReader::new(std::fs::File::open(path)?))?;
    if f.format_version != 1 {
        return Err(CameraError::InvalidIntrinsics(format!(
            "unsupported camera file version {}",
            f.format_version
        )));
    }
    for c in &f.cameras {
        c.intrinsics
            .validate()
            .map_err(|e| CameraError::InvalidIntrinsics(format!("{}: {e}", c.id)))?;
    }
    Ok(f)
}

pub fn write_camera_file(file: &CameraFile, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, crate::report::to_canonical_json_with(file, 9)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vga() -> CameraIntrinsics {
        CameraIntrinsics::pinhole(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let k = vga();
        for d in [0.1, 1.0, 37.0] {
            let p = project(&k, &Vector3::new(0.0, 0.0, d));
            assert!(p.valid);
            assert_eq!((p.u, p.v), (320.0, 240.0));
        }
    }

    #[test]
    fn linear_pinhole() {
        let p = project(&vga(), &Vector3::new(0.1, 0.0, 1.0));
        assert_eq!((p.u, p.v, p.valid), (370.0, 240.0, true));
    }

    #[test]
    fn behind_and_outside_are_invalid() {
        let k = vga();
        assert!(!project(&k, &Vector3::new(0.0, 0.0, 0.0)).valid);
        assert!(!project(&k, &Vector3::new(0.0, 0.0, -1.0)).valid);
        assert!(!project(&k, &Vector3::new(1.0, 0.0, 1.0)).valid);
        // u = 640 exactly is outside the half-open range.
        assert!(!project(&k, &Vector3::new(0.64, 0.0, 1.0)).valid);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::pinhole(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::pinhole(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::pinhole(1.0, 1.0, 1.0, -0.5, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 1.0, [f64::NAN, 0.0, 0.0, 0.0], 4, 4).is_err());
    }

    #[test]
    fn undistort_identity_and_round_trip() {
        let k = vga();
        assert_eq!(undistort(&k, [0.3, -0.2]).unwrap(), [0.3, -0.2]);
        let mut k = vga();
        k.distortion = [-0.1, 0.0, 0.0, 0.0];
        let q = [0.2, 0.1];
        let p = undistort(&k, q).unwrap();
        let back = distort(&k, p);
        assert!((back[0] - q[0]).abs() < 1e-8 && (back[1] - q[1]).abs() < 1e-8);
    }

    #[test]
    fn pathological_distortion_fails() {
        let mut k = vga();
        k.distortion = [2.0, 0.0, 0.0, 0.0];
        assert!(matches!(undistort(&k, [0.5, 0.5]), Err(CameraError::NoConvergence(50))));
        k.distortion = [-2.0, 0.0, 0.0, 0.0];
        assert!(matches!(undistort(&k, [0.5, 0.5]), Err(CameraError::NoConvergence(50))));
    }

    #[test]
    fn backproject_zero_distortion_is_exact() {
        let k = vga();
        for (u, v) in [(0.0, 0.0), (12.25, 400.5), (639.9, 479.9)] {
            for d in [0.2, 3.0, 80.0] {
                let p = project(&k, &backproject(&k, [u, v], d).unwrap());
                assert_abs_diff_eq!(p.u, u, epsilon = 1e-9);
                assert_abs_diff_eq!(p.v, v, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn reprojection_exact_model_is_zero() {
        let k = vga();
        let pose = Transform::from_translation(Vector3::new(0.1, -0.05, 2.0));
        let obs: Vec<Observation> = (0..20)
            .map(|i| {
                let point = Vector3::new(i as f64 * 0.05 - 0.5, (i % 5) as f64 * 0.1, 0.0);
                let pr = project(&k, &pose.transform_point(&point));
                Observation {
                    pixel: [pr.u, pr.v],
                    point,
                }
            })
            .collect();
        let s = reprojection_stats(&obs, &pose, &k).unwrap();
        assert_eq!((s.mean_px, s.std_px, s.max_px, s.n_points), (0.0, 0.0, 0.0, 20));
        let behind = Observation {
            pixel: [0.0, 0.0],
            point: Vector3::new(0.0, 0.0, -5.0),
        };
        assert!(matches!(
            reprojection_stats(&[behind], &pose, &k),
            Err(CameraError::NoValidProjections)
        ));
    }

    #[test]
    fn ply_round_trip() {
        let mut cloud = PointCloud::new(vec![Vector3::new(1.0, -2.5, 0.125), Vector3::new(0.0, 3.0, 4.0)]).unwrap();
        let mut buf = Vec::new();
        write_ply(&cloud, &mut buf).unwrap();
        assert_eq!(read_ply(buf.as_slice()).unwrap(), cloud);

        cloud.colors = Some(vec![[255, 0, 7], [1, 2, 3]]);
        let mut buf = Vec::new();
        write_ply(&cloud, &mut buf).unwrap();
        let header = "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
        assert!(buf.starts_with(header.as_bytes()));
        assert_eq!(buf.len(), header.len() + 2 * 15);
        assert_eq!(read_ply(buf.as_slice()).unwrap(), cloud);
    }

    #[test]
    fn ply_with_extra_properties_and_errors() {
        let mut data = b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nproperty float intensity\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for v in [1.5f64, 2.5, -3.0] {
            data.extend_from_slice(&v.to_le_bytes());
        }
        data.extend_from_slice(&9.0f32.to_le_bytes());
        let c = read_ply(data.as_slice()).unwrap();
        assert_eq!(c.points, vec![Vector3::new(1.5, 2.5, -3.0)]);
        assert!(c.colors.is_none());

        let truncated = &data[..data.len() - 3];
        assert!(matches!(read_ply(truncated), Err(CameraError::Ply(_))));
        let ascii = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(read_ply(&ascii[..]), Err(CameraError::Ply(_))));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cam = CameraView {
            id: "c".into(),
            cam_from_base: Transform::IDENTITY,
            intrinsics: vga(),
            image: RgbImage::new(320, 240),
        };
        let cloud = PointCloud::new(vec![Vector3::new(0.0, 0.0, 1.0)]).unwrap();
        assert!(matches!(
            colorize_cloud(&cloud, &[cam]),
            Err(CameraError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nearest_pixel_sampling() {
        let mut img = RgbImage::new(3, 2);
        img.put_pixel(1, 0, image::Rgb([9, 9, 9]));
        img.put_pixel(2, 1, image::Rgb([5, 6, 7]));
        assert_eq!(sample_nearest(&img, [0.6, 0.4]), [9, 9, 9]);
        assert_eq!(sample_nearest(&img, [2.9, 1.9]), [5, 6, 7]);
        assert_eq!(sample_nearest(&img, [0.4, 0.4]), [0, 0, 0]);
    }
}
