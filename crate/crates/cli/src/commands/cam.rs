use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use nalgebra::Vector3;
use rigkit::camera_model::{
    colorize_cloud, load_png, project, read_camera_file, read_ply_file, reprojection_stats,
    write_ply_file, CameraFile, CameraRecord, CameraView, Observation, ReprojStats,
};
use rigkit::se3::Transform;
use rigkit::tf_graph::{import_calibration, FrameId};
use serde::Serialize;

use super::{parse_pose, path_arg, read_columns, write_file};
use crate::error::{CliError, Result};
use crate::{Context, Report};

#[derive(Debug, Subcommand)]
pub enum CamCommand {
    /// Reprojection-error statistics of 2-D/3-D correspondences
    Reproj(ReprojArgs),
}

#[derive(Debug, Subcommand)]
pub enum CloudCommand {
    /// Color a point cloud from calibrated camera images
    Colorize(ColorizeArgs),
}

#[derive(Debug, Args)]
pub struct ReprojArgs {
    /// Camera file (JSON) [default: paths.cameras from config]
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    /// Camera id within the camera file
    #[arg(long)]
    pub camera: String,
    /// CSV with header u,v,x,y,z (pixel and 3-D point in the world frame)
    #[arg(long)]
    pub observations: PathBuf,
    /// Camera-from-world pose as tx,ty,tz,qw,qx,qy,qz [default: identity]
    #[arg(long, conflicts_with = "world_frame", allow_hyphen_values = true)]
    pub pose: Option<String>,
    /// Take the pose from the calibration file, with points given in this frame
    #[arg(long, requires = "calib")]
    pub world_frame: Option<String>,
    /// Calibration file used with --world-frame
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Write per-observation residuals (plot-ready CSV)
    #[arg(long)]
    pub residuals_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ColorizeArgs {
    /// Input PLY point cloud
    #[arg(long)]
    pub cloud: PathBuf,
    /// Calibration file [default: paths.calibration from config]
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Camera file (JSON) [default: paths.cameras from config]
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    /// Image for one camera as id=path.png (repeatable); only these cameras are used
    #[arg(long = "image", required = true)]
    pub images: Vec<String>,
    /// Frame of the cloud points [default: calibration root]
    #[arg(long)]
    pub cloud_frame: Option<String>,
    /// Output PLY with colors
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_cam(cmd: &CamCommand, ctx: &Context) -> Result<Report> {
    match cmd {
        CamCommand::Reproj(a) => reproj(a, ctx),
    }
}

pub fn run_cloud(cmd: &CloudCommand, ctx: &Context) -> Result<Report> {
    match cmd {
        CloudCommand::Colorize(a) => colorize(a, ctx),
    }
}

fn find_camera<'a>(file: &'a CameraFile, id: &str) -> Result<&'a CameraRecord> {
    file.cameras.iter().find(|c| c.id == id).ok_or_else(|| {
        let ids: Vec<_> = file.cameras.iter().map(|c| c.id.as_str()).collect();
        CliError::Domain(format!("unknown camera {id:?} (have {})", ids.join(", ")))
    })
}

fn reproj(a: &ReprojArgs, ctx: &Context) -> Result<Report> {
    let cam_path = path_arg(&a.cameras, &ctx.config.paths.cameras, "cameras")?;
    let file = read_camera_file(&cam_path).map_err(|e| CliError::input(cam_path.display(), e))?;
    let cam = find_camera(&file, &a.camera)?;
    let mut inputs = vec![cam_path, a.observations.clone()];
    let cam_from_world = match (&a.pose, &a.world_frame) {
        (Some(p), _) => parse_pose(p)?,
        (None, Some(w)) => {
            let calib = a.calib.clone().expect("clap enforces --calib");
            let g = import_calibration(&calib)?;
            inputs.push(calib);
            g.lookup(&cam.frame, &FrameId::new(w.as_str())?)?
        }
        (None, None) => Transform::IDENTITY,
    };
    let rows: Vec<Vec<f64>> = read_columns(&a.observations, &["u", "v", "x", "y", "z"])?;
    let obs: Vec<Observation> = rows
        .iter()
        .map(|r| Observation {
            pixel: [r[0], r[1]],
            point: Vector3::new(r[2], r[3], r[4]),
        })
        .collect();
    let stats = reprojection_stats(&obs, &cam_from_world, &cam.intrinsics)?;
    if let Some(path) = &a.residuals_csv {
        let mut s = String::from("index,u,v,u_proj,v_proj,error_px,valid\n");
        for (i, o) in obs.iter().enumerate() {
            let p = project(&cam.intrinsics, &cam_from_world.transform_point(&o.point));
            let err = if p.valid {
                format!("{:.6}", (p.u - o.pixel[0]).hypot(p.v - o.pixel[1]))
            } else {
                String::new()
            };
            let f = |x: f64| if x.is_finite() { format!("{x:.6}") } else { String::new() };
            s.push_str(&format!(
                "{i},{:.6},{:.6},{},{},{err},{}\n",
                o.pixel[0],
                o.pixel[1],
                f(p.u),
                f(p.v),
                p.valid
            ));
        }
        write_file(path, s)?;
    }
    #[derive(Serialize)]
    struct ReprojResult<'a> {
        camera: &'a str,
        stats: &'a ReprojStats,
    }
    let text = format!(
        "camera {}: mean {:.6} px, std {:.6} px, max {:.6} px over {} points ({} skipped)",
        a.camera, stats.mean_px, stats.std_px, stats.max_px, stats.n_points, stats.n_invalid
    );
    let csv = format!(
        "camera,mean_px,std_px,max_px,n_points,n_invalid\n{},{:.6},{:.6},{:.6},{},{}\n",
        crate::csv_field(&a.camera),
        stats.mean_px,
        stats.std_px,
        stats.max_px,
        stats.n_points,
        stats.n_invalid
    );
    Ok(Report::new(
        "cam reproj",
        &ReprojResult {
            camera: &a.camera,
            stats: &stats,
        },
    )?
    .inputs(inputs)
    .text(text)
    .csv(csv))
}

fn colorize(a: &ColorizeArgs, ctx: &Context) -> Result<Report> {
    let calib_path = path_arg(&a.calib, &ctx.config.paths.calibration, "calib")?;
    let cam_path = path_arg(&a.cameras, &ctx.config.paths.cameras, "cameras")?;
    let graph = import_calibration(&calib_path)?;
    let file = read_camera_file(&cam_path).map_err(|e| CliError::input(cam_path.display(), e))?;
    let cloud_frame = match &a.cloud_frame {
        Some(f) => FrameId::new(f.as_str())?,
        None => graph.root().clone(),
    };

    let mut images: BTreeMap<&str, PathBuf> = BTreeMap::new();
    for spec in &a.images {
        let (id, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--image {spec:?}: expected id=path")))?;
        if images.insert(id, PathBuf::from(path)).is_some() {
            return Err(CliError::Input(format!("--image given twice for camera {id:?}")));
        }
    }
    for id in images.keys() {
        find_camera(&file, id)?;
    }
    let mut inputs = vec![a.cloud.clone(), calib_path, cam_path];
    // Camera-file order fixes tie-breaking independently of flag order.
    let mut views = Vec::new();
    for rec in &file.cameras {
        let Some(path) = images.get(rec.id.as_str()) else {
            continue;
        };
        let image = load_png(path).map_err(|e| CliError::input(path.display(), e))?;
        inputs.push(path.clone());
        views.push(CameraView {
            id: rec.id.clone(),
            cam_from_base: graph.lookup(&rec.frame, &cloud_frame)?,
            intrinsics: rec.intrinsics.clone(),
            image,
        });
    }
    let cloud = read_ply_file(&a.cloud).map_err(|e| CliError::input(a.cloud.display(), e))?;
    let colored = colorize_cloud(&cloud, &views)?;
    write_ply_file(&colored, &a.out)?;

    let ids = colored.camera_ids.as_deref().unwrap_or(&[]);
    let mut per_camera: BTreeMap<String, usize> = views.iter().map(|v| (v.id.clone(), 0)).collect();
    let mut uncolored = 0;
    for id in ids {
        match id {
            Some(i) => *per_camera.get_mut(&views[*i as usize].id).expect("camera present") += 1,
            None => uncolored += 1,
        }
    }
    #[derive(Serialize)]
    struct ColorizeResult {
        n_points: usize,
        n_uncolored: usize,
        points_per_camera: BTreeMap<String, usize>,
        cloud_frame: String,
        out: String,
    }
    let result = ColorizeResult {
        n_points: colored.len(),
        n_uncolored: uncolored,
        points_per_camera: per_camera,
        cloud_frame: cloud_frame.to_string(),
        out: a.out.display().to_string(),
    };
    let mut text = format!(
        "colored {} of {} points into {}\n",
        result.n_points - uncolored,
        result.n_points,
        a.out.display()
    );
    let mut csv = String::from("camera,points\n");
    for (id, n) in &result.points_per_camera {
        text.push_str(&format!("  {id:<20} {n}\n"));
        csv.push_str(&format!("{},{n}\n", crate::csv_field(id)));
    }
    text.push_str(&format!("  {:<20} {uncolored}\n", "(none)"));
    csv.push_str(&format!(",{uncolored}\n"));
    Ok(Report::new("cloud colorize", &result)?
        .inputs(inputs)
        .text(text)
        .csv(csv))
}
