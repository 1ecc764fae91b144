use std::path::PathBuf;

use clap::{Args, Subcommand};
use rigkit::se3::{euler_from_quat_with, EulerConvention};
use rigkit::tf_graph::{self, diff_graphs, FrameGraph, FrameId};
use serde::Serialize;

use super::{path_arg, write_file};
use crate::config::pick;
use crate::error::{CliError, Result, EXIT_VALIDATION};
use crate::{csv_field, Context, Report};

pub const DEFAULT_ROOT: &str = "base_link";

#[derive(Debug, Subcommand)]
pub enum TfCommand {
    /// Merge edge files into one validated calibration file
    Assemble(AssembleArgs),
    /// Compare relative poses of frame pairs across two calibration files
    Diff(DiffArgs),
    /// Pose of one frame expressed in another
    Lookup(LookupArgs),
    /// Check that every frame reaches the root
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    /// Edge files: TOML edge lists, calibration files or calibration JSON
    #[arg(long, required = true, num_args = 1..)]
    pub edges: Vec<PathBuf>,
    /// Root frame of the assembled tree [default: base_link]
    #[arg(long)]
    pub root: Option<String>,
    /// Calibration file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    /// First calibration file
    #[arg(long)]
    pub a: PathBuf,
    /// Second calibration file
    #[arg(long)]
    pub b: PathBuf,
    /// Frame pairs as from:to, comma separated [default: root to every other frame]
    #[arg(long, value_delimiter = ',')]
    pub pairs: Vec<String>,
}

#[derive(Debug, Args)]
pub struct LookupArgs {
    /// Calibration file [default: paths.calibration from config]
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Frame the result is expressed in
    #[arg(long)]
    pub from: String,
    /// Frame whose pose is returned
    #[arg(long)]
    pub to: String,
    /// Euler convention of the reported angles
    #[arg(long, default_value = "intrinsic_xyz", value_parser = parse_convention)]
    pub convention: EulerConvention,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Calibration file [default: paths.calibration from config]
    #[arg(long)]
    pub calib: Option<PathBuf>,
}

fn parse_convention(s: &str) -> std::result::Result<EulerConvention, String> {
    EulerConvention::ALL
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| {
            let names: Vec<_> = EulerConvention::ALL.iter().map(|c| c.name()).collect();
            format!("unknown convention {s:?} (expected one of {})", names.join(", "))
        })
}

fn frame(s: &str) -> Result<FrameId> {
    Ok(FrameId::new(s)?)
}

pub fn run(cmd: &TfCommand, ctx: &Context) -> Result<Report> {
    match cmd {
        TfCommand::Assemble(a) => assemble(a, ctx),
        TfCommand::Diff(a) => diff(a),
        TfCommand::Lookup(a) => lookup(a, ctx),
        TfCommand::Validate(a) => validate(a, ctx),
    }
}

#[derive(Serialize)]
struct AssembleResult<'a> {
    root: &'a FrameId,
    frames: Vec<&'a FrameId>,
    edge_count: usize,
    out: Option<String>,
    validation: &'a tf_graph::ValidationReport,
}

/// Builds the tree from the given files. Edges are inserted in file order.
pub fn assemble_graph(files: &[PathBuf], root: FrameId) -> Result<FrameGraph> {
    let mut graph = FrameGraph::new(root);
    for path in files {
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            for edge in crate::edges::read_edge_toml(path)? {
                graph.insert_edge(edge)?;
            }
        } else {
            let g = tf_graph::import_calibration(path)
                .map_err(|e| with_path(path, e.into()))?;
            for f in g.frames() {
                graph.add_frame(f.clone());
            }
            for edge in g.edges() {
                graph.insert_edge(edge.clone())?;
            }
        }
    }
    Ok(graph)
}

fn with_path(path: &std::path::Path, e: CliError) -> CliError {
    match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn assemble(a: &AssembleArgs, ctx: &Context) -> Result<Report> {
    let root = frame(&pick(a.root.clone(), ctx.config.tf.root.clone(), DEFAULT_ROOT.to_string()))?;
    let graph = assemble_graph(&a.edges, root)?;
    let validation = graph.validate();
    let ok = validation.is_valid();
    if ok {
        write_file(&a.out, graph.to_calibration_string())?;
    }
    let result = AssembleResult {
        root: graph.root(),
        frames: graph.frames().collect(),
        edge_count: graph.edges().len(),
        out: ok.then(|| a.out.display().to_string()),
        validation: &validation,
    };
    let text = if ok {
        format!(
            "assembled {} frames and {} edges under {} into {}",
            result.frames.len(),
            result.edge_count,
            graph.root(),
            a.out.display()
        )
    } else {
        let mut t = String::from("tree is invalid, nothing written\n");
        for f in validation.findings() {
            t.push_str(&format!("  {f}\n"));
        }
        t
    };
    let report = Report::new("tf assemble", &result)?
        .inputs(a.edges.iter().cloned())
        .text(text);
    Ok(if ok {
        report
    } else {
        report.findings(validation.findings(), EXIT_VALIDATION)
    })
}

/// `from:to` pairs; defaults to root-to-frame for every non-root frame
/// present in both graphs.
fn diff_pairs(specs: &[String], a: &FrameGraph, b: &FrameGraph) -> Result<Vec<(FrameId, FrameId)>> {
    if specs.is_empty() {
        let root = a.root();
        return Ok(a
            .frames()
            .filter(|f| *f != root && b.contains(f))
            .map(|f| (root.clone(), f.clone()))
            .collect());
    }
    specs
        .iter()
        .map(|s| {
            let (f, t) = s
                .split_once(':')
                .ok_or_else(|| CliError::Input(format!("pair {s:?}: expected from:to")))?;
            Ok((frame(f)?, frame(t)?))
        })
        .collect()
}

fn diff(a: &DiffArgs) -> Result<Report> {
    let ga = tf_graph::import_calibration(&a.a).map_err(|e| with_path(&a.a, e.into()))?;
    let gb = tf_graph::import_calibration(&a.b).map_err(|e| with_path(&a.b, e.into()))?;
    let pairs = diff_pairs(&a.pairs, &ga, &gb)?;
    let rows = diff_graphs(&ga, &gb, &pairs)?;
    let mut csv = String::from("from,to,position_diff_m,angular_diff_deg\n");
    let mut text = format!(
        "{:<20} {:<20} {:>12} {:>14}\n",
        "from", "to", "position_m", "angular_deg"
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            csv_field(r.from.as_str()),
            csv_field(r.to.as_str()),
            r.position_diff_m,
            r.angular_diff_deg
        ));
        text.push_str(&format!(
            "{:<20} {:<20} {:>12.6} {:>14.6}\n",
            r.from, r.to, r.position_diff_m, r.angular_diff_deg
        ));
    }
    #[derive(Serialize)]
    struct DiffResult<'a> {
        pairs: &'a [tf_graph::ExtrinsicDiff],
    }
    Ok(Report::new("tf diff", &DiffResult { pairs: &rows })?
        .inputs([a.a.clone(), a.b.clone()])
        .text(text)
        .csv(csv))
}

fn lookup(a: &LookupArgs, ctx: &Context) -> Result<Report> {
    let path = path_arg(&a.calib, &ctx.config.paths.calibration, "calib")?;
    let g = tf_graph::import_calibration(&path).map_err(|e| with_path(&path, e.into()))?;
    let t = g.lookup(&frame(&a.from)?, &frame(&a.to)?)?;
    let e = euler_from_quat_with(&t.rotation, a.convention);
    #[derive(Serialize)]
    struct LookupResult<'a> {
        from: &'a str,
        to: &'a str,
        translation_m: [f64; 3],
        quaternion_wxyz: [f64; 4],
        euler_convention: &'static str,
        euler_deg: [f64; 3],
        gimbal_lock: bool,
    }
    let tr = [t.translation.x, t.translation.y, t.translation.z];
    let q = t.rotation.wxyz();
    let eu = [e.angles.x_deg, e.angles.y_deg, e.angles.z_deg];
    let result = LookupResult {
        from: &a.from,
        to: &a.to,
        translation_m: tr,
        quaternion_wxyz: q,
        euler_convention: a.convention.name(),
        euler_deg: eu,
        gimbal_lock: e.gimbal_lock,
    };
    let text = format!(
        "pose of {} in {}\n  translation [m]   {:.9} {:.9} {:.9}\n  quaternion wxyz   {:.12} {:.12} {:.12} {:.12}\n  euler {} [deg] {:.6} {:.6} {:.6}{}",
        a.to,
        a.from,
        tr[0],
        tr[1],
        tr[2],
        q[0],
        q[1],
        q[2],
        q[3],
        a.convention.name(),
        eu[0],
        eu[1],
        eu[2],
        if e.gimbal_lock { " (gimbal lock)" } else { "" }
    );
    let csv = format!(
        "from,to,tx,ty,tz,qw,qx,qy,qz\n{},{},{:.9},{:.9},{:.9},{:.12},{:.12},{:.12},{:.12}\n",
        csv_field(&a.from),
        csv_field(&a.to),
        tr[0],
        tr[1],
        tr[2],
        q[0],
        q[1],
        q[2],
        q[3]
    );
    Ok(Report::new("tf lookup", &result)?
        .inputs([path])
        .decimals(12)
        .text(text)
        .csv(csv))
}

fn validate(a: &ValidateArgs, ctx: &Context) -> Result<Report> {
    let path = path_arg(&a.calib, &ctx.config.paths.calibration, "calib")?;
    let g = tf_graph::import_calibration(&path).map_err(|e| with_path(&path, e.into()))?;
    let v = g.validate();
    let findings = v.findings();
    let text = if v.is_valid() {
        format!("valid: {} frames, {} edges, root {}", v.frame_count, v.edge_count, v.root)
    } else {
        format!("invalid:\n  {}", findings.join("\n  "))
    };
    let code = if v.is_valid() { 0 } else { EXIT_VALIDATION };
    Ok(Report::new("tf validate", &v)?
        .inputs([path])
        .text(text)
        .findings(findings, code))
}
