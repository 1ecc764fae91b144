//! TOML edge files for `tf assemble`.
//!
//! ```toml
//! [[edge]]
//! parent = "os_imu"
//! child = "cam_front_left"
//! translation = [0.061, 0.064, 0.085]
//! euler_deg = [133.6, -44.6, -46.0]   # or quaternion = [w, x, y, z]
//! euler_convention = "intrinsic_xyz"  # optional
//! source = "estimated"
//! label = "kalibr"                    # optional
//! ```

use std::path::Path;

use nalgebra::Vector3;
use rigkit::se3::{quat_from_euler_with, EulerAnglesDeg, EulerConvention, Transform, UnitQuaternion};
use rigkit::tf_graph::{CalibEdge, EdgeSource, FrameId};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    #[serde(default)]
    edge: Vec<EdgeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntry {
    parent: String,
    child: String,
    translation: [f64; 3],
    euler_deg: Option<[f64; 3]>,
    euler_convention: Option<EulerConvention>,
    quaternion: Option<[f64; 4]>,
    source: String,
    label: Option<String>,
}

impl EdgeEntry {
    fn into_edge(self, n: usize) -> std::result::Result<CalibEdge, String> {
        let rotation = match (self.euler_deg, self.quaternion) {
            (Some(e), None) => quat_from_euler_with(
                &EulerAnglesDeg::new(e[0], e[1], e[2]),
                self.euler_convention.unwrap_or_default(),
            ),
            (None, Some(q)) => {
                if self.euler_convention.is_some() {
                    return Err(format!("edge {n}: euler_convention given with a quaternion"));
                }
                UnitQuaternion::new(q[0], q[1], q[2], q[3]).map_err(|e| format!("edge {n}: {e}"))?
            }
            _ => return Err(format!("edge {n}: give exactly one of euler_deg or quaternion")),
        };
        let parent = FrameId::new(self.parent).map_err(|e| format!("edge {n}: {e}"))?;
        let child = FrameId::new(self.child).map_err(|e| format!("edge {n}: {e}"))?;
        let source: EdgeSource = self.source.parse().map_err(|e| format!("edge {n}: {e}"))?;
        let t = self.translation;
        let edge = CalibEdge::new(
            parent,
            child,
            Transform::new(rotation, Vector3::new(t[0], t[1], t[2])),
            source,
        );
        Ok(match self.label {
            Some(l) => edge.with_label(l),
            None => edge,
        })
    }
}

pub fn parse_edge_toml(text: &str) -> std::result::Result<Vec<CalibEdge>, String> {
    let file: EdgeFile = toml::from_str(text).map_err(|e| e.to_string())?;
    file.edge
        .into_iter()
        .enumerate()
        .map(|(i, e)| e.into_edge(i + 1))
        .collect()
}

pub fn read_edge_toml(path: &Path) -> Result<Vec<CalibEdge>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path.display(), e))?;
    parse_edge_toml(&text).map_err(|e| CliError::input(path.display(), e))
}
