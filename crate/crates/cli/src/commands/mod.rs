//! Subcommand implementations and the small parsing helpers they share.

pub mod cam;
pub mod dataset;
pub mod eval;
pub mod imu;
pub mod sync;
pub mod tf;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use rigkit::se3::{Transform, UnitQuaternion};

use crate::error::{CliError, Result};

/// Reads the named columns of a headed CSV file, one `Vec` per row.
pub fn read_columns<T: FromStr>(path: &Path, columns: &[&str]) -> Result<Vec<Vec<T>>>
where
    T::Err: std::fmt::Display,
{
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::input(path.display(), e))?;
    let headers = rdr.headers().map_err(|e| CliError::input(path.display(), e))?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers.iter().position(|h| h == *c).ok_or_else(|| {
                CliError::Input(format!("{}: missing column {c:?}", path.display()))
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(path.display(), e))?;
        let line = rec.position().map_or(i + 2, |p| p.line() as usize);
        let row = idx
            .iter()
            .zip(columns)
            .map(|(&j, c)| {
                let field = rec.get(j).unwrap_or("");
                field.parse::<T>().map_err(|e| {
                    CliError::Input(format!("{}: line {line}, column {c}: {e}", path.display()))
                })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))
}

/// Parses `tx,ty,tz,qw,qx,qy,qz`.
pub fn parse_pose(s: &str) -> Result<Transform> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Input(format!("pose {s:?}: {e}")))?;
    if v.len() != 7 {
        return Err(CliError::Input(format!(
            "pose {s:?}: expected tx,ty,tz,qw,qx,qy,qz (7 numbers), got {}",
            v.len()
        )));
    }
    let q = UnitQuaternion::new(v[3], v[4], v[5], v[6])
        .map_err(|e| CliError::Input(format!("pose {s:?}: {e}")))?;
    Ok(Transform::new(q, Vector3::new(v[0], v[1], v[2])))
}

/// A path from a flag or the config file.
pub fn path_arg(flag: &Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    crate::config::require(flag.clone(), file.clone(), name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pose_parsing() {
        let t = parse_pose("1, 2, 3, 1, 0, 0, 0").unwrap();
        assert_eq!(t.translation, Vector3::new(1.0, 2.0, 3.0));
        assert!(parse_pose("1,2,3").is_err());
        assert!(parse_pose("1,2,3,0,0,0,0").is_err());
    }

    #[test]
    fn columns_by_header_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "b,a\n1,2\n3,4\n").unwrap();
        let rows: Vec<Vec<i64>> = read_columns(&p, &["a", "b"]).unwrap();
        assert_eq!(rows, vec![vec![2, 1], vec![4, 3]]);
        assert!(read_columns::<i64>(&p, &["c"]).is_err());
        std::fs::write(&p, "a\nx\n").unwrap();
        let e = read_columns::<i64>(&p, &["a"]).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
