use std::path::PathBuf;

use nalgebra::{Matrix3, Vector3};
use rigkit::se3::{quat_from_euler, EulerAnglesDeg, Transform, UnitQuaternion};
use rigkit::tf_graph::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

struct Row {
    camera: String,
    frame: String,
    source: String,
    t: [f64; 3],
    euler: [f64; 3],
    published_position_m: f64,
}

fn table_rows() -> Vec<Row> {
    let mut rdr = csv::Reader::from_path(fixture("cad_vs_kalibr.csv")).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let f = |i: usize| r[i].parse::<f64>().unwrap();
            Row {
                camera: r[0].to_string(),
                frame: r[1].to_string(),
                source: r[2].to_string(),
                t: [f(3), f(4), f(5)],
                euler: [f(6), f(7), f(8)],
                published_position_m: f(9),
            }
        })
        .collect()
}

fn fid(s: &str) -> FrameId {
    FrameId::new(s).unwrap()
}

fn graph_for(rows: &[Row], source: &str) -> FrameGraph {
    let mut g = FrameGraph::new(fid("os_imu"));
    for r in rows.iter().filter(|r| r.source == source) {
        let q = quat_from_euler(&EulerAnglesDeg::new(r.euler[0], r.euler[1], r.euler[2]));
        let t = Transform::new(q, Vector3::new(r.t[0], r.t[1], r.t[2]));
        let src = if source == "cad" { EdgeSource::Cad } else { EdgeSource::Estimated };
        g.insert_edge(CalibEdge::new(fid("os_imu"), fid(&r.frame), t, src).with_label(source))
            .unwrap();
    }
    g
}

/// `Rx(x) Ry(y) Rz(z)` from elementary matrices.
fn oracle_matrix(e: [f64; 3]) -> Matrix3<f64> {
    let (x, y, z) = (e[0].to_radians(), e[1].to_radians(), e[2].to_radians());
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, x.cos(), -x.sin(), 0.0, x.sin(), x.cos());
    let ry = Matrix3::new(y.cos(), 0.0, y.sin(), 0.0, 1.0, 0.0, -y.sin(), 0.0, y.cos());
    let rz = Matrix3::new(z.cos(), -z.sin(), 0.0, z.sin(), z.cos(), 0.0, 0.0, 0.0, 1.0);
    rx * ry * rz
}

/// Geodesic angle from the trace of the relative rotation.
fn oracle_angle_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = (((a.transpose() * b).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

fn pairs(rows: &[Row]) -> Vec<(FrameId, FrameId)> {
    let mut frames: Vec<&str> = rows.iter().map(|r| r.frame.as_str()).collect();
    frames.dedup();
    frames.iter().map(|f| (fid("os_imu"), fid(f))).collect()
}

#[test]
fn cad_vs_kalibr_positions_match_published_table() {
    let rows = table_rows();
    let diffs = diff_graphs(&graph_for(&rows, "cad"), &graph_for(&rows, "kalibr"), &pairs(&rows)).unwrap();
    assert_eq!(diffs.len(), 4);
    for d in &diffs {
        let row = rows.iter().find(|r| r.frame == d.to.as_str()).unwrap();
        let cad = rows.iter().find(|r| r.frame == row.frame && r.source == "cad").unwrap();
        let kal = rows.iter().find(|r| r.frame == row.frame && r.source == "kalibr").unwrap();
        let direct = (Vector3::from(cad.t) - Vector3::from(kal.t)).norm();
        assert!((d.position_diff_m - direct).abs() < 1e-12, "{}", row.camera);
        assert!(
            (d.position_diff_m - row.published_position_m).abs() <= 0.002,
            "{}: {} vs published {}",
            row.camera,
            d.position_diff_m,
            row.published_position_m
        );
    }
}

#[test]
fn cad_vs_kalibr_angles_match_trace_oracle() {
    let rows = table_rows();
    let diffs = diff_graphs(&graph_for(&rows, "cad"), &graph_for(&rows, "kalibr"), &pairs(&rows)).unwrap();
    for d in &diffs {
        let cad = rows.iter().find(|r| r.frame == d.to.as_str() && r.source == "cad").unwrap();
        let kal = rows.iter().find(|r| r.frame == d.to.as_str() && r.source == "kalibr").unwrap();
        let expect = oracle_angle_deg(&oracle_matrix(cad.euler), &oracle_matrix(kal.euler));
        assert!(
            (d.angular_diff_deg - expect).abs() < 1e-6,
            "{}: {} vs oracle {}",
            cad.camera,
            d.angular_diff_deg,
            expect
        );
    }
}

#[test]
fn two_degree_perturbation_is_detected() {
    let rows = table_rows();
    let base = graph_for(&rows, "kalibr");
    let mut perturbed = base.clone();
    let target = fid("cam_side_right");
    let e = perturbed.edge_between(&fid("os_imu"), &target).unwrap().clone();
    let tweak = UnitQuaternion::from_axis_angle(&Vector3::new(1.0, 2.0, -0.5).normalize(), 2f64.to_radians());
    let t = Transform::new(e.transform.rotation * tweak, e.transform.translation);
    perturbed.set_edge_transform(&fid("os_imu"), &target, t).unwrap();
    let d = diff_graphs(&base, &perturbed, &pairs(&rows)).unwrap();
    for row in &d {
        if row.to == target {
            assert!((row.angular_diff_deg - 2.0).abs() < 1e-9, "{}", row.angular_diff_deg);
        } else {
            assert!(row.angular_diff_deg < 1e-9);
        }
        assert!(row.position_diff_m < 1e-15);
    }
}

#[test]
fn golden_tree_imports_validates_and_round_trips() {
    let path = fixture("smapper_tree.calib");
    let text = std::fs::read_to_string(&path).unwrap();
    let g = import_calibration(&path).unwrap();
    let v = g.validate();
    assert!(v.is_valid(), "{:?}", v.findings());
    assert_eq!(v.frame_count, 9);
    assert_eq!(v.edge_count, 8);
    assert_eq!(g.root().as_str(), "base_link");
    assert_eq!(g.to_calibration_string(), text);
}

#[test]
fn golden_tree_camera_poses_follow_the_edge_chain() {
    let g = import_calibration(fixture("smapper_tree.calib")).unwrap();
    let rows = table_rows();
    let lidar_imu = Vector3::new(0.006253, -0.011775, 0.007645);
    for r in rows.iter().filter(|r| r.source == "kalibr") {
        // base_link -> os_sensor is identity, os_sensor -> os_imu a pure offset.
        let t = g.lookup(&fid("base_link"), &fid(&r.frame)).unwrap();
        let expect_t = lidar_imu + Vector3::from(r.t);
        assert!((t.translation - expect_t).norm() < 2e-9, "{}", r.camera);
        let angle = oracle_angle_deg(&t.rotation.to_rotation_matrix(), &oracle_matrix(r.euler));
        assert!(angle < 1e-6, "{}: {angle}", r.camera);
    }
}
