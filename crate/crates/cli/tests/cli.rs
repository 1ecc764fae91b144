use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::CommandFactory;
use image::{Rgb, RgbImage};
use rigkit_cli::Cli;
use serde_json::Value;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn rigkit(args: &[&str]) -> Out {
    rigkit_in(Path::new("."), args, &[])
}

fn rigkit_in(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Out {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rigkit"));
    cmd.current_dir(dir).args(args).env_remove("RIGKIT_CONFIG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let o = cmd.output().expect("binary runs");
    Out {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
    }
}

fn json(o: &Out) -> Value {
    assert_eq!(o.code, 0, "stderr: {}", o.stderr);
    serde_json::from_str(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", o.stdout))
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_flag_and_subcommand_is_documented() {
    fn walk(cmd: &clap::Command, path: &str, missing: &mut Vec<String>) {
        for arg in cmd.get_arguments() {
            let id = arg.get_id().as_str();
            if id == "help" || id == "version" {
                continue;
            }
            if arg.get_help().is_none() && arg.get_long_help().is_none() {
                missing.push(format!("{path} --{id}"));
            }
        }
        for sub in cmd.get_subcommands() {
            let p = format!("{path} {}", sub.get_name());
            if sub.get_about().is_none() && sub.get_long_about().is_none() {
                missing.push(p.clone());
            }
            walk(sub, &p, missing);
        }
    }
    let cmd = Cli::command();
    cmd.clone().debug_assert();
    let mut missing = Vec::new();
    walk(&cmd, "rigkit", &mut missing);
    assert!(missing.is_empty(), "undocumented: {missing:?}");
}

#[test]
fn help_lists_all_flags_of_each_leaf() {
    let o = rigkit(&["eval", "ate", "--help"]);
    assert_eq!(o.code, 0);
    for flag in ["--gt", "--est", "--max-dt-ns", "--align", "--residuals-csv", "--output", "--config"] {
        assert!(o.stdout.contains(flag), "{flag} missing from help:\n{}", o.stdout);
    }
}

const CHAIN_A: &str = r#"
[[edge]]
parent = "base"
child = "lidar"
translation = [0.0, 0.0, 0.5]
euler_deg = [0.0, 0.0, 90.0]
source = "cad"
"#;

const CHAIN_B: &str = r#"
[[edge]]
parent = "lidar"
child = "camera"
translation = [0.1, 0.0, 0.0]
quaternion = [1.0, 0.0, 0.0, 0.0]
source = "estimated"
label = "calibrated"
"#;

#[test]
fn assemble_three_frame_chain() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.toml"), CHAIN_A).unwrap();
    fs::write(dir.path().join("b.toml"), CHAIN_B).unwrap();
    let o = rigkit_in(
        dir.path(),
        &["tf", "assemble", "--edges", "a.toml", "b.toml", "--root", "base", "--out", "rig.calib"],
        &[],
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    let text = fs::read_to_string(dir.path().join("rig.calib")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("frame ")).count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("edge ")).count(), 2);

    // camera sits 0.1 m along lidar x, which is base y after the 90 deg yaw.
    let o = rigkit_in(
        dir.path(),
        &["tf", "lookup", "--calib", "rig.calib", "--from", "base", "--to", "camera", "--output", "json"],
        &[],
    );
    let v = json(&o);
    let t: Vec<f64> = v["result"]["translation_m"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((t[0] - 0.0).abs() < 1e-9 && (t[1] - 0.1).abs() < 1e-9 && (t[2] - 0.5).abs() < 1e-9, "{t:?}");
}

#[test]
fn assemble_reproduces_golden_tree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tree.calib");
    let edges = fixtures().join("rig_edges");
    let o = rigkit(&[
        "tf",
        "assemble",
        "--edges",
        s(&edges.join("lidar.toml")),
        s(&edges.join("cameras.toml")),
        s(&edges.join("realsense.toml")),
        "--root",
        "base_link",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(
        fs::read(&out).unwrap(),
        fs::read(fixtures().join("smapper_tree.calib")).unwrap(),
        "assembled tree differs from the golden file"
    );
}

#[test]
fn assemble_golden_is_independent_of_file_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tree.calib");
    let edges = fixtures().join("rig_edges");
    let o = rigkit(&[
        "tf",
        "assemble",
        "--edges",
        s(&edges.join("realsense.toml")),
        s(&edges.join("cameras.toml")),
        s(&edges.join("lidar.toml")),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(fs::read(&out).unwrap(), fs::read(fixtures().join("smapper_tree.calib")).unwrap());
}

#[test]
fn assemble_duplicate_pair_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.toml"), CHAIN_A).unwrap();
    let flipped = CHAIN_A.replace("parent = \"base\"\nchild = \"lidar\"", "parent = \"lidar\"\nchild = \"base\"");
    fs::write(dir.path().join("b.toml"), flipped).unwrap();
    let o = rigkit_in(
        dir.path(),
        &["tf", "assemble", "--edges", "a.toml", "b.toml", "--root", "base", "--out", "x.calib"],
        &[],
    );
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("already connected"), "{}", o.stderr);
    assert!(!dir.path().join("x.calib").exists());
}

#[test]
fn assemble_disconnected_tree_exits_3_with_findings() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("b.toml"), CHAIN_B).unwrap();
    let o = rigkit_in(
        dir.path(),
        &["tf", "assemble", "--edges", "b.toml", "--root", "base", "--out", "x.calib"],
        &[],
    );
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("unreachable"), "{}", o.stderr);
    assert!(!dir.path().join("x.calib").exists());
}

#[test]
fn assemble_parse_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.toml"), "[[edge]]\nparent = 3\n").unwrap();
    let o = rigkit_in(dir.path(), &["tf", "assemble", "--edges", "a.toml", "--out", "x.calib"], &[]);
    assert_eq!(o.code, 2, "{}", o.stderr);
    assert!(o.stderr.contains("a.toml"));
}

#[test]
fn diff_of_identical_files_is_all_zero() {
    let golden = fixtures().join("smapper_tree.calib");
    let o = rigkit(&["tf", "diff", "--a", s(&golden), "--b", s(&golden), "--output", "csv"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rows: Vec<&str> = o.stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        assert!(r.ends_with(",0.000000,0.000000"), "{r}");
    }
}

/// Writes one TOML edge file per source from the table fixture.
fn table_edge_files(dir: &Path) -> (PathBuf, PathBuf) {
    let text = fs::read_to_string(fixtures().join("cad_vs_kalibr.csv")).unwrap();
    let mut cad = String::new();
    let mut kalibr = String::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let entry = format!(
            "[[edge]]\nparent = \"os_imu\"\nchild = \"{}\"\ntranslation = [{}, {}, {}]\neuler_deg = [{}, {}, {}]\nsource = \"{}\"\n\n",
            f[1],
            f[3],
            f[4],
            f[5],
            f[6],
            f[7],
            f[8],
            if f[2] == "cad" { "cad" } else { "estimated" }
        );
        if f[2] == "cad" {
            cad.push_str(&entry);
        } else {
            kalibr.push_str(&entry);
        }
    }
    let a = dir.join("cad.toml");
    let b = dir.join("kalibr.toml");
    fs::write(&a, cad).unwrap();
    fs::write(&b, kalibr).unwrap();
    (a, b)
}

#[test]
fn diff_cad_vs_kalibr_side_right_position() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = table_edge_files(dir.path());
    for (src, out) in [(&a, "cad.calib"), (&b, "kalibr.calib")] {
        let o = rigkit_in(dir.path(), &["tf", "assemble", "--edges", s(src), "--root", "os_imu", "--out", out], &[]);
        assert_eq!(o.code, 0, "{}", o.stderr);
    }
    let o = rigkit_in(
        dir.path(),
        &["tf", "diff", "--a", "cad.calib", "--b", "kalibr.calib", "--pairs", "os_imu:cam_side_right", "--output", "json"],
        &[],
    );
    let v = json(&o);
    let row = &v["result"]["pairs"][0];
    assert_eq!(row["to"], "cam_side_right");
    let d = row["position_diff_m"].as_f64().unwrap();
    assert!((d - 0.025).abs() <= 0.002, "{d}");
}

#[test]
fn diff_with_missing_frame_exits_3() {
    let golden = fixtures().join("smapper_tree.calib");
    let o = rigkit(&["tf", "diff", "--a", s(&golden), "--b", s(&golden), "--pairs", "base_link:cam_rear"]);
    assert_eq!(o.code, 3);
    assert!(o.stderr.contains("unknown frame cam_rear"), "{}", o.stderr);
}

fn write_traj(path: &Path) {
    let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for k in 0..50 {
        let t = k as f64 * 0.1;
        s.push_str(&format!("{:.1} {} {} 0.0 0.0 0.0 0.0 1.0\n", 100.0 + t, t.cos(), (2.0 * t).sin()));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn eval_ate_of_a_trajectory_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_traj(&dir.path().join("g.txt"));
    let o = rigkit_in(dir.path(), &["eval", "ate", "--gt", "g.txt", "--est", "g.txt"], &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("rmse   0.000000 m"), "{}", o.stdout);
    let v = json(&rigkit_in(dir.path(), &["eval", "ate", "--gt", "g.txt", "--est", "g.txt", "--output", "json"], &[]));
    assert_eq!(v["result"]["rmse_m"].as_f64(), Some(0.0));
    assert_eq!(v["result"]["n_pairs"].as_u64(), Some(50));
    let o = rigkit_in(dir.path(), &["eval", "ate", "--gt", "g.txt", "--est", "g.txt", "--output", "csv"], &[]);
    assert_eq!(o.stdout, "rmse_m,std_m,mean_m,median_m,max_m,n_pairs\n0.000000,0.000000,0.000000,0.000000,0.000000,50\n");
}

#[test]
fn eval_ate_plot_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_traj(&dir.path().join("g.txt"));
    let shifted: String = fs::read_to_string(dir.path().join("g.txt"))
        .unwrap()
        .lines()
        .map(|l| {
            if l.starts_with('#') {
                return format!("{l}\n");
            }
            let mut f: Vec<String> = l.split(' ').map(String::from).collect();
            let z: f64 = 0.25;
            f[3] = z.to_string();
            format!("{}\n", f.join(" "))
        })
        .collect();
    fs::write(dir.path().join("e.txt"), shifted).unwrap();
    let o = rigkit_in(
        dir.path(),
        &[
            "eval", "ate", "--gt", "g.txt", "--est", "e.txt", "--align", "none", "--residuals-csv", "r.csv",
            "--histogram-csv", "h.csv", "--bins", "5", "--trace-csv", "t.csv", "--output", "json",
        ],
        &[],
    );
    let v = json(&o);
    assert!((v["result"]["rmse_m"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    let r = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(r.lines().count(), 51);
    assert!(r.lines().skip(1).all(|l| l.ends_with(",0.250000000")), "{r}");
    let h = fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert_eq!(h.lines().count(), 6);
    let t = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(t.starts_with("stamp_ns,gt_x,gt_y,gt_z,est_x,est_y,est_z\n"));
}

#[test]
fn eval_ate_config_values_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    write_traj(&dir.path().join("g.txt"));
    fs::write(
        dir.path().join("rig.toml"),
        "output = \"json\"\n[paths]\ngt = \"g.txt\"\nest = \"g.txt\"\n[eval]\nmax_dt_ns = 7\nalign = \"sim3\"\n",
    )
    .unwrap();
    let v = json(&rigkit_in(dir.path(), &["eval", "ate", "--config", "rig.toml"], &[]));
    assert_eq!(v["result"]["max_dt_ns"], 7);
    assert_eq!(v["result"]["align_mode"], "sim3");
    let v = json(&rigkit_in(dir.path(), &["eval", "ate", "--max-dt-ns", "9", "--align", "se3"], &[("RIGKIT_CONFIG", "rig.toml")]));
    assert_eq!(v["result"]["max_dt_ns"], 9);
    assert_eq!(v["result"]["align_mode"], "se3");
}

#[test]
fn unknown_config_key_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    write_traj(&dir.path().join("g.txt"));
    fs::write(dir.path().join("bad.toml"), "[eval]\nmax_dt = 5\n").unwrap();
    let o = rigkit_in(dir.path(), &["eval", "ate", "--gt", "g.txt", "--est", "g.txt", "--config", "bad.toml"], &[]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("max_dt"), "{}", o.stderr);
}

#[test]
fn missing_input_file_is_a_parse_error() {
    let o = rigkit(&["eval", "ate", "--gt", "/nonexistent/g.txt", "--est", "/nonexistent/e.txt"]);
    assert_eq!(o.code, 2, "{}", o.stderr);
}

#[test]
fn imu_allan_white_noise_density_within_five_percent() {
    let dir = tempfile::tempdir().unwrap();
    let o = rigkit_in(
        dir.path(),
        &["imu", "simulate", "--n", "1000000", "--rate", "100", "--sigma", "0.01", "--seed", "42", "--out", "static.csv"],
        &[],
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&rigkit_in(
        dir.path(),
        &["imu", "allan", "--input", "static.csv", "--rate", "100", "--curves-dir", "curves", "--output", "json"],
        &[],
    ));
    let analytic = 0.01 / 100f64.sqrt();
    for axis in v["result"]["axes"].as_array().unwrap() {
        let n = axis["noise_density"]["value"].as_f64().unwrap();
        assert!((n / analytic - 1.0).abs() < 0.05, "{}: {n}", axis["axis"]);
    }
    for sensor in ["gyroscope", "accelerometer"] {
        let n = v["result"][sensor]["noise_density"].as_f64().unwrap();
        assert!((n / analytic - 1.0).abs() < 0.05, "{sensor}: {n}");
    }
    let curve = fs::read_to_string(dir.path().join("curves/gx.csv")).unwrap();
    assert!(curve.starts_with("tau_s,adev\n"));
    assert!(curve.lines().count() > 20);
}

#[test]
fn json_reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = rigkit_in(dir.path(), &["imu", "simulate", "--n", "20000", "--seed", "5", "--out", "imu.csv"], &[]);
    assert_eq!(o.code, 0);
    let golden = fixtures().join("smapper_tree.calib");
    let runs: Vec<Vec<&str>> = vec![
        vec!["imu", "allan", "--input", "imu.csv", "--output", "json"],
        vec!["tf", "diff", "--a", s(&golden), "--b", s(&golden), "--output", "json"],
        vec!["sync", "simulate", "--n", "50", "--jitter-ns", "100", "--seed", "9", "--output", "json"],
    ];
    for args in runs {
        let a = rigkit_in(dir.path(), &args, &[]);
        let b = rigkit_in(dir.path(), &args, &[]);
        assert_eq!(a.code, 0, "{args:?}: {}", a.stderr);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let v: Value = serde_json::from_str(&a.stdout).unwrap();
        assert_eq!(v["tool"], "rigkit");
        assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(v["inputs_digest"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn seed_changes_simulated_output() {
    let a = rigkit(&["sync", "simulate", "--n", "20", "--jitter-ns", "100", "--seed", "1", "--output", "csv"]);
    let b = rigkit(&["sync", "simulate", "--n", "20", "--jitter-ns", "100", "--seed", "2", "--output", "csv"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn sync_fit_recovers_simulated_clock() {
    let dir = tempfile::tempdir().unwrap();
    let o = rigkit_in(
        dir.path(),
        &[
            "sync", "simulate", "--n", "1000", "--rate-hz", "10", "--skew", "1.000001", "--offset-ns", "5000000",
            "--jitter-ns", "10000", "--seed", "11", "--out", "pairs.csv",
        ],
        &[],
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&rigkit_in(dir.path(), &["sync", "fit", "--pairs", "pairs.csv", "--out", "model.json", "--output", "json"], &[]));
    let m = &v["result"]["model"];
    assert!((m["offset_ns"].as_i64().unwrap() - 5_000_000).abs() <= 3_000);
    assert!((m["skew"].as_f64().unwrap() - 1.000001).abs() <= 1e-7);

    fs::write(dir.path().join("raw.csv"), "raw_ns\n0\n100000000000\n").unwrap();
    let o = rigkit_in(dir.path(), &["sync", "convert", "--model", "model.json", "--input", "raw.csv", "--output", "csv"], &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let conv: Vec<i64> = o.stdout.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // Truth at 100 s: 100e9 * 1.000001 + 5e6.
    assert!((conv[1] - 100_005_100_000).abs() <= 20_000, "{conv:?}");
}

#[test]
fn sync_fit_rejects_too_few_pairs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.csv"), "source_ns,target_ns\n0,5\n").unwrap();
    let o = rigkit_in(dir.path(), &["sync", "fit", "--pairs", "p.csv"], &[]);
    assert_eq!(o.code, 3);
}

#[test]
fn sync_report_on_stream_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cam.csv"), "stamp_ns\n0\n100\n200\n").unwrap();
    fs::write(dir.path().join("lidar.csv"), "stamp_ns\n10\n2000110\n").unwrap();
    let v = json(&rigkit_in(
        dir.path(),
        &["sync", "report", "--streams", "cam.csv", "lidar.csv", "--window-ns", "5000000", "--output", "json"],
        &[],
    ));
    let p = &v["result"]["pairs"][0];
    assert_eq!(p["stream_a"], "cam");
    assert_eq!(p["stream_b"], "lidar");
    // Each cam event's nearest lidar event is at 10 ns.
    assert_eq!(p["max_offset_ns"], 190);
    assert_eq!(v["result"]["exceeds_threshold"], false);
}

#[test]
fn dataset_stats_of_89_second_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let o = rigkit_in(
        dir.path(),
        &["dataset", "synth", "--out", "seq", "--id", "IN_SMALL_01", "--duration-s", "89.4", "--seed", "3"],
        &[],
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    let o = rigkit_in(dir.path(), &["dataset", "stats", "--sequence", "seq"], &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("01m 29s"), "{}", o.stdout);
    let v = json(&rigkit_in(dir.path(), &["dataset", "stats", "--sequence", "seq", "--output", "json"], &[]));
    assert_eq!(v["result"]["duration_display"], "01m 29s");
    assert_eq!(v["result"]["streams"].as_array().unwrap().len(), 9);
}

#[test]
fn dataset_validate_clean_and_faulty() {
    let dir = tempfile::tempdir().unwrap();
    let o = rigkit_in(dir.path(), &["dataset", "synth", "--out", "seq", "--duration-s", "2", "--seed", "1"], &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&rigkit_in(dir.path(), &["dataset", "validate", "--sequence", "seq", "--output", "json"], &[]));
    assert_eq!(v["result"]["n_errors"], 0);
    assert_eq!(v["result"]["n_warnings"], 0);

    // Swap two index rows of one camera.
    let index = dir.path().join("seq/cam_side_left/index.csv");
    let mut lines: Vec<String> = fs::read_to_string(&index).unwrap().lines().map(String::from).collect();
    lines.swap(5, 6);
    fs::write(&index, lines.join("\n") + "\n").unwrap();
    let o = rigkit_in(dir.path(), &["dataset", "validate", "--sequence", "seq", "--output", "csv"], &[]);
    assert_eq!(o.code, 3);
    assert!(o.stdout.contains("error,non_monotonic,cam_side_left,5,"), "{}", o.stdout);
    assert!(o.stderr.contains("cam_side_left"), "{}", o.stderr);

}

#[test]
fn dataset_validate_gap_severity_is_configurable() {
    let dir = tempfile::tempdir().unwrap();
    let o = rigkit_in(dir.path(), &["dataset", "synth", "--out", "seq", "--duration-s", "2", "--seed", "1"], &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    // Drop LiDAR records 5..10: a 0.6 s hole in a 10 Hz stream.
    let index = dir.path().join("seq/os_lidar/index.csv");
    let lines: Vec<String> = fs::read_to_string(&index).unwrap().lines().map(String::from).collect();
    let kept: Vec<&String> = lines.iter().enumerate().filter(|(i, _)| !(6..=10).contains(i)).map(|(_, l)| l).collect();
    fs::write(&index, kept.iter().map(|l| format!("{l}\n")).collect::<String>()).unwrap();

    let v = json(&rigkit_in(dir.path(), &["dataset", "validate", "--sequence", "seq", "--output", "json"], &[]));
    let findings = v["result"]["findings"].as_array().unwrap();
    assert!(findings.iter().any(|f| f["kind"] == "gap" && f["severity"] == "warning"), "{findings:?}");
    assert_eq!(v["result"]["n_errors"], 0);

    let o = rigkit_in(dir.path(), &["dataset", "validate", "--sequence", "seq", "--gap-severity", "error"], &[]);
    assert_eq!(o.code, 3, "{}", o.stdout);
    assert!(o.stderr.contains("gap"), "{}", o.stderr);
}

#[test]
fn dataset_sync_report_over_sequence() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rigkit_in(dir.path(), &["dataset", "synth", "--out", "seq", "--duration-s", "1"], &[]).code, 0);
    let v = json(&rigkit_in(dir.path(), &["sync", "report", "--sequence", "seq", "--output", "json"], &[]));
    // Eight sensor streams, trajectory excluded.
    assert_eq!(v["result"]["pairs"].as_array().unwrap().len(), 8 * 7 / 2);
    assert_eq!(v["inputs"][0]["path"], "seq");
}

/// Binary little-endian PLY with float x y z, written by hand.
fn write_ply(path: &Path, pts: &[[f32; 3]]) {
    let mut b = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        pts.len()
    )
    .into_bytes();
    for p in pts {
        for c in p {
            b.extend_from_slice(&c.to_le_bytes());
        }
    }
    fs::write(path, b).unwrap();
}

/// Colors of a binary PLY with float xyz + uchar rgb.
fn read_ply_colors(path: &Path) -> Vec<[u8; 3]> {
    let b = fs::read(path).unwrap();
    let marker = b"end_header\n";
    let start = b.windows(marker.len()).position(|w| w == marker).unwrap() + marker.len();
    let header = String::from_utf8_lossy(&b[..start]);
    assert!(header.contains("property uchar red"), "{header}");
    b[start..].chunks(15).map(|c| [c[12], c[13], c[14]]).collect()
}

#[test]
fn cloud_colorize_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("edges.toml"),
        "[[edge]]\nparent = \"base\"\nchild = \"cam\"\ntranslation = [0.0, 0.0, 0.0]\neuler_deg = [0.0, 0.0, 0.0]\nsource = \"cad\"\n",
    )
    .unwrap();
    assert_eq!(rigkit_in(d, &["tf", "assemble", "--edges", "edges.toml", "--root", "base", "--out", "rig.calib"], &[]).code, 0);
    fs::write(
        d.join("cameras.json"),
        r#"{"format_version": 1, "cameras": [{"id": "cam", "frame": "cam", "intrinsics":
            {"fx": 50.0, "fy": 50.0, "cx": 32.0, "cy": 24.0, "distortion": [0.0, 0.0, 0.0, 0.0], "width": 64, "height": 48}}]}"#,
    )
    .unwrap();
    let mut img = RgbImage::from_pixel(64, 48, Rgb([10, 20, 30]));
    img.put_pixel(32, 24, Rgb([255, 0, 128]));
    img.put_pixel(42, 24, Rgb([0, 255, 0]));
    img.save(d.join("cam.png")).unwrap();
    // On axis; 10 px right of the principal point (x/z = 0.2); behind.
    write_ply(&d.join("in.ply"), &[[0.0, 0.0, 3.0], [0.4, 0.0, 2.0], [0.0, 0.0, -1.0]]);
    let args = [
        "cloud", "colorize", "--cloud", "in.ply", "--calib", "rig.calib", "--cameras", "cameras.json", "--image", "cam=cam.png",
        "--out", "out.ply", "--output", "json",
    ];
    let v = json(&rigkit_in(d, &args, &[]));
    assert_eq!(v["result"]["n_points"], 3);
    assert_eq!(v["result"]["n_uncolored"], 1);
    assert_eq!(v["result"]["points_per_camera"]["cam"], 2);
    let first = fs::read(d.join("out.ply")).unwrap();
    assert_eq!(read_ply_colors(&d.join("out.ply")), vec![[255, 0, 128], [0, 255, 0], [0, 0, 0]]);
    json(&rigkit_in(d, &args, &[]));
    assert_eq!(fs::read(d.join("out.ply")).unwrap(), first);

    let o = rigkit_in(d, &["cloud", "colorize", "--cloud", "in.ply", "--calib", "rig.calib", "--cameras", "cameras.json", "--image", "other=cam.png", "--out", "x.ply"], &[]);
    assert_eq!(o.code, 3, "{}", o.stderr);
}

#[test]
fn cam_reproj_exact_and_shifted_observations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cameras.json"),
        r#"{"format_version": 1, "cameras": [{"id": "c0", "frame": "c0", "intrinsics":
            {"fx": 400.0, "fy": 400.0, "cx": 320.0, "cy": 240.0, "distortion": [0.0, 0.0, 0.0, 0.0], "width": 640, "height": 480}}]}"#,
    )
    .unwrap();
    // World frame shifted 1 m along camera z by the pose.
    let mut exact = String::from("u,v,x,y,z\n");
    let mut shifted = String::from("u,v,x,y,z\n");
    for i in 0..20 {
        let (x, y, z) = (-0.5 + 0.05 * i as f64, 0.3 - 0.02 * i as f64, 2.0 + 0.1 * i as f64);
        let (u, v) = (400.0 * x / (z + 1.0) + 320.0, 400.0 * y / (z + 1.0) + 240.0);
        exact.push_str(&format!("{u},{v},{x},{y},{z}\n"));
        shifted.push_str(&format!("{},{},{x},{y},{z}\n", u + 3.0, v - 4.0));
    }
    fs::write(d.join("exact.csv"), exact).unwrap();
    fs::write(d.join("shifted.csv"), shifted).unwrap();
    let pose = "0,0,1,1,0,0,0";
    let v = json(&rigkit_in(
        d,
        &["cam", "reproj", "--cameras", "cameras.json", "--camera", "c0", "--observations", "exact.csv", "--pose", pose, "--output", "json"],
        &[],
    ));
    assert!(v["result"]["stats"]["max_px"].as_f64().unwrap() < 1e-6);
    let v = json(&rigkit_in(
        d,
        &[
            "cam", "reproj", "--cameras", "cameras.json", "--camera", "c0", "--observations", "shifted.csv", "--pose", pose,
            "--residuals-csv", "res.csv", "--output", "json",
        ],
        &[],
    ));
    assert!((v["result"]["stats"]["mean_px"].as_f64().unwrap() - 5.0).abs() < 1e-6);
    assert_eq!(fs::read_to_string(d.join("res.csv")).unwrap().lines().count(), 21);
    let o = rigkit_in(d, &["cam", "reproj", "--cameras", "cameras.json", "--camera", "nope", "--observations", "exact.csv"], &[]);
    assert_eq!(o.code, 3);
}
