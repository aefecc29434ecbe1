//! End-to-end runs of the `winterscan` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use winterscan_core::dem::read_dem;
use winterscan_core::ingest::{encode_record, DatasetStore, SensorRecord};
use winterscan_core::lidarimg::{frame_to_record, read_pgm, restagger, RawLidarFrame};
use winterscan_core::Channel;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_winterscan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const ROAD: &str = "\
[road]
roadway_width_m = 8.0
length_m = 20
point_density = 400
seed = 21

[bank]
gap_m = 5.6
height_m = 0.4
face_gradient = 1.0
";

fn synth_pair(dir: &Path) {
    fs::write(dir.join("road.spec"), ROAD).unwrap();
    ok(dir, &["synth", "--spec", "road.spec", "--epoch", "winter", "--out", "w.ptr",
        "--transects-out", "t.csv", "--transect-count", "8", "--transect-pad", "1"]);
    ok(dir, &["synth", "--spec", "road.spec", "--epoch", "bare", "--out", "b.ptr"]);
}

#[test]
fn synth_then_dem_build() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_pair(d);
    ok(d, &["dem", "build", "--in", "b.ptr", "--cell", "0.1", "--out", "b.dem"]);
    let grid = read_dem(&d.join("b.dem")).unwrap();
    let g = grid.geometry;
    assert_eq!(g.cell_size, 0.1);
    // roadway ±4 m plus the default 2 m margin, 20 m long
    assert!((g.n_cols as f64 * 0.1 - 12.0).abs() <= 0.2, "{} cols", g.n_cols);
    assert!((g.n_rows as f64 * 0.1 - 20.0).abs() <= 0.2, "{} rows", g.n_rows);
    // flat uncrowned roadway sits at zero up to the default ±5 mm jitter
    let (row, col) = g.locate(0.0, 10.0).unwrap();
    assert!(grid.get(row, col).unwrap().abs() <= 0.005);
    assert!(grid.valid_count() as f64 >= 0.95 * g.len() as f64);
}

#[test]
fn width_json_reports_bank_narrowing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_pair(d);
    ok(d, &["dem", "build", "--in", "w.ptr", "--fill", "2", "--out", "w.dem"]);
    ok(d, &["dem", "build", "--in", "b.ptr", "--like", "w.dem", "--fill", "2", "--out", "b.dem"]);
    let text = ok(d, &["width", "--winter", "w.dem", "--reference", "b.dem", "--design", "(8/7.5)",
        "--transects", "t.csv", "--roadway-start", "1", "--segment", "Ruskontie"]);
    let rows: serde_json::Value = serde_json::from_str(&text).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 8);
    // banks rise 1:1 from ±2.8 m, so depth passes 0.05 m at ±2.85 m
    let expected = 5.6 + 2.0 * 0.05;
    for r in rows {
        let eff = r["effective_width_m"].as_f64().unwrap();
        let deficit = r["deficit_m"].as_f64().unwrap();
        assert!((eff - expected).abs() <= 0.2, "{r}");
        assert!((deficit - (8.0 - eff)).abs() <= 0.0015, "{r}");
        assert_eq!(r["segment"], "Ruskontie");
        assert_eq!(r["fully_blocked"], false);
    }
    // every number carries exactly three decimals
    assert!(text.contains("\"design_roadway_width_m\": 8.000"));
}

#[test]
fn diff_on_mismatched_grids_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_pair(d);
    ok(d, &["dem", "build", "--in", "w.ptr", "--cell", "0.1", "--out", "w.dem"]);
    ok(d, &["dem", "build", "--in", "b.ptr", "--cell", "0.2", "--out", "b.dem"]);
    let out = run(d, &["dem", "diff", "--winter", "w.dem", "--reference", "b.dem"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid mismatch"));

    ok(d, &["dem", "build", "--in", "b.ptr", "--like", "w.dem", "--out", "b.dem"]);
    let summary: serde_json::Value =
        serde_json::from_str(&ok(d, &["dem", "diff", "--winter", "w.dem", "--reference", "b.dem", "--out", "depth.dem"]))
            .unwrap();
    assert!(summary["snow_volume_m3"].as_f64().unwrap() > 0.0);
    assert!(d.join("depth.dem").exists());
}

#[test]
fn usage_errors_exit_two_and_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["dem", "build", "--in", "x.ptr", "--out", "x.dem", "--cell", "wide"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--cell"));

    let out = run(d, &["width", "--winter", "w.dem"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--reference"));

    let out = run(d, &["dem", "build", "--in", "cloud.las", "--out", "x.dem"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--format"));

    let out = run(d, &["dem", "build", "--in", "missing.ptr", "--out", "x.dem"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ptr"));
}

fn frame_record(dir: &Path) {
    let (beams, cols) = (16usize, 64usize);
    let mut values = vec![100u32; beams * cols];
    for r in 0..beams {
        for c in 20..24 {
            values[r * cols + c] = 3000;
        }
    }
    let shifts: Vec<i32> = (0..beams as i32).map(|b| (b % 4) * 3 - 4).collect();
    let aligned = RawLidarFrame::new(beams, cols, values, shifts.clone()).unwrap();
    let mut staggered = restagger(&aligned).unwrap();
    staggered.pixel_shift = shifts;
    let record = frame_to_record(&staggered, 1_704_790_800_000_000_000, "lidar");
    fs::write(dir.join("frame.rec"), encode_record(&record).unwrap()).unwrap();
}

#[test]
fn intensity_destaggers_and_finds_marking() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    frame_record(d);
    let summary: serde_json::Value =
        serde_json::from_str(&ok(d, &["intensity", "--in", "frame.rec", "--out", "img.pgm"])).unwrap();
    assert_eq!(summary["clusters"], serde_json::json!([{"start_col": 20, "end_col": 23}]));
    let img = read_pgm(&d.join("img.pgm")).unwrap();
    assert_eq!((img.n_rows, img.n_cols), (16, 64));
    assert!(img.get(5, 21) > 0.99 && img.get(5, 40) < 0.01);
}

#[test]
fn report_is_deterministic_and_reproducible_from_its_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_pair(d);
    frame_record(d);
    let args = [
        "report", "--winter", "w.ptr", "--reference", "b.ptr", "--transects", "t.csv",
        "--segment", "Ruskontie", "--design", "(8/7.5)", "--winter-label", "2024-01-09 winter",
        "--reference-label", "2023-10-10 autumn", "--frame", "2024-01-09 winter=frame.rec",
        "--roadway-start", "1", "--fill", "2", "--volume-min-depth", "0.02",
    ];
    let first = ok(d, &args);
    let second = ok(d, &args);
    assert_eq!(first, second);
    fs::write(d.join("first.json"), &first).unwrap();

    let replay = ok(d, &[
        "report", "--winter", "w.ptr", "--reference", "b.ptr", "--transects", "t.csv",
        "--segment", "Ruskontie", "--winter-label", "2024-01-09 winter",
        "--reference-label", "2023-10-10 autumn", "--frame", "2024-01-09 winter=frame.rec",
        "--params", "first.json",
    ]);
    assert_eq!(replay, first);

    let report: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(report["parameters"]["fill_radius_cells"], 2);
    assert_eq!(report["parameters"]["volume_min_depth_m"], 0.02);
    assert_eq!(report["widths"].as_array().unwrap().len(), 8);
    assert_eq!(report["marking_clusters"][0]["clusters"], 1);

    let threaded = Command::new(env!("CARGO_BIN_EXE_winterscan"))
        .current_dir(d)
        .env("WINTERSCAN_THREADS", "1")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(threaded.stdout).unwrap(), first);
}

#[test]
fn snowbanks_along_centerline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_pair(d);
    fs::write(d.join("line.csv"), "x,y\n0,0\n0,20\n").unwrap();
    let csv = ok(d, &["snowbanks", "--in", "w.ptr", "--centerline", "line.csv", "--step", "5"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("station_m,width_m"));
    let rows: Vec<(f64, Option<f64>)> = lines
        .map(|l| {
            let (s, w) = l.split_once(',').unwrap();
            (s.parse().unwrap(), w.parse().ok())
        })
        .collect();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [0.0, 5.0, 10.0, 15.0, 20.0]);
    // toes sit where the 1:1 face has risen 0.03 m
    for (_, w) in &rows[1..4] {
        let w = w.expect("both banks visible");
        assert!((w - (5.6 + 2.0 * 0.03)).abs() <= 0.1, "{w}");
    }
}

#[test]
fn ingest_snapshot_and_scan() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let store = DatasetStore::create(d.join("store")).unwrap();
    for (t, id) in [(30u64, "gnss"), (10, "lidar"), (20, "imu")] {
        store
            .write_live(&SensorRecord::new(t, id).with("v", Channel::Scalar(t as f64)))
            .unwrap();
    }
    let listed = ok(d, &["ingest", "snapshot", "--store", "store"]);
    assert_eq!(listed.lines().count(), 3);
    let scan = ok(d, &["ingest", "scan", "--archive", "store/archive"]);
    let rows: Vec<&str> = scan.lines().collect();
    assert_eq!(rows[0], "timestamp_ns,sensor_id,path");
    let order: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(order, ["lidar", "imu", "gnss"]);
    let filtered = ok(d, &["ingest", "scan", "--archive", "store/archive", "--from", "15", "--sensor", "gnss"]);
    assert_eq!(filtered.lines().count(), 2);
}
