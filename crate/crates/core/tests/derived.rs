//! Worked examples checked against independent oracles: closed-form synthetic
//! surfaces, generator labels and direct computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use winterscan_core::analysis::{
    detect_profile_edges, segment_road, snowbank_width, SegmentParams, SnowbankParams,
};
use winterscan_core::dem::{self, extract_profile, rasterize, Aggregator};
use winterscan_core::ingest::{load_point_cloud, save_point_cloud, CloudFormat, Point, PointCloud};
use winterscan_core::lidarimg::{normalize, RawLidarFrame};
use winterscan_core::pipeline::shared_grids;
use winterscan_core::synthgen::{
    analytic_profile, generate_cloud, BankSides, BankSpec, Epoch, ObstacleSpec, SnowHeap,
    SurfaceLabel, SyntheticRoadSpec,
};

fn heap(station: f64, along: f64) -> SnowHeap {
    SnowHeap {
        center_station_m: station,
        center_along_m: along,
        peak_m: 0.4,
        sigma_m: 0.5,
        along_extent_m: None,
    }
}

#[test]
fn crowned_profile_apex_at_centerline() {
    let mut spec = SyntheticRoadSpec::new(8.0, 20.0, 400.0, 11);
    spec.crown_slope = 0.03;
    spec.jitter_m = 0.005;
    let cloud = generate_cloud(&spec, Epoch::Bare).unwrap().cloud;
    let grid = rasterize(&cloud, 0.1, Aggregator::Mean).unwrap();
    for t in spec.cross_transects(5, 1.0) {
        let p = extract_profile(&grid, &t, 0.05).unwrap();
        let apex = p
            .samples
            .iter()
            .filter(|s| s.elevation_m.is_some())
            .max_by(|a, b| a.elevation_m.unwrap().total_cmp(&b.elevation_m.unwrap()))
            .unwrap();
        // centerline sits at station pad + W/2; the kink is resolved to the nearest cell center
        assert!((apex.station_m - 5.0).abs() <= 0.05 + 1e-9, "{}: apex {}", t.id, apex.station_m);
    }
}

#[test]
fn diff_recovers_gaussian_heap() {
    let mut spec = SyntheticRoadSpec::new(8.0, 20.0, 400.0, 12);
    spec.snow.push(heap(4.0, 10.0));
    let winter = generate_cloud(&spec, Epoch::Winter).unwrap().cloud;
    let bare = generate_cloud(&spec, Epoch::Bare).unwrap().cloud;
    let (wg, bg) = shared_grids(&winter, &bare, 0.1, Aggregator::Mean, 0).unwrap();
    let depth = dem::diff(&wg, &bg).unwrap();
    // largest Gaussian gradient is peak/σ·e^(-1/2)
    let tolerance = 2.0 * 0.1 * 0.4 / 0.5 * (-0.5f64).exp();
    let g = depth.geometry;
    let mut checked = 0;
    for row in 0..g.n_rows {
        for col in 0..g.n_cols {
            let Some(d) = depth.get(row, col) else { continue };
            let (x, y) = g.cell_center(row, col);
            let st = x + 4.0;
            let expect = 0.4 * (-((st - 4.0).powi(2) + (y - 10.0).powi(2)) / 0.5).exp();
            assert!((d - expect).abs() <= tolerance, "cell {row},{col}: {d} vs {expect}");
            checked += 1;
        }
    }
    assert!(checked > 10_000);
}

#[test]
fn pipeline_closure_against_analytic_profile() {
    let mut spec = SyntheticRoadSpec::new(8.0, 20.0, 400.0, 13);
    spec.crown_slope = 0.03;
    spec.jitter_m = 0.005;
    spec.snow.push(heap(3.0, 10.0));
    let cloud = generate_cloud(&spec, Epoch::Winter).unwrap().cloud;
    let grid = rasterize(&cloud, 0.1, Aggregator::Mean).unwrap();
    let max_slope = 0.03 + 0.4 / 0.5 * (-0.5f64).exp();
    let bound = 2.0 * 0.1 * max_slope;
    for t in spec.cross_transects(9, 0.0) {
        let measured = extract_profile(&grid, &t, 0.05).unwrap();
        let exact = analytic_profile(&spec, Epoch::Winter, &t, 0.05);
        for (m, e) in measured.samples.iter().zip(&exact.samples) {
            assert_eq!(m.station_m, e.station_m);
            // the bound needs the roadway slope over the whole stencil, away from the fore slope
            if m.station_m < 0.2 || m.station_m > 7.8 {
                continue;
            }
            let err = (m.elevation_m.unwrap() - e.elevation_m.unwrap()).abs();
            assert!(err <= bound, "{} station {}: error {err}", t.id, m.station_m);
        }
    }
}

#[test]
fn segmentation_stops_at_curb() {
    let mut spec = SyntheticRoadSpec::new(8.0, 20.0, 400.0, 14);
    spec.margin_m = 0.0;
    spec.jitter_m = 0.005;
    // right half of the roadway raised 0.3 m along the whole length
    spec.obstacles.push(ObstacleSpec {
        center_station_m: 6.5,
        center_along_m: 10.0,
        across_m: 5.0,
        along_m: 30.0,
        height_m: 0.3,
    });
    let g = generate_cloud(&spec, Epoch::Bare).unwrap();
    let r = segment_road(&g.cloud, (-2.0, 10.0, 0.0), SegmentParams::default()).unwrap();
    assert!(r.member_indices.iter().all(|&i| g.labels[i] == SurfaceLabel::Road));
    assert!(r.member_indices.iter().all(|&i| g.cloud.points[i].x < 0.0));
    let low_side = g.labels.iter().filter(|l| **l == SurfaceLabel::Road).count();
    assert!(r.member_indices.len() as f64 >= 0.95 * low_side as f64);
}

#[test]
fn profile_edges_match_generator() {
    let mut spec = SyntheticRoadSpec::new(8.0, 20.0, 400.0, 15);
    spec.jitter_m = 0.005;
    let cloud = generate_cloud(&spec, Epoch::Bare).unwrap().cloud;
    let grid = rasterize(&cloud, 0.1, Aggregator::Mean).unwrap();
    for t in spec.cross_transects(5, 2.0) {
        let p = extract_profile(&grid, &t, 0.05).unwrap();
        let (l, r) = detect_profile_edges(&p, 0.15).unwrap();
        assert!((l - 2.0).abs() <= 0.05 && (r - 10.0).abs() <= 0.05, "{}: ({l}, {r})", t.id);
    }
}

#[test]
fn crowned_edges_symmetric() {
    let mut spec = SyntheticRoadSpec::new(8.0, 20.0, 400.0, 16);
    spec.crown_slope = 0.03;
    let cloud = generate_cloud(&spec, Epoch::Bare).unwrap().cloud;
    let grid = rasterize(&cloud, 0.1, Aggregator::Mean).unwrap();
    for t in spec.cross_transects(5, 2.0) {
        let p = extract_profile(&grid, &t, 0.05).unwrap();
        let (l, r) = detect_profile_edges(&p, 0.15).unwrap();
        assert!(((6.0 - l) - (r - 6.0)).abs() <= 0.05, "{}: ({l}, {r})", t.id);
    }
}

fn banked_spec(curve: Option<f64>, sides: BankSides) -> SyntheticRoadSpec {
    let mut spec = SyntheticRoadSpec::new(8.0, 40.0, 400.0, 17);
    spec.jitter_m = 0.005;
    spec.curve_radius_m = curve;
    spec.bank = Some(BankSpec {
        gap_m: 6.0,
        height_m: 0.4,
        top_width_m: 0.5,
        face_gradient: 1.0,
        sides,
    });
    spec
}

fn centerline(spec: &SyntheticRoadSpec) -> Vec<(f64, f64)> {
    (0..=80).map(|i| spec.road_to_world(0.0, i as f64 * 0.5)).collect()
}

#[test]
fn snowbank_width_straight_and_curved() {
    for curve in [None, Some(40.0)] {
        let spec = banked_spec(curve, BankSides::Both);
        let cloud = generate_cloud(&spec, Epoch::Winter).unwrap().cloud;
        let widths = snowbank_width(&cloud, &centerline(&spec), 2.0, 0.2, &SnowbankParams::default()).unwrap();
        let line = centerline(&spec);
        let length: f64 = line.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum();
        assert_eq!(widths.len(), (length / 2.0 + 1e-9).floor() as usize + 1);
        // end stations see only half a strip; the rest must all resolve
        for w in &widths[1..widths.len() - 1] {
            let width = w.width_m.unwrap_or(f64::NAN);
            assert!((width - 6.0).abs() <= 0.2, "curve {curve:?} station {}: {width}", w.station_m);
        }
    }
}

#[test]
fn snowbank_one_side_is_none() {
    let spec = banked_spec(None, BankSides::Left);
    let cloud = generate_cloud(&spec, Epoch::Winter).unwrap().cloud;
    let widths = snowbank_width(&cloud, &centerline(&spec), 2.0, 0.2, &SnowbankParams::default()).unwrap();
    assert!(widths.iter().all(|w| w.width_m.is_none()));
}

#[test]
fn snowbank_mirror_invariant() {
    let spec = banked_spec(None, BankSides::Both);
    let mut spec_asym = spec.clone();
    // unequal banks so a mirror actually moves something
    spec_asym.snow.push(SnowHeap {
        center_station_m: 1.5,
        center_along_m: 20.0,
        peak_m: 0.1,
        sigma_m: 0.3,
        along_extent_m: Some(40.0),
    });
    let cloud = generate_cloud(&spec_asym, Epoch::Winter).unwrap().cloud;
    let mut mirrored = cloud.clone();
    for p in &mut mirrored.points {
        p.x = -p.x;
    }
    let line = centerline(&spec);
    let a = snowbank_width(&cloud, &line, 2.0, 0.2, &SnowbankParams::default()).unwrap();
    let b = snowbank_width(&mirrored, &line, 2.0, 0.2, &SnowbankParams::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn normalize_clamps_at_most_two_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let (beams, cols) = (128, 512);
    let raw: Vec<u32> = (0..beams * cols)
        .map(|_| {
            // road-like body plus rare retro-reflective spikes
            if rng.random_bool(0.005) {
                rng.random_range(5000..60000)
            } else {
                rng.random_range(20..400)
            }
        })
        .collect();
    let frame = RawLidarFrame::new(beams, cols, raw.clone(), vec![0; beams]).unwrap();
    let n = normalize(&frame, 1.0, 99.0).unwrap();

    let mut sorted: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let pct = |p: f64| {
        let h = (sorted.len() - 1) as f64 * p / 100.0;
        let (i, f) = (h.floor() as usize, h.fract());
        if f == 0.0 { sorted[i] } else { sorted[i] + f * (sorted[i + 1] - sorted[i]) }
    };
    assert_eq!((n.low_value, n.high_value), (pct(1.0), pct(99.0)));
    let clamped = raw
        .iter()
        .filter(|&&v| (v as f64) < n.low_value || (v as f64) > n.high_value)
        .count();
    assert!(clamped as f64 <= 0.02 * raw.len() as f64, "{clamped}");
    assert!(n.image.values.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn million_point_binary_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let points: Vec<Point> = (0..1_000_000)
        .map(|_| {
            Point::new(
                rng.random_range(385_000.0..386_000.0),
                rng.random_range(7_210_000.0..7_211_000.0),
                rng.random_range(-5.0..40.0),
            )
            .with_intensity(rng.random())
        })
        .collect();
    let cloud = PointCloud::new("EPSG:3067", points);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.ptr");
    save_point_cloud(&cloud, &path, CloudFormat::PointrecBinary).unwrap();
    let back = load_point_cloud(&path, CloudFormat::PointrecBinary).unwrap();
    assert_eq!(back, cloud);
}

#[test]
fn generation_independent_of_thread_count() {
    let mut spec = SyntheticRoadSpec::new(8.0, 30.0, 200.0, 20);
    spec.jitter_m = 0.005;
    spec.snow.push(heap(4.0, 15.0));
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let g = generate_cloud(&spec, Epoch::Winter).unwrap();
            let grid = rasterize(&g.cloud, 0.1, Aggregator::Mean).unwrap();
            (winterscan_core::ingest::encode_pointrec(&g.cloud).unwrap(), grid)
        })
    };
    let (bytes1, grid1) = run(1);
    let (bytes4, grid4) = run(4);
    assert_eq!(bytes1, bytes4);
    assert_eq!(grid1, grid4);
}
