use std::sync::Arc;

use racemcl_core::filter::{FilterConfig, ParticleFilter};
use racemcl_core::map::{load_map_from_meta, save_map};
use racemcl_core::motion::{decompose_odometry, MotionModel, MotionModelKind, MotionParams};
use racemcl_core::raycast::{build_lut, cast_exact, read_lut, write_lut, ExactCaster, LutParams, RangeBackend};
use racemcl_core::sensor::{layout_boxed, BeamModelParams, BeamModelTable, ScanFrame, ScanMeta, SensorModel, DEFAULT_FLOOR_LOG_WEIGHT};
use racemcl_core::{CellState, OccupancyGrid, Pose2D};

const RES: f64 = 0.05;

/// 8 × 5 m room with a few boxes so no two poses look alike.
fn room() -> OccupancyGrid {
    let boxes = [(0.5, 0.5, 1.0, 1.2), (6.8, 3.5, 7.5, 4.5), (3.6, 0.1, 4.4, 0.6), (0.2, 3.9, 1.5, 4.3)];
    OccupancyGrid::from_fn(160, 100, RES, Pose2D::identity(), |c| {
        let (x, y) = ((c.ix as f64 + 0.5) * RES, (c.iy as f64 + 0.5) * RES);
        let wall = c.ix < 2 || c.iy < 2 || c.ix >= 158 || c.iy >= 98;
        if wall || boxes.iter().any(|&(x0, y0, x1, y1)| x >= x0 && x <= x1 && y >= y0 && y <= y1) {
            CellState::Occupied
        } else {
            CellState::Free
        }
    })
    .unwrap()
}

/// Counter-clockwise circle of radius 1.5 m around the room center.
fn path(steps: usize) -> Vec<Pose2D> {
    (0..=steps)
        .map(|i| {
            let a = i as f64 * 0.05;
            Pose2D::new(4.0 + 1.5 * a.cos(), 2.5 + 1.5 * a.sin(), a + std::f64::consts::FRAC_PI_2)
        })
        .collect()
}

fn scan(grid: &OccupancyGrid, pose: &Pose2D, meta: &ScanMeta, stamp: f64) -> ScanFrame {
    let ranges = (0..meta.beam_count)
        .map(|i| cast_exact(grid, pose, meta.bearing(i), meta.range_max).unwrap() as f32)
        .collect();
    ScanFrame::new(stamp, meta, ranges).unwrap()
}

fn filter(grid: &OccupancyGrid, backend: RangeBackend, start: &Pose2D, seed: u64) -> ParticleFilter {
    let meta = ScanMeta::centered(1080, 270f64.to_radians(), 10.0);
    let layout = layout_boxed(&meta, 60, 0.3).unwrap();
    let table = BeamModelTable::new(BeamModelParams::default(), 10.0, RES).unwrap();
    let sensor = SensorModel::new(layout, table, backend, Pose2D::identity()).with_floor(DEFAULT_FLOOR_LOG_WEIGHT);
    let motion = MotionModel::new(MotionModelKind::Tum, MotionParams::default()).unwrap();
    let config = FilterConfig {
        n: 500,
        ..FilterConfig::default()
    };
    ParticleFilter::at_pose(config, grid, start, motion, sensor, seed).unwrap()
}

/// Runs the filter along the path; returns the estimates.
fn track(grid: &OccupancyGrid, mut f: ParticleFilter, truth: &[Pose2D]) -> Vec<Pose2D> {
    let meta = ScanMeta::centered(1080, 270f64.to_radians(), 10.0);
    let dt = 0.025;
    truth
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let v = w[0].distance(&w[1]) / dt;
            let d = decompose_odometry(&w[0], &w[1], v, dt).unwrap();
            f.step(&d, &scan(grid, &w[1], &meta, (i + 1) as f64 * dt)).unwrap().estimate.pose
        })
        .collect()
}

#[test]
fn map_survives_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let grid = room();
    let meta = save_map(&grid, dir.path(), "room").unwrap();
    assert_eq!(load_map_from_meta(&meta).unwrap(), grid);
}

#[test]
fn filter_tracks_a_loop_with_either_backend() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Arc::new(room());
    let params = LutParams {
        ntheta: 108,
        max_range: 10.0,
        memory_cap_bytes: 1 << 30,
    };
    let (lut, _) = build_lut(&grid, &params).unwrap();
    let path_lut = dir.path().join("room.lut");
    write_lut(&lut, &path_lut).unwrap();
    let lut = read_lut(&path_lut).unwrap();

    let truth = path(130);
    for backend in [RangeBackend::Lut(Arc::new(lut)), RangeBackend::Exact(ExactCaster::new(grid.clone(), 10.0))] {
        let kind = backend.kind();
        let est = track(&grid, filter(&grid, backend, &truth[0], 4), &truth);
        let errs: Vec<f64> = est.iter().zip(&truth[1..]).map(|(e, t)| e.distance(t)).collect();
        let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        let worst = errs.iter().copied().fold(0.0, f64::max);
        assert!(rmse < 0.06, "{kind}: rmse {rmse}");
        assert!(worst < 0.2, "{kind}: worst {worst}");
    }
}

#[test]
fn same_seed_same_estimates() {
    let grid = Arc::new(room());
    let truth = path(40);
    let run = || track(&grid, filter(&grid, RangeBackend::Exact(ExactCaster::new(grid.clone(), 10.0)), &truth[0], 9), &truth);
    assert_eq!(run(), run());
}
