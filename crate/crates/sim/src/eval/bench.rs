//! Per-step latency measurement on a replayed workload.

use racemcl_core::filter::ParticleFilter;
use racemcl_core::motion::{decompose_odometry, OdometryDelta};
use racemcl_core::raycast::RangeBackend;
use racemcl_core::sensor::ScanFrame;
use serde::{Deserialize, Serialize};

use super::Percentiles;
use crate::log::SimLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostInfo {
    pub arch: String,
    pub os: String,
    pub threads: usize,
    pub cpu: Option<String>,
}

impl HostInfo {
    pub fn detect() -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        });
        Self {
            arch: std::env::consts::ARCH.into(),
            os: std::env::consts::OS.into(),
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            cpu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub steps: usize,
    pub particles: usize,
    pub scanlines: usize,
    pub ntheta: Option<usize>,
    pub backend: String,
    /// Sensor-update (scan-matching) phase, ms.
    pub update: Percentiles,
    /// Whole predict/update/resample/estimate step, ms.
    pub step: Percentiles,
    pub host: HostInfo,
}

/// Odometry deltas and scans from consecutive log records.
pub fn workload_from_log(log: &SimLog) -> Vec<(OdometryDelta, ScanFrame)> {
    log.records
        .windows(2)
        .filter_map(|w| {
            let dt = w[1].stamp - w[0].stamp;
            decompose_odometry(&w[0].odom_pose, &w[1].odom_pose, w[1].v, dt)
                .ok()
                .map(|d| (d, w[1].scan.clone()))
        })
        .collect()
}

/// Runs `steps` filter steps, cycling through `workload`, and reports timing
/// percentiles. Runs on the calling thread unless the filter was configured parallel.
pub fn bench_step_latency(filter: &mut ParticleFilter, workload: &[(OdometryDelta, ScanFrame)], steps: usize) -> LatencyReport {
    assert!(!workload.is_empty(), "workload must contain at least one step");
    let mut update = Vec::with_capacity(steps);
    let mut total = Vec::with_capacity(steps);
    for i in 0..steps {
        let (d, scan) = &workload[i % workload.len()];
        let out = filter.step(d, scan).expect("workload scans match the sensor layout");
        update.push(out.timing.update.as_secs_f64() * 1e3);
        total.push(out.timing.total().as_secs_f64() * 1e3);
    }
    let sensor = filter.sensor();
    let ntheta = match sensor.backend() {
        RangeBackend::Lut(l) => Some(l.ntheta()),
        RangeBackend::Exact(_) => None,
    };
    let empty = Percentiles { p50: 0.0, p99: 0.0 };
    LatencyReport {
        steps,
        particles: filter.particles().len(),
        scanlines: sensor.layout().len(),
        ntheta,
        backend: sensor.backend().kind().to_string(),
        update: Percentiles::of(&update).unwrap_or(empty),
        step: Percentiles::of(&total).unwrap_or(empty),
        host: HostInfo::detect(),
    }
}
