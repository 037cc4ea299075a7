use std::path::{Path, PathBuf};

use racemcl_core::filter::ParticleFilter;
use racemcl_core::map::{load_map_from_meta, MapError};
use racemcl_core::motion::{MotionModel, MotionModelKind};
use racemcl_core::raycast::{build_lut as build_table, write_lut, BackendKind, RaycastError};
use racemcl_sim::config::{RunConfig, SlipKind};
use racemcl_sim::eval::bench::{bench_step_latency, workload_from_log, LatencyReport};
use racemcl_sim::eval::Percentiles;
use racemcl_sim::experiment::{build_backend, build_sensor, lut_params, run_experiment, write_outputs, ExperimentError, Pipeline};
use racemcl_sim::lap::{drive_lap, replay_log, PoseSource};
use racemcl_sim::log::SimLog;
use racemcl_sim::track::{Track, TrackError, TrackGenParams, TrackKind};
use serde::Serialize;

use crate::config::load;
use crate::{CliError, ConfigArgs};

/// File, `--set` overrides, `extra` overrides, then the dedicated flags.
pub fn resolve(args: &ConfigArgs, extra: &[String]) -> Result<RunConfig, CliError> {
    let sets: Vec<String> = args.sets.iter().chain(extra).cloned().collect();
    let mut cfg = load(args.config.as_deref(), &sets)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(t) = &args.track {
        cfg.track.dir = t.clone();
    }
    if let Some(b) = args.backend {
        cfg.lut.backend = b;
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn default_lut_path(cfg: &RunConfig) -> PathBuf {
    cfg.track.dir.join("map.lut")
}

/// Points `lut.path` at `<track>/map.lut` when present; otherwise the table
/// must be built in memory, which needs `--build-lut`.
fn resolve_lut(cfg: &mut RunConfig, allow_build: bool) -> Result<(), CliError> {
    if cfg.lut.backend != BackendKind::Lut || cfg.lut.path.is_some() {
        return Ok(());
    }
    let p = default_lut_path(cfg);
    if p.exists() {
        cfg.lut.path = Some(p);
        Ok(())
    } else if allow_build {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "no lookup table at {}; run `racemcl build-lut` or pass --build-lut",
            p.display()
        )))
    }
}

fn map_err(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Config(m) => CliError::Config(m),
        ExperimentError::Raycast(e @ (RaycastError::MemoryCap { .. } | RaycastError::InvalidParams(_))) => CliError::Config(e.to_string()),
        ExperimentError::Filter(e) => CliError::Config(e.to_string()),
        other => CliError::Io(other.to_string()),
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let body = serde_json::to_string_pretty(v).expect("report serializes") + "\n";
    std::fs::write(path, body).map_err(io(path))
}

pub fn build_lut(args: &ConfigArgs, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = resolve(args, &[])?;
    let out = out.unwrap_or_else(|| default_lut_path(&cfg));
    let grid = load_map_from_meta(&cfg.track.dir.join("map.yaml")).map_err(|e| match e {
        MapError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    let (lut, report) = build_table(&grid, &lut_params(&cfg)).map_err(|e| match e {
        RaycastError::MemoryCap { .. } | RaycastError::InvalidParams(_) => CliError::Config(e.to_string()),
        other => CliError::Io(other.to_string()),
    })?;
    write_lut(&lut, &out).map_err(|e| CliError::Io(e.to_string()))?;
    println!(
        "built {}: {}x{}x{} entries, {:.1} MiB, {:.2} s",
        out.display(),
        lut.nx(),
        lut.ny(),
        lut.ntheta(),
        report.bytes as f64 / (1u64 << 20) as f64,
        report.build_time.as_secs_f64()
    );
    Ok(())
}

pub fn gen_track(kind: TrackKind, out: &Path, resolution: Option<f64>, v_max: Option<f64>) -> Result<(), CliError> {
    let mut p = TrackGenParams::default();
    if let Some(r) = resolution {
        p.resolution = r;
    }
    if let Some(v) = v_max {
        p.v_max = v;
    }
    let track = Track::generate(kind, &p).map_err(|e| CliError::Config(e.to_string()))?;
    track.save(out).map_err(|e| CliError::Io(e.to_string()))?;
    println!(
        "wrote {} to {}: map {}x{} at {} m, raceline {:.2} m over {} points",
        kind.name(),
        out.display(),
        track.map.width(),
        track.map.height(),
        track.map.resolution(),
        track.raceline.length(),
        track.raceline.len()
    );
    Ok(())
}

pub struct ExperimentArgs {
    pub laps: Option<usize>,
    pub ground_truth: bool,
    pub models: Vec<MotionModelKind>,
    pub slips: Vec<SlipKind>,
    pub build_lut: bool,
    pub write_logs: bool,
}

pub fn experiment(args: &ConfigArgs, x: ExperimentArgs) -> Result<(), CliError> {
    let mut cfg = resolve(args, &[])?;
    if let Some(l) = x.laps {
        cfg.experiment.laps = l;
    }
    if x.ground_truth {
        cfg.experiment.ground_truth = true;
    }
    if !x.models.is_empty() {
        cfg.experiment.models = x.models;
    }
    if !x.slips.is_empty() {
        cfg.experiment.slips = x.slips;
    }
    if x.write_logs {
        cfg.experiment.write_logs = true;
    }
    cfg.validate().map_err(CliError::Config)?;
    if !cfg.experiment.ground_truth {
        resolve_lut(&mut cfg, x.build_lut)?;
    } else {
        // The filter is bypassed, so skip the table entirely.
        cfg.lut.backend = BackendKind::Exact;
    }
    let out = cfg.out_dir.clone();
    let write_logs = cfg.experiment.write_logs;
    let pipeline = Pipeline::new(cfg).map_err(map_err)?;
    let run = run_experiment(&pipeline).map_err(map_err)?;
    write_outputs(&run, &out, write_logs).map_err(map_err)?;
    write_json(&out.join("config.json"), &pipeline.config)?;

    print!("{}", run.summary.table);
    for (name, lat) in &run.latency {
        if let Some(l) = lat {
            println!(
                "{name}: update p50 {:.3} ms p99 {:.3} ms, step p50 {:.3} ms",
                l.update.p50, l.update.p99, l.step.p50
            );
        }
    }
    println!("outputs in {}", out.display());

    let all = run.summary.all_dnf();
    if !all.is_empty() {
        return Err(CliError::Dnf(format!("no completed laps in: {}", all.join(", "))));
    }
    if run.summary.any_dnf() {
        return Err(CliError::Dnf("some laps did not finish; see summary.json".into()));
    }
    Ok(())
}

fn read_log(path: &Path) -> Result<SimLog, CliError> {
    SimLog::read_jsonl(path).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct ReplaySummary {
    log: PathBuf,
    model: MotionModelKind,
    steps: usize,
    mean_alignment: Option<f64>,
    position_rmse: f64,
    update_ms: Option<Percentiles>,
    step_ms: Option<Percentiles>,
}

pub fn replay(args: &ConfigArgs, log_path: &Path, model: MotionModelKind, build: bool) -> Result<(), CliError> {
    let mut cfg = resolve(args, &[])?;
    let log = read_log(log_path)?;
    resolve_lut(&mut cfg, build)?;
    let pipeline = Pipeline::new(cfg).map_err(map_err)?;
    let start = log.records[0].ground_truth;
    let mut filter = pipeline.filter(model, &start, pipeline.lap_seed(0)).map_err(map_err)?;
    let steps = replay_log(&log, &mut filter, &pipeline.field, &pipeline.config).map_err(|e| CliError::Config(e.to_string()))?;

    let out = pipeline.config.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(io(&out))?;
    let csv_path = out.join("replay.csv");
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", csv_path.display()));
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    w.write_record([
        "stamp", "est_x", "est_y", "est_theta", "gt_x", "gt_y", "gt_theta", "position_error", "alignment", "update_ms", "step_ms",
    ])
    .map_err(csv_err)?;
    for s in &steps {
        let f = |v: f64| format!("{v}");
        w.write_record([
            f(s.stamp),
            f(s.estimate.x()),
            f(s.estimate.y()),
            f(s.estimate.theta()),
            f(s.ground_truth.x()),
            f(s.ground_truth.y()),
            f(s.ground_truth.theta()),
            f(s.position_error),
            s.alignment.map(f).unwrap_or_default(),
            f(s.update_ms),
            f(s.step_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io(&csv_path))?;

    let align: Vec<f64> = steps.iter().filter_map(|s| s.alignment).collect();
    let summary = ReplaySummary {
        log: log_path.to_path_buf(),
        model,
        steps: steps.len(),
        mean_alignment: (!align.is_empty()).then(|| align.iter().sum::<f64>() / align.len() as f64),
        position_rmse: (steps.iter().map(|s| s.position_error.powi(2)).sum::<f64>() / steps.len().max(1) as f64).sqrt(),
        update_ms: Percentiles::of(&steps.iter().map(|s| s.update_ms).collect::<Vec<_>>()),
        step_ms: Percentiles::of(&steps.iter().map(|s| s.step_ms).collect::<Vec<_>>()),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    println!("{text}");
    std::fs::write(out.join("replay.json"), text + "\n").map_err(io(&out))?;
    Ok(())
}

pub fn bench(
    args: &ConfigArgs,
    particles: &[usize],
    ks: &[usize],
    backends: &[BackendKind],
    steps: usize,
    log: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = resolve(args, &[])?;
    if steps == 0 {
        return Err(CliError::Config("--steps must be positive".into()));
    }
    let log = match log {
        Some(p) => read_log(p)?,
        None => {
            // One ground-truth HQ lap as the workload; no table needed for that.
            let mut c = cfg.clone();
            c.lut.backend = BackendKind::Exact;
            let p = Pipeline::new(c).map_err(map_err)?;
            let run = drive_lap(&p.context(), &p.config.slip.hq, PoseSource::GroundTruth, 0, p.lap_seed(0));
            run.log
        }
    };
    let workload = workload_from_log(&log);
    if workload.is_empty() {
        return Err(CliError::Config("workload log has fewer than two records".into()));
    }
    let start = log.records[0].ground_truth;
    let track = Track::load(&cfg.track.dir).map_err(|e| match e {
        TrackError::Invalid(m) => CliError::Config(m),
        other => CliError::Io(other.to_string()),
    })?;
    let grid = std::sync::Arc::new(track.map.clone());

    let particles = if particles.is_empty() { vec![cfg.filter.n] } else { particles.to_vec() };
    let ks = if ks.is_empty() { vec![cfg.sensor.k] } else { ks.to_vec() };
    let backends = if backends.is_empty() { vec![cfg.lut.backend] } else { backends.to_vec() };
    let motion = MotionModel::new(MotionModelKind::Tum, cfg.motion).map_err(|e| CliError::Config(e.to_string()))?;

    let mut reports: Vec<LatencyReport> = Vec::new();
    for &b in &backends {
        let mut c = cfg.clone();
        c.lut.backend = b;
        resolve_lut(&mut c, true)?;
        let (backend, _) = build_backend(&c, &grid).map_err(map_err)?;
        for &k in &ks {
            c.sensor.k = k;
            c.validate().map_err(CliError::Config)?;
            let sensor = build_sensor(&c, &grid, backend.clone()).map_err(map_err)?;
            for &n in &particles {
                let mut fc = c.filter.clone();
                fc.n = n;
                let mut filter = ParticleFilter::at_pose(fc, &grid, &start, motion, sensor.clone(), c.seed).map_err(|e| CliError::Config(e.to_string()))?;
                let r = bench_step_latency(&mut filter, &workload, steps);
                println!(
                    "backend {:<5} N {:>6} K {:>4}: update p50 {:>8.3} ms p99 {:>8.3} ms, step p50 {:>8.3} ms",
                    r.backend, n, k, r.update.p50, r.update.p99, r.step.p50
                );
                reports.push(r);
            }
        }
    }
    write_json(&cfg.out_dir.join("bench.json"), &reports)?;
    Ok(())
}
