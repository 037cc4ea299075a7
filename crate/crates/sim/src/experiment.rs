//! Condition-grid runner: model × slip, paired laps, CSV and JSON outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use racemcl_core::filter::{FilterError, ParticleFilter};
use racemcl_core::map::DistanceField;
use racemcl_core::motion::{MotionModel, MotionModelKind};
use racemcl_core::raycast::{build_lut, read_lut, BackendKind, ExactCaster, LutBuildReport, LutParams, RangeBackend, RaycastError};
use racemcl_core::rng::derive_seed;
use racemcl_core::sensor::{layout_boxed, layout_uniform, BeamModelTable, LayoutKind, ScanlineLayout, SensorModel};
use racemcl_core::{OccupancyGrid, Pose2D};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{RunConfig, SlipKind};
use crate::eval::{aggregate_laps, render_table, ConditionReport, LapResult, PhaseLatency};
use crate::lap::{drive_lap, lap_seeds, LapContext, LapOutput, PoseSource};
use crate::log::LogError;
use crate::track::{Track, TrackError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Raycast(#[from] RaycastError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Everything derived from the configuration that laps share: track, distance
/// field, range backend, and sensor model.
pub struct Pipeline {
    pub config: RunConfig,
    pub track: Track,
    pub grid: Arc<OccupancyGrid>,
    pub field: DistanceField,
    pub sensor: SensorModel,
    pub lut_report: Option<LutBuildReport>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, ExperimentError> {
        config.validate().map_err(ExperimentError::Config)?;
        let track = Track::load(&config.track.dir)?;
        Self::with_track(config, track)
    }

    pub fn with_track(config: RunConfig, track: Track) -> Result<Self, ExperimentError> {
        config.validate().map_err(ExperimentError::Config)?;
        let grid = Arc::new(track.map.clone());
        let field = DistanceField::new(&grid);
        let (backend, lut_report) = build_backend(&config, &grid)?;
        let sensor = build_sensor(&config, &grid, backend)?;
        Ok(Self {
            config,
            track,
            grid,
            field,
            sensor,
            lut_report,
        })
    }

    pub fn context(&self) -> LapContext<'_> {
        LapContext {
            track: &self.track,
            field: &self.field,
            config: &self.config,
        }
    }

    /// Filter initialized around `start` with the lap's filter seed.
    pub fn filter(&self, kind: MotionModelKind, start: &Pose2D, lap_seed: u64) -> Result<ParticleFilter, ExperimentError> {
        let motion = MotionModel::new(kind, self.config.motion).map_err(|e| ExperimentError::Config(e.to_string()))?;
        let (_, _, filter_seed) = lap_seeds(lap_seed);
        Ok(ParticleFilter::at_pose(
            self.config.filter.clone(),
            &self.grid,
            start,
            motion,
            self.sensor.clone(),
            filter_seed,
        )?)
    }

    pub fn lap_seed(&self, lap: usize) -> u64 {
        derive_seed(self.config.seed, lap as u64)
    }

    /// Runs `laps` laps of one condition. `model = None` drives on ground truth.
    pub fn run_condition(&self, model: Option<MotionModelKind>, slip: SlipKind, laps: usize) -> Result<Vec<LapOutput>, ExperimentError> {
        let profile = self.config.slip.get(slip);
        let start = self.track.raceline.start_pose();
        let ctx = self.context();
        (0..laps)
            .map(|lap| {
                let seed = self.lap_seed(lap);
                let source = match model {
                    None => PoseSource::GroundTruth,
                    Some(kind) => PoseSource::Filter(Box::new(self.filter(kind, &start, seed)?)),
                };
                Ok(drive_lap(&ctx, &profile, source, lap, seed))
            })
            .collect()
    }
}

/// Loads the configured table, or builds one. The exact backend needs neither.
pub fn build_backend(cfg: &RunConfig, grid: &Arc<OccupancyGrid>) -> Result<(RangeBackend, Option<LutBuildReport>), ExperimentError> {
    match cfg.lut.backend {
        BackendKind::Exact => Ok((RangeBackend::Exact(ExactCaster::new(grid.clone(), cfg.lidar.range_max)), None)),
        BackendKind::Lut => {
            if let Some(path) = &cfg.lut.path {
                let lut = read_lut(path)?;
                if lut.nx() != grid.width() || lut.ny() != grid.height() || (lut.resolution() - grid.resolution()).abs() > 1e-12 {
                    return Err(ExperimentError::Config(format!("{} was built for a different map", path.display())));
                }
                return Ok((RangeBackend::Lut(Arc::new(lut)), None));
            }
            let (lut, report) = build_lut(grid, &lut_params(cfg))?;
            Ok((RangeBackend::Lut(Arc::new(lut)), Some(report)))
        }
    }
}

pub fn lut_params(cfg: &RunConfig) -> LutParams {
    LutParams {
        ntheta: cfg.lut.ntheta,
        max_range: cfg.lidar.range_max,
        memory_cap_bytes: cfg.lut.memory_cap_mb.saturating_mul(1 << 20),
    }
}

pub fn build_layout(cfg: &RunConfig) -> Result<ScanlineLayout, ExperimentError> {
    let meta = cfg.lidar.meta();
    match cfg.sensor.layout {
        LayoutKind::Uniform => layout_uniform(&meta, cfg.sensor.k),
        LayoutKind::Boxed => layout_boxed(&meta, cfg.sensor.k, cfg.sensor.aspect),
    }
    .map_err(|e| ExperimentError::Config(format!("sensor layout: {e}")))
}

pub fn build_sensor(cfg: &RunConfig, grid: &OccupancyGrid, backend: RangeBackend) -> Result<SensorModel, ExperimentError> {
    let layout = build_layout(cfg)?;
    let table = BeamModelTable::new(cfg.sensor.beam, cfg.lidar.range_max, grid.resolution())
        .map_err(|e| ExperimentError::Config(format!("sensor.beam: {e}")))?;
    Ok(SensorModel::new(layout, table, backend, cfg.lidar.offset()).with_floor(cfg.sensor.floor_log_weight))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapSummary {
    pub lap: usize,
    pub lap_time: Option<f64>,
    pub dnf_reason: Option<String>,
    pub mean_lateral_error: f64,
    pub mean_alignment: Option<f64>,
    pub position_rmse: Option<f64>,
    pub dead_reckoning_error: f64,
}

impl LapSummary {
    pub fn of(r: &LapResult, settle: f64) -> Self {
        Self {
            lap: r.lap,
            lap_time: r.lap_time,
            dnf_reason: r.dnf_reason.clone(),
            mean_lateral_error: r.mean_lateral_error(),
            mean_alignment: r.mean_alignment(),
            position_rmse: r.position_rmse(settle),
            dead_reckoning_error: r.dead_reckoning_error,
        }
    }
}

/// Deterministic part of a condition's results: no wall-clock timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub name: String,
    pub model: Option<MotionModelKind>,
    pub slip: SlipKind,
    pub report: Option<ConditionReport>,
    pub error: Option<String>,
    pub laps: Vec<LapSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub track: String,
    pub conditions: Vec<ConditionSummary>,
    pub table: String,
}

impl ExperimentSummary {
    /// Conditions where every lap failed.
    pub fn all_dnf(&self) -> Vec<&str> {
        self.conditions.iter().filter(|c| c.report.is_none()).map(|c| c.name.as_str()).collect()
    }

    pub fn any_dnf(&self) -> bool {
        self.conditions.iter().any(|c| c.laps.iter().any(|l| l.lap_time.is_none()))
    }
}

pub struct ExperimentRun {
    pub summary: ExperimentSummary,
    /// Wall-clock filter timings per condition; kept out of the summary so it
    /// stays reproducible byte for byte.
    pub latency: Vec<(String, Option<PhaseLatency>)>,
    pub results: Vec<(String, Vec<LapOutput>)>,
}

pub fn condition_name(model: Option<MotionModelKind>, slip: SlipKind) -> String {
    match model {
        Some(m) => format!("{m}-{}", slip.name()),
        None => format!("ground-truth-{}", slip.name()),
    }
}

/// Runs the configured grid. Ground-truth mode runs one condition per slip
/// profile with the filter bypassed.
pub fn run_experiment(p: &Pipeline) -> Result<ExperimentRun, ExperimentError> {
    let cfg = &p.config;
    let mut grid: Vec<(Option<MotionModelKind>, SlipKind)> = Vec::new();
    if cfg.experiment.ground_truth {
        grid.extend(cfg.experiment.slips.iter().map(|&s| (None, s)));
    } else {
        for &m in &cfg.experiment.models {
            grid.extend(cfg.experiment.slips.iter().map(|&s| (Some(m), s)));
        }
    }
    if grid.is_empty() {
        return Err(ExperimentError::Config("experiment grid is empty".into()));
    }

    let settle = cfg.sim.settle_time;
    let mut conditions = Vec::new();
    let mut latency = Vec::new();
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (model, slip) in grid {
        let name = condition_name(model, slip);
        let outs = p.run_condition(model, slip, cfg.experiment.laps)?;
        let laps: Vec<LapResult> = outs.iter().map(|o| o.result.clone()).collect();
        let agg = aggregate_laps(&laps, settle);
        latency.push((name.clone(), agg.as_ref().ok().and_then(|r| r.latency)));
        let report = agg.as_ref().ok().map(|r| ConditionReport { latency: None, ..r.clone() });
        conditions.push(ConditionSummary {
            name: name.clone(),
            model,
            slip,
            error: agg.as_ref().err().map(|e| e.to_string()),
            report,
            laps: laps.iter().map(|l| LapSummary::of(l, settle)).collect(),
        });
        rows.push((name.clone(), agg.map(|r| ConditionReport { latency: None, ..r })));
        results.push((name, outs));
    }
    Ok(ExperimentRun {
        summary: ExperimentSummary {
            seed: cfg.seed,
            track: p.track.name.clone(),
            conditions,
            table: render_table(&rows),
        },
        latency,
        results,
    })
}

/// Writes `<out>/<condition>/<lap>.csv`, `<out>/summary.json`,
/// `<out>/table.txt`, and `<out>/latency.json`.
pub fn write_outputs(run: &ExperimentRun, out: &Path, write_logs: bool) -> Result<(), ExperimentError> {
    fs::create_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;
    for (name, outs) in &run.results {
        let dir = out.join(name);
        fs::create_dir_all(&dir).map_err(|e| ExperimentError::io(&dir, e))?;
        for o in outs {
            write_lap_csv(&o.result, &dir.join(format!("{}.csv", o.result.lap)))?;
            if write_logs {
                o.log.write_jsonl(&dir.join(format!("{}.jsonl", o.result.lap)))?;
            }
        }
    }
    let write = |file: &str, body: String| {
        let path = out.join(file);
        fs::write(&path, body).map_err(|e| ExperimentError::io(&path, e))
    };
    write("summary.json", serde_json::to_string_pretty(&run.summary).expect("summary serializes") + "\n")?;
    write("table.txt", run.summary.table.clone())?;
    write("latency.json", serde_json::to_string_pretty(&run.latency).expect("latency serializes") + "\n")?;
    Ok(())
}

/// Per-step metrics of one lap; timing columns are empty in ground-truth mode.
pub fn write_lap_csv(r: &LapResult, path: &Path) -> Result<(), ExperimentError> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => ExperimentError::io(path, e),
        other => ExperimentError::io(path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for s in &r.steps {
        w.serialize(s).map_err(io)?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))
}
