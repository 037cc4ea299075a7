//! Lap metrics: scan alignment, lateral error, aggregation, latency benchmarks.

mod aggregate;
mod alignment;
pub mod bench;

pub use aggregate::{aggregate_laps, percentile, render_table, ConditionReport, Percentiles, PhaseLatency, Stat};
pub use alignment::{scan_alignment, AlignmentParams};

use racemcl_core::filter::StepTiming;
use racemcl_core::Pose2D;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::track::Raceline;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no completed laps to aggregate ({dnf} DNF)")]
    AllDnf { dnf: usize },
    #[error("no laps given")]
    NoLaps,
}

/// Unsigned distance from `pose` to the closest point of the raceline.
pub fn lateral_error(pose: &Pose2D, line: &Raceline) -> f64 {
    line.project(pose.x(), pose.y()).distance
}

/// Metrics sampled at one scan tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub stamp: f64,
    pub lateral_error: f64,
    /// Percentage of scan endpoints near a wall, scored from the estimate.
    pub alignment: Option<f64>,
    /// Estimate vs ground truth (m); absent when no filter runs.
    pub position_error: Option<f64>,
    pub heading_error: Option<f64>,
    pub speed: f64,
    pub predict_ms: Option<f64>,
    pub update_ms: Option<f64>,
    pub resample_ms: Option<f64>,
    pub estimate_ms: Option<f64>,
    pub step_ms: Option<f64>,
}

impl StepRecord {
    pub fn set_timing(&mut self, t: &StepTiming) {
        let ms = |d: std::time::Duration| Some(d.as_secs_f64() * 1e3);
        self.predict_ms = ms(t.predict);
        self.update_ms = ms(t.update);
        self.resample_ms = ms(t.resample);
        self.estimate_ms = ms(t.estimate);
        self.step_ms = ms(t.total());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapResult {
    pub lap: usize,
    /// Seconds from start to crossing the start line again; `None` on DNF.
    pub lap_time: Option<f64>,
    pub dnf: bool,
    pub dnf_reason: Option<String>,
    /// Odometry-only terminal position error (m).
    pub dead_reckoning_error: f64,
    pub steps: Vec<StepRecord>,
}

impl LapResult {
    pub fn lateral_errors(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.lateral_error).collect()
    }

    pub fn alignments(&self) -> Vec<f64> {
        self.steps.iter().filter_map(|s| s.alignment).collect()
    }

    pub fn mean_lateral_error(&self) -> f64 {
        mean(&self.lateral_errors())
    }

    pub fn mean_alignment(&self) -> Option<f64> {
        let a = self.alignments();
        (!a.is_empty()).then(|| mean(&a))
    }

    /// Position RMSE over steps at or after `settle` seconds.
    pub fn position_rmse(&self, settle: f64) -> Option<f64> {
        let e: Vec<f64> = self
            .steps
            .iter()
            .filter(|s| s.stamp >= settle)
            .filter_map(|s| s.position_error)
            .collect();
        (!e.is_empty()).then(|| (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt())
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}
