use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{mean, EvalError, LapResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation (divide by n).
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let m = mean(xs);
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        Self { mean: m, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p50: f64,
    pub p99: f64,
}

impl Percentiles {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            p50: percentile(&v, 50.0),
            p99: percentile(&v, 99.0),
        })
    }
}

/// Nearest-rank percentile of ascending-sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Filter timing percentiles in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLatency {
    pub predict: Percentiles,
    pub update: Percentiles,
    pub resample: Percentiles,
    pub estimate: Percentiles,
    pub step: Percentiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// States how spreads are computed.
    pub std_convention: String,
    pub laps: usize,
    pub completed: usize,
    pub dnf: usize,
    pub lap_time: Stat,
    /// Over per-lap mean lateral errors (m).
    pub lateral_error: Stat,
    /// Mean over laps of each lap's mean per-step alignment (%).
    pub alignment: Option<f64>,
    /// Mean over laps of each lap's post-settling position RMSE (m).
    pub position_rmse: Option<f64>,
    pub dead_reckoning_error: Stat,
    pub latency: Option<PhaseLatency>,
}

/// Summarizes completed laps; DNFs are only counted.
pub fn aggregate_laps(results: &[LapResult], settle: f64) -> Result<ConditionReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::NoLaps);
    }
    let done: Vec<&LapResult> = results.iter().filter(|r| !r.dnf).collect();
    let dnf = results.len() - done.len();
    if done.is_empty() {
        return Err(EvalError::AllDnf { dnf });
    }
    let times: Vec<f64> = done.iter().filter_map(|r| r.lap_time).collect();
    let lat: Vec<f64> = done.iter().map(|r| r.mean_lateral_error()).collect();
    let align: Vec<f64> = done.iter().filter_map(|r| r.mean_alignment()).collect();
    let rmse: Vec<f64> = done.iter().filter_map(|r| r.position_rmse(settle)).collect();
    let dr: Vec<f64> = done.iter().map(|r| r.dead_reckoning_error).collect();

    let series = |f: fn(&super::StepRecord) -> Option<f64>| -> Vec<f64> { done.iter().flat_map(|r| r.steps.iter().filter_map(f)).collect() };
    let latency = (|| {
        Some(PhaseLatency {
            predict: Percentiles::of(&series(|s| s.predict_ms))?,
            update: Percentiles::of(&series(|s| s.update_ms))?,
            resample: Percentiles::of(&series(|s| s.resample_ms))?,
            estimate: Percentiles::of(&series(|s| s.estimate_ms))?,
            step: Percentiles::of(&series(|s| s.step_ms))?,
        })
    })();

    Ok(ConditionReport {
        std_convention: "population (divide by n)".into(),
        laps: results.len(),
        completed: done.len(),
        dnf,
        lap_time: Stat::of(&times),
        lateral_error: Stat::of(&lat),
        alignment: (!align.is_empty()).then(|| mean(&align)),
        position_rmse: (!rmse.is_empty()).then(|| mean(&rmse)),
        dead_reckoning_error: Stat::of(&dr),
        latency,
    })
}

/// Fixed-width comparison table, one row per condition.
pub fn render_table(rows: &[(String, Result<ConditionReport, EvalError>)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# mean ± std over completed laps; std is population (divide by n)");
    let _ = writeln!(
        out,
        "{:<18} {:>5} {:>16} {:>16} {:>10} {:>10} {:>5}",
        "condition", "laps", "lap time [s]", "error [cm]", "align [%]", "rmse [cm]", "dnf"
    );
    for (name, rep) in rows {
        match rep {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{:<18} {:>5} {:>16} {:>16} {:>10} {:>10} {:>5}",
                    name,
                    r.laps,
                    format!("{:.3} ± {:.3}", r.lap_time.mean, r.lap_time.std),
                    format!("{:.2} ± {:.2}", 100.0 * r.lateral_error.mean, 100.0 * r.lateral_error.std),
                    r.alignment.map_or("-".into(), |a| format!("{a:.2}")),
                    r.position_rmse.map_or("-".into(), |e| format!("{:.2}", 100.0 * e)),
                    r.dnf,
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{name:<18} {e}");
            }
        }
    }
    out
}
