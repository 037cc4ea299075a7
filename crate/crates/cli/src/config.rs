//! Config loading: TOML file, then `--set key=value` overrides, then validation.

use std::path::Path;

use racemcl_sim::config::RunConfig;
use toml::{Table, Value};

use crate::CliError;

pub fn load(file: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut table = match file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for s in sets {
        apply_override(&mut table, s)?;
    }
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

/// Sets a dotted key. The value is parsed as a TOML literal and falls back
/// to a plain string, so `--set track.dir=fixtures/tracks/hairpin` works unquoted.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not KEY=VALUE")))?;
    let key = key.trim();
    let value = parse_literal(raw.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad key '{key}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("'{p}' in '{key}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config serializes to TOML")
}

/// Every configurable key with its default and meaning.
pub fn schema() -> String {
    let defaults = Value::try_from(RunConfig::default()).expect("config serializes to TOML");
    let mut keys = Vec::new();
    flatten("", &defaults, &mut keys);
    for (k, _) in OPTIONAL_KEYS {
        keys.push((k.to_string(), "unset".to_string()));
    }
    keys.sort();
    let mut out = String::from("# key = default    # meaning\n");
    for (k, v) in keys {
        let doc = describe(&k).unwrap_or("(undocumented)");
        out.push_str(&format!("{k} = {v}    # {doc}\n"));
    }
    out
}

pub fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

const OPTIONAL_KEYS: &[(&str, &str)] = &[
    ("lut.path", "prebuilt lookup table to load; when unset, <track.dir>/map.lut or --build-lut"),
    ("eval.tolerance", "alignment tolerance in meters; when unset, twice the map resolution"),
];

pub fn describe(key: &str) -> Option<&'static str> {
    if let Some((_, d)) = OPTIONAL_KEYS.iter().find(|(k, _)| *k == key) {
        return Some(d);
    }
    Some(match key {
        "seed" => "root seed; lap i uses a seed derived from (seed, i)",
        "out_dir" => "directory for experiment, replay, and bench outputs",
        "track.dir" => "track bundle: map.yaml, map.pgm, raceline.csv, centerline.csv",
        "lut.backend" => "range backend for the sensor model: lut or exact",
        "lut.ntheta" => "angular bins of the lookup table over the full circle",
        "lut.memory_cap_mb" => "refuse to build tables larger than this (MiB)",
        "lidar.beams" => "beams per scan",
        "lidar.fov_deg" => "field of view (degrees), centered on the heading",
        "lidar.range_max" => "maximum range (m); also the lookup table clamp",
        "lidar.noise" => "Gaussian range noise std (m)",
        "lidar.offset_x" => "LiDAR position ahead of the rear axle (m)",
        "vehicle.wheelbase" => "wheelbase (m)",
        "vehicle.max_steer" => "steering limit (rad)",
        "vehicle.max_steer_rate" => "steering slew rate (rad/s)",
        "vehicle.max_accel" => "acceleration limit (m/s^2)",
        "vehicle.max_decel" => "braking limit (m/s^2)",
        "controller.lookahead_min" => "pure-pursuit lookahead at standstill (m)",
        "controller.lookahead_gain" => "extra lookahead per m/s (s)",
        "controller.speed_gain" => "proportional speed-loop gain (1/s)",
        "controller.speed_scale" => "multiplier on the raceline speed profile",
        "motion.alpha1" => "rotation noise from rotation",
        "motion.alpha2" => "rotation noise from translation",
        "motion.alpha3" => "translation noise from translation",
        "motion.alpha4" => "translation noise from rotation",
        "motion.lam_thresh" => "translation (m) above which the TUM rotation cap applies",
        "motion.fixed_sigma_xy" => "naive model position noise std (m)",
        "motion.fixed_sigma_theta" => "naive model heading noise std (rad)",
        "motion.cap_gain" => "TUM cap: rotation std limit per unit of steering capacity",
        "motion.wheelbase" => "wheelbase used by the TUM cap (m); must equal vehicle.wheelbase",
        "motion.max_steer" => "steering limit used by the TUM cap (rad); must equal vehicle.max_steer",
        "sensor.layout" => "scanline selection: boxed or uniform",
        "sensor.k" => "scanlines scored per particle",
        "sensor.aspect" => "boxed layout corridor width/length ratio",
        "sensor.floor_log_weight" => "log-likelihood per scanline for poses outside the map",
        "sensor.beam.z_hit" => "beam mixture weight: hit",
        "sensor.beam.z_short" => "beam mixture weight: unexpected short return",
        "sensor.beam.z_max" => "beam mixture weight: max-range return",
        "sensor.beam.z_rand" => "beam mixture weight: uniform random",
        "sensor.beam.sigma_hit" => "hit Gaussian std (m)",
        "sensor.beam.lambda_short" => "short-return exponential rate (1/m)",
        "sensor.beam.squash" => "exponent applied to each scan likelihood",
        "filter.n" => "particle count",
        "filter.resample_ess_frac" => "resample when ESS falls below this fraction of n",
        "filter.estimate" => "pose estimate: mean or max_weight",
        "filter.parallel" => "weigh particles on the rayon thread pool",
        "filter.init_sigmas" => "initial cloud std [x m, y m, theta rad]",
        "slip.hq.trans_scale" => "HQ odometry distance scale",
        "slip.hq.trans_noise" => "HQ relative distance noise std",
        "slip.hq.rot_noise" => "HQ heading noise std per meter (rad/m)",
        "slip.lq.trans_scale" => "LQ odometry distance scale",
        "slip.lq.trans_noise" => "LQ relative distance noise std",
        "slip.lq.rot_noise" => "LQ heading noise std per meter (rad/m)",
        "sim.physics_hz" => "vehicle integration rate (Hz)",
        "sim.scan_hz" => "scan, odometry, filter, and control rate (Hz)",
        "sim.max_lap_time" => "laps slower than this are DNF (s)",
        "sim.collision_margin" => "axle-to-wall clearance below which a lap is DNF (m)",
        "sim.settle_time" => "seconds excluded from position RMSE",
        "eval.stride" => "score every n-th beam for alignment",
        "experiment.laps" => "laps per condition",
        "experiment.models" => "motion models in the grid",
        "experiment.slips" => "slip profiles in the grid",
        "experiment.ground_truth" => "drive on ground truth instead of the filter",
        "experiment.write_logs" => "also write each lap's log as JSON lines",
        _ => return None,
    })
}
