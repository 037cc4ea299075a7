//! Track bundles: an occupancy map, its centerline, and a raceline with a
//! target-speed profile.
//!
//! On disk a bundle is a directory holding `map.yaml` + `map.pgm`,
//! `centerline.csv` (`x,y`), and `raceline.csv` (`x,y,v`). Both polylines are
//! closed: the last row repeats the first.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use racemcl_core::map::{load_map_from_meta, save_map, MapError};
use racemcl_core::{CellState, GridCell, OccupancyGrid, Pose2D};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad csv {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid track: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RacePoint {
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

/// Closest point on a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub segment: usize,
    /// Arc length of the projected point from the first vertex.
    pub s: f64,
    pub distance: f64,
    pub x: f64,
    pub y: f64,
}

/// Closed piecewise-linear raceline with per-vertex target speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Raceline {
    points: Vec<RacePoint>,
    cum: Vec<f64>,
}

impl Raceline {
    /// Builds from vertices; a trailing duplicate of the first vertex is dropped.
    pub fn new(mut points: Vec<RacePoint>) -> Result<Self, TrackError> {
        if points.len() >= 2 {
            let (f, l) = (points[0], points[points.len() - 1]);
            if (f.x - l.x).hypot(f.y - l.y) < 1e-9 {
                points.pop();
            }
        }
        if points.len() < 3 {
            return Err(TrackError::Invalid("raceline needs at least 3 distinct points".into()));
        }
        let n = points.len();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            cum.push(cum[i] + (b.x - a.x).hypot(b.y - a.y));
        }
        Ok(Self { points, cum })
    }

    pub fn points(&self) -> &[RacePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.cum[self.points.len()]
    }

    fn segment(&self, i: usize) -> (RacePoint, RacePoint) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    /// Orthogonal projection onto the closest segment.
    pub fn project(&self, x: f64, y: f64) -> Projection {
        let mut best = Projection {
            segment: 0,
            s: 0.0,
            distance: f64::INFINITY,
            x,
            y,
        };
        for i in 0..self.points.len() {
            let (a, b) = self.segment(i);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((x - a.x) * dx + (y - a.y) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (px, py) = (a.x + t * dx, a.y + t * dy);
            let d = (x - px).hypot(y - py);
            if d < best.distance {
                best = Projection {
                    segment: i,
                    s: self.cum[i] + t * len2.sqrt(),
                    distance: d,
                    x: px,
                    y: py,
                };
            }
        }
        best
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.rem_euclid(self.length());
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(self.points.len() - 1),
            Err(i) => i - 1,
        };
        let seg = self.cum[i + 1] - self.cum[i];
        let t = if seg > 0.0 { (s - self.cum[i]) / seg } else { 0.0 };
        (i, t)
    }

    /// Position at arc length `s` (wrapping).
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let (i, t) = self.locate(s);
        let (a, b) = self.segment(i);
        (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    }

    pub fn speed_at(&self, s: f64) -> f64 {
        let (i, t) = self.locate(s);
        let (a, b) = self.segment(i);
        a.v + t * (b.v - a.v)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let (i, _) = self.locate(s);
        let (a, b) = self.segment(i);
        (b.y - a.y).atan2(b.x - a.x)
    }

    /// Pose at the first vertex, facing along the line.
    pub fn start_pose(&self) -> Pose2D {
        let p = self.points[0];
        Pose2D::new(p.x, p.y, self.heading_at(0.0))
    }
}

/// One piece of a centerline: a straight, or an arc turning left (`angle > 0`)
/// or right (`angle < 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Straight(f64),
    Arc { radius: f64, angle: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackGenParams {
    pub resolution: f64,
    /// Free corridor width (m).
    pub width: f64,
    /// Wall thickness (m).
    pub wall: f64,
    /// Raceline shift from the centerline toward the loop interior (m).
    pub raceline_offset: f64,
    /// Raceline vertex spacing (m).
    pub spacing: f64,
    pub v_max: f64,
    pub a_lat: f64,
    pub a_accel: f64,
    pub a_brake: f64,
    /// Mean arc length between wall blocks that break the symmetry of long
    /// corridors (m); 0 disables them.
    pub feature_spacing: f64,
    /// How far each block protrudes from the wall (m).
    pub feature_depth: f64,
    /// Block extent along the track (m).
    pub feature_length: f64,
}

impl Default for TrackGenParams {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            width: 2.4,
            wall: 0.15,
            raceline_offset: 0.2,
            spacing: 0.1,
            v_max: 7.6,
            a_lat: 6.0,
            a_accel: 4.0,
            a_brake: 6.0,
            feature_spacing: 2.5,
            feature_depth: 0.2,
            feature_length: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackKind {
    Oval,
    Hairpin,
}

impl TrackKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrackKind::Oval => "oval",
            TrackKind::Hairpin => "hairpin",
        }
    }

    pub fn segments(&self) -> Vec<Segment> {
        use Segment::*;
        match self {
            TrackKind::Oval => vec![
                Straight(14.0),
                Arc { radius: 3.5, angle: PI },
                Straight(14.0),
                Arc { radius: 3.5, angle: PI },
            ],
            TrackKind::Hairpin => vec![
                Straight(14.0),
                Arc { radius: 3.0, angle: PI },
                Straight(4.0),
                Arc { radius: 1.5, angle: -PI },
                Straight(2.0),
                Arc { radius: 1.5, angle: PI },
                Straight(12.0),
                Arc { radius: 6.0, angle: PI },
            ],
        }
    }
}

impl std::str::FromStr for TrackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oval" => Ok(Self::Oval),
            "hairpin" => Ok(Self::Hairpin),
            other => Err(format!("unknown track '{other}' (expected oval, hairpin)")),
        }
    }
}

/// Samples segments from the origin heading +x every `step` meters.
/// Returns `(x, y, heading)` including both endpoints.
pub fn sample_segments(segments: &[Segment], step: f64) -> Vec<(f64, f64, f64)> {
    let (mut x, mut y, mut h) = (0.0f64, 0.0f64, 0.0f64);
    let mut out = vec![(x, y, h)];
    for seg in segments {
        match *seg {
            Segment::Straight(len) => {
                let n = (len / step).ceil().max(1.0) as usize;
                let (x0, y0) = (x, y);
                for k in 1..=n {
                    let d = len * k as f64 / n as f64;
                    out.push((x0 + d * h.cos(), y0 + d * h.sin(), h));
                }
                x = x0 + len * h.cos();
                y = y0 + len * h.sin();
            }
            Segment::Arc { radius, angle } => {
                let sign = angle.signum();
                let (cx, cy) = (x - sign * radius * h.sin(), y + sign * radius * h.cos());
                let n = (radius * angle.abs() / step).ceil().max(1.0) as usize;
                let h0 = h;
                for k in 1..=n {
                    let hk = h0 + angle * k as f64 / n as f64;
                    out.push((cx + sign * radius * hk.sin(), cy - sign * radius * hk.cos(), hk));
                }
                h = h0 + angle;
                x = cx + sign * radius * h.sin();
                y = cy - sign * radius * h.cos();
            }
        }
    }
    out
}

fn speed_profile(pts: &[(f64, f64)], p: &TrackGenParams) -> Vec<f64> {
    let n = pts.len();
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            let denom = dist(a, b) * dist(b, c) * dist(a, c);
            let kappa = if denom > 0.0 { 2.0 * cross.abs() / denom } else { 0.0 };
            if kappa > 1e-9 {
                p.v_max.min((p.a_lat / kappa).sqrt())
            } else {
                p.v_max
            }
        })
        .collect();
    // Two laps of each pass settle the wrap-around.
    for _ in 0..2 {
        for i in 0..n {
            let j = (i + 1) % n;
            let ds = dist(pts[i], pts[j]);
            v[j] = v[j].min((v[i] * v[i] + 2.0 * p.a_accel * ds).sqrt());
        }
        for i in (0..n).rev() {
            let j = (i + 1) % n;
            let ds = dist(pts[i], pts[j]);
            v[i] = v[i].min((v[j] * v[j] + 2.0 * p.a_brake * ds).sqrt());
        }
    }
    v
}

/// Rectangle attached to one side wall, in the local frame of a centerline point.
struct WallBlock {
    x: f64,
    y: f64,
    heading: f64,
    half_len: f64,
    /// Lateral extent, signed left of the heading.
    lat: (f64, f64),
}

impl WallBlock {
    fn contains(&self, px: f64, py: f64) -> bool {
        let (dx, dy) = (px - self.x, py - self.y);
        let (c, s) = (self.heading.cos(), self.heading.sin());
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= self.half_len && v >= self.lat.0 && v <= self.lat.1
    }
}

/// Blocks at irregular spacing (0.7 to 1.3 times the mean), alternating sides.
fn wall_blocks(dense: &[(f64, f64, f64)], p: &TrackGenParams) -> Vec<WallBlock> {
    if !(p.feature_spacing > 0.0 && p.feature_depth > 0.0) {
        return Vec::new();
    }
    let half = p.width / 2.0;
    let mut out = Vec::new();
    let (mut s, mut next, mut k) = (0.0, p.feature_spacing / 2.0, 0usize);
    for w in dense.windows(2) {
        s += (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        if s >= next {
            let (x, y, heading) = w[1];
            let lat = if k % 2 == 0 {
                (half - p.feature_depth, half + 0.01)
            } else {
                (-half - 0.01, -half + p.feature_depth)
            };
            out.push(WallBlock {
                x,
                y,
                heading,
                half_len: p.feature_length / 2.0,
                lat,
            });
            k += 1;
            next += p.feature_spacing * (1.0 + 0.3 * (k as f64 * 2.39996).sin());
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Track {
    pub name: String,
    pub map: OccupancyGrid,
    /// Closed centerline (last point repeats the first).
    pub centerline: Vec<[f64; 2]>,
    pub raceline: Raceline,
}

impl Track {
    pub fn generate(kind: TrackKind, p: &TrackGenParams) -> Result<Self, TrackError> {
        Self::from_segments(kind.name(), &kind.segments(), p)
    }

    /// Rasterizes a corridor around the segment chain: cells within `width/2`
    /// of the centerline are free, the next `wall` meters occupied, the rest unknown.
    pub fn from_segments(name: &str, segments: &[Segment], p: &TrackGenParams) -> Result<Self, TrackError> {
        let res = p.resolution;
        let dense = sample_segments(segments, res / 2.0);
        let (f, l) = (dense[0], dense[dense.len() - 1]);
        if (f.0 - l.0).hypot(f.1 - l.1) > 1e-6 {
            return Err(TrackError::Invalid(format!("segments do not close: ends at ({:.3}, {:.3})", l.0, l.1)));
        }
        let outer = p.width / 2.0 + p.wall;
        let margin = outer + 0.5;
        let (mut minx, mut miny, mut maxx, mut maxy) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y, _) in &dense {
            minx = minx.min(x);
            miny = miny.min(y);
            maxx = maxx.max(x);
            maxy = maxy.max(y);
        }
        let ox = ((minx - margin) / res).floor() * res;
        let oy = ((miny - margin) / res).floor() * res;
        let w = ((maxx + margin - ox) / res).ceil() as usize;
        let h = ((maxy + margin - oy) / res).ceil() as usize;

        let mut d2 = vec![f64::INFINITY; w * h];
        let reach = (outer / res).ceil() as i64 + 1;
        for &(x, y, _) in &dense {
            let cx = ((x - ox) / res).floor() as i64;
            let cy = ((y - oy) / res).floor() as i64;
            for iy in (cy - reach).max(0)..(cy + reach + 1).min(h as i64) {
                for ix in (cx - reach).max(0)..(cx + reach + 1).min(w as i64) {
                    let px = ox + (ix as f64 + 0.5) * res;
                    let py = oy + (iy as f64 + 0.5) * res;
                    let dd = (px - x).powi(2) + (py - y).powi(2);
                    let k = iy as usize * w + ix as usize;
                    if dd < d2[k] {
                        d2[k] = dd;
                    }
                }
            }
        }
        let (free2, occ2) = ((p.width / 2.0).powi(2), outer.powi(2));
        let blocks = wall_blocks(&dense, p);
        let map = OccupancyGrid::from_fn(w, h, res, Pose2D::new(ox, oy, 0.0), |c: GridCell| {
            let d = d2[c.iy * w + c.ix];
            let (px, py) = (ox + (c.ix as f64 + 0.5) * res, oy + (c.iy as f64 + 0.5) * res);
            if d <= free2 && !blocks.iter().any(|b| b.contains(px, py)) {
                CellState::Free
            } else if d <= occ2 {
                CellState::Occupied
            } else {
                CellState::Unknown
            }
        })?;

        let coarse = sample_segments(segments, p.spacing);
        let mut centerline: Vec<[f64; 2]> = coarse.iter().map(|&(x, y, _)| [x, y]).collect();
        centerline.pop();
        let turn: f64 = segments
            .iter()
            .map(|s| match s {
                Segment::Arc { angle, .. } => *angle,
                Segment::Straight(_) => 0.0,
            })
            .sum();
        // Interior lies to the left of a counter-clockwise loop.
        let side = turn.signum();
        let shifted: Vec<(f64, f64)> = coarse[..coarse.len() - 1]
            .iter()
            .map(|&(x, y, hd)| (x - side * p.raceline_offset * hd.sin(), y + side * p.raceline_offset * hd.cos()))
            .collect();
        let v = speed_profile(&shifted, p);
        let raceline = Raceline::new(shifted.iter().zip(&v).map(|(&(x, y), &v)| RacePoint { x, y, v }).collect())?;
        centerline.push(centerline[0]);

        let track = Self {
            name: name.to_string(),
            map,
            centerline,
            raceline,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        for p in self.raceline.points() {
            if !self.map.is_free_at(p.x, p.y) {
                return Err(TrackError::Invalid(format!("raceline point ({:.3}, {:.3}) is not free", p.x, p.y)));
            }
            if !(p.v > 0.0 && p.v.is_finite()) {
                return Err(TrackError::Invalid(format!("raceline speed {} must be positive", p.v)));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), TrackError> {
        save_map(&self.map, dir, "map")?;
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source: csv::Error| TrackError::Csv { path, source }
        };
        let rl = dir.join("raceline.csv");
        let mut w = csv::Writer::from_path(&rl).map_err(io(&rl))?;
        let pts = self.raceline.points();
        for p in pts.iter().chain(std::iter::once(&pts[0])) {
            w.serialize(p).map_err(io(&rl))?;
        }
        w.flush().map_err(|source| TrackError::Io { path: rl.clone(), source })?;

        let cl = dir.join("centerline.csv");
        let mut w = csv::Writer::from_path(&cl).map_err(io(&cl))?;
        w.write_record(["x", "y"]).map_err(io(&cl))?;
        for p in &self.centerline {
            w.write_record([format!("{}", p[0]), format!("{}", p[1])]).map_err(io(&cl))?;
        }
        w.flush().map_err(|source| TrackError::Io { path: cl.clone(), source })?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, TrackError> {
        let map = load_map_from_meta(&dir.join("map.yaml"))?;
        let rl = dir.join("raceline.csv");
        let points: Vec<RacePoint> = read_rows(&rl)?;
        let first_last = (points.first().copied(), points.last().copied());
        if let (Some(a), Some(b)) = first_last {
            if (a.x - b.x).hypot(a.y - b.y) > map.resolution() {
                return Err(TrackError::Invalid(format!("{} is not closed", rl.display())));
            }
        }
        let raceline = Raceline::new(points)?;
        #[derive(Deserialize)]
        struct Xy {
            x: f64,
            y: f64,
        }
        let centerline = read_rows::<Xy>(&dir.join("centerline.csv"))?
            .into_iter()
            .map(|p| [p.x, p.y])
            .collect();
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "track".into());
        let t = Self {
            name,
            map,
            centerline,
            raceline,
        };
        t.validate()?;
        Ok(t)
    }
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, TrackError> {
    let text = fs::read_to_string(path).map_err(|source| TrackError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|source| TrackError::Csv {
            path: path.to_path_buf(),
            source,
        })
}
