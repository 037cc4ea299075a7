use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ScanMeta;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("scanline count must be at least {min}, got {k}")]
    TooFew { k: usize, min: usize },
    #[error("requested {k} scanlines but the scan has {available} beams")]
    TooMany { k: usize, available: usize },
    #[error("corridor aspect ratio must be positive and finite, got {0}")]
    Aspect(f64),
    #[error("boxed layout needs straight ahead inside the field of view")]
    ForwardNotVisible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    Uniform,
    #[default]
    Boxed,
}

/// Selected beams: strictly increasing indices and their sensor-frame bearings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanlineLayout {
    indices: Vec<usize>,
    bearings: Vec<f64>,
}

impl ScanlineLayout {
    /// Layout from explicit indices; they are sorted and deduplicated.
    pub fn from_indices(meta: &ScanMeta, mut indices: Vec<usize>) -> Result<Self, LayoutError> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= meta.beam_count {
                return Err(LayoutError::TooMany {
                    k: last + 1,
                    available: meta.beam_count,
                });
            }
        }
        let bearings = indices.iter().map(|&i| meta.bearing(i)).collect();
        Ok(Self { indices, bearings })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn bearings(&self) -> &[f64] {
        &self.bearings
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `k` beams at a constant index stride `n/k`, starting from the first beam.
pub fn layout_uniform(meta: &ScanMeta, k: usize) -> Result<ScanlineLayout, LayoutError> {
    if k == 0 {
        return Err(LayoutError::TooFew { k, min: 1 });
    }
    let n = meta.beam_count;
    if k > n {
        return Err(LayoutError::TooMany { k, available: n });
    }
    let indices = (0..k).map(|i| i * n / k).collect();
    ScanlineLayout::from_indices(meta, indices)
}

/// Beams whose intersections with a corridor-shaped rectangle are evenly
/// spaced along its visible perimeter.
///
/// The rectangle has unit length along the sensor's forward axis and width
/// `aspect`, centered on the sensor. Points are placed at arc-length spacing
/// `visible_perimeter / k`, starting at the forward midpoint and alternating
/// left/right, then snapped to the nearest unused beam.
pub fn layout_boxed(meta: &ScanMeta, k: usize, aspect: f64) -> Result<ScanlineLayout, LayoutError> {
    if k < 2 {
        return Err(LayoutError::TooFew { k, min: 2 });
    }
    if !(aspect.is_finite() && aspect > 0.0) {
        return Err(LayoutError::Aspect(aspect));
    }
    let n = meta.beam_count;
    if k > n {
        return Err(LayoutError::TooMany { k, available: n });
    }
    let rect = Corridor::new(aspect);
    let circular = meta.is_full_circle();
    let (s_min, s_max) = if circular {
        (-rect.perimeter / 2.0, rect.perimeter / 2.0)
    } else {
        let (lo, hi) = (meta.angle_min, meta.angle_max());
        if !(lo <= 0.0 && hi >= 0.0) {
            return Err(LayoutError::ForwardNotVisible);
        }
        (rect.arc_at_bearing(lo.max(-PI)), rect.arc_at_bearing(hi.min(PI)))
    };
    let spacing = (s_max - s_min) / k as f64;
    let eps = 1e-12 * rect.perimeter;

    let mut arcs = Vec::with_capacity(k);
    arcs.push(0.0);
    let mut j = 1usize;
    while arcs.len() < k {
        let left = j as f64 * spacing;
        let right = -left;
        let mut added = false;
        if left <= s_max + eps {
            arcs.push(left);
            added = true;
        }
        let right_ok = if circular { right > s_min + eps } else { right >= s_min - eps };
        if arcs.len() < k && right_ok {
            arcs.push(right);
            added = true;
        }
        if !added {
            break;
        }
        j += 1;
    }

    let mut taken = vec![false; n];
    let mut indices = Vec::with_capacity(k);
    for s in arcs {
        let (x, y) = rect.point_at(s);
        let bearing = y.atan2(x);
        let raw = ((bearing - meta.angle_min) / meta.angle_increment).round() as i64;
        let idx = if circular {
            raw.rem_euclid(n as i64) as usize
        } else {
            raw.clamp(0, n as i64 - 1) as usize
        };
        if let Some(free) = next_free(&taken, idx, circular) {
            taken[free] = true;
            indices.push(free);
        }
    }
    ScanlineLayout::from_indices(meta, indices)
}

fn next_free(taken: &[bool], start: usize, circular: bool) -> Option<usize> {
    let n = taken.len();
    if circular {
        return (0..n).map(|o| (start + o) % n).find(|&i| !taken[i]);
    }
    (start..n).find(|&i| !taken[i]).or_else(|| (0..start).rev().find(|&i| !taken[i]))
}

/// Rectangle of half-length `a` (forward) and half-width `b`, walked
/// counter-clockwise from the forward midpoint.
struct Corridor {
    a: f64,
    b: f64,
    perimeter: f64,
}

impl Corridor {
    fn new(aspect: f64) -> Self {
        let (a, b) = (0.5, aspect / 2.0);
        Self {
            a,
            b,
            perimeter: 4.0 * (a + b),
        }
    }

    /// Point at signed arc length `s` (positive = counter-clockwise).
    fn point_at(&self, s: f64) -> (f64, f64) {
        let (a, b) = (self.a, self.b);
        let half = self.perimeter / 2.0;
        let mut s = s.rem_euclid(self.perimeter);
        let mirror = s > half;
        if mirror {
            s = self.perimeter - s;
        }
        let (x, y) = if s <= b {
            (a, s)
        } else if s <= b + 2.0 * a {
            (a - (s - b), b)
        } else {
            (-a, b - (s - b - 2.0 * a))
        };
        if mirror {
            (x, -y)
        } else {
            (x, y)
        }
    }

    /// Signed arc length where a ray at `bearing` meets the rectangle.
    fn arc_at_bearing(&self, bearing: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let (s, c) = bearing.sin_cos();
        let t = (a / c.abs()).min(b / s.abs());
        let (x, y) = (t * c, (t * s).abs());
        let arc = if (x - a).abs() <= 1e-12 {
            y
        } else if (y - b).abs() <= 1e-12 {
            b + (a - x)
        } else {
            b + 2.0 * a + (b - y)
        };
        if s < 0.0 {
            -arc
        } else {
            arc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn hokuyo() -> ScanMeta {
        ScanMeta::centered(1080, 270f64.to_radians(), 10.0)
    }

    #[test]
    fn uniform_stride() {
        let m = hokuyo();
        let all = layout_uniform(&m, 1080).unwrap();
        assert_eq!(all.indices(), (0..1080).collect::<Vec<_>>().as_slice());
        let tenth = layout_uniform(&m, 108).unwrap();
        assert!(tenth.indices().iter().enumerate().all(|(i, &idx)| idx == 10 * i));
        let four = layout_uniform(&m, 4).unwrap();
        assert_eq!(four.indices(), &[0, 270, 540, 810]);
        let step = four.bearings()[1] - four.bearings()[0];
        assert!((step - 270.0 * m.angle_increment).abs() < 1e-12);
        assert!(four.bearings().windows(2).all(|w| (w[1] - w[0] - step).abs() < 1e-12));
        assert_eq!(layout_uniform(&m, 0), Err(LayoutError::TooFew { k: 0, min: 1 }));
        assert!(matches!(layout_uniform(&m, 1081), Err(LayoutError::TooMany { .. })));
    }

    #[test]
    fn square_full_circle_hits_midpoints_and_corners() {
        let m = ScanMeta {
            angle_min: -PI,
            angle_increment: TAU / 360.0,
            beam_count: 360,
            range_max: 10.0,
        };
        let l = layout_boxed(&m, 8, 1.0).unwrap();
        let mut degs: Vec<i64> = l.bearings().iter().map(|b| b.to_degrees().round() as i64).collect();
        degs.sort();
        assert_eq!(degs, vec![-180, -135, -90, -45, 0, 45, 90, 135]);
    }

    #[test]
    fn corridor_concentrates_beams_forward() {
        let m = hokuyo();
        let within = |l: &ScanlineLayout| l.bearings().iter().filter(|b| b.abs() <= 30f64.to_radians()).count();
        let boxed = layout_boxed(&m, 16, 0.25).unwrap();
        let uniform = layout_uniform(&m, 16).unwrap();
        assert!(within(&boxed) > within(&uniform), "{} vs {}", within(&boxed), within(&uniform));
        let forward = boxed.bearings().iter().filter(|b| b.abs() < PI / 2.0).count();
        assert!(forward * 2 >= boxed.len());
    }

    #[test]
    fn straight_ahead_always_selected() {
        let m = hokuyo();
        for k in [2, 3, 17, 60, 200] {
            for aspect in [0.1, 0.3, 1.0, 4.0] {
                let l = layout_boxed(&m, k, aspect).unwrap();
                assert_eq!(l.len(), k);
                assert!(l.bearings().iter().any(|b| b.abs() <= m.angle_increment / 2.0 + 1e-12));
                assert!(l.indices().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn wide_box_pushes_beams_sideways() {
        // A wide box puts most of its visible perimeter on the front and back
        // walls far from the sensor axis, so beams bunch toward ±90°.
        let m = hokuyo();
        let l = layout_boxed(&m, 60, 50.0).unwrap();
        let lateral = l.bearings().iter().filter(|b| (b.abs() - PI / 2.0).abs() < 20f64.to_radians()).count();
        let u = layout_uniform(&m, 60).unwrap();
        let lateral_u = u.bearings().iter().filter(|b| (b.abs() - PI / 2.0).abs() < 20f64.to_radians()).count();
        assert!(lateral > lateral_u);
    }

    #[test]
    fn dense_layout_deduplicates() {
        let m = ScanMeta::centered(40, 270f64.to_radians(), 10.0);
        let l = layout_boxed(&m, 40, 0.2).unwrap();
        assert_eq!(l.indices(), (0..40).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn boxed_errors() {
        let m = hokuyo();
        assert_eq!(layout_boxed(&m, 1, 0.3), Err(LayoutError::TooFew { k: 1, min: 2 }));
        assert_eq!(layout_boxed(&m, 10, 0.0), Err(LayoutError::Aspect(0.0)));
        assert!(matches!(layout_boxed(&m, 2000, 0.3), Err(LayoutError::TooMany { .. })));
        let rear = ScanMeta {
            angle_min: 1.0,
            ..m
        };
        assert_eq!(layout_boxed(&rear, 10, 0.3), Err(LayoutError::ForwardNotVisible));
    }

    #[test]
    fn corridor_arc_inverse() {
        let c = Corridor::new(0.3);
        for deg in (-179..=179).step_by(7) {
            let b = f64::from(deg).to_radians();
            let (x, y) = c.point_at(c.arc_at_bearing(b));
            assert!((y.atan2(x) - b).abs() < 1e-9, "{deg}");
        }
    }
}
