use super::{CellState, OccupancyGrid};

/// Exact Euclidean distance (meters) from every cell center to the nearest
/// OCCUPIED cell center, computed with the separable two-pass lower-envelope
/// transform (columns, then rows).
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    frame: super::GridFrame,
    meters: Vec<f64>,
}

impl DistanceField {
    pub fn new(grid: &OccupancyGrid) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let mut sq: Vec<f64> = grid
            .cells()
            .iter()
            .map(|s| if *s == CellState::Occupied { 0.0 } else { f64::INFINITY })
            .collect();

        let mut f = vec![0.0; w.max(h)];
        let mut out = vec![0.0; w.max(h)];
        for ix in 0..w {
            for iy in 0..h {
                f[iy] = sq[iy * w + ix];
            }
            transform_1d(&f[..h], &mut out[..h]);
            for iy in 0..h {
                sq[iy * w + ix] = out[iy];
            }
        }
        for iy in 0..h {
            f[..w].copy_from_slice(&sq[iy * w..(iy + 1) * w]);
            transform_1d(&f[..w], &mut out[..w]);
            sq[iy * w..(iy + 1) * w].copy_from_slice(&out[..w]);
        }
        let resolution = grid.resolution();
        let meters = sq.into_iter().map(|d| d.sqrt() * resolution).collect();
        Self {
            width: w,
            height: h,
            resolution,
            frame: *grid.frame(),
            meters,
        }
    }

    pub fn at_cell(&self, ix: usize, iy: usize) -> f64 {
        self.meters[iy * self.width + ix]
    }

    /// Distance at the cell containing a world point; `None` outside the map.
    pub fn distance_at(&self, x: f64, y: f64) -> Option<f64> {
        self.frame
            .world_to_grid(x, y)
            .map(|c| self.meters[c.iy * self.width + c.ix])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }
}

/// 1D squared-distance transform of a sampled function (lower envelope of parabolas).
fn transform_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    // Skip leading infinite samples: they contribute no parabola.
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k = 0usize;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *out = diff * diff + f[p];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use rand::{Rng, SeedableRng};

    fn brute(grid: &OccupancyGrid, ix: usize, iy: usize) -> f64 {
        let w = grid.width();
        grid.cells()
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == CellState::Occupied)
            .map(|(i, _)| {
                let (ox, oy) = ((i % w) as f64, (i / w) as f64);
                (ox - ix as f64).hypot(oy - iy as f64)
            })
            .fold(f64::INFINITY, f64::min)
            * grid.resolution()
    }

    #[test]
    fn matches_brute_force_on_random_maps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..5 {
            let density = [0.01, 0.05, 0.2, 0.5, 0.9][trial];
            let g = OccupancyGrid::from_fn(23, 17, 0.05, Pose2D::identity(), |_| {
                if rng.random_bool(density) {
                    CellState::Occupied
                } else if rng.random_bool(0.1) {
                    CellState::Unknown
                } else {
                    CellState::Free
                }
            })
            .unwrap();
            let df = DistanceField::new(&g);
            for iy in 0..17 {
                for ix in 0..23 {
                    let want = brute(&g, ix, iy);
                    let got = df.at_cell(ix, iy);
                    assert!((want - got).abs() < 1e-9 || (want.is_infinite() && got.is_infinite()));
                }
            }
        }
    }

    #[test]
    fn no_obstacles_is_infinite() {
        let g = OccupancyGrid::filled(4, 4, 0.1, Pose2D::identity(), CellState::Free).unwrap();
        let df = DistanceField::new(&g);
        assert!(df.at_cell(2, 2).is_infinite());
        assert_eq!(df.distance_at(10.0, 10.0), None);
    }
}
