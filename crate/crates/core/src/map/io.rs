use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat, Luma};
use serde::{Deserialize, Deserializer, Serialize};

use super::{CellState, MapError, OccupancyGrid};
use crate::geometry::Pose2D;

pub const DEFAULT_OCCUPIED_THRESH: f64 = 0.65;
pub const DEFAULT_FREE_THRESH: f64 = 0.196;

const PIXEL_FREE: u8 = 254;
const PIXEL_OCCUPIED: u8 = 0;
const PIXEL_UNKNOWN: u8 = 205;

/// YAML metadata sidecar for a map image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    /// Image path, relative to the metadata file.
    pub image: String,
    pub resolution: f64,
    /// `[x, y, yaw]` of the lower-left pixel in the world frame.
    pub origin: [f64; 3],
    #[serde(default = "default_occupied")]
    pub occupied_thresh: f64,
    #[serde(default = "default_free")]
    pub free_thresh: f64,
    #[serde(default, deserialize_with = "bool_or_int")]
    pub negate: bool,
}

fn default_occupied() -> f64 {
    DEFAULT_OCCUPIED_THRESH
}

fn default_free() -> f64 {
    DEFAULT_FREE_THRESH
}

fn bool_or_int<'de, D: Deserializer<'de>>(de: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(i64),
    }
    Ok(match Flag::deserialize(de)? {
        Flag::Bool(b) => b,
        Flag::Int(i) => i != 0,
    })
}

impl MapMeta {
    pub fn validate(&self, path: &Path) -> Result<(), MapError> {
        let (occ, free) = (self.occupied_thresh, self.free_thresh);
        if !(0.0..=1.0).contains(&occ) || !(0.0..=1.0).contains(&free) || free >= occ {
            return Err(MapError::Thresholds { occupied: occ, free });
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(MapError::Metadata {
                path: path.to_path_buf(),
                message: format!("resolution must be positive, got {}", self.resolution),
            });
        }
        Ok(())
    }

    pub fn classify(&self, pixel: u8) -> CellState {
        let p = f64::from(pixel);
        let occupancy = if self.negate { p / 255.0 } else { (255.0 - p) / 255.0 };
        if occupancy >= self.occupied_thresh {
            CellState::Occupied
        } else if occupancy <= self.free_thresh {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }
}

fn read_meta(meta_path: &Path) -> Result<MapMeta, MapError> {
    let text = fs::read_to_string(meta_path).map_err(|source| MapError::Io {
        path: meta_path.to_path_buf(),
        source,
    })?;
    let meta: MapMeta = serde_yaml::from_str(&text).map_err(|e| MapError::Metadata {
        path: meta_path.to_path_buf(),
        message: e.to_string(),
    })?;
    meta.validate(meta_path)?;
    Ok(meta)
}

/// Loads a map from an explicit image path and metadata file. The `image`
/// entry of the metadata is ignored in favour of `image_path`.
pub fn load_map(image_path: &Path, meta_path: &Path) -> Result<OccupancyGrid, MapError> {
    let meta = read_meta(meta_path)?;
    grid_from_image(image_path, &meta)
}

/// Loads a map from its metadata file, resolving the image relative to it.
pub fn load_map_from_meta(meta_path: &Path) -> Result<OccupancyGrid, MapError> {
    let meta = read_meta(meta_path)?;
    let image_path = meta_path.parent().unwrap_or_else(|| Path::new(".")).join(&meta.image);
    grid_from_image(&image_path, &meta)
}

fn grid_from_image(image_path: &Path, meta: &MapMeta) -> Result<OccupancyGrid, MapError> {
    if !image_path.exists() {
        return Err(MapError::Io {
            path: image_path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "map image not found"),
        });
    }
    let img = image::open(image_path).map_err(|source| MapError::Image {
        path: image_path.to_path_buf(),
        source,
    })?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(MapError::NonGrayscale {
                path: image_path.to_path_buf(),
                color: format!("{:?}", other.color()),
            })
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let origin = Pose2D::new(meta.origin[0], meta.origin[1], meta.origin[2]);
    OccupancyGrid::from_fn(w, h, meta.resolution, origin, |cell| {
        let row = (h - 1 - cell.iy) as u32;
        meta.classify(gray.get_pixel(cell.ix as u32, row).0[0])
    })
}

/// Writes `<dir>/<stem>.pgm` and `<dir>/<stem>.yaml`; returns the metadata path.
pub fn save_map(grid: &OccupancyGrid, dir: &Path, stem: &str) -> Result<PathBuf, MapError> {
    fs::create_dir_all(dir).map_err(|source| MapError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let (w, h) = (grid.width(), grid.height());
    let mut img = GrayImage::new(w as u32, h as u32);
    for (i, state) in grid.cells().iter().enumerate() {
        let (ix, iy) = (i % w, i / w);
        let px = match state {
            CellState::Free => PIXEL_FREE,
            CellState::Occupied => PIXEL_OCCUPIED,
            CellState::Unknown => PIXEL_UNKNOWN,
        };
        img.put_pixel(ix as u32, (h - 1 - iy) as u32, Luma([px]));
    }
    let image_name = format!("{stem}.pgm");
    let image_path = dir.join(&image_name);
    img.save_with_format(&image_path, ImageFormat::Pnm)
        .map_err(|source| MapError::Image {
            path: image_path.clone(),
            source,
        })?;
    let origin = grid.origin();
    let meta = MapMeta {
        image: image_name,
        resolution: grid.resolution(),
        origin: [origin.x(), origin.y(), origin.theta()],
        occupied_thresh: DEFAULT_OCCUPIED_THRESH,
        free_thresh: DEFAULT_FREE_THRESH,
        negate: false,
    };
    let meta_path = dir.join(format!("{stem}.yaml"));
    let text = serde_yaml::to_string(&meta).map_err(|e| MapError::Metadata {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&meta_path, text).map_err(|source| MapError::Io {
        path: meta_path.clone(),
        source,
    })?;
    Ok(meta_path)
}
