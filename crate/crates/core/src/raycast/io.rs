//! Versioned binary LUT files.
//!
//! Layout (all little-endian):
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `RMCLLUT\0` |
//! | 4     | version (u32) |
//! | 4×3   | nx, ny, ntheta (u32) |
//! | 8×7   | max_range, resolution, origin x, origin y, origin θ, theta0, quantum (f64) |
//! | 2·n   | ranges (u16), index `(iy·nx + ix)·ntheta + bin` |

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::lut::{quantum_for, RangeLut};
use super::RaycastError;
use crate::geometry::Pose2D;
use crate::map::GridFrame;

pub const LUT_MAGIC: [u8; 8] = *b"RMCLLUT\0";
pub const LUT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 12 + 56;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RaycastError + '_ {
    move |source| RaycastError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the table to `path` atomically: a temporary sibling is written and
/// renamed into place, so a failed write never leaves a partial file.
pub fn write_lut(lut: &RangeLut, path: &Path) -> Result<(), RaycastError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tmp = dir.join(format!(
        ".{}.partial",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("lut")
    ));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(&LUT_MAGIC)?;
        w.write_all(&LUT_VERSION.to_le_bytes())?;
        for n in [lut.frame.width, lut.frame.height, lut.ntheta] {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        let o = lut.frame.origin;
        for v in [lut.max_range, lut.frame.resolution, o.x(), o.y(), o.theta(), lut.theta0, lut.quantum] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &lut.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()
    })();
    match result {
        Ok(()) => fs::rename(&tmp, path).map_err(io_err(path)),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(io_err(path)(e))
        }
    }
}

pub fn read_lut(path: &Path) -> Result<RangeLut, RaycastError> {
    let bad = |message: String| RaycastError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| bad("file shorter than header".into()))?;
    if header[..8] != LUT_MAGIC {
        return Err(bad("bad magic bytes".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let f64_at = |i: usize| f64::from_le_bytes(header[i..i + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != LUT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let (nx, ny, ntheta) = (u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
    let max_range = f64_at(24);
    let resolution = f64_at(32);
    let origin = Pose2D::new(f64_at(40), f64_at(48), f64_at(56));
    let theta0 = f64_at(64);
    let quantum = f64_at(72);
    if ntheta == 0 || (quantum - quantum_for(resolution)).abs() > 1e-15 {
        return Err(bad("inconsistent header".into()));
    }
    let frame = GridFrame::new(nx, ny, resolution, origin).map_err(|e| bad(e.to_string()))?;
    let n = nx * ny * ntheta;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(io_err(path))?;
    if payload.len() != n * 2 {
        return Err(bad(format!("expected {} payload bytes, found {}", n * 2, payload.len())));
    }
    let values = payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(RangeLut {
        frame,
        ntheta,
        max_range,
        theta0,
        quantum,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{CellState, OccupancyGrid};
    use crate::raycast::{build_lut, LutParams};

    fn small_lut() -> RangeLut {
        let g = OccupancyGrid::from_fn(12, 9, 0.05, Pose2D::new(0.5, -0.25, 0.1), |c| {
            if c.ix == 7 {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .unwrap();
        build_lut(
            &g,
            &LutParams {
                ntheta: 16,
                max_range: 2.0,
                memory_cap_bytes: 1 << 20,
            },
        )
        .unwrap()
        .0
    }

    #[test]
    fn roundtrip_and_bitwise_stable() {
        let dir = tempfile::tempdir().unwrap();
        let lut = small_lut();
        let a = dir.path().join("a.lut");
        let b = dir.path().join("b.lut");
        write_lut(&lut, &a).unwrap();
        write_lut(&small_lut(), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let back = read_lut(&a).unwrap();
        assert_eq!(back, lut);
        assert_eq!(fs::read(&a).unwrap()[..8], LUT_MAGIC);
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.lut");
        write_lut(&small_lut(), &p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 1);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_lut(&p), Err(RaycastError::Format { .. })));
        bytes[0] = b'X';
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_lut(&p), Err(RaycastError::Format { .. })));
        assert!(matches!(read_lut(&dir.path().join("none")), Err(RaycastError::Io { .. })));
    }
}
