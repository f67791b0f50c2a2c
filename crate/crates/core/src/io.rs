//! Binary field files and their JSON sidecars.
//!
//! Layout (all little-endian): magic `CGOF`, version `u32 = 1`, `N: u32`,
//! `L: f64`, frame as 9 `f64` (rows `nu`, `mu`, `e3`), then `N^3` samples as
//! interleaved `(re, im)` `f64`, row-major with axis 0 slowest.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::{Frame, Grid};

pub const FIELD_MAGIC: &[u8; 4] = b"CGOF";
pub const FIELD_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 9 * 8;

pub fn write_field(f: &ComplexField) -> Vec<u8> {
    let grid = f.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * grid.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.points_per_axis() as u32).to_le_bytes());
    out.extend_from_slice(&grid.half_width().to_le_bytes());
    for axis in grid.frame().axes {
        for c in axis {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    write_complex_block(&mut out, f.samples());
    out
}

pub(crate) fn write_complex_block(out: &mut Vec<u8>, values: &[Complex64]) {
    for z in values {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let need = self.pos + n;
        if need > self.bytes.len() {
            return Err(Error::Truncated {
                need,
                have: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..need];
        self.pos = need;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn complex_block(&mut self, count: usize) -> Result<Vec<Complex64>> {
        let raw = self.take(16 * count)?;
        Ok(raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    }
}

pub fn read_field(bytes: &[u8]) -> Result<ComplexField> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != FIELD_MAGIC {
        return Err(Error::BadMagic { expected: "CGOF" });
    }
    let version = r.u32()?;
    if version != FIELD_VERSION {
        return Err(Error::BadVersion(version));
    }
    let n = r.u32()? as usize;
    let l = r.f64()?;
    let mut axes = [[0.0; 3]; 3];
    for axis in axes.iter_mut() {
        for c in axis.iter_mut() {
            *c = r.f64()?;
        }
    }
    let grid = Grid::new(l, n, Frame { axes })?;
    let samples = r.complex_block(grid.len())?;
    ComplexField::from_samples(&grid, samples)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Write `<name>.cgof` plus `<name>.meta.json` with free-form provenance.
pub fn save_field(path: &Path, f: &ComplexField, meta: &serde_json::Value) -> Result<()> {
    fs::write(path, write_field(f))?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(meta)?)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ComplexField> {
    read_field(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_grid() -> Grid {
        Grid::new(1.5, 4, Frame::identity()).unwrap()
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(vals in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 64)) {
            let g = small_grid();
            let f = ComplexField::from_samples(
                &g,
                vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect(),
            ).unwrap();
            let back = read_field(&write_field(&f)).unwrap();
            prop_assert_eq!(back.grid(), f.grid());
            for (a, b) in back.samples().iter().zip(f.samples()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = write_field(&ComplexField::zeros(&small_grid()));
        bytes[0] = b'X';
        assert!(matches!(read_field(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn header_only_is_truncated() {
        let bytes = write_field(&ComplexField::zeros(&small_grid()));
        assert!(matches!(
            read_field(&bytes[..HEADER_LEN]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = write_field(&ComplexField::zeros(&small_grid()));
        bytes[4] = 9;
        assert!(matches!(read_field(&bytes), Err(Error::BadVersion(9))));
    }
}
