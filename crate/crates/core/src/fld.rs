//! `.fld` binary field files.
//!
//! Layout (all little-endian):
//!
//! | offset | size | content                                  |
//! |-------:|-----:|------------------------------------------|
//! | 0      | 8    | magic `DBARFLD1`                         |
//! | 8      | 4    | `N_x` (u32)                              |
//! | 12     | 4    | `N_y` (u32)                              |
//! | 16     | 1    | space: 0 = physical, 1 = spectral        |
//! | 17     | 8    | `L_x` (f64)                              |
//! | 25     | 8    | `L_y` (f64)                              |
//! | 33     | 31   | zero padding                             |
//! | 64     | 16·N_x·N_y | `(re, im)` f64 pairs, row-major, x slow |

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid2D, Space};

pub const MAGIC: &[u8; 8] = b"DBARFLD1";
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldFileHeader {
    pub nx: u32,
    pub ny: u32,
    pub space: Space,
    pub lx: f64,
    pub ly: f64,
}

impl FieldFileHeader {
    pub fn payload_len(&self) -> usize {
        16 * self.nx as usize * self.ny as usize
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(MAGIC);
        out[8..12].copy_from_slice(&self.nx.to_le_bytes());
        out[12..16].copy_from_slice(&self.ny.to_le_bytes());
        out[16] = match self.space {
            Space::Physical => 0,
            Space::Spectral => 1,
        };
        out[17..25].copy_from_slice(&self.lx.to_le_bytes());
        out[25..33].copy_from_slice(&self.ly.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::FieldFormat(format!("header truncated to {} bytes", bytes.len())));
        }
        if &bytes[0..8] != MAGIC {
            return Err(Error::FieldFormat("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let space = match bytes[16] {
            0 => Space::Physical,
            1 => Space::Spectral,
            other => return Err(Error::FieldFormat(format!("unknown space tag {other}"))),
        };
        if bytes[33..HEADER_LEN].iter().any(|&b| b != 0) {
            return Err(Error::FieldFormat("non-zero header padding".into()));
        }
        Ok(Self {
            nx: u32_at(8),
            ny: u32_at(12),
            space,
            lx: f64_at(17),
            ly: f64_at(25),
        })
    }
}

/// Serializes a field into the `.fld` byte layout.
pub fn encode(field: &ComplexField<f64>) -> Vec<u8> {
    let grid = field.grid();
    let header = FieldFileHeader {
        nx: grid.nx() as u32,
        ny: grid.ny() as u32,
        space: field.space(),
        lx: grid.lx(),
        ly: grid.ly(),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + header.payload_len());
    out.extend_from_slice(&header.to_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

/// Parses `.fld` bytes into a header and row-major values.
pub fn decode_raw(bytes: &[u8]) -> Result<(FieldFileHeader, Vec<Complex<f64>>)> {
    let header = FieldFileHeader::from_bytes(bytes)?;
    let expected = HEADER_LEN + header.payload_len();
    if bytes.len() != expected {
        return Err(Error::FieldFormat(format!(
            "file has {} bytes, expected {expected} for {}x{}",
            bytes.len(),
            header.nx,
            header.ny
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| {
            Complex::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((header, values))
}

/// Parses `.fld` bytes, building a fresh grid from the header.
pub fn decode(bytes: &[u8]) -> Result<ComplexField<f64>> {
    let (h, values) = decode_raw(bytes)?;
    let grid = Grid2D::shared(h.lx, h.ly, h.nx as usize, h.ny as usize)?;
    Ok(ComplexField::new(grid, h.space, values))
}

/// Parses `.fld` bytes onto an existing grid, which must match the header.
pub fn decode_on(bytes: &[u8], grid: &Arc<Grid2D<f64>>) -> Result<ComplexField<f64>> {
    let (h, values) = decode_raw(bytes)?;
    if h.nx as usize != grid.nx() || h.ny as usize != grid.ny() || h.lx != grid.lx() || h.ly != grid.ly() {
        return Err(Error::FieldFormat(format!(
            "file grid {}x{} (L = {}, {}) differs from {}x{} (L = {}, {})",
            h.nx,
            h.ny,
            h.lx,
            h.ly,
            grid.nx(),
            grid.ny(),
            grid.lx(),
            grid.ly()
        )));
    }
    Ok(ComplexField::new(grid.clone(), h.space, values))
}

pub fn write_field(path: impl AsRef<Path>, field: &ComplexField<f64>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode(field))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ComplexField<f64>> {
    decode(&fs::read(path)?)
}
