//! Flat binary grid files.
//!
//! Layout, all little-endian: `nx, ny, nz` as u64, then `dx, dy, dz` and the
//! three origin coordinates as f64, then six f64 values per cell in
//! x-fastest order. Conductivity models store `[xx, yy, zz, xy, xz, yz]`;
//! complex vector fields store `[Re Ex, Im Ex, Re Ey, Im Ey, Re Ez, Im Ez]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Grid;
use crate::error::{Error, Result};

pub const GRID_HEADER_BYTES: usize = 72;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridFileHeader {
    pub grid: Grid,
}

pub fn write_grid_file(path: impl AsRef<Path>, grid: &Grid, cells: impl IntoIterator<Item = [f64; 6]>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_grid_to(&mut w, grid, cells)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn write_grid_to(w: &mut impl Write, grid: &Grid, cells: impl IntoIterator<Item = [f64; 6]>) -> Result<()> {
    for n in grid.dims() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in grid.spacing().into_iter().chain(grid.origin) {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut count = 0usize;
    for cell in cells {
        for v in cell {
            w.write_all(&v.to_le_bytes())?;
        }
        count += 1;
    }
    if count != grid.num_cells() {
        return Err(Error::Dimension(format!("wrote {count} cells for a grid of {}", grid.num_cells())));
    }
    Ok(())
}

pub fn read_grid_file(path: impl AsRef<Path>) -> Result<(GridFileHeader, Vec<[f64; 6]>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_grid_bytes(&bytes)
}

pub(crate) fn parse_grid_bytes(bytes: &[u8]) -> Result<(GridFileHeader, Vec<[f64; 6]>)> {
    if bytes.len() < GRID_HEADER_BYTES {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().unwrap() };
    let dims = [0, 1, 2].map(|i| u64::from_le_bytes(word(i)) as usize);
    let spacing = [3, 4, 5].map(|i| f64::from_le_bytes(word(i)));
    let origin = [6, 7, 8].map(|i| f64::from_le_bytes(word(i)));
    let grid = Grid::new(dims, spacing, origin).map_err(|e| Error::Format(e.to_string()))?;
    let n = grid.num_cells();
    let expected = GRID_HEADER_BYTES + 48 * n;
    if bytes.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let body = &bytes[GRID_HEADER_BYTES..];
    let cells = body
        .chunks_exact(48)
        .map(|c| {
            let mut out = [0.0; 6];
            for (k, v) in out.iter_mut().enumerate() {
                *v = f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().unwrap());
            }
            out
        })
        .collect();
    Ok((GridFileHeader { grid }, cells))
}
