//! `.fgrid` snapshot files: little-endian `{L: f64, N: u32}` header, then `N³` interleaved
//! `(re, im)` f64 pairs, row-major with z fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{NelsonError, Result};
use crate::fields::{FieldK, WaveX};
use crate::grid::GridSpec;

pub fn write_raw<W: Write>(mut w: W, grid: &GridSpec, values: &[Complex64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(NelsonError::Config("snapshot length does not match grid".into()));
    }
    w.write_all(&grid.length.to_le_bytes())?;
    w.write_all(&(grid.points as u32).to_le_bytes())?;
    for z in values {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw<R: Read>(mut r: R) -> Result<(GridSpec, Vec<Complex64>)> {
    let mut b8 = [0u8; 8];
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b8)?;
    let length = f64::from_le_bytes(b8);
    r.read_exact(&mut b4)?;
    let points = u32::from_le_bytes(b4) as usize;
    let grid = GridSpec::new(length, points)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let im = f64::from_le_bytes(b8);
        values.push(Complex64::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(NelsonError::Config("trailing bytes in snapshot".into()));
    }
    Ok((grid, values))
}

pub fn save<P: AsRef<Path>>(path: P, grid: &GridSpec, values: &[Complex64]) -> Result<()> {
    write_raw(BufWriter::new(File::create(path)?), grid, values)
}

pub fn load<P: AsRef<Path>>(path: P) -> Result<(GridSpec, Vec<Complex64>)> {
    read_raw(BufReader::new(File::open(path)?))
}

pub fn save_wave<P: AsRef<Path>>(path: P, psi: &WaveX) -> Result<()> {
    save(path, &psi.grid, &psi.values)
}

pub fn save_field<P: AsRef<Path>>(path: P, phi: &FieldK) -> Result<()> {
    save(path, &phi.grid, &phi.values)
}

pub fn load_wave<P: AsRef<Path>>(path: P) -> Result<WaveX> {
    let (g, v) = load(path)?;
    WaveX::from_values(g, v)
}

pub fn load_field<P: AsRef<Path>>(path: P) -> Result<FieldK> {
    let (g, v) = load(path)?;
    FieldK::from_values(g, v)
}
