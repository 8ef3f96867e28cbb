//! Kernel dumps: one line of JSON header, then `h`, `b`, `gram`, `pair` as little-endian
//! `f64` pairs (re, im) in column-major order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ModeSet, QuadKernel};
use crate::config::Tolerances;
use crate::error::{NelsonError, Result};
use crate::grid::GridSpec;
use crate::linalg::C;

pub const DUMP_FORMAT: &str = "nelson-kernel-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDumpHeader {
    pub format: String,
    pub grid: GridSpec,
    pub modes: usize,
    pub radius: f64,
    pub integers: Vec<[i64; 3]>,
    pub k_cut: f64,
    pub lambda: f64,
    pub c: f64,
    pub max_residual: f64,
    pub solves: usize,
    pub tolerances: Tolerances,
}

pub fn write_kernel_dump(
    path: &Path,
    modes: &ModeSet,
    kernel: &QuadKernel,
    k_cut: f64,
    lambda: f64,
    tol: &Tolerances,
) -> Result<KernelDumpHeader> {
    let header = KernelDumpHeader {
        format: DUMP_FORMAT.into(),
        grid: modes.grid,
        modes: modes.len(),
        radius: modes.radius,
        integers: modes.integers.clone(),
        k_cut,
        lambda,
        c: kernel.c,
        max_residual: kernel.max_residual,
        solves: kernel.solves,
        tolerances: *tol,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for m in [&kernel.h, &kernel.b, &kernel.gram, &kernel.pair] {
        for z in m.iter() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(header)
}

pub fn read_kernel_dump(path: &Path) -> Result<(KernelDumpHeader, QuadKernel)> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: KernelDumpHeader = serde_json::from_str(line.trim_end())?;
    if header.format != DUMP_FORMAT {
        return Err(NelsonError::Config(format!("unknown dump format {:?}", header.format)));
    }
    let n = header.modes;
    let mut read_matrix = || -> Result<DMatrix<C>> {
        let mut buf = vec![0u8; 16 * n * n];
        input.read_exact(&mut buf)?;
        let vals = buf.chunks_exact(16).map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C::new(re, im)
        });
        Ok(DMatrix::from_iterator(n, n, vals))
    };
    let h = read_matrix()?;
    let b = read_matrix()?;
    let gram = read_matrix()?;
    let pair = read_matrix()?;
    let kernel = QuadKernel {
        h,
        b,
        c: header.c,
        gram,
        pair,
        max_residual: header.max_residual,
        solves: header.solves,
    };
    Ok((header, kernel))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let g = GridSpec::new(std::f64::consts::PI / 2.0, 16).unwrap();
        let modes = ModeSet::ball(g, 5.0, 64).unwrap();
        let mut k = QuadKernel::free(&modes);
        k.b[(0, 1)] = C::new(0.25, -1.5);
        k.c = -3.125;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kernel.bin");
        let tol = Tolerances::default();
        let h = write_kernel_dump(&path, &modes, &k, 4.0, 5.0, &tol).unwrap();
        let (h2, k2) = read_kernel_dump(&path).unwrap();
        assert_eq!(h, h2);
        assert_eq!(k.h, k2.h);
        assert_eq!(k.b, k2.b);
        assert_eq!(k.c, k2.c);
        assert_eq!(h2.integers, modes.integers);
    }
}
