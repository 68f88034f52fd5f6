//! VXT1 binary snapshots of a spectral vorticity field.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `VXT1` |
//! | 4 | `k_max` (u32) |
//! | 4 | `n_r` (u32) |
//! | 8 | `r0` (f64) |
//! | 8 | `r_max` (f64) |
//! | 4 | stretching code (u32): 0 uniform, 1 geometric |
//! | 8 | stretching ratio (f64), 1 for uniform |
//! | 8·n_r | node coordinates |
//! | 16·n_r per mode | `(re, im)` pairs, modes `0, 1, −1, 2, −2, …, K, −K` |
//!
//! Negative modes are stored explicitly and must be the bitwise conjugates
//! of the positive ones.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use vortex_core::grid::{RadialGrid, SpectralField, Stretching};
use vortex_core::Complex64;

use crate::error::CliError;

pub const MAGIC: &[u8; 4] = b"VXT1";

/// Bytes before the node coordinates.
pub const HEADER_LEN: usize = 40;

/// Serializes `w` into a byte buffer.
pub fn encode(w: &SpectralField) -> Vec<u8> {
    let grid = w.grid();
    let k_max = w.k_max();
    let n = grid.n_r();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n + 16 * n * (2 * k_max + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(k_max as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&grid.r0().to_le_bytes());
    out.extend_from_slice(&grid.r_max().to_le_bytes());
    out.extend_from_slice(&grid.stretching().code().to_le_bytes());
    out.extend_from_slice(&grid.stretching().ratio().to_le_bytes());
    for x in grid.nodes() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let mut put = |mode: &mut dyn Iterator<Item = Complex64>| {
        for z in mode {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    };
    put(&mut w.mode(0).iter().copied());
    for k in 1..=k_max {
        put(&mut w.mode(k).iter().copied());
        put(&mut w.mode(k).iter().map(|z| z.conj()));
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], String> {
        let end = self.at + N;
        let s = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| format!("truncated at byte {}", self.at))?;
        self.at = end;
        Ok(s.try_into().expect("slice length"))
    }
    fn u32(&mut self) -> Result<u32, String> {
        self.take::<4>().map(u32::from_le_bytes)
    }
    fn f64(&mut self) -> Result<f64, String> {
        self.take::<8>().map(f64::from_le_bytes)
    }
    fn complex(&mut self) -> Result<Complex64, String> {
        Ok(Complex64::new(self.f64()?, self.f64()?))
    }
}

/// Parses a snapshot from bytes; the message describes the first defect.
pub fn decode(bytes: &[u8]) -> Result<SpectralField, String> {
    let mut c = Cursor { bytes, at: 0 };
    if &c.take::<4>()? != MAGIC {
        return Err("bad magic, expected VXT1".into());
    }
    let k_max = c.u32()? as usize;
    let n = c.u32()? as usize;
    let r0 = c.f64()?;
    let r_max = c.f64()?;
    let code = c.u32()?;
    let ratio = c.f64()?;
    let stretching = Stretching::from_code(code, ratio).ok_or_else(|| format!("unknown stretching code {code}"))?;
    let expected = HEADER_LEN + 8 * n + 16 * n * (2 * k_max + 1);
    if bytes.len() != expected {
        return Err(format!(
            "expected {expected} bytes for k_max = {k_max}, n_r = {n}, found {}",
            bytes.len()
        ));
    }
    let nodes = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
    if nodes.first() != Some(&r0) || nodes.last() != Some(&r_max) {
        return Err("node coordinates disagree with r0/r_max".into());
    }
    let grid = RadialGrid::from_nodes(nodes, stretching).map_err(|e| e.to_string())?;
    let mut modes = Vec::with_capacity(k_max + 1);
    modes.push((0..n).map(|_| c.complex()).collect::<Result<Vec<_>, _>>()?);
    for k in 1..=k_max {
        let pos = (0..n).map(|_| c.complex()).collect::<Result<Vec<_>, _>>()?;
        for (i, p) in pos.iter().enumerate() {
            let q = c.complex()?;
            let conj = p.conj();
            if q.re.to_bits() != conj.re.to_bits() || q.im.to_bits() != conj.im.to_bits() {
                return Err(format!("mode −{k} at node {i} is not the conjugate of mode {k}"));
            }
        }
        modes.push(pos);
    }
    SpectralField::from_modes(grid, modes).map_err(|e| e.to_string())
}

pub fn write(path: &Path, w: &SpectralField) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(&encode(w))
        .and_then(|_| f.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> Result<SpectralField, CliError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e: io::Error| CliError::io(path, e))?;
    decode(&bytes).map_err(|message| CliError::Format {
        path: path.to_path_buf(),
        message,
    })
}
