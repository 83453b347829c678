//! Little-endian binary dump for debugging grids and cost volumes.
//!
//! Layout:
//! - magic: 8 bytes, `MVGRID01`
//! - dtype: u8 (1 = f64 little-endian, 2 = u8)
//! - ndims: u8 (1..=4)
//! - dims: ndims × u32 little-endian, slowest-varying first
//! - payload: product(dims) elements, row-major

use std::io::{self, Read, Write};

pub const GRID_MAGIC: &[u8; 8] = b"MVGRID01";

const DTYPE_F64: u8 = 1;
const DTYPE_U8: u8 = 2;
const MAX_ELEMENTS: u64 = 1 << 30;

fn write_header<W: Write>(w: &mut W, dtype: u8, dims: &[u32]) -> io::Result<()> {
    assert!(!dims.is_empty() && dims.len() <= 4, "1 to 4 dims supported");
    w.write_all(GRID_MAGIC)?;
    w.write_all(&[dtype, dims.len() as u8])?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    Ok(())
}

fn read_header<R: Read>(r: &mut R, want_dtype: u8) -> io::Result<(Vec<u32>, usize)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != GRID_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad grid magic"));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    if head[0] != want_dtype {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("dtype {} does not match requested {}", head[0], want_dtype),
        ));
    }
    let ndims = head[1] as usize;
    if ndims == 0 || ndims > 4 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad dim count"));
    }
    let mut dims = Vec::with_capacity(ndims);
    let mut count: u64 = 1;
    for _ in 0..ndims {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        let d = u32::from_le_bytes(b);
        count = count
            .checked_mul(d as u64)
            .filter(|&c| c <= MAX_ELEMENTS)
            .ok_or_else(|| {
                io::Error::new(io::ErrorKind::InvalidData, "grid too large")
            })?;
        dims.push(d);
    }
    Ok((dims, count as usize))
}

pub fn write_grid_f64<W: Write>(w: &mut W, dims: &[u32], data: &[f64]) -> io::Result<()> {
    let expect: u64 = dims.iter().map(|&d| d as u64).product();
    assert_eq!(expect, data.len() as u64, "dims inconsistent with payload");
    write_header(w, DTYPE_F64, dims)?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid_f64<R: Read>(r: &mut R) -> io::Result<(Vec<u32>, Vec<f64>)> {
    let (dims, count) = read_header(r, DTYPE_F64)?;
    let mut data = Vec::with_capacity(count);
    let mut b = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut b)?;
        data.push(f64::from_le_bytes(b));
    }
    Ok((dims, data))
}

pub fn write_grid_u8<W: Write>(w: &mut W, dims: &[u32], data: &[u8]) -> io::Result<()> {
    let expect: u64 = dims.iter().map(|&d| d as u64).product();
    assert_eq!(expect, data.len() as u64, "dims inconsistent with payload");
    write_header(w, DTYPE_U8, dims)?;
    w.write_all(data)
}

pub fn read_grid_u8<R: Read>(r: &mut R) -> io::Result<(Vec<u32>, Vec<u8>)> {
    let (dims, count) = read_header(r, DTYPE_U8)?;
    let mut data = vec![0u8; count];
    r.read_exact(&mut data)?;
    Ok((dims, data))
}
