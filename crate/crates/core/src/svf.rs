//! `SVF1` binary field files and CSV slice export.
//!
//! Layout (all little-endian): magic `SVF1`, `u32 d`, `u32 m`, `d × u32 n`
//! (nodes per axis), `f64 L`, `f64 h`, then `n^d · m` `f64` values in the
//! [`Field`] storage order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"SVF1";

pub fn write_field<W: Write>(mut w: W, u: &Field) -> Result<()> {
    let g = u.grid();
    w.write_all(MAGIC)?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(u.components() as u32).to_le_bytes())?;
    for _ in 0..g.dim() {
        w.write_all(&(g.n() as u32).to_le_bytes())?;
    }
    w.write_all(&g.half_width().to_le_bytes())?;
    w.write_all(&g.spacing().to_le_bytes())?;
    for v in u.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Input("not an SVF1 file (bad magic)".into()));
    }
    let d = read_u32(&mut r)? as usize;
    let m = read_u32(&mut r)? as usize;
    if !(1..=3).contains(&d) || m == 0 {
        return Err(Error::Input(format!("bad SVF1 header: d = {d}, m = {m}")));
    }
    let mut n = Vec::with_capacity(d);
    for _ in 0..d {
        n.push(read_u32(&mut r)? as usize);
    }
    if n.iter().any(|&k| k != n[0]) {
        return Err(Error::Input(format!("non-uniform node counts {n:?}")));
    }
    let half_width = read_f64(&mut r)?;
    let h = read_f64(&mut r)?;
    let grid = Grid::new(d, half_width, n[0])?;
    if (grid.spacing() - h).abs() > 1e-12 * h.abs() {
        return Err(Error::Input(format!(
            "spacing {h} inconsistent with L = {half_width}, n = {}",
            n[0]
        )));
    }
    let count = grid.node_count() * m;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(read_f64(&mut r)?);
    }
    Field::from_vec(grid, m, data)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Writes a 1-D field, a 2-D field, or the axis-0 mid-slice of a 3-D field
/// as CSV with columns `x0[,x1],u0,…,u{m-1}`.
pub fn write_csv_slice<W: Write>(w: W, u: &Field) -> Result<()> {
    let g = u.grid();
    let m = u.components();
    let mut out = csv::Writer::from_writer(w);
    let plane = g.dim().min(2);
    let mut header: Vec<String> = (0..plane).map(|a| format!("x{a}")).collect();
    header.extend((0..m).map(|c| format!("u{c}")));
    out.write_record(&header).map_err(csv_err)?;
    let fixed = g.nearest_index(0.0);
    for k in 0..g.node_count() {
        let idx = g.unravel(k);
        if g.dim() == 3 && idx[0] != fixed {
            continue;
        }
        let p = g.point(k);
        let coords = if g.dim() == 3 { &p[1..3] } else { &p[..plane] };
        let mut rec: Vec<String> = coords.iter().map(|v| format!("{v:e}")).collect();
        rec.extend((0..m).map(|c| format!("{:e}", u.at(k, c))));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
