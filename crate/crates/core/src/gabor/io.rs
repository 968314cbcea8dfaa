//! Bitstring and coefficient serialization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GaborGrid, GaborMap, RobustBitstring};
use crate::error::{Error, Result};

const MAGIC: &str = "SPECKLE-BITSTRING v1";

fn pack(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

fn unpack(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

/// Text header followed by packed bits and packed mask (LSB first).
pub fn write_bitstring(bits: &RobustBitstring, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::at_path(path, e))?;
    let mut out = BufWriter::new(file);
    let g = &bits.grid;
    let res = (|| -> std::io::Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "w={}", g.w)?;
        writeln!(out, "k_mag={}", g.k_mag)?;
        writeln!(out, "psi1={}", g.psi1)?;
        writeln!(out, "pitch={}", g.pitch)?;
        writeln!(out, "extent={}", g.extent)?;
        writeln!(out, "origin_x={}", g.origin[0])?;
        writeln!(out, "origin_y={}", g.origin[1])?;
        writeln!(out, "threshold={}", bits.threshold)?;
        writeln!(out, "n_bits={}", bits.bits.len())?;
        writeln!(out, "n_robust={}", bits.robust_count())?;
        writeln!(out, "layout=row-major lattice, direction-major")?;
        writeln!(out, "end_header")?;
        out.write_all(&pack(&bits.bits))?;
        out.write_all(&pack(&bits.mask))?;
        out.flush()
    })();
    res.map_err(|e| Error::at_path(path, e))
}

pub fn read_bitstring(path: &Path) -> Result<RobustBitstring> {
    let file = File::open(path).map_err(|e| Error::at_path(path, e))?;
    let mut input = BufReader::new(file);
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Parse(format!("{}: not a bitstring file", path.display())));
    }
    let mut keys = BTreeMap::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Parse("bitstring header not terminated".into()));
        }
        let l = line.trim_end();
        if l == "end_header" {
            break;
        }
        if let Some((k, v)) = l.split_once('=') {
            keys.insert(k.to_string(), v.to_string());
        }
    }
    fn field<T: std::str::FromStr>(keys: &BTreeMap<String, String>, k: &str) -> Result<T> {
        keys.get(k)
            .ok_or_else(|| Error::Parse(format!("missing header key `{k}`")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad value for header key `{k}`")))
    }
    let grid = GaborGrid::new(
        field(&keys, "w")?,
        field(&keys, "k_mag")?,
        field(&keys, "psi1")?,
        field(&keys, "pitch")?,
        field(&keys, "extent")?,
        [field(&keys, "origin_x")?, field(&keys, "origin_y")?],
    )?;
    let n: usize = field(&keys, "n_bits")?;
    if n != 2 * grid.n_points() {
        return Err(Error::Parse(format!("n_bits {n} does not match the lattice")));
    }
    let mut payload = vec![0u8; 2 * n.div_ceil(8)];
    input
        .read_exact(&mut payload)
        .map_err(|_| Error::Parse("bitstring payload truncated".into()))?;
    let (b, m) = payload.split_at(n.div_ceil(8));
    let out = RobustBitstring {
        grid,
        threshold: field(&keys, "threshold")?,
        bits: unpack(b, n),
        mask: unpack(m, n),
    };
    let robust: usize = field(&keys, "n_robust")?;
    if robust != out.robust_count() {
        return Err(Error::Parse("n_robust does not match the mask".into()));
    }
    Ok(out)
}

/// CSV with columns `x, y, direction, G` (pixel positions, direction 0 or 1).
pub fn write_gabor_csv(gmap: &GaborMap, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["x", "y", "direction", "G"])?;
    let g = gmap.grid();
    let n = g.n_side();
    for d in 0..2 {
        for j in 0..n {
            for i in 0..n {
                let p = g.point(i, j);
                let v = gmap.direction(d)[j * n + i];
                wtr.write_record([
                    p[0].to_string(),
                    p[1].to_string(),
                    d.to_string(),
                    v.to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
