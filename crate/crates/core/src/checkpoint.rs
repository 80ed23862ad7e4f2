//! Binary snapshots of spectral fields.
//!
//! Layout, all little-endian: the magic `MHDTC1`; u32 `Nr, Mmax, Kmax,
//! ncomp`; f64 `R1, R2, time`; then `ncomp·(2Mmax+1)(2Kmax+1)(Nr+1)`
//! coefficients as interleaved `(re, im)` f64 pairs, component-major, then
//! `m`, then `k`, then the radial node. A snapshot of `(v, B)` has six
//! components. The axial period is not stored and must be the default.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{BcTag, SpectralField};
use crate::grid::{build_radial_grid, ModeSet, RadialGrid};

pub const MAGIC: &[u8; 6] = b"MHDTC1";

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub time: f64,
    pub grid: Arc<RadialGrid>,
    pub modes: ModeSet,
    /// One entry per 3-component field, tagged [`BcTag::None`].
    pub fields: Vec<SpectralField>,
}

impl Checkpoint {
    /// `(v, B)` with their boundary tags.
    pub fn into_pair(self) -> Result<(SpectralField, SpectralField)> {
        let n = self.fields.len();
        let mut it = self.fields.into_iter();
        match (it.next(), it.next(), n) {
            (Some(v), Some(b), 2) => Ok((v.with_bc(BcTag::DirichletVelocity), b.with_bc(BcTag::ConductingMagnetic))),
            _ => Err(Error::Checkpoint(format!("expected 6 components, found {}", 3 * n))),
        }
    }
}

pub fn write(mut w: impl Write, fields: &[&SpectralField], time: f64) -> Result<()> {
    let first = fields.first().ok_or_else(|| Error::Checkpoint("nothing to write".into()))?;
    let (grid, modes) = (&first.grid, first.modes);
    if modes.lz != ModeSet::new(0, 0).lz {
        return Err(Error::Checkpoint(format!("axial period lz = {} cannot be stored", modes.lz)));
    }
    for f in fields {
        if f.modes != modes || f.grid.nr != grid.nr || f.grid.r1 != grid.r1 || f.grid.r2 != grid.r2 {
            return Err(Error::Checkpoint("fields live on different discretisations".into()));
        }
    }
    let as_u32 = |x: usize| u32::try_from(x).map_err(|_| Error::Checkpoint(format!("{x} does not fit in u32")));
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    let mut head = Vec::with_capacity(6 + 16 + 24);
    head.extend_from_slice(MAGIC);
    for x in [grid.nr, modes.mmax, modes.kmax, 3 * fields.len()] {
        head.extend_from_slice(&as_u32(x)?.to_le_bytes());
    }
    for x in [grid.r1, grid.r2, time] {
        head.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&head).map_err(io)?;
    for f in fields {
        let mut buf = Vec::with_capacity(16 * f.coeffs().len());
        for c in f.coeffs() {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read(mut r: impl Read) -> Result<Checkpoint> {
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut u = [0u8; 4];
    let mut ints = [0usize; 4];
    for x in &mut ints {
        r.read_exact(&mut u).map_err(io)?;
        *x = u32::from_le_bytes(u) as usize;
    }
    let mut d = [0u8; 8];
    let mut floats = [0f64; 3];
    for x in &mut floats {
        r.read_exact(&mut d).map_err(io)?;
        *x = f64::from_le_bytes(d);
    }
    let [nr, mmax, kmax, ncomp] = ints;
    let [r1, r2, time] = floats;
    if ncomp == 0 || ncomp % 3 != 0 {
        return Err(Error::Checkpoint(format!("component count {ncomp} is not a positive multiple of 3")));
    }
    let grid = Arc::new(build_radial_grid(r1, r2, nr).map_err(|e| Error::Checkpoint(e.to_string()))?);
    let modes = ModeSet::new(mmax, kmax);
    let per_field = 3 * modes.count() * grid.len();
    let mut fields = Vec::with_capacity(ncomp / 3);
    let mut raw = vec![0u8; 16 * per_field];
    for _ in 0..ncomp / 3 {
        r.read_exact(&mut raw).map_err(io)?;
        let coeffs = raw
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                C64::new(re, im)
            })
            .collect();
        fields.push(SpectralField::from_coeffs(grid.clone(), modes, BcTag::None, coeffs)?);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(io)? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint { time, grid, modes, fields })
}

pub fn save(path: &Path, fields: &[&SpectralField], time: f64) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write(BufWriter::new(f), fields, time)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read(BufReader::new(f))
}
