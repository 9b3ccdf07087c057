//! Binary tensor-train container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! u8   version (1)
//! u8   kind (0 real, 1 complex)
//! u32  N
//! N x (u32 left, u32 phys, u32 right)
//! core entries in site order, each core row-major (left, phys, right);
//! f64 per real entry, (re, im) f64 pair per complex entry
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use ndarray_linalg::c64;

use crate::error::{Error, Result};
use crate::tt::{ComplexTT, Field, RealTT, ScalarKind, TensorTrain};

pub const FORMAT_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum AnyTT {
    Real(RealTT),
    Complex(ComplexTT),
}

impl AnyTT {
    pub fn into_real(self) -> Result<RealTT> {
        match self {
            AnyTT::Real(tt) => Ok(tt),
            AnyTT::Complex(_) => Err(Error::Format("expected a real tensor train, found complex".into())),
        }
    }
}

fn kind_byte(kind: ScalarKind) -> u8 {
    match kind {
        ScalarKind::Real => 0,
        ScalarKind::Complex => 1,
    }
}

fn put_u32(w: &mut impl Write, x: usize) -> Result<()> {
    let x = u32::try_from(x).map_err(|_| Error::Format(format!("dimension {x} does not fit in u32")))?;
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

pub fn write_tt<T: Field>(w: &mut impl Write, tt: &TensorTrain<T>) -> Result<()> {
    w.write_all(&[FORMAT_VERSION, kind_byte(T::KIND)])?;
    put_u32(w, tt.len())?;
    for core in tt.cores() {
        let (l, d, r) = core.dim();
        put_u32(w, l)?;
        put_u32(w, d)?;
        put_u32(w, r)?;
    }
    for core in tt.cores() {
        for x in core.iter() {
            w.write_all(&x.re().to_le_bytes())?;
            if T::KIND == ScalarKind::Complex {
                w.write_all(&x.im().to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn get_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn get_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_cores<T, R: Read>(r: &mut R, shapes: &[(usize, usize, usize)], mut entry: impl FnMut(&mut R) -> Result<T>) -> Result<Vec<Array3<T>>> {
    shapes
        .iter()
        .map(|&shape| {
            let len = shape.0 * shape.1 * shape.2;
            let data = (0..len).map(|_| entry(r)).collect::<Result<Vec<T>>>()?;
            Ok(Array3::from_shape_vec(shape, data).expect("sized"))
        })
        .collect()
}

pub fn read_tt(r: &mut impl Read) -> Result<AnyTT> {
    let version = get_u8(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let kind = get_u8(r)?;
    let n = get_u32(r)?;
    if n == 0 || n > 4096 {
        return Err(Error::Format(format!("implausible site count {n}")));
    }
    let shapes = (0..n).map(|_| Ok((get_u32(r)?, get_u32(r)?, get_u32(r)?))).collect::<Result<Vec<_>>>()?;
    if shapes.iter().any(|&(l, d, rr)| l.saturating_mul(d).saturating_mul(rr) > 1 << 28) {
        return Err(Error::Format("core too large".into()));
    }
    let tt = match kind {
        0 => AnyTT::Real(RealTT::new(read_cores(r, &shapes, get_f64)?)?),
        1 => AnyTT::Complex(ComplexTT::new(read_cores(r, &shapes, |r| Ok(c64::new(get_f64(r)?, get_f64(r)?)))?)?),
        k => return Err(Error::Format(format!("unknown scalar kind {k}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after tensor train".into()));
    }
    Ok(tt)
}

pub fn save_tt<T: Field>(path: impl AsRef<Path>, tt: &TensorTrain<T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tt(&mut w, tt)?;
    w.flush()?;
    Ok(())
}

pub fn load_tt(path: impl AsRef<Path>) -> Result<AnyTT> {
    read_tt(&mut BufReader::new(File::open(path)?))
}
