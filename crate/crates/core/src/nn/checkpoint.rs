//! Flat binary parameter checkpoints.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RQNP"
//! 4       4     format version (u32, currently 1)
//! 8       4     parameter count P (u32)
//! 12      ...   P header records, in ascending name order:
//!                 name_len (u32), name (UTF-8 bytes),
//!                 ndim (u32), dims (u64 × ndim)
//! ...     ...   P value blocks in the same order: f64 LE, row-major,
//!                 Πdims values each
//! ```
//!
//! Gradient buffers are not stored; loading yields zeroed gradients.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::nn::{ModelParams, Tensor};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RQNP";
const VERSION: u32 = 1;

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let count = params.iter().count() as u32;
    w.write_all(&count.to_le_bytes())?;
    for (name, tensor) in params.iter() {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &dim in tensor.shape() {
            w.write_all(&(dim as u64).to_le_bytes())?;
        }
    }
    for (_, tensor) in params.iter() {
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let b = read_exact(r, 4)?;
    Ok(u32::from_le_bytes(b.try_into().unwrap()))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_exact(&mut r, 4)?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut headers = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let name = String::from_utf8(read_exact(&mut r, name_len)?)
            .map_err(|e| Error::Checkpoint(format!("bad name: {e}")))?;
        let ndim = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let b = read_exact(&mut r, 8)?;
            shape.push(u64::from_le_bytes(b.try_into().unwrap()) as usize);
        }
        headers.push((name, shape));
    }
    let mut params = ModelParams::new();
    for (name, shape) in headers {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let b = read_exact(&mut r, 8)?;
            data.push(f64::from_le_bytes(b.try_into().unwrap()));
        }
        params.insert(&name, Tensor::from_vec(&shape, data)?);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut p = ModelParams::new();
        p.insert("w", Tensor::from_vec(&[2, 2], vec![0.1, -0.2, 1e-300, 3.5e10]).unwrap());
        p.insert("b", Tensor::from_vec(&[1], vec![-0.0]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        save(&p, &path).unwrap();
        let q = load(&path).unwrap();
        assert_eq!(q.value("w"), p.value("w"));
        assert_eq!(q.value("b").data()[0].to_bits(), p.value("b").data()[0].to_bits());
        assert_eq!(q.grad("w").data(), &[0.0; 4]);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOPE....").unwrap();
        assert!(matches!(load(&path), Err(Error::Checkpoint(_))));
    }
}
