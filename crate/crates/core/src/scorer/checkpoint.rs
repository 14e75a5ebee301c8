//! Binary checkpoint: `"IVSP"`, `u32` version, `u32` header length, a JSON
//! header `{config, input_dim}`, then every tensor as `u32` name length,
//! UTF-8 name, `u32` rows, `u32` cols and row-major little-endian `f64`s.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ScorerConfig, ScorerParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"IVSP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ScorerConfig,
    input_dim: usize,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn write_checkpoint(path: &Path, config: &ScorerConfig, params: &ScorerParams) -> Result<()> {
    params.check_shapes(config)?;
    let header = serde_json::to_vec(&Header {
        config: config.clone(),
        input_dim: params.input_dim(),
    })
    .map_err(|e| Error::json(path, e))?;
    let mut buf = Vec::with_capacity(16 + header.len() + params.n_params() * 8);
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION as usize);
    put_u32(&mut buf, header.len());
    buf.extend_from_slice(&header);
    for (name, t) in params.named() {
        put_u32(&mut buf, name.len());
        buf.extend_from_slice(name.as_bytes());
        put_u32(&mut buf, t.nrows());
        put_u32(&mut buf, t.ncols());
        for v in t.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.to_owned(),
                expected: (self.pos + n) as u64,
                actual: self.bytes.len() as u64,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn read_checkpoint(path: &Path) -> Result<(ScorerConfig, ScorerParams)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { path, bytes: &bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_owned(),
            expected: CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::BadVersion {
            path: path.to_owned(),
            found: version as u32,
        });
    }
    let header_len = r.u32()?;
    let header: Header = serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::json(path, e))?;
    header.config.validate()?;
    let mut params = ScorerParams::init(&header.config, header.input_dim)?;
    for (name, tensor) in params.named_mut() {
        let len = r.u32()?;
        let found = String::from_utf8_lossy(r.take(len)?).into_owned();
        if found != name {
            return Err(Error::Invalid(format!(
                "{}: expected tensor {name}, found {found}",
                path.display()
            )));
        }
        let (rows, cols) = (r.u32()?, r.u32()?);
        if (rows, cols) != tensor.dim() {
            return Err(Error::Invalid(format!(
                "{}: tensor {name} has shape {:?}, config implies {:?}",
                path.display(),
                (rows, cols),
                tensor.dim()
            )));
        }
        let data: Vec<f64> = r
            .take(rows * cols * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *tensor = Array2::from_shape_vec((rows, cols), data).expect("length checked");
    }
    if r.pos != bytes.len() {
        return Err(Error::TrailingBytes {
            path: path.to_owned(),
            expected: r.pos as u64,
            actual: bytes.len() as u64,
        });
    }
    if let Some(name) = params.first_non_finite() {
        return Err(Error::Invalid(format!("{}: non-finite value in {name}", path.display())));
    }
    Ok((header.config, params))
}
